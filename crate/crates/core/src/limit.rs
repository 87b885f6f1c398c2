//! The predicted limit of the expected normalized zero measure.
//!
//! Two pieces, both weighted by the kernel log(r/|z|) when paired:
//!
//! * an absolutely continuous part with planar density
//!   |f| Xi(|f|) Q / (2 pi), where Q is the log-norm Laplacian scalar from
//!   [`crate::basis::BasisSystem::laplacian_log_norm`] and Xi gates it to the
//!   region S = sum |f_j|^2 > 1 (density Q/pi there, 0 where S < 1);
//! * a singular part on the level curve C = { S = 1, f' != 0 }, extracted by
//!   marching squares and weighted per segment by the argument 1-form
//!   sum_j Im(conj(f_j) f_j' tau).
//!
//! With the `TwoPi` normalization the curve weight carries a 1/(2 pi) factor,
//! which makes the one-function specialization the uniform probability
//! measure on |f| = 1; `PaperLiteral` leaves the raw 1-form, whose total on
//! that circle is 2 pi. Both are computable side by side.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::measures::{BinGrid, TestFunction};

/// The radial gate: 2/x above 1, 0 below, 1 on the (area-zero) curve itself.
pub fn xi(x: f64) -> f64 {
    if x > 1.0 {
        2.0 / x
    } else if x == 1.0 {
        1.0
    } else {
        0.0
    }
}

/// |f'| below this counts as a degenerate point of the level curve.
pub const DEGENERATE_DERIV: f64 = 1e-8;

/// Planar density of the a.c. part: |f| Xi(|f|) Q / (2 pi).
///
/// Equals Q/pi where S > 1 and 0 where S < 1; tiny negative Q from rounding
/// is clamped so densities stay nonnegative.
pub fn ac_density(basis: &BasisSystem, z: Complex64) -> Result<f64> {
    let s = basis.norm_squared(z)?;
    if s == 0.0 {
        return Err(Error::CommonZero { z });
    }
    let modulus = s.sqrt();
    let gate = modulus * xi(modulus);
    if gate == 0.0 {
        return Ok(0.0);
    }
    let q = basis.laplacian_log_norm(z)?;
    Ok(gate * q.max(0.0) / std::f64::consts::TAU)
}

/// Normalization convention for the curve 1-form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveNormalization {
    /// 1/(2 pi) factor; the one-function case integrates to total mass 1.
    TwoPi,
    /// The displayed 1-form as-is; the same case integrates to 2 pi.
    PaperLiteral,
}

impl CurveNormalization {
    fn factor(self) -> f64 {
        match self {
            CurveNormalization::TwoPi => 1.0 / std::f64::consts::TAU,
            CurveNormalization::PaperLiteral => 1.0,
        }
    }
}

/// One polyline segment of the level curve with its measure weight.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurveSegment {
    pub a: Complex64,
    pub b: Complex64,
    pub weight: f64,
    /// The cell held a sampled point with |f'| < [`DEGENERATE_DERIV`]; such
    /// segments get weight 0 and are reported rather than dropped.
    pub degenerate: bool,
}

impl CurveSegment {
    pub fn midpoint(&self) -> Complex64 {
        0.5 * (self.a + self.b)
    }

    pub fn chord(&self) -> Complex64 {
        self.b - self.a
    }
}

/// Marching-squares extraction of { S(z) = 1 } over the window.
///
/// `resolution` is the cell count per side (>= 16). Segments are oriented
/// with the S > 1 side on the left and zero-length output is dropped;
/// weights are left at 0 for [`curve_weights`] to fill.
pub fn extract_level_curve(
    basis: &BasisSystem,
    window: [f64; 4],
    resolution: usize,
) -> Result<Vec<CurveSegment>> {
    let resolution = resolution.max(16);
    let [x0, x1, y0, y1] = window;
    let nx = resolution;
    let ny = resolution;
    let dx = (x1 - x0) / nx as f64;
    let dy = (y1 - y0) / ny as f64;

    // corner values of S - 1 and the degeneracy mask
    let mut values = vec![0.0f64; (nx + 1) * (ny + 1)];
    let mut degenerate = vec![false; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let z = Complex64::new(x0 + i as f64 * dx, y0 + j as f64 * dy);
            values[j * (nx + 1) + i] = basis.norm_squared(z)? - 1.0;
            let deriv_norm: f64 = basis
                .derivative_values(z)?
                .iter()
                .map(|d| d.norm_sqr())
                .sum();
            degenerate[j * (nx + 1) + i] = deriv_norm.sqrt() < DEGENERATE_DERIV;
        }
    }

    let interp = |za: Complex64, va: f64, zb: Complex64, vb: f64| -> Complex64 {
        // va and vb straddle zero; linear crossing
        let t = va / (va - vb);
        za + t * (zb - za)
    };

    let min_len = 1e-12 * dx.hypot(dy);
    let mut segments = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let idx = [
                j * (nx + 1) + i,         // SW
                j * (nx + 1) + i + 1,     // SE
                (j + 1) * (nx + 1) + i + 1, // NE
                (j + 1) * (nx + 1) + i,   // NW
            ];
            let z = [
                Complex64::new(x0 + i as f64 * dx, y0 + j as f64 * dy),
                Complex64::new(x0 + (i + 1) as f64 * dx, y0 + j as f64 * dy),
                Complex64::new(x0 + (i + 1) as f64 * dx, y0 + (j + 1) as f64 * dy),
                Complex64::new(x0 + i as f64 * dx, y0 + (j + 1) as f64 * dy),
            ];
            let v = [values[idx[0]], values[idx[1]], values[idx[2]], values[idx[3]]];
            let cell_degenerate = idx.iter().any(|&k| degenerate[k]);

            // corner pattern: bit set when S > 1 (strictly)
            let mut case = 0usize;
            for (bit, val) in v.iter().enumerate() {
                if *val > 0.0 {
                    case |= 1 << bit;
                }
            }
            if case == 0 || case == 15 {
                continue;
            }

            // crossing points on the four edges (SW-SE, SE-NE, NE-NW, NW-SW)
            let edge = |a: usize, b: usize| interp(z[a], v[a], z[b], v[b]);
            // each entry: (edge pair) -> directed segment keeping S>1 on the left
            let mut push = |from: Complex64, to: Complex64| {
                if (to - from).norm() > min_len {
                    segments.push(CurveSegment {
                        a: from,
                        b: to,
                        weight: 0.0,
                        degenerate: cell_degenerate,
                    });
                }
            };
            match case {
                1 => push(edge(0, 3), edge(0, 1)),
                2 => push(edge(0, 1), edge(1, 2)),
                3 => push(edge(0, 3), edge(1, 2)),
                4 => push(edge(1, 2), edge(2, 3)),
                5 => {
                    // saddle: disambiguate with the center value
                    let center = basis
                        .norm_squared(0.5 * (z[0] + z[2]))?
                        - 1.0;
                    if center > 0.0 {
                        push(edge(0, 3), edge(2, 3));
                        push(edge(1, 2), edge(0, 1));
                    } else {
                        push(edge(0, 3), edge(0, 1));
                        push(edge(1, 2), edge(2, 3));
                    }
                }
                6 => push(edge(0, 1), edge(2, 3)),
                7 => push(edge(0, 3), edge(2, 3)),
                8 => push(edge(2, 3), edge(0, 3)),
                9 => push(edge(2, 3), edge(0, 1)),
                10 => {
                    let center = basis
                        .norm_squared(0.5 * (z[0] + z[2]))?
                        - 1.0;
                    if center > 0.0 {
                        push(edge(0, 1), edge(0, 3));
                        push(edge(2, 3), edge(1, 2));
                    } else {
                        push(edge(0, 1), edge(1, 2));
                        push(edge(2, 3), edge(0, 3));
                    }
                }
                11 => push(edge(2, 3), edge(1, 2)),
                12 => push(edge(1, 2), edge(0, 3)),
                13 => push(edge(1, 2), edge(0, 1)),
                14 => push(edge(0, 1), edge(0, 3)),
                _ => unreachable!(),
            }
        }
    }
    Ok(segments)
}

fn signed_form(basis: &BasisSystem, seg: &CurveSegment) -> Result<f64> {
    let mid = seg.midpoint();
    let tau = seg.chord();
    let vals = basis.values(mid)?;
    let derivs = basis.derivative_values(mid)?;
    Ok(vals
        .iter()
        .zip(&derivs)
        .map(|(f, df)| (f.conj() * df * tau).im)
        .sum())
}

/// Assign argument-form weights to extracted segments.
///
/// Connected components are re-oriented so the signed form is nonnegative
/// along them; the absolute value then guards any segment the marching
/// squares left pointing the other way. Degenerate segments get weight 0.
pub fn curve_weights(
    mut segments: Vec<CurveSegment>,
    basis: &BasisSystem,
    normalization: CurveNormalization,
) -> Result<Vec<CurveSegment>> {
    if segments.is_empty() {
        return Ok(segments);
    }
    // chain segments into components by shared endpoints
    let scale: f64 = segments
        .iter()
        .map(|s| s.chord().norm())
        .fold(0.0, f64::max);
    let tol = 1e-9 * scale.max(1e-300);
    let m = segments.len();
    let mut component = vec![usize::MAX; m];
    let mut next_component = 0usize;
    for start in 0..m {
        if component[start] != usize::MAX {
            continue;
        }
        let id = next_component;
        next_component += 1;
        let mut frontier = vec![start];
        component[start] = id;
        while let Some(k) = frontier.pop() {
            let (a, b) = (segments[k].a, segments[k].b);
            for (j, other) in segments.iter().enumerate() {
                if component[j] != usize::MAX {
                    continue;
                }
                if (other.a - b).norm() <= tol
                    || (other.b - a).norm() <= tol
                    || (other.a - a).norm() <= tol
                    || (other.b - b).norm() <= tol
                {
                    component[j] = id;
                    frontier.push(j);
                }
            }
        }
    }

    let mut signed = vec![0.0f64; m];
    for (k, seg) in segments.iter().enumerate() {
        signed[k] = signed_form(basis, seg)?;
    }
    let mut component_total = vec![0.0f64; next_component];
    for k in 0..m {
        component_total[component[k]] += signed[k];
    }
    let factor = normalization.factor();
    for k in 0..m {
        if component_total[component[k]] < 0.0 {
            let s = segments[k];
            segments[k] = CurveSegment {
                a: s.b,
                b: s.a,
                ..s
            };
            signed[k] = -signed[k];
        }
        segments[k].weight = if segments[k].degenerate {
            0.0
        } else {
            factor * signed[k].abs()
        };
    }
    Ok(segments)
}

/// The limit measure on a window: a.c. density sampled at cell centers plus
/// the weighted level curve.
#[derive(Clone, Debug)]
pub struct LimitMeasure {
    pub basis: BasisSystem,
    pub window: [f64; 4],
    pub r: f64,
    pub resolution: usize,
    /// Row-major density at cell centers; 0 where gated off.
    pub densities: Vec<f64>,
    pub segments: Vec<CurveSegment>,
    pub normalization: CurveNormalization,
}

impl LimitMeasure {
    /// Build over `window` (which must contain the closed disk |z| <= r).
    pub fn build(
        basis: &BasisSystem,
        window: [f64; 4],
        r: f64,
        resolution: usize,
        normalization: CurveNormalization,
    ) -> Result<Self> {
        let [x0, x1, y0, y1] = window;
        if x0 > -r || x1 < r || y0 > -r || y1 < r {
            return Err(Error::WindowTooSmall { window, r });
        }
        let resolution = resolution.max(16);
        let dx = (x1 - x0) / resolution as f64;
        let dy = (y1 - y0) / resolution as f64;
        let mut densities = vec![0.0f64; resolution * resolution];
        for j in 0..resolution {
            for i in 0..resolution {
                let z = Complex64::new(
                    x0 + (i as f64 + 0.5) * dx,
                    y0 + (j as f64 + 0.5) * dy,
                );
                densities[j * resolution + i] = ac_density(basis, z)?;
            }
        }
        let segments = curve_weights(
            extract_level_curve(basis, window, resolution)?,
            basis,
            normalization,
        )?;
        Ok(LimitMeasure {
            basis: basis.clone(),
            window,
            r,
            resolution,
            densities,
            segments,
            normalization,
        })
    }

    fn cell_size(&self) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.window;
        (
            (x1 - x0) / self.resolution as f64,
            (y1 - y0) / self.resolution as f64,
        )
    }

    /// Integral of log(r/|z|) phi(z) against the a.c. part plus the weighted
    /// sum over curve segments, clipped to |z| < r.
    ///
    /// Cells cut by the disk boundary and cells near the origin (where the
    /// log kernel is integrable but unbounded) are refined by subsampling.
    pub fn pairing(&self, phi: &TestFunction) -> Result<f64> {
        let (dx, dy) = self.cell_size();
        let [x0, _, y0, _] = self.window;
        let r = self.r;
        let cell_diag = 0.5 * dx.hypot(dy);
        let near_origin_band = 1.5 * dx.max(dy);

        let mut total = 0.0;
        for j in 0..self.resolution {
            for i in 0..self.resolution {
                let center = Complex64::new(
                    x0 + (i as f64 + 0.5) * dx,
                    y0 + (j as f64 + 0.5) * dy,
                );
                let m = center.norm();
                if m - cell_diag >= r {
                    continue;
                }
                let density = self.densities[j * self.resolution + i];
                let straddles = m + cell_diag >= r;
                let near_origin = m <= near_origin_band;
                if !straddles && !near_origin {
                    if density > 0.0 {
                        total += density * (r / m).ln() * phi.eval(center) * dx * dy;
                    }
                    continue;
                }
                // refine: 16x16 subsample with fresh density where it matters
                let sub = 16;
                let sdx = dx / sub as f64;
                let sdy = dy / sub as f64;
                let mut cell_sum = 0.0;
                for sj in 0..sub {
                    for si in 0..sub {
                        let z = Complex64::new(
                            x0 + i as f64 * dx + (si as f64 + 0.5) * sdx,
                            y0 + j as f64 * dy + (sj as f64 + 0.5) * sdy,
                        );
                        let zm = z.norm();
                        if zm >= r || zm == 0.0 {
                            continue;
                        }
                        let rho = if near_origin {
                            ac_density(&self.basis, z).unwrap_or(density)
                        } else {
                            density
                        };
                        if rho > 0.0 {
                            cell_sum += rho * (r / zm).ln() * phi.eval(z);
                        }
                    }
                }
                total += cell_sum * sdx * sdy;
            }
        }

        for seg in &self.segments {
            if seg.weight == 0.0 {
                continue;
            }
            let mid = seg.midpoint();
            let m = mid.norm();
            if m >= r || m == 0.0 {
                continue;
            }
            total += seg.weight * (r / m).ln() * phi.eval(mid);
        }
        Ok(total)
    }

    /// Total curve mass inside |z| < r (no log kernel), for curve-density
    /// predictions of raw zero counts.
    pub fn curve_mass_where<F: Fn(Complex64) -> bool>(&self, keep: F) -> f64 {
        self.segments
            .iter()
            .filter(|s| keep(s.midpoint()))
            .map(|s| s.weight)
            .sum()
    }

    /// The measure binned on an annular-sector grid, log kernel included.
    pub fn bin_masses(&self, grid: &BinGrid) -> Result<Vec<f64>> {
        let (dx, dy) = self.cell_size();
        let [x0, _, y0, _] = self.window;
        let r = grid.r;
        let mut out = vec![0.0; grid.len()];
        let cell_diag = 0.5 * dx.hypot(dy);
        let near_origin_band = 1.5 * dx.max(dy);
        for j in 0..self.resolution {
            for i in 0..self.resolution {
                let center = Complex64::new(
                    x0 + (i as f64 + 0.5) * dx,
                    y0 + (j as f64 + 0.5) * dy,
                );
                let density = self.densities[j * self.resolution + i];
                if density == 0.0 {
                    continue;
                }
                let m = center.norm();
                if m - cell_diag >= r {
                    continue;
                }
                if m + cell_diag >= r || m <= near_origin_band {
                    let sub = 8;
                    let sdx = dx / sub as f64;
                    let sdy = dy / sub as f64;
                    for sj in 0..sub {
                        for si in 0..sub {
                            let z = Complex64::new(
                                x0 + i as f64 * dx + (si as f64 + 0.5) * sdx,
                                y0 + j as f64 * dy + (sj as f64 + 0.5) * sdy,
                            );
                            if let Some(b) = grid.index(z) {
                                out[b] += density * (r / z.norm()).ln() * sdx * sdy;
                            }
                        }
                    }
                } else if let Some(b) = grid.index(center) {
                    out[b] += density * (r / m).ln() * dx * dy;
                }
            }
        }
        for seg in &self.segments {
            if seg.weight == 0.0 {
                continue;
            }
            let mid = seg.midpoint();
            if let Some(b) = grid.index(mid) {
                out[b] += seg.weight * (r / mid.norm()).ln();
            }
        }
        Ok(out)
    }

    /// CSV of the density grid: x, y, density.
    pub fn write_ac_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let (dx, dy) = self.cell_size();
        let [x0, _, y0, _] = self.window;
        writeln!(out, "x,y,density")?;
        for j in 0..self.resolution {
            for i in 0..self.resolution {
                writeln!(
                    out,
                    "{:.9e},{:.9e},{:.9e}",
                    x0 + (i as f64 + 0.5) * dx,
                    y0 + (j as f64 + 0.5) * dy,
                    self.densities[j * self.resolution + i]
                )?;
            }
        }
        Ok(())
    }

    /// CSV of the weighted curve: x0, y0, x1, y1, weight, degenerate.
    pub fn write_curve_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x0,y0,x1,y1,weight,degenerate")?;
        for s in &self.segments {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.9e},{}",
                s.a.re,
                s.a.im,
                s.b.re,
                s.b.im,
                s.weight,
                u8::from(s.degenerate)
            )?;
        }
        Ok(())
    }
}
