//! Zero location for sampled functions inside a disk.
//!
//! Polynomial samples expand to monomial coefficients and go through the
//! simultaneous Ehrlich-Aberth solver; everything else goes through argument-
//! principle quadtree subdivision with Newton polishing. Both paths finish
//! the same way: cluster, filter to |z| < r, and verify that the located
//! multiplicities add up to the whole-disk contour count.

pub mod polynomial;
pub mod winding;

pub use polynomial::aberth_roots;
pub use winding::{count_zeros_in_box, count_zeros_in_disk, Rect};

use num_complex::Complex64;

use crate::basis::BasisSystem;
use crate::ensemble::SampledFunction;
use crate::error::{Error, Result};

/// Expanded-degree cap for polynomial conversion.
pub const DEGREE_CAP: usize = 10_000;

/// Trailing coefficients below this fraction of the largest are trimmed.
pub const TRIM_THRESHOLD: f64 = 1e-14;

/// Roots closer than this fraction of the disk radius merge into one zero.
pub const CLUSTER_RADIUS: f64 = 1e-8;

/// Zeros within this fraction of the radius from the origin are flagged.
pub const ORIGIN_BAND: f64 = 1e-12;

/// Access to G and G' for the contour and Newton machinery.
pub trait HoloFn {
    fn value_deriv(&self, z: Complex64) -> Result<(Complex64, Complex64)>;
}

/// Monomial-coefficient view (low degree first).
pub struct PolyFn<'a> {
    pub coeffs: &'a [Complex64],
}

impl HoloFn for PolyFn<'_> {
    fn value_deriv(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let mut p = Complex64::ZERO;
        let mut dp = Complex64::ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        if p.re.is_finite() && p.im.is_finite() && dp.re.is_finite() && dp.im.is_finite() {
            Ok((p, dp))
        } else {
            Err(Error::EvalOverflow { z })
        }
    }
}

/// Term-list view of a sampled function.
pub struct SampleFn<'a> {
    pub sample: &'a SampledFunction,
    pub basis: &'a BasisSystem,
}

impl HoloFn for SampleFn<'_> {
    fn value_deriv(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        self.sample.eval_with_deriv(self.basis, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Polynomial,
    ArgumentPrinciple,
}

/// A located zero.
#[derive(Clone, Copy, Debug)]
pub struct Zero {
    pub location: Complex64,
    pub multiplicity: u32,
    /// |G| at the polished location.
    pub residual: f64,
    /// Within [`ORIGIN_BAND`] * r of the origin; excluded from measures.
    pub near_origin: bool,
}

/// All zeros of one sample inside |z| < radius.
#[derive(Clone, Debug)]
pub struct ZeroSet {
    pub zeros: Vec<Zero>,
    pub radius: f64,
    pub method: Method,
    /// max |G(z*)| over the reported zeros.
    pub max_residual: f64,
    /// Whole-disk argument-principle count, at `count_radius`.
    pub disk_count: i64,
    /// Equals `radius` unless a boundary zero forced dilation.
    pub count_radius: f64,
}

impl ZeroSet {
    pub fn multiplicity_sum(&self) -> i64 {
        self.zeros.iter().map(|z| i64::from(z.multiplicity)).sum()
    }

    /// CSV dump: re, im, multiplicity, residual.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re,im,multiplicity,residual")?;
        for z in &self.zeros {
            writeln!(
                out,
                "{:.17e},{:.17e},{},{:.3e}",
                z.location.re, z.location.im, z.multiplicity, z.residual
            )?;
        }
        Ok(())
    }
}

/// Expand G into monomial coefficients when every basis function is a
/// polynomial; `None` otherwise.
pub fn to_polynomial(
    sample: &SampledFunction,
    basis: &BasisSystem,
) -> Result<Option<Vec<Complex64>>> {
    let mut expansions = Vec::with_capacity(basis.len());
    for f in basis.functions() {
        match f.to_coefficients(DEGREE_CAP)? {
            Some(coeffs) => expansions.push(coeffs),
            None => return Ok(None),
        }
    }
    let mut total: Vec<Complex64> = vec![Complex64::ZERO];
    for term in &sample.terms {
        let mut poly = vec![term.coeff * term.weight];
        for (j, &count) in term.alpha.iter().enumerate() {
            for _ in 0..count {
                poly = crate::basis::convolve_capped(&poly, &expansions[j], DEGREE_CAP)?;
            }
        }
        if poly.len() > total.len() {
            total.resize(poly.len(), Complex64::ZERO);
        }
        for (i, c) in poly.iter().enumerate() {
            total[i] += c;
        }
    }
    Ok(Some(total))
}

fn cluster_zeros(points: Vec<(Complex64, u32)>, radius: f64) -> Vec<(Complex64, u32)> {
    let merge_dist = CLUSTER_RADIUS * radius;
    let mut clusters: Vec<(Complex64, u32)> = Vec::new();
    for (z, mult) in points {
        match clusters
            .iter_mut()
            .find(|(c, _)| (*c - z).norm() <= merge_dist)
        {
            Some((c, m)) => {
                // multiplicity-weighted centroid
                let total = f64::from(*m + mult);
                *c = (*c * f64::from(*m) + z * f64::from(mult)) / total;
                *m += mult;
            }
            None => clusters.push((z, mult)),
        }
    }
    clusters
}

#[allow(clippy::too_many_arguments)]
fn assemble_zero_set<F: HoloFn>(
    f: &F,
    located: Vec<(Complex64, u32)>,
    radius: f64,
    method: Method,
    tol: f64,
    boundary_scale: f64,
    disk_count: i64,
    count_radius: f64,
    diagnostics: Vec<String>,
) -> Result<ZeroSet> {
    let clusters = cluster_zeros(located, radius);

    let in_count: i64 = clusters
        .iter()
        .filter(|(z, _)| z.norm() < count_radius)
        .map(|(_, m)| i64::from(*m))
        .sum();
    if in_count != disk_count {
        return Err(Error::CountMismatch {
            expected: disk_count,
            found: in_count,
            diagnostics,
        });
    }

    let mut zeros = Vec::new();
    let mut max_residual = 0.0f64;
    for (z, mult) in clusters {
        if z.norm() >= radius {
            continue;
        }
        let (g, _) = f.value_deriv(z)?;
        let residual = g.norm();
        if residual > tol * boundary_scale {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual,
            });
        }
        max_residual = max_residual.max(residual);
        zeros.push(Zero {
            location: z,
            multiplicity: mult,
            residual,
            near_origin: z.norm() <= ORIGIN_BAND * radius,
        });
    }
    zeros.sort_by(|a, b| {
        a.location
            .re
            .total_cmp(&b.location.re)
            .then(a.location.im.total_cmp(&b.location.im))
    });
    Ok(ZeroSet {
        zeros,
        radius,
        method,
        max_residual,
        disk_count,
        count_radius,
    })
}

/// All zeros of the polynomial in |z| < r, via Ehrlich-Aberth.
pub fn find_polynomial_zeros(coeffs: &[Complex64], r: f64, tol: f64) -> Result<ZeroSet> {
    let max_c = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if max_c == 0.0 {
        return Err(Error::IdenticallyZero);
    }
    let mut trimmed: Vec<Complex64> = coeffs.to_vec();
    while trimmed.len() > 1
        && trimmed.last().map(|c| c.norm()).unwrap_or(0.0) <= TRIM_THRESHOLD * max_c
    {
        trimmed.pop();
    }

    // exact zeros at the origin come off as a factor of z^k
    let mut origin_mult = 0u32;
    while trimmed.len() > 1 && trimmed[0].norm_sqr() == 0.0 {
        trimmed.remove(0);
        origin_mult += 1;
    }

    let mut located: Vec<(Complex64, u32)> = Vec::new();
    if origin_mult > 0 {
        located.push((Complex64::ZERO, origin_mult));
    }
    if trimmed.len() > 1 {
        for root in aberth_roots(&trimmed)? {
            located.push((root, 1));
        }
    }
    // origin zeros belong to the full polynomial; evaluate against it
    let full: Vec<Complex64> = std::iter::repeat(Complex64::ZERO)
        .take(origin_mult as usize)
        .chain(trimmed.iter().copied())
        .collect();
    let f = PolyFn { coeffs: &full };

    // only roots near or inside the disk matter from here on
    located.retain(|(z, _)| z.norm() < r * 1.001);

    let (disk_count, count_radius, scale) = count_zeros_in_disk(&f, Complex64::ZERO, r)?;
    assemble_zero_set(
        &f,
        located,
        r,
        Method::Polynomial,
        tol,
        scale,
        disk_count,
        count_radius,
        Vec::new(),
    )
}

const NEWTON_MAX_ITERS: u32 = 200;

/// Newton iteration from `start`; succeeds only when the step size actually
/// converges (|G| alone is no criterion for samples whose scale spans many
/// orders of magnitude across the disk).
fn newton<F: HoloFn>(f: &F, start: Complex64, travel: f64) -> Option<(Complex64, f64)> {
    let mut z = start;
    for _ in 0..NEWTON_MAX_ITERS {
        let (g, dg) = f.value_deriv(z).ok()?;
        if g.norm_sqr() == 0.0 {
            return Some((z, 0.0));
        }
        if dg.norm_sqr() == 0.0 {
            return None;
        }
        let step = g / dg;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() || (z - start).norm() > travel {
            return None;
        }
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            let (g, _) = f.value_deriv(z).ok()?;
            return Some((z, g.norm()));
        }
    }
    None
}

/// Polish the zero(s) counted in `rect`. The result must stay within a
/// slightly dilated copy of the box: a zero counted here lives here, and a
/// Newton run that walks off has found some other box's zero.
fn polish_in_box<F: HoloFn>(f: &F, rect: &Rect, tol_abs: f64) -> Option<(Complex64, f64)> {
    let c = rect.center();
    let qw = 0.25 * rect.width();
    let qh = 0.25 * rect.height();
    let travel = 3.0 * rect.max_side();
    let fence = rect.dilate(1.5);
    let starts = [
        c,
        c + Complex64::new(qw, qh),
        c + Complex64::new(-qw, qh),
        c + Complex64::new(qw, -qh),
        c + Complex64::new(-qw, -qh),
    ];
    let mut best: Option<(Complex64, f64)> = None;
    for s in starts {
        if let Some((z, res)) = newton(f, s, travel) {
            if !fence.contains(z) || res > tol_abs {
                continue;
            }
            if best.map(|(_, b)| res < b).unwrap_or(true) {
                best = Some((z, res));
            }
        }
    }
    best
}

/// All zeros of a general entire sample in |z| < r, via quadtree subdivision
/// of the bounding square driven by argument-principle counts.
pub fn find_entire_zeros(
    sample: &SampledFunction,
    basis: &BasisSystem,
    r: f64,
    tol: f64,
) -> Result<ZeroSet> {
    let f = SampleFn { sample, basis };

    // reject the (numerically) zero function
    let coeff_scale = sample.coefficient_scale();
    let mut boundary_max = 0.0f64;
    for i in 0..96 {
        let theta = std::f64::consts::TAU * (i as f64 + 0.5) / 96.0;
        let (g, _) = f.value_deriv(Complex64::from_polar(r, theta))?;
        boundary_max = boundary_max.max(g.norm());
    }
    if coeff_scale == 0.0 || boundary_max < 1e-13 * coeff_scale {
        return Err(Error::IdenticallyZero);
    }

    let (disk_count, count_radius, scale) = count_zeros_in_disk(&f, Complex64::ZERO, r)?;

    let mut located: Vec<(Complex64, u32)> = Vec::new();
    let mut diagnostics: Vec<String> = Vec::new();

    if disk_count > 0 {
        // root square covers any dilated circle
        let root = Rect::square(Complex64::ZERO, r * (1.0 + 2e-5));
        let (root_count, root_rect) = count_zeros_in_box(&f, root)?;
        let min_side = 1e-3 * r;
        let newton_side = 0.05 * r;
        let tol_abs = tol * scale;

        let mut stack: Vec<(Rect, i64)> = vec![(root_rect, root_count)];
        while let Some((rect, count)) = stack.pop() {
            if count == 0 {
                continue;
            }
            let side = rect.max_side();
            if side < min_side || (count == 1 && side <= newton_side) {
                match polish_in_box(&f, &rect, tol_abs) {
                    Some((z, _)) => located.push((z, count as u32)),
                    None if side >= min_side => {
                        // isolated but stubborn: keep splitting
                        split_box(&f, &rect, count, &mut stack, &mut diagnostics)?;
                    }
                    None => diagnostics.push(format!("newton failed in {rect:?}")),
                }
                continue;
            }
            split_box(&f, &rect, count, &mut stack, &mut diagnostics)?;
        }
    }

    assemble_zero_set(
        &f,
        located,
        r,
        Method::ArgumentPrinciple,
        tol,
        scale,
        disk_count,
        count_radius,
        diagnostics,
    )
}

fn split_jitter(rect: &Rect, salt: u64, attempt: u32) -> f64 {
    let mut state = rect.x0.to_bits()
        ^ rect.y1.to_bits().rotate_left(23)
        ^ salt.wrapping_mul(0x9e3779b97f4a7c15)
        ^ u64::from(attempt).rotate_left(41);
    for _ in 0..2 {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        state = z ^ (z >> 31);
    }
    let u = (state >> 11) as f64 / (1u64 << 53) as f64;
    let sign = if state & 1 == 0 { 1.0 } else { -1.0 };
    0.5 + sign * (1e-5 + u * 9e-5)
}

/// Split `rect` into four tiles along jittered lines and push the nonempty
/// children; retries with fresh jitter until the child counts add up to the
/// parent's. The tiles partition the parent exactly, so a mismatch can only
/// come from a contour passing too close to a zero.
fn split_box<F: HoloFn>(
    f: &F,
    rect: &Rect,
    count: i64,
    stack: &mut Vec<(Rect, i64)>,
    diagnostics: &mut Vec<String>,
) -> Result<()> {
    for attempt in 0..4u32 {
        let sx = rect.x0 + rect.width() * split_jitter(rect, 1, attempt);
        let sy = rect.y0 + rect.height() * split_jitter(rect, 2, attempt);
        let children = [
            Rect::new(rect.x0, sx, rect.y0, sy),
            Rect::new(sx, rect.x1, rect.y0, sy),
            Rect::new(rect.x0, sx, sy, rect.y1),
            Rect::new(sx, rect.x1, sy, rect.y1),
        ];
        let mut counted = Vec::with_capacity(4);
        let mut ok = true;
        for child in children {
            match count_zeros_in_box(f, child) {
                Ok(pair) => counted.push(pair),
                Err(
                    Error::BoundaryZeroUnresolvable { .. }
                    | Error::QuadratureNonConvergence
                    | Error::NonIntegerWinding { .. },
                ) => {
                    ok = false;
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        if ok && counted.iter().map(|(c, _)| c).sum::<i64>() == count {
            for (child_count, child_rect) in counted {
                if child_count > 0 {
                    stack.push((child_rect, child_count));
                }
            }
            return Ok(());
        }
    }
    diagnostics.push(format!("split of {rect:?} (count {count}) never balanced"));
    // leave the shortfall to the final conservation check
    Ok(())
}

/// Route a sample through the polynomial path when possible, the argument-
/// principle path otherwise.
pub fn find_zeros(
    sample: &SampledFunction,
    basis: &BasisSystem,
    r: f64,
    tol: f64,
) -> Result<ZeroSet> {
    match to_polynomial(sample, basis)? {
        Some(coeffs) => find_polynomial_zeros(&coeffs, r, tol),
        None => find_entire_zeros(sample, basis, r, tol),
    }
}
