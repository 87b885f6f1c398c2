//! Argument-principle zero counting on rectangles and circles.
//!
//! The count inside a contour is (1/2*pi*i) * integral of G'/G, evaluated by
//! adaptive Gauss-Kronrod panels per edge (or per arc). A zero sitting on the
//! contour is detected by boundary sampling or by quadrature breakdown; the
//! contour is then dilated by a tiny deterministic pseudo-random factor and
//! the count retried, up to [`MAX_DILATIONS`] times.

use num_complex::Complex64;

use super::HoloFn;
use crate::error::{Error, Result};
use crate::quad;

pub const MAX_DILATIONS: u32 = 8;

/// Samples per edge (or per quarter arc) for the boundary-zero pre-check.
const BOUNDARY_SAMPLES: usize = 24;
/// A sample this far below its edge's median |G| flags a contour zero. The
/// scale must be local to the edge: |G| legitimately spans many orders of
/// magnitude across one box for high-degree samples. Quadrature breakdown
/// backstops anything the sampling misses.
const BOUNDARY_DIP: f64 = 1e-13;

/// Absolute tolerance on the raw contour integral (winding error ~ tol/2pi).
const WINDING_ABS_TOL: f64 = 0.05;
const WINDING_REL_TOL: f64 = 2e-4;

const BOX_PANEL_BUDGET: usize = 6_000;
const CIRCLE_PANEL_BUDGET: usize = 60_000;

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn square(center: Complex64, half: f64) -> Self {
        Rect {
            x0: center.re - half,
            x1: center.re + half,
            y0: center.im - half,
            y1: center.im + half,
        }
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn max_side(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.x0 && z.re < self.x1 && z.im >= self.y0 && z.im < self.y1
    }

    pub fn dilate(&self, factor: f64) -> Rect {
        let c = self.center();
        let hw = 0.5 * self.width() * factor;
        let hh = 0.5 * self.height() * factor;
        Rect {
            x0: c.re - hw,
            x1: c.re + hw,
            y0: c.im - hh,
            y1: c.im + hh,
        }
    }

    /// Counterclockwise corner list, starting at the lower-left.
    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x0, self.y0),
            Complex64::new(self.x1, self.y0),
            Complex64::new(self.x1, self.y1),
            Complex64::new(self.x0, self.y1),
        ]
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic dilation factor in [1 + 1e-6, 1 + 1e-5], keyed by geometry
/// and attempt so retries move the contour but reruns are reproducible.
fn dilation_factor(key: u64, attempt: u32) -> f64 {
    let mut state = key ^ (u64::from(attempt).wrapping_mul(0x2545f4914f6cdd1d));
    let u = (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64;
    1.0 + 1e-6 + u * (1e-5 - 1e-6)
}

fn rect_key(rect: &Rect) -> u64 {
    let mut state = rect.x0.to_bits() ^ rect.x1.to_bits().rotate_left(17)
        ^ rect.y0.to_bits().rotate_left(31)
        ^ rect.y1.to_bits().rotate_left(47);
    splitmix64(&mut state)
}

/// True when the sampled |G| along one segment dips to (near) zero.
/// Also reports the largest sample for scale bookkeeping.
fn segment_dips<F: HoloFn>(f: &F, a: Complex64, b: Complex64) -> Result<(bool, f64)> {
    let mut mags = [0.0f64; BOUNDARY_SAMPLES];
    for (i, m) in mags.iter_mut().enumerate() {
        let t = (i as f64 + 0.5) / BOUNDARY_SAMPLES as f64;
        let (g, _) = f.value_deriv(a + t * (b - a))?;
        *m = g.norm();
    }
    let hi = mags.iter().copied().fold(0.0f64, f64::max);
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sorted = mags;
    sorted.sort_by(f64::total_cmp);
    let median = sorted[BOUNDARY_SAMPLES / 2];
    Ok((lo <= BOUNDARY_DIP * median, hi))
}

fn winding_to_count(total: Complex64) -> Result<i64> {
    let w = total / (Complex64::I * std::f64::consts::TAU);
    let nearest = w.re.round();
    let dist = ((w.re - nearest).powi(2) + w.im.powi(2)).sqrt();
    if dist > 0.25 || nearest < 0.0 {
        return Err(Error::NonIntegerWinding { value: w.re });
    }
    Ok(nearest as i64)
}

fn try_count_box<F: HoloFn>(f: &F, rect: &Rect) -> Result<i64> {
    let corners = rect.corners();
    let mut hi: f64 = 0.0;
    for i in 0..4 {
        let (dips, h) = segment_dips(f, corners[i], corners[(i + 1) % 4])?;
        if dips {
            return Err(Error::BoundaryZeroUnresolvable { attempts: 0 });
        }
        hi = hi.max(h);
    }
    if hi == 0.0 {
        return Err(Error::BoundaryZeroUnresolvable { attempts: 0 });
    }
    let mut total = Complex64::ZERO;
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let dz = b - a;
        total += quad::integrate(
            |t| {
                let (g, dg) = f.value_deriv(a + t * dz).unwrap_or((
                    Complex64::new(f64::NAN, 0.0),
                    Complex64::ZERO,
                ));
                dg / g * dz
            },
            0.0,
            1.0,
            WINDING_ABS_TOL,
            WINDING_REL_TOL,
            BOX_PANEL_BUDGET,
        )?;
    }
    winding_to_count(total)
}

/// Number of zeros (with multiplicity) of G strictly inside `rect`.
///
/// A suspected boundary zero triggers dilation retries; the count then refers
/// to the dilated rectangle, which is also returned.
pub fn count_zeros_in_box<F: HoloFn>(f: &F, rect: Rect) -> Result<(i64, Rect)> {
    let key = rect_key(&rect);
    let mut last_err = None;
    for attempt in 0..MAX_DILATIONS {
        let candidate = if attempt == 0 {
            rect
        } else {
            rect.dilate(dilation_factor(key, attempt))
        };
        match try_count_box(f, &candidate) {
            Ok(count) => return Ok((count, candidate)),
            Err(
                e @ (Error::BoundaryZeroUnresolvable { .. }
                | Error::QuadratureNonConvergence
                | Error::NonIntegerWinding { .. }),
            ) => last_err = Some(e),
            Err(other) => return Err(other),
        }
    }
    match last_err {
        Some(Error::BoundaryZeroUnresolvable { .. }) | None => {
            Err(Error::BoundaryZeroUnresolvable {
                attempts: MAX_DILATIONS,
            })
        }
        Some(other) => Err(other),
    }
}

fn try_count_circle<F: HoloFn>(f: &F, center: Complex64, radius: f64) -> Result<(i64, f64)> {
    // pre-check on quarter arcs; |G| has comparable scale along an arc
    let mut hi: f64 = 0.0;
    for q in 0..4 {
        let mut mags = [0.0f64; BOUNDARY_SAMPLES];
        for (i, m) in mags.iter_mut().enumerate() {
            let theta = std::f64::consts::FRAC_PI_2
                * (q as f64 + (i as f64 + 0.5) / BOUNDARY_SAMPLES as f64);
            let (g, _) = f.value_deriv(center + Complex64::from_polar(radius, theta))?;
            *m = g.norm();
        }
        let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
        hi = hi.max(mags.iter().copied().fold(0.0f64, f64::max));
        let mut sorted = mags;
        sorted.sort_by(f64::total_cmp);
        if lo <= BOUNDARY_DIP * sorted[BOUNDARY_SAMPLES / 2] {
            return Err(Error::BoundaryZeroUnresolvable { attempts: 0 });
        }
    }
    if hi == 0.0 {
        return Err(Error::BoundaryZeroUnresolvable { attempts: 0 });
    }
    let mut total = Complex64::ZERO;
    // quarter arcs keep each adaptive run well-conditioned
    for q in 0..4 {
        let a = std::f64::consts::FRAC_PI_2 * q as f64;
        let b = a + std::f64::consts::FRAC_PI_2;
        total += quad::integrate(
            |theta| {
                let z = center + Complex64::from_polar(radius, theta);
                let (g, dg) = f
                    .value_deriv(z)
                    .unwrap_or((Complex64::new(f64::NAN, 0.0), Complex64::ZERO));
                dg / g * Complex64::I * (z - center)
            },
            a,
            b,
            WINDING_ABS_TOL,
            WINDING_REL_TOL,
            CIRCLE_PANEL_BUDGET,
        )?;
    }
    Ok((winding_to_count(total)?, hi))
}

/// Number of zeros (with multiplicity) of G in the disk |z - center| < radius.
///
/// Returns (count, effective radius, max boundary |G|); the radius grows by a
/// tiny deterministic factor when a boundary zero forces a retry.
pub fn count_zeros_in_disk<F: HoloFn>(
    f: &F,
    center: Complex64,
    radius: f64,
) -> Result<(i64, f64, f64)> {
    let mut state = radius.to_bits() ^ center.re.to_bits().rotate_left(13);
    let key = splitmix64(&mut state);
    let mut last_err = None;
    for attempt in 0..MAX_DILATIONS {
        let r = if attempt == 0 {
            radius
        } else {
            radius * dilation_factor(key, attempt)
        };
        match try_count_circle(f, center, r) {
            Ok((count, scale)) => return Ok((count, r, scale)),
            Err(
                e @ (Error::BoundaryZeroUnresolvable { .. }
                | Error::QuadratureNonConvergence
                | Error::NonIntegerWinding { .. }),
            ) => last_err = Some(e),
            Err(other) => return Err(other),
        }
    }
    match last_err {
        Some(Error::BoundaryZeroUnresolvable { .. }) | None => {
            Err(Error::BoundaryZeroUnresolvable {
                attempts: MAX_DILATIONS,
            })
        }
        Some(other) => Err(other),
    }
}
