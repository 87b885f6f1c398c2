//! Simultaneous polynomial root finding (Ehrlich-Aberth iteration).
//!
//! Initial guesses come from the Newton polygon of the coefficient moduli
//! (upper convex hull of (k, log|c_k|)), which distributes starting points on
//! circles near the expected root radii and keeps badly scaled inputs, e.g. a
//! tiny leading coefficient, from stalling the iteration.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_SWEEPS: u32 = 500;

/// One Newton ratio p(z)/p'(z) plus the backward error |p(z)| / sum |c_k||z|^k.
///
/// For |z| > 1 the reversed polynomial q(u) = z^{-n} p(z), u = 1/z, avoids
/// overflow: p/p' = z q / (n q - u q').
fn newton_ratio(coeffs: &[Complex64], z: Complex64) -> (Complex64, f64) {
    let n = coeffs.len() - 1;
    if z.norm_sqr() <= 1.0 {
        let mut p = Complex64::ZERO;
        let mut dp = Complex64::ZERO;
        let mut scale = 0.0;
        for &c in coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
            scale = scale * z.norm() + c.norm();
        }
        let backward = if scale > 0.0 { p.norm() / scale } else { 0.0 };
        (p / dp, backward)
    } else {
        let u = z.inv();
        let mut q = Complex64::ZERO;
        let mut dq = Complex64::ZERO;
        let mut scale = 0.0;
        for &c in coeffs.iter() {
            dq = dq * u + q;
            q = q * u + c;
            scale = scale * u.norm() + c.norm();
        }
        let backward = if scale > 0.0 { q.norm() / scale } else { 0.0 };
        let denom = (n as f64) * q - u * dq;
        (z * q / denom, backward)
    }
}

/// Starting points from the upper convex hull of (k, log|c_k|).
fn initial_guesses(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let logs: Vec<Option<f64>> = coeffs
        .iter()
        .map(|c| {
            let m = c.norm();
            if m > 0.0 {
                Some(m.ln())
            } else {
                None
            }
        })
        .collect();

    // Upper hull over indices with finite log, scanning k ascending.
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for (k, lv) in logs.iter().enumerate() {
        let v = match lv {
            Some(v) => *v,
            None => continue,
        };
        while hull.len() >= 2 {
            let (k1, v1) = hull[hull.len() - 2];
            let (k2, v2) = hull[hull.len() - 1];
            // pop k2 if it lies below the chord k1 -> k
            let cross = (k2 - k1) as f64 * (v - v1) - (k - k1) as f64 * (v2 - v1);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((k, v));
    }

    let mut guesses = Vec::with_capacity(n);
    for (edge, pair) in hull.windows(2).enumerate() {
        let (ka, va) = pair[0];
        let (kb, vb) = pair[1];
        let m = kb - ka;
        let radius = ((va - vb) / m as f64).exp();
        // golden-ratio phase per edge breaks symmetry alignments
        let phase = 0.5 + 0.618_033_988_749_894_9 * edge as f64;
        for j in 0..m {
            let theta = std::f64::consts::TAU * (j as f64 + phase) / m as f64;
            guesses.push(Complex64::from_polar(radius, theta));
        }
    }
    // hull always spans from the lowest nonzero coeff to the leading one;
    // callers strip exact zeros first, so this fills all n slots
    debug_assert_eq!(guesses.len(), n);
    guesses
}

/// All complex roots of `coeffs` (low degree first, leading coeff nonzero).
///
/// Converged when every Aberth step is below 1e-13 (1 + |z|) or the backward
/// error reaches roundoff; errors out after [`MAX_SWEEPS`].
pub fn aberth_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut roots = initial_guesses(coeffs);
    let mut converged = vec![false; n];
    for _sweep in 0..MAX_SWEEPS {
        let mut all_done = true;
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let z = roots[i];
            let (ratio, backward) = newton_ratio(coeffs, z);
            if backward <= 1e-15 {
                converged[i] = true;
                continue;
            }
            let mut repulsion = Complex64::ZERO;
            for (j, &w) in roots.iter().enumerate() {
                if j != i {
                    let d = z - w;
                    if d.norm_sqr() > 0.0 {
                        repulsion += d.inv();
                    }
                }
            }
            let denom = Complex64::ONE - ratio * repulsion;
            let step = if denom.norm_sqr() > 0.0 {
                ratio / denom
            } else {
                ratio
            };
            let next = z - step;
            if next.re.is_finite() && next.im.is_finite() {
                roots[i] = next;
            } else {
                // restart this root from a perturbed position
                roots[i] = z * 1.0001 + Complex64::new(1e-6, 1e-6);
                all_done = false;
                continue;
            }
            if step.norm() <= 1e-13 * (1.0 + next.norm()) {
                converged[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            return Ok(roots);
        }
    }
    let worst = roots
        .iter()
        .map(|&z| newton_ratio(coeffs, z).1)
        .fold(0.0f64, f64::max);
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        residual: worst,
    })
}

/// |p(z)| and the backward-error scale sum |c_k| |z|^k.
pub fn residual(coeffs: &[Complex64], z: Complex64) -> (f64, f64) {
    let mut p = Complex64::ZERO;
    let mut scale = 0.0;
    for &c in coeffs.iter().rev() {
        p = p * z + c;
        scale = scale * z.norm() + c.norm();
    }
    (p.norm(), scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_matches(roots: &[Complex64], expected: &[Complex64], tol: f64) {
        assert_eq!(roots.len(), expected.len());
        let mut taken = vec![false; roots.len()];
        for e in expected {
            let (i, d) = roots
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken[*i])
                .map(|(i, r)| (i, (r - e).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < tol, "no root within {tol} of {e} (closest {d})");
            taken[i] = true;
        }
    }

    #[test]
    fn cube_roots_of_unity() {
        // z^3 - 1
        let coeffs = [c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let roots = aberth_roots(&coeffs).unwrap();
        let expected = [
            c(1.0, 0.0),
            Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0),
            Complex64::from_polar(1.0, -std::f64::consts::TAU / 3.0),
        ];
        assert_matches(&roots, &expected, 1e-10);
    }

    #[test]
    fn wilkinson_like_spread() {
        // (z-1)(z-2)...(z-8)
        let mut coeffs = vec![Complex64::ONE];
        for k in 1..=8 {
            let root = c(k as f64, 0.0);
            let mut next = vec![Complex64::ZERO; coeffs.len() + 1];
            for (i, &a) in coeffs.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * root;
            }
            coeffs = next;
        }
        let roots = aberth_roots(&coeffs).unwrap();
        let expected: Vec<Complex64> = (1..=8).map(|k| c(k as f64, 0.0)).collect();
        assert_matches(&roots, &expected, 1e-7);
    }

    #[test]
    fn tiny_leading_coefficient() {
        // 1e-12 z^5 + z^2 - 1: three moderate roots, two huge ones
        let coeffs = [
            c(-1.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1e-12, 0.0),
        ];
        let roots = aberth_roots(&coeffs).unwrap();
        assert_eq!(roots.len(), 5);
        for &z in &roots {
            let (res, scale) = residual(&coeffs, z);
            assert!(res <= 1e-10 * scale, "res={res} scale={scale}");
        }
    }

    #[test]
    fn random_high_degree_has_small_backward_error() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let coeffs: Vec<Complex64> = (0..=120)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let roots = aberth_roots(&coeffs).unwrap();
        assert_eq!(roots.len(), 120);
        for &z in &roots {
            let (res, scale) = residual(&coeffs, z);
            assert!(res <= 1e-10 * scale, "res={res} scale={scale}");
        }
    }
}
