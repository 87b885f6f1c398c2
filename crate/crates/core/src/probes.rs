//! Closed-form convergence probes for the machinery behind the limit.
//!
//! Everything here has an explicit formula, so the probes double as oracles:
//!
//! * [`exp_sum_kernel`]: the 1-D kernel (1/n) d^2/dx^2 log sum_{j<=n} e^{jx},
//!   which concentrates at 0 and integrates to exactly 1;
//! * [`kernel_pairing`]: its quadrature pairing with a test function, which
//!   approaches phi(0) as n grows;
//! * [`radial_log_derivative`]: (1/n) d/dr log sum_{k<=n} r^{2k}, exactly 1
//!   at r = 1 and approaching the 2/r-or-0 gate elsewhere;
//! * [`level_curve_probe`]: a discrete-Laplacian pairing showing the planar
//!   measure (1/n)(i/2 pi) ddbar log sum |g|^{2k} concentrate on |g| = 1.
//!
//! The geometric-sum rearrangements are used throughout; naive term sums
//! would overflow for the n these probes run at.

use num_complex::Complex64;

use crate::basis::BasisExpr;
use crate::error::{Error, Result};
use crate::measures::TestFunction;

/// (1/n) d^2/dx^2 log sum_{j=0}^n e^{jx}.
///
/// Rearranged through 1/(4 sinh^2): symmetric in x and stable on both tails;
/// near x = 0 a short series avoids the cancellation of the two poles, and
/// at x = 0 the exact power-sum value (n+2)/12 is returned.
pub fn exp_sum_kernel(n: u32, x: f64) -> f64 {
    let nf = f64::from(n);
    if x == 0.0 {
        // ((n+1) sum j^2 - (sum j)^2) / (n (n+1)^2) from the three power sums
        let s0 = nf + 1.0;
        let s1 = nf * (nf + 1.0) / 2.0;
        let s2 = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 6.0;
        return (s0 * s2 - s1 * s1) / (nf * s0 * s0);
    }
    let big = nf + 1.0;
    if (big * x).abs() < 1e-2 {
        // kernel = (n+2)/12 - x^2 ((n+1)^4 - 1) / (240 n) + O((n x)^4)
        let lead = (nf + 2.0) / 12.0;
        let correction = x * x * (big.powi(4) - 1.0) / (240.0 * nf);
        return lead - correction;
    }
    let inv_sinh_sq = |v: f64| -> f64 {
        let half = 0.5 * v.abs();
        if half > 350.0 {
            // sinh^-2 underflows; 4 e^{-2h} is already below any tolerance
            4.0 * (-2.0 * half).exp()
        } else {
            let s = half.sinh();
            1.0 / (s * s)
        }
    };
    (inv_sinh_sq(x) - big * big * inv_sinh_sq(big * x)) / (4.0 * nf)
}

/// d/dx log sum_{j=0}^n e^{jx}: the mean of j under weights e^{jx}.
/// Used for the tail-mass estimate of the kernel outside a finite domain.
fn exp_sum_mean(n: u32, x: f64) -> f64 {
    let nf = f64::from(n);
    let big = nf + 1.0;
    if (big * x).abs() < 1e-4 {
        return nf / 2.0 + x * nf * (nf + 2.0) / 12.0;
    }
    let term = |t: f64| -> f64 {
        // t / (1 - e^{-t x}), stable for both signs of x
        let u = -t * x;
        if u > 700.0 {
            0.0
        } else {
            t / (-f64::exp_m1(u))
        }
    };
    term(big) - term(1.0)
}

/// Kernel mass in the two tails outside [a, b].
pub fn kernel_tail_mass(n: u32, a: f64, b: f64) -> f64 {
    let nf = f64::from(n);
    (exp_sum_mean(n, a) + (nf - exp_sum_mean(n, b))) / nf
}

/// A kernel-pairing probe: degree, quadrature domain and node budget, and
/// the test function to pair with.
#[derive(Clone, Debug)]
pub struct KernelProbe {
    pub n: u32,
    pub bounds: (f64, f64),
    /// Simpson subintervals (rounded up to an even count, minimum 64).
    pub nodes: usize,
    pub phi: TestFunction,
}

impl KernelProbe {
    /// The default quadrature: composite Simpson on [-10, 10], 8192 panels.
    /// The kernel mass outside is below 1e-4 for every n >= 1 and the
    /// Simpson error stays under ~2% of the peak for n up to a few thousand
    /// (h^4 scaling; raise `nodes` for larger n).
    pub fn new(n: u32, phi: TestFunction) -> Self {
        KernelProbe {
            n,
            bounds: (-10.0, 10.0),
            nodes: 8192,
            phi,
        }
    }
}

/// Composite-Simpson pairing of the kernel with phi; converges to phi(0).
///
/// Errors when more than 1e-4 of the kernel mass lies outside the domain.
pub fn kernel_pairing(probe: &KernelProbe) -> Result<f64> {
    let (a, b) = probe.bounds;
    let outside = kernel_tail_mass(probe.n, a, b);
    if outside > 1e-4 {
        return Err(Error::QuadratureDomainTooSmall { outside });
    }
    let m = probe.nodes.max(64).next_multiple_of(2);
    let h = (b - a) / m as f64;
    let f = |x: f64| exp_sum_kernel(probe.n, x) * probe.phi.eval(Complex64::new(x, 0.0));
    let mut sum = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    Ok(sum * h / 3.0)
}

/// (1/n) d/dr log sum_{k=0}^n r^{2k}.
///
/// Exactly 1 at r = 1 for every n; elsewhere evaluated in closed form with
/// the large-r rearrangement, and by the direct power-sum ratio in a narrow
/// band around 1 where the two closed-form terms cancel catastrophically.
pub fn radial_log_derivative(n: u32, r: f64) -> f64 {
    assert!(n >= 1 && r > 0.0);
    let nf = f64::from(n);
    if r == 1.0 {
        return 1.0;
    }
    if (r - 1.0).abs() < 1e-6 {
        // sum 2k r^{2k-1} / sum r^{2k}: all-positive terms, O(n) and stable
        let mut num = 0.0;
        let mut den = 1.0;
        let r2 = r * r;
        let mut pow = 1.0; // r^{2k-1} tracked via r^{2(k-1)} * r
        for k in 1..=n {
            pow *= r2;
            num += 2.0 * f64::from(k) * pow / r;
            den += pow;
        }
        return num / (nf * den);
    }
    let two_n2 = 2.0 * nf + 2.0;
    if r > 1.0 {
        // -(2n+2) r^{2n+1} / (1 - r^{2n+2}) = (2n+2) / (r (1 - r^{-(2n+2)}))
        let first = two_n2 / (r * (-f64::exp_m1(-two_n2 * r.ln())));
        let second = 2.0 * r / (1.0 - r * r);
        (first + second) / nf
    } else {
        let first = -two_n2 * r.powi(2 * n as i32 + 1) / (-f64::exp_m1(two_n2 * r.ln()));
        let second = 2.0 * r / (1.0 - r * r);
        (first + second) / nf
    }
}

/// log sum_{k=0}^n t^k for t >= 0, stable across the t = 1 ridge.
fn log_geometric_sum(t: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    if (t - 1.0).abs() < 1e-9 {
        // sum ~ (n+1) t^{n/2} to second order in (t - 1)
        return (nf + 1.0).ln() + 0.5 * nf * t.ln();
    }
    if t < 1.0 {
        f64::ln_1p(-t.powi(n as i32 + 1)) - f64::ln_1p(-t)
    } else {
        let u = 1.0 / t;
        nf * t.ln() + f64::ln_1p(-u.powi(n as i32 + 1)) - f64::ln_1p(-u)
    }
}

/// Discrete pairing of (1/n)(1/4 pi) Laplacian[log sum_k |g(z)|^{2k}] with
/// phi over a square grid: the distributional form of the measure that
/// concentrates on the level curve |g| = 1 as n grows.
///
/// Computes the sum at the given resolution and at half the step; a relative
/// change above 5% raises [`Error::GridTooCoarse`]. The finer value is
/// returned.
pub fn level_curve_probe(
    n: u32,
    g: &BasisExpr,
    phi: &TestFunction,
    window: [f64; 4],
    resolution: usize,
) -> Result<f64> {
    let coarse = probe_at(n, g, phi, window, resolution)?;
    let fine = probe_at(n, g, phi, window, 2 * resolution)?;
    let scale = fine.abs().max(1e-9);
    let rel_change = (fine - coarse).abs() / scale;
    if rel_change > 0.05 {
        return Err(Error::GridTooCoarse { rel_change });
    }
    Ok(fine)
}

fn probe_at(
    n: u32,
    g: &BasisExpr,
    phi: &TestFunction,
    window: [f64; 4],
    resolution: usize,
) -> Result<f64> {
    let [x0, x1, y0, y1] = window;
    let nx = resolution;
    let ny = resolution;
    let dx = (x1 - x0) / nx as f64;
    let dy = (y1 - y0) / ny as f64;
    let nf = f64::from(n);

    let mut field = vec![0.0f64; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let z = Complex64::new(x0 + i as f64 * dx, y0 + j as f64 * dy);
            let t = g.eval(z)?.norm_sqr();
            field[j * (nx + 1) + i] = log_geometric_sum(t, n) / nf;
        }
    }

    let mut total = 0.0;
    for j in 1..ny {
        for i in 1..nx {
            let f = field[j * (nx + 1) + i];
            let lap = (field[j * (nx + 1) + i + 1] + field[j * (nx + 1) + i - 1] - 2.0 * f)
                / (dx * dx)
                + (field[(j + 1) * (nx + 1) + i] + field[(j - 1) * (nx + 1) + i] - 2.0 * f)
                    / (dy * dy);
            let z = Complex64::new(x0 + i as f64 * dx, y0 + j as f64 * dy);
            total += lap * phi.eval(z);
        }
    }
    Ok(total * dx * dy / (4.0 * std::f64::consts::PI))
}

/// One probe outcome destined for the convergence CSV.
#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub lemma: String,
    pub n: u32,
    pub parameter: f64,
    pub value: f64,
    pub target: f64,
}

impl ProbeRow {
    pub fn gap(&self) -> f64 {
        (self.value - self.target).abs()
    }
}

/// CSV rows: lemma, n, parameter, value, target, gap.
pub fn write_probe_csv<W: std::io::Write>(rows: &[ProbeRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "lemma,n,parameter,value,target,gap")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{:.9e},{:.12e},{:.12e},{:.3e}",
            row.lemma,
            row.n,
            row.parameter,
            row.value,
            row.target,
            row.gap()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kernel_at_zero_examples() {
        assert!((exp_sum_kernel(1, 0.0) - 0.25).abs() < 1e-15);
        for n in [2u32, 10, 100, 1000] {
            let expected = (f64::from(n) + 2.0) / 12.0;
            assert!((exp_sum_kernel(n, 0.0) - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn kernel_tails_vanish() {
        for n in [1u32, 5, 50, 500] {
            assert!(exp_sum_kernel(n, 20.0) <= 1e-6);
            assert!(exp_sum_kernel(n, -20.0) <= 1e-6);
        }
    }

    #[test]
    fn kernel_nonnegative_at_random_points() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let x = rng.random::<f64>() * 24.0 - 12.0;
            let n = 1 + rng.random::<u32>() % 2000;
            assert!(
                exp_sum_kernel(n, x) >= -1e-14,
                "kernel({n}, {x}) = {}",
                exp_sum_kernel(n, x)
            );
        }
    }

    #[test]
    fn kernel_is_symmetric() {
        for n in [3u32, 77, 1234] {
            for x in [0.001, 0.1, 1.0, 5.0] {
                let p = exp_sum_kernel(n, x);
                let m = exp_sum_kernel(n, -x);
                assert!((p - m).abs() <= 1e-12 * (1.0 + p));
            }
        }
    }

    #[test]
    fn kernel_mass_is_near_one() {
        for (n, nodes) in [(100u32, 8192usize), (300, 8192), (1000, 65536)] {
            let probe = KernelProbe {
                n,
                bounds: (-10.0, 10.0),
                nodes,
                phi: TestFunction::Disk,
            };
            let mass = kernel_pairing(&probe).unwrap();
            assert!((mass - 1.0).abs() <= 1e-3, "n={n}: mass {mass}");
        }
    }

    #[test]
    fn zero_phi_pairs_to_zero() {
        let probe = KernelProbe::new(
            50,
            TestFunction::Combo(vec![]),
        );
        assert_eq!(kernel_pairing(&probe).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_pairing_converges() {
        let phi = TestFunction::GaussianBump {
            center: [0.0, 0.0],
            width: 1.0,
        };
        let gaps: Vec<f64> = [10u32, 100, 1000]
            .iter()
            .map(|&n| {
                let v = kernel_pairing(&KernelProbe::new(n, phi.clone())).unwrap();
                (v - 1.0).abs()
            })
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gaps {gaps:?}");
        assert!(gaps[2] <= 0.05);
    }

    #[test]
    fn domain_too_small_detected() {
        let probe = KernelProbe {
            n: 10,
            bounds: (-0.001, 0.001),
            nodes: 128,
            phi: TestFunction::Disk,
        };
        assert!(matches!(
            kernel_pairing(&probe),
            Err(Error::QuadratureDomainTooSmall { .. })
        ));
    }

    #[test]
    fn radial_derivative_exact_at_one() {
        for n in [1u32, 7, 100, 10_000] {
            assert_eq!(radial_log_derivative(n, 1.0), 1.0);
        }
        // the near-1 band agrees with the exact value to high accuracy
        for n in [5u32, 2000] {
            for r in [1.0 - 1e-9, 1.0 + 1e-9] {
                assert!((radial_log_derivative(n, r) - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn radial_derivative_limits() {
        assert!((radial_log_derivative(2000, 2.0) - 1.0).abs() <= 1e-3);
        assert!(radial_log_derivative(2000, 0.5).abs() <= 1e-3);
        // large-n limit is 2/r above 1
        let v = radial_log_derivative(4000, 3.0);
        assert!((v - 2.0 / 3.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn level_probe_identity_total_mass() {
        // phi == 1 near the unit circle: bump on an annulus
        let phi = TestFunction::RadialBump {
            radius: 1.0,
            width: 0.55,
        };
        // not exactly 1: phi is not exactly 1 on the circle's neighborhood...
        // use a combo that is 1 within |r - 1| < 0.4 instead
        let phi = TestFunction::Combo(vec![(1.0, phi)]);
        let _ = phi;
        // simplest faithful check: indicator-like annulus (continuous enough
        // for the grid pairing since the mass concentrates strictly inside)
        let phi = TestFunction::Annulus {
            inner: 0.5,
            outer: 1.5,
        };
        let v = level_curve_probe(400, &BasisExpr::var(), &phi, [-2.0, 2.0, -2.0, 2.0], 512)
            .unwrap();
        assert!((v - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn level_probe_sector_fraction() {
        // smoothed sector of width pi/3 -> 1/6 of the circle mass
        let phi = TestFunction::Sector {
            from: 0.0,
            to: std::f64::consts::FRAC_PI_3,
        };
        let v = level_curve_probe(600, &BasisExpr::var(), &phi, [-2.0, 2.0, -2.0, 2.0], 512)
            .unwrap();
        assert!((v - 1.0 / 6.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn level_probe_square_counts_the_double_winding() {
        // the curve is still |z| = 1 but arg(z^2) winds twice, so the limit
        // measure d(arg g)/(2 pi) carries total mass 2
        let g = BasisExpr::power(BasisExpr::var(), 2);
        let phi = TestFunction::Annulus {
            inner: 0.5,
            outer: 1.5,
        };
        let v = level_curve_probe(400, &g, &phi, [-2.0, 2.0, -2.0, 2.0], 512).unwrap();
        assert!((v - 2.0).abs() < 0.04, "{v}");
    }

    #[test]
    fn level_probe_matches_kernel_under_radial_substitution() {
        // radial phi: the planar pairing reduces to the 1-D kernel pairing
        // against phi(e^{xi/2}) under xi = 2 log r
        let width = 0.3;
        let phi2d = TestFunction::RadialBump { radius: 1.0, width };
        let n = 300;
        let planar =
            level_curve_probe(n, &BasisExpr::var(), &phi2d, [-2.5, 2.5, -2.5, 2.5], 768)
                .unwrap();
        // 1-D side: integrate kernel(xi) * phi(e^{xi/2}) via the same Simpson
        let m = 16384usize;
        let (a, b) = (-10.0f64, 10.0f64);
        let h = (b - a) / m as f64;
        let f = |xi: f64| {
            let r = (0.5 * xi).exp();
            let d = (r - 1.0) / width;
            exp_sum_kernel(n, xi) * (-d * d).exp()
        };
        let mut sum = f(a) + f(b);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(a + k as f64 * h);
        }
        let oned = sum * h / 3.0;
        assert!(
            (planar - oned).abs() <= 1e-3 + 1e-2 * oned.abs(),
            "planar {planar} vs 1-D {oned}"
        );
    }

    #[test]
    fn grid_too_coarse_is_detected() {
        // a narrow bump under-resolved at tiny resolution
        let phi = TestFunction::GaussianBump {
            center: [1.0, 0.0],
            width: 0.02,
        };
        let r = level_curve_probe(50, &BasisExpr::var(), &phi, [-2.0, 2.0, -2.0, 2.0], 16);
        assert!(matches!(r, Err(Error::GridTooCoarse { .. })));
    }
}
