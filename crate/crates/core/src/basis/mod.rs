//! Entire basis functions as expression trees.
//!
//! A basis system holds an ordered family f_1, ..., f_l of entire functions
//! together with their exact symbolic derivatives. The grammar is restricted
//! to constants, the variable `z`, sums, products, nonnegative integer powers
//! and `exp`, which keeps every representable function entire and makes
//! differentiation exact. The pointwise quantities needed by the limit
//! formulas (the squared norm S(z) = sum |f_j(z)|^2 and the Laplacian density
//! of log sqrt(S)) live here too.

mod parse;

pub use parse::{parse_basis_file, parse_expr};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Expression tree over the six entire-function-preserving node kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisExpr {
    Const(Complex64),
    Var,
    Sum(Box<BasisExpr>, Box<BasisExpr>),
    Product(Box<BasisExpr>, Box<BasisExpr>),
    Power(Box<BasisExpr>, u32),
    Exp(Box<BasisExpr>),
}

impl BasisExpr {
    pub fn constant(c: Complex64) -> Self {
        BasisExpr::Const(c)
    }

    pub fn var() -> Self {
        BasisExpr::Var
    }

    pub fn sum(a: BasisExpr, b: BasisExpr) -> Self {
        BasisExpr::Sum(Box::new(a), Box::new(b))
    }

    pub fn product(a: BasisExpr, b: BasisExpr) -> Self {
        BasisExpr::Product(Box::new(a), Box::new(b))
    }

    pub fn power(a: BasisExpr, k: u32) -> Self {
        BasisExpr::Power(Box::new(a), k)
    }

    pub fn exp(a: BasisExpr) -> Self {
        BasisExpr::Exp(Box::new(a))
    }

    /// Evaluate at `z`. Non-finite results are reported as overflow.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let v = self.eval_raw(z);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvalOverflow { z })
        }
    }

    fn eval_raw(&self, z: Complex64) -> Complex64 {
        match self {
            BasisExpr::Const(c) => *c,
            BasisExpr::Var => z,
            BasisExpr::Sum(a, b) => a.eval_raw(z) + b.eval_raw(z),
            BasisExpr::Product(a, b) => a.eval_raw(z) * b.eval_raw(z),
            BasisExpr::Power(a, k) => a.eval_raw(z).powu(*k),
            BasisExpr::Exp(a) => a.eval_raw(z).exp(),
        }
    }

    /// Exact derivative tree via the sum, product and chain rules.
    ///
    /// The result is lightly constant-folded so that repeated differentiation
    /// does not balloon; values are unchanged.
    pub fn differentiate(&self) -> BasisExpr {
        match self {
            BasisExpr::Const(_) => BasisExpr::Const(Complex64::ZERO),
            BasisExpr::Var => BasisExpr::Const(Complex64::ONE),
            BasisExpr::Sum(a, b) => fold_sum(a.differentiate(), b.differentiate()),
            BasisExpr::Product(a, b) => fold_sum(
                fold_product(a.differentiate(), (**b).clone()),
                fold_product((**a).clone(), b.differentiate()),
            ),
            BasisExpr::Power(a, k) => match *k {
                0 => BasisExpr::Const(Complex64::ZERO),
                1 => a.differentiate(),
                k => fold_product(
                    fold_product(
                        BasisExpr::Const(Complex64::new(f64::from(k), 0.0)),
                        BasisExpr::Power(a.clone(), k - 1),
                    ),
                    a.differentiate(),
                ),
            },
            BasisExpr::Exp(a) => fold_product(BasisExpr::Exp(a.clone()), a.differentiate()),
        }
    }

    /// True when the expression contains no `exp` node, i.e. is a polynomial.
    pub fn is_polynomial(&self) -> bool {
        match self {
            BasisExpr::Const(_) | BasisExpr::Var => true,
            BasisExpr::Sum(a, b) | BasisExpr::Product(a, b) => {
                a.is_polynomial() && b.is_polynomial()
            }
            BasisExpr::Power(a, _) => a.is_polynomial(),
            BasisExpr::Exp(_) => false,
        }
    }

    /// Monomial coefficients (low degree first) when polynomial, else `None`.
    ///
    /// `cap` bounds the expanded degree; exceeding it is an error.
    pub fn to_coefficients(&self, cap: usize) -> Result<Option<Vec<Complex64>>> {
        match self {
            BasisExpr::Const(c) => Ok(Some(vec![*c])),
            BasisExpr::Var => Ok(Some(vec![Complex64::ZERO, Complex64::ONE])),
            BasisExpr::Sum(a, b) => {
                let (pa, pb) = match (a.to_coefficients(cap)?, b.to_coefficients(cap)?) {
                    (Some(pa), Some(pb)) => (pa, pb),
                    _ => return Ok(None),
                };
                let mut out = vec![Complex64::ZERO; pa.len().max(pb.len())];
                for (i, c) in pa.iter().enumerate() {
                    out[i] += c;
                }
                for (i, c) in pb.iter().enumerate() {
                    out[i] += c;
                }
                Ok(Some(out))
            }
            BasisExpr::Product(a, b) => {
                let (pa, pb) = match (a.to_coefficients(cap)?, b.to_coefficients(cap)?) {
                    (Some(pa), Some(pb)) => (pa, pb),
                    _ => return Ok(None),
                };
                Ok(Some(convolve_capped(&pa, &pb, cap)?))
            }
            BasisExpr::Power(a, k) => {
                let pa = match a.to_coefficients(cap)? {
                    Some(pa) => pa,
                    None => return Ok(None),
                };
                let mut out = vec![Complex64::ONE];
                for _ in 0..*k {
                    out = convolve_capped(&out, &pa, cap)?;
                }
                Ok(Some(out))
            }
            BasisExpr::Exp(_) => Ok(None),
        }
    }
}

pub(crate) fn convolve_capped(
    a: &[Complex64],
    b: &[Complex64],
    cap: usize,
) -> Result<Vec<Complex64>> {
    let da = a.len().saturating_sub(1);
    let db = b.len().saturating_sub(1);
    if da + db > cap {
        return Err(Error::DegreeOverflow {
            degree: da + db,
            cap,
        });
    }
    let mut out = vec![Complex64::ZERO; da + db + 1];
    for (i, x) in a.iter().enumerate() {
        if x.norm_sqr() == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    Ok(out)
}

fn is_zero_const(e: &BasisExpr) -> bool {
    matches!(e, BasisExpr::Const(c) if c.norm_sqr() == 0.0)
}

fn is_one_const(e: &BasisExpr) -> bool {
    matches!(e, BasisExpr::Const(c) if *c == Complex64::ONE)
}

fn fold_sum(a: BasisExpr, b: BasisExpr) -> BasisExpr {
    if is_zero_const(&a) {
        return b;
    }
    if is_zero_const(&b) {
        return a;
    }
    if let (BasisExpr::Const(x), BasisExpr::Const(y)) = (&a, &b) {
        return BasisExpr::Const(x + y);
    }
    BasisExpr::sum(a, b)
}

fn fold_product(a: BasisExpr, b: BasisExpr) -> BasisExpr {
    if is_zero_const(&a) || is_zero_const(&b) {
        return BasisExpr::Const(Complex64::ZERO);
    }
    if is_one_const(&a) {
        return b;
    }
    if is_one_const(&b) {
        return a;
    }
    if let (BasisExpr::Const(x), BasisExpr::Const(y)) = (&a, &b) {
        return BasisExpr::Const(x * y);
    }
    BasisExpr::product(a, b)
}

/// An ordered family of basis functions with cached exact derivatives.
///
/// Construction validates every derivative against central finite differences
/// at random points in |z| <= 2; a disagreement indicates a differentiation
/// bug and is a hard error.
#[derive(Clone, Debug)]
pub struct BasisSystem {
    functions: Vec<BasisExpr>,
    derivatives: Vec<BasisExpr>,
}

/// Relative tolerance for the construction-time derivative check.
const DERIVATIVE_CHECK_TOL: f64 = 1e-7;
const DERIVATIVE_CHECK_POINTS: usize = 100;

impl BasisSystem {
    pub fn new(functions: Vec<BasisExpr>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::EmptyBasis);
        }
        let derivatives: Vec<BasisExpr> = functions.iter().map(|f| f.differentiate()).collect();
        let system = BasisSystem {
            functions,
            derivatives,
        };
        system.validate_derivatives()?;
        Ok(system)
    }

    fn validate_derivatives(&self) -> Result<()> {
        // Fixed seed: construction must be deterministic.
        let mut rng = ChaCha12Rng::seed_from_u64(0x9e3779b97f4a7c15);
        let h = 1e-6;
        for _ in 0..DERIVATIVE_CHECK_POINTS {
            let radius = 2.0 * rng.random::<f64>().sqrt();
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let z = Complex64::from_polar(radius, angle);
            for (index, (f, d)) in self.functions.iter().zip(&self.derivatives).enumerate() {
                let symbolic = d.eval(z)?;
                let fd = (f.eval(z + h)? - f.eval(z - h)?) / (2.0 * h);
                if (symbolic - fd).norm() > DERIVATIVE_CHECK_TOL * (1.0 + symbolic.norm()) {
                    return Err(Error::DerivativeValidation {
                        index,
                        z,
                        symbolic,
                        fd,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn functions(&self) -> &[BasisExpr] {
        &self.functions
    }

    pub fn derivatives(&self) -> &[BasisExpr] {
        &self.derivatives
    }

    pub fn is_polynomial(&self) -> bool {
        self.functions.iter().all(BasisExpr::is_polynomial)
    }

    /// Values of all f_j at `z`.
    pub fn values(&self, z: Complex64) -> Result<Vec<Complex64>> {
        self.functions.iter().map(|f| f.eval(z)).collect()
    }

    /// Values of all f_j' at `z`.
    pub fn derivative_values(&self, z: Complex64) -> Result<Vec<Complex64>> {
        self.derivatives.iter().map(|d| d.eval(z)).collect()
    }

    /// S(z) = sum_j |f_j(z)|^2.
    pub fn norm_squared(&self, z: Complex64) -> Result<f64> {
        let mut s = 0.0;
        for f in &self.functions {
            s += f.eval(z)?.norm_sqr();
        }
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::EvalOverflow { z })
        }
    }

    /// The scalar Q(z) = d/dz d/dzbar log S(z), nonnegative by Cauchy-Schwarz.
    ///
    /// The planar density of the (i/2pi) ddbar log|f| measure is Q(z)/(2*pi).
    /// Values may dip a hair below zero (order 1e-16) from cancellation; they
    /// are returned unclamped.
    pub fn laplacian_log_norm(&self, z: Complex64) -> Result<f64> {
        let values = self.values(z)?;
        let derivs = self.derivative_values(z)?;
        let s: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        if s == 0.0 {
            return Err(Error::CommonZero { z });
        }
        let deriv_norm: f64 = derivs.iter().map(|d| d.norm_sqr()).sum();
        let mixed: Complex64 = derivs
            .iter()
            .zip(&values)
            .map(|(d, v)| d * v.conj())
            .sum();
        let q = (s * deriv_norm - mixed.norm_sqr()) / (s * s);
        if q.is_finite() {
            Ok(q)
        } else {
            Err(Error::EvalOverflow { z })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_identity() {
        let e = BasisExpr::var();
        assert_eq!(e.eval(c(2.0, 1.0)).unwrap(), c(2.0, 1.0));
    }

    #[test]
    fn eval_exp_at_zero() {
        let e = BasisExpr::exp(BasisExpr::var());
        assert_eq!(e.eval(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn eval_z_squared_plus_one_at_i() {
        let e = BasisExpr::sum(
            BasisExpr::product(BasisExpr::var(), BasisExpr::var()),
            BasisExpr::constant(Complex64::ONE),
        );
        let v = e.eval(c(0.0, 1.0)).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn eval_overflow_reported() {
        let e = BasisExpr::exp(BasisExpr::var());
        let err = e.eval(c(1e10, 0.0)).unwrap_err();
        assert!(matches!(err, Error::EvalOverflow { .. }));
    }

    #[test]
    fn derivative_of_square() {
        let e = BasisExpr::power(BasisExpr::var(), 2);
        let d = e.differentiate();
        assert_eq!(d.eval(c(3.0, 0.0)).unwrap(), c(6.0, 0.0));
    }

    #[test]
    fn derivative_of_exp_2z() {
        let e = BasisExpr::exp(BasisExpr::product(
            BasisExpr::constant(c(2.0, 0.0)),
            BasisExpr::var(),
        ));
        let d = e.differentiate();
        assert_eq!(d.eval(c(0.0, 0.0)).unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let e = BasisExpr::constant(c(5.0, -1.0));
        assert_eq!(e.differentiate(), BasisExpr::Const(Complex64::ZERO));
    }

    #[test]
    fn derivatives_match_central_differences() {
        // Construction itself validates at 100 random points; exercise a few
        // nontrivial trees explicitly.
        let exprs = vec![
            BasisExpr::exp(BasisExpr::power(BasisExpr::var(), 3)),
            BasisExpr::product(
                BasisExpr::exp(BasisExpr::var()),
                BasisExpr::sum(BasisExpr::var(), BasisExpr::constant(c(0.5, 0.5))),
            ),
            BasisExpr::power(
                BasisExpr::sum(BasisExpr::var(), BasisExpr::constant(c(-1.0, 0.0))),
                5,
            ),
        ];
        BasisSystem::new(exprs).unwrap();
    }

    #[test]
    fn norm_squared_examples() {
        let sys = BasisSystem::new(vec![BasisExpr::var()]).unwrap();
        assert!((sys.norm_squared(c(2.0, 0.0)).unwrap() - 4.0).abs() < 1e-15);

        let sys = BasisSystem::new(vec![BasisExpr::var(), BasisExpr::constant(Complex64::ONE)])
            .unwrap();
        assert!((sys.norm_squared(c(0.0, 1.0)).unwrap() - 2.0).abs() < 1e-15);

        let sys = BasisSystem::new(vec![BasisExpr::exp(BasisExpr::var())]).unwrap();
        let e2 = (1.0f64).exp().powi(2);
        assert!((sys.norm_squared(c(1.0, 0.0)).unwrap() - e2).abs() < 1e-12);
    }

    #[test]
    fn laplacian_harmonic_for_single_z() {
        let sys = BasisSystem::new(vec![BasisExpr::var()]).unwrap();
        for z in [c(1.0, 0.5), c(-2.0, 0.1), c(0.3, -0.4)] {
            assert!(sys.laplacian_log_norm(z).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn laplacian_fubini_study_at_origin() {
        let sys = BasisSystem::new(vec![BasisExpr::var(), BasisExpr::constant(Complex64::ONE)])
            .unwrap();
        let q = sys.laplacian_log_norm(c(0.0, 0.0)).unwrap();
        assert!((q - 1.0).abs() < 1e-12);

        // General value 1/(1+|z|^2)^2, checked against the 5-point stencil of
        // (1/2) log S; the stencil approximates Laplacian(log sqrt S) = 2 Q.
        let h = 1e-4;
        for z in [c(0.3, 0.2), c(-0.5, 0.6), c(1.0, 0.0)] {
            let f = |w: Complex64| 0.5 * sys.norm_squared(w).unwrap().ln();
            let stencil = (f(z + h) + f(z - h) + f(z + h * Complex64::I)
                + f(z - h * Complex64::I)
                - 4.0 * f(z))
                / (h * h);
            let q = sys.laplacian_log_norm(z).unwrap();
            let expected = 1.0 / (1.0 + z.norm_sqr()).powi(2);
            assert!((q - expected).abs() < 1e-9, "q={q} expected={expected}");
            assert!((q - 0.5 * stencil).abs() < 1e-6 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn laplacian_harmonic_for_exp() {
        let sys = BasisSystem::new(vec![BasisExpr::exp(BasisExpr::var())]).unwrap();
        for z in [c(0.0, 0.0), c(1.0, 2.0), c(-1.5, 0.7)] {
            assert!(sys.laplacian_log_norm(z).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn laplacian_common_zero_is_domain_error() {
        let sys = BasisSystem::new(vec![BasisExpr::var()]).unwrap();
        let err = sys.laplacian_log_norm(c(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::CommonZero { .. }));
    }

    #[test]
    fn laplacian_nonnegative_at_random_points() {
        let sys = BasisSystem::new(vec![
            BasisExpr::var(),
            BasisExpr::exp(BasisExpr::var()),
            BasisExpr::constant(c(0.3, 0.1)),
        ])
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let z = c(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
            assert!(sys.laplacian_log_norm(z).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn polynomial_expansion() {
        let e = BasisExpr::power(
            BasisExpr::sum(BasisExpr::var(), BasisExpr::constant(Complex64::ONE)),
            2,
        );
        let coeffs = e.to_coefficients(100).unwrap().unwrap();
        assert_eq!(coeffs.len(), 3);
        assert!((coeffs[0] - Complex64::ONE).norm() < 1e-15);
        assert!((coeffs[1] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((coeffs[2] - Complex64::ONE).norm() < 1e-15);

        let e = BasisExpr::exp(BasisExpr::var());
        assert!(e.to_coefficients(100).unwrap().is_none());
    }
}
