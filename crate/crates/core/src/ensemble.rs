//! Sampling the random function G_n.
//!
//! G_n is a Gaussian combination of all products f_{j_1} ... f_{j_nu} of at
//! most n basis factors, with iid standard complex Gaussian coefficients
//! (density exp(-|a|^2)/pi). Two equal-in-law samplers are provided:
//!
//! * the full tensor form, one coefficient per ordered index tuple
//!   (N = 1 + l + ... + l^n terms), feasible only for small N;
//! * the reduced form, one coefficient per unordered multi-index alpha with
//!   structural weight sqrt(multinomial(|alpha|; alpha)).
//!
//! Both induce the covariance E[G(z) conj(G(w))] = sum_{k=0}^n <f(z),f(w)>^k,
//! which [`CovarianceKernel`] evaluates in closed form as the equivalence
//! oracle. Trials draw from counter-based ChaCha substreams keyed by
//! (master seed, trial index), so distinct trials are reproducible and
//! independent of execution order.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::BasisSystem;
use crate::error::{Error, Result};

/// Enumeration budget for the full tensor sampler.
pub const FULL_FORM_BUDGET: u64 = 1_000_000;

/// Which expansion a sample uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Full,
    Reduced,
}

/// One term coeff * weight * prod_j f_j^{alpha_j}.
#[derive(Clone, Debug)]
pub struct Term {
    /// Exponent of each basis function; sum(alpha) = nu <= n.
    pub alpha: Vec<u32>,
    /// Structural weight: 1 for the full form, sqrt multinomial otherwise.
    pub weight: f64,
    pub coeff: Complex64,
}

/// One realization of G_n as a weighted term list.
#[derive(Clone, Debug)]
pub struct SampledFunction {
    pub terms: Vec<Term>,
    pub form: Form,
    pub n: u32,
    pub basis_len: usize,
}

/// The ensemble's identity: basis, degree cap and master seed.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub basis: BasisSystem,
    pub n: u32,
    pub seed: u64,
}

/// N = 1 + l + l^2 + ... + l^n, exactly.
pub fn count_terms(basis_len: usize, n: u32) -> Result<u64> {
    let l = basis_len as u64;
    let overflow = || Error::CountOverflow {
        width: basis_len,
        degree: n,
    };
    let mut total: u64 = 0;
    let mut power: u64 = 1;
    for k in 0..=n {
        total = total.checked_add(power).ok_or_else(overflow)?;
        if k < n {
            power = power.checked_mul(l).ok_or_else(overflow)?;
        }
    }
    Ok(total)
}

/// Number of unordered multi-indices with |alpha| <= n over l symbols.
pub fn count_reduced_terms(basis_len: usize, n: u32) -> Result<u64> {
    let overflow = || Error::CountOverflow {
        width: basis_len,
        degree: n,
    };
    let mut total: u64 = 0;
    for nu in 0..=n as u64 {
        // C(nu + l - 1, l - 1)
        let mut c: u64 = 1;
        for i in 1..basis_len as u64 {
            c = c
                .checked_mul(nu + i)
                .ok_or_else(overflow)?
                / i;
        }
        total = total.checked_add(c).ok_or_else(overflow)?;
    }
    Ok(total)
}

/// sqrt(multinomial(sum alpha; alpha)) as a product of binomials.
pub fn sqrt_multinomial(alpha: &[u32]) -> f64 {
    let mut result = 1.0f64;
    let mut seen: u64 = 0;
    for &a in alpha {
        for i in 1..=u64::from(a) {
            seen += 1;
            result *= seen as f64 / i as f64;
        }
    }
    result.sqrt()
}

fn multi_indices(basis_len: usize, nu: u32) -> Vec<Vec<u32>> {
    // compositions of nu into basis_len nonnegative parts, lexicographic
    fn rec(out: &mut Vec<Vec<u32>>, prefix: &mut Vec<u32>, remaining: u32, slots: usize) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for take in 0..=remaining {
            prefix.push(take);
            rec(out, prefix, remaining - take, slots - 1);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut out, &mut Vec::new(), nu, basis_len);
    out
}

impl EnsembleSpec {
    pub fn new(basis: BasisSystem, n: u32, seed: u64) -> Self {
        EnsembleSpec { basis, n, seed }
    }

    fn trial_rng(&self, trial: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }

    /// The reduced form's (alpha, weight) template, coefficient-free.
    pub fn reduced_representation(&self) -> Vec<(Vec<u32>, f64)> {
        let l = self.basis.len();
        let mut out = Vec::new();
        for nu in 0..=self.n {
            for alpha in multi_indices(l, nu) {
                let weight = sqrt_multinomial(&alpha);
                out.push((alpha, weight));
            }
        }
        out
    }

    /// Draw trial `trial` in the reduced multi-index form.
    pub fn sample_reduced(&self, trial: u64) -> SampledFunction {
        let mut rng = self.trial_rng(trial);
        let terms = self
            .reduced_representation()
            .into_iter()
            .map(|(alpha, weight)| Term {
                alpha,
                weight,
                coeff: standard_complex_gaussian(&mut rng),
            })
            .collect();
        SampledFunction {
            terms,
            form: Form::Reduced,
            n: self.n,
            basis_len: self.basis.len(),
        }
    }

    /// Draw trial `trial` in the full tensor form (one coefficient per
    /// ordered tuple). Errors when N exceeds [`FULL_FORM_BUDGET`].
    pub fn sample_full(&self, trial: u64) -> Result<SampledFunction> {
        let l = self.basis.len();
        let total = count_terms(l, self.n)?;
        if total > FULL_FORM_BUDGET {
            return Err(Error::TermBudgetExceeded {
                terms: total,
                budget: FULL_FORM_BUDGET,
            });
        }
        let mut rng = self.trial_rng(trial);
        let mut terms = Vec::with_capacity(total as usize);
        for nu in 0..=self.n {
            // ordered tuples (j_1, ..., j_nu) as a base-l counter
            let mut tuple = vec![0usize; nu as usize];
            loop {
                let mut alpha = vec![0u32; l];
                for &j in &tuple {
                    alpha[j] += 1;
                }
                terms.push(Term {
                    alpha,
                    weight: 1.0,
                    coeff: standard_complex_gaussian(&mut rng),
                });
                let mut pos = nu as usize;
                loop {
                    if pos == 0 {
                        break;
                    }
                    tuple[pos - 1] += 1;
                    if tuple[pos - 1] < l {
                        break;
                    }
                    tuple[pos - 1] = 0;
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
            }
        }
        Ok(SampledFunction {
            terms,
            form: Form::Full,
            n: self.n,
            basis_len: l,
        })
    }
}

/// Re and Im each N(0, 1/2), so E|a|^2 = 1.
fn standard_complex_gaussian(rng: &mut ChaCha12Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

impl SampledFunction {
    /// Build a sample from explicit (alpha, weight, coeff) triples.
    pub fn from_terms(terms: Vec<Term>, form: Form, n: u32, basis_len: usize) -> Self {
        SampledFunction {
            terms,
            form,
            n,
            basis_len,
        }
    }

    /// G(z) = sum coeff * weight * prod f_j(z)^{alpha_j}.
    pub fn eval(&self, basis: &BasisSystem, z: Complex64) -> Result<Complex64> {
        debug_assert_eq!(basis.len(), self.basis_len);
        let vals = basis.values(z)?;
        let mut total = Complex64::ZERO;
        for term in &self.terms {
            total += term.coeff * term.weight * power_product(&vals, &term.alpha);
        }
        finite(total, z)
    }

    /// G'(z), by the product rule over each term.
    pub fn eval_deriv(&self, basis: &BasisSystem, z: Complex64) -> Result<Complex64> {
        debug_assert_eq!(basis.len(), self.basis_len);
        let vals = basis.values(z)?;
        let derivs = basis.derivative_values(z)?;
        let mut total = Complex64::ZERO;
        for term in &self.terms {
            total += term.coeff * term.weight * product_rule(&vals, &derivs, &term.alpha);
        }
        finite(total, z)
    }

    /// G and G' together, sharing one basis evaluation.
    pub fn eval_with_deriv(
        &self,
        basis: &BasisSystem,
        z: Complex64,
    ) -> Result<(Complex64, Complex64)> {
        debug_assert_eq!(basis.len(), self.basis_len);
        let vals = basis.values(z)?;
        let derivs = basis.derivative_values(z)?;
        let mut g = Complex64::ZERO;
        let mut dg = Complex64::ZERO;
        for term in &self.terms {
            let cw = term.coeff * term.weight;
            g += cw * power_product(&vals, &term.alpha);
            dg += cw * product_rule(&vals, &derivs, &term.alpha);
        }
        Ok((finite(g, z)?, finite(dg, z)?))
    }

    /// Root-sum-square of coefficient magnitudes; the natural scale of G.
    pub fn coefficient_scale(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.coeff * t.weight).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// CSV dump: `alpha` as dash-joined basis indices (1-based, empty for the
    /// constant term), then weight, coeff_re, coeff_im. A `#` header records
    /// the form, n and basis length for replay.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# form={} n={} l={}",
            match self.form {
                Form::Full => "full",
                Form::Reduced => "reduced",
            },
            self.n,
            self.basis_len
        )?;
        writeln!(out, "alpha,weight,coeff_re,coeff_im")?;
        for term in &self.terms {
            let mut indices = Vec::new();
            for (j, &count) in term.alpha.iter().enumerate() {
                for _ in 0..count {
                    indices.push((j + 1).to_string());
                }
            }
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e}",
                indices.join("-"),
                term.weight,
                term.coeff.re,
                term.coeff.im
            )?;
        }
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut form = Form::Reduced;
        let mut n = 0u32;
        let mut basis_len = 1usize;
        let mut terms = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let parse_err = |msg: &str| Error::Parse {
                line: idx + 1,
                col: 1,
                msg: msg.to_string(),
            };
            if let Some(rest) = line.strip_prefix('#') {
                for field in rest.split_whitespace() {
                    if let Some(v) = field.strip_prefix("form=") {
                        form = if v == "full" { Form::Full } else { Form::Reduced };
                    } else if let Some(v) = field.strip_prefix("n=") {
                        n = v.parse().map_err(|_| parse_err("bad n"))?;
                    } else if let Some(v) = field.strip_prefix("l=") {
                        basis_len = v.parse().map_err(|_| parse_err("bad l"))?;
                    }
                }
                continue;
            }
            if line.trim().is_empty() || line.starts_with("alpha") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(parse_err("expected 4 fields"));
            }
            let mut alpha = vec![0u32; basis_len];
            if !fields[0].is_empty() {
                for ix in fields[0].split('-') {
                    let j: usize = ix.parse().map_err(|_| parse_err("bad index"))?;
                    if j == 0 || j > basis_len {
                        return Err(parse_err("basis index out of range"));
                    }
                    alpha[j - 1] += 1;
                }
            }
            let weight: f64 = fields[1].parse().map_err(|_| parse_err("bad weight"))?;
            let re: f64 = fields[2].parse().map_err(|_| parse_err("bad coeff_re"))?;
            let im: f64 = fields[3].parse().map_err(|_| parse_err("bad coeff_im"))?;
            terms.push(Term {
                alpha,
                weight,
                coeff: Complex64::new(re, im),
            });
        }
        Ok(SampledFunction {
            terms,
            form,
            n,
            basis_len,
        })
    }
}

fn finite(v: Complex64, z: Complex64) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::EvalOverflow { z })
    }
}

fn power_product(vals: &[Complex64], alpha: &[u32]) -> Complex64 {
    let mut p = Complex64::ONE;
    for (v, &a) in vals.iter().zip(alpha) {
        if a > 0 {
            p *= v.powu(a);
        }
    }
    p
}

fn product_rule(vals: &[Complex64], derivs: &[Complex64], alpha: &[u32]) -> Complex64 {
    let mut total = Complex64::ZERO;
    for j in 0..alpha.len() {
        let a = alpha[j];
        if a == 0 {
            continue;
        }
        let mut part = f64::from(a) * derivs[j] * vals[j].powu(a - 1);
        for (k, (&v, &b)) in vals.iter().zip(alpha).enumerate() {
            if k != j && b > 0 {
                part *= v.powu(b);
            }
        }
        total += part;
    }
    total
}

/// Closed-form covariance kernel K(z, w) = sum_{k=0}^n <f(z), f(w)>^k.
#[derive(Clone, Debug)]
pub struct CovarianceKernel {
    pub basis: BasisSystem,
    pub n: u32,
}

impl CovarianceKernel {
    pub fn new(basis: BasisSystem, n: u32) -> Self {
        CovarianceKernel { basis, n }
    }

    pub fn eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let fz = self.basis.values(z)?;
        let fw = self.basis.values(w)?;
        let inner: Complex64 = fz.iter().zip(&fw).map(|(a, b)| a * b.conj()).sum();
        let mut total = Complex64::ZERO;
        let mut power = Complex64::ONE;
        for k in 0..=self.n {
            total += power;
            if k < self.n {
                power *= inner;
            }
        }
        if total.re.is_finite() && total.im.is_finite() {
            Ok(total)
        } else {
            Err(Error::EvalOverflow { z })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisExpr;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kac_basis() -> BasisSystem {
        BasisSystem::new(vec![BasisExpr::var()]).unwrap()
    }

    fn affine_basis() -> BasisSystem {
        BasisSystem::new(vec![BasisExpr::var(), BasisExpr::constant(Complex64::ONE)]).unwrap()
    }

    #[test]
    fn term_counts() {
        assert_eq!(count_terms(2, 3).unwrap(), 15);
        for n in [0u32, 1, 7, 300] {
            assert_eq!(count_terms(1, n).unwrap(), u64::from(n) + 1);
        }
        assert_eq!(count_terms(3, 0).unwrap(), 1);
        assert!(matches!(
            count_terms(10, 30),
            Err(Error::CountOverflow { .. })
        ));
    }

    #[test]
    fn reduced_counts_and_weights() {
        let spec = EnsembleSpec::new(affine_basis(), 3, 1);
        let template = spec.reduced_representation();
        assert_eq!(template.len(), 10); // 1 + 2 + 3 + 4
        assert_eq!(count_reduced_terms(2, 3).unwrap(), 10);

        // l=1: all weights 1
        let spec = EnsembleSpec::new(kac_basis(), 5, 1);
        assert!(spec
            .reduced_representation()
            .iter()
            .all(|(_, w)| (*w - 1.0).abs() < 1e-15));

        // alpha = (1,1): weight sqrt(2)
        assert!((sqrt_multinomial(&[1, 1]) - 2.0f64.sqrt()).abs() < 1e-15);
        // alpha = (2,1): multinomial(3;2,1) = 3
        assert!((sqrt_multinomial(&[2, 1]) - 3.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn full_sampler_shapes() {
        let spec = EnsembleSpec::new(affine_basis(), 0, 9);
        let s = spec.sample_full(0).unwrap();
        assert_eq!(s.terms.len(), 1);

        let spec = EnsembleSpec::new(affine_basis(), 3, 9);
        let s = spec.sample_full(0).unwrap();
        assert_eq!(s.terms.len(), 15);
        assert!(s.terms.iter().all(|t| t.weight == 1.0));

        // budget guard
        let spec = EnsembleSpec::new(affine_basis(), 25, 9);
        assert!(matches!(
            spec.sample_full(0),
            Err(Error::TermBudgetExceeded { .. })
        ));
    }

    #[test]
    fn coefficient_moments() {
        // E[a] ~ 0 and E[|a|^2] ~ 1 within 4 standard errors over 1e5 draws
        let spec = EnsembleSpec::new(kac_basis(), 0, 2024);
        let m = 100_000;
        let mut sum = Complex64::ZERO;
        let mut sum_sq = 0.0;
        for trial in 0..m {
            let a = spec.sample_reduced(trial).terms[0].coeff;
            sum += a;
            sum_sq += a.norm_sqr();
        }
        let mf = m as f64;
        let mean = sum / mf;
        let mean_sq = sum_sq / mf;
        // each component has variance 1/2; |a|^2 ~ Exp(1) has variance 1
        let se_comp = (0.5f64 / mf).sqrt();
        assert!(mean.re.abs() < 4.0 * se_comp, "mean.re = {}", mean.re);
        assert!(mean.im.abs() < 4.0 * se_comp, "mean.im = {}", mean.im);
        assert!((mean_sq - 1.0).abs() < 4.0 / mf.sqrt(), "E|a|^2 = {mean_sq}");
    }

    #[test]
    fn determinism_and_stream_separation() {
        let spec = EnsembleSpec::new(affine_basis(), 3, 42);
        let a = spec.sample_reduced(7);
        let b = spec.sample_reduced(7);
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert_eq!(x.coeff, y.coeff);
        }
        let c = spec.sample_reduced(8);
        assert!(a.terms.iter().zip(&c.terms).any(|(x, y)| x.coeff != y.coeff));
    }

    #[test]
    fn eval_examples() {
        let basis = kac_basis();
        // zero coefficients
        let zero = SampledFunction::from_terms(
            vec![
                Term {
                    alpha: vec![0],
                    weight: 1.0,
                    coeff: Complex64::ZERO,
                },
                Term {
                    alpha: vec![1],
                    weight: 1.0,
                    coeff: Complex64::ZERO,
                },
            ],
            Form::Reduced,
            1,
            1,
        );
        assert_eq!(zero.eval(&basis, c(3.0, -1.0)).unwrap(), Complex64::ZERO);

        // G = 1 - z at z = 1
        let g = SampledFunction::from_terms(
            vec![
                Term {
                    alpha: vec![0],
                    weight: 1.0,
                    coeff: Complex64::ONE,
                },
                Term {
                    alpha: vec![1],
                    weight: 1.0,
                    coeff: -Complex64::ONE,
                },
            ],
            Form::Reduced,
            1,
            1,
        );
        assert_eq!(g.eval(&basis, Complex64::ONE).unwrap(), Complex64::ZERO);
        assert_eq!(g.eval_deriv(&basis, Complex64::ONE).unwrap(), -Complex64::ONE);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let basis = BasisSystem::new(vec![
            BasisExpr::var(),
            BasisExpr::exp(BasisExpr::var()),
        ])
        .unwrap();
        let spec = EnsembleSpec::new(basis.clone(), 4, 5);
        let sample = spec.sample_reduced(3);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        use rand::Rng;
        let h = 1e-6;
        for _ in 0..50 {
            let z = c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
            let sym = sample.eval_deriv(&basis, z).unwrap();
            let fd = (sample.eval(&basis, z + h).unwrap() - sample.eval(&basis, z - h).unwrap())
                / (2.0 * h);
            assert!(
                (sym - fd).norm() <= 1e-6 * (1.0 + sym.norm()),
                "sym={sym} fd={fd}"
            );
        }
    }

    #[test]
    fn covariance_examples() {
        let k = CovarianceKernel::new(kac_basis(), 2);
        let v = k.eval(Complex64::ONE, Complex64::ONE).unwrap();
        assert!((v - c(3.0, 0.0)).norm() < 1e-15);
        let v = k.eval(c(2.0, 0.0), Complex64::ZERO).unwrap();
        assert!((v - Complex64::ONE).norm() < 1e-15);

        let k = CovarianceKernel::new(affine_basis(), 1);
        let v = k.eval(Complex64::I, Complex64::I).unwrap();
        assert!((v - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn covariance_hermitian_and_diagonal_identity() {
        let basis = BasisSystem::new(vec![
            BasisExpr::var(),
            BasisExpr::exp(BasisExpr::var()),
        ])
        .unwrap();
        let kernel = CovarianceKernel::new(basis.clone(), 5);
        let pts = [c(0.3, 0.2), c(-0.8, 0.5), c(1.0, -1.0)];
        for &z in &pts {
            for &w in &pts {
                let a = kernel.eval(z, w).unwrap();
                let b = kernel.eval(w, z).unwrap();
                assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
            }
            // diagonal: sum of S^k, real, >= 1
            let s = basis.norm_squared(z).unwrap();
            let mut expected = 0.0;
            let mut p = 1.0;
            for k in 0..=5 {
                expected += p;
                if k < 5 {
                    p *= s;
                }
            }
            let diag = kernel.eval(z, z).unwrap();
            assert!(diag.im.abs() <= 1e-12 * diag.re);
            assert!((diag.re - expected).abs() <= 1e-12 * expected);
            assert!(diag.re >= 1.0);
        }
    }

    #[test]
    fn csv_round_trip() {
        let spec = EnsembleSpec::new(affine_basis(), 2, 77);
        let s = spec.sample_reduced(4);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SampledFunction::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.terms.len(), s.terms.len());
        assert_eq!(back.n, s.n);
        assert_eq!(back.basis_len, s.basis_len);
        for (a, b) in s.terms.iter().zip(&back.terms) {
            assert_eq!(a.alpha, b.alpha);
            assert_eq!(a.coeff, b.coeff);
            assert!((a.weight - b.weight).abs() < 1e-15 * (1.0 + a.weight));
        }
    }
}
