//! Empirical zero measures and their Monte Carlo aggregation.
//!
//! One located zero set becomes the normalized counting measure: an atom at
//! each zero with weight multiplicity * (1/n) * log(r/|z|). Aggregation over
//! trials estimates the expectation: mean pairings against a declared list of
//! test functions, a binned density on an annular-sector grid, and standard
//! errors for everything. Trials run in parallel but reduce in trial order,
//! so a report is bit-for-bit reproducible for a fixed (spec, r, M, seed).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::limit::LimitMeasure;
use crate::zeros::{find_zeros, ZeroSet};

/// Z(r, G_n): atoms (location, weight) with weight m * (1/n) * log(r/|z|).
#[derive(Clone, Debug)]
pub struct WeightedPointMeasure {
    pub atoms: Vec<(Complex64, f64)>,
    pub r: f64,
    pub n: u32,
}

impl WeightedPointMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }
}

/// The normalized counting measure of a zero set.
///
/// Origin-flagged zeros are excluded: their weight log(r/|z|) diverges and
/// the measure is defined on the punctured disk.
pub fn normalized_counting_measure(zeros: &ZeroSet, n: u32) -> Result<WeightedPointMeasure> {
    if n == 0 {
        return Err(Error::DegenerateNormalization);
    }
    let r = zeros.radius;
    let mut atoms = Vec::with_capacity(zeros.zeros.len());
    for z in &zeros.zeros {
        if z.near_origin {
            continue;
        }
        let weight = f64::from(z.multiplicity) * (r / z.location.norm()).ln() / f64::from(n);
        atoms.push((z.location, weight));
    }
    Ok(WeightedPointMeasure { atoms, r, n })
}

/// Bounded test functions on the disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// phi == 1 (on the disk the measures live in).
    Disk,
    /// Gaussian bump in radius: exp(-((|z| - radius)/width)^2).
    RadialBump { radius: f64, width: f64 },
    /// Indicator of arg z in [from, to), radians in [0, 2pi).
    Sector { from: f64, to: f64 },
    /// Indicator of inner <= |z| < outer.
    Annulus { inner: f64, outer: f64 },
    /// exp(-|z - center|^2 / width^2).
    GaussianBump { center: [f64; 2], width: f64 },
    /// Linear combination, for linearity checks and composite probes.
    Combo(Vec<(f64, TestFunction)>),
}

impl TestFunction {
    pub fn eval(&self, z: Complex64) -> f64 {
        match self {
            TestFunction::Disk => 1.0,
            TestFunction::RadialBump { radius, width } => {
                let d = (z.norm() - radius) / width;
                (-d * d).exp()
            }
            TestFunction::Sector { from, to } => {
                let mut theta = z.arg();
                if theta < 0.0 {
                    theta += std::f64::consts::TAU;
                }
                let inside = if from <= to {
                    theta >= *from && theta < *to
                } else {
                    theta >= *from || theta < *to
                };
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Annulus { inner, outer } => {
                let m = z.norm();
                if m >= *inner && m < *outer {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::GaussianBump { center, width } => {
                let d = z - Complex64::new(center[0], center[1]);
                (-d.norm_sqr() / (width * width)).exp()
            }
            TestFunction::Combo(parts) => parts.iter().map(|(a, phi)| a * phi.eval(z)).sum(),
        }
    }
}

/// sum of weight * phi(location) over the atoms.
pub fn pair(measure: &WeightedPointMeasure, phi: &TestFunction) -> f64 {
    measure.atoms.iter().map(|(z, w)| w * phi.eval(*z)).sum()
}

/// Annular-sector binning of the punctured disk 0 < |z| < r.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub radial: usize,
    pub angular: usize,
    pub r: f64,
}

impl BinGrid {
    /// The default 40 x 24 grid resolves unit-circle concentration at the
    /// degrees this crate simulates without empty-bin noise.
    pub fn default_for(r: f64) -> Self {
        BinGrid {
            radial: 40,
            angular: 24,
            r,
        }
    }

    pub fn len(&self) -> usize {
        self.radial * self.angular
    }

    pub fn is_empty(&self) -> bool {
        self.radial == 0 || self.angular == 0
    }

    /// Flat bin index of a point in the punctured disk, `None` outside.
    pub fn index(&self, z: Complex64) -> Option<usize> {
        let m = z.norm();
        if m <= 0.0 || m >= self.r {
            return None;
        }
        let ring = ((m / self.r) * self.radial as f64) as usize;
        let ring = ring.min(self.radial - 1);
        let mut theta = z.arg();
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        let sector = ((theta / std::f64::consts::TAU) * self.angular as f64) as usize;
        let sector = sector.min(self.angular - 1);
        Some(ring * self.angular + sector)
    }

    pub fn masses(&self, measure: &WeightedPointMeasure) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (z, w) in &measure.atoms {
            if let Some(i) = self.index(*z) {
                out[i] += w;
            }
        }
        out
    }
}

/// One atom retained for dumping: (trial, location, weight).
#[derive(Clone, Copy, Debug)]
pub struct TrialAtom {
    pub trial: u64,
    pub location: Complex64,
    pub weight: f64,
}

/// Options for [`monte_carlo_expectation`].
#[derive(Clone, Debug)]
pub struct MonteCarloOptions {
    pub r: f64,
    pub trials: u64,
    pub grid: BinGrid,
    /// Named test functions to pair every trial measure with.
    pub phis: Vec<(String, TestFunction)>,
    /// Residual tolerance handed to the zero finders.
    pub zero_tol: f64,
    /// Keep per-trial atoms for CSV dumps.
    pub collect_atoms: bool,
}

impl MonteCarloOptions {
    pub fn new(r: f64, trials: u64) -> Self {
        MonteCarloOptions {
            r,
            trials,
            grid: BinGrid::default_for(r),
            phis: vec![("total-mass".to_string(), TestFunction::Disk)],
            zero_tol: 1e-9,
            collect_atoms: false,
        }
    }
}

/// Monte Carlo estimate of the expected measure.
#[derive(Clone, Debug, Serialize)]
pub struct AggregatedMeasure {
    pub n: u32,
    pub r: f64,
    pub seed: u64,
    pub trials_requested: u64,
    pub trials_used: u64,
    pub failed_trials: Vec<u64>,
    pub phi_names: Vec<String>,
    pub mean_pairings: Vec<f64>,
    pub pairing_ses: Vec<f64>,
    pub mean_total_mass: f64,
    pub total_mass_se: f64,
    pub mean_zero_count: f64,
    pub grid: BinGrid,
    pub mean_bin_masses: Vec<f64>,
    pub bin_ses: Vec<f64>,
    #[serde(skip)]
    pub atoms: Vec<TrialAtom>,
    #[serde(skip)]
    pub per_trial_pairings: Vec<Vec<f64>>,
}

struct TrialStats {
    total_mass: f64,
    pairings: Vec<f64>,
    bins: Vec<f64>,
    zero_count: f64,
    atoms: Vec<TrialAtom>,
}

fn run_trial(spec: &EnsembleSpec, opts: &MonteCarloOptions, trial: u64) -> Result<TrialStats> {
    let sample = spec.sample_reduced(trial);
    let zeros = find_zeros(&sample, &spec.basis, opts.r, opts.zero_tol)?;
    let measure = normalized_counting_measure(&zeros, spec.n)?;
    let pairings: Vec<f64> = opts
        .phis
        .iter()
        .map(|(_, phi)| pair(&measure, phi))
        .collect();
    let bins = opts.grid.masses(&measure);
    let atoms = if opts.collect_atoms {
        measure
            .atoms
            .iter()
            .map(|&(location, weight)| TrialAtom {
                trial,
                location,
                weight,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(TrialStats {
        total_mass: measure.total_mass(),
        pairings,
        bins,
        zero_count: zeros.multiplicity_sum() as f64,
        atoms,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Run sample -> find zeros -> measure over trials 0..M-1 and aggregate.
///
/// Individual trial failures are recorded and excluded; a failure rate above
/// 2% aborts with [`Error::TrialFailureRate`].
pub fn monte_carlo_expectation(
    spec: &EnsembleSpec,
    opts: &MonteCarloOptions,
) -> Result<AggregatedMeasure> {
    if opts.trials == 0 {
        return Err(Error::TrialFailureRate {
            failed: 0,
            total: 0,
        });
    }
    // ordered collection keeps the reduction deterministic under any
    // thread schedule
    let results: Vec<(u64, Result<TrialStats>)> = (0..opts.trials)
        .into_par_iter()
        .map(|trial| (trial, run_trial(spec, opts, trial)))
        .collect();

    let total = opts.trials as usize;
    let mut failed_trials = Vec::new();
    let mut stats = Vec::with_capacity(total);
    for (trial, outcome) in results {
        match outcome {
            Ok(s) => stats.push(s),
            Err(_) => failed_trials.push(trial),
        }
    }
    if failed_trials.len() * 50 > total {
        return Err(Error::TrialFailureRate {
            failed: failed_trials.len(),
            total,
        });
    }

    let masses: Vec<f64> = stats.iter().map(|s| s.total_mass).collect();
    let (mean_total_mass, total_mass_se) = mean_and_se(&masses);
    let counts: Vec<f64> = stats.iter().map(|s| s.zero_count).collect();
    let (mean_zero_count, _) = mean_and_se(&counts);

    let phi_count = opts.phis.len();
    let mut mean_pairings = Vec::with_capacity(phi_count);
    let mut pairing_ses = Vec::with_capacity(phi_count);
    let mut per_trial_pairings = Vec::with_capacity(phi_count);
    for k in 0..phi_count {
        let column: Vec<f64> = stats.iter().map(|s| s.pairings[k]).collect();
        let (mean, se) = mean_and_se(&column);
        mean_pairings.push(mean);
        pairing_ses.push(se);
        per_trial_pairings.push(column);
    }

    let bins = opts.grid.len();
    let mut mean_bin_masses = vec![0.0; bins];
    let mut bin_ses = vec![0.0; bins];
    for b in 0..bins {
        let column: Vec<f64> = stats.iter().map(|s| s.bins[b]).collect();
        let (mean, se) = mean_and_se(&column);
        mean_bin_masses[b] = mean;
        bin_ses[b] = if se.is_finite() { se } else { 0.0 };
    }

    let atoms = stats.into_iter().flat_map(|s| s.atoms).collect();

    Ok(AggregatedMeasure {
        n: spec.n,
        r: opts.r,
        seed: spec.seed,
        trials_requested: opts.trials,
        trials_used: opts.trials - failed_trials.len() as u64,
        failed_trials,
        phi_names: opts.phis.iter().map(|(name, _)| name.clone()).collect(),
        mean_pairings,
        pairing_ses,
        mean_total_mass,
        total_mass_se,
        mean_zero_count,
        grid: opts.grid.clone(),
        mean_bin_masses,
        bin_ses,
        atoms,
        per_trial_pairings,
    })
}

impl AggregatedMeasure {
    /// CSV dump of collected atoms: trial, re, im, weight.
    pub fn write_atoms_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "trial,re,im,weight")?;
        for a in &self.atoms {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e}",
                a.trial, a.location.re, a.location.im, a.weight
            )?;
        }
        Ok(())
    }
}

/// One test function's empirical-vs-theoretical comparison row.
#[derive(Clone, Debug, Serialize)]
pub struct PhiComparison {
    pub name: String,
    pub empirical: f64,
    pub empirical_se: f64,
    pub theoretical: f64,
    pub gap: f64,
    pub gap_in_ses: f64,
}

/// Empirical aggregate vs the predicted limit measure.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub n: u32,
    pub r: f64,
    pub trials: u64,
    pub per_phi: Vec<PhiComparison>,
    /// sum over bins of |empirical - theoretical| mass.
    pub binned_discrepancy: f64,
}

/// Pair both measures with each test function and difference the bin masses.
pub fn compare(
    empirical: &AggregatedMeasure,
    limit: &LimitMeasure,
    phis: &[(String, TestFunction)],
) -> Result<ComparisonReport> {
    if (empirical.r - limit.r).abs() > 1e-12 * empirical.r {
        return Err(Error::WindowMismatch);
    }
    let mut per_phi = Vec::with_capacity(phis.len());
    for (name, phi) in phis {
        let idx = empirical.phi_names.iter().position(|n| n == name);
        let (emp, se) = match idx {
            Some(i) => (empirical.mean_pairings[i], empirical.pairing_ses[i]),
            None => return Err(Error::WindowMismatch),
        };
        let theo = limit.pairing(phi)?;
        let gap = (emp - theo).abs();
        per_phi.push(PhiComparison {
            name: name.clone(),
            empirical: emp,
            empirical_se: se,
            theoretical: theo,
            gap,
            gap_in_ses: if se > 0.0 { gap / se } else { f64::INFINITY },
        });
    }
    let theo_bins = limit.bin_masses(&empirical.grid)?;
    let binned_discrepancy = empirical
        .mean_bin_masses
        .iter()
        .zip(&theo_bins)
        .map(|(e, t)| (e - t).abs())
        .sum();
    Ok(ComparisonReport {
        n: empirical.n,
        r: empirical.r,
        trials: empirical.trials_used,
        per_phi,
        binned_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisExpr, BasisSystem};
    use crate::zeros::{Method, Zero, ZeroSet};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zero_at(location: Complex64, multiplicity: u32) -> Zero {
        Zero {
            location,
            multiplicity,
            residual: 0.0,
            near_origin: false,
        }
    }

    fn zero_set(zeros: Vec<Zero>, radius: f64) -> ZeroSet {
        let disk_count = zeros.iter().map(|z| i64::from(z.multiplicity)).sum();
        ZeroSet {
            zeros,
            radius,
            method: Method::Polynomial,
            max_residual: 0.0,
            disk_count,
            count_radius: radius,
        }
    }

    #[test]
    fn single_zero_at_r_over_e_has_weight_one() {
        let r = 3.7;
        let zs = zero_set(vec![zero_at(c(r / std::f64::consts::E, 0.0), 1)], r);
        let m = normalized_counting_measure(&zs, 1).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert!((m.atoms[0].1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn empty_zero_set_gives_zero_measure() {
        let zs = zero_set(vec![], 2.0);
        let m = normalized_counting_measure(&zs, 5).unwrap();
        assert!(m.atoms.is_empty());
        assert_eq!(m.total_mass(), 0.0);
    }

    #[test]
    fn three_zeros_at_half_radius_total_log_two() {
        let r = 2.0;
        let zeros = (0..3)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / 3.0;
                zero_at(Complex64::from_polar(r / 2.0, theta), 1)
            })
            .collect();
        let m = normalized_counting_measure(&zero_set(zeros, r), 3).unwrap();
        assert!((m.total_mass() - 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_normalization_rejected() {
        let zs = zero_set(vec![], 2.0);
        assert!(matches!(
            normalized_counting_measure(&zs, 0),
            Err(Error::DegenerateNormalization)
        ));
    }

    #[test]
    fn origin_flagged_zeros_excluded() {
        let mut origin = zero_at(c(1e-15, 0.0), 1);
        origin.near_origin = true;
        let zs = zero_set(vec![origin, zero_at(c(1.0, 0.0), 1)], 2.0);
        let m = normalized_counting_measure(&zs, 1).unwrap();
        assert_eq!(m.atoms.len(), 1);
    }

    #[test]
    fn pair_examples() {
        let r = 2.0;
        let zs = zero_set(vec![zero_at(c(1.0, 0.1), 1), zero_at(c(0.5, -0.2), 2)], r);
        let m = normalized_counting_measure(&zs, 4).unwrap();
        // phi == 1 gives total mass
        assert_eq!(pair(&m, &TestFunction::Disk), m.total_mass());
        // left half-plane sector misses atoms in the right half-plane
        let left = TestFunction::Sector {
            from: std::f64::consts::FRAC_PI_2,
            to: 3.0 * std::f64::consts::FRAC_PI_2,
        };
        assert_eq!(pair(&m, &left), 0.0);
    }

    #[test]
    fn pair_is_linear() {
        let zs = zero_set(
            vec![
                zero_at(c(0.9, 0.5), 1),
                zero_at(c(-0.3, -0.8), 1),
                zero_at(c(0.1, 1.2), 3),
            ],
            2.0,
        );
        let m = normalized_counting_measure(&zs, 7).unwrap();
        let phi1 = TestFunction::GaussianBump {
            center: [0.5, 0.0],
            width: 0.7,
        };
        let phi2 = TestFunction::RadialBump {
            radius: 1.0,
            width: 0.3,
        };
        let combo = TestFunction::Combo(vec![(2.5, phi1.clone()), (-1.25, phi2.clone())]);
        let lhs = pair(&m, &combo);
        let rhs = 2.5 * pair(&m, &phi1) - 1.25 * pair(&m, &phi2);
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn bin_grid_covers_disk() {
        let grid = BinGrid::default_for(2.0);
        assert_eq!(grid.len(), 960);
        assert!(grid.index(c(1.0, 0.0)).is_some());
        assert!(grid.index(c(2.0, 0.0)).is_none());
        assert!(grid.index(c(0.0, 0.0)).is_none());
        // masses account for every in-disk atom
        let zs = zero_set(vec![zero_at(c(1.0, 0.2), 1), zero_at(c(-0.4, 0.9), 1)], 2.0);
        let m = normalized_counting_measure(&zs, 2).unwrap();
        let masses = grid.masses(&m);
        assert!((masses.iter().sum::<f64>() - m.total_mass()).abs() < 1e-15);
        assert!(masses.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn single_trial_aggregate_is_that_trial() {
        let basis = BasisSystem::new(vec![BasisExpr::var()]).unwrap();
        let spec = EnsembleSpec::new(basis.clone(), 8, 4242);
        let opts = MonteCarloOptions::new(1.5, 1);
        let agg = monte_carlo_expectation(&spec, &opts).unwrap();
        assert_eq!(agg.trials_used, 1);
        let sample = spec.sample_reduced(0);
        let zeros = find_zeros(&sample, &basis, 1.5, 1e-9).unwrap();
        let m = normalized_counting_measure(&zeros, 8).unwrap();
        assert_eq!(agg.mean_total_mass, m.total_mass());
    }

    #[test]
    fn mean_total_mass_equals_disk_pairing_exactly() {
        let basis = BasisSystem::new(vec![BasisExpr::var()]).unwrap();
        let spec = EnsembleSpec::new(basis, 12, 7);
        let opts = MonteCarloOptions::new(2.0, 6);
        let agg = monte_carlo_expectation(&spec, &opts).unwrap();
        let disk_idx = agg
            .phi_names
            .iter()
            .position(|n| n == "total-mass")
            .unwrap();
        assert_eq!(agg.mean_pairings[disk_idx], agg.mean_total_mass);
    }

    #[test]
    fn aggregation_is_reproducible_bit_for_bit() {
        let basis = BasisSystem::new(vec![BasisExpr::var()]).unwrap();
        let spec = EnsembleSpec::new(basis, 10, 99);
        let mut opts = MonteCarloOptions::new(2.0, 5);
        opts.phis.push((
            "sector-0".into(),
            TestFunction::Sector {
                from: 0.0,
                to: std::f64::consts::FRAC_PI_2,
            },
        ));
        let a = monte_carlo_expectation(&spec, &opts).unwrap();
        let b = monte_carlo_expectation(&spec, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn failing_trials_abort_above_threshold() {
        // exp basis at a radius where evaluation overflows on the contour
        let basis = BasisSystem::new(vec![BasisExpr::exp(BasisExpr::var())]).unwrap();
        let spec = EnsembleSpec::new(basis, 3, 1);
        let opts = MonteCarloOptions::new(500.0, 3);
        assert!(matches!(
            monte_carlo_expectation(&spec, &opts),
            Err(Error::TrialFailureRate { .. })
        ));
    }
}
