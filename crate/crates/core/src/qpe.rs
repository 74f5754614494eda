//! Phase estimation of `U2 U1` on the normalized start state, simulated at
//! the level of its measurement distribution, and the decision rule built on
//! top of it.
//!
//! Measuring a `b`-bit register after phase estimation of an eigenvector with
//! phase `θ` yields `k` with probability
//! `sin²(π M Δ) / (M² sin²(π Δ))`, `M = 2^b`, `Δ = θ/2π - k/M`. A superposed
//! input behaves as the mixture of its eigencomponents weighted by overlap.

use std::cell::OnceCell;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formula::{Assignment, FormulaTree};
use crate::spectral::{self, EigenDecomposition, ProductSpectrum, ReflectionPair};
use crate::tree::{attach_tail_capped, build_hamiltonian, AugmentedTree, Mode, DEFAULT_MAX_DIM};

/// Lower bound on the fraction of accepting runs when `T = 0`.
pub const OVERLAP_CONSTANT: f64 = 0.2;
pub const DEFAULT_EPSILON: f64 = 1.0 / 15.0;
pub const DEFAULT_REPETITIONS: usize = 25;
pub const GUARD_BITS: u32 = 2;
pub const MAX_REGISTER_BITS: u32 = 24;

/// `θ_min = 1/√(20N)` (balanced) or `1/√(30Nd)` (general).
pub fn theta_min(mode: Mode, leaves: usize, depth: usize) -> f64 {
    match mode {
        Mode::Balanced => 1.0 / (20.0 * leaves as f64).sqrt(),
        Mode::General => 1.0 / (30.0 * (leaves * depth) as f64).sqrt(),
    }
}

/// `⌈log2(2π/δ)⌉`.
pub fn min_register_bits(delta: f64) -> u32 {
    (2.0 * PI / delta).log2().ceil().max(1.0) as u32
}

/// Midpoint between the `T = 0` acceptance rate `(1-ε)c` and the `T = 1`
/// rate `ε`.
pub fn decision_threshold(epsilon: f64) -> f64 {
    ((1.0 - epsilon) * OVERLAP_CONSTANT + epsilon) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpeConfig {
    pub register_bits: u32,
    pub repetitions: usize,
    pub theta_min: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl QpeConfig {
    /// Defaults for a threshold `θ_min`: `δ = θ_min/2`, `ε = 1/15`, `C = 25`
    /// and two guard bits above the precision requirement.
    pub fn new(theta_min: f64, seed: u64) -> Self {
        let delta = theta_min / 2.0;
        QpeConfig {
            register_bits: min_register_bits(delta) + GUARD_BITS,
            repetitions: DEFAULT_REPETITIONS,
            theta_min,
            delta,
            epsilon: DEFAULT_EPSILON,
            seed,
        }
    }

    pub fn for_tree(at: &AugmentedTree, seed: u64) -> Self {
        Self::new(theta_min(at.mode(), at.leaf_count(), at.depth()), seed)
    }

    pub fn with_bits(mut self, bits: u32) -> Self {
        self.register_bits = bits;
        self
    }

    pub fn with_repetitions(mut self, repetitions: usize) -> Self {
        self.repetitions = repetitions;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_min > 0.0 && self.theta_min.is_finite()) {
            return Err(Error::Config(format!("theta_min must be positive, got {}", self.theta_min)));
        }
        if (self.delta - self.theta_min / 2.0).abs() > 1e-15 * self.theta_min {
            return Err(Error::Config("delta must equal theta_min / 2".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= DEFAULT_EPSILON + 1e-15) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1/15], got {}", self.epsilon)));
        }
        let need = min_register_bits(self.delta);
        if self.register_bits < need {
            return Err(Error::Config(format!(
                "{} register bits cannot resolve delta = {:.6}; need at least {need}",
                self.register_bits, self.delta
            )));
        }
        if self.register_bits > MAX_REGISTER_BITS {
            return Err(Error::Config(format!(
                "register of {} bits exceeds the cap of {MAX_REGISTER_BITS}",
                self.register_bits
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        Ok(())
    }

    /// `C (2^b - 1)`: one query per application of `U2 U1`.
    pub fn query_count(&self) -> u64 {
        self.repetitions as u64 * ((1u64 << self.register_bits) - 1)
    }

    pub fn threshold(&self) -> f64 {
        decision_threshold(self.epsilon)
    }
}

/// Exact law of the register outcome `k ∈ [0, 2^b)` for phase `θ`.
pub fn estimate_distribution(theta: f64, bits: u32) -> Vec<f64> {
    let m = (1u64 << bits) as f64;
    let x = theta / (2.0 * PI);
    (0..1u64 << bits)
        .map(|k| {
            let diff = x - k as f64 / m;
            let d = diff - diff.round();
            let s = (PI * d).sin();
            if s.abs() < 1e-300 || d.abs() < 1e-15 {
                1.0
            } else {
                let num = (PI * m * d).sin();
                (num * num) / (m * m * s * s)
            }
        })
        .collect()
}

/// Phase in (-π, π] encoded by register outcome `k`.
pub fn outcome_phase(k: u64, bits: u32) -> f64 {
    let m = 1u64 << bits;
    let signed = if k > m / 2 { k as i64 - m as i64 } else { k as i64 };
    2.0 * PI * signed as f64 / m as f64
}

/// Samples register outcomes for an input given as eigencomponents.
#[derive(Debug)]
pub struct PhaseEstimator {
    bits: u32,
    thetas: Vec<f64>,
    weight_cdf: Vec<f64>,
    outcome_cdfs: Vec<OnceCell<Vec<f64>>>,
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

impl PhaseEstimator {
    /// `components` are `(θ_j, |α_j|²)`; weights need not be normalized.
    pub fn new(components: &[(f64, f64)], bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_REGISTER_BITS {
            return Err(Error::Config(format!("register size {bits} outside 1..={MAX_REGISTER_BITS}")));
        }
        let kept: Vec<(f64, f64)> = components.iter().copied().filter(|c| c.1 > 0.0).collect();
        if kept.is_empty() {
            return Err(Error::Config("input has no weight on any eigenvector".into()));
        }
        Ok(PhaseEstimator {
            bits,
            thetas: kept.iter().map(|c| c.0).collect(),
            weight_cdf: cumulative(kept.iter().map(|c| c.1)),
            outcome_cdfs: kept.iter().map(|_| OnceCell::new()).collect(),
        })
    }

    pub fn from_spectrum(ps: &ProductSpectrum, bits: u32) -> Result<Self> {
        let components: Vec<(f64, f64)> = ps.clusters().iter().map(|c| (c.theta, c.overlap2)).collect();
        Self::new(&components, bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// One register outcome `k`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let j = pick(&self.weight_cdf, rng.random::<f64>());
        let cdf = self.outcome_cdfs[j].get_or_init(|| cumulative(estimate_distribution(self.thetas[j], self.bits)));
        pick(cdf, rng.random::<f64>()) as u64
    }

    /// Mixture law of the outcome, for comparisons with sampled frequencies.
    pub fn distribution(&self) -> Vec<f64> {
        let total = self.weight_cdf[self.weight_cdf.len() - 1];
        let mut out = vec![0.0; 1 << self.bits];
        let mut prev = 0.0;
        for (j, &c) in self.weight_cdf.iter().enumerate() {
            let w = (c - prev) / total;
            prev = c;
            for (o, p) in out.iter_mut().zip(estimate_distribution(self.thetas[j], self.bits)) {
                *o += w * p;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpeOutcome {
    /// `θ̃` of every run, in (-π, π].
    pub estimates: Vec<f64>,
    /// Formula value decided from the runs.
    pub decision: bool,
    pub query_count: u64,
    /// Fraction of runs with `|θ̃| < δ`.
    pub fraction_below: f64,
    pub theta_min: f64,
    pub threshold: f64,
}

/// RNG for repetition `rep`: one ChaCha stream per run under a shared seed.
pub fn run_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

pub fn run_estimator(est: &PhaseEstimator, cfg: &QpeConfig) -> Result<QpeOutcome> {
    cfg.validate()?;
    if est.bits() != cfg.register_bits {
        return Err(Error::Config(format!(
            "estimator uses {} bits, config asks for {}",
            est.bits(),
            cfg.register_bits
        )));
    }
    let estimates: Vec<f64> = (0..cfg.repetitions)
        .map(|rep| outcome_phase(est.sample(&mut run_rng(cfg.seed, rep)), cfg.register_bits))
        .collect();
    let below = estimates.iter().filter(|t| t.abs() < cfg.delta).count();
    let fraction_below = below as f64 / cfg.repetitions as f64;
    let threshold = cfg.threshold();
    Ok(QpeOutcome {
        estimates,
        decision: fraction_below <= threshold,
        query_count: cfg.query_count(),
        fraction_below,
        theta_min: cfg.theta_min,
        threshold,
    })
}

pub fn run_qpe(rp: &ReflectionPair, cfg: &QpeConfig) -> Result<QpeOutcome> {
    cfg.validate()?;
    let ps = spectral::product_spectrum(rp)?;
    run_estimator(&PhaseEstimator::from_spectrum(&ps, cfg.register_bits)?, cfg)
}

/// Spectrum and sampler for one (tree, assignment) pair, reusable across seeds.
pub struct PreparedInstance {
    pub spectrum: ProductSpectrum,
    estimator: PhaseEstimator,
    config: QpeConfig,
}

impl PreparedInstance {
    pub fn new(ed: &EigenDecomposition, at: &AugmentedTree, a: &Assignment, config: QpeConfig) -> Result<Self> {
        config.validate()?;
        let rp = spectral::build_reflections(ed, at, a)?;
        Self::from_spectrum(spectral::product_spectrum(&rp)?, config)
    }

    pub fn from_spectrum(spectrum: ProductSpectrum, config: QpeConfig) -> Result<Self> {
        config.validate()?;
        let estimator = PhaseEstimator::from_spectrum(&spectrum, config.register_bits)?;
        Ok(PreparedInstance {
            spectrum,
            estimator,
            config,
        })
    }

    pub fn config(&self) -> &QpeConfig {
        &self.config
    }

    pub fn run(&self, seed: u64) -> Result<QpeOutcome> {
        let cfg = QpeConfig {
            seed,
            ..self.config.clone()
        };
        run_estimator(&self.estimator, &cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decision {
    pub decision: bool,
    pub queries: u64,
    pub fraction_below: f64,
    pub theta_min: f64,
    pub register_bits: u32,
    pub repetitions: usize,
    pub threshold: f64,
}

impl Decision {
    fn from_outcome(o: &QpeOutcome, cfg: &QpeConfig) -> Self {
        Decision {
            decision: o.decision,
            queries: o.query_count,
            fraction_below: o.fraction_below,
            theta_min: o.theta_min,
            register_bits: cfg.register_bits,
            repetitions: cfg.repetitions,
            threshold: o.threshold,
        }
    }
}

/// Full pipeline: `H`, its 0-eigenspace, both reflections, `C` runs of phase
/// estimation and the threshold decision.
pub fn decide(at: &AugmentedTree, a: &Assignment, cfg: &QpeConfig) -> Result<Decision> {
    let ed = spectral::eigendecompose(&build_hamiltonian(at))?;
    let prepared = PreparedInstance::new(&ed, at, a, cfg.clone())?;
    let outcome = prepared.run(cfg.seed)?;
    Ok(Decision::from_outcome(&outcome, cfg))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub k: u32,
    pub leaves: usize,
    pub register_bits: u32,
    pub trials: usize,
    pub mean_queries: f64,
    /// Fraction of trials whose decision matched the classical value.
    pub agreement: f64,
}

/// Mean query counts for balanced trees of height `k` over random assignments.
pub fn scaling_run(ks: &[u32], trials: usize, seed: u64) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let tree = FormulaTree::balanced(k, crate::formula::DEFAULT_MAX_LEAVES)?.normalize_even_depth();
        let at = attach_tail_capped(&tree, Mode::Balanced, None, DEFAULT_MAX_DIM)?;
        let ed = spectral::eigendecompose(&build_hamiltonian(&at))?;
        let cfg = QpeConfig::for_tree(&at, seed);
        let n = at.base().num_vars();
        let mut picker = run_rng(seed ^ u64::from(k), 0);
        let (mut total, mut agree) = (0u64, 0usize);
        for trial in 0..trials {
            let bits: Vec<bool> = (0..n).map(|_| picker.random::<bool>()).collect();
            let a = Assignment::new(bits);
            let prepared = PreparedInstance::new(&ed, &at, &a, cfg.clone())?;
            let outcome = prepared.run(seed.wrapping_add(trial as u64))?;
            total += outcome.query_count;
            if outcome.decision == at.base().evaluate(&a)? {
                agree += 1;
            }
        }
        rows.push(ScalingRow {
            k,
            leaves: at.leaf_count(),
            register_bits: cfg.register_bits,
            trials,
            mean_queries: if trials == 0 { 0.0 } else { total as f64 / trials as f64 },
            agreement: if trials == 0 { 1.0 } else { agree as f64 / trials as f64 },
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::attach_tail;

    #[test]
    fn threshold_value() {
        assert!((decision_threshold(1.0 / 15.0) - 19.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn register_sizes() {
        assert_eq!(QpeConfig::new(theta_min(Mode::Balanced, 4, 3), 0).register_bits, 9);
        assert_eq!(QpeConfig::new(theta_min(Mode::Balanced, 16, 5), 0).register_bits, 10);
        assert_eq!(QpeConfig::new(theta_min(Mode::Balanced, 64, 7), 0).register_bits, 11);
        let one = QpeConfig::new(theta_min(Mode::Balanced, 1, 1), 0);
        assert!((one.theta_min - 1.0 / 20f64.sqrt()).abs() < 1e-15);
        assert_eq!(one.register_bits, 8);
        assert_eq!(one.query_count(), 25 * 255);
    }

    #[test]
    fn query_count_formula() {
        let cfg = QpeConfig::new(0.5, 0).with_bits(6).with_repetitions(1);
        cfg.validate().unwrap();
        assert_eq!(cfg.query_count(), 63);
    }

    #[test]
    fn config_rejects_bad_values() {
        let cfg = QpeConfig::new(0.1, 0);
        assert!(cfg.clone().with_bits(3).validate().is_err());
        assert!(cfg.clone().with_repetitions(0).validate().is_err());
        assert!(QpeConfig { epsilon: 0.1, ..cfg.clone() }.validate().is_err());
        assert!(QpeConfig { delta: 0.04, ..cfg }.validate().is_err());
    }

    #[test]
    fn distribution_sums_to_one() {
        for &theta in &[0.0, 0.1234, -2.9, PI, 1e-7] {
            for bits in [1, 4, 9] {
                let s: f64 = estimate_distribution(theta, bits).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "theta={theta} bits={bits} sum={s}");
            }
        }
    }

    #[test]
    fn exact_phase_is_certain() {
        let bits = 6;
        for k in [0u64, 5, 32, 63] {
            let theta = crate::linalg::wrap_phase(2.0 * PI * k as f64 / 64.0);
            let est = PhaseEstimator::new(&[(theta, 1.0)], bits).unwrap();
            let mut rng = run_rng(7, 0);
            for _ in 0..200 {
                assert_eq!(est.sample(&mut rng), k);
            }
        }
    }

    #[test]
    fn outcome_phase_wraps() {
        assert_eq!(outcome_phase(0, 4), 0.0);
        assert_eq!(outcome_phase(8, 4), PI);
        assert!((outcome_phase(15, 4) + PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_matches_samples() {
        let bits = 5;
        let est = PhaseEstimator::new(&[(0.3, 0.5), (-1.7, 0.5)], bits).unwrap();
        let exact = est.distribution();
        let mut counts = vec![0usize; 32];
        let mut rng = run_rng(11, 3);
        let n = 10_000;
        for _ in 0..n {
            counts[est.sample(&mut rng) as usize] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&exact)
            .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.05, "tv = {tv}");
    }

    #[test]
    fn decides_two_leaf_formula() {
        let t = FormulaTree::parse("N(x1,x2)").unwrap().normalize_even_depth();
        let at = attach_tail(&t, Mode::Balanced, None).unwrap();
        for (bits, value) in [("11", false), ("00", true), ("01", true), ("10", true)] {
            let a = Assignment::parse(bits).unwrap();
            let cfg = QpeConfig::for_tree(&at, 1);
            let d = decide(&at, &a, &cfg).unwrap();
            assert_eq!(d.decision, value, "{bits}");
            assert_eq!(d.queries, cfg.query_count());
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let t = FormulaTree::balanced(2, 64).unwrap();
        let at = attach_tail(&t, Mode::Balanced, None).unwrap();
        let a = Assignment::parse("0110").unwrap();
        let cfg = QpeConfig::for_tree(&at, 99);
        let ed = spectral::eigendecompose(&build_hamiltonian(&at)).unwrap();
        let p = PreparedInstance::new(&ed, &at, &a, cfg).unwrap();
        assert_eq!(p.run(5).unwrap(), p.run(5).unwrap());
    }

    #[test]
    fn slope_of_square_root() {
        let pts: Vec<(f64, f64)> = [4.0, 16.0, 64.0].iter().map(|&n: &f64| (n, 3.0 * n.sqrt())).collect();
        assert!((log_log_slope(&pts) - 0.5).abs() < 1e-12);
    }
}
