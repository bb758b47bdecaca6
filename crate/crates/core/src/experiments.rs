//! Convergence, robustness and dimension-witness experiments.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlation::{distance, evaluate, lifted_truncation, p_star_infinity, tail_budget};
use crate::error::{Error, Result};
use crate::extract::extract_with_cap;
use crate::linalg::{low_rank_distance, SchmidtSpectrum, DEFAULT_MAX_DIM};
use crate::states::{make_state, psi_n, SchmidtState};
use crate::strategy::{many_answers_ideal, many_questions_ideal, perturb, Family, Strategy};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    Robustness,
    Witness,
}

/// Experiment description, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Required for convergence; witness defaults to many-answers; robustness
    /// infers it from the parity of each `d`.
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub d_list: Vec<usize>,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Cutoff of the limit proxy. Defaults to 31, or 32 for many-questions.
    #[serde(default)]
    pub cutoff: Option<usize>,
    /// Half-width of the accepted slope window.
    #[serde(default)]
    pub slope_window: Option<f64>,
    /// Smallest accepted robustness exponent.
    #[serde(default)]
    pub min_slope: Option<f64>,
    #[serde(default)]
    pub max_dim: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(msg.to_string()));
        match self.experiment {
            ExperimentKind::Convergence => {
                let Some(family) = self.family else {
                    return bad("convergence needs a family");
                };
                if self.n_list.is_empty() {
                    return bad("n_list is empty");
                }
                if let Some(&n) = self.n_list.iter().find(|&&n| !family.accepts(n) || n < 2) {
                    return Err(family.parity_error(n));
                }
            }
            ExperimentKind::Robustness => {
                if self.d_list.is_empty() || self.eps_grid.is_empty() || self.trials == 0 {
                    return bad("robustness needs d_list, eps_grid and trials");
                }
                if self.eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                    return bad("eps_grid entries must be finite and nonnegative");
                }
                if let Some(&d) = self.d_list.iter().find(|&&d| d < 3) {
                    return Err(Error::Validation(format!("d = {d} is below 3")));
                }
                if let Some(f) = self.family {
                    if let Some(&d) = self.d_list.iter().find(|&&d| !f.accepts(d)) {
                        return Err(f.parity_error(d));
                    }
                }
            }
            ExperimentKind::Witness => {
                let family = self.witness_family();
                if self.n_list.is_empty() {
                    return bad("n_list is empty");
                }
                if let Some(&n) = self.n_list.iter().find(|&&n| !family.accepts(n) || n < 2) {
                    return Err(family.parity_error(n));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn max_dim(&self) -> usize {
        self.max_dim.unwrap_or(DEFAULT_MAX_DIM)
    }

    fn witness_family(&self) -> Family {
        self.family.unwrap_or(Family::ManyAnswers)
    }

    fn cutoff_for(&self, family: Family) -> usize {
        self.cutoff.unwrap_or(match family {
            Family::ManyAnswers => 31,
            Family::ManyQuestions => 32,
        })
    }
}

/// Least-squares slope of `log y` against `log x`; `None` below two points.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Seed of one cell, stable across platforms and execution order.
pub fn cell_seed(seed: u64, d: usize, eps: f64, trial: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((d as u64).to_le_bytes());
    h.update(eps.to_bits().to_le_bytes());
    h.update(trial.to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("eight bytes"))
}

/// Random coefficient vector for dimension `d`, entries drawn from `[0.2, 1)`.
pub fn random_state(seed: u64, d: usize) -> Result<SchmidtState> {
    let mut rng = ChaCha20Rng::seed_from_u64(cell_seed(seed, d, f64::NAN, u64::MAX));
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..1.0)).collect();
    make_state(&raw)
}

fn ideal_for(family: Family, state: &SchmidtState) -> Result<Strategy> {
    match family {
        Family::ManyAnswers => many_answers_ideal(state),
        Family::ManyQuestions => many_questions_ideal(state),
    }
}

fn family_of(d: usize) -> Family {
    if d % 2 == 1 {
        Family::ManyAnswers
    } else {
        Family::ManyQuestions
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Distance from the lifted truncation to the proxy.
    pub distance: f64,
    /// `α N^{-16}` with `α` fitted at the first `N`.
    pub bound: f64,
    pub bound_ok: bool,
    /// `B(N) + B(K)`, a certified bound on the same distance.
    pub certified_bound: f64,
    pub certified_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub family: Family,
    pub cutoff: usize,
    pub proxy_budget: f64,
    pub alpha: f64,
    pub rows: Vec<ConvergenceRow>,
    pub slope: Option<f64>,
    pub slope_target: f64,
    pub slope_window: f64,
    pub slope_ok: bool,
    pub bound_ok: bool,
    pub certified_ok: bool,
    pub passed: bool,
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let family = cfg
        .family
        .ok_or_else(|| Error::Validation("convergence needs a family".into()))?;
    let k = cfg.cutoff_for(family);
    if let Some(&n) = cfg.n_list.iter().find(|&&n| n > k) {
        return Err(Error::Validation(format!("N = {n} exceeds the cutoff {k}")));
    }
    let (proxy, proxy_budget) = p_star_infinity(family, k, cfg.max_dim())?;
    let distances: Vec<f64> = cfg
        .n_list
        .par_iter()
        .map(|&n| Ok(distance(&lifted_truncation(family, n, k)?, &proxy)?.value))
        .collect::<Result<_>>()?;
    let anchor = cfg.n_list[0] as f64;
    let alpha = distances[0] * anchor.powi(16);
    let rows: Vec<ConvergenceRow> = cfg
        .n_list
        .iter()
        .zip(&distances)
        .map(|(&n, &distance)| {
            let bound = alpha * (n as f64).powi(-16);
            let certified_bound = tail_budget(n) + proxy_budget;
            ConvergenceRow {
                n,
                distance,
                bound,
                bound_ok: distance <= bound * (1.0 + 1e-12),
                certified_bound,
                certified_ok: distance <= certified_bound,
            }
        })
        .collect();
    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&ns, &distances);
    let slope_window = cfg.slope_window.unwrap_or(0.5);
    let slope_ok = slope.is_none_or(|s| (s + 16.0).abs() <= slope_window);
    let bound_ok = rows.iter().all(|r| r.bound_ok);
    let certified_ok = rows.iter().all(|r| r.certified_ok);
    Ok(ConvergenceReport {
        family,
        cutoff: k,
        proxy_budget,
        alpha,
        rows,
        slope,
        slope_target: -16.0,
        slope_window,
        slope_ok,
        bound_ok,
        certified_ok,
        passed: slope_ok && bound_ok,
    })
}

/// One `(d, ε, seed)` cell of the robustness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRecord {
    pub d: usize,
    pub family: Family,
    pub eps: f64,
    pub delta_corr: f64,
    pub yn: [f64; 4],
    pub extraction_error: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessFit {
    /// Fitted constant in `E ≤ C d³ δ^{1/4}`.
    pub c: f64,
    /// Dimensions whose cells fix `C`.
    pub calibration_d: Vec<usize>,
    pub slope: Option<f64>,
    pub min_slope: f64,
    pub envelope_violations: usize,
    pub exact_violations: usize,
    /// Slope of the largest Yang–Navascués residual against `ε`.
    pub yn_slope: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub records: Vec<RobustnessRecord>,
    pub fit: RobustnessFit,
}

pub fn run_robustness(cfg: &ExperimentConfig) -> Result<RobustnessReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &d in &cfg.d_list {
        for &eps in &cfg.eps_grid {
            for trial in 0..cfg.trials as u64 {
                cells.push((d, eps, trial));
            }
        }
    }
    let max_dim = cfg.max_dim();
    let records: Vec<RobustnessRecord> = cells
        .par_iter()
        .map(|&(d, eps, trial)| {
            let family = cfg.family.unwrap_or_else(|| family_of(d));
            let state = random_state(cfg.seed, d)?;
            let ideal = ideal_for(family, &state)?;
            let seed = cell_seed(cfg.seed, d, eps, trial);
            let noisy = perturb(&ideal, eps, seed);
            let delta_corr = distance(&evaluate(&noisy)?, &evaluate(&ideal)?)?.value;
            let ex = extract_with_cap(&noisy, family, &state, max_dim)?;
            Ok(RobustnessRecord {
                d,
                family,
                eps,
                delta_corr,
                yn: ex.residuals.as_array(),
                extraction_error: ex.error,
                seed,
            })
        })
        .collect::<Result<_>>()?;
    let fit = fit_robustness(&records, cfg.min_slope.unwrap_or(0.2));
    Ok(RobustnessReport { records, fit })
}

fn envelope(r: &RobustnessRecord) -> f64 {
    (r.d as f64).powi(3) * r.delta_corr.powf(0.25)
}

/// Fits `C` on the smallest dimension of each family, then checks every
/// cell against the envelope and regresses `log E` on `log δ`.
pub fn fit_robustness(records: &[RobustnessRecord], min_slope: f64) -> RobustnessFit {
    let noisy: Vec<&RobustnessRecord> = records.iter().filter(|r| r.eps > 0.0).collect();
    let mut calibration_d: Vec<usize> = Vec::new();
    for fam in [Family::ManyAnswers, Family::ManyQuestions] {
        if let Some(d) = noisy.iter().filter(|r| r.family == fam).map(|r| r.d).min() {
            calibration_d.push(d);
        }
    }
    let c = noisy
        .iter()
        .filter(|r| calibration_d.contains(&r.d))
        .map(|r| r.extraction_error / envelope(r))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let envelope_violations = noisy
        .iter()
        .filter(|r| !(r.extraction_error <= c * envelope(r)))
        .count();
    let exact_violations = records
        .iter()
        .filter(|r| r.eps == 0.0 && !(r.extraction_error <= 1e-8))
        .count();
    let deltas: Vec<f64> = noisy.iter().map(|r| r.delta_corr).collect();
    let errors: Vec<f64> = noisy.iter().map(|r| r.extraction_error).collect();
    let slope = log_log_slope(&deltas, &errors);
    let eps: Vec<f64> = noisy.iter().map(|r| r.eps).collect();
    let yn: Vec<f64> = noisy.iter().map(|r| r.yn.iter().cloned().fold(0.0, f64::max)).collect();
    let yn_slope = log_log_slope(&eps, &yn);
    let passed = envelope_violations == 0 && exact_violations == 0 && slope.is_none_or(|s| s >= min_slope);
    RobustnessFit {
        c,
        calibration_d,
        slope,
        min_slope,
        envelope_violations,
        exact_violations,
        yn_slope,
        passed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    /// Schmidt rank of the truncation.
    pub n_prime: usize,
    /// Distance to the limit: proxy distance plus the proxy budget.
    pub delta: f64,
    /// Admissible size nearest `δ^{-1/16}`.
    pub n_star: usize,
    pub low_rank_distance: f64,
    /// `c_{N′}` of `Ψ_{N*}`, the lower bound on the rank-`N′` distance.
    pub rank_bound: f64,
    pub lower_bound_ok: bool,
    /// `δ^{-1/32}`.
    pub threshold: f64,
    pub rank_ok: bool,
    /// `N*³ (2δ)^{1/4}`, the robustness budget at `N*`.
    pub robustness_budget: f64,
    pub incompatibility_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub family: Family,
    pub cutoff: usize,
    pub proxy_budget: f64,
    pub rows: Vec<WitnessRow>,
    pub monotone: bool,
    pub slope: Option<f64>,
    pub slope_target: f64,
    pub slope_window: f64,
    pub slope_ok: bool,
    pub passed: bool,
}

fn nearest_admissible(family: Family, x: f64) -> usize {
    let base = match family {
        Family::ManyAnswers => 1.0,
        Family::ManyQuestions => 0.0,
    };
    let k = ((x - base) / 2.0).round().max(1.0);
    (base + 2.0 * k) as usize
}

pub fn run_witness(cfg: &ExperimentConfig) -> Result<WitnessReport> {
    cfg.validate()?;
    let family = cfg.witness_family();
    let k = cfg.cutoff_for(family);
    if let Some(&n) = cfg.n_list.iter().find(|&&n| n > k) {
        return Err(Error::Validation(format!("N' = {n} exceeds the cutoff {k}")));
    }
    let (proxy, proxy_budget) = p_star_infinity(family, k, cfg.max_dim())?;
    let rows: Vec<WitnessRow> = cfg
        .n_list
        .par_iter()
        .map(|&n_prime| {
            let delta = distance(&lifted_truncation(family, n_prime, k)?, &proxy)?.value + proxy_budget;
            let n_star = nearest_admissible(family, delta.powf(-1.0 / 16.0));
            let target = SchmidtSpectrum::from_coefficients(psi_n(n_star)?.c())?;
            let lrd = low_rank_distance(&target, n_prime);
            let rank_bound = if n_prime < n_star {
                target.coefficients()[n_prime]
            } else {
                0.0
            };
            let threshold = delta.powf(-1.0 / 32.0);
            let robustness_budget = (n_star as f64).powi(3) * (2.0 * delta).powf(0.25);
            Ok(WitnessRow {
                n_prime,
                delta,
                n_star,
                low_rank_distance: lrd,
                rank_bound,
                lower_bound_ok: lrd >= rank_bound,
                threshold,
                rank_ok: n_prime as f64 >= threshold,
                robustness_budget,
                incompatibility_ok: n_prime as f64 >= threshold || lrd > robustness_budget,
            })
        })
        .collect::<Result<_>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].n_prime > w[0].n_prime && w[1].delta < w[0].delta);
    let ns: Vec<f64> = rows.iter().map(|r| r.n_prime as f64).collect();
    let ds: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let slope = log_log_slope(&ns, &ds);
    let slope_window = cfg.slope_window.unwrap_or(1.0);
    let slope_ok = slope.is_none_or(|s| (s + 16.0).abs() <= slope_window);
    let rows_ok = rows
        .iter()
        .all(|r| r.lower_bound_ok && r.rank_ok && r.incompatibility_ok);
    Ok(WitnessReport {
        family,
        cutoff: k,
        proxy_budget,
        passed: rows_ok && monotone && slope_ok,
        rows,
        monotone,
        slope,
        slope_target: -16.0,
        slope_window,
        slope_ok,
    })
}

/// Output of any experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentResult {
    Convergence(ConvergenceReport),
    Robustness(RobustnessReport),
    Witness(WitnessReport),
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        match self {
            ExperimentResult::Convergence(r) => r.passed,
            ExperimentResult::Robustness(r) => r.fit.passed,
            ExperimentResult::Witness(r) => r.passed,
        }
    }
}

/// Result with the provenance needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub result: ExperimentResult,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let result = match cfg.experiment {
        ExperimentKind::Convergence => ExperimentResult::Convergence(run_convergence(cfg)?),
        ExperimentKind::Robustness => ExperimentResult::Robustness(run_robustness(cfg)?),
        ExperimentKind::Witness => ExperimentResult::Witness(run_witness(cfg)?),
    };
    Ok(ExperimentReport {
        version: VERSION.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        result,
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Row table of the experiment. Columns:
    /// - convergence: `n,distance,bound,bound_ok,certified_bound,certified_ok`
    /// - robustness: `d,family,eps,delta_corr,yn1,yn2,yn3,yn4,extraction_error,seed`
    /// - witness: `n_prime,delta,n_star,low_rank_distance,rank_bound,lower_bound_ok,threshold,rank_ok,robustness_budget,incompatibility_ok`
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
        match &self.result {
            ExperimentResult::Convergence(r) => {
                w.write_record(["n", "distance", "bound", "bound_ok", "certified_bound", "certified_ok"])
                    .map_err(map)?;
                for row in &r.rows {
                    w.write_record([
                        row.n.to_string(),
                        num(row.distance),
                        num(row.bound),
                        row.bound_ok.to_string(),
                        num(row.certified_bound),
                        row.certified_ok.to_string(),
                    ])
                    .map_err(map)?;
                }
            }
            ExperimentResult::Robustness(r) => {
                w.write_record([
                    "d",
                    "family",
                    "eps",
                    "delta_corr",
                    "yn1",
                    "yn2",
                    "yn3",
                    "yn4",
                    "extraction_error",
                    "seed",
                ])
                .map_err(map)?;
                for row in &r.records {
                    let mut rec = vec![
                        row.d.to_string(),
                        row.family.to_string(),
                        num(row.eps),
                        num(row.delta_corr),
                    ];
                    rec.extend(row.yn.iter().map(|&v| num(v)));
                    rec.push(num(row.extraction_error));
                    rec.push(row.seed.to_string());
                    w.write_record(rec).map_err(map)?;
                }
            }
            ExperimentResult::Witness(r) => {
                w.write_record([
                    "n_prime",
                    "delta",
                    "n_star",
                    "low_rank_distance",
                    "rank_bound",
                    "lower_bound_ok",
                    "threshold",
                    "rank_ok",
                    "robustness_budget",
                    "incompatibility_ok",
                ])
                .map_err(map)?;
                for row in &r.rows {
                    w.write_record([
                        row.n_prime.to_string(),
                        num(row.delta),
                        row.n_star.to_string(),
                        num(row.low_rank_distance),
                        num(row.rank_bound),
                        row.lower_bound_ok.to_string(),
                        num(row.threshold),
                        row.rank_ok.to_string(),
                        num(row.robustness_budget),
                        row.incompatibility_ok.to_string(),
                    ])
                    .map_err(map)?;
                }
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            family: None,
            n_list: vec![],
            d_list: vec![],
            eps_grid: vec![],
            trials: 1,
            seed: 7,
            cutoff: None,
            slope_window: None,
            min_slope: None,
            max_dim: None,
            output: None,
        }
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 2.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&[2.0], &[1.0]), None);
    }

    #[test]
    fn cell_seeds_differ() {
        let a = cell_seed(1, 3, 1e-3, 0);
        assert_eq!(a, cell_seed(1, 3, 1e-3, 0));
        assert_ne!(a, cell_seed(1, 3, 1e-3, 1));
        assert_ne!(a, cell_seed(1, 5, 1e-3, 0));
        assert_ne!(a, cell_seed(2, 3, 1e-3, 0));
    }

    #[test]
    fn nearest_admissible_respects_parity() {
        assert_eq!(nearest_admissible(Family::ManyAnswers, 3.2), 3);
        assert_eq!(nearest_admissible(Family::ManyAnswers, 4.1), 5);
        assert_eq!(nearest_admissible(Family::ManyAnswers, 0.5), 3);
        assert_eq!(nearest_admissible(Family::ManyQuestions, 5.2), 6);
    }

    #[test]
    fn single_point_convergence_has_no_slope() {
        let mut c = cfg(ExperimentKind::Convergence);
        c.family = Some(Family::ManyAnswers);
        c.n_list = vec![5];
        c.cutoff = Some(9);
        let r = run_convergence(&c).unwrap();
        assert_eq!(r.slope, None);
        assert!(r.rows[0].bound_ok && r.rows[0].certified_ok);
    }

    #[test]
    fn exact_robustness_cells_are_exact() {
        let mut c = cfg(ExperimentKind::Robustness);
        c.d_list = vec![3, 4];
        c.eps_grid = vec![0.0];
        let r = run_robustness(&c).unwrap();
        assert!(r
            .records
            .iter()
            .all(|x| x.extraction_error <= 1e-8 && x.delta_corr == 0.0));
        assert_eq!(r.fit.exact_violations, 0);
    }

    #[test]
    fn extra_trials_keep_existing_rows() {
        let mut c = cfg(ExperimentKind::Robustness);
        c.d_list = vec![3];
        c.eps_grid = vec![1e-4];
        c.trials = 1;
        let one = run_robustness(&c).unwrap();
        c.trials = 2;
        let two = run_robustness(&c).unwrap();
        assert_eq!(one.records[0], two.records[0]);
    }

    #[test]
    fn config_validation() {
        let c = cfg(ExperimentKind::Convergence);
        assert!(c.validate().is_err());
        let text = r#"{"experiment": "witness", "n_list": [3, 5]}"#;
        let parsed = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(parsed.witness_family(), Family::ManyAnswers);
        assert!(ExperimentConfig::from_json(r#"{"experiment": "witness", "n_list": [4]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = cfg(ExperimentKind::Witness);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
