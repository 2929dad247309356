//! Experiment configuration and the end-to-end pipeline: heat solution at
//! probe points, subordination, Cesàro means, fits and the predicted rows.

use crate::error::{Error, Result};
use crate::heat::{time_l1_norm, Datum, FieldSnapshot, HeatParams, HeatSolver, MassSummary, ProbeSeries};
use crate::kernels::{KernelClass, KernelSpec};
use crate::montecarlo::{mc_subordinate, McEstimate};
use crate::series::{AsymptoticFit, FitModel, SeriesTag, TimeSeries};
use crate::subordination::{
    cesaro_series, class_row, fit_decay, fit_prefactor, predicted_asymptote, predicted_band_n1,
    subordinated_series, GCache,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    /// Passage-time step; 10^{-3}/Φ(1/t) when absent.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Times at which v^E is cross-checked; the end of the time grid when empty.
    #[serde(default)]
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_exponent")]
    pub exponent: f64,
    #[serde(default = "d_prefactor")]
    pub prefactor: f64,
    #[serde(default = "d_band")]
    pub band_c: f64,
    #[serde(default = "d_flatten")]
    pub flatten: f64,
}

fn d_exponent() -> f64 {
    0.03
}
fn d_prefactor() -> f64 {
    0.1
}
fn d_band() -> f64 {
    10.0
}
fn d_flatten() -> f64 {
    0.05
}
fn d_window() -> [f64; 2] {
    [1e2, 1e5]
}
fn d_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exponent: d_exponent(),
            prefactor: d_prefactor(),
            band_c: d_band(),
            flatten: d_flatten(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub heat: HeatParams,
    pub initial_datum: Datum,
    pub probe_points: Vec<Vec<f64>>,
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default = "d_window")]
    pub fit_window: [f64; 2],
    #[serde(default = "d_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.heat = c.heat.normalized().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.heat.validate()?;
        self.initial_datum.validate(self.heat.dim)?;
        if self.probe_points.is_empty() {
            return Err(Error::InvalidParameter("no probe points".into()));
        }
        let l = self.heat.box_halfwidth;
        for p in &self.probe_points {
            if p.len() != self.heat.dim || p.iter().any(|x| !(x.is_finite() && x.abs() < l)) {
                return Err(Error::InvalidParameter(format!(
                    "probe point {p:?} is not inside the box (-{l}, {l})^{}",
                    self.heat.dim
                )));
            }
        }
        let g = self.time_grid;
        if !(g.t_min > 0.0 && g.t_max > g.t_min && g.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad time grid [{}, {}]", g.t_min, g.t_max)));
        }
        if g.per_decade < 8 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs at least 8 points per decade, got {}",
                g.per_decade
            )));
        }
        let w = self.fit_window;
        if !(w[0] >= g.t_min && w[1] <= g.t_max && w[1] > w[0]) {
            return Err(Error::InvalidParameter(format!(
                "fit window {w:?} is not inside the time grid [{}, {}]",
                g.t_min, g.t_max
            )));
        }
        if let Some(mc) = &self.mc {
            if mc.n_paths == 0 {
                return Err(Error::InvalidParameter("mc.n_paths must be positive".into()));
            }
            if mc.step.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
                return Err(Error::InvalidParameter("mc.step must be positive".into()));
            }
            if mc.times.iter().any(|&t| !(t >= g.t_min && t <= g.t_max)) {
                return Err(Error::InvalidParameter("mc.times must lie in the time grid".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Heat,
    Norm,
    Subordination,
    Fit,
    Prediction,
    MonteCarlo,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        write!(f, "{}", s.as_str().unwrap_or("unknown"))
    }
}

/// A module error tagged with the pipeline stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn to_json(&self) -> String {
        serde_json::json!({ "stage": self.stage, "error": self.source.to_string() }).to_string()
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Which prediction a probe is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Pure power decay with the class row.
    Power,
    /// (ln t)^{-κ} decay, shape only.
    Logarithmic,
    /// Constant limit with the weighted norm.
    Weighted,
    /// N = 1, 1/2 ≤ s < 1: two-sided band.
    Band,
}

pub fn regime(spec: &KernelSpec, heat: &HeatParams) -> Result<Regime> {
    if spec.ell() > 0.0 {
        return Ok(Regime::Weighted);
    }
    if heat.decay_exponent() <= 1.0 {
        return if heat.dim == 1 && heat.s >= 0.5 && heat.s < 1.0 {
            Ok(Regime::Band)
        } else {
            Err(Error::Unsupported {
                class: spec.name(),
                what: "N <= 2s outside the one-dimensional band",
            })
        };
    }
    Ok(match spec.class() {
        KernelClass::DistributedOrder { .. } => Regime::Logarithmic,
        _ => Regime::Power,
    })
}

/// Exponent of the predicted row when it is a pure power.
pub fn expected_exponent(spec: &KernelSpec) -> Option<f64> {
    match spec.class() {
        KernelClass::Stable { theta } => Some(-theta),
        KernelClass::Gamma { .. } | KernelClass::TemperedStable { .. } => Some(-1.0),
        KernelClass::InverseGamma { a, .. } if *a == 0.0 => Some(-0.5),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_hash: String,
    pub version: String,
    pub probe: Vec<f64>,
    pub class: String,
    pub row: String,
    pub regime: Regime,
    pub l1_time: Option<f64>,
    pub l1_time_weighted: Option<f64>,
    pub fit: AsymptoticFit,
    pub expected_exponent: Option<f64>,
    /// M_t over the predicted value at the end of the window.
    pub prefactor_ratio: Option<f64>,
    /// Prefactor fitted with the exponent fixed, over the predicted one.
    pub fixed_exponent_ratio: Option<f64>,
    /// Largest per-decade relative change of (ln t)^κ M_t in the window.
    pub flatten_change: Option<f64>,
    /// max(r_max, 1/r_min) for r = M_t/band over the window.
    pub band_c: Option<f64>,
    pub head_share: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub t: f64,
    pub quadrature: f64,
    pub mc: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub version: String,
    pub kernel: KernelSpec,
    pub rows: Vec<SummaryRow>,
    pub mc: Vec<McRow>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Series and records of one probe point.
#[derive(Debug, Clone)]
pub struct ProbeOutput {
    pub v: TimeSeries,
    pub v_e: TimeSeries,
    pub cesaro: TimeSeries,
    pub mass: MassSummary,
    pub row: SummaryRow,
}

/// Everything a run produces, before anything is written.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub probes: Vec<ProbeOutput>,
}

/// τ range of the v series: far enough that the subordination tail bound
/// holds at the last time.
fn tau_range(spec: &KernelSpec, grid: &TimeGrid) -> Result<(f64, f64)> {
    let hi = 40.0 / spec.phi(1.0 / grid.t_max)?;
    Ok((1e-10f64.min(1e-6 * grid.t_min), hi))
}

const TAU_PER_DECADE: usize = 20;

/// Runs the pipeline without touching the filesystem.
pub fn compute_experiment(config: &ExperimentConfig) -> std::result::Result<ExperimentOutput, StageError> {
    config.validate().at(Stage::Config)?;
    let hash = config.hash();
    let spec = &config.kernel;
    let heat = config.heat;
    let regime = regime(spec, &heat).at(Stage::Config)?;
    let phi = FieldSnapshot::from_datum(&heat, &config.initial_datum).at(Stage::Heat)?;
    let solver = HeatSolver::new(&phi).at(Stage::Heat)?;
    let times = crate::series::log_grid(config.time_grid.t_min, config.time_grid.t_max, config.time_grid.per_decade)
        .at(Stage::Config)?;
    let (tau_lo, tau_hi) = tau_range(spec, &config.time_grid).at(Stage::Subordination)?;
    let cache = GCache::new();
    let mut probes = Vec::new();
    for x in &config.probe_points {
        let probe = solver.probe(x).at(Stage::Heat)?;
        let mass = probe_mass(&probe, spec, regime).at(Stage::Norm)?;
        let v = probe.sample(tau_lo, tau_hi, TAU_PER_DECADE).at(Stage::Heat)?;
        let v_e = subordinated_series(&v, spec, &times, &cache).at(Stage::Subordination)?;
        let (cesaro, head_share) = cesaro_series(&v_e, config.fit_window[0]).at(Stage::Subordination)?;
        let row = summarize(config, &hash, regime, &mass, &cesaro, head_share)?;
        probes.push(ProbeOutput {
            v,
            v_e,
            cesaro,
            mass,
            row,
        });
    }
    let mut mc = Vec::new();
    if let Some(m) = &config.mc {
        let first = &probes[0];
        let mc_times = if m.times.is_empty() {
            vec![config.time_grid.t_max]
        } else {
            m.times.clone()
        };
        for t in mc_times {
            let quadrature = crate::subordination::subordinate(&first.v, spec, t).at(Stage::MonteCarlo)?;
            let est = mc_subordinate(&first.v, spec, t, m.n_paths, m.seed)
                .at(Stage::MonteCarlo)?
                .against(quadrature, 1e-4 * quadrature.abs());
            mc.push(McRow { t, quadrature, mc: est });
        }
    }
    let pass = probes.iter().all(|p| p.row.pass) && mc.iter().all(|r| r.mc.covered == Some(true));
    Ok(ExperimentOutput {
        report: ExperimentReport {
            config_hash: hash,
            version: VERSION.to_string(),
            kernel: spec.clone(),
            rows: probes.iter().map(|p| p.row.clone()).collect(),
            mc,
            pass,
        },
        probes,
    })
}

/// Heat stage alone: v at each probe on the time grid, with its time norms
/// when they converge.
pub fn heat_probes(
    config: &ExperimentConfig,
) -> std::result::Result<Vec<(TimeSeries, Option<MassSummary>)>, StageError> {
    config.validate().at(Stage::Config)?;
    let phi = FieldSnapshot::from_datum(&config.heat, &config.initial_datum).at(Stage::Heat)?;
    let solver = HeatSolver::new(&phi).at(Stage::Heat)?;
    let g = config.time_grid;
    config
        .probe_points
        .iter()
        .map(|x| {
            let probe = solver.probe(x).at(Stage::Heat)?;
            let v = probe.sample(g.t_min, g.t_max, g.per_decade).at(Stage::Heat)?;
            Ok((v, time_l1_norm(&probe, config.kernel.ell()).ok()))
        })
        .collect()
}

/// Heat and subordination stages: v on the τ range and v^E on the time grid.
pub fn subordinate_probes(
    config: &ExperimentConfig,
) -> std::result::Result<Vec<(TimeSeries, TimeSeries)>, StageError> {
    config.validate().at(Stage::Config)?;
    let spec = &config.kernel;
    let phi = FieldSnapshot::from_datum(&config.heat, &config.initial_datum).at(Stage::Heat)?;
    let solver = HeatSolver::new(&phi).at(Stage::Heat)?;
    let g = config.time_grid;
    let times = crate::series::log_grid(g.t_min, g.t_max, g.per_decade).at(Stage::Config)?;
    let (tau_lo, tau_hi) = tau_range(spec, &g).at(Stage::Subordination)?;
    let cache = GCache::new();
    config
        .probe_points
        .iter()
        .map(|x| {
            let v = solver.probe(x).at(Stage::Heat)?.sample(tau_lo, tau_hi, TAU_PER_DECADE).at(Stage::Heat)?;
            let v_e = subordinated_series(&v, spec, &times, &cache).at(Stage::Subordination)?;
            Ok((v, v_e))
        })
        .collect()
}

fn probe_mass(probe: &ProbeSeries, spec: &KernelSpec, regime: Regime) -> Result<MassSummary> {
    match regime {
        Regime::Band => Ok(MassSummary {
            probe: probe.point().to_vec(),
            t_star: probe.t_star(),
            ..MassSummary::from_norms(probe.mass(), f64::INFINITY, f64::INFINITY, 0.0)
        }),
        _ => time_l1_norm(probe, spec.ell()),
    }
}

fn summarize(
    config: &ExperimentConfig,
    hash: &str,
    regime: Regime,
    mass: &MassSummary,
    cesaro: &TimeSeries,
    head_share: f64,
) -> std::result::Result<SummaryRow, StageError> {
    let spec = &config.kernel;
    let tol = config.tolerances;
    let window = config.fit_window;
    let model = if regime == Regime::Logarithmic {
        FitModel::PowerWithLog
    } else {
        FitModel::PurePower
    };
    let fit = fit_decay(cesaro, window, model).at(Stage::Fit)?;
    let t_hi = fit.window[1];
    let m_hi = cesaro.interpolate(t_hi);
    let mut warnings = mass.warnings.clone();
    if head_share > crate::subordination::HEAD_FLAG {
        warnings.push(format!("Cesàro head carries {:.2}% of the integral", 100.0 * head_share));
    }
    let expected = expected_exponent(spec);
    let mut row = SummaryRow {
        config_hash: hash.to_string(),
        version: VERSION.to_string(),
        probe: mass.probe.clone(),
        class: spec.name().to_string(),
        row: class_row(spec).to_string(),
        regime,
        l1_time: mass.l1_time.is_finite().then_some(mass.l1_time),
        l1_time_weighted: (mass.ell > 0.0).then_some(mass.l1_time_weighted),
        fit: fit.clone(),
        expected_exponent: expected,
        prefactor_ratio: None,
        fixed_exponent_ratio: None,
        flatten_change: None,
        band_c: None,
        head_share,
        pass: false,
        warnings,
    };
    row.pass = match regime {
        Regime::Power => {
            let pred = predicted_asymptote(spec, mass, t_hi).at(Stage::Prediction)?;
            let ratio = m_hi / pred;
            row.prefactor_ratio = Some(ratio);
            let exponent_ok = match expected {
                Some(p) => {
                    let fixed = fit_prefactor(cesaro, window, p, 0.0).at(Stage::Fit)?;
                    row.fixed_exponent_ratio = Some(fixed / (pred * t_hi.powf(-p)));
                    (fit.exponent - p).abs() <= tol.exponent
                }
                None => {
                    // Regularly varying row: compare its local slope.
                    let lo = predicted_asymptote(spec, mass, fit.window[0]).at(Stage::Prediction)?;
                    let slope = (pred / lo).ln() / (t_hi / fit.window[0]).ln();
                    row.expected_exponent = Some(slope);
                    (fit.exponent - slope).abs() <= tol.exponent
                }
            };
            exponent_ok && (ratio - 1.0).abs() <= tol.prefactor
        }
        Regime::Logarithmic => {
            let KernelClass::DistributedOrder { kappa, .. } = *spec.class() else {
                unreachable!("logarithmic regime is only chosen for the distributed-order class")
            };
            let change = flatten_change(cesaro, window, kappa);
            row.flatten_change = Some(change);
            change < tol.flatten
        }
        Regime::Weighted => {
            let pred = predicted_asymptote(spec, mass, t_hi).at(Stage::Prediction)?;
            let ratio = m_hi / pred;
            row.prefactor_ratio = Some(ratio);
            (ratio - 1.0).abs() <= tol.prefactor
        }
        Regime::Band => {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for (&t, &m) in cesaro.times().iter().zip(cesaro.values()) {
                if t >= window[0] * (1.0 - 1e-12) && t <= window[1] * (1.0 + 1e-12) {
                    let r = m / predicted_band_n1(spec, config.heat.s, t).at(Stage::Prediction)?;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
            let c = hi.max(1.0 / lo);
            row.band_c = Some(c);
            lo > 0.0 && c <= tol.band_c
        }
    };
    Ok(row)
}

/// Largest relative change of (ln t)^κ M_t between t and 10t in the window.
pub fn flatten_change(cesaro: &TimeSeries, window: [f64; 2], kappa: f64) -> f64 {
    let g = |t: f64| t.ln().powf(kappa) * cesaro.interpolate(t);
    let mut worst = 0.0f64;
    let mut t = window[0];
    while t * 10.0 <= window[1] * (1.0 + 1e-9) {
        worst = worst.max((g(10.0 * t) / g(t) - 1.0).abs());
        t *= 10.0;
    }
    worst
}

/// Runs the pipeline and writes its artifacts; nothing is written on failure.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<ExperimentReport, StageError> {
    let out = compute_experiment(config)?;
    write_outputs(&out, &config.output_dir).at(Stage::Output)?;
    Ok(out.report)
}

pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, p) in out.probes.iter().enumerate() {
        std::fs::write(dir.join(format!("probe{i}_v.csv")), p.v.to_csv())?;
        std::fs::write(dir.join(format!("probe{i}_v_E.csv")), p.v_e.to_csv())?;
        std::fs::write(dir.join(format!("probe{i}_cesaro.csv")), p.cesaro.to_csv())?;
        std::fs::write(dir.join(format!("probe{i}_fit.json")), p.row.fit.to_json())?;
    }
    std::fs::write(dir.join("summary.json"), out.report.to_json())?;
    Ok(())
}

/// Rescales a series for plotting against a predicted curve.
pub fn scaled_series(cesaro: &TimeSeries, f: impl Fn(f64) -> f64) -> Result<TimeSeries> {
    cesaro.map(|t, m| m / f(t), SeriesTag::Scaled)
}
