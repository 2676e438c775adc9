//! Declarative scenario runner: JSON configs, built-in presets, CSV and SVG
//! emission, and the self-test battery behind the CLI.
//!
//! Config files are single JSON documents with unknown fields rejected.
//! CSV uses a header row, comma separators, shortest round-trip float
//! rendering, and LF line endings, so repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{
    build_transition_matrix, classical_step, detailed_balance_rates,
    kraus_operators, spectral_gap, stationary_closed_form, stationary_numeric, StationaryForm,
};
use crate::collision::{collision_step_closed, collision_step_dilated, ChannelConfig};
use crate::diagnostics::{
    asymptotic_deviation, first_order_asymptote, gibbs_populations, run_classical_trajectory,
    run_quantum_trajectory, total_variation, DeviationMethod, BOUNDARY_GUARD_TOL,
};
use crate::error::Error;
use crate::ladder::{
    dephase, embed_diagonal, extract_populations, gaussian_population, EnergySpectrum,
    PopulationVector, TransitionRates,
};
use crate::linalg::{random_density_operator, trace_norm_hermitian};
use crate::plot::{line_plot, Series, YScale};

/// Environment variable selecting the sweep worker-pool size; defaults to
/// the number of available cores.
pub const WORKERS_ENV: &str = "ENERGY_WALK_WORKERS";

/// Errors from config loading and scenario execution, mapped onto the CLI
/// exit codes.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema violation in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invariant violation at step {step}: {message}")]
    Invariant { step: usize, message: String },

    #[error(transparent)]
    Engine(#[from] Error),
}

impl HarnessError {
    /// 0 success, 2 schema/parse error, 3 numerical non-convergence,
    /// 4 invariant violation at runtime; plain i/o failures use 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse(_) | HarnessError::Schema { .. } => 2,
            HarnessError::Io(_) => 1,
            HarnessError::Invariant { .. } => 4,
            HarnessError::Engine(Error::NoConvergence { .. }) => 3,
            HarnessError::Engine(_) => 4,
        }
    }
}

fn schema(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Schema { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Classical,
    Quantum,
    MuSweep,
    BiasSweep,
}

/// Constant per-step probabilities; the lazy probability defaults to 0.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantRates {
    pub p_plus: f64,
    #[serde(default = "default_p_zero")]
    pub p_zero: f64,
    pub p_minus: f64,
}

fn default_p_zero() -> f64 {
    0.1
}

/// One term of the level-dependent family `a + b / (c + n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FormulaTerm {
    fn eval(&self, n: usize) -> f64 {
        self.a + self.b / (self.c + n as f64)
    }
}

/// Level-dependent up/down rates; the stay probability is the remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaRates {
    pub up: FormulaTerm,
    pub down: FormulaTerm,
}

/// A family of constant-rate chains indexed by the bias `b = p_minus/p_plus`
/// at fixed lazy probability: `p_plus = (1 - p_zero)/(1 + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasFamily {
    #[serde(default = "default_p_zero")]
    pub p_zero: f64,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatesSpec {
    Constant(ConstantRates),
    Formula(FormulaRates),
    Bias(BiasFamily),
}

/// A single coherence parameter or a sweep list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    One(f64),
    Many(Vec<f64>),
}

impl MuSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            MuSpec::One(m) => vec![*m],
            MuSpec::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianInit {
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaInit {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsInit {
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Gaussian(GaussianInit),
    Delta(DeltaInit),
    Gibbs(GibbsInit),
}

/// One scenario: a trajectory or a sweep, with everything needed to rerun
/// it bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: ScenarioKind,
    pub levels: usize,
    pub gap: f64,
    pub rates: RatesSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuSpec>,
    pub initial: InitialState,
    pub steps: usize,
    /// Series to plot; the CSVs always carry the full column set.
    pub outputs: Vec<String>,
    /// Reserved for randomized test utilities; unused by deterministic runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

const CLASSICAL_OUTPUTS: &[&str] = &["d_inf", "d_th"];
const QUANTUM_OUTPUTS: &[&str] = &["d_th", "d_th_diag", "d_cl", "bound"];
const MU_SWEEP_OUTPUTS: &[&str] = &["d_th", "d_infinity"];
const BIAS_SWEEP_OUTPUTS: &[&str] = &["d_inf"];

impl ScenarioConfig {
    /// Kind-dependent field requirements and value checks beyond what serde
    /// enforces structurally.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.name.is_empty() {
            return Err(schema("name", "must be non-empty"));
        }
        if self.levels < 2 {
            return Err(schema("levels", format!("need at least 2 levels, got {}", self.levels)));
        }
        if !(self.gap > 0.0) {
            return Err(schema("gap", format!("must be positive, got {}", self.gap)));
        }
        if self.steps == 0 {
            return Err(schema("steps", "must be at least 1"));
        }
        let allowed: &[&str] = match self.kind {
            ScenarioKind::Classical => CLASSICAL_OUTPUTS,
            ScenarioKind::Quantum => QUANTUM_OUTPUTS,
            ScenarioKind::MuSweep => MU_SWEEP_OUTPUTS,
            ScenarioKind::BiasSweep => BIAS_SWEEP_OUTPUTS,
        };
        for o in &self.outputs {
            if !allowed.contains(&o.as_str()) {
                return Err(schema(
                    "outputs",
                    format!("unknown series `{o}` for this kind (allowed: {allowed:?})"),
                ));
            }
        }
        match self.kind {
            ScenarioKind::Classical => {
                if self.mu.is_some() {
                    return Err(schema("mu", "not allowed for classical scenarios"));
                }
                if matches!(self.rates, RatesSpec::Bias(_)) {
                    return Err(schema("rates", "bias family requires kind = bias_sweep"));
                }
            }
            ScenarioKind::Quantum => {
                match self.mu {
                    Some(MuSpec::One(_)) => {}
                    Some(MuSpec::Many(_)) => {
                        return Err(schema("mu", "quantum scenarios take a single value"))
                    }
                    None => return Err(schema("mu", "required for quantum scenarios")),
                }
                if !matches!(self.rates, RatesSpec::Constant(_)) {
                    return Err(schema("rates", "quantum scenarios require constant rates"));
                }
            }
            ScenarioKind::MuSweep => {
                match &self.mu {
                    Some(MuSpec::Many(v)) if !v.is_empty() => {}
                    Some(MuSpec::Many(_)) => {
                        return Err(schema("mu", "sweep list must be non-empty"))
                    }
                    _ => return Err(schema("mu", "mu_sweep requires a list of values")),
                }
                if !matches!(self.rates, RatesSpec::Constant(_)) {
                    return Err(schema("rates", "mu_sweep requires constant rates"));
                }
            }
            ScenarioKind::BiasSweep => {
                if self.mu.is_some() {
                    return Err(schema("mu", "not allowed for bias_sweep scenarios"));
                }
                match &self.rates {
                    RatesSpec::Bias(fam) => {
                        if fam.biases.is_empty() {
                            return Err(schema("rates", "bias list must be non-empty"));
                        }
                        if !(0.0..1.0).contains(&fam.p_zero) {
                            return Err(schema(
                                "rates",
                                format!("p_zero must lie in [0, 1), got {}", fam.p_zero),
                            ));
                        }
                        for &b in &fam.biases {
                            if !(b > 0.0) {
                                return Err(schema("rates", format!("bias must be positive, got {b}")));
                            }
                        }
                    }
                    _ => return Err(schema("rates", "bias_sweep requires a bias family")),
                }
            }
        }
        // rate values are checked here so malformed configs fail at load
        // time with a schema error rather than deep inside the engine
        match &self.rates {
            RatesSpec::Constant(c) => {
                let sum = c.p_plus + c.p_zero + c.p_minus;
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(schema("rates", format!("probabilities must sum to 1, got {sum}")));
                }
                for (label, v) in [("p_plus", c.p_plus), ("p_zero", c.p_zero), ("p_minus", c.p_minus)]
                {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(schema("rates", format!("{label} must lie in [0, 1], got {v}")));
                    }
                }
            }
            RatesSpec::Formula(f) => {
                for n in 0..self.levels {
                    let up = f.up.eval(n);
                    let down = f.down.eval(n);
                    let stay = 1.0 - up - down;
                    if !(0.0..=1.0).contains(&up)
                        || !(0.0..=1.0).contains(&down)
                        || !(-1e-12..=1.0).contains(&stay)
                    {
                        return Err(schema(
                            "rates",
                            format!("formula rates leave level {n} outside [0, 1]"),
                        ));
                    }
                }
            }
            RatesSpec::Bias(_) => {}
        }
        match &self.initial {
            InitialState::Gaussian(g) => {
                if !(g.width > 0.0) {
                    return Err(schema("initial", format!("width must be positive, got {}", g.width)));
                }
            }
            InitialState::Delta(d) => {
                if d.n >= self.levels {
                    return Err(schema(
                        "initial",
                        format!("delta level {} outside ladder of {} levels", d.n, self.levels),
                    ));
                }
            }
            InitialState::Gibbs(g) => {
                if !(g.beta >= 0.0) {
                    return Err(schema("initial", format!("beta must be non-negative, got {}", g.beta)));
                }
            }
        }
        Ok(())
    }
}

/// Parse and validate a JSON scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = fs::read_to_string(path)?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| {
        let msg = format!("{} at line {} column {}", e, e.line(), e.column());
        if msg.contains("unknown field") || msg.contains("missing field") || msg.contains("invalid") {
            HarnessError::Schema { field: "<document>".into(), message: msg }
        } else {
            HarnessError::Parse(msg)
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Built-in presets in display order.
pub fn preset_names() -> Vec<(&'static str, &'static str)> {
    vec![
        ("fig1a", "bias sweep of classical equilibration: d_inf(t) for biases 4, 2, 1.1"),
        ("fig1b", "classical thermalization failure: d_th(t) under level-dependent rates"),
        ("fig2", "quantum trajectory: d_th, d_th_diag, d_cl at mu = 0.5"),
        ("fig3", "mu-sweep of d_th(t): plateau grows with the coherence parameter"),
        ("fig4", "asymptotic deviation d_infinity versus mu with first-order prediction"),
    ]
}

/// Look up a preset configuration by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let gaussian =
        InitialState::Gaussian(GaussianInit { center: 2.0, width: 2.0 });
    let fig2_rates =
        RatesSpec::Constant(ConstantRates { p_plus: 0.2, p_zero: 0.1, p_minus: 0.7 });
    let cfg = match name {
        "fig1a" => ScenarioConfig {
            name: "fig1a".into(),
            kind: ScenarioKind::BiasSweep,
            levels: 51,
            gap: 1.0,
            rates: RatesSpec::Bias(BiasFamily { p_zero: 0.1, biases: vec![4.0, 2.0, 1.1] }),
            mu: None,
            initial: gaussian,
            steps: 2000,
            outputs: vec!["d_inf".into()],
            seed: None,
        },
        "fig1b" => ScenarioConfig {
            name: "fig1b".into(),
            kind: ScenarioKind::Classical,
            levels: 51,
            gap: 1.0,
            rates: RatesSpec::Formula(FormulaRates {
                up: FormulaTerm { a: 0.15, b: 0.05, c: 1.0 },
                down: FormulaTerm { a: 0.55, b: -0.10, c: 2.0 },
            }),
            mu: None,
            initial: gaussian,
            steps: 2000,
            outputs: vec!["d_th".into()],
            seed: None,
        },
        "fig2" => ScenarioConfig {
            name: "fig2".into(),
            kind: ScenarioKind::Quantum,
            levels: 21,
            gap: 1.0,
            rates: fig2_rates,
            mu: Some(MuSpec::One(0.5)),
            initial: gaussian,
            steps: 1000,
            outputs: vec!["d_th".into(), "d_th_diag".into(), "d_cl".into()],
            seed: None,
        },
        "fig3" => ScenarioConfig {
            name: "fig3".into(),
            kind: ScenarioKind::MuSweep,
            levels: 21,
            gap: 1.0,
            rates: fig2_rates,
            mu: Some(MuSpec::Many(vec![0.0, 0.1, 0.25, 0.5, 1.0])),
            initial: gaussian,
            steps: 1000,
            outputs: vec!["d_th".into()],
            seed: None,
        },
        "fig4" => ScenarioConfig {
            name: "fig4".into(),
            kind: ScenarioKind::MuSweep,
            levels: 21,
            gap: 1.0,
            rates: fig2_rates,
            mu: Some(MuSpec::Many(vec![0.02, 0.05, 0.1, 0.15, 0.2])),
            initial: gaussian,
            steps: 1000,
            outputs: vec!["d_infinity".into()],
            seed: None,
        },
        _ => return None,
    };
    Some(cfg)
}

/// Files written and warnings raised by one scenario run.
#[derive(Debug, Clone, Default)]
pub struct ExitReport {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl ExitReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for f in &self.files {
            let _ = writeln!(out, "wrote {}", f.display());
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn check_probability(step: usize, name: &str, v: f64) -> Result<(), HarnessError> {
    if !(-1e-12..=1.0 + 1e-9).contains(&v) || !v.is_finite() {
        return Err(HarnessError::Invariant {
            step,
            message: format!("{name} = {v} outside [0, 1]"),
        });
    }
    Ok(())
}

fn rates_from_constant(c: &ConstantRates, levels: usize) -> Result<TransitionRates, HarnessError> {
    Ok(TransitionRates::constant(c.p_plus, c.p_zero, c.p_minus, levels)?)
}

fn rates_from_formula(f: &FormulaRates, levels: usize) -> Result<TransitionRates, HarnessError> {
    let up: Vec<f64> = (0..levels).map(|n| f.up.eval(n)).collect();
    let down: Vec<f64> = (0..levels).map(|n| f.down.eval(n)).collect();
    let stay: Vec<f64> = up.iter().zip(&down).map(|(u, d)| 1.0 - u - d).collect();
    Ok(TransitionRates::level_dependent(up, stay, down)?)
}

/// Rates for one member of a bias family: `b = p_minus / p_plus` with the
/// active probability `1 - p_zero` split accordingly.
pub fn bias_rates(fam: &BiasFamily, bias: f64, levels: usize) -> Result<TransitionRates, HarnessError> {
    let active = 1.0 - fam.p_zero;
    let p_plus = active / (1.0 + bias);
    let p_minus = active * bias / (1.0 + bias);
    Ok(TransitionRates::constant(p_plus, fam.p_zero, p_minus, levels)?)
}

fn initial_population(
    cfg: &ScenarioConfig,
    spectrum: &EnergySpectrum,
) -> Result<PopulationVector, HarnessError> {
    let pop = match &cfg.initial {
        InitialState::Gaussian(g) => gaussian_population(g.center, g.width, cfg.levels)?,
        InitialState::Delta(d) => PopulationVector::delta(d.n, cfg.levels)?,
        InitialState::Gibbs(g) => gibbs_populations(g.beta, spectrum)?,
    };
    Ok(pop)
}

fn install_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| {
                HarnessError::Io(std::io::Error::other(format!("worker pool: {e}")))
            })?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

fn series_from_column(label: &str, ts: &[usize], values: &[f64]) -> Series {
    Series {
        label: label.to_string(),
        points: ts.iter().zip(values).map(|(&t, &v)| (t as f64, v)).collect(),
    }
}

/// Run a validated scenario, writing CSVs (and SVGs unless suppressed) into
/// `out_dir`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    write_svg: bool,
) -> Result<ExitReport, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let spectrum = EnergySpectrum::uniform(cfg.gap, cfg.levels)?;
    let pop0 = initial_population(cfg, &spectrum)?;
    let mut report = ExitReport::default();

    match cfg.kind {
        ScenarioKind::Classical => {
            let rates = match &cfg.rates {
                RatesSpec::Constant(c) => rates_from_constant(c, cfg.levels)?,
                RatesSpec::Formula(f) => rates_from_formula(f, cfg.levels)?,
                RatesSpec::Bias(_) => unreachable!("rejected by validate"),
            };
            let series = run_classical_trajectory(&pop0, &rates, &spectrum, cfg.steps)?;
            let tripped = series.boundary_guard_tripped();
            let mut header =
                vec!["t", "d_inf", "d_th", "mean_n", "beta_t", "boundary_occ", "boundary_cumsum"];
            if tripped {
                header.push("boundary_flag");
            }
            let mut rows = Vec::with_capacity(series.records.len());
            for r in &series.records {
                check_probability(r.t, "d_inf", r.d_inf)?;
                check_probability(r.t, "d_th", r.d_th)?;
                check_probability(r.t, "boundary_occ", r.boundary_occ)?;
                let mut row = vec![
                    r.t.to_string(),
                    fmt_f(r.d_inf),
                    fmt_f(r.d_th),
                    fmt_f(r.mean_n),
                    fmt_f(r.beta),
                    fmt_f(r.boundary_occ),
                    fmt_f(r.boundary_cumsum),
                ];
                if tripped {
                    row.push(u8::from(r.top_occ >= BOUNDARY_GUARD_TOL).to_string());
                }
                rows.push(row);
            }
            let csv = out_dir.join(format!("{}.csv", cfg.name));
            write_csv(&csv, &header, &rows)?;
            report.files.push(csv);
            if tripped {
                report.warnings.push(format!(
                    "boundary guard: top-level occupation reached {:e} (threshold {BOUNDARY_GUARD_TOL:e})",
                    series.boundary_guard_max
                ));
            }
            if write_svg {
                let ts: Vec<usize> = series.records.iter().map(|r| r.t).collect();
                for output in &cfg.outputs {
                    let (values, scale): (Vec<f64>, YScale) = match output.as_str() {
                        "d_inf" => (series.records.iter().map(|r| r.d_inf).collect(), YScale::Log),
                        "d_th" => (series.records.iter().map(|r| r.d_th).collect(), YScale::Linear),
                        _ => unreachable!("rejected by validate"),
                    };
                    let svg = line_plot(
                        &format!("{}: {output}", cfg.name),
                        "t",
                        output,
                        &[series_from_column(output, &ts, &values)],
                        scale,
                    );
                    let path = out_dir.join(format!("{}_{output}.svg", cfg.name));
                    fs::write(&path, svg)?;
                    report.files.push(path);
                }
            }
        }

        ScenarioKind::Quantum => {
            let rates = match &cfg.rates {
                RatesSpec::Constant(c) => rates_from_constant(c, cfg.levels)?,
                _ => unreachable!("rejected by validate"),
            };
            let mu = match &cfg.mu {
                Some(MuSpec::One(m)) => *m,
                _ => unreachable!("rejected by validate"),
            };
            let channel = ChannelConfig::new(rates, mu, cfg.levels)?;
            let series = run_quantum_trajectory(&pop0, &channel, &spectrum, cfg.steps)?;
            let tripped = series.boundary_guard_tripped();
            let mut header = vec![
                "t", "d_th", "d_th_diag", "d_cl", "bound", "mean_n", "beta_t", "boundary_occ",
                "boundary_cumsum",
            ];
            if tripped {
                header.push("boundary_flag");
            }
            let mut rows = Vec::with_capacity(series.records.len());
            for r in &series.records {
                check_probability(r.t, "d_th", r.d_th)?;
                check_probability(r.t, "d_th_diag", r.d_th_diag)?;
                check_probability(r.t, "d_cl", r.d_cl)?;
                check_probability(r.t, "boundary_occ", r.boundary_occ)?;
                let mut row = vec![
                    r.t.to_string(),
                    fmt_f(r.d_th),
                    fmt_f(r.d_th_diag),
                    fmt_f(r.d_cl),
                    fmt_f(r.bound),
                    fmt_f(r.mean_n),
                    fmt_f(r.beta),
                    fmt_f(r.boundary_occ),
                    fmt_f(r.boundary_cumsum),
                ];
                if tripped {
                    row.push(u8::from(r.top_occ >= BOUNDARY_GUARD_TOL).to_string());
                }
                rows.push(row);
            }
            let csv = out_dir.join(format!("{}.csv", cfg.name));
            write_csv(&csv, &header, &rows)?;
            report.files.push(csv);
            if tripped {
                report.warnings.push(format!(
                    "boundary guard: top-level occupation reached {:e} (threshold {BOUNDARY_GUARD_TOL:e})",
                    series.boundary_guard_max
                ));
            }
            if write_svg && !cfg.outputs.is_empty() {
                let ts: Vec<usize> = series.records.iter().map(|r| r.t).collect();
                let mut plotted = Vec::new();
                for output in &cfg.outputs {
                    let values: Vec<f64> = match output.as_str() {
                        "d_th" => series.records.iter().map(|r| r.d_th).collect(),
                        "d_th_diag" => series.records.iter().map(|r| r.d_th_diag).collect(),
                        "d_cl" => series.records.iter().map(|r| r.d_cl).collect(),
                        "bound" => series.records.iter().map(|r| r.bound).collect(),
                        _ => unreachable!("rejected by validate"),
                    };
                    plotted.push(series_from_column(output, &ts, &values));
                }
                let svg = line_plot(
                    &format!("{}: thermal distances", cfg.name),
                    "t",
                    "distance",
                    &plotted,
                    YScale::Linear,
                );
                let path = out_dir.join(format!("{}.svg", cfg.name));
                fs::write(&path, svg)?;
                report.files.push(path);
            }
        }

        ScenarioKind::MuSweep => {
            let rates = match &cfg.rates {
                RatesSpec::Constant(c) => rates_from_constant(c, cfg.levels)?,
                _ => unreachable!("rejected by validate"),
            };
            let mus = cfg.mu.as_ref().map(MuSpec::values).unwrap_or_default();
            type MuResult = (f64, crate::diagnostics::QuantumSeries, f64, f64);
            let results: Vec<MuResult> = install_pool(|| {
                mus.par_iter()
                    .map(|&mu| -> Result<MuResult, HarnessError> {
                        let channel = ChannelConfig::new(rates.clone(), mu, cfg.levels)?;
                        let series =
                            run_quantum_trajectory(&pop0, &channel, &spectrum, cfg.steps)?;
                        let d_infinity =
                            asymptotic_deviation(&channel, &pop0, &spectrum, DeviationMethod::Auto)?;
                        let bound_first_order = first_order_asymptote(&channel)?;
                        Ok((mu, series, d_infinity, bound_first_order))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })??;

            let mut summary_rows = Vec::new();
            let mut plateau_series = Vec::new();
            for (mu, series, d_infinity, bound_first_order) in &results {
                let tripped = series.boundary_guard_tripped();
                let mut header = vec![
                    "t", "d_th", "d_th_diag", "d_cl", "bound", "mean_n", "beta_t", "boundary_occ",
                    "boundary_cumsum",
                ];
                if tripped {
                    header.push("boundary_flag");
                }
                let mut rows = Vec::with_capacity(series.records.len());
                for r in &series.records {
                    check_probability(r.t, "d_th", r.d_th)?;
                    check_probability(r.t, "d_th_diag", r.d_th_diag)?;
                    let mut row = vec![
                        r.t.to_string(),
                        fmt_f(r.d_th),
                        fmt_f(r.d_th_diag),
                        fmt_f(r.d_cl),
                        fmt_f(r.bound),
                        fmt_f(r.mean_n),
                        fmt_f(r.beta),
                        fmt_f(r.boundary_occ),
                        fmt_f(r.boundary_cumsum),
                    ];
                    if tripped {
                        row.push(u8::from(r.top_occ >= BOUNDARY_GUARD_TOL).to_string());
                    }
                    rows.push(row);
                }
                let csv = out_dir.join(format!("{}_mu{}.csv", cfg.name, fmt_f(*mu)));
                write_csv(&csv, &header, &rows)?;
                report.files.push(csv);
                if tripped {
                    report.warnings.push(format!(
                        "boundary guard (mu = {mu}): top-level occupation reached {:e}",
                        series.boundary_guard_max
                    ));
                }
                summary_rows.push(vec![fmt_f(*mu), fmt_f(*d_infinity), fmt_f(*bound_first_order)]);
                let ts: Vec<usize> = series.records.iter().map(|r| r.t).collect();
                let values: Vec<f64> = series.records.iter().map(|r| r.d_th).collect();
                plateau_series.push(series_from_column(&format!("mu={mu}"), &ts, &values));
            }
            let summary = out_dir.join(format!("{}_summary.csv", cfg.name));
            write_csv(&summary, &["mu", "d_infinity", "bound_first_order"], &summary_rows)?;
            report.files.push(summary);

            if write_svg {
                for output in &cfg.outputs {
                    match output.as_str() {
                        "d_th" => {
                            let svg = line_plot(
                                &format!("{}: d_th over the sweep", cfg.name),
                                "t",
                                "d_th",
                                &plateau_series,
                                YScale::Linear,
                            );
                            let path = out_dir.join(format!("{}_d_th.svg", cfg.name));
                            fs::write(&path, svg)?;
                            report.files.push(path);
                        }
                        "d_infinity" => {
                            let dev = Series {
                                label: "d_infinity".into(),
                                points: results.iter().map(|(mu, _, d, _)| (*mu, *d)).collect(),
                            };
                            let fo = Series {
                                label: "bound_first_order".into(),
                                points: results.iter().map(|(mu, _, _, b)| (*mu, *b)).collect(),
                            };
                            let svg = line_plot(
                                &format!("{}: asymptotic deviation", cfg.name),
                                "mu",
                                "d_infinity",
                                &[dev, fo],
                                YScale::Linear,
                            );
                            let path = out_dir.join(format!("{}_d_infinity.svg", cfg.name));
                            fs::write(&path, svg)?;
                            report.files.push(path);
                        }
                        _ => unreachable!("rejected by validate"),
                    }
                }
            }
        }

        ScenarioKind::BiasSweep => {
            let fam = match &cfg.rates {
                RatesSpec::Bias(f) => f.clone(),
                _ => unreachable!("rejected by validate"),
            };
            type BiasResult = (f64, crate::diagnostics::ClassicalSeries, f64, f64);
            let results: Vec<BiasResult> = install_pool(|| {
                fam.biases
                    .par_iter()
                    .map(|&b| -> Result<BiasResult, HarnessError> {
                        let rates = bias_rates(&fam, b, cfg.levels)?;
                        let series =
                            run_classical_trajectory(&pop0, &rates, &spectrum, cfg.steps)?;
                        let fitted = crate::diagnostics::fit_decay_rate(&series.d_inf_values())?;
                        let matrix = build_transition_matrix(&rates)?;
                        let gap = spectral_gap(&matrix)?;
                        let spectral = -(1.0 - gap).ln();
                        Ok((b, series, fitted, spectral))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })??;

            let mut summary_rows = Vec::new();
            let mut decay_series = Vec::new();
            for (b, series, fitted, spectral) in &results {
                let tripped = series.boundary_guard_tripped();
                let mut header =
                    vec!["t", "d_inf", "d_th", "mean_n", "beta_t", "boundary_occ", "boundary_cumsum"];
                if tripped {
                    header.push("boundary_flag");
                }
                let mut rows = Vec::with_capacity(series.records.len());
                for r in &series.records {
                    check_probability(r.t, "d_inf", r.d_inf)?;
                    check_probability(r.t, "d_th", r.d_th)?;
                    let mut row = vec![
                        r.t.to_string(),
                        fmt_f(r.d_inf),
                        fmt_f(r.d_th),
                        fmt_f(r.mean_n),
                        fmt_f(r.beta),
                        fmt_f(r.boundary_occ),
                        fmt_f(r.boundary_cumsum),
                    ];
                    if tripped {
                        row.push(u8::from(r.top_occ >= BOUNDARY_GUARD_TOL).to_string());
                    }
                    rows.push(row);
                }
                let csv = out_dir.join(format!("{}_b{}.csv", cfg.name, fmt_f(*b)));
                write_csv(&csv, &header, &rows)?;
                report.files.push(csv);
                if tripped {
                    report.warnings.push(format!(
                        "boundary guard (bias = {b}): top-level occupation reached {:e}",
                        series.boundary_guard_max
                    ));
                }
                summary_rows.push(vec![fmt_f(*b), fmt_f(*fitted), fmt_f(*spectral)]);
                let ts: Vec<usize> = series.records.iter().map(|r| r.t).collect();
                let values: Vec<f64> = series.records.iter().map(|r| r.d_inf).collect();
                decay_series.push(series_from_column(&format!("b={b}"), &ts, &values));
            }
            let summary = out_dir.join(format!("{}_summary.csv", cfg.name));
            write_csv(&summary, &["bias", "decay_rate", "decay_rate_spectral"], &summary_rows)?;
            report.files.push(summary);

            if write_svg && cfg.outputs.iter().any(|o| o == "d_inf") {
                let svg = line_plot(
                    &format!("{}: equilibration", cfg.name),
                    "t",
                    "d_inf",
                    &decay_series,
                    YScale::Log,
                );
                let path = out_dir.join(format!("{}_d_inf.svg", cfg.name));
                fs::write(&path, svg)?;
                report.files.push(path);
            }
        }
    }

    Ok(report)
}

/// One self-test check: name plus outcome.
#[derive(Debug)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub result: Result<(), String>,
}

/// Run the oracle-equivalence and invariant battery used by `selftest`.
pub fn selftest() -> Vec<SelftestCheck> {
    use rand::SeedableRng;
    let mut checks = Vec::new();
    let mut push = |name: &'static str, result: Result<(), String>| {
        checks.push(SelftestCheck { name, result });
    };

    push("channel closed form matches dilation", (|| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for levels in [4usize, 8] {
            let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).map_err(|e| e.to_string())?;
            for mu in [0.0, 0.3, 0.7, 1.0] {
                let cfg = ChannelConfig::new(rates.clone(), mu, levels).map_err(|e| e.to_string())?;
                for _ in 0..10 {
                    let rho = random_density_operator(levels, &mut rng).map_err(|e| e.to_string())?;
                    let a = collision_step_closed(&rho, &cfg).map_err(|e| e.to_string())?;
                    let b = collision_step_dilated(&rho, &cfg).map_err(|e| e.to_string())?;
                    let diff = trace_norm_hermitian(&(a.matrix() - b.matrix()))
                        .map_err(|e| e.to_string())?;
                    if diff > 1e-12 {
                        return Err(format!("levels {levels} mu {mu}: deviation {diff:e}"));
                    }
                }
            }
        }
        Ok(())
    })());

    push("classical step matches matrix product and Kraus diagonal", (|| {
        let levels = 51;
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).map_err(|e| e.to_string())?;
        let matrix = build_transition_matrix(&rates).map_err(|e| e.to_string())?;
        let kraus = kraus_operators(&rates, levels).map_err(|e| e.to_string())?;
        let mut pop = gaussian_population(2.0, 2.0, levels).map_err(|e| e.to_string())?;
        for step in 0..100 {
            let by_step = classical_step(&pop, &rates).map_err(|e| e.to_string())?;
            let by_matrix = matrix.apply(&pop).map_err(|e| e.to_string())?;
            let by_kraus = extract_populations(
                &crate::ladder::DensityOperator::with_psd_floor(
                    kraus.apply(embed_diagonal(&pop).matrix()),
                    crate::ladder::PSD_FLOOR,
                )
                .map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let dev_matrix = total_variation(&by_step, &by_matrix).map_err(|e| e.to_string())?;
            let dev_kraus = total_variation(&by_step, &by_kraus).map_err(|e| e.to_string())?;
            if dev_matrix > 1e-12 || dev_kraus > 1e-12 {
                return Err(format!(
                    "step {step}: matrix deviation {dev_matrix:e}, Kraus deviation {dev_kraus:e}"
                ));
            }
            pop = by_step;
        }
        Ok(())
    })());

    push("stationary closed form matches power iteration", (|| {
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, 60).map_err(|e| e.to_string())?;
        let closed = stationary_closed_form(&rates, StationaryForm::Truncated)
            .map_err(|e| e.to_string())?;
        let matrix = build_transition_matrix(&rates).map_err(|e| e.to_string())?;
        let numeric = stationary_numeric(&matrix).map_err(|e| e.to_string())?;
        let dev = total_variation(&closed, &numeric.populations).map_err(|e| e.to_string())?;
        if dev > 1e-10 {
            return Err(format!("deviation {dev:e}"));
        }
        Ok(())
    })());

    push("detailed balance yields the Gibbs stationary state", (|| {
        let spectrum = EnergySpectrum::from_energies(
            (0..12).map(|n| n as f64 + 0.3 * (n * n) as f64).collect(),
        )
        .map_err(|e| e.to_string())?;
        let rates = detailed_balance_rates(0.8, &spectrum, &[0.1; 12]).map_err(|e| e.to_string())?;
        let matrix = build_transition_matrix(&rates).map_err(|e| e.to_string())?;
        let numeric = stationary_numeric(&matrix).map_err(|e| e.to_string())?;
        let gibbs = gibbs_populations(0.8, &spectrum).map_err(|e| e.to_string())?;
        let dev = total_variation(&numeric.populations, &gibbs).map_err(|e| e.to_string())?;
        if dev > 1e-10 {
            return Err(format!("deviation {dev:e}"));
        }
        Ok(())
    })());

    push("channel preserves trace and positivity", (|| {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let levels = 10;
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).map_err(|e| e.to_string())?;
        for mu in [0.0, 0.5, 1.0] {
            let cfg = ChannelConfig::new(rates.clone(), mu, levels).map_err(|e| e.to_string())?;
            for _ in 0..10 {
                let rho = random_density_operator(levels, &mut rng).map_err(|e| e.to_string())?;
                // constructor re-validates Hermiticity, unit trace, PSD
                collision_step_closed(&rho, &cfg).map_err(|e| e.to_string())?;
            }
        }
        Ok(())
    })());

    push("populations decouple from the coherence parameter", (|| {
        let levels = 21;
        let rates = TransitionRates::constant(0.2, 0.1, 0.7, levels).map_err(|e| e.to_string())?;
        let pop0 = gaussian_population(2.0, 2.0, levels).map_err(|e| e.to_string())?;
        let mut classical = pop0.clone();
        let mut rho = embed_diagonal(&pop0);
        let cfg = ChannelConfig::new(rates.clone(), 1.0, levels).map_err(|e| e.to_string())?;
        for step in 0..100 {
            classical = classical_step(&classical, &rates).map_err(|e| e.to_string())?;
            rho = collision_step_closed(&rho, &cfg).map_err(|e| e.to_string())?;
            let diag = extract_populations(&dephase(&rho)).map_err(|e| e.to_string())?;
            let dev = total_variation(&classical, &diag).map_err(|e| e.to_string())?;
            if dev > 1e-12 {
                return Err(format!("step {step}: deviation {dev:e}"));
            }
        }
        Ok(())
    })());

    checks
}
