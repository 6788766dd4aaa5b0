//! Batch front end: JSON configuration, the six commands and their output
//! files. The binary crate only parses flags and maps errors to exit codes.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::backinv::{self, invert_grid, invert_segmented, invert_spectral};
use crate::domain::{Field, SpectralDomain};
use crate::error::HeatError;
use crate::fullctl::{
    run_full_control, stationary_subdomain_feasibility, CnSettings, FullControlSpec,
    SeriesTolerances, SeriesVariant,
};
use crate::io::{write_columns, write_csv, write_json, write_matrix};
use crate::kernel::{
    heat_kernel_matrix, kernel_mass, semigroup_apply, truncation_tail, LOperator, SubdomainWindow,
};
use crate::numeric::{pairwise_sum_by, Lcg64};
use crate::subctl::solve_control;
use crate::verify;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for configuration or validation errors.
pub const EXIT_CONFIG: i32 = 1;
/// Exit code for convergence failures.
pub const EXIT_CONVERGENCE: i32 = 2;
/// Exit code for invariant failures.
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Error, Debug)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Heat(#[from] HeatError),

    #[error("invariant suite failed: {0}")]
    Invariant(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Io { .. } => EXIT_CONFIG,
            AppError::Invariant(_) => EXIT_INVARIANT,
            AppError::Heat(e) => match e {
                HeatError::EigenNoConvergence { .. }
                | HeatError::SeriesNotConverged { .. }
                | HeatError::CholeskyBreakdown { .. }
                | HeatError::SolverBreakdown(_) => EXIT_CONVERGENCE,
                HeatError::RouteDisagreement { .. } | HeatError::NonDecayingMode { .. } => {
                    EXIT_INVARIANT
                }
                _ => EXIT_CONFIG,
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainChoice {
    Interval,
    Circle,
    SturmLiouville,
}

/// Conductivity `a(x)` for the Sturm–Liouville domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Conductivity {
    Constant {
        value: f64,
    },
    /// Linear from `left` at `x = 0` to `right` at `x = L`.
    Affine {
        left: f64,
        right: f64,
    },
    /// Values at the `grid + 2` nodes including both ends.
    Samples {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainChoice,
    pub length: f64,
    pub modes: usize,
    pub grid: usize,
    #[serde(default)]
    pub conductivity: Option<Conductivity>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            kind: DomainChoice::Interval,
            length: PI,
            modes: 32,
            grid: 512,
            conductivity: None,
        }
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<SpectralDomain, AppError> {
        let d = match self.kind {
            DomainChoice::Interval => SpectralDomain::interval(self.length, self.modes, self.grid)?,
            DomainChoice::Circle => SpectralDomain::circle(self.length, self.modes, self.grid)?,
            DomainChoice::SturmLiouville => {
                let a = self.conductivity.as_ref().ok_or_else(|| {
                    AppError::Config("domain.conductivity: required for sturm_liouville".into())
                })?;
                let h = self.length / (self.grid + 1) as f64;
                let samples: Vec<f64> = match a {
                    Conductivity::Constant { value } => vec![*value; self.grid + 2],
                    Conductivity::Affine { left, right } => (0..self.grid + 2)
                        .map(|m| left + (right - left) * m as f64 * h / self.length)
                        .collect(),
                    Conductivity::Samples { values } => {
                        if values.len() != self.grid + 2 {
                            return Err(AppError::Config(format!(
                                "domain.conductivity.values: expected {} samples, got {}",
                                self.grid + 2,
                                values.len()
                            )));
                        }
                        values.clone()
                    }
                };
                SpectralDomain::sturm_liouville(&samples, self.length, self.modes)?
            }
        };
        Ok(d)
    }
}

/// A test field `scale · e^{flow_time Δ} (Σ amp_j η_j + random)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    /// `(j, amplitude)` pairs with 1-based mode index `j`.
    pub terms: Vec<(usize, f64)>,
    pub scale: f64,
    pub flow_time: f64,
    /// Adds uniform `[-1, 1)` coefficients on the first `random_modes` modes.
    pub random_modes: usize,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            terms: Vec::new(),
            scale: 1.0,
            flow_time: 0.0,
            random_modes: 0,
        }
    }
}

impl FieldSpec {
    pub fn modes(terms: &[(usize, f64)]) -> Self {
        Self {
            terms: terms.to_vec(),
            ..Self::default()
        }
    }

    pub fn build(
        &self,
        domain: &SpectralDomain,
        rng: &mut Lcg64,
        name: &str,
    ) -> Result<Field, AppError> {
        let n = domain.n_modes();
        let mut c = vec![0.0; n];
        for &(j, amp) in &self.terms {
            if j == 0 || j > n {
                return Err(AppError::Config(format!(
                    "problem.{name}.terms: mode index {j} outside 1..={n}"
                )));
            }
            c[j - 1] += amp;
        }
        if self.random_modes > n {
            return Err(AppError::Config(format!(
                "problem.{name}.random_modes: {} exceeds {n} modes",
                self.random_modes
            )));
        }
        for (ck, r) in c.iter_mut().zip(rng.signed_vec(self.random_modes)) {
            *ck += r;
        }
        if !(self.flow_time >= 0.0) {
            return Err(AppError::Config(format!(
                "problem.{name}.flow_time: must be non-negative"
            )));
        }
        let f = semigroup_apply(domain, self.flow_time, &domain.synthesize(&c)?)?;
        Ok(f.scaled(self.scale))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub times: Vec<f64>,
    /// Random `φ` used for the `⟨Lφ, φ⟩ = ‖φ‖²_H` check.
    pub h_norm_samples: usize,
    pub h_norm_modes: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            times: vec![0.1],
            h_norm_samples: 20,
            h_norm_modes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertConfig {
    /// Target time `t` for the single-step inversions.
    pub time: f64,
    pub terms: usize,
    pub grid_terms: usize,
    pub segmented_time: f64,
    pub segments: usize,
}

impl Default for InvertConfig {
    fn default() -> Self {
        Self {
            time: 0.7,
            terms: 40,
            grid_terms: 25,
            segmented_time: 0.3,
            segments: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityConfig {
    pub window: SubdomainWindow,
    pub modes: usize,
}

fn default_seed() -> u64 {
    2024
}

fn default_control_modes() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub horizon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub variant: SeriesVariant,
    #[serde(default)]
    pub initial: FieldSpec,
    #[serde(default)]
    pub target: FieldSpec,
    #[serde(default)]
    pub switch_time: Option<f64>,
    #[serde(default)]
    pub window: Option<SubdomainWindow>,
    #[serde(default = "default_control_modes")]
    pub control_modes: usize,
    #[serde(default)]
    pub flow_times: Vec<f64>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub invert: InvertConfig,
    #[serde(default)]
    pub feasibility: Option<FeasibilityConfig>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            seed: default_seed(),
            variant: SeriesVariant::AllIntegers,
            initial: FieldSpec::modes(&[(1, 1.0), (3, 0.5)]),
            target: FieldSpec {
                terms: vec![(1, 1.0), (2, 1.0)],
                scale: 0.2,
                flow_time: 0.3,
                random_modes: 0,
            },
            switch_time: Some(0.9),
            window: Some(SubdomainWindow::Interval {
                start: 0.5,
                end: 1.5,
            }),
            control_modes: default_control_modes(),
            flow_times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            kernel: KernelConfig::default(),
            invert: InvertConfig::default(),
            feasibility: Some(FeasibilityConfig {
                window: SubdomainWindow::Interval {
                    start: 0.3,
                    end: 0.8,
                },
                modes: 12,
            }),
        }
    }
}

fn default_time_steps() -> usize {
    256
}

fn default_galerkin_steps() -> usize {
    2000
}

fn default_cn_steps() -> Option<usize> {
    Some(4096)
}

fn default_j_max() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default)]
    pub series: SeriesTolerances,
    /// Simpson subintervals for time integrals.
    #[serde(default = "default_time_steps")]
    pub time_steps: usize,
    #[serde(default = "default_galerkin_steps")]
    pub galerkin_steps: usize,
    /// Crank–Nicolson steps for the full-control oracle; `null` skips it.
    #[serde(default = "default_cn_steps")]
    pub cn_steps: Option<usize>,
    #[serde(default = "default_j_max")]
    pub growth_j_max: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            series: SeriesTolerances::default(),
            time_steps: default_time_steps(),
            galerkin_steps: default_galerkin_steps(),
            cn_steps: default_cn_steps(),
            growth_j_max: default_j_max(),
        }
    }
}

fn default_samples() -> usize {
    11
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_samples")]
    pub trajectory_samples: usize,
    /// Also dump dense matrices (kernel, `α`).
    #[serde(default)]
    pub write_matrices: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trajectory_samples: default_samples(),
            write_matrices: false,
        }
    }
}

/// The full configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub domain: DomainConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parse a configuration document; errors name the offending field path.
pub fn parse_config(text: &str) -> Result<Config, AppError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner().to_string();
        let full = match missing_field(&inner) {
            Some(field) if path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        AppError::Config(format!("{full}: {inner}"))
    })
}

fn missing_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("missing field `")?;
    rest.split('`').next()
}

pub fn load_config(path: &Path) -> Result<Config, AppError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text)
}

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub variant: Option<SeriesVariant>,
    pub modes: Option<usize>,
    pub grid: Option<usize>,
}

impl Config {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.problem.seed = s;
        }
        if let Some(v) = o.variant {
            self.problem.variant = v;
        }
        if let Some(n) = o.modes {
            self.domain.modes = n;
        }
        if let Some(m) = o.grid {
            self.domain.grid = m;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kernel,
    Flow,
    ControlFull,
    ControlSub,
    Invert,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Flow => "flow",
            Command::ControlFull => "control-full",
            Command::ControlSub => "control-sub",
            Command::Invert => "invert",
            Command::Verify => "verify",
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Value,
    pub files: Vec<PathBuf>,
    /// Nonzero when the command ran but its checks failed.
    pub exit_code: i32,
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, AppError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn columns(&mut self, name: &str, columns: &[(&str, &[f64])]) -> Result<(), AppError> {
        let p = self.path(name);
        write_columns(&p, columns).map_err(io_err(&p))
    }

    fn matrix(&mut self, name: &str, data: &[f64], cols: usize) -> Result<(), AppError> {
        let p = self.path(name);
        write_matrix(&p, data, cols).map_err(io_err(&p))
    }

    fn trajectory(&mut self, name: &str, rows: &[(f64, Field)]) -> Result<(), AppError> {
        let p = self.path(name);
        let m = rows.first().map(|r| r.1.len()).unwrap_or(0);
        let labels: Vec<String> = std::iter::once("t".to_string())
            .chain((0..m).map(|i| format!("u{i}")))
            .collect();
        let header: Vec<&str> = labels.iter().map(String::as_str).collect();
        write_csv(
            &p,
            &header,
            rows.iter().map(|(t, f)| {
                std::iter::once(*t)
                    .chain(f.values().iter().copied())
                    .collect()
            }),
        )
        .map_err(io_err(&p))
    }

    fn finish(mut self, summary: Value, exit_code: i32) -> Result<Outcome, AppError> {
        let p = self.path("summary.json");
        write_json(&p, &summary).map_err(io_err(&p))?;
        Ok(Outcome {
            summary,
            files: self.files,
            exit_code,
        })
    }
}

/// Run one command and write its files into `out`.
pub fn run(command: Command, config: &Config, out: &Path) -> Result<Outcome, AppError> {
    let domain = config.domain.build()?;
    let mut output = Output::new(out)?;
    let mut summary = match command {
        Command::Kernel => cmd_kernel(&domain, config, &mut output)?,
        Command::Flow => cmd_flow(&domain, config, &mut output)?,
        Command::ControlFull => cmd_control_full(&domain, config, &mut output)?,
        Command::ControlSub => cmd_control_sub(&domain, config, &mut output)?,
        Command::Invert => cmd_invert(&domain, config, &mut output)?,
        Command::Verify => {
            let report = verify::run_suite(config);
            let code = if report.failed == 0 {
                EXIT_OK
            } else {
                EXIT_INVARIANT
            };
            let value = json!({ "command": "verify", "report": report });
            return output.finish(value, code);
        }
    };
    summary["command"] = json!(command.name());
    summary["domain"] = serde_json::to_value(domain.descriptor()).unwrap_or(Value::Null);
    summary["seed"] = json!(config.problem.seed);
    output.finish(summary, EXIT_OK)
}

fn fields(domain: &SpectralDomain, config: &Config) -> Result<(Field, Field), AppError> {
    let mut rng = Lcg64::new(config.problem.seed);
    let u0 = config.problem.initial.build(domain, &mut rng, "initial")?;
    let z = config.problem.target.build(domain, &mut rng, "target")?;
    Ok((u0, z))
}

fn require_window(config: &Config) -> Result<SubdomainWindow, AppError> {
    config
        .problem
        .window
        .clone()
        .ok_or_else(|| AppError::Config("problem.window: required for this command".into()))
}

fn cmd_kernel(
    domain: &SpectralDomain,
    config: &Config,
    out: &mut Output,
) -> Result<Value, AppError> {
    let p = &config.problem;
    let m = domain.grid_len();
    let h = domain.weights();
    let mut per_time = Vec::new();
    let mut diag_cols: Vec<(String, Vec<f64>)> = vec![("x".into(), domain.nodes().to_vec())];
    for (idx, &t) in p.kernel.times.iter().enumerate() {
        let g = heat_kernel_matrix(domain, t)?;
        let g2 = heat_kernel_matrix(domain, 2.0 * t)?;
        let mut symmetry = 0.0f64;
        let mut reproducing = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                symmetry = symmetry.max((g[a * m + b] - g[b * m + a]).abs());
                let conv = pairwise_sum_by(m, |w| g[a * m + w] * h[w] * g[w * m + b]);
                reproducing = reproducing.max((conv - g2[a * m + b]).abs());
            }
        }
        let masses = domain
            .nodes()
            .iter()
            .map(|&x| kernel_mass(domain, t, x))
            .collect::<Result<Vec<f64>, _>>()?;
        diag_cols.push((
            format!("g_diag_{idx}"),
            (0..m).map(|a| g[a * m + a]).collect(),
        ));
        diag_cols.push((format!("mass_{idx}"), masses.clone()));
        if config.output.write_matrices && idx == 0 {
            out.matrix("kernel_matrix.csv", &g, m)?;
        }
        per_time.push(json!({
            "t": t,
            "tail_bound": truncation_tail(domain, t),
            "symmetry_error": symmetry,
            "reproducing_error": reproducing,
            "max_mass": masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }));
    }
    let cols: Vec<(&str, &[f64])> = diag_cols
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    out.columns("kernel_diag.csv", &cols)?;
    let mut h_norm = Value::Null;
    if let Some(w) = &p.window {
        let op = LOperator::new(domain, w, p.horizon)?;
        let mut rng = Lcg64::new(p.seed);
        let modes = p.kernel.h_norm_modes.min(domain.n_modes());
        let mut worst = 0.0f64;
        for _ in 0..p.kernel.h_norm_samples {
            let phi = domain.synthesize(&rng.signed_vec(modes))?;
            let hn = op.h_norm(&phi, config.tolerances.time_steps)?;
            worst = worst.max((hn.by_eigen_form.powi(2) - hn.by_quadrature.powi(2)).abs());
        }
        h_norm = json!({
            "samples": p.kernel.h_norm_samples,
            "modes": modes,
            "time_steps": config.tolerances.time_steps,
            "max_identity_error": worst,
        });
    }
    Ok(json!({ "kernel": per_time, "h_norm_identity": h_norm }))
}

fn cmd_flow(domain: &SpectralDomain, config: &Config, out: &mut Output) -> Result<Value, AppError> {
    let (u0, _) = fields(domain, config)?;
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    for &t in &config.problem.flow_times {
        let u = semigroup_apply(domain, t, &u0)?;
        norms.push(json!({ "t": t, "l2_norm": domain.norm(&u)? }));
        rows.push((t, u));
    }
    out.trajectory("flow.csv", &rows)?;
    Ok(json!({ "flow": norms, "initial_norm": domain.norm(&u0)? }))
}

fn cmd_control_full(
    domain: &SpectralDomain,
    config: &Config,
    out: &mut Output,
) -> Result<Value, AppError> {
    let p = &config.problem;
    let (u0, z) = fields(domain, config)?;
    let spec = FullControlSpec {
        u0: u0.clone(),
        z: z.clone(),
        horizon: p.horizon,
        switch_time: p.switch_time,
        variant: p.variant,
        tolerances: config.tolerances.series,
        cn: config.tolerances.cn_steps.map(|steps| CnSettings { steps }),
        trajectory_samples: config.output.trajectory_samples,
        growth_j_max: config.tolerances.growth_j_max,
    };
    let r = run_full_control(domain, &spec)?;
    let mut cols: Vec<(&str, &[f64])> = vec![
        ("x", domain.nodes()),
        ("u0", u0.values()),
        ("z", z.values()),
        ("b", r.b.values()),
        ("f", r.f.values()),
        ("u_switch", r.u_switch.values()),
        ("u_terminal", r.terminal.values()),
    ];
    if let Some(cn) = &r.cn_terminal {
        cols.push(("u_terminal_cn", cn));
    }
    out.columns("fields.csv", &cols)?;
    out.trajectory("trajectory.csv", &r.trajectory)?;
    let fc = r.f.coefficients().unwrap_or(&[]).to_vec();
    let bc = r.b.coefficients().unwrap_or(&[]).to_vec();
    out.columns(
        "coefficients.csv",
        &[("lambda", domain.eigenvalues()), ("b", &bc), ("f", &fc)],
    )?;
    let mut summary = json!({ "full_control": r.summary });
    if let Some(fc) = &p.feasibility {
        let rep = stationary_subdomain_feasibility(domain, &fc.window, &u0, p.horizon, fc.modes)?;
        summary["feasibility"] = serde_json::to_value(&rep).unwrap_or(Value::Null);
    }
    Ok(summary)
}

fn cmd_control_sub(
    domain: &SpectralDomain,
    config: &Config,
    out: &mut Output,
) -> Result<Value, AppError> {
    let p = &config.problem;
    let window = require_window(config)?;
    let (u0, _) = fields(domain, config)?;
    let sys = solve_control(domain, &window, p.horizon, p.control_modes, &u0)?;
    let galerkin = sys.galerkin_verify(&u0, config.tolerances.galerkin_steps)?;
    let quad = sys.control_energy_quadrature(config.tolerances.time_steps)?;
    let m = sys.m;
    out.columns(
        "system.csv",
        &[
            ("lambda", &domain.eigenvalues()[..m]),
            ("beta", &sys.beta),
            ("s", &sys.solution),
        ],
    )?;
    out.matrix("alpha.csv", &sys.alpha, m)?;
    let g0 = sys.control_field(0.0)?;
    let phi = sys.phi()?;
    let wts = domain.window_weights(&window)?;
    let chi: Vec<f64> = wts
        .iter()
        .zip(domain.weights())
        .map(|(a, b)| a / b)
        .collect();
    out.columns(
        "control.csv",
        &[
            ("x", domain.nodes()),
            ("chi", &chi),
            ("g_start", g0.values()),
            ("phi", phi.values()),
        ],
    )?;
    Ok(json!({
        "subdomain_control": sys.summary(),
        "quadratic_energy": sys.quadratic_energy(),
        "energy_quadrature": quad,
        "galerkin": galerkin,
    }))
}

fn cmd_invert(
    domain: &SpectralDomain,
    config: &Config,
    out: &mut Output,
) -> Result<Value, AppError> {
    let p = &config.problem;
    let inv = &p.invert;
    let (v, _) = fields(domain, config)?;
    let u_t = semigroup_apply(domain, p.horizon, &v)?;
    let reference = semigroup_apply(domain, inv.time, &v)?;
    let spectral = invert_spectral(domain, &u_t, inv.time, p.horizon, inv.terms)?;
    let spectral_error = backinv::relative_error(domain, &spectral.field, &reference)?;
    let grid = invert_grid(
        domain,
        &u_t,
        inv.time,
        p.horizon,
        inv.grid_terms,
        &reference,
    )?;
    let ks: Vec<f64> = (0..grid.trace.len()).map(|k| k as f64).collect();
    out.columns(
        "grid_trace.csv",
        &[("k", &ks), ("relative_error", &grid.trace)],
    )?;
    out.columns(
        "inverted.csv",
        &[
            ("x", domain.nodes()),
            ("reference", reference.values()),
            ("spectral", spectral.field.values()),
            ("grid_best", grid.best.values()),
        ],
    )?;
    let window = backinv::inversion_window(p.horizon)?;
    let segmented = match invert_segmented(
        domain,
        &u_t,
        inv.segmented_time,
        p.horizon,
        inv.segments,
        inv.terms,
    ) {
        Ok(seg) => {
            let target = semigroup_apply(domain, inv.segmented_time, &v)?;
            json!({
                "time": inv.segmented_time,
                "segments": inv.segments,
                "ratio": seg.ratio,
                "times": seg.times,
                "stages": seg.stages,
                "relative_error": backinv::relative_error(domain, &seg.field, &target)?,
            })
        }
        Err(e @ HeatError::SegmentationInfeasible(_)) => json!({ "infeasible": e.to_string() }),
        Err(e) => return Err(e.into()),
    };
    Ok(json!({
        "window": window,
        "time_in_window": window.contains(inv.time),
        "spectral": {
            "terms": inv.terms,
            "relative_error": spectral_error,
            "max_truncation": spectral.truncation.iter().cloned().fold(0.0, f64::max),
        },
        "grid": {
            "terms": inv.grid_terms,
            "best_terms": grid.best_terms,
            "min_error": grid.min_error(),
            "monotone_to_minimum": grid.monotone_to_minimum(),
            "diverges": grid.diverges(10.0),
        },
        "segmented": segmented,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_horizon_names_path() {
        let err = parse_config(r#"{"problem": {}}"#).unwrap_err();
        assert!(err.to_string().contains("problem.horizon"), "{err}");
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        let err = parse_config(r#"{"domain": {"kind": "square", "length": 1, "modes": 2, "grid": 8}, "problem": {"horizon": 1}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("domain.kind"), "{err}");
    }

    #[test]
    fn default_config_roundtrips() {
        let c = Config::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
        let minimal = parse_config(r#"{"problem": {"horizon": 2.0}}"#).unwrap();
        assert_eq!(minimal.problem.horizon, 2.0);
        assert_eq!(minimal.tolerances.cn_steps, Some(4096));
    }

    #[test]
    fn field_spec_validation() {
        let d = SpectralDomain::interval(PI, 4, 16).unwrap();
        let mut rng = Lcg64::new(1);
        assert!(FieldSpec::modes(&[(0, 1.0)])
            .build(&d, &mut rng, "initial")
            .is_err());
        assert!(FieldSpec::modes(&[(5, 1.0)])
            .build(&d, &mut rng, "initial")
            .is_err());
        let f = FieldSpec::modes(&[(2, 3.0)])
            .build(&d, &mut rng, "initial")
            .unwrap();
        assert_eq!(f.coefficients().unwrap(), &[0.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            AppError::from(HeatError::SolverBreakdown("x".into())).exit_code(),
            EXIT_CONVERGENCE
        );
        assert_eq!(
            AppError::from(HeatError::RouteDisagreement {
                what: "beta",
                discrepancy: 1.0,
                tolerance: 0.0
            })
            .exit_code(),
            EXIT_INVARIANT
        );
        assert_eq!(
            AppError::from(HeatError::EmptyWindow("x".into())).exit_code(),
            EXIT_CONFIG
        );
    }
}
