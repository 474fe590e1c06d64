//! Scenario runner behind the `qhj` binary.
//!
//! A run reads a JSON [`ScenarioConfig`], validates it, executes one
//! pipeline and writes CSV/JSON artifacts plus a `manifest.json` listing
//! every artifact with its SHA-256. The manifest is written even when the
//! run fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::Mode;
use crate::error::{QhjError, Result};
use crate::generating::{extract_canonical_map, GaugeFunction, GeneratingType};
use crate::grid::Grid1D;
use crate::heisenberg::{ehrenfest_crosscheck, heisenberg_for_potential, verify_heisenberg_equations, HeisenbergSolution};
use crate::io::{gram_table, propagator_table, s0_table, series_table, wavefunction_table, write_field, write_json, CsvTable};
use crate::phase_space::{
    apply_gauge_kernel, gauge_kernel_moments, gauge_wigner_kernel, husimi_from_wigner, kernel_moments, wigner_transform_strided,
    apply_linear_kernel, MapDirection,
};
use crate::potential::PotentialSpec;
use crate::propagation::{apply_propagator, build_propagator, compare_to_oracle, verify_unitarity, KernelSource, PropagatorMatrix};
use crate::series::{closed_form_generating, series_residual, PerturbativeHJSolution, SeriesOptions};
use crate::state::{make_gaussian, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SolveHj,
    Propagate,
    CompareOracle,
    WignerEvolve,
    Heisenberg,
    Unitarity,
    KernelCompare,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SolveHj,
        Scenario::Propagate,
        Scenario::CompareOracle,
        Scenario::WignerEvolve,
        Scenario::Heisenberg,
        Scenario::Unitarity,
        Scenario::KernelCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SolveHj => "solve-hj",
            Scenario::Propagate => "propagate",
            Scenario::CompareOracle => "compare-oracle",
            Scenario::WignerEvolve => "wigner-evolve",
            Scenario::Heisenberg => "heisenberg",
            Scenario::Unitarity => "unitarity",
            Scenario::KernelCompare => "kernel-compare",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::SolveHj => "tabulate S0 and the order-1 series on a (q1, Q2) grid at each time",
            Scenario::Propagate => "evolve a state with the generating-function kernel",
            Scenario::CompareOracle => "evolve a state with the kernel and with split-step, report L2 errors",
            Scenario::WignerEvolve => "Wigner field of the evolved state against the linearly mapped initial field",
            Scenario::Heisenberg => "affine Heisenberg solutions, equation-of-motion residuals and Ehrenfest means",
            Scenario::Unitarity => "Gram matrix of pulled-back localized probes",
            Scenario::KernelCompare => "quantum gauge kernel against the classical point-transformation kernel",
        }
    }

    fn needs(self) -> Needs {
        let all = Needs {
            potential: true,
            grid: true,
            state: true,
            times: true,
            momentum_grid: false,
            gauge: false,
        };
        match self {
            Scenario::SolveHj | Scenario::Unitarity => Needs { state: false, ..all },
            Scenario::Propagate | Scenario::CompareOracle => all,
            Scenario::WignerEvolve => Needs { momentum_grid: true, ..all },
            Scenario::Heisenberg => Needs {
                grid: false,
                state: false,
                ..all
            },
            Scenario::KernelCompare => Needs {
                potential: false,
                grid: false,
                state: true,
                times: false,
                momentum_grid: true,
                gauge: true,
            },
        }
    }
}

struct Needs {
    potential: bool,
    grid: bool,
    state: bool,
    times: bool,
    momentum_grid: bool,
    gauge: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Free,
    ConstantForce { a: f64 },
    Harmonic { omega: f64 },
    Polynomial { coeffs: Vec<f64> },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec> {
        match self {
            PotentialConfig::Free => Ok(PotentialSpec::Free),
            PotentialConfig::ConstantForce { a } if a.is_finite() => Ok(PotentialSpec::ConstantForce { a: *a }),
            PotentialConfig::ConstantForce { .. } => Err(QhjError::invalid("potential.a", "must be finite")),
            PotentialConfig::Harmonic { omega } => PotentialSpec::harmonic(*omega),
            PotentialConfig::Polynomial { coeffs } => PotentialSpec::polynomial(coeffs.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    /// Gaussian packet; `width` is the position standard deviation.
    Gaussian { q0: f64, p0: f64, width: f64 },
    /// Normalized superposition of `count` Gaussian packets with centres,
    /// momenta and complex weights drawn from the run seed.
    RandomPackets {
        count: usize,
        width: f64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
}

fn default_spread() -> f64 {
    2.0
}

impl StateConfig {
    pub fn build(&self, grid: Grid1D, hbar: f64, seed: u64) -> Result<WaveFunction> {
        match self {
            StateConfig::Gaussian { q0, p0, width } => make_gaussian(grid, *q0, *p0, *width, hbar),
            StateConfig::RandomPackets { count, width, spread } => {
                if *count == 0 {
                    return Err(QhjError::invalid("state.count", "must be positive"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
                for _ in 0..*count {
                    let q0 = rng.gen_range(-spread..=*spread);
                    let p0 = rng.gen_range(-spread..=*spread);
                    let w = Complex64::from_polar(rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI));
                    let g = make_gaussian(grid, q0, p0, *width, hbar)?;
                    for (a, b) in amps.iter_mut().zip(g.amplitudes()) {
                        *a += w * b;
                    }
                }
                WaveFunction::new(grid, amps, hbar)?.normalize()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Closed-form agreement of tabulated principal functions.
    pub hj: f64,
    /// Magnitude of the quantum HJ residual of the tabulated series.
    pub residual: f64,
    pub l2: f64,
    pub norm: f64,
    pub unitarity: f64,
    pub wigner: f64,
    pub heisenberg: f64,
    pub ehrenfest: f64,
    pub gauge: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hj: 1e-8,
            residual: 1e-2,
            l2: 1e-4,
            norm: 1e-3,
            unitarity: 1e-3,
            wigner: 1e-3,
            heisenberg: 1e-6,
            ehrenfest: 1e-6,
            gauge: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid1D>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum_grid: Option<Grid1D>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default)]
    pub times: Vec<f64>,
    pub hbar: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Also write Husimi fields with this parameter (wigner-evolve).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub husimi_alpha: Option<f64>,
    /// Polynomial coefficients of the gauge function (kernel-compare).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<Vec<f64>>,
    /// Truncation order of the series (solve-hj and non-quadratic kernels).
    #[serde(default = "default_order")]
    pub order: u8,
    #[serde(default)]
    pub export_propagator: bool,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("qhj-out")
}

fn default_order() -> u8 {
    1
}

fn missing(field: &'static str) -> QhjError {
    QhjError::Config(format!("{field}: required by this scenario"))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QhjError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QhjError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        self.potential.as_ref().ok_or_else(|| missing("potential"))?.build()
    }

    fn grid(&self) -> Result<Grid1D> {
        self.grid.ok_or_else(|| missing("grid"))
    }

    fn momentum_grid(&self) -> Result<Grid1D> {
        self.momentum_grid.ok_or_else(|| missing("momentum_grid"))
    }

    fn state(&self, seed: u64) -> Result<WaveFunction> {
        self.state.as_ref().ok_or_else(|| missing("state"))?.build(self.grid()?, self.hbar, seed)
    }

    /// Field-level checks; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(QhjError::Config("hbar: must be positive".into()));
        }
        let needs = self.scenario.needs();
        if needs.potential && self.potential.is_none() {
            return Err(missing("potential"));
        }
        if needs.grid && self.grid.is_none() {
            return Err(missing("grid"));
        }
        if needs.state && self.state.is_none() {
            return Err(missing("state"));
        }
        if needs.momentum_grid && self.momentum_grid.is_none() {
            return Err(missing("momentum_grid"));
        }
        if needs.gauge && self.gauge.is_none() {
            return Err(missing("gauge"));
        }
        if needs.times && self.times.is_empty() {
            return Err(missing("times"));
        }
        if self.order > 1 {
            return Err(QhjError::Config("order: only 0 and 1 are available".into()));
        }
        if self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(QhjError::Config("times: must be positive and finite".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QhjError::Config("times: must be strictly increasing".into()));
        }
        if self.mode == Mode::Exchange && self.scenario != Scenario::SolveHj {
            return Err(QhjError::Config("mode: exchange mode is only available for solve-hj".into()));
        }
        if let Some(alpha) = self.husimi_alpha {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(QhjError::Config("husimi_alpha: must be positive".into()));
            }
        }
        if let Some(s) = &self.state {
            match s {
                StateConfig::Gaussian { width, .. } | StateConfig::RandomPackets { width, .. } if !(*width > 0.0) => {
                    return Err(QhjError::Config("state.width: must be positive".into()));
                }
                _ => {}
            }
        }
        if needs.potential {
            let v = self.potential().map_err(|e| QhjError::Config(format!("potential: {e}")))?;
            let quadratic = v.quadratic_coefficients().is_some();
            if matches!(self.scenario, Scenario::WignerEvolve | Scenario::Heisenberg | Scenario::Unitarity) && !quadratic {
                return Err(QhjError::Config("potential: this scenario needs a potential of degree at most two".into()));
            }
            if quadratic {
                for &t in &self.times {
                    let f = match self.mode {
                        Mode::Identity => closed_form_generating(&v, GeneratingType::F1, t, self.hbar).map(|_| ()),
                        Mode::Exchange => crate::series::exchange_generating(&v, t, self.hbar).map(|_| ()),
                    };
                    if let Err(QhjError::Caustic { .. }) = f {
                        return Err(QhjError::Config(format!("times: t = {t} is a caustic of this potential")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckResult {
    fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tol,
            passed: value < tol,
        }
    }

    fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tol: threshold,
            passed: value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Software {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config: Option<ScenarioConfig>,
    pub software: Software,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub checks: Vec<CheckResult>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Passed,
    ChecksFailed,
    Error,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Passed => 0,
            RunStatus::ChecksFailed => 1,
            RunStatus::Error => 2,
        }
    }
}

pub const MANIFEST: &str = "manifest.json";

/// Collects artifacts and checks while a scenario runs.
struct Run<'a> {
    cfg: &'a ScenarioConfig,
    dir: &'a Path,
    seed: u64,
    files: Vec<String>,
    checks: Vec<CheckResult>,
}

impl Run<'_> {
    fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        table.write(&self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn check(&mut self, c: CheckResult) {
        self.checks.push(c);
    }
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| QhjError::Io(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Execute a configuration, writing artifacts and the manifest to `out`
/// (default: the configured output directory).
pub fn run_config(cfg: &ScenarioConfig, out: Option<&Path>, seed: u64) -> Result<RunManifest> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir).map_err(|e| QhjError::Io(format!("{}: {e}", dir.display())))?;
    let mut run = Run {
        cfg,
        dir: &dir,
        seed,
        files: Vec::new(),
        checks: Vec::new(),
    };
    let outcome = cfg.validate().and_then(|_| execute(&mut run));
    let mut files = run.files.clone();
    files.sort();
    files.dedup();
    let artifacts = files
        .iter()
        .map(|f| Ok(Artifact { file: f.clone(), sha256: sha256_hex(&dir.join(f))? }))
        .collect::<Result<Vec<_>>>()?;
    let (status, error) = match outcome {
        Err(e) => (RunStatus::Error, Some(e.to_string())),
        Ok(()) if run.checks.iter().all(|c| c.passed) => (RunStatus::Passed, None),
        Ok(()) => (RunStatus::ChecksFailed, None),
    };
    let manifest = RunManifest {
        config: Some(cfg.clone()),
        software: software(),
        seed,
        status,
        error,
        checks: run.checks,
        artifacts,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

fn software() -> Software {
    Software {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
    }
}

/// Load and execute a configuration file. Parse failures still produce a
/// manifest in `out` (or `qhj-out`) recording the error.
pub fn run_path(path: &Path, out: Option<&Path>, seed: u64) -> Result<RunManifest> {
    match ScenarioConfig::load(path) {
        Ok(cfg) => run_config(&cfg, out, seed),
        Err(e) => {
            let dir = out.map(Path::to_path_buf).unwrap_or_else(default_output_dir);
            fs::create_dir_all(&dir).map_err(|e| QhjError::Io(format!("{}: {e}", dir.display())))?;
            let manifest = RunManifest {
                config: None,
                software: software(),
                seed,
                status: RunStatus::Error,
                error: Some(e.to_string()),
                checks: Vec::new(),
                artifacts: Vec::new(),
            };
            write_json(&dir.join(MANIFEST), &manifest)?;
            Ok(manifest)
        }
    }
}

fn execute(run: &mut Run<'_>) -> Result<()> {
    match run.cfg.scenario {
        Scenario::SolveHj => solve_hj(run),
        Scenario::Propagate => propagate(run, false),
        Scenario::CompareOracle => propagate(run, true),
        Scenario::WignerEvolve => wigner_evolve(run),
        Scenario::Heisenberg => heisenberg(run),
        Scenario::Unitarity => unitarity(run),
        Scenario::KernelCompare => kernel_compare(run),
    }
}

/// Kernel on `grid` at time `t`: closed form for quadratic potentials, the
/// tabulated series otherwise.
fn kernel_at(cfg: &ScenarioConfig, v: &PotentialSpec, grid: &Grid1D, t: f64) -> Result<PropagatorMatrix> {
    if v.quadratic_coefficients().is_some() {
        let f = closed_form_generating(v, GeneratingType::F1, t, cfg.hbar)?;
        build_propagator(KernelSource::Closed { f: &f, t }, grid, grid)
    } else {
        let sol = PerturbativeHJSolution::tabulate(v, Mode::Identity, grid, grid, t, cfg.hbar, cfg.order, &SeriesOptions::tabulation())?;
        build_propagator(KernelSource::Series(&sol), grid, grid)
    }
}

fn solve_hj(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let v = cfg.potential()?;
    let grid = cfg.grid()?;
    for (k, &t) in cfg.times.iter().enumerate() {
        let sol = PerturbativeHJSolution::tabulate(&v, cfg.mode, &grid, &grid, t, cfg.hbar, cfg.order, &SeriesOptions::tabulation())?;
        run.csv(&format!("s0_t{k}.csv"), &s0_table(&sol))?;
        run.csv(&format!("series_t{k}.csv"), &series_table(&sol))?;
        if v.quadratic_coefficients().is_some() {
            let f = match cfg.mode {
                Mode::Identity => closed_form_generating(&v, GeneratingType::F1, t, cfg.hbar)?,
                Mode::Exchange => crate::series::exchange_generating(&v, t, cfg.hbar)?,
            };
            let m = grid.len();
            let mut worst: f64 = 0.0;
            for (i, q1) in grid.points().enumerate() {
                for (j, big_q) in grid.points().enumerate() {
                    worst = worst.max((sol.S0_field[i * m + j] - f.eval(q1, big_q).re).abs());
                }
            }
            run.check(CheckResult::below(format!("s0-closed-form t={t}"), worst, cfg.tolerances.hj));
        }
        let mid = grid.point(grid.len() / 2);
        let r = series_residual(&v, cfg.mode, mid, mid, t, cfg.hbar, cfg.order, &SeriesOptions::default())?;
        run.check(CheckResult::below(format!("qhj-residual t={t}"), r.norm(), cfg.tolerances.residual));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleEntry {
    t: f64,
    report: crate::propagation::OracleReport,
}

fn propagate(run: &mut Run<'_>, with_oracle: bool) -> Result<()> {
    let cfg = run.cfg;
    let v = cfg.potential()?;
    let grid = cfg.grid()?;
    let psi0 = cfg.state(run.seed)?;
    run.csv("psi_initial.csv", &wavefunction_table(&psi0))?;
    let mut reports = Vec::new();
    for (k, &t) in cfg.times.iter().enumerate() {
        let kernel = kernel_at(cfg, &v, &grid, t)?;
        if cfg.export_propagator {
            run.csv(&format!("propagator_t{k}.csv"), &propagator_table(&kernel))?;
        }
        let psi = apply_propagator(&kernel, &psi0)?;
        let mut table = wavefunction_table(&psi);
        table.comment(format!("t: {t}"));
        run.csv(&format!("psi_t{k}.csv"), &table)?;
        run.check(CheckResult::below(format!("norm t={t}"), (psi.norm() - 1.0).abs(), cfg.tolerances.norm));
        if with_oracle {
            let report = compare_to_oracle(&v, &kernel, &psi0)?;
            run.check(CheckResult::below(format!("l2-error t={t}"), report.l2_error, cfg.tolerances.l2));
            reports.push(OracleEntry { t, report });
        }
    }
    if with_oracle {
        run.json("oracle.json", &reports)?;
    }
    Ok(())
}

/// Stride that keeps at most 256 Wigner rows.
fn wigner_stride(grid: &Grid1D) -> usize {
    grid.len().div_ceil(256).max(1)
}

fn wigner_evolve(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let v = cfg.potential()?;
    let grid = cfg.grid()?;
    let pgrid = cfg.momentum_grid()?;
    let psi0 = cfg.state(run.seed)?;
    let stride = wigner_stride(&grid);
    let w0 = wigner_transform_strided(&psi0, stride, &pgrid)?;
    let mut files = write_field(run.dir, "wigner_initial", &w0, 0.0)?;
    if let Some(alpha) = cfg.husimi_alpha {
        files.extend(write_field(run.dir, "husimi_initial", &husimi_from_wigner(&w0, alpha)?, 0.0)?);
    }
    for (k, &t) in cfg.times.iter().enumerate() {
        let f = closed_form_generating(&v, GeneratingType::F1, t, cfg.hbar)?;
        let kernel = build_propagator(KernelSource::Closed { f: &f, t }, &grid, &grid)?;
        let psi = apply_propagator(&kernel, &psi0)?;
        let evolved = wigner_transform_strided(&psi, stride, &pgrid)?;
        let back = extract_canonical_map(&f)?;
        let (mapped, leak) = apply_linear_kernel(&back, &w0, MapDirection::Inverse)?;
        files.extend(write_field(run.dir, &format!("wigner_t{k}"), &evolved, t)?);
        files.extend(write_field(run.dir, &format!("wigner_mapped_t{k}"), &mapped, t)?);
        if let Some(alpha) = cfg.husimi_alpha {
            files.extend(write_field(run.dir, &format!("husimi_t{k}"), &husimi_from_wigner(&evolved, alpha)?, t)?);
        }
        run.check(CheckResult::below(format!("commuting-diagram t={t}"), evolved.max_difference(&mapped)?, cfg.tolerances.wigner));
        run.check(CheckResult::below(format!("mass-leakage t={t}"), leak.relative_change(), crate::phase_space::LEAKAGE_LIMIT));
    }
    run.files.extend(files);
    Ok(())
}

#[derive(Serialize)]
struct HeisenbergEntry {
    t: f64,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "D")]
    d: f64,
    shift: [f64; 2],
}

impl From<&HeisenbergSolution> for HeisenbergEntry {
    fn from(s: &HeisenbergSolution) -> Self {
        let [a, b, c, d, sq, sp] = s.coefficients();
        HeisenbergEntry { t: s.t, a, b, c, d, shift: [sq, sp] }
    }
}

fn heisenberg(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let v = cfg.potential()?;
    let sols: Vec<HeisenbergSolution> = cfg.times.iter().map(|&t| heisenberg_for_potential(&v, t, cfg.hbar)).collect::<Result<_>>()?;
    let entries: Vec<HeisenbergEntry> = sols.iter().map(HeisenbergEntry::from).collect();
    run.json("heisenberg.json", &entries)?;
    // equations of motion on a fine family ending at each requested time
    for &t in &cfg.times {
        let family: Vec<HeisenbergSolution> = (1..=64)
            .map(|k| heisenberg_for_potential(&v, t * (0.5 + 0.5 * k as f64 / 64.0), cfg.hbar))
            .collect::<Result<_>>()?;
        let r = verify_heisenberg_equations(&family, &v, cfg.tolerances.heisenberg)?;
        run.check(CheckResult::below(
            format!("equations-of-motion t={t}"),
            r.position_residual.max(r.momentum_residual),
            cfg.tolerances.heisenberg,
        ));
    }
    if cfg.state.is_some() && cfg.grid.is_some() {
        let psi0 = cfg.state(run.seed)?;
        let mut reports = Vec::new();
        for s in &sols {
            let r = ehrenfest_crosscheck(s, &v, &psi0, cfg.tolerances.ehrenfest)?;
            run.check(CheckResult::below(format!("ehrenfest t={}", s.t), r.error, cfg.tolerances.ehrenfest));
            reports.push(r);
        }
        run.json("ehrenfest.json", &reports)?;
    }
    Ok(())
}

fn unitarity(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let v = cfg.potential()?;
    let grid = cfg.grid()?;
    let reach = 0.5 * (grid.x_max() - grid.x_min()) * 0.5;
    for (k, &t) in cfg.times.iter().enumerate() {
        let kernel = kernel_at(cfg, &v, &grid, t)?;
        let r = verify_unitarity(&kernel, reach, cfg.tolerances.unitarity)?;
        run.csv(&format!("gram_t{k}.csv"), &gram_table(&r))?;
        if cfg.export_propagator {
            run.csv(&format!("propagator_t{k}.csv"), &propagator_table(&kernel))?;
        }
        let dev = r.worst_off_diagonal.max(r.worst_diagonal_deficit);
        run.check(CheckResult::below(format!("gram-deviation t={t}"), dev, cfg.tolerances.unitarity));
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelCompareReport {
    gauge: Vec<f64>,
    quadratic: bool,
    points: Vec<[f64; 2]>,
    quantum: Vec<f64>,
    classical: Vec<f64>,
    max_difference: f64,
    exact_moments_re: Vec<f64>,
    exact_moments_im: Vec<f64>,
    noise_floor: Option<f64>,
}

fn kernel_compare(run: &mut Run<'_>) -> Result<()> {
    let cfg = run.cfg;
    let coeffs = cfg.gauge.clone().ok_or_else(|| missing("gauge"))?;
    let g = GaugeFunction::Polynomial(coeffs.clone());
    let pgrid = cfg.momentum_grid()?;
    let (q0, p0, width) = match cfg.state.as_ref().ok_or_else(|| missing("state"))? {
        StateConfig::Gaussian { q0, p0, width } => (*q0, *p0, *width),
        StateConfig::RandomPackets { .. } => return Err(QhjError::Config("state: kernel-compare needs a gaussian test distribution".into())),
    };
    let hbar = cfg.hbar;
    // Wigner function of the configured packet as the test distribution
    let sp = hbar / (2.0 * width);
    let dist = move |q: f64, p: f64| {
        (-(q - q0).powi(2) / (2.0 * width * width) - (p - p0).powi(2) / (2.0 * sp * sp)).exp() / (2.0 * PI * width * sp)
    };
    let gref = &g;
    let points: Vec<[f64; 2]> = [-1.0, -0.5, 0.0, 0.5, 1.0]
        .iter()
        .flat_map(|&a| [-1.0, 0.0, 1.0].map(move |b| [q0 + a * width, p0 - gref.derivative(q0 + a * width) + b * sp]))
        .collect();
    let action = |g: &GaugeFunction| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let mut quantum = Vec::new();
        let mut classical = Vec::new();
        let mut worst: f64 = 0.0;
        for &[q, p] in &points {
            let z = apply_gauge_kernel(g, dist, q, p, &pgrid, hbar)?;
            let c = dist(q, p + g.derivative(q));
            worst = worst.max((z - c).norm());
            quantum.push(z.re);
            classical.push(c);
        }
        Ok((quantum, classical, worst))
    };
    let (quantum, classical, worst) = action(&g)?;
    let quadratic = g.is_at_most_quadratic();
    let moments = gauge_kernel_moments(&g, q0, hbar, 4)?;
    let mut rows = CsvTable::new(&["p", "kappa_re", "kappa_im"]);
    let row = gauge_wigner_kernel(&g, p0, q0, &pgrid, hbar)?;
    rows.grid_comment("p_grid", &pgrid).comment(format!("Q1: {q0}")).comment(format!("P1: {p0}"));
    for (p, z) in pgrid.points().zip(&row.values) {
        rows.push(vec![p, z.re, z.im])?;
    }
    run.csv("kernel_row.csv", &rows)?;
    let noise_floor = if quadratic {
        run.check(CheckResult::below("kernel-action", worst, cfg.tolerances.gauge));
        None
    } else {
        // same pipeline with the quadratic part of g
        let truncated = GaugeFunction::Polynomial(coeffs.iter().copied().take(3).collect());
        let (_, _, floor) = action(&truncated)?;
        run.check(CheckResult::above("kernel-action-departure", worst, 10.0 * floor));
        let m = kernel_moments(&row.values, &pgrid, row.classical_p);
        let qrow = gauge_wigner_kernel(&truncated, p0, q0, &pgrid, hbar)?;
        let mq = kernel_moments(&qrow.values, &pgrid, qrow.classical_p);
        run.check(CheckResult::above("second-moment", m[2].norm(), 10.0 * mq[2].norm()));
        Some(floor)
    };
    let report = KernelCompareReport {
        gauge: coeffs,
        quadratic,
        points,
        quantum,
        classical,
        max_difference: worst,
        exact_moments_re: moments.iter().map(|z| z.re).collect(),
        exact_moments_im: moments.iter().map(|z| z.im).collect(),
        noise_floor,
    };
    run.json("kernel_compare.json", &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic_oracle() -> ScenarioConfig {
        ScenarioConfig::from_json(
            r#"{
                "scenario": "compare-oracle",
                "potential": {"kind": "harmonic", "omega": 1.0},
                "grid": {"x_min": -8.0, "x_max": 8.0, "n_points": 256},
                "state": {"kind": "gaussian", "q0": 1.0, "p0": 0.0, "width": 0.7071067811865476},
                "times": [0.7853981633974483],
                "hbar": 1.0
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn compare_oracle_passes_and_is_deterministic() {
        let cfg = harmonic_oracle();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run_config(&cfg, Some(a.path()), 0).unwrap();
        let mb = run_config(&cfg, Some(b.path()), 0).unwrap();
        assert_eq!(ma.status, RunStatus::Passed, "{:?}", ma.checks);
        assert_eq!(ma.artifacts, mb.artifacts);
        assert!(ma.artifacts.iter().any(|x| x.file == "oracle.json"));
        let ta = fs::read(a.path().join(MANIFEST)).unwrap();
        let tb = fs::read(b.path().join(MANIFEST)).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn missing_potential_is_named() {
        let mut cfg = harmonic_oracle();
        cfg.potential = None;
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.contains("potential"), "{e}");
        let dir = tempfile::tempdir().unwrap();
        let m = run_config(&cfg, Some(dir.path()), 0).unwrap();
        assert_eq!(m.status, RunStatus::Error);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from(MANIFEST)]);
    }

    #[test]
    fn caustic_times_rejected() {
        let mut cfg = harmonic_oracle();
        cfg.times = vec![PI];
        assert!(cfg.validate().unwrap_err().to_string().contains("times"));
        cfg.times = vec![1.0, 0.5];
        assert!(cfg.validate().unwrap_err().to_string().contains("times"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let e = ScenarioConfig::from_json(r#"{"scenario": "unitarity", "hbar": 1.0, "bogus": 1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn random_state_follows_seed() {
        let s = StateConfig::RandomPackets { count: 3, width: 0.7, spread: 2.0 };
        let g = Grid1D::symmetric(10.0, 256).unwrap();
        let a = s.build(g, 1.0, 7).unwrap();
        let b = s.build(g, 1.0, 7).unwrap();
        let c = s.build(g, 1.0, 8).unwrap();
        assert_eq!(a.amplitudes(), b.amplitudes());
        assert_ne!(a.amplitudes(), c.amplitudes());
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wigner_constant_force() {
        let cfg = ScenarioConfig::from_json(
            r#"{
                "scenario": "wigner-evolve",
                "potential": {"kind": "constant-force", "a": 1.0},
                "grid": {"x_min": -8.0, "x_max": 8.0, "n_points": 512},
                "momentum_grid": {"x_min": -6.0, "x_max": 6.0, "n_points": 256},
                "state": {"kind": "gaussian", "q0": -1.0, "p0": 0.0, "width": 0.7071067811865476},
                "times": [0.5, 1.0],
                "hbar": 1.0,
                "husimi_alpha": 1.0
            }"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = run_config(&cfg, Some(dir.path()), 0).unwrap();
        assert_eq!(m.status, RunStatus::Passed, "{:?} {:?}", m.checks, m.error);
        assert!(m.artifacts.iter().any(|a| a.file == "wigner_mapped_t1.csv"));
        assert!(m.artifacts.iter().any(|a| a.file == "husimi_t1.json"));
    }

    #[test]
    fn heisenberg_and_unitarity_and_gauge() {
        let dir = tempfile::tempdir().unwrap();
        let h = ScenarioConfig::from_json(
            r#"{"scenario": "heisenberg", "potential": {"kind": "harmonic", "omega": 1.0}, "times": [0.5, 1.0, 2.0], "hbar": 1.0,
                "grid": {"x_min": -10.0, "x_max": 10.0, "n_points": 512},
                "state": {"kind": "gaussian", "q0": 1.0, "p0": 0.5, "width": 0.7071067811865476}}"#,
        )
        .unwrap();
        let m = run_config(&h, Some(dir.path()), 0).unwrap();
        assert_eq!(m.status, RunStatus::Passed, "{:?}", m.checks);

        let u = ScenarioConfig::from_json(
            r#"{"scenario": "unitarity", "potential": {"kind": "constant-force", "a": 1.0}, "times": [0.5], "hbar": 1.0,
                "grid": {"x_min": -8.0, "x_max": 8.0, "n_points": 512}}"#,
        )
        .unwrap();
        let m = run_config(&u, Some(dir.path()), 0).unwrap();
        assert_eq!(m.status, RunStatus::Passed, "{:?}", m.checks);

        let k = ScenarioConfig::from_json(
            r#"{"scenario": "kernel-compare", "gauge": [0.0, 0.0, 1.0], "hbar": 1.0,
                "momentum_grid": {"x_min": -8.0, "x_max": 8.0, "n_points": 256},
                "state": {"kind": "gaussian", "q0": 0.3, "p0": 0.0, "width": 0.8}}"#,
        )
        .unwrap();
        let m = run_config(&k, Some(dir.path()), 0).unwrap();
        assert_eq!(m.status, RunStatus::Passed, "{:?}", m.checks);
    }
}
