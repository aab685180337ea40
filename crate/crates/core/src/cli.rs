//! Command-line front end.
//!
//! Every command builds its states from a JSON family spec, evaluates on the
//! requested backend and writes one CSV or JSON file with a manifest. With
//! `--backend both` the primary (analytic) values are recomputed on the number
//! basis at seeded sample cells and the run fails with exit code 3 if they
//! disagree beyond `--tolerance`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::catalog::{self, Backend, State, StateSpec};
use crate::circuits::{self, Detector};
use crate::dynamics::{self, BeamSplitterSpec, DampingBackend, DampingConvention, DampingRun};
use crate::fock::{CutoffProfile, DEFAULT_TAIL_TOLERANCE};
use crate::io::{self, Format, Manifest, Table};
use crate::metrology::{self, AlgebraSpec};
use crate::stats::{self, GridAxis};
use crate::{LabError, LabResult, C64};

const DEFAULT_STATE: &str = r#"{"family":"HCS","n":2,"alpha":1.0,"sign":"+"}"#;

#[derive(Parser, Debug)]
#[command(name = "hcslab", version, about = "Cat-state statistics, entanglement, metrology and circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Photon-number distribution P(n⃗) on a box.
    Pnd {
        #[command(flatten)]
        common: Common,
        /// Largest photon number per mode
        #[arg(long, default_value_t = 20)]
        max_n: usize,
    },
    /// Mandel Q of one mode over an α grid.
    Mandel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        mode: usize,
    },
    /// S_E and ΔS_E of B(θ)ψ(α) over an (α, θ) grid.
    EntropyScan {
        #[command(flatten)]
        common: Common,
    },
    /// Reduced entropy under amplitude damping over an (α, t) grid.
    Damp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = ConventionArg::Paper)]
        convention: ConventionArg,
        /// Modes kept in the reduced state
        #[arg(long, value_delimiter = ',', default_value = "0")]
        keep: Vec<usize>,
    },
    /// Maximal 1-local variance, QFI and usefulness ratio; `--grid` sweeps α.
    Metrology {
        #[command(flatten)]
        common: Common,
        /// h3, h4 or sl2
        #[arg(long, default_value = "h3")]
        algebra: String,
    },
    /// Run a generation protocol or a custom op list.
    Circuit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Protocol::QubitMediated)]
        protocol: Protocol,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, value_enum, default_value_t = DetectArg::Mode2)]
        detect: DetectArg,
        /// Drop the second qubit CNOT (ablation)
        #[arg(long)]
        skip_second_cnot: bool,
        /// Op list for `custom`, inline JSON or a file
        #[arg(long)]
        ops: Option<String>,
        /// Target state for the `custom` fidelity
        #[arg(long)]
        target: Option<String>,
    },
    /// Husimi Q over a grid of β.
    Qfunc {
        #[command(flatten)]
        common: Common,
    },
    /// Wigner function of a set of modes over a grid of γ.
    Wigner {
        #[command(flatten)]
        common: Common,
        /// Modes to keep; default all
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<usize>>,
    },
    /// Bargmann function over a grid of z.
    Bargmann {
        #[command(flatten)]
        common: Common,
        /// Largest outermost-shell contribution accepted for number-basis series
        #[arg(long, default_value_t = 1e-10)]
        tail: f64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// State family spec, inline JSON or a path
    #[arg(long)]
    pub state: Option<String>,
    /// Override the spec's `alpha`
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Default: analytic when the state has coherent labels, else fock
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Comma-separated axes `start:stop:count`
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Output path; stdout when absent or `-`
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Number-basis cutoff, one value for every mode or one per mode
    #[arg(long, value_delimiter = ',')]
    pub cutoff: Option<Vec<usize>>,
    /// Seed for picking cross-check cells
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted backend disagreement
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Cross-check cells for `--backend both`
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Analytic,
    Fock,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    /// Jump rate 2Γ
    Paper,
    /// Jump rate Γ
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    #[value(alias = "fig5")]
    PhotonLoss,
    #[value(alias = "fig6")]
    QubitMediated,
    DirectRoute,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DetectArg {
    Mode2,
    Mode4,
}

/// Parse and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Execute a parsed command, returning the rendered file contents.
pub fn render(command: &Command) -> LabResult<String> {
    let (common, manifest, output) = dispatch(command)?;
    output.render(&manifest, common.format)
}

pub fn execute(command: &Command) -> LabResult<()> {
    let text = render(command)?;
    let common = common_of(command);
    io::write_output(common.out.as_deref(), &text)
}

fn common_of(command: &Command) -> &Common {
    match command {
        Command::Pnd { common, .. }
        | Command::Mandel { common, .. }
        | Command::EntropyScan { common }
        | Command::Damp { common, .. }
        | Command::Metrology { common, .. }
        | Command::Circuit { common, .. }
        | Command::Qfunc { common }
        | Command::Wigner { common, .. }
        | Command::Bargmann { common, .. } => common,
    }
}

fn dispatch(command: &Command) -> LabResult<(&Common, Manifest, Output)> {
    let common = common_of(command);
    let (manifest, output) = match command {
        Command::Pnd { max_n, .. } => cmd_pnd(common, *max_n)?,
        Command::Mandel { mode, .. } => cmd_mandel(common, *mode)?,
        Command::EntropyScan { .. } => cmd_entropy_scan(common)?,
        Command::Damp { gamma, convention, keep, .. } => cmd_damp(common, *gamma, *convention, keep)?,
        Command::Metrology { algebra, .. } => cmd_metrology(common, algebra)?,
        Command::Circuit { protocol, eps, phi, detect, skip_second_cnot, ops, target, .. } => cmd_circuit(
            common,
            CircuitArgs {
                protocol: *protocol,
                eps: *eps,
                phi: *phi,
                detect: *detect,
                skip: *skip_second_cnot,
                ops: ops.as_deref(),
                target: target.as_deref(),
            },
        )?,
        Command::Qfunc { .. } => cmd_phase_space(common, PhaseSpace::Q)?,
        Command::Wigner { modes, .. } => cmd_phase_space(common, PhaseSpace::Wigner(modes.clone()))?,
        Command::Bargmann { tail, .. } => cmd_phase_space(common, PhaseSpace::Bargmann(*tail))?,
    };
    Ok((common, manifest, output))
}

// ---------------------------------------------------------------- plumbing

/// A table plus extra named values (cross-checks, fits, full reports).
pub struct Output {
    pub table: Table,
    pub extras: BTreeMap<String, Value>,
}

impl Output {
    fn new(table: Table) -> Self {
        Self { table, extras: BTreeMap::new() }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    /// CSV puts extras on `# key: value` lines after the manifest.
    pub fn render(&self, manifest: &Manifest, format: Format) -> LabResult<String> {
        match format {
            Format::Csv => {
                let csv = self.table.to_csv(manifest)?;
                let split = csv.find('\n').map_or(csv.len(), |i| i + 1);
                let mut out = csv[..split].to_string();
                for (k, v) in &self.extras {
                    out.push_str(&format!("# {k}: {}\n", serde_json::to_string(v)?));
                }
                out.push_str(&csv[split..]);
                Ok(out)
            }
            Format::Json => {
                self.table.check_finite()?;
                let mut data = serde_json::Map::new();
                data.insert("columns".into(), json!(self.table.columns));
                data.insert("rows".into(), json!(self.table.rows));
                for (k, v) in &self.extras {
                    data.insert(k.clone(), v.clone());
                }
                io::json_document(manifest, Value::Object(data))
            }
        }
    }
}

enum Mode {
    Single(Backend),
    Both,
}

impl Mode {
    fn primary(&self) -> Backend {
        match self {
            Mode::Single(b) => *b,
            Mode::Both => Backend::Analytic,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Mode::Single(b) => b.name(),
            Mode::Both => "both",
        }
    }
}

/// Inline JSON when the argument starts with `{` or `[`, otherwise a file path.
fn read_json_arg(arg: &str) -> LabResult<String> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        std::fs::read_to_string(arg).map_err(|e| LabError::Config(format!("cannot read {arg}: {e}")))
    }
}

/// The state spec as a JSON template whose `alpha` may be replaced per grid point.
struct Template {
    spec: Value,
}

impl Template {
    fn from_common(common: &Common) -> LabResult<Self> {
        let text = match &common.state {
            Some(s) => read_json_arg(s)?,
            None => DEFAULT_STATE.to_string(),
        };
        // validate once up front
        StateSpec::from_json(&text)?;
        let spec: Value = serde_json::from_str(&text)?;
        let t = Self { spec };
        match common.alpha {
            Some(a) => Ok(Self { spec: t.with_alpha(a)? }),
            None => Ok(t),
        }
    }

    fn with_alpha(&self, alpha: f64) -> LabResult<Value> {
        let mut v = self.spec.clone();
        match v.get_mut("alpha") {
            Some(slot) => *slot = json!(alpha),
            None => return Err(LabError::Config("state family has no `alpha` parameter to vary".into())),
        }
        Ok(v)
    }

    fn spec_at(&self, alpha: Option<f64>) -> LabResult<StateSpec> {
        let v = match alpha {
            Some(a) => self.with_alpha(a)?,
            None => self.spec.clone(),
        };
        Ok(serde_json::from_value(v).map_err(|e| LabError::Config(format!("bad state spec: {e}")))?)
    }

    fn state_at(&self, alpha: Option<f64>, backend: Backend, cutoffs: Option<&[usize]>) -> LabResult<State> {
        let s = catalog::build(&self.spec_at(alpha)?)?;
        let prof = profile_for(cutoffs, s.num_modes())?;
        s.on_backend(backend, prof.as_ref())
    }

    fn has_coherent_form(&self) -> LabResult<bool> {
        Ok(matches!(catalog::build(&self.spec_at(None)?)?, State::Coherent(_)))
    }
}

fn profile_for(cutoffs: Option<&[usize]>, modes: usize) -> LabResult<Option<CutoffProfile>> {
    match cutoffs {
        None => Ok(None),
        Some([c]) => Ok(Some(CutoffProfile::uniform(modes, *c)?)),
        Some(cs) if cs.len() == modes => Ok(Some(CutoffProfile::new(cs.to_vec(), DEFAULT_TAIL_TOLERANCE)?)),
        Some(cs) => Err(LabError::InvalidCutoff(format!("{} cutoffs for {modes} modes", cs.len()))),
    }
}

fn resolve_mode(common: &Common, template: &Template) -> LabResult<Mode> {
    let coherent = template.has_coherent_form()?;
    match common.backend {
        None if coherent => Ok(Mode::Single(Backend::Analytic)),
        None => Ok(Mode::Single(Backend::Fock)),
        Some(BackendArg::Analytic) => Ok(Mode::Single(Backend::Analytic)),
        Some(BackendArg::Fock) => Ok(Mode::Single(Backend::Fock)),
        Some(BackendArg::Both) if coherent => Ok(Mode::Both),
        Some(BackendArg::Both) => {
            Err(LabError::Config("`both` needs a state with coherent labels; use --backend fock".into()))
        }
    }
}

fn base_manifest(command: &str, common: &Common, template: &Template, mode: &Mode) -> Manifest {
    let mut m = Manifest::new(command, mode.name()).with_state(&template.spec);
    if let Some(c) = &common.cutoff {
        m.cutoffs = c.clone();
    }
    if matches!(mode, Mode::Both) {
        m.seed = Some(common.seed);
        m = m.with_tolerance("cross_check", common.tolerance).with_parameter("samples", common.samples);
    }
    if let Some(g) = &common.grid {
        m = m.with_parameter("grid", g);
    }
    m
}

fn axes_or(common: &Common, default: &[GridAxis]) -> LabResult<Vec<GridAxis>> {
    match &common.grid {
        Some(g) => GridAxis::parse_list(g),
        None => Ok(default.to_vec()),
    }
}

/// Cartesian product, last axis fastest.
fn grid_points(axes: &[GridAxis]) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for a in axes {
        let vs = a.values();
        pts = pts.into_iter().flat_map(|p| vs.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    pts
}

fn table_of(columns: &[String], points: &[Vec<f64>], values: &[Vec<f64>]) -> Table {
    let mut t = Table::new(columns);
    for (p, v) in points.iter().zip(values) {
        t.push([p.as_slice(), v.as_slice()].concat());
    }
    t
}

/// Recompute seeded sample cells with `check` and compare against `primary`.
fn cross_check<F>(common: &Common, points: &[Vec<f64>], primary: &[Vec<f64>], check: F) -> LabResult<Value>
where
    F: Fn(&[f64]) -> LabResult<Vec<f64>> + Sync,
{
    let mut idx: Vec<usize> = if points.len() <= common.samples {
        (0..points.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
        rand::seq::index::sample(&mut rng, points.len(), common.samples).into_vec()
    };
    idx.sort_unstable();
    let devs = idx
        .par_iter()
        .map(|&i| {
            let other = check(&points[i])?;
            Ok(primary[i].iter().zip(&other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<LabResult<Vec<f64>>>()?;
    let worst = devs.iter().copied().fold(0.0, f64::max);
    io::ensure_finite(&devs)?;
    if worst > common.tolerance {
        return Err(LabError::Tolerance(format!(
            "backends disagree by {worst:e} > {:e} at sampled cells",
            common.tolerance
        )));
    }
    Ok(json!({ "cells": idx, "deviations": devs, "max_deviation": worst }))
}

fn grid_command<F>(
    common: &Common,
    mode: &Mode,
    columns: Vec<String>,
    points: Vec<Vec<f64>>,
    eval: F,
) -> LabResult<Output>
where
    F: Fn(Backend, &[f64]) -> LabResult<Vec<f64>> + Sync,
{
    let primary = points.par_iter().map(|p| eval(mode.primary(), p)).collect::<LabResult<Vec<_>>>()?;
    let out = Output::new(table_of(&columns, &points, &primary));
    match mode {
        Mode::Both => Ok(out.with("cross_check", cross_check(common, &points, &primary, |p| eval(Backend::Fock, p))?)),
        Mode::Single(_) => Ok(out),
    }
}

fn mode_labels(prefix: &str, modes: usize) -> Vec<String> {
    match modes {
        1 => vec![prefix.to_string()],
        2 if prefix == "n" => vec!["n".into(), "m".into()],
        _ => (1..=modes).map(|k| format!("{prefix}{k}")).collect(),
    }
}

// ---------------------------------------------------------------- commands

fn cmd_pnd(common: &Common, max_n: usize) -> LabResult<(Manifest, Output)> {
    let template = Template::from_common(common)?;
    let mode = resolve_mode(common, &template)?;
    let cut = common.cutoff.as_deref();
    let state = template.state_at(None, mode.primary(), cut)?;
    let n = state.num_modes();
    let dist = stats::photon_number_distribution(&state, &vec![max_n; n])?;
    let mut cols = mode_labels("n", n);
    cols.push("P".into());
    let mut t = Table::new(&cols);
    for (levels, p) in dist.rows() {
        let mut row: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
        row.push(p);
        t.push(row);
    }
    let mut m = base_manifest("pnd", common, &template, &mode).with_parameter("max_n", max_n);
    if let State::Fock(f) = &state {
        m.cutoffs = f.cutoffs().cutoffs().to_vec();
    }
    let mut out = Output::new(t).with("total", json!(dist.total()));
    if let Mode::Both = mode {
        let fock = stats::photon_number_distribution(&template.state_at(None, Backend::Fock, cut)?, &vec![max_n; n])?;
        let worst = dist.probabilities.iter().zip(&fock.probabilities).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if worst > common.tolerance {
            return Err(LabError::Tolerance(format!("backends disagree by {worst:e}")));
        }
        out = out.with("cross_check", json!({ "cells": "all", "max_deviation": worst }));
    }
    Ok((m, out))
}

fn cmd_mandel(common: &Common, mode_index: usize) -> LabResult<(Manifest, Output)> {
    let template = Template::from_common(common)?;
    let mode = resolve_mode(common, &template)?;
    let axes = axes_or(common, &[GridAxis::new(0.05, 3.0, 60)?])?;
    if axes.len() != 1 {
        return Err(LabError::Config("mandel takes a single α axis".into()));
    }
    let mut alphas = Vec::new();
    for a in axes[0].values() {
        if a.abs() < 1e-12 {
            eprintln!("warning: skipping α = 0, Q_M is undefined for the vacuum");
        } else {
            alphas.push(vec![a]);
        }
    }
    let cut = common.cutoff.clone();
    let out = grid_command(common, &mode, vec!["alpha".into(), "Q_M".into()], alphas, |b, p| {
        Ok(vec![stats::mandel_q(&template.state_at(Some(p[0]), b, cut.as_deref())?, mode_index)?])
    })?;
    Ok((base_manifest("mandel", common, &template, &mode).with_parameter("mode", mode_index), out))
}

fn cmd_entropy_scan(common: &Common) -> LabResult<(Manifest, Output)> {
    let template = Template::from_common(common)?;
    let mode = resolve_mode(common, &template)?;
    let pi = std::f64::consts::PI;
    let axes = axes_or(common, &[GridAxis::new(0.2, 3.0, 29)?, GridAxis::new(0.1, pi - 0.1, 30)?])?;
    if axes.len() != 2 {
        return Err(LabError::Config("entropy-scan takes α and θ axes".into()));
    }
    let cut = common.cutoff.clone();
    let cols = ["alpha", "theta", "S_E", "dS_E"].map(String::from).to_vec();
    let out = grid_command(common, &mode, cols, grid_points(&axes), |b, p| {
        let psi = template.state_at(Some(p[0]), b, cut.as_deref())?;
        let out = dynamics::apply_beam_splitter(&psi, &BeamSplitterSpec::symmetric(0, 1, p[1]))?;
        let spec = dynamics::reduced_spectrum(&out, &[0])?;
        Ok(vec![spec.entropy(), spec.fluctuation()?])
    })?;
    Ok((base_manifest("entropy-scan", common, &template, &mode).with_parameter("beam_splitter", "symmetric(0,1)"), out))
}

fn cmd_damp(common: &Common, gamma: f64, convention: ConventionArg, keep: &[usize]) -> LabResult<(Manifest, Output)> {
    let template = Template::from_common(common)?;
    let mode = resolve_mode(common, &template)?;
    let axes = axes_or(common, &[GridAxis::new(1.0, 2.5, 16)?, GridAxis::new(0.0, 9.0, 19)?])?;
    if axes.len() != 2 {
        return Err(LabError::Config("damp takes α and t axes".into()));
    }
    let convention = match convention {
        ConventionArg::Paper => DampingConvention::PaperDisplay,
        ConventionArg::Unit => DampingConvention::UnitRate,
    };
    let engine = |b: Backend| match b {
        Backend::Analytic => DampingBackend::Analytic,
        Backend::Fock => DampingBackend::Numeric,
    };
    let cut = common.cutoff.clone();
    // the state stays on coherent labels; the engine choice decides the backend
    let trajectory = |b: Backend, alpha: f64, times: Vec<f64>| -> LabResult<Vec<[f64; 2]>> {
        let label = if template.has_coherent_form()? { Backend::Analytic } else { Backend::Fock };
        let psi = template.state_at(Some(alpha), label, cut.as_deref())?;
        let mut run = DampingRun::new(gamma, times, engine(b))?.with_convention(convention);
        if let Some(p) = profile_for(cut.as_deref(), psi.num_modes())? {
            run = run.with_cutoffs(p);
        }
        let pts = dynamics::damping_entropy_trajectory(&psi, run, keep)?;
        Ok(pts.iter().map(|p| [p.entropy, p.fluctuation]).collect())
    };
    let ts = axes[1].values();
    let rows = axes[0]
        .values()
        .par_iter()
        .map(|&a| trajectory(mode.primary(), a, ts.clone()))
        .collect::<LabResult<Vec<_>>>()?;
    let points = grid_points(&axes);
    let primary: Vec<Vec<f64>> = rows.concat().into_iter().map(|v| v.to_vec()).collect();
    let cols = ["alpha", "t", "S_E", "dS_E"].map(String::from).to_vec();
    let mut out = Output::new(table_of(&cols, &points, &primary));
    if let Mode::Both = mode {
        let check = cross_check(common, &points, &primary, |p| Ok(trajectory(Backend::Fock, p[0], vec![p[1]])?[0].to_vec()))?;
        out = out.with("cross_check", check);
    }
    let m = base_manifest("damp", common, &template, &mode)
        .with_parameter("gamma", gamma)
        .with_parameter("convention", convention)
        .with_parameter("keep", keep);
    Ok((m, out))
}

fn metrology_point(template: &Template, alpha: Option<f64>, b: Backend, cut: Option<&[usize]>, alg: &AlgebraSpec) -> LabResult<metrology::MetrologyReport> {
    let spec = template.spec_at(alpha)?;
    let psi = template.state_at(alpha, b, cut)?;
    let branches = catalog::branches(&spec)?;
    match (b, branches) {
        (_, None) => metrology::metrology_report(&psi, &[] as &[State], alg),
        (Backend::Analytic, Some(br)) => metrology::metrology_report(&psi, &br, alg),
        (Backend::Fock, Some(br)) => {
            let prof = match psi {
                State::Fock(ref f) => f.cutoffs().clone(),
                State::Coherent(_) => unreachable!("fock backend yields number-basis states"),
            };
            let fb = br.iter().map(|s| s.to_fock(&prof)).collect::<LabResult<Vec<_>>>()?;
            metrology::metrology_report(&psi, &fb, alg)
        }
    }
}

fn cmd_metrology(common: &Common, algebra: &str) -> LabResult<(Manifest, Output)> {
    let template = Template::from_common(common)?;
    let mode = resolve_mode(common, &template)?;
    let alg = AlgebraSpec::by_name(algebra)?;
    let cut = common.cutoff.clone();
    let m = base_manifest("metrology", common, &template, &mode).with_parameter("algebra", algebra);
    let scalars = |r: &metrology::MetrologyReport| vec![r.total_photon_number, r.max_variance, r.qfi, r.nrf.unwrap_or(0.0)];
    match &common.grid {
        None => {
            let r = metrology_point(&template, None, mode.primary(), cut.as_deref(), &alg)?;
            let mut out = scalar_output(&serde_json::to_value(&r)?)?.with("report", serde_json::to_value(&r)?);
            if let Mode::Both = mode {
                let f = metrology_point(&template, None, Backend::Fock, cut.as_deref(), &alg)?;
                let check = cross_check(common, &[vec![]], &[scalars(&r)], |_| Ok(scalars(&f)))?;
                out = out.with("cross_check", check);
            }
            Ok((m, out))
        }
        Some(_) => {
            let axes = axes_or(common, &[])?;
            if axes.len() != 1 {
                return Err(LabError::Config("metrology sweeps a single α axis".into()));
            }
            let points: Vec<Vec<f64>> = axes[0].values().into_iter().map(|a| vec![a]).collect();
            let cols = ["alpha", "total_n", "max_variance", "qfi", "nrf"].map(String::from).to_vec();
            let out = grid_command(common, &mode, cols, points, |b, p| {
                Ok(scalars(&metrology_point(&template, Some(p[0]), b, cut.as_deref(), &alg)?))
            })?;
            let a2: Vec<f64> = out.table.rows.iter().map(|r| r[0] * r[0]).collect();
            let nrf: Vec<f64> = out.table.rows.iter().map(|r| r[4]).collect();
            let out = if nrf.iter().all(|&v| v > 0.0) && a2.len() > 1 {
                let e = metrology::fit_loglog_exponent(&a2, &nrf)?;
                out.with("nrf_exponent_vs_alpha2", json!(e))
            } else {
                out
            };
            Ok((m, out))
        }
    }
}

/// One-row table of the numeric top-level fields of a report.
fn scalar_output(v: &Value) -> LabResult<Output> {
    let obj = v.as_object().ok_or_else(|| LabError::Config("report is not an object".into()))?;
    let mut cols = Vec::new();
    let mut row = Vec::new();
    for (k, x) in obj {
        if let Some(f) = x.as_f64() {
            cols.push(k.clone());
            row.push(f);
        } else if let Some(b) = x.as_bool() {
            cols.push(k.clone());
            row.push(b as u8 as f64);
        }
    }
    let mut t = Table::new(&cols);
    t.push(row);
    Ok(Output::new(t))
}

struct CircuitArgs<'a> {
    protocol: Protocol,
    eps: f64,
    phi: f64,
    detect: DetectArg,
    skip: bool,
    ops: Option<&'a str>,
    target: Option<&'a str>,
}

fn cmd_circuit(common: &Common, a: CircuitArgs) -> LabResult<(Manifest, Output)> {
    let detector = match a.detect {
        DetectArg::Mode2 => Detector::Mode2,
        DetectArg::Mode4 => Detector::Mode4,
    };
    let alpha = common.alpha.unwrap_or(1.0);
    let proto = a.protocol.to_possible_value().expect("no skipped variants").get_name().to_string();
    let mut m = Manifest::new("circuit", "").with_parameter("protocol", &proto);
    if let Some(g) = &common.grid {
        m = m.with_parameter("grid", g);
    }
    let sweep = |label: &str, f: &(dyn Fn(f64) -> LabResult<Value> + Sync)| -> LabResult<Output> {
        let axes = axes_or(common, &[])?;
        if axes.len() != 1 {
            return Err(LabError::Config(format!("circuit sweeps a single {label} axis")));
        }
        let reports = axes[0].values().par_iter().map(|&x| f(x)).collect::<LabResult<Vec<Value>>>()?;
        let first = scalar_output(&reports[0])?;
        let mut t = Table::new(&first.table.columns);
        for r in &reports {
            t.push(scalar_output(r)?.table.rows.remove(0));
        }
        Ok(Output::new(t).with("sweep_axis", json!(label)))
    };
    let single = |v: Value| -> LabResult<Output> { Ok(scalar_output(&v)?.with("report", v)) };
    let out = match a.protocol {
        Protocol::PhotonLoss => {
            m.backend = "analytic".into();
            m = m.with_parameter("alpha", alpha).with_parameter("phi", a.phi).with_parameter("detector", detector);
            let f = |eps: f64| -> LabResult<Value> {
                Ok(serde_json::to_value(circuits::coherent_photon_loss_protocol(alpha, eps, a.phi, detector)?)?)
            };
            if common.grid.is_some() {
                sweep("eps", &f)?
            } else {
                m = m.with_parameter("eps", a.eps);
                single(f(a.eps)?)?
            }
        }
        Protocol::QubitMediated => {
            m.backend = "fock".into();
            m = m.with_parameter("skip_second_cnot", a.skip);
            let cut = common.cutoff.as_ref().and_then(|c| c.first().copied());
            let f = |al: f64| -> LabResult<Value> {
                let k = cut.unwrap_or_else(|| circuits::field_cutoff(al));
                Ok(serde_json::to_value(circuits::qubit_mediated_generation_with(al, k, a.skip)?)?)
            };
            if common.grid.is_some() {
                sweep("alpha", &f)?
            } else {
                m = m.with_parameter("alpha", alpha);
                single(f(alpha)?)?
            }
        }
        Protocol::DirectRoute => {
            m.backend = "fock".into();
            let f = |al: f64| -> LabResult<Value> { Ok(serde_json::to_value(circuits::direct_preparation_route(al)?)?) };
            if common.grid.is_some() {
                sweep("alpha", &f)?
            } else {
                m = m.with_parameter("alpha", alpha);
                single(f(alpha)?)?
            }
        }
        Protocol::Custom => {
            let template = Template::from_common(common)?;
            let mode = resolve_mode(common, &template)?;
            if let Mode::Both = mode {
                return Err(LabError::Config("custom circuits run on one backend".into()));
            }
            let ops_text = read_json_arg(a.ops.ok_or_else(|| LabError::Config("custom circuit needs --ops".into()))?)?;
            let ops = circuits::parse_circuit(&ops_text)?;
            let psi = template.state_at(None, mode.primary(), common.cutoff.as_deref())?;
            let outcome = circuits::run_circuit(&psi, &ops)?;
            let mut report = serde_json::Map::new();
            report.insert("success_weight".into(), json!(outcome.success_weight));
            report.insert("num_modes".into(), json!(outcome.state.num_modes()));
            if let Some(t) = a.target {
                let spec = StateSpec::from_json(&read_json_arg(t)?)?;
                let f = outcome.state.fidelity(&catalog::build(&spec)?)?;
                report.insert("fidelity".into(), json!(f));
            }
            m = base_manifest("circuit", common, &template, &mode).with_parameter("protocol", &proto);
            m = m.with_parameter("ops", serde_json::from_str::<Value>(&ops_text)?);
            single(Value::Object(report))?
        }
    };
    Ok((m, out))
}

enum PhaseSpace {
    Q,
    Wigner(Option<Vec<usize>>),
    Bargmann(f64),
}

fn cmd_phase_space(common: &Common, kind: PhaseSpace) -> LabResult<(Manifest, Output)> {
    let template = Template::from_common(common)?;
    let mode = resolve_mode(common, &template)?;
    let cut = common.cutoff.as_deref();
    let primary_state = template.state_at(None, mode.primary(), cut)?;
    let n = primary_state.num_modes();
    let fock_state = match mode {
        Mode::Both => Some(template.state_at(None, Backend::Fock, cut)?),
        Mode::Single(_) => None,
    };
    let (command, coord, k, names) = match &kind {
        PhaseSpace::Q => ("qfunc", "beta", n, vec!["Q"]),
        PhaseSpace::Wigner(ms) => ("wigner", "gamma", ms.as_ref().map_or(n, |v| v.len()), vec!["W"]),
        PhaseSpace::Bargmann(_) => ("bargmann", "z", n, vec!["re", "im"]),
    };
    let modes: Vec<usize> = match &kind {
        PhaseSpace::Wigner(Some(ms)) => ms.clone(),
        _ => (0..n).collect(),
    };
    let axes = stats::expand_complex_axes(&axes_or(common, &[GridAxis::new(-2.0, 2.0, 21)?])?, k)?;
    let mut cols = stats::complex_labels(coord, k);
    cols.extend(names.iter().map(|s| s.to_string()));
    let eval = |b: Backend, p: &[f64]| -> LabResult<Vec<f64>> {
        let s = match (b, &fock_state) {
            (Backend::Fock, Some(f)) => f,
            _ => &primary_state,
        };
        let z: Vec<C64> = stats::complex_coordinates(p);
        Ok(match &kind {
            PhaseSpace::Q => vec![stats::husimi_q(s, &z)?],
            PhaseSpace::Wigner(_) => vec![stats::wigner(s, &modes, &z)?],
            PhaseSpace::Bargmann(tol) => {
                let f = stats::bargmann(s, &z, *tol)?;
                vec![f.re, f.im]
            }
        })
    };
    let out = grid_command(common, &mode, cols, grid_points(&axes), eval)?;
    let mut m = base_manifest(command, common, &template, &mode);
    if let PhaseSpace::Bargmann(tol) = kind {
        m = m.with_tolerance("series_tail", tol);
    }
    if let PhaseSpace::Wigner(_) = kind {
        m = m.with_parameter("modes", &modes);
    }
    if let State::Fock(f) = fock_state.as_ref().unwrap_or(&primary_state) {
        m.cutoffs = f.cutoffs().cutoffs().to_vec();
    }
    Ok((m, out))
}
