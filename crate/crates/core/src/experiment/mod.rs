//! Declarative experiment runner behind the `kinfrac` binary.
//!
//! A [`RunConfig`] names one experiment and optionally overrides its
//! parameters; every unset field falls back to the experiment's default.
//! [`execute`] computes the metrics and tables, [`run`] also writes them as
//! `summary.json` plus one CSV per table into the output directory.

mod operator;
mod particles;
mod solver;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{read_polygon_file, DomainSpec, GeometryError, PolygonFileError, Vec2};
use crate::grid_solver::SolverError;
use crate::kinetic_mc::{InitialDensity, McError};
use crate::nonlocal_op::OperatorError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OperatorIdentity,
    ConvexVsNonconvex,
    HAlphaBound,
    Lemma3Convergence,
    KineticSweep,
    JumpVsPde,
    SamplerTests,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::OperatorIdentity => "operator-identity",
            Self::ConvexVsNonconvex => "convex-vs-nonconvex",
            Self::HAlphaBound => "h-alpha-bound",
            Self::Lemma3Convergence => "lemma3-convergence",
            Self::KineticSweep => "kinetic-sweep",
            Self::JumpVsPde => "jump-vs-pde",
            Self::SamplerTests => "sampler-tests",
        }
    }
}

/// Domain as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DomainConfig {
    Interval {
        a: f64,
        b: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    LShape,
    /// Plain-text polygon file; relative paths resolve against the config file.
    PolygonFile {
        path: PathBuf,
    },
}

impl DomainConfig {
    pub fn unit_interval() -> Self {
        Self::Interval { a: -1.0, b: 1.0 }
    }

    pub fn unit_disk() -> Self {
        Self::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn build(&self, base: &Path) -> Result<DomainSpec<f64>, ExperimentError> {
        let v = |p: [f64; 2]| Vec2::new(p[0], p[1]);
        Ok(match self {
            Self::Interval { a, b } => DomainSpec::interval(*a, *b)?,
            Self::Disk { center, radius } => DomainSpec::disk(v(*center), *radius)?,
            Self::Polygon { vertices } => DomainSpec::polygon(vertices.iter().copied().map(v).collect())?,
            Self::LShape => DomainSpec::l_shape(),
            Self::PolygonFile { path } => {
                let full = base.join(path);
                read_polygon_file(&full).map_err(|source| ExperimentError::Polygon { path: full, source })?
            }
        })
    }

    /// Short label used in table rows.
    pub fn label(&self) -> String {
        match self {
            Self::Interval { a, b } => format!("interval[{a};{b}]"),
            Self::Disk { center, radius } => format!("disk[{};{};{radius}]", center[0], center[1]),
            Self::Polygon { vertices } => format!("polygon[{}]", vertices.len()),
            Self::LShape => "l_shape".into(),
            Self::PolygonFile { path } => format!("polygon_file[{}]", path.display()),
        }
    }
}

/// One run. Unset fields take the experiment's defaults, which reproduce the
/// acceptance runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub domains: Option<Vec<DomainConfig>>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    /// Exponents of the grid-solver checks in jump-vs-pde.
    #[serde(default)]
    pub solver_alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub r_min: Option<Vec<f64>>,
    #[serde(default)]
    pub particles: Option<usize>,
    /// Cells along the longer side of the bounding box, 1D domains.
    #[serde(default)]
    pub grid_cells: Option<usize>,
    /// Same for 2D domains.
    #[serde(default)]
    pub grid_cells_2d: Option<usize>,
    #[serde(default)]
    pub refinement_levels: Option<Vec<usize>>,
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub n_dir: Option<usize>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub quadrature_resolution: Option<usize>,
    #[serde(default)]
    pub initial_density: Option<InitialDensity<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            experiment: Some(kind),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn kind(&self) -> Result<ExperimentKind, ExperimentError> {
        self.experiment
            .ok_or_else(|| ExperimentError::Config("missing field `experiment`".into()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.kind()?;
        let bad = |m: String| Err(ExperimentError::Config(m));
        for list in [&self.alphas, &self.solver_alphas] {
            if let Some(a) = list.as_ref().and_then(|v| v.iter().find(|a| !(**a > 0.0 && **a < 2.0))) {
                return bad(format!("alpha must lie in (0, 2), got {a}"));
            }
            if list.as_ref().is_some_and(|v| v.is_empty()) {
                return bad("alpha lists must not be empty".into());
            }
        }
        for (name, list) in [("eps", &self.eps), ("r_min", &self.r_min)] {
            if let Some(x) = list.as_ref().and_then(|v| v.iter().find(|x| !(**x > 0.0))) {
                return bad(format!("{name} values must be positive, got {x}"));
            }
            if list.as_ref().is_some_and(|v| v.is_empty()) {
                return bad(format!("{name} must not be empty"));
            }
        }
        if matches!(self.t_final, Some(t) if !(t > 0.0)) {
            return bad("t_final must be positive".into());
        }
        for (name, n) in [
            ("particles", self.particles),
            ("points", self.points),
            ("samples", self.samples),
            ("quadrature_resolution", self.quadrature_resolution),
        ] {
            if n == Some(0) {
                return bad(format!("{name} must be at least 1"));
            }
        }
        for (name, n) in [("grid_cells", self.grid_cells), ("grid_cells_2d", self.grid_cells_2d)] {
            if matches!(n, Some(c) if c < 8) {
                return bad(format!("{name} must be at least 8"));
            }
        }
        if matches!(self.n_dir, Some(n) if n < 16 || n % 2 == 1) {
            return bad("n_dir must be even and at least 16".into());
        }
        if let Some(levels) = &self.refinement_levels {
            if levels.len() < 2 || levels.windows(2).any(|w| w[1] != 2 * w[0]) {
                return bad("refinement_levels must double from one entry to the next".into());
            }
        }
        Ok(())
    }

    fn domains_or(&self, default: impl FnOnce() -> Vec<DomainConfig>) -> Vec<DomainConfig> {
        self.domains.clone().unwrap_or_else(default)
    }

    fn alphas_or(&self, default: &[f64]) -> Vec<f64> {
        self.alphas.clone().unwrap_or_else(|| default.to_vec())
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Polygon { path: PathBuf, source: PolygonFileError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
}

impl ExperimentError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    /// Reported only.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Metric {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: Some(threshold),
            comparison: Comparison::AtMost,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: Some(threshold),
            comparison: Comparison::AtLeast,
            pass: value >= threshold,
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: None,
            comparison: Comparison::Info,
            pass: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Real(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Self::Text(s) => s.clone(),
            Self::Int(k) => k.to_string(),
            // 17 significant digits round-trip every f64
            Self::Real(x) => format!("{x:.16e}"),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Self::Int(k as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Real(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ExperimentError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| ExperimentError::io(path, e.into()))?;
        let err = |e: csv::Error| ExperimentError::io(path, e.into());
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(err)?;
        }
        w.flush().map_err(|e| ExperimentError::io(path, e))
    }
}

/// Everything an experiment produced.
#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
    /// Free-form details for the summary, such as matrix assembly statistics.
    pub details: serde_json::Map<String, serde_json::Value>,
    pub wall_seconds: f64,
}

impl Report {
    fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            metrics: Vec::new(),
            tables: Vec::new(),
            details: serde_json::Map::new(),
            wall_seconds: 0.0,
        }
    }

    pub fn pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn metrics_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Metric> + 'a {
        self.metrics.iter().filter(move |m| m.name.starts_with(prefix))
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("detail serializes");
        self.details.insert(key.to_string(), v);
    }

    /// One line per metric, for terminals and logs.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for m in &self.metrics {
            let verdict = match (m.comparison, m.pass) {
                (Comparison::Info, _) => "info",
                (_, true) => "pass",
                (_, false) => "FAIL",
            };
            let bound = match (m.comparison, m.threshold) {
                (Comparison::AtMost, Some(t)) => format!(" (<= {t:e})"),
                (Comparison::AtLeast, Some(t)) => format!(" (>= {t:e})"),
                _ => String::new(),
            };
            let _ = writeln!(s, "{verdict:>4}  {} = {:e}{bound}", m.name, m.value);
        }
        s
    }
}

/// Computes an experiment without touching the file system.
///
/// `base` is the directory relative polygon file paths resolve against.
pub fn execute(config: &RunConfig, base: &Path) -> Result<Report, ExperimentError> {
    config.validate()?;
    let kind = config.kind()?;
    let start = Instant::now();
    let mut report = Report::new(kind);
    match kind {
        ExperimentKind::OperatorIdentity => operator::identity(config, base, &mut report)?,
        ExperimentKind::ConvexVsNonconvex => operator::convexity(config, base, &mut report)?,
        ExperimentKind::HAlphaBound => operator::h_alpha_bound(config, base, &mut report)?,
        ExperimentKind::Lemma3Convergence => operator::lemma3(config, base, &mut report)?,
        ExperimentKind::KineticSweep => particles::kinetic_sweep(config, base, &mut report)?,
        ExperimentKind::JumpVsPde => particles::jump_vs_pde(config, base, &mut report)?,
        ExperimentKind::SamplerTests => particles::sampler_tests(config, &mut report)?,
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    pass: bool,
    wall_seconds: f64,
    seed: u64,
    config: &'a RunConfig,
    metrics: &'a [Metric],
    details: &'a serde_json::Map<String, serde_json::Value>,
    files: Vec<String>,
}

/// Where [`run`] writes: the config's `output_dir` resolved against `base`,
/// else `out/<experiment>` in the working directory.
pub fn output_dir(config: &RunConfig, base: &Path) -> PathBuf {
    match &config.output_dir {
        Some(dir) => base.join(dir),
        None => PathBuf::from("out").join(config.kind().map(ExperimentKind::name).unwrap_or("run")),
    }
}

/// Executes and writes `summary.json` plus one CSV per table.
pub fn run(config: &RunConfig, base: &Path) -> Result<Report, ExperimentError> {
    let report = execute(config, base)?;
    let dir = output_dir(config, base);
    std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
    let mut files = Vec::new();
    for table in &report.tables {
        let name = format!("{}.csv", table.name);
        table.write_csv(&dir.join(&name))?;
        files.push(name);
    }
    let summary = Summary {
        experiment: report.experiment.name(),
        pass: report.pass(),
        wall_seconds: report.wall_seconds,
        seed: config.seed(),
        config,
        metrics: &report.metrics,
        details: &report.details,
        files,
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, text + "\n").map_err(|e| ExperimentError::io(&path, e))?;
    Ok(report)
}

/// |a − b| / max(|a|, |b|), zero when both vanish.
pub(crate) fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Uniform density on the middle half of the bounding box.
pub(crate) fn central_uniform(domain: &DomainSpec<f64>) -> InitialDensity<f64> {
    let (lo, hi) = domain.bounding_box();
    let q = (hi - lo) * 0.25;
    InitialDensity::Uniform { lo: lo + q, hi: hi - q }
}
