//! Command-line front end.
//!
//! Every command produces one [`Output`]: a few summary lines plus a table.
//! `--format csv` writes only the table (header row first), `json` writes both,
//! `table` aligns the columns with floats at 4 decimals.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    compare_growth, default_radii, exp_radii, field_bound_report, order_bound_report, BoundReport,
    GrowthFit, SlackRule,
};
use crate::detsum::{
    inverse_det_sum_curve, normalized_inverse_det_sum, normalized_truncated_sums, truncated_curve,
    truncated_sum_curve, DEFAULT_ORBIT_WORK,
};
use crate::error::{Error, Result};
use crate::lattice::{canonical_embedding_lattice, MatrixLattice, DEFAULT_BUDGET};
use crate::numberfield::{
    catalog_lookup, residue_constant, unit_density_constant, Catalog, NumberField,
};
use crate::qoalgebra::{
    algebra_lookup, central_unit_floor, orthogonality_check, principal_ideal_index, order_lattice,
    AlgebraElement, CyclicAlgebraCode,
};
use crate::units::units_in_ball;
use crate::zeta::{ideal_count_cumulative, ideal_counts, truncated_zeta};

/// Exit status for usage errors.
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "invdet", version, about = "Inverse determinant sums of number-field and quasi-orthogonal lattice codes")]
struct Cli {
    /// Output format
    #[arg(long, value_enum, default_value = "table", global = true)]
    format: Format,
    /// Write the output to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Maximum number of lattice points a direct enumeration may visit
    #[arg(long, env = "INVDET_BUDGET", default_value_t = DEFAULT_BUDGET, global = true)]
    budget: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Radii given explicitly or as the grid `M = e^t`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct RadiiSpec {
    /// Ball radii M (comma separated)
    #[arg(long = "radius", value_delimiter = ',', num_args = 1..)]
    pub radius: Vec<f64>,
    /// First t of the grid M = e^t
    #[arg(long)]
    pub t_start: Option<f64>,
    /// Last t of the grid (inclusive)
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Step of the grid in t
    #[arg(long)]
    pub t_step: Option<f64>,
}

impl RadiiSpec {
    fn is_grid(&self) -> bool {
        self.t_start.is_some() || self.t_end.is_some() || self.t_step.is_some()
    }

    fn validate(&self, required: bool) -> Result<()> {
        if !self.radius.is_empty() && self.is_grid() {
            return Err(Error::InvalidArgument("give either --radius or a t grid, not both".into()));
        }
        if self.is_grid() {
            let (Some(a), Some(b)) = (self.t_start, self.t_end) else {
                return Err(Error::InvalidArgument("a t grid needs --t-start and --t-end".into()));
            };
            let step = self.t_step.unwrap_or(0.5);
            if !(step > 0.0) || !(b >= a) {
                return Err(Error::InvalidArgument(format!("empty t grid {a}..{b} step {step}")));
            }
        } else if required && self.radius.is_empty() {
            return Err(Error::InvalidArgument("no radii given (use --radius or --t-start/--t-end)".into()));
        }
        if self.radius.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("radii must be positive and finite".into()));
        }
        Ok(())
    }

    /// The radii, or `default` when nothing was given.
    fn resolve(&self, default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
        if self.is_grid() {
            exp_radii(self.t_start.unwrap_or(3.0), self.t_end.unwrap_or(3.0), self.t_step.unwrap_or(0.5))
        } else if self.radius.is_empty() {
            default()
        } else {
            self.radius.clone()
        }
    }
}

/// Field or algebra selector; algebras also accept a path to a TOML description.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct Target {
    /// Catalog field name
    #[arg(long)]
    pub field: Option<String>,
    /// Built-in algebra name or path to an algebra TOML file
    #[arg(long)]
    pub algebra: Option<String>,
}

impl Target {
    fn validate(&self) -> Result<()> {
        match (&self.field, &self.algebra) {
            (Some(_), Some(_)) => Err(Error::InvalidArgument("give either --field or --algebra, not both".into())),
            (None, None) => Err(Error::InvalidArgument("one of --field or --algebra is required".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SlackArgs {
    /// Lower verdict factor: pass if measured >= factor * lower term
    #[arg(long, default_value_t = 0.5)]
    pub lower_slack: f64,
    /// Upper verdict factor: pass if measured <= factor * upper term
    #[arg(long, default_value_t = 2.0)]
    pub upper_slack: f64,
    /// Radii with log M below this are flagged pre-asymptotic
    #[arg(long, default_value_t = 4.0)]
    pub asymptotic_log: f64,
}

impl Default for SlackArgs {
    fn default() -> Self {
        let s = SlackRule::default();
        SlackArgs { lower_slack: s.lower_factor, upper_slack: s.upper_factor, asymptotic_log: s.asymptotic_log }
    }
}

impl SlackArgs {
    fn rule(&self) -> SlackRule {
        SlackRule { lower_factor: self.lower_slack, upper_factor: self.upper_slack, asymptotic_log: self.asymptotic_log }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower_slack > 0.0 && self.lower_slack <= 1.0) || !(self.upper_slack >= 1.0) {
            return Err(Error::InvalidArgument("slack factors need 0 < lower <= 1 <= upper".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Catalog fields
    #[command(subcommand)]
    Field(FieldCommand),
    /// Lattice geometry
    #[command(subcommand)]
    Lattice(LatticeCommand),
    /// Truncated Dedekind zeta value; CSV columns n,z,cumulative,zeta1
    Zeta {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Sum over ideals of norm at most this
        #[arg(long)]
        limit: u64,
    },
    /// Ideal counts against alpha_K h_K M; CSV columns M,count,main_term,abs_error,relative_error
    Ideals {
        #[arg(long)]
        field: String,
        /// Norm bounds (comma separated)
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        limit: Vec<u64>,
    },
    /// Units in a Frobenius ball; CSV columns M,count,predicted,residual,complete
    Units {
        #[arg(long)]
        field: String,
        #[command(flatten)]
        radii: RadiiSpec,
    },
    /// Inverse determinant sums; CSV columns M,m,value,point_count,min_abs_det (+ det_cap,tail_bound with --truncated)
    Detsum {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        radii: RadiiSpec,
        /// Exponent m
        #[arg(long)]
        m: f64,
        /// Report Vol^(mn/k) S(M Vol^(1/k))
        #[arg(long)]
        normalized: bool,
        /// With --normalized: scale the value but not the radius
        #[arg(long, requires = "normalized")]
        legacy: bool,
        /// Determinant-truncated orbit sums with a certified tail
        #[arg(long)]
        truncated: bool,
        /// Point budget of the orbit table for --truncated
        #[arg(long, default_value_t = DEFAULT_ORBIT_WORK)]
        work: u64,
    },
    /// Quasi-orthogonal algebra codes
    #[command(subcommand)]
    Qo(QoCommand),
    /// Normalized sum curves of an algebra code and a diagonal code; CSV columns M,t,qo,nf,ratio
    Compare {
        /// Algebra of the quasi-orthogonal code
        #[arg(long)]
        qo: String,
        /// Field of the diagonal code
        #[arg(long)]
        nf: String,
        /// Receive antennas; the exponent is 2 n_r
        #[arg(long, default_value_t = 2)]
        nr: u32,
        #[command(flatten)]
        radii: RadiiSpec,
        #[arg(long, default_value_t = DEFAULT_ORBIT_WORK)]
        work: u64,
    },
    /// Finite-radius bound verdicts; CSV columns M,log_M,measured,measured_slack,lower_term,upper_term,lower_ok,upper_ok,pre_asymptotic
    Report {
        #[command(flatten)]
        target: Target,
        /// Exponent m (fields)
        #[arg(long)]
        m: Option<f64>,
        /// Receive antennas (algebras)
        #[arg(long)]
        nr: Option<u32>,
        #[command(flatten)]
        radii: RadiiSpec,
        #[command(flatten)]
        slack: SlackArgs,
        /// Long-format CSV (M,series,value) for plotting
        #[arg(long)]
        long: bool,
        #[arg(long, default_value_t = DEFAULT_ORBIT_WORK)]
        work: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldCommand {
    /// Invariants and derived constants; CSV columns property,value
    Info {
        /// Catalog name (omit to list the catalog)
        #[arg(long)]
        field: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeCommand {
    /// Rank, volume and normalization; CSV columns property,value
    Vol {
        #[command(flatten)]
        target: Target,
        /// Exponent for the normalization factor
        #[arg(long)]
        m: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QoCommand {
    /// Structural checks of an algebra code; CSV columns property,value
    Check {
        #[arg(long)]
        algebra: String,
        /// Radius of the ball searched for the minimum determinant
        #[arg(long, default_value_t = 4.0)]
        probe_radius: f64,
    },
    /// S^(2 n_r) of the order code; CSV columns as for detsum
    Detsum {
        #[arg(long)]
        algebra: String,
        #[arg(long, default_value_t = 2)]
        nr: u32,
        #[command(flatten)]
        radii: RadiiSpec,
        #[arg(long)]
        truncated: bool,
        #[arg(long, default_value_t = DEFAULT_ORBIT_WORK)]
        work: u64,
    },
}

/// Fully parsed invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub budget: u64,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn parse_from<I, T>(argv: I) -> std::result::Result<RunConfig, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let cli = Cli::try_parse_from(argv)?;
        Ok(RunConfig { command: cli.command, format: cli.format, out: cli.out, budget: cli.budget, threads: cli.threads })
    }

    /// Rejects inconsistent option combinations before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        match &self.command {
            Command::Field(_) => Ok(()),
            Command::Lattice(LatticeCommand::Vol { target, m }) => {
                target.validate()?;
                check_exponent(*m)
            }
            Command::Zeta { s, limit, .. } => {
                if !(*s >= 1.0) {
                    return Err(Error::InvalidArgument(format!("s must be at least 1, got {s}")));
                }
                if *limit == 0 {
                    return Err(Error::InvalidArgument("--limit must be positive".into()));
                }
                Ok(())
            }
            Command::Ideals { limit, .. } => {
                if limit.contains(&0) {
                    return Err(Error::InvalidArgument("norm bounds must be positive".into()));
                }
                Ok(())
            }
            Command::Units { radii, .. } => radii.validate(true),
            Command::Detsum { target, radii, m, truncated, legacy, .. } => {
                target.validate()?;
                radii.validate(true)?;
                check_exponent(Some(*m))?;
                if *truncated && *legacy {
                    return Err(Error::InvalidArgument("--legacy is not available with --truncated".into()));
                }
                Ok(())
            }
            Command::Qo(QoCommand::Check { probe_radius, .. }) => {
                if !(*probe_radius >= 1.0) {
                    return Err(Error::InvalidArgument("--probe-radius must be at least 1".into()));
                }
                Ok(())
            }
            Command::Qo(QoCommand::Detsum { nr, radii, .. }) => {
                check_antennas(*nr)?;
                radii.validate(true)
            }
            Command::Compare { nr, radii, .. } => {
                check_antennas(*nr)?;
                radii.validate(false)
            }
            Command::Report { target, m, nr, radii, slack, .. } => {
                target.validate()?;
                radii.validate(false)?;
                slack.validate()?;
                match (&target.field, m, nr) {
                    (Some(_), Some(_), None) => check_exponent(*m),
                    (Some(_), _, _) => Err(Error::InvalidArgument("field reports take --m and no --nr".into())),
                    (None, None, Some(nr)) => check_antennas(*nr),
                    (None, _, _) => Err(Error::InvalidArgument("algebra reports take --nr and no --m".into())),
                }
            }
        }
    }
}

fn check_exponent(m: Option<f64>) -> Result<()> {
    match m {
        Some(m) if !(m > 0.0) || !m.is_finite() => Err(Error::InvalidArgument(format!("m must be positive, got {m}"))),
        _ => Ok(()),
    }
}

fn check_antennas(nr: u32) -> Result<()> {
    if nr == 0 {
        return Err(Error::InvalidArgument("--nr must be positive".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// output

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i128),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // `Display` for f64 is the shortest representation that round-trips
            Cell::Float(x) => x.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn human(&self) -> String {
        match self {
            Cell::Float(x) if x.is_finite() && (x.abs() >= 1e9 || (*x != 0.0 && x.abs() < 1e-4)) => format!("{x:.4e}"),
            Cell::Float(x) => format!("{x:.4}"),
            other => other.csv(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::Int(i) => match i64::try_from(*i) {
                Ok(v) => v.into(),
                Err(_) => i.to_string().into(),
            },
            Cell::Bool(b) => (*b).into(),
            Cell::Text(s) => s.clone().into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i128)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i128)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x as i128)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub summary: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Output {
    fn new(columns: &[&str]) -> Self {
        Output { summary: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn note(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.to_string(), value.into()));
    }

    fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn properties() -> Self {
        Output::new(&["property", "value"])
    }

    fn property(&mut self, key: &str, value: impl Into<Cell>) {
        self.row(vec![key.into(), value.into()]);
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(Cell::csv))?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
            }
            Format::Json => {
                let summary: serde_json::Map<_, _> = self.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|r| self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect::<serde_json::Map<_, _>>().into())
                    .collect();
                let doc = serde_json::json!({ "summary": summary, "rows": rows });
                Ok(serde_json::to_string_pretty(&doc)? + "\n")
            }
            Format::Table => {
                let mut s = String::new();
                for (k, v) in &self.summary {
                    s.push_str(&format!("{k}: {}\n", v.human()));
                }
                if self.columns.is_empty() {
                    return Ok(s);
                }
                if !self.summary.is_empty() {
                    s.push('\n');
                }
                let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::human).collect()).collect();
                let widths: Vec<usize> = (0..self.columns.len())
                    .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len()]).max().unwrap_or(0))
                    .collect();
                // text columns left-aligned, numbers right-aligned
                let left: Vec<bool> = (0..self.columns.len())
                    .map(|j| self.rows.iter().any(|r| matches!(r[j], Cell::Text(_))))
                    .collect();
                let line = |items: &[String]| {
                    let padded: Vec<String> = items
                        .iter()
                        .zip(widths.iter().zip(&left))
                        .map(|(c, (&w, &l))| if l { format!("{c:<w$}") } else { format!("{c:>w$}") })
                        .collect();
                    padded.join("  ").trim_end().to_string()
                };
                s.push_str(&line(&self.columns));
                s.push('\n');
                for r in &cells {
                    s.push_str(&line(r));
                    s.push('\n');
                }
                Ok(s)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// commands

enum Code {
    Field(Arc<NumberField>),
    Algebra(Arc<CyclicAlgebraCode>),
}

impl Code {
    fn load(target: &Target) -> Result<Code> {
        match (&target.field, &target.algebra) {
            (Some(f), None) => Ok(Code::Field(catalog_lookup(f)?)),
            (None, Some(a)) => Ok(Code::Algebra(algebra_lookup(a)?)),
            _ => Err(Error::InvalidArgument("one of --field or --algebra is required".into())),
        }
    }

    fn lattice(&self) -> Result<MatrixLattice> {
        match self {
            Code::Field(k) => canonical_embedding_lattice(k),
            Code::Algebra(a) => order_lattice(a),
        }
    }

    fn name(&self) -> &str {
        match self {
            Code::Field(k) => k.name(),
            Code::Algebra(a) => a.name(),
        }
    }
}

/// Runs a validated configuration and returns its output.
pub fn execute(cfg: &RunConfig) -> Result<Output> {
    cfg.validate()?;
    let budget = cfg.budget;
    match &cfg.command {
        Command::Field(FieldCommand::Info { field }) => field_info(field.as_deref()),
        Command::Lattice(LatticeCommand::Vol { target, m }) => lattice_vol(target, *m),
        Command::Zeta { field, s, limit } => zeta(field, *s, *limit),
        Command::Ideals { field, limit } => ideals(field, limit),
        Command::Units { field, radii } => units(field, &radii.resolve(Vec::new)),
        Command::Detsum { target, radii, m, normalized, legacy, truncated, work } => {
            let code = Code::load(target)?;
            let lattice = code.lattice()?;
            let radii = radii.resolve(Vec::new);
            detsum(&lattice, &radii, *m, *normalized, *legacy, *truncated, *work, budget)
        }
        Command::Qo(QoCommand::Check { algebra, probe_radius }) => qo_check(algebra, *probe_radius, budget),
        Command::Qo(QoCommand::Detsum { algebra, nr, radii, truncated, work }) => {
            let a = algebra_lookup(algebra)?;
            let lattice = order_lattice(&a)?;
            let mut out = detsum(&lattice, &radii.resolve(Vec::new), 2.0 * *nr as f64, false, false, *truncated, *work, budget)?;
            out.summary.insert(0, ("algebra".into(), a.name().into()));
            out.summary.insert(1, ("receive_antennas".into(), (*nr as u64).into()));
            Ok(out)
        }
        Command::Compare { qo, nf, nr, radii, work } => compare(qo, nf, *nr, radii, *work, budget),
        Command::Report { target, m, nr, radii, slack, long, work } => {
            let code = Code::load(target)?;
            let report = match &code {
                Code::Field(k) => {
                    let radii = radii.resolve(|| default_radii(k.degree()));
                    field_bound_report(k, m.expect("validated"), &radii, slack.rule(), *work, budget)?
                }
                Code::Algebra(a) => {
                    let radii = radii.resolve(|| default_radii(4 * a.center_degree()));
                    order_bound_report(a, nr.expect("validated"), &radii, slack.rule(), *work, budget)?
                }
            };
            Ok(report_output(&report, *long))
        }
    }
}

fn field_info(name: Option<&str>) -> Result<Output> {
    let Some(name) = name else {
        let mut out = Output::new(&["field", "degree", "signature", "discriminant"]);
        for n in Catalog::builtin().names() {
            let k = catalog_lookup(n)?;
            let (r1, r2) = k.signature();
            out.row(vec![n.into(), k.degree().into(), format!("({r1},{r2})").into(), k.discriminant().into()]);
        }
        return Ok(out);
    };
    let k = catalog_lookup(name)?;
    let (r1, r2) = k.signature();
    let mut out = Output::properties();
    out.property("name", k.name());
    out.property("polynomial", format!("{:?}", k.polynomial()));
    out.property("degree", k.degree());
    out.property("signature", format!("({r1},{r2})"));
    out.property("discriminant", k.discriminant());
    out.property("class_number", k.class_number());
    out.property("regulator", k.regulator());
    out.property("roots_of_unity", k.roots_of_unity() as u64);
    if k.is_totally_real() {
        out.property("roots_of_unity_note", "counts +1 and -1");
    }
    out.property("unit_rank", k.unit_rank());
    out.property("alpha_K", residue_constant(&k));
    if k.is_totally_real() || k.is_totally_complex() {
        out.property("embedding_dimension", k.embedding_dimension());
        out.property("N_K", unit_density_constant(&k, k.embedding_dimension())?);
    }
    for (j, u) in k.fundamental_units().iter().enumerate() {
        out.property(&format!("fundamental_unit_{}", j + 1), format!("{u:?}"));
    }
    Ok(out)
}

fn lattice_vol(target: &Target, m: Option<f64>) -> Result<Output> {
    let code = Code::load(target)?;
    let lattice = code.lattice()?;
    let mut out = Output::properties();
    out.property("code", code.name());
    out.property("rank", lattice.rank());
    out.property("matrix_size", lattice.matrix_size());
    out.property("volume", lattice.volume());
    if let Some(m) = m {
        let f = lattice.normalization_factor(m);
        out.property("m", m);
        out.property("normalization_scale", f.scale);
        out.property("radius_factor", f.radius_factor);
    }
    Ok(out)
}

fn zeta(field: &str, s: f64, limit: u64) -> Result<Output> {
    let k = catalog_lookup(field)?;
    let table = ideal_counts(&k, limit)?;
    let z = truncated_zeta(&table, s, limit)?;
    let mut out = Output::new(&["n", "z", "cumulative", "zeta1"]);
    out.note("field", k.name());
    out.note("s", s);
    out.note("limit", limit);
    out.note("value", z.value);
    out.note("tail_bound", z.tail_bound);
    let mut cumulative = 0u64;
    for n in 1..=limit {
        cumulative += table.z(n) as u64;
        out.row(vec![n.into(), (table.z(n) as u64).into(), cumulative.into(), table.partial_zeta(1.0, n).into()]);
    }
    Ok(out)
}

fn ideals(field: &str, limits: &[u64]) -> Result<Output> {
    let k = catalog_lookup(field)?;
    let max = limits.iter().copied().max().unwrap_or(1);
    let table = ideal_counts(&k, max)?;
    let mut out = Output::new(&["M", "count", "main_term", "abs_error", "relative_error"]);
    out.note("field", k.name());
    for &m in limits {
        let c = ideal_count_cumulative(&k, &table, m);
        out.row(vec![m.into(), c.count.into(), c.main_term.into(), c.abs_error.into(), c.relative_error.into()]);
    }
    Ok(out)
}

fn units(field: &str, radii: &[f64]) -> Result<Output> {
    let k = catalog_lookup(field)?;
    let mut out = Output::new(&["M", "count", "predicted", "residual", "complete"]);
    out.note("field", k.name());
    for &r in radii {
        let u = units_in_ball(&k, r)?;
        out.row(vec![r.into(), u.count.into(), u.predicted.into(), u.residual.into(), u.complete.into()]);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn detsum(
    lattice: &MatrixLattice,
    radii: &[f64],
    m: f64,
    normalized: bool,
    legacy: bool,
    truncated: bool,
    work: u64,
    budget: u64,
) -> Result<Output> {
    if truncated {
        let sums = if normalized {
            normalized_truncated_sums(lattice, radii, m, work, budget)?
        } else {
            truncated_sum_curve(lattice, radii, m, work, budget)?
        };
        let mut out = Output::new(&["M", "m", "value", "point_count", "min_abs_det", "det_cap", "tail_bound"]);
        for s in sums {
            out.row(vec![
                s.radius.into(),
                m.into(),
                s.value.into(),
                s.point_count.into(),
                s.min_abs_det.into(),
                s.det_cap.into(),
                s.tail_bound.into(),
            ]);
        }
        return Ok(out);
    }
    let rows = if normalized {
        radii.iter().map(|&r| normalized_inverse_det_sum(lattice, r, m, legacy, budget)).collect::<Result<Vec<_>>>()?
    } else {
        inverse_det_sum_curve(lattice, radii, m, budget)?
    };
    let mut out = Output::new(&["M", "m", "value", "point_count", "min_abs_det"]);
    for s in rows {
        out.row(vec![s.radius.into(), m.into(), s.value.into(), s.point_count.into(), s.min_abs_det.into()]);
    }
    Ok(out)
}

fn qo_check(name: &str, probe_radius: f64, budget: u64) -> Result<Output> {
    let a = algebra_lookup(name)?;
    let lattice = order_lattice(&a)?;
    let mut out = Output::properties();
    out.property("algebra", a.name());
    out.property("center", a.center().name());
    out.property("quadratic", a.quadratic().name());
    out.property("gamma", format!("{:?}", a.gamma()));
    out.property("division", a.division_certificate().statement.clone());
    out.property("natural_order", a.is_natural_order());
    out.property("rank", lattice.rank());
    out.property("matrix_size", lattice.matrix_size());
    out.property("volume", lattice.volume());
    let one_plus_u = AlgebraElement::one(&a).add(&AlgebraElement::u(&a))?;
    let idx = principal_ideal_index(&one_plus_u)?;
    out.property("index_of_1_plus_u", idx.index.to_string());
    out.property("abs_det_of_1_plus_u", idx.abs_det.to_string());
    // orthogonality over all pairs of basis elements of E
    let e = a.compositum().degree();
    let mut worst = 0.0f64;
    for i in 0..e {
        for j in 0..e {
            let x = a.compositum().basis_vector(i);
            let y = a.compositum().basis_vector(j);
            worst = worst.max(orthogonality_check(&a, &x, &y)?.defect);
        }
    }
    out.property("max_orthogonality_defect", worst);
    let (min_det, at) = lattice.min_determinant_in_ball(probe_radius, budget)?;
    out.property("probe_radius", probe_radius);
    out.property("min_abs_det", min_det);
    out.property("min_abs_det_at", format!("{:?}", at.coords));
    let floor = central_unit_floor(&a, &lattice, probe_radius, budget)?;
    out.property("det_one_points", floor.det_one_points);
    out.property("central_units", floor.central_units);
    Ok(out)
}

fn compare(qo: &str, nf: &str, nr: u32, radii: &RadiiSpec, work: u64, budget: u64) -> Result<Output> {
    let a = algebra_lookup(qo)?;
    let k = catalog_lookup(nf)?;
    let m = 2.0 * nr as f64;
    let qo_lattice = order_lattice(&a)?;
    let nf_lattice = canonical_embedding_lattice(&k)?;
    if qo_lattice.matrix_size() != nf_lattice.matrix_size() {
        return Err(Error::DimensionMismatch { expected: qo_lattice.matrix_size(), got: nf_lattice.matrix_size() });
    }
    let radii = radii.resolve(|| exp_radii(3.0, 8.0, 1.0));
    let qo_sums = normalized_truncated_sums(&qo_lattice, &radii, m, work, budget)?;
    let nf_sums = normalized_truncated_sums(&nf_lattice, &radii, m, work, budget)?;
    let qo_curve = truncated_curve(a.name(), &qo_sums, true);
    let nf_curve = truncated_curve(k.name(), &nf_sums, true);
    let cmp = compare_growth(&qo_curve, &nf_curve)?;
    let mut out = Output::new(&["M", "t", "qo", "nf", "ratio"]);
    out.note("qo", a.name());
    out.note("nf", k.name());
    out.note("m", m);
    note_fit(&mut out, "qo", cmp.qo_fit.as_ref());
    note_fit(&mut out, "nf", cmp.nf_fit.as_ref());
    out.note("ratio_increasing", cmp.ratio_increasing);
    let tail = qo_sums.iter().chain(&nf_sums).map(|s| s.tail_bound / s.value).fold(0.0, f64::max);
    out.note("max_relative_tail", tail);
    for (i, &r) in radii.iter().enumerate() {
        out.row(vec![r.into(), r.ln().into(), qo_sums[i].value.into(), nf_sums[i].value.into(), cmp.ratios[i].into()]);
    }
    Ok(out)
}

fn note_fit(out: &mut Output, label: &str, fit: Option<&GrowthFit>) {
    match fit {
        Some(f) => {
            out.note(&format!("{label}_exponent"), f.exponent);
            out.note(&format!("{label}_prefactor"), f.prefactor);
        }
        None => out.note(&format!("{label}_exponent"), "unavailable (radius span too short)"),
    }
}

fn report_output(report: &BoundReport, long: bool) -> Output {
    let mut out = if long {
        Output::new(&["M", "series", "value"])
    } else {
        Output::new(&[
            "M",
            "log_M",
            "measured",
            "measured_slack",
            "lower_term",
            "upper_term",
            "lower_ok",
            "upper_ok",
            "pre_asymptotic",
        ])
    };
    out.note("label", report.label.clone());
    out.note("proposition", report.proposition.clone());
    out.note("lower", report.lower_formula.clone());
    out.note("upper", report.upper_formula.clone());
    out.note("slack", format!("{} / {}", report.slack.lower_factor, report.slack.upper_factor));
    for (i, n) in report.notes.iter().enumerate() {
        out.note(&format!("note_{}", i + 1), n.clone());
    }
    out.note("asymptotic_pass", report.asymptotic_pass());
    for r in &report.rows {
        if long {
            let mut series = vec![("measured", r.measured), ("measured_slack", r.measured_slack), ("lower", r.lower_term)];
            if let Some(u) = r.upper_term {
                series.push(("upper", u));
            }
            for (name, v) in series {
                out.row(vec![r.radius.into(), name.into(), v.into()]);
            }
        } else {
            out.row(vec![
                r.radius.into(),
                r.log_radius.into(),
                r.measured.into(),
                r.measured_slack.into(),
                r.lower_term.into(),
                r.upper_term.into(),
                r.lower_ok.into(),
                r.upper_ok.into(),
                r.pre_asymptotic.into(),
            ]);
        }
    }
    out
}

/// Parses `argv`, runs the command and writes the output. Returns the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run_config(&cfg, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

/// Executes a parsed configuration on a dedicated thread pool and writes the rendered output.
pub fn run_config(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let output = pool.install(|| execute(cfg))?;
    let text = output.render(cfg.format)?;
    match &cfg.out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}
