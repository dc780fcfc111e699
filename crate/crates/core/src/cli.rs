//! Command-line experiments: argument types, the subcommand runner and
//! CSV/JSON emission.
//!
//! Exit status: 0 on success, 1 when a numerical flag is raised (outputs
//! are still written), 2 on configuration errors.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cavity::cavity_metrics;
use crate::deformation::{catalog, Deformation};
use crate::energy::{check_admissibility_sampled, limit_energy_with, Density, Lambdas, LimitTolerances};
use crate::error::{Error, Result};
use crate::geometry::{Confinement, Domain, FlawConfig, Vec2};
use crate::minimize::{gamma_sweep, minimize_radial_with, MinimizeOptions, RadialProblem};
use crate::recovery::{default_r_rule, recovery_energy_table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FLAGGED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "cavicore",
    version,
    about = "Core-radius cavitation energies in 2D elasticity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cavity volume and perimeter on shrinking circles around the flaw of a
    /// catalog example, with the extrapolated limit.
    ExampleSweep(ExampleSweepArgs),
    /// Limit energy of a catalog example (JSON report).
    LimitEnergy(LimitEnergyArgs),
    /// Minimize the radially reduced regularized energy (CSV profile).
    MinimizeRadial(MinimizeArgs),
    /// Minimal regularized energies over decreasing core radii.
    GammaSweep(GammaSweepArgs),
    /// Energies of the recovery sequence of a catalog example.
    Recovery(RecoveryArgs),
    /// Sampled admissibility report for a catalog example (JSON).
    Check(CheckArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ExampleArgs {
    /// Catalog key: radial, change-of-reference, superposition or spike.
    #[arg(long, default_value = "radial")]
    pub example: String,
    /// Cavity parameter of the example.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    /// Stored-energy density: default or power. Defaults depend on the
    /// subcommand.
    #[arg(long)]
    pub density: Option<String>,
    /// Exponent of `|F|`
    #[arg(long)]
    pub p: Option<f64>,
    /// Exponent of `det F` (power density only)
    #[arg(long)]
    pub q: Option<f64>,
}

impl DensityArgs {
    fn resolve(&self, default: Density) -> Result<Density> {
        let (name, p0, q0) = match default {
            Density::Default { p } => ("default", p, 1.5),
            Density::Power { p, q } => ("power", p, q),
        };
        let name = self.density.as_deref().unwrap_or(name);
        Density::by_name(name, self.p.unwrap_or(p0), self.q.unwrap_or(q0))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LambdaArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda_v: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_p: f64,
}

impl LambdaArgs {
    fn resolve(&self) -> Result<Lambdas> {
        Lambdas::new(self.lambda_v, self.lambda_p)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LimitArgs {
    /// Perimeter-convergence tolerance.
    #[arg(long, default_value_t = 1e-2)]
    pub conv_perimeter_tol: f64,
    /// Relative extrapolation-uncertainty tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub extrapolation_tol: f64,
    /// Extrapolated volume below which no cavity is opened.
    #[arg(long, default_value_t = 1e-6)]
    pub no_cavity_volume: f64,
}

impl LimitArgs {
    fn resolve(&self) -> LimitTolerances {
        LimitTolerances {
            conv_perimeter: self.conv_perimeter_tol,
            extrapolation: self.extrapolation_tol,
            no_cavity_volume: self.no_cavity_volume,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExampleSweepArgs {
    #[command(flatten)]
    pub example: ExampleArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    pub radii: Vec<f64>,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct LimitEnergyArgs {
    #[command(flatten)]
    pub example: ExampleArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    pub radii: Vec<f64>,
    #[command(flatten)]
    pub density: DensityArgs,
    #[command(flatten)]
    pub lambdas: LambdaArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ProblemArgs {
    #[arg(long, default_value_t = 1.0)]
    pub outer_radius: f64,
    /// Affine boundary datum `x ↦ stretch · x`.
    #[arg(long, default_value_t = 2.0)]
    pub stretch: f64,
    /// Number of profile segments.
    #[arg(long, default_value_t = 32)]
    pub k: usize,
    #[command(flatten)]
    pub density: DensityArgs,
    #[command(flatten)]
    pub lambdas: LambdaArgs,
    /// Projected-gradient stopping tolerance.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iterations: usize,
}

impl ProblemArgs {
    fn resolve(&self, eps: f64) -> Result<(RadialProblem, MinimizeOptions)> {
        let density = self.density.resolve(Density::Default { p: 2.0 })?;
        let prob = RadialProblem::new(
            eps,
            self.outer_radius,
            self.stretch * self.outer_radius,
            density,
            self.lambdas.resolve()?,
            self.k,
        )?;
        if !(self.tol > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "tol must be positive and max-iterations nonzero".into(),
            ));
        }
        let opts = MinimizeOptions {
            tol: self.tol,
            max_iterations: self.max_iterations,
            ..MinimizeOptions::default()
        };
        Ok((prob, opts))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MinimizeArgs {
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GammaSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    pub eps: Vec<f64>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Relative slack allowed when checking that gaps do not increase.
    #[arg(long, default_value_t = 0.05)]
    pub gap_tol: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RecoveryArgs {
    #[command(flatten)]
    pub example: ExampleArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    pub eps: Vec<f64>,
    #[command(flatten)]
    pub density: DensityArgs,
    #[command(flatten)]
    pub lambdas: LambdaArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub example: ExampleArgs,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Test-circle radii around the flaw; `ε, 2ε, 3ε` when omitted.
    #[arg(long, value_delimiter = ',')]
    pub radii: Vec<f64>,
    /// Lattice points per side.
    #[arg(long, default_value_t = 40)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Density used for the catalog examples unless overridden: point cavities
/// have finite energy only for exponents below the dimension.
pub const EXAMPLE_DENSITY: Density = Density::Power { p: 1.2, q: 1.2 };

/// Text produced by a run and whether a numerical flag was raised.
#[derive(Debug)]
pub struct Outcome {
    pub body: String,
    pub flags: Vec<String>,
}

/// Hex SHA-256 of the JSON-serialized configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("configuration serializes");
    hex::encode(Sha256::digest(&json))
}

fn csv_text<R: Serialize>(rows: &[R], hash: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let mut bytes = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
    writeln!(bytes, "# config-hash={hash}")?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_text<R: Serialize>(report: &R, hash: &str) -> Result<String> {
    #[derive(Serialize)]
    struct Wrapped<'a, R> {
        config_hash: &'a str,
        #[serde(flatten)]
        report: &'a R,
    }
    let mut s = serde_json::to_string_pretty(&Wrapped {
        config_hash: hash,
        report,
    })?;
    s.push('\n');
    Ok(s)
}

fn example(args: &ExampleArgs) -> Result<(Arc<dyn Deformation>, Vec2)> {
    let y = catalog(&args.example, args.b)?;
    let a = y.singular_points().first().copied().unwrap_or(Vec2::ZERO);
    Ok((y, a))
}

#[derive(Serialize)]
struct SweepCsvRow {
    row: &'static str,
    r: Option<f64>,
    volume: f64,
    perimeter: f64,
    samples: Option<usize>,
    uncertainty_volume: Option<f64>,
    uncertainty_perimeter: Option<f64>,
    flag: String,
}

fn example_sweep(args: &ExampleSweepArgs, hash: &str) -> Result<Outcome> {
    let (y, a) = example(&args.example)?;
    let tols = args.limits.resolve();
    let cavity = crate::energy::limit_cavity(y.as_ref(), a, &args.radii, &tols)?;
    let mut rows = Vec::new();
    for i in 0..cavity.radii.len() {
        let m = cavity_metrics(y.as_ref(), a, cavity.radii[i])?;
        rows.push(SweepCsvRow {
            row: "trace",
            r: Some(cavity.radii[i]),
            volume: cavity.volumes[i],
            perimeter: cavity.perimeters[i],
            samples: Some(m.samples),
            uncertainty_volume: None,
            uncertainty_perimeter: None,
            flag: if m.converged {
                String::new()
            } else {
                "not converged".into()
            },
        });
    }
    let mut flags = Vec::new();
    if cavity.conv_perimeter_violated {
        flags.push("conv-perimeter violated".to_string());
    }
    if cavity.uncertain {
        flags.push("extrapolation uncertain".to_string());
    }
    rows.push(SweepCsvRow {
        row: "limit",
        r: None,
        volume: cavity.volume.limit,
        perimeter: cavity.perimeter.limit,
        samples: None,
        uncertainty_volume: Some(cavity.volume.uncertainty),
        uncertainty_perimeter: Some(cavity.perimeter.uncertainty),
        flag: flags.join("; "),
    });
    if let Some(c) = cavity.analytic {
        rows.push(SweepCsvRow {
            row: "analytic",
            r: None,
            volume: c.volume,
            perimeter: c.perimeter,
            samples: None,
            uncertainty_volume: None,
            uncertainty_perimeter: None,
            flag: format!("perimeter gap {:.6}", cavity.perimeter.limit - c.perimeter),
        });
    }
    Ok(Outcome {
        body: csv_text(&rows, hash)?,
        flags,
    })
}

fn limit_energy_cmd(args: &LimitEnergyArgs, hash: &str) -> Result<Outcome> {
    let (y, a) = example(&args.example)?;
    let density = args.density.resolve(EXAMPLE_DENSITY)?;
    let lambdas = args.lambdas.resolve()?;
    let tols = args.limits.resolve();
    let dom = Domain::new(y.domain().outer);
    let report = limit_energy_with(y.as_ref(), &[a], &dom, &density, lambdas, &args.radii, &tols)?;
    let mut flags = Vec::new();
    if report.conv_perimeter_violated() {
        flags.push("conv-perimeter violated".to_string());
    }
    if report.cavities.iter().any(|c| c.uncertain) {
        flags.push("extrapolation uncertain".to_string());
    }
    if !report.breakdown.total.is_finite() {
        flags.push("infinite elastic energy".to_string());
    }
    Ok(Outcome {
        body: json_text(&report, hash)?,
        flags,
    })
}

#[derive(Serialize)]
struct ProfileCsvRow {
    node: f64,
    value: f64,
    elastic: f64,
    volume_term: f64,
    perimeter_term: f64,
    total: f64,
    iterations: usize,
    termination: String,
    projected_gradient: f64,
}

fn minimize_cmd(args: &MinimizeArgs, hash: &str) -> Result<Outcome> {
    let (prob, opts) = args.problem.resolve(args.eps)?;
    let m = minimize_radial_with(&prob, &opts, &[])?;
    let b = m.breakdown;
    let termination = serde_json::to_value(m.termination)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let rows: Vec<ProfileCsvRow> = m
        .profile
        .nodes
        .iter()
        .zip(&m.profile.values)
        .map(|(node, value)| ProfileCsvRow {
            node: *node,
            value: *value,
            elastic: b.elastic,
            volume_term: b.volume_term,
            perimeter_term: b.perimeter_term,
            total: b.total,
            iterations: m.iterations,
            termination: termination.clone(),
            projected_gradient: m.projected_gradient,
        })
        .collect();
    let flags = if m.converged() {
        Vec::new()
    } else {
        vec![format!("minimization {termination}")]
    };
    Ok(Outcome {
        body: csv_text(&rows, hash)?,
        flags,
    })
}

#[derive(Serialize)]
struct GammaCsvRow {
    row: &'static str,
    eps: Option<f64>,
    elastic: Option<f64>,
    volume_term: Option<f64>,
    perimeter_term: Option<f64>,
    total: f64,
    cavity_radius: f64,
    iterations: Option<usize>,
    converged: Option<bool>,
    gap: Option<f64>,
}

fn gamma_cmd(args: &GammaSweepArgs, hash: &str) -> Result<Outcome> {
    let first = *args
        .eps
        .first()
        .ok_or_else(|| Error::InvalidArgument("no eps values".into()))?;
    let (template, _) = args.problem.resolve(first)?;
    let sweep = gamma_sweep(&args.eps, &template)?;
    let mut rows: Vec<GammaCsvRow> = sweep
        .rows
        .iter()
        .zip(&sweep.gaps)
        .map(|(r, gap)| GammaCsvRow {
            row: "eps",
            eps: Some(r.eps),
            elastic: Some(r.min_energy.elastic),
            volume_term: Some(r.min_energy.volume_term),
            perimeter_term: Some(r.min_energy.perimeter_term),
            total: r.min_energy.total,
            cavity_radius: r.cavity_radius,
            iterations: Some(r.iterations),
            converged: Some(r.converged),
            gap: Some(*gap),
        })
        .collect();
    rows.push(GammaCsvRow {
        row: "limit",
        eps: None,
        elastic: None,
        volume_term: None,
        perimeter_term: None,
        total: sweep.limit.limit,
        cavity_radius: sweep.cavity_radius_limit.limit,
        iterations: None,
        converged: None,
        gap: None,
    });
    let mut flags = Vec::new();
    if sweep.rows.iter().any(|r| !r.converged) {
        flags.push("minimization not converged".to_string());
    }
    if !sweep.gaps_nonincreasing(args.gap_tol) {
        flags.push("gap sequence increases".to_string());
    }
    Ok(Outcome {
        body: csv_text(&rows, hash)?,
        flags,
    })
}

#[derive(Serialize)]
struct RecoveryCsvRow {
    n: usize,
    eps: f64,
    r_n: f64,
    elastic: f64,
    volume_term: f64,
    perimeter_term: f64,
    total: f64,
    limit_total: f64,
    gap: f64,
    relative_gap: f64,
    trace_identity: f64,
    annular_energy: f64,
}

fn recovery_cmd(args: &RecoveryArgs, hash: &str) -> Result<Outcome> {
    let (y, a) = example(&args.example)?;
    let density = args.density.resolve(EXAMPLE_DENSITY)?;
    let lambdas = args.lambdas.resolve()?;
    let dom = Domain::new(y.domain().outer);
    let table = recovery_energy_table(y, &[a], &dom, &args.eps, &density, lambdas, &default_r_rule)?;
    let rows: Vec<RecoveryCsvRow> = table
        .rows
        .iter()
        .map(|r| RecoveryCsvRow {
            n: r.n,
            eps: r.eps,
            r_n: r.r_n,
            elastic: r.energy.elastic,
            volume_term: r.energy.volume_term,
            perimeter_term: r.energy.perimeter_term,
            total: r.energy.total,
            limit_total: r.limit_total,
            gap: r.gap,
            relative_gap: r.relative_gap,
            trace_identity: r.trace_identity,
            annular_energy: r.annular_energy,
        })
        .collect();
    let mut flags = Vec::new();
    if table.conv_perimeter_violated() {
        flags.push("conv-perimeter violated".to_string());
    }
    Ok(Outcome {
        body: csv_text(&rows, hash)?,
        flags,
    })
}

fn check_cmd(args: &CheckArgs, hash: &str) -> Result<Outcome> {
    let (y, a) = example(&args.example)?;
    let radii = if args.radii.is_empty() {
        vec![args.eps, 2.0 * args.eps, 3.0 * args.eps]
    } else {
        args.radii.clone()
    };
    if args.grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per side".into()));
    }
    let cfg = FlawConfig::new(vec![a], args.eps, 1, Confinement::default_disk());
    let dom = Domain::new(y.domain().outer);
    crate::geometry::validate_flaw_config(&cfg, &dom).into_result()?;
    let report = check_admissibility_sampled(y.as_ref(), &cfg, &dom, &radii, args.grid, args.seed)?;
    let flags = report
        .rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} failed", r.check))
        .collect();
    Ok(Outcome {
        body: json_text(&report, hash)?,
        flags,
    })
}

/// Runs the parsed command without writing anything.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let hash = config_hash(cli);
    match &cli.command {
        Command::ExampleSweep(a) => example_sweep(a, &hash),
        Command::LimitEnergy(a) => limit_energy_cmd(a, &hash),
        Command::MinimizeRadial(a) => minimize_cmd(a, &hash),
        Command::GammaSweep(a) => gamma_cmd(a, &hash),
        Command::Recovery(a) => recovery_cmd(a, &hash),
        Command::Check(a) => check_cmd(a, &hash),
    }
}

fn output_path(cli: &Cli) -> Option<&PathBuf> {
    match &cli.command {
        Command::ExampleSweep(a) => a.out.output.as_ref(),
        Command::LimitEnergy(a) => a.out.output.as_ref(),
        Command::MinimizeRadial(a) => a.out.output.as_ref(),
        Command::GammaSweep(a) => a.out.output.as_ref(),
        Command::Recovery(a) => a.out.output.as_ref(),
        Command::Check(a) => a.out.output.as_ref(),
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_)
            | Error::InvalidFlawConfig(_)
            | Error::OutsideDomain { .. }
            | Error::NearBoundary { .. }
    )
}

/// Sizes the global worker pool from `CAVICORE_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CAVICORE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("CAVICORE_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::InvalidArgument("CAVICORE_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Numerical(e.to_string()))?;
    }
    Ok(())
}

/// Runs the command, writes its output and returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let outcome = match execute(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return if is_config_error(&e) { EXIT_CONFIG } else { EXIT_FLAGGED };
        }
    };
    let written = match output_path(cli) {
        Some(path) => std::fs::write(path, &outcome.body),
        None => std::io::stdout().write_all(outcome.body.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return EXIT_FLAGGED;
    }
    for f in &outcome.flags {
        eprintln!("flag: {f}");
    }
    if outcome.flags.is_empty() {
        EXIT_OK
    } else {
        EXIT_FLAGGED
    }
}
