use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use poissonstab::diffeo::{random_family, DiffeoSpec};
use poissonstab::equilibria::{solve_equilibrium, SearchOptions, SeedOutcome};
use poissonstab::invariant::{analyze, invariance_probe, Verdict};
use poissonstab::orbits::{conservation_scale, periodic_family, write_csv, FamilyOptions};
use poissonstab::{build_model, classify, Expression, ModelSpec, SystemModel, Tolerances};
use rayon::prelude::*;

use crate::config::{parse_param, parse_point, ModelSection, RunConfig};
use crate::report::{
    render, Analysis, EquilibriumEntry, OrbitSummary, ProbeSummary, RealizationCheck, ReportDocument, Stats,
    Validation,
};

/// Relative tolerance of the first-integral and realization checks.
pub const VALIDATION_TOL: f64 = 1e-9;
/// Orbit conservation bound, relative to the local gradient scale.
pub const CONSERVATION_TOL: f64 = 1e-8;
/// Orbit closure bound, relative to the orbit diameter.
pub const CLOSURE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "poissonstab", version, about = "Stability of equilibria of completely integrable systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that the integrals are conserved and realize the field.
    Validate(RunArgs),
    /// Locate equilibria from seeds and compute their invariants and verdicts.
    Classify(RunArgs),
    /// Periodic orbits around a stable equilibrium.
    Orbits(RunArgs),
    /// Check invariance of 𝓘 under random diffeomorphisms.
    Probe(RunArgs),
    /// Print the tables for an existing JSON report.
    Report {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// rikitake1, rikitake2 or rotation.
    #[arg(long, value_name = "NAME")]
    pub builtin: Option<String>,
    #[arg(long = "param", value_name = "K=V", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long = "seed", value_name = "X,Y,...", value_parser = parse_point)]
    pub seeds: Vec<Vec<f64>>,
    /// JSON report path.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub rng_seed: Option<u64>,
    #[arg(long)]
    pub try_hamiltonian_permutations: bool,
    /// Number of random probes.
    #[arg(long, value_name = "N")]
    pub probes: Option<usize>,
    /// Include the identity map among the probes.
    #[arg(long)]
    pub identity_probe: bool,
    /// Orbit amplitudes, decreasing.
    #[arg(long = "epsilon", value_name = "E", value_delimiter = ',')]
    pub epsilons: Vec<f64>,
    /// Directory for orbit CSV files.
    #[arg(long, value_name = "DIR")]
    pub csv_dir: Option<PathBuf>,
    /// Sample points used by `validate`.
    #[arg(long, value_name = "N", default_value_t = 64)]
    pub samples: usize,
    /// Add wall-clock time to the report (makes it run dependent).
    #[arg(long)]
    pub timings: bool,
}

pub fn resolve(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(b) = &args.builtin {
        cfg.model = ModelSection {
            builtin: Some(b.clone()),
            ..ModelSection::default()
        };
    }
    for (k, v) in &args.params {
        cfg.model.parameters.insert(k.clone(), *v);
    }
    if !args.seeds.is_empty() {
        cfg.seeds.points = args.seeds.clone();
        cfg.seeds.grid = None;
    }
    if args.out.is_some() {
        cfg.output.report = args.out.clone();
    }
    if let Some(s) = args.rng_seed {
        cfg.probes.rng_seed = s;
    }
    if let Some(c) = args.probes {
        cfg.probes.count = c;
    }
    cfg.probes.identity |= args.identity_probe;
    if !args.epsilons.is_empty() {
        cfg.orbits.epsilons = Some(args.epsilons.clone());
    }
    if args.csv_dir.is_some() {
        cfg.orbits.csv_dir = args.csv_dir.clone();
    }
    cfg.try_hamiltonian_permutations |= args.try_hamiltonian_permutations;
    cfg.validate()?;
    Ok(cfg)
}

struct Prepared {
    cfg: RunConfig,
    model: SystemModel,
    tol: Tolerances,
}

fn prepare(args: &RunArgs) -> anyhow::Result<Prepared> {
    let cfg = resolve(args)?;
    let spec = cfg.model_spec()?;
    let model = build_model(&spec).map_err(|e| match locate_parse_error(&spec) {
        Some(m) => anyhow::anyhow!(m),
        None => anyhow::Error::new(e).context("building model"),
    })?;
    let tol = cfg.tolerances;
    Ok(Prepared { cfg, model, tol })
}

/// Names the expression that fails to parse, with the error position.
fn locate_parse_error(spec: &ModelSpec) -> Option<String> {
    let vars: Vec<&str> = spec.variables.iter().map(String::as_str).collect();
    let params: Vec<&str> = spec.parameters.keys().map(String::as_str).collect();
    let labelled = spec
        .field
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("field[{i}]"), t))
        .chain(spec.integrals.iter().enumerate().map(|(i, t)| (format!("integrals[{i}]"), t)))
        .chain(spec.nu.iter().map(|t| ("nu".to_string(), t)));
    for (label, text) in labelled {
        if let Err(e) = Expression::parse(text, &vars, &params) {
            return Some(format!("{label} `{text}`: {e}"));
        }
    }
    None
}

fn analysis(model: &SystemModel, point: &[f64], hamiltonian_index: usize, tol: &Tolerances, probes: &[DiffeoSpec]) -> Analysis {
    let record = match classify(model, point, tol) {
        Ok(r) => r,
        Err(e) => {
            return Analysis {
                hamiltonian_index,
                record: None,
                invariant: None,
                error: Some(e.to_string()),
            }
        }
    };
    let (invariant, error) = if record.is_regular() {
        match analyze(model, &record, tol, probes) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Analysis {
        hamiltonian_index,
        record: Some(record),
        invariant,
        error,
    }
}

fn entry_for_seed(model: &SystemModel, seed: &[f64], tol: &Tolerances, permutations: bool) -> EquilibriumEntry {
    let search = solve_equilibrium(model, seed, &SearchOptions::default());
    let n = model.dim();
    match &search {
        SeedOutcome::Converged { point, .. } => {
            let primary = analysis(model, point, n - 2, tol, &[]);
            let alternates = if permutations {
                (0..n - 2)
                    .map(|i| match model.with_hamiltonian(i) {
                        Ok(m) => analysis(&m, point, i, tol, &[]),
                        Err(e) => Analysis {
                            hamiltonian_index: i,
                            record: None,
                            invariant: None,
                            error: Some(e.to_string()),
                        },
                    })
                    .collect()
            } else {
                Vec::new()
            };
            EquilibriumEntry {
                seed: seed.to_vec(),
                status: "ok".into(),
                search,
                analysis: Some(primary),
                alternates,
            }
        }
        SeedOutcome::Failed { .. } => EquilibriumEntry {
            seed: seed.to_vec(),
            status: "failed: no equilibrium".into(),
            search,
            analysis: None,
            alternates: Vec::new(),
        },
    }
}

/// Deterministic quasi-random points in `[-2, 2]ⁿ` (Halton sequence).
fn sample_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let radical_inverse = |mut k: u64, base: u64| {
        let (mut f, mut r) = (1.0, 0.0);
        while k > 0 {
            f /= base as f64;
            r += f * (k % base) as f64;
            k /= base;
        }
        r
    };
    (1..=count as u64)
        .map(|k| {
            (0..n)
                .map(|i| 4.0 * radical_inverse(k, PRIMES[i % PRIMES.len()] + 40 * (i / PRIMES.len()) as u64) - 2.0)
                .collect()
        })
        .collect()
}

fn cmd_validate(ctx: &Prepared, args: &RunArgs, doc: &mut ReportDocument) -> anyhow::Result<bool> {
    let model = &ctx.model;
    let points: Vec<Vec<f64>> = sample_points(model.dim(), args.samples.max(1))
        .into_iter()
        .filter(|p| model.eval_field(p).is_ok() && model.integral_gradients(p).is_ok())
        .collect();
    if points.is_empty() {
        bail!("the model cannot be evaluated at any sample point");
    }
    let first = model.check_first_integrals(&points, VALIDATION_TOL)?;
    let mut worst: Option<f64> = None;
    let mut skipped = 0;
    for p in &points {
        match model.realization_residual(p, ctx.tol.frame) {
            Ok(Some(r)) => worst = Some(worst.map_or(r, |w: f64| w.max(r))),
            Ok(None) | Err(_) => skipped += 1,
        }
    }
    let realization_pass = worst.is_some_and(|w| w <= VALIDATION_TOL);
    let pass = first.pass && realization_pass;
    doc.validation = Some(Validation {
        sample_count: points.len(),
        integrals: model.spec().integrals.clone(),
        first_integrals: first,
        realization: RealizationCheck {
            max_residual: worst,
            skipped_points: skipped,
            tol: VALIDATION_TOL,
            pass: realization_pass,
        },
        pass,
    });
    Ok(pass)
}

fn cmd_classify(ctx: &Prepared, doc: &mut ReportDocument) -> anyhow::Result<bool> {
    let seeds = ctx.cfg.seed_points()?;
    if seeds.is_empty() {
        bail!("no seeds: pass --seed or configure [seeds]");
    }
    doc.equilibria = seeds
        .par_iter()
        .map(|s| entry_for_seed(&ctx.model, s, &ctx.tol, ctx.cfg.try_hamiltonian_permutations))
        .collect();
    Ok(doc.equilibria.iter().any(|e| e.analysis.is_some()))
}

/// Refine the first seed to an equilibrium and analyze it.
fn target(ctx: &Prepared, doc: &mut ReportDocument) -> anyhow::Result<Result<Analysis, String>> {
    let seeds = ctx.cfg.seed_points()?;
    let Some(seed) = seeds.first() else {
        bail!("no target: pass --seed or configure [seeds]");
    };
    let entry = entry_for_seed(&ctx.model, seed, &ctx.tol, false);
    let result = match &entry.analysis {
        None => Err(format!("no equilibrium found from seed {seed:?}")),
        Some(Analysis { record: None, error, .. }) => Err(error.clone().unwrap_or_default()),
        Some(Analysis { record: Some(r), .. }) if !r.is_non_degenerate() => Err(format!(
            "target {:?} is {:?}, not a non-degenerate regular equilibrium",
            r.point, r.classification
        )),
        Some(a) => Ok(a.clone()),
    };
    doc.equilibria.push(entry);
    Ok(result)
}

fn csv_path(ctx: &Prepared, k: usize) -> Option<PathBuf> {
    let report = ctx.cfg.output.report.as_deref();
    let dir = match (&ctx.cfg.orbits.csv_dir, report) {
        (Some(d), _) => d.clone(),
        (None, Some(r)) => r.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
        (None, None) => return None,
    };
    let stem = report
        .and_then(|r| r.file_stem())
        .map_or_else(|| "report".to_string(), |s| s.to_string_lossy().into_owned());
    Some(dir.join(format!("{stem}_orbit{}.csv", k + 1)))
}

fn cmd_orbits(ctx: &Prepared, doc: &mut ReportDocument, messages: &mut Vec<String>) -> anyhow::Result<bool> {
    let a = match target(ctx, doc)? {
        Ok(a) => a,
        Err(m) => {
            messages.push(m);
            return Ok(false);
        }
    };
    let Some(inv) = &a.invariant else {
        messages.push(a.error.unwrap_or_else(|| "invariant unavailable".into()));
        return Ok(false);
    };
    if inv.verdict != Verdict::LyapunovStable {
        let why = if inv.verdict == Verdict::Unstable {
            "invariant negative"
        } else {
            "invariant inside the inconclusive band"
        };
        messages.push(format!("{why} (I = {}); no periodic family", inv.i_value));
        return Ok(false);
    }
    let opts = FamilyOptions {
        epsilons: ctx.cfg.orbits.epsilons.clone(),
        t_max_factor: ctx.cfg.orbits.t_max_factor,
        ..FamilyOptions::default()
    };
    let record = a.record.as_ref().expect("target analysis has a record");
    let family = match periodic_family(&ctx.model, record, inv.i_value, &ctx.tol, &opts) {
        Ok(f) => f,
        Err(e) => {
            messages.push(e.to_string());
            return Ok(false);
        }
    };
    let bound = CONSERVATION_TOL * conservation_scale(&ctx.model, &record.point)?;
    let pass = family.entries.iter().all(|e| {
        e.period.is_some()
            && e.closure.is_some_and(|c| c <= CLOSURE_TOL)
            && e.conservation_drift.iter().all(|d| *d <= bound)
    });
    let mut csv_files = Vec::new();
    for (k, e) in family.entries.iter().enumerate() {
        if let Some(path) = csv_path(ctx, k) {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let file = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_csv(&e.samples, std::io::BufWriter::new(file))?;
            csv_files.push(path.display().to_string());
        }
    }
    doc.orbits = Some(OrbitSummary {
        family,
        conservation_bound: bound,
        csv_files,
        pass,
    });
    Ok(pass)
}

fn cmd_probe(ctx: &Prepared, doc: &mut ReportDocument) -> anyhow::Result<bool> {
    let p = &ctx.cfg.probes;
    let mut summary = ProbeSummary {
        rng_seed: p.rng_seed,
        count: p.count + usize::from(p.identity),
        tolerance: p.tolerance,
        target: None,
        results: Vec::new(),
        max_relative_change: None,
        max_eigen_mismatch: None,
        error: None,
        pass: false,
    };
    let a = match target(ctx, doc)? {
        Ok(a) => a,
        Err(m) => {
            summary.error = Some(m);
            doc.probes = Some(summary);
            return Ok(false);
        }
    };
    let n = ctx.model.dim();
    let mut diffeos = Vec::new();
    if p.identity {
        diffeos.push(DiffeoSpec::identity(n));
    }
    diffeos.extend(random_family(n, p.count, p.rng_seed));
    let record = a.record.as_ref().expect("target analysis has a record");
    let results: Vec<_> = diffeos
        .par_iter()
        .map(|d| invariance_probe(&ctx.model, record, d, &ctx.tol))
        .collect();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(r) => summary.results.push(r),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let fold = |f: fn(&poissonstab::invariant::ProbeResult) -> f64| {
        summary.results.iter().map(f).reduce(f64::max)
    };
    summary.max_relative_change = fold(|r| r.relative_change);
    summary.max_eigen_mismatch = fold(|r| r.eigen_mismatch);
    summary.pass = errors.is_empty()
        && summary.max_relative_change.is_none_or(|v| v <= p.tolerance)
        && summary.max_eigen_mismatch.is_none_or(|v| v <= p.tolerance);
    if !errors.is_empty() {
        summary.error = Some(errors.join("; "));
    }
    summary.target = Some(a);
    let pass = summary.pass;
    doc.probes = Some(summary);
    Ok(pass)
}

/// Run one analysis subcommand; returns the report and whether it passed.
/// Errors are usage or configuration problems (exit 2); a `false` flag is an
/// analysis-level failure (exit 1).
pub fn execute(name: &str, args: &RunArgs) -> anyhow::Result<(ReportDocument, bool)> {
    let start = Instant::now();
    let ctx = prepare(args)?;
    let mut doc = ReportDocument::new(name, ctx.model.spec().clone(), ctx.tol);
    let mut messages = Vec::new();
    let pass = match name {
        "validate" => cmd_validate(&ctx, args, &mut doc)?,
        "classify" => cmd_classify(&ctx, &mut doc)?,
        "orbits" => cmd_orbits(&ctx, &mut doc, &mut messages)?,
        "probe" => cmd_probe(&ctx, &mut doc)?,
        other => bail!("unknown command {other}"),
    };
    doc.messages = messages;
    if args.timings {
        doc.stats = Some(Stats {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        });
    }
    if let Some(path) = &ctx.cfg.output.report {
        let json = doc.to_json().context("serializing report")?;
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok((doc, pass))
}

/// Run the CLI and map the outcome to the exit-code contract.
pub fn run(cli: Cli) -> u8 {
    let (name, args) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::Classify(a) => ("classify", a),
        Command::Orbits(a) => ("orbits", a),
        Command::Probe(a) => ("probe", a),
        Command::Report { input } => return report_file(input),
    };
    match execute(name, args) {
        Ok((doc, pass)) => {
            match serde_json::to_value(&doc) {
                Ok(v) => print!("{}", render(&v)),
                Err(e) => eprintln!("error: {e}"),
            }
            if pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn report_file(input: &Path) -> u8 {
    let parsed = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).context("parsing report"));
    match parsed {
        Ok(v) => {
            print!("{}", render(&v));
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
