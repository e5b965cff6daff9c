//! Command implementations behind the `ipscftp` binary.

pub mod model;
pub mod summary;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ipscftp_core::analytic::{self, BoundOptions};
use ipscftp_core::coupling::{
    estimate_laplace, gate_growth, make_insensitive_spec, make_sensitive_spec, sample_batch, CouplingOptions,
};
use ipscftp_core::diagnostics::{run_suite, Suite, SuiteInput};
use ipscftp_core::flowsim::{replica_seed, simulate_forward};
use ipscftp_core::rulesys::{Boundary, State, WindowConfig};
use ipscftp_core::stats::{empirical, proportion_se};
use ipscftp_core::Error;

use model::{BuiltModel, CouplingChoice, ModelFile, ParseError, SiteRange};
use summary::RunSummary;

#[derive(Debug, Parser)]
#[command(name = "ipscftp", version, about = "Exact sampling and ergodicity certificates for particle systems on the integer line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file and its rule set.
    Validate(CommonArgs),
    /// Print growth parameters, thresholds and the subcriticality verdict.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = Format::Kv)]
        format: Format,
    },
    /// Draw exact samples from the stationary law.
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        /// Check fill independence, fused triples and window widths.
        #[arg(long = "assert")]
        assertion: bool,
        /// Skip the subcriticality gate.
        #[arg(long)]
        force: bool,
    },
    /// Run the forward dynamics on a frozen-boundary window.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Emit the explicit total-variation and decay bound tables.
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Times, as `start:stop:step` or a comma list.
        #[arg(long = "t-grid", default_value = "0:20:2")]
        t_grid: String,
        /// Distances, as `start:stop:step` or a comma list.
        #[arg(long = "d-grid", default_value = "4,5,6,8,12,16,24,32")]
        d_grid: String,
        /// Laplace parameters for the profile estimate.
        #[arg(long = "lambda-grid", default_value = "0:2:0.25")]
        lambda_grid: String,
    },
    /// Run one of the oracle suites.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        suite: String,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Model file.
    pub model: PathBuf,
    #[arg(long, env = "IPSCFTP_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Site range `a..b` (inclusive).
    #[arg(long)]
    pub sites: Option<SiteRange>,
    /// Worker threads for replica batches.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Kv,
    Tsv,
}

/// A failed command with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SubcriticalityGateFailed { .. } | Error::SupercriticalInput { .. } => 3,
        Error::ClosureBudgetExceeded { .. } | Error::HorizonExceeded { .. } | Error::CouplingUnreachable { .. } => 4,
        Error::DualStartMismatch { .. } | Error::WidthViolation(_) => 5,
        _ => 2,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let mut message = e.to_string();
        match &e {
            Error::DegenerateRates(_) | Error::NonDegenerateViolated(_) => {
                message.push_str(
                    "\nhint: z0, z_plus and z_minus need positive total rates; adjust the rates or choose another coupling spec",
                );
            }
            Error::SubcriticalityGateFailed { .. } => {
                message.push_str("\nhint: lower the perturbation rates, try the other coupling spec, or pass --force");
            }
            _ => {}
        }
        Self {
            code: exit_code(&e),
            message,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

struct Loaded {
    file: ModelFile,
}

fn load(path: &Path) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let file = ModelFile::parse(&text).map_err(|e: ParseError| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(Loaded { file })
}

fn seed_of(common: &CommonArgs, file: &ModelFile) -> u64 {
    common.seed.or(file.run.seed).unwrap_or(0)
}

fn sites_of(common: &CommonArgs, file: &ModelFile) -> SiteRange {
    common
        .sites
        .or(file.run.sites)
        .unwrap_or(SiteRange { start: 0, end: 0 })
}

fn options_of(file: &ModelFile) -> CouplingOptions {
    let mut o = CouplingOptions::default();
    if let Some(b) = file.run.budget {
        o.budget = b;
    }
    o.lookback = file.run.lookback;
    if let Some(g) = file.run.gate_samples {
        o.gate_samples = g;
    }
    o
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::input("--jobs must be >= 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::input(format!("cannot start {j} workers: {e}"))),
    }
}

/// Parses `start:stop:step` (inclusive) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("bad grid `{spec}` (expected start:stop:step or a comma list)");
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|k| start + k as f64 * step).collect());
    }
    spec.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn digest(command: &str, loaded: &Loaded, flags: &str) -> String {
    summary::digest(&[command, &loaded.file.serialize(), flags])
}

/// Runs one command, writing its primary output to `out` and the
/// key=value summary (when the primary output is a table) to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::input(format!("write failed: {e}"));
    match cli.command {
        Command::Validate(common) => {
            let loaded = load(&common.model)?;
            let built = loaded.file.build()?;
            let report = built.rules.validate();
            let mut s = RunSummary::new("validate", digest("validate", &loaded, ""), None);
            s.value("rules", built.rules.len());
            s.value("perturbative", built.rules.perturbative().count());
            s.value("violations", report.violations.len());
            s.value("status", if report.is_valid() { "valid" } else { "invalid" });
            write!(out, "{s}").map_err(io)?;
            if !report.is_valid() {
                return Err(CliError::input(report.to_string()));
            }
            Ok(())
        }
        Command::Certify { common, format } => {
            let loaded = load(&common.model)?;
            let built = loaded.file.build()?;
            let s = certify(&loaded, &built)?;
            match format {
                Format::Kv => write!(out, "{s}").map_err(io),
                Format::Tsv => write!(out, "{}", s.to_tsv()).map_err(io),
            }
        }
        Command::Sample {
            common,
            assertion,
            force,
        } => {
            let loaded = load(&common.model)?;
            let built = loaded.file.build()?;
            let seed = seed_of(&common, &loaded.file);
            let n = common.n.or(loaded.file.run.n).unwrap_or(1000);
            let sites = sites_of(&common, &loaded.file).sites();
            let mut opts = options_of(&loaded.file);
            opts.assertion = assertion;
            opts.force = force;
            let rules = built.rules.clone();
            let rows = with_jobs(common.jobs, || sample_batch(&rules, &built.spec, &sites, n, seed, &opts))??;
            let flags = format!("n={n} sites={sites:?} assert={assertion} force={force}");
            let s = table_summary("sample", &loaded, &flags, seed, &built, &sites, &rows);
            write_table(out, &built, &sites, &rows).map_err(io)?;
            write!(err, "{s}").map_err(io)
        }
        Command::Simulate { common, duration } => {
            let loaded = load(&common.model)?;
            let built = loaded.file.build()?;
            let seed = seed_of(&common, &loaded.file);
            let n = common.n.or(loaded.file.run.n).unwrap_or(100);
            let range = sites_of(&common, &loaded.file);
            let sites = range.sites();
            let duration = duration.or(loaded.file.run.duration).unwrap_or(100.0);
            if !(duration >= 0.0) {
                return Err(CliError::input(format!("duration must be >= 0, got {duration}")));
            }
            let rules = built.rules.clone();
            let q = rules.alphabet().len() as u8;
            let rows: Vec<Vec<State>> = with_jobs(common.jobs, || {
                (0..n as u64)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(seed, i));
                        let init = (0..sites.len()).map(|_| State(rng.random_range(0..q))).collect();
                        let frozen = Boundary::Frozen {
                            left: State(0),
                            right: State(0),
                        };
                        let cfg = WindowConfig::new(range.start, init, frozen).expect("non-empty window");
                        simulate_forward(&rules, &cfg, duration, &mut rng).states().to_vec()
                    })
                    .collect()
            })?;
            let flags = format!("n={n} sites={sites:?} duration={duration}");
            let s = table_summary("simulate", &loaded, &flags, seed, &built, &sites, &rows);
            write_table(out, &built, &sites, &rows).map_err(io)?;
            write!(err, "{s}").map_err(io)
        }
        Command::Bounds {
            common,
            t_grid,
            d_grid,
            lambda_grid,
        } => {
            let loaded = load(&common.model)?;
            let built = loaded.file.build()?;
            let seed = seed_of(&common, &loaded.file);
            let n = common.n.or(loaded.file.run.n).unwrap_or(10_000);
            let times = parse_grid(&t_grid).map_err(CliError::input)?;
            let distances = parse_grid(&d_grid).map_err(CliError::input)?;
            let lambdas = parse_grid(&lambda_grid).map_err(CliError::input)?;
            if let Some(t) = times.iter().find(|&&t| !(t >= 0.0)) {
                return Err(CliError::input(format!("--t-grid entries must be >= 0, got {t}")));
            }
            if let Some(d) = distances.iter().find(|&&d| !(d >= 1.0 && d.fract() == 0.0)) {
                return Err(CliError::input(format!("--d-grid entries must be integers >= 1, got {d}")));
            }
            let opts = options_of(&loaded.file);
            let rules = built.rules.clone();
            let card_b = sites_of(&common, &loaded.file).sites().len();
            let (m, profile) = with_jobs(common.jobs, || -> ipscftp_core::Result<_> {
                let m = gate_growth(&rules, &built.spec, &opts, seed)?;
                if m >= 1.0 {
                    return Err(Error::SupercriticalInput { m });
                }
                let est = estimate_laplace(&rules, &built.spec, &lambdas, n, seed)?;
                Ok((m, analytic::laplace_profile(&est)))
            })??;
            let bopts = BoundOptions {
                card_b,
                times,
                distances: distances.iter().map(|&d| d as u32).collect(),
                ..BoundOptions::default()
            };
            let report = analytic::bound_report(&rules, &built.spec, m, &profile, &bopts, None)?;
            let mut text = String::from("t\ttv_bound\n");
            for (t, b) in &report.theorem_b {
                text.push_str(&format!("{t}\t{b}\n"));
            }
            text.push_str("\nd\tpair_bound\thalf_line_bound\n");
            for ((d, p), (_, h)) in report.theorem_d_pair.iter().zip(&report.theorem_d_half_line) {
                text.push_str(&format!("{d}\t{p}\t{h}\n"));
            }
            write!(out, "{text}").map_err(io)?;
            let flags = format!("n={n} t={t_grid} d={d_grid} lambda={lambda_grid} card_b={card_b}");
            let mut s = RunSummary::new("bounds", digest("bounds", &loaded, &flags), Some(seed));
            s.metric("m", m, None);
            for (l, lt, lh) in &profile {
                s.metric(&format!("laplace_t[{l}]"), *lt, None);
                s.metric(&format!("laplace_h[{l}]"), *lh, None);
            }
            write!(err, "{s}").map_err(io)
        }
        Command::Verify { common, suite } => {
            let suite: Suite = suite.parse()?;
            let loaded = load(&common.model)?;
            let built = loaded.file.build()?;
            let seed = seed_of(&common, &loaded.file);
            let n = common.n.or(loaded.file.run.n).unwrap_or(2000);
            let input = SuiteInput {
                rules: built.rules.clone(),
                spec: &built.spec,
                seed,
                samples: n,
            };
            let report = with_jobs(common.jobs, || run_suite(suite, &input))??;
            let flags = format!("suite={suite} n={n}");
            let mut s = RunSummary::new("verify", digest("verify", &loaded, &flags), Some(seed));
            for c in &report.checks {
                s.metric(&c.name, c.value, c.se);
                s.metric(&format!("{}.reference", c.name), c.reference, None);
                s.check(&c.name, c.pass);
            }
            write!(out, "{s}").map_err(io)?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError {
                    code: 5,
                    message: format!("suite {suite} failed"),
                })
            }
        }
    }
}

fn certify(loaded: &Loaded, built: &BuiltModel) -> CliResult<RunSummary> {
    let rs = &built.rules;
    let mut s = RunSummary::new("certify", digest("certify", loaded, ""), None);
    let choice = match &loaded.file.coupling {
        CouplingChoice::Sensitive => "sensitive",
        CouplingChoice::Insensitive => "insensitive",
        CouplingChoice::Explicit(_) => "explicit",
    };
    s.value("spec", choice);
    let r = analytic::rate_summary(rs, &built.spec);
    for (i, v) in r.as_array().iter().enumerate() {
        s.metric(&format!("r{i}"), *v, None);
    }
    let m = analytic::growth_closed_form(rs, &built.spec)?;
    s.metric("m", m, None);
    match analytic::m_factor(&r) {
        Ok(big) => {
            s.metric("M", big, None);
            s.metric("m_upper_bound", analytic::growth_upper_bound(rs, &built.spec)?, None);
        }
        Err(_) => s.value("M", "undefined"),
    }
    s.value("verdict", verdict(m));
    if let Some(c) = &built.compiled {
        for (name, spec) in [("sensitive", make_sensitive_spec(c)), ("insensitive", make_insensitive_spec(c))] {
            match spec.and_then(|sp| analytic::growth_closed_form(&c.rules, &sp)) {
                Ok(m) => {
                    s.metric(&format!("m.{name}"), m, None);
                    s.value(&format!("verdict.{name}"), verdict(m));
                }
                Err(e) => s.value(&format!("verdict.{name}"), format!("unavailable ({e})")),
            }
        }
    }
    if let Some((delta, eps)) = built.jc {
        let sen = analytic::eps_sen(delta)?;
        let ins = analytic::eps_ins();
        s.metric("delta", delta, None);
        s.metric("eps_total", eps, None);
        s.metric("eps_sen", sen, None);
        if let Some(q) = Rational64::approximate_float(delta).filter(|q| *q.numer() as f64 / *q.denom() as f64 == delta) {
            s.value("eps_sen.exact", analytic::jc_cpg_thresholds(q)?.eps_sen);
        }
        s.metric("eps_ins", ins, None);
        s.value(
            "verdict.threshold",
            if eps < sen.max(ins) { "subcritical" } else { "not certified" },
        );
    }
    Ok(s)
}

fn verdict(m: f64) -> &'static str {
    if m < 1.0 {
        "subcritical"
    } else {
        "supercritical"
    }
}

fn write_table(
    out: &mut dyn Write,
    built: &BuiltModel,
    sites: &[i64],
    rows: &[Vec<State>],
) -> std::io::Result<()> {
    let alphabet = built.rules.alphabet();
    let mut text = String::from("replica");
    for x in sites {
        text.push_str(&format!("\t{x}"));
    }
    text.push('\n');
    for (i, row) in rows.iter().enumerate() {
        text.push_str(&i.to_string());
        for s in row {
            text.push('\t');
            text.push_str(alphabet.label(*s));
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())
}

fn table_summary(
    command: &str,
    loaded: &Loaded,
    flags: &str,
    seed: u64,
    built: &BuiltModel,
    sites: &[i64],
    rows: &[Vec<State>],
) -> RunSummary {
    let alphabet = built.rules.alphabet();
    let q = alphabet.len();
    let mut s = RunSummary::new(command, digest(command, loaded, flags), Some(seed));
    s.value("rows", rows.len());
    for (j, x) in sites.iter().enumerate() {
        let freq = empirical(rows.iter().map(|r| r[j].index()), q);
        for (k, p) in freq.iter().enumerate() {
            s.metric(
                &format!("freq[{x}].{}", alphabet.label(State(k as u8))),
                *p,
                Some(proportion_se(*p, rows.len().max(1))),
            );
        }
    }
    s
}
