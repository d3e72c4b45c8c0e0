//! Command-line driver: randomized checks, demos, descent, covering and
//! single-quantity evaluation. Outputs are JSON; exit codes are 0 on
//! success, 1 when a check fails or a certificate does not hold, 2 on
//! usage, input or runtime errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use entropic_pfr::bsg::bsg_check;
use entropic_pfr::cover::{pfr_pipeline, CoverConfig, DEFAULT_C_EXPONENT};
use entropic_pfr::descent::{
    descend_with, extract_subgroup, DescentConfig, MoveRegistry, SelectionRule,
    SubgroupCertificate, DEFAULT_BUDGET, DEFAULT_EPS_D, DEFAULT_EPS_STEP, DEFAULT_MAX_ITER,
    DEFAULT_THETA,
};
use entropic_pfr::endgame::{endgame_tables, MAX_DENSE_ENDGAME_DIM};
use entropic_pfr::fixtures::{demo, run_demo, DemoParams};
use entropic_pfr::io::{read_dist_any, read_set};
use entropic_pfr::joint::AxisMap;
use entropic_pfr::ruzsa::{rdist, RefPair, DEFAULT_ETA};
use entropic_pfr::suites::{
    run_suites, SuiteConfig, SuiteRegistry, DEFAULT_SUITE_DIM, DEFAULT_SUITE_SEED, DEFAULT_TRIALS,
};
use entropic_pfr::Dist;

/// Caps the worker threads of a run.
pub const THREADS_ENV: &str = "ENTROPIC_PFR_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "entropic-pfr",
    version,
    about = "Entropic Ruzsa calculus and coset covers over F_2^n"
)]
pub struct Cli {
    #[arg(long, global = true, default_value_t = DEFAULT_SUITE_SEED)]
    pub seed: u64,
    /// Emit only the final verdict.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Write the report to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the randomized inequality and identity suites.
    Check(CheckArgs),
    /// Run the descent on one of the three worked examples.
    Demo(DemoArgs),
    /// Descend from a pair of distributions and certify the extracted subgroup.
    Descend(DescendArgs),
    /// Cover a set by cosets of a subgroup.
    Cover(CoverArgs),
    /// Endgame quantities of a pair.
    Endgame(EndgameArgs),
    /// Entropy of a distribution.
    Entropy(EntropyArgs),
    /// Ruzsa distance of two distributions.
    Rdist(RdistArgs),
    /// Check the fibring identity on random instances.
    VerifyFibring(FibringArgs),
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long, default_value_t = DEFAULT_SUITE_DIM)]
    pub n: u32,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    /// Sample only point masses.
    #[arg(long)]
    pub point_masses: bool,
    /// Restrict to these suites (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub suite: Vec<String>,
}

#[derive(Args, Debug)]
pub struct FibringArgs {
    #[arg(long, default_value_t = 4)]
    pub n: u32,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Selection {
    Tiered,
    BestOverall,
}

#[derive(Args, Debug, Clone)]
pub struct DescentArgs {
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_D)]
    pub eps_d: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_STEP)]
    pub eps_step: f64,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = Selection::Tiered)]
    pub selection: Selection,
    /// Restrict to these move classes (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub moves: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
}

impl DescentArgs {
    fn config(&self) -> DescentConfig {
        DescentConfig {
            eps_d: self.eps_d,
            eps_step: self.eps_step,
            max_iter: self.max_iter,
            budget: self.budget,
            selection: match self.selection {
                Selection::Tiered => SelectionRule::Tiered,
                Selection::BestOverall => SelectionRule::BestOverall,
            },
            ..DescentConfig::default()
        }
    }

    fn registry(&self) -> anyhow::Result<MoveRegistry> {
        Ok(if self.moves.is_empty() {
            MoveRegistry::default()
        } else {
            MoveRegistry::select(&self.moves)?
        })
    }
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    /// Example number: 1, 2 or 3.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    pub example: u8,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Cosets per set (examples 2 and 3).
    #[arg(long)]
    pub cosets: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[command(flatten)]
    pub descent: DescentArgs,
}

#[derive(Args, Debug)]
pub struct DescendArgs {
    /// Starting X1: Dist JSON, dense CSV or set file.
    pub x1: PathBuf,
    /// Starting X2; defaults to X1.
    pub x2: Option<PathBuf>,
    /// Reference X0_1; defaults to X1.
    #[arg(long)]
    pub ref1: Option<PathBuf>,
    /// Reference X0_2; defaults to X2.
    #[arg(long)]
    pub ref2: Option<PathBuf>,
    #[command(flatten)]
    pub descent: DescentArgs,
}

#[derive(Args, Debug)]
pub struct CoverArgs {
    /// Set file.
    pub set: PathBuf,
    #[arg(long, default_value_t = DEFAULT_C_EXPONENT)]
    pub c_exponent: f64,
    #[command(flatten)]
    pub descent: DescentArgs,
}

#[derive(Args, Debug)]
pub struct EndgameArgs {
    pub x1: PathBuf,
    pub x2: Option<PathBuf>,
    /// Include the joint table of (U, V, S).
    #[arg(long)]
    pub tables: bool,
}

#[derive(Args, Debug)]
pub struct EntropyArgs {
    pub file: PathBuf,
}

#[derive(Args, Debug)]
pub struct RdistArgs {
    pub x: PathBuf,
    pub y: PathBuf,
}

/// Runs the CLI with the default suites.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_suites(args, SuiteRegistry::default(), out)
}

/// Runs the CLI with a caller-supplied suite registry; errors go to stderr.
pub fn run_with_suites<I, T>(args: I, suites: SuiteRegistry, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = with_thread_cap(|| dispatch(&cli, suites, out));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn thread_cap() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

fn with_thread_cap<F>(f: F) -> anyhow::Result<i32>
where
    F: FnOnce() -> anyhow::Result<i32> + Send,
{
    match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(f),
        None => f(),
    }
}

/// Writes to the `--output` file when given, else to `out`.
struct Sink<'a> {
    file: Option<BufWriter<File>>,
    out: &'a mut (dyn Write + Send),
}

impl<'a> Sink<'a> {
    fn new(path: Option<&Path>, out: &'a mut (dyn Write + Send)) -> anyhow::Result<Self> {
        let file = match path {
            Some(p) => Some(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => None,
        };
        Ok(Self { file, out })
    }

    fn writer(&mut self) -> &mut dyn Write {
        match &mut self.file {
            Some(f) => f,
            None => self.out,
        }
    }

    fn line<T: Serialize>(&mut self, value: &T) -> anyhow::Result<()> {
        let w = self.writer();
        serde_json::to_writer(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    }

    fn document<T: Serialize>(&mut self, value: &T) -> anyhow::Result<()> {
        let w = self.writer();
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    }

    fn finish(mut self) -> anyhow::Result<()> {
        self.writer().flush()?;
        Ok(())
    }
}

fn read_dist(path: &Path) -> anyhow::Result<Dist> {
    read_dist_any(path).with_context(|| format!("reading {}", path.display()))
}

fn dispatch(cli: &Cli, suites: SuiteRegistry, out: &mut (dyn Write + Send)) -> anyhow::Result<i32> {
    let mut sink = Sink::new(cli.output.as_deref(), out)?;
    let code = match &cli.command {
        Command::Check(a) => cmd_check(cli, a, suites, &mut sink)?,
        Command::VerifyFibring(a) => {
            let reg = suites.select(&["fibring".to_string(), "cor-fibre".to_string()])?;
            let check = CheckArgs {
                n: a.n,
                trials: a.trials,
                point_masses: false,
                suite: Vec::new(),
            };
            cmd_check(cli, &check, reg, &mut sink)?
        }
        Command::Demo(a) => cmd_demo(cli, a, &mut sink)?,
        Command::Descend(a) => cmd_descend(cli, a, &mut sink)?,
        Command::Cover(a) => cmd_cover(cli, a, &mut sink)?,
        Command::Endgame(a) => cmd_endgame(cli, a, &mut sink)?,
        Command::Entropy(a) => {
            let d = read_dist(&a.file)?;
            sink.line(
                &json!({ "entropy": d.entropy(), "dim": d.dim(), "support": d.support_size() }),
            )?;
            EXIT_OK
        }
        Command::Rdist(a) => {
            let (x, y) = (read_dist(&a.x)?, read_dist(&a.y)?);
            sink.line(&json!({ "rdist": rdist(&x, &y)? }))?;
            EXIT_OK
        }
    };
    sink.finish()?;
    Ok(code)
}

fn cmd_check(
    cli: &Cli,
    a: &CheckArgs,
    suites: SuiteRegistry,
    sink: &mut Sink,
) -> anyhow::Result<i32> {
    let reg = if a.suite.is_empty() {
        suites
    } else {
        suites.select(&a.suite)?
    };
    let cfg = SuiteConfig {
        seed: cli.seed,
        n: a.n,
        trials: a.trials,
        point_masses: a.point_masses,
    };
    let outcome = run_suites(&reg, &cfg)?;
    if !cli.quiet {
        for r in &outcome.records {
            sink.line(r)?;
        }
    }
    let verdict = if outcome.passed() { "pass" } else { "fail" };
    sink.line(&json!({
        "verdict": verdict,
        "suites": outcome.suites_run,
        "reports": outcome.records.len(),
        "seed": cfg.seed,
        "n": cfg.n,
        "trials": cfg.trials,
    }))?;
    match &outcome.counterexample {
        Some(cex) => {
            sink.line(&json!({ "counterexample": cex }))?;
            Ok(EXIT_FAILED)
        }
        None => Ok(EXIT_OK),
    }
}

fn cmd_demo(cli: &Cli, a: &DemoArgs, sink: &mut Sink) -> anyhow::Result<i32> {
    let mut params = DemoParams::default_for(a.example)?;
    params.seed = cli.seed;
    if let Some(n) = a.n {
        params.n = n;
    }
    if let Some(r) = a.rank {
        params.rank = r;
    }
    if let Some(m) = a.cosets {
        params.m = m;
    }
    if let Some(d) = a.density {
        params.density = d;
    }
    let d = demo(a.example, &params)?;
    let run = run_demo(
        d,
        &a.descent.registry()?,
        a.descent.eta,
        &a.descent.config(),
        a.descent.theta,
    )?;
    if cli.quiet {
        sink.line(&json!({
            "demo": a.example,
            "first_move": run.first_move,
            "expected_first_move": run.expected_first_move,
            "first_move_matches": run.first_move_matches,
            "sum_fibre_rejected": run.sum_fibre_rejected,
            "converged": run.state.converged,
            "k": run.state.k,
            "certificate_holds": run.certificate.holds(),
        }))?;
    } else {
        sink.document(&run)?;
    }
    Ok(EXIT_OK)
}

fn cmd_descend(cli: &Cli, a: &DescendArgs, sink: &mut Sink) -> anyhow::Result<i32> {
    let x1 = read_dist(&a.x1)?;
    let x2 = match &a.x2 {
        Some(p) => read_dist(p)?,
        None => x1.clone(),
    };
    let r1 = match &a.ref1 {
        Some(p) => read_dist(p)?,
        None => x1.clone(),
    };
    let r2 = match &a.ref2 {
        Some(p) => read_dist(p)?,
        None => x2.clone(),
    };
    let reference = RefPair::new(r1, r2, a.descent.eta)?;
    let state = descend_with(
        &a.descent.registry()?,
        &x1,
        &x2,
        &reference,
        &a.descent.config(),
    )?;
    let fit = extract_subgroup(&state.x1, a.descent.theta)?;
    let certificate = SubgroupCertificate::new(fit.subgroup.clone(), &reference)?;
    if cli.quiet {
        sink.line(&json!({
            "stop": state.stop,
            "converged": state.converged,
            "steps": state.trace.len(),
            "k": state.k,
            "tau": state.tau,
            "certificate_holds": certificate.holds(),
        }))?;
    } else {
        sink.document(&json!({ "state": state, "fit": fit, "certificate": certificate }))?;
    }
    Ok(if certificate.holds() {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn cmd_cover(cli: &Cli, a: &CoverArgs, sink: &mut Sink) -> anyhow::Result<i32> {
    let set = read_set(&a.set).with_context(|| format!("reading {}", a.set.display()))?;
    let mut cfg = CoverConfig {
        eta: a.descent.eta,
        c_exponent: a.c_exponent,
        ..CoverConfig::default()
    };
    cfg.pfr.descent = a.descent.config();
    cfg.pfr.theta = a.descent.theta;
    let cover = pfr_pipeline(&set, &cfg)?;
    if cli.quiet {
        sink.line(&json!({
            "certified": cover.certified,
            "translates": cover.translates.len(),
            "subgroup_size": cover.subgroup_size,
            "set_size": cover.set_size,
            "doubling": cover.doubling,
        }))?;
    } else {
        sink.document(&cover)?;
    }
    Ok(if cover.certified {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn cmd_endgame(cli: &Cli, a: &EndgameArgs, sink: &mut Sink) -> anyhow::Result<i32> {
    let x1 = read_dist(&a.x1)?;
    let x2 = match &a.x2 {
        Some(p) => read_dist(p)?,
        None => x1.clone(),
    };
    if x1.dim() > MAX_DENSE_ENDGAME_DIM && a.tables {
        bail!("tables are only dumped for n <= {MAX_DENSE_ENDGAME_DIM}");
    }
    let t = endgame_tables(&x1, &x2)?;
    let uv = t
        .joint_uvs
        .pushforward(&AxisMap::new(vec![("U", vec![0]), ("V", vec![1])]))?;
    let bsg = bsg_check(&uv)?;
    let summary = t.summary();
    if cli.quiet {
        sink.line(
            &json!({ "i1": summary.i1, "i2": summary.i2, "i3": summary.i3, "k": summary.k }),
        )?;
    } else if a.tables {
        sink.document(&json!({ "summary": summary, "bsg_uv": bsg, "joint_uvs": t.joint_uvs }))?;
    } else {
        sink.document(&json!({ "summary": summary, "bsg_uv": bsg }))?;
    }
    Ok(EXIT_OK)
}
