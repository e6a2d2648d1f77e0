use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use dff::harness::{
    self, adversarial_search, export_results, run_trials, Check, SearchConfig, SuiteConfig,
    SuiteOutcome, TrialConfig,
};
use dff::learners::LearnerSpec;
use dff::protocol::{serve_stdio, serve_tcp};
use dff::world::{generate_world, load_world, save_world, Scenario, WorldGenParams};

#[derive(Parser)]
#[command(name = "dff-lab", version, about = "Discriminative feature feedback simulator and bound checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    Theorem1,
    Theorem2,
    Theorem3,
    Stochastic,
    Lemmas,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random world.
    Gen {
        /// Generator parameters: a JSON object or a path to one.
        #[arg(long, default_value = "{}")]
        params: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario file for a number of seeded trials.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-trial JSONL transcripts.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Skip the per-round invariant monitor.
        #[arg(long)]
        no_invariants: bool,
    },
    /// Run a verification suite and write its bound reports as CSV.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
        /// Trials per cell, overriding the suite default.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search for short scripts that maximize a learner's mistakes.
    Search {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        len: usize,
        /// Learner as JSON, e.g. '{"name":"srdff","m":3}'. Defaults to SR-DFF
        /// with the world's size.
        #[arg(long)]
        learner: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve learner sessions over the line-delimited JSON protocol.
    Serve {
        #[arg(long, conflicts_with = "listen")]
        stdio: bool,
        #[arg(long)]
        listen: Option<String>,
        /// Stop after this many connections.
        #[arg(long)]
        max_sessions: Option<usize>,
    },
}

fn json_arg<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {arg}"))
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn print_outcome(out: &SuiteOutcome) {
    for r in &out.reports {
        let s = &r.summary;
        println!(
            "{} {} m={} k={} trials={} mean={:.3} violations={}",
            if s.pass { "PASS" } else { "FAIL" },
            r.learner,
            r.m,
            r.k_or_eps,
            r.trials.len(),
            s.mean,
            s.violations.len()
        );
    }
    for v in out.violations.iter().take(20) {
        println!(
            "FAIL invariant {} m={} k={} trial={} seed={}: {}",
            v.learner, v.m, v.k, v.trial, v.seed, v.violation
        );
    }
    if out.violations.len() > 20 {
        println!("... {} invariant violations in total", out.violations.len());
    }
    print_checks(&out.checks);
}

fn with_overrides(mut cfg: SuiteConfig, trials: Option<usize>, seed: Option<u64>) -> SuiteConfig {
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn verify(suite: Suite, out: &Path, trials: Option<usize>, seed: Option<u64>) -> Result<bool> {
    let hard = with_overrides(SuiteConfig::hard_default(), trials, seed);
    let expectation = with_overrides(SuiteConfig::expectation_default(), trials, seed);
    let outcome = match suite {
        Suite::Theorem1 => harness::theorem1(&hard)?,
        Suite::Theorem2 => harness::theorem2(&hard)?,
        Suite::Theorem3 => harness::theorem3(&expectation)?,
        Suite::Lemmas => harness::lemmas(&hard, &expectation)?,
        Suite::Stochastic => harness::stochastic(seed.unwrap_or(hard.seed))?,
    };
    print_outcome(&outcome);
    export_results(&outcome.reports, out)?;
    Ok(outcome.passed())
}

fn run(
    scenario: &Path,
    trials: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    transcripts: Option<&Path>,
    invariants: bool,
) -> Result<bool> {
    let (scenario, world) =
        Scenario::load(scenario).with_context(|| format!("loading {}", scenario.display()))?;
    let mut cfg = TrialConfig::new(scenario, world);
    cfg.invariants = invariants;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let outcome = run_trials(&cfg)?;
    export_results(std::slice::from_ref(&outcome.report), out)?;
    if let Some(dir) = transcripts {
        fs::create_dir_all(dir)?;
        for (i, tr) in outcome.transcripts.iter().enumerate() {
            fs::write(dir.join(format!("trial_{i:04}.jsonl")), tr.to_jsonl())?;
        }
        if !outcome.stages.is_empty() {
            fs::write(dir.join("stages.json"), serde_json::to_string_pretty(&outcome.stages)?)?;
        }
    }
    let s = &outcome.report.summary;
    println!(
        "{} {} trials={} mean mistakes={:.3} failing trials={}",
        if outcome.passed() { "PASS" } else { "FAIL" },
        outcome.report.learner,
        outcome.report.trials.len(),
        s.mean,
        s.violations.len()
    );
    for v in outcome.violations.iter().take(20) {
        println!("FAIL invariant trial={} seed={}: {}", v.trial, v.seed, v.violation);
    }
    Ok(outcome.passed())
}

fn search(world: &Path, k: usize, len: usize, learner: Option<&str>, budget: u64, seed: u64) -> Result<bool> {
    let world = load_world(world).with_context(|| format!("loading {}", world.display()))?;
    let spec: LearnerSpec = match learner {
        Some(l) => json_arg(l)?,
        None => LearnerSpec::Srdff { m: world.m() },
    };
    let result = adversarial_search(&world, &spec, &SearchConfig { len, k, budget, seed })?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(result.violations.is_empty())
}

fn serve(stdio: bool, listen: Option<&str>, max_sessions: Option<usize>) -> Result<bool> {
    match (stdio, listen) {
        (true, _) => {
            let summary = serve_stdio()?;
            log::info!("session ended: {summary:?}");
            Ok(summary.error.is_none())
        }
        (false, Some(addr)) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(listener, max_sessions)?;
            Ok(true)
        }
        (false, None) => bail!("serve needs --stdio or --listen host:port"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { params, out } => json_arg::<WorldGenParams>(&params)
            .and_then(|p| Ok(generate_world(&p)?))
            .and_then(|w| Ok(save_world(&w, &out)?))
            .map(|_| true),
        Command::Run {
            scenario,
            trials,
            seed,
            out,
            transcripts,
            no_invariants,
        } => run(&scenario, trials, seed, &out, transcripts.as_deref(), !no_invariants),
        Command::Verify {
            suite,
            out,
            trials,
            seed,
        } => verify(suite, &out, trials, seed),
        Command::Search {
            world,
            k,
            len,
            learner,
            budget,
            seed,
        } => search(&world, k, len, learner.as_deref(), budget, seed),
        Command::Serve {
            stdio,
            listen,
            max_sessions,
        } => serve(stdio, listen.as_deref(), max_sessions),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
