use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use demoflow_cli::synthetic::run_batch;
use demoflow_cli::{Scenario, ScenarioRunner};
use demoflow_core::dom::Corpus;
use demoflow_core::semantics::{HashedEmbedder, Lexicon};
use demoflow_core::session::{Session, SessionConfig};
use demoflow_service::{AppState, SessionHandle};

#[derive(Parser)]
#[command(name = "demoflow", version, about = "Programming-by-demonstration engine for form-filling tasks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a demonstration script, automate the rest of the table and score it.
    Run(RunArgs),
    /// Serve one interactive session over HTTP.
    Serve(ServeArgs),
    /// Generate seeded synthetic tasks and check that demonstrated rows replay
    /// exactly and the next row is completed correctly.
    Synthetic(SyntheticArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long = "tau-catalog", default_value_t = 0.55)]
    tau_catalog: f64,
}

#[derive(Args)]
struct SyntheticArgs {
    /// Seed of the first case; later cases use the following seeds.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    cases: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; the flags below override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    script: Option<PathBuf>,
    /// Expected per-row control states.
    #[arg(long)]
    expect: Option<PathBuf>,
    /// Directory for transcript, catalog and program exports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Page-search threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Catalog-reuse threshold.
    #[arg(long = "tau-catalog")]
    tau_catalog: Option<f64>,
}

impl RunArgs {
    fn scenario(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario {
                corpus: self.corpus.clone().context("--corpus is required without --scenario")?,
                input: self.input.clone().context("--input is required without --scenario")?,
                lexicon: None,
                script: self.script.clone().context("--script is required without --scenario")?,
                expected: None,
                tau: 0.5,
                tau_catalog: 0.55,
            },
        };
        if let Some(p) = &self.corpus {
            s.corpus = p.clone();
        }
        if let Some(p) = &self.input {
            s.input = p.clone();
        }
        if let Some(p) = &self.script {
            s.script = p.clone();
        }
        if self.lexicon.is_some() {
            s.lexicon = self.lexicon.clone();
        }
        if self.expect.is_some() {
            s.expected = self.expect.clone();
        }
        if let Some(t) = self.tau {
            s.tau = t;
        }
        if let Some(t) = self.tau_catalog {
            s.tau_catalog = t;
        }
        Ok(s)
    }
}

fn run(args: RunArgs) -> Result<bool> {
    let mut runner = ScenarioRunner::new(args.scenario()?);
    let exec = runner.run()?;
    print!("{}", exec.report);
    eprintln!("elapsed: {:.3}s", exec.elapsed.as_secs_f64());
    let ok = exec.report.perfect();
    if let Some(dir) = &args.out {
        for path in runner.export_artifacts(dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(ok)
}

fn serve(args: ServeArgs) -> Result<bool> {
    let corpus = Arc::new(Corpus::open(&args.corpus)?);
    let lexicon = match &args.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default(),
    };
    let config = SessionConfig {
        page_threshold: args.tau,
        catalog_threshold: args.tau_catalog,
    };
    let session = Session::new(corpus.clone(), Arc::new(HashedEmbedder::new(lexicon)), config)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let state = AppState {
            session: SessionHandle::spawn(session),
            corpus,
        };
        eprintln!("listening on http://{}", args.addr);
        demoflow_service::serve(&args.addr, state).await
    })?;
    Ok(true)
}

fn synthetic(args: SyntheticArgs) -> Result<bool> {
    let summary = run_batch(args.seed, args.cases);
    for (seed, failure) in &summary.failures {
        println!("seed {seed}: {failure}");
    }
    println!(
        "synthetic: {}/{} cases passed",
        summary.cases - summary.failures.len(),
        summary.cases
    );
    Ok(summary.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(args) => run(args),
        Cmd::Serve(args) => serve(args),
        Cmd::Synthetic(args) => synthetic(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
