use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simgap_core::pipeline::{self, ExperimentConfig, Method, PipelineError};

#[derive(Parser)]
#[command(name = "simgap", version, about = "Reward search, physics prior and DR synthesis on toy sim-to-real tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run directory; created if absent.
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum BaselineKind {
    CemRandom,
    CemRapp,
    BayrnRapp,
}

impl From<BaselineKind> for Method {
    fn from(k: BaselineKind) -> Method {
        match k {
            BaselineKind::CemRandom => Method::CemRandom,
            BaselineKind::CemRapp => Method::CemRapp,
            BaselineKind::BayrnRapp => Method::BayrnRapp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reward search; writes the reward, the initial policy and the search history.
    Eureka(Common),
    /// Physics-prior sweep of the initial policy.
    Rapp(Common),
    /// Propose DR configurations for every method in the matrix.
    DrPropose(Common),
    /// Train final policies for every (config, seed).
    DrTrain(Common),
    /// Evaluate trained policies in the target world.
    TransferEval(Common),
    /// Black-box DR baselines.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Run a single kind instead of every baseline in the matrix.
        #[arg(long, value_enum)]
        kind: Option<BaselineKind>,
    },
    /// Markdown and CSV summary of a run directory.
    Report(Common),
    /// Every enabled stage in order.
    Run(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Eureka(c)
            | Command::Rapp(c)
            | Command::DrPropose(c)
            | Command::DrTrain(c)
            | Command::TransferEval(c)
            | Command::Report(c)
            | Command::Run(c) => c,
            Command::Baseline { common, .. } => common,
        }
    }
}

/// Copies log output to stderr and to a file in the run directory.
struct Tee(Mutex<Option<File>>);

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        std::io::stderr().write_all(buf)?;
        if let Some(f) = self.0.get_mut().expect("lock").as_mut() {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        if let Some(f) = self.0.get_mut().expect("lock").as_mut() {
            f.flush()?;
        }
        std::io::stderr().flush()
    }
}

fn init_logging(run_dir: &Path) {
    let file = std::fs::create_dir_all(run_dir.join("logs"))
        .and_then(|_| File::options().create(true).append(true).open(run_dir.join("logs/simgap.log")))
        .ok();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(Tee(Mutex::new(file)))))
        .init();
}

fn run(cmd: &Command) -> Result<(), PipelineError> {
    let c = cmd.common();
    if let Command::Report(_) = cmd {
        return pipeline::cmd_report(&c.run_dir);
    }
    let cfg = ExperimentConfig::load(&c.config)?;
    match cmd {
        Command::Eureka(_) => pipeline::cmd_eureka(&cfg, &c.run_dir),
        Command::Rapp(_) => pipeline::cmd_rapp(&cfg, &c.run_dir),
        Command::DrPropose(_) => pipeline::cmd_dr_propose(&cfg, &c.run_dir),
        Command::DrTrain(_) => pipeline::cmd_dr_train(&cfg, &c.run_dir),
        Command::TransferEval(_) => pipeline::cmd_transfer_eval(&cfg, &c.run_dir),
        Command::Baseline { kind, .. } => {
            let kinds: Option<Vec<Method>> = kind.map(|k| vec![k.into()]);
            pipeline::cmd_baseline(&cfg, &c.run_dir, kinds.as_deref())
        }
        Command::Run(_) => pipeline::run_pipeline(&cfg, &c.run_dir),
        Command::Report(_) => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.command.common().run_dir);
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
