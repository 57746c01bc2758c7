//! Command-line entry point: parses flags into an `ExperimentConfig`, runs
//! the experiment, prints the JSON record, and exits nonzero on failure.

use acid_lab::cli::{run, ExperimentConfig, RunMode};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => RunMode::Exact,
            ModeArg::Sampled => RunMode::Sampled,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "acid-lab",
    about = "Average-case channel distance laboratory: identities, norms, \
             certification algorithms, concentration experiments, tomography."
)]
struct Cli {
    /// Master seed (mandatory; all randomness derives from it).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Load an ExperimentConfig JSON file; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for JSON records and CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// exact: closed-form oracles only; sampled: Monte Carlo simulation.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    /// Budget multiplier applied to printed algorithm constants.
    #[arg(long, global = true)]
    scale: Option<f64>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exactly checkable algebraic identities.
    Identities,
    /// Norm relations (sandwich, witness, upper bound) on a seeded channel pair.
    Norms {
        #[arg(long, default_value_t = 3)]
        d: usize,
    },
    /// The symmetric/antisymmetric channel pair: ACID 2, induced 4/(d+1).
    Watrous {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Expected ρ-norm brackets over reduced Haar ensembles.
    Concentration {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Tail bounds on the ρ norm.
    Tails {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Certification algorithm contract runs (near/far corpus).
    Certify {
        /// Algorithm number, 1 through 5.
        #[arg(long)]
        alg: u8,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Advantage curves for the lower-bound channel families (CSV output).
    Lowerbound {
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        ensemble: Option<u64>,
    },
    /// Choi reconstruction plus CPTP projection.
    Tomography {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Reduced-budget run of every family.
    Selftest,
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, String> {
    let mut config: ExperimentConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bad config JSON: {e}"))?
        }
        None => ExperimentConfig {
            subcommand: String::new(),
            seed: 0,
            dims: vec![],
            epsilon: None,
            samples: None,
            trials: None,
            algorithm: None,
            scale: 1.0,
            mode: RunMode::Sampled,
            out_dir: None,
        },
    };
    if cli.config.is_none() && cli.command.is_none() {
        return Err("a subcommand or --config file is required".into());
    }
    match cli.command {
        None => {}
        Some(Command::Identities) => config.subcommand = "identities".into(),
        Some(Command::Norms { d }) => {
            config.subcommand = "norms".into();
            config.dims = vec![d];
        }
        Some(Command::Watrous { d, samples }) => {
            config.subcommand = "watrous".into();
            config.dims = vec![d];
            if samples.is_some() {
                config.samples = samples;
            }
        }
        Some(Command::Concentration { d, m, samples }) => {
            config.subcommand = "concentration".into();
            config.dims = vec![d, m];
            if samples.is_some() {
                config.samples = samples;
            }
        }
        Some(Command::Tails { d, m, samples }) => {
            config.subcommand = "tails".into();
            config.dims = vec![d, m];
            if samples.is_some() {
                config.samples = samples;
            }
        }
        Some(Command::Certify {
            alg,
            trials,
            epsilon,
        }) => {
            config.subcommand = "certify".into();
            config.algorithm = Some(alg);
            if trials.is_some() {
                config.trials = trials;
            }
            if epsilon.is_some() {
                config.epsilon = epsilon;
            }
        }
        Some(Command::Lowerbound { budget, ensemble }) => {
            config.subcommand = "lowerbound".into();
            if budget.is_some() {
                config.samples = budget;
            }
            if ensemble.is_some() {
                config.trials = ensemble;
            }
        }
        Some(Command::Tomography { epsilon, trials }) => {
            config.subcommand = "tomography".into();
            if epsilon.is_some() {
                config.epsilon = epsilon;
            }
            if trials.is_some() {
                config.trials = trials;
            }
        }
        Some(Command::Selftest) => config.subcommand = "selftest".into(),
    }
    match (cli.seed, cli.config.is_some()) {
        (Some(s), _) => config.seed = s,
        (None, true) => {}
        (None, false) => return Err("--seed is mandatory".into()),
    }
    if let Some(out) = cli.out {
        config.out_dir = Some(out);
    }
    if let Some(mode) = cli.mode {
        config.mode = mode.into();
    }
    if let Some(scale) = cli.scale {
        if scale.is_nan() || scale <= 0.0 {
            return Err("--scale must be positive".into());
        }
        config.scale = scale;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(record) => {
            print!("{}", record.to_json());
            if record.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
