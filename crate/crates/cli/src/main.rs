use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use samprec_cli::commands::{self, error_exit_code, CommandOutput};
use samprec_cli::{Algorithm, ExperimentConfig, SystemKind};
use samprec_core::discretization::Sidedness;

#[derive(Parser)]
#[command(name = "samprec", version, about = "Sparse sampling recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify random points for every subspace of the collection.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "one")]
        sided: Sided,
        /// Fail unless the constant is at most this value.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Draw point sets until one is certified at the target constant.
    SearchPoints {
        #[command(flatten)]
        common: Common,
    },
    /// Recover a single test function.
    Recover {
        #[command(flatten)]
        common: Common,
    },
    /// Lebesgue-ratio sweep over many test functions.
    Lebesgue {
        #[command(flatten)]
        common: Common,
    },
    /// Bessel, Riesz and incoherence constants of a system.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Discretization constant used for V = D·√K.
        #[arg(long = "D", default_value_t = 1.0)]
        d: f64,
        /// Also run the brute-force incoherence search.
        #[arg(long)]
        brute: bool,
    },
    /// Monte Carlo check of the modulus of smoothness of discrete L_p.
    Smoothness {
        #[command(flatten)]
        common: Common,
        /// Exponents to check (default 2, 3, 4, 6).
        #[arg(long = "ps", value_delimiter = ',')]
        ps: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sided {
    One,
    Two,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for `<command>.csv` and `<command>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// trig | lacunary | perturbed
    #[arg(long, value_parser = parse_enum::<SystemKind>)]
    system: Option<SystemKind>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "G")]
    grid_size: Option<usize>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    perturbation: Option<f64>,
    #[arg(long)]
    system_seed: Option<u64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    v: Option<usize>,
    #[arg(long)]
    u: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// wcga | alg1 | alg2 | lpw
    #[arg(long, value_parser = parse_enum::<Algorithm>)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "target-D")]
    target_d: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_ratio: Option<f64>,
}

impl Common {
    fn config(&self) -> samprec_core::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(x) = self.$field { cfg.$target = x; })*
            };
        }
        set!(seed => seed, system => system, n => n, grid_size => grid_size, b => b,
             perturbation => perturbation, system_seed => system_seed, p => p, v => v,
             m => m, runs => runs, noise => noise, algorithm => algorithm, t => t,
             target_d => target_d, trials => search_trials, restarts => restarts,
             max_ratio => max_ratio);
        if self.u.is_some() {
            cfg.u = self.u;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse a config enum from its snake_case name.
fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown value `{s}`"))
}

fn emit(out: &CommandOutput, common: &Common) -> std::io::Result<()> {
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.csv", out.name)), &out.csv)?;
        std::fs::write(dir.join(format!("{}.json", out.name)), &out.json)?;
    }
    match common.format {
        Format::Csv => print!("{}", out.csv),
        Format::Json => println!("{}", out.json),
    }
    Ok(())
}

fn run(command: &Command) -> Result<(CommandOutput, &Common), i32> {
    let fail = |e: samprec_core::Error| {
        eprintln!("error: {e}");
        error_exit_code(&e)
    };
    let result = match command {
        Command::Certify { common, sided, target } => {
            let sided = match sided {
                Sided::One => Sidedness::OneSided,
                Sided::Two => Sidedness::TwoSided,
            };
            common
                .config()
                .and_then(|cfg| commands::certify(&cfg, sided, *target))
                .map(|o| (o, common))
        }
        Command::SearchPoints { common } => common
            .config()
            .and_then(|cfg| commands::search_points(&cfg))
            .map(|o| (o, common)),
        Command::Recover { common } => common
            .config()
            .and_then(|cfg| commands::experiment(&ExperimentConfig { runs: 1, ..cfg }, "recover"))
            .map(|o| (o, common)),
        Command::Lebesgue { common } => common
            .config()
            .and_then(|cfg| commands::experiment(&cfg, "lebesgue"))
            .map(|o| (o, common)),
        Command::Analyze { common, d, brute } => common
            .config()
            .and_then(|cfg| commands::analyze(&cfg, *d, *brute))
            .map(|o| (o, common)),
        Command::Smoothness {
            common,
            ps,
            samples,
            dim,
        } => {
            let ps = if ps.is_empty() {
                common.p.map_or_else(|| vec![2.0, 3.0, 4.0, 6.0], |p| vec![p])
            } else {
                ps.clone()
            };
            commands::smoothness(&ps, *samples, *dim, common.seed.unwrap_or(0)).map(|o| (o, common))
        }
    };
    result.map_err(fail)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok((out, common)) => {
            if let Err(e) = emit(&out, common) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(out.status.exit_code() as u8)
        }
        Err(code) => ExitCode::from(code as u8),
    }
}
