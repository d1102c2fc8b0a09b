use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kzqfi::model::{antiperiodic_momenta, spectrum_epsilon_k};
use kzqfi::oracles::lz_probability;
use kzqfi_cli::{
    exit, fit_command, ground_state_report, run_single, run_sweep, CliError, ConfigLoader, Engine, FitMode,
    FitOptions, Result, RunConfig,
};

#[derive(Parser)]
#[command(name = "kzqfi", version, about = "Slow quenches of the transverse-field Ising chain")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Override a config key, e.g. `--set tebd.dt=0.01`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Mps,
    Dense,
    Ff,
}

impl EngineArg {
    fn name(self) -> &'static str {
        match self {
            EngineArg::Mps => "mps",
            EngineArg::Dense => "dense",
            EngineArg::Ff => "ff",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FiniteSize,
    PowerLaw,
    KzPredict,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare a ground state and report its energy and σx profile.
    GroundState {
        /// Field (defaults to `schedule.g_start`).
        #[arg(long)]
        g: Option<f64>,
    },
    /// Run one quench with the configured engine.
    Quench,
    /// Run the Cartesian product of the `[sweep]` axes.
    Sweep,
    /// Fit a records CSV.
    Fit {
        records: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "power-law")]
        mode: ModeArg,
        #[arg(long, default_value = "f_q")]
        column: String,
        /// Extrapolate each rate over 1/N before the power-law fit.
        #[arg(long)]
        extrapolate: bool,
        #[arg(long)]
        tau_q: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        universality: Universality,
        /// Also write the report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a quench on an exact engine (dense state vector or free fermions).
    Oracle {
        #[arg(long, value_enum, default_value = "dense")]
        kind: OracleKind,
    },
    /// Print the Bogoliubov spectrum on the antiperiodic momentum grid.
    Spectrum {
        #[arg(long)]
        g: f64,
        /// Also print the Landau-Zener probability for this rate.
        #[arg(long)]
        tau_q: Option<f64>,
    },
    /// Kibble-Zurek exponents for a power-law ramp.
    Predict {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[command(flatten)]
        universality: Universality,
    },
}

#[derive(Args, Clone, Copy)]
struct Universality {
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    z: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Dense,
    Ff,
}

fn loader(g: &Global) -> Result<ConfigLoader> {
    let mut l = match &g.config {
        Some(path) => ConfigLoader::from_file(path)?,
        None => ConfigLoader::default(),
    };
    for s in &g.sets {
        l = l.set(s)?;
    }
    if let Some(out) = &g.out {
        l = l.set_value("output_dir", toml::Value::String(out.to_string_lossy().into_owned()))?;
    }
    if let Some(seed) = g.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::config("seed", "must fit in a signed 64-bit integer"))?;
        l = l.set_value("seed", toml::Value::Integer(seed))?;
    }
    if let Some(e) = g.engine {
        l = l.set_value("engine", toml::Value::String(e.name().into()))?;
    }
    Ok(l)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    let loader = loader(g)?;
    if g.print_config {
        let text = match &cli.command {
            Command::Sweep => {
                let s = loader.into_sweep()?;
                let mut t = toml::Table::try_from(&s.base).map_err(|e| CliError::Serialization(e.to_string()))?;
                let axes: toml::Table = s.axes.into_iter().map(|(k, v)| (k, toml::Value::Array(v))).collect();
                let mut sweep = toml::Table::new();
                sweep.insert("axes".into(), axes.into());
                if let Some(m) = s.max_concurrency {
                    sweep.insert("max_concurrency".into(), (m as i64).into());
                }
                t.insert("sweep".into(), sweep.into());
                toml::to_string(&t).map_err(|e| CliError::Serialization(e.to_string()))?
            }
            _ => loader.resolve()?.to_toml()?,
        };
        print!("{text}");
        return Ok(exit::SUCCESS);
    }

    match cli.command {
        Command::GroundState { g: field } => {
            let cfg = loader.resolve()?;
            let field = field.unwrap_or(cfg.schedule.g_start);
            print_json(&ground_state_report(&cfg, field)?)?;
        }
        Command::Quench => quench(loader.resolve()?)?,
        Command::Oracle { kind } => {
            let mut cfg = loader.resolve()?;
            cfg.engine = match kind {
                OracleKind::Dense => Engine::Dense,
                OracleKind::Ff => Engine::Ff,
            };
            quench(cfg)?;
        }
        Command::Sweep => {
            let sweep = loader.into_sweep()?;
            let summary = run_sweep(&sweep, !g.quiet)?;
            if !g.quiet {
                eprintln!(
                    "{} cells: {} run, {} reused, {} failed",
                    summary.total, summary.completed, summary.skipped, summary.failed
                );
            }
            for c in summary.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!("failed {}: {}", c.name, c.error.as_deref().unwrap_or(""));
            }
            return Ok(summary.exit_code());
        }
        Command::Fit {
            records,
            mode,
            column,
            extrapolate,
            tau_q,
            alpha,
            n,
            universality,
            output,
        } => {
            let opts = FitOptions {
                mode: match mode {
                    ModeArg::FiniteSize => FitMode::FiniteSize,
                    ModeArg::PowerLaw => FitMode::PowerLaw,
                    ModeArg::KzPredict => FitMode::KzPredict,
                },
                column,
                extrapolate,
                engine: g.engine.map(|e| e.name().to_string()),
                tau_q,
                alpha,
                n,
                universality: (universality.d, universality.nu, universality.z),
            };
            let report = fit_command(records.as_deref(), &opts)?;
            if let Some(path) = output {
                let text = serde_json::to_string_pretty(&report)?;
                std::fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
            }
            print_json(&report)?;
        }
        Command::Spectrum { g: field, tau_q } => {
            let cfg = loader.resolve()?;
            let n = cfg
                .sites()
                .filter(|n| n % 2 == 0)
                .ok_or_else(|| CliError::config("model.n", "the momentum grid needs an even, finite N"))?;
            let mut w = csv::Writer::from_writer(std::io::stdout());
            if tau_q.is_some() {
                w.write_record(["k", "epsilon_k", "p_lz"])?;
            } else {
                w.write_record(["k", "epsilon_k"])?;
            }
            for k in antiperiodic_momenta(n) {
                let mut row = vec![k.to_string(), spectrum_epsilon_k(field, k).to_string()];
                if let Some(t) = tau_q {
                    row.push(lz_probability(k, t).to_string());
                }
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| CliError::io("writing spectrum", e))?;
        }
        Command::Predict { alpha, universality } => {
            let p = kzqfi::kz_predict(universality.d, universality.nu, universality.z, alpha)?;
            print_json(&p)?;
        }
    }
    Ok(exit::SUCCESS)
}

fn quench(cfg: RunConfig) -> Result<()> {
    let out = run_single(&cfg)?;
    print_json(&out.row)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
