use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nctorus_cli::{run, validate, Config, RunError};

#[derive(Parser)]
#[command(name = "nctorus", about = "Experiment runner for the noncommutative-torus engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override a top-level config key, e.g. --set alpha=0.25
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Worker threads (default 1 for bit-reproducible output).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Output directory (falls back to config, then $NCTORUS_OUT, then runs/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and resolve a config without running it.
    Validate { config: PathBuf },
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::to_string(&serde_json::json!({"error": kind, "message": message})).unwrap()
}

fn load_config(path: &PathBuf, sets: &[String]) -> Result<Config, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = Config::from_json_str(&text).map_err(|e| e.to_string())?;
    for kv in sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        cfg.apply_override(k, v).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load_config(&config, &[]) {
            Ok(cfg) => match validate(&cfg) {
                Ok(()) => {
                    println!("ok");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}", error_json("config", &e.to_string()));
                    ExitCode::from(2)
                }
            },
            Err(e) => {
                eprintln!("{}", error_json("config", &e));
                ExitCode::from(2)
            }
        },
        Command::Run { config, set, threads, out } => {
            let cfg = match load_config(&config, &set) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}", error_json("config", &e));
                    return ExitCode::from(2);
                }
            };
            if threads > 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            } else {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
            }
            let out_dir = out
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .or_else(|| std::env::var("NCTORUS_OUT").ok().map(PathBuf::from))
                .unwrap_or_else(|| {
                    let name = serde_json::to_value(cfg.experiment)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_else(|| "experiment".to_string());
                    PathBuf::from("runs").join(name)
                });
            match run(&cfg, &out_dir) {
                Ok(output) => {
                    println!("{}", output.manifest_path.display());
                    ExitCode::SUCCESS
                }
                Err(RunError::Config(e)) => {
                    eprintln!("{}", error_json("config", &e.to_string()));
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("{}", error_json("experiment", &e.to_string()));
                    ExitCode::from(3)
                }
            }
        }
    }
}
