use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use flowgen_vqe::config::Mode;
use flowgen_vqe::{run, HarnessError, RunConfig, Summary};

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
        format!("unknown mode `{s}`; expected one of: {}", names.join(", "))
    })
}

/// Flow-generated VQE parameters: training, baselines and reports.
#[derive(Debug, Parser)]
#[command(name = "flowgen-vqe", version)]
struct Cli {
    /// vqe, flow-s, flow-m, generate, warm-start, cost-report, geometry, gen-tfim or exact
    #[arg(value_parser = parse_mode)]
    mode: Mode,
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write metrics as CSV.
    #[arg(long)]
    csv: bool,
}

fn load(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|source| HarnessError::File {
        path: cli.config.clone(),
        source,
    })?;
    let json_err = |source| HarnessError::Json {
        path: cli.config.clone(),
        source,
    };
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    if let Some(obj) = value.as_object_mut() {
        match obj.get("mode").and_then(|m| m.as_str()) {
            Some(m) if m != cli.mode.name() => {
                return Err(HarnessError::Config {
                    field: "mode",
                    message: format!("config says `{m}` but `{}` was requested", cli.mode.name()),
                })
            }
            _ => {
                obj.insert("mode".into(), cli.mode.name().into());
            }
        }
    }
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(json_err)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprint!("{e}");
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
    };
    let result = load(&cli).and_then(|cfg| run(&cfg, cli.csv));
    match result {
        Ok(art) => {
            if let Summary::Exact { instances } = &art.summary {
                for g in instances {
                    println!("{}\t{:.12}", g.instance_label, g.ground_energy);
                }
            }
            println!("summary: {}", art.summary_path.display());
            if let Some(p) = &art.metrics_path {
                println!("metrics: {}", p.display());
            }
            if let Some(p) = &art.csv_path {
                println!("csv: {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
