use clap::Parser;
use qnls_cli::{emit_report, parse_config, run_scenario, CliError, Outcome, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "qnls", version, about = "Radial simulations of the quadratic Schrödinger system in six dimensions")]
struct Args {
    /// ground-state, spectrum, special, evolve, modulate, dichotomy or report
    scenario: Scenario,
    /// Scenario config (sectioned text or JSON); optional for `report`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
}

fn execute(args: Args) -> Result<(), CliError> {
    if args.scenario == Scenario::Report && args.config.is_none() {
        let dir = args.out.unwrap_or_else(|| PathBuf::from("out"));
        let rep = emit_report(&dir)?;
        print!("{}", rep.to_text());
        return Ok(());
    }
    let path = args.config.ok_or_else(|| CliError::Config { line: 0, msg: format!("--config is required for `{}`", args.scenario) })?;
    let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let mut cfg = parse_config(&text)?;
    if cfg.scenario != args.scenario {
        return Err(CliError::Config { line: 0, msg: format!("config is for `{}`, not `{}`", cfg.scenario, args.scenario) });
    }
    if let Some(o) = args.out {
        cfg.output = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    match run_scenario(&cfg)? {
        Outcome::Report(rep) => print!("{}", rep.to_text()),
        Outcome::Summary(s) => {
            println!("{} -> {}", s.scenario, cfg.output.display());
            for (k, v) in &s.metrics {
                println!("  {k} = {v:.10e}");
            }
            for r in &s.runs {
                println!("  {} [{}] {}", r.label, r.recipe, r.classification.as_deref().unwrap_or("done"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
