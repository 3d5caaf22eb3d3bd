use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use grounding::config::{EngineConfig, ROOT_ENV};
use grounding::intention::GoalModel;
use grounding::maintenance::Modality;
use grounding::probnet::most_probable_state;
use grounding::service::SessionStore;
use grounding::session::Session;
use grounding::simkit::{
    self, compute_metrics, export_trace, run_scenario_seeded, verify_trace, ExportFormat, Scenario, TraceLog,
};
use grounding::Network;
use grounding_cli::{repl, server};

#[derive(Parser)]
#[command(name = "grounding", version, about = "Decision-theoretic conversational grounding engine")]
struct Cli {
    /// Directory whose config files replace the shipped defaults.
    #[arg(long, global = true, env = ROOT_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a shipped scenario by name.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Export the trace; the format follows the extension unless given.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<ExportFormat>,
        /// Print the full trace as JSON instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Converse with the engine in the terminal.
    Repl {
        #[arg(long)]
        domain: String,
        #[arg(long, default_value = "spoken_visual")]
        modality: Modality,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        attention: f64,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Serve the session API over HTTP.
    Serve {
        #[arg(long, env = "GROUNDING_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Re-verify every belief in a JSON trace against brute-force enumeration.
    Replay { trace: PathBuf },
    /// Check a config directory, network, domain or scenario file.
    Validate { path: PathBuf },
    /// List the shipped scenarios and domains.
    List,
}

type CliResult = Result<ExitCode, String>;

fn base_config(root: Option<&Path>) -> Result<EngineConfig, String> {
    match root {
        Some(dir) => EngineConfig::from_dir(dir),
        None => Ok(EngineConfig::default()),
    }
    .map_err(|e| e.to_string())
}

fn run(config: &EngineConfig, name: &str, seed: Option<u64>, out: Option<&Path>, format: Option<ExportFormat>, json: bool) -> CliResult {
    let scenario = Scenario::named(name).map_err(|e| e.to_string())?;
    let trace = run_scenario_seeded(&scenario, config, seed.unwrap_or(scenario.seed)).map_err(|e| e.to_string())?;
    if let Some(path) = out {
        let format = format.unwrap_or(if path.extension().is_some_and(|e| e == "json") {
            ExportFormat::Json
        } else {
            ExportFormat::Csv
        });
        export_trace(&trace, format, path).map_err(|e| e.to_string())?;
    }
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let io_err = |e: io::Error| e.to_string();
    if json {
        writeln!(w, "{}", trace.to_json().map_err(|e| e.to_string())?).map_err(io_err)?;
        return Ok(ExitCode::SUCCESS);
    }
    writeln!(w, "{} on {} (seed {})", scenario.name, trace.domain, trace.seed).map_err(io_err)?;
    for t in &trace.turns {
        writeln!(
            w,
            "turn {}: heard \"{}\" -> {} [{}] grounding {} ({:.3})",
            t.index,
            t.frame.transcript,
            t.decision.chosen,
            t.reaction.as_str(),
            most_probable_state(&t.grounding.grounding),
            t.grounding.grounding.prob(most_probable_state(&t.grounding.grounding)),
        )
        .map_err(io_err)?;
        if !t.decision.utterance.is_empty() {
            writeln!(w, "  system: {}", t.decision.utterance).map_err(io_err)?;
        }
    }
    let m = compute_metrics(&trace);
    writeln!(
        w,
        "turns {} | repairs {} | corrections {} | service delivered {}",
        m.turns,
        m.repair_total(),
        m.corrections,
        m.service_delivered
    )
    .map_err(io_err)?;
    Ok(ExitCode::SUCCESS)
}

fn replay(config: &EngineConfig, path: &Path) -> CliResult {
    let trace = TraceLog::load(path).map_err(|e| e.to_string())?;
    let config = config.with_overrides(&trace.overrides).map_err(|e| e.to_string())?;
    match verify_trace(&trace, &config) {
        Ok(r) => {
            println!("verified {} turns; max deviation {:.3e}", r.turns, r.max_error);
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("verification failed: {e}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn validate(path: &Path) -> CliResult {
    if path.is_dir() {
        let config = EngineConfig::from_dir(path).map_err(|e| e.to_string())?;
        return Ok(match config.validate() {
            Ok(()) => {
                println!("config ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                println!("invalid config: {e}");
                ExitCode::FAILURE
            }
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: toml::Table = match toml::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            println!("not TOML: {e}");
            return Ok(ExitCode::FAILURE);
        }
    };
    let outcome = if value.contains_key("node") {
        Network::from_toml_str(&text).map(|n| format!("network ok: {} nodes", n.nodes.len())).map_err(|e| e.to_string())
    } else if value.contains_key("turn") {
        Scenario::from_toml_str(&text).map(|s| format!("scenario ok: {} turns", s.turns.len())).map_err(|e| e.to_string())
    } else if value.contains_key("goals") {
        GoalModel::from_toml_str(&text).map(|d| format!("domain ok: {} goals", d.goals.len())).map_err(|e| e.to_string())
    } else {
        Err("unrecognized file: expected a network, domain or scenario".into())
    };
    Ok(match outcome {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(msg) => {
            println!("invalid: {msg}");
            ExitCode::FAILURE
        }
    })
}

fn dispatch(cli: Cli) -> CliResult {
    let config = || base_config(cli.config.as_deref());
    match cli.command {
        Command::Run { scenario, seed, out, format, json } => run(&config()?, &scenario, seed, out.as_deref(), format, json),
        Command::Repl { domain, modality, seed, attention, noise } => {
            let mut session = Session::new(&config()?, &domain, modality, seed).map_err(|e| e.to_string())?;
            let mut settings = repl::ReplSettings { attention, noise };
            repl::run(&mut session, &mut settings, io::stdin().lock(), io::stdout().lock()).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port, host } => {
            let store = SessionStore::new(config()?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(server::serve(store, SocketAddr::new(host, port))).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { trace } => replay(&config()?, &trace),
        Command::Validate { path } => validate(&path),
        Command::List => {
            println!("scenarios: {}", simkit::builtin_scenarios().join(", "));
            println!("domains: {}", grounding::intention::builtin_domains().join(", "));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
