//! Terminal turn loop. Plain lines are user turns; lines starting with `:`
//! are commands:
//!
//! ```text
//! :attention <p>   attention probability for following turns
//! :noise <p>       recognizer noise level for following turns
//! :accept | :correct | :repeat | :silent
//!                  react to the last system action
//! :typed | :spoken | :visual
//!                  switch modality
//! :diag            print the full diagnostics as JSON
//! :trace <path>    write the trace so far (.json or .csv)
//! :quit
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use grounding::control::Reaction;
use grounding::maintenance::Modality;
use grounding::probnet::most_probable_state;
use grounding::session::{Session, TurnInput};
use grounding::simkit::{export_trace, ExportFormat};

pub struct ReplSettings {
    pub attention: f64,
    pub noise: Option<f64>,
}

fn reaction(cmd: &str) -> Option<Reaction> {
    match cmd {
        "accept" => Some(Reaction::Accepted),
        "correct" => Some(Reaction::Corrected),
        "repeat" => Some(Reaction::Repeated),
        "silent" => Some(Reaction::NoResponse),
        _ => None,
    }
}

fn modality(cmd: &str) -> Option<Modality> {
    match cmd {
        "typed" => Some(Modality::Typed),
        "spoken" => Some(Modality::SpokenOnly),
        "visual" => Some(Modality::SpokenVisual),
        _ => None,
    }
}

fn parse_prob(arg: Option<&str>) -> Result<f64, String> {
    let x: f64 = arg.ok_or("missing value")?.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0,1]"))
    }
}

fn command(session: &mut Session, settings: &mut ReplSettings, line: &str, out: &mut impl Write) -> std::io::Result<bool> {
    let mut parts = line.split_whitespace();
    let cmd = parts.next().unwrap_or("");
    let arg = parts.next();
    let result: Result<String, String> = match cmd {
        "quit" | "q" => return Ok(false),
        "attention" => parse_prob(arg).map(|x| {
            settings.attention = x;
            format!("attention {x}")
        }),
        "noise" => parse_prob(arg).map(|x| {
            settings.noise = Some(x);
            format!("noise {x}")
        }),
        "diag" => session
            .diagnostics()
            .map_err(|e| e.to_string())
            .map(|d| serde_json::to_string_pretty(&d).expect("diagnostics serialize")),
        "trace" => match arg {
            None => Err("usage: :trace <path>".into()),
            Some(path) => {
                let format = if path.ends_with(".json") { ExportFormat::Json } else { ExportFormat::Csv };
                export_trace(&session.trace(), format, Path::new(path))
                    .map(|()| format!("wrote {path}"))
                    .map_err(|e| e.to_string())
            }
        },
        c => {
            if let Some(r) = reaction(c) {
                session.react(r).map(|()| format!("noted: {}", r.as_str())).map_err(|e| e.to_string())
            } else if let Some(m) = modality(c) {
                session.swap_modality(m).map(|()| format!("modality {m}")).map_err(|e| e.to_string())
            } else {
                Err(format!("unknown command :{c}"))
            }
        }
    };
    match result {
        Ok(msg) => writeln!(out, "{msg}")?,
        Err(msg) => writeln!(out, "error: {msg}")?,
    }
    Ok(true)
}

fn turn(session: &mut Session, settings: &ReplSettings, line: &str, out: &mut impl Write) -> std::io::Result<()> {
    let input = TurnInput {
        transcript: line.to_string(),
        attention_prob: settings.attention,
        noise_level: settings.noise,
        modality: None,
    };
    let t = match session.step(&input) {
        Ok(t) => t,
        Err(e) => return writeln!(out, "error: {e}"),
    };
    let d = &t.decision;
    if d.utterance.is_empty() {
        writeln!(out, "system: ({})", d.chosen)?;
    } else {
        writeln!(out, "system: {}", d.utterance)?;
    }
    let top: Vec<String> = d.ranking.iter().take(3).map(|(a, v)| format!("{a} {v:.1}")).collect();
    writeln!(
        out,
        "  heard \"{}\" | grounding {} | goal {} {:.2} | {}",
        t.frame.transcript,
        most_probable_state(&t.grounding.grounding),
        t.goal.top,
        t.goal.top_prob,
        top.join(", "),
    )
}

/// Run until `:quit` or end of input.
pub fn run(session: &mut Session, settings: &mut ReplSettings, input: impl BufRead, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{} ({}); :quit to leave", session.domain().domain, session.modality())?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if let Some(cmd) = line.strip_prefix(':') {
            if !command(session, settings, cmd, &mut out)? {
                break;
            }
        } else {
            turn(session, settings, line, &mut out)?;
        }
        out.flush()?;
    }
    Ok(())
}
