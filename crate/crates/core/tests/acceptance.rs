//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the summary always prints.

mod common;

use std::process::ExitCode;

use common::Gen;
use grounding::config::EngineConfig;
use grounding::control::{self, Phrasing, RenderContext, ASK_REPEAT, CONFIRM, IGNORE, TROUBLESHOOT};
use grounding::decision::voi_greedy;
use grounding::intention::load_domain;
use grounding::maintenance::{self, MaintenanceBelief, Modality, PerceptualFrame};
use grounding::probnet::{self, most_probable_state, NodeSpec};
use grounding::service::{CreateSession, SessionStore, TurnRequest};
use grounding::simkit::{self, run_scenario, run_scenario_seeded, Scenario, TraceLog};

type Outcome = Result<String, String>;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn inference_oracle() -> Outcome {
    let mut g = Gen::new(0xB0B);
    let mut worst = 0.0f64;
    let mut nets = 0;
    while nets < 120 {
        let net = common::random_network(&mut g, 12, 200_000);
        let ev = common::random_evidence(&mut g, &net);
        let ids: Vec<&str> = net.nodes.iter().map(|n| n.id.as_str()).collect();
        let Ok(oracle) = probnet::joint_enumerate(&net, &ev, &ids) else { continue };
        for id in &ids {
            let ve = probnet::posterior_of(&net, &ev, id).map_err(|e| e.to_string())?;
            for (a, b) in ve.probs().iter().zip(oracle[*id].probs()) {
                worst = worst.max((a - b).abs());
            }
        }
        nets += 1;
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("{nets} networks, max deviation {worst:.1e}"))
}

fn voi_properties() -> Outcome {
    let mut g = Gen::new(0xC0FFEE);
    let mut worst = 0.0f64;
    let mut dsep = 0;
    for _ in 0..60 {
        let mut p = common::random_problem(&mut g);
        // A disconnected observable must be worthless.
        p.net.nodes.push(NodeSpec::root("Detached", ["x", "y"], vec![0.3, 0.7]));
        p.query.candidates.push("Detached".into());
        let scores = voi_greedy(&p.net, &p.evidence, &p.table, &p.query).map_err(|e| e.to_string())?;
        for (cand, v) in &scores {
            ensure(*v >= -1e-9, || format!("negative zero-cost VOI {v} for {cand}"))?;
            worst = worst.max((v - common::oracle_voi(&p, cand)).abs());
            if cand == "Detached" {
                ensure(v.abs() <= 1e-9, || format!("d-separated candidate scored {v}"))?;
                dsep += 1;
            }
        }
    }
    ensure(worst <= 1e-9, || format!("oracle deviation {worst:e}"))?;
    Ok(format!("60 problems, {dsep} d-separated checks, max deviation {worst:.1e}"))
}

fn argmax_grounding(trace: &TraceLog, turn: usize) -> &str {
    most_probable_state(&trace.turns[turn].grounding.grounding)
}

fn service_scenario(cfg: &EngineConfig) -> Outcome {
    let scn = Scenario::named("service").map_err(|e| e.to_string())?;
    ensure(scn.overrides.noise_level.unwrap_or(cfg.noise.level) <= 0.2, || "noise above 0.2".into())?;
    for seed in SEEDS {
        let trace = run_scenario_seeded(&scn, cfg, seed).map_err(|e| e.to_string())?;
        let last = trace.turns.last().unwrap();
        let d = &last.decision;
        ensure(d.chosen == "do_service" && d.goal.as_deref() == Some("Visitation"), || {
            format!("seed {seed}: chose {} {:?} after hearing {:?}", d.chosen, d.goal, last.frame.transcript)
        })?;
        ensure(argmax_grounding(&trace, trace.turns.len() - 1) == "okay", || {
            format!("seed {seed}: grounding {:?}", last.grounding.grounding)
        })?;
    }
    Ok("20/20 seeds do_service(Visitation) with grounding okay".into())
}

fn repair_scenario(cfg: &EngineConfig) -> Outcome {
    let scn = Scenario::named("repair").map_err(|e| e.to_string())?;
    ensure(scn.overrides.noise_level.unwrap_or(0.0) >= 0.6, || "noise below 0.6".into())?;
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in SEEDS {
        let trace = run_scenario_seeded(&scn, cfg, seed).map_err(|e| e.to_string())?;
        let t = &trace.turns[0];
        let ok = argmax_grounding(&trace, 0) == "signal_failure"
            && t.decision.chosen == ASK_REPEAT
            && t.decision.phrasing == Some(Phrasing::LevelIndicative);
        if ok {
            hits += 1;
        } else {
            misses.push(format!("seed {seed}: {} / {}", argmax_grounding(&trace, 0), t.decision.chosen));
        }
    }
    ensure(hits >= 18, || format!("{hits}/20; {}", misses.join("; ")))?;
    Ok(format!("{hits}/20 seeds signal_failure -> level-indicative ask_repeat"))
}

fn overheard_scenario(cfg: &EngineConfig) -> Outcome {
    let scn = Scenario::named("overheard").map_err(|e| e.to_string())?;
    ensure(scn.turns[1].attention == 0.05 && scn.turns[2].noise == Some(0.7), || "script drifted".into())?;
    for seed in SEEDS {
        let trace = run_scenario_seeded(&scn, cfg, seed).map_err(|e| e.to_string())?;
        let overheard = &trace.turns[1].decision;
        let eu_ignore = overheard.expected_utilities.iter().find(|(a, _)| a == IGNORE).unwrap().1;
        let runner_up = overheard
            .expected_utilities
            .iter()
            .filter(|(a, _)| a != IGNORE)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(overheard.chosen == IGNORE && eu_ignore > runner_up, || {
            format!("seed {seed}: overheard turn chose {} (ignore {eu_ignore:.3} vs {runner_up:.3})", overheard.chosen)
        })?;
        let noisy = &trace.turns[2].decision;
        ensure(noisy.chosen != IGNORE, || format!("seed {seed}: noisy addressed turn ignored"))?;
    }
    Ok("20/20 seeds ignore overheard speech and act on noisy addressed speech".into())
}

fn adaptation_scenario(cfg: &EngineConfig) -> Outcome {
    let scn = Scenario::named("adaptation").map_err(|e| e.to_string())?;
    let trace = run_scenario(&scn, cfg).map_err(|e| e.to_string())?;
    ensure(trace == run_scenario(&scn, cfg).map_err(|e| e.to_string())?, || "not deterministic".into())?;
    let catalog = cfg.control_model().map_err(|e| e.to_string())?.settings.catalog;
    let eu = |t: usize, a: &str| {
        trace.turns[t].decision.expected_utilities.iter().find(|(x, _)| x == a).unwrap().1
    };
    let repairs: Vec<&str> = catalog.ids().into_iter().filter(|a| catalog.is_repair(a)).collect();
    let best_repair = |t: usize, except: &str| {
        repairs.iter().filter(|a| **a != except).map(|a| eu(t, a)).fold(f64::NEG_INFINITY, f64::max)
    };
    ensure(trace.turns.len() == 4, || "expected four turns".into())?;
    ensure(eu(0, CONFIRM) > best_repair(0, CONFIRM), || "confirm is not the top repair at turn 1".into())?;
    for t in 1..4 {
        ensure(eu(t, ASK_REPEAT) <= eu(t - 1, ASK_REPEAT), || {
            format!("EU(ask_repeat) rose at turn {}: {} -> {}", t + 1, eu(t - 1, ASK_REPEAT), eu(t, ASK_REPEAT))
        })?;
        let p = |k: usize| trace.turns[k].grounding.grounding.prob("conversation_failure");
        ensure(p(t) >= p(t - 1), || format!("P(conversation_failure) fell at turn {}", t + 1))?;
    }
    let cross = (0..4).find(|&t| eu(t, TROUBLESHOOT) > best_repair(t, TROUBLESHOOT));
    let cross = cross.ok_or_else(|| "troubleshoot never leads the repairs".to_string())?;
    let series: Vec<String> = (0..4)
        .map(|t| format!("{:.1}/{:.1}/{:.1}", eu(t, CONFIRM), eu(t, ASK_REPEAT), eu(t, TROUBLESHOOT)))
        .collect();
    Ok(format!("troubleshoot leads from turn {}; confirm/ask_repeat/troubleshoot EU {}", cross + 1, series.join(" ")))
}

fn monotone_grids(cfg: &EngineConfig) -> Outcome {
    let levels: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
    let mut checks = 0;
    for modality in Modality::ALL {
        let model = cfg.maintenance_model(modality).map_err(|e| e.to_string())?;
        let post = |att: f64, asr: f64, parse: f64| {
            let frame = PerceptualFrame {
                attention_prob: att,
                transcript: "next slide".into(),
                asr_confidence: asr,
                parse_quality: parse,
                timestamp: 0,
            };
            maintenance::update(&model, &MaintenanceBelief::initial(), &frame).unwrap()
        };
        for &asr in &levels {
            for &parse in &levels {
                let mut prev: Option<MaintenanceBelief> = None;
                for a in 0..=10 {
                    let b = post(a as f64 / 10.0, asr, parse);
                    if let Some(p) = &prev {
                        ensure(b.channel_open() >= p.channel_open() - 1e-12, || {
                            format!("{modality}: channel belief fell with attention at asr {asr}, parse {parse}")
                        })?;
                    }
                    checks += 1;
                    prev = Some(b);
                }
            }
        }
        for a in 0..=10 {
            let att = a as f64 / 10.0;
            for (i, &x) in levels.iter().enumerate() {
                for (j, &y) in levels.iter().enumerate() {
                    let here = post(att, x, y).signal_identified();
                    if i > 0 {
                        ensure(here >= post(att, levels[i - 1], y).signal_identified() - 1e-12, || {
                            format!("{modality}: signal belief fell with ASR confidence at {x}")
                        })?;
                    }
                    if j > 0 {
                        ensure(here >= post(att, x, levels[j - 1]).signal_identified() - 1e-12, || {
                            format!("{modality}: signal belief fell with parse quality at {y}")
                        })?;
                    }
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} grid points over 3 modalities"))
}

fn determinism_and_parity(cfg: &EngineConfig) -> Outcome {
    let mut runs = 0;
    for name in simkit::builtin_scenarios() {
        let scn = Scenario::named(name).map_err(|e| e.to_string())?;
        for seed in [1, 7] {
            let a = run_scenario_seeded(&scn, cfg, seed).map_err(|e| e.to_string())?;
            let b = run_scenario_seeded(&scn, cfg, seed).map_err(|e| e.to_string())?;
            ensure(a.to_json().unwrap() == b.to_json().unwrap(), || format!("{name}/{seed} not bit-identical"))?;

            let store = SessionStore::new(cfg.clone());
            let info = store
                .create_session(&CreateSession {
                    domain: scn.domain.clone(),
                    modality: scn.modality,
                    seed,
                    overrides: scn.overrides.clone(),
                })
                .map_err(|e| e.to_string())?;
            let mut pending = None;
            for (i, turn) in scn.turns.iter().enumerate() {
                let input = scn.input(i);
                let resp = store
                    .post_turn(&info.id, &TurnRequest {
                        transcript: input.transcript,
                        attention_prob: input.attention_prob,
                        noise_level: input.noise_level,
                        reaction: pending,
                        modality: input.modality,
                    })
                    .map_err(|e| e.to_string())?;
                let trace = store.get_trace(&info.id).unwrap();
                let decision = &trace.turns[resp.turn].decision;
                pending = Some(scn.reaction_policy(i).react(decision, turn.goal.as_deref()));
            }
            store.post_reaction(&info.id, pending.unwrap()).map_err(|e| e.to_string())?;
            let api = store.get_trace(&info.id).unwrap();
            ensure(api == a, || format!("{name}/{seed}: API trace differs from scenario trace"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} scenario/seed pairs bit-identical and API-equal"))
}

fn template_fidelity(cfg: &EngineConfig) -> Outcome {
    let model = cfg.control_model().map_err(|e| e.to_string())?;
    let domain = load_domain("receptionist").map_err(|e| e.to_string())?;
    let shuttle = domain.templates.get("ShuttleRequest");
    let render = |action: &str, phrasing: Phrasing, goal| {
        let ctx = RenderContext { action, goal, phrasing: Some(phrasing), level: Some("signal_failure"), recommendation: None };
        control::render_action(&ctx, model.catalog(), &model.templates).map_err(|e| e.to_string())
    };
    let cases = [
        (render(CONFIRM, Phrasing::General, shuttle)?, "You want a shuttle, right?"),
        (render("confirm+ask_repeat", Phrasing::Combined, shuttle)?, "Did you want a shuttle? Can you repeat that?"),
        (
            render(ASK_REPEAT, Phrasing::LevelIndicative, None)?,
            "I'm sorry, I may not have heard you properly. Can you repeat that please?",
        ),
    ];
    for (got, want) in &cases {
        ensure(got == want, || format!("rendered {got:?}, expected {want:?}"))?;
    }
    Ok("3/3 renderings exact".into())
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let cfg = EngineConfig::default();
    let criteria: Vec<Criterion> = vec![
        ("1 inference oracle equivalence", Box::new(inference_oracle)),
        ("2 VOI properties", Box::new(voi_properties)),
        ("3 service request scenario", Box::new(|| service_scenario(&cfg))),
        ("4 signal repair scenario", Box::new(|| repair_scenario(&cfg))),
        ("5 overheard speech scenario", Box::new(|| overheard_scenario(&cfg))),
        ("6 adaptation scenario", Box::new(|| adaptation_scenario(&cfg))),
        ("7 monotone CPT constraints", Box::new(|| monotone_grids(&cfg))),
        ("8 determinism and API parity", Box::new(|| determinism_and_parity(&cfg))),
        ("9 template fidelity", Box::new(|| template_fidelity(&cfg))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let start = std::time::Instant::now();
        match run() {
            Ok(detail) => println!("PASS  criterion {name}: {detail} ({:.2?})", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
