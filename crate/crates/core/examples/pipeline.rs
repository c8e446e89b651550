//! The end-to-end check under every engine, forward and mode setting.
//!
//! Run with `cargo run --example pipeline [model-file]`.

use cpds::parse::parse_model;
use cpds::pipeline::{run_pipeline, Engine, Forward, PipelineConfig, Target, Verdict};
use cpds::Mode;

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable model file"),
        None => include_str!("models/figure.cpds").to_string(),
    };
    let file = parse_model(&text).expect("valid model");
    let init = file.init.expect("model has an init line");
    let target = Target::Controls(file.targets);
    for engine in [Engine::Fast, Engine::Naive] {
        for forward in [Forward::On, Forward::Prune, Forward::Off] {
            for mode in [Mode::Full, Mode::NonAlternating] {
                let config = PipelineConfig {
                    engine,
                    forward,
                    mode,
                    ..PipelineConfig::default()
                };
                let report = run_pipeline(&file.model, &init, &target, &config);
                let verdict = match &report.verdict {
                    Verdict::Unreachable => "unreachable".to_string(),
                    Verdict::Reachable(w) => format!("reachable ({} witness nodes)", w.size()),
                    Verdict::Inconclusive(e) => format!("inconclusive: {e}"),
                };
                let size = report.saturated.as_ref().map_or(0, |s| s.automaton.num_short());
                println!(
                    "{engine:?}/{forward:?}/{mode:?}: {verdict}; {} rules saturated, {size} transitions, {:?}",
                    report.derived.model.rules.len(),
                    report.elapsed
                );
            }
        }
    }
}
