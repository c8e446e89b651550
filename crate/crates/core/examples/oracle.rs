//! Bounded brute-force exploration, the independent reference used by the
//! tests.
//!
//! Run with `cargo run --example oracle`.

use cpds::oracle::{bounded_post, reaches_language};
use cpds::parse::{parse_model, render_stack};
use cpds::StackAutomaton;

fn main() {
    let file = parse_model(include_str!("models/alternating.cpds")).unwrap();
    let m = &file.model;
    let init = file.init.unwrap();
    let reach = bounded_post(m, &init, 6, 8);
    for (i, level) in reach.levels.iter().enumerate() {
        let shown: Vec<String> = level
            .iter()
            .map(|c| format!("<{}, {}>", m.control_name(c.control), render_stack(&c.stack, &m.alphabet)))
            .collect();
        println!("step {i}: {}", shown.join("  "));
    }
    println!("capped: {}", reach.capped);
    let a0 = StackAutomaton::control_targets(m, &file.targets);
    for depth in 1..=5 {
        let r = reaches_language(m, &init, &a0, depth, 8);
        println!("winning strategy within {depth} steps: {}", r.reached);
    }
}
