//! Witness extraction from a saturated automaton, replay against the
//! system, and JSON output.
//!
//! Run with `cargo run --example witness`.

use cpds::fast::saturate_fast;
use cpds::parse::{parse_model, render_stack};
use cpds::witness::{extract, validate, WitnessOptions};
use cpds::{Budget, Mode, StackAutomaton};

fn main() {
    for text in [include_str!("models/figure.cpds"), include_str!("models/alternating.cpds")] {
        let file = parse_model(text).unwrap();
        let m = &file.model;
        let init = file.init.unwrap();
        let a0 = StackAutomaton::control_targets(m, &file.targets);
        let sat = saturate_fast(m, &a0, Mode::Full, Budget::UNLIMITED).unwrap();
        let opts = WitnessOptions {
            check_runs: true,
            ..WitnessOptions::default()
        };
        let (tree, stats) = extract(m, &sat.automaton, &init, opts).expect("accepted");
        validate(&tree, m, &a0).expect("witness replays");
        println!(
            "from <{}, {}>: {} nodes, {} leaves, {} descent checks",
            m.control_name(init.control),
            render_stack(&init.stack, &m.alphabet),
            tree.size(),
            tree.leaves().len(),
            stats.descent_checks
        );
        println!("{}", serde_json::to_string_pretty(&tree.to_document(m)).unwrap());
    }
}
