//! Saturation with both engines on the four-rule order-2 example, printing
//! the added transitions and checking the predecessors of the target.
//!
//! Run with `cargo run --example saturate`.

use cpds::fast::saturate_fast_traced;
use cpds::parse::{parse_automaton, parse_model, parse_stack};
use cpds::saturation::saturate;
use cpds::{Budget, Mode};

const MODEL: &str = include_str!("models/figure.cpds");
const TARGET: &str = include_str!("models/figure.aut");

fn main() {
    let file = parse_model(MODEL).expect("valid model");
    let m = &file.model;
    let a0 = parse_automaton(TARGET, m).expect("valid automaton");

    let naive = saturate(m, &a0, Mode::Full, Budget::UNLIMITED).unwrap();
    println!("reference engine: {} rounds", naive.iterations);
    for t in naive.automaton.one_ids().skip(a0.num_one()) {
        let lt = naive.automaton.long_of(t);
        println!("  {}", naive.automaton.render_long(&lt, &m.alphabet, &m.controls));
    }

    let mut events = 0;
    let mut count = |_: &str| events += 1;
    let (fast, stats) = saturate_fast_traced(m, &a0, Mode::Full, Budget::UNLIMITED, Some(&mut count)).unwrap();
    println!(
        "worklist engine: {} processed, {} sources, {} targets, {events} trace events",
        stats.processed, stats.sources, stats.targets
    );
    assert_eq!(naive.automaton.canonical_transitions(), fast.automaton.canonical_transitions());

    for (p, w) in [("q1", "[[b][c][d]]"), ("q4", "[[c][d]]"), ("q1", "[[b][d]]")] {
        let w = parse_stack(w, 2, &m.alphabet).unwrap();
        let ok = fast.accepts_config(m.lookup_control(p).unwrap(), &w);
        println!("<{p}, {}> reaches the target: {ok}", cpds::parse::render_stack(&w, &m.alphabet));
    }
}
