//! Stack automata: membership, emptiness and accepting runs.
//!
//! Run with `cargo run --example membership`.

use cpds::parse::{parse_automaton, parse_model, parse_stack};
use cpds::run::{accepting, initial_run, trimmed};

fn main() {
    let m = parse_model("order 2\nalphabet a b\ncontrols p\n").unwrap().model;
    // From control p: the top order-1 stack is a^+ b and the only other
    // order-1 stack is [b]; the topmost a additionally needs its link to lead
    // to a stack accepted from y.
    let text = "\
p -- a / {y} --> ({x};{y})
x -- a / {} --> ({x})
x -- b / {} --> ({z})
y -- b / {} --> ({z};{w})
final 1: z
final 2: w
";
    let a = parse_automaton(text, &m).unwrap();
    let p = m.lookup_control("p").unwrap();
    for w in ["[[a^(2,1) a b][b]]", "[[a^(2,0) a b][b]]", "[[a^(2,1) b][a]]", "[[a^(2,1) b][b][a]]"] {
        let stack = parse_stack(w, 2, &m.alphabet).unwrap();
        let accepted = a.accepts_config(p, &stack);
        print!("<p, {w}>: {}", if accepted { "accepted" } else { "rejected" });
        if let Some(run) = initial_run(&a, p, &stack) {
            print!(
                " (run accepting: {}, trimmed: {})",
                accepting(&a, &run, a.control_state(p)),
                trimmed(&a, &run)
            );
        }
        println!();
    }
    let live = a.nonempty_states();
    println!("states with a nonempty language: {}", live.len());
}
