//! The forward summary analysis: heads, descriptors and summary edges, and
//! the guarded system extracted from them.
//!
//! Run with `cargo run --example forward`.

use cpds::forward::{back_rules, build_graph, extract_guarded, ApproxGraph};
use cpds::parse::{parse_model, render_model, ModelFile};

const MODEL: &str = "order 2
alphabet a b c
init q0 [[a]]
target q2
rule q0 a cpush b 2 q1
rule q1 b pop 1 q2
rule q1 b rew c q3
rule q3 c pop 1 q4
rule q4 a push 2 q4
";

fn main() {
    let file = parse_model(MODEL).unwrap();
    let m = &file.model;
    let g = build_graph(m, file.init.as_ref().unwrap());
    print!("{}", g.dump(m));
    println!("size {} (bound {})", g.size(), ApproxGraph::size_bound(m, g.synthetic));

    let back = back_rules(&g, &file.targets);
    let guarded = extract_guarded(m, &g, &back);
    println!("\nguarded system ({} of {} rules kept):", guarded.model.rules.len(), m.rules.len());
    print!(
        "{}",
        render_model(&ModelFile {
            model: guarded.model.clone(),
            init: None,
            targets: Vec::new()
        })
    );
}
