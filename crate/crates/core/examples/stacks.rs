//! Higher-order collapsible stacks: pushes, pops, links and collapse.
//!
//! Run with `cargo run --example stacks`.

use cpds::parse::{parse_stack, render_stack};
use cpds::Alphabet;

fn main() {
    let alphabet = Alphabet::new(["a", "b", "c"]);
    let show = |w: &cpds::CollapsibleStack| render_stack(w, &alphabet);
    let a = alphabet.lookup("a").unwrap();

    let w = parse_stack("[[b][c]]", 2, &alphabet).unwrap();
    println!("w                     = {}", show(&w));

    // push_a^2 records a link to the stack below the current order-1 stack.
    let w1 = w.push_char(a, 2, ()).unwrap();
    println!("push_a^2(w)           = {}", show(&w1));

    // push_2 copies the top order-1 stack, links included.
    let w2 = w1.push(2).unwrap();
    println!("push_2(push_a^2(w))   = {}", show(&w2));

    // Collapsing from either copy lands on the same context.
    let w3 = w2.collapse(2).unwrap();
    println!("collapse_2(...)       = {}", show(&w3));
    assert_eq!(w3, w.pop(2).unwrap());

    println!("pop_1(push_a^2(w))    = {}", show(&w1.pop(1).unwrap()));
    println!("rew_c(push_a^2(w))    = {}", show(&w1.rew(alphabet.lookup("c").unwrap()).unwrap()));
    println!("pop_2 of a one-stack  = {:?}", parse_stack("[[a]]", 2, &alphabet).unwrap().pop(2));
}
