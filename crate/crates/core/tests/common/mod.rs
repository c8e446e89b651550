//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use cpds::model::{Alphabet, Configuration, ControlId, Cpds, Op, RuleKind};
use cpds::stack::{CollapsibleStack, Link, Stack, Symbol};
use cpds::{Justification, LongTrans, StackAutomaton, StateSet};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Shape limits for random systems.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_order: usize,
    pub max_controls: usize,
    pub max_symbols: usize,
    pub max_rules: usize,
    /// Probability that a rule is alternating.
    pub alt_ratio: f64,
}

impl Shape {
    pub const SUITE: Shape = Shape {
        max_order: 3,
        max_controls: 4,
        max_symbols: 3,
        max_rules: 10,
        alt_ratio: 0.2,
    };
    pub const SMALL: Shape = Shape {
        max_order: 2,
        max_controls: 3,
        max_symbols: 3,
        max_rules: 8,
        alt_ratio: 0.0,
    };
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random system. Order, controls and alphabet are drawn within `shape`;
/// control 0 is the designated start and the last control the target.
pub fn random_model(rng: &mut impl Rng, shape: Shape) -> Cpds {
    let order = rng.gen_range(1..=shape.max_order).max(if shape.max_order >= 2 { 2 } else { 1 });
    let nsym = rng.gen_range(2..=shape.max_symbols.max(2));
    let names: Vec<String> = (0..nsym).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    let mut m = Cpds::new(order, Alphabet::new(names));
    let nctl = rng.gen_range(2..=shape.max_controls.max(2));
    let ctls: Vec<ControlId> = (0..nctl).map(|i| m.control(&format!("p{i}"))).collect();
    let nrules = rng.gen_range(1..=shape.max_rules);
    let syms: Vec<Symbol> = m.alphabet.symbols().collect();
    for _ in 0..nrules {
        let from = *ctls.choose(rng).unwrap();
        if rng.gen_bool(shape.alt_ratio) {
            let size = rng.gen_range(1..=2.min(nctl));
            let mut to: Vec<ControlId> = ctls.choose_multiple(rng, size).copied().collect();
            to.sort();
            m.add_alt(from, to);
            continue;
        }
        let sym = *syms.choose(rng).unwrap();
        let to = *ctls.choose(rng).unwrap();
        let op = random_op(rng, order, &syms);
        m.add_step(from, sym, op, to);
    }
    m
}

pub fn random_op(rng: &mut impl Rng, order: usize, syms: &[Symbol]) -> Op {
    loop {
        let op = match rng.gen_range(0..5) {
            0 => Op::Pop(rng.gen_range(1..=order)),
            1 if order >= 2 => Op::Push(rng.gen_range(2..=order)),
            2 if order >= 2 => Op::Collapse(rng.gen_range(2..=order)),
            3 => Op::PushChar(*syms.choose(rng).unwrap(), rng.gen_range(1..=order)),
            4 => Op::Rew(*syms.choose(rng).unwrap()),
            _ => continue,
        };
        return op;
    }
}

/// The target automaton: the last control with any top character, plus
/// (sometimes) a second control restricted to one top character.
pub fn random_a0(rng: &mut impl Rng, m: &Cpds) -> (StackAutomaton, Vec<ControlId>) {
    let last = ControlId(m.num_controls() as u32 - 1);
    let mut a = StackAutomaton::control_targets(m, &[last]);
    let mut targets = vec![last];
    if m.num_controls() > 2 && rng.gen_bool(0.3) {
        let p = ControlId(m.num_controls() as u32 - 2);
        let sym = Symbol(rng.gen_range(0..m.alphabet.len() as u32));
        let t = LongTrans {
            src: a.control_state(p),
            sym,
            br: StateSet::new(),
            targets: vec![StateSet::new(); m.order],
        };
        a.add_long(&t, Justification::Initial).unwrap();
        targets.push(p);
    }
    (a, targets)
}

/// The order-`n` stack `[...[a]...]`.
pub fn single(n: usize, a: Symbol) -> CollapsibleStack {
    let mut w = Stack::plain_char(a, Link::new(1, 0));
    for k in 1..=n {
        w = Stack::from_children(k, vec![w]);
    }
    w
}

/// A random stack grown from a one-character stack by pushes.
pub fn random_stack(rng: &mut impl Rng, m: &Cpds, max_chars: usize) -> CollapsibleStack {
    let syms: Vec<Symbol> = m.alphabet.symbols().collect();
    let mut w = single(m.order, *syms.choose(rng).unwrap());
    let steps = rng.gen_range(0..max_chars.max(1));
    for _ in 0..steps {
        let next = if m.order >= 2 && rng.gen_bool(0.3) {
            w.push(rng.gen_range(2..=m.order))
        } else {
            w.push_char(*syms.choose(rng).unwrap(), rng.gen_range(1..=m.order), ())
        };
        if let Some(v) = next {
            if v.char_count() <= max_chars {
                w = v;
            }
        }
    }
    w
}

/// Random seed configurations for a system.
pub fn random_seeds(rng: &mut impl Rng, m: &Cpds, count: usize, max_chars: usize) -> Vec<Configuration> {
    (0..count)
        .map(|_| {
            let p = ControlId(rng.gen_range(0..m.num_controls() as u32));
            Configuration::new(p, random_stack(rng, m, max_chars))
        })
        .collect()
}

/// Whether `m` and `a0` are both non-alternating.
pub fn non_alternating(m: &Cpds, a0: &StackAutomaton) -> bool {
    !m.rules.iter().any(|r| matches!(r.kind, RuleKind::Alt { .. })) && a0.is_syntactically_non_alternating()
}

/// A random automaton over the alphabet and controls of `m`: a few named
/// states per order (some final) and random long-form transitions from
/// control states and named order-`n` states.
pub fn random_automaton(rng: &mut impl Rng, m: &Cpds) -> StackAutomaton {
    let n = m.order;
    let mut a = StackAutomaton::for_model(m);
    let mut named: Vec<Vec<cpds::StateId>> = vec![Vec::new(); n + 1];
    for (k, states) in named.iter_mut().enumerate().skip(1) {
        for i in 0..rng.gen_range(1..=2) {
            let q = a.named_state(&format!("s{k}_{i}"), k);
            if rng.gen_bool(0.6) {
                a.set_final(q);
            }
            states.push(q);
        }
    }
    let syms: Vec<Symbol> = m.alphabet.symbols().collect();
    let mut sources: Vec<cpds::StateId> = (0..m.num_controls() as u32).map(|p| a.control_state(ControlId(p))).collect();
    sources.extend(named[n].iter().copied());
    let subset = |rng: &mut dyn rand::RngCore, states: &[cpds::StateId]| -> StateSet {
        StateSet::from_iter_states(states.iter().copied().filter(|_| rng.gen_bool(0.35)))
    };
    for _ in 0..rng.gen_range(2..=8) {
        let src = *sources.choose(rng).unwrap();
        let sym = *syms.choose(rng).unwrap();
        let targets: Vec<StateSet> = (1..=n).map(|k| subset(rng, &named[k])).collect();
        let br = if rng.gen_bool(0.3) {
            let k = rng.gen_range(1..=n);
            subset(rng, &named[k])
        } else {
            StateSet::new()
        };
        let _ = a.add_long(&LongTrans { src, sym, br, targets }, Justification::Initial);
    }
    a
}

/// Every stack constructible from one-character stacks by character pushes,
/// stack pushes and pops while never exceeding `max_chars` characters.
pub fn enumerate_stacks(m: &Cpds, max_chars: usize) -> Vec<CollapsibleStack> {
    let syms: Vec<Symbol> = m.alphabet.symbols().collect();
    let mut seen: std::collections::HashSet<CollapsibleStack> = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut work: Vec<CollapsibleStack> = syms.iter().map(|&a| single(m.order, a)).collect();
    while let Some(w) = work.pop() {
        if w.top_char().is_none() || w.char_count() > max_chars || !seen.insert(w.clone()) {
            continue;
        }
        out.push(w.clone());
        for k in 1..=m.order {
            for &b in &syms {
                work.extend(w.push_char(b, k, ()));
            }
            if k >= 2 {
                work.extend(w.push(k));
            }
            work.extend(w.pop(k));
        }
    }
    out
}

/// Membership decided through runs alone: starting from the run that
/// annotates every character with every transition reading it, transitions
/// whose branch condition fails are removed until the run is link-valid;
/// the result is the largest link-valid run, and `w` is accepted from `q`
/// exactly when that run is `{q}`-valid.
pub fn accepts_by_runs(a: &StackAutomaton, q: cpds::StateId, w: &CollapsibleStack) -> bool {
    use cpds::run::{positions, q_valid, valid_states, Run};
    let mut next = 0usize;
    let ids: Stack<usize> = w.map_ann(&mut |_, _| {
        next += 1;
        next - 1
    });
    let mut ann: Vec<Vec<cpds::TransId>> = vec![Vec::new(); next];
    for (_, sub) in positions(&ids) {
        let (sym, _, &i) = sub.top_char_ann().unwrap();
        ann[i] = a.one_reading(sym).to_vec();
    }
    loop {
        let run: Run = ids.map_ann(&mut |_, &i| ann[i].clone());
        let mut changed = false;
        for ((_, sub_ids), (_, sub)) in positions(&ids).into_iter().zip(positions(&run)) {
            let (_, link, &i) = sub_ids.top_char_ann().unwrap();
            let before = ann[i].len();
            ann[i].retain(|&t| {
                let br = &a.one(t).br;
                br.is_empty()
                    || (a.set_order(br) == Some(link.order)
                        && sub
                            .collapse(link.order)
                            .and_then(|c| c.top(link.order + 1))
                            .is_some_and(|target| q_valid(a, &target, br)))
            });
            changed |= ann[i].len() != before;
        }
        if !changed {
            return valid_states(a, &run).contains(q);
        }
    }
}

/// A copy of `m` where each pop and collapse gets, with probability one half,
/// a random nonempty guard.
pub fn with_random_guards(rng: &mut impl Rng, m: &Cpds) -> Cpds {
    let mut out = m.clone();
    let syms: Vec<Symbol> = m.alphabet.symbols().collect();
    for r in &mut out.rules {
        if let RuleKind::Step { op, guard, .. } = &mut r.kind {
            if op.is_destructive() && rng.gen_bool(0.5) {
                let mut g: Vec<Symbol> = syms.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                if g.is_empty() {
                    g.push(*syms.choose(rng).unwrap());
                }
                *guard = Some(g);
            }
        }
    }
    out
}
