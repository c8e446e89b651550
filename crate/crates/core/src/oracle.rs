//! Bounded brute-force exploration, used as an independent reference.
//!
//! Nothing here is clever: configurations are enumerated explicitly up to a
//! depth bound and a bound on the number of characters in a stack. The
//! results are therefore only under-approximations, which is exactly what the
//! tests need: whatever the oracle finds, the saturation must find too.

use std::collections::{HashMap, HashSet};

use crate::automaton::StackAutomaton;
use crate::model::{Configuration, Cpds, Outcome};

/// Configurations reachable in at most `depth` steps, where alternating
/// rules contribute every branch, and stacks larger than the cap are
/// discarded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReachSet {
    /// `levels[i]` holds the configurations first reached after `i` steps.
    pub levels: Vec<Vec<Configuration>>,
    /// Whether some successor was discarded because of the cap.
    pub capped: bool,
}

impl ReachSet {
    /// All configurations found, in discovery order.
    pub fn all(&self) -> impl Iterator<Item = &Configuration> {
        self.levels.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn outcome_configs(o: Outcome) -> Vec<Configuration> {
    match o {
        Outcome::Single(c) => vec![c],
        Outcome::Branch(cs) => cs,
    }
}

/// Breadth-first exploration from `seed`.
pub fn bounded_post(model: &Cpds, seed: &Configuration, depth: usize, cap: usize) -> ReachSet {
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut out = ReachSet::default();
    if seed.stack.char_count() > cap {
        out.capped = true;
        return out;
    }
    seen.insert(seed.clone());
    out.levels.push(vec![seed.clone()]);
    for _ in 0..depth {
        let mut next = Vec::new();
        for c in out.levels.last().expect("at least one level") {
            for (_, o) in model.successors(c) {
                for c2 in outcome_configs(o) {
                    if c2.stack.char_count() > cap {
                        out.capped = true;
                    } else if seen.insert(c2.clone()) {
                        next.push(c2);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        out.levels.push(next);
    }
    out
}

/// The same set as [`bounded_post`], computed by depth-first search with
/// remaining-depth memoisation; used to cross-check the oracle itself.
pub fn bounded_post_recursive(model: &Cpds, seed: &Configuration, depth: usize, cap: usize) -> HashSet<Configuration> {
    fn go(model: &Cpds, c: &Configuration, left: usize, cap: usize, best: &mut HashMap<Configuration, usize>) {
        if best.get(c).is_some_and(|&l| l >= left) {
            return;
        }
        best.insert(c.clone(), left);
        if left == 0 {
            return;
        }
        for (_, o) in model.successors(c) {
            for c2 in outcome_configs(o) {
                if c2.stack.char_count() <= cap {
                    go(model, &c2, left - 1, cap, best);
                }
            }
        }
    }
    let mut best = HashMap::new();
    if seed.stack.char_count() <= cap {
        go(model, seed, depth, cap, &mut best);
    }
    best.into_keys().collect()
}

/// Outcome of a bounded search for a winning strategy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounded {
    /// Whether a strategy of the given depth exists.
    pub reached: bool,
    /// Whether the cap cut off part of the search.
    pub capped: bool,
}

/// Whether `seed` can force the system into the language of `a0` within
/// `depth` steps: ordinary rules are chosen existentially, and after an
/// alternating rule every branch must succeed. Stacks larger than `cap`
/// count as losing.
pub fn reaches_language(model: &Cpds, seed: &Configuration, a0: &StackAutomaton, depth: usize, cap: usize) -> Bounded {
    struct Search<'a> {
        model: &'a Cpds,
        a0: &'a StackAutomaton,
        cap: usize,
        capped: bool,
        /// Largest depth known to lose, and smallest depth known to win.
        lose: HashMap<Configuration, usize>,
        win: HashMap<Configuration, usize>,
    }
    impl Search<'_> {
        fn wins(&mut self, c: &Configuration, left: usize) -> bool {
            if self.win.get(c).is_some_and(|&d| d <= left) {
                return true;
            }
            if self.lose.get(c).is_some_and(|&d| d >= left) {
                return false;
            }
            let ok = self.a0.accepts_config(c.control, &c.stack)
                || (left > 0
                    && self.model.successors(c).into_iter().any(|(_, o)| {
                        outcome_configs(o).iter().all(|c2| {
                            if c2.stack.char_count() > self.cap {
                                self.capped = true;
                                false
                            } else {
                                self.wins(c2, left - 1)
                            }
                        })
                    }));
            if ok {
                self.win.insert(c.clone(), left);
            } else {
                let e = self.lose.entry(c.clone()).or_insert(left);
                *e = (*e).max(left);
            }
            ok
        }
    }
    let mut s = Search {
        model,
        a0,
        cap,
        capped: false,
        lose: HashMap::new(),
        win: HashMap::new(),
    };
    if seed.stack.char_count() > cap {
        return Bounded {
            reached: false,
            capped: true,
        };
    }
    let reached = s.wins(seed, depth);
    Bounded {
        reached,
        capped: s.capped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_model;

    #[test]
    fn post_matches_recursive_and_finds_target() {
        let f = parse_model("order 2\nalphabet a b\ninit q0 [[a]]\nrule q0 a push 2 q0\nrule q0 a cpush b 2 q1\nrule q1 b pop 1 q2\n")
            .unwrap();
        let init = f.init.unwrap();
        let r = bounded_post(&f.model, &init, 6, 12);
        let s: HashSet<Configuration> = r.all().cloned().collect();
        assert_eq!(s, bounded_post_recursive(&f.model, &init, 6, 12));
        let q2 = f.model.lookup_control("q2").unwrap();
        assert!(s.iter().any(|c| c.control == q2));
        let a0 = StackAutomaton::control_targets(&f.model, &[q2]);
        assert!(reaches_language(&f.model, &init, &a0, 2, 12).reached);
        assert!(!reaches_language(&f.model, &init, &a0, 1, 12).reached);
    }

    #[test]
    fn alternation_requires_all_branches() {
        let f = parse_model("order 2\nalphabet a\ninit p [[a]]\nalt p {q,r}\nrule q a rew a t\n").unwrap();
        let init = f.init.unwrap();
        let t = f.model.lookup_control("t").unwrap();
        let a0 = StackAutomaton::control_targets(&f.model, &[t]);
        assert!(!reaches_language(&f.model, &init, &a0, 5, 12).reached);
        let r = f.model.lookup_control("r").unwrap();
        let a1 = StackAutomaton::control_targets(&f.model, &[t, r]);
        assert!(reaches_language(&f.model, &init, &a1, 5, 12).reached);
    }
}
