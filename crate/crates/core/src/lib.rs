//! Reachability checking for alternating collapsible pushdown systems.
//!
//! The crate decides whether an initial configuration of a (possibly
//! alternating, possibly guarded) collapsible pushdown system can reach a
//! regular set of target configurations. Target sets are given by alternating
//! stack automata; the predecessors of a target set are computed by
//! saturation, optionally restricted by a cheap forward over-approximation,
//! and every positive answer comes with a replayable witness tree.
//!
//! Modules, bottom-up:
//!
//! * [`stack`] — persistent collapsible stacks and their operations;
//! * [`model`] — systems, rules and the one-step semantics;
//! * [`automaton`] — stack automata, membership and emptiness;
//! * [`saturation`] — the round-based reference saturation;
//! * [`fast`] — the worklist saturation engine;
//! * [`forward`] — forward summary analysis and guard extraction;
//! * [`run`] — annotated runs, validity predicates and the descent measure;
//! * [`witness`] — witness-tree extraction and replay;
//! * [`oracle`] — bounded brute-force exploration for testing;
//! * [`parse`] — text formats;
//! * [`pipeline`] — the end-to-end checking procedure.

pub mod automaton;
pub mod fast;
pub mod forward;
pub mod model;
pub mod oracle;
pub mod parse;
pub mod pipeline;
pub mod run;
pub mod saturation;
pub mod stack;
pub mod witness;

pub use automaton::{Justification, LongTrans, StackAutomaton, StateId, StateSet, TransId};
pub use model::{Alphabet, Configuration, ControlId, Cpds, Op, RuleId, RuleKind};
pub use saturation::{Budget, Mode, SaturationError, SaturationResult};
pub use stack::{CollapsibleStack, Link, Stack, Symbol};
