//! Persistent higher-order collapsible stacks.
//!
//! An order-`k` stack (`k >= 1`) is a sequence of order-`(k-1)` stacks, listed
//! topmost first; an order-0 stack is a single character carrying a collapse
//! link. Stacks are immutable and share structure: an order-`k` stack is a cons
//! cell whose head is its topmost child and whose tail is the order-`k` stack
//! of the remaining children. Every tail is therefore itself a stack, which is
//! exactly the "suffix" view needed by stack automata.
//!
//! Characters carry an annotation of type `A`. Plain stacks use `A = ()`;
//! automaton runs reuse the same structure with sets of transitions as the
//! annotation (see [`crate::run`]).
//!
//! All operations are total: an operation that is undefined on its argument
//! returns `None`.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// An interned stack character.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Symbol(pub u32);

impl Symbol {
    /// Position of the symbol in its alphabet.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A collapse link `<order, index>`: collapsing at `order` keeps the bottom
/// `index` order-`(order-1)` stacks of the topmost order-`order` stack.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub order: usize,
    pub index: usize,
}

impl Link {
    pub fn new(order: usize, index: usize) -> Self {
        Link { order, index }
    }
}

/// An immutable, structurally shared collapsible stack.
pub struct Stack<A = ()>(Arc<Node<A>>);

/// The plain stack type used for configurations.
pub type CollapsibleStack = Stack<()>;

enum Node<A> {
    Char {
        sym: Symbol,
        link: Link,
        ann: A,
        hash: u64,
    },
    Empty {
        order: usize,
    },
    Cons {
        order: usize,
        head: Stack<A>,
        tail: Stack<A>,
        len: usize,
        hash: u64,
    },
}

impl<A> Clone for Stack<A> {
    fn clone(&self) -> Self {
        Stack(Arc::clone(&self.0))
    }
}

fn mix(seed: u64, value: u64) -> u64 {
    // FxHash-style combination; only used for the cached structural hash.
    (seed.rotate_left(5) ^ value).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95)
}

fn hash_of<T: Hash>(value: &T) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    value.hash(&mut h);
    h.finish()
}

impl<A: Hash> Stack<A> {
    /// A single character (order-0 stack).
    pub fn character(sym: Symbol, link: Link, ann: A) -> Self {
        let hash = mix(mix(mix(1, sym.0 as u64), link.order as u64), link.index as u64);
        let hash = mix(hash, hash_of(&ann));
        Stack(Arc::new(Node::Char { sym, link, ann, hash }))
    }

}

impl<A> Stack<A> {
    /// Places `head` (order `k-1`) on top of the order-`k` stack `tail`.
    ///
    /// # Panics
    /// Panics if the orders do not fit together; this is an internal
    /// construction primitive, not a stack operation.
    pub fn cons(head: Stack<A>, tail: Stack<A>) -> Self {
        let order = tail.order();
        assert!(order >= 1 && head.order() + 1 == order, "cons: order mismatch");
        let len = tail.len() + 1;
        let hash = mix(mix(tail.hash_value(), head.hash_value()), order as u64);
        Stack(Arc::new(Node::Cons {
            order,
            head,
            tail,
            len,
            hash,
        }))
    }

    /// Builds an order-`order` stack from its children, topmost first.
    pub fn from_children(order: usize, children: Vec<Stack<A>>) -> Self {
        let mut acc = Stack::empty(order);
        for child in children.into_iter().rev() {
            acc = Stack::cons(child, acc);
        }
        acc
    }
    /// The empty stack of the given order (`order >= 1`).
    pub fn empty(order: usize) -> Self {
        assert!(order >= 1, "there is no empty order-0 stack");
        Stack(Arc::new(Node::Empty { order }))
    }

    /// Order of this stack (0 for a character).
    pub fn order(&self) -> usize {
        match &*self.0 {
            Node::Char { .. } => 0,
            Node::Empty { order } | Node::Cons { order, .. } => *order,
        }
    }

    fn hash_value(&self) -> u64 {
        match &*self.0 {
            Node::Char { hash, .. } | Node::Cons { hash, .. } => *hash,
            Node::Empty { order } => mix(7, *order as u64),
        }
    }

    /// Whether this is an empty stack of order at least 1.
    pub fn is_empty(&self) -> bool {
        matches!(&*self.0, Node::Empty { .. })
    }

    /// Number of children (0 for characters and empty stacks).
    pub fn len(&self) -> usize {
        match &*self.0 {
            Node::Cons { len, .. } => *len,
            _ => 0,
        }
    }

    /// Topmost child, if any.
    pub fn first(&self) -> Option<&Stack<A>> {
        match &*self.0 {
            Node::Cons { head, .. } => Some(head),
            _ => None,
        }
    }

    /// The stack of the remaining children below the topmost one.
    pub fn rest(&self) -> Option<&Stack<A>> {
        match &*self.0 {
            Node::Cons { tail, .. } => Some(tail),
            _ => None,
        }
    }

    /// Character data when this is an order-0 stack.
    pub fn as_char(&self) -> Option<(Symbol, Link, &A)> {
        match &*self.0 {
            Node::Char { sym, link, ann, .. } => Some((*sym, *link, ann)),
            _ => None,
        }
    }

    /// Children listed topmost first.
    pub fn children(&self) -> Children<'_, A> {
        Children { cur: self }
    }

    /// Whether both handles share the same node.
    pub fn ptr_eq(&self, other: &Stack<A>) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Total number of characters in the stack.
    pub fn char_count(&self) -> usize {
        match &*self.0 {
            Node::Char { .. } => 1,
            Node::Empty { .. } => 0,
            Node::Cons { head, tail, .. } => head.char_count() + tail.char_count(),
        }
    }
}

/// Iterator over the children of a stack, topmost first.
pub struct Children<'a, A> {
    cur: &'a Stack<A>,
}

impl<'a, A> Iterator for Children<'a, A> {
    type Item = &'a Stack<A>;
    fn next(&mut self) -> Option<Self::Item> {
        match &*self.cur.0 {
            Node::Cons { head, tail, .. } => {
                self.cur = tail;
                Some(head)
            }
            _ => None,
        }
    }
}

impl<A: PartialEq> PartialEq for Stack<A> {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.hash_value() != other.hash_value() {
            return false;
        }
        match (&*self.0, &*other.0) {
            (
                Node::Char { sym: s1, link: l1, ann: a1, .. },
                Node::Char { sym: s2, link: l2, ann: a2, .. },
            ) => s1 == s2 && l1 == l2 && a1 == a2,
            (Node::Empty { order: o1 }, Node::Empty { order: o2 }) => o1 == o2,
            (
                Node::Cons { order: o1, head: h1, tail: t1, len: n1, .. },
                Node::Cons { order: o2, head: h2, tail: t2, len: n2, .. },
            ) => o1 == o2 && n1 == n2 && h1 == h2 && t1 == t2,
            _ => false,
        }
    }
}

impl<A: Eq> Eq for Stack<A> {}

impl<A> Hash for Stack<A> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash_value());
    }
}

impl<A: Hash + Clone> Stack<A> {
    /// `top_k`: the topmost order-`(k-1)` stack. `top_{n+1}(w) = w`;
    /// `top_k([]_k) = []_{k-1}` for `k >= 2`. Undefined when an enclosing
    /// stack is empty.
    pub fn top(&self, k: usize) -> Option<Stack<A>> {
        let order = self.order();
        if k == 0 || k > order + 1 {
            return None;
        }
        if k == order + 1 {
            return Some(self.clone());
        }
        match self.first() {
            Some(first) if k == order => Some(first.clone()),
            Some(first) => first.top(k),
            None if k == order && k >= 2 => Some(Stack::empty(k - 1)),
            None => None,
        }
    }

    /// The top character and its link, if `top_1` is defined.
    pub fn top_char(&self) -> Option<(Symbol, Link)> {
        self.top_char_ann().map(|(s, l, _)| (s, l))
    }

    /// The top character with its annotation.
    pub fn top_char_ann(&self) -> Option<(Symbol, Link, &A)> {
        let mut cur = self;
        loop {
            if let Some(c) = cur.as_char() {
                return Some(c);
            }
            cur = cur.first()?;
        }
    }

    /// Number of children of the topmost order-`k` stack.
    pub fn top_len(&self, k: usize) -> Option<usize> {
        if k == 0 || k > self.order() {
            return None;
        }
        Some(self.top(k + 1)?.len())
    }

    /// Rebuilds the spine down to the topmost order-`k` stack, replacing it by
    /// `f(that stack)`.
    fn map_top_k(&self, k: usize, f: &mut dyn FnMut(&Stack<A>) -> Option<Stack<A>>) -> Option<Stack<A>> {
        let order = self.order();
        if k == order {
            return f(self);
        }
        if k > order || k == 0 {
            return None;
        }
        let first = self.first()?;
        let new_first = first.map_top_k(k, f)?;
        Some(Stack::cons(new_first, self.rest()?.clone()))
    }

    /// `u :_k v`: places the order-`(k-1)` stack `u` on top of the topmost
    /// order-`k` stack of `self`.
    pub fn compose(&self, k: usize, u: Stack<A>) -> Option<Stack<A>> {
        if u.order() + 1 != k {
            return None;
        }
        self.map_top_k(k, &mut |s| Some(Stack::cons(u.clone(), s.clone())))
    }

    /// `pop_k`: removes the (non-empty) topmost order-`(k-1)` stack.
    pub fn pop(&self, k: usize) -> Option<Stack<A>> {
        if k == 0 {
            return None;
        }
        self.map_top_k(k, &mut |s| {
            let first = s.first()?;
            if first.order() >= 1 && first.is_empty() {
                return None;
            }
            s.rest().cloned()
        })
    }

    /// `push_k` (`k >= 2`): duplicates the topmost order-`(k-1)` stack.
    pub fn push(&self, k: usize) -> Option<Stack<A>> {
        if k < 2 {
            return None;
        }
        self.map_top_k(k, &mut |s| {
            let first = s.first()?.clone();
            Some(Stack::cons(first, s.clone()))
        })
    }

    /// `bottom_k^i`: keeps the last `i` children of the topmost order-`k` stack.
    pub fn bottom(&self, k: usize, i: usize) -> Option<Stack<A>> {
        self.map_top_k(k, &mut |s| {
            let len = s.len();
            if len == 0 || i > len {
                return None;
            }
            let mut cur = s;
            for _ in 0..(len - i) {
                cur = cur.rest()?;
            }
            Some(cur.clone())
        })
    }

    /// `collapse_k`: defined when the top character has a link of order
    /// exactly `k`; returns the link destination.
    pub fn collapse(&self, k: usize) -> Option<Stack<A>> {
        let (_, link) = self.top_char()?;
        if link.order != k || k < 1 {
            return None;
        }
        self.bottom(k, link.index)
    }

    /// `push_b^k`: pushes `b` with a link to `pop_k` of the current stack.
    pub fn push_char(&self, b: Symbol, k: usize, ann: A) -> Option<Stack<A>> {
        self.top_char()?;
        let m = self.top_len(k)?;
        if m == 0 {
            return None;
        }
        let c = Stack::character(b, Link::new(k, m - 1), ann);
        self.compose(1, c)
    }

    /// `rew_b`: replaces the top character, keeping its link and annotation.
    pub fn rew(&self, b: Symbol) -> Option<Stack<A>> {
        self.replace_top_char(&mut |_, link, ann| (b, link, ann.clone()))
    }

    /// Replaces the annotation of the top character.
    pub fn with_top_ann(&self, ann: A) -> Option<Stack<A>> {
        self.replace_top_char(&mut |sym, link, _| (sym, link, ann.clone()))
    }

    fn replace_top_char(&self, f: &mut dyn FnMut(Symbol, Link, &A) -> (Symbol, Link, A)) -> Option<Stack<A>> {
        if let Some((sym, link, ann)) = self.as_char() {
            let (s, l, a) = f(sym, link, ann);
            return Some(Stack::character(s, l, a));
        }
        let first = self.first()?;
        let new_first = first.replace_top_char(f)?;
        Some(Stack::cons(new_first, self.rest()?.clone()))
    }

    /// Maps every annotation, rebuilding the stack.
    pub fn map_ann<B: Hash>(&self, f: &mut dyn FnMut(Symbol, &A) -> B) -> Stack<B> {
        match &*self.0 {
            Node::Char { sym, link, ann, .. } => Stack::character(*sym, *link, f(*sym, ann)),
            Node::Empty { order } => Stack::empty(*order),
            Node::Cons { head, tail, .. } => {
                // Collect the chain iteratively to keep recursion depth bounded
                // by the stack order rather than the stack length.
                let mut heads = vec![head.map_ann(f)];
                let mut cur = tail;
                while let Some(h) = cur.first() {
                    heads.push(h.map_ann(f));
                    cur = cur.rest().expect("cons has a tail");
                }
                Stack::from_children(self.order(), heads)
            }
        }
    }

    /// Forgets annotations.
    pub fn project(&self) -> CollapsibleStack {
        self.map_ann(&mut |_, _| ())
    }

    /// Checks the structural invariants: children orders and link orders
    /// within `1..=n` where `n` is the order of the whole stack.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.order();
        self.validate_at(n)
    }

    fn validate_at(&self, n: usize) -> Result<(), String> {
        match &*self.0 {
            Node::Char { link, .. } => {
                if link.order == 0 || link.order > n {
                    return Err(format!("link order {} outside 1..={}", link.order, n));
                }
                Ok(())
            }
            Node::Empty { order } => {
                if *order == 0 {
                    Err("empty order-0 stack".into())
                } else {
                    Ok(())
                }
            }
            Node::Cons { order, .. } => {
                let mut count = 0;
                for child in self.children() {
                    if child.order() + 1 != *order {
                        return Err(format!(
                            "order-{} child inside an order-{} stack",
                            child.order(),
                            order
                        ));
                    }
                    child.validate_at(n)?;
                    count += 1;
                }
                if count != self.len() {
                    return Err("cached length disagrees with the children".into());
                }
                Ok(())
            }
        }
    }
}

impl Stack<()> {
    /// Builds a plain character.
    pub fn plain_char(sym: Symbol, link: Link) -> Self {
        Stack::character(sym, link, ())
    }
}

impl<A: fmt::Debug> fmt::Debug for Stack<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Char { sym, link, ann, .. } => {
                write!(f, "s{}^({},{})", sym.0, link.order, link.index)?;
                let shown = format!("{ann:?}");
                if shown != "()" {
                    write!(f, "{shown}")?;
                }
                Ok(())
            }
            _ => {
                write!(f, "[")?;
                for (i, c) in self.children().enumerate() {
                    if i > 0 && c.order() == 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{c:?}")?;
                }
                write!(f, "]")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(s: u32, k: usize, i: usize) -> CollapsibleStack {
        Stack::plain_char(Symbol(s), Link::new(k, i))
    }
    fn st(order: usize, c: Vec<CollapsibleStack>) -> CollapsibleStack {
        Stack::from_children(order, c)
    }
    const A: u32 = 0;
    const B: u32 = 1;
    const C: u32 = 2;
    const D: u32 = 3;

    /// `[[b][c][d]]` with default order-1 links.
    fn bcd() -> CollapsibleStack {
        st(
            2,
            vec![
                st(1, vec![ch(B, 1, 0)]),
                st(1, vec![ch(C, 1, 0)]),
                st(1, vec![ch(D, 1, 0)]),
            ],
        )
    }

    #[test]
    fn top_cases() {
        let w = bcd();
        assert_eq!(w.top(2).unwrap(), st(1, vec![ch(B, 1, 0)]));
        assert_eq!(w.top_char().unwrap().0, Symbol(B));
        let w2 = st(2, vec![st(1, vec![])]);
        assert!(w2.top(1).is_none());
        assert_eq!(Stack::<()>::empty(2).top(2).unwrap(), Stack::empty(1));
    }

    #[test]
    fn bottom_cases() {
        let w = bcd();
        assert_eq!(w.bottom(2, 2).unwrap(), w.rest().unwrap().clone());
        assert_eq!(w.bottom(2, 3).unwrap(), w);
        assert!(w.bottom(2, 4).is_none());
    }

    #[test]
    fn push_char_then_collapse() {
        let w = bcd();
        let w1 = w.push_char(Symbol(A), 2, ()).unwrap();
        assert_eq!(w1.top_char().unwrap(), (Symbol(A), Link::new(2, 2)));
        let w2 = w1.push(2).unwrap();
        assert_eq!(w2.len(), 4);
        let w3 = w2.collapse(2).unwrap();
        assert_eq!(w3, w.rest().unwrap().clone());
        assert!(w1.collapse(1).is_none());
    }

    #[test]
    fn pop_requires_nonempty_removed_part() {
        let w = st(2, vec![st(1, vec![]), st(1, vec![ch(A, 1, 0)])]);
        assert!(w.pop(2).is_none());
        let w = st(2, vec![st(1, vec![ch(A, 1, 0)])]);
        assert_eq!(w.pop(1).unwrap(), st(2, vec![st(1, vec![])]));
        assert_eq!(w.pop(2).unwrap(), Stack::empty(2));
    }

    #[test]
    fn rew_keeps_link() {
        let w = bcd().push_char(Symbol(A), 2, ()).unwrap();
        let r = w.rew(Symbol(C)).unwrap();
        assert_eq!(r.top_char().unwrap(), (Symbol(C), Link::new(2, 2)));
        assert_eq!(r.rew(Symbol(A)).unwrap(), w);
    }

    #[test]
    fn compose_cases() {
        let cd = bcd().rest().unwrap().clone();
        assert_eq!(cd.compose(2, st(1, vec![ch(B, 1, 0)])).unwrap(), bcd());
        let bc = st(2, vec![st(1, vec![ch(B, 1, 0)]), st(1, vec![ch(C, 1, 0)])]);
        let abc = bc.compose(1, ch(A, 1, 1)).unwrap();
        assert_eq!(abc.top(2).unwrap().len(), 2);
    }

    #[test]
    fn equality_includes_links() {
        assert_ne!(ch(A, 1, 0), ch(A, 2, 0));
        assert_ne!(ch(A, 1, 0), ch(A, 1, 1));
    }
}
