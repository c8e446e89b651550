//! Text formats: stack literals, model files and automaton files.
//!
//! Stack literals nest brackets, topmost first, with optional link
//! annotations: `[[a^(2,2) b][c][d]]`. An omitted link defaults to the
//! character's declared link order (1 if undeclared) and, as index, the number
//! of stacks below the character's position at that order, which is the link
//! `push_b^k` would have created there.
//!
//! Model files are line based:
//!
//! ```text
//! order 2
//! alphabet a b c d
//! linkorder a=2
//! init q1 [[b][c][d]]
//! target q5
//! rule q1 b cpush a 2 q2
//! rule q2 a push 2 q3
//! rule q3 a collapse 2 q4
//! rule q4 c pop 2 guard {d} q5
//! alt q1 {q2,q3}
//! ```
//!
//! Automaton files list long-form transitions and final states:
//!
//! ```text
//! q5 -- d / {} --> ({};{})
//! x -- a / {} --> ({y})
//! final 1: y
//! ```
//!
//! A state name that is a control of the model denotes that control's initial
//! state. Other names are automaton states whose order is inferred from their
//! use (source of a transition with `k` target sets, member of the `i`-th
//! target set, a `final k:` line, or an explicit `state k: x y` line).

use std::collections::HashMap;

use crate::automaton::{Justification, LongTrans, StackAutomaton, StateId, StateSet};
use crate::model::{Alphabet, Configuration, ControlId, Cpds, Op, Rule, RuleKind};
use crate::stack::{CollapsibleStack, Link, Stack, Symbol};

/// A syntax or well-formedness error with its position.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

fn err<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        col,
        msg: msg.into(),
    })
}

// --------------------------------------------------------------------------
// Stacks
// --------------------------------------------------------------------------

enum Ast {
    List(Vec<Ast>),
    Char { name: String, link: Option<Link>, col: usize },
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col0: usize,
}

impl Lexer {
    fn new(src: &str, line: usize, col0: usize) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line,
            col0,
        }
    }

    fn col(&self) -> usize {
        self.col0 + self.pos
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => err(self.line, self.col(), format!("expected '{c}', found '{x}'")),
            None => err(self.line, self.col(), format!("expected '{c}', found end of input")),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && is_ident_char(self.chars[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return err(self.line, self.col(), "expected a name");
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<usize, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse()
            .or_else(|_| err(self.line, self.col0 + start, "expected a number"))
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '.'
}

fn parse_ast(lx: &mut Lexer, order: usize) -> Result<Ast, ParseError> {
    if order == 0 {
        let col = lx.col();
        let name = lx.ident()?;
        let link = if lx.peek() == Some('^') {
            lx.pos += 1;
            lx.expect('(')?;
            let o = lx.number()?;
            lx.expect(',')?;
            let i = lx.number()?;
            lx.expect(')')?;
            Some(Link::new(o, i))
        } else {
            None
        };
        return Ok(Ast::Char { name, link, col });
    }
    lx.expect('[')?;
    let mut items = Vec::new();
    loop {
        match lx.peek() {
            Some(']') => {
                lx.pos += 1;
                return Ok(Ast::List(items));
            }
            None => return err(lx.line, lx.col(), "unterminated stack literal"),
            Some('[') if order == 1 => return err(lx.line, lx.col(), "order-1 stacks contain characters, not stacks"),
            Some(c) if order >= 2 && c != '[' => {
                return err(lx.line, lx.col(), format!("expected an order-{} stack, found '{c}'", order - 1))
            }
            _ => items.push(parse_ast(lx, order - 1)?),
        }
    }
}

fn build(
    ast: &Ast,
    order: usize,
    n: usize,
    alphabet: &Alphabet,
    below: &mut Vec<usize>,
    line: usize,
) -> Result<CollapsibleStack, ParseError> {
    match ast {
        Ast::Char { name, link, col } => {
            let sym = match alphabet.lookup(name) {
                Some(s) => s,
                None => return err(line, *col, format!("undeclared character '{name}'")),
            };
            let l = match link {
                Some(l) => *l,
                None => {
                    let o = alphabet.link_order(sym).unwrap_or(1);
                    if o > n {
                        return err(line, *col, format!("link order {o} exceeds the stack order {n}"));
                    }
                    Link::new(o, below[o])
                }
            };
            if l.order == 0 || l.order > n {
                return err(line, *col, format!("link order {} outside 1..={n}", l.order));
            }
            if let Some(d) = alphabet.link_order(sym) {
                if d != l.order {
                    return err(line, *col, format!("character '{name}' must carry links of order {d}"));
                }
            }
            Ok(Stack::plain_char(sym, l))
        }
        Ast::List(items) => {
            let len = items.len();
            let mut children = Vec::with_capacity(len);
            for (idx, item) in items.iter().enumerate() {
                below[order] = len - 1 - idx;
                children.push(build(item, order - 1, n, alphabet, below, line)?);
            }
            Ok(Stack::from_children(order, children))
        }
    }
}

/// Parses an order-`n` stack literal.
pub fn parse_stack(text: &str, n: usize, alphabet: &Alphabet) -> Result<CollapsibleStack, ParseError> {
    parse_stack_at(text, n, alphabet, 1, 1)
}

fn parse_stack_at(text: &str, n: usize, alphabet: &Alphabet, line: usize, col: usize) -> Result<CollapsibleStack, ParseError> {
    if n == 0 {
        return err(line, col, "stack order must be at least 1");
    }
    let mut lx = Lexer::new(text, line, col);
    let ast = parse_ast(&mut lx, n)?;
    if !lx.at_end() {
        return err(line, lx.col(), "unexpected text after the stack literal");
    }
    let mut below = vec![0; n + 1];
    build(&ast, n, n, alphabet, &mut below, line)
}

/// Renders a stack literal; links are printed only where they differ from
/// the default the parser would assume.
pub fn render_stack<A>(w: &Stack<A>, alphabet: &Alphabet) -> String {
    let n = w.order();
    let mut out = String::new();
    let mut below = vec![0; n + 1];
    render_rec(w, alphabet, &mut below, &mut out);
    out
}

fn render_rec<A>(w: &Stack<A>, alphabet: &Alphabet, below: &mut Vec<usize>, out: &mut String) {
    if let Some((sym, link, _)) = w.as_char() {
        out.push_str(alphabet.name(sym));
        let o = alphabet.link_order(sym).unwrap_or(1);
        let default = o < below.len() && link == Link::new(o, below[o]);
        if !default {
            out.push_str(&format!("^({},{})", link.order, link.index));
        }
        return;
    }
    let order = w.order();
    let len = w.len();
    out.push('[');
    for (idx, child) in w.children().enumerate() {
        if idx > 0 && order == 1 {
            out.push(' ');
        }
        below[order] = len - 1 - idx;
        render_rec(child, alphabet, below, out);
    }
    out.push(']');
}

// --------------------------------------------------------------------------
// Models
// --------------------------------------------------------------------------

/// A model file: the system, its initial configuration and target controls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelFile {
    pub model: Cpds,
    pub init: Option<Configuration>,
    pub targets: Vec<ControlId>,
}

/// Splits a line into tokens; `{...}` groups form a single token.
fn tokens(line: &str) -> Vec<(usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if chars[i] == '{' {
            let mut s = String::new();
            while i < chars.len() {
                let c = chars[i];
                if !c.is_whitespace() {
                    s.push(c);
                }
                i += 1;
                if c == '}' {
                    break;
                }
            }
            out.push((start + 1, s));
        } else {
            let mut s = String::new();
            while i < chars.len() && !chars[i].is_whitespace() {
                s.push(chars[i]);
                i += 1;
            }
            out.push((start + 1, s));
        }
    }
    out
}

fn parse_set(tok: &str, line: usize, col: usize) -> Result<Vec<String>, ParseError> {
    if !(tok.starts_with('{') && tok.ends_with('}')) || tok.len() < 2 {
        return err(line, col, format!("expected a set '{{...}}', found '{tok}'"));
    }
    let inner = &tok[1..tok.len() - 1];
    let names: Vec<String> = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    for nm in &names {
        if !nm.chars().all(is_ident_char) {
            return err(line, col, format!("invalid name '{nm}'"));
        }
    }
    Ok(names)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_usize(tok: &str, line: usize, col: usize) -> Result<usize, ParseError> {
    tok.parse()
        .or_else(|_| err(line, col, format!("expected a number, found '{tok}'")))
}

fn valid_name(tok: &str, line: usize, col: usize) -> Result<(), ParseError> {
    if tok.is_empty() || !tok.chars().all(is_ident_char) {
        return err(line, col, format!("invalid name '{tok}'"));
    }
    Ok(())
}

/// Parses a model file.
pub fn parse_model(text: &str) -> Result<ModelFile, ParseError> {
    let mut order: Option<usize> = None;
    let mut alphabet: Option<Alphabet> = None;
    let mut model: Option<Cpds> = None;
    let mut init_line: Option<(usize, usize, String, String)> = None;
    let mut targets = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = strip_comment(raw);
        let toks = tokens(body);
        let Some((c0, kw)) = toks.first().cloned() else { continue };
        let need_model = |model: &mut Option<Cpds>, order: Option<usize>, alphabet: &Option<Alphabet>| -> Result<(), ParseError> {
            if model.is_none() {
                let Some(n) = order else {
                    return err(line, c0, "'order' must come first");
                };
                let Some(a) = alphabet.clone() else {
                    return err(line, c0, "'alphabet' must be declared before use");
                };
                *model = Some(Cpds::new(n, a));
            }
            Ok(())
        };
        match kw.as_str() {
            "order" => {
                if order.is_some() {
                    return err(line, c0, "duplicate 'order'");
                }
                let Some((c, t)) = toks.get(1) else {
                    return err(line, c0, "'order' needs a number");
                };
                let n = parse_usize(t, line, *c)?;
                if n == 0 {
                    return err(line, *c, "order must be at least 1");
                }
                if toks.len() > 2 {
                    return err(line, toks[2].0, "unexpected token");
                }
                order = Some(n);
            }
            "alphabet" => {
                if alphabet.is_some() || model.is_some() {
                    return err(line, c0, "'alphabet' must appear once, before rules");
                }
                let mut a = Alphabet::default();
                for (c, t) in &toks[1..] {
                    valid_name(t, line, *c)?;
                    if a.lookup(t).is_some() {
                        return err(line, *c, format!("duplicate character '{t}'"));
                    }
                    a.intern(t);
                }
                if a.is_empty() {
                    return err(line, c0, "the alphabet is empty");
                }
                alphabet = Some(a);
            }
            "linkorder" => {
                if model.is_some() {
                    return err(line, c0, "'linkorder' must come before rules");
                }
                let Some(a) = alphabet.as_mut() else {
                    return err(line, c0, "'alphabet' must be declared before 'linkorder'");
                };
                let Some(n) = order else {
                    return err(line, c0, "'order' must come first");
                };
                for (c, t) in &toks[1..] {
                    let Some((name, k)) = t.split_once('=') else {
                        return err(line, *c, "expected 'character=order'");
                    };
                    let Some(s) = a.lookup(name) else {
                        return err(line, *c, format!("undeclared character '{name}'"));
                    };
                    let k = parse_usize(k, line, *c)?;
                    if k == 0 || k > n {
                        return err(line, *c, format!("link order {k} outside 1..={n}"));
                    }
                    a.set_link_order(s, k);
                }
            }
            "controls" => {
                need_model(&mut model, order, &alphabet)?;
                let m = model.as_mut().expect("model initialised");
                for (c, t) in &toks[1..] {
                    valid_name(t, line, *c)?;
                    m.control(t);
                }
            }
            "init" => {
                need_model(&mut model, order, &alphabet)?;
                if init_line.is_some() {
                    return err(line, c0, "duplicate 'init'");
                }
                let Some((c, ctl)) = toks.get(1) else {
                    return err(line, c0, "'init' needs a control and a stack");
                };
                valid_name(ctl, line, *c)?;
                model.as_mut().expect("model initialised").control(ctl);
                // The stack literal is the rest of the line after the control.
                let after = body[c0 - 1..].find(ctl.as_str()).map(|i| c0 - 1 + i + ctl.len());
                let rest = after.map(|i| body[i..].to_string()).unwrap_or_default();
                init_line = Some((line, after.unwrap_or(0) + 1, ctl.clone(), rest));
            }
            "target" => {
                need_model(&mut model, order, &alphabet)?;
                let m = model.as_mut().expect("model initialised");
                if toks.len() < 2 {
                    return err(line, c0, "'target' needs at least one control");
                }
                for (c, t) in &toks[1..] {
                    valid_name(t, line, *c)?;
                    let id = m.control(t);
                    if !targets.contains(&id) {
                        targets.push(id);
                    }
                }
            }
            "rule" => {
                need_model(&mut model, order, &alphabet)?;
                let m = model.as_mut().expect("model initialised");
                parse_rule(m, &toks, line)?;
            }
            "alt" => {
                need_model(&mut model, order, &alphabet)?;
                let m = model.as_mut().expect("model initialised");
                if toks.len() != 3 {
                    return err(line, c0, "expected 'alt <control> {<controls>}'");
                }
                valid_name(&toks[1].1, line, toks[1].0)?;
                let from = m.control(&toks[1].1);
                let names = parse_set(&toks[2].1, line, toks[2].0)?;
                if names.is_empty() {
                    return err(line, toks[2].0, "alternating rule with an empty control set");
                }
                let to: Vec<ControlId> = names.iter().map(|n| m.control(n)).collect();
                m.add_alt(from, to);
            }
            other => return err(line, c0, format!("unknown directive '{other}'")),
        }
    }
    let Some(n) = order else {
        return err(1, 1, "missing 'order'");
    };
    let mut model = match model {
        Some(m) => m,
        None => match alphabet {
            Some(a) => Cpds::new(n, a),
            None => return err(1, 1, "missing 'alphabet'"),
        },
    };
    let init = match init_line {
        Some((line, col, ctl, rest)) => {
            let w = parse_stack_at(&rest, n, &model.alphabet, line, col)?;
            if w.top_char().is_none() {
                return err(line, col, "the initial stack must have a top character");
            }
            Some(Configuration::new(model.control(&ctl), w))
        }
        None => None,
    };
    model.validate().or_else(|e| err(0, 0, e.to_string()))?;
    Ok(ModelFile { model, init, targets })
}

fn parse_rule(m: &mut Cpds, toks: &[(usize, String)], line: usize) -> Result<(), ParseError> {
    let c0 = toks[0].0;
    if toks.len() < 5 {
        return err(line, c0, "incomplete rule");
    }
    let n = m.order;
    valid_name(&toks[1].1, line, toks[1].0)?;
    let sym = lookup_sym(&m.alphabet, &toks[2].1, line, toks[2].0)?;
    let opname = toks[3].1.as_str();
    let mut i = 4;
    let take = |i: &mut usize| -> Result<(usize, String), ParseError> {
        let t = toks.get(*i).cloned();
        *i += 1;
        t.map_or_else(|| err(line, c0, "incomplete rule"), Ok)
    };
    let order_arg = |(c, t): (usize, String)| -> Result<usize, ParseError> {
        let k = parse_usize(&t, line, c)?;
        if k == 0 || k > n {
            return err(line, c, format!("order {k} outside 1..={n}"));
        }
        Ok(k)
    };
    let op = match opname {
        "pop" => Op::Pop(order_arg(take(&mut i)?)?),
        "push" => {
            let (c, t) = take(&mut i)?;
            let k = order_arg((c, t))?;
            if k < 2 {
                return err(line, c, "push needs an order of at least 2");
            }
            Op::Push(k)
        }
        "collapse" => {
            let (c, t) = take(&mut i)?;
            let k = order_arg((c, t))?;
            if k < 2 {
                return err(line, c, "collapse needs an order of at least 2");
            }
            Op::Collapse(k)
        }
        "cpush" => {
            let (c, t) = take(&mut i)?;
            let b = lookup_sym(&m.alphabet, &t, line, c)?;
            let k = order_arg(take(&mut i)?)?;
            Op::PushChar(b, k)
        }
        "rew" => {
            let (c, t) = take(&mut i)?;
            Op::Rew(lookup_sym(&m.alphabet, &t, line, c)?)
        }
        other => return err(line, toks[3].0, format!("unknown operation '{other}'")),
    };
    let mut guard = None;
    if toks.get(i).map(|t| t.1.as_str()) == Some("guard") {
        i += 1;
        let (c, t) = take(&mut i)?;
        if !op.is_destructive() {
            return err(line, c, "only pop and collapse may be guarded");
        }
        let names = parse_set(&t, line, c)?;
        let mut syms = Vec::new();
        for nm in names {
            syms.push(lookup_sym(&m.alphabet, &nm, line, c)?);
        }
        syms.sort_unstable();
        syms.dedup();
        guard = Some(syms);
    }
    let (c, to) = take(&mut i)?;
    valid_name(&to, line, c)?;
    if let Some((c, _)) = toks.get(i) {
        return err(line, *c, "unexpected token after the rule");
    }
    if let Op::PushChar(b, k) = op {
        if let Some(d) = m.alphabet.link_order(b) {
            if d != k {
                return err(
                    line,
                    toks[4].0,
                    format!("character '{}' is declared with link order {d}", m.alphabet.name(b)),
                );
            }
        }
    }
    let from = m.control(&toks[1].1);
    let to = m.control(&to);
    m.add_rule_kind(RuleKind::Step {
        from,
        sym,
        op,
        guard,
        to,
    });
    Ok(())
}

fn lookup_sym(a: &Alphabet, name: &str, line: usize, col: usize) -> Result<Symbol, ParseError> {
    a.lookup(name)
        .map_or_else(|| err(line, col, format!("undeclared character '{name}'")), Ok)
}

/// Renders a rule in the model file syntax.
pub fn render_rule(m: &Cpds, rule: &Rule) -> String {
    let sym = |s: Symbol| m.alphabet.name(s).to_string();
    match &rule.kind {
        RuleKind::Alt { from, to } => {
            let names: Vec<&str> = to.iter().map(|&p| m.control_name(p)).collect();
            format!("alt {} {{{}}}", m.control_name(*from), names.join(","))
        }
        RuleKind::Step {
            from,
            sym: a,
            op,
            guard,
            to,
        } => {
            let op_s = match op {
                Op::Pop(k) => format!("pop {k}"),
                Op::Push(k) => format!("push {k}"),
                Op::Collapse(k) => format!("collapse {k}"),
                Op::PushChar(b, k) => format!("cpush {} {k}", sym(*b)),
                Op::Rew(b) => format!("rew {}", sym(*b)),
            };
            let guard_s = match guard {
                Some(g) => {
                    let names: Vec<String> = g.iter().map(|&b| sym(b)).collect();
                    format!(" guard {{{}}}", names.join(","))
                }
                None => String::new(),
            };
            format!(
                "rule {} {} {}{} {}",
                m.control_name(*from),
                sym(*a),
                op_s,
                guard_s,
                m.control_name(*to)
            )
        }
    }
}

/// Renders a model file; parsing the result yields an equal [`ModelFile`].
pub fn render_model(f: &ModelFile) -> String {
    let m = &f.model;
    let mut out = String::new();
    out.push_str(&format!("order {}\n", m.order));
    let names: Vec<&str> = m.alphabet.symbols().map(|s| m.alphabet.name(s)).collect();
    out.push_str(&format!("alphabet {}\n", names.join(" ")));
    let links: Vec<String> = m
        .alphabet
        .symbols()
        .filter_map(|s| m.alphabet.link_order(s).map(|k| format!("{}={k}", m.alphabet.name(s))))
        .collect();
    if !links.is_empty() {
        out.push_str(&format!("linkorder {}\n", links.join(" ")));
    }
    if !m.controls.is_empty() {
        out.push_str(&format!("controls {}\n", m.controls.join(" ")));
    }
    if let Some(c) = &f.init {
        out.push_str(&format!(
            "init {} {}\n",
            m.control_name(c.control),
            render_stack(&c.stack, &m.alphabet)
        ));
    }
    if !f.targets.is_empty() {
        let t: Vec<&str> = f.targets.iter().map(|&p| m.control_name(p)).collect();
        out.push_str(&format!("target {}\n", t.join(" ")));
    }
    for r in &m.rules {
        out.push_str(&render_rule(m, r));
        out.push('\n');
    }
    out
}

// --------------------------------------------------------------------------
// Automata
// --------------------------------------------------------------------------

struct RawTrans {
    line: usize,
    src: (usize, String),
    sym: (usize, String),
    br: (usize, Vec<String>),
    targets: Vec<(usize, Vec<String>)>,
}

/// Parses an automaton file for `model`.
pub fn parse_automaton(text: &str, model: &Cpds) -> Result<StackAutomaton, ParseError> {
    let n = model.order;
    let mut orders: HashMap<String, (usize, usize, usize)> = HashMap::new();
    let mut note = |name: &str, k: usize, line: usize, col: usize| -> Result<(), ParseError> {
        let is_control = model.lookup_control(name).is_some();
        if is_control {
            if k != n {
                return err(line, col, format!("'{name}' is a control state and has order {n}, not {k}"));
            }
            return Ok(());
        }
        match orders.get(name) {
            Some(&(o, l, c)) if o != k => err(
                line,
                col,
                format!("'{name}' used with order {k} but with order {o} at line {l}, column {c}"),
            ),
            Some(_) => Ok(()),
            None => {
                orders.insert(name.to_string(), (k, line, col));
                Ok(())
            }
        }
    };
    let mut raws = Vec::new();
    let mut finals = Vec::new();
    let mut untyped_br: Vec<(String, usize, usize)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        let col_of = |s: &str| raw.find(s).map_or(1, |i| i + 1);
        if let Some(rest) = body.strip_prefix("final").or_else(|| body.strip_prefix("state")) {
            let is_final = body.starts_with("final");
            let Some((k, names)) = rest.split_once(':') else {
                return err(line, 1, "expected 'final <order>: <states>'");
            };
            let k = parse_usize(k.trim(), line, col_of(k.trim()))?;
            if k == 0 || k > n {
                return err(line, 1, format!("order {k} outside 1..={n}"));
            }
            for nm in names.split_whitespace() {
                valid_name(nm, line, col_of(nm))?;
                note(nm, k, line, col_of(nm))?;
                if is_final {
                    finals.push((nm.to_string(), line, col_of(nm)));
                }
            }
            continue;
        }
        let Some((lhs, rhs)) = body.split_once("-->") else {
            return err(line, 1, "expected '<state> -- <char> / {..} --> (..)'");
        };
        let Some((src, label)) = lhs.split_once("--") else {
            return err(line, 1, "expected '<state> -- <char> / {..}'");
        };
        let src = src.trim();
        valid_name(src, line, col_of(src))?;
        let (sym, br) = match label.split_once('/') {
            Some((s, b)) => (s.trim(), b.trim()),
            None => (label.trim(), "{}"),
        };
        valid_name(sym, line, col_of(sym))?;
        let br_names = parse_set(&br.replace(' ', ""), line, col_of(br))?;
        let rhs = rhs.trim();
        if !(rhs.starts_with('(') && rhs.ends_with(')')) {
            return err(line, col_of(rhs), "expected '(<set>;...;<set>)'");
        }
        let inner = &rhs[1..rhs.len() - 1];
        let mut targets = Vec::new();
        for part in inner.split(';') {
            let part = part.trim();
            targets.push((col_of(part), parse_set(&part.replace(' ', ""), line, col_of(part))?));
        }
        let k = targets.len();
        if k == 0 || k > n {
            return err(line, col_of(rhs), format!("{k} target sets; expected between 1 and {n}"));
        }
        note(src, k, line, col_of(src))?;
        for (i, (c, set)) in targets.iter().enumerate() {
            for nm in set {
                note(nm, i + 1, line, *c)?;
            }
        }
        for nm in &br_names {
            untyped_br.push((nm.clone(), line, col_of(br)));
        }
        raws.push(RawTrans {
            line,
            src: (col_of(src), src.to_string()),
            sym: (col_of(sym), sym.to_string()),
            br: (col_of(br), br_names),
            targets,
        });
    }
    let mut a = StackAutomaton::for_model(model);
    let resolve = |a: &mut StackAutomaton, name: &str, line: usize, col: usize| -> Result<StateId, ParseError> {
        if let Some(p) = model.lookup_control(name) {
            return Ok(a.control_state(p));
        }
        match orders.get(name) {
            Some(&(k, _, _)) => Ok(a.named_state(name, k)),
            None => err(
                line,
                col,
                format!("cannot infer the order of '{name}'; declare it with 'state <order>: {name}'"),
            ),
        }
    };
    for (nm, line, col) in &untyped_br {
        resolve(&mut a, nm, *line, *col)?;
    }
    for (nm, line, col) in &finals {
        let q = resolve(&mut a, nm, *line, *col)?;
        a.set_final(q);
    }
    for r in &raws {
        let src = resolve(&mut a, &r.src.1, r.line, r.src.0)?;
        let sym = lookup_sym(&model.alphabet, &r.sym.1, r.line, r.sym.0)?;
        let mut br = StateSet::new();
        for nm in &r.br.1 {
            br.insert(resolve(&mut a, nm, r.line, r.br.0)?);
        }
        let mut targets = Vec::new();
        for (c, set) in &r.targets {
            let mut s = StateSet::new();
            for nm in set {
                s.insert(resolve(&mut a, nm, r.line, *c)?);
            }
            targets.push(s);
        }
        let t = LongTrans { src, sym, br, targets };
        a.add_long(&t, Justification::Initial)
            .or_else(|e| err(r.line, 1, e.to_string()))?;
    }
    a.check_conventions(&|q| a.state_name(q, &model.controls))
        .or_else(|e| err(0, 0, e.to_string()))?;
    Ok(a)
}

/// Renders every long-form transition and the final states of `a`.
pub fn render_automaton(a: &StackAutomaton, model: &Cpds) -> String {
    let mut out = String::new();
    for t in a.one_ids() {
        out.push_str(&a.render_long(&a.long_of(t), &model.alphabet, &model.controls));
        out.push('\n');
    }
    let mut by_order: Vec<Vec<String>> = vec![Vec::new(); a.order() + 1];
    for q in a.finals() {
        by_order[a.state_order(q)].push(a.state_name(q, &model.controls));
    }
    for (k, names) in by_order.iter().enumerate() {
        if !names.is_empty() {
            out.push_str(&format!("final {k}: {}\n", names.join(" ")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = "order 2\nalphabet a b c d\nlinkorder a=2\ninit q1 [[b][c][d]]\ntarget q5\n\
        rule q1 b cpush a 2 q2\nrule q2 a push 2 q3\nrule q3 a collapse 2 q4\nrule q4 c pop 2 q5\n";

    #[test]
    fn stack_literal_default_links() {
        let mut a = Alphabet::new(["a", "b", "c", "d"]);
        let s = a.lookup("a").unwrap();
        a.set_link_order(s, 2);
        let w = parse_stack("[[a b][c][d]]", 2, &a).unwrap();
        assert_eq!(w.top_char().unwrap(), (s, Link::new(2, 2)));
        let explicit = parse_stack("[[a^(2,2) b][c][d]]", 2, &a).unwrap();
        assert_eq!(w, explicit);
        assert_eq!(render_stack(&w, &a), "[[a b][c][d]]");
        let other = parse_stack("[[a^(2,0) b][c][d]]", 2, &a).unwrap();
        assert_eq!(render_stack(&other, &a), "[[a^(2,0) b][c][d]]");
    }

    #[test]
    fn stack_literal_errors() {
        let a = Alphabet::new(["a"]);
        assert!(parse_stack("[[a]", 2, &a).is_err());
        assert!(parse_stack("[[z]]", 2, &a).is_err());
        assert!(parse_stack("[a]", 2, &a).is_err());
        assert!(parse_stack("[[a]] x", 2, &a).is_err());
        assert!(parse_stack("[[a^(3,0)]]", 2, &a).is_err());
        assert_eq!(parse_stack("[[]]", 2, &a).unwrap().len(), 1);
    }

    #[test]
    fn model_round_trip() {
        let f = parse_model(FIG3).unwrap();
        assert_eq!(f.model.rules.len(), 4);
        assert_eq!(f.targets.len(), 1);
        let text = render_model(&f);
        assert_eq!(parse_model(&text).unwrap(), f);
    }

    #[test]
    fn model_errors_are_located() {
        let e = parse_model("order 2\nalphabet\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_model("order 2\nalphabet a\nrule p z pop 1 q\n").unwrap_err();
        assert_eq!((e.line, e.col), (3, 8));
        assert!(parse_model("order 2\nalphabet a\nrule p a push 1 q\n").is_err());
        assert!(parse_model("order 2\nalphabet a\nrule p a push 2 guard {a} q\n").is_err());
    }

    #[test]
    fn automaton_parsing() {
        let f = parse_model(FIG3).unwrap();
        let a = parse_automaton("q5 -- d / {} --> ({};{})\nx -- a / {} --> ({y};{})\nfinal 1: y\n", &f.model).unwrap();
        assert_eq!(a.num_one(), 2);
        let q5 = a.control_state(f.model.lookup_control("q5").unwrap());
        let w = parse_stack("[[d]]", 2, &f.model.alphabet).unwrap();
        assert!(a.accepts_from(&w, &StateSet::singleton(q5)));
        assert!(parse_automaton("y -- a / {} --> ({q5})\n", &f.model).is_err());
    }
}
