//! Abstract syntax of terms, patterns and types, together with the
//! concrete grammar (parser and pretty-printer), α-equivalence and
//! capture-avoiding substitution.
//!
//! Concrete grammar (see `docs/grammar.ebnf`):
//!
//! ```text
//! term    := '\' pattern '.' term | tensor
//! tensor  := app ('*' app)?                  (non-associative)
//! app     := atom+                           (left-associative)
//! atom    := var | GATE | ket | '(' term ')'
//! ket     := '|0>' | '|1>'  with optional '_' NAT label
//! pattern := var | '<' var ',' var '>'
//! ```
//!
//! Variables start with a lowercase letter, gate names with an
//! uppercase letter. Bit constants without an explicit label receive
//! fresh labels in textual order, starting from the smallest unused
//! natural number (counting from 1).

use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

/// Types: the ground type of bits, linear arrows, and tensors.
/// `Bit^n` is the right-nested n-fold tensor of `Bit`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Bit,
    Arrow(Box<Type>, Box<Type>),
    Tensor(Box<Type>, Box<Type>),
}

impl Type {
    pub fn arrow(dom: Type, cod: Type) -> Type {
        Type::Arrow(Box::new(dom), Box::new(cod))
    }

    pub fn tensor(left: Type, right: Type) -> Type {
        Type::Tensor(Box::new(left), Box::new(right))
    }

    /// The right-nested n-fold tensor of `Bit`. Panics if `n == 0`.
    pub fn bits(n: usize) -> Type {
        assert!(n > 0, "Bit^0 is not a type");
        let mut ty = Type::Bit;
        for _ in 1..n {
            ty = Type::tensor(Type::Bit, ty);
        }
        ty
    }

    /// If the type is the right-nested tensor `Bit^n`, returns `n`.
    pub fn as_bits(&self) -> Option<usize> {
        match self {
            Type::Bit => Some(1),
            Type::Tensor(l, r) if **l == Type::Bit => r.as_bits().map(|n| n + 1),
            _ => None,
        }
    }

    /// Total number of `Bit` leaves.
    pub fn bit_leaves(&self) -> usize {
        match self {
            Type::Bit => 1,
            Type::Arrow(a, b) | Type::Tensor(a, b) => a.bit_leaves() + b.bit_leaves(),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Arrows are right-associative, tensor binds tighter.
        match self {
            Type::Bit => write!(f, "B"),
            Type::Arrow(a, b) => {
                match **a {
                    Type::Arrow(..) => write!(f, "({})", a)?,
                    _ => write!(f, "{}", a)?,
                }
                write!(f, " -o {}", b)
            }
            Type::Tensor(a, b) => {
                match **a {
                    Type::Bit => write!(f, "{}", a)?,
                    _ => write!(f, "({})", a)?,
                }
                write!(f, " * ")?;
                match **b {
                    Type::Bit => write!(f, "{}", b),
                    _ => write!(f, "({})", b),
                }
            }
        }
    }
}

/// Abstraction patterns: a single variable or a pair of distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(String),
    Pair(String, String),
}

impl Pattern {
    pub fn binders(&self) -> Vec<&str> {
        match self {
            Pattern::Var(x) => vec![x],
            Pattern::Pair(x, y) => vec![x, y],
        }
    }
}

/// Terms of the calculus. Bit constants carry a natural-number label;
/// labels occurring in a term are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    BitConst(u8, u64),
    Gate(String),
    TensorPair(Box<Term>, Box<Term>),
    App(Box<Term>, Box<Term>),
    Lambda(Pattern, Box<Term>),
}

impl Term {
    pub fn pair(left: Term, right: Term) -> Term {
        Term::TensorPair(Box::new(left), Box::new(right))
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Box::new(fun), Box::new(arg))
    }

    pub fn lambda(pat: Pattern, body: Term) -> Term {
        Term::Lambda(pat, Box::new(body))
    }

    /// All bit labels, in textual (leftmost) order.
    pub fn bit_labels(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut Vec<u64>) {
        match self {
            Term::Var(_) | Term::Gate(_) => {}
            Term::BitConst(_, n) => out.push(*n),
            Term::TensorPair(l, r) | Term::App(l, r) => {
                l.collect_labels(out);
                r.collect_labels(out);
            }
            Term::Lambda(_, body) => body.collect_labels(out),
        }
    }

    /// Checks the pairwise-distinct-labels invariant.
    pub fn labels_distinct(&self) -> bool {
        let labels = self.bit_labels();
        let set: HashSet<_> = labels.iter().collect();
        set.len() == labels.len()
    }

    /// Number of bit constants occurring in the term.
    pub fn bit_count(&self) -> usize {
        self.bit_labels().len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate bit label {0}")]
    DuplicateLabel(u64),
    #[error("pair pattern binds the same variable twice: {0}")]
    NonLinearPattern(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubstError {
    #[error("variable {0} does not occur free exactly once (found {1} occurrences)")]
    NotLinear(String, usize),
    #[error("bit label {0} occurs in more than one operand of the substitution")]
    LabelClash(u64),
    #[error("substitution lists have different lengths: {0} names vs {1} terms")]
    LengthMismatch(usize, usize),
}

/// Free variables in leftmost-occurrence order, each listed once.
pub fn free_vars(m: &Term) -> Vec<String> {
    fn go(m: &Term, bound: &mut Vec<String>, out: &mut Vec<String>) {
        match m {
            Term::Var(x) => {
                if !bound.iter().any(|b| b == x) && !out.iter().any(|v| v == x) {
                    out.push(x.clone());
                }
            }
            Term::BitConst(..) | Term::Gate(_) => {}
            Term::TensorPair(l, r) | Term::App(l, r) => {
                go(l, bound, out);
                go(r, bound, out);
            }
            Term::Lambda(pat, body) => {
                let n = bound.len();
                for b in pat.binders() {
                    bound.push(b.to_string());
                }
                go(body, bound, out);
                bound.truncate(n);
            }
        }
    }
    let mut out = Vec::new();
    go(m, &mut Vec::new(), &mut out);
    out
}

/// Number of free occurrences of `x` in `m`.
pub fn free_occurrences(m: &Term, x: &str) -> usize {
    match m {
        Term::Var(y) => usize::from(y == x),
        Term::BitConst(..) | Term::Gate(_) => 0,
        Term::TensorPair(l, r) | Term::App(l, r) => {
            free_occurrences(l, x) + free_occurrences(r, x)
        }
        Term::Lambda(pat, body) => {
            if pat.binders().iter().any(|b| *b == x) {
                0
            } else {
                free_occurrences(body, x)
            }
        }
    }
}

/// Simultaneous capture-avoiding substitution `m{ns/xs}`.
///
/// Each `x` must occur free exactly once in `m`, and the bit labels of
/// `m` and all `ns` must be jointly pairwise distinct.
pub fn substitute(m: &Term, xs: &[String], ns: &[Term]) -> Result<Term, SubstError> {
    if xs.len() != ns.len() {
        return Err(SubstError::LengthMismatch(xs.len(), ns.len()));
    }
    for x in xs {
        let k = free_occurrences(m, x);
        if k != 1 {
            return Err(SubstError::NotLinear(x.clone(), k));
        }
    }
    let mut seen: HashSet<u64> = HashSet::new();
    for label in m
        .bit_labels()
        .into_iter()
        .chain(ns.iter().flat_map(|n| n.bit_labels()))
    {
        if !seen.insert(label) {
            return Err(SubstError::LabelClash(label));
        }
    }
    // Free variables of the substituted terms must not be captured.
    let avoid: HashSet<String> = ns.iter().flat_map(|n| free_vars(n)).collect();
    Ok(subst_inner(m, xs, ns, &avoid, &mut 0))
}

fn fresh_name(avoid: &HashSet<String>, taken: &[&str], counter: &mut u64) -> String {
    loop {
        let name = format!("v{}", counter);
        *counter += 1;
        if !avoid.contains(&name) && !taken.contains(&name.as_str()) {
            return name;
        }
    }
}

fn subst_inner(
    m: &Term,
    xs: &[String],
    ns: &[Term],
    avoid: &HashSet<String>,
    counter: &mut u64,
) -> Term {
    match m {
        Term::Var(y) => match xs.iter().position(|x| x == y) {
            Some(i) => ns[i].clone(),
            None => m.clone(),
        },
        Term::BitConst(..) | Term::Gate(_) => m.clone(),
        Term::TensorPair(l, r) => Term::pair(
            subst_inner(l, xs, ns, avoid, counter),
            subst_inner(r, xs, ns, avoid, counter),
        ),
        Term::App(l, r) => Term::app(
            subst_inner(l, xs, ns, avoid, counter),
            subst_inner(r, xs, ns, avoid, counter),
        ),
        Term::Lambda(pat, body) => {
            // Drop substitutions shadowed by the binder, rename binders
            // that would capture free variables of the payloads.
            let binders: Vec<String> = pat.binders().iter().map(|s| s.to_string()).collect();
            let mut kept_xs = Vec::new();
            let mut kept_ns = Vec::new();
            for (x, n) in xs.iter().zip(ns.iter()) {
                if !binders.contains(x) && free_occurrences(body, x) > 0 {
                    kept_xs.push(x.clone());
                    kept_ns.push(n.clone());
                }
            }
            let mut body = body.as_ref().clone();
            let mut new_binders = binders.clone();
            for (i, b) in binders.iter().enumerate() {
                if avoid.contains(b) {
                    let taken: Vec<&str> = new_binders.iter().map(|s| s.as_str()).collect();
                    let fresh = fresh_name(avoid, &taken, counter);
                    body = subst_inner(
                        &body,
                        std::slice::from_ref(b),
                        &[Term::Var(fresh.clone())],
                        &HashSet::new(),
                        counter,
                    );
                    new_binders[i] = fresh;
                }
            }
            let pat = match pat {
                Pattern::Var(_) => Pattern::Var(new_binders[0].clone()),
                Pattern::Pair(..) => {
                    Pattern::Pair(new_binders[0].clone(), new_binders[1].clone())
                }
            };
            Term::lambda(pat, subst_inner(&body, &kept_xs, &kept_ns, avoid, counter))
        }
    }
}

/// Equality up to renaming of bound variables. Bit labels and gate
/// names are compared exactly.
pub fn alpha_eq(m: &Term, n: &Term) -> bool {
    fn go(m: &Term, n: &Term, ml: &mut Vec<String>, nl: &mut Vec<String>) -> bool {
        match (m, n) {
            (Term::Var(x), Term::Var(y)) => {
                let mi = ml.iter().rposition(|v| v == x);
                let ni = nl.iter().rposition(|v| v == y);
                match (mi, ni) {
                    (Some(a), Some(b)) => a == b,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::BitConst(b1, l1), Term::BitConst(b2, l2)) => b1 == b2 && l1 == l2,
            (Term::Gate(g1), Term::Gate(g2)) => g1 == g2,
            (Term::TensorPair(a1, b1), Term::TensorPair(a2, b2))
            | (Term::App(a1, b1), Term::App(a2, b2)) => {
                go(a1, a2, ml, nl) && go(b1, b2, ml, nl)
            }
            (Term::Lambda(p1, b1), Term::Lambda(p2, b2)) => {
                let (k1, k2) = (p1.binders(), p2.binders());
                if k1.len() != k2.len() {
                    return false;
                }
                let depth = ml.len();
                for (a, b) in k1.iter().zip(k2.iter()) {
                    ml.push(a.to_string());
                    nl.push(b.to_string());
                }
                let r = go(b1, b2, ml, nl);
                ml.truncate(depth);
                nl.truncate(depth);
                r
            }
            _ => false,
        }
    }
    go(m, n, &mut Vec::new(), &mut Vec::new())
}

// ----- Parser -----

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Lambda,
    Dot,
    Star,
    LParen,
    RParen,
    LAngle,
    RAngle,
    Comma,
    Ket(u8, Option<u64>),
    Ident(String),
    GateIdent(String),
    Eof,
}

struct SpannedTok {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.col, msg: msg.into() }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> u64 {
        let mut n = 0u64;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                n = n * 10 + u64::from(c - b'0');
                self.bump();
            } else {
                break;
            }
        }
        n
    }

    fn next_tok(&mut self) -> Result<SpannedTok, ParseError> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let mk = |tok| SpannedTok { tok, line, col };
        let c = match self.peek() {
            None => return Ok(mk(Tok::Eof)),
            Some(c) => c,
        };
        let tok = match c {
            b'\\' => {
                self.bump();
                Tok::Lambda
            }
            b'.' => {
                self.bump();
                Tok::Dot
            }
            b'*' => {
                self.bump();
                Tok::Star
            }
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b'<' => {
                self.bump();
                Tok::LAngle
            }
            b'>' => {
                self.bump();
                Tok::RAngle
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b'|' => {
                self.bump();
                let bit = match self.peek() {
                    Some(b'0') => 0,
                    Some(b'1') => 1,
                    _ => return Err(self.err("expected '0' or '1' after '|'")),
                };
                self.bump();
                if self.peek() != Some(b'>') {
                    return Err(self.err("expected '>' to close bit constant"));
                }
                self.bump();
                let label = if self.peek() == Some(b'_') {
                    self.bump();
                    if !self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        return Err(self.err("expected label digits after '_'"));
                    }
                    Some(self.number())
                } else {
                    None
                };
                Tok::Ket(bit, label)
            }
            c if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'\'')
                {
                    self.bump();
                }
                let name = std::str::from_utf8(&self.src[start..self.pos])
                    .unwrap()
                    .to_string();
                if c.is_ascii_uppercase() {
                    Tok::GateIdent(name)
                } else {
                    Tok::Ident(name)
                }
            }
            _ => return Err(self.err(format!("unexpected character '{}'", c as char))),
        };
        Ok(mk(tok))
    }
}

struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> &SpannedTok {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.err_here(format!("expected {}", what)))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.err_here("expected variable name")),
        }
    }

    fn pattern(&mut self) -> Result<Pattern, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Pattern::Var(name))
            }
            Tok::LAngle => {
                self.bump();
                let a = self.ident()?;
                self.expect(Tok::Comma, "','")?;
                let b = self.ident()?;
                self.expect(Tok::RAngle, "'>'")?;
                if a == b {
                    return Err(ParseError::NonLinearPattern(a));
                }
                Ok(Pattern::Pair(a, b))
            }
            _ => Err(self.err_here("expected pattern")),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if *self.peek() == Tok::Lambda {
            self.bump();
            let pat = self.pattern()?;
            self.expect(Tok::Dot, "'.'")?;
            let body = self.term()?;
            return Ok(Term::lambda(pat, body));
        }
        let left = self.app()?;
        if *self.peek() == Tok::Star {
            self.bump();
            let right = self.app()?;
            if *self.peek() == Tok::Star {
                return Err(self.err_here(
                    "tensor is non-associative; parenthesize nested tensors",
                ));
            }
            return Ok(Term::pair(left, right));
        }
        Ok(left)
    }

    fn app(&mut self) -> Result<Term, ParseError> {
        let mut t = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            t = Term::app(t, arg);
        }
        Ok(t)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Ident(_) | Tok::GateIdent(_) | Tok::Ket(..) | Tok::LParen
        )
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Term::Var(name))
            }
            Tok::GateIdent(name) => {
                self.bump();
                Ok(Term::Gate(name))
            }
            Tok::Ket(bit, label) => {
                self.bump();
                // Unlabeled bits are marked and resolved after parsing.
                Ok(Term::BitConst(bit, label.unwrap_or(UNLABELED)))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            _ => Err(self.err_here("expected a term")),
        }
    }
}

// Sentinel for bits whose label is assigned after parsing.
const UNLABELED: u64 = u64::MAX;

fn assign_labels(m: &mut Term) -> Result<(), ParseError> {
    let mut used: HashSet<u64> = HashSet::new();
    fn collect_explicit(m: &Term, used: &mut HashSet<u64>) -> Result<(), ParseError> {
        match m {
            Term::BitConst(_, n) if *n != UNLABELED => {
                if !used.insert(*n) {
                    return Err(ParseError::DuplicateLabel(*n));
                }
                Ok(())
            }
            Term::TensorPair(l, r) | Term::App(l, r) => {
                collect_explicit(l, used)?;
                collect_explicit(r, used)
            }
            Term::Lambda(_, body) => collect_explicit(body, used),
            _ => Ok(()),
        }
    }
    collect_explicit(m, &mut used)?;
    let mut next = 1u64;
    fn fill(m: &mut Term, used: &mut HashSet<u64>, next: &mut u64) {
        match m {
            Term::BitConst(_, n) if *n == UNLABELED => {
                while used.contains(next) {
                    *next += 1;
                }
                *n = *next;
                used.insert(*next);
            }
            Term::TensorPair(l, r) | Term::App(l, r) => {
                fill(l, used, next);
                fill(r, used, next);
            }
            Term::Lambda(_, body) => fill(body, used, next),
            _ => {}
        }
    }
    fill(m, &mut used, &mut next);
    Ok(())
}

/// Parses the concrete grammar; unlabeled bits receive fresh labels in
/// textual order starting from the smallest unused natural number.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    loop {
        let t = lexer.next_tok()?;
        let end = t.tok == Tok::Eof;
        toks.push(t);
        if end {
            break;
        }
    }
    let mut parser = Parser { toks, pos: 0 };
    let mut term = parser.term()?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.err_here("unexpected trailing input"));
    }
    assign_labels(&mut term)?;
    Ok(term)
}

/// Parses a type written in the same surface syntax the printer emits:
/// `B`, `B^n`, `A -o B`, `A * B`, parentheses.
pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    struct TP<'a> {
        src: &'a [u8],
        pos: usize,
    }
    impl<'a> TP<'a> {
        fn err(&self, msg: &str) -> ParseError {
            ParseError::Syntax { line: 1, col: self.pos + 1, msg: msg.to_string() }
        }
        fn skip_ws(&mut self) {
            while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
                self.pos += 1;
            }
        }
        fn eat(&mut self, s: &str) -> bool {
            self.skip_ws();
            if self.src[self.pos..].starts_with(s.as_bytes()) {
                self.pos += s.len();
                true
            } else {
                false
            }
        }
        fn arrow(&mut self) -> Result<Type, ParseError> {
            let left = self.tensor()?;
            if self.eat("-o") {
                let right = self.arrow()?;
                Ok(Type::arrow(left, right))
            } else {
                Ok(left)
            }
        }
        fn tensor(&mut self) -> Result<Type, ParseError> {
            let left = self.atom()?;
            if self.eat("*") {
                let right = self.tensor()?;
                Ok(Type::tensor(left, right))
            } else {
                Ok(left)
            }
        }
        fn atom(&mut self) -> Result<Type, ParseError> {
            self.skip_ws();
            if self.eat("(") {
                let t = self.arrow()?;
                if !self.eat(")") {
                    return Err(self.err("expected ')'"));
                }
                return Ok(t);
            }
            if self.eat("B") {
                if self.eat("^") {
                    let start = self.pos;
                    while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                    if self.pos == start {
                        return Err(self.err("expected exponent digits"));
                    }
                    let n: usize = std::str::from_utf8(&self.src[start..self.pos])
                        .unwrap()
                        .parse()
                        .map_err(|_| self.err("exponent out of range"))?;
                    if n == 0 {
                        return Err(self.err("exponent must be positive"));
                    }
                    return Ok(Type::bits(n));
                }
                return Ok(Type::Bit);
            }
            Err(self.err("expected a type"))
        }
    }
    let mut p = TP { src: text.as_bytes(), pos: 0 };
    let t = p.arrow()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(t)
}

/// Emits the concrete grammar; `parse_term(pretty(m))` is `m` up to
/// α-equivalence (labels are always printed explicitly).
pub fn pretty(m: &Term) -> String {
    fn atom(m: &Term, out: &mut String) {
        match m {
            Term::Var(x) => out.push_str(x),
            Term::Gate(g) => out.push_str(g),
            Term::BitConst(b, n) => {
                out.push_str(&format!("|{}>_{}", b, n));
            }
            _ => {
                out.push('(');
                term(m, out);
                out.push(')');
            }
        }
    }
    fn app(m: &Term, out: &mut String) {
        match m {
            Term::App(f, a) => {
                app(f, out);
                out.push(' ');
                atom(a, out);
            }
            _ => atom(m, out),
        }
    }
    fn term(m: &Term, out: &mut String) {
        match m {
            Term::Lambda(pat, body) => {
                out.push('\\');
                match pat {
                    Pattern::Var(x) => out.push_str(x),
                    Pattern::Pair(x, y) => {
                        out.push('<');
                        out.push_str(x);
                        out.push(',');
                        out.push_str(y);
                        out.push('>');
                    }
                }
                out.push_str(". ");
                term(body, out);
            }
            Term::TensorPair(l, r) => {
                app(l, out);
                out.push_str(" * ");
                app(r, out);
            }
            _ => app(m, out),
        }
    }
    let mut out = String::new();
    term(m, &mut out);
    out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pretty(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    fn gate(g: &str) -> Term {
        Term::Gate(g.to_string())
    }

    #[test]
    fn parses_epr_term() {
        let t = parse_term(r"\<x,y>. CNOT ((H x) * y)").unwrap();
        let expected = Term::lambda(
            Pattern::Pair("x".into(), "y".into()),
            Term::app(
                gate("CNOT"),
                Term::pair(Term::app(gate("H"), var("x")), var("y")),
            ),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn parses_labeled_bits() {
        let t = parse_term("|0>_1 * |1>_2").unwrap();
        assert_eq!(t, Term::pair(Term::BitConst(0, 1), Term::BitConst(1, 2)));
    }

    #[test]
    fn auto_labels_in_textual_order() {
        let t = parse_term("|0> * |0>").unwrap();
        assert_eq!(t, Term::pair(Term::BitConst(0, 1), Term::BitConst(0, 2)));
    }

    #[test]
    fn auto_labels_skip_used() {
        let t = parse_term("|0>_2 * |0>").unwrap();
        assert_eq!(t, Term::pair(Term::BitConst(0, 2), Term::BitConst(0, 1)));
    }

    #[test]
    fn duplicate_explicit_label_rejected() {
        assert_eq!(
            parse_term("|0>_3 * |1>_3"),
            Err(ParseError::DuplicateLabel(3))
        );
    }

    #[test]
    fn nested_tensor_requires_parens() {
        assert!(parse_term("|0> * |0> * |0>").is_err());
        assert!(parse_term("|0> * (|0> * |0>)").is_ok());
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_term("\\x. ?") {
            Err(ParseError::Syntax { line: 1, col: 5, .. }) => {}
            other => panic!("unexpected: {:?}", other),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(parse_term("").is_err());
    }

    #[test]
    fn free_vars_ordered() {
        assert_eq!(free_vars(&var("x")), vec!["x"]);
        let id = Term::lambda(Pattern::Var("x".into()), var("x"));
        assert!(free_vars(&id).is_empty());
        let t = Term::app(var("f"), Term::pair(var("y"), var("z")));
        assert_eq!(free_vars(&t), vec!["f", "y", "z"]);
    }

    #[test]
    fn substitute_identity() {
        let r = substitute(&var("x"), &["x".into()], &[Term::BitConst(0, 1)]).unwrap();
        assert_eq!(r, Term::BitConst(0, 1));
    }

    #[test]
    fn substitute_under_app() {
        let m = Term::app(gate("H"), var("x"));
        let r = substitute(&m, &["x".into()], &[Term::BitConst(0, 3)]).unwrap();
        assert_eq!(r, Term::app(gate("H"), Term::BitConst(0, 3)));
    }

    #[test]
    fn substitute_simultaneous() {
        let m = Term::pair(var("x"), var("y"));
        let r = substitute(
            &m,
            &["x".into(), "y".into()],
            &[Term::BitConst(0, 1), Term::BitConst(1, 2)],
        )
        .unwrap();
        assert_eq!(r, Term::pair(Term::BitConst(0, 1), Term::BitConst(1, 2)));
    }

    #[test]
    fn substitute_rejects_nonlinear() {
        let m = Term::pair(var("x"), var("x"));
        assert!(matches!(
            substitute(&m, &["x".into()], &[Term::BitConst(0, 1)]),
            Err(SubstError::NotLinear(..))
        ));
    }

    #[test]
    fn substitute_rejects_label_clash() {
        let m = Term::pair(var("x"), Term::BitConst(0, 1));
        assert_eq!(
            substitute(&m, &["x".into()], &[Term::BitConst(1, 1)]),
            Err(SubstError::LabelClash(1))
        );
    }

    #[test]
    fn substitute_avoids_capture() {
        // (\y. x * y){y/x} must not capture the substituted y.
        let m = Term::lambda(Pattern::Var("y".into()), Term::pair(var("x"), var("y")));
        let r = substitute(&m, &["x".into()], &[var("y")]).unwrap();
        assert_eq!(free_vars(&r), vec!["y"]);
        let expected = Term::lambda(Pattern::Var("z".into()), Term::pair(var("y"), var("z")));
        assert!(alpha_eq(&r, &expected));
    }

    #[test]
    fn alpha_eq_basics() {
        let idx = Term::lambda(Pattern::Var("x".into()), var("x"));
        let idy = Term::lambda(Pattern::Var("y".into()), var("y"));
        assert!(alpha_eq(&idx, &idy));
        assert!(!alpha_eq(&Term::BitConst(0, 1), &Term::BitConst(0, 2)));
        let p1 = parse_term(r"\<x,y>. x * y").unwrap();
        let p2 = parse_term(r"\<a,b>. a * b").unwrap();
        assert!(alpha_eq(&p1, &p2));
        let p3 = parse_term(r"\<a,b>. b * a").unwrap();
        assert!(!alpha_eq(&p1, &p3));
    }

    #[test]
    fn pretty_round_trip() {
        for src in [
            r"\<x,y>. CNOT ((H x) * y)",
            "|0>_1 * |1>_2",
            r"(\<x,y>. CNOT ((H x) * y)) (|0>_1 * |1>_2)",
            r"\x. \y. x y",
        ] {
            let t = parse_term(src).unwrap();
            let back = parse_term(&pretty(&t)).unwrap();
            assert_eq!(t, back, "round trip failed for {}", src);
        }
    }

    #[test]
    fn type_display_round_trip() {
        for ty in [
            Type::Bit,
            Type::bits(3),
            Type::arrow(Type::bits(2), Type::bits(2)),
            Type::arrow(Type::arrow(Type::Bit, Type::Bit), Type::Bit),
            Type::tensor(Type::arrow(Type::Bit, Type::Bit), Type::Bit),
        ] {
            let s = ty.to_string();
            assert_eq!(parse_type(&s).unwrap(), ty, "round trip failed for {}", s);
        }
        assert_eq!(parse_type("B^3").unwrap(), Type::bits(3));
    }

    #[test]
    fn bits_abbreviation_is_right_nested() {
        assert_eq!(
            Type::bits(3),
            Type::tensor(Type::Bit, Type::tensor(Type::Bit, Type::Bit))
        );
        assert_eq!(Type::bits(3).as_bits(), Some(3));
        assert_eq!(
            Type::tensor(Type::tensor(Type::Bit, Type::Bit), Type::Bit).as_bits(),
            None
        );
    }
}
