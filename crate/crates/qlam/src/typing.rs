//! Linear type checking into derivation trees, the occurrence
//! machinery (positive/negative Bit occurrences, bit axioms), and
//! derivation substitution.
//!
//! Inference is unification-based: lambda binders get type variables,
//! applications and pair patterns add constraints, and any variable
//! left unconstrained defaults to `Bit`. Environment splitting for the
//! multiplicative rules is syntax-directed via free-variable sets, and
//! environment entries keep the textual order of first free occurrence.

use crate::quantum::{GateLibrary, Register};
use crate::syntax::{free_occurrences, free_vars, substitute, Pattern, Term, Type};
use serde_json::json;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

/// Ordered list of typed assumptions; each name occurs at most once.
pub type LinearEnv = Vec<(String, Type)>;

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("variable {0} is used more than once")]
    UsedTwice(String),
    #[error("variable {0} is never used")]
    Unused(String),
    #[error("type mismatch: expected {expected}, found {found}")]
    Mismatch { expected: String, found: String },
    #[error("{0} is not a function but is applied to an argument")]
    NotAFunction(String),
    #[error("unknown gate {0}")]
    UnknownGate(String),
    #[error("bit label {0} occurs more than once")]
    DuplicateLabel(u64),
    #[error("cannot construct the infinite type required by this term")]
    InfiniteType,
    #[error("substitution precondition violated: {0}")]
    SubstPrecondition(String),
}

/// The eight typing rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// x:A |- x:A
    AxVar,
    /// |- |0> : B
    AxQ0,
    /// |- |1> : B
    AxQ1,
    /// |- U : B^n -o B^n
    AxGate,
    /// abstraction over a single variable
    LamVar,
    /// abstraction over a pair pattern
    LamPair,
    /// application
    App,
    /// tensor introduction
    Pair,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::AxVar => "a_v",
            Rule::AxQ0 => "a_q0",
            Rule::AxQ1 => "a_q1",
            Rule::AxGate => "a_U",
            Rule::LamVar => "I-o1",
            Rule::LamPair => "I-o2",
            Rule::App => "E-o",
            Rule::Pair => "I-ox",
        }
    }
}

/// A typing derivation tree. Premises are ordered as in the rules:
/// for [`Rule::App`] the function premise comes first, for
/// [`Rule::Pair`] the left component.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub rule: Rule,
    pub env: LinearEnv,
    pub subject: Term,
    pub ty: Type,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn is_closed(&self) -> bool {
        self.env.is_empty()
    }

    /// The subtree at a premise-index path (empty path is the root).
    pub fn at_path(&self, path: &[usize]) -> &Derivation {
        let mut d = self;
        for &i in path {
            d = &d.premises[i];
        }
        d
    }

    /// Total number of Bit leaves over all environment-entry and
    /// conclusion types of all nodes.
    pub fn total_bit_occurrences(&self) -> usize {
        let own: usize = self.env.iter().map(|(_, t)| t.bit_leaves()).sum::<usize>()
            + self.ty.bit_leaves();
        own + self.premises.iter().map(|p| p.total_bit_occurrences()).sum::<usize>()
    }

    /// JSON tree of (rule, environment, subject, type, premises).
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "rule": self.rule.name(),
            "env": self.env.iter().map(|(x, t)| json!([x, t.to_string()])).collect::<Vec<_>>(),
            "subject": self.subject.to_string(),
            "type": self.ty.to_string(),
            "premises": self.premises.iter().map(|p| p.to_json()).collect::<Vec<_>>(),
        })
    }
}

// ----- Inference -----

#[derive(Debug, Clone, PartialEq)]
enum TyE {
    Bit,
    Var(u32),
    Arrow(Box<TyE>, Box<TyE>),
    Tensor(Box<TyE>, Box<TyE>),
}

fn tye_of(ty: &Type) -> TyE {
    match ty {
        Type::Bit => TyE::Bit,
        Type::Arrow(a, b) => TyE::Arrow(Box::new(tye_of(a)), Box::new(tye_of(b))),
        Type::Tensor(a, b) => TyE::Tensor(Box::new(tye_of(a)), Box::new(tye_of(b))),
    }
}

struct Solver {
    subst: Vec<Option<TyE>>,
}

impl Solver {
    fn fresh(&mut self) -> TyE {
        self.subst.push(None);
        TyE::Var(self.subst.len() as u32 - 1)
    }

    fn prune(&self, t: &TyE) -> TyE {
        match t {
            TyE::Var(v) => match &self.subst[*v as usize] {
                Some(inner) => self.prune(inner),
                None => t.clone(),
            },
            _ => t.clone(),
        }
    }

    fn occurs(&self, v: u32, t: &TyE) -> bool {
        match self.prune(t) {
            TyE::Var(w) => w == v,
            TyE::Bit => false,
            TyE::Arrow(a, b) | TyE::Tensor(a, b) => self.occurs(v, &a) || self.occurs(v, &b),
        }
    }

    fn unify(&mut self, a: &TyE, b: &TyE) -> Result<(), TypeError> {
        let (a, b) = (self.prune(a), self.prune(b));
        match (&a, &b) {
            (TyE::Var(v), TyE::Var(w)) if v == w => Ok(()),
            (TyE::Var(v), _) => {
                if self.occurs(*v, &b) {
                    return Err(TypeError::InfiniteType);
                }
                self.subst[*v as usize] = Some(b);
                Ok(())
            }
            (_, TyE::Var(_)) => self.unify(&b, &a),
            (TyE::Bit, TyE::Bit) => Ok(()),
            (TyE::Arrow(a1, b1), TyE::Arrow(a2, b2))
            | (TyE::Tensor(a1, b1), TyE::Tensor(a2, b2)) => {
                self.unify(a1, a2)?;
                self.unify(b1, b2)
            }
            _ => Err(TypeError::Mismatch {
                expected: self.describe(&a),
                found: self.describe(&b),
            }),
        }
    }

    /// Resolves to a concrete type; unconstrained variables default to Bit.
    fn resolve(&self, t: &TyE) -> Type {
        match self.prune(t) {
            TyE::Bit | TyE::Var(_) => Type::Bit,
            TyE::Arrow(a, b) => Type::arrow(self.resolve(&a), self.resolve(&b)),
            TyE::Tensor(a, b) => Type::tensor(self.resolve(&a), self.resolve(&b)),
        }
    }

    fn describe(&self, t: &TyE) -> String {
        match self.prune(t) {
            TyE::Bit => "B".to_string(),
            TyE::Var(v) => format!("?{}", v),
            TyE::Arrow(a, b) => format!("({} -o {})", self.describe(&a), self.describe(&b)),
            TyE::Tensor(a, b) => format!("({} * {})", self.describe(&a), self.describe(&b)),
        }
    }
}

struct ScopeEntry {
    name: String,
    ty: TyE,
    uses: usize,
    from_env: bool,
}

struct Infer<'a> {
    gates: &'a GateLibrary,
    solver: Solver,
    scope: Vec<ScopeEntry>,
    /// Binder type variables per lambda node, keyed by premise path.
    binders: HashMap<Vec<usize>, (TyE, Option<TyE>)>,
}

impl<'a> Infer<'a> {
    fn constrain(&mut self, m: &Term, path: &mut Vec<usize>) -> Result<TyE, TypeError> {
        match m {
            Term::Var(x) => {
                let entry = self
                    .scope
                    .iter_mut()
                    .rev()
                    .find(|e| e.name == *x)
                    .ok_or_else(|| TypeError::Unbound(x.clone()))?;
                entry.uses += 1;
                if entry.uses > 1 {
                    return Err(TypeError::UsedTwice(x.clone()));
                }
                Ok(entry.ty.clone())
            }
            Term::BitConst(..) => Ok(TyE::Bit),
            Term::Gate(g) => {
                let n = self
                    .gates
                    .arity(g)
                    .map_err(|_| TypeError::UnknownGate(g.clone()))?;
                Ok(tye_of(&Type::arrow(Type::bits(n), Type::bits(n))))
            }
            Term::TensorPair(l, r) => {
                path.push(0);
                let lt = self.constrain(l, path)?;
                path.pop();
                path.push(1);
                let rt = self.constrain(r, path)?;
                path.pop();
                Ok(TyE::Tensor(Box::new(lt), Box::new(rt)))
            }
            Term::App(f, a) => {
                path.push(0);
                let ft = self.constrain(f, path)?;
                path.pop();
                path.push(1);
                let at = self.constrain(a, path)?;
                path.pop();
                let res = self.solver.fresh();
                let want = TyE::Arrow(Box::new(at), Box::new(res.clone()));
                match self.solver.prune(&ft) {
                    TyE::Bit | TyE::Tensor(..) => {
                        return Err(TypeError::NotAFunction(f.to_string()));
                    }
                    _ => {}
                }
                self.solver.unify(&ft, &want)?;
                Ok(res)
            }
            Term::Lambda(pat, body) => {
                let depth = self.scope.len();
                let (dom, recorded) = match pat {
                    Pattern::Var(x) => {
                        let a = self.solver.fresh();
                        self.scope.push(ScopeEntry {
                            name: x.clone(),
                            ty: a.clone(),
                            uses: 0,
                            from_env: false,
                        });
                        (a.clone(), (a, None))
                    }
                    Pattern::Pair(x, y) => {
                        let a = self.solver.fresh();
                        let b = self.solver.fresh();
                        self.scope.push(ScopeEntry {
                            name: x.clone(),
                            ty: a.clone(),
                            uses: 0,
                            from_env: false,
                        });
                        self.scope.push(ScopeEntry {
                            name: y.clone(),
                            ty: b.clone(),
                            uses: 0,
                            from_env: false,
                        });
                        (
                            TyE::Tensor(Box::new(a.clone()), Box::new(b.clone())),
                            (a, Some(b)),
                        )
                    }
                };
                self.binders.insert(path.clone(), recorded);
                path.push(0);
                let body_ty = self.constrain(body, path)?;
                path.pop();
                while self.scope.len() > depth {
                    let e = self.scope.pop().unwrap();
                    if e.uses == 0 {
                        return Err(TypeError::Unused(e.name));
                    }
                }
                Ok(TyE::Arrow(Box::new(dom), Box::new(body_ty)))
            }
        }
    }

    fn build(
        &self,
        m: &Term,
        scope: &mut Vec<(String, Type)>,
        path: &mut Vec<usize>,
    ) -> Derivation {
        // Environment: free variables in textual order of first occurrence.
        let env: LinearEnv = free_vars(m)
            .into_iter()
            .map(|x| {
                let ty = scope
                    .iter()
                    .rev()
                    .find(|(n, _)| *n == x)
                    .expect("scoped variable")
                    .1
                    .clone();
                (x, ty)
            })
            .collect();
        match m {
            Term::Var(_) => Derivation {
                rule: Rule::AxVar,
                ty: env[0].1.clone(),
                env,
                subject: m.clone(),
                premises: vec![],
            },
            Term::BitConst(b, _) => Derivation {
                rule: if *b == 0 { Rule::AxQ0 } else { Rule::AxQ1 },
                env,
                subject: m.clone(),
                ty: Type::Bit,
                premises: vec![],
            },
            Term::Gate(g) => {
                let n = self.gates.arity(g).expect("checked in constrain");
                Derivation {
                    rule: Rule::AxGate,
                    env,
                    subject: m.clone(),
                    ty: Type::arrow(Type::bits(n), Type::bits(n)),
                    premises: vec![],
                }
            }
            Term::TensorPair(l, r) => {
                path.push(0);
                let dl = self.build(l, scope, path);
                path.pop();
                path.push(1);
                let dr = self.build(r, scope, path);
                path.pop();
                Derivation {
                    rule: Rule::Pair,
                    env,
                    subject: m.clone(),
                    ty: Type::tensor(dl.ty.clone(), dr.ty.clone()),
                    premises: vec![dl, dr],
                }
            }
            Term::App(f, a) => {
                path.push(0);
                let df = self.build(f, scope, path);
                path.pop();
                path.push(1);
                let da = self.build(a, scope, path);
                path.pop();
                let ty = match &df.ty {
                    Type::Arrow(_, cod) => (**cod).clone(),
                    other => unreachable!("application head has type {}", other),
                };
                Derivation {
                    rule: Rule::App,
                    env,
                    subject: m.clone(),
                    ty,
                    premises: vec![df, da],
                }
            }
            Term::Lambda(pat, body) => {
                let (a, b) = &self.binders[path.as_slice()];
                let depth = scope.len();
                let (rule, dom) = match pat {
                    Pattern::Var(x) => {
                        let ta = self.solver.resolve(a);
                        scope.push((x.clone(), ta.clone()));
                        (Rule::LamVar, ta)
                    }
                    Pattern::Pair(x, y) => {
                        let ta = self.solver.resolve(a);
                        let tb = self.solver.resolve(b.as_ref().expect("pair binder"));
                        scope.push((x.clone(), ta.clone()));
                        scope.push((y.clone(), tb.clone()));
                        (Rule::LamPair, Type::tensor(ta, tb))
                    }
                };
                path.push(0);
                let db = self.build(body, scope, path);
                path.pop();
                scope.truncate(depth);
                Derivation {
                    rule,
                    env,
                    subject: m.clone(),
                    ty: Type::arrow(dom, db.ty.clone()),
                    premises: vec![db],
                }
            }
        }
    }
}

/// Type-checks `m` under `env`, producing its derivation tree.
///
/// Every environment variable must be used exactly once, bit labels
/// must be pairwise distinct, and gate names must be known to `gates`.
pub fn infer(env: &LinearEnv, m: &Term, gates: &GateLibrary) -> Result<Derivation, TypeError> {
    let labels = m.bit_labels();
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(TypeError::DuplicateLabel(l));
        }
    }
    let mut infer = Infer {
        gates,
        solver: Solver { subst: Vec::new() },
        scope: env
            .iter()
            .map(|(x, t)| ScopeEntry {
                name: x.clone(),
                ty: tye_of(t),
                uses: 0,
                from_env: true,
            })
            .collect(),
        binders: HashMap::new(),
    };
    infer.constrain(m, &mut Vec::new())?;
    for e in &infer.scope {
        if e.from_env && e.uses == 0 {
            return Err(TypeError::Unused(e.name.clone()));
        }
    }
    let mut scope: Vec<(String, Type)> = env.clone();
    Ok(infer.build(m, &mut scope, &mut Vec::new()))
}

// ----- Occurrences -----

/// One step into a type tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TyStep {
    ArrowL,
    ArrowR,
    TensorL,
    TensorR,
}

/// Where an occurrence lives within a derivation node: its conclusion
/// type or the type of the i-th environment entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Slot {
    Conclusion,
    Env(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A Bit occurrence in a derivation: a node (premise-index path), a
/// slot at that node, and a path locating one Bit leaf in the slot's
/// type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Occurrence {
    pub node: Vec<usize>,
    pub slot: Slot,
    pub path: Vec<TyStep>,
}

impl Occurrence {
    pub fn conclusion(node: Vec<usize>, path: Vec<TyStep>) -> Occurrence {
        Occurrence { node, slot: Slot::Conclusion, path }
    }

    /// Parity of ArrowL steps, flipped once for environment slots.
    pub fn polarity(&self) -> Polarity {
        let arrows = self.path.iter().filter(|s| **s == TyStep::ArrowL).count();
        let mut positive = arrows % 2 == 0;
        if matches!(self.slot, Slot::Env(_)) {
            positive = !positive;
        }
        if positive {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    /// The type this occurrence's path resolves to in `pi`; `Some(())`
    /// only when it is a Bit leaf.
    pub fn resolves_to_bit(&self, pi: &Derivation) -> bool {
        let node = pi.at_path(&self.node);
        let ty = match &self.slot {
            Slot::Conclusion => &node.ty,
            Slot::Env(i) => match node.env.get(*i) {
                Some((_, t)) => t,
                None => return false,
            },
        };
        follow(ty, &self.path) == Some(&Type::Bit)
    }
}

fn follow<'t>(ty: &'t Type, path: &[TyStep]) -> Option<&'t Type> {
    let mut t = ty;
    for step in path {
        t = match (step, t) {
            (TyStep::ArrowL, Type::Arrow(a, _)) => a,
            (TyStep::ArrowR, Type::Arrow(_, b)) => b,
            (TyStep::TensorL, Type::Tensor(a, _)) => a,
            (TyStep::TensorR, Type::Tensor(_, b)) => b,
            _ => return None,
        };
    }
    Some(t)
}

/// A type path to one Bit leaf.
pub type TyPath = Vec<TyStep>;

fn occ_paths(ty: &Type, positive: bool) -> Vec<TyPath> {
    match ty {
        Type::Bit => {
            if positive {
                vec![vec![]]
            } else {
                vec![]
            }
        }
        Type::Tensor(a, b) => {
            let mut out: Vec<TyPath> = occ_paths(a, positive)
                .into_iter()
                .map(|mut p| {
                    p.insert(0, TyStep::TensorL);
                    p
                })
                .collect();
            out.extend(occ_paths(b, positive).into_iter().map(|mut p| {
                p.insert(0, TyStep::TensorR);
                p
            }));
            out
        }
        Type::Arrow(a, b) => {
            let mut out: Vec<TyPath> = occ_paths(a, !positive)
                .into_iter()
                .map(|mut p| {
                    p.insert(0, TyStep::ArrowL);
                    p
                })
                .collect();
            out.extend(occ_paths(b, positive).into_iter().map(|mut p| {
                p.insert(0, TyStep::ArrowR);
                p
            }));
            out
        }
    }
}

/// Positive Bit occurrences of a type, as type paths in the order
/// fixed by the six recursive equations.
pub fn poccs(ty: &Type) -> Vec<TyPath> {
    occ_paths(ty, true)
}

/// Negative Bit occurrences of a type.
pub fn noccs(ty: &Type) -> Vec<TyPath> {
    occ_paths(ty, false)
}

/// The conclusion occurrences of the bit axioms of `pi`, ordered by
/// ascending bit label.
pub fn bit_occurrences(pi: &Derivation) -> Vec<Occurrence> {
    let mut found: Vec<(u64, Occurrence)> = Vec::new();
    collect_bits(pi, &mut Vec::new(), &mut found);
    found.sort_by_key(|(label, _)| *label);
    found.into_iter().map(|(_, o)| o).collect()
}

fn collect_bits(d: &Derivation, path: &mut Vec<usize>, out: &mut Vec<(u64, Occurrence)>) {
    if matches!(d.rule, Rule::AxQ0 | Rule::AxQ1) {
        if let Term::BitConst(_, label) = d.subject {
            out.push((label, Occurrence::conclusion(path.clone(), vec![])));
        }
        return;
    }
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        collect_bits(p, path, out);
        path.pop();
    }
}

/// The basis vector of the bit-axiom digits, ordered by ascending bit
/// label. The empty sequence yields the scalar register.
pub fn bit_values(pi: &Derivation) -> Register {
    let mut found: Vec<(u64, u8)> = Vec::new();
    fn go(d: &Derivation, out: &mut Vec<(u64, u8)>) {
        match d.rule {
            Rule::AxQ0 | Rule::AxQ1 => {
                if let Term::BitConst(b, label) = d.subject {
                    out.push((label, b));
                }
            }
            _ => {
                for p in &d.premises {
                    go(p, out);
                }
            }
        }
    }
    go(pi, &mut found);
    found.sort_by_key(|(label, _)| *label);
    let digits: Vec<u8> = found.into_iter().map(|(_, b)| b).collect();
    if digits.is_empty() {
        Register::scalar()
    } else {
        Register::basis(&digits)
    }
}

fn bound_names(m: &Term, out: &mut HashSet<String>) {
    match m {
        Term::Var(_) | Term::BitConst(..) | Term::Gate(_) => {}
        Term::TensorPair(l, r) | Term::App(l, r) => {
            bound_names(l, out);
            bound_names(r, out);
        }
        Term::Lambda(pat, body) => {
            for b in pat.binders() {
                out.insert(b.to_string());
            }
            bound_names(body, out);
        }
    }
}

/// Grafts each `rhos[i]` at the variable axiom for `xs[i]`, threading
/// the grafted environments down the spine (the Substitution Lemma).
pub fn subst_derivation(
    pi: &Derivation,
    xs: &[String],
    rhos: &[Derivation],
) -> Result<Derivation, TypeError> {
    if xs.len() != rhos.len() {
        return Err(TypeError::SubstPrecondition(format!(
            "{} names vs {} derivations",
            xs.len(),
            rhos.len()
        )));
    }
    for (x, rho) in xs.iter().zip(rhos.iter()) {
        let pos = pi.env.iter().position(|(n, _)| n == x).ok_or_else(|| {
            TypeError::SubstPrecondition(format!("{} not in the environment", x))
        })?;
        if pi.env[pos].1 != rho.ty {
            return Err(TypeError::SubstPrecondition(format!(
                "{} has type {} but the grafted derivation concludes {}",
                x, pi.env[pos].1, rho.ty
            )));
        }
    }
    // Environments must be jointly disjoint, and grafted environment
    // names must not be captured by binders of the host subject.
    let mut names: HashSet<String> = pi
        .env
        .iter()
        .filter(|(n, _)| !xs.contains(n))
        .map(|(n, _)| n.clone())
        .collect();
    let mut binders = HashSet::new();
    bound_names(&pi.subject, &mut binders);
    for rho in rhos {
        for (n, _) in &rho.env {
            if !names.insert(n.clone()) {
                return Err(TypeError::SubstPrecondition(format!(
                    "environment variable {} is not disjoint",
                    n
                )));
            }
            if binders.contains(n) {
                return Err(TypeError::SubstPrecondition(format!(
                    "environment variable {} clashes with a bound variable",
                    n
                )));
            }
        }
    }
    let mut seen = HashSet::new();
    for label in pi
        .subject
        .bit_labels()
        .into_iter()
        .chain(rhos.iter().flat_map(|r| r.subject.bit_labels()))
    {
        if !seen.insert(label) {
            return Err(TypeError::SubstPrecondition(format!(
                "bit label {} is not jointly distinct",
                label
            )));
        }
    }
    let subs: HashMap<&str, &Derivation> = xs
        .iter()
        .map(|x| x.as_str())
        .zip(rhos.iter())
        .collect();
    let mut extra_types: HashMap<String, Type> = HashMap::new();
    for rho in rhos {
        for (n, t) in &rho.env {
            extra_types.insert(n.clone(), t.clone());
        }
    }
    Ok(graft(pi, &subs, &extra_types))
}

fn graft(
    d: &Derivation,
    subs: &HashMap<&str, &Derivation>,
    extra_types: &HashMap<String, Type>,
) -> Derivation {
    if d.rule == Rule::AxVar {
        if let Term::Var(x) = &d.subject {
            if let Some(rho) = subs.get(x.as_str()) {
                return (*rho).clone();
            }
        }
    }
    let premises: Vec<Derivation> = d
        .premises
        .iter()
        .map(|p| graft(p, subs, extra_types))
        .collect();
    // Substitute only the variables actually free here.
    let mut local_xs = Vec::new();
    let mut local_ns = Vec::new();
    for (x, rho) in subs {
        if free_occurrences(&d.subject, x) == 1 {
            local_xs.push((*x).to_string());
            local_ns.push(rho.subject.clone());
        }
    }
    let subject = substitute(&d.subject, &local_xs, &local_ns)
        .expect("substitution preconditions checked up front");
    let mut type_of: HashMap<&str, &Type> = d
        .env
        .iter()
        .map(|(n, t)| (n.as_str(), t))
        .collect();
    for (n, t) in extra_types {
        type_of.insert(n.as_str(), t);
    }
    let env: LinearEnv = free_vars(&subject)
        .into_iter()
        .map(|x| {
            let ty = (*type_of.get(x.as_str()).expect("typed free variable")).clone();
            (x, ty)
        })
        .collect();
    Derivation { rule: d.rule, env, subject, ty: d.ty.clone(), premises }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn lib() -> GateLibrary {
        GateLibrary::builtin()
    }

    fn closed(src: &str) -> Derivation {
        infer(&vec![], &parse_term(src).unwrap(), &lib()).unwrap()
    }

    #[test]
    fn epr_term_types() {
        let d = closed(r"\<x,y>. CNOT ((H x) * y)");
        assert_eq!(d.ty, Type::arrow(Type::bits(2), Type::bits(2)));
        assert_eq!(d.rule, Rule::LamPair);
        let app = &d.premises[0];
        assert_eq!(app.rule, Rule::App);
        assert_eq!(app.env, vec![("x".into(), Type::Bit), ("y".into(), Type::Bit)]);
    }

    #[test]
    fn epr_applied_types() {
        let d = closed(r"(\<x,y>. CNOT ((H x) * y)) (|0>_1 * |1>_2)");
        assert_eq!(d.ty, Type::bits(2));
        assert_eq!(d.rule, Rule::App);
    }

    #[test]
    fn linearity_violations() {
        let lib = lib();
        let twice = parse_term(r"\x. x x").unwrap();
        assert!(matches!(
            infer(&vec![], &twice, &lib),
            Err(TypeError::UsedTwice(_))
        ));
        let drop = parse_term(r"\x. |0>").unwrap();
        assert!(matches!(infer(&vec![], &drop, &lib), Err(TypeError::Unused(_))));
        let unbound = parse_term("x").unwrap();
        assert!(matches!(
            infer(&vec![], &unbound, &lib),
            Err(TypeError::Unbound(_))
        ));
    }

    #[test]
    fn application_mismatch() {
        let lib = lib();
        let t = parse_term("CNOT |0>").unwrap();
        assert!(infer(&vec![], &t, &lib).is_err());
        let t = parse_term("|0> |1>").unwrap();
        assert!(matches!(
            infer(&vec![], &t, &lib),
            Err(TypeError::NotAFunction(_))
        ));
    }

    #[test]
    fn unknown_gate() {
        let t = parse_term("FROB |0>").unwrap();
        assert!(matches!(
            infer(&vec![], &t, &lib()),
            Err(TypeError::UnknownGate(_))
        ));
    }

    #[test]
    fn unconstrained_binder_defaults_to_bit() {
        let d = closed(r"\x. x");
        assert_eq!(d.ty, Type::arrow(Type::Bit, Type::Bit));
    }

    #[test]
    fn open_term_with_env() {
        let env = vec![("x".to_string(), Type::Bit)];
        let d = infer(&env, &parse_term("H x").unwrap(), &lib()).unwrap();
        assert_eq!(d.ty, Type::Bit);
        assert_eq!(d.env, env);
    }

    #[test]
    fn infer_is_stable() {
        let t = parse_term(r"(\<x,y>. CNOT ((H x) * y)) (|0>_1 * |1>_2)").unwrap();
        let d1 = infer(&vec![], &t, &lib()).unwrap();
        let d2 = infer(&vec![], &t, &lib()).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn poccs_noccs_bit() {
        assert_eq!(poccs(&Type::Bit), vec![Vec::<TyStep>::new()]);
        assert!(noccs(&Type::Bit).is_empty());
    }

    #[test]
    fn poccs_noccs_worked_example() {
        // B -o B*B: positives are the two rightmost leaves, tensor-left first.
        let ty = Type::arrow(Type::Bit, Type::bits(2));
        assert_eq!(
            poccs(&ty),
            vec![
                vec![TyStep::ArrowR, TyStep::TensorL],
                vec![TyStep::ArrowR, TyStep::TensorR],
            ]
        );
        assert_eq!(noccs(&ty), vec![vec![TyStep::ArrowL]]);
    }

    #[test]
    fn occurrence_counts_partition_leaves() {
        let ty = Type::arrow(
            Type::arrow(Type::bits(2), Type::Bit),
            Type::tensor(Type::Bit, Type::arrow(Type::Bit, Type::Bit)),
        );
        let p = poccs(&ty);
        let n = noccs(&ty);
        assert_eq!(p.len() + n.len(), ty.bit_leaves());
        for path in &p {
            assert!(!n.contains(path));
        }
    }

    #[test]
    fn bitocc_ordered_by_label() {
        // |0>_2 * |1>_1: the label-1 axiom (the right premise) comes first.
        let d = closed("|0>_2 * |1>_1");
        let occs = bit_occurrences(&d);
        assert_eq!(occs.len(), 2);
        assert_eq!(occs[0], Occurrence::conclusion(vec![1], vec![]));
        assert_eq!(occs[1], Occurrence::conclusion(vec![0], vec![]));
        // bitval = |1> (x) |0>
        assert_eq!(bit_values(&d), Register::basis(&[1, 0]));
    }

    #[test]
    fn bitocc_empty_for_epr_abstraction() {
        let d = closed(r"\<x,y>. CNOT ((H x) * y)");
        assert!(bit_occurrences(&d).is_empty());
        assert_eq!(bit_values(&d), Register::scalar());
    }

    #[test]
    fn single_bit_axiom() {
        let d = closed("|0>");
        assert_eq!(bit_occurrences(&d), vec![Occurrence::conclusion(vec![], vec![])]);
        let d1 = closed("|1>_5");
        assert_eq!(bit_values(&d1), Register::basis(&[1]));
    }

    #[test]
    fn occurrence_polarity() {
        let o = Occurrence::conclusion(vec![], vec![TyStep::ArrowL]);
        assert_eq!(o.polarity(), Polarity::Negative);
        let o = Occurrence {
            node: vec![],
            slot: Slot::Env(0),
            path: vec![TyStep::ArrowL],
        };
        assert_eq!(o.polarity(), Polarity::Positive);
    }

    #[test]
    fn token_count_balance() {
        for src in [
            r"\<x,y>. CNOT ((H x) * y)",
            r"(\<x,y>. CNOT ((H x) * y)) (|0>_1 * |1>_2)",
            "|0> * |1>",
            r"\x. H x",
        ] {
            let d = closed(src);
            assert_eq!(
                noccs(&d.ty).len() + bit_occurrences(&d).len(),
                poccs(&d.ty).len(),
                "balance failed for {}",
                src
            );
        }
    }

    #[test]
    fn subst_derivation_single_graft() {
        let lib = lib();
        let env = vec![("x".to_string(), Type::Bit)];
        let host = infer(&env, &parse_term("H x").unwrap(), &lib).unwrap();
        let bit = infer(&vec![], &parse_term("|0>").unwrap(), &lib).unwrap();
        let grafted = subst_derivation(&host, &["x".to_string()], &[bit]).unwrap();
        assert!(grafted.is_closed());
        assert_eq!(grafted.subject, parse_term("H |0>").unwrap());
        // Re-inference is the oracle for the grafted structure.
        let re = infer(&vec![], &grafted.subject, &lib).unwrap();
        assert_eq!(grafted, re);
    }

    #[test]
    fn subst_derivation_commutes_with_syntax() {
        let lib = lib();
        let env = vec![("x".to_string(), Type::Bit), ("y".to_string(), Type::Bit)];
        let host = infer(&env, &parse_term("x * y").unwrap(), &lib).unwrap();
        let b0 = infer(&vec![], &parse_term("|0>_1").unwrap(), &lib).unwrap();
        let b1 = infer(&vec![], &parse_term("|1>_2").unwrap(), &lib).unwrap();
        let grafted =
            subst_derivation(&host, &["x".to_string(), "y".to_string()], &[b0.clone(), b1.clone()])
                .unwrap();
        let expect = substitute(
            &host.subject,
            &["x".to_string(), "y".to_string()],
            &[b0.subject.clone(), b1.subject.clone()],
        )
        .unwrap();
        assert_eq!(grafted.subject, expect);
        let re = infer(&vec![], &grafted.subject, &lib).unwrap();
        assert_eq!(grafted, re);
    }

    #[test]
    fn subst_derivation_rejects_bad_preconditions() {
        let lib = lib();
        let env = vec![("x".to_string(), Type::Bit)];
        let host = infer(&env, &parse_term("H x").unwrap(), &lib).unwrap();
        let wrong_ty = infer(&vec![], &parse_term("|0>_1 * |1>_2").unwrap(), &lib).unwrap();
        assert!(subst_derivation(&host, &["x".to_string()], &[wrong_ty]).is_err());
        let bit = infer(&vec![], &parse_term("|0>").unwrap(), &lib).unwrap();
        assert!(subst_derivation(&host, &["z".to_string()], &[bit]).is_err());
    }

    #[test]
    fn derivation_json_shape() {
        let d = closed("|0> * |1>");
        let v = d.to_json();
        assert_eq!(v["rule"], "I-ox");
        assert_eq!(v["premises"].as_array().unwrap().len(), 2);
        assert_eq!(v["type"], "B * B");
    }
}
