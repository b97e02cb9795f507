//! The wave-style token machine interpreting a type derivation.
//!
//! Compilation turns a derivation into a routing table: every Bit
//! occurrence has at most one outgoing single-token edge, and each
//! gate axiom is a synchronization node that fires only once all of
//! its argument occurrences are occupied, applying the lifted unitary
//! to the register. Non-gate steps never touch the register.

use crate::quantum::{apply_lifted, tensor, GateLibrary, Permutation, Register};
use crate::typing::{
    bit_occurrences, bit_values, noccs, poccs, Derivation, Occurrence, Rule, Slot, TyStep,
};
use serde_json::json;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("derivation is not closed (environment has {0} entries)")]
    OpenDerivation(usize),
    #[error("input register has {got} qubits, input arity is {want}")]
    ArityMismatch { got: usize, want: usize },
    #[error("internal invariant violation: deadlock in a non-final state")]
    Deadlock,
    #[error("internal invariant violation: step budget of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("internal invariant violation: register norm drifted to {0}")]
    NormDrift(f64),
    #[error(transparent)]
    Quantum(#[from] crate::quantum::QuantumError),
}

/// Tokens plus the quantum register; token `i` owns qubit `i` of the
/// register (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    pub tokens: Vec<Occurrence>,
    pub register: Register,
}

/// The permutation and register of a final state: tokens sit on
/// `sigma(poccs(A))` for the conclusion type `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalInfo {
    pub sigma: Permutation,
    pub register: Register,
}

impl FinalInfo {
    /// The register re-ordered to the canonical `poccs(A)` order.
    pub fn canonical_register(&self) -> Register {
        crate::quantum::permute(&self.sigma.inverse(), &self.register)
            .expect("sigma matches the register size")
    }
}

/// One applicable transition.
#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    /// A single token follows its routing edge.
    Token { token: usize, to: Occurrence, rule: &'static str },
    /// A gate axiom fires: `tokens[k]` is the state index of the token
    /// at argument occurrence `k`.
    Gate { gate: usize, tokens: Vec<usize> },
}

impl Move {
    /// Minimal participating token index; the scheduler key.
    fn key(&self) -> usize {
        match self {
            Move::Token { token, .. } => *token,
            Move::Gate { tokens, .. } => *tokens.iter().min().expect("gates have arity >= 1"),
        }
    }

    pub fn is_gate(&self) -> bool {
        matches!(self, Move::Gate { .. })
    }
}

/// Deterministic move selection. Both schedulers produce the same
/// final state by one-step confluence plus termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduler {
    LowestIndex,
    HighestIndex,
}

#[derive(Debug, Clone)]
struct GateNode {
    name: String,
    args: Vec<Occurrence>,
    results: Vec<Occurrence>,
}

/// One line of the machine trace.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub step: usize,
    pub rule: String,
    pub token_indices: Vec<usize>,
    pub from: Vec<Occurrence>,
    pub to: Vec<Occurrence>,
    pub gate: Option<String>,
    pub register: Register,
}

fn occ_json(o: &Occurrence) -> serde_json::Value {
    let slot = match &o.slot {
        Slot::Conclusion => json!("conclusion"),
        Slot::Env(i) => json!({ "env": i }),
    };
    let path: Vec<&str> = o
        .path
        .iter()
        .map(|s| match s {
            TyStep::ArrowL => "AL",
            TyStep::ArrowR => "AR",
            TyStep::TensorL => "TL",
            TyStep::TensorR => "TR",
        })
        .collect();
    json!({ "node": o.node, "slot": slot, "path": path })
}

impl TraceStep {
    pub fn to_json(&self) -> serde_json::Value {
        let reg: Vec<[f64; 2]> = self
            .register
            .amplitudes()
            .iter()
            .map(|a| [a.re, a.im])
            .collect();
        let mut v = json!({
            "step": self.step,
            "rule": self.rule,
            "token_indices": self.token_indices,
            "from_occurrences": self.from.iter().map(occ_json).collect::<Vec<_>>(),
            "to_occurrences": self.to.iter().map(occ_json).collect::<Vec<_>>(),
            "register": reg,
        });
        if let Some(g) = &self.gate {
            v["gate"] = json!(g);
        }
        v
    }
}

/// A gate firing: name plus 1-based qubit targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitOp {
    pub gate: String,
    pub targets: Vec<usize>,
}

/// The result of running to a final state.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_info: FinalInfo,
    pub circuit: Vec<CircuitOp>,
    pub trace: Vec<TraceStep>,
    pub steps: usize,
}

/// The compiled token machine for one closed derivation.
pub struct Machine<'a> {
    pi: &'a Derivation,
    lib: &'a GateLibrary,
    next: HashMap<Occurrence, (Occurrence, &'static str)>,
    gate_nodes: Vec<GateNode>,
    root_noccs: Vec<Occurrence>,
    root_poccs: Vec<Occurrence>,
    budget_per_token: usize,
}

impl<'a> Machine<'a> {
    pub fn compile(pi: &'a Derivation, lib: &'a GateLibrary) -> Result<Machine<'a>, MachineError> {
        if !pi.is_closed() {
            return Err(MachineError::OpenDerivation(pi.env.len()));
        }
        let mut machine = Machine {
            pi,
            lib,
            next: HashMap::new(),
            gate_nodes: Vec::new(),
            root_noccs: noccs(&pi.ty)
                .into_iter()
                .map(|p| Occurrence::conclusion(vec![], p))
                .collect(),
            root_poccs: poccs(&pi.ty)
                .into_iter()
                .map(|p| Occurrence::conclusion(vec![], p))
                .collect(),
            budget_per_token: pi.total_bit_occurrences(),
        };
        machine.compile_node(pi, &mut Vec::new());
        Ok(machine)
    }

    fn edge(&mut self, from: Occurrence, to: Occurrence, rule: &'static str) {
        let prev = self.next.insert(from, (to, rule));
        debug_assert!(prev.is_none(), "two outgoing edges from one occurrence");
    }

    /// Bidirectional edges between a slot at `outer` and a slot at
    /// `inner`: positive-in-type paths flow from `outer` to `inner`,
    /// negative ones the other way.
    fn link_env(
        &mut self,
        ty: &crate::syntax::Type,
        outer: Occurrence,
        inner: Occurrence,
        rule: &'static str,
    ) {
        for p in poccs(ty) {
            let mut from = outer.clone();
            from.path.extend(p.clone());
            let mut to = inner.clone();
            to.path.extend(p);
            self.edge(from, to, rule);
        }
        for p in noccs(ty) {
            let mut from = inner.clone();
            from.path.extend(p.clone());
            let mut to = outer.clone();
            to.path.extend(p);
            self.edge(from, to, rule);
        }
    }

    fn compile_node(&mut self, d: &Derivation, path: &mut Vec<usize>) {
        let here = |slot: Slot, prefix: Vec<TyStep>| Occurrence {
            node: path.clone(),
            slot,
            path: prefix,
        };
        let rule = d.rule.name();
        // The static rule name; edges borrow it for the trace.
        let rule_static: &'static str = match d.rule {
            Rule::AxVar => "a_v",
            Rule::AxQ0 => "a_q0",
            Rule::AxQ1 => "a_q1",
            Rule::AxGate => "a_U",
            Rule::LamVar => "I-o1",
            Rule::LamPair => "I-o2",
            Rule::App => "E-o",
            Rule::Pair => "I-ox",
        };
        debug_assert_eq!(rule, rule_static);
        match d.rule {
            Rule::AxVar => {
                // Positive paths travel env -> conclusion, negative back.
                self.link_env(
                    &d.ty,
                    here(Slot::Env(0), vec![]),
                    here(Slot::Conclusion, vec![]),
                    rule_static,
                );
            }
            Rule::AxQ0 | Rule::AxQ1 => {}
            Rule::AxGate => {
                let dom = match &d.ty {
                    crate::syntax::Type::Arrow(a, _) => a.as_ref().clone(),
                    _ => unreachable!("gate axiom types are arrows"),
                };
                let args = poccs(&dom)
                    .into_iter()
                    .map(|mut p| {
                        p.insert(0, TyStep::ArrowL);
                        here(Slot::Conclusion, p)
                    })
                    .collect();
                let results = poccs(&dom)
                    .into_iter()
                    .map(|mut p| {
                        p.insert(0, TyStep::ArrowR);
                        here(Slot::Conclusion, p)
                    })
                    .collect();
                let name = match &d.subject {
                    crate::syntax::Term::Gate(g) => g.clone(),
                    _ => unreachable!("gate axiom subjects are gates"),
                };
                self.gate_nodes.push(GateNode { name, args, results });
            }
            Rule::LamVar | Rule::LamPair => {
                let premise = &d.premises[0];
                let mut ppath = path.clone();
                ppath.push(0);
                let at_premise = |slot: Slot, prefix: Vec<TyStep>| Occurrence {
                    node: ppath.clone(),
                    slot,
                    path: prefix,
                };
                let cod = match &d.ty {
                    crate::syntax::Type::Arrow(_, b) => b.as_ref(),
                    _ => unreachable!("abstractions have arrow types"),
                };
                let binders: Vec<(&str, Vec<TyStep>)> = match (&d.rule, &d.subject) {
                    (Rule::LamVar, crate::syntax::Term::Lambda(pat, _)) => {
                        vec![(pat.binders()[0], vec![TyStep::ArrowL])]
                    }
                    (Rule::LamPair, crate::syntax::Term::Lambda(pat, _)) => vec![
                        (pat.binders()[0], vec![TyStep::ArrowL, TyStep::TensorL]),
                        (pat.binders()[1], vec![TyStep::ArrowL, TyStep::TensorR]),
                    ],
                    _ => unreachable!("abstraction subjects are lambdas"),
                };
                for (name, prefix) in binders {
                    let idx = premise
                        .env
                        .iter()
                        .position(|(n, _)| n == name)
                        .expect("linear binder is free in the body");
                    let bty = &premise.env[idx].1;
                    // Tokens in the conclusion domain route to the
                    // premise environment entry of the binder; the
                    // domain position flips polarity, so the negative
                    // in-type paths of the binder type flow outward.
                    for p in noccs(bty) {
                        let mut from = at_premise(Slot::Env(idx), vec![]);
                        from.path.extend(p.clone());
                        let mut to = here(Slot::Conclusion, prefix.clone());
                        to.path.extend(p);
                        self.edge(from, to, rule_static);
                    }
                    for p in poccs(bty) {
                        let mut from = here(Slot::Conclusion, prefix.clone());
                        from.path.extend(p.clone());
                        let mut to = at_premise(Slot::Env(idx), vec![]);
                        to.path.extend(p);
                        self.edge(from, to, rule_static);
                    }
                }
                for p in poccs(cod) {
                    let mut from = at_premise(Slot::Conclusion, vec![]);
                    from.path.extend(p.clone());
                    let mut to = here(Slot::Conclusion, vec![TyStep::ArrowR]);
                    to.path.extend(p);
                    self.edge(from, to, rule_static);
                }
                for p in noccs(cod) {
                    let mut from = here(Slot::Conclusion, vec![TyStep::ArrowR]);
                    from.path.extend(p.clone());
                    let mut to = at_premise(Slot::Conclusion, vec![]);
                    to.path.extend(p);
                    self.edge(from, to, rule_static);
                }
                // Ambient environment threads through unchanged.
                for (i, (name, ty)) in d.env.iter().enumerate() {
                    let j = premise
                        .env
                        .iter()
                        .position(|(n, _)| n == name)
                        .expect("ambient variable is free in the body");
                    self.link_env(
                        ty,
                        here(Slot::Env(i), vec![]),
                        at_premise(Slot::Env(j), vec![]),
                        rule_static,
                    );
                }
            }
            Rule::App => {
                let fun = &d.premises[0];
                let arg = &d.premises[1];
                let mut fpath = path.clone();
                fpath.push(0);
                let mut apath = path.clone();
                apath.push(1);
                let at_fun = |slot: Slot, prefix: Vec<TyStep>| Occurrence {
                    node: fpath.clone(),
                    slot,
                    path: prefix,
                };
                let at_arg = |slot: Slot, prefix: Vec<TyStep>| Occurrence {
                    node: apath.clone(),
                    slot,
                    path: prefix,
                };
                let (dom, cod) = match &fun.ty {
                    crate::syntax::Type::Arrow(a, b) => (a.as_ref(), b.as_ref()),
                    _ => unreachable!("application heads have arrow types"),
                };
                for p in poccs(dom) {
                    let mut from = at_arg(Slot::Conclusion, vec![]);
                    from.path.extend(p.clone());
                    let mut to = at_fun(Slot::Conclusion, vec![TyStep::ArrowL]);
                    to.path.extend(p);
                    self.edge(from, to, rule_static);
                }
                for p in noccs(dom) {
                    let mut from = at_fun(Slot::Conclusion, vec![TyStep::ArrowL]);
                    from.path.extend(p.clone());
                    let mut to = at_arg(Slot::Conclusion, vec![]);
                    to.path.extend(p);
                    self.edge(from, to, rule_static);
                }
                for p in poccs(cod) {
                    let mut from = at_fun(Slot::Conclusion, vec![TyStep::ArrowR]);
                    from.path.extend(p.clone());
                    let mut to = here(Slot::Conclusion, vec![]);
                    to.path.extend(p);
                    self.edge(from, to, rule_static);
                }
                for p in noccs(cod) {
                    let mut from = here(Slot::Conclusion, vec![]);
                    from.path.extend(p.clone());
                    let mut to = at_fun(Slot::Conclusion, vec![TyStep::ArrowR]);
                    to.path.extend(p);
                    self.edge(from, to, rule_static);
                }
                for (i, (name, ty)) in d.env.iter().enumerate() {
                    let target = if let Some(j) = fun.env.iter().position(|(n, _)| n == name) {
                        at_fun(Slot::Env(j), vec![])
                    } else {
                        let j = arg
                            .env
                            .iter()
                            .position(|(n, _)| n == name)
                            .expect("variable is free in one premise");
                        at_arg(Slot::Env(j), vec![])
                    };
                    self.link_env(ty, here(Slot::Env(i), vec![]), target, rule_static);
                }
            }
            Rule::Pair => {
                let left = &d.premises[0];
                let right = &d.premises[1];
                let mut lpath = path.clone();
                lpath.push(0);
                let mut rpath = path.clone();
                rpath.push(1);
                let at_left = |slot: Slot, prefix: Vec<TyStep>| Occurrence {
                    node: lpath.clone(),
                    slot,
                    path: prefix,
                };
                let at_right = |slot: Slot, prefix: Vec<TyStep>| Occurrence {
                    node: rpath.clone(),
                    slot,
                    path: prefix,
                };
                for (premise, at_premise, step) in [
                    (left, &at_left as &dyn Fn(Slot, Vec<TyStep>) -> Occurrence, TyStep::TensorL),
                    (right, &at_right, TyStep::TensorR),
                ] {
                    for p in poccs(&premise.ty) {
                        let mut from = at_premise(Slot::Conclusion, vec![]);
                        from.path.extend(p.clone());
                        let mut to = here(Slot::Conclusion, vec![step]);
                        to.path.extend(p);
                        self.edge(from, to, rule_static);
                    }
                    for p in noccs(&premise.ty) {
                        let mut from = here(Slot::Conclusion, vec![step]);
                        from.path.extend(p.clone());
                        let mut to = at_premise(Slot::Conclusion, vec![]);
                        to.path.extend(p);
                        self.edge(from, to, rule_static);
                    }
                }
                for (i, (name, ty)) in d.env.iter().enumerate() {
                    let target = if let Some(j) = left.env.iter().position(|(n, _)| n == name) {
                        at_left(Slot::Env(j), vec![])
                    } else {
                        let j = right
                            .env
                            .iter()
                            .position(|(n, _)| n == name)
                            .expect("variable is free in one premise");
                        at_right(Slot::Env(j), vec![])
                    };
                    self.link_env(ty, here(Slot::Env(i), vec![]), target, rule_static);
                }
            }
        }
        for (i, p) in d.premises.iter().enumerate() {
            path.push(i);
            self.compile_node(p, path);
            path.pop();
        }
    }

    /// Number of negative Bit occurrences of the conclusion type.
    pub fn input_arity(&self) -> usize {
        self.root_noccs.len()
    }

    /// Number of positive Bit occurrences of the conclusion type.
    pub fn output_arity(&self) -> usize {
        self.root_poccs.len()
    }

    pub fn derivation(&self) -> &Derivation {
        self.pi
    }

    /// Tokens at the conclusion's negative occurrences followed by the
    /// bit-axiom occurrences; register `q (x) bitval`.
    pub fn initial_state(&self, q: &Register) -> Result<MachineState, MachineError> {
        if q.qubits() != self.input_arity() {
            return Err(MachineError::ArityMismatch {
                got: q.qubits(),
                want: self.input_arity(),
            });
        }
        let mut tokens = self.root_noccs.clone();
        tokens.extend(bit_occurrences(self.pi));
        let register = tensor(q, &bit_values(self.pi));
        Ok(MachineState { tokens, register })
    }

    pub fn enabled_moves(&self, s: &MachineState) -> Vec<Move> {
        let occupied: HashMap<&Occurrence, usize> =
            s.tokens.iter().enumerate().map(|(i, o)| (o, i)).collect();
        let mut moves = Vec::new();
        for (i, occ) in s.tokens.iter().enumerate() {
            if let Some((to, rule)) = self.next.get(occ) {
                moves.push(Move::Token { token: i, to: to.clone(), rule });
            }
        }
        for (g, node) in self.gate_nodes.iter().enumerate() {
            let indices: Option<Vec<usize>> = node
                .args
                .iter()
                .map(|a| occupied.get(a).copied())
                .collect();
            if let Some(tokens) = indices {
                moves.push(Move::Gate { gate: g, tokens });
            }
        }
        moves
    }

    fn apply_move(&self, s: &MachineState, mv: &Move) -> Result<MachineState, MachineError> {
        let mut next = s.clone();
        match mv {
            Move::Token { token, to, .. } => {
                next.tokens[*token] = to.clone();
            }
            Move::Gate { gate, tokens } => {
                let node = &self.gate_nodes[*gate];
                let u = self.lib.get(&node.name)?;
                // i_k is the 1-based state position of the token at
                // argument occurrence k.
                let targets: Vec<usize> = tokens.iter().map(|&i| i + 1).collect();
                next.register = apply_lifted(u, &targets, &s.register)?;
                for (k, &i) in tokens.iter().enumerate() {
                    next.tokens[i] = node.results[k].clone();
                }
            }
        }
        Ok(next)
    }

    fn pick<'m>(&self, moves: &'m [Move], scheduler: Scheduler) -> &'m Move {
        match scheduler {
            Scheduler::LowestIndex => moves.iter().min_by_key(|m| m.key()),
            Scheduler::HighestIndex => moves.iter().max_by_key(|m| m.key()),
        }
        .expect("caller checked moves are nonempty")
    }

    /// One scheduled step.
    pub fn step(
        &self,
        s: &MachineState,
        scheduler: Scheduler,
    ) -> Result<Option<MachineState>, MachineError> {
        let moves = self.enabled_moves(s);
        if moves.is_empty() {
            return Ok(None);
        }
        let mv = self.pick(&moves, scheduler);
        self.apply_move(s, mv).map(Some)
    }

    /// Recognizes final states and computes sigma:
    /// `tokens[i] = poccs(A)[sigma(i)]`.
    pub fn final_info(&self, s: &MachineState) -> Option<FinalInfo> {
        let mut map = Vec::with_capacity(s.tokens.len());
        for t in &s.tokens {
            let j = self.root_poccs.iter().position(|p| p == t)?;
            map.push(j + 1);
        }
        let sigma = Permutation::new(map).ok()?;
        Some(FinalInfo { sigma, register: s.register.clone() })
    }

    /// Runs to a halt state, asserting finality, the step budget, and
    /// per-step norm conservation.
    pub fn run_to_final(
        &self,
        start: &MachineState,
        scheduler: Scheduler,
        with_trace: bool,
    ) -> Result<RunOutcome, MachineError> {
        let budget = start.tokens.len() * self.budget_per_token;
        let mut state = start.clone();
        let mut circuit = Vec::new();
        let mut trace = Vec::new();
        let mut steps = 0usize;
        loop {
            let moves = self.enabled_moves(&state);
            let Some(mv) = (!moves.is_empty()).then(|| self.pick(&moves, scheduler).clone())
            else {
                break;
            };
            if steps >= budget {
                return Err(MachineError::BudgetExceeded(budget));
            }
            let from: Vec<Occurrence>;
            let token_indices: Vec<usize>;
            let gate_name: Option<String>;
            let rule_name: String;
            match &mv {
                Move::Token { token, rule, .. } => {
                    from = vec![state.tokens[*token].clone()];
                    token_indices = vec![*token];
                    gate_name = None;
                    rule_name = (*rule).to_string();
                }
                Move::Gate { gate, tokens } => {
                    from = tokens.iter().map(|&i| state.tokens[i].clone()).collect();
                    token_indices = tokens.clone();
                    let node = &self.gate_nodes[*gate];
                    gate_name = Some(node.name.clone());
                    rule_name = "a_U".to_string();
                    circuit.push(CircuitOp {
                        gate: node.name.clone(),
                        targets: tokens.iter().map(|&i| i + 1).collect(),
                    });
                }
            }
            state = self.apply_move(&state, &mv)?;
            steps += 1;
            let norm = state.register.norm();
            if (norm - 1.0).abs() > crate::quantum::NORM_TOL * steps as f64 {
                return Err(MachineError::NormDrift(norm));
            }
            if with_trace {
                let to: Vec<Occurrence> = token_indices
                    .iter()
                    .map(|&i| state.tokens[i].clone())
                    .collect();
                trace.push(TraceStep {
                    step: steps,
                    rule: rule_name,
                    token_indices,
                    from,
                    to,
                    gate: gate_name,
                    register: state.register.clone(),
                });
            }
        }
        let final_info = self.final_info(&state).ok_or(MachineError::Deadlock)?;
        Ok(RunOutcome { final_info, circuit, trace, steps })
    }

    /// The total function computed by the derivation: runs from the
    /// initial state for `q` and reports the final register in
    /// canonical `poccs(A)` order.
    pub fn computed_function(&self, q: &Register) -> Result<Register, MachineError> {
        let start = self.initial_state(q)?;
        let outcome = self.run_to_final(&start, Scheduler::LowestIndex, false)?;
        Ok(outcome.final_info.canonical_register())
    }

    /// Gate firings in order. Register-independent, so a zero input is
    /// used for the symbolic run.
    pub fn extract_circuit(&self) -> Result<Vec<CircuitOp>, MachineError> {
        let n = self.input_arity();
        let q = if n == 0 {
            Register::scalar()
        } else {
            Register::basis(&vec![0u8; n])
        };
        let start = self.initial_state(&q)?;
        let outcome = self.run_to_final(&start, Scheduler::LowestIndex, false)?;
        Ok(outcome.circuit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::GateLibrary;
    use crate::syntax::parse_term;
    use crate::typing::infer;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn check(src: &str, lib: &GateLibrary) -> Derivation {
        infer(&vec![], &parse_term(src).unwrap(), lib).unwrap()
    }

    fn assert_close(a: &Register, b: &Register, tol: f64) {
        assert!(a.max_deviation(b) <= tol, "{} vs {}", a, b);
    }

    const EPR: &str = r"\<x,y>. CNOT ((H x) * y)";
    const EPR_APPLIED: &str = r"(\<x,y>. CNOT ((H x) * y)) (|0>_1 * |1>_2)";

    #[test]
    fn initial_state_epr_applied() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR_APPLIED, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        assert_eq!(m.input_arity(), 0);
        let s = m.initial_state(&Register::scalar()).unwrap();
        assert_eq!(s.tokens.len(), 2);
        assert_eq!(s.tokens, bit_occurrences(&pi));
        assert_eq!(s.register, Register::basis(&[0, 1]));
    }

    #[test]
    fn initial_state_epr_abstraction() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        assert_eq!(m.input_arity(), 2);
        let s = m.initial_state(&Register::basis(&[0, 0])).unwrap();
        assert_eq!(s.tokens.len(), 2);
        // Both tokens start on the conclusion's negative occurrences.
        assert_eq!(
            s.tokens,
            vec![
                Occurrence::conclusion(vec![], vec![TyStep::ArrowL, TyStep::TensorL]),
                Occurrence::conclusion(vec![], vec![TyStep::ArrowL, TyStep::TensorR]),
            ]
        );
        assert_eq!(s.register, Register::basis(&[0, 0]));
    }

    #[test]
    fn initial_state_single_bit() {
        let lib = GateLibrary::builtin();
        let pi = check("|0>", &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let s = m.initial_state(&Register::scalar()).unwrap();
        assert_eq!(s.tokens, vec![Occurrence::conclusion(vec![], vec![])]);
        assert_eq!(s.register, Register::basis(&[0]));
    }

    #[test]
    fn arity_mismatch_rejected() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        assert!(matches!(
            m.initial_state(&Register::scalar()),
            Err(MachineError::ArityMismatch { got: 0, want: 2 })
        ));
    }

    #[test]
    fn open_derivation_rejected() {
        let lib = GateLibrary::builtin();
        let env = vec![("x".to_string(), crate::syntax::Type::Bit)];
        let pi = infer(&env, &parse_term("H x").unwrap(), &lib).unwrap();
        assert!(matches!(
            Machine::compile(&pi, &lib),
            Err(MachineError::OpenDerivation(1))
        ));
    }

    #[test]
    fn epr_applied_run() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR_APPLIED, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let out = m.computed_function(&Register::scalar()).unwrap();
        let s = FRAC_1_SQRT_2;
        let expected = Register::from_amplitudes(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        assert_close(&out, &expected, 1e-9);
    }

    #[test]
    fn epr_abstraction_gate_order_and_sigma() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let q = Register::basis(&[0, 1]);
        let start = m.initial_state(&q).unwrap();
        let out = m
            .run_to_final(&start, Scheduler::LowestIndex, true)
            .unwrap();
        assert!(out.final_info.sigma.is_identity());
        assert_eq!(
            out.circuit,
            vec![
                CircuitOp { gate: "H".into(), targets: vec![1] },
                CircuitOp { gate: "CNOT".into(), targets: vec![1, 2] },
            ]
        );
        // Register = CNOT^{1,2}(H^1(Q)).
        let h = apply_lifted(lib.get("H").unwrap(), &[1], &q).unwrap();
        let expect = apply_lifted(lib.get("CNOT").unwrap(), &[1, 2], &h).unwrap();
        assert_close(&out.final_info.register, &expect, 1e-12);
        // Non-gate steps leave the register untouched.
        let mut reg = q.clone();
        for step in &out.trace {
            if step.gate.is_none() {
                assert_close(&step.register, &reg, 0.0);
            } else {
                reg = step.register.clone();
            }
        }
    }

    #[test]
    fn identity_derivation_computes_identity() {
        let lib = GateLibrary::builtin();
        let pi = check(r"\x. x", &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        for bits in [[0u8], [1u8]] {
            let out = m.computed_function(&Register::basis(&bits)).unwrap();
            assert_close(&out, &Register::basis(&bits), 1e-12);
        }
    }

    #[test]
    fn swap_term_reorders_via_sigma() {
        let lib = GateLibrary::builtin();
        let pi = check(r"\<x,y>. y * x", &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let out = m.computed_function(&Register::basis(&[0, 1])).unwrap();
        assert_close(&out, &Register::basis(&[1, 0]), 1e-12);
        let start = m.initial_state(&Register::basis(&[0, 1])).unwrap();
        let outcome = m.run_to_final(&start, Scheduler::LowestIndex, false).unwrap();
        assert!(!outcome.final_info.sigma.is_identity());
    }

    #[test]
    fn single_bit_run() {
        let lib = GateLibrary::builtin();
        let pi = check("|1>", &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let out = m.computed_function(&Register::scalar()).unwrap();
        assert_close(&out, &Register::basis(&[1]), 1e-12);
    }

    #[test]
    fn gate_free_circuit_is_empty() {
        let lib = GateLibrary::builtin();
        let pi = check("|0>_1 * |1>_2", &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        assert!(m.extract_circuit().unwrap().is_empty());
        let out = m.computed_function(&Register::scalar()).unwrap();
        assert_close(&out, &Register::basis(&[0, 1]), 1e-12);
    }

    #[test]
    fn schedulers_agree_on_epr() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR_APPLIED, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let start = m.initial_state(&Register::scalar()).unwrap();
        let low = m.run_to_final(&start, Scheduler::LowestIndex, false).unwrap();
        let high = m.run_to_final(&start, Scheduler::HighestIndex, false).unwrap();
        assert_eq!(low.final_info.sigma, high.final_info.sigma);
        assert_close(&low.final_info.register, &high.final_info.register, 1e-12);
    }

    #[test]
    fn cnot_synchronizes() {
        // The first token to reach a CNOT argument waits for the other.
        let lib = GateLibrary::builtin();
        let pi = check(EPR, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let start = m.initial_state(&Register::basis(&[0, 0])).unwrap();
        let out = m.run_to_final(&start, Scheduler::LowestIndex, true).unwrap();
        let cnot_step = out
            .trace
            .iter()
            .position(|s| s.gate.as_deref() == Some("CNOT"))
            .unwrap();
        let cnot_args: Vec<Occurrence> = out.trace[cnot_step].from.clone();
        let first_arrival = out
            .trace
            .iter()
            .position(|s| s.to.iter().any(|o| cnot_args.contains(o)))
            .unwrap();
        let nongate_between = out.trace[first_arrival + 1..cnot_step]
            .iter()
            .filter(|s| s.gate.is_none())
            .count();
        assert!(nongate_between >= 1, "CNOT fired without synchronization delay");
    }

    #[test]
    fn uniformity_same_moves_for_different_registers() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let t1 = m
            .run_to_final(&m.initial_state(&Register::basis(&[0, 0])).unwrap(), Scheduler::LowestIndex, true)
            .unwrap();
        let t2 = m
            .run_to_final(&m.initial_state(&Register::basis(&[1, 1])).unwrap(), Scheduler::LowestIndex, true)
            .unwrap();
        assert_eq!(t1.steps, t2.steps);
        for (a, b) in t1.trace.iter().zip(t2.trace.iter()) {
            assert_eq!(a.token_indices, b.token_indices);
            assert_eq!(a.from, b.from);
            assert_eq!(a.to, b.to);
        }
    }

    #[test]
    fn token_count_preserved_along_run() {
        let lib = GateLibrary::builtin();
        let pi = check(EPR_APPLIED, &lib);
        let m = Machine::compile(&pi, &lib).unwrap();
        let mut s = m.initial_state(&Register::scalar()).unwrap();
        let n = s.tokens.len();
        while let Some(next) = m.step(&s, Scheduler::LowestIndex).unwrap() {
            assert_eq!(next.tokens.len(), n);
            s = next;
        }
    }

    use crate::quantum::apply_lifted;
}
