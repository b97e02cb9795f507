//! Random term generators for the test suites.
//!
//! Three families: closed ground terms of bit-tensor type (optionally
//! wrapped in beta redexes), higher-order variants obtained by
//! abstracting bit constants, and bit-free circuit terms of type
//! `B^k -o B^k` built by wire destructuring.

use crate::syntax::{Pattern, Term, Type};
use rand::Rng;

/// Gates drawn by the generators, with their arities.
pub const GATE_POOL: &[(&str, usize)] = &[
    ("H", 1),
    ("X", 1),
    ("Z", 1),
    ("CNOT", 2),
    ("CZ", 2),
    ("SWAP", 2),
];

fn pick_gate<R: Rng>(rng: &mut R, arity: usize) -> Option<&'static str> {
    let candidates: Vec<&'static str> = GATE_POOL
        .iter()
        .filter(|(_, a)| *a == arity)
        .map(|(g, _)| *g)
        .collect();
    if candidates.is_empty() {
        None
    } else {
        Some(candidates[rng.gen_range(0..candidates.len())])
    }
}

struct Labels(u64);

impl Labels {
    fn fresh(&mut self) -> u64 {
        self.0 += 1;
        self.0
    }
}

/// A right-nested tensor of `n` qubits' worth of term, with up to
/// `gate_budget` gate applications sprinkled on full-width subterms.
fn ground_nested<R: Rng>(rng: &mut R, n: usize, gate_budget: &mut usize, labels: &mut Labels) -> Term {
    let mut t = if n == 1 {
        Term::BitConst(rng.gen_range(0..2), labels.fresh())
    } else {
        let head = Term::BitConst(rng.gen_range(0..2), labels.fresh());
        Term::pair(head, ground_nested(rng, n - 1, gate_budget, labels))
    };
    while *gate_budget > 0 && rng.gen_bool(0.4) {
        let Some(g) = pick_gate(rng, n) else { break };
        *gate_budget -= 1;
        t = Term::app(Term::Gate(g.to_string()), t);
    }
    t
}

/// Wraps a term in an identity beta redex, choosing the plain or pair
/// form to exercise both abstraction rules.
fn wrap_redex<R: Rng>(rng: &mut R, t: Term, counter: &mut usize) -> Term {
    *counter += 1;
    let x = format!("g{}", counter);
    match t {
        Term::TensorPair(l, r) if rng.gen_bool(0.5) => {
            *counter += 1;
            let y = format!("g{}", counter);
            Term::app(
                Term::lambda(
                    Pattern::Pair(x.clone(), y.clone()),
                    Term::pair(Term::Var(x), Term::Var(y)),
                ),
                Term::pair(*l, *r),
            )
        }
        t => Term::app(
            Term::lambda(Pattern::Var(x.clone()), Term::Var(x)),
            t,
        ),
    }
}

/// A closed ground term of a right-nested bit-tensor type with at most
/// `max_qubits` qubits and `max_gates` gate applications, wrapped in a
/// few beta redexes.
pub fn ground_term<R: Rng>(rng: &mut R, max_qubits: usize, max_gates: usize) -> Term {
    let n = rng.gen_range(1..=max_qubits);
    let mut budget = rng.gen_range(0..=max_gates);
    let mut labels = Labels(0);
    let mut t = ground_nested(rng, n, &mut budget, &mut labels);
    let mut counter = 0;
    for _ in 0..rng.gen_range(0..=3) {
        t = wrap_redex(rng, t, &mut counter);
    }
    t
}

/// Replaces up to `max_abs` bit constants of a ground term by fresh
/// variables and abstracts them, producing a closed higher-order term
/// of type `B -o ... -o T`.
pub fn higher_order_term<R: Rng>(rng: &mut R, max_qubits: usize, max_gates: usize, max_abs: usize) -> Term {
    let t = ground_term(rng, max_qubits, max_gates);
    let total = t.bit_count();
    let k = rng.gen_range(0..=max_abs.min(total));
    let mut picked: Vec<usize> = (0..total).collect();
    for i in (1..picked.len()).rev() {
        picked.swap(i, rng.gen_range(0..=i));
    }
    picked.truncate(k);
    picked.sort_unstable();
    let mut names: Vec<String> = (0..k).map(|i| format!("h{}", i + 1)).collect();
    let mut index = 0usize;
    fn replace(t: &Term, picked: &[usize], names: &mut Vec<String>, index: &mut usize) -> Term {
        match t {
            Term::BitConst(..) => {
                let here = *index;
                *index += 1;
                if let Some(pos) = picked.iter().position(|&p| p == here) {
                    Term::Var(names[pos].clone())
                } else {
                    t.clone()
                }
            }
            Term::Var(_) | Term::Gate(_) => t.clone(),
            Term::TensorPair(l, r) => Term::pair(
                replace(l, picked, names, index),
                replace(r, picked, names, index),
            ),
            Term::App(l, r) => Term::app(
                replace(l, picked, names, index),
                replace(r, picked, names, index),
            ),
            Term::Lambda(p, b) => Term::lambda(p.clone(), replace(b, picked, names, index)),
        }
    }
    let mut body = replace(&t, &picked, &mut names, &mut index);
    for name in names.into_iter().rev() {
        body = Term::lambda(Pattern::Var(name), body);
    }
    body
}

/// Destructures a `B^k` input into `k` single-bit wires named
/// `w1..wk` and hands them to `cont`; returns the outer pattern and
/// the body with the intermediate splits applied.
fn destructure(k: usize, cont: impl FnOnce(Vec<Term>) -> Term) -> (Pattern, Term) {
    if k == 1 {
        let body = cont(vec![Term::Var("w1".into())]);
        return (Pattern::Var("w1".into()), body);
    }
    let wires: Vec<Term> = (1..=k).map(|i| Term::Var(format!("w{}", i))).collect();
    let mut body = cont(wires);
    for i in (2..k).rev() {
        let second = if i == k - 1 {
            format!("w{}", k)
        } else {
            format!("wr{}", i + 1)
        };
        body = Term::app(
            Term::lambda(Pattern::Pair(format!("w{}", i), second), body),
            Term::Var(format!("wr{}", i)),
        );
    }
    let first_rest = if k == 2 { "w2".to_string() } else { "wr2".to_string() };
    (Pattern::Pair("w1".into(), first_rest), body)
}

/// Applies the planned gates to the wires in order, threading 2-ary
/// results through rebinding beta redexes, and finishes with the
/// right-nested tensor of the wires.
fn apply_gates(
    mut wires: Vec<Term>,
    plan: &[(&'static str, Vec<usize>)],
    fresh: &mut usize,
) -> Term {
    let Some(((g, idx), rest)) = plan.split_first() else {
        return rebuild(wires);
    };
    match idx.as_slice() {
        [i] => {
            let old = std::mem::replace(&mut wires[*i], Term::Var(String::new()));
            wires[*i] = Term::app(Term::Gate(g.to_string()), old);
            apply_gates(wires, rest, fresh)
        }
        [i, j] => {
            *fresh += 1;
            let a = format!("c{}a", fresh);
            let b = format!("c{}b", fresh);
            let old_i = std::mem::replace(&mut wires[*i], Term::Var(a.clone()));
            let old_j = std::mem::replace(&mut wires[*j], Term::Var(b.clone()));
            let applied = Term::app(Term::Gate(g.to_string()), Term::pair(old_i, old_j));
            let inner = apply_gates(wires, rest, fresh);
            Term::app(Term::lambda(Pattern::Pair(a, b), inner), applied)
        }
        _ => unreachable!("gate arities are 1 or 2"),
    }
}

/// A closed, bit-free term of type `B^k -o B^k` applying up to
/// `max_gates` gates to the destructured wires.
pub fn circuit_term<R: Rng>(rng: &mut R, k: usize, max_gates: usize) -> Term {
    assert!(k >= 1);
    let gate_count = rng.gen_range(0..=max_gates);
    let plan: Vec<(&'static str, Vec<usize>)> = (0..gate_count)
        .filter_map(|_| {
            let arity = if k >= 2 && rng.gen_bool(0.5) { 2 } else { 1 };
            let g = pick_gate(rng, arity)?;
            let mut idx: Vec<usize> = (0..k).collect();
            for i in (1..idx.len()).rev() {
                idx.swap(i, rng.gen_range(0..=i));
            }
            idx.truncate(arity);
            Some((g, idx))
        })
        .collect();
    let mut fresh = 0usize;
    let (pattern, body) = destructure(k, |wires| apply_gates(wires, &plan, &mut fresh));
    Term::lambda(pattern, body)
}

/// Right-nested tensor of the wires.
fn rebuild(wires: Vec<Term>) -> Term {
    let mut iter = wires.into_iter().rev();
    let mut t = iter.next().expect("at least one wire");
    for w in iter {
        t = Term::pair(w, t);
    }
    t
}

/// A random type of bounded depth, for property tests.
pub fn random_type<R: Rng>(rng: &mut R, depth: usize) -> Type {
    if depth == 0 || rng.gen_bool(0.4) {
        return Type::Bit;
    }
    let l = random_type(rng, depth - 1);
    let r = random_type(rng, depth - 1);
    if rng.gen_bool(0.5) {
        Type::arrow(l, r)
    } else {
        Type::tensor(l, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::GateLibrary;
    use crate::syntax::free_vars;
    use crate::typing::infer;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn ground_terms_are_closed_and_typable() {
        let lib = GateLibrary::builtin();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let t = ground_term(&mut rng, 6, 8);
            assert!(free_vars(&t).is_empty());
            assert!(t.labels_distinct());
            let pi = infer(&vec![], &t, &lib).unwrap();
            assert!(pi.ty.as_bits().is_some(), "type {}", pi.ty);
        }
    }

    #[test]
    fn higher_order_terms_are_closed_and_typable() {
        let lib = GateLibrary::builtin();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let t = higher_order_term(&mut rng, 5, 6, 3);
            assert!(free_vars(&t).is_empty());
            infer(&vec![], &t, &lib).unwrap();
        }
    }

    #[test]
    fn circuit_terms_have_circuit_type() {
        let lib = GateLibrary::builtin();
        let mut rng = StdRng::seed_from_u64(13);
        for k in 1..=4 {
            for _ in 0..10 {
                let t = circuit_term(&mut rng, k, 8);
                assert!(free_vars(&t).is_empty());
                assert_eq!(t.bit_count(), 0);
                let pi = infer(&vec![], &t, &lib).unwrap();
                assert_eq!(pi.ty, Type::arrow(Type::bits(k), Type::bits(k)), "term {}", t);
            }
        }
    }
}
