//! A directed normalizer for superpositions of terms.
//!
//! This is an independent semantics used to cross-check the token
//! machine: beta steps substitute, and a gate applied to a full tensor
//! of bit constants splits the branch into the weighted column of the
//! gate's matrix. Reduction is leftmost-innermost within each branch,
//! and branches are canonicalized (alpha-merged, zero-pruned, sorted)
//! after every parallel step.

use crate::machine::{Machine, MachineError};
use crate::quantum::{GateLibrary, QuantumError, Register};
use crate::syntax::{alpha_eq, pretty, substitute, Pattern, SubstError, Term};
use crate::typing::Derivation;
use num_complex::Complex64;
use serde_json::json;
use thiserror::Error;

/// Amplitudes below this are dropped during canonicalization.
pub const ZERO_TOL: f64 = 1e-12;

/// The machine and the normalizer must agree within this tolerance.
pub const SOUNDNESS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Subst(#[from] SubstError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("normal form is not a tensor of bit constants: {0}")]
    NotGround(String),
    #[error("normal form branches have inconsistent widths ({0} vs {1} bits)")]
    MixedWidths(usize, usize),
    #[error("internal invariant violation: reduction budget of {0} exceeded")]
    BudgetExceeded(usize),
}

/// One branch of a superposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTerm {
    pub amp: Complex64,
    pub term: Term,
}

/// A formal complex-weighted sum of terms, kept in canonical form:
/// alpha-equivalent branches merged, near-zero branches dropped,
/// branches sorted by their printed form.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperposedTerm {
    branches: Vec<WeightedTerm>,
}

impl SuperposedTerm {
    pub fn singleton(term: Term) -> SuperposedTerm {
        SuperposedTerm::from_branches(vec![WeightedTerm {
            amp: Complex64::new(1.0, 0.0),
            term,
        }])
    }

    pub fn from_branches(branches: Vec<WeightedTerm>) -> SuperposedTerm {
        let mut merged: Vec<WeightedTerm> = Vec::new();
        for b in branches {
            if let Some(existing) = merged.iter_mut().find(|m| alpha_eq(&m.term, &b.term)) {
                existing.amp += b.amp;
            } else {
                merged.push(b);
            }
        }
        merged.retain(|b| b.amp.norm() > ZERO_TOL);
        merged.sort_by_key(|b| pretty(&b.term));
        SuperposedTerm { branches: merged }
    }

    pub fn branches(&self) -> &[WeightedTerm] {
        &self.branches
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!(self
            .branches
            .iter()
            .map(|b| json!({ "re": b.amp.re, "im": b.amp.im, "term": pretty(&b.term) }))
            .collect::<Vec<_>>())
    }

    /// Reads the superposition as a register when every branch is a
    /// right-nested tensor of bit constants of one width; digits are
    /// taken in textual order.
    pub fn vector(&self) -> Result<Register, OracleError> {
        let mut width: Option<usize> = None;
        let mut amps: Vec<Complex64> = Vec::new();
        for b in &self.branches {
            let bits =
                flatten_bits(&b.term).ok_or_else(|| OracleError::NotGround(pretty(&b.term)))?;
            let digits: Vec<u8> = bits.iter().map(|(v, _)| *v).collect();
            match width {
                None => {
                    width = Some(digits.len());
                    amps = vec![Complex64::new(0.0, 0.0); 1 << digits.len()];
                }
                Some(w) if w != digits.len() => {
                    return Err(OracleError::MixedWidths(w, digits.len()));
                }
                Some(_) => {}
            }
            let index = digits.iter().fold(0usize, |acc, &d| (acc << 1) | d as usize);
            amps[index] += b.amp;
        }
        if width.is_none() {
            return Err(OracleError::NotGround("empty superposition".into()));
        }
        Ok(Register::from_amplitudes(amps)?)
    }
}

impl std::fmt::Display for SuperposedTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.branches.is_empty() {
            return write!(f, "0");
        }
        for (i, b) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i) {}", b.amp.re, b.amp.im, pretty(&b.term))?;
        }
        Ok(())
    }
}

/// A right-nested tensor of bit constants, flattened left to right.
fn flatten_bits(t: &Term) -> Option<Vec<(u8, u64)>> {
    match t {
        Term::BitConst(v, l) => Some(vec![(*v, *l)]),
        Term::TensorPair(l, r) => match l.as_ref() {
            Term::BitConst(v, n) => {
                let mut rest = flatten_bits(r)?;
                rest.insert(0, (*v, *n));
                Some(rest)
            }
            _ => None,
        },
        _ => None,
    }
}

/// Rebuilds a right-nested tensor of bit constants.
fn build_bits(bits: &[(u8, u64)]) -> Term {
    match bits {
        [(v, l)] => Term::BitConst(*v, *l),
        [(v, l), rest @ ..] => Term::pair(Term::BitConst(*v, *l), build_bits(rest)),
        [] => unreachable!("gates have arity >= 1"),
    }
}

/// The result of one reduction step: a superposition of successors.
type StepResult = Vec<(Complex64, Term)>;

/// Contracts the leftmost-innermost redex, if any.
fn reduce_once(t: &Term, lib: &GateLibrary) -> Result<Option<StepResult>, OracleError> {
    match t {
        Term::Var(_) | Term::BitConst(..) | Term::Gate(_) => Ok(None),
        Term::Lambda(pat, body) => {
            let Some(next) = reduce_once(body, lib)? else {
                return Ok(None);
            };
            Ok(Some(
                next.into_iter()
                    .map(|(a, b)| (a, Term::lambda(pat.clone(), b)))
                    .collect(),
            ))
        }
        Term::TensorPair(l, r) => {
            if let Some(next) = reduce_once(l, lib)? {
                return Ok(Some(
                    next.into_iter()
                        .map(|(a, m)| (a, Term::pair(m, r.as_ref().clone())))
                        .collect(),
                ));
            }
            if let Some(next) = reduce_once(r, lib)? {
                return Ok(Some(
                    next.into_iter()
                        .map(|(a, m)| (a, Term::pair(l.as_ref().clone(), m)))
                        .collect(),
                ));
            }
            Ok(None)
        }
        Term::App(fun, arg) => {
            if let Some(next) = reduce_once(fun, lib)? {
                return Ok(Some(
                    next.into_iter()
                        .map(|(a, m)| (a, Term::app(m, arg.as_ref().clone())))
                        .collect(),
                ));
            }
            if let Some(next) = reduce_once(arg, lib)? {
                return Ok(Some(
                    next.into_iter()
                        .map(|(a, m)| (a, Term::app(fun.as_ref().clone(), m)))
                        .collect(),
                ));
            }
            match fun.as_ref() {
                Term::Lambda(Pattern::Var(x), body) => {
                    let result = substitute(body, &[x.clone()], &[arg.as_ref().clone()])?;
                    Ok(Some(vec![(Complex64::new(1.0, 0.0), result)]))
                }
                Term::Lambda(Pattern::Pair(x, y), body) => match arg.as_ref() {
                    Term::TensorPair(n1, n2) => {
                        let result = substitute(
                            body,
                            &[x.clone(), y.clone()],
                            &[n1.as_ref().clone(), n2.as_ref().clone()],
                        )?;
                        Ok(Some(vec![(Complex64::new(1.0, 0.0), result)]))
                    }
                    _ => Ok(None),
                },
                Term::Gate(g) => {
                    let Some(bits) = flatten_bits(arg) else {
                        return Ok(None);
                    };
                    let u = lib.get(g)?;
                    if bits.len() != u.arity() {
                        return Ok(None);
                    }
                    let input = bits
                        .iter()
                        .fold(0usize, |acc, &(v, _)| (acc << 1) | v as usize);
                    let column = u.column(input);
                    let labels: Vec<u64> = bits.iter().map(|(_, l)| *l).collect();
                    let mut out = Vec::new();
                    for (row, amp) in column.iter().enumerate() {
                        if amp.norm() <= ZERO_TOL {
                            continue;
                        }
                        let digits: Vec<(u8, u64)> = (0..bits.len())
                            .map(|k| {
                                let v = ((row >> (bits.len() - 1 - k)) & 1) as u8;
                                (v, labels[k])
                            })
                            .collect();
                        out.push((*amp, build_bits(&digits)));
                    }
                    Ok(Some(out))
                }
                _ => Ok(None),
            }
        }
    }
}

fn app_count(t: &Term) -> usize {
    match t {
        Term::Var(_) | Term::BitConst(..) | Term::Gate(_) => 0,
        Term::Lambda(_, body) => app_count(body),
        Term::TensorPair(l, r) => app_count(l) + app_count(r),
        Term::App(l, r) => 1 + app_count(l) + app_count(r),
    }
}

/// Normalizes every branch of the superposition to its normal form.
///
/// Each step removes one application node from the branch it touches,
/// so the number of parallel rounds is bounded by the largest
/// application count in the input.
pub fn normalize(s: &SuperposedTerm, lib: &GateLibrary) -> Result<SuperposedTerm, OracleError> {
    let budget = s
        .branches
        .iter()
        .map(|b| app_count(&b.term))
        .max()
        .unwrap_or(0)
        + 1;
    let mut current = s.clone();
    for _ in 0..=budget {
        let mut next: Vec<WeightedTerm> = Vec::new();
        let mut progressed = false;
        for b in current.branches() {
            match reduce_once(&b.term, lib)? {
                Some(successors) => {
                    progressed = true;
                    for (amp, term) in successors {
                        next.push(WeightedTerm { amp: b.amp * amp, term });
                    }
                }
                None => next.push(b.clone()),
            }
        }
        if !progressed {
            return Ok(current);
        }
        current = SuperposedTerm::from_branches(next);
    }
    Err(OracleError::BudgetExceeded(budget))
}

/// Normalizes a single term from amplitude one.
pub fn normalize_term(t: &Term, lib: &GateLibrary) -> Result<SuperposedTerm, OracleError> {
    normalize(&SuperposedTerm::singleton(t.clone()), lib)
}

/// The machine run and the normal form of a ground derivation,
/// compared as registers.
#[derive(Debug, Clone)]
pub struct SoundnessReport {
    pub machine: Register,
    pub normal_form: SuperposedTerm,
    pub oracle: Register,
    pub max_deviation: f64,
    pub agrees: bool,
}

/// Runs both semantics on a closed derivation of bit-tensor type and
/// compares the resulting state vectors.
pub fn check_soundness(
    pi: &Derivation,
    lib: &GateLibrary,
) -> Result<SoundnessReport, OracleError> {
    let machine = Machine::compile(pi, lib)?;
    let out = machine.computed_function(&Register::scalar())?;
    let normal_form = normalize_term(&pi.subject, lib)?;
    let oracle = normal_form.vector()?;
    let max_deviation = out.max_deviation(&oracle);
    Ok(SoundnessReport {
        machine: out,
        normal_form,
        oracle,
        max_deviation,
        agrees: max_deviation <= SOUNDNESS_TOL,
    })
}
