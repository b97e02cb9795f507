//! Multiplicative linear logic formulas and the translation from types.
//!
//! Formulas are kept in negation normal form: negation lives on atoms
//! only, and `negate` pushes it inward by De Morgan duality. A typing
//! judgement maps to a one-sided sequent with one negated atom per bit
//! constant, the negated translations of the environment types, and
//! the translation of the conclusion type.

use crate::syntax::Type;
use crate::typing::{Derivation, LinearEnv};
use std::fmt;

/// Formulas in negation normal form over a single atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MLLFormula {
    Atom,
    NegAtom,
    Tensor(Box<MLLFormula>, Box<MLLFormula>),
    Par(Box<MLLFormula>, Box<MLLFormula>),
}

impl MLLFormula {
    pub fn tensor(f: MLLFormula, g: MLLFormula) -> MLLFormula {
        MLLFormula::Tensor(Box::new(f), Box::new(g))
    }

    pub fn par(f: MLLFormula, g: MLLFormula) -> MLLFormula {
        MLLFormula::Par(Box::new(f), Box::new(g))
    }

    /// Count of (positive, negative) atom occurrences.
    pub fn atom_counts(&self) -> (usize, usize) {
        match self {
            MLLFormula::Atom => (1, 0),
            MLLFormula::NegAtom => (0, 1),
            MLLFormula::Tensor(f, g) | MLLFormula::Par(f, g) => {
                let (p1, n1) = f.atom_counts();
                let (p2, n2) = g.atom_counts();
                (p1 + p2, n1 + n2)
            }
        }
    }
}

/// Linear negation: swaps atoms with their duals and tensor with par.
/// Involutive.
pub fn negate(f: &MLLFormula) -> MLLFormula {
    match f {
        MLLFormula::Atom => MLLFormula::NegAtom,
        MLLFormula::NegAtom => MLLFormula::Atom,
        MLLFormula::Tensor(a, b) => MLLFormula::par(negate(a), negate(b)),
        MLLFormula::Par(a, b) => MLLFormula::tensor(negate(a), negate(b)),
    }
}

/// The type translation: bits become the atom, arrows become linear
/// implication `A^ par B`, tensors stay tensors.
pub fn translate_type(ty: &Type) -> MLLFormula {
    match ty {
        Type::Bit => MLLFormula::Atom,
        Type::Arrow(a, b) => MLLFormula::par(negate(&translate_type(a)), translate_type(b)),
        Type::Tensor(a, b) => MLLFormula::tensor(translate_type(a), translate_type(b)),
    }
}

/// A one-sided sequent: an ordered list of formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MLLSequent(pub Vec<MLLFormula>);

/// The sequent for a judgement `env |- m : ty` whose subject contains
/// `n_bits` bit constants: one negated atom per bit, the negated
/// environment types, then the conclusion type.
pub fn corresponding_sequent(env: &LinearEnv, ty: &Type, n_bits: usize) -> MLLSequent {
    let mut formulas = vec![MLLFormula::NegAtom; n_bits];
    for (_, bty) in env {
        formulas.push(negate(&translate_type(bty)));
    }
    formulas.push(translate_type(ty));
    MLLSequent(formulas)
}

/// The sequent of a derivation's root judgement.
pub fn sequent_of(pi: &Derivation) -> MLLSequent {
    corresponding_sequent(&pi.env, &pi.ty, pi.subject.bit_count())
}

impl fmt::Display for MLLFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `a` is the atom, `a^` its dual, `*` tensor, `@` par.
        match self {
            MLLFormula::Atom => write!(f, "a"),
            MLLFormula::NegAtom => write!(f, "a^"),
            MLLFormula::Tensor(l, r) => write!(f, "({} * {})", l, r),
            MLLFormula::Par(l, r) => write!(f, "({} @ {})", l, r),
        }
    }
}

impl fmt::Display for MLLSequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|-")?;
        for (i, formula) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, " {}", formula)?;
        }
        Ok(())
    }
}
