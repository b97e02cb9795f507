//! Dense state-vector numerics: registers, the gate library, lifted
//! unitaries acting on a subset of qubits, and permutation unitaries.
//!
//! Basis convention: qubit 1 is the most significant index digit, so
//! `|b1...bn>` sits at integer index `b1*2^(n-1) + ... + bn`.

use num_complex::Complex64;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use thiserror::Error;

pub const UNITARITY_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("gate {0} failed the unitarity check (max deviation {1:.3e})")]
    NotUnitary(String, f64),
    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),
    #[error("target qubit {0} out of range 1..={1}")]
    TargetOutOfRange(usize, usize),
    #[error("gate arity {arity} exceeds register size {qubits}")]
    ArityTooLarge { arity: usize, qubits: usize },
    #[error("permutation on {0} elements applied to a register on {1} qubits")]
    SizeMismatch(usize, usize),
    #[error("mapping {{1..{0}}} -> {{1..{0}}} is not a bijection")]
    NotBijective(usize),
    #[error("unknown gate {0}")]
    UnknownGate(String),
    #[error("gate config: {0}")]
    Config(String),
}

/// A normalized complex vector on `n` qubits (dimension `2^n`).
/// The empty register (`n = 0`) is the scalar 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Register {
    amps: Vec<Complex64>,
    qubits: usize,
}

impl Register {
    /// The empty register: dimension 1, amplitude 1.
    pub fn scalar() -> Register {
        Register { amps: vec![Complex64::new(1.0, 0.0)], qubits: 0 }
    }

    /// The computational basis state `|b1...bn>`.
    pub fn basis(bits: &[u8]) -> Register {
        let n = bits.len();
        let mut idx = 0usize;
        for &b in bits {
            idx = (idx << 1) | usize::from(b);
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[idx] = Complex64::new(1.0, 0.0);
        Register { amps, qubits: n }
    }

    /// Builds a register from raw amplitudes; the length must be a
    /// power of two and the vector normalized within [`NORM_TOL`].
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Register, QuantumError> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(QuantumError::NotPowerOfTwo(dim));
        }
        let qubits = dim.trailing_zeros() as usize;
        let reg = Register { amps, qubits };
        let norm = reg.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(QuantumError::NotUnitary("register".into(), (norm - 1.0).abs()));
        }
        Ok(reg)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest per-amplitude deviation from `other`.
    pub fn max_deviation(&self, other: &Register) -> f64 {
        assert_eq!(self.dim(), other.dim(), "register dimension mismatch");
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() < 1e-12 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if (a.im).abs() < 1e-12 {
                write!(f, "{:.6}", a.re)?;
            } else {
                write!(f, "({:.6}{:+.6}i)", a.re, a.im)?;
            }
            write!(f, "|{:0width$b}>", i, width = self.qubits.max(1))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// A `2^n x 2^n` complex matrix in row-major order, unitary within
/// [`UNITARITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: Vec<Complex64>,
    dim: usize,
    arity: usize,
}

impl UnitaryMatrix {
    pub fn new(name: &str, rows: Vec<Vec<Complex64>>) -> Result<UnitaryMatrix, QuantumError> {
        let dim = rows.len();
        for row in &rows {
            if row.len() != dim {
                return Err(QuantumError::NotSquare { rows: dim, cols: row.len() });
            }
        }
        if dim == 0 || !dim.is_power_of_two() {
            return Err(QuantumError::NotPowerOfTwo(dim));
        }
        let arity = dim.trailing_zeros() as usize;
        let entries: Vec<Complex64> = rows.into_iter().flatten().collect();
        let m = UnitaryMatrix { entries, dim, arity };
        let dev = m.unitarity_deviation();
        if dev > UNITARITY_TOL {
            return Err(QuantumError::NotUnitary(name.to_string(), dev));
        }
        Ok(m)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// Column `col` as a vector (used by the equational quant rule).
    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.entry(r, col)).collect()
    }

    /// Max-entry deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.dim {
                    acc += self.entry(k, i).conj() * self.entry(k, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.entry(r, c) * v[c]).sum())
            .collect()
    }
}

/// True iff `U†U` deviates from the identity by at most `tol` in any
/// entry. Errors on non-power-of-two dimensions.
pub fn validate_unitary(rows: &[Vec<Complex64>], tol: f64) -> Result<bool, QuantumError> {
    let dim = rows.len();
    for row in rows {
        if row.len() != dim {
            return Err(QuantumError::NotSquare { rows: dim, cols: row.len() });
        }
    }
    if dim == 0 || !dim.is_power_of_two() {
        return Err(QuantumError::NotPowerOfTwo(dim));
    }
    let entries: Vec<Complex64> = rows.iter().flatten().copied().collect();
    let m = UnitaryMatrix { entries, dim, arity: dim.trailing_zeros() as usize };
    Ok(m.unitarity_deviation() <= tol)
}

/// Applies `u` (arity n) to the target qubits of `q` (1-based,
/// distinct), leaving all other qubits unchanged.
pub fn apply_lifted(
    u: &UnitaryMatrix,
    targets: &[usize],
    q: &Register,
) -> Result<Register, QuantumError> {
    let m = q.qubits();
    let n = u.arity();
    if targets.len() != n {
        return Err(QuantumError::ArityTooLarge { arity: n, qubits: targets.len() });
    }
    if n > m {
        return Err(QuantumError::ArityTooLarge { arity: n, qubits: m });
    }
    for (i, &t) in targets.iter().enumerate() {
        if t == 0 || t > m {
            return Err(QuantumError::TargetOutOfRange(t, m));
        }
        if targets[..i].contains(&t) {
            return Err(QuantumError::DuplicateTarget(t));
        }
    }
    // Qubit j (1-based, MSB first) lives at bit position m - j.
    let shifts: Vec<usize> = targets.iter().map(|&j| m - j).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); q.dim()];
    let sub_dim = 1usize << n;
    for idx in 0..q.dim() {
        // Basis index of the targeted qubits, in target order.
        let mut row = 0usize;
        for &s in &shifts {
            row = (row << 1) | ((idx >> s) & 1);
        }
        for col in 0..sub_dim {
            let coeff = u.entry(row, col);
            if coeff.norm_sqr() == 0.0 {
                continue;
            }
            // The source index has the targeted qubits set to `col`.
            let mut src = idx;
            for (k, &s) in shifts.iter().enumerate() {
                let bit = (col >> (n - 1 - k)) & 1;
                src = (src & !(1 << s)) | (bit << s);
            }
            out[idx] += coeff * q.amps[src];
        }
    }
    Ok(Register { amps: out, qubits: m })
}

/// A bijection on `{1..n}`, stored as the image list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Permutation, QuantumError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v == 0 || v > n || seen[v - 1] {
                return Err(QuantumError::NotBijective(n));
            }
            seen[v - 1] = true;
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation { map: (1..=n).collect() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// Image of `i` (1-based).
    pub fn apply(&self, i: usize) -> usize {
        self.map[i - 1]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v - 1] = i + 1;
        }
        Permutation { map: inv }
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len());
        Permutation { map: (1..=self.len()).map(|i| self.apply(other.apply(i))).collect() }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }
}

/// The basis-relabeling unitary sending `|b1...bn>` to
/// `|b_sigma(1)...b_sigma(n)>`.
pub fn permute(sigma: &Permutation, q: &Register) -> Result<Register, QuantumError> {
    let n = q.qubits();
    if sigma.len() != n {
        return Err(QuantumError::SizeMismatch(sigma.len(), n));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); q.dim()];
    for idx in 0..q.dim() {
        // Output digit k is input digit sigma(k).
        let mut dst = 0usize;
        for k in 1..=n {
            let bit = (idx >> (n - sigma.apply(k))) & 1;
            dst = (dst << 1) | bit;
        }
        out[dst] = q.amps[idx];
    }
    Ok(Register { amps: out, qubits: n })
}

/// Kronecker composite; `q1`'s qubits come first.
pub fn tensor(q1: &Register, q2: &Register) -> Register {
    let mut amps = Vec::with_capacity(q1.dim() * q2.dim());
    for a in &q1.amps {
        for b in &q2.amps {
            amps.push(a * b);
        }
    }
    Register { amps, qubits: q1.qubits + q2.qubits }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real_matrix(rows: &[&[f64]]) -> Vec<Vec<Complex64>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
        .collect()
}

/// Maps gate names to unitaries. Always contains the built-in set
/// (H, X, Y, Z, S, T, CNOT, CZ, SWAP, TOFFOLI); extra gates can be
/// loaded from a JSON config and are validated on load.
#[derive(Debug, Clone)]
pub struct GateLibrary {
    gates: BTreeMap<String, UnitaryMatrix>,
}

impl GateLibrary {
    pub fn builtin() -> GateLibrary {
        let s = FRAC_1_SQRT_2;
        let mut gates = BTreeMap::new();
        let mut add = |name: &str, rows: Vec<Vec<Complex64>>| {
            gates.insert(name.to_string(), UnitaryMatrix::new(name, rows).unwrap());
        };
        add("H", real_matrix(&[&[s, s], &[s, -s]]));
        add("X", real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]));
        add("Y", vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]]);
        add("Z", real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]));
        add("S", vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]]);
        add(
            "T",
            vec![
                vec![c(1.0, 0.0), c(0.0, 0.0)],
                vec![c(0.0, 0.0), Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
            ],
        );
        add(
            "CNOT",
            real_matrix(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 0.0],
            ]),
        );
        add(
            "CZ",
            real_matrix(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 0.0, -1.0],
            ]),
        );
        add(
            "SWAP",
            real_matrix(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
            ]),
        );
        let mut toffoli = vec![vec![c(0.0, 0.0); 8]; 8];
        for (i, row) in toffoli.iter_mut().enumerate() {
            let j = if i == 6 { 7 } else if i == 7 { 6 } else { i };
            row[j] = c(1.0, 0.0);
        }
        add("TOFFOLI", toffoli);
        GateLibrary { gates }
    }

    pub fn get(&self, name: &str) -> Result<&UnitaryMatrix, QuantumError> {
        self.gates
            .get(name)
            .ok_or_else(|| QuantumError::UnknownGate(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.gates.contains_key(name)
    }

    /// Arity of a gate (`Bit^n -o Bit^n` has arity `n`).
    pub fn arity(&self, name: &str) -> Result<usize, QuantumError> {
        self.get(name).map(|u| u.arity())
    }

    /// Loads extra gates from a JSON map
    /// `{"NAME": {"arity": n, "matrix": [[[re, im], ...], ...]}}`.
    /// Entries failing the unitarity check are rejected.
    pub fn load_config(&mut self, json: &str) -> Result<(), QuantumError> {
        #[derive(Deserialize)]
        struct GateSpec {
            arity: usize,
            matrix: Vec<Vec<[f64; 2]>>,
        }
        let parsed: BTreeMap<String, GateSpec> = serde_json::from_str(json)
            .map_err(|e| QuantumError::Config(e.to_string()))?;
        for (name, spec) in parsed {
            let rows: Vec<Vec<Complex64>> = spec
                .matrix
                .iter()
                .map(|r| r.iter().map(|&[re, im]| c(re, im)).collect())
                .collect();
            let u = UnitaryMatrix::new(&name, rows)?;
            if u.arity() != spec.arity {
                return Err(QuantumError::Config(format!(
                    "gate {}: declared arity {} but matrix has arity {}",
                    name,
                    spec.arity,
                    u.arity()
                )));
            }
            self.gates.insert(name, u);
        }
        Ok(())
    }
}
