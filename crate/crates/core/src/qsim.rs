//! Exact statevector simulation for the handful of qubits the protocols need.
//!
//! Qubit 0 is the most significant bit of the amplitude index. Bell outcomes
//! are indexed `ψ⁻ = 0, ψ⁺ = 1, φ⁻ = 2, φ⁺ = 3`. States are compared up to a
//! global phase.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RandomStream;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 4;

const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("qubit index {index} out of range for {num_qubits}-qubit state")]
    IndexOutOfRange { index: usize, num_qubits: usize },
    #[error("internal error: state norm {0} deviates from 1")]
    Unnormalized(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Z basis: |0⟩, |1⟩.
    Rectilinear,
    /// X basis: |+⟩, |−⟩.
    Diagonal,
    /// Two-qubit Bell basis.
    Bell,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Rectilinear => "Z",
            Basis::Diagonal => "X",
            Basis::Bell => "Bell",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellState {
    PsiMinus = 0,
    PsiPlus = 1,
    PhiMinus = 2,
    PhiPlus = 3,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PsiMinus,
        BellState::PsiPlus,
        BellState::PhiMinus,
        BellState::PhiPlus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Amplitudes over `|00⟩, |01⟩, |10⟩, |11⟩`.
    fn amplitudes(self) -> [f64; 4] {
        let h = FRAC_1_SQRT_2;
        match self {
            BellState::PsiMinus => [0.0, h, -h, 0.0],
            BellState::PsiPlus => [0.0, h, h, 0.0],
            BellState::PhiMinus => [h, 0.0, 0.0, -h],
            BellState::PhiPlus => [h, 0.0, 0.0, h],
        }
    }
}

/// The four single-qubit operators `U₀ = I`, `U₁ = Z`, `U₂ = X`,
/// `U₃ = |0⟩⟨1| − |1⟩⟨0|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliCode(u8);

impl PauliCode {
    pub fn new(k: u8) -> Result<Self, QsimError> {
        if k < 4 {
            Ok(Self(k))
        } else {
            Err(QsimError::InvalidArgument(format!("Pauli code {k} not in 0..=3")))
        }
    }

    pub fn all() -> impl Iterator<Item = PauliCode> {
        (0..4).map(PauliCode)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Row-major matrix; every entry is 0 or ±1.
    pub fn matrix(self) -> [[i8; 2]; 2] {
        match self.0 {
            0 => [[1, 0], [0, 1]],
            1 => [[1, 0], [0, -1]],
            2 => [[0, 1], [1, 0]],
            _ => [[0, 1], [-1, 0]],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Computational basis state `|index⟩`.
    pub fn basis_state(num_qubits: usize, index: usize) -> Result<Self, QsimError> {
        check_width(num_qubits)?;
        if index >= 1 << num_qubits {
            return Err(QsimError::InvalidArgument(format!(
                "basis index {index} exceeds {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, QsimError> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QsimError::InvalidArgument(format!(
                "amplitude vector length {len} is not 2^n with n ≥ 1"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_width(num_qubits)?;
        let state = Self {
            num_qubits,
            amplitudes,
        };
        state.check_norm()?;
        Ok(state)
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self, QsimError> {
        Self::from_amplitudes(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_norm(&self) -> Result<(), QsimError> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            Err(QsimError::Unnormalized(n))
        } else {
            Ok(())
        }
    }

    fn check_index(&self, index: usize) -> Result<(), QsimError> {
        if index < self.num_qubits {
            Ok(())
        } else {
            Err(QsimError::IndexOutOfRange {
                index,
                num_qubits: self.num_qubits,
            })
        }
    }

    fn shift(&self, qubit: usize) -> usize {
        self.num_qubits - 1 - qubit
    }

    /// `self ⊗ other`; qubits of `self` come first.
    pub fn tensor(&self, other: &PureState) -> Result<PureState, QsimError> {
        let num_qubits = self.num_qubits + other.num_qubits;
        check_width(num_qubits)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(PureState {
            num_qubits,
            amplitudes,
        })
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        if self.num_qubits != other.num_qubits {
            return 0.0;
        }
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Equality up to a global phase.
    pub fn approx_eq_up_to_phase(&self, other: &PureState, tol: f64) -> bool {
        self.num_qubits == other.num_qubits && (1.0 - self.fidelity(other)).abs() <= tol
    }

    fn apply_matrix(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let mask = 1 << self.shift(qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_hadamard(&mut self, qubit: usize) {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        self.apply_matrix(qubit, [[h, h], [h, -h]]);
    }

    /// Probability that `qubit` reads 0 in the Z basis.
    fn prob_zero(&self, qubit: usize) -> f64 {
        let mask = 1 << self.shift(qubit);
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn collapse_z(&mut self, qubit: usize, value: u8, prob: f64) {
        let mask = 1 << self.shift(qubit);
        let scale = 1.0 / prob.sqrt();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if ((i & mask != 0) as u8) == value {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
    }
}

fn check_width(num_qubits: usize) -> Result<(), QsimError> {
    if (1..=MAX_QUBITS).contains(&num_qubits) {
        Ok(())
    } else {
        Err(QsimError::InvalidArgument(format!(
            "{num_qubits} qubits outside supported range 1..={MAX_QUBITS}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOutcome {
    /// 0/1 for single-qubit bases, the Bell index for Bell measurements.
    pub value: u8,
    /// Whole register after collapse; re-measuring it reproduces `value`.
    pub post_state: PureState,
    /// Unmeasured qubits after a Bell measurement, when any remain.
    pub residual: Option<PureState>,
}

pub fn prepare_bb84(bit: u8, basis: Basis) -> Result<PureState, QsimError> {
    if bit > 1 {
        return Err(QsimError::InvalidArgument(format!("bit {bit} is not 0 or 1")));
    }
    let h = FRAC_1_SQRT_2;
    match basis {
        Basis::Rectilinear => PureState::basis_state(1, bit as usize),
        Basis::Diagonal if bit == 0 => PureState::from_real(&[h, h]),
        Basis::Diagonal => PureState::from_real(&[h, -h]),
        Basis::Bell => Err(QsimError::InvalidArgument(
            "BB84 states use the rectilinear or diagonal basis".into(),
        )),
    }
}

pub fn prepare_bell(kind: BellState) -> PureState {
    PureState::from_real(&kind.amplitudes()).expect("Bell amplitudes are normalized")
}

pub fn apply_pauli(
    state: &PureState,
    qubit_index: usize,
    code: PauliCode,
) -> Result<PureState, QsimError> {
    state.check_index(qubit_index)?;
    let m = code.matrix();
    let c = |v: i8| Complex64::new(f64::from(v), 0.0);
    let mut out = state.clone();
    out.apply_matrix(qubit_index, [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]]);
    Ok(out)
}

/// Projective single-qubit measurement sampled by the Born rule.
pub fn measure(
    state: &PureState,
    qubit_index: usize,
    basis: Basis,
    randomness: &mut RandomStream,
) -> Result<MeasurementOutcome, QsimError> {
    if basis == Basis::Bell {
        return Err(QsimError::InvalidArgument(
            "Bell basis needs a two-qubit measurement".into(),
        ));
    }
    state.check_index(qubit_index)?;
    state.check_norm()?;
    let mut work = state.clone();
    if basis == Basis::Diagonal {
        work.apply_hadamard(qubit_index);
    }
    let p0 = work.prob_zero(qubit_index);
    let value = if randomness.unit() < p0 { 0 } else { 1 };
    let prob = if value == 0 { p0 } else { 1.0 - p0 };
    work.collapse_z(qubit_index, value, prob);
    if basis == Basis::Diagonal {
        work.apply_hadamard(qubit_index);
    }
    Ok(MeasurementOutcome {
        value,
        post_state: work,
        residual: None,
    })
}

/// Projection of qubits `(i, j)` onto one Bell state.
#[derive(Clone, Debug)]
pub struct BellProjection {
    pub probability: f64,
    /// Normalized state of the other qubits; `None` for a two-qubit register
    /// or a zero-probability outcome.
    pub residual: Option<PureState>,
}

fn check_pair(state: &PureState, i: usize, j: usize) -> Result<(), QsimError> {
    state.check_index(i)?;
    state.check_index(j)?;
    if i == j {
        return Err(QsimError::InvalidArgument(format!(
            "Bell measurement needs two distinct qubits, got {i} twice"
        )));
    }
    Ok(())
}

/// Full index for rest-bits `rest` (over the other qubits in order) with
/// qubit `i` = `xi`, qubit `j` = `xj`.
fn compose_index(state: &PureState, i: usize, j: usize, rest: usize, xi: usize, xj: usize) -> usize {
    let n = state.num_qubits;
    let rest_qubits = n - 2;
    let mut idx = 0;
    let mut r = 0;
    for q in 0..n {
        let bit = if q == i {
            xi
        } else if q == j {
            xj
        } else {
            let b = (rest >> (rest_qubits - 1 - r)) & 1;
            r += 1;
            b
        };
        idx = (idx << 1) | bit;
    }
    idx
}

fn unnormalized_residual(state: &PureState, i: usize, j: usize, bell: BellState) -> Vec<Complex64> {
    let rest_dim = 1usize << (state.num_qubits - 2);
    let b = bell.amplitudes();
    (0..rest_dim)
        .map(|rest| {
            (0..4)
                .map(|x| {
                    let idx = compose_index(state, i, j, rest, x >> 1, x & 1);
                    state.amplitudes[idx] * b[x]
                })
                .sum()
        })
        .collect()
}

/// Deterministic Bell projection used both by sampling and by decode-table
/// construction.
pub fn bell_project(
    state: &PureState,
    i: usize,
    j: usize,
    outcome: BellState,
) -> Result<BellProjection, QsimError> {
    check_pair(state, i, j)?;
    let raw = unnormalized_residual(state, i, j, outcome);
    let probability: f64 = raw.iter().map(|a| a.norm_sqr()).sum();
    let residual = if state.num_qubits > 2 && probability > 1e-15 {
        let scale = 1.0 / probability.sqrt();
        Some(PureState {
            num_qubits: state.num_qubits - 2,
            amplitudes: raw.into_iter().map(|a| a * scale).collect(),
        })
    } else {
        None
    };
    Ok(BellProjection {
        probability,
        residual,
    })
}

/// Bell measurement of qubits `(i, j)`; `i` is the first qubit of the pair.
pub fn bell_measure(
    state: &PureState,
    i: usize,
    j: usize,
    randomness: &mut RandomStream,
) -> Result<MeasurementOutcome, QsimError> {
    if state.num_qubits < 2 {
        return Err(QsimError::InvalidArgument(
            "Bell measurement needs at least two qubits".into(),
        ));
    }
    check_pair(state, i, j)?;
    state.check_norm()?;
    let projections = BellState::ALL
        .iter()
        .map(|&b| bell_project(state, i, j, b))
        .collect::<Result<Vec<_>, _>>()?;
    let u = randomness.unit();
    let mut acc = 0.0;
    let mut chosen = None;
    for (k, p) in projections.iter().enumerate() {
        acc += p.probability;
        if u < acc && p.probability > 0.0 {
            chosen = Some(k);
            break;
        }
    }
    // Rounding can leave `u` just above the accumulated total.
    let k = chosen.unwrap_or_else(|| {
        projections
            .iter()
            .rposition(|p| p.probability > 1e-15)
            .expect("normalized state has a nonzero Bell component")
    });
    let bell = BellState::ALL[k];
    let residual = projections[k].residual.clone();
    let b = bell.amplitudes();
    let post_state = match &residual {
        None => prepare_bell(bell).relabel_pair(state.num_qubits, i, j),
        Some(rest) => {
            let mut amps = vec![Complex64::new(0.0, 0.0); state.amplitudes.len()];
            for (r, ra) in rest.amplitudes.iter().enumerate() {
                for (x, bx) in b.iter().enumerate() {
                    amps[compose_index(state, i, j, r, x >> 1, x & 1)] = ra * bx;
                }
            }
            PureState {
                num_qubits: state.num_qubits,
                amplitudes: amps,
            }
        }
    };
    Ok(MeasurementOutcome {
        value: k as u8,
        post_state,
        residual,
    })
}

impl PureState {
    /// Places a two-qubit state on qubits `(i, j)` of a two-qubit register.
    fn relabel_pair(self, num_qubits: usize, i: usize, j: usize) -> PureState {
        debug_assert_eq!(num_qubits, 2);
        if i < j {
            self
        } else {
            let a = &self.amplitudes;
            PureState {
                num_qubits: 2,
                amplitudes: vec![a[0], a[2], a[1], a[3]],
            }
        }
    }
}

/// Index of the Bell state `state` equals up to phase, if any.
pub fn identify_bell(state: &PureState) -> Option<BellState> {
    if state.num_qubits != 2 {
        return None;
    }
    BellState::ALL
        .iter()
        .copied()
        .find(|&b| prepare_bell(b).approx_eq_up_to_phase(state, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, re: f64) -> bool {
        (a.re - re).abs() < 1e-12 && a.im.abs() < 1e-12
    }

    #[test]
    fn bb84_preparations() {
        let h = FRAC_1_SQRT_2;
        let s = prepare_bb84(0, Basis::Rectilinear).unwrap();
        assert!(close(s.amplitudes()[0], 1.0) && close(s.amplitudes()[1], 0.0));
        let s = prepare_bb84(1, Basis::Rectilinear).unwrap();
        assert!(close(s.amplitudes()[0], 0.0) && close(s.amplitudes()[1], 1.0));
        let s = prepare_bb84(0, Basis::Diagonal).unwrap();
        assert!(close(s.amplitudes()[0], h) && close(s.amplitudes()[1], h));
        let s = prepare_bb84(1, Basis::Diagonal).unwrap();
        assert!(close(s.amplitudes()[0], h) && close(s.amplitudes()[1], -h));
        assert!(matches!(
            prepare_bb84(0, Basis::Bell),
            Err(QsimError::InvalidArgument(_))
        ));
    }

    #[test]
    fn bell_preparations() {
        let h = FRAC_1_SQRT_2;
        let s = prepare_bell(BellState::PsiMinus);
        let expect = [0.0, h, -h, 0.0];
        for (a, e) in s.amplitudes().iter().zip(expect) {
            assert!(close(*a, e));
        }
        let s = prepare_bell(BellState::PhiPlus);
        let expect = [h, 0.0, 0.0, h];
        for (a, e) in s.amplitudes().iter().zip(expect) {
            assert!(close(*a, e));
        }
        for b in BellState::ALL {
            assert!((prepare_bell(b).norm_sqr() - 1.0).abs() < 1e-12);
            assert_eq!(identify_bell(&prepare_bell(b)), Some(b));
        }
    }

    #[test]
    fn pauli_actions() {
        let zero = prepare_bb84(0, Basis::Rectilinear).unwrap();
        let plus = prepare_bb84(0, Basis::Diagonal).unwrap();
        for s in [&zero, &plus] {
            assert_eq!(&apply_pauli(s, 0, PauliCode::new(0).unwrap()).unwrap(), s);
        }
        let x = apply_pauli(&zero, 0, PauliCode::new(2).unwrap()).unwrap();
        assert!(close(x.amplitudes()[0], 0.0) && close(x.amplitudes()[1], 1.0));
        // U₃|0⟩ = −|1⟩, sign kept exactly.
        let u3 = apply_pauli(&zero, 0, PauliCode::new(3).unwrap()).unwrap();
        assert!(close(u3.amplitudes()[0], 0.0) && close(u3.amplitudes()[1], -1.0));
        assert!(matches!(
            apply_pauli(&zero, 1, PauliCode::new(1).unwrap()),
            Err(QsimError::IndexOutOfRange { .. })
        ));
        assert!(PauliCode::new(4).is_err());
    }

    #[test]
    fn pauli_codes_are_unitary_exactly() {
        for code in PauliCode::all() {
            let m = code.matrix();
            for r in 0..2 {
                for c in 0..2 {
                    // (U†U)[r][c] = Σ_k U[k][r] U[k][c] for real U
                    let v: i8 = (0..2).map(|k| m[k][r] * m[k][c]).sum();
                    assert_eq!(v, i8::from(r == c), "code {}", code.value());
                }
            }
        }
    }

    #[test]
    fn eigenstate_measurement_is_certain() {
        let mut rng = RandomStream::new(1, "t");
        let zero = prepare_bb84(0, Basis::Rectilinear).unwrap();
        let minus = prepare_bb84(1, Basis::Diagonal).unwrap();
        for _ in 0..100 {
            assert_eq!(measure(&zero, 0, Basis::Rectilinear, &mut rng).unwrap().value, 0);
            assert_eq!(measure(&minus, 0, Basis::Diagonal, &mut rng).unwrap().value, 1);
        }
    }

    #[test]
    fn measure_rejects_bad_input() {
        let mut rng = RandomStream::new(1, "t");
        let zero = prepare_bb84(0, Basis::Rectilinear).unwrap();
        assert!(measure(&zero, 0, Basis::Bell, &mut rng).is_err());
        assert!(measure(&zero, 3, Basis::Rectilinear, &mut rng).is_err());
        let skewed = PureState {
            num_qubits: 1,
            amplitudes: vec![Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)],
        };
        assert!(matches!(
            measure(&skewed, 0, Basis::Rectilinear, &mut rng),
            Err(QsimError::Unnormalized(_))
        ));
        assert!(PureState::from_real(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn singlet_same_basis_outcomes_always_differ() {
        let mut rng = RandomStream::new(2, "t");
        let singlet = prepare_bell(BellState::PsiMinus);
        let mut seen = [[false; 2]; 2];
        for basis in [Basis::Rectilinear, Basis::Diagonal] {
            for _ in 0..200 {
                let first = measure(&singlet, 0, basis, &mut rng).unwrap();
                let second = measure(&first.post_state, 1, basis, &mut rng).unwrap();
                assert_ne!(first.value, second.value);
                seen[(basis == Basis::Diagonal) as usize][first.value as usize] = true;
            }
        }
        assert!(seen.iter().flatten().all(|&s| s), "both outcomes exercised in both bases");
    }

    #[test]
    fn bell_measure_errors() {
        let mut rng = RandomStream::new(2, "t");
        let pair = prepare_bell(BellState::PsiMinus);
        assert!(bell_measure(&pair, 0, 0, &mut rng).is_err());
        assert!(bell_measure(&pair, 0, 2, &mut rng).is_err());
        let single = prepare_bb84(0, Basis::Rectilinear).unwrap();
        assert!(bell_measure(&single, 0, 1, &mut rng).is_err());
    }

    #[test]
    fn bell_measure_on_bell_state_is_certain() {
        let mut rng = RandomStream::new(3, "t");
        for b in BellState::ALL {
            let out = bell_measure(&prepare_bell(b), 0, 1, &mut rng).unwrap();
            assert_eq!(out.value as usize, b.index());
            assert!(out.residual.is_none());
        }
    }

    #[test]
    fn bell_measure_reversed_pair_on_two_qubits() {
        let mut rng = RandomStream::new(3, "t");
        // ψ⁻ on (1,0) is −ψ⁻ on (0,1): same outcome, same state up to phase.
        let out = bell_measure(&prepare_bell(BellState::PsiMinus), 1, 0, &mut rng).unwrap();
        assert_eq!(out.value, 0);
        assert!(out
            .post_state
            .approx_eq_up_to_phase(&prepare_bell(BellState::PsiMinus), 1e-12));
    }
}
