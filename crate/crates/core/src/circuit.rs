//! Qubit circuits: exact state-vector execution, depolarizing noise by
//! Monte Carlo Pauli sampling, and deterministic fault injection.
//!
//! Qubit `q` is bit `q` of the amplitude index.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{StateVector, C64, I, ONE, ZERO};

/// Purity threshold below which a noiseless reset is refused.
pub const RESET_PURITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    H,
    X,
    Y,
    Z,
    S,
    Cnot,
    Cz,
    Ccz,
    Swap,
    Reset0,
    ResetPlus,
}

impl Kind {
    pub fn arity(self) -> usize {
        match self {
            Kind::Cnot | Kind::Cz | Kind::Swap => 2,
            Kind::Ccz => 3,
            _ => 1,
        }
    }

    pub fn is_reset(self) -> bool {
        matches!(self, Kind::Reset0 | Kind::ResetPlus)
    }

    pub fn token(self) -> &'static str {
        match self {
            Kind::H => "H",
            Kind::X => "X",
            Kind::Y => "Y",
            Kind::Z => "Z",
            Kind::S => "S",
            Kind::Cnot => "CNOT",
            Kind::Cz => "CZ",
            Kind::Ccz => "CCZ",
            Kind::Swap => "SWAP",
            Kind::Reset0 => "RESET0",
            Kind::ResetPlus => "RESETplus",
        }
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "H" => Kind::H,
            "X" => Kind::X,
            "Y" => Kind::Y,
            "Z" => Kind::Z,
            "S" => Kind::S,
            "CNOT" => Kind::Cnot,
            "CZ" => Kind::Cz,
            "CCZ" => Kind::Ccz,
            "SWAP" => Kind::Swap,
            "RESET0" => Kind::Reset0,
            "RESETplus" => Kind::ResetPlus,
            _ => return Err(format!("unknown gate kind `{s}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseClass {
    #[default]
    None,
    TwoNn,
    TwoNnn,
    Three,
}

impl NoiseClass {
    pub fn token(self) -> &'static str {
        match self {
            NoiseClass::None => "none",
            NoiseClass::TwoNn => "two_nn",
            NoiseClass::TwoNnn => "two_nnn",
            NoiseClass::Three => "three",
        }
    }
}

impl FromStr for NoiseClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "none" => NoiseClass::None,
            "two_nn" => NoiseClass::TwoNn,
            "two_nnn" => NoiseClass::TwoNnn,
            "three" => NoiseClass::Three,
            _ => return Err(format!("unknown noise class `{s}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: Kind,
    pub qubits: Vec<usize>,
    pub noise: NoiseClass,
}

impl GateOp {
    pub fn new(kind: Kind, qubits: &[usize]) -> Self {
        Self {
            kind,
            qubits: qubits.to_vec(),
            noise: NoiseClass::None,
        }
    }

    pub fn noisy(kind: Kind, qubits: &[usize], noise: NoiseClass) -> Self {
        Self {
            kind,
            qubits: qubits.to_vec(),
            noise,
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.token())?;
        for q in &self.qubits {
            write!(f, " {q}")?;
        }
        write!(f, " {}", self.noise.token())
    }
}

/// Single-qubit Pauli.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn kind(self) -> Option<Kind> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(Kind::X),
            Pauli::Y => Some(Kind::Y),
            Pauli::Z => Some(Kind::Z),
        }
    }
}

/// Nontrivial Pauli string number `k ∈ 1..4^n` on `n` qubits, first qubit
/// in the lowest base-4 digit.
pub fn pauli_string(k: usize, n: usize) -> Vec<Pauli> {
    (0..n).map(|i| Pauli::ALL[(k >> (2 * i)) & 3]).collect()
}

/// A Pauli error inserted right after gate `op`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultLocation {
    pub op: usize,
    pub pauli: Vec<Pauli>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ops: Vec<GateOp>,
    /// One name per qubit.
    pub labels: Vec<String>,
    /// Qubits allowed to be reset.
    pub ancilla: Vec<bool>,
}

impl Circuit {
    /// Circuit whose qubits are all resettable, labelled `q0, q1, ...`.
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
            labels: (0..n_qubits).map(|q| format!("q{q}")).collect(),
            ancilla: vec![true; n_qubits],
        }
    }

    pub fn with_roles(labels: Vec<String>, ancilla: Vec<bool>) -> Result<Self> {
        if labels.len() != ancilla.len() {
            return Err(Error::Circuit("labels and roles differ in length".into()));
        }
        if labels.iter().any(|l| l.is_empty() || l.contains(char::is_whitespace) || l.ends_with('*')) {
            return Err(Error::Circuit("labels must be non-empty words without a trailing `*`".into()));
        }
        Ok(Self {
            n_qubits: labels.len(),
            ops: Vec::new(),
            labels,
            ancilla,
        })
    }

    pub fn check_op(&self, op: &GateOp) -> Result<()> {
        if op.qubits.len() != op.kind.arity() {
            return Err(Error::Circuit(format!("{op}: arity {} expected", op.kind.arity())));
        }
        for (i, &q) in op.qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::Circuit(format!("{op}: qubit {q} out of range")));
            }
            if op.qubits[..i].contains(&q) {
                return Err(Error::Circuit(format!("{op}: qubit {q} repeated")));
            }
        }
        if op.kind.is_reset() && !self.ancilla[op.qubits[0]] {
            return Err(Error::Circuit(format!("{op}: reset on data qubit {}", self.labels[op.qubits[0]])));
        }
        if op.kind.arity() == 1 && op.noise != NoiseClass::None {
            return Err(Error::Circuit(format!("{op}: single-qubit operations are noiseless")));
        }
        Ok(())
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        self.check_op(&op)?;
        self.ops.push(op);
        Ok(())
    }

    pub fn gate(&mut self, kind: Kind, qubits: &[usize]) -> Result<()> {
        self.push(GateOp::new(kind, qubits))
    }

    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Circuit("appending circuits of different width".into()));
        }
        for op in &other.ops {
            self.push(op.clone())?;
        }
        Ok(())
    }

    pub fn count(&self, kind: Kind) -> usize {
        self.ops.iter().filter(|o| o.kind == kind).count()
    }

    pub fn noisy_ops(&self) -> impl Iterator<Item = (usize, &GateOp)> {
        self.ops.iter().enumerate().filter(|(_, o)| o.noise != NoiseClass::None)
    }

    /// Line-oriented text: a `# qubits` header (ancillas marked `*`), then
    /// one `KIND q0 [q1 [q2]] NOISECLASS` line per gate.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# qubits");
        for (l, &a) in self.labels.iter().zip(&self.ancilla) {
            s.push(' ');
            s.push_str(l);
            if a {
                s.push('*');
            }
        }
        s.push('\n');
        for op in &self.ops {
            s.push_str(&op.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        // other `#` lines before the header are free-form comments
        let mut lines = text
            .lines()
            .enumerate()
            .skip_while(|(_, l)| l.starts_with('#') && !l.starts_with("# qubits"));
        let (h, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let names = header.strip_prefix("# qubits").ok_or(Error::Parse {
            line: h + 1,
            msg: "missing `# qubits` header".into(),
        })?;
        let (labels, ancilla): (Vec<String>, Vec<bool>) = names
            .split_whitespace()
            .map(|w| match w.strip_suffix('*') {
                Some(l) => (l.to_string(), true),
                None => (w.to_string(), false),
            })
            .unzip();
        let mut c = Circuit::with_roles(labels, ancilla).map_err(|e| Error::Parse {
            line: h + 1,
            msg: e.to_string(),
        })?;
        for (i, line) in lines {
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.len() < 2 {
                return Err(err("expected `KIND qubits.. NOISECLASS`".into()));
            }
            let kind: Kind = words[0].parse().map_err(err)?;
            let noise: NoiseClass = words[words.len() - 1].parse().map_err(err)?;
            let qubits = words[1..words.len() - 1]
                .iter()
                .map(|w| w.parse::<usize>().map_err(|e| err(format!("qubit `{w}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            c.push(GateOp::noisy(kind, &qubits, noise))
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(c)
    }

    /// Copy with fault `f` inserted after its gate and all noise removed.
    pub fn inject(&self, f: &FaultLocation) -> Result<Circuit> {
        let op = self
            .ops
            .get(f.op)
            .ok_or_else(|| Error::Circuit(format!("fault at op {} of {}", f.op, self.ops.len())))?;
        if f.pauli.len() != op.qubits.len() || f.pauli.iter().all(|p| *p == Pauli::I) {
            return Err(Error::Circuit("fault must be a nontrivial Pauli on the gate's qubits".into()));
        }
        let mut out = Circuit {
            ops: Vec::with_capacity(self.ops.len() + 3),
            ..self.clone()
        };
        for (i, op) in self.ops.iter().enumerate() {
            out.ops.push(GateOp::new(op.kind, &op.qubits));
            if i == f.op {
                for (&q, p) in op.qubits.iter().zip(&f.pauli) {
                    if let Some(k) = p.kind() {
                        out.ops.push(GateOp::new(k, &[q]));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Every (noisy gate, nontrivial Pauli) pair.
    pub fn enumerate_faults(&self) -> Vec<FaultLocation> {
        let mut out = Vec::new();
        for (i, op) in self.noisy_ops() {
            let n = op.qubits.len();
            for k in 1..(1usize << (2 * n)) {
                out.push(FaultLocation {
                    op: i,
                    pauli: pauli_string(k, n),
                });
            }
        }
        out
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.dims().len() != self.n_qubits || state.dims().iter().any(|&d| d != 2) {
            return Err(Error::RegisterMismatch {
                left: state.dims().to_vec(),
                right: vec![2; self.n_qubits],
            });
        }
        Ok(())
    }

    /// Noiseless execution. Resets require the qubit to be unentangled.
    pub fn run(&self, initial: &StateVector) -> Result<StateVector> {
        self.check_state(initial)?;
        let mut amps = initial.amps().to_vec();
        for op in &self.ops {
            Self::step(&mut amps, op)?;
        }
        StateVector::new(initial.dims().to_vec(), amps)
    }

    /// Noiseless execution branching over reset outcomes; returns
    /// normalised branches with their Born probabilities.
    pub fn run_branching(&self, initial: &StateVector) -> Result<Vec<(f64, StateVector)>> {
        self.check_state(initial)?;
        self.branch_from(initial.amps().to_vec(), 0)
            .into_iter()
            .map(|(p, a)| Ok((p, StateVector::new(initial.dims().to_vec(), a)?)))
            .collect()
    }

    /// Branching execution of `ops[start..]` on raw amplitudes.
    pub(crate) fn branch_from(&self, amps: Vec<C64>, start: usize) -> Vec<(f64, Vec<C64>)> {
        let mut branches = vec![(1.0, amps)];
        for op in &self.ops[start..] {
            if op.kind.is_reset() {
                let q = op.qubits[0];
                let mut next = Vec::with_capacity(branches.len() * 2);
                for (p, amps) in branches {
                    let p1 = prob_one(&amps, q);
                    if p1 <= 1e-14 {
                        let mut b = amps;
                        collapse(&mut b, q, 0, 1.0 - p1);
                        reinit(&mut b, q, 0, op.kind);
                        next.push((p, b));
                        continue;
                    }
                    for (outcome, po) in [(0usize, 1.0 - p1), (1, p1)] {
                        if po > 1e-14 {
                            let mut b = amps.clone();
                            collapse(&mut b, q, outcome, po);
                            reinit(&mut b, q, outcome, op.kind);
                            next.push((p * po, b));
                        }
                    }
                }
                branches = next;
            } else {
                for (_, amps) in branches.iter_mut() {
                    apply_unitary(amps, op);
                }
            }
        }
        branches
    }

    /// Apply one operation noiselessly (resets must act on product qubits).
    pub(crate) fn step(amps: &mut [C64], op: &GateOp) -> Result<()> {
        if op.kind.is_reset() {
            reset_product(amps, op.qubits[0], op.kind)
        } else {
            apply_unitary(amps, op);
            Ok(())
        }
    }

    /// One Monte Carlo trajectory under `noise`; resets are sampled.
    pub fn run_noisy<R: Rng>(&self, initial: &StateVector, noise: &NoiseModel, rng: &mut R) -> Result<StateVector> {
        self.check_state(initial)?;
        noise.validate()?;
        let mut amps = initial.amps().to_vec();
        for op in &self.ops {
            self.step_sampled(&mut amps, op, rng);
            let p = noise.probability(op.noise);
            if p > 0.0 && rng.gen::<f64>() < p {
                let n = op.qubits.len();
                let k = rng.gen_range(1..(1usize << (2 * n)));
                apply_pauli(&mut amps, &op.qubits, &pauli_string(k, n));
            }
        }
        StateVector::new(initial.dims().to_vec(), amps)
    }

    /// Execute with the listed faults and Born-sampled resets, no other noise.
    pub fn run_with_faults<R: Rng>(&self, initial: &StateVector, faults: &[FaultLocation], rng: &mut R) -> Result<StateVector> {
        self.check_state(initial)?;
        let mut amps = initial.amps().to_vec();
        for (i, op) in self.ops.iter().enumerate() {
            self.step_sampled(&mut amps, op, rng);
            for f in faults.iter().filter(|f| f.op == i) {
                apply_pauli(&mut amps, &op.qubits, &f.pauli);
            }
        }
        StateVector::new(initial.dims().to_vec(), amps)
    }

    fn step_sampled<R: Rng>(&self, amps: &mut [C64], op: &GateOp, rng: &mut R) {
        if op.kind.is_reset() {
            let q = op.qubits[0];
            let p1 = prob_one(amps, q);
            let outcome = usize::from(rng.gen::<f64>() < p1);
            let po = if outcome == 1 { p1 } else { 1.0 - p1 };
            collapse(amps, q, outcome, po);
            reinit(amps, q, outcome, op.kind);
        } else {
            apply_unitary(amps, op);
        }
    }
}

/// Depolarizing probabilities per noise class with a global scale `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p2_nn: f64,
    pub p2_nnn: f64,
    pub p3: f64,
    pub lambda: f64,
}

impl NoiseModel {
    pub fn new(p2_nn: f64, p2_nnn: f64, p3: f64) -> Self {
        Self {
            p2_nn,
            p2_nnn,
            p3,
            lambda: 1.0,
        }
    }

    pub fn scaled(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda {} outside (0, 1]", self.lambda)));
        }
        for p in [self.p2_nn, self.p2_nnn, self.p3] {
            if !(0.0..=1.0).contains(&(p * self.lambda)) {
                return Err(Error::InvalidParameter(format!("error probability {p} out of range")));
            }
        }
        Ok(())
    }

    pub fn probability(&self, class: NoiseClass) -> f64 {
        self.lambda
            * match class {
                NoiseClass::None => 0.0,
                NoiseClass::TwoNn => self.p2_nn,
                NoiseClass::TwoNnn => self.p2_nnn,
                NoiseClass::Three => self.p3,
            }
    }
}

/// `p = (2^n + 1) / 2^n · (1 - F)`.
pub fn fidelity_to_error_prob(fidelity: f64, n: usize) -> Result<f64> {
    if !(fidelity > 0.0 && fidelity <= 1.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("fidelity {fidelity} or arity {n}")));
    }
    let d = (1usize << n) as f64;
    Ok((d + 1.0) / d * (1.0 - fidelity))
}

// ---- state-vector kernels ----

fn apply_1q(amps: &mut [C64], q: usize, m: [[C64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let a = amps[i];
            let b = amps[i | bit];
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

pub(crate) fn apply_x(amps: &mut [C64], q: usize) {
    let bit = 1usize << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            amps.swap(i, i | bit);
        }
    }
}

pub(crate) fn apply_z(amps: &mut [C64], q: usize) {
    let bit = 1usize << q;
    for (i, a) in amps.iter_mut().enumerate() {
        if i & bit != 0 {
            *a = -*a;
        }
    }
}

fn apply_y(amps: &mut [C64], q: usize) {
    // Y = i X Z
    apply_z(amps, q);
    apply_x(amps, q);
    amps.iter_mut().for_each(|a| *a *= I);
}

pub(crate) fn apply_h(amps: &mut [C64], q: usize) {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    apply_1q(amps, q, [[h, h], [h, -h]]);
}

pub(crate) fn apply_pauli(amps: &mut [C64], qubits: &[usize], pauli: &[Pauli]) {
    for (&q, p) in qubits.iter().zip(pauli) {
        match p {
            Pauli::I => {}
            Pauli::X => apply_x(amps, q),
            Pauli::Y => apply_y(amps, q),
            Pauli::Z => apply_z(amps, q),
        }
    }
}

pub(crate) fn apply_unitary(amps: &mut [C64], op: &GateOp) {
    let q = &op.qubits;
    match op.kind {
        Kind::H => apply_h(amps, q[0]),
        Kind::X => apply_x(amps, q[0]),
        Kind::Y => apply_y(amps, q[0]),
        Kind::Z => apply_z(amps, q[0]),
        Kind::S => apply_1q(amps, q[0], [[ONE, ZERO], [ZERO, I]]),
        Kind::Cnot => {
            let (c, t) = (1usize << q[0], 1usize << q[1]);
            for i in 0..amps.len() {
                if i & c != 0 && i & t == 0 {
                    amps.swap(i, i | t);
                }
            }
        }
        Kind::Cz | Kind::Ccz => {
            let mask = q.iter().fold(0usize, |m, &b| m | (1 << b));
            for (i, a) in amps.iter_mut().enumerate() {
                if i & mask == mask {
                    *a = -*a;
                }
            }
        }
        Kind::Swap => {
            let (a, b) = (1usize << q[0], 1usize << q[1]);
            for i in 0..amps.len() {
                if i & a != 0 && i & b == 0 {
                    amps.swap(i, i ^ a ^ b);
                }
            }
        }
        Kind::Reset0 | Kind::ResetPlus => unreachable!("resets are not unitary"),
    }
}

pub(crate) fn prob_one(amps: &[C64], q: usize) -> f64 {
    let bit = 1usize << q;
    amps.iter()
        .enumerate()
        .filter(|(i, _)| i & bit != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

fn collapse(amps: &mut [C64], q: usize, outcome: usize, prob: f64) {
    let bit = 1usize << q;
    let s = 1.0 / prob.sqrt();
    for (i, a) in amps.iter_mut().enumerate() {
        if usize::from(i & bit != 0) == outcome {
            *a *= s;
        } else {
            *a = ZERO;
        }
    }
}

fn reinit(amps: &mut [C64], q: usize, outcome: usize, kind: Kind) {
    if outcome == 1 {
        apply_x(amps, q);
    }
    if kind == Kind::ResetPlus {
        apply_h(amps, q);
    }
}

/// Purity of qubit `q`'s reduced state.
pub fn qubit_purity(amps: &[C64], q: usize) -> f64 {
    let bit = 1usize << q;
    let (mut p0, mut p1, mut c) = (0.0, 0.0, ZERO);
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a, b) = (amps[i], amps[i | bit]);
            p0 += a.norm_sqr();
            p1 += b.norm_sqr();
            c += a * b.conj();
        }
    }
    let n = p0 + p1;
    (p0 * p0 + p1 * p1 + 2.0 * c.norm_sqr()) / (n * n)
}

fn reset_product(amps: &mut [C64], q: usize, kind: Kind) -> Result<()> {
    let purity = qubit_purity(amps, q);
    if purity < 1.0 - RESET_PURITY_TOL {
        return Err(Error::EntangledReset { qubit: q, purity });
    }
    let p1 = prob_one(amps, q);
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    // both branches carry the same state of the rest; keep the heavier one
    let outcome = usize::from(p1 > norm - p1);
    let po = if outcome == 1 { p1 } else { norm - p1 };
    collapse(amps, q, outcome, po / norm);
    reinit(amps, q, outcome, kind);
    Ok(())
}

/// Dense density matrix on a few qubits, used as an exact reference.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub n_qubits: usize,
    /// Row-major `2^n × 2^n`.
    pub rho: Vec<C64>,
}

impl DensityMatrix {
    pub fn pure(state: &StateVector) -> Self {
        let a = state.amps();
        let d = a.len();
        let mut rho = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                rho[r * d + c] = a[r] * a[c].conj();
            }
        }
        Self {
            n_qubits: state.dims().len(),
            rho,
        }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        Self {
            n_qubits,
            rho: vec![ZERO; d * d],
        }
    }

    fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn add_pure(&mut self, state: &StateVector, weight: f64) {
        let a = state.amps();
        let d = self.dim();
        for r in 0..d {
            for c in 0..d {
                self.rho[r * d + c] += a[r] * a[c].conj() * weight;
            }
        }
    }

    /// `ρ → f(ρ)` where `f` acts as `ψ → Uψ` on kets; applied as `U ρ U†`.
    fn conjugate_by(&mut self, f: impl Fn(&mut [C64])) {
        let d = self.dim();
        // columns of ρ, then rows via the adjoint
        let mut m = vec![ZERO; d * d];
        let mut col = vec![ZERO; d];
        for c in 0..d {
            for r in 0..d {
                col[r] = self.rho[r * d + c];
            }
            f(&mut col);
            for r in 0..d {
                m[r * d + c] = col[r];
            }
        }
        // (U M†)† = M U†
        for r in 0..d {
            for c in 0..d {
                col[c] = m[r * d + c].conj();
            }
            f(&mut col);
            for c in 0..d {
                self.rho[r * d + c] = col[c].conj();
            }
        }
    }

    pub fn apply(&mut self, op: &GateOp) {
        assert!(!op.kind.is_reset(), "density reference handles unitaries only");
        self.conjugate_by(|v| apply_unitary(v, op));
    }

    /// Depolarizing channel `(1-p)ρ + p/(4^n-1) Σ P ρ P` on `qubits`.
    pub fn depolarize(&mut self, qubits: &[usize], p: f64) {
        let n = qubits.len();
        let m = (1usize << (2 * n)) - 1;
        let mut acc: Vec<C64> = self.rho.iter().map(|x| x * (1.0 - p)).collect();
        for k in 1..=m {
            let mut t = self.clone();
            let ps = pauli_string(k, n);
            t.conjugate_by(|v| apply_pauli(v, qubits, &ps));
            for (a, b) in acc.iter_mut().zip(&t.rho) {
                *a += b * (p / m as f64);
            }
        }
        self.rho = acc;
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.rho
            .iter()
            .zip(&other.rho)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
