//! Nine-qubit Bacon-Shor code and its measurement-free correction cycle
//! routed onto a linear chain with nearest- and next-nearest-neighbour
//! couplings.
//!
//! Data qubits `d1..d9` sit on a 3×3 lattice, row-major. Stabilizers act on
//! pairs of columns (X type) and pairs of rows (Z type); gauge operators are
//! `X_j X_{j+1}` within a row and `Z_i Z_{i+3}` within a column. The logical
//! operators are `X_L = X1 X4 X7` and `Z_L = Z1 Z2 Z3`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{apply_h, Circuit, GateOp, Kind, NoiseClass};
use crate::error::{Error, Result};
use crate::quantum::{StateVector, C64, ZERO};

/// Iteration cap for the router; hitting it means the layout cannot be routed.
const ROUTE_LIMIT: usize = 10_000;

// ---- Pauli algebra on the nine data qubits ----

/// Pauli operator on the data lattice as X and Z bitmasks (bit `i` is `d{i+1}`),
/// phases ignored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    pub x: u16,
    pub z: u16,
}

impl PauliString {
    pub fn x_on(qubits: &[usize]) -> Self {
        Self { x: mask(qubits), z: 0 }
    }

    pub fn z_on(qubits: &[usize]) -> Self {
        Self { x: 0, z: mask(qubits) }
    }

    pub fn product(self, other: Self) -> Self {
        Self {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }

    pub fn commutes(self, other: Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    pub fn weight(self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(self) -> bool {
        self.x == 0 && self.z == 0
    }
}

/// Bitmask of 1-based data indices.
fn mask(qubits: &[usize]) -> u16 {
    qubits.iter().fold(0, |m, &q| m | 1 << (q - 1))
}

fn row(r: usize) -> [usize; 3] {
    [3 * r + 1, 3 * r + 2, 3 * r + 3]
}

fn col(c: usize) -> [usize; 3] {
    [c + 1, c + 4, c + 7]
}

/// Pairs of rows/columns (0-based) covered by stabilizer 1, 2 and the
/// redundant stabilizer 3.
pub const STABILIZER_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabType {
    X,
    Z,
}

/// One of the six extracted stabilizers, `index` in 1..=3 (3 is redundant).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stabilizer {
    pub kind: StabType,
    pub index: usize,
}

impl Stabilizer {
    pub const ALL: [Stabilizer; 6] = [
        Stabilizer { kind: StabType::X, index: 1 },
        Stabilizer { kind: StabType::X, index: 2 },
        Stabilizer { kind: StabType::X, index: 3 },
        Stabilizer { kind: StabType::Z, index: 1 },
        Stabilizer { kind: StabType::Z, index: 2 },
        Stabilizer { kind: StabType::Z, index: 3 },
    ];

    pub fn x(index: usize) -> Self {
        Self { kind: StabType::X, index }
    }

    pub fn z(index: usize) -> Self {
        Self { kind: StabType::Z, index }
    }

    fn lines(self) -> (usize, usize) {
        STABILIZER_PAIRS[self.index - 1]
    }

    /// Support in readout order: one gauge pair per line crossing the two
    /// columns (X type) or rows (Z type).
    pub fn gauge_order(self) -> Vec<usize> {
        let (a, b) = self.lines();
        (0..3)
            .flat_map(|k| match self.kind {
                StabType::X => [row(k)[a], row(k)[b]],
                StabType::Z => [col(k)[a], col(k)[b]],
            })
            .collect()
    }

    /// Same support read line by line instead of gauge pair by gauge pair.
    /// Not fault tolerant; used as the negative control.
    pub fn line_order(self) -> Vec<usize> {
        let (a, b) = self.lines();
        match self.kind {
            StabType::X => col(a).into_iter().chain(col(b)).collect(),
            StabType::Z => row(a).into_iter().chain(row(b)).collect(),
        }
    }

    pub fn pauli(self) -> PauliString {
        let q = self.gauge_order();
        match self.kind {
            StabType::X => PauliString::x_on(&q),
            StabType::Z => PauliString::z_on(&q),
        }
    }
}

impl fmt::Display for Stabilizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.kind {
            StabType::X => 'X',
            StabType::Z => 'Z',
        };
        write!(f, "S_{t}{}", self.index)
    }
}

pub fn logical_x() -> PauliString {
    PauliString::x_on(&col(0))
}

pub fn logical_z() -> PauliString {
    PauliString::z_on(&row(0))
}

/// The twelve gauge generators.
pub fn gauge_generators() -> Vec<PauliString> {
    let mut g: Vec<_> = [1, 2, 4, 5, 7, 8].iter().map(|&j| PauliString::x_on(&[j, j + 1])).collect();
    g.extend((1..=6).map(|i| PauliString::z_on(&[i, i + 3])));
    g
}

/// Data qubit (1-based) whose Pauli is applied by the coherent correction of
/// line `k` (0-based), and the two syndrome ancillas (1-based) that flag it.
/// Column `k` is flagged by the two X stabilizers containing it; the same
/// pattern holds for rows.
pub fn correction_rule(kind: StabType, k: usize) -> (usize, [usize; 2]) {
    let flags = match k {
        0 => [1, 3],
        1 => [1, 2],
        _ => [2, 3],
    };
    let target = match kind {
        StabType::X => col(k)[0],
        StabType::Z => row(k)[0],
    };
    (target, flags)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalState {
    Zero,
    Plus,
}

impl LogicalState {
    pub const BOTH: [LogicalState; 2] = [LogicalState::Zero, LogicalState::Plus];

    pub fn label(self) -> &'static str {
        match self {
            LogicalState::Zero => "zero",
            LogicalState::Plus => "plus",
        }
    }
}

impl FromStr for LogicalState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(LogicalState::Zero),
            "plus" | "+" => Ok(LogicalState::Plus),
            _ => Err(Error::InvalidParameter(format!("logical state `{s}`"))),
        }
    }
}

/// Unconstrained nine-qubit encoder (qubit `i` is `d{i+1}`): GHZ states along
/// rows plus a transversal Hadamard for `|0>_L`, along columns for `|+>_L`.
pub fn encoding_circuit(state: LogicalState) -> Circuit {
    let mut c = Circuit::new(9);
    let lines: Vec<[usize; 3]> = match state {
        LogicalState::Zero => (0..3).map(row).collect(),
        LogicalState::Plus => (0..3).map(col).collect(),
    };
    for l in &lines {
        c.gate(Kind::H, &[l[0] - 1]).unwrap();
        c.gate(Kind::Cnot, &[l[0] - 1, l[1] - 1]).unwrap();
        c.gate(Kind::Cnot, &[l[0] - 1, l[2] - 1]).unwrap();
    }
    if state == LogicalState::Zero {
        for q in 0..9 {
            c.gate(Kind::H, &[q]).unwrap();
        }
    }
    c
}

/// Encoded nine-qubit state.
pub fn encoded_data(state: LogicalState) -> StateVector {
    encoding_circuit(state)
        .run(&StateVector::basis(vec![2; 9], &[0; 9]).unwrap())
        .expect("encoder has no resets")
}

/// Expectation of a data-lattice Pauli on amplitudes whose data qubit `d{i+1}`
/// sits at bit `positions[i]`.
pub fn expectation(amps: &[C64], positions: &[usize; 9], p: PauliString) -> f64 {
    let (mut xm, mut zm) = (0usize, 0usize);
    for (i, &pos) in positions.iter().enumerate() {
        if p.x >> i & 1 == 1 {
            xm |= 1 << pos;
        }
        if p.z >> i & 1 == 1 {
            zm |= 1 << pos;
        }
    }
    // <a|P|a> with P = i^{|x&z|} X^x Z^z
    let ny = (p.x & p.z).count_ones();
    let mut acc = ZERO;
    for (i, a) in amps.iter().enumerate() {
        let j = i ^ xm;
        let sign = if (j & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        acc += amps[j] * a.conj() * sign;
    }
    let phase = match ny % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    (acc * phase).re
}

// ---- chain layout ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Data(u8),
    Syndrome(u8),
    /// SWAP helper ancilla.
    Helper(u8),
}

impl Role {
    pub fn is_data(self) -> bool {
        matches!(self, Role::Data(_))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Data(i) => write!(f, "d{i}"),
            Role::Syndrome(i) => write!(f, "s{i}"),
            Role::Helper(i) => write!(f, "A{i}"),
        }
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("role `{s}`"));
        let (head, num) = s.split_at(1.min(s.len()));
        let n: u8 = num.parse().map_err(|_| bad())?;
        match head {
            "d" if (1..=9).contains(&n) => Ok(Role::Data(n)),
            "s" if (1..=3).contains(&n) => Ok(Role::Syndrome(n)),
            "A" if n >= 1 => Ok(Role::Helper(n)),
            _ => Err(bad()),
        }
    }
}

/// Order of roles along the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLayout {
    pub chain: Vec<Role>,
}

impl Default for ChainLayout {
    /// Helpers after every third ion:
    /// `d1 d2 d3 A1 s1 d4 d5 A2 d6 s2 d7 A3 d8 d9 s3`.
    fn default() -> Self {
        Self::parse("d1 d2 d3 A1 s1 d4 d5 A2 d6 s2 d7 A3 d8 d9 s3").unwrap()
    }
}

impl ChainLayout {
    pub fn parse(s: &str) -> Result<Self> {
        let chain = s.split_whitespace().map(str::parse).collect::<Result<Vec<Role>>>()?;
        let l = Self { chain };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let set: BTreeSet<Role> = self.chain.iter().copied().collect();
        if set.len() != self.chain.len() {
            return Err(Error::InvalidParameter("layout repeats a role".into()));
        }
        let need = (1..=9).map(Role::Data).chain((1..=3).map(Role::Syndrome));
        for r in need {
            if !set.contains(&r) {
                return Err(Error::InvalidParameter(format!("layout lacks {r}")));
            }
        }
        if !self.chain.iter().any(|r| matches!(r, Role::Helper(_))) {
            return Err(Error::InvalidParameter("layout needs at least one helper".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn position(&self, role: Role) -> Option<usize> {
        self.chain.iter().position(|&r| r == role)
    }

    /// Chain positions of `d1..d9`.
    pub fn data_positions(&self) -> [usize; 9] {
        let mut p = [0; 9];
        for (i, slot) in p.iter_mut().enumerate() {
            *slot = self.position(Role::Data(i as u8 + 1)).expect("validated layout");
        }
        p
    }

    /// Empty circuit labelled by the initial roles. Ions change sites as
    /// they are swapped, so every site is marked resettable; the router only
    /// resets syndrome ancillas.
    pub fn circuit(&self) -> Circuit {
        Circuit::with_roles(
            self.chain.iter().map(Role::to_string).collect(),
            vec![true; self.chain.len()],
        )
        .expect("role labels are valid")
    }

    /// Encoded logical state on the chain, every ancilla in `|0>`.
    pub fn logical_state(&self, state: LogicalState) -> StateVector {
        embed(&encoded_data(state), &self.data_positions(), self.len())
    }

    pub fn to_text(&self) -> String {
        self.chain.iter().map(Role::to_string).collect::<Vec<_>>().join(" ")
    }
}

/// Place a nine-qubit data state at the given bits of an `n`-qubit register.
pub fn embed(data: &StateVector, positions: &[usize; 9], n: usize) -> StateVector {
    let mut amps = vec![ZERO; 1 << n];
    for (b, &a) in data.amps().iter().enumerate() {
        let idx = positions
            .iter()
            .enumerate()
            .fold(0usize, |m, (i, &p)| m | ((b >> i & 1) << p));
        amps[idx] = a;
    }
    StateVector::new(vec![2; n], amps).unwrap()
}

// ---- logical readout ----

/// Probability that an ideal decoder reads the wrong logical value.
///
/// For `|0>_L` the Z parities of the three rows are majority-voted (each row
/// parity equals `Z_L` up to stabilizers); for `|+>_L` the data are rotated by
/// a transversal Hadamard and the column parities are voted.
pub fn logical_failure(amps: &[C64], positions: &[usize; 9], state: LogicalState) -> f64 {
    let rotated;
    let amps = match state {
        LogicalState::Zero => amps,
        LogicalState::Plus => {
            let mut a = amps.to_vec();
            for &p in positions {
                apply_h(&mut a, p);
            }
            rotated = a;
            &rotated[..]
        }
    };
    let lines: [[usize; 3]; 3] = match state {
        LogicalState::Zero => [row(0), row(1), row(2)],
        LogicalState::Plus => [col(0), col(1), col(2)],
    };
    let line_masks: Vec<usize> = lines
        .iter()
        .map(|l| l.iter().fold(0usize, |m, &q| m | 1 << positions[q - 1]))
        .collect();
    let mut fail = 0.0;
    let mut norm = 0.0;
    for (i, a) in amps.iter().enumerate() {
        let w = a.norm_sqr();
        norm += w;
        let odd = line_masks.iter().filter(|&&m| (i & m).count_ones() % 2 == 1).count();
        if odd >= 2 {
            fail += w;
        }
    }
    fail / norm
}

// ---- routed cycle ----

/// How a SWAP in the routed cycle is realised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapKind {
    /// Three CNOTs.
    Plain,
    /// Three plain SWAPs through a helper: `SWAP(p,h) SWAP(p,q) SWAP(q,h)`.
    FaultTolerant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapRecord {
    /// Running number among data-ancilla swaps, the only ones that may be
    /// relaxed; `None` for swaps whose kind is fixed.
    pub ordinal: Option<usize>,
    pub roles: (String, String),
    pub kind: SwapKind,
    /// Half-open range of gate indices.
    pub ops: (usize, usize),
}

/// Which readout order and which data-ancilla swaps to build plainly.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleOptions {
    /// Ordinals of data-ancilla swaps built as plain SWAPs.
    pub relaxed: BTreeSet<usize>,
    /// Read the Z stabilizers row by row (hook errors become logical).
    pub negative_control: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QecCycle {
    pub circuit: Circuit,
    pub initial_layout: ChainLayout,
    pub final_layout: ChainLayout,
    pub swaps: Vec<SwapRecord>,
    pub options: CycleOptions,
}

impl QecCycle {
    pub fn cnot_count(&self) -> usize {
        self.circuit.count(Kind::Cnot)
    }

    /// Number of data-ancilla swaps (relaxation candidates).
    pub fn candidate_swaps(&self) -> usize {
        self.swaps.iter().filter(|s| s.ordinal.is_some()).count()
    }

    pub fn ft_swaps(&self) -> usize {
        self.swaps.iter().filter(|s| s.kind == SwapKind::FaultTolerant).count()
    }

    pub fn swap_by_ordinal(&self, ordinal: usize) -> Option<&SwapRecord> {
        self.swaps.iter().find(|s| s.ordinal == Some(ordinal))
    }

    pub fn initial_state(&self, state: LogicalState) -> StateVector {
        self.initial_layout.logical_state(state)
    }

    pub fn final_positions(&self) -> [usize; 9] {
        self.final_layout.data_positions()
    }

    pub fn logical_failure(&self, amps: &[C64], state: LogicalState) -> f64 {
        logical_failure(amps, &self.final_positions(), state)
    }
}

struct Router<'a> {
    chain: Vec<Role>,
    circuit: Circuit,
    options: &'a CycleOptions,
    swaps: Vec<SwapRecord>,
    next_ordinal: usize,
    steps: usize,
}

impl<'a> Router<'a> {
    fn pos(&self, r: Role) -> usize {
        self.chain.iter().position(|&x| x == r).expect("role on chain")
    }

    fn tick(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > ROUTE_LIMIT {
            return Err(Error::Connectivity("router did not converge".into()));
        }
        Ok(())
    }

    fn cnot_at(&mut self, c: usize, t: usize) -> Result<()> {
        let class = match c.abs_diff(t) {
            1 => NoiseClass::TwoNn,
            2 => NoiseClass::TwoNnn,
            d => return Err(Error::Connectivity(format!("CNOT across distance {d}"))),
        };
        self.circuit.push(GateOp::noisy(Kind::Cnot, &[c, t], class))
    }

    fn plain_swap_at(&mut self, p: usize, q: usize) -> Result<()> {
        self.cnot_at(p, q)?;
        self.cnot_at(q, p)?;
        self.cnot_at(p, q)?;
        self.chain.swap(p, q);
        Ok(())
    }

    fn record(&mut self, ordinal: Option<usize>, a: Role, b: Role, kind: SwapKind, start: usize) {
        let end = self.circuit.ops.len();
        self.swaps.push(SwapRecord {
            ordinal,
            roles: (a.to_string(), b.to_string()),
            kind,
            ops: (start, end),
        });
    }

    /// Bring some helper within distance 2 of both `p` and `q` without
    /// moving `p` or `q`; returns its position.
    fn helper_near(&mut self, p: usize, q: usize) -> Result<usize> {
        let (lo, hi) = (p.min(q), p.max(q));
        let helpers: Vec<usize> = (0..self.chain.len())
            .filter(|&i| matches!(self.chain[i], Role::Helper(_)))
            .collect();
        if let Some(&h) = helpers
            .iter()
            .filter(|&&h| h.abs_diff(lo) <= 2 && h.abs_diff(hi) <= 2)
            .min_by_key(|&&h| h.abs_diff(lo) + h.abs_diff(hi))
        {
            return Ok(h);
        }
        let gap = |h: usize| if h < lo { lo - h } else { h - hi };
        let &h0 = helpers
            .iter()
            .min_by_key(|&&h| gap(h))
            .ok_or_else(|| Error::Connectivity("no helper on the chain".into()))?;
        let role = self.chain[h0];
        let target = if h0 < lo {
            lo.checked_sub(1)
        } else if hi + 1 < self.chain.len() {
            Some(hi + 1)
        } else {
            None
        }
        .ok_or_else(|| Error::Connectivity("no room for a helper next to the pair".into()))?;
        loop {
            self.tick()?;
            let h = self.pos(role);
            if h == target {
                return Ok(h);
            }
            let next = if h < target { h + 1 } else { h - 1 };
            let other = self.chain[next];
            let start = self.circuit.ops.len();
            self.plain_swap_at(h, next)?;
            self.record(None, role, other, SwapKind::Plain, start);
        }
    }

    /// Exchange the ions at neighbouring positions `p` and `q`.
    fn swap_adjacent(&mut self, p: usize, q: usize) -> Result<()> {
        let (a, b) = (self.chain[p], self.chain[q]);
        let data_anc = a.is_data() != b.is_data()
            && !matches!(a, Role::Helper(_))
            && !matches!(b, Role::Helper(_));
        let both_data = a.is_data() && b.is_data();
        if !(data_anc || both_data) {
            let start = self.circuit.ops.len();
            self.plain_swap_at(p, q)?;
            self.record(None, a, b, SwapKind::Plain, start);
            return Ok(());
        }
        // helper transport is independent of the swap's final kind so that
        // relaxing one swap leaves the rest of the circuit unchanged
        let h = self.helper_near(p, q)?;
        let (p, q) = (self.pos(a), self.pos(b));
        let ordinal = if data_anc {
            self.next_ordinal += 1;
            Some(self.next_ordinal - 1)
        } else {
            None
        };
        let relaxed = ordinal.is_some_and(|o| self.options.relaxed.contains(&o));
        let start = self.circuit.ops.len();
        if relaxed {
            self.plain_swap_at(p, q)?;
            self.record(ordinal, a, b, SwapKind::Plain, start);
        } else {
            self.plain_swap_at(p, h)?;
            self.plain_swap_at(p, q)?;
            self.plain_swap_at(q, h)?;
            self.record(ordinal, a, b, SwapKind::FaultTolerant, start);
        }
        Ok(())
    }

    /// Move `mover` one site toward position `target`.
    fn step_toward(&mut self, mover: Role, target: usize) -> Result<()> {
        self.tick()?;
        let p = self.pos(mover);
        let q = if p < target { p + 1 } else { p - 1 };
        self.swap_adjacent(p, q)
    }

    fn approach(&mut self, mover: Role, target: Role, within: usize) -> Result<()> {
        while self.pos(mover).abs_diff(self.pos(target)) > within {
            let t = self.pos(target);
            self.step_toward(mover, t)?;
        }
        Ok(())
    }

    /// CNOT between roles; the syndrome ancilla travels to the data qubit.
    fn cnot(&mut self, control: Role, target: Role) -> Result<()> {
        let (mover, fixed) = if control.is_data() { (target, control) } else { (control, target) };
        self.approach(mover, fixed, 2)?;
        let (c, t) = (self.pos(control), self.pos(target));
        self.cnot_at(c, t)
    }

    /// Couple the stabilizer's support to its ancilla `s{index}`. Gauge
    /// pairs are kept contiguous but visited nearest first; `line_order`
    /// reads the fixed row/column order instead.
    fn readout(&mut self, stab: Stabilizer, line_order: bool) -> Result<()> {
        let anc = Role::Syndrome(stab.index as u8);
        let couple = |r: &mut Self, q: usize| {
            let dq = Role::Data(q as u8);
            match stab.kind {
                StabType::X => r.cnot(anc, dq),
                StabType::Z => r.cnot(dq, anc),
            }
        };
        if line_order {
            for q in stab.line_order() {
                couple(self, q)?;
            }
            return Ok(());
        }
        let mut pairs: Vec<[usize; 2]> = stab.gauge_order().chunks(2).map(|c| [c[0], c[1]]).collect();
        while !pairs.is_empty() {
            let p = self.pos(anc);
            let dist = |q: usize| self.pos(Role::Data(q as u8)).abs_diff(p);
            let (i, _) = pairs
                .iter()
                .enumerate()
                .min_by_key(|(_, pr)| dist(pr[0]).min(dist(pr[1])))
                .expect("non-empty");
            let mut pr = pairs.remove(i);
            if dist(pr[1]) < dist(pr[0]) {
                pr.swap(0, 1);
            }
            for q in pr {
                couple(self, q)?;
            }
        }
        Ok(())
    }

    fn hadamard(&mut self, r: Role) -> Result<()> {
        let p = self.pos(r);
        self.circuit.gate(Kind::H, &[p])
    }

    /// CCZ on two syndrome ancillas and a data qubit, gathered into three
    /// consecutive sites.
    fn ccz(&mut self, a: Role, b: Role, d: Role) -> Result<()> {
        loop {
            self.tick()?;
            let (pa, pb, pd) = (self.pos(a), self.pos(b), self.pos(d));
            if pa.abs_diff(pd) > 1 {
                self.step_toward(a, pd)?;
                continue;
            }
            let lo = pa.min(pd);
            let hi = pa.max(pd);
            if pb + 1 == lo || pb == hi + 1 {
                return self.circuit.push(GateOp::noisy(Kind::Ccz, &[pa, pb, pd], NoiseClass::Three));
            }
            let t = if pb < lo { lo } else { hi };
            self.step_toward(b, t)?;
        }
    }

    fn reset(&mut self, r: Role) -> Result<()> {
        let p = self.pos(r);
        self.circuit.gate(Kind::Reset0, &[p])
    }
}

/// Route the full cycle onto `layout`:
/// X-stabilizer readouts on `s1..s3` (ancilla as CNOT control between
/// Hadamards), coherent Z corrections by CCZ, ancilla resets, Z-stabilizer
/// readouts (ancilla as CNOT target) and coherent X corrections by
/// Hadamard-conjugated CCZ.
pub fn build_qec_cycle(layout: &ChainLayout, options: &CycleOptions) -> Result<QecCycle> {
    layout.validate()?;
    let mut r = Router {
        chain: layout.chain.clone(),
        circuit: layout.circuit(),
        options,
        swaps: Vec::new(),
        next_ordinal: 0,
        steps: 0,
    };
    let s = |k: usize| Role::Syndrome(k as u8);
    let d = |i: usize| Role::Data(i as u8);

    for k in 1..=3 {
        r.hadamard(s(k))?;
        r.readout(Stabilizer::x(k), false)?;
        r.hadamard(s(k))?;
    }
    for line in 0..3 {
        let (target, [fa, fb]) = correction_rule(StabType::X, line);
        r.ccz(s(fa), s(fb), d(target))?;
    }
    for k in 1..=3 {
        r.reset(s(k))?;
    }
    for k in 1..=3 {
        r.readout(Stabilizer::z(k), options.negative_control)?;
    }
    for line in 0..3 {
        let (target, [fa, fb]) = correction_rule(StabType::Z, line);
        r.hadamard(d(target))?;
        r.ccz(s(fa), s(fb), d(target))?;
        r.hadamard(d(target))?;
    }

    Ok(QecCycle {
        circuit: r.circuit,
        initial_layout: layout.clone(),
        final_layout: ChainLayout { chain: r.chain },
        swaps: r.swaps,
        options: options.clone(),
    })
}

/// Data-ancilla swaps of the all-FT build, used for relaxation.
pub fn baseline_cycle(layout: &ChainLayout) -> Result<QecCycle> {
    build_qec_cycle(layout, &CycleOptions::default())
}

// ---- unconstrained fragments ----

/// Readout of `stab` on a ten-qubit register (`d{i}` at qubit `i-1`,
/// ancilla at 9) without connectivity limits.
pub fn readout_fragment(stab: Stabilizer, order: &[usize]) -> Circuit {
    let mut c = Circuit::new(10);
    let a = 9;
    match stab.kind {
        StabType::X => {
            c.gate(Kind::H, &[a]).unwrap();
            for &q in order {
                c.push(GateOp::noisy(Kind::Cnot, &[a, q - 1], NoiseClass::TwoNn)).unwrap();
            }
            c.gate(Kind::H, &[a]).unwrap();
        }
        StabType::Z => {
            for &q in order {
                c.push(GateOp::noisy(Kind::Cnot, &[q - 1, a], NoiseClass::TwoNn)).unwrap();
            }
        }
    }
    c
}

/// Fault-tolerant SWAP of qubits `p` and `q` through helper `h` on an
/// `n`-qubit register.
pub fn ft_swap_fragment(n: usize, p: usize, q: usize, h: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n);
    for (x, y) in [(p, h), (p, q), (q, h)] {
        for (a, b) in [(x, y), (y, x), (x, y)] {
            c.push(GateOp::noisy(Kind::Cnot, &[a, b], NoiseClass::TwoNn))?;
        }
    }
    Ok(c)
}
