//! Dressed three-ion Rydberg Hamiltonian under sinusoidal laser pulses.
//!
//! Units: energies in the nearest-neighbour coupling `V` (angular), times in
//! `2π/V`, decay rates in `V/2π`. Each ion carries the levels
//! `|0>, |1>, |D->, |D+>` in that order; `|0>` is uncoupled.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{embed_local, level, Operator, StateVector, C64, I, ONE, ZERO};

pub const N_IONS: usize = 3;
pub const ION_DIM: usize = 4;
pub const REGISTER_DIM: usize = 64;

/// Optimizable pulse amplitudes, all in units of `V`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub omega0: f64,
    pub delta0: f64,
    #[serde(rename = "Delta0")]
    pub big_delta0: f64,
}

impl PulseParams {
    pub fn new(omega0: f64, delta0: f64, big_delta0: f64) -> Self {
        Self {
            omega0,
            delta0,
            big_delta0,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.omega0, self.delta0, self.big_delta0]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }
}

/// How the ordered-pair sum in the interaction term is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairConvention {
    /// Each unordered pair appears twice, net prefactor `V_ij / 2`.
    #[default]
    Ordered,
    /// Each unordered pair appears once, net prefactor `V_ij / 4`.
    Unordered,
}

impl PairConvention {
    fn pair_prefactor(self) -> f64 {
        match self {
            PairConvention::Ordered => 0.5,
            PairConvention::Unordered => 0.25,
        }
    }
}

/// Fixed physical context of a gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Gate duration in `2π/V`.
    pub tau: f64,
    /// Microwave Rabi frequency in `V`.
    pub omega_mw: f64,
    /// Rydberg decay rate in `V/2π`.
    pub gamma: f64,
    /// Next-nearest-neighbour interaction ratio `V13 / V`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub pairs: PairConvention,
}

fn default_alpha() -> f64 {
    0.125
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            tau: 87.5,
            omega_mw: 20.0,
            gamma: 0.0,
            alpha: default_alpha(),
            pairs: PairConvention::Ordered,
        }
    }
}

impl SystemParams {
    pub fn new(tau: f64, omega_mw: f64, gamma: f64) -> Self {
        Self {
            tau,
            omega_mw,
            gamma,
            ..Self::default()
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !self.omega_mw.is_finite() {
            return Err(Error::InvalidParameter("omega_mw must be finite".into()));
        }
        Ok(())
    }

    /// Decay rate expressed in the Hamiltonian's energy unit `V`.
    pub fn gamma_in_v(&self) -> f64 {
        self.gamma / (2.0 * PI)
    }

    pub fn interactions(&self) -> InteractionMatrix {
        InteractionMatrix::linear_chain(self.alpha)
    }
}

/// Symmetric pair couplings in units of `V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionMatrix {
    pub v: [[f64; N_IONS]; N_IONS],
}

impl InteractionMatrix {
    pub fn linear_chain(alpha: f64) -> Self {
        let mut v = [[0.0; N_IONS]; N_IONS];
        v[0][1] = 1.0;
        v[1][0] = 1.0;
        v[1][2] = 1.0;
        v[2][1] = 1.0;
        v[0][2] = alpha;
        v[2][0] = alpha;
        Self { v }
    }
}

/// Physical-unit conversions for reporting, parametrised by `V / 2π` in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    pub v_mhz: f64,
}

impl Default for UnitScale {
    fn default() -> Self {
        Self { v_mhz: 25.0 }
    }
}

impl UnitScale {
    pub fn tau_us(&self, tau: f64) -> f64 {
        tau / self.v_mhz
    }

    pub fn gamma_mhz(&self, gamma: f64) -> f64 {
        gamma * self.v_mhz
    }
}

fn sin2(t: f64, tau: f64) -> f64 {
    let s = (PI * t / tau).sin();
    s * s
}

/// Laser Rabi frequency and detuning `(Ω_L(t), Δ_L(t))`.
pub fn pulse_envelope(t: f64, p: &PulseParams, sys: &SystemParams) -> Result<(f64, f64)> {
    let slack = 1e-9 * sys.tau;
    if !(t >= -slack && t <= sys.tau + slack) {
        return Err(Error::TimeOutOfRange { t, tau: sys.tau });
    }
    Ok(envelope_unchecked(t, p, sys.tau))
}

/// Total dressed-state population `Σ_i (p_{+,i} + p_{-,i})` of a register state.
pub fn rydberg_population(state: &StateVector) -> Result<f64> {
    if state.dims() != [ION_DIM; N_IONS] {
        return Err(Error::RegisterMismatch {
            left: state.dims().to_vec(),
            right: vec![ION_DIM; N_IONS],
        });
    }
    let dressed = |l: usize| usize::from(l == level::D_MINUS || l == level::D_PLUS);
    Ok(state
        .amps()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let n = dressed(i % 4) + dressed(i / 4 % 4) + dressed(i / 16);
            a.norm_sqr() * n as f64
        })
        .sum())
}

#[inline]
pub(crate) fn envelope_unchecked(t: f64, p: &PulseParams, tau: f64) -> (f64, f64) {
    let s = sin2(t, tau);
    (p.omega0 * s, p.delta0 - p.big_delta0 * s)
}

fn projector(l: usize) -> Operator {
    Operator::outer(ION_DIM, l, l)
}

fn sigma_z_dressed() -> Operator {
    let mut op = Operator::zeros(ION_DIM);
    op.set(level::D_PLUS, level::D_PLUS, ONE);
    op.set(level::D_MINUS, level::D_MINUS, -ONE);
    op
}

fn sigma_y_dressed() -> Operator {
    let mut op = Operator::zeros(ION_DIM);
    op.set(level::D_MINUS, level::D_PLUS, I);
    op.set(level::D_PLUS, level::D_MINUS, -I);
    op
}

/// Dense 64x64 Hamiltonian at time `t`, including the anti-Hermitian decay.
pub fn build_hamiltonian(t: f64, p: &PulseParams, sys: &SystemParams) -> Result<Operator> {
    sys.validate()?;
    let (omega_l, delta_l) = pulse_envelope(t, p, sys)?;
    let dims = [ION_DIM; N_IONS];
    let mut local = Operator::zeros(ION_DIM);
    let d_minus = delta_l - sys.omega_mw / 2.0;
    let d_plus = delta_l + sys.omega_mw / 2.0;
    let decay = C64::new(0.0, -0.5 * sys.gamma_in_v());
    let drive = C64::new(omega_l / (2.0 * SQRT_2), 0.0);
    local = local.add(&projector(level::D_MINUS).scale(C64::new(d_minus, 0.0) + decay))?;
    local = local.add(&projector(level::D_PLUS).scale(C64::new(d_plus, 0.0) + decay))?;
    for d in [level::D_MINUS, level::D_PLUS] {
        local.set(level::EXCITED, d, drive);
        local.set(d, level::EXCITED, drive);
    }

    let mut h = Operator::zeros(REGISTER_DIM);
    for ion in 0..N_IONS {
        h = h.add(&embed_local(&local, &[ion], &dims)?)?;
    }

    let pair = sigma_z_dressed()
        .kron(&sigma_z_dressed())
        .add(&sigma_y_dressed().kron(&sigma_y_dressed()))?;
    let v = sys.interactions().v;
    let pref = sys.pairs.pair_prefactor();
    for i in 0..N_IONS {
        for j in (i + 1)..N_IONS {
            if v[i][j] == 0.0 {
                continue;
            }
            let term = embed_local(&pair, &[i, j], &dims)?;
            h = h.add(&term.scale(C64::new(pref * v[i][j], 0.0)))?;
        }
    }
    Ok(h)
}

/// `(H - H^†) / 2`.
pub fn anti_hermitian_part(h: &Operator) -> Operator {
    h.sub(&h.adjoint())
        .expect("square operator")
        .scale(C64::new(0.5, 0.0))
}

/// Permutation exchanging ions 1 and 3 on the 64-dim register.
pub fn swap_outer_ions() -> Operator {
    let mut p = Operator::zeros(REGISTER_DIM);
    for a in 0..ION_DIM {
        for b in 0..ION_DIM {
            for c in 0..ION_DIM {
                let from = a + ION_DIM * (b + ION_DIM * c);
                let to = c + ION_DIM * (b + ION_DIM * a);
                p.set(to, from, ONE);
            }
        }
    }
    p
}

/// The Hamiltonian restricted to a set of basis states closed under its
/// action, split into its time-independent and pulse-driven pieces so that
/// `H(t) ψ` costs a few hundred multiply-adds.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    /// Per-ion levels of each basis state in this block.
    pub basis: Vec<[usize; N_IONS]>,
    /// Constant diagonal: microwave splitting, `σzσz` interaction, decay.
    pub diag_const: Vec<C64>,
    /// Number of dressed-state excitations; multiplies `Δ_L(t)`.
    pub n_dressed: Vec<f64>,
    /// Pairs `(row, col)` coupled by `Ω_L(t) / (2√2)`, both orientations listed.
    pub drive: Vec<(usize, usize)>,
    /// Constant off-diagonal `σyσy` couplings.
    pub exchange: Vec<(usize, usize, f64)>,
    pulse: PulseParams,
    tau: f64,
}

impl SparseHamiltonian {
    /// Block of states in which ions outside `active` sit in `|0>` and ions
    /// inside it occupy `{|1>, |D->, |D+>}`. All 64 levels when `active` is
    /// `None`.
    pub fn new(p: &PulseParams, sys: &SystemParams, active: Option<[bool; N_IONS]>) -> Result<Self> {
        sys.validate()?;
        let mut basis = Vec::new();
        for idx in 0..REGISTER_DIM {
            let lv = [idx % ION_DIM, (idx / ION_DIM) % ION_DIM, idx / (ION_DIM * ION_DIM)];
            let keep = match active {
                None => true,
                Some(act) => (0..N_IONS).all(|i| (lv[i] == level::GROUND) != act[i]),
            };
            if keep {
                basis.push(lv);
            }
        }
        let find = |lv: [usize; N_IONS]| basis.iter().position(|b| *b == lv);
        let v = sys.interactions().v;
        let pref = sys.pairs.pair_prefactor();
        let decay = -0.5 * sys.gamma_in_v();
        let is_dressed = |l: usize| l == level::D_MINUS || l == level::D_PLUS;
        let zsign = |l: usize| if l == level::D_PLUS { 1.0 } else { -1.0 };

        let mut diag_const = Vec::with_capacity(basis.len());
        let mut n_dressed = Vec::with_capacity(basis.len());
        let mut drive = Vec::new();
        let mut exchange = Vec::new();
        for (row, lv) in basis.iter().enumerate() {
            let mut re = 0.0;
            let mut nd = 0.0;
            for &l in lv {
                if is_dressed(l) {
                    nd += 1.0;
                    re += zsign(l) * sys.omega_mw / 2.0;
                }
            }
            for i in 0..N_IONS {
                for j in (i + 1)..N_IONS {
                    if is_dressed(lv[i]) && is_dressed(lv[j]) {
                        re += pref * v[i][j] * zsign(lv[i]) * zsign(lv[j]);
                        // σy⊗σy flips both dressed labels; the sign is
                        // -1 for equal labels and +1 for opposite ones
                        let mut flipped = *lv;
                        flipped[i] = level::D_MINUS + level::D_PLUS - lv[i];
                        flipped[j] = level::D_MINUS + level::D_PLUS - lv[j];
                        let sign = if lv[i] == lv[j] { -1.0 } else { 1.0 };
                        if v[i][j] != 0.0 {
                            if let Some(col) = find(flipped) {
                                exchange.push((col, row, pref * v[i][j] * sign));
                            }
                        }
                    }
                }
                if lv[i] == level::EXCITED {
                    for d in [level::D_MINUS, level::D_PLUS] {
                        let mut to = *lv;
                        to[i] = d;
                        if let Some(col) = find(to) {
                            drive.push((row, col));
                            drive.push((col, row));
                        }
                    }
                }
            }
            diag_const.push(C64::new(re, decay * nd));
            n_dressed.push(nd);
        }
        Ok(Self {
            basis,
            diag_const,
            n_dressed,
            drive,
            exchange,
            pulse: *p,
            tau: sys.tau,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn pulse(&self) -> &PulseParams {
        &self.pulse
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `out = scale · H(t) ψ`.
    #[inline]
    pub fn apply_scaled(&self, t: f64, scale: C64, psi: &[C64], out: &mut [C64]) {
        let (omega_l, delta_l) = envelope_unchecked(t, &self.pulse, self.tau);
        for k in 0..psi.len() {
            out[k] = (self.diag_const[k] + self.n_dressed[k] * delta_l) * psi[k];
        }
        let g = omega_l / (2.0 * SQRT_2);
        for &(r, c) in &self.drive {
            out[r] += g * psi[c];
        }
        for &(r, c, v) in &self.exchange {
            out[r] += v * psi[c];
        }
        for o in out.iter_mut() {
            *o *= scale;
        }
    }

    /// Dense matrix of this block at time `t`.
    pub fn to_dense(&self, t: f64) -> Operator {
        let n = self.dim();
        let mut op = Operator::zeros(n);
        let mut e = vec![ZERO; n];
        let mut col = vec![ZERO; n];
        for c in 0..n {
            e.iter_mut().for_each(|x| *x = ZERO);
            e[c] = ONE;
            self.apply_scaled(t, ONE, &e, &mut col);
            for r in 0..n {
                op.set(r, c, col[r]);
            }
        }
        op
    }

    /// Flat 64-dim register index of each block state.
    pub fn register_indices(&self) -> Vec<usize> {
        self.basis
            .iter()
            .map(|lv| lv[0] + ION_DIM * (lv[1] + ION_DIM * lv[2]))
            .collect()
    }
}
