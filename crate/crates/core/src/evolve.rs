//! Fixed-step RK4 integration of `i dψ/dt = 2π H(t) ψ` (time in `2π/V`).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{PulseParams, SparseHamiltonian, SystemParams, N_IONS, REGISTER_DIM};
use crate::quantum::{StateVector, C64, ZERO};

/// Default RK4 resolution in steps per unit of time (`2π/V`).
///
/// The largest eigenvalue of `2πH` reaches about 440 for triply dressed
/// states, so RK4 needs `dt < 6.4e-3` just to stay stable; 512 steps per unit
/// keeps the final-state error near 1e-6 at the reference pulses.
pub const STEPS_PER_UNIT: f64 = 512.0;

/// Smallest step count ever chosen by [`default_steps`].
pub const MIN_STEPS: usize = 4096;

/// Even step count giving [`STEPS_PER_UNIT`] resolution over `[0, τ]`.
pub fn default_steps(tau: f64) -> usize {
    steps_at(tau, STEPS_PER_UNIT)
}

/// Even step count for a resolution of `per_unit` steps per unit time.
pub fn steps_at(tau: f64, per_unit: f64) -> usize {
    let n = ((tau * per_unit).ceil() as usize).max(MIN_STEPS);
    n + n % 2
}

/// Sampled observables of one evolution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Full-step time grid from 0 to τ.
    pub times: Vec<f64>,
    /// Total dressed-state population `Σ_{i,±} p_{±,i}` at each sample.
    pub rydberg_pop: Vec<f64>,
    /// `‖ψ‖²` at each sample.
    pub norm_sqr: Vec<f64>,
    pub final_state: StateVector,
}

/// Observables recorded per full step for one block.
struct BlockRun {
    psi: Vec<C64>,
    rydberg_pop: Vec<f64>,
    norm_sqr: Vec<f64>,
    /// `(step, ψ)` every `every` steps, when requested.
    snapshots: Vec<(usize, Vec<C64>)>,
}

/// A time-dependent generator `H(t)` acting on a block of states.
pub trait Generator {
    fn dim(&self) -> usize;
    /// `out = scale · H(t) ψ`.
    fn apply_scaled(&self, t: f64, scale: C64, psi: &[C64], out: &mut [C64]);
    /// Number of dressed-state excitations of block state `k`.
    fn dressed_count(&self, k: usize) -> f64;
}

impl Generator for SparseHamiltonian {
    fn dim(&self) -> usize {
        SparseHamiltonian::dim(self)
    }

    fn apply_scaled(&self, t: f64, scale: C64, psi: &[C64], out: &mut [C64]) {
        SparseHamiltonian::apply_scaled(self, t, scale, psi, out)
    }

    fn dressed_count(&self, k: usize) -> f64 {
        self.n_dressed[k]
    }
}

/// `H` held fixed at one instant.
pub struct Frozen<'a, G> {
    pub inner: &'a G,
    pub at: f64,
}

impl<G: Generator> Generator for Frozen<'_, G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_scaled(&self, _t: f64, scale: C64, psi: &[C64], out: &mut [C64]) {
        self.inner.apply_scaled(self.at, scale, psi, out)
    }

    fn dressed_count(&self, k: usize) -> f64 {
        self.inner.dressed_count(k)
    }
}

fn rk4_block<G: Generator>(
    h: &G,
    psi0: &[C64],
    tau: f64,
    steps: usize,
    weight: f64,
    every: usize,
) -> Result<BlockRun> {
    let n = h.dim();
    let dt = tau / steps as f64;
    // dψ/dt = -2πi H ψ
    let scale = C64::new(0.0, -2.0 * PI);
    let mut psi = psi0.to_vec();
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    let mut rydberg_pop = Vec::with_capacity(steps + 1);
    let mut norm_sqr = Vec::with_capacity(steps + 1);
    let observe = |psi: &[C64], pop: &mut Vec<f64>, nrm: &mut Vec<f64>| {
        let mut p = 0.0;
        let mut s = 0.0;
        for (k, a) in psi.iter().enumerate() {
            let w = a.norm_sqr();
            p += w * h.dressed_count(k);
            s += w;
        }
        pop.push(weight * p);
        nrm.push(weight * s);
    };
    observe(&psi, &mut rydberg_pop, &mut norm_sqr);
    let mut snapshots = Vec::new();
    if every > 0 {
        snapshots.push((0, psi.clone()));
    }
    for step in 0..steps {
        let t = step as f64 * dt;
        h.apply_scaled(t, scale, &psi, &mut k1);
        for i in 0..n {
            tmp[i] = psi[i] + k1[i] * (0.5 * dt);
        }
        h.apply_scaled(t + 0.5 * dt, scale, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = psi[i] + k2[i] * (0.5 * dt);
        }
        h.apply_scaled(t + 0.5 * dt, scale, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = psi[i] + k3[i] * dt;
        }
        h.apply_scaled(t + dt, scale, &tmp, &mut k4);
        for i in 0..n {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
        if !psi.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        observe(&psi, &mut rydberg_pop, &mut norm_sqr);
        if every > 0 && ((step + 1) % every == 0 || step + 1 == steps) {
            snapshots.push((step + 1, psi.clone()));
        }
    }
    Ok(BlockRun {
        psi,
        rydberg_pop,
        norm_sqr,
        snapshots,
    })
}

fn time_grid(tau: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| tau * k as f64 / steps as f64).collect()
}

fn check_initial(initial: &StateVector, steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    if initial.dims() != [4, 4, 4] {
        return Err(Error::RegisterMismatch {
            left: initial.dims().to_vec(),
            right: vec![4, 4, 4],
        });
    }
    Ok(())
}

/// Evolve an arbitrary three-ion state over `[0, τ]`.
pub fn evolve(initial: &StateVector, p: &PulseParams, sys: &SystemParams, steps: usize) -> Result<Trajectory> {
    check_initial(initial, steps)?;
    let h = SparseHamiltonian::new(p, sys, None)?;
    let idx = h.register_indices();
    let psi0: Vec<C64> = idx.iter().map(|&i| initial.amps()[i]).collect();
    let run = rk4_block(&h, &psi0, sys.tau, steps, 1.0, 0)?;
    let mut out = StateVector::zeros(vec![4, 4, 4]);
    for (k, &i) in idx.iter().enumerate() {
        out.amps_mut()[i] = run.psi[k];
    }
    Ok(Trajectory {
        times: time_grid(sys.tau, steps),
        rydberg_pop: run.rydberg_pop,
        norm_sqr: run.norm_sqr,
        final_state: out,
    })
}

/// States at roughly `samples` evenly spaced times (always including 0 and
/// τ), evolved from `initial` at `steps` resolution.
pub fn evolve_sampled(
    initial: &StateVector,
    p: &PulseParams,
    sys: &SystemParams,
    steps: usize,
    samples: usize,
) -> Result<Vec<(f64, StateVector)>> {
    check_initial(initial, steps)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let h = SparseHamiltonian::new(p, sys, None)?;
    let idx = h.register_indices();
    let psi0: Vec<C64> = idx.iter().map(|&i| initial.amps()[i]).collect();
    let every = steps.div_ceil(samples).max(1);
    let run = rk4_block(&h, &psi0, sys.tau, steps, 1.0, every)?;
    run.snapshots
        .into_iter()
        .map(|(step, psi)| {
            let mut out = StateVector::zeros(vec![4, 4, 4]);
            for (k, &i) in idx.iter().enumerate() {
                out.amps_mut()[i] = psi[k];
            }
            Ok((sys.tau * step as f64 / steps as f64, out))
        })
        .collect()
}

/// The eight excitation sectors of the register: ions flagged `true` start
/// in `|1>`, the others stay in the dark `|0>` level.
fn sectors() -> impl Iterator<Item = [bool; N_IONS]> {
    (0..8u8).map(|m| [m & 1 != 0, m & 2 != 0, m & 4 != 0])
}

/// Evolve `|+++>` by integrating each excitation sector separately.
///
/// `|0>` is dark, so the 64-dim problem splits into independent blocks of
/// dimension `3^k`. Blocks related by relabelling ions (single-ion sectors,
/// and the two nearest-neighbour pairs under the 1↔3 mirror) are integrated
/// once. The result equals [`evolve`] on `|+++>` up to rounding.
pub fn evolve_plus(p: &PulseParams, sys: &SystemParams, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    sys.validate()?;
    let weight: f64 = 1.0 / 8.0;
    let amp0 = C64::new(weight.sqrt(), 0.0);
    let mut amps = vec![ZERO; REGISTER_DIM];
    let mut pop = vec![0.0; steps + 1];
    let mut nrm = vec![0.0; steps + 1];
    // |000> never moves
    amps[0] = amp0;
    nrm.iter_mut().for_each(|x| *x += weight);

    let mut cache: Vec<([bool; N_IONS], SparseHamiltonian, BlockRun)> = Vec::new();
    for sector in sectors().filter(|s| s.iter().any(|&a| a)) {
        // canonical representative and the ion relabelling onto it
        let (canon, perm): ([bool; N_IONS], [usize; N_IONS]) = match sector {
            [false, true, false] | [false, false, true] => {
                let src = sector.iter().position(|&a| a).unwrap();
                let mut perm = [0, 1, 2];
                perm.swap(0, src);
                ([true, false, false], perm)
            }
            [false, true, true] => ([true, true, false], [2, 1, 0]),
            s => (s, [0, 1, 2]),
        };
        if !cache.iter().any(|(c, _, _)| *c == canon) {
            let h = SparseHamiltonian::new(p, sys, Some(canon))?;
            let psi0: Vec<C64> = h
                .basis
                .iter()
                .map(|lv| {
                    if lv.iter().zip(&canon).all(|(&l, &a)| l == usize::from(a)) {
                        amp0
                    } else {
                        ZERO
                    }
                })
                .collect();
            let run = rk4_block(&h, &psi0, sys.tau, steps, 1.0, 0)?;
            cache.push((canon, h, run));
        }
        let (_, h, run) = cache.iter().find(|(c, _, _)| *c == canon).unwrap();
        for (k, lv) in h.basis.iter().enumerate() {
            // perm maps canonical ion positions onto this sector's ions
            let mut target = [0usize; N_IONS];
            for ion in 0..N_IONS {
                target[perm[ion]] = lv[ion];
            }
            amps[target[0] + 4 * (target[1] + 4 * target[2])] = run.psi[k];
        }
        for s in 0..=steps {
            pop[s] += run.rydberg_pop[s];
            nrm[s] += run.norm_sqr[s];
        }
    }
    Ok(Trajectory {
        times: time_grid(sys.tau, steps),
        rydberg_pop: pop,
        norm_sqr: nrm,
        final_state: StateVector::new(vec![4, 4, 4], amps)?,
    })
}

/// `‖ψ_N − ψ_2N‖` for final states at `steps` and `2·steps`.
pub fn step_difference(initial: &StateVector, p: &PulseParams, sys: &SystemParams, steps: usize) -> Result<f64> {
    let a = evolve(initial, p, sys, steps)?.final_state;
    let b = evolve(initial, p, sys, 2 * steps)?.final_state;
    a.distance(&b)
}

/// Ratio of successive step differences under step halving; about 16 for a
/// fourth-order integrator in its asymptotic regime.
pub fn convergence_check(initial: &StateVector, p: &PulseParams, sys: &SystemParams, steps: usize) -> Result<f64> {
    if !steps.is_multiple_of(2) {
        return Err(Error::InvalidParameter("steps must be even".into()));
    }
    let coarse = step_difference(initial, p, sys, steps)?;
    let fine = step_difference(initial, p, sys, 2 * steps)?;
    Ok(coarse / fine)
}
