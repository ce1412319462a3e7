//! Fault-tolerance certification and logical-error scaling of the routed
//! Bacon-Shor cycle.
//!
//! A single fault is a nontrivial Pauli on the qubits of one noisy gate,
//! inserted right after it. Its logical failure probability is computed
//! exactly: the cycle is run from the faulty state branching over every reset
//! outcome, and the final state is read by the ideal decoder.

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bacon_shor::{build_qec_cycle, ChainLayout, CycleOptions, LogicalState, QecCycle, SwapKind};
use crate::circuit::{apply_pauli, pauli_string, Circuit, FaultLocation, NoiseClass, NoiseModel, Pauli};
use crate::error::{Error, Result};
use crate::quantum::C64;

/// Failure probabilities above this count as a logical failure.
pub const FAILURE_TOL: f64 = 1e-9;

/// Default noise at `λ = 1`, from the cryogenic gate fidelities.
pub const DEFAULT_NOISE: NoiseModel = NoiseModel {
    p2_nn: 3.125e-3,
    p2_nnn: 1.738e-2,
    p3: 2.903e-2,
    lambda: 1.0,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultOutcome {
    pub op: usize,
    pub gate: String,
    pub pauli: Vec<Pauli>,
    pub p_fail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub state: LogicalState,
    /// Number of (gate, Pauli) locations examined.
    pub locations: usize,
    pub max_p_fail: f64,
    pub failures: Vec<FaultOutcome>,
    /// Failure probability per examined location, keyed by `(op, pauli index)`.
    #[serde(skip)]
    pub table: HashMap<(usize, usize), f64>,
}

impl ScanReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Exhaustive scan of every single fault in the cycle.
pub fn single_fault_scan(cycle: &QecCycle, state: LogicalState) -> Result<ScanReport> {
    scan_ops(cycle, state, 0..cycle.circuit.ops.len())
}

/// Scan of the single faults on noisy gates with index in `ops`.
pub fn scan_ops(cycle: &QecCycle, state: LogicalState, ops: Range<usize>) -> Result<ScanReport> {
    let c = &cycle.circuit;
    let fin = cycle.final_positions();
    let mut amps = cycle.initial_state(state).into_amps();
    let mut table = HashMap::new();
    let mut failures = Vec::new();
    let mut max_p: f64 = 0.0;
    for (i, op) in c.ops.iter().enumerate().take(ops.end) {
        Circuit::step(&mut amps, op)?;
        if i < ops.start || op.noise == NoiseClass::None {
            continue;
        }
        let n = op.qubits.len();
        let results: Vec<(usize, f64)> = (1..1usize << (2 * n))
            .into_par_iter()
            .map(|k| {
                let mut a = amps.clone();
                apply_pauli(&mut a, &op.qubits, &pauli_string(k, n));
                (k, failure_after(c, a, i + 1, &fin, state))
            })
            .collect();
        for (k, p) in results {
            max_p = max_p.max(p);
            table.insert((i, k), p);
            if p > FAILURE_TOL {
                failures.push(FaultOutcome {
                    op: i,
                    gate: op.to_string(),
                    pauli: pauli_string(k, n),
                    p_fail: p,
                });
            }
        }
    }
    Ok(ScanReport {
        state,
        locations: table.len(),
        max_p_fail: max_p,
        failures,
        table,
    })
}

/// Exact failure probability of running `ops[start..]` from `amps`.
fn failure_after(c: &Circuit, amps: Vec<C64>, start: usize, fin: &[usize; 9], state: LogicalState) -> f64 {
    c.branch_from(amps, start)
        .into_iter()
        .map(|(p, b)| p * crate::bacon_shor::logical_failure(&b, fin, state))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxReport {
    pub candidates: usize,
    pub relaxed: Vec<usize>,
    pub baseline_cnots: usize,
    pub cnots: usize,
}

impl RelaxReport {
    pub fn cnot_ratio(&self) -> f64 {
        self.cnots as f64 / self.baseline_cnots as f64
    }
}

/// Start from the all-FT build and turn data-ancilla SWAPs into plain SWAPs
/// one at a time, keeping each change only if no single fault inside that
/// SWAP causes a logical failure for either logical state.
///
/// Checking only the gadget's own gates suffices: both variants implement the
/// same unitary, helper transport does not depend on the choice, and every
/// other gate is unchanged, so faults elsewhere propagate identically.
pub fn relax_swaps(layout: &ChainLayout, negative_control: bool) -> Result<(QecCycle, RelaxReport)> {
    let mut options = CycleOptions {
        relaxed: BTreeSet::new(),
        negative_control,
    };
    let baseline = build_qec_cycle(layout, &options)?;
    let candidates = baseline.candidate_swaps();
    let mut current = baseline.clone();
    for ordinal in 0..candidates {
        let mut trial = options.clone();
        trial.relaxed.insert(ordinal);
        let cycle = build_qec_cycle(layout, &trial)?;
        let rec = cycle
            .swap_by_ordinal(ordinal)
            .ok_or_else(|| Error::Circuit(format!("swap {ordinal} vanished after relaxation")))?;
        debug_assert_eq!(rec.kind, SwapKind::Plain);
        let range = rec.ops.0..rec.ops.1;
        let mut ok = true;
        for st in LogicalState::BOTH {
            if !scan_ops(&cycle, st, range.clone())?.passed() {
                ok = false;
                break;
            }
        }
        if ok {
            options = trial;
            current = cycle;
        }
    }
    let report = RelaxReport {
        candidates,
        relaxed: options.relaxed.iter().copied().collect(),
        baseline_cnots: baseline.cnot_count(),
        cnots: current.cnot_count(),
    };
    Ok((current, report))
}

// ---- Monte Carlo ----

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub noise: NoiseModel,
    /// Stop a point once this many failures were seen...
    pub target_failures: u64,
    /// ...or this many trajectories were run.
    pub max_trials: u64,
    /// Trajectories per independently seeded batch.
    pub batch: u64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: default_lambdas(),
            noise: DEFAULT_NOISE,
            target_failures: 100,
            max_trials: 2_000_000,
            batch: 2_000,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(Error::InvalidParameter("lambdas must be non-empty and in (0, 1]".into()));
        }
        if self.batch == 0 || self.max_trials == 0 {
            return Err(Error::InvalidParameter("batch and max_trials must be positive".into()));
        }
        Ok(())
    }
}

/// Eight logarithmically spaced points in `[0.02, 1]`.
pub fn default_lambdas() -> Vec<f64> {
    let (a, b) = (0.02f64.ln(), 0.0f64);
    (0..8).map(|i| (a + (b - a) * i as f64 / 7.0).exp()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub lambda: f64,
    pub state: LogicalState,
    pub trials: u64,
    pub failures: u64,
    pub p_l: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the combined key
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Logical failure rate of one cycle under depolarizing noise.
///
/// Each trajectory draws a fault on every noisy gate independently. With no
/// fault it succeeds; with one fault the exact failure probability is looked
/// up in `scan`; with more the faulty circuit is simulated with sampled
/// resets. A Bernoulli draw with the resulting probability decides failure.
pub fn logical_error_rate(
    cycle: &QecCycle,
    state: LogicalState,
    noise: &NoiseModel,
    scan: &ScanReport,
    cfg: &SweepConfig,
    point: u64,
) -> Result<RatePoint> {
    noise.validate()?;
    if scan.state != state {
        return Err(Error::InvalidParameter("scan table for the other logical state".into()));
    }
    let noisy: Vec<(usize, f64, usize)> = cycle
        .circuit
        .noisy_ops()
        .map(|(i, op)| (i, noise.probability(op.noise), op.qubits.len()))
        .collect();
    if noisy.iter().any(|&(i, _, n)| !(1..1usize << (2 * n)).all(|k| scan.table.contains_key(&(i, k)))) {
        return Err(Error::InvalidParameter("scan table does not cover the cycle".into()));
    }
    let initial = cycle.initial_state(state);
    let fin = cycle.final_positions();
    let state_tag = state as u64;

    let run_batch = |b: u64| -> Result<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, point * 2 + state_tag, b));
        let mut fails = 0u64;
        let mut faults = Vec::new();
        for _ in 0..cfg.batch {
            faults.clear();
            for &(i, p, n) in &noisy {
                if p > 0.0 && rng.gen::<f64>() < p {
                    let k = rng.gen_range(1..1usize << (2 * n));
                    faults.push((i, k, n));
                }
            }
            let p_fail = match faults.len() {
                0 => 0.0,
                1 => scan.table[&(faults[0].0, faults[0].1)],
                _ => {
                    let locs: Vec<FaultLocation> = faults
                        .iter()
                        .map(|&(op, k, n)| FaultLocation {
                            op,
                            pauli: pauli_string(k, n),
                        })
                        .collect();
                    let out = cycle.circuit.run_with_faults(&initial, &locs, &mut rng)?;
                    crate::bacon_shor::logical_failure(out.amps(), &fin, state)
                }
            };
            if p_fail > 0.0 && rng.gen::<f64>() < p_fail {
                fails += 1;
            }
        }
        Ok(fails)
    };

    // rounds of a fixed number of batches keep the stopping point independent
    // of the thread count
    const ROUND: u64 = 8;
    let mut trials = 0u64;
    let mut failures = 0u64;
    let mut next = 0u64;
    while failures < cfg.target_failures && trials < cfg.max_trials {
        let left = (cfg.max_trials - trials).div_ceil(cfg.batch);
        let n = ROUND.min(left);
        let counts: Vec<u64> = (next..next + n).into_par_iter().map(run_batch).collect::<Result<_>>()?;
        failures += counts.iter().sum::<u64>();
        trials += n * cfg.batch;
        next += n;
    }
    let (lo, hi) = wilson_interval(failures, trials, 1.96);
    Ok(RatePoint {
        lambda: noise.lambda,
        state,
        trials,
        failures,
        p_l: failures as f64 / trials as f64,
        ci_low: lo,
        ci_high: hi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub c: f64,
    pub alpha: f64,
    /// Standard error of the exponent (0 for an exact fit).
    pub alpha_stderr: f64,
    pub points: usize,
}

/// Least squares of `ln p = ln C + α ln λ`, dropping the `exclude_largest`
/// points with the largest `λ`.
pub fn fit_power_law(lambdas: &[f64], p: &[f64], exclude_largest: usize) -> Result<PowerLawFit> {
    if lambdas.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: lambdas.len(),
            found: p.len(),
        });
    }
    let mut pts: Vec<(f64, f64)> = lambdas.iter().copied().zip(p.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.truncate(pts.len().saturating_sub(exclude_largest));
    if pts.len() < 2 {
        return Err(Error::InsufficientPoints(pts.len()));
    }
    if pts.iter().any(|&(l, v)| !(l > 0.0 && v > 0.0)) {
        return Err(Error::InvalidParameter("power-law fit needs positive values".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|q| q.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|q| q.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("power-law fit needs distinct lambdas".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let alpha = sxy / sxx;
    let b = my - alpha * mx;
    let stderr = if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - b - alpha * x).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLawFit {
        c: b.exp(),
        alpha,
        alpha_stderr: stderr,
        points: xs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<RatePoint>,
    /// Per logical state; `None` when too few usable points remain.
    pub fits: Vec<(LogicalState, Option<PowerLawFit>)>,
}

/// Points excluded from the fit at the large-λ end.
pub const FIT_EXCLUDE: usize = 2;

/// λ sweep for both logical states followed by the power-law fits.
pub fn lambda_sweep(cycle: &QecCycle, scans: &[ScanReport; 2], cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let mut points = Vec::new();
    let mut fits = Vec::new();
    for st in LogicalState::BOTH {
        let scan = scans
            .iter()
            .find(|s| s.state == st)
            .ok_or_else(|| Error::InvalidParameter(format!("no scan for {}", st.label())))?;
        let mut ls = Vec::new();
        let mut ps = Vec::new();
        for (li, &l) in cfg.lambdas.iter().enumerate() {
            let noise = cfg.noise.scaled(l);
            let pt = logical_error_rate(cycle, st, &noise, scan, cfg, li as u64)?;
            ls.push(l);
            ps.push(pt.p_l);
            points.push(pt);
        }
        fits.push((st, fit_power_law(&ls, &ps, FIT_EXCLUDE).ok()));
    }
    Ok(SweepResult { points, fits })
}

pub fn write_rates_csv<W: std::io::Write>(points: &[RatePoint], w: W) -> std::io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lambda", "state", "trials", "failures", "p_L", "ci_low", "ci_high"])?;
    for p in points {
        wr.write_record([
            p.lambda.to_string(),
            p.state.label().to_string(),
            p.trials.to_string(),
            p.failures.to_string(),
            p.p_l.to_string(),
            p.ci_low.to_string(),
            p.ci_high.to_string(),
        ])?;
    }
    wr.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let l = default_lambdas();
        let p: Vec<f64> = l.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_power_law(&l, &p, 2).unwrap();
        assert!((f.alpha - 2.0).abs() < 1e-12 && (f.c - 3.0).abs() < 1e-12);
        assert_eq!(f.points, 6);
    }

    #[test]
    fn exclusion_drops_largest_lambdas() {
        let l = default_lambdas();
        let mut p: Vec<f64> = l.iter().map(|x| x * x).collect();
        // corrupt the two largest; the fit must not see them
        p[6] = 1e3;
        p[7] = 1e-9;
        let f = fit_power_law(&l, &p, 2).unwrap();
        assert!((f.alpha - 2.0).abs() < 1e-12);
        assert!(fit_power_law(&l, &p, 0).unwrap().alpha != 2.0);
    }

    #[test]
    fn noisy_power_law_regression() {
        let l = default_lambdas();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p: Vec<f64> = l.iter().map(|x| 2.0 * x * x * (1.0 + 0.05 * normal(&mut rng))).collect();
            let f = fit_power_law(&l, &p, 2).unwrap();
            assert!((f.alpha - 2.0).abs() < 0.1, "{}", f.alpha);
        }
    }

    /// Box-Muller standard normal.
    fn normal<R: Rng>(rng: &mut R) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    #[test]
    fn fit_refusals() {
        assert_eq!(fit_power_law(&[0.5], &[0.1], 0), Err(Error::InsufficientPoints(1)));
        assert!(fit_power_law(&[0.1, 0.2, 0.3], &[0.1, 0.0, 0.2], 0).is_err());
        assert!(fit_power_law(&[0.1, 0.2], &[0.1], 0).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(10, 1000, 1.96);
        assert!(lo < 0.01 && 0.01 < hi);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn default_grid() {
        let l = default_lambdas();
        assert_eq!(l.len(), 8);
        assert!((l[0] - 0.02).abs() < 1e-12 && (l[7] - 1.0).abs() < 1e-12);
        for w in l.windows(2) {
            assert!((w[1] / w[0] - (l[1] / l[0])).abs() < 1e-9);
        }
    }
}
