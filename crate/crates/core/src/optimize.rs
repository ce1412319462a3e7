//! Bounded differential evolution and pulse-parameter scans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{default_steps, evolve_plus, steps_at};
use crate::metrics::{analyze, ErrorBreakdown, GateKind};
use crate::model::{PulseParams, SystemParams};

/// Box constraints, one `(lower, upper)` pair per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds(pub Vec<(f64, f64)>);

impl Bounds {
    /// `Ω0 ∈ [0, 4]`, `δ0 ∈ [0, 10]`, `Δ0 ∈ [-10, 10]`, all in units of `V`.
    pub fn pulse() -> Self {
        Bounds(vec![(0.0, 4.0), (0.0, 10.0), (-10.0, 10.0)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidParameter("empty bounds".into()));
        }
        for &(lo, hi) in &self.0 {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!("bad bound [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Base vector of the mutation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// rand/1/bin: a random member.
    #[default]
    Rand1Bin,
    /// best/1/bin: the current best member; converges faster, explores less.
    Best1Bin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    pub strategy: Strategy,
    pub population_size: usize,
    /// Mutation factor drawn uniformly from this range once per generation.
    pub mutation: (f64, f64),
    pub crossover: f64,
    pub max_generations: usize,
    /// Stop once `max - min` of the population costs falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::default(),
            population_size: 45,
            mutation: (0.5, 1.0),
            crossover: 0.7,
            max_generations: 300,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::InvalidParameter("population_size must be >= 4".into()));
        }
        let (a, b) = self.mutation;
        if !(a > 0.0 && a <= b && b <= 2.0) {
            return Err(Error::InvalidParameter(format!("mutation range ({a}, {b})")));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidParameter(format!("crossover {}", self.crossover)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    /// Best cost after initialisation and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
}

fn sanitize(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

/// Minimise `cost` over `bounds` with differential evolution (rand/1/bin or
/// best/1/bin).
///
/// Trial vectors are drawn sequentially from one seeded stream and then
/// scored in parallel, so the result does not depend on the thread count.
/// Non-finite costs count as `+∞`.
pub fn minimize<F>(cost: F, bounds: &Bounds, cfg: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    bounds.validate()?;
    cfg.validate()?;
    let dim = bounds.dim();
    let np = cfg.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|_| bounds.0.iter().map(|&(lo, hi)| lo + rng.gen::<f64>() * (hi - lo)).collect())
        .collect();
    let mut costs: Vec<f64> = pop.par_iter().map(|x| sanitize(cost(x))).collect();
    let mut evaluations = np;
    let argmin = |c: &[f64]| {
        c.iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v < c[b] { i } else { b })
    };
    let mut history = vec![costs[argmin(&costs)]];
    let mut generations = 0;

    for _ in 0..cfg.max_generations {
        let spread = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - costs.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread.is_finite() && spread <= cfg.tolerance {
            break;
        }
        let f = cfg.mutation.0 + rng.gen::<f64>() * (cfg.mutation.1 - cfg.mutation.0);
        let best = argmin(&costs);
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = || loop {
                    let r = rng.gen_range(0..np);
                    if r != i {
                        break r;
                    }
                };
                let r1 = match cfg.strategy {
                    Strategy::Rand1Bin => pick(),
                    Strategy::Best1Bin => best,
                };
                let r2 = loop {
                    let r = pick();
                    if r != r1 {
                        break r;
                    }
                };
                let r3 = loop {
                    let r = pick();
                    if r != r1 && r != r2 {
                        break r;
                    }
                };
                let jrand = rng.gen_range(0..dim);
                (0..dim)
                    .map(|j| {
                        if j == jrand || rng.gen::<f64>() < cfg.crossover {
                            let (lo, hi) = bounds.0[j];
                            let base = pop[r1][j];
                            let v = base + f * (pop[r2][j] - pop[r3][j]);
                            // bounce back between the violated bound and the base
                            if v < lo {
                                lo + rng.gen::<f64>() * (base - lo)
                            } else if v > hi {
                                hi - rng.gen::<f64>() * (hi - base)
                            } else {
                                v
                            }
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_costs: Vec<f64> = trials.par_iter().map(|x| sanitize(cost(x))).collect();
        evaluations += np;
        for (i, (x, c)) in trials.into_iter().zip(trial_costs).enumerate() {
            if c <= costs[i] {
                pop[i] = x;
                costs[i] = c;
            }
        }
        generations += 1;
        history.push(costs[argmin(&costs)]);
    }
    let b = argmin(&costs);
    Ok(DeResult {
        best: pop[b].clone(),
        best_cost: costs[b],
        history,
        evaluations,
        generations,
    })
}

/// Settings for optimising one gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateSearch {
    pub kind: GateKind,
    pub de: DeConfig,
    /// Independent DE runs with seeds `de.seed, de.seed + 1, ...`.
    pub starts: usize,
    /// RK4 resolution (steps per unit time) used while searching.
    pub search_resolution: f64,
    pub bounds: Bounds,
}

impl Default for GateSearch {
    fn default() -> Self {
        Self {
            kind: GateKind::Ccz,
            de: DeConfig::default(),
            starts: 3,
            search_resolution: 256.0,
            bounds: Bounds::pulse(),
        }
    }
}

/// `1 - F` for a pulse, `+∞` on any evaluation failure.
pub fn infidelity(p: &PulseParams, sys: &SystemParams, kind: GateKind, steps: usize) -> f64 {
    evolve_plus(p, sys, steps)
        .and_then(|tr| analyze(&tr, kind, sys.gamma))
        .map(|(_, b)| 1.0 - b.fidelity)
        .unwrap_or(f64::INFINITY)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateOptimum {
    pub params: PulseParams,
    /// Scores at the default resolution.
    pub errors: ErrorBreakdown,
    /// Infidelity seen by the search at its own resolution.
    pub search_cost: f64,
    pub seed: u64,
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Multi-start DE over the pulse parameters; the winner is re-scored at
/// [`default_steps`].
pub fn optimize_gate(sys: &SystemParams, search: &GateSearch) -> Result<GateOptimum> {
    sys.validate()?;
    if search.starts == 0 {
        return Err(Error::InvalidParameter("starts must be >= 1".into()));
    }
    let steps = steps_at(sys.tau, search.search_resolution);
    let cost = |x: &[f64]| infidelity(&PulseParams::from_array([x[0], x[1], x[2]]), sys, search.kind, steps);
    let mut best: Option<(DeResult, u64)> = None;
    let mut evaluations = 0;
    for s in 0..search.starts as u64 {
        let cfg = DeConfig {
            seed: search.de.seed.wrapping_add(s),
            ..search.de.clone()
        };
        let r = minimize(cost, &search.bounds, &cfg)?;
        evaluations += r.evaluations;
        if best.as_ref().is_none_or(|(b, _)| r.best_cost < b.best_cost) {
            best = Some((r, cfg.seed));
        }
    }
    let (r, seed) = best.expect("at least one start");
    if !r.best_cost.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    let params = PulseParams::from_array([r.best[0], r.best[1], r.best[2]]);
    let tr = evolve_plus(&params, sys, default_steps(sys.tau))?;
    let (_, errors) = analyze(&tr, search.kind, sys.gamma)?;
    Ok(GateOptimum {
        params,
        errors,
        search_cost: r.best_cost,
        seed,
        history: r.history,
        evaluations,
    })
}

/// One row of a scan table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub tau: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub fidelity: f64,
    pub p_bar: f64,
    pub phi_bar: f64,
    pub p_dec: f64,
    pub omega0: f64,
    pub delta0: f64,
    #[serde(rename = "Delta0")]
    pub big_delta0: f64,
    pub seed: u64,
}

impl ScanRow {
    fn new(sys: &SystemParams, o: &GateOptimum) -> Self {
        Self {
            tau: sys.tau,
            gamma: sys.gamma,
            alpha: sys.alpha,
            fidelity: o.errors.fidelity,
            p_bar: o.errors.p_bar,
            phi_bar: o.errors.phi_bar,
            p_dec: o.errors.p_bar_dec,
            omega0: o.params.omega0,
            delta0: o.params.delta0,
            big_delta0: o.params.big_delta0,
            seed: o.seed,
        }
    }
}

/// A scan point that could not be optimised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub tau: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub failures: Vec<ScanFailure>,
}

impl ScanTable {
    pub fn best(&self) -> Option<&ScanRow> {
        self.rows
            .iter()
            .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
    }

    /// CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        if self.rows.is_empty() {
            wr.write_record([
                "tau", "gamma", "alpha", "fidelity", "p_bar", "phi_bar", "p_dec", "omega0", "delta0", "Delta0", "seed",
            ])?;
        }
        wr.flush()
    }
}

/// Point `index` starts from seed `de.seed + index · starts`, so no two
/// points share a DE stream.
fn run_point(sys: SystemParams, search: &GateSearch, index: usize, table: &mut ScanTable) {
    let mut search = search.clone();
    search.de.seed = search.de.seed.wrapping_add((index * search.starts) as u64);
    match optimize_gate(&sys, &search) {
        Ok(o) => table.rows.push(ScanRow::new(&sys, &o)),
        Err(e) => table.failures.push(ScanFailure {
            tau: sys.tau,
            gamma: sys.gamma,
            alpha: sys.alpha,
            error: e.to_string(),
        }),
    }
}

/// Independent optimisation at each gate time.
pub fn scan_tau(taus: &[f64], base: &SystemParams, search: &GateSearch) -> ScanTable {
    scan_grid(&[base.alpha], &[base.gamma], taus, base, search)
}

/// Grid over `(α, τ)`, α outer.
pub fn scan_alpha(alphas: &[f64], taus: &[f64], base: &SystemParams, search: &GateSearch) -> ScanTable {
    scan_grid(alphas, &[base.gamma], taus, base, search)
}

/// Grid over `(α, γ, τ)` in that nesting order; a point that fails is
/// recorded in [`ScanTable::failures`] and the scan carries on.
pub fn scan_grid(alphas: &[f64], gammas: &[f64], taus: &[f64], base: &SystemParams, search: &GateSearch) -> ScanTable {
    let mut table = ScanTable::default();
    let mut index = 0;
    for &alpha in alphas {
        for &gamma in gammas {
            for &tau in taus {
                run_point(SystemParams { tau, gamma, alpha, ..*base }, search, index, &mut table);
                index += 1;
            }
        }
    }
    table
}
