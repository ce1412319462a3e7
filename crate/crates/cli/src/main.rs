//! `rydion`: batch front-end for gate optimisation, parameter scans and the
//! Bacon-Shor QEC cycle.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use rydion::bacon_shor::{build_qec_cycle, ChainLayout, CycleOptions, LogicalState, QecCycle};
use rydion::circuit::NoiseClass;
use rydion::config::{Provenance, RunConfig};
use rydion::evolve::{default_steps, evolve_plus, evolve_sampled};
use rydion::ft::{self, RelaxReport, ScanReport};
use rydion::metrics::{analyze, GateOutcome, BASIS_LABELS};
use rydion::model::{pulse_envelope, rydberg_population, PulseParams};
use rydion::optimize::{optimize_gate, scan_grid, GateOptimum};
use rydion::quantum::StateVector;

#[derive(Parser, Debug)]
#[command(name = "rydion", version, about = "Rydberg-ion CCZ gates and Bacon-Shor QEC cycles")]
struct Cli {
    /// JSON run configuration; defaults are used for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimise (or replay) one gate; writes optimize.json and trajectory.csv.
    Optimize,
    /// Optimise over the (alpha, gamma, tau) grid; writes scan.csv and scan.json.
    Scan,
    /// Build, certify and sweep the QEC cycle.
    Qec {
        /// Use the non-fault-tolerant readout order.
        #[arg(long)]
        negative_control: bool,
        /// Stop after the single-fault scan.
        #[arg(long)]
        certify_only: bool,
    },
    /// Print the resolved configuration as JSON.
    Config,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("config: {0}")]
    Config(String),
    #[error("fault-tolerance certification failed: {0}")]
    Certification(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] rydion::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Certification(_) => 3,
            Failure::Numerical(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Config => {
            println!("{}", cfg.to_json());
            Ok(())
        }
        Command::Optimize => cmd_optimize(&cfg, &cli.out),
        Command::Scan => cmd_scan(&cfg, &cli.out),
        Command::Qec {
            negative_control,
            certify_only,
        } => {
            let mut cfg = cfg;
            cfg.qec.negative_control |= negative_control;
            cmd_qec(&cfg, &cli.out, certify_only)
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg.resolved())
}

fn create(out: &Path, name: &str) -> CliResult<fs::File> {
    fs::create_dir_all(out)?;
    Ok(fs::File::create(out.join(name))?)
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut f = create(out, name)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::from)?;
    f.write_all(b"\n")?;
    eprintln!("wrote {}", out.join(name).display());
    Ok(())
}

// ---- optimize ----

fn cmd_optimize(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let o = &cfg.optimize;
    let sys = o.system;
    let start = Instant::now();
    let (params, search): (PulseParams, Option<GateOptimum>) = match o.replay {
        Some(p) => (p, None),
        None => {
            let opt = optimize_gate(&sys, &o.search)?;
            (opt.params, Some(opt))
        }
    };
    let tr = evolve_plus(&params, &sys, default_steps(sys.tau))?;
    let (outcome, errors) = analyze(&tr, o.search.kind, sys.gamma)?;
    eprintln!(
        "F = {:.6}  p_bar = {:.3e}  phi_bar = {:.3e}  ({:.1?})",
        errors.fidelity,
        errors.p_bar,
        errors.phi_bar,
        start.elapsed()
    );
    let prov = Provenance::new("optimize", cfg);
    let summary = json!({
        "provenance": prov,
        "mode": if search.is_some() { "optimize" } else { "replay" },
        "params": params,
        "fidelity": errors.fidelity,
        "errors": errors,
        "outcome": outcome,
        "physical": {
            "tau_us": cfg.units.tau_us(sys.tau),
            "gamma_mhz": cfg.units.gamma_mhz(sys.gamma),
        },
        "search": search.as_ref().map(|s| json!({
            "search_cost": s.search_cost,
            "seed": s.seed,
            "evaluations": s.evaluations,
            "history": s.history,
        })),
    });
    write_json(out, "optimize.json", &summary)?;

    let samples = o.trajectory_samples;
    let snaps = evolve_sampled(&StateVector::plus_all(3, 4), &params, &sys, default_steps(sys.tau), samples)?;
    let mut f = create(out, "trajectory.csv")?;
    f.write_all(prov.to_comment().as_bytes())?;
    write_trajectory(f, &snaps, &params, &sys)?;
    eprintln!("wrote {}", out.join("trajectory.csv").display());
    Ok(())
}

/// Multi-excitation states whose entangling phases are reported.
const PHASE_STATES: [usize; 4] = [3, 5, 6, 7];

fn write_trajectory<W: Write>(
    w: W,
    snaps: &[(f64, StateVector)],
    p: &PulseParams,
    sys: &rydion::model::SystemParams,
) -> CliResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "omega_l".into(), "delta_l".into()];
    header.extend(BASIS_LABELS.iter().map(|l| format!("pop_{l}")));
    header.push("rydberg".into());
    header.extend(PHASE_STATES.iter().map(|&k| format!("phi_ent_{}", BASIS_LABELS[k])));
    wr.write_record(&header)?;
    for (t, state) in snaps {
        let (omega_l, delta_l) = pulse_envelope(*t, p, sys)?;
        let amps = rydion::metrics::computational_amplitudes(state)?;
        let mut row = vec![t.to_string(), omega_l.to_string(), delta_l.to_string()];
        row.extend(amps.iter().map(|a| a.norm_sqr().to_string()));
        row.push(rydberg_population(state)?.to_string());
        // phases are undefined while |100> is fully shelved
        let phases = GateOutcome::from_amplitudes(&amps).ok();
        row.extend(
            PHASE_STATES
                .iter()
                .map(|&k| phases.as_ref().map_or(f64::NAN, |o| o.phi_ent[k]).to_string()),
        );
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

// ---- scan ----

fn cmd_scan(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let s = &cfg.scan;
    let start = Instant::now();
    let table = scan_grid(&s.alphas, &s.gammas, &s.taus, &s.system, &s.search);
    eprintln!(
        "{} points, {} failed ({:.1?})",
        table.rows.len() + table.failures.len(),
        table.failures.len(),
        start.elapsed()
    );
    for f in &table.failures {
        eprintln!("  tau={} gamma={} alpha={}: {}", f.tau, f.gamma, f.alpha, f.error);
    }
    let prov = Provenance::new("scan", cfg);
    let mut f = create(out, "scan.csv")?;
    f.write_all(prov.to_comment().as_bytes())?;
    table.write_csv(f)?;
    eprintln!("wrote {}", out.join("scan.csv").display());
    write_json(
        out,
        "scan.json",
        &json!({
            "provenance": prov,
            "rows": table.rows,
            "failures": table.failures,
            "best": table.best(),
        }),
    )
}

// ---- qec ----

#[derive(Serialize)]
struct CycleStats {
    cnots: usize,
    cnots_nn: usize,
    cnots_nnn: usize,
    ccz: usize,
    swaps: usize,
    ft_swaps: usize,
    noisy_ops: usize,
}

fn cycle_stats(c: &QecCycle) -> CycleStats {
    let class = |k: NoiseClass| c.circuit.noisy_ops().filter(|(_, op)| op.noise == k).count();
    CycleStats {
        cnots: c.cnot_count(),
        cnots_nn: class(NoiseClass::TwoNn),
        cnots_nnn: class(NoiseClass::TwoNnn),
        ccz: class(NoiseClass::Three),
        swaps: c.swaps.len(),
        ft_swaps: c.ft_swaps(),
        noisy_ops: c.circuit.noisy_ops().count(),
    }
}

fn cmd_qec(cfg: &RunConfig, out: &Path, certify_only: bool) -> CliResult<()> {
    let q = &cfg.qec;
    let layout = ChainLayout::parse(&q.layout).map_err(|e| Failure::Config(e.to_string()))?;
    let prov = Provenance::new("qec", cfg);
    let start = Instant::now();

    let (cycle, relax): (QecCycle, Option<RelaxReport>) = if q.relax {
        let (c, r) = ft::relax_swaps(&layout, q.negative_control)?;
        eprintln!(
            "relaxed {}/{} data-ancilla swaps: {} -> {} CNOTs ({:.1?})",
            r.relaxed.len(),
            r.candidates,
            r.baseline_cnots,
            r.cnots,
            start.elapsed()
        );
        (c, Some(r))
    } else {
        let options = CycleOptions {
            negative_control: q.negative_control,
            ..CycleOptions::default()
        };
        (build_qec_cycle(&layout, &options)?, None)
    };
    let stats = cycle_stats(&cycle);
    let mut f = create(out, "qec_cycle.txt")?;
    f.write_all(prov.to_comment().as_bytes())?;
    f.write_all(cycle.circuit.to_text().as_bytes())?;
    eprintln!("wrote {}", out.join("qec_cycle.txt").display());

    let mut scans = Vec::new();
    for st in LogicalState::BOTH {
        let r = ft::single_fault_scan(&cycle, st)?;
        eprintln!(
            "scan {}: {} locations, {} failing ({:.1?})",
            st.label(),
            r.locations,
            r.failures.len(),
            start.elapsed()
        );
        scans.push(r);
    }
    write_json(
        out,
        "qec_scan.json",
        &json!({
            "provenance": prov,
            "negative_control": q.negative_control,
            "cycle": stats,
            "relax": relax,
            "scans": scans,
        }),
    )?;
    let failing: Vec<String> = scans
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{} ({} locations)", r.state.label(), r.failures.len()))
        .collect();
    if !failing.is_empty() {
        return Err(Failure::Certification(format!(
            "single faults cause logical failure for {}; see {}",
            failing.join(", "),
            out.join("qec_scan.json").display()
        )));
    }
    if certify_only {
        return Ok(());
    }

    let scans: [ScanReport; 2] = scans.try_into().expect("two logical states");
    let sweep = ft::lambda_sweep(&cycle, &scans, &q.sweep)?;
    for p in &sweep.points {
        eprintln!(
            "lambda={:.4} {}: {}/{} p_L={:.3e}",
            p.lambda,
            p.state.label(),
            p.failures,
            p.trials,
            p.p_l
        );
    }
    let mut f = create(out, "qec_rates.csv")?;
    f.write_all(prov.to_comment().as_bytes())?;
    ft::write_rates_csv(&sweep.points, f)?;
    eprintln!("wrote {}", out.join("qec_rates.csv").display());

    let fits: Vec<_> = sweep
        .fits
        .iter()
        .map(|(st, fit)| {
            let refusal = fit.is_none().then(|| {
                format!(
                    "fit refused: fewer than 2 usable points after excluding the {} largest lambdas",
                    ft::FIT_EXCLUDE
                )
            });
            if let Some(f) = fit {
                eprintln!("{}: alpha = {:.3} +- {:.3}", st.label(), f.alpha, f.alpha_stderr);
            }
            json!({
                "state": st,
                "alpha": fit.map(|f| f.alpha),
                "alpha_stderr": fit.map(|f| f.alpha_stderr),
                "c": fit.map(|f| f.c),
                "points": fit.map(|f| f.points),
                "refusal": refusal,
            })
        })
        .collect();
    write_json(
        out,
        "qec_summary.json",
        &json!({
            "provenance": prov,
            "cycle": stats,
            "relax": relax,
            "fit_exclude_largest": ft::FIT_EXCLUDE,
            "fits": fits,
            "points": sweep.points,
        }),
    )
}
