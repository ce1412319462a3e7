//! Versioned JSON run configuration and the provenance block embedded in
//! every output file.

use serde::{Deserialize, Serialize};

use crate::bacon_shor::ChainLayout;
use crate::error::{Error, Result};
use crate::ft::SweepConfig;
use crate::model::{PulseParams, SystemParams, UnitScale};
use crate::optimize::GateSearch;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Master seed; copied into every block's own seed by [`RunConfig::resolved`].
    pub seed: u64,
    pub units: UnitScale,
    pub optimize: OptimizeConfig,
    pub scan: ScanConfig,
    pub qec: QecConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION,
            seed: 0,
            units: UnitScale::default(),
            optimize: OptimizeConfig::default(),
            scan: ScanConfig::default(),
            qec: QecConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub system: SystemParams,
    pub search: GateSearch,
    /// Skip the search and score these parameters.
    pub replay: Option<PulseParams>,
    /// Rows in the trajectory CSV.
    pub trajectory_samples: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::new(25.0, 20.0, 0.0),
            search: GateSearch::default(),
            replay: None,
            trajectory_samples: 400,
        }
    }
}

/// Grid over `alphas × gammas × taus`; every point runs its own search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub system: SystemParams,
    pub taus: Vec<f64>,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub search: GateSearch,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::new(87.5, 20.0, 0.0),
            taus: vec![25.0, 50.0, 87.5],
            gammas: vec![0.0],
            alphas: vec![0.125],
            search: GateSearch::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QecConfig {
    /// Roles along the chain, e.g. `d1 d2 d3 A1 s1 ...`.
    pub layout: String,
    /// Replace data-ancilla FT SWAPs by plain ones where the single-fault
    /// criterion allows.
    pub relax: bool,
    /// Build the non-fault-tolerant readout order instead.
    pub negative_control: bool,
    pub sweep: SweepConfig,
}

impl Default for QecConfig {
    fn default() -> Self {
        Self {
            layout: ChainLayout::default().to_text(),
            relax: true,
            negative_control: false,
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Copy with the master seed pushed into every block.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.optimize.search.de.seed = c.seed;
        c.scan.search.de.seed = c.seed;
        c.qec.sweep.seed = c.seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("schema version {} (expected {SCHEMA_VERSION})", self.version));
        }
        if !(self.units.v_mhz > 0.0 && self.units.v_mhz.is_finite()) {
            return bad("units.v_mhz must be positive".into());
        }
        let o = &self.optimize;
        o.system.validate()?;
        check_search(&o.search, "optimize")?;
        if o.trajectory_samples < 2 {
            return bad("optimize.trajectory_samples must be >= 2".into());
        }
        let s = &self.scan;
        s.system.validate()?;
        check_search(&s.search, "scan")?;
        if s.taus.is_empty() || s.gammas.is_empty() || s.alphas.is_empty() {
            return bad("scan grids must be non-empty".into());
        }
        for &t in &s.taus {
            for &g in &s.gammas {
                for &a in &s.alphas {
                    SystemParams { tau: t, gamma: g, alpha: a, ..s.system }.validate()?;
                }
            }
        }
        ChainLayout::parse(&self.qec.layout)?;
        self.qec.sweep.validate()
    }
}

fn check_search(s: &GateSearch, block: &str) -> Result<()> {
    if s.bounds.0.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "{block}.search.bounds needs 3 intervals, got {}",
            s.bounds.0.len()
        )));
    }
    s.bounds.validate()?;
    s.de.validate()?;
    if s.starts == 0 || s.search_resolution.is_nan() || s.search_resolution <= 0.0 {
        return Err(Error::InvalidParameter(format!("{block}.search: starts and resolution must be positive")));
    }
    Ok(())
}

/// Embedded in every output: who wrote it and from what.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: "rydion".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
        }
    }

    /// Single-line form for CSV comment headers.
    pub fn to_comment(&self) -> String {
        format!("# provenance {}\n", serde_json::to_string(self).expect("provenance serialises"))
    }
}
