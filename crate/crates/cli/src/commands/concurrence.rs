use std::path::PathBuf;

use clap::Args;
use photonic_coherence::entanglement::{
    concurrence, concurrence_from_s, matched_state, postselected_state, simulated_postselected_state, BranchWeights,
    LL, LU, UL, UU,
};
use photonic_coherence::source::SourcePulseSpec;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::CliError;
use crate::output::write_report;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSource {
    /// Pulse area, units of π.
    pub theta_pi: f64,
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcurrenceConfig {
    /// Interferometer phase in radians.
    pub phi: f64,
    pub weights: Option<BranchWeights>,
    /// Pair coherence for the matched mixed state.
    pub s: Option<f64>,
    /// Also trace the full pulse-train simulation down to the two time bins.
    pub simulate: Option<SimulatedSource>,
    pub out: Option<PathBuf>,
}

impl Default for ConcurrenceConfig {
    fn default() -> Self {
        Self {
            phi: 0.0,
            weights: None,
            s: None,
            simulate: None,
            out: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConcurrenceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    /// Branch weights LU,UU,LL.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    s: Option<f64>,
    /// Simulated source pulse area in units of π.
    #[arg(long)]
    simulate_theta: Option<f64>,
    #[arg(long, requires = "simulate_theta")]
    simulate_m: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl ConcurrenceArgs {
    pub fn resolve(self) -> Result<ConcurrenceConfig, CliError> {
        let mut c: ConcurrenceConfig = config::load(self.config.as_deref())?;
        config::set(&mut c.phi, self.phi);
        if let Some(w) = self.weights {
            c.weights = Some(BranchWeights {
                lu: w[0],
                uu: w[1],
                ll: w[2],
            });
        }
        if self.s.is_some() {
            c.s = self.s;
        }
        if let Some(theta_pi) = self.simulate_theta {
            c.simulate = Some(SimulatedSource {
                theta_pi,
                m: self.simulate_m.unwrap_or(1.0),
            });
        }
        if self.out.is_some() {
            c.out = self.out;
        }
        if !c.phi.is_finite() {
            return Err(CliError::Config("phi: must be finite".into()));
        }
        if let Some(s) = c.s {
            if !(0.0..=1.0).contains(&s) {
                return Err(CliError::Config(format!("s: {s} outside [0, 1]")));
            }
        }
        Ok(c)
    }
}

#[derive(Serialize)]
struct Simulated {
    concurrence: f64,
    populations: [f64; 4],
}

#[derive(Serialize)]
struct Report {
    concurrence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    matched_concurrence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    concurrence_from_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulated: Option<Simulated>,
}

pub fn run(args: ConcurrenceArgs) -> Result<(), CliError> {
    let c = args.resolve()?;
    let state = postselected_state(c.phi, c.weights)?;
    let matched = c.s.map(|s| matched_state(c.phi, s)).transpose()?;
    let simulated = c
        .simulate
        .map(|src| {
            let spec = SourcePulseSpec::new(src.theta_pi * std::f64::consts::PI, 0.0).with_overlap(src.m);
            simulated_postselected_state(&spec, c.phi).map(|rho| Simulated {
                concurrence: concurrence(&rho),
                populations: [UU, UL, LU, LL].map(|i| rho.population(i)),
            })
        })
        .transpose()?;
    let report = Report {
        concurrence: concurrence(&state),
        matched_concurrence: matched.as_ref().map(concurrence),
        concurrence_from_s: c.s.map(concurrence_from_s),
        simulated,
    };
    match &c.out {
        Some(path) => {
            write_report(path, &c, &report)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}
