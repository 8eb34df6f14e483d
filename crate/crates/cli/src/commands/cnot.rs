use std::path::PathBuf;

use clap::{Args, ValueEnum};
use photonic_coherence::cnot::{
    bayes_fidelity_from_p4, optimize_phases, sweep_theta, CnotStudy, GateInputs, GateSweepRow, Objective, PhaseConfig,
    SweepInputs,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, Grid};
use crate::error::CliError;
use crate::output::{cell, csv_writer, sibling, write_report};

const HEADER: [&str; 9] = [
    "theta", "alpha1", "alpha2", "alpha3", "alpha4", "p_herald", "fidelity", "p4", "bayes_f",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Fixed laser phases on all four inputs.
    Coherent,
    /// Dephased inputs: a mixture over photon numbers.
    Incoherent,
    /// Phases optimized per pulse area for `objective`.
    Optimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveArg {
    MaxHerald,
    MinHerald,
    MaxFidelity,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::MaxHerald => Objective::MaxHerald,
            ObjectiveArg::MinHerald => Objective::MinHerald,
            ObjectiveArg::MaxFidelity => Objective::MaxFidelity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnotConfig {
    /// Pulse areas, units of π.
    pub theta_pi: Grid,
    pub inputs: InputMode,
    /// Laser phases in radians for coherent inputs.
    pub alphas: [f64; 4],
    pub objective: ObjectiveArg,
    pub out: PathBuf,
}

impl Default for CnotConfig {
    fn default() -> Self {
        Self {
            theta_pi: Grid::new(0.3, 1.0, 71),
            inputs: InputMode::Coherent,
            alphas: [0.0; 4],
            objective: ObjectiveArg::MaxHerald,
            out: PathBuf::from("cnot.csv"),
        }
    }
}

#[derive(Debug, Args)]
pub struct CnotArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pulse areas as START:STOP:STEPS in units of π.
    #[arg(long)]
    theta: Option<Grid>,
    #[arg(long, value_enum)]
    inputs: Option<InputMode>,
    /// Four laser phases in radians, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl CnotArgs {
    pub fn resolve(self) -> Result<CnotConfig, CliError> {
        let mut c: CnotConfig = config::load(self.config.as_deref())?;
        config::set(&mut c.theta_pi, self.theta);
        config::set(&mut c.inputs, self.inputs);
        if let Some(a) = self.alphas {
            c.alphas = a
                .try_into()
                .map_err(|_| CliError::Config("alphas: need exactly four phases".into()))?;
        }
        config::set(&mut c.objective, self.objective);
        config::set(&mut c.out, self.out);
        c.theta_pi.validate("theta", 0.0, 1.0)?;
        if c.inputs == InputMode::Optimize && c.theta_pi.start <= 0.0 {
            return Err(CliError::Config("theta: optimization needs theta > 0".into()));
        }
        if c.alphas.iter().any(|a| !a.is_finite()) {
            return Err(CliError::Config("alphas: must be finite".into()));
        }
        Ok(c)
    }
}

fn optimized_rows(study: &CnotStudy, thetas: &[f64], objective: Objective) -> Result<Vec<GateSweepRow>, CliError> {
    thetas
        .par_iter()
        .map(|&theta| {
            let best = optimize_phases(study, theta, objective)?;
            let p4 = GateInputs::coherent(theta, best.phases).p4();
            Ok(GateSweepRow {
                theta,
                phases: Some(best.phases),
                p_herald: best.p_herald,
                fidelity: best.fidelity,
                p4,
                bayes_f: bayes_fidelity_from_p4(p4, best.p_herald)?.fidelity,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Summary {
    rows: usize,
    peak_p_herald: f64,
    peak_theta: f64,
    max_bayes_gap: f64,
}

pub fn run(args: CnotArgs) -> Result<(), CliError> {
    let c = args.resolve()?;
    let study = CnotStudy::new()?;
    let thetas = c.theta_pi.radians();
    let rows = match c.inputs {
        InputMode::Coherent => sweep_theta(&study, SweepInputs::Coherent(PhaseConfig::new(c.alphas)), &thetas)?,
        InputMode::Incoherent => sweep_theta(&study, SweepInputs::Incoherent, &thetas)?,
        InputMode::Optimize => optimized_rows(&study, &thetas, c.objective.into())?,
    };

    let mut w = csv_writer(&c.out, &c, &HEADER)?;
    for r in &rows {
        let alphas = r.phases.map(|p| p.alphas());
        let alpha = |i: usize| alphas.map(|a| a[i]);
        w.write_record(
            [
                Some(r.theta),
                alpha(0),
                alpha(1),
                alpha(2),
                alpha(3),
                Some(r.p_herald),
                Some(r.fidelity),
                Some(r.p4),
                Some(r.bayes_f),
            ]
            .map(cell),
        )?;
    }
    w.flush()?;

    let peak = rows
        .iter()
        .max_by(|a, b| a.p_herald.total_cmp(&b.p_herald))
        .ok_or_else(|| CliError::Config("empty theta grid".into()))?;
    let summary = Summary {
        rows: rows.len(),
        peak_p_herald: peak.p_herald,
        peak_theta: peak.theta,
        max_bayes_gap: rows.iter().map(|r| (r.fidelity - r.bayes_f).abs()).fold(0.0, f64::max),
    };
    let summary_path = sibling(&c.out, "summary.json");
    write_report(&summary_path, &c, &summary)?;
    println!(
        "wrote {} rows to {}; peak p_herald {:.5} at theta {:.4}",
        rows.len(),
        c.out.display(),
        peak.p_herald,
        peak.theta
    );
    Ok(())
}
