use std::path::PathBuf;

use clap::Args;
use photonic_coherence::hom::{sweep, HomOptions, PhaseSetting, SweepRow};
use serde::{Deserialize, Serialize};

use crate::config::{self, Grid};
use crate::error::CliError;
use crate::output::{cell, csv_writer, extrema, sibling, write_report};

const HEADER: [&str; 9] = ["theta", "phi", "m", "g2_k0", "g2_k1", "g2_kfar", "vhom", "c1", "ratio"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomSweepConfig {
    /// Pulse areas, units of π.
    pub theta_pi: Grid,
    /// Fixed interferometer phases, units of π; `null` for none.
    pub phi_pi: Option<Grid>,
    /// Also emit one phase-averaged row per `(θ, M)`.
    pub phase_averaged: bool,
    pub m: Vec<f64>,
    pub p2: Option<f64>,
    pub efficiencies: (f64, f64),
    pub out: PathBuf,
}

impl Default for HomSweepConfig {
    fn default() -> Self {
        Self {
            theta_pi: Grid::new(0.1, 1.0, 10),
            phi_pi: Some(Grid::new(0.0, 1.0, 13)),
            phase_averaged: true,
            m: vec![1.0],
            p2: None,
            efficiencies: (1.0, 1.0),
            out: PathBuf::from("hom_sweep.csv"),
        }
    }
}

/// Optional fixed-phase grid on the command line; `none` disables it.
#[derive(Clone, Copy, Debug)]
pub struct PhaseGrid(Option<Grid>);

impl std::str::FromStr for PhaseGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("none") {
            Ok(Self(None))
        } else {
            s.parse().map(|g| Self(Some(g)))
        }
    }
}

#[derive(Debug, Args)]
pub struct HomSweepArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pulse areas as START:STOP:STEPS in units of π.
    #[arg(long)]
    theta: Option<Grid>,
    /// Fixed phases as START:STOP:STEPS in units of π, or `none`.
    #[arg(long)]
    phi: Option<PhaseGrid>,
    /// Include phase-averaged rows.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    averaged: Option<bool>,
    /// Wavepacket overlaps, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<f64>>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl HomSweepArgs {
    pub fn resolve(self) -> Result<HomSweepConfig, CliError> {
        let mut c: HomSweepConfig = config::load(self.config.as_deref())?;
        config::set(&mut c.theta_pi, self.theta);
        config::set(&mut c.phi_pi, self.phi.map(|p| p.0));
        config::set(&mut c.phase_averaged, self.averaged);
        config::set(&mut c.m, self.m);
        if self.p2.is_some() {
            c.p2 = self.p2;
        }
        config::set(&mut c.efficiencies.0, self.eta1);
        config::set(&mut c.efficiencies.1, self.eta2);
        config::set(&mut c.out, self.out);
        c.theta_pi.validate("theta", 0.0, 1.0)?;
        if let Some(phi) = &c.phi_pi {
            phi.validate("phi", -2.0, 2.0)?;
        }
        if c.phi_pi.is_none() && !c.phase_averaged {
            return Err(CliError::Config("no fixed phases and no phase averaging: nothing to sweep".into()));
        }
        if c.m.is_empty() {
            return Err(CliError::Config("m: need at least one overlap".into()));
        }
        Ok(c)
    }
}

#[derive(Serialize)]
struct Summary {
    rows: usize,
    g2_k0: Option<crate::output::Extrema>,
    g2_k1: Option<crate::output::Extrema>,
    g2_kfar: Option<crate::output::Extrema>,
    vhom: Option<crate::output::Extrema>,
    ratio: Option<crate::output::Extrema>,
}

pub fn run(args: HomSweepArgs) -> Result<(), CliError> {
    let c = args.resolve()?;
    let mut phases: Vec<PhaseSetting> = c
        .phi_pi
        .map(|g| g.radians().into_iter().map(PhaseSetting::Fixed).collect())
        .unwrap_or_default();
    if c.phase_averaged {
        phases.push(PhaseSetting::Averaged);
    }
    let options = HomOptions {
        efficiencies: c.efficiencies,
        ..HomOptions::default()
    };
    let rows = sweep(&c.theta_pi.radians(), &phases, &c.m, c.p2, &options)?;

    let mut w = csv_writer(&c.out, &c, &HEADER)?;
    for r in &rows {
        w.write_record(
            [
                Some(r.theta),
                r.phi,
                Some(r.m),
                Some(r.g2_k0),
                Some(r.g2_k1),
                Some(r.g2_kfar),
                Some(r.vhom),
                Some(r.c1),
                Some(r.ratio),
            ]
            .map(cell),
        )?;
    }
    w.flush()?;

    let column = |f: fn(&SweepRow) -> f64| extrema(rows.iter().map(f));
    let summary = Summary {
        rows: rows.len(),
        g2_k0: column(|r| r.g2_k0),
        g2_k1: column(|r| r.g2_k1),
        g2_kfar: column(|r| r.g2_kfar),
        vhom: column(|r| r.vhom),
        ratio: column(|r| r.ratio),
    };
    let summary_path = sibling(&c.out, "summary.json");
    write_report(&summary_path, &c, &summary)?;
    println!("wrote {} rows to {} ({})", rows.len(), c.out.display(), summary_path.display());
    Ok(())
}
