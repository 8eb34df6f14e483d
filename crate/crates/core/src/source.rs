//! Emitted pulse states carrying photon-number coherence.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::fock::{MultimodeFockState, PHOTON_CUTOFF_DEFAULT};

/// Pulse area, laser phase, wavepacket overlap and optional two-photon weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePulseSpec {
    pub theta: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(rename = "m", default = "one")]
    pub m_overlap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// Internal label of a photon emitted into one pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InternalMode {
    /// Component common to every pulse.
    Shared,
    /// Component orthogonal to all other pulses.
    Unique,
}

/// Single-pulse state over its internal modes.
#[derive(Clone, Debug)]
pub struct PulseState {
    pub labels: Vec<InternalMode>,
    pub state: MultimodeFockState,
}

impl SourcePulseSpec {
    pub fn new(theta: f64, alpha: f64) -> Self {
        Self {
            theta,
            alpha,
            m_overlap: 1.0,
            p2: None,
        }
    }

    pub fn with_overlap(self, m_overlap: f64) -> Self {
        Self { m_overlap, ..self }
    }

    pub fn with_two_photon(self, p2: f64) -> Self {
        Self {
            p2: Some(p2),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: self.theta,
                reason: "must lie in [0, pi]",
            });
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                reason: "must be finite",
            });
        }
        check_unit_interval("m", self.m_overlap)?;
        if let Some(p2) = self.p2 {
            if !(0.0..1.0).contains(&p2) {
                return Err(Error::InvalidParameter {
                    name: "p2",
                    value: p2,
                    reason: "must lie in [0, 1)",
                });
            }
            if p2 > 1.0 - self.p0() + 1e-15 {
                return Err(Error::InvalidParameter {
                    name: "p2",
                    value: p2,
                    reason: "exceeds the non-vacuum population sin^2(theta/2)",
                });
            }
        }
        Ok(())
    }

    /// Vacuum population, fixed by the pulse area alone.
    pub fn p0(&self) -> f64 {
        (self.theta / 2.0).cos().powi(2)
    }

    /// `(p0, p1, p2)`; the two-photon weight is taken out of the single-photon share.
    pub fn populations(&self) -> (f64, f64, f64) {
        let p0 = self.p0();
        let p2 = self.p2.unwrap_or(0.0);
        (p0, (1.0 - p0 - p2).max(0.0), p2)
    }

    /// Amplitudes of `|0⟩, |1⟩, |2⟩` including the laser phase.
    pub fn photon_amplitudes(&self) -> [Complex64; 3] {
        let (p0, p1, p2) = self.populations();
        [
            Complex64::new(p0.sqrt(), 0.0),
            Complex64::from_polar(p1.sqrt(), self.alpha),
            Complex64::from_polar(p2.sqrt(), 2.0 * self.alpha),
        ]
    }

    /// Weights of the photon creation operator on the shared and unique internal modes.
    ///
    /// The shared weight is `M^{1/4}`, so two photons from different pulses overlap with
    /// `|⟨ψ_a|ψ_b⟩|² = M`.
    pub fn internal_weights(&self) -> (f64, f64) {
        let shared = self.m_overlap.sqrt();
        (shared.sqrt(), (1.0 - shared).max(0.0).sqrt())
    }

    /// First-order coherence that survives interference between two different pulses.
    pub fn interfering_c1(&self) -> f64 {
        let (p0, p1, p2) = self.populations();
        let mu = p1 + 2.0 * p2;
        if mu == 0.0 {
            return 0.0;
        }
        let a = (p0 * p1).sqrt() + (2.0 * p1 * p2).sqrt();
        a * a / mu * self.m_overlap.sqrt()
    }

    pub fn mean_photon_number(&self) -> f64 {
        let (_, p1, p2) = self.populations();
        p1 + 2.0 * p2
    }
}

/// Pulse state over its internal modes; a single mode when `M = 1`.
pub fn source_state(spec: &SourcePulseSpec) -> Result<PulseState> {
    spec.validate()?;
    let amps = spec.photon_amplitudes();
    let (shared, unique) = spec.internal_weights();
    let mut labels = vec![InternalMode::Shared];
    let mut weights = vec![(0, Complex64::new(shared, 0.0))];
    if spec.m_overlap < 1.0 {
        labels.push(InternalMode::Unique);
        weights.push((1, Complex64::new(unique, 0.0)));
    }
    let vacuum = MultimodeFockState::vacuum(labels.len(), PHOTON_CUTOFF_DEFAULT);
    let one = vacuum.create(&weights)?;
    let two = one.create(&weights)?;
    let state = vacuum
        .scaled(amps[0])
        .add(&one.scaled(amps[1]))?
        .add(&two.scaled(amps[2] / 2f64.sqrt()))?
        .normalize()?;
    Ok(PulseState { labels, state })
}

/// `(1/μ) Σ_m |⟨a_m⟩|²` over all modes of a single-pulse state; zero for vacuum.
pub fn c1_of(state: &MultimodeFockState) -> Result<f64> {
    let modes = 0..state.mode_count();
    let mu: f64 = modes
        .clone()
        .map(|m| state.mean_photons(m))
        .sum::<Result<f64>>()?;
    if mu == 0.0 {
        return Ok(0.0);
    }
    let coherent: f64 = modes
        .map(|m| state.expect_annihilation(m).map(|a| a.norm_sqr()))
        .sum::<Result<f64>>()?;
    Ok(coherent / mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceMetrics {
    pub c1: f64,
    pub mu: f64,
    /// Pure-dephasing value of the `|k|=1` oscillation amplitude.
    pub s2_1m: f64,
    /// Set when the pulse has no photons and `c1` was defined as zero.
    pub vacuum_input: bool,
}

pub fn coherence_metrics(spec: &SourcePulseSpec) -> Result<CoherenceMetrics> {
    let pulse = source_state(spec)?;
    let c1 = c1_of(&pulse.state)?;
    let mu = spec.mean_photon_number();
    Ok(CoherenceMetrics {
        c1,
        mu,
        s2_1m: s2_pure_dephasing(c1, spec.m_overlap),
        vacuum_input: mu == 0.0,
    })
}

/// `c1 · 2m / (1 + m)`.
pub fn s2_pure_dephasing(c1: f64, m: f64) -> f64 {
    c1 * 2.0 * m / (1.0 + m)
}

/// Relation between relative excitation intensity and pulse area.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityMapping {
    /// `θ = 2 asin(I)`.
    #[default]
    Linear,
    /// `θ = 2 asin(√I)`.
    SquareRoot,
}

pub fn pulse_area_from_intensity(i_rel: f64, mapping: IntensityMapping) -> Result<f64> {
    check_unit_interval("i_rel", i_rel)?;
    Ok(match mapping {
        IntensityMapping::Linear => 2.0 * i_rel.asin(),
        IntensityMapping::SquareRoot => 2.0 * i_rel.sqrt().asin(),
    })
}
