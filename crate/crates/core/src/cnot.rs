//! Heralded CNOT driven by pulses that carry photon-number coherence.
//!
//! Four inputs carry photons: the control (entering `(c0 + c1)/√2`), the target (`t0`),
//! and the photon ancilla of each sign-flip gate (`h1`, `h3`). Each is either the
//! coherent pulse `|Ψ(θ, α)⟩` or its dephased counterpart.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_heralded_cnot, compile, HeraldedCnot, C0, C1, H1, H3, T0};
use crate::error::{Error, Result};
use crate::fock::{
    apply_mode_unitary_mixed, postselect_mixed, project, MixedState, ModeConstraint, ModeUnitary,
    MultimodeFockState,
};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::source::SourcePulseSpec;

/// Photon-carrying inputs: control, target, first and second ancilla.
pub const INPUT_COUNT: usize = 4;
/// Largest photon number per input pulse tracked by the gate.
pub const MAX_INPUT_PHOTONS: u8 = 2;
/// Grid points per phase axis in [`optimize_phases`].
pub const PHASE_GRID: usize = 8;
/// Heralding probability with one photon in every input, `(11 - 6√2)/49`.
pub fn ideal_herald_probability() -> f64 {
    (11.0 - 6.0 * 2f64.sqrt()) / 49.0
}


/// Input phases `(α1, α2, α3, α4)`, wrapped into `[0, 2π)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig([f64; INPUT_COUNT]);

impl PhaseConfig {
    pub fn new(alphas: [f64; INPUT_COUNT]) -> Self {
        Self(alphas.map(|a| a.rem_euclid(2.0 * PI)))
    }

    pub fn alphas(&self) -> [f64; INPUT_COUNT] {
        self.0
    }

    /// Adds `delta` to every phase.
    pub fn shifted(&self, delta: f64) -> Self {
        Self::new(self.0.map(|a| a + delta))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCoherence {
    /// Pure superpositions of photon numbers.
    Coherent,
    /// Photon-number mixtures with the same populations.
    Incoherent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateInputs {
    pub pulses: [SourcePulseSpec; INPUT_COUNT],
    pub coherence: InputCoherence,
}

impl GateInputs {
    pub fn coherent(theta: f64, phases: PhaseConfig) -> Self {
        Self {
            pulses: phases.alphas().map(|alpha| SourcePulseSpec::new(theta, alpha)),
            coherence: InputCoherence::Coherent,
        }
    }

    pub fn incoherent(theta: f64) -> Self {
        Self {
            pulses: [SourcePulseSpec::new(theta, 0.0); INPUT_COUNT],
            coherence: InputCoherence::Incoherent,
        }
    }

    /// Probability that all four inputs hold exactly one photon.
    pub fn p4(&self) -> f64 {
        self.pulses.iter().map(|p| p.populations().1).product()
    }

    fn validate(&self) -> Result<()> {
        for pulse in &self.pulses {
            pulse.validate()?;
            if pulse.m_overlap != 1.0 {
                return Err(Error::InvalidParameter {
                    name: "m",
                    value: pulse.m_overlap,
                    reason: "gate inputs are modelled as indistinguishable photons",
                });
            }
        }
        Ok(())
    }

    /// `(photon numbers, amplitude)` for every product of per-input Fock components.
    fn branches(&self) -> Vec<([u8; INPUT_COUNT], Complex64)> {
        let per_input: Vec<[Complex64; 3]> = self.pulses.iter().map(|p| p.photon_amplitudes()).collect();
        let mut out = Vec::new();
        for index in 0..3usize.pow(INPUT_COUNT as u32) {
            let mut photons = [0u8; INPUT_COUNT];
            let mut amplitude = Complex64::new(1.0, 0.0);
            let mut rest = index;
            for (i, amps) in per_input.iter().enumerate() {
                let n = rest % 3;
                rest /= 3;
                photons[i] = n as u8;
                amplitude *= amps[n];
            }
            if amplitude.norm_sqr() > 0.0 {
                out.push((photons, amplitude));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeraldedGateResult {
    pub p_herald: f64,
    /// Overlap of the heralded logical output with `Φ+`; zero when nothing is heralded.
    pub fidelity: f64,
    /// Heralded state of the rails `c0, c1, t0, t1`.
    #[serde(skip)]
    pub conditional_state: Option<MixedState>,
    pub inputs: GateInputs,
}

impl HeraldedGateResult {
    pub fn p4(&self) -> f64 {
        self.inputs.p4()
    }
}

/// Creation operator of each input on the eight gate modes.
fn input_modes(input: usize) -> Vec<(usize, Complex64)> {
    match input {
        0 => vec![
            (C0, Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (C1, Complex64::new(FRAC_1_SQRT_2, 0.0)),
        ],
        1 => vec![(T0, Complex64::new(1.0, 0.0))],
        2 => vec![(H1, Complex64::new(1.0, 0.0))],
        _ => vec![(H3, Complex64::new(1.0, 0.0))],
    }
}

/// Normalized input with `photons[i]` photons in input `i`.
fn fock_input(photons: [u8; INPUT_COUNT], mode_count: usize) -> Result<MultimodeFockState> {
    let mut state = MultimodeFockState::vacuum(mode_count, MAX_INPUT_PHOTONS);
    for (input, &n) in photons.iter().enumerate() {
        let weights = input_modes(input);
        for k in 1..=n {
            state = state.create(&weights)?.scaled(Complex64::new(1.0 / f64::from(k).sqrt(), 0.0));
        }
    }
    state.normalize()
}

fn phi_plus_overlap(state: &MultimodeFockState) -> Complex64 {
    (state.amplitude(&[1, 0, 1, 0]) + state.amplitude(&[0, 1, 0, 1])) * FRAC_1_SQRT_2
}

/// Compiled gate plus the heralded output of every per-input photon-number branch.
#[derive(Clone, Debug)]
pub struct CnotStudy {
    pub gate: HeraldedCnot,
    unitary: ModeUnitary,
    herald: Vec<ModeConstraint>,
    kernel: BTreeMap<[u8; INPUT_COUNT], MultimodeFockState>,
}

impl CnotStudy {
    pub fn new() -> Result<Self> {
        let gate = build_heralded_cnot()?;
        let unitary = compile(&gate.network)?;
        let mode_count = gate.network.mode_count();
        let herald = gate.herald.constraints(mode_count);
        let mut kernel = BTreeMap::new();
        let top = u32::from(MAX_INPUT_PHOTONS) + 1;
        for index in 0..top.pow(INPUT_COUNT as u32) {
            let mut photons = [0u8; INPUT_COUNT];
            let mut rest = index;
            for p in photons.iter_mut() {
                *p = (rest % top) as u8;
                rest /= top;
            }
            let out = crate::fock::apply_mode_unitary(&fock_input(photons, mode_count)?, &unitary)?;
            kernel.insert(photons, project(&out, &herald)?);
        }
        Ok(Self {
            gate,
            unitary,
            herald,
            kernel,
        })
    }

    /// Full Fock-space run: build the input state, propagate, postselect on the herald.
    pub fn run_gate_fock(&self, inputs: &GateInputs) -> Result<HeraldedGateResult> {
        inputs.validate()?;
        let mode_count = self.gate.network.mode_count();
        let branches = inputs.branches();
        let state = match inputs.coherence {
            InputCoherence::Coherent => {
                let mut total = MultimodeFockState::unnormalized(mode_count, MAX_INPUT_PHOTONS, [])?;
                for (photons, amplitude) in &branches {
                    total = total.add(&fock_input(*photons, mode_count)?.scaled(*amplitude))?;
                }
                MixedState::pure(total.normalize()?)?
            }
            InputCoherence::Incoherent => MixedState::new(
                branches
                    .iter()
                    .map(|(photons, a)| Ok((a.norm_sqr(), fock_input(*photons, mode_count)?)))
                    .collect::<Result<Vec<_>>>()?,
            )?,
        };
        let out = apply_mode_unitary_mixed(&state, &self.unitary)?;
        let selection = postselect_mixed(&out, &self.herald)?;
        let fidelity = selection.conditional.as_ref().map_or(0.0, |cond| {
            cond.components()
                .iter()
                .map(|(w, s)| w * phi_plus_overlap(s).norm_sqr())
                .sum()
        });
        Ok(HeraldedGateResult {
            p_herald: selection.probability,
            fidelity,
            conditional_state: selection.conditional,
            inputs: *inputs,
        })
    }

    /// Same result as [`CnotStudy::run_gate_fock`], assembled from the precomputed branches.
    pub fn run_gate(&self, inputs: &GateInputs) -> Result<HeraldedGateResult> {
        inputs.validate()?;
        let branches = inputs.branches();
        let (p_herald, overlap, conditional) = match inputs.coherence {
            InputCoherence::Coherent => {
                let mut total: Option<MultimodeFockState> = None;
                for (photons, amplitude) in &branches {
                    let term = self.kernel[photons].scaled(*amplitude);
                    total = Some(match total {
                        Some(t) => t.add(&term)?,
                        None => term,
                    });
                }
                let total = total.expect("at least one branch");
                let p = total.norm_sqr();
                let overlap = phi_plus_overlap(&total).norm_sqr();
                let conditional = if p > 0.0 {
                    Some(MixedState::pure(total.normalize()?)?)
                } else {
                    None
                };
                (p, overlap, conditional)
            }
            InputCoherence::Incoherent => {
                let mut p = 0.0;
                let mut overlap = 0.0;
                let mut components = Vec::new();
                for (photons, amplitude) in &branches {
                    let w = amplitude.norm_sqr();
                    let term = &self.kernel[photons];
                    let pb = w * term.norm_sqr();
                    if pb > 0.0 {
                        p += pb;
                        overlap += w * phi_plus_overlap(term).norm_sqr();
                        components.push((pb, term.normalize()?));
                    }
                }
                let conditional = if p > 0.0 {
                    Some(MixedState::new(components.into_iter().map(|(w, s)| (w / p, s)).collect())?)
                } else {
                    None
                };
                (p, overlap, conditional)
            }
        };
        Ok(HeraldedGateResult {
            p_herald,
            fidelity: if p_herald > 0.0 { (overlap / p_herald).min(1.0) } else { 0.0 },
            conditional_state: conditional,
            inputs: *inputs,
        })
    }

    /// Heralding probability and fidelity without building the conditional state.
    pub fn evaluate(&self, inputs: &GateInputs) -> Result<(f64, f64)> {
        let result = self.run_gate(inputs)?;
        Ok((result.p_herald, result.fidelity))
    }
}

/// One-shot [`CnotStudy::run_gate_fock`].
pub fn run_gate(inputs: &GateInputs) -> Result<HeraldedGateResult> {
    CnotStudy::new()?.run_gate_fock(inputs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesFidelity {
    pub fidelity: f64,
    /// The raw ratio exceeded one, so the inputs cannot come from one experiment.
    pub clamped: bool,
}

/// `p4 P(h|4) / P(h)` for arbitrary `p4`.
pub fn bayes_fidelity_from_p4(p4: f64, p_herald: f64) -> Result<BayesFidelity> {
    if !(p_herald > 0.0) {
        return Err(Error::ZeroDenominator("heralding probability"));
    }
    let raw = p4 * ideal_herald_probability() / p_herald;
    Ok(BayesFidelity {
        fidelity: raw.min(1.0),
        clamped: raw > 1.0 + 1e-9,
    })
}

/// `p1⁴ P(h|4) / P(h)`.
pub fn bayes_fidelity(p1: f64, p_herald: f64) -> Result<BayesFidelity> {
    bayes_fidelity_from_p4(p1.powi(4), p_herald)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSweepRow {
    pub theta: f64,
    /// `None` for dephased inputs.
    pub phases: Option<PhaseConfig>,
    pub p_herald: f64,
    pub fidelity: f64,
    pub p4: f64,
    pub bayes_f: f64,
}

/// Input family swept over `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepInputs {
    Coherent(PhaseConfig),
    Incoherent,
}

impl SweepInputs {
    pub fn at(&self, theta: f64) -> GateInputs {
        match self {
            SweepInputs::Coherent(phases) => GateInputs::coherent(theta, *phases),
            SweepInputs::Incoherent => GateInputs::incoherent(theta),
        }
    }
}

pub fn sweep_theta(study: &CnotStudy, inputs: SweepInputs, grid: &[f64]) -> Result<Vec<GateSweepRow>> {
    grid.par_iter()
        .map(|&theta| {
            let gate_inputs = inputs.at(theta);
            let (p_herald, fidelity) = study.evaluate(&gate_inputs)?;
            let p4 = gate_inputs.p4();
            let bayes_f = if p_herald > 0.0 {
                bayes_fidelity_from_p4(p4, p_herald)?.fidelity
            } else {
                0.0
            };
            Ok(GateSweepRow {
                theta,
                phases: match inputs {
                    SweepInputs::Coherent(p) => Some(p),
                    SweepInputs::Incoherent => None,
                },
                p_herald,
                fidelity,
                p4,
                bayes_f,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MaxHerald,
    MinHerald,
    MaxFidelity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptimum {
    pub phases: PhaseConfig,
    pub p_herald: f64,
    pub fidelity: f64,
    pub evaluations: usize,
}

/// Grid search followed by Nelder-Mead from the best grid points.
///
/// A common shift of all phases changes nothing, so `α1` stays at zero and the grid
/// spans the relative phases `α2..α4` with [`PHASE_GRID`] points per axis.
pub fn optimize_phases(study: &CnotStudy, theta: f64, objective: Objective) -> Result<PhaseOptimum> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must lie in (0, pi]",
        });
    }
    let config = |rel: &[f64]| PhaseConfig::new([0.0, rel[0], rel[1], rel[2]]);
    let score = |rel: &[f64]| -> f64 {
        match study.evaluate(&GateInputs::coherent(theta, config(rel))) {
            Ok((p, f)) => match objective {
                Objective::MaxHerald => -p,
                Objective::MinHerald => p,
                Objective::MaxFidelity => -f,
            },
            Err(_) => f64::INFINITY,
        }
    };

    let step = 2.0 * PI / PHASE_GRID as f64;
    let mut grid: Vec<(f64, [f64; 3])> = (0..PHASE_GRID.pow(3))
        .into_par_iter()
        .map(|i| {
            let rel = [
                (i % PHASE_GRID) as f64 * step,
                (i / PHASE_GRID % PHASE_GRID) as f64 * step,
                (i / (PHASE_GRID * PHASE_GRID)) as f64 * step,
            ];
            (score(&rel), rel)
        })
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut evaluations = grid.len();

    let options = NelderMeadOptions {
        initial_step: step / 2.0,
        max_evaluations: 2000,
        f_tol: 1e-15,
        x_tol: 1e-9,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, start) in grid.iter().take(3) {
        let m = nelder_mead(score, start, &options);
        evaluations += m.evaluations;
        if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    let (_, x) = best.expect("grid is non-empty");
    let phases = config(&x);
    let (p_herald, fidelity) = study.evaluate(&GateInputs::coherent(theta, phases))?;
    Ok(PhaseOptimum {
        phases,
        p_herald,
        fidelity,
        evaluations,
    })
}
