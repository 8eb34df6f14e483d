//! Pulse-by-pulse Monte Carlo of the unbalanced interferometer.
//!
//! Bin `t` collects the short-arm part of pulse `t` and the long-arm part of pulse `t-1`.
//! The only state carried between bins is the long-arm part of the latest pulse, which is
//! one of `{vacuum, shared-label photon, unique-label photon}`. Each bin is sampled from
//! the exact joint distribution over output port and internal label; recording only the
//! port afterwards reproduces the coarser detector statistics while keeping the carried
//! state pure.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DriftModel, TimeTagRecord, TimeTagStream, DEFAULT_PULSE_PERIOD_PS};
use crate::error::{Error, Result};
use crate::source::SourcePulseSpec;

/// Pulses drawn from each independent random stream.
pub const CHUNK_PULSES: usize = 1 << 16;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

// Internal labels of a photon reaching the detectors in a given bin.
const SHARED: usize = 0;
const SHARED_CROSSED: usize = 1;
const UNIQUE_PREV: usize = 2;
const UNIQUE_NEW: usize = 3;
const LABELS: usize = 4;
const OUT_MODES: usize = 2 * LABELS;
const KEYS: usize = 1 + OUT_MODES + OUT_MODES * (OUT_MODES + 1) / 2;

const CARRY_VACUUM: usize = 0;
const CARRY_SHARED: usize = 1;
const CARRY_UNIQUE: usize = 2;

type Carry = [C; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub source: SourcePulseSpec,
    pub n_pulses: usize,
    pub pulse_period_ps: u64,
    pub perpendicular: bool,
    /// Detection efficiencies of detectors 1 and 2.
    pub efficiencies: (f64, f64),
    pub drift: DriftModel,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(source: SourcePulseSpec, n_pulses: usize, seed: u64) -> Self {
        Self {
            source,
            n_pulses,
            pulse_period_ps: DEFAULT_PULSE_PERIOD_PS,
            perpendicular: false,
            efficiencies: (1.0, 1.0),
            drift: DriftModel::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if self.source.p2.is_some_and(|p2| p2 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "p2",
                value: self.source.p2.unwrap_or_default(),
                reason: "the generator handles at most one photon per pulse",
            });
        }
        if self.n_pulses == 0 {
            return Err(Error::InvalidParameter {
                name: "n_pulses",
                value: 0.0,
                reason: "must be positive",
            });
        }
        if self.pulse_period_ps == 0 {
            return Err(Error::InvalidParameter {
                name: "pulse_period_ps",
                value: 0.0,
                reason: "must be positive",
            });
        }
        for (name, eta) in [("eta1", self.efficiencies.0), ("eta2", self.efficiencies.1)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: eta,
                    reason: "must lie in (0, 1]",
                });
            }
        }
        self.drift.validate()
    }
}

/// Photon entering the second beamsplitter from one arm.
#[derive(Clone, Copy)]
enum Arm {
    Short,
    Long,
}

#[derive(Clone, Copy)]
struct Photon {
    arm: Arm,
    label: usize,
}

impl Photon {
    /// Output amplitudes on `(mode, amplitude)`; mode `d * LABELS + label` with `d = 0` for
    /// detector 1 (long output port).
    fn outputs(self) -> [(usize, C); 2] {
        let (d1, d2) = match self.arm {
            Arm::Short => (C::new(0.0, FRAC_1_SQRT_2), C::new(FRAC_1_SQRT_2, 0.0)),
            Arm::Long => (C::new(FRAC_1_SQRT_2, 0.0), C::new(0.0, FRAC_1_SQRT_2)),
        };
        [(self.label, d1), (LABELS + self.label, d2)]
    }
}

fn pair_key(a: usize, b: usize) -> usize {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    1 + OUT_MODES + hi * (hi + 1) / 2 + lo
}

/// Photons per detector for every outcome key.
fn key_counts() -> [[u8; 2]; KEYS] {
    let mut table = [[0u8; 2]; KEYS];
    for m in 0..OUT_MODES {
        table[1 + m][m / LABELS] += 1;
        for n in m..OUT_MODES {
            let key = pair_key(m, n);
            table[key][m / LABELS] += 1;
            table[key][n / LABELS] += 1;
        }
    }
    table
}

struct Stepper {
    vacuum: C,
    shared: C,
    unique: C,
    perpendicular: bool,
    eta: [f64; 2],
    counts: [[u8; 2]; KEYS],
}

/// One branch of the incoming pulse: amplitude, photon in this bin, carried state next bin.
type Branch = (C, Option<Photon>, usize);

impl Stepper {
    fn new(config: &GeneratorConfig) -> Self {
        let amps = config.source.photon_amplitudes();
        let (s, u) = config.source.internal_weights();
        Self {
            vacuum: amps[0],
            shared: amps[1] * s * FRAC_1_SQRT_2,
            unique: amps[1] * u * FRAC_1_SQRT_2,
            perpendicular: config.perpendicular,
            eta: [config.efficiencies.0, config.efficiencies.1],
            counts: key_counts(),
        }
    }

    fn branches(&self, phi: Option<f64>) -> [Branch; 5] {
        let none = (ZERO, None, CARRY_VACUUM);
        let Some(phi) = phi else {
            return [(C::new(1.0, 0.0), None, CARRY_VACUUM), none, none, none, none];
        };
        let long = C::i() * C::from_polar(1.0, phi);
        let short = |label| Some(Photon { arm: Arm::Short, label });
        [
            (self.vacuum, None, CARRY_VACUUM),
            (self.shared, short(SHARED), CARRY_VACUUM),
            (self.unique, short(UNIQUE_NEW), CARRY_VACUUM),
            (self.shared * long, None, CARRY_SHARED),
            (self.unique * long, None, CARRY_UNIQUE),
        ]
    }

    fn carried_photon(&self, carry: usize) -> Option<Photon> {
        let label = match carry {
            CARRY_SHARED if self.perpendicular => SHARED_CROSSED,
            CARRY_SHARED => SHARED,
            CARRY_UNIQUE => UNIQUE_PREV,
            _ => return None,
        };
        Some(Photon { arm: Arm::Long, label })
    }

    /// Samples bin `t` given the carried state and the phase of pulse `t` (`None` once the
    /// pulse train has ended). Returns detected photons per detector and the next carry.
    fn step(&self, carry: &Carry, phi: Option<f64>, rng: &mut ChaCha8Rng) -> ([u8; 2], Carry) {
        let mut acc = [[ZERO; 3]; KEYS];
        let branches = self.branches(phi);
        for (j, &cj) in carry.iter().enumerate() {
            if cj == ZERO {
                continue;
            }
            let carried = self.carried_photon(j);
            for &(pq, photon, next) in &branches {
                let amp = cj * pq;
                if amp == ZERO {
                    continue;
                }
                match (carried, photon) {
                    (None, None) => acc[0][next] += amp,
                    (Some(p), None) | (None, Some(p)) => {
                        for (m, v) in p.outputs() {
                            acc[1 + m][next] += amp * v;
                        }
                    }
                    (Some(a), Some(b)) => {
                        for (ma, va) in a.outputs() {
                            for (mb, vb) in b.outputs() {
                                let bunched = if ma == mb { std::f64::consts::SQRT_2 } else { 1.0 };
                                acc[pair_key(ma, mb)][next] += amp * va * vb * bunched;
                            }
                        }
                    }
                }
            }
        }

        let weights: Vec<f64> = acc.iter().map(|a| a.iter().map(|c| c.norm_sqr()).sum()).collect();
        let total: f64 = weights.iter().sum();
        let mut draw = rng.random::<f64>() * total;
        let mut key = KEYS - 1;
        for (k, &w) in weights.iter().enumerate() {
            if draw < w {
                key = k;
                break;
            }
            draw -= w;
        }
        // Rounding can leave `draw` just past the last nonzero weight.
        while weights[key] == 0.0 {
            key -= 1;
        }
        let norm = weights[key].sqrt();
        let next = acc[key].map(|c| c / norm);

        let mut detected = [0u8; 2];
        for (d, &n) in self.counts[key].iter().enumerate() {
            for _ in 0..n {
                if self.eta[d] >= 1.0 || rng.random::<f64>() < self.eta[d] {
                    detected[d] += 1;
                }
            }
        }
        (detected, next)
    }
}

/// Generates the detector records for `config`. Identical configurations give identical
/// streams. Every chunk of [`CHUNK_PULSES`] bins draws from its own ChaCha stream, while
/// the carried state runs through chunk boundaries unbroken.
pub fn generate_stream(config: &GeneratorConfig) -> Result<TimeTagStream> {
    config.validate()?;
    let stepper = Stepper::new(config);
    let phases = config.drift.phases(config.n_pulses);
    let mut carry: Carry = [C::new(1.0, 0.0), ZERO, ZERO];
    let mut detected = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for t in 0..=config.n_pulses {
        if t % CHUNK_PULSES == 0 {
            rng.set_stream((t / CHUNK_PULSES) as u64);
            rng.set_word_pos(0);
        }
        let (counts, next) = stepper.step(&carry, phases.get(t).copied(), &mut rng);
        carry = next;
        if counts != [0, 0] {
            detected.push((t, counts));
        }
    }

    let mut records = Vec::new();
    for (t, counts) in detected {
        let ts = t as u64 * config.pulse_period_ps;
        for (d, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                records.push(TimeTagRecord {
                    detector_id: d as u8 + 1,
                    timestamp_ps: ts,
                });
            }
        }
    }
    Ok(TimeTagStream {
        meta: config.clone(),
        records,
    })
}
