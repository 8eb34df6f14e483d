use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::network::{hadamard, Element, InterferometerNetwork};
use super::ns::{build_ns_gate, NsGate};
use crate::error::{Error, Result};
use crate::fock::ModeConstraint;

pub const C0: usize = 0;
pub const C1: usize = 1;
pub const T0: usize = 2;
pub const T1: usize = 3;
pub const H0: usize = 4;
pub const H1: usize = 5;
pub const H2: usize = 6;
pub const H3: usize = 7;

/// Logical rails in the order used for two-qubit states: `c0, c1, t0, t1`.
pub const LOGICAL_MODES: [usize; 4] = [C0, C1, T0, T1];
pub const HERALD_MODES: [usize; 4] = [H0, H1, H2, H3];

/// Human-readable summary of the gate wiring, folded into the constants hash.
pub const CNOT_LAYOUT: &str = "H(t0,t1); H(c1,t1); NS'(c1,h1,h0); NS(t1,h3,h2); H(c1,t1); H(t0,t1); herald h0=0 h1=1 h2=0 h3=1";

/// Exact photon counts on heralding modes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeraldPattern {
    counts: BTreeMap<usize, u8>,
}

impl HeraldPattern {
    pub fn new(counts: impl IntoIterator<Item = (usize, u8)>, heralding_modes: &[usize]) -> Result<Self> {
        let counts: BTreeMap<usize, u8> = counts.into_iter().collect();
        if let Some(mode) = counts.keys().find(|m| !heralding_modes.contains(m)) {
            return Err(Error::InvalidNetwork(format!(
                "herald pattern references non-heralding mode {mode}"
            )));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &BTreeMap<usize, u8> {
        &self.counts
    }

    /// Per-mode constraints with wildcards on every non-heralding mode.
    pub fn constraints(&self, mode_count: usize) -> Vec<ModeConstraint> {
        (0..mode_count)
            .map(|m| {
                self.counts
                    .get(&m)
                    .map_or(ModeConstraint::Any, |&n| ModeConstraint::Exactly(n))
            })
            .collect()
    }

    pub fn matches(&self, occupation: &[u8]) -> bool {
        self.counts.iter().all(|(&m, &n)| occupation[m] == n)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeraldedCnot {
    pub network: InterferometerNetwork,
    pub herald: HeraldPattern,
    pub ns: NsGate,
}

/// Dual-rail CNOT: a controlled-sign between `c1` and `t1` conjugated by target Hadamards.
///
/// The first sign-flip gate is sandwiched between `π` shifts on `c1`, which flips the
/// sign of its off-diagonal signal couplings.
pub fn build_heralded_cnot() -> Result<HeraldedCnot> {
    let ns = build_ns_gate()?;
    let mut network = InterferometerNetwork::spatial(8);
    network.extend(hadamard(T0, T1))?;
    network.extend(hadamard(C1, T1))?;
    network.push(Element::phase_shift(C1, PI))?;
    network.extend(ns.elements_on([C1, H1, H0]))?;
    network.push(Element::phase_shift(C1, PI))?;
    network.extend(ns.elements_on([T1, H3, H2]))?;
    network.extend(hadamard(C1, T1))?;
    network.extend(hadamard(T0, T1))?;
    let herald = HeraldPattern::new([(H0, 0), (H1, 1), (H2, 0), (H3, 1)], &HERALD_MODES)?;
    Ok(HeraldedCnot {
        network,
        herald,
        ns,
    })
}
