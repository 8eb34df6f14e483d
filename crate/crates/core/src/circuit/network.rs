use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{unitarity_deviation, ModeUnitary, UNITARY_TOL};

/// Spatial path, time bin and internal (spectral/polarization) label of one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeLabel {
    pub spatial: u16,
    pub bin: u16,
    pub internal: u16,
}

impl ModeLabel {
    pub fn new(spatial: u16, bin: u16, internal: u16) -> Self {
        Self {
            spatial,
            bin,
            internal,
        }
    }
}

/// One passive optical element. Mode references are indices into the network's label list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Element {
    /// `[[√(1-r), i e^{-iφ} √r], [i e^{iφ} √r, √(1-r)]]` on `modes`.
    Beamsplitter {
        modes: (usize, usize),
        reflectivity: f64,
        phase: f64,
    },
    PhaseShift { mode: usize, phi: f64 },
    /// Moves every mode on `spatial` one time bin later; the last bin wraps to the first.
    Delay { spatial: u16 },
    Swap { modes: (usize, usize) },
}

impl Element {
    pub fn beamsplitter(a: usize, b: usize, reflectivity: f64, phase: f64) -> Self {
        Element::Beamsplitter {
            modes: (a, b),
            reflectivity,
            phase,
        }
    }

    pub fn phase_shift(mode: usize, phi: f64) -> Self {
        Element::PhaseShift { mode, phi }
    }
}

/// Ordered list of elements over labelled modes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterferometerNetwork {
    pub mode_labels: Vec<ModeLabel>,
    pub elements: Vec<Element>,
}

impl InterferometerNetwork {
    pub fn new(mode_labels: Vec<ModeLabel>) -> Self {
        Self {
            mode_labels,
            elements: Vec::new(),
        }
    }

    /// Modes `0..n` on distinct spatial paths, single bin and internal label.
    pub fn spatial(n: usize) -> Self {
        Self::new((0..n as u16).map(|s| ModeLabel::new(s, 0, 0)).collect())
    }

    pub fn mode_count(&self) -> usize {
        self.mode_labels.len()
    }

    pub fn push(&mut self, element: Element) -> Result<&mut Self> {
        self.check_element(&element)?;
        self.elements.push(element);
        Ok(self)
    }

    pub fn extend(&mut self, elements: impl IntoIterator<Item = Element>) -> Result<&mut Self> {
        for e in elements {
            self.push(e)?;
        }
        Ok(self)
    }

    /// `self` followed by `next` on the same modes.
    pub fn then(&self, next: &InterferometerNetwork) -> Result<InterferometerNetwork> {
        if next.mode_labels != self.mode_labels {
            return Err(Error::InvalidNetwork("mode labels differ".into()));
        }
        let mut out = self.clone();
        out.elements.extend(next.elements.iter().cloned());
        Ok(out)
    }

    pub fn index_of(&self, label: ModeLabel) -> Option<usize> {
        self.mode_labels.iter().position(|&l| l == label)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for label in &self.mode_labels {
            if !seen.insert(label) {
                return Err(Error::InvalidNetwork(format!("duplicate mode label {label:?}")));
            }
        }
        self.elements.iter().try_for_each(|e| self.check_element(e))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count() {
            return Err(Error::ModeOutOfRange {
                index: mode,
                mode_count: self.mode_count(),
            });
        }
        Ok(())
    }

    fn check_element(&self, element: &Element) -> Result<()> {
        match *element {
            Element::Beamsplitter {
                modes: (a, b),
                reflectivity,
                phase,
            } => {
                self.check_mode(a)?;
                self.check_mode(b)?;
                if a == b {
                    return Err(Error::InvalidNetwork(format!("beamsplitter on a single mode {a}")));
                }
                if !(0.0..=1.0).contains(&reflectivity) || !phase.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "reflectivity",
                        value: reflectivity,
                        reason: "must lie in [0, 1] with a finite phase",
                    });
                }
            }
            Element::PhaseShift { mode, phi } => {
                self.check_mode(mode)?;
                if !phi.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "phi",
                        value: phi,
                        reason: "must be finite",
                    });
                }
            }
            Element::Delay { spatial } => {
                if !self.mode_labels.iter().any(|l| l.spatial == spatial) {
                    return Err(Error::InvalidNetwork(format!("no modes on spatial path {spatial}")));
                }
            }
            Element::Swap { modes: (a, b) } => {
                self.check_mode(a)?;
                self.check_mode(b)?;
            }
        }
        Ok(())
    }

    /// Mode index reached by every mode under a delay of `spatial`.
    fn delay_permutation(&self, spatial: u16) -> Vec<usize> {
        let bins = self
            .mode_labels
            .iter()
            .filter(|l| l.spatial == spatial)
            .map(|l| l.bin)
            .max()
            .map_or(1, |b| b + 1);
        let index: HashMap<ModeLabel, usize> = self
            .mode_labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect();
        self.mode_labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if l.spatial != spatial {
                    return i;
                }
                let moved = ModeLabel {
                    bin: (l.bin + 1) % bins,
                    ..*l
                };
                index.get(&moved).copied().unwrap_or(i)
            })
            .collect()
    }
}

/// Product of the element matrices in order: the first element acts first.
pub fn compile(network: &InterferometerNetwork) -> Result<ModeUnitary> {
    network.validate()?;
    let n = network.mode_count();
    let mut u: DMatrix<Complex64> = DMatrix::identity(n, n);
    for element in &network.elements {
        match *element {
            Element::Beamsplitter {
                modes: (a, b),
                reflectivity,
                phase,
            } => {
                let block = crate::fock::ModeUnitary::beamsplitter(reflectivity, phase);
                let g = block.matrix();
                for col in 0..n {
                    let x = u[(a, col)];
                    let y = u[(b, col)];
                    u[(a, col)] = g[(0, 0)] * x + g[(0, 1)] * y;
                    u[(b, col)] = g[(1, 0)] * x + g[(1, 1)] * y;
                }
            }
            Element::PhaseShift { mode, phi } => {
                let p = Complex64::from_polar(1.0, phi);
                for col in 0..n {
                    u[(mode, col)] *= p;
                }
            }
            Element::Delay { spatial } => {
                let perm = network.delay_permutation(spatial);
                let mut next = u.clone();
                for (from, &to) in perm.iter().enumerate() {
                    next.set_row(to, &u.row(from));
                }
                u = next;
            }
            Element::Swap { modes: (a, b) } => u.swap_rows(a, b),
        }
    }
    let deviation = unitarity_deviation(&u);
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    ModeUnitary::new(u)
}

/// Elements realizing the real rotation `[[cos a, -sin a], [sin a, cos a]]` on `(i, j)`.
pub fn real_rotation(i: usize, j: usize, angle: f64) -> Vec<Element> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    let mut out = Vec::new();
    // R(a) = -R(a - π) for |a| > π/2
    let flipped = a.abs() > FRAC_PI_2;
    if flipped {
        a -= PI.copysign(a);
        out.push(Element::phase_shift(i, PI));
        out.push(Element::phase_shift(j, PI));
    }
    let phase = if a >= 0.0 { -FRAC_PI_2 } else { FRAC_PI_2 };
    out.push(Element::beamsplitter(i, j, a.sin().powi(2), phase));
    out
}

/// `(1/√2)[[1, 1], [1, -1]]` on `(i, j)`.
pub fn hadamard(i: usize, j: usize) -> Vec<Element> {
    use std::f64::consts::FRAC_PI_2;
    vec![
        Element::phase_shift(j, -FRAC_PI_2),
        Element::beamsplitter(i, j, 0.5, 0.0),
        Element::phase_shift(j, -FRAC_PI_2),
    ]
}
