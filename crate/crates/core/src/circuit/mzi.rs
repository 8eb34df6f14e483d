use serde::{Deserialize, Serialize};

use super::network::{Element, InterferometerNetwork, ModeLabel};
use crate::error::{Error, Result};

/// Short (input) arm; also the output port watched by detector 2.
pub const ARM_SHORT: u16 = 0;
/// Long arm, delayed by one pulse period; also the output port watched by detector 1.
pub const ARM_LONG: u16 = 1;

/// Smallest window giving `k ∈ {0, ±1, ±2}` peaks away from the edges.
pub const MIN_WINDOW: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziConfig {
    /// Number of input pulses.
    pub window: usize,
    /// Phase picked up on the long arm.
    pub phi: f64,
    pub r1: f64,
    pub r2: f64,
    /// Rotate the long arm into an orthogonal polarization before recombination.
    pub perpendicular: bool,
    /// Internal labels per polarization carried by the network.
    pub internal_modes: u16,
}

impl MziConfig {
    pub fn balanced(window: usize, phi: f64, perpendicular: bool) -> Self {
        Self {
            window,
            phi,
            r1: 0.5,
            r2: 0.5,
            perpendicular,
            internal_modes: 1,
        }
    }

    pub fn bins(&self) -> u16 {
        self.window as u16 + 1
    }

    pub fn polarizations(&self) -> u16 {
        if self.perpendicular {
            2
        } else {
            1
        }
    }
}

/// Mode layout of a built interferometer.
#[derive(Clone, Debug)]
pub struct Mzi {
    pub config: MziConfig,
    pub network: InterferometerNetwork,
}

impl Mzi {
    /// Index of `(spatial, bin, internal)`; `internal` counts across polarizations.
    pub fn mode(&self, spatial: u16, bin: u16, internal: u16) -> usize {
        let bins = self.config.bins();
        ((internal as usize * 2 + spatial as usize) * bins as usize) + bin as usize
    }

    /// All modes seen by the detector on `port` in `bin`, across internal labels.
    pub fn detector_modes(&self, port: u16, bin: u16) -> Vec<usize> {
        let total = self.config.internal_modes * self.config.polarizations();
        (0..total).map(|i| self.mode(port, bin, i)).collect()
    }
}

pub fn build_unbalanced_mzi(config: MziConfig) -> Result<Mzi> {
    build(config, true)
}

/// Same layout with the final beamsplitter left out: the paths entering it.
pub fn build_mzi_before_recombination(config: MziConfig) -> Result<Mzi> {
    build(config, false)
}

fn build(config: MziConfig, recombine: bool) -> Result<Mzi> {
    if config.window < MIN_WINDOW {
        return Err(Error::InvalidParameter {
            name: "window",
            value: config.window as f64,
            reason: "needs at least 4 pulses",
        });
    }
    for (name, r) in [("r1", config.r1), ("r2", config.r2)] {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter {
                name,
                value: r,
                reason: "must lie in (0, 1)",
            });
        }
    }
    if config.internal_modes == 0 {
        return Err(Error::InvalidParameter {
            name: "internal_modes",
            value: 0.0,
            reason: "must be positive",
        });
    }
    let bins = config.bins();
    let internal_total = config.internal_modes * config.polarizations();
    let mut labels = Vec::new();
    for internal in 0..internal_total {
        for spatial in [ARM_SHORT, ARM_LONG] {
            for bin in 0..bins {
                labels.push(ModeLabel::new(spatial, bin, internal));
            }
        }
    }
    let mut mzi = Mzi {
        config,
        network: InterferometerNetwork::new(labels),
    };
    let pairs: Vec<(usize, usize)> = (0..internal_total)
        .flat_map(|i| (0..bins).map(move |b| (i, b)))
        .map(|(i, b)| (mzi.mode(ARM_SHORT, b, i), mzi.mode(ARM_LONG, b, i)))
        .collect();

    let mut elements = Vec::new();
    for &(a, b) in &pairs {
        elements.push(Element::beamsplitter(a, b, config.r1, 0.0));
    }
    for i in 0..internal_total {
        for bin in 0..bins {
            elements.push(Element::phase_shift(mzi.mode(ARM_LONG, bin, i), config.phi));
        }
    }
    elements.push(Element::Delay { spatial: ARM_LONG });
    if config.perpendicular {
        for i in 0..config.internal_modes {
            for bin in 0..bins {
                let parallel = mzi.mode(ARM_LONG, bin, i);
                let crossed = mzi.mode(ARM_LONG, bin, i + config.internal_modes);
                elements.push(Element::Swap {
                    modes: (parallel, crossed),
                });
            }
        }
    }
    if recombine {
        for &(a, b) in &pairs {
            elements.push(Element::beamsplitter(a, b, config.r2, 0.0));
        }
    }
    mzi.network.extend(elements)?;
    Ok(mzi)
}
