use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Normalization tolerance on `Σ|c|²`.
pub const NORM_TOL: f64 = 1e-12;

/// Occupation numbers, one entry per mode.
pub type Occupation = Vec<u8>;

/// Sparse pure state over the occupation-number basis.
///
/// Terms are kept in lexicographic order of their occupation vectors, so iteration
/// order is stable across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodeFockState {
    mode_count: usize,
    cutoff: u8,
    amplitudes: BTreeMap<Occupation, Complex64>,
    normalized: bool,
}

impl MultimodeFockState {
    /// All modes empty.
    pub fn vacuum(mode_count: usize, cutoff: u8) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(vec![0; mode_count], Complex64::new(1.0, 0.0));
        Self {
            mode_count,
            cutoff,
            amplitudes,
            normalized: true,
        }
    }

    /// A single basis vector `|n_0, n_1, ...⟩`.
    pub fn basis(occupation: &[u8], cutoff: u8) -> Result<Self> {
        Self::new(
            occupation.len(),
            cutoff,
            [(occupation.to_vec(), Complex64::new(1.0, 0.0))],
        )
    }

    /// Normalized state from explicit terms. Repeated occupations are summed.
    pub fn new(
        mode_count: usize,
        cutoff: u8,
        terms: impl IntoIterator<Item = (Occupation, Complex64)>,
    ) -> Result<Self> {
        let state = Self::unnormalized(mode_count, cutoff, terms)?;
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self {
            normalized: true,
            ..state
        })
    }

    /// State tagged as unnormalized, e.g. a projected branch.
    pub fn unnormalized(
        mode_count: usize,
        cutoff: u8,
        terms: impl IntoIterator<Item = (Occupation, Complex64)>,
    ) -> Result<Self> {
        let mut amplitudes = BTreeMap::new();
        for (occupation, amplitude) in terms {
            if occupation.len() != mode_count {
                return Err(Error::DimensionMismatch {
                    expected: mode_count,
                    actual: occupation.len(),
                });
            }
            if let Some(&n) = occupation.iter().find(|&&n| n > cutoff) {
                return Err(Error::CutoffExceeded {
                    occupation: n,
                    cutoff,
                });
            }
            *amplitudes.entry(occupation).or_insert(Complex64::new(0.0, 0.0)) += amplitude;
        }
        amplitudes.retain(|_, c: &mut Complex64| c.norm_sqr() > 0.0);
        Ok(Self {
            mode_count,
            cutoff,
            amplitudes,
            normalized: false,
        })
    }

    /// Internal constructor for operations that already respect the invariants.
    pub(crate) fn from_map(
        mode_count: usize,
        cutoff: u8,
        mut amplitudes: BTreeMap<Occupation, Complex64>,
        normalized: bool,
    ) -> Self {
        amplitudes.retain(|_, c| c.norm_sqr() > 0.0);
        Self {
            mode_count,
            cutoff,
            amplitudes,
            normalized,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn cutoff(&self) -> u8 {
        self.cutoff
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitude(&self, occupation: &[u8]) -> Complex64 {
        self.amplitudes
            .get(occupation)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|c| c.norm_sqr()).sum()
    }

    /// Rescale to unit norm. Fails on the zero vector.
    pub fn normalize(&self) -> Result<Self> {
        let norm_sqr = self.norm_sqr();
        if norm_sqr == 0.0 {
            return Err(Error::ZeroDenominator("state normalization"));
        }
        let scale = 1.0 / norm_sqr.sqrt();
        Ok(Self {
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(k, c)| (k.clone(), c * scale))
                .collect(),
            normalized: true,
            ..self.clone()
        })
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_map(
            self.mode_count,
            self.cutoff,
            self.amplitudes
                .iter()
                .map(|(k, c)| (k.clone(), c * factor))
                .collect(),
            self.normalized && (factor.norm_sqr() - 1.0).abs() <= NORM_TOL,
        )
    }

    /// Raise the per-mode cutoff. Lowering below an occupied level fails.
    pub fn with_cutoff(&self, cutoff: u8) -> Result<Self> {
        if let Some(n) = self.max_occupation().filter(|&n| n > cutoff) {
            return Err(Error::CutoffExceeded {
                occupation: n,
                cutoff,
            });
        }
        Ok(Self {
            cutoff,
            ..self.clone()
        })
    }

    pub fn max_occupation(&self) -> Option<u8> {
        self.amplitudes.keys().flatten().copied().max()
    }

    pub fn max_total_photons(&self) -> u32 {
        self.amplitudes
            .keys()
            .map(|k| total_photons(k))
            .max()
            .unwrap_or(0)
    }

    /// `|self⟩ ⊗ |other⟩`, with `other`'s modes appended after `self`'s.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut amplitudes = BTreeMap::new();
        for (a, ca) in &self.amplitudes {
            for (b, cb) in &other.amplitudes {
                let mut key = a.clone();
                key.extend_from_slice(b);
                amplitudes.insert(key, ca * cb);
            }
        }
        Self::from_map(
            self.mode_count + other.mode_count,
            self.cutoff.max(other.cutoff),
            amplitudes,
            self.normalized && other.normalized,
        )
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_modes(other.mode_count)?;
        Ok(self
            .amplitudes
            .iter()
            .filter_map(|(k, a)| other.amplitudes.get(k).map(|b| a.conj() * b))
            .sum())
    }

    /// `a_m |self⟩`, unnormalized.
    pub fn annihilate(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let mut out = BTreeMap::new();
        for (k, c) in &self.amplitudes {
            let n = k[mode];
            if n == 0 {
                continue;
            }
            let mut key = k.clone();
            key[mode] -= 1;
            *out.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c * f64::from(n).sqrt();
        }
        Ok(Self::from_map(self.mode_count, self.cutoff, out, false))
    }

    /// `(Σ_j w_j a†_j) |self⟩`, unnormalized. The cutoff grows when needed.
    pub fn create(&self, weights: &[(usize, Complex64)]) -> Result<Self> {
        for &(mode, _) in weights {
            self.check_mode(mode)?;
        }
        let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        let mut cutoff = self.cutoff;
        for (k, c) in &self.amplitudes {
            for &(mode, w) in weights {
                let mut key = k.clone();
                key[mode] += 1;
                cutoff = cutoff.max(key[mode]);
                *out.entry(key).or_insert(Complex64::new(0.0, 0.0)) +=
                    c * w * f64::from(k[mode] + 1).sqrt();
            }
        }
        Ok(Self::from_map(self.mode_count, cutoff, out, false))
    }

    /// Coherent sum `self + other`, unnormalized.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_modes(other.mode_count)?;
        let mut out = self.amplitudes.clone();
        for (k, c) in &other.amplitudes {
            *out.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(Self::from_map(
            self.mode_count,
            self.cutoff.max(other.cutoff),
            out,
            false,
        ))
    }

    /// `⟨a_m⟩`.
    pub fn expect_annihilation(&self, mode: usize) -> Result<Complex64> {
        self.inner(&self.annihilate(mode)?)
    }

    /// `⟨n_m⟩`.
    pub fn mean_photons(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        Ok(self
            .amplitudes
            .iter()
            .map(|(k, c)| c.norm_sqr() * f64::from(k[mode]))
            .sum())
    }

    /// Probability mass per total photon number.
    pub fn photon_number_distribution(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for (k, c) in &self.amplitudes {
            *out.entry(total_photons(k)).or_insert(0.0) += c.norm_sqr();
        }
        out
    }

    pub(crate) fn amplitudes(&self) -> &BTreeMap<Occupation, Complex64> {
        &self.amplitudes
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count {
            return Err(Error::ModeOutOfRange {
                index: mode,
                mode_count: self.mode_count,
            });
        }
        Ok(())
    }

    fn check_same_modes(&self, other: usize) -> Result<()> {
        if other != self.mode_count {
            return Err(Error::DimensionMismatch {
                expected: self.mode_count,
                actual: other,
            });
        }
        Ok(())
    }
}

pub(crate) fn total_photons(occupation: &[u8]) -> u32 {
    occupation.iter().map(|&n| u32::from(n)).sum()
}

/// Ensemble of pure states.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    components: Vec<(f64, MultimodeFockState)>,
}

impl MixedState {
    pub fn new(components: Vec<(f64, MultimodeFockState)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidMixture("no components".into()));
        };
        let modes = first.mode_count();
        let mut total = 0.0;
        for (w, s) in &components {
            if !(*w >= 0.0) {
                return Err(Error::InvalidMixture(format!("negative weight {w}")));
            }
            if s.mode_count() != modes {
                return Err(Error::DimensionMismatch {
                    expected: modes,
                    actual: s.mode_count(),
                });
            }
            if !s.is_normalized() {
                return Err(Error::NotNormalized {
                    norm_sqr: s.norm_sqr(),
                });
            }
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Self { components })
    }

    pub fn pure(state: MultimodeFockState) -> Result<Self> {
        Self::new(vec![(1.0, state)])
    }

    pub fn components(&self) -> &[(f64, MultimodeFockState)] {
        &self.components
    }

    pub fn into_components(self) -> Vec<(f64, MultimodeFockState)> {
        self.components
    }

    pub fn mode_count(&self) -> usize {
        self.components[0].1.mode_count()
    }

    /// Ensemble of all pairwise tensor products.
    pub fn tensor(&self, other: &Self) -> Self {
        let components = self
            .components
            .iter()
            .flat_map(|(wa, a)| {
                other
                    .components
                    .iter()
                    .map(move |(wb, b)| (wa * wb, a.tensor(b)))
            })
            .collect();
        Self { components }
    }

    pub fn mean_photons(&self, mode: usize) -> Result<f64> {
        self.components
            .iter()
            .map(|(w, s)| s.mean_photons(mode).map(|n| w * n))
            .sum()
    }

    /// Merge components whose weight is exactly zero.
    pub(crate) fn from_weighted_unchecked(components: Vec<(f64, MultimodeFockState)>) -> Self {
        Self {
            components: components.into_iter().filter(|(w, _)| *w > 0.0).collect(),
        }
    }
}

impl From<MultimodeFockState> for MixedState {
    fn from(state: MultimodeFockState) -> Self {
        Self {
            components: vec![(1.0, state)],
        }
    }
}
