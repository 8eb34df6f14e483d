//! Correlation histograms of the path-unbalanced interferometer.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_unbalanced_mzi, compile, Mzi, MziConfig, ARM_LONG, ARM_SHORT};
use crate::error::{check_unit_interval, Error, Result};
use crate::fock::{apply_mode_unitary, normally_ordered_set_g2_batch, MultimodeFockState, PHOTON_CUTOFF_DEFAULT};
use crate::source::SourcePulseSpec;

/// Pulses fed through the interferometer per simulated histogram.
pub const HISTOGRAM_WINDOW: usize = 5;
/// Uniform phase nodes used for phase averaging.
pub const PHASE_QUADRATURE: usize = 64;
/// Delay index of the reference far peak.
pub const FAR_K: i32 = 2;
/// Largest `|k|` reported.
pub const MAX_K: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSetting {
    Fixed(f64),
    Averaged,
}

impl PhaseSetting {
    pub fn phi(&self) -> Option<f64> {
        match self {
            PhaseSetting::Fixed(phi) => Some(*phi),
            PhaseSetting::Averaged => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorPair {
    D1D2,
    D1D1,
    D2D2,
}

impl DetectorPair {
    pub const ALL: [DetectorPair; 3] = [DetectorPair::D1D2, DetectorPair::D1D1, DetectorPair::D2D2];

    fn ports(self) -> (u16, u16) {
        match self {
            DetectorPair::D1D2 => (DETECTOR_1, DETECTOR_2),
            DetectorPair::D1D1 => (DETECTOR_1, DETECTOR_1),
            DetectorPair::D2D2 => (DETECTOR_2, DETECTOR_2),
        }
    }
}

/// Output port watched by detector 1.
pub const DETECTOR_1: u16 = ARM_LONG;
/// Output port watched by detector 2.
pub const DETECTOR_2: u16 = ARM_SHORT;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakArea {
    pub pair: DetectorPair,
    pub k: i32,
    /// Normalized area.
    pub area: f64,
    /// Unnormalized `⟨:n_i n_j:⟩` including detector efficiencies.
    pub raw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub peaks: Vec<PeakArea>,
    /// Mean detected photons per pulse period at detectors 1 and 2.
    pub single_counts: (f64, f64),
    /// Product-of-intensities scale used to normalize the cross peaks.
    pub normalization: f64,
    pub phase: PhaseSetting,
    pub perpendicular: bool,
}

impl CorrelationHistogram {
    pub fn area(&self, pair: DetectorPair, k: i32) -> Option<f64> {
        self.peak(pair, k).map(|p| p.area)
    }

    pub fn raw(&self, pair: DetectorPair, k: i32) -> Option<f64> {
        self.peak(pair, k).map(|p| p.raw)
    }

    fn peak(&self, pair: DetectorPair, k: i32) -> Option<&PeakArea> {
        self.peaks.iter().find(|p| p.pair == pair && p.k == k)
    }

    fn cross(&self, k: i32) -> f64 {
        self.area(DetectorPair::D1D2, k).unwrap_or(f64::NAN)
    }

    pub fn g2_k0(&self) -> f64 {
        self.cross(0)
    }

    /// Mean of the `k = ±1` cross peaks.
    pub fn g2_k1(&self) -> f64 {
        0.5 * (self.cross(1) + self.cross(-1))
    }

    pub fn g2_kfar(&self) -> f64 {
        0.5 * (self.cross(FAR_K) + self.cross(-FAR_K))
    }

    pub fn far_peaks(&self) -> FarPeaks {
        let raw = |pair| 0.5 * (self.raw(pair, FAR_K).unwrap_or(0.0) + self.raw(pair, -FAR_K).unwrap_or(0.0));
        FarPeaks {
            g11: raw(DetectorPair::D1D1),
            g12: raw(DetectorPair::D1D2),
            g22: raw(DetectorPair::D2D2),
        }
    }
}

/// Unnormalized far-peak areas for the three detector pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarPeaks {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
}

/// `¼ (G11/r + 2 G12 + r G22)` with `r = η1/η2`; `r = 1` gives the plain balanced sum.
///
/// Weighting the auto-correlations by the efficiency ratio makes the result scale as
/// `η1 η2`, exactly like the cross peaks it normalizes.
pub fn normalization_factor(far: &FarPeaks, efficiency_ratio: f64) -> Result<f64> {
    if !(efficiency_ratio > 0.0 && efficiency_ratio.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "efficiency_ratio",
            value: efficiency_ratio,
            reason: "must be positive",
        });
    }
    let n = 0.25 * (far.g11 / efficiency_ratio + 2.0 * far.g12 + efficiency_ratio * far.g22);
    if !(n > 0.0) {
        return Err(Error::ZeroDenominator("far-peak normalization"));
    }
    Ok(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomOptions {
    pub window: usize,
    pub quadrature: usize,
    /// Detection efficiencies of detectors 1 and 2.
    pub efficiencies: (f64, f64),
    /// Calibrated `η1/η2`; measured from perpendicular singles when absent.
    pub efficiency_ratio: Option<f64>,
}

impl Default for HomOptions {
    fn default() -> Self {
        Self {
            window: HISTOGRAM_WINDOW,
            quadrature: PHASE_QUADRATURE,
            efficiencies: (1.0, 1.0),
            efficiency_ratio: None,
        }
    }
}

pub fn simulate_histogram(
    source: &SourcePulseSpec,
    phase: PhaseSetting,
    perpendicular: bool,
) -> Result<CorrelationHistogram> {
    simulate_histogram_with(source, phase, perpendicular, &HomOptions::default())
}

pub fn simulate_histogram_with(
    source: &SourcePulseSpec,
    phase: PhaseSetting,
    perpendicular: bool,
    options: &HomOptions,
) -> Result<CorrelationHistogram> {
    source.validate()?;
    let (eta1, eta2) = options.efficiencies;
    for eta in [eta1, eta2] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "efficiency",
                value: eta,
                reason: "must lie in (0, 1]",
            });
        }
    }
    let moments = match phase {
        PhaseSetting::Fixed(phi) => raw_moments(source, phi, perpendicular, options.window)?,
        PhaseSetting::Averaged => {
            if options.quadrature == 0 {
                return Err(Error::InvalidParameter {
                    name: "quadrature",
                    value: 0.0,
                    reason: "needs at least one node",
                });
            }
            // Every moment is a trigonometric polynomial in φ with harmonics |n| <= 2: each
            // photon crosses the long arm at most once, and a second moment carries two
            // annihilators and two creators. Any uniform rule with more than two nodes
            // returns its constant term exactly, so the smallest such rule stands in.
            let nodes = options.quadrature.min(EXACT_AVERAGE_NODES);
            uniform_average(source, perpendicular, options.window, nodes)?
        }
    };
    let ratio = match options.efficiency_ratio {
        Some(r) => r,
        None if eta1 == eta2 => 1.0,
        None => {
            let perp = raw_moments(source, 0.0, true, options.window)?;
            let (i1, i2) = perp.singles;
            if i2 == 0.0 {
                return Err(Error::ZeroDenominator("perpendicular singles"));
            }
            (eta1 * i1) / (eta2 * i2)
        }
    };
    let scale = |pair: DetectorPair| match pair {
        DetectorPair::D1D2 => eta1 * eta2,
        DetectorPair::D1D1 => eta1 * eta1,
        DetectorPair::D2D2 => eta2 * eta2,
    };
    let raw: Vec<(DetectorPair, i32, f64)> = moments
        .peaks
        .iter()
        .map(|&(pair, k, g)| (pair, k, g * scale(pair)))
        .collect();
    let far_of = |pair: DetectorPair| {
        raw.iter()
            .filter(|(p, k, _)| *p == pair && k.abs() == FAR_K)
            .map(|(_, _, g)| g)
            .sum::<f64>()
            / 2.0
    };
    let far = FarPeaks {
        g11: far_of(DetectorPair::D1D1),
        g12: far_of(DetectorPair::D1D2),
        g22: far_of(DetectorPair::D2D2),
    };
    let normalization = normalization_factor(&far, ratio)?;
    let peaks = raw
        .into_iter()
        .map(|(pair, k, g)| {
            let denominator = match pair {
                DetectorPair::D1D2 => normalization,
                DetectorPair::D1D1 => normalization * ratio,
                DetectorPair::D2D2 => normalization / ratio,
            };
            PeakArea {
                pair,
                k,
                area: g / denominator,
                raw: g,
            }
        })
        .collect();
    Ok(CorrelationHistogram {
        peaks,
        single_counts: (eta1 * moments.singles.0, eta2 * moments.singles.1),
        normalization,
        phase,
        perpendicular,
    })
}

/// Smallest uniform rule that averages the peak moments exactly.
const EXACT_AVERAGE_NODES: usize = 5;

fn uniform_average(source: &SourcePulseSpec, perpendicular: bool, window: usize, nodes: usize) -> Result<RawMoments> {
    let all = (0..nodes)
        .into_par_iter()
        .map(|i| raw_moments(source, 2.0 * PI * i as f64 / nodes as f64, perpendicular, window))
        .collect::<Result<Vec<_>>>()?;
    Ok(RawMoments::mean(&all))
}

#[derive(Clone, Debug)]
struct RawMoments {
    peaks: Vec<(DetectorPair, i32, f64)>,
    singles: (f64, f64),
}

impl RawMoments {
    fn mean(all: &[RawMoments]) -> RawMoments {
        let n = all.len() as f64;
        let mut out = all[0].clone();
        for (i, peak) in out.peaks.iter_mut().enumerate() {
            peak.2 = all.iter().map(|m| m.peaks[i].2).sum::<f64>() / n;
        }
        out.singles = (
            all.iter().map(|m| m.singles.0).sum::<f64>() / n,
            all.iter().map(|m| m.singles.1).sum::<f64>() / n,
        );
        out
    }
}

/// Interferometer sized for `source`, with one unique internal label per pulse when `M < 1`.
pub fn histogram_mzi(source: &SourcePulseSpec, phi: f64, perpendicular: bool, window: usize) -> Result<Mzi> {
    let mut config = MziConfig::balanced(window, phi, perpendicular);
    if source.m_overlap < 1.0 {
        config.internal_modes = window as u16 + 1;
    }
    build_unbalanced_mzi(config)
}

/// Independent, identically prepared pulses entering the short arm in bins `0..window`.
pub fn pulse_train_state(mzi: &Mzi, source: &SourcePulseSpec) -> Result<MultimodeFockState> {
    let amps = source.photon_amplitudes();
    let (shared, unique) = source.internal_weights();
    let mut state = MultimodeFockState::vacuum(mzi.network.mode_count(), PHOTON_CUTOFF_DEFAULT);
    for t in 0..mzi.config.window as u16 {
        let mut weights = vec![(mzi.mode(ARM_SHORT, t, 0), num_complex::Complex64::new(shared, 0.0))];
        if mzi.config.internal_modes > 1 {
            weights.push((mzi.mode(ARM_SHORT, t, 1 + t), num_complex::Complex64::new(unique, 0.0)));
        }
        let one = state.create(&weights)?;
        let mut next = state.scaled(amps[0]).add(&one.scaled(amps[1]))?;
        if amps[2].norm_sqr() > 0.0 {
            let two = one.create(&weights)?;
            next = next.add(&two.scaled(amps[2] / 2f64.sqrt()))?;
        }
        state = next;
    }
    state.normalize()
}

/// Reference bins `(t, t + k)` kept inside the fully interfering region `1..window`.
fn reference_bins(k: i32) -> (u16, u16) {
    let t = if k >= 0 { 1 } else { 1 + k.unsigned_abs() as u16 };
    (t, (t as i32 + k) as u16)
}

fn raw_moments(source: &SourcePulseSpec, phi: f64, perpendicular: bool, window: usize) -> Result<RawMoments> {
    if window < MAX_K as usize + 2 {
        return Err(Error::InvalidParameter {
            name: "window",
            value: window as f64,
            reason: "too short for the reported delay peaks",
        });
    }
    let mzi = histogram_mzi(source, phi, perpendicular, window)?;
    let u = compile(&mzi.network)?;
    let out = apply_mode_unitary(&pulse_train_state(&mzi, source)?, &u)?;
    let mut labels = Vec::new();
    let mut sets = Vec::new();
    for pair in DetectorPair::ALL {
        let (pa, pb) = pair.ports();
        for k in -MAX_K..=MAX_K {
            let (ta, tb) = reference_bins(k);
            labels.push((pair, k));
            sets.push((mzi.detector_modes(pa, ta), mzi.detector_modes(pb, tb)));
        }
    }
    let moments = normally_ordered_set_g2_batch(&out, &sets)?;
    let peaks: Vec<_> = labels.into_iter().zip(moments).map(|((pair, k), g)| (pair, k, g)).collect();
    let center = (window / 2) as u16;
    let singles = |port| -> Result<f64> {
        mzi.detector_modes(port, center)
            .iter()
            .map(|&m| out.mean_photons(m))
            .sum()
    };
    Ok(RawMoments {
        peaks,
        singles: (singles(DETECTOR_1)?, singles(DETECTOR_2)?),
    })
}

/// `1 - (c1 cos φ)²`.
pub fn far_peak_analytic(c1: f64, phi: f64) -> f64 {
    1.0 - (c1 * phi.cos()).powi(2)
}

/// `¼ + ½ (1 - s cos 2φ)`.
pub fn k1_peak_analytic(s2: f64, phi: f64) -> f64 {
    0.25 + 0.5 * (1.0 - s2 * (2.0 * phi).cos())
}

/// `1 - g_par / g_perp`.
pub fn vhom(g2_k0_par: f64, g2_k0_perp: f64) -> Result<f64> {
    if g2_k0_perp == 0.0 {
        return Err(Error::ZeroDenominator("HOM visibility"));
    }
    Ok(1.0 - g2_k0_par / g2_k0_perp)
}

/// Phase-averaged `|k|=1` to far-peak ratio, `3 / (4 - 2 c1²)`.
pub fn ratio_phase_averaged(c1: f64) -> Result<f64> {
    check_unit_interval("c1", c1)?;
    Ok(3.0 / (4.0 - 2.0 * c1 * c1))
}

/// Inverse of [`ratio_phase_averaged`]. Ratios outside `[3/4, 3/2]` cannot come from a
/// 0/1-photon source and are rejected.
pub fn c1_from_ratio(r: f64) -> Result<f64> {
    if !(0.75..=1.5).contains(&r) {
        return Err(Error::InvalidParameter {
            name: "ratio",
            value: r,
            reason: "outside [3/4, 3/2]; needs a multi-photon correction",
        });
    }
    Ok(((4.0 - 3.0 / r) / 2.0).max(0.0).sqrt())
}

/// Indistinguishability error when the zero-delay peak is referenced to phase-averaged far
/// peaks: `(1 - m)(c1²/2) / (1 - c1²/2)`.
pub fn delta_m(c1: f64, m: f64) -> f64 {
    let h = c1 * c1 / 2.0;
    (1.0 - m) * h / (1.0 - h)
}

/// Visibility an experimenter gets by normalizing each configuration to its own far peaks.
pub fn vhom_far_referenced(parallel: &CorrelationHistogram, perpendicular: &CorrelationHistogram) -> Result<f64> {
    let par = parallel.g2_k0() / parallel.g2_kfar();
    let perp = perpendicular.g2_k0() / perpendicular.g2_kfar();
    vhom(par, perp)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomSummary {
    pub g2_k0_par: f64,
    pub g2_k0_perp: f64,
    pub g2_k1: f64,
    pub g2_kfar: f64,
    pub v_hom: f64,
    /// Coherence read back from the far peak; absent where `cos φ = 0`.
    pub c1_est: Option<f64>,
    pub m_est: f64,
    /// `m - v_hom` with the robust normalization.
    pub delta_m: f64,
    /// `m - v_hom` with each configuration referenced to its own far peaks.
    pub delta_m_far_referenced: f64,
    pub ratio: f64,
}

pub fn summarize(source: &SourcePulseSpec, phase: PhaseSetting, options: &HomOptions) -> Result<HomSummary> {
    let par = simulate_histogram_with(source, phase, false, options)?;
    let perp = simulate_histogram_with(source, phase, true, options)?;
    let v_hom = vhom(par.g2_k0(), perp.g2_k0())?;
    let suppression = (1.0 - par.g2_kfar()).max(0.0);
    let c1_est = match phase {
        PhaseSetting::Averaged => Some((2.0 * suppression).sqrt()),
        PhaseSetting::Fixed(phi) if phi.cos().abs() > 1e-6 => Some(suppression.sqrt() / phi.cos().abs()),
        PhaseSetting::Fixed(_) => None,
    };
    Ok(HomSummary {
        g2_k0_par: par.g2_k0(),
        g2_k0_perp: perp.g2_k0(),
        g2_k1: par.g2_k1(),
        g2_kfar: par.g2_kfar(),
        v_hom,
        c1_est,
        m_est: v_hom,
        delta_m: source.m_overlap - v_hom,
        delta_m_far_referenced: source.m_overlap - vhom_far_referenced(&par, &perp)?,
        ratio: par.g2_k1() / par.g2_kfar(),
    })
}

/// One grid point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    /// `None` for phase-averaged points.
    pub phi: Option<f64>,
    pub m: f64,
    pub g2_k0: f64,
    pub g2_k1: f64,
    pub g2_kfar: f64,
    pub vhom: f64,
    pub c1: f64,
    pub ratio: f64,
}

/// Evaluate every `(θ, φ, M)` combination in parallel; rows come back in grid order.
pub fn sweep(
    thetas: &[f64],
    phases: &[PhaseSetting],
    overlaps: &[f64],
    p2: Option<f64>,
    options: &HomOptions,
) -> Result<Vec<SweepRow>> {
    let grid: Vec<(f64, PhaseSetting, f64)> = thetas
        .iter()
        .flat_map(|&t| phases.iter().flat_map(move |&p| overlaps.iter().map(move |&m| (t, p, m))))
        .collect();
    grid.par_iter()
        .map(|&(theta, phase, m)| {
            let mut spec = SourcePulseSpec::new(theta, 0.0).with_overlap(m);
            spec.p2 = p2;
            let summary = summarize(&spec, phase, options)?;
            Ok(SweepRow {
                theta,
                phi: phase.phi(),
                m,
                g2_k0: summary.g2_k0_par,
                g2_k1: summary.g2_k1,
                g2_kfar: summary.g2_kfar,
                vhom: summary.v_hom,
                c1: spec.interfering_c1(),
                ratio: summary.ratio,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn spec(theta: f64, m: f64) -> SourcePulseSpec {
        SourcePulseSpec::new(theta, 0.0).with_overlap(m)
    }

    #[test]
    fn single_photons_give_textbook_peaks() {
        let h = simulate_histogram(&spec(PI, 1.0), PhaseSetting::Fixed(0.3), false).unwrap();
        assert!(h.g2_k0().abs() < 1e-12);
        assert!((h.g2_k1() - 0.75).abs() < 1e-12);
        assert!((h.g2_kfar() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eq_far_and_k1_at_fixed_phase() {
        for theta in [0.22 * PI, 0.5 * PI, 0.9 * PI] {
            let c1 = (theta / 2.0).cos().powi(2);
            for phi in [0.0, FRAC_PI_4, FRAC_PI_2, 2.0] {
                let h = simulate_histogram(&spec(theta, 1.0), PhaseSetting::Fixed(phi), false).unwrap();
                assert!((h.g2_kfar() - far_peak_analytic(c1, phi)).abs() < 1e-9);
                assert!((h.g2_k1() - k1_peak_analytic(c1, phi)).abs() < 1e-9, "theta {theta} phi {phi}: {}", h.g2_k1());
            }
        }
    }

    #[test]
    fn far_peaks_interchangeable() {
        let h = simulate_histogram(&spec(0.4 * PI, 0.7), PhaseSetting::Fixed(0.9), false).unwrap();
        for pair in DetectorPair::ALL {
            for sign in [1, -1] {
                let a = h.area(pair, sign * 2).unwrap();
                let b = h.area(pair, sign * 3).unwrap();
                assert!((a - b).abs() < 1e-10, "{pair:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn normalization_is_phase_independent() {
        let theta = 0.22 * PI;
        let values: Vec<f64> = (0..12)
            .map(|i| {
                let phi = i as f64 * PI / 6.0;
                simulate_histogram(&spec(theta, 1.0), PhaseSetting::Fixed(phi), false)
                    .unwrap()
                    .normalization
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert!(var < 1e-10);
        // single photons at balanced splitters: μ²/4 with μ = 1
        let n = simulate_histogram(&spec(PI, 1.0), PhaseSetting::Fixed(0.0), false).unwrap();
        assert!((n.normalization - 0.25).abs() < 1e-12);
        assert!((n.single_counts.0 * n.single_counts.1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cross_far_peak_suppression_is_compensated_by_auto_peaks() {
        let theta = 0.22 * PI;
        let c1 = (theta / 2.0).cos().powi(2);
        let h = simulate_histogram(&spec(theta, 1.0), PhaseSetting::Fixed(0.0), false).unwrap();
        let far = h.far_peaks();
        assert!((far.g12 / h.normalization - (1.0 - c1 * c1)).abs() < 1e-10);
        assert!(far.g11 + far.g22 > 2.0 * h.normalization);
    }

    #[test]
    fn efficiency_skew_leaves_normalized_areas() {
        let s = spec(0.3 * PI, 0.8);
        let base = simulate_histogram(&s, PhaseSetting::Fixed(0.6), false).unwrap();
        for skew in [0.8, 1.2] {
            let opts = HomOptions {
                efficiencies: (0.5 * skew, 0.5),
                ..Default::default()
            };
            let h = simulate_histogram_with(&s, PhaseSetting::Fixed(0.6), false, &opts).unwrap();
            for (a, b) in base.peaks.iter().zip(&h.peaks) {
                assert!((a.area - b.area).abs() < 1e-9, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn phase_averaged_laws() {
        for theta in [0.22 * PI, 0.6 * PI] {
            for m in [1.0, 0.6] {
                let s = spec(theta, m);
                let c1 = s.interfering_c1();
                let h = simulate_histogram(&s, PhaseSetting::Averaged, false).unwrap();
                assert!((h.g2_k1() - 0.75).abs() < 1e-9);
                assert!((h.g2_kfar() - (1.0 - c1 * c1 / 2.0)).abs() < 1e-9);
                let r = h.g2_k1() / h.g2_kfar();
                assert!((r - ratio_phase_averaged(c1).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reduced_phase_average_matches_full_quadrature() {
        let sources = [spec(0.6 * PI, 0.7), spec(0.6 * PI, 1.0).with_two_photon(0.02)];
        for (s, perpendicular) in sources.iter().flat_map(|s| [(s, false), (s, true)]) {
            let full = uniform_average(s, perpendicular, HISTOGRAM_WINDOW, PHASE_QUADRATURE).unwrap();
            let reduced = uniform_average(s, perpendicular, HISTOGRAM_WINDOW, EXACT_AVERAGE_NODES).unwrap();
            for (a, b) in full.peaks.iter().zip(&reduced.peaks) {
                assert!((a.2 - b.2).abs() < 1e-12, "{:?} k={}: {} vs {}", a.0, a.1, a.2, b.2);
            }
            assert!((full.singles.0 - reduced.singles.0).abs() < 1e-12);
            assert!((full.singles.1 - reduced.singles.1).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_delay_peak_and_visibility() {
        for m in [1.0, 0.9, 0.5, 0.0] {
            for theta in [0.22 * PI, 0.7 * PI, PI] {
                let s = spec(theta, m);
                let k0: Vec<f64> = [0.0, 0.8, FRAC_PI_2, 2.5]
                    .iter()
                    .map(|&phi| simulate_histogram(&s, PhaseSetting::Fixed(phi), false).unwrap().g2_k0())
                    .collect();
                for v in &k0 {
                    assert!((v - k0[0]).abs() < 1e-10);
                }
                assert!((k0[0] - (1.0 - m) / 2.0).abs() < 1e-10, "m {m} theta {theta}: {}", k0[0]);
                let perp = simulate_histogram(&s, PhaseSetting::Fixed(0.4), true).unwrap();
                assert!((perp.g2_k0() - 0.5).abs() < 1e-10);
                assert!((vhom(k0[0], perp.g2_k0()).unwrap() - m).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn k1_oscillation_amplitude_is_c1_at_unit_overlap() {
        let theta = 0.35 * PI;
        let s = spec(theta, 1.0);
        let at = |phi| simulate_histogram(&s, PhaseSetting::Fixed(phi), false).unwrap().g2_k1();
        let amplitude = at(FRAC_PI_2) - at(0.0);
        assert!((amplitude - (theta / 2.0).cos().powi(2)).abs() < 1e-9);
    }

    #[test]
    fn vhom_examples() {
        assert_eq!(vhom(0.0, 0.5).unwrap(), 1.0);
        assert_eq!(vhom(0.5, 0.5).unwrap(), 0.0);
        assert!((vhom(0.0417, 0.5).unwrap() - 0.9166).abs() < 1e-12);
        assert!(vhom(0.1, 0.0).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_phase_averaged(0.0).unwrap(), 0.75);
        assert_eq!(ratio_phase_averaged(1.0).unwrap(), 1.5);
        let r = ratio_phase_averaged(0.4).unwrap();
        assert!((r - 3.0 / (4.0 - 0.32)).abs() < 1e-15);
        assert!((r - 0.815_22).abs() < 1e-5);
        assert!((c1_from_ratio(r).unwrap() - 0.4).abs() < 1e-12);
        assert!(c1_from_ratio(0.7).is_err());
        assert!(c1_from_ratio(1.6).is_err());
    }

    #[test]
    fn delta_m_closed_form_matches_far_referenced_simulation() {
        for (theta, m) in [(0.3 * PI, 0.6), (0.55 * PI, 1.0), (0.8 * PI, 0.9)] {
            let s = spec(theta, m);
            let par = simulate_histogram(&s, PhaseSetting::Averaged, false).unwrap();
            let perp = simulate_histogram(&s, PhaseSetting::Averaged, true).unwrap();
            let simulated = m - vhom_far_referenced(&par, &perp).unwrap();
            let closed = delta_m(s.interfering_c1(), m);
            assert!((simulated - closed).abs() < 1e-9, "theta {theta} m {m}: {simulated} vs {closed}");
        }
        assert_eq!(delta_m(0.7, 1.0), 0.0);
        assert_eq!(delta_m(0.0, 0.3), 0.0);
        let d = delta_m(0.43, 0.90);
        assert!((d - 0.01).abs() < 0.002, "{d}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ratio_roundtrip(c1 in 0.0..=1.0f64) {
            let r = ratio_phase_averaged(c1).unwrap();
            prop_assert!((0.75..=1.5).contains(&r));
            prop_assert!((c1_from_ratio(r).unwrap() - c1).abs() < 1e-12);
        }

        #[test]
        fn delta_m_bounded(c1 in 0.0..=1.0f64, m in 0.0..=1.0f64) {
            let d = delta_m(c1, m);
            prop_assert!(d >= 0.0 && d <= 1.0 - m + 1e-15);
        }
    }
}
