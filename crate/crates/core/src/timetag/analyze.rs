//! Phase tracking and parameter estimation from binned detector counts.
//!
//! The stream is cut into blocks short enough for the phase to be treated as constant.
//! Each block gives a singles imbalance `x = (I1 - I2)/(I1 + I2) = C cos φ` and a `|k|=1`
//! coincidence peak `g = 3/4 + s/2 - (s/C²) x²`, so a straight-line fit of `g` against
//! `x²` over blocks yields both the interfering amplitude `C` and the pair coherence `s`.
//! All block statistics are additive, so any grouping of blocks (phase bins, bootstrap
//! resamples) is a sum.

use std::f64::consts::PI;
use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TimeTagRecord;
use crate::error::{Error, Result};

pub const DEFAULT_BLOCK_LENGTH: usize = 10_000;
pub const DEFAULT_PHASE_BINS: usize = 12;
pub const DEFAULT_BOOTSTRAP: usize = 200;
/// Blocks with fewer detected photons give an imbalance noisier than `±0.1` and are
/// left out of phase inference.
pub const MIN_BLOCK_SINGLES: u64 = 100;
/// Occupied phase bins needed before a phase-resolved fit is attempted.
const MIN_OCCUPIED_BINS: usize = 3;

/// Photon counts per pulse bin for detectors 1 and 2.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedCounts {
    pub n1: Vec<u16>,
    pub n2: Vec<u16>,
}

impl BinnedCounts {
    /// Bins records onto the pulse grid. `bins` defaults to one past the last timestamp.
    pub fn from_records(records: &[TimeTagRecord], pulse_period_ps: u64, bins: Option<usize>) -> Result<Self> {
        if pulse_period_ps == 0 {
            return Err(Error::InvalidParameter {
                name: "pulse_period_ps",
                value: 0.0,
                reason: "must be positive",
            });
        }
        let bin_of = |ts: u64| ((ts + pulse_period_ps / 2) / pulse_period_ps) as usize;
        let len = bins.unwrap_or_else(|| records.iter().map(|r| bin_of(r.timestamp_ps) + 1).max().unwrap_or(0));
        let mut counts = Self {
            n1: vec![0; len],
            n2: vec![0; len],
        };
        for r in records {
            let b = bin_of(r.timestamp_ps);
            let slot = match r.detector_id {
                1 => counts.n1.get_mut(b),
                2 => counts.n2.get_mut(b),
                d => return Err(Error::Format(format!("detector id {d} is not 1 or 2"))),
            };
            let slot = slot.ok_or_else(|| Error::Format(format!("timestamp {} beyond {len} bins", r.timestamp_ps)))?;
            *slot = slot
                .checked_add(1)
                .ok_or_else(|| Error::Format(format!("bin {b} overflows the photon counter")))?;
        }
        Ok(counts)
    }

    pub fn len(&self) -> usize {
        self.n1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n1.is_empty()
    }

    /// Singles and correlation sums for bins `[start, start + len)`. Pairs reaching past
    /// the end of the stream are not counted, and their slots are not either.
    pub fn block_stats(&self, start: usize, len: usize) -> BlockStats {
        let n = self.len();
        let end = (start + len).min(n);
        let mut s = BlockStats {
            start,
            len: end.saturating_sub(start),
            ..BlockStats::default()
        };
        for t in start..end {
            let (a, b) = (self.n1[t] as u64, self.n2[t] as u64);
            s.singles[0] += a;
            s.singles[1] += b;
            for (i, k) in (-2i64..=2).enumerate() {
                let u = t as i64 + k;
                if u >= 0 && (u as usize) < n {
                    s.cross[i] += a * self.n2[u as usize] as u64;
                    s.cross_slots[i] += 1;
                }
            }
            if t + 2 < n {
                s.auto[0] += a * self.n1[t + 2] as u64;
                s.auto[1] += b * self.n2[t + 2] as u64;
                s.auto_slots += 1;
            }
        }
        s
    }

    pub fn blocks(&self, block_length: usize) -> Vec<BlockStats> {
        (0..self.len())
            .step_by(block_length.max(1))
            .map(|start| self.block_stats(start, block_length))
            .collect()
    }
}

/// Additive counts over a run of bins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub start: usize,
    pub len: usize,
    pub singles: [u64; 2],
    /// `Σ n1(t) n2(t+k)` for `k = -2..=2`.
    pub cross: [u64; 5],
    pub cross_slots: [u64; 5],
    /// `Σ n1(t) n1(t+2)` and `Σ n2(t) n2(t+2)`.
    pub auto: [u64; 2],
    pub auto_slots: u64,
}

impl AddAssign<&BlockStats> for BlockStats {
    fn add_assign(&mut self, o: &BlockStats) {
        self.len += o.len;
        for d in 0..2 {
            self.singles[d] += o.singles[d];
            self.auto[d] += o.auto[d];
        }
        for i in 0..5 {
            self.cross[i] += o.cross[i];
            self.cross_slots[i] += o.cross_slots[i];
        }
        self.auto_slots += o.auto_slots;
    }
}

fn rate(count: u64, slots: u64) -> f64 {
    if slots == 0 {
        0.0
    } else {
        count as f64 / slots as f64
    }
}

impl BlockStats {
    fn sum<'a>(blocks: impl IntoIterator<Item = &'a BlockStats>) -> BlockStats {
        let mut total = BlockStats::default();
        for b in blocks {
            total += b;
        }
        total
    }

    /// Coincidence sum and slot count of the cross peak at `|k|` (0, 1 or 2).
    fn cross_peak(&self, k: usize) -> (u64, u64) {
        match k {
            0 => (self.cross[2], self.cross_slots[2]),
            _ => (
                self.cross[2 - k] + self.cross[2 + k],
                self.cross_slots[2 - k] + self.cross_slots[2 + k],
            ),
        }
    }

    /// Far-peak rate per slot, `¼ (G11/r + 2 G12 + r G22)`, with `r = η1/η2`.
    pub fn normalization(&self, efficiency_ratio: f64) -> Result<f64> {
        let (g12, slots) = self.cross_peak(2);
        let n = 0.25
            * (rate(self.auto[0], self.auto_slots) / efficiency_ratio
                + 2.0 * rate(g12, slots)
                + efficiency_ratio * rate(self.auto[1], self.auto_slots));
        if !(n > 0.0) {
            return Err(Error::ZeroDenominator("far-peak normalization"));
        }
        Ok(n)
    }

    /// Normalized cross peak at `|k|` against a per-slot normalization rate.
    pub fn g2(&self, k: usize, normalization: f64) -> f64 {
        let (c, slots) = self.cross_peak(k);
        rate(c, slots) / normalization
    }

    /// [`Self::g2`] with a Poisson error that includes the far peaks behind the normalization.
    pub fn g2_with_sigma(&self, k: usize, normalization: f64) -> (f64, f64) {
        let (c, slots) = self.cross_peak(k);
        let g = self.g2(k, normalization);
        let far = (self.cross_peak(2).0 + self.auto[0] + self.auto[1]).max(1) as f64;
        let sigma = if c == 0 {
            1.0 / (slots.max(1) as f64 * normalization)
        } else {
            g * (1.0 / c as f64 + 1.0 / far).sqrt()
        };
        (g, sigma)
    }

    fn photons(&self) -> u64 {
        self.singles[0] + self.singles[1]
    }

    /// Imbalance after dividing detector 1 singles by `balance = η1/η2`.
    fn imbalance(&self, balance: f64) -> f64 {
        let y1 = self.singles[0] as f64 / balance;
        let y2 = self.singles[1] as f64;
        if y1 + y2 == 0.0 {
            0.0
        } else {
            (y1 - y2) / (y1 + y2)
        }
    }

    /// `x²` with the binomial counting bias removed.
    fn imbalance_sq_unbiased(&self, balance: f64) -> f64 {
        let n = self.photons() as f64;
        let x = self.imbalance(balance);
        (n * x * x - 1.0) / (n - 1.0)
    }
}

/// Point estimate with a bootstrap standard error and 95% percentile interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
    pub ci: (f64, f64),
}

impl Estimate {
    fn from_replicates(value: f64, mut reps: Vec<f64>) -> Self {
        if reps.len() < 2 {
            return Self {
                value,
                sigma: f64::NAN,
                ci: (f64::NAN, f64::NAN),
            };
        }
        let n = reps.len() as f64;
        let mean = reps.iter().sum::<f64>() / n;
        let var = reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        reps.sort_by(f64::total_cmp);
        let pick = |q: f64| reps[((q * (n - 1.0)).round() as usize).min(reps.len() - 1)];
        Self {
            value,
            sigma: var.sqrt(),
            ci: (pick(0.025), pick(0.975)),
        }
    }

    /// `|value - truth|` in units of `sigma`.
    pub fn pull(&self, truth: f64) -> f64 {
        let diff = (self.value - truth).abs();
        if diff == 0.0 {
            return 0.0;
        }
        diff / self.sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub block_length: usize,
    pub phase_bins: usize,
    pub bootstrap: usize,
    pub seed: u64,
    /// Known interference amplitude; fitted jointly with `s` when absent.
    pub c1: Option<f64>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            block_length: DEFAULT_BLOCK_LENGTH,
            phase_bins: DEFAULT_PHASE_BINS,
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
            c1: None,
        }
    }
}

impl EstimatorOptions {
    fn validate(&self) -> Result<()> {
        if self.block_length < 2 {
            return Err(Error::InvalidParameter {
                name: "block_length",
                value: self.block_length as f64,
                reason: "must be at least 2 pulses",
            });
        }
        if self.phase_bins < MIN_OCCUPIED_BINS {
            return Err(Error::InvalidParameter {
                name: "phase_bins",
                value: self.phase_bins as f64,
                reason: "must be at least 3",
            });
        }
        if let Some(c1) = self.c1 {
            if !(c1 > 0.0 && c1 <= 1.0) {
                return Err(Error::InvalidParameter {
                    name: "c1",
                    value: c1,
                    reason: "must lie in (0, 1]",
                });
            }
        }
        Ok(())
    }
}

/// A block with its inferred phase; `phi_hat` is `None` for flagged blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBlock {
    pub start: usize,
    pub len: usize,
    pub singles: [u64; 2],
    pub imbalance: f64,
    pub phi_hat: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBinRow {
    pub phi_center: f64,
    pub blocks: usize,
    pub g2_k0: f64,
    pub g2_k1: f64,
    pub g2_kfar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    /// Amplitude of the singles fringe, `p0 √M` for a 0/1-photon source.
    pub interfering_c1: Estimate,
    /// `interfering_c1 / √M`, or `interfering_c1` itself without a perpendicular stream.
    pub c1: Estimate,
    /// Pair coherence from the depth of the `|k|=1` modulation.
    pub s2: Estimate,
    /// Phase-bin average of `g2(|k|=1)` over that of `g2(|k|=2)`.
    pub ratio: Estimate,
    pub m: Option<Estimate>,
    pub efficiency_ratio: f64,
    pub phase_bins: Vec<PhaseBinRow>,
    pub blocks: usize,
    pub flagged_blocks: usize,
    pub bootstrap_failures: usize,
}

/// Scalar results of one pass over a set of blocks.
struct Fit {
    amplitude: f64,
    s2: f64,
    ratio: f64,
    m: Option<f64>,
    bins: Vec<PhaseBinRow>,
}

fn usable(b: &BlockStats) -> bool {
    b.photons() >= MIN_BLOCK_SINGLES
}

fn efficiency_ratio(blocks: &[BlockStats], perpendicular: Option<&[BlockStats]>) -> Result<f64> {
    let total = BlockStats::sum(perpendicular.unwrap_or(blocks));
    if total.singles[0] == 0 || total.singles[1] == 0 {
        return Err(Error::Estimation("a detector recorded no photons".into()));
    }
    Ok(total.singles[0] as f64 / total.singles[1] as f64)
}

/// Ordinary least squares `y = a + b x`.
fn line_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

fn check_visible_fringe(blocks: &[BlockStats], balance: f64) -> Result<()> {
    let used: Vec<&BlockStats> = blocks.iter().filter(|b| usable(b)).collect();
    if used.len() < MIN_OCCUPIED_BINS {
        return Err(Error::Estimation(format!(
            "only {} blocks hold at least {MIN_BLOCK_SINGLES} photons",
            used.len()
        )));
    }
    // Excess of the block-to-block imbalance variance over binomial counting noise.
    let xs: Vec<(f64, f64)> = used.iter().map(|b| (b.imbalance(balance), b.photons() as f64)).collect();
    let mean = xs.iter().map(|p| p.0).sum::<f64>() / xs.len() as f64;
    let chi2: f64 = xs.iter().map(|&(x, n)| (x - mean).powi(2) * n).sum();
    let dof = (xs.len() - 1) as f64;
    if chi2 < dof + 5.0 * (2.0 * dof).sqrt() {
        return Err(Error::Estimation(format!(
            "insufficient phase coverage: imbalance scatter (chi2 {chi2:.1} over {dof} dof) is counting noise"
        )));
    }
    Ok(())
}

/// `(amplitude, s)` from the `g2(|k|=1)` versus `x²` line.
fn fit_amplitude(blocks: &[BlockStats], balance: f64, normalization: f64) -> Result<(f64, f64)> {
    let points: Vec<(f64, f64)> = blocks
        .iter()
        .filter(|b| usable(b))
        .map(|b| (b.imbalance_sq_unbiased(balance), b.g2(1, normalization)))
        .collect();
    let (a, b) = line_fit(&points).ok_or_else(|| Error::Estimation("imbalance does not vary across blocks".into()))?;
    let s2 = 2.0 * (a - 0.75);
    if !(s2 > 0.0 && b < 0.0) {
        return Err(Error::Estimation(format!(
            "no phase-dependent |k|=1 signal (intercept {a:.4}, slope {b:.4})"
        )));
    }
    Ok(((-s2 / b).sqrt(), s2))
}

fn phase_of(b: &BlockStats, balance: f64, amplitude: f64) -> f64 {
    (b.imbalance(balance) / amplitude).clamp(-1.0, 1.0).acos()
}

fn bin_of(phi: f64, bins: usize) -> usize {
    ((phi / PI * bins as f64) as usize).min(bins - 1)
}

fn phase_bins(
    blocks: &[BlockStats],
    balance: f64,
    amplitude: f64,
    normalization: f64,
    bins: usize,
) -> Result<Vec<PhaseBinRow>> {
    let mut grouped = vec![(0usize, BlockStats::default()); bins];
    for b in blocks.iter().filter(|b| usable(b)) {
        let slot = &mut grouped[bin_of(phase_of(b, balance, amplitude), bins)];
        slot.0 += 1;
        slot.1 += b;
    }
    let occupied = grouped.iter().filter(|g| g.0 > 0).count();
    if occupied < MIN_OCCUPIED_BINS {
        return Err(Error::Estimation(format!(
            "insufficient phase coverage: blocks occupy {occupied} of {bins} phase bins"
        )));
    }
    Ok(grouped
        .iter()
        .enumerate()
        .filter(|(_, g)| g.0 > 0)
        .map(|(i, (count, s))| PhaseBinRow {
            phi_center: (i as f64 + 0.5) * PI / bins as f64,
            blocks: *count,
            g2_k0: s.g2(0, normalization),
            g2_k1: s.g2(1, normalization),
            g2_kfar: s.g2(2, normalization),
        })
        .collect())
}

fn fit(
    blocks: &[BlockStats],
    perpendicular: Option<&[BlockStats]>,
    balance: f64,
    options: &EstimatorOptions,
) -> Result<Fit> {
    let total = BlockStats::sum(blocks);
    let normalization = total.normalization(balance)?;
    let (amplitude, s2) = match options.c1 {
        Some(c1) => {
            let (_, s2) = fit_amplitude(blocks, balance, normalization).unwrap_or((c1, f64::NAN));
            (c1, s2)
        }
        None => fit_amplitude(blocks, balance, normalization)?,
    };
    let bins = phase_bins(blocks, balance, amplitude, normalization, options.phase_bins)?;
    let k1 = bins.iter().map(|r| r.g2_k1).sum::<f64>();
    let far = bins.iter().map(|r| r.g2_kfar).sum::<f64>();
    if far == 0.0 {
        return Err(Error::ZeroDenominator("phase-averaged far peak"));
    }
    let m = match perpendicular {
        Some(perp) => {
            let perp = BlockStats::sum(perp);
            let g_perp = perp.g2(0, perp.normalization(balance)?);
            if g_perp == 0.0 {
                return Err(Error::ZeroDenominator("perpendicular zero-delay peak"));
            }
            Some(1.0 - total.g2(0, normalization) / g_perp)
        }
        None => None,
    };
    Ok(Fit {
        amplitude,
        s2,
        ratio: k1 / far,
        m,
        bins,
    })
}

fn resample(blocks: &[BlockStats], rng: &mut ChaCha8Rng) -> Vec<BlockStats> {
    (0..blocks.len()).map(|_| blocks[rng.random_range(0..blocks.len())]).collect()
}

/// Blocks with phases inferred from their singles imbalance. Without a known `c1` the
/// fringe amplitude is fitted from the `|k|=1` peaks first.
pub fn infer_phase_blocks(counts: &BinnedCounts, block_length: usize, c1: Option<f64>) -> Result<Vec<PhaseBlock>> {
    let options = EstimatorOptions {
        block_length,
        c1,
        ..EstimatorOptions::default()
    };
    options.validate()?;
    let blocks = counts.blocks(block_length);
    let balance = efficiency_ratio(&blocks, None)?;
    check_visible_fringe(&blocks, balance)?;
    let amplitude = match c1 {
        Some(c1) => c1,
        None => fit_amplitude(&blocks, balance, BlockStats::sum(&blocks).normalization(balance)?)?.0,
    };
    Ok(blocks
        .iter()
        .map(|b| {
            let flagged = !usable(b);
            PhaseBlock {
                start: b.start,
                len: b.len,
                singles: b.singles,
                imbalance: b.imbalance(balance),
                phi_hat: (!flagged).then(|| phase_of(b, balance, amplitude)),
                flagged,
            }
        })
        .collect())
}

/// Phase-resolved estimate of the fringe amplitude, `s`, the peak ratio and, given the
/// perpendicular-configuration stream, the wavepacket overlap.
pub fn estimate_parameters(
    parallel: &BinnedCounts,
    perpendicular: Option<&BinnedCounts>,
    options: &EstimatorOptions,
) -> Result<ParameterEstimate> {
    options.validate()?;
    let blocks = parallel.blocks(options.block_length);
    let perp_blocks = perpendicular.map(|p| p.blocks(options.block_length));
    let balance = efficiency_ratio(&blocks, perp_blocks.as_deref())?;
    check_visible_fringe(&blocks, balance)?;
    let point = fit(&blocks, perp_blocks.as_deref(), balance, options)?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut reps: Vec<Fit> = Vec::with_capacity(options.bootstrap);
    let mut failures = 0;
    for _ in 0..options.bootstrap {
        let sample = resample(&blocks, &mut rng);
        let perp_sample = perp_blocks.as_ref().map(|p| resample(p, &mut rng));
        match fit(&sample, perp_sample.as_deref(), balance, options) {
            Ok(f) => reps.push(f),
            Err(_) => failures += 1,
        }
    }
    if failures * 2 > options.bootstrap {
        return Err(Error::Estimation(format!(
            "{failures} of {} bootstrap replicates failed",
            options.bootstrap
        )));
    }

    let collect = |f: fn(&Fit) -> f64| reps.iter().map(f).collect::<Vec<f64>>();
    let c1_of = |f: &Fit| match f.m {
        Some(m) if m > 0.0 => f.amplitude / m.sqrt(),
        Some(_) => f64::NAN,
        None => f.amplitude,
    };
    let c1_reps: Vec<f64> = reps.iter().map(c1_of).filter(|v| v.is_finite()).collect();
    Ok(ParameterEstimate {
        interfering_c1: Estimate::from_replicates(point.amplitude, collect(|f| f.amplitude)),
        c1: Estimate::from_replicates(c1_of(&point), c1_reps),
        s2: Estimate::from_replicates(point.s2, collect(|f| f.s2)),
        ratio: Estimate::from_replicates(point.ratio, collect(|f| f.ratio)),
        m: point
            .m
            .map(|m| Estimate::from_replicates(m, reps.iter().filter_map(|f| f.m).collect())),
        efficiency_ratio: balance,
        phase_bins: point.bins,
        blocks: blocks.len(),
        flagged_blocks: blocks.iter().filter(|b| !usable(b)).count(),
        bootstrap_failures: failures,
    })
}

/// Whole-stream `g2(|k|=1) / g2(|k|=2)` without phase resolution. The normalization
/// cancels, so this works even when no fringe is visible.
pub fn ratio_estimate(counts: &BinnedCounts, options: &EstimatorOptions) -> Result<Estimate> {
    options.validate()?;
    let blocks = counts.blocks(options.block_length);
    let ratio = |blocks: &[BlockStats]| {
        let total = BlockStats::sum(blocks);
        let (k1, s1) = total.cross_peak(1);
        let (far, sf) = total.cross_peak(2);
        if far == 0 {
            return Err(Error::ZeroDenominator("far-peak coincidences"));
        }
        Ok(rate(k1, s1) / rate(far, sf))
    };
    let value = ratio(&blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let reps = (0..options.bootstrap)
        .filter_map(|_| ratio(&resample(&blocks, &mut rng)).ok())
        .collect();
    Ok(Estimate::from_replicates(value, reps))
}
