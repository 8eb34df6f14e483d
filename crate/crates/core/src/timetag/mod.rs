//! Synthetic time-tagged detector streams and their offline analysis.
//!
//! Records are `(detector, timestamp)` pairs with timestamps on the pulse grid. Detectors
//! are photon-number resolving: a bin with two photons on one detector yields two records
//! with the same timestamp.

mod analyze;
mod generate;

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analyze::{
    estimate_parameters, infer_phase_blocks, ratio_estimate, BinnedCounts, BlockStats, Estimate, EstimatorOptions,
    ParameterEstimate, PhaseBinRow, PhaseBlock, DEFAULT_BLOCK_LENGTH, DEFAULT_BOOTSTRAP, DEFAULT_PHASE_BINS,
    MIN_BLOCK_SINGLES,
};
pub use generate::{generate_stream, GeneratorConfig, CHUNK_PULSES};

/// Pulse period used when none is given.
pub const DEFAULT_PULSE_PERIOD_PS: u64 = 12_300;
/// Default drift period of the sinusoidal phase model, in pulses.
pub const DEFAULT_DRIFT_PERIOD: f64 = 1.0e6;

const CSV_HEADER: [&str; 2] = ["detector_id", "timestamp_ps"];
const BINARY_RECORD_BYTES: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeTagRecord {
    pub detector_id: u8,
    pub timestamp_ps: u64,
}

impl TimeTagRecord {
    pub fn new(detector_id: u8, timestamp_ps: u64) -> Result<Self> {
        if !matches!(detector_id, 1 | 2) {
            return Err(Error::Format(format!("detector id {detector_id} is not 1 or 2")));
        }
        Ok(Self {
            detector_id,
            timestamp_ps,
        })
    }
}

/// Streams are ordered by timestamp, then detector.
impl Ord for TimeTagRecord {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.timestamp_ps, self.detector_id).cmp(&(other.timestamp_ps, other.detector_id))
    }
}

impl PartialOrd for TimeTagRecord {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Slow interferometer phase drift, evaluated once per pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    /// `φ(t) = offset + amplitude · sin(2π t / period)`.
    Sinusoid { offset: f64, amplitude: f64, period: f64 },
    /// Gaussian steps of standard deviation `step` per pulse.
    RandomWalk { start: f64, step: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    #[serde(flatten)]
    pub kind: DriftKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DriftModel {
    fn default() -> Self {
        Self::sinusoid(DEFAULT_DRIFT_PERIOD)
    }
}

impl DriftModel {
    /// Sweeps `[-π/2, 3π/2]` once per period, so the folded phase covers `[0, π]` twice.
    pub fn sinusoid(period: f64) -> Self {
        Self {
            kind: DriftKind::Sinusoid {
                offset: PI / 2.0,
                amplitude: PI,
                period,
            },
            seed: 0,
        }
    }

    pub fn constant(phi: f64) -> Self {
        Self {
            kind: DriftKind::Sinusoid {
                offset: phi,
                amplitude: 0.0,
                period: 1.0,
            },
            seed: 0,
        }
    }

    pub fn random_walk(start: f64, step: f64, seed: u64) -> Self {
        Self {
            kind: DriftKind::RandomWalk { start, step },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value| Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        };
        match self.kind {
            DriftKind::Sinusoid {
                offset,
                amplitude,
                period,
            } => {
                if !offset.is_finite() {
                    return Err(bad("offset", offset));
                }
                if !amplitude.is_finite() {
                    return Err(bad("amplitude", amplitude));
                }
                if !(period > 0.0 && period.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "period",
                        value: period,
                        reason: "must be positive",
                    });
                }
            }
            DriftKind::RandomWalk { start, step } => {
                if !start.is_finite() {
                    return Err(bad("start", start));
                }
                if !(step >= 0.0 && step.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "step",
                        value: step,
                        reason: "must be non-negative",
                    });
                }
            }
        }
        Ok(())
    }

    /// Phase seen by the long-arm component of each of the first `n` pulses.
    pub fn phases(&self, n: usize) -> Vec<f64> {
        match self.kind {
            DriftKind::Sinusoid {
                offset,
                amplitude,
                period,
            } => (0..n)
                .map(|t| offset + amplitude * (2.0 * PI * t as f64 / period).sin())
                .collect(),
            DriftKind::RandomWalk { start, step } => {
                use rand::SeedableRng;
                use rand_distr::{Distribution, Normal};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
                let normal = Normal::new(0.0, step.max(f64::MIN_POSITIVE)).expect("finite step");
                let mut phi = start;
                (0..n)
                    .map(|_| {
                        let current = phi;
                        if step > 0.0 {
                            phi += normal.sample(&mut rng);
                        }
                        current
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeTagStream {
    /// Configuration that reproduces the stream bit for bit.
    pub meta: GeneratorConfig,
    pub records: Vec<TimeTagRecord>,
}

impl TimeTagStream {
    pub fn binned(&self) -> Result<BinnedCounts> {
        BinnedCounts::from_records(&self.records, self.meta.pulse_period_ps, Some(self.meta.n_pulses + 1))
    }
}

fn check_order(prev: Option<TimeTagRecord>, next: TimeTagRecord, line: usize) -> Result<()> {
    if let Some(p) = prev {
        if next.timestamp_ps < p.timestamp_ps {
            return Err(Error::Format(format!(
                "record {line}: timestamp {} precedes {}",
                next.timestamp_ps, p.timestamp_ps
            )));
        }
    }
    Ok(())
}

pub fn write_csv<W: Write>(records: &[TimeTagRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in records {
        w.serialize((r.detector_id, r.timestamp_ps)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<TimeTagRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let mut out: Vec<TimeTagRecord> = Vec::new();
    for (line, row) in r.deserialize::<(u8, u64)>().enumerate() {
        let (id, ts) = row.map_err(csv_error)?;
        let rec = TimeTagRecord::new(id, ts)?;
        check_order(out.last().copied(), rec, line + 1)?;
        out.push(rec);
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Fixed 9-byte records: detector id, then the timestamp as little-endian `u64`.
pub fn write_binary<W: Write>(records: &[TimeTagRecord], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for r in records {
        w.write_all(&[r.detector_id])?;
        w.write_all(&r.timestamp_ps.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(reader: R) -> Result<Vec<TimeTagRecord>> {
    let mut r = BufReader::new(reader);
    let mut out: Vec<TimeTagRecord> = Vec::new();
    let mut buf = [0u8; BINARY_RECORD_BYTES];
    loop {
        if r.fill_buf()?.is_empty() {
            break;
        }
        r.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("truncated binary record".into()),
            _ => Error::Io(e),
        })?;
        let ts = u64::from_le_bytes(buf[1..].try_into().expect("8 bytes"));
        let rec = TimeTagRecord::new(buf[0], ts)?;
        check_order(out.last().copied(), rec, out.len() + 1)?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagFormat {
    Csv,
    Binary,
}

impl TagFormat {
    /// `.csv` is text; anything else is read as binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => TagFormat::Csv,
            _ => TagFormat::Binary,
        }
    }
}

pub fn write_records(path: &Path, records: &[TimeTagRecord], format: TagFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    match format {
        TagFormat::Csv => write_csv(records, BufWriter::new(file)),
        TagFormat::Binary => write_binary(records, file),
    }
}

pub fn read_records(path: &Path, format: TagFormat) -> Result<Vec<TimeTagRecord>> {
    let file = std::fs::File::open(path)?;
    match format {
        TagFormat::Csv => read_csv(BufReader::new(file)),
        TagFormat::Binary => read_binary(file),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn records() -> impl Strategy<Value = Vec<TimeTagRecord>> {
        prop::collection::vec((1u8..=2, 0u64..u64::MAX / 2), 0..200).prop_map(|mut v| {
            v.sort_by_key(|&(_, t)| t);
            v.into_iter()
                .map(|(d, t)| TimeTagRecord::new(d, t).unwrap())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(recs in records()) {
            let mut buf = Vec::new();
            write_csv(&recs, &mut buf).unwrap();
            prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), recs);
        }

        #[test]
        fn binary_round_trip_is_exact(recs in records()) {
            let mut buf = Vec::new();
            write_binary(&recs, &mut buf).unwrap();
            prop_assert_eq!(buf.len(), recs.len() * BINARY_RECORD_BYTES);
            prop_assert_eq!(read_binary(buf.as_slice()).unwrap(), recs);
        }
    }

    #[test]
    fn readers_reject_malformed_input() {
        assert!(read_csv("detector_id,timestamp_ps\n3,10\n".as_bytes()).is_err());
        assert!(read_csv("detector_id,timestamp_ps\n1,10\n2,5\n".as_bytes()).is_err());
        assert!(read_csv("det,ts\n1,10\n".as_bytes()).is_err());
        assert!(read_binary([1u8, 0, 0].as_slice()).is_err());
        let mut buf = Vec::new();
        write_binary(&[TimeTagRecord::new(1, 5).unwrap()], &mut buf).unwrap();
        buf[0] = 7;
        assert!(read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_layout_is_plain() {
        let recs = [TimeTagRecord::new(2, 0).unwrap(), TimeTagRecord::new(1, 12300).unwrap()];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "detector_id,timestamp_ps\n2,0\n1,12300\n");
    }

    #[test]
    fn drift_models() {
        let s = DriftModel::sinusoid(400.0).phases(400);
        assert!((s[0] - PI / 2.0).abs() < 1e-15);
        assert!((s[100] - 1.5 * PI).abs() < 1e-12);
        assert!((s[300] + PI / 2.0).abs() < 1e-12);
        let a = DriftModel::random_walk(0.3, 0.01, 9).phases(1000);
        let b = DriftModel::random_walk(0.3, 0.01, 9).phases(1000);
        let c = DriftModel::random_walk(0.3, 0.01, 10).phases(1000);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a[0], 0.3);
        assert!(DriftModel::random_walk(0.0, -1.0, 0).validate().is_err());
        assert!(DriftModel::sinusoid(0.0).validate().is_err());
    }

    #[test]
    fn drift_serializes_with_kind_tag() {
        let json = serde_json::to_string(&DriftModel::sinusoid(5.0)).unwrap();
        assert!(json.contains("\"kind\":\"sinusoid\""), "{json}");
        let back: DriftModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, DriftModel::sinusoid(5.0));
    }
}
