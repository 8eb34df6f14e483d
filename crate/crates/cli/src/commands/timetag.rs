use std::path::{Path, PathBuf};

use clap::Args;
use photonic_coherence::source::SourcePulseSpec;
use photonic_coherence::timetag::{
    estimate_parameters, generate_stream, read_records, write_records, BinnedCounts, DriftModel, EstimatorOptions,
    GeneratorConfig, TagFormat, DEFAULT_BLOCK_LENGTH, DEFAULT_BOOTSTRAP, DEFAULT_PHASE_BINS, DEFAULT_PULSE_PERIOD_PS,
};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::CliError;
use crate::output::{csv_writer, sha256_hex, write_report};

/// `stream.bin` is described by `stream.bin.meta.json`.
pub fn meta_path(stream: &Path) -> PathBuf {
    let mut name = stream.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimetagGenConfig {
    /// Pulse area, units of π.
    pub theta_pi: f64,
    pub m: f64,
    pub n_pulses: usize,
    pub seed: u64,
    pub perpendicular: bool,
    pub efficiencies: (f64, f64),
    pub drift: DriftModel,
    pub pulse_period_ps: u64,
    /// `.csv` writes text records, anything else the 9-byte binary layout.
    pub out: PathBuf,
}

impl Default for TimetagGenConfig {
    fn default() -> Self {
        Self {
            theta_pi: 0.22,
            m: 1.0,
            n_pulses: 1_000_000,
            seed: 0,
            perpendicular: false,
            efficiencies: (1.0, 1.0),
            drift: DriftModel::default(),
            pulse_period_ps: DEFAULT_PULSE_PERIOD_PS,
            out: PathBuf::from("stream.bin"),
        }
    }
}

impl TimetagGenConfig {
    fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            source: SourcePulseSpec::new(self.theta_pi * std::f64::consts::PI, 0.0).with_overlap(self.m),
            n_pulses: self.n_pulses,
            pulse_period_ps: self.pulse_period_ps,
            perpendicular: self.perpendicular,
            efficiencies: self.efficiencies,
            drift: self.drift,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TimetagGenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pulse area in units of π.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    pulses: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rotate the long arm into the orthogonal polarization.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    perpendicular: Option<bool>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    /// Period of the default sinusoidal phase drift, in pulses.
    #[arg(long)]
    drift_period: Option<f64>,
    #[arg(long)]
    pulse_period_ps: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl TimetagGenArgs {
    pub fn resolve(self) -> Result<TimetagGenConfig, CliError> {
        let mut c: TimetagGenConfig = config::load(self.config.as_deref())?;
        config::set(&mut c.theta_pi, self.theta);
        config::set(&mut c.m, self.m);
        config::set(&mut c.n_pulses, self.pulses);
        config::set(&mut c.seed, self.seed);
        config::set(&mut c.perpendicular, self.perpendicular);
        config::set(&mut c.efficiencies.0, self.eta1);
        config::set(&mut c.efficiencies.1, self.eta2);
        config::set(&mut c.drift, self.drift_period.map(DriftModel::sinusoid));
        config::set(&mut c.pulse_period_ps, self.pulse_period_ps);
        config::set(&mut c.out, self.out);
        if !(0.0..=1.0).contains(&c.theta_pi) {
            return Err(CliError::Config(format!("theta: {} outside [0, 1] (units of pi)", c.theta_pi)));
        }
        c.generator().validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Serialize, Deserialize)]
struct StreamSidecar {
    generator: GeneratorConfig,
    records: usize,
    records_sha256: String,
}

pub fn run_gen(args: TimetagGenArgs) -> Result<(), CliError> {
    let c = args.resolve()?;
    let stream = generate_stream(&c.generator())?;
    let format = TagFormat::from_path(&c.out);
    write_records(&c.out, &stream.records, format)?;
    let bytes = std::fs::read(&c.out)?;
    let sidecar = StreamSidecar {
        generator: stream.meta.clone(),
        records: stream.records.len(),
        records_sha256: sha256_hex(&bytes),
    };
    write_report(&meta_path(&c.out), &c, &sidecar)?;
    println!(
        "wrote {} records to {} (sha256 {})",
        sidecar.records,
        c.out.display(),
        sidecar.records_sha256
    );
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimetagAnalyzeConfig {
    pub input: Option<PathBuf>,
    /// Stream recorded with the long arm in the orthogonal polarization.
    pub perpendicular: Option<PathBuf>,
    pub block_length: usize,
    pub phase_bins: usize,
    pub bootstrap: usize,
    pub seed: u64,
    /// Known fringe amplitude; fitted when absent.
    pub c1: Option<f64>,
    /// Falls back to the stream's sidecar, then to the default period.
    pub pulse_period_ps: Option<u64>,
    pub out: PathBuf,
    /// Phase-binned peak table.
    pub bins_csv: Option<PathBuf>,
}

impl Default for TimetagAnalyzeConfig {
    fn default() -> Self {
        Self {
            input: None,
            perpendicular: None,
            block_length: DEFAULT_BLOCK_LENGTH,
            phase_bins: DEFAULT_PHASE_BINS,
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
            c1: None,
            pulse_period_ps: None,
            out: PathBuf::from("estimate.json"),
            bins_csv: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct TimetagAnalyzeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stream file; `.csv` is read as text, anything else as binary.
    input: Option<PathBuf>,
    #[arg(long)]
    perpendicular: Option<PathBuf>,
    #[arg(long)]
    block_length: Option<usize>,
    #[arg(long)]
    phase_bins: Option<usize>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    pulse_period_ps: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    bins_csv: Option<PathBuf>,
}

impl TimetagAnalyzeArgs {
    pub fn resolve(self) -> Result<TimetagAnalyzeConfig, CliError> {
        let mut c: TimetagAnalyzeConfig = config::load(self.config.as_deref())?;
        if self.input.is_some() {
            c.input = self.input;
        }
        if self.perpendicular.is_some() {
            c.perpendicular = self.perpendicular;
        }
        config::set(&mut c.block_length, self.block_length);
        config::set(&mut c.phase_bins, self.phase_bins);
        config::set(&mut c.bootstrap, self.bootstrap);
        config::set(&mut c.seed, self.seed);
        if self.c1.is_some() {
            c.c1 = self.c1;
        }
        if self.pulse_period_ps.is_some() {
            c.pulse_period_ps = self.pulse_period_ps;
        }
        config::set(&mut c.out, self.out);
        if self.bins_csv.is_some() {
            c.bins_csv = self.bins_csv;
        }
        if c.input.is_none() {
            return Err(CliError::Config("no input stream given".into()));
        }
        Ok(c)
    }
}

/// Bins a stream file, taking the period and length from its sidecar when present.
fn load_counts(path: &Path, period_override: Option<u64>) -> Result<BinnedCounts, CliError> {
    let records = read_records(path, TagFormat::from_path(path))?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{}: no records", path.display())));
    }
    let sidecar: Option<StreamSidecar> = std::fs::read_to_string(meta_path(path))
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok());
    let period = period_override
        .or(sidecar.as_ref().map(|s| s.generator.pulse_period_ps))
        .unwrap_or(DEFAULT_PULSE_PERIOD_PS);
    let bins = sidecar.map(|s| s.generator.n_pulses + 1);
    Ok(BinnedCounts::from_records(&records, period, bins)?)
}

#[derive(Serialize)]
struct AnalysisReport {
    estimate: photonic_coherence::timetag::ParameterEstimate,
}

pub fn run_analyze(args: TimetagAnalyzeArgs) -> Result<(), CliError> {
    let c = args.resolve()?;
    let input = c.input.as_deref().expect("checked in resolve");
    let parallel = load_counts(input, c.pulse_period_ps)?;
    let perpendicular = c
        .perpendicular
        .as_deref()
        .map(|p| load_counts(p, c.pulse_period_ps))
        .transpose()?;
    let options = EstimatorOptions {
        block_length: c.block_length,
        phase_bins: c.phase_bins,
        bootstrap: c.bootstrap,
        seed: c.seed,
        c1: c.c1,
    };
    let estimate = estimate_parameters(&parallel, perpendicular.as_ref(), &options)?;
    if let Some(path) = &c.bins_csv {
        let mut w = csv_writer(path, &c, &["phi", "blocks", "g2_k0", "g2_k1", "g2_kfar"])?;
        for row in &estimate.phase_bins {
            w.serialize((row.phi_center, row.blocks, row.g2_k0, row.g2_k1, row.g2_kfar))?;
        }
        w.flush()?;
    }
    let summary = format!(
        "c1 {:.4} ± {:.4}, ratio {:.4} ± {:.4}",
        estimate.c1.value, estimate.c1.sigma, estimate.ratio.value, estimate.ratio.sigma
    );
    let hash = write_report(&c.out, &c, &AnalysisReport { estimate })?;
    println!("{summary}");
    println!("report_sha256: {hash}");
    Ok(())
}
