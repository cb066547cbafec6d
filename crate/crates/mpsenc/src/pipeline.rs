//! Run configuration and the end-to-end drivers behind the CLI verbs.
//!
//! Every command is a pure function of its [`RunConfig`]; outputs are written
//! as CSV/JSON/QASM into `output_dir` with deterministic formatting.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::circuit::{Circuit, CircuitMetrics};
use crate::circuitgen::{
    build_encoding_circuit, BuildConfig, Encoding, OriginPolicy, DEFAULT_OPTIMIZER_EVALS,
};
use crate::funcspace::{discretize, sqrt_pdf_oracle, DistributionSpec, Grid, DENSE_MAX_QUBITS};
use crate::mps::{mps_from_vector, Mps};
use crate::simulate::{apply_circuit, circuit_state_dense, sample, Histogram, QuantumState};
use crate::stats::{kl_divergence, ks_test, KlResult, ValidationReport};
use crate::tci::{tci_build, TciConfig, TciMetadata};
use crate::{Error, Result, C64};

pub mod reproduce;

/// Current [`RunConfig`] schema version.
pub const CONFIG_VERSION: u32 = 1;

/// Largest register simulated as a dense statevector.
pub const DENSE_SIM_MAX_QUBITS: usize = 22;

/// KS significance level used for pass/fail.
pub const KS_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builder {
    Svd,
    Tci,
}

fn d_version() -> u32 {
    CONFIG_VERSION
}
fn d_builder() -> Builder {
    Builder::Svd
}
fn d_layers() -> usize {
    2
}
fn d_origin() -> OriginPolicy {
    OriginPolicy::Scan
}
fn d_eps() -> f64 {
    1e-3
}
fn d_chi() -> usize {
    64
}
fn d_evals() -> usize {
    DEFAULT_OPTIMIZER_EVALS
}
fn d_shots() -> u64 {
    5000
}
fn d_ks() -> usize {
    200
}
fn d_out() -> PathBuf {
    PathBuf::from("out")
}

/// Full description of one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_version")]
    pub version: u32,
    pub distribution: DistributionSpec,
    pub n_qubits: usize,
    #[serde(default = "d_builder")]
    pub builder: Builder,
    #[serde(default)]
    pub tci: TciConfig,
    #[serde(default = "d_layers")]
    pub n_layers: usize,
    #[serde(default = "d_origin")]
    pub origin: OriginPolicy,
    #[serde(default = "d_eps")]
    pub eps_trunc: f64,
    #[serde(default = "d_chi")]
    pub chi_sim: usize,
    #[serde(default = "d_evals")]
    pub optimizer_evals: usize,
    #[serde(default = "d_shots")]
    pub shots: u64,
    /// Points drawn from the shots for the KS test.
    #[serde(default = "d_ks")]
    pub ks_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_out")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(distribution: DistributionSpec, n_qubits: usize) -> Self {
        Self {
            version: CONFIG_VERSION,
            distribution,
            n_qubits,
            builder: d_builder(),
            tci: TciConfig::default(),
            n_layers: d_layers(),
            origin: d_origin(),
            eps_trunc: d_eps(),
            chi_sim: d_chi(),
            optimizer_evals: d_evals(),
            shots: d_shots(),
            ks_samples: d_ks(),
            seed: 0,
            output_dir: d_out(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.distribution.validate()?;
        if !(1..=64).contains(&self.n_qubits) {
            return Err(Error::Config(format!(
                "n_qubits must be in 1..=64, got {}",
                self.n_qubits
            )));
        }
        if self.builder == Builder::Svd && self.n_qubits > DENSE_MAX_QUBITS {
            return Err(Error::Config(format!(
                "the svd builder is limited to {DENSE_MAX_QUBITS} qubits; use tci"
            )));
        }
        if self.builder == Builder::Tci {
            self.tci.validate()?;
        }
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be at least 1".into()));
        }
        if !(self.eps_trunc >= 0.0) {
            return Err(Error::Config(format!(
                "eps_trunc must be nonnegative, got {}",
                self.eps_trunc
            )));
        }
        if self.chi_sim < 2 {
            return Err(Error::Config("chi_sim must be at least 2".into()));
        }
        if self.ks_samples == 0 || self.shots < self.ks_samples as u64 {
            return Err(Error::Config("need 0 < ks_samples <= shots".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_qubits, self.distribution.support_length)
    }

    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            n_layers: self.n_layers,
            origin: self.origin.clone(),
            eps_trunc: self.eps_trunc,
            chi_sim: self.chi_sim,
            optimizer_evals: self.optimizer_evals,
        }
    }
}

/// Target state of a run together with its provenance.
#[derive(Clone, Debug)]
pub struct Target {
    pub mps: Mps,
    /// Dense amplitudes when the register is small enough.
    pub dense: Option<Vec<C64>>,
    pub tci: Option<TciMetadata>,
}

/// Builds the target MPS with the configured builder.
pub fn build_target(cfg: &RunConfig) -> Result<Target> {
    let grid = cfg.grid()?;
    let oracle = sqrt_pdf_oracle(&cfg.distribution)?;
    match cfg.builder {
        Builder::Svd => {
            let v = discretize(&oracle, &grid)?;
            let mps = mps_from_vector(&v, usize::MAX, 0.0)?;
            Ok(Target {
                mps,
                dense: Some(v),
                tci: None,
            })
        }
        Builder::Tci => {
            let out = tci_build(&oracle, &grid, &cfg.tci)?;
            let mps = out.mps.canonicalize(cfg.n_qubits - 1)?;
            let dense = if cfg.n_qubits <= DENSE_SIM_MAX_QUBITS {
                Some(discretize(&oracle, &grid)?)
            } else {
                None
            };
            Ok(Target {
                mps,
                dense,
                tci: Some(out.meta),
            })
        }
    }
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, contents)?;
    Ok(p)
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Summary written to `encode.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeSummary {
    pub n_qubits: usize,
    pub builder: Builder,
    pub bond_dims: Vec<usize>,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub tci: Option<TciMetadata>,
}

/// Builds the MPS and writes `profile.csv`, `prediction.csv` and `encode.json`.
pub fn cmd_encode(cfg: &RunConfig) -> Result<EncodeSummary> {
    cfg.validate()?;
    let target = build_target(cfg)?;
    let profile = target.mps.entanglement_profile()?;
    let mut buf = Vec::new();
    profile.write_csv(&mut buf)?;
    write(&cfg.output_dir, "profile.csv", &buf)?;

    let oracle = sqrt_pdf_oracle(&cfg.distribution)?;
    let l = cfg.distribution.support_length;
    let g1 = analytic::g1(&oracle, l).ok();
    let g2 = analytic::g2(&oracle, l).ok();
    if let (Some(a), Some(b)) = (g1, g2) {
        let mut buf = Vec::new();
        analytic::write_prediction_csv(&mut buf, a, b, cfg.n_qubits - 1)?;
        write(&cfg.output_dir, "prediction.csv", &buf)?;
    } else {
        log::warn!("g1/g2 quadrature failed; prediction.csv not written");
    }
    let summary = EncodeSummary {
        n_qubits: cfg.n_qubits,
        builder: cfg.builder,
        bond_dims: target.mps.bond_dims(),
        g1,
        g2,
        tci: target.tci,
    };
    write(&cfg.output_dir, "encode.json", &json(&summary)?)?;
    info!("encode: bonds {:?}", summary.bond_dims);
    Ok(summary)
}

/// Summary written to `circuit_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSummary {
    pub metrics: CircuitMetrics,
    pub fidelity_trace: Vec<f64>,
    pub origins: Vec<usize>,
    pub dropped_layers: usize,
    pub discarded_weight: f64,
    pub truncation_warning: bool,
    pub real_mode: bool,
}

impl CircuitSummary {
    fn from_encoding(e: &Encoding) -> Result<Self> {
        Ok(Self {
            metrics: e.circuit.metrics()?,
            fidelity_trace: e.fidelity_trace.clone(),
            origins: e.origins.clone(),
            dropped_layers: e.dropped_layers,
            discarded_weight: e.discarded_weight,
            truncation_warning: e.truncation_warning,
            real_mode: e.real_mode,
        })
    }
}

/// Builds the encoding circuit and writes `circuit.qasm`, `circuit.json` and
/// `circuit_report.json`.
pub fn cmd_circuit(cfg: &RunConfig) -> Result<(Circuit, CircuitSummary)> {
    cfg.validate()?;
    let target = build_target(cfg)?;
    let enc = build_encoding_circuit(&target.mps, &cfg.build_config())?;
    let summary = CircuitSummary::from_encoding(&enc)?;
    write(
        &cfg.output_dir,
        "circuit.qasm",
        enc.circuit.to_qasm()?.as_bytes(),
    )?;
    write(
        &cfg.output_dir,
        "circuit.json",
        enc.circuit.to_json()?.as_bytes(),
    )?;
    write(&cfg.output_dir, "circuit_report.json", &json(&summary)?)?;
    info!(
        "circuit: {:?}, fidelity trace {:?}",
        summary.metrics, summary.fidelity_trace
    );
    Ok((enc.circuit, summary))
}

/// Final state of `circ` on `|0…0⟩`: dense for small registers, MPS otherwise.
pub fn simulate_circuit(circ: &Circuit, chi_sim: usize) -> Result<QuantumState> {
    if circ.n_qubits <= DENSE_SIM_MAX_QUBITS {
        Ok(QuantumState::Dense(circuit_state_dense(circ)?))
    } else {
        let init = QuantumState::zero(circ.n_qubits, false)?;
        Ok(apply_circuit(circ, init, chi_sim)?.state)
    }
}

/// Fidelity between a simulated state and the target.
pub fn state_fidelity(state: &QuantumState, target: &Target) -> Result<f64> {
    match (state, &target.dense) {
        (QuantumState::Dense(v), Some(t)) => Ok(dense_fidelity(v, t)),
        _ => crate::mps::fidelity(&state.to_mps()?, &target.mps),
    }
}

pub fn dense_fidelity(a: &[C64], b: &[C64]) -> f64 {
    let ov: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    ov.norm_sqr() / (na * nb)
}

/// KL divergence of the encoded probabilities against the ideal ones.
pub fn encoded_kl(state: &[C64], ideal: &[C64]) -> Result<KlResult> {
    let q: Vec<f64> = state.iter().map(|z| z.norm_sqr()).collect();
    let p: Vec<f64> = ideal.iter().map(|z| z.norm_sqr()).collect();
    kl_divergence(&q, &p)
}

/// `k` of the `shots` sampled points chosen uniformly without replacement.
pub fn subsample(points: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5a3b);
    let mut idx = rand::seq::index::sample(&mut rng, points.len(), k.min(points.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i]).collect()
}

/// Sampling, KL and KS for one circuit against its target.
pub fn validate_circuit(
    circ: &Circuit,
    target: &Target,
    dist: &DistributionSpec,
    shots: u64,
    ks_samples: usize,
    seed: u64,
    chi_sim: usize,
) -> Result<(ValidationReport, Histogram)> {
    let state = simulate_circuit(circ, chi_sim)?;
    let fidelity = state_fidelity(&state, target)?;
    let kl = match (&state, &target.dense) {
        (QuantumState::Dense(v), Some(t)) => Some(encoded_kl(v, t)?),
        _ => None,
    };
    let hist = sample(&state, shots, seed)?;
    let pts = subsample(&hist.points(dist.support_length), ks_samples, seed);
    let ks = ks_test(&pts, dist)?;
    let m = circ.metrics()?;
    Ok((
        ValidationReport::new(kl, ks, pts.len(), fidelity, m.depth, m.cnot_count),
        hist,
    ))
}

fn plot_csv(hist: &Histogram, dist: &DistributionSpec) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["x", "count", "ideal_pdf", "expected_count"])?;
    let n = hist.n_qubits;
    let step = dist.support_length / 2f64.powi(n as i32);
    let r2 = dist.truncation_mass();
    let emit = |wr: &mut csv::Writer<Vec<u8>>, i: u64, k: u64| -> Result<()> {
        let x = i as f64 * step;
        let pdf = dist.pdf(x) / r2;
        wr.write_record([
            format!("{x:.17e}"),
            k.to_string(),
            format!("{pdf:.17e}"),
            format!("{:.17e}", pdf * step * hist.shots as f64),
        ])?;
        Ok(())
    };
    if n <= 16 {
        for i in 0..1u64 << n {
            emit(&mut wr, i, hist.counts.get(&i).copied().unwrap_or(0))?;
        }
    } else {
        for (&i, &k) in &hist.counts {
            emit(&mut wr, i, k)?;
        }
    }
    wr.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Simulates the circuit in `output_dir/circuit.json` (built when absent),
/// samples it and writes `report.json`, `histogram.csv` and `plot.csv`.
pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let path = cfg.output_dir.join("circuit.json");
    let circ = if path.exists() {
        Circuit::from_json(&fs::read_to_string(&path)?)?
    } else {
        cmd_circuit(cfg)?.0
    };
    if circ.n_qubits != cfg.n_qubits {
        return Err(Error::LengthMismatch(circ.n_qubits, cfg.n_qubits));
    }
    let target = build_target(cfg)?;
    let (report, hist) = validate_circuit(
        &circ,
        &target,
        &cfg.distribution,
        cfg.shots,
        cfg.ks_samples,
        cfg.seed,
        cfg.chi_sim,
    )?;
    write(&cfg.output_dir, "report.json", &json(&report)?)?;
    let mut buf = Vec::new();
    hist.write_csv(&mut buf, cfg.distribution.support_length)?;
    write(&cfg.output_dir, "histogram.csv", &buf)?;
    write(
        &cfg.output_dir,
        "plot.csv",
        &plot_csv(&hist, &cfg.distribution)?,
    )?;
    info!("validate: {report:?}");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::DistKind;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("mpsenc-pipeline-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let mut cfg = RunConfig::new(DistributionSpec::levy(1.0, 5.0), 10);
        cfg.origin = OriginPolicy::Fixed(4);
        cfg.builder = Builder::Tci;
        let text = cfg.to_json().unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
        let bad = text.replacen("\"seed\"", "\"sede\"", 1);
        assert!(RunConfig::from_json(&bad).is_err());
        let minimal = r#"{"distribution": {"kind": "normal", "mu": 0.5, "scale": 0.1, "L": 1.0}, "n_qubits": 8}"#;
        let m = RunConfig::from_json(minimal).unwrap();
        assert_eq!(m.distribution.kind, DistKind::Normal);
        assert_eq!((m.n_layers, m.shots, m.ks_samples), (2, 5000, 200));
    }

    #[test]
    fn config_validation() {
        let base = RunConfig::new(DistributionSpec::normal(0.5, 0.1, 1.0), 8);
        let mut c = base.clone();
        c.version = 99;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.n_qubits = 30;
        assert!(c.validate().is_err());
        c.builder = Builder::Tci;
        assert!(c.validate().is_ok());
        let mut c = base.clone();
        c.n_layers = 0;
        assert!(c.validate().is_err());
        let mut c = base;
        c.ks_samples = 10_000;
        assert!(c.validate().is_err());
    }

    #[test]
    fn encode_writes_one_row_per_bond() {
        let mut cfg = RunConfig::new(DistributionSpec::normal(0.5, 0.1, 1.0), 12);
        cfg.output_dir = tmp("encode");
        let s = cmd_encode(&cfg).unwrap();
        assert_eq!(s.bond_dims.len(), 11);
        let pred = fs::read_to_string(cfg.output_dir.join("prediction.csv")).unwrap();
        assert_eq!(pred.lines().count(), 12);
        let prof = fs::read_to_string(cfg.output_dir.join("profile.csv")).unwrap();
        let bonds: std::collections::BTreeSet<&str> = prof
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert_eq!(bonds.len(), 11);
        let first = fs::read(cfg.output_dir.join("profile.csv")).unwrap();
        cmd_encode(&cfg).unwrap();
        assert_eq!(fs::read(cfg.output_dir.join("profile.csv")).unwrap(), first);
        fs::remove_dir_all(&cfg.output_dir).unwrap();
    }

    #[test]
    fn circuit_then_validate_round_trip() {
        let mut cfg = RunConfig::new(DistributionSpec::levy(1.0, 5.0), 8);
        cfg.output_dir = tmp("validate");
        cfg.shots = 2000;
        let (circ, summary) = cmd_circuit(&cfg).unwrap();
        assert_eq!(summary.fidelity_trace.len(), summary.origins.len());
        assert!(*summary.fidelity_trace.last().unwrap() > 0.99);
        let back =
            Circuit::from_json(&fs::read_to_string(cfg.output_dir.join("circuit.json")).unwrap())
                .unwrap();
        assert_eq!(back.gates.len(), circ.gates.len());
        let rep = cmd_validate(&cfg).unwrap();
        assert_eq!(rep.n_samples, 200);
        assert!(rep.kl.unwrap() < 1e-2);
        assert!((rep.fidelity - summary.fidelity_trace.last().unwrap()).abs() < 1e-9);
        let plot = fs::read_to_string(cfg.output_dir.join("plot.csv")).unwrap();
        assert_eq!(plot.lines().count(), 1 + 256);
        let again = fs::read(cfg.output_dir.join("report.json")).unwrap();
        cmd_validate(&cfg).unwrap();
        assert_eq!(fs::read(cfg.output_dir.join("report.json")).unwrap(), again);
        fs::remove_dir_all(&cfg.output_dir).unwrap();
    }

    #[test]
    fn tci_builder_matches_svd_target() {
        let mut cfg = RunConfig::new(DistributionSpec::levy(1.0, 64.0), 14);
        let svd = build_target(&cfg).unwrap();
        cfg.builder = Builder::Tci;
        let tci = build_target(&cfg).unwrap();
        assert!(crate::mps::fidelity(&svd.mps, &tci.mps).unwrap() > 1.0 - 1e-8);
        assert!(tci.tci.unwrap().converged);
    }

    #[test]
    fn subsample_is_deterministic_and_sized() {
        let pts: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        let a = subsample(&pts, 200, 3);
        assert_eq!(a.len(), 200);
        assert_eq!(a, subsample(&pts, 200, 3));
        assert_ne!(a, subsample(&pts, 200, 4));
    }
}
