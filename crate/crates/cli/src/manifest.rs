//! Run manifests: everything needed to rerun a command and check that the
//! outputs come back byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use hfsl_core::convergence::{LabConfig, TaskSpec};
use hfsl_core::gan::NoiseMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FORMAT: &str = "hfsl-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    PredGan,
    Nsga3,
}

impl Algo {
    pub fn id(self) -> &'static str {
        match self {
            Algo::PredGan => "pred-gan",
            Algo::Nsga3 => "nsga3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// System bandwidth, Hz.
    BMax,
    /// Server CPU frequency budget, cycles/s.
    FeMax,
}

impl SweepParam {
    pub fn id(self) -> &'static str {
        match self {
            SweepParam::BMax => "b-max",
            SweepParam::FeMax => "fe-max",
        }
    }
}

/// Optimizer settings shared by every optimizing command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub generations: usize,
    pub pop_size: usize,
    pub gan_noise_mode: NoiseMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Optimize {
        algo: Algo,
        seeds: Vec<u64>,
        #[serde(flatten)]
        params: OptimizerParams,
        reference: [f64; 2],
        checkpoint: bool,
    },
    Compare {
        seeds: Vec<u64>,
        #[serde(flatten)]
        params: OptimizerParams,
        /// `None` rescales the reference to cover every observed front.
        reference: Option<[f64; 2]>,
    },
    Sweep {
        algo: Algo,
        parameter: SweepParam,
        values: Vec<f64>,
        seeds: Vec<u64>,
        #[serde(flatten)]
        params: OptimizerParams,
        reference: [f64; 2],
    },
    Convergence {
        seeds: Vec<u64>,
        task: TaskSpec,
        lab: LabConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    #[serde(flatten)]
    pub command: Command,
    pub scenario_path: Option<String>,
    pub scenario_sha256: Option<String>,
    pub output_dir: String,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(command: Command, scenario: Option<&ScenarioSource>, output_dir: &Path) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command,
            scenario_path: scenario.map(|s| s.path.display().to_string()),
            scenario_sha256: scenario.map(|s| s.sha256.clone()),
            output_dir: output_dir.display().to_string(),
            outputs: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a manifest: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(CliError::Usage(format!("{}: unsupported manifest {} v{}", path.display(), m.format, m.version)));
        }
        Ok(m)
    }

    /// Writes `<stem>.manifest.json` into the output directory.
    pub fn write(&self, dir: &Path, stem: &str) -> CliResult<PathBuf> {
        let path = dir.join(format!("{stem}.manifest.json"));
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Scenario file contents together with their hash.
#[derive(Clone, Debug)]
pub struct ScenarioSource {
    pub path: PathBuf,
    pub sha256: String,
    pub scenario: hfsl_core::Scenario,
}

impl ScenarioSource {
    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::Scenario(hfsl_core::Error::Io { path: path.display().to_string(), source: e }))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Scenario(hfsl_core::Error::Precondition(format!("{} is not UTF-8", path.display()))))?;
        let scenario = hfsl_core::Scenario::from_json_str(&text).map_err(CliError::Scenario)?;
        Ok(Self { path: path.to_path_buf(), sha256: sha256_hex(&bytes), scenario })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `dir/file` and returns its manifest entry.
pub fn write_output(dir: &Path, file: &str, bytes: &[u8]) -> CliResult<OutputFile> {
    let path = dir.join(file);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(OutputFile { file: file.into(), sha256: sha256_hex(bytes) })
}
