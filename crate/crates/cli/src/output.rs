//! Result files and run manifests.
//!
//! CSV output writes `<name>.csv` plus `<name>.manifest.json`; JSON output
//! writes a single `<name>.json` holding the manifest and the same rows.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use swipt_core::report::{self, ResultRow};
use swipt_core::{MSearch, PolicyComparison, SweepPoint};

use crate::settings::{Mode, Settings};
use crate::{CliError, OutputArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything needed to reproduce an output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Settings as given (config file merged with flags).
    pub settings: BTreeMap<String, String>,
    /// Fully resolved scenario or sweep.
    pub resolved: serde_json::Value,
    pub seed: u64,
    pub format: String,
    pub name: String,
    pub out_dir: String,
    pub threads: Option<usize>,
    pub z: f64,
    /// Seconds since the Unix epoch; the only field that changes between reruns.
    pub timestamp: u64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub(crate) fn new(
        mode: Mode,
        settings: &Settings,
        output: &OutputArgs,
        out_dir: &Path,
        resolved: serde_json::Value,
    ) -> Self {
        let seed = resolved
            .get("seed")
            .or_else(|| resolved.get("base").and_then(|b| b.get("seed")))
            .and_then(|s| s.as_u64())
            .unwrap_or_default();
        Self {
            tool: "swipt-sim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: mode.name().into(),
            settings: settings.as_map().clone(),
            resolved,
            seed,
            format: match output.format() {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            },
            name: output.name.clone().unwrap_or_else(|| mode.name().into()),
            out_dir: out_dir.to_string_lossy().into_owned(),
            threads: output.threads,
            z: output.z,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or_default(),
            outputs: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("manifest: {e}")))
    }

    pub(crate) fn mode(&self) -> Result<Mode, CliError> {
        match self.command.as_str() {
            "run" => Ok(Mode::Run),
            "sweep" => Ok(Mode::Sweep),
            "opt-m" => Ok(Mode::OptM),
            "compare" => Ok(Mode::Compare),
            other => Err(CliError::Usage(format!("manifest: unknown command {other:?}"))),
        }
    }
}

pub enum Table {
    Points(Vec<SweepPoint>),
    Search(MSearch),
    Comparison(PolicyComparison),
}

pub struct Written {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    manifest: &'a Manifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mrs_single_beats_srs: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mrs_best_beats_single: Option<bool>,
    rows: &'a [ResultRow],
}

fn row_line(r: &ResultRow) -> String {
    let m = r.m.map_or("-".to_string(), |m| m.to_string());
    format!(
        "{:<3} n={:<3} m={:<3} eta={:<6} rate={:<6} p_out={:.5} ± {:.5} ({}/{})",
        r.policy, r.n, m, r.eta, r.rate, r.p_out, r.ci_halfwidth, r.outages, r.messages
    )
}

impl Table {
    fn rows(&self) -> Vec<ResultRow> {
        match self {
            Table::Points(p) => report::rows(p),
            Table::Search(s) => report::rows(&s.table),
            Table::Comparison(c) => {
                c.rows.iter().flat_map(|r| [&r.srs, &r.mrs_single, &r.mrs_best]).map(ResultRow::from).collect()
            }
        }
    }

    pub fn write(self, mut manifest: Manifest, format: OutputFormat) -> Result<Written, CliError> {
        let rows = self.rows();
        if rows.is_empty() {
            return Err(CliError::Usage("nothing to write: empty result table".into()));
        }
        let dir = PathBuf::from(&manifest.out_dir);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

        let mut summary: Vec<String> = rows.iter().map(row_line).collect();
        let (m_star, single, best) = match &self {
            Table::Search(s) => {
                summary.push(format!("m_star = {}", s.m_star));
                (Some(s.m_star), None, None)
            }
            Table::Comparison(c) => {
                for r in &c.rows {
                    summary.push(format!("rate {}: m_star = {}", r.rate, r.mrs_best.config.policy.m().unwrap_or(0)));
                }
                summary.push(format!("MRS(1) <= SRS at every rate: {}", c.mrs_single_beats_srs));
                summary.push(format!("MRS(M*) <= MRS(1) at every rate: {}", c.mrs_best_beats_single));
                (None, Some(c.mrs_single_beats_srs), Some(c.mrs_best_beats_single))
            }
            Table::Points(_) => (None, None, None),
        };

        let mut files = Vec::new();
        match format {
            OutputFormat::Csv => {
                let csv_path = dir.join(format!("{}.csv", manifest.name));
                let manifest_path = dir.join(format!("{}.manifest.json", manifest.name));
                manifest.outputs = vec![csv_path.to_string_lossy().into_owned()];
                write_file(&csv_path, report::to_csv_string(&rows).as_bytes())?;
                let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
                write_file(&manifest_path, text.as_bytes())?;
                files.extend([csv_path, manifest_path]);
            }
            OutputFormat::Json => {
                let path = dir.join(format!("{}.json", manifest.name));
                manifest.outputs = vec![path.to_string_lossy().into_owned()];
                let doc = JsonDoc {
                    manifest: &manifest,
                    m_star,
                    mrs_single_beats_srs: single,
                    mrs_best_beats_single: best,
                    rows: &rows,
                };
                let text = serde_json::to_string_pretty(&doc).expect("rows serialise") + "\n";
                write_file(&path, text.as_bytes())?;
                files.push(path);
            }
        }
        summary.extend(files.iter().map(|f| format!("wrote {}", f.display())));
        Ok(Written { files, summary })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
