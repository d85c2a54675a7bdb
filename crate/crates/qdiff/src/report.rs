//! Result records: JSON-lines persistence and CSV export for plotting.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::QdiffError;

/// One appended result: config echo, metrics, pass/fail flags, and
/// provenance metadata. Serialized as a single JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub subcommand: String,
    pub timestamp: String,
    pub tool_version: String,
    pub generator_version: String,
    pub config: Value,
    pub metrics: Value,
    pub pass: Option<bool>,
}

pub const SCHEMA_VERSION: u32 = 1;

impl ResultRecord {
    pub fn new(subcommand: &str, config: Value, metrics: Value, pass: Option<bool>) -> Self {
        ResultRecord {
            schema_version: SCHEMA_VERSION,
            subcommand: subcommand.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            tool_version: crate::TOOL_VERSION.to_string(),
            generator_version: crate::GENERATOR_VERSION.to_string(),
            config,
            metrics,
            pass,
        }
    }

    /// Structural validation against the shipped schema
    /// (`schemas/result_record.schema.json`).
    pub fn validate(value: &Value) -> Result<(), QdiffError> {
        let obj = value
            .as_object()
            .ok_or_else(|| QdiffError::CheckFailed("record must be an object".into()))?;
        for (field, check) in [
            ("schema_version", Value::is_u64 as fn(&Value) -> bool),
            ("subcommand", Value::is_string),
            ("timestamp", Value::is_string),
            ("tool_version", Value::is_string),
            ("generator_version", Value::is_string),
            ("config", Value::is_object),
            ("metrics", Value::is_object),
        ] {
            let v = obj
                .get(field)
                .ok_or_else(|| QdiffError::CheckFailed(format!("missing field '{field}'")))?;
            if !check(v) {
                return Err(QdiffError::CheckFailed(format!("field '{field}' has wrong type")));
            }
        }
        if let Some(p) = obj.get("pass") {
            if !p.is_boolean() && !p.is_null() {
                return Err(QdiffError::CheckFailed("field 'pass' must be boolean or null".into()));
            }
        }
        Ok(())
    }
}

/// Resolves the results file path: explicit `--out` wins, then
/// `QDIFF_RESULTS_DIR`, then the current directory.
pub fn results_path(out: Option<&Path>, default_name: &str) -> PathBuf {
    if let Some(p) = out {
        return p.to_path_buf();
    }
    let dir = std::env::var_os("QDIFF_RESULTS_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(default_name)
}

/// Appends one record as a JSON line.
pub fn append_record(path: &Path, record: &ResultRecord) -> Result<(), QdiffError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record)?;
    writeln!(file, "{line}")?;
    Ok(())
}

/// Writes homogeneous records as CSV with a documented header.
///
/// Supported kinds: `scaling` (`w,var,se,replicas,seed`) and `profile`
/// (`x,p`, first coordinate only).
pub fn emit_plot_data<W: Write>(
    records: &[Value],
    kind: &str,
    out: W,
) -> Result<(), QdiffError> {
    let mut writer = csv::Writer::from_writer(out);
    match kind {
        "scaling" => {
            writer
                .write_record(["w", "var", "se", "replicas", "seed"])
                .map_err(|e| QdiffError::CheckFailed(e.to_string()))?;
            for rec in records {
                let get = |k: &str| {
                    rec.get(k)
                        .ok_or_else(|| QdiffError::CheckFailed(format!("heterogeneous records: missing '{k}'")))
                };
                let row = [
                    get("w")?.to_string(),
                    get("variance")?.to_string(),
                    get("jackknife_se")?.to_string(),
                    get("replicas")?.to_string(),
                    get("master_seed")?.to_string(),
                ];
                writer.write_record(&row).map_err(|e| QdiffError::CheckFailed(e.to_string()))?;
            }
        }
        "profile" => {
            writer
                .write_record(["x", "p"])
                .map_err(|e| QdiffError::CheckFailed(e.to_string()))?;
            for rec in records {
                let x = rec
                    .get("x")
                    .ok_or_else(|| QdiffError::CheckFailed("heterogeneous records: missing 'x'".into()))?;
                let p = rec
                    .get("p")
                    .ok_or_else(|| QdiffError::CheckFailed("heterogeneous records: missing 'p'".into()))?;
                writer
                    .write_record([x.to_string(), p.to_string()])
                    .map_err(|e| QdiffError::CheckFailed(e.to_string()))?;
            }
        }
        _ => {
            return Err(QdiffError::Config(format!("unknown plot kind '{kind}'")));
        }
    }
    writer.flush()?;
    Ok(())
}
