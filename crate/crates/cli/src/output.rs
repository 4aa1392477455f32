//! Result files and the run manifest written next to them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "X,fidelity,success_probability";

/// Decimal with 12 significant digits, switching to exponent form for very
/// small or very large magnitudes.
pub fn format_sig12(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, v)
    } else {
        sci
    }
}

pub struct Row {
    pub x: f64,
    pub fidelity: f64,
    pub success_probability: f64,
}

/// CSV body with rows in ascending X.
pub fn render_csv(rows: &[Row]) -> String {
    let mut sorted: Vec<&Row> = rows.iter().collect();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{}\n",
            format_sig12(r.x),
            format_sig12(r.fidelity),
            format_sig12(r.success_probability)
        ));
    }
    out
}

/// `sha256("blob <len>\0" ++ bytes)`, hex encoded.
pub fn git_blob_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[derive(Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub version: &'static str,
    pub params: serde_json::Value,
    pub cutoffs: serde_json::Value,
    pub grids: serde_json::Value,
    pub threads: usize,
    pub wall_clock_ms: u128,
    pub outputs: Vec<OutputFile>,
}

/// Everything a command knows about its run except timing and output hashes.
pub struct RunInfo {
    pub command: &'static str,
    pub params: serde_json::Value,
    pub cutoffs: serde_json::Value,
    pub grids: serde_json::Value,
}

/// Writes `contents` to `out` and the manifest to `<out>.manifest.json`.
pub fn write_with_manifest(out: &Path, contents: &[u8], info: RunInfo, wall_clock_ms: u128) -> Result<()> {
    fs::write(out, contents).with_context(|| format!("writing {}", out.display()))?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: info.command.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        params: info.params,
        cutoffs: info.cutoffs,
        grids: info.grids,
        threads: rayon::current_num_threads(),
        wall_clock_ms,
        outputs: vec![OutputFile {
            path: out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: git_blob_sha256(contents),
        }],
    };
    let path = manifest_path(out);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig12(0.5), "0.500000000000");
        assert_eq!(format_sig12(0.0012345678901234), "0.00123456789012");
        assert_eq!(format_sig12(12.0), "12.0000000000");
        assert_eq!(format_sig12(1.5e-9), "1.50000000000e-9");
        assert_eq!(format_sig12(0.0), "0.00000000000");
    }

    #[test]
    fn empty_blob_hash() {
        // `git hash-object --object-format=sha256` of an empty file
        assert_eq!(
            git_blob_sha256(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn rows_come_out_sorted() {
        let rows = [
            Row {
                x: 0.3,
                fidelity: 0.9,
                success_probability: 0.1,
            },
            Row {
                x: 0.1,
                fidelity: 0.95,
                success_probability: 0.05,
            },
        ];
        let csv = render_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("0.100000000000,"));
        assert!(lines[2].starts_with("0.300000000000,"));
    }
}
