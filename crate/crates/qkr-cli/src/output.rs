//! Result-file writers.  All numeric cells use Rust's shortest
//! round-trippable float formatting, so identical runs produce
//! byte-identical files and every value can be re-read exactly.

use crate::pipeline::RunOutput;
use anyhow::Context;
use qkr::lattice::ResonanceMarker;
use qkr::rotor::RotorSpec;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// Hex SHA-256 of the resolved config's canonical JSON form.
pub fn config_hash(config: &impl serde::Serialize) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn populations_csv(out: &RunOutput, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_sha256={hash}");
    let _ = writeln!(s, "# seed={}", out.seed);
    let n_cols = out.result.p_of_j_after_kick[0].len();
    let header: Vec<String> = (0..n_cols).map(|j| format!("J{j}")).collect();
    let _ = writeln!(s, "kick,{}", header.join(","));
    for (n, row) in out.result.p_of_j_after_kick.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
        let _ = writeln!(s, "{n},{}", cells.join(","));
    }
    s
}

pub fn energy_csv(out: &RunOutput, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_sha256={hash}");
    let _ = writeln!(s, "# seed={}", out.seed);
    let _ = writeln!(s, "kick,e_hcb,e_invcm");
    for (n, (eh, ei)) in out.energy_hcb.iter().zip(&out.energy_invcm).enumerate() {
        let _ = writeln!(s, "{n},{eh},{ei}");
    }
    s
}

pub fn result_json(out: &RunOutput, hash: &str) -> anyhow::Result<String> {
    let value = serde_json::json!({
        "config_sha256": hash,
        "seed": out.seed,
        "metadata": out.result.metadata,
        "p_of_j_after_kick": out.result.p_of_j_after_kick,
        "per_train": out.result.per_train,
        "energy_hcb": out.energy_hcb,
        "energy_invcm": out.energy_invcm,
        "fits": out.fits,
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

pub fn fit_json(out: &RunOutput, hash: &str) -> anyhow::Result<String> {
    let value = serde_json::json!({
        "config_sha256": hash,
        "seed": out.seed,
        "fits": out.fits,
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

pub fn trains_json(out: &RunOutput, spec: &RotorSpec, hash: &str) -> anyhow::Result<String> {
    let trains: Vec<serde_json::Value> = out
        .result
        .metadata
        .train_set
        .trains
        .iter()
        .map(|t| t.to_json(spec))
        .collect();
    let value = serde_json::json!({
        "config_sha256": hash,
        "seed": out.seed,
        "design": out.result.metadata.train_set.design,
        "trains": trains,
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

/// Write the full set of result files for one run into `dir`.
pub fn write_run(
    dir: &Path,
    out: &RunOutput,
    spec: &RotorSpec,
    hash: &str,
    formats: &[String],
) -> anyhow::Result<()> {
    let csv = formats.iter().any(|f| f == "csv");
    let json = formats.iter().any(|f| f == "json");
    if csv {
        write_file(&dir.join("populations.csv"), &populations_csv(out, hash))?;
        write_file(&dir.join("energy.csv"), &energy_csv(out, hash))?;
    }
    if json {
        write_file(&dir.join("result.json"), &result_json(out, hash)?)?;
        write_file(&dir.join("fit.json"), &fit_json(out, hash)?)?;
        write_file(&dir.join("trains.json"), &trains_json(out, spec, hash)?)?;
    }
    Ok(())
}

pub fn resonance_map_csv(markers: &[ResonanceMarker], revival_time_ps: f64) -> String {
    let mut s = String::from("J,m,T_over_Trev,T_ps\n");
    for mk in markers {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            mk.j,
            mk.order_m,
            mk.t_over_trev,
            mk.t_over_trev * revival_time_ps
        );
    }
    s
}

pub fn intervals_csv(intervals: &[(f64, f64)], revival_time_ps: f64) -> String {
    let mut s = String::from("label,t_lo_over_trev,t_hi_over_trev,t_lo_ps,t_hi_ps\n");
    for (i, (lo, hi)) in intervals.iter().enumerate() {
        let _ = writeln!(
            s,
            "interval-{},{lo},{hi},{},{}",
            i + 1,
            lo * revival_time_ps,
            hi * revival_time_ps
        );
    }
    s
}

pub fn write_text(path: &Path, contents: &str) -> anyhow::Result<()> {
    write_file(path, contents)
}
