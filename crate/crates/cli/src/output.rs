use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::sweep::{ResultTable, RowStatus};

pub const CSV_HEADER: &str = "theta_deg,re_oracle,im_oracle,re_est,im_est,re_err,im_err,p_pass,n_pass,re_sd,im_sd,flags";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV text; floats use the shortest round-trip representation.
pub fn render_csv(table: &ResultTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        let errs = row.errors();
        let fields = [
            opt(row.theta_deg),
            opt(row.oracle.map(|w| w.re)),
            opt(row.oracle.map(|w| w.im)),
            opt(row.estimate.map(|w| w.re)),
            opt(row.estimate.map(|w| w.im)),
            opt(errs.map(|e| e.0)),
            opt(errs.map(|e| e.1)),
            opt(row.p_pass),
            opt(row.n_pass),
            opt(row.sd.map(|s| s.0)),
            opt(row.sd.map(|s| s.1)),
            row.flags(),
        ];
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

#[derive(Serialize)]
struct Sidecar<'a> {
    toolkit: &'static str,
    version: &'static str,
    seed: u64,
    rows: usize,
    flagged: usize,
    config: &'a RunConfig,
}

pub fn render_sidecar(table: &ResultTable, cfg: &RunConfig) -> String {
    let sidecar = Sidecar {
        toolkit: "seqweak",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        rows: table.rows.len(),
        flagged: table.rows.iter().filter(|r| r.status != RowStatus::Ok).count(),
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    text
}

/// `out.csv` pairs with `out.json`; any other name gets `.json` appended.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    if csv.extension().is_some_and(|e| e == "csv") {
        csv.with_extension("json")
    } else {
        let mut name = csv.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }
}

/// Writes the CSV and its JSON provenance sidecar; returns both paths.
pub fn write_output(table: &ResultTable, cfg: &RunConfig, path: &Path) -> io::Result<(PathBuf, PathBuf)> {
    if table.rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "result table is empty"));
    }
    let json = sidecar_path(path);
    std::fs::write(path, render_csv(table))?;
    std::fs::write(&json, render_sidecar(table, cfg))?;
    Ok((path.to_path_buf(), json))
}
