//! Artifact writers: results CSV, summary JSON and a gnuplot script.

use std::io::Write;
use std::path::{Path, PathBuf};

use epower_lab::EPowerCurve;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const CSV_HEADER: [&str; 7] = [
    "n",
    "kind",
    "mean_log_s",
    "se",
    "regret",
    "predicted",
    "gap",
];

/// Shortest round-trip decimal, so equal runs give equal bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Human-facing value: at most 10 decimals, trailing zeros dropped.
pub fn fmt_value(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn curve_csv<W: Write>(curve: &EPowerCurve, w: W) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for p in &curve.points {
        out.write_record([
            p.n.to_string(),
            p.kind.name().to_string(),
            num(p.mean_log_s),
            num(p.se),
            num(p.regret),
            opt(p.predicted.as_ref().map(|x| x.value)),
            opt(p.gap),
        ])?;
    }
    out.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

#[derive(Serialize)]
pub struct Summary<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    /// Configuration after overrides, with derived values filled in.
    pub config: &'a RunConfig,
    pub n_grid: Vec<usize>,
    /// Built-in defaults, for provenance.
    pub defaults: RunConfig,
    pub result: T,
}

impl<'a, T: Serialize> Summary<'a, T> {
    pub fn new(experiment: &'static str, config: &'a RunConfig, result: T) -> Self {
        Self {
            tool: "evarkit",
            version: env!("CARGO_PKG_VERSION"),
            experiment,
            config,
            n_grid: config.grid(),
            defaults: RunConfig::default(),
            result,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv(path: &Path, curve: &EPowerCurve) -> Result<(), CliError> {
    let mut buf = Vec::new();
    curve_csv(curve, &mut buf)?;
    write_text(path, std::str::from_utf8(&buf).expect("csv is utf-8"))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Script plotting regret against n per kind, with the predicted regret
/// n D - prediction dashed where one exists.
pub fn gnuplot_script(curve: &EPowerCurve, csv_name: &str, png_name: &str) -> String {
    let mut kinds: Vec<&str> = Vec::new();
    for p in &curve.points {
        if !kinds.contains(&p.kind.name()) {
            kinds.push(p.kind.name());
        }
    }
    let has_pred = |k: &str| {
        curve
            .points
            .iter()
            .any(|p| p.kind.name() == k && p.predicted.is_some())
    };
    let file = quote(csv_name);
    let mut s = String::new();
    s.push_str("# regret n D - E[log S] against n\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output {}\n", quote(png_name)));
    s.push_str("set datafile separator \",\"\n");
    s.push_str("set key left top\n");
    s.push_str("set xlabel \"n\"\nset ylabel \"regret\"\nset grid\n");
    s.push_str(&format!("D = {}\n", num(curve.kl)));
    let mut plots = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        let lt = i + 1;
        let sel = format!("strcol(2) eq {}", quote(k));
        plots.push(format!("{file} skip 1 using 1:({sel} ? $5 : 1/0) with linespoints lt {lt} pt 7 ps 0.5 title {}", quote(k)));
        if has_pred(k) {
            plots.push(format!(
                "{file} skip 1 using 1:({sel} && strlen(strcol(6)) > 0 ? D*$1 - $6 : 1/0) with lines lt {lt} dt 2 title {}",
                quote(&format!("{k} predicted"))
            ));
        }
    }
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}

/// Paths of the simulate artifacts.
pub fn artifact_paths(dir: &Path, prefix: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{prefix}.csv")),
        dir.join(format!("{prefix}.json")),
        dir.join(format!("{prefix}.gp")),
    )
}
