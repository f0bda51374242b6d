//! CSV emission for benchmark results.
//!
//! Every results file starts with `#`-prefixed provenance comments (tool
//! version, source revision, seed, the full configuration string and its
//! fingerprint, and — unless suppressed for byte-reproducible output — a
//! unix timestamp), followed by a fixed header row. Numbers are written
//! with `.` as the decimal separator regardless of locale, and absent
//! fields are empty cells, so files from different methods and sweeps share
//! one schema.

use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;

use crate::error::Result;

/// Column schema shared by every results file.
pub const CSV_HEADER: &str =
    "sweep_value,metric,stderr,op_count,metric_name,method,variant,d,c,k,q,p,r,a,alpha,rule,trials,seed";

/// One results row. Optional fields render as empty cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvRow {
    pub sweep_value: f64,
    pub metric: f64,
    pub stderr: Option<f64>,
    pub op_count: Option<f64>,
    /// What `metric` measures, e.g. `error_rate` or `recall_at_1`.
    pub metric_name: String,
    /// What produced it, e.g. `am`, `rs`, `hybrid`, `bound`.
    pub method: String,
    pub variant: String,
    pub d: Option<usize>,
    pub c: Option<usize>,
    pub k: Option<usize>,
    pub q: Option<usize>,
    pub p: Option<usize>,
    pub r: Option<usize>,
    /// Probed anchors for anchor methods, scaling exponent for dimension
    /// sweeps.
    pub a: Option<f64>,
    pub alpha: Option<f64>,
    pub rule: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

/// Header comments identifying a results file's origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// Tool name and version.
    pub tool: String,
    /// Source revision the binary was built from.
    pub revision: String,
    pub seed: u64,
    /// The full configuration (normally the command line) that produced the
    /// file.
    pub config: String,
    /// Unix seconds; `None` suppresses the line for byte-stable reruns.
    pub timestamp: Option<u64>,
}

/// 64-bit fingerprint of a configuration string, printed into the
/// provenance block so files from different configurations are cheap to
/// tell apart.
pub fn config_fingerprint(config: &str) -> u64 {
    let mut hasher = DefaultHasher::new();
    config.hash(&mut hasher);
    hasher.finish()
}

fn push_opt<T: std::fmt::Display>(line: &mut String, value: &Option<T>) {
    line.push(',');
    if let Some(v) = value {
        let _ = write!(line, "{v}");
    }
}

fn format_row(row: &CsvRow) -> String {
    let mut line = String::new();
    let _ = write!(line, "{},{}", row.sweep_value, row.metric);
    push_opt(&mut line, &row.stderr);
    push_opt(&mut line, &row.op_count);
    let _ = write!(
        line,
        ",{},{},{}",
        row.metric_name, row.method, row.variant
    );
    push_opt(&mut line, &row.d);
    push_opt(&mut line, &row.c);
    push_opt(&mut line, &row.k);
    push_opt(&mut line, &row.q);
    push_opt(&mut line, &row.p);
    push_opt(&mut line, &row.r);
    push_opt(&mut line, &row.a);
    push_opt(&mut line, &row.alpha);
    push_opt(&mut line, &row.rule);
    push_opt(&mut line, &row.trials);
    push_opt(&mut line, &row.seed);
    line
}

/// Writes the provenance block, the header, and all rows.
pub fn write_csv<W: Write>(out: &mut W, provenance: &Provenance, rows: &[CsvRow]) -> Result<()> {
    writeln!(out, "# tool: {}", provenance.tool)?;
    writeln!(out, "# revision: {}", provenance.revision)?;
    writeln!(out, "# seed: {}", provenance.seed)?;
    writeln!(out, "# config: {}", provenance.config)?;
    writeln!(
        out,
        "# config_hash: {:016x}",
        config_fingerprint(&provenance.config)
    )?;
    if let Some(ts) = provenance.timestamp {
        writeln!(out, "# timestamp: {ts}")?;
    }
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", format_row(row))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_provenance() -> Provenance {
        Provenance {
            tool: "amann 0.1.0".into(),
            revision: "deadbeef".into(),
            seed: 7,
            config: "bench-synthetic --variant sparse --seed 7".into(),
            timestamp: None,
        }
    }

    fn sample_row() -> CsvRow {
        CsvRow {
            sweep_value: 256.0,
            metric: 0.125,
            stderr: Some(0.003),
            op_count: None,
            metric_name: "error_rate".into(),
            method: "am".into(),
            variant: "sparse".into(),
            d: Some(128),
            c: Some(8),
            k: Some(256),
            q: Some(10),
            p: None,
            r: None,
            a: None,
            alpha: None,
            rule: Some("sum".into()),
            trials: Some(10_000),
            seed: Some(7),
        }
    }

    #[test]
    fn layout_matches_the_schema() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &sample_provenance(), &[sample_row()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# tool: "));
        assert!(lines[4].starts_with("# config_hash: "));
        assert_eq!(lines[5], CSV_HEADER);
        assert_eq!(
            lines[6],
            "256,0.125,0.003,,error_rate,am,sparse,128,8,256,10,,,,,sum,10000,7"
        );
        // One header row, no timestamp line, one data row.
        assert_eq!(lines.len(), 7);
        // Every row has exactly as many cells as the header.
        let cols = CSV_HEADER.split(',').count();
        assert_eq!(lines[6].split(',').count(), cols);
    }

    #[test]
    fn timestamp_line_appears_only_on_request() {
        let mut with = sample_provenance();
        with.timestamp = Some(1_700_000_000);
        let mut buf = Vec::new();
        write_csv(&mut buf, &with, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# timestamp: 1700000000\n"));

        let mut buf = Vec::new();
        write_csv(&mut buf, &sample_provenance(), &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains("timestamp"));
    }

    #[test]
    fn identical_inputs_produce_identical_bytes() {
        let rows = vec![sample_row(), sample_row()];
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&mut a, &sample_provenance(), &rows).unwrap();
        write_csv(&mut b, &sample_provenance(), &rows).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fingerprint_separates_configs() {
        let a = config_fingerprint("bench --seed 1");
        let b = config_fingerprint("bench --seed 2");
        assert_ne!(a, b);
        assert_eq!(a, config_fingerprint("bench --seed 1"));
    }

    #[test]
    fn decimal_separator_is_a_point() {
        let mut row = sample_row();
        row.metric = 0.5;
        row.alpha = Some(0.8);
        let line = format_row(&row);
        assert!(line.contains("0.5"));
        assert!(line.contains("0.8"));
        assert_eq!(line.matches('.').count(), 3, "0.5, 0.003 stderr, 0.8 alpha");
    }
}
