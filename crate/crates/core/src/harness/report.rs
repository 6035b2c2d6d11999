use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::metrics::Summary;
use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "rpce-report";
pub const REPORT_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 10] = [
    "method",
    "M",
    "replicate",
    "err_mean",
    "err_std",
    "rel_l2",
    "N",
    "d_tilde",
    "converged",
    "seconds",
];

/// Outcome of one method on one training set.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRow {
    pub method: Method,
    pub m: usize,
    pub replicate: usize,
    pub err_mean: Option<f64>,
    pub err_std: Option<f64>,
    pub rel_l2: Option<f64>,
    pub n_basis: Option<usize>,
    pub d_tilde: Option<usize>,
    pub converged: Option<bool>,
    pub seconds: f64,
    pub mean_absolute: bool,
    /// Estimated `(mean, std)`.
    pub estimate: Option<(f64, f64)>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n_basis: Option<usize>,
    pub d_tilde: Option<usize>,
    pub theta: Option<f64>,
    pub replicates: usize,
    pub failures: usize,
    pub converged: usize,
    pub err_mean: Option<Summary>,
    pub err_std: Option<Summary>,
    pub rel_l2: Option<Summary>,
    pub estimate_mean: Option<Summary>,
    pub estimate_std: Option<Summary>,
    /// Mean errors are absolute because the reference mean is zero.
    pub mean_absolute: bool,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    pub kind: String,
    pub mean: f64,
    pub std: f64,
    pub mean_std_error: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub library_version: String,
    pub problem: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    /// `None` when the truth, and so the reference, differs per replicate.
    pub reference: Option<ReferenceStats>,
    pub cells: Vec<CellSummary>,
    pub advisories: Vec<String>,
    /// Some cell lost more replicates than the failure quota allows.
    pub partial: bool,
    pub wall_seconds: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<ReplicateRow>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, m: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.method == method && c.m == m)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.method.to_string(),
                r.m.to_string(),
                r.replicate.to_string(),
                opt(r.err_mean),
                opt(r.err_std),
                opt(r.rel_l2),
                opt(r.n_basis),
                opt(r.d_tilde),
                opt(r.converged),
                r.seconds.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Error-versus-`M` curves, one gnuplot data block per method.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut methods: Vec<Method> = Vec::new();
        for c in &self.cells {
            if !methods.contains(&c.method) {
                methods.push(c.method);
            }
        }
        let cols = |s: Option<Summary>| match s {
            Some(s) => format!("{}\t{}\t{}\t{}", s.mean, s.median, s.q25, s.q75),
            None => "NaN\tNaN\tNaN\tNaN".to_string(),
        };
        for (k, method) in methods.iter().enumerate() {
            if k > 0 {
                writeln!(out, "\n")?;
            }
            writeln!(out, "# {method}")?;
            writeln!(
                out,
                "# M\terr_mean\terr_mean_median\terr_mean_q25\terr_mean_q75\terr_std\terr_std_median\terr_std_q25\terr_std_q75\trel_l2\trel_l2_median\trel_l2_q25\trel_l2_q75"
            )?;
            for c in self.cells.iter().filter(|c| c.method == *method) {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    c.m,
                    cols(c.err_mean),
                    cols(c.err_std),
                    cols(c.rel_l2)
                )?;
            }
        }
        Ok(())
    }

    /// Writes `replicates.csv`, `summary.json` and, if asked, `curves.tsv`.
    pub fn write_all(&self, dir: &Path, tsv: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("replicates.csv"))?)?;
        std::fs::write(dir.join("summary.json"), self.summary_json()?)?;
        if tsv {
            self.write_tsv(std::io::BufWriter::new(std::fs::File::create(
                dir.join("curves.tsv"),
            )?))?;
        }
        Ok(())
    }
}
