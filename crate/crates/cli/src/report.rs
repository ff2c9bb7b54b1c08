//! Per-case rows and summary verdicts, persisted as deterministic CSV.

use std::fmt::Write as _;
use std::path::Path;

use hmlab_core::error::Result;
use hmlab_core::singularity::SingularPoint;

/// One experiment case with its provenance and measurements.
#[derive(Debug, Clone, Default)]
pub struct CaseRow {
    pub case_key: String,
    pub config_echo: String,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub delta: Option<f64>,
    pub seminorm_p: Option<f64>,
    pub singularity_count: Option<usize>,
    pub best_energy: Option<f64>,
    /// Final energies of every solver run, best first not required.
    pub run_energies: Vec<f64>,
    pub w12_distance: Option<f64>,
    pub fit_slope: Option<f64>,
    /// Diagnostic ratio, e.g. normalized energy against its trace bound.
    pub ratio: Option<f64>,
    pub detector_flags: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: String) -> Verdict {
        Verdict {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// Full record of one experiment run.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<CaseRow>,
    pub verdicts: Vec<Verdict>,
    /// Additional CSV payloads, written as <experiment>_<name>.csv.
    pub extra_csv: Vec<(String, String)>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

/// Free-form text goes into the last CSV column; commas become semicolons so
/// the rows stay machine-readable.
fn sanitize(text: &str) -> String {
    text.replace(',', ";").replace('\n', " ")
}

impl ExperimentReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn cases_csv(&self) -> String {
        let mut out = String::from(
            "case_key,config,lambda,k,delta,seminorm_p,singularity_count,best_energy,run_energies,w12_distance,fit_slope,ratio,flags,error\n",
        );
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.case_key.cmp(&b.case_key));
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.case_key,
                r.config_echo,
                fmt_opt(r.lambda),
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                fmt_opt(r.delta),
                fmt_opt(r.seminorm_p),
                r.singularity_count
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
                fmt_opt(r.best_energy),
                r.run_energies
                    .iter()
                    .map(|e| format!("{e:.17e}"))
                    .collect::<Vec<_>>()
                    .join(";"),
                fmt_opt(r.w12_distance),
                fmt_opt(r.fit_slope),
                fmt_opt(r.ratio),
                r.detector_flags.join(";"),
                sanitize(&r.error.clone().unwrap_or_default())
            );
        }
        out
    }

    pub fn verdicts_csv(&self) -> String {
        let mut out = String::from("verdict,pass,detail\n");
        for v in &self.verdicts {
            let _ = writeln!(out, "{},{},{}", v.name, v.pass, sanitize(&v.detail));
        }
        out
    }

    /// Write cases.csv, verdicts.csv, and any per-case singularity files.
    pub fn write(&self, out_dir: &Path, singularities: &[(String, Vec<SingularPoint>)]) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(
            out_dir.join(format!("{}_cases.csv", self.experiment)),
            self.cases_csv(),
        )?;
        std::fs::write(
            out_dir.join(format!("{}_verdicts.csv", self.experiment)),
            self.verdicts_csv(),
        )?;
        let mut sorted: Vec<_> = singularities.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        for (key, points) in sorted {
            std::fs::write(
                out_dir.join(format!("{}_{key}_singular.csv", self.experiment)),
                hmlab_core::singularity::singularities_csv(points),
            )?;
        }
        let mut extras: Vec<_> = self.extra_csv.iter().collect();
        extras.sort_by(|a, b| a.0.cmp(&b.0));
        for (name, content) in extras {
            std::fs::write(
                out_dir.join(format!("{}_{name}.csv", self.experiment)),
                content,
            )?;
        }
        Ok(())
    }
}
