use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{ConvergenceReport, ExperimentConfig, OutputPaths, PropertyCheck, ReportRow};
use crate::classical::Estimate;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "T",
    "lambda",
    "n_max",
    "tail_mass",
    "metric",
    "k",
    "value",
    "stderr",
    "target",
    "auxiliary",
];

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

/// Long-format table: one `trace_distance` row per `(T, k)` followed by one
/// `free_energy` row per `T`. Contains no timings, so reruns are byte-identical.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        let prefix = [
            num(row.temperature),
            num(row.coupling),
            row.n_max.to_string(),
            num(row.tail_mass),
        ];
        for d in &row.distances {
            let mut rec = prefix.to_vec();
            rec.extend([
                "trace_distance".to_string(),
                d.k.to_string(),
                num(d.trace_distance),
                num(d.stderr),
                num(0.0),
                num(d.hs_distance),
            ]);
            w.write_record(&rec)?;
        }
    }
    for row in rows {
        w.write_record([
            num(row.temperature),
            num(row.coupling),
            row.n_max.to_string(),
            num(row.tail_mass),
            "free_energy".to_string(),
            String::new(),
            num(row.free_energy),
            num(row.free_energy_stderr),
            num(row.free_energy_target),
            num(row.berezin_lieb.as_ref().map_or(f64::NAN, |b| b.gap)),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleValues {
    pub eigenvalues: Vec<f64>,
    pub z_r: Estimate,
    pub minus_log_z_r: Estimate,
    pub exact_moments: bool,
    pub ensemble_ess: f64,
    pub mc_samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub config: &'a ExperimentConfig,
    pub oracle: Option<OracleValues>,
    pub rows: &'a [ReportRow],
    pub properties: Vec<PropertyCheck>,
    pub all_passed: bool,
    pub wall_seconds: f64,
}

impl<'a> Summary<'a> {
    pub fn of(report: &'a ConvergenceReport) -> Self {
        let c = &report.classical;
        let properties = report.properties();
        Summary {
            config: &report.config,
            oracle: Some(OracleValues {
                eigenvalues: c.eigenvalues.clone(),
                z_r: c.z_r,
                minus_log_z_r: c.minus_log_z_r(),
                exact_moments: c.exact,
                ensemble_ess: c.ensemble.ess,
                mc_samples: c.ensemble.len(),
            }),
            rows: &report.rows,
            all_passed: properties.iter().all(|p| p.passed),
            properties,
            wall_seconds: report.wall_seconds,
        }
    }
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes the CSV table and, when a summary is given, the JSON summary.
pub fn emit_report(rows: &[ReportRow], summary: Option<&Summary<'_>>, paths: &OutputPaths) -> Result<()> {
    write_report_csv(rows, create(&paths.csv)?)?;
    if let Some(summary) = summary {
        let mut file = create(&paths.json)?;
        serde_json::to_writer_pretty(&mut file, summary)?;
        file.write_all(b"\n").map_err(|e| Error::io(&paths.json, e))?;
    }
    Ok(())
}

/// Writes both files of a finished run.
pub fn emit_convergence(report: &ConvergenceReport, paths: &OutputPaths) -> Result<()> {
    emit_report(&report.rows, Some(&Summary::of(report)), paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::run_convergence;
    use crate::spectral::{BoundaryCondition, InteractionKernel, OneBodySpec};

    #[test]
    fn empty_rows_give_header_only() {
        let mut buf = Vec::new();
        write_report_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn row_count_and_rerun_identity() {
        let mut c = ExperimentConfig::new(
            OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 64),
            InteractionKernel::Delta { g: 1.0 },
            1,
            vec![1.0, 2.0, 3.0, 4.0],
            500,
            3,
        );
        c.bl_samples = 64;
        c.trial_samples = 16;
        let dir = tempfile::tempdir().unwrap();
        let paths = c.output.under(dir.path());
        let first = run_convergence(&c).unwrap();
        emit_convergence(&first, &paths).unwrap();
        let a = fs::read(&paths.csv).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 8 + 4);
        assert_eq!(text.lines().filter(|l| l.contains("free_energy")).count(), 4);
        let json: serde_json::Value = serde_json::from_slice(&fs::read(&paths.json).unwrap()).unwrap();
        assert_eq!(json["rows"].as_array().unwrap().len(), 4);
        assert_eq!(json["config"]["K"], 1);

        emit_convergence(&run_convergence(&c).unwrap(), &paths).unwrap();
        assert_eq!(a, fs::read(&paths.csv).unwrap());
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let paths = OutputPaths {
            csv: blocker.join("report.csv"),
            json: blocker.join("summary.json"),
        };
        let err = emit_report(&[], None, &paths).unwrap_err().to_string();
        assert!(err.contains("file"), "{err}");
    }
}
