//! Result persistence: per-user BER CSV, run manifest and console table.

use crate::config::FileConfig;
use crate::sim::BerReport;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One CSV row. Users are numbered from 1 in ascending-SNR order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub detector: String,
    pub user_index: usize,
    pub ber: f64,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub avg_snr_db: f64,
}

/// Rows sorted by (detector, user_index).
pub fn csv_rows(report: &BerReport) -> Vec<CsvRow> {
    let mut rows: Vec<CsvRow> = report
        .detectors
        .iter()
        .flat_map(|d| {
            let ber = d.ber();
            (0..d.bit_errors.len()).map(move |k| CsvRow {
                detector: d.label.clone(),
                user_index: k + 1,
                ber: ber[k],
                bit_errors: d.bit_errors[k],
                total_bits: d.total_bits[k],
                avg_snr_db: report.avg_snr_db[k],
            })
        })
        .collect();
    rows.sort_by(|a, b| (&a.detector, a.user_index).cmp(&(&b.detector, b.user_index)));
    rows
}

pub fn write_csv<W: Write>(report: &BerReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in csv_rows(report) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_s: f64,
    /// Fully resolved configuration, defaults included.
    pub config: FileConfig,
    /// The same configuration as a ready-to-use config file.
    pub config_toml: String,
    pub setups_completed: u64,
    pub setups_failed: u64,
    pub setups_resampled: u64,
    /// Output file holding each detector's rows.
    pub outputs: BTreeMap<String, PathBuf>,
}

impl RunManifest {
    pub fn new(
        config: &FileConfig,
        report: &BerReport,
        started_at: String,
        finished_at: String,
        results_path: &Path,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: report.config.master_seed,
            started_at,
            finished_at,
            wall_time_s: report.wall_time_s,
            config: config.clone(),
            config_toml: config.to_toml(),
            setups_completed: report.setups_completed,
            setups_failed: report.setups_failed,
            setups_resampled: report.setups_resampled,
            outputs: report
                .detectors
                .iter()
                .map(|d| (d.label.clone(), results_path.to_path_buf()))
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}

/// Console table: one row per user, one BER column per detector.
pub fn format_table(report: &BerReport) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = write!(s, "{:>4} {:>9}", "user", "SNR[dB]");
    for d in &report.detectors {
        let _ = write!(s, " {:>10}", d.label);
    }
    s.push('\n');
    for k in 0..report.avg_snr_db.len() {
        let _ = write!(s, "{:>4} {:>9.2}", k + 1, report.avg_snr_db[k]);
        for d in &report.detectors {
            let _ = write!(s, " {:>10.3e}", d.ber()[k]);
        }
        s.push('\n');
    }
    let _ = write!(s, "{:>14}", "avg");
    for d in &report.detectors {
        let _ = write!(s, " {:>10.3e}", d.average_ber());
    }
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::AdmmConfig;
    use crate::receivers::ReceiverKind;
    use crate::sim::{CampaignConfig, DetectorReport, DetectorSpec, ScenarioConfig};

    fn report() -> BerReport {
        let detectors = vec![
            DetectorSpec::linear(ReceiverKind::Mrc),
            DetectorSpec::admm(AdmmConfig::default()),
            DetectorSpec::linear(ReceiverKind::Bmmse),
        ];
        BerReport {
            config: CampaignConfig {
                antennas: 4,
                users: 2,
                setups: 1,
                uses: 10,
                detectors: detectors.clone(),
                master_seed: 0,
                workers: 1,
                scenario: ScenarioConfig::default(),
            },
            detectors: detectors
                .iter()
                .enumerate()
                .map(|(i, spec)| DetectorReport {
                    label: spec.label(),
                    spec: spec.clone(),
                    bit_errors: vec![i as u64 + 2, i as u64],
                    total_bits: vec![20, 20],
                })
                .collect(),
            avg_snr_db: vec![10.0, 20.0],
            setups_completed: 1,
            setups_failed: 0,
            setups_resampled: 0,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn csv_schema_and_order() {
        let mut buf = Vec::new();
        write_csv(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "detector,user_index,ber,bit_errors,total_bits,avg_snr_db");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("ADMM-SOFT,1,"));
        assert_eq!(lines[3], "BMMSE,1,0.2,4,20,10.0");
        assert_eq!(lines[6], "MRC,2,0.0,0,20,20.0");
    }

    #[test]
    fn table_has_a_row_per_user() {
        let t = format_table(&report());
        assert_eq!(t.lines().count(), 4);
        assert!(t.lines().next().unwrap().contains("ADMM-SOFT"));
    }
}
