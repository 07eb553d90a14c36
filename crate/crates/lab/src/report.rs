//! Experiment reports and their CSV / SVG artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::{LabError, Result};

/// One `(epsilon, k)` measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub epsilon: f64,
    pub k: usize,
    pub lambda: f64,
    pub lambda_ref: f64,
    /// `|lambda - lambda_ref|`.
    pub eig_error: f64,
    /// Sup-norm eigenfunction error after alignment, `NaN` when not measured.
    pub sup_error: f64,
    /// Largest principal angle of the cluster of `k` against the reference.
    pub angle: f64,
    /// Containment class tag, empty when not classified.
    pub verdict: String,
    pub hausdorff: f64,
    pub payne: Option<bool>,
    pub domains: Option<usize>,
    pub c_hat: f64,
    pub failed: bool,
}

impl Record {
    pub fn new(epsilon: f64, k: usize) -> Self {
        Record {
            epsilon,
            k,
            lambda: f64::NAN,
            lambda_ref: f64::NAN,
            eig_error: f64::NAN,
            sup_error: f64::NAN,
            angle: f64::NAN,
            verdict: String::new(),
            hausdorff: f64::NAN,
            payne: None,
            domains: None,
            c_hat: f64::NAN,
            failed: false,
        }
    }

    pub fn failed(epsilon: f64, k: usize) -> Self {
        Record {
            failed: true,
            ..Record::new(epsilon, k)
        }
    }
}

/// A fitted or derived scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub name: String,
    pub value: f64,
    /// Fit residual, `NaN` when not a fit.
    pub residual: f64,
    pub note: String,
}

impl Constant {
    pub fn new(name: &str, value: f64) -> Self {
        Constant {
            name: name.into(),
            value,
            residual: f64::NAN,
            note: String::new(),
        }
    }

    pub fn with_residual(mut self, r: f64) -> Self {
        self.residual = r;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub records: Vec<Record>,
    pub constants: Vec<Constant>,
    /// Named SVG figures (nodal-set overlays).
    pub figures: Vec<(String, String)>,
    /// Non-fatal problems: failed solves, non-monotone verdicts.
    pub flags: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str) -> Self {
        ExperimentReport {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Sorts records by decreasing `epsilon`, then `k`.
    pub fn sort(&mut self) {
        self.records
            .sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon).then(a.k.cmp(&b.k)));
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    /// Distinct `epsilon` values, decreasing.
    pub fn epsilons(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.records.iter().map(|r| r.epsilon).collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e.dedup();
        e
    }

    /// Records of one `k`, in decreasing `epsilon`.
    pub fn series(&self, k: usize) -> Vec<&Record> {
        let mut s: Vec<&Record> = self.records.iter().filter(|r| r.k == k).collect();
        s.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        s
    }

    pub fn records_csv(&self) -> String {
        let mut s = String::from(
            "epsilon,k,lambda,lambda_ref,eig_error,sup_error,angle,verdict,hausdorff,payne,domains,c_hat,failed\n",
        );
        for r in &self.records {
            let payne = r.payne.map(|p| p.to_string()).unwrap_or_default();
            let domains = r.domains.map(|d| d.to_string()).unwrap_or_default();
            writeln!(
                s,
                "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{},{},{:.17e},{}",
                r.epsilon,
                r.k,
                r.lambda,
                r.lambda_ref,
                r.eig_error,
                r.sup_error,
                r.angle,
                r.verdict,
                r.hausdorff,
                payne,
                domains,
                r.c_hat,
                r.failed
            )
            .unwrap();
        }
        s
    }

    pub fn constants_csv(&self) -> String {
        let mut s = String::from("name,value,residual,note\n");
        for c in &self.constants {
            writeln!(s, "{},{:.17e},{:.17e},{}", c.name, c.value, c.residual, c.note.replace(',', ";")).unwrap();
        }
        s
    }

    /// Log-log plot of `eig_error` against `epsilon`, one polyline per `k`.
    pub fn error_plot_svg(&self) -> String {
        let pts: Vec<(usize, f64, f64)> = self
            .records
            .iter()
            .filter(|r| r.epsilon > 0.0 && r.eig_error > 0.0 && r.eig_error.is_finite())
            .map(|r| (r.k, r.epsilon.log10(), r.eig_error.log10()))
            .collect();
        let (w, h, pad) = (480.0, 360.0, 40.0);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
             <text x=\"{pad}\" y=\"20\" font-size=\"12\">log10 |lambda_k(eps) - lambda_k| vs log10 eps</text>\n"
        );
        if !pts.is_empty() {
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for &(_, x, y) in &pts {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
            let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
            let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
            let mut ks: Vec<usize> = pts.iter().map(|p| p.0).collect();
            ks.sort_unstable();
            ks.dedup();
            let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
            for (i, k) in ks.iter().enumerate() {
                let mut line: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 == *k).map(|p| (p.1, p.2)).collect();
                line.sort_by(|a, b| a.0.total_cmp(&b.0));
                let path: Vec<String> = line.iter().map(|(x, y)| format!("{:.3},{:.3}", sx(*x), sy(*y))).collect();
                writeln!(
                    s,
                    "<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"><title>k = {k}</title></polyline>",
                    colors[i % colors.len()],
                    path.join(" ")
                )
                .unwrap();
            }
            writeln!(
                s,
                "<text x=\"{pad}\" y=\"{}\" font-size=\"10\">eps in [1e{x0:.2}, 1e{x1:.2}], error in [1e{y0:.2}, 1e{y1:.2}]</text>",
                h - 10.0
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

fn write(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

/// Writes `<name>_records.csv`, `<name>_constants.csv`, `<name>_errors.svg` and one SVG per
/// figure into `dir`, creating it if needed. Returns the written paths.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
    let n = &report.name;
    let mut out = vec![
        write(&dir.join(format!("{n}_records.csv")), &report.records_csv())?,
        write(&dir.join(format!("{n}_constants.csv")), &report.constants_csv())?,
        write(&dir.join(format!("{n}_errors.svg")), &report.error_plot_svg())?,
    ];
    for (name, svg) in &report.figures {
        out.push(write(&dir.join(format!("{n}_{name}.svg")), svg)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_header_only() {
        let r = ExperimentReport::new("empty");
        assert_eq!(r.records_csv().lines().count(), 1);
        assert_eq!(r.constants_csv().lines().count(), 1);
    }

    #[test]
    fn record_line_has_all_columns() {
        let mut r = ExperimentReport::new("x");
        let mut rec = Record::new(0.1, 2);
        rec.payne = Some(true);
        rec.domains = Some(2);
        r.records.push(rec);
        let csv = r.records_csv();
        let header = csv.lines().next().unwrap().split(',').count();
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), header);
    }
}
