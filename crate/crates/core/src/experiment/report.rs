use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{gain, MetricId};

/// Printed precision of metric cells; gains are checked against these rounded values.
pub const CELL_DECIMALS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    /// Display-scaled mean per metric.
    pub values: Vec<f64>,
    /// Gain (%) over the baseline row per metric; `None` on the baseline row
    /// itself, NaN where the baseline cell is zero.
    pub gains: Option<Vec<f64>>,
}

/// A metrics table: one row per selection strategy, optional gain columns,
/// optional trailing gain row comparing two rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub title: String,
    pub metrics: Vec<MetricId>,
    pub rows: Vec<ReportRow>,
    pub baseline_row: usize,
    /// `(label, new row, base row, gains)`, printed as the last line.
    pub gain_row: Option<(String, usize, usize, Vec<f64>)>,
}

fn rounded(x: f64) -> f64 {
    let s = 10f64.powi(CELL_DECIMALS as i32);
    (x * s).round() / s
}

impl TableReport {
    /// Build from raw (unscaled) means; fills gain columns against `baseline_row`.
    pub fn new(
        title: impl Into<String>,
        metrics: &[MetricId],
        rows: Vec<(String, Vec<f64>)>,
        baseline_row: usize,
        with_gain_columns: bool,
    ) -> Result<Self> {
        let mut out = TableReport {
            title: title.into(),
            metrics: metrics.to_vec(),
            rows: rows
                .into_iter()
                .map(|(label, raw)| ReportRow {
                    label,
                    values: raw.iter().zip(metrics).map(|(v, m)| rounded(v * m.display_scale())).collect(),
                    gains: None,
                })
                .collect(),
            baseline_row,
            gain_row: None,
        };
        if baseline_row >= out.rows.len() {
            return Err(Error::Validation("baseline row out of range".into()));
        }
        if with_gain_columns {
            let base = out.rows[baseline_row].values.clone();
            for (i, row) in out.rows.iter_mut().enumerate() {
                if i != baseline_row {
                    row.gains = Some(gains_of(&row.values, &base)?);
                }
            }
        }
        Ok(out)
    }

    pub fn with_gain_row(mut self, label: impl Into<String>, new_row: usize, base_row: usize) -> Result<Self> {
        let g = gains_of(&self.rows[new_row].values, &self.rows[base_row].values)?;
        self.gain_row = Some((label.into(), new_row, base_row, g));
        Ok(self)
    }

    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Every gain equals the gain formula on this report's own cells.
    pub fn self_check(&self) -> Result<()> {
        let base = &self.rows[self.baseline_row].values;
        let check = |got: &[f64], new: &[f64], base: &[f64], what: &str| -> Result<()> {
            let want = gains_of(new, base)?;
            for ((g, w), m) in got.iter().zip(&want).zip(&self.metrics) {
                let same = (g.is_nan() && w.is_nan()) || (g - w).abs() <= 1e-9 * w.abs().max(1.0);
                if !same {
                    return Err(Error::Numerical(format!("{what}: gain for {m} is {g}, cells give {w}")));
                }
            }
            Ok(())
        };
        for r in &self.rows {
            if let Some(g) = &r.gains {
                check(g, &r.values, base, &r.label)?;
            }
        }
        if let Some((label, n, b, g)) = &self.gain_row {
            check(g, &self.rows[*n].values, &self.rows[*b].values, label)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row");
        for m in &self.metrics {
            write!(s, ",{m}").unwrap();
        }
        let has_gains = self.rows.iter().any(|r| r.gains.is_some());
        if has_gains {
            for m in &self.metrics {
                write!(s, ",gain_{m}").unwrap();
            }
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.label);
            for v in &r.values {
                write!(s, ",{v:.prec$}", prec = CELL_DECIMALS).unwrap();
            }
            if has_gains {
                for i in 0..self.metrics.len() {
                    match &r.gains {
                        Some(g) => write!(s, ",{}", fmt_gain(g[i], 2)).unwrap(),
                        None => s.push(','),
                    }
                }
            }
            s.push('\n');
        }
        if let Some((label, _, _, g)) = &self.gain_row {
            s.push_str(label);
            for v in g {
                write!(s, ",{}", fmt_gain(*v, 2)).unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let label_w = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain(self.gain_row.iter().map(|g| g.0.len()))
            .max()
            .unwrap_or(3)
            .max(3);
        let mut s = format!("{}\n{:<label_w$}", self.title, "");
        for m in &self.metrics {
            write!(s, " {:>9}", m.name()).unwrap();
        }
        let has_gains = self.rows.iter().any(|r| r.gains.is_some());
        if has_gains {
            for m in &self.metrics {
                write!(s, " {:>11}", format!("gain_{}", m.name())).unwrap();
            }
        }
        s.push('\n');
        for r in &self.rows {
            write!(s, "{:<label_w$}", r.label).unwrap();
            for v in &r.values {
                write!(s, " {v:>9.2}").unwrap();
            }
            if let Some(g) = &r.gains {
                for v in g {
                    write!(s, " {:>11}", format!("{}%", fmt_gain(*v, 2))).unwrap();
                }
            }
            s.push('\n');
        }
        if let Some((label, _, _, g)) = &self.gain_row {
            write!(s, "{label:<label_w$}").unwrap();
            for v in g {
                write!(s, " {:>9}", format!("{}%", fmt_gain(*v, 1))).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

fn fmt_gain(g: f64, prec: usize) -> String {
    if g.is_nan() {
        "n/a".to_string()
    } else {
        format!("{g:.prec$}")
    }
}

fn gains_of(new: &[f64], base: &[f64]) -> Result<Vec<f64>> {
    new.iter()
        .zip(base)
        .map(|(&n, &b)| if b > 0.0 { gain(n, b) } else { Ok(f64::NAN) })
        .collect()
}
