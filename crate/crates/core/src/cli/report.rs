//! Error/rate tables and the files written by runs and studies.

use std::io::Write;
use std::path::Path;

use crate::adi_solver::RunResult;
use crate::error::{Error, Result};

/// One refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub param: f64,
    pub l2_error: f64,
    pub rate: Option<f64>,
    pub max_l2_error: f64,
    pub max_rate: Option<f64>,
}

/// Errors and observed orders of a refinement study.
///
/// `param` is `1/τ` or `N`; rates use `h = 1/param`, so
/// `rate_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub param_name: String,
    pub rows: Vec<RateRow>,
}

/// `log(e_prev/e) / log(h_prev/h)` with `h = 1/param`.
pub fn observed_rate(param_prev: f64, param: f64, e_prev: f64, e: f64) -> f64 {
    (e_prev / e).ln() / (param / param_prev).ln()
}

impl RateTable {
    pub fn new(param_name: impl Into<String>) -> Self {
        Self {
            param_name: param_name.into(),
            rows: Vec::new(),
        }
    }

    pub fn from_errors(param_name: impl Into<String>, params: &[f64], errors: &[f64], max_errors: &[f64]) -> Result<Self> {
        if params.len() != errors.len() || params.len() != max_errors.len() {
            return Err(Error::invalid("levels", "parameter and error lists differ in length"));
        }
        let rows = (0..params.len())
            .map(|i| {
                let rate = |e: &[f64]| (i > 0).then(|| observed_rate(params[i - 1], params[i], e[i - 1], e[i]));
                RateRow {
                    param: params[i],
                    l2_error: errors[i],
                    rate: rate(errors),
                    max_l2_error: max_errors[i],
                    max_rate: rate(max_errors),
                }
            })
            .collect();
        Ok(Self {
            param_name: param_name.into(),
            rows,
        })
    }

    pub fn header(&self) -> [String; 5] {
        [
            self.param_name.clone(),
            "l2_error".into(),
            "rate".into(),
            "max_l2_error".into(),
            "max_rate".into(),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(fmt15).unwrap_or_default();
            w.write_record([fmt15(r.param), fmt15(r.l2_error), opt(r.rate), fmt15(r.max_l2_error), opt(r.max_rate)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let param_name = r
            .headers()?
            .get(0)
            .ok_or_else(|| Error::Config("empty table header".into()))?
            .to_string();
        let parse = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Config(format!("bad number `{s}`")))
            }
        };
        let need = |v: Option<f64>| v.ok_or_else(|| Error::Config("missing value".into()));
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| parse(rec.get(i).unwrap_or(""));
            rows.push(RateRow {
                param: need(f(0)?)?,
                l2_error: need(f(1)?)?,
                rate: f(2)?,
                max_l2_error: need(f(3)?)?,
                max_rate: f(4)?,
            });
        }
        Ok(Self { param_name, rows })
    }

    /// `param l2_error max_l2_error` lines under a `#` header.
    pub fn write_plot_data<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} l2_error max_l2_error", self.param_name)?;
        for r in &self.rows {
            writeln!(out, "{} {} {}", fmt15(r.param), fmt15(r.l2_error), fmt15(r.max_l2_error))?;
        }
        Ok(())
    }
}

/// 15 significant digits.
pub fn fmt15(v: f64) -> String {
    format!("{v:.14e}")
}

/// Uniform `count`-point grid on `[a, b]`.
pub fn uniform_grid((a, b): (f64, f64), count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Final-time solution `u = ũ + g1` as `x y u` lines on a `count × count` grid.
pub fn write_surface<W: Write>(result: &RunResult, count: usize, mut out: W) -> Result<()> {
    let xs = uniform_grid(result.basis_x.interval(), count);
    let ys = uniform_grid(result.basis_y.interval(), count);
    let values = result.sample_solution(&xs, &ys);
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            writeln!(out, "{} {} {}", fmt15(*x), fmt15(*y), fmt15(values[(i, j)]))?;
        }
    }
    Ok(())
}

/// Per-level `time,l2_norm,stability_bound,l2_error` records.
pub fn write_trajectory<W: Write>(result: &RunResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "l2_norm", "stability_bound", "l2_error"])?;
    for d in &result.diagnostics {
        w.write_record([
            fmt15(d.time),
            fmt15(d.l2_norm),
            fmt15(d.stability_bound),
            d.l2_error.map(fmt15).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `key=value` lines.
pub fn write_key_values<W: Write>(pairs: &[(String, String)], mut out: W) -> Result<()> {
    for (k, v) in pairs {
        writeln!(out, "{k}={v}")?;
    }
    Ok(())
}

pub fn create_file(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::create_dir_all(dir)?;
    Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
}
