//! Uniformly sampled record of every closed-loop signal, with CSV I/O.
//!
//! Vector signals of dimension one are written under their bare name
//! (`x1`); wider ones get 1-based suffixes (`x1_1`, `x1_2`, …).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matnum::norm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TraceDims {
    /// Measured block `x₁`.
    pub n1: usize,
    /// Delayed block `x₂`.
    pub p: usize,
    /// Inputs.
    pub m: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x1_hat: Vec<f64>,
    pub x2_hat: Vec<f64>,
    pub x1_tilde: Vec<f64>,
    pub x2_tilde: Vec<f64>,
    pub xi_hat: Vec<f64>,
    pub d: Vec<f64>,
    pub d_hat: Vec<f64>,
    pub delta_norm: f64,
    pub y: Vec<f64>,
    pub tau: f64,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub u_d: Vec<f64>,
    pub u_nom: Vec<f64>,
    pub u_sm: Vec<f64>,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Width {
    N1,
    P,
    M,
    One,
}

/// Column groups in file order.
const GROUPS: [(&str, Width); 19] = [
    ("t", Width::One),
    ("x1", Width::N1),
    ("x2", Width::P),
    ("x1_hat", Width::N1),
    ("x2_hat", Width::P),
    ("x1_tilde", Width::N1),
    ("x2_tilde", Width::P),
    ("xi_hat", Width::N1),
    ("d", Width::M),
    ("d_hat", Width::M),
    ("delta_norm", Width::One),
    ("y", Width::P),
    ("tau", Width::One),
    ("s", Width::N1),
    ("u", Width::M),
    ("u_d", Width::M),
    ("u_nom", Width::M),
    ("u_sm", Width::M),
    ("rho", Width::One),
];

impl TraceDims {
    fn width(&self, w: Width) -> usize {
        match w {
            Width::N1 => self.n1,
            Width::P => self.p,
            Width::M => self.m,
            Width::One => 1,
        }
    }

    /// Header names in file order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (group, w) in GROUPS {
            let k = self.width(w);
            if k == 1 {
                names.push(group.to_string());
            } else {
                names.extend((1..=k).map(|i| format!("{group}_{i}")));
            }
        }
        names
    }
}

impl TraceRow {
    fn group(&self, name: &str) -> &[f64] {
        match name {
            "t" => std::slice::from_ref(&self.t),
            "x1" => &self.x1,
            "x2" => &self.x2,
            "x1_hat" => &self.x1_hat,
            "x2_hat" => &self.x2_hat,
            "x1_tilde" => &self.x1_tilde,
            "x2_tilde" => &self.x2_tilde,
            "xi_hat" => &self.xi_hat,
            "d" => &self.d,
            "d_hat" => &self.d_hat,
            "delta_norm" => std::slice::from_ref(&self.delta_norm),
            "y" => &self.y,
            "tau" => std::slice::from_ref(&self.tau),
            "s" => &self.s,
            "u" => &self.u,
            "u_d" => &self.u_d,
            "u_nom" => &self.u_nom,
            "u_sm" => &self.u_sm,
            "rho" => std::slice::from_ref(&self.rho),
            _ => unreachable!("unknown column group {name}"),
        }
    }

    fn set_group(&mut self, name: &str, values: &[f64]) {
        let scalar = || values[0];
        match name {
            "t" => self.t = scalar(),
            "x1" => self.x1 = values.to_vec(),
            "x2" => self.x2 = values.to_vec(),
            "x1_hat" => self.x1_hat = values.to_vec(),
            "x2_hat" => self.x2_hat = values.to_vec(),
            "x1_tilde" => self.x1_tilde = values.to_vec(),
            "x2_tilde" => self.x2_tilde = values.to_vec(),
            "xi_hat" => self.xi_hat = values.to_vec(),
            "d" => self.d = values.to_vec(),
            "d_hat" => self.d_hat = values.to_vec(),
            "delta_norm" => self.delta_norm = scalar(),
            "y" => self.y = values.to_vec(),
            "tau" => self.tau = scalar(),
            "s" => self.s = values.to_vec(),
            "u" => self.u = values.to_vec(),
            "u_d" => self.u_d = values.to_vec(),
            "u_nom" => self.u_nom = values.to_vec(),
            "u_sm" => self.u_sm = values.to_vec(),
            "rho" => self.rho = scalar(),
            _ => unreachable!("unknown column group {name}"),
        }
    }

    /// Full state `(x₁, x₂)`.
    pub fn state(&self) -> Vec<f64> {
        self.x1.iter().chain(&self.x2).copied().collect()
    }

    /// `x̄ = (x₁, x̂₂)`.
    pub fn x_bar(&self) -> Vec<f64> {
        self.x1.iter().chain(&self.x2_hat).copied().collect()
    }

    /// All columns flattened in file order.
    pub fn values(&self) -> Vec<f64> {
        GROUPS.iter().flat_map(|(group, _)| self.group(group).iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub step: f64,
    pub dims: TraceDims,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(step: f64, dims: TraceDims) -> Self {
        Trace {
            step,
            dims,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| r.t)
    }

    pub fn end_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    pub fn final_state(&self) -> Option<Vec<f64>> {
        self.rows.last().map(TraceRow::state)
    }

    /// Checks uniform spacing, consistent widths and the control sum.
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::Format(format!("step {} must be positive", self.step)));
        }
        for (k, row) in self.rows.iter().enumerate() {
            for (group, w) in GROUPS {
                if row.group(group).len() != self.dims.width(w) {
                    return Err(Error::Format(format!("row {k}: column group {group} has wrong width")));
                }
            }
            let expected = self.start_time() + k as f64 * self.step;
            if (row.t - expected).abs() > 1e-6 * self.step {
                return Err(Error::Format(format!(
                    "row {k}: t = {} breaks the uniform step {}",
                    row.t, self.step
                )));
            }
            for (i, &u) in row.u.iter().enumerate() {
                let sum = row.u_d[i] + row.u_nom[i] + row.u_sm[i];
                if u != sum {
                    return Err(Error::Format(format!("row {k}: u != u_d + u_nom + u_sm")));
                }
            }
        }
        Ok(())
    }

    /// State at `t` by linear interpolation; times before the first row
    /// map to the first row.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let first = &self.rows[0];
        if t <= first.t {
            return first.state();
        }
        let r = (t - first.t) / self.step;
        let k = (r.floor() as usize).min(self.rows.len() - 1);
        if k + 1 >= self.rows.len() {
            return self.rows[k].state();
        }
        let frac = r - k as f64;
        let (a, b) = (self.rows[k].state(), self.rows[k + 1].state());
        a.iter().zip(&b).map(|(x, y)| x + frac * (y - x)).collect()
    }

    /// Earliest sample time after which `‖s‖∞ ≤ band` holds to the end.
    pub fn reach_time(&self, band: f64) -> Option<f64> {
        settle_time(&self.rows, band, |r| &r.s)
    }

    /// Largest `‖s‖∞` over samples with `t ≥ after`.
    pub fn max_abs_s_after(&self, after: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.t >= after)
            .flat_map(|r| r.s.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn final_norm(&self) -> Option<f64> {
        self.final_state().map(|x| norm(&x))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.dims.column_names())?;
        let mut record: Vec<String> = Vec::new();
        for row in &self.rows {
            record.clear();
            for (group, _) in GROUPS {
                // shortest representation that round-trips exactly
                record.extend(row.group(group).iter().map(|v| format!("{v:?}")));
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Trace> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Trace::read_from(BufReader::new(file))
    }

    pub fn read_from<R: std::io::Read>(input: R) -> Result<Trace> {
        let mut reader = csv::Reader::from_reader(input);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let dims = infer_dims(&header)?;
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Format(format!("row {k} has {} fields", rec.len())));
            }
            values.clear();
            for field in rec.iter() {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("row {k}: `{field}`: {e}")))?,
                );
            }
            let mut row = TraceRow::default();
            let mut at = 0;
            for (group, w) in GROUPS {
                let width = dims.width(w);
                row.set_group(group, &values[at..at + width]);
                at += width;
            }
            rows.push(row);
        }
        let step = match (rows.first(), rows.get(1)) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 1.0,
        };
        let trace = Trace { step, dims, rows };
        trace.validate()?;
        Ok(trace)
    }
}

/// First sample time after which `‖f(row)‖∞ ≤ band` holds to the end.
pub(crate) fn settle_time(rows: &[TraceRow], band: f64, f: impl Fn(&TraceRow) -> &[f64]) -> Option<f64> {
    let mut idx = rows.len();
    for (k, row) in rows.iter().enumerate().rev() {
        if f(row).iter().all(|v| v.abs() <= band) {
            idx = k;
        } else {
            break;
        }
    }
    rows.get(idx).map(|r| r.t)
}

fn infer_dims(header: &[String]) -> Result<TraceDims> {
    let mut widths = Vec::with_capacity(GROUPS.len());
    let mut at = 0;
    for (group, _) in GROUPS {
        match header.get(at) {
            Some(name) if name == group => {
                widths.push(1);
                at += 1;
            }
            Some(name) if name == &format!("{group}_1") => {
                let mut k = 1;
                while header.get(at + k).is_some_and(|n| n == &format!("{group}_{}", k + 1)) {
                    k += 1;
                }
                widths.push(k);
                at += k;
            }
            _ => {
                return Err(Error::Format(format!("missing column `{group}` at position {at}")));
            }
        }
    }
    if at != header.len() {
        return Err(Error::Format(format!("unexpected column `{}`", header[at])));
    }
    let dims = TraceDims {
        n1: widths[1],
        p: widths[2],
        m: widths[8],
    };
    for ((group, w), &got) in GROUPS.iter().zip(&widths) {
        if dims.width(*w) != got {
            return Err(Error::Format(format!("column group `{group}` has width {got}")));
        }
    }
    Ok(dims)
}
