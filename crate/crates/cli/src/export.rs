//! Hole-list export of a finite PCW for external field solvers.
//!
//! Rows run along x and are spaced `a·tanθ_gr/2` apart in y; odd rows are
//! shifted by `a/2`. The row at `y = 0` is left out to form the guide. In a
//! compound crystal holes with `x < 0` take the first half's `(a, r)` and
//! holes with `x ≥ 0` the second half's.

use anyhow::{bail, ensure, Context, Result};
use pcw_core::heuristic::{DesignResult, LatticeSpec};
use pcw_core::robustness::CompoundDesign;
use pcw_core::units::rad_to_deg;
use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hole {
    pub x_nm: f64,
    pub y_nm: f64,
    pub r_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryExport {
    pub h_nm: f64,
    pub theta_gr: f64,
    /// `(a, r)` of the left and right halves; equal for a uniform crystal.
    pub halves: [(f64, f64); 2],
    pub rows: usize,
    pub cols: usize,
    pub holes: Vec<Hole>,
    /// `(x_min, y_min, x_max, y_max)` over hole edges.
    pub bbox: (f64, f64, f64, f64),
}

/// Geometry source: a uniform lattice or a two-half compound.
#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Uniform(LatticeSpec),
    Compound(CompoundDesign),
}

impl Layout {
    /// Accepts the JSON written by `design` or `compound`, or a bare
    /// lattice / compound object.
    pub fn from_json(value: Value) -> Result<Self> {
        if let Some(command) = value.get("command").and_then(Value::as_str) {
            let result = value
                .get("result")
                .cloned()
                .context("design file has a command but no result")?;
            return match command {
                "design" => {
                    let d: DesignResult =
                        serde_json::from_value(result).context("result is not a design result")?;
                    Ok(Self::Uniform(d.spec))
                }
                "compound" => Ok(Self::Compound(
                    serde_json::from_value(result).context("result is not a compound design")?,
                )),
                other => bail!("cannot export geometry from '{other}' output"),
            };
        }
        if let Ok(c) = serde_json::from_value::<CompoundDesign>(value.clone()) {
            return Ok(Self::Compound(c));
        }
        let spec: LatticeSpec = serde_json::from_value(value)
            .context("design file is neither a lattice nor a compound design")?;
        Ok(Self::Uniform(spec))
    }

    fn halves(&self) -> (&LatticeSpec, &LatticeSpec) {
        match self {
            Self::Uniform(s) => (s, s),
            Self::Compound(c) => (&c.half_1, &c.half_2),
        }
    }
}

pub fn build(layout: &Layout, rows: usize, cols: usize) -> Result<GeometryExport> {
    ensure!(
        rows >= 2,
        "rows must be at least 2 (one row is removed), got {rows}"
    );
    ensure!(cols >= 1, "cols must be at least 1, got {cols}");
    let (left, right) = layout.halves();
    left.validate().context("left half")?;
    right.validate().context("right half")?;
    ensure!(
        left.theta_gr == right.theta_gr && left.h_nm == right.h_nm,
        "halves must share lattice angle and membrane thickness"
    );
    let tan = left.theta_gr.tan();
    let j0 = -((rows / 2) as i64);
    let k0 = -((cols / 2) as i64);
    let mut holes = Vec::with_capacity((rows - 1) * cols);
    for j in j0..j0 + rows as i64 {
        if j == 0 {
            continue;
        }
        let odd = j.rem_euclid(2) == 1;
        for k in k0..k0 + cols as i64 {
            let half = if k < 0 { left } else { right };
            let a = half.a_nm;
            let x = if odd {
                k as f64 * a
            } else {
                (k as f64 + 0.5) * a
            };
            holes.push(Hole {
                x_nm: x,
                y_nm: j as f64 * 0.5 * a * tan,
                r_nm: half.r_nm,
            });
        }
    }
    check_overlap(&holes)?;
    let bbox = holes.iter().fold(
        (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        |b, h| {
            (
                b.0.min(h.x_nm - h.r_nm),
                b.1.min(h.y_nm - h.r_nm),
                b.2.max(h.x_nm + h.r_nm),
                b.3.max(h.y_nm + h.r_nm),
            )
        },
    );
    Ok(GeometryExport {
        h_nm: left.h_nm,
        theta_gr: left.theta_gr,
        halves: [(left.a_nm, left.r_nm), (right.a_nm, right.r_nm)],
        rows,
        cols,
        holes,
        bbox,
    })
}

fn check_overlap(holes: &[Hole]) -> Result<()> {
    let r_max = holes.iter().map(|h| h.r_nm).fold(0.0, f64::max);
    let mut order: Vec<&Hole> = holes.iter().collect();
    order.sort_by(|p, q| p.x_nm.total_cmp(&q.x_nm));
    for (i, p) in order.iter().enumerate() {
        for q in &order[i + 1..] {
            if q.x_nm - p.x_nm > 2.0 * r_max {
                break;
            }
            let d = (q.x_nm - p.x_nm).hypot(q.y_nm - p.y_nm);
            if d < p.r_nm + q.r_nm {
                bail!(
                    "holes at ({}, {}) and ({}, {}) overlap",
                    p.x_nm,
                    p.y_nm,
                    q.x_nm,
                    q.y_nm
                );
            }
        }
    }
    Ok(())
}

/// Formats like C's `%g` with six significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl GeometryExport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let [(a1, r1), (a2, r2)] = self.halves;
        let _ = writeln!(out, "# h_nm={}", fmt_g(self.h_nm));
        let _ = writeln!(
            out,
            "# lattice=triangular theta_gr_deg={}",
            fmt_g(rad_to_deg(self.theta_gr))
        );
        let _ = writeln!(
            out,
            "# rows={} cols={} removed_row=y0",
            self.rows, self.cols
        );
        let _ = writeln!(
            out,
            "# left a_nm={} r_nm={} right a_nm={} r_nm={} boundary_x_nm=0",
            fmt_g(a1),
            fmt_g(r1),
            fmt_g(a2),
            fmt_g(r2)
        );
        let (x0, y0, x1, y1) = self.bbox;
        let _ = writeln!(
            out,
            "# bbox_nm={} {} {} {}",
            fmt_g(x0),
            fmt_g(y0),
            fmt_g(x1),
            fmt_g(y1)
        );
        let _ = writeln!(out, "# x_nm y_nm r_nm");
        for h in &self.holes {
            let _ = writeln!(out, "{} {} {}", fmt_g(h.x_nm), fmt_g(h.y_nm), fmt_g(h.r_nm));
        }
        out
    }
}
