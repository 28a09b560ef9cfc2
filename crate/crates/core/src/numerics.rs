//! Scalar numerical kernels: adaptive quadrature, Fresnel integrals,
//! bracketing root finding and a damped fixed-point iterator.
//!
//! Everything here is pure and allocation-light; the design solver calls
//! these kernels thousands of times per Monte Carlo ensemble.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stopping criteria shared by the iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self, NumericsError> {
        let tol = Self {
            abs_tol,
            rel_tol,
            max_iter,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn with_abs(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(NumericsError::Domain(format!(
                "abs_tol must be positive, got {}",
                self.abs_tol
            )));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(NumericsError::Domain(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(NumericsError::Domain("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// One recorded step of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub iterates: Vec<TraceEntry>,
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last_residual(&self) -> Option<f64> {
        self.iterates.last().map(|e| e.residual)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate} with error {error_estimate}")]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        error_estimate: f64,
    },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("function returned non-finite value {fx} at x = {x}")]
    NotFinite { x: f64, fx: f64 },
    #[error("no convergence after {} iterations", trace.len())]
    NoConvergence { trace: ConvergenceTrace },
    #[error("iterate {value} left the admissible interval [{lo}, {hi}]")]
    Divergence {
        value: f64,
        lo: f64,
        hi: f64,
        trace: ConvergenceTrace,
    },
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        // Gauss nodes sit at the odd Kronrod indices.
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[lo, hi]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// error is below `max(abs_tol, rel_tol * |I|)`; `max_iter` bounds the
/// number of subdivisions.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: &Tolerance,
) -> Result<f64, NumericsError> {
    tol.validate()?;
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(NumericsError::Domain(format!(
            "integration limits must satisfy lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let mut panels = vec![gk15(&f, lo, hi)];
    for _ in 0..tol.max_iter {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !total.is_finite() {
            return Err(NumericsError::NotFinite {
                x: 0.5 * (lo + hi),
                fx: total,
            });
        }
        if error <= tol.abs_tol.max(tol.rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        panels.push(gk15(&f, p.lo, mid));
        panels.push(gk15(&f, mid, p.hi));
    }
    let estimate: f64 = panels.iter().map(|p| p.value).sum();
    let error_estimate: f64 = panels.iter().map(|p| p.error).sum();
    if error_estimate <= tol.abs_tol.max(tol.rel_tol * estimate.abs()) {
        return Ok(estimate);
    }
    Err(NumericsError::Quadrature {
        lo,
        hi,
        estimate,
        error_estimate,
    })
}

/// Fresnel integrals `C(u) = ∫₀ᵘ cos(πτ²/2) dτ` and `S(u) = ∫₀ᵘ sin(πτ²/2) dτ`,
/// evaluated by quadrature of their defining integrals.
pub fn fresnel_cs(u: f64) -> Result<(f64, f64), NumericsError> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(NumericsError::Domain(format!(
            "Fresnel argument must be finite and non-negative, got {u}"
        )));
    }
    // Roughly one subdivision per half oscillation plus headroom; panel
    // round-off grows with the number of oscillations.
    let tol = Tolerance {
        abs_tol: 1e-13 * (1.0 + u * u),
        rel_tol: 1e-12,
        max_iter: 200 + (u * u) as usize * 4,
    };
    let half_pi = 0.5 * std::f64::consts::PI;
    let c = integrate(|t| (half_pi * t * t).cos(), 0.0, u, &tol)?;
    let s = integrate(|t| (half_pi * t * t).sin(), 0.0, u, &tol)?;
    Ok((c, s))
}

/// Limit of the Fresnel integrals as the argument grows without bound.
pub const FRESNEL_LIMIT: (f64, f64) = (0.5, 0.5);

/// Bracketing root finder: bisection safeguarded secant steps.
///
/// Each step tries the secant point of the current bracket and falls back to
/// the midpoint whenever the secant point is outside the bracket or the
/// bracket failed to shrink by half on the previous step. The bracket
/// contract `lo <= x <= hi` is therefore always kept.
pub fn find_root<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: &Tolerance,
) -> Result<f64, NumericsError> {
    find_root_with(|x| Ok::<f64, NumericsError>(f(x)), lo, hi, tol)
}

/// Fallible variant of [`find_root`]; errors from `f` are propagated.
pub fn find_root_with<F, E>(mut f: F, lo: f64, hi: f64, tol: &Tolerance) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<NumericsError>,
{
    tol.validate()?;
    if !(lo <= hi) {
        return Err(NumericsError::Domain(format!("bracket [{lo}, {hi}] is inverted")).into());
    }
    let (mut a, mut b) = (lo, hi);
    let mut fa = checked(a, f(a)?)?;
    if fa == 0.0 {
        return Ok(a);
    }
    let mut fb = checked(b, f(b)?)?;
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoBracket {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        }
        .into());
    }
    let mut trace = ConvergenceTrace::default();
    let mut use_bisect = false;
    for iteration in 0..tol.max_iter {
        let width = b - a;
        let mid = 0.5 * (a + b);
        let secant = b - fb * (b - a) / (fb - fa);
        let x = if use_bisect || !(secant > a && secant < b) {
            mid
        } else {
            secant
        };
        let fx = checked(x, f(x)?)?;
        trace.iterates.push(TraceEntry {
            iteration,
            value: x,
            residual: fx.abs(),
        });
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        let new_width = b - a;
        if new_width <= tol.abs_tol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        // Secant steps that stall on one side get replaced by a bisection.
        use_bisect = new_width > 0.5 * width;
    }
    Err(NumericsError::NoConvergence { trace }.into())
}

fn checked(x: f64, fx: f64) -> Result<f64, NumericsError> {
    if fx.is_finite() {
        Ok(fx)
    } else {
        Err(NumericsError::NotFinite { x, fx })
    }
}

/// Damped fixed-point iteration `x ← (1-d)·x + d·g(x)`.
///
/// Stops when successive iterates differ by at most `tol.abs_tol`. Every
/// iterate must stay inside `bounds`, otherwise a divergence error carrying
/// the trace is returned.
pub fn fixed_point<G, E>(
    mut g: G,
    x0: f64,
    bounds: (f64, f64),
    tol: &Tolerance,
    damping: f64,
) -> Result<(f64, ConvergenceTrace), E>
where
    G: FnMut(f64) -> Result<f64, E>,
    E: From<NumericsError>,
{
    tol.validate()?;
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(
            NumericsError::Domain(format!("damping must be in (0, 1], got {damping}")).into(),
        );
    }
    if !x0.is_finite() {
        return Err(
            NumericsError::Domain(format!("initial value must be finite, got {x0}")).into(),
        );
    }
    let (lo, hi) = bounds;
    let mut trace = ConvergenceTrace::default();
    let mut x = x0;
    for iteration in 0..tol.max_iter {
        let gx = g(x)?;
        let next = (1.0 - damping) * x + damping * gx;
        let residual = (next - x).abs();
        trace.iterates.push(TraceEntry {
            iteration,
            value: next,
            residual,
        });
        if !next.is_finite() || next < lo || next > hi {
            return Err(NumericsError::Divergence {
                value: next,
                lo,
                hi,
                trace,
            }
            .into());
        }
        x = next;
        if residual <= tol.abs_tol {
            trace.converged = true;
            return Ok((x, trace));
        }
    }
    Err(NumericsError::NoConvergence { trace }.into())
}
