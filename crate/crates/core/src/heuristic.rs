//! Heuristic link between photonic-crystal-waveguide geometry and the
//! wavelength of peak Purcell enhancement.
//!
//! The design equation is `a = c₁ + c₂·r`:
//!
//! * `c₂ = a/r` follows from the waveguide acceptance angle `θ_wg`, which in
//!   turn balances the light kept inside the membrane (vertical Fabry-Perot
//!   leakage `F_FP`) against the light coupled into the guided mode
//!   (`F_PCW`, from a diffraction estimate of the unit-cell mode volume);
//! * `c₁` is a weighted mix of the Bragg periods of the sloped and parallel
//!   hole rows.
//!
//! Because `F_PCW` depends on `r`, the radius is found by a damped
//! fixed-point iteration (see [`Designer::design_radius`]).

use crate::numerics::{
    find_root_with, fixed_point, fresnel_cs, ConvergenceTrace, NumericsError, Tolerance,
    FRESNEL_LIMIT,
};
use crate::radiometry::{
    bragg_family_fractions, symmetric_band_fraction, RadiometryError, AVERAGE_EMISSION_ANGLE,
    MEAN_EMISSION_PROJECTION,
};
use crate::slab_optics::{vertical_cavity, MaterialModel, OpticsError};
use crate::units::SPEED_OF_LIGHT;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Radiometry(#[from] RadiometryError),
    #[error(transparent)]
    Numerics(NumericsError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("infeasible: {quantity} = {value} ({detail})")]
    Infeasible {
        quantity: String,
        value: f64,
        detail: String,
    },
    #[error("pole in a/r: tan(theta_gr)/2 = tan(theta_wg)/2 at theta_wg = {theta_wg}")]
    Pole { theta_wg: f64 },
    #[error("Purcell factor singular: {0}")]
    Singular(String),
    #[error("design iteration did not converge after {} iterations", trace.len())]
    NoConvergence { trace: ConvergenceTrace },
    #[error(
        "no sign change of r(lambda) - r on [{lo_nm}, {hi_nm}] nm; try a wider wavelength scan"
    )]
    NoBracket { lo_nm: f64, hi_nm: f64 },
    #[error("all {points} points of the design curve failed; first failure: {first}")]
    CurveFailed {
        points: usize,
        first: Box<DesignError>,
    },
}

impl From<NumericsError> for DesignError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::NoConvergence { trace } => DesignError::NoConvergence { trace },
            NumericsError::Divergence { value, lo, hi, .. } => DesignError::Infeasible {
                quantity: "r".into(),
                value,
                detail: format!("iterate left ({lo}, {hi})"),
            },
            NumericsError::NoBracket { lo, hi, .. } => DesignError::NoBracket {
                lo_nm: lo,
                hi_nm: hi,
            },
            other => DesignError::Numerics(other),
        }
    }
}

impl DesignError {
    /// True for errors that mean the model has no solution for these inputs,
    /// as opposed to bad input or a solver failure.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            DesignError::Infeasible { .. }
                | DesignError::Geometry(_)
                | DesignError::Pole { .. }
                | DesignError::NoBracket { .. }
                | DesignError::CurveFailed { .. }
        )
    }
}

/// Geometry of a triangular-lattice PCW (or one half of a compound one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Lattice angle, rad.
    pub theta_gr: f64,
    pub a_nm: f64,
    pub r_nm: f64,
    pub h_nm: f64,
    pub material: MaterialModel,
}

impl LatticeSpec {
    pub fn new(
        theta_gr: f64,
        a_nm: f64,
        r_nm: f64,
        h_nm: f64,
        material: MaterialModel,
    ) -> Result<Self, DesignError> {
        let spec = Self {
            theta_gr,
            a_nm,
            r_nm,
            h_nm,
            material,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The reference GaAs waveguide: 60°, a = 238 nm, r = 80 nm, h = 160 nm.
    pub fn reference() -> Self {
        Self {
            theta_gr: PI / 3.0,
            a_nm: 238.0,
            r_nm: 80.0,
            h_nm: 160.0,
            material: MaterialModel::gaas(),
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.theta_gr > 0.0 && self.theta_gr < FRAC_PI_2) {
            return Err(DesignError::Invalid(format!(
                "lattice angle {} rad outside (0, pi/2)",
                self.theta_gr
            )));
        }
        if !(self.a_nm > 0.0) || !self.a_nm.is_finite() {
            return Err(DesignError::Invalid(format!(
                "a must be positive, got {}",
                self.a_nm
            )));
        }
        if !(self.h_nm > 0.0) || !self.h_nm.is_finite() {
            return Err(DesignError::Invalid(format!(
                "h must be positive, got {}",
                self.h_nm
            )));
        }
        if !(self.r_nm > 0.0 && self.r_nm < 0.5 * self.a_nm) {
            return Err(DesignError::Geometry(format!(
                "r = {} nm must lie in (0, a/2) = (0, {})",
                self.r_nm,
                0.5 * self.a_nm
            )));
        }
        if self.slit_width() <= 0.0 {
            return Err(DesignError::Geometry(format!(
                "entrance slit a*tan(theta_gr) - 2r = {} nm is not positive",
                self.slit_width()
            )));
        }
        Ok(())
    }

    /// Width of the unit-cell entrance across the missing row, `a·tanθ_gr − 2r`.
    pub fn slit_width(&self) -> f64 {
        self.a_nm * self.theta_gr.tan() - 2.0 * self.r_nm
    }

    /// Rectangle `a × a·tanθ_gr` minus four quarter holes, times `h`.
    pub fn cell_volume(&self) -> f64 {
        (self.a_nm * self.a_nm * self.theta_gr.tan() - PI * self.r_nm * self.r_nm) * self.h_nm
    }

    pub fn with_radius(&self, r_nm: f64) -> Self {
        Self {
            r_nm,
            ..self.clone()
        }
    }
}

/// Unit in which the axial coordinate of the intensity decay `1/(x+1)²` is
/// measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxialUnit {
    /// `x` counted in lattice periods, so the cell spans `x ∈ [0, 1]`.
    #[default]
    Period,
    /// `x` counted in micrometres.
    Micrometre,
}

/// Wavelength entering the Fresnel-zone count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneWavelength {
    #[default]
    Vacuum,
    /// `λ/n` inside the membrane.
    Medium,
}

/// Incidence angle used in the two Bragg conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionAngleConvention {
    /// `α = (2/π)·∫ sin³θ cosθ dθ = 1/(2π)` used directly as an angle.
    Literal,
    /// The same number read as a cosine: `α = arccos(1/(2π))`.
    ProjectionAsCosine,
    /// `α = arccos⟨cosθ⟩` with the power-weighted mean projection
    /// `⟨cosθ⟩ = ∫sin³θ cosθ / ∫sin³θ = 3/8` over a quarter sphere.
    #[default]
    MeanProjection,
}

impl EmissionAngleConvention {
    pub fn angle(self) -> f64 {
        match self {
            Self::Literal => AVERAGE_EMISSION_ANGLE,
            Self::ProjectionAsCosine => AVERAGE_EMISSION_ANGLE.acos(),
            Self::MeanProjection => MEAN_EMISSION_PROJECTION.acos(),
        }
    }
}

/// Group velocity entering the waveguide Purcell factor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GroupVelocity {
    /// `v_g = c/n(λ)`.
    #[default]
    FreeSpace,
    Fixed {
        m_per_s: f64,
    },
}

/// Modelling conventions for the quantities the heuristic leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConventions {
    pub axial_unit: AxialUnit,
    pub zone_wavelength: ZoneWavelength,
    pub emission_angle: EmissionAngleConvention,
    pub group_velocity: GroupVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVolumeEstimate {
    /// `⟨x⟩` in the configured axial unit.
    pub mean_x: f64,
    pub mean_x_nm: f64,
    pub fresnel_zones_m: f64,
    pub cornu_u: f64,
    /// `⟨I⟩/I₀` before clamping; exceeds 1 near the spiral overshoot.
    pub raw_intensity_ratio: f64,
    pub intensity_ratio: f64,
    pub cell_volume_nm3: f64,
    pub v_eff_nm3: f64,
}

/// Diffraction estimate of the guided-mode volume of one unit cell.
pub fn mode_volume(
    spec: &LatticeSpec,
    lambda_nm: f64,
    conventions: &ModelConventions,
) -> Result<ModeVolumeEstimate, DesignError> {
    let slit = spec.slit_width();
    if !(slit > 0.0) {
        return Err(DesignError::Geometry(format!(
            "entrance slit a*tan(theta_gr) - 2r = {slit} nm is not positive"
        )));
    }
    if !(lambda_nm > 0.0) {
        return Err(DesignError::Invalid(format!(
            "lambda must be positive, got {lambda_nm}"
        )));
    }
    // Averaging I(x) = I₀/(x+1)² over [0, a'] gives ⟨x⟩ = √(a'+1) − 1.
    let (a_prime, unit_nm) = match conventions.axial_unit {
        AxialUnit::Period => (1.0, spec.a_nm),
        AxialUnit::Micrometre => (spec.a_nm / 1000.0, 1000.0),
    };
    let mean_x = (a_prime + 1.0f64).sqrt() - 1.0;
    let mean_x_nm = mean_x * unit_nm;
    let zone_lambda = match conventions.zone_wavelength {
        ZoneWavelength::Vacuum => lambda_nm,
        ZoneWavelength::Medium => lambda_nm / spec.material.refractive_index(lambda_nm)?,
    };
    let m = slit * slit / (4.0 * zone_lambda * mean_x_nm);
    let u = (2.0 * m).sqrt();
    let (c, s) = fresnel_cs(u)?;
    let (c_inf, s_inf) = FRESNEL_LIMIT;
    let raw = (c * c + s * s) / (c_inf * c_inf + s_inf * s_inf);
    let intensity_ratio = raw.min(1.0);
    let cell_volume_nm3 = spec.cell_volume();
    Ok(ModeVolumeEstimate {
        mean_x,
        mean_x_nm,
        fresnel_zones_m: m,
        cornu_u: u,
        raw_intensity_ratio: raw,
        intensity_ratio,
        cell_volume_nm3,
        v_eff_nm3: intensity_ratio * cell_volume_nm3,
    })
}

/// Waveguide Purcell factor `3πc³a / (V_eff ω_d² ε^{3/2} v_g)`.
///
/// `v_eff_nm3` in nm³, `v_g` in m/s.
pub fn pcw_purcell(
    spec: &LatticeSpec,
    lambda_nm: f64,
    v_eff_nm3: f64,
    v_g: f64,
) -> Result<f64, DesignError> {
    if v_g == 0.0 {
        return Err(DesignError::Singular("group velocity is zero".into()));
    }
    if !(v_g > 0.0) || !(v_eff_nm3 > 0.0) || !(lambda_nm > 0.0) || !(spec.a_nm > 0.0) {
        return Err(DesignError::Invalid(format!(
            "Purcell inputs must be positive: a = {}, lambda = {lambda_nm}, V_eff = {v_eff_nm3}, v_g = {v_g}",
            spec.a_nm
        )));
    }
    let n = spec.material.refractive_index(lambda_nm)?;
    let c = SPEED_OF_LIGHT;
    let a_m = spec.a_nm * 1e-9;
    let v_m3 = v_eff_nm3 * 1e-27;
    let omega = 2.0 * PI * c / (lambda_nm * 1e-9);
    Ok(3.0 * PI * c * c * c * a_m / (v_m3 * omega * omega * n * n * n * v_g))
}

/// Probability `F/(1+F)` of emission into the target mode.
pub fn beta_factor(f: f64) -> Result<f64, DesignError> {
    if !(f >= 0.0) {
        return Err(DesignError::Invalid(format!(
            "Purcell factor must be non-negative, got {f}"
        )));
    }
    if f.is_infinite() {
        return Ok(1.0);
    }
    Ok(f / (1.0 + f))
}

/// Acceptance angle `θ_wg` balancing the in-membrane fraction of the
/// emission against the waveguide coupling probability.
pub fn solve_theta_wg(f_fp: f64, f_pcw: f64) -> Result<f64, DesignError> {
    if !(f_fp >= 0.0) || !(f_pcw >= 0.0) {
        return Err(DesignError::Invalid(format!(
            "Purcell factors must be non-negative, got F_FP = {f_fp}, F_PCW = {f_pcw}"
        )));
    }
    let stay_inside = 1.0 - beta_factor(f_fp)?;
    let target = beta_factor(f_pcw)? / stay_inside;
    if target == 0.0 {
        return Ok(0.0);
    }
    if target > 1.0 {
        return Err(DesignError::Infeasible {
            quantity: "waveguide band fraction".into(),
            value: target,
            detail: format!(
                "beta(F_PCW) = {:.6} exceeds the in-membrane probability {:.6}, so no theta_wg <= pi/2 balances it",
                beta_factor(f_pcw)?,
                stay_inside
            ),
        });
    }
    if target == 1.0 {
        return Ok(FRAC_PI_2);
    }
    let tol = Tolerance {
        abs_tol: 1e-14,
        rel_tol: 1e-14,
        max_iter: 200,
    };
    find_root_with(
        |theta| Ok::<_, DesignError>(symmetric_band_fraction(theta) - target),
        0.0,
        FRAC_PI_2,
        &tol,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRatio {
    pub c2: f64,
    /// Set when `c₂ ≤ 2`, i.e. read literally as `a/r` it would put `r ≥ a/2`.
    pub warning: Option<String>,
}

fn check_angles(theta_wg: f64, theta_gr: f64) -> Result<(), DesignError> {
    if !(theta_wg > 0.0 && theta_wg < FRAC_PI_2) {
        return Err(DesignError::Invalid(format!(
            "theta_wg = {theta_wg} rad outside (0, pi/2)"
        )));
    }
    if !(theta_gr > 0.0 && theta_gr < FRAC_PI_2) {
        return Err(DesignError::Invalid(format!(
            "theta_gr = {theta_gr} rad outside (0, pi/2)"
        )));
    }
    let den = 0.5 * theta_gr.tan() - 0.5 * theta_wg.tan();
    if den.abs() <= 1e-12 * theta_gr.tan().abs().max(1.0) {
        return Err(DesignError::Pole { theta_wg });
    }
    Ok(())
}

/// Slope coefficient `c₂ = a/r` from the acceptance angle.
pub fn theta_wg_to_ratio(theta_wg: f64, theta_gr: f64) -> Result<SlopeRatio, DesignError> {
    check_angles(theta_wg, theta_gr)?;
    let alpha = FRAC_PI_4 - 0.5 * theta_wg;
    let num = alpha.cos() - theta_wg.tan() * alpha.sin();
    let den = 0.5 * theta_gr.tan() - 0.5 * theta_wg.tan();
    let c2 = num / den;
    let warning =
        (c2 <= 2.0).then(|| format!("c2 = {c2:.6} <= 2: read as a/r this would put r >= a/2"));
    Ok(SlopeRatio { c2, warning })
}

/// The same ratio written with numerator and denominator both negated, as
/// it falls out of the geometric construction.
pub fn theta_wg_to_ratio_geometric(theta_wg: f64, theta_gr: f64) -> Result<f64, DesignError> {
    check_angles(theta_wg, theta_gr)?;
    let alpha = FRAC_PI_4 - 0.5 * theta_wg;
    let num = theta_wg.tan() * alpha.sin() - alpha.cos();
    let den = 0.5 * theta_wg.tan() - 0.5 * theta_gr.tan();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BraggIntercept {
    pub c1: f64,
    pub a_slp: f64,
    pub a_par: f64,
    pub eta_slp: f64,
    pub eta_par: f64,
    /// Incidence angle used in both Bragg conditions, rad.
    pub emission_angle: f64,
}

/// Constant coefficient `c₁ = η_par·a_par + η_slp·a_slp`.
pub fn bragg_intercept(
    lambda_nm: f64,
    n: f64,
    theta_gr: f64,
    convention: EmissionAngleConvention,
) -> Result<BraggIntercept, DesignError> {
    if !(lambda_nm > 0.0) || !(n > 0.0) {
        return Err(DesignError::Invalid(format!(
            "lambda and n must be positive, got {lambda_nm}, {n}"
        )));
    }
    let (eta_slp, eta_par) = bragg_family_fractions(theta_gr)?;
    let alpha = convention.angle();
    let cos_slp = (theta_gr - alpha).cos();
    let cos_par = alpha.cos();
    if cos_slp <= 0.0 || cos_par <= 0.0 {
        return Err(DesignError::Geometry(format!(
            "Bragg incidence cosine not positive (sloped {cos_slp}, parallel {cos_par})"
        )));
    }
    // 2·d·n·cosα = λ with d = a·sinθgr (sloped rows) and d = a·tanθgr/2 (parallel rows).
    let a_slp = lambda_nm / (2.0 * n * theta_gr.sin() * cos_slp);
    let a_par = lambda_nm / (n * theta_gr.tan() * cos_par);
    Ok(BraggIntercept {
        c1: eta_par * a_par + eta_slp * a_slp,
        a_slp,
        a_par,
        eta_slp,
        eta_par,
        emission_angle: alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    /// Geometry with the solved radius.
    pub spec: LatticeSpec,
    pub lambda_nm: f64,
    pub n: f64,
    pub theta_wg: f64,
    pub c1: f64,
    pub c2: f64,
    pub f_pcw: f64,
    pub f_fp: f64,
    pub beta: f64,
    pub a_slp: f64,
    pub a_par: f64,
    pub eta_slp: f64,
    pub eta_par: f64,
    pub emission_angle: f64,
    pub mode_volume: ModeVolumeEstimate,
    pub conventions: ModelConventions,
    pub trace: ConvergenceTrace,
    pub warnings: Vec<String>,
}

impl DesignResult {
    /// `a − (c₁ + c₂·r)` at the returned radius.
    pub fn design_residual(&self) -> f64 {
        self.spec.a_nm - (self.c1 + self.c2 * self.spec.r_nm)
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// One pass of the design map at a trial radius.
#[derive(Debug, Clone)]
struct Pass {
    mode_volume: ModeVolumeEstimate,
    f_pcw: f64,
    theta_wg: f64,
    slope: SlopeRatio,
    r_next: f64,
}

/// Fixed inputs of a design run: membrane, material, lattice angle and
/// modelling conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Designer {
    pub h_nm: f64,
    pub material: MaterialModel,
    pub theta_gr: f64,
    pub conventions: ModelConventions,
    pub damping: f64,
}

pub const DEFAULT_DAMPING: f64 = 0.5;

impl Designer {
    pub fn new(h_nm: f64, material: MaterialModel, theta_gr: f64) -> Result<Self, DesignError> {
        let designer = Self {
            h_nm,
            material,
            theta_gr,
            conventions: ModelConventions::default(),
            damping: DEFAULT_DAMPING,
        };
        designer.validate()?;
        Ok(designer)
    }

    /// GaAs membrane of the reference design, 60° lattice.
    pub fn reference() -> Self {
        Self {
            h_nm: 160.0,
            material: MaterialModel::gaas(),
            theta_gr: PI / 3.0,
            conventions: ModelConventions::default(),
            damping: DEFAULT_DAMPING,
        }
    }

    pub fn for_spec(spec: &LatticeSpec) -> Self {
        Self {
            h_nm: spec.h_nm,
            material: spec.material.clone(),
            theta_gr: spec.theta_gr,
            conventions: ModelConventions::default(),
            damping: DEFAULT_DAMPING,
        }
    }

    pub fn with_conventions(mut self, conventions: ModelConventions) -> Self {
        self.conventions = conventions;
        self
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.h_nm > 0.0) || !self.h_nm.is_finite() {
            return Err(DesignError::Invalid(format!(
                "h must be positive, got {}",
                self.h_nm
            )));
        }
        if !(self.theta_gr > 0.0 && self.theta_gr < FRAC_PI_2) {
            return Err(DesignError::Invalid(format!(
                "lattice angle {} rad outside (0, pi/2)",
                self.theta_gr
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(DesignError::Invalid(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        if let GroupVelocity::Fixed { m_per_s } = self.conventions.group_velocity {
            if !(m_per_s > 0.0) {
                return Err(DesignError::Singular(format!(
                    "fixed group velocity must be positive, got {m_per_s}"
                )));
            }
        }
        Ok(())
    }

    fn spec(&self, a_nm: f64, r_nm: f64) -> LatticeSpec {
        LatticeSpec {
            theta_gr: self.theta_gr,
            a_nm,
            r_nm,
            h_nm: self.h_nm,
            material: self.material.clone(),
        }
    }

    fn group_velocity(&self, n: f64) -> f64 {
        match self.conventions.group_velocity {
            GroupVelocity::FreeSpace => SPEED_OF_LIGHT / n,
            GroupVelocity::Fixed { m_per_s } => m_per_s,
        }
    }

    fn pass(
        &self,
        spec: &LatticeSpec,
        lambda_nm: f64,
        n: f64,
        f_fp: f64,
        c1: f64,
    ) -> Result<Pass, DesignError> {
        spec.validate()?;
        let mv = mode_volume(spec, lambda_nm, &self.conventions)?;
        let f_pcw = pcw_purcell(spec, lambda_nm, mv.v_eff_nm3, self.group_velocity(n))?;
        let theta_wg = solve_theta_wg(f_fp, f_pcw)?;
        if theta_wg <= 0.0 {
            return Err(DesignError::Infeasible {
                quantity: "theta_wg".into(),
                value: theta_wg,
                detail: "zero waveguide coupling leaves a/r undefined".into(),
            });
        }
        if theta_wg >= self.theta_gr {
            return Err(DesignError::Infeasible {
                quantity: "theta_wg".into(),
                value: theta_wg,
                detail: format!(
                    "acceptance angle reaches the lattice angle {} rad; a/r has a pole there",
                    self.theta_gr
                ),
            });
        }
        let slope = theta_wg_to_ratio(theta_wg, self.theta_gr)?;
        if !(slope.c2 > 0.0) {
            return Err(DesignError::Infeasible {
                quantity: "c2".into(),
                value: slope.c2,
                detail: "slope coefficient not positive".into(),
            });
        }
        let r_next = (spec.a_nm - c1) / slope.c2;
        if !(r_next > 0.0 && r_next < 0.5 * spec.a_nm) {
            return Err(DesignError::Infeasible {
                quantity: "r_new".into(),
                value: r_next,
                detail: format!(
                    "(a - c1)/c2 with a = {}, c1 = {c1:.4}, c2 = {:.6} must lie in (0, a/2)",
                    spec.a_nm, slope.c2
                ),
            });
        }
        Ok(Pass {
            mode_volume: mv,
            f_pcw,
            theta_wg,
            slope,
            r_next,
        })
    }

    /// Solve `r` for period `a` so that the Purcell peak sits at `lambda_nm`.
    ///
    /// Iterates `r ← (a − c₁)/c₂(r)` with damping from `r0` (default `a/3`)
    /// until successive radii differ by at most `tol.abs_tol` nm.
    pub fn design_radius(
        &self,
        a_nm: f64,
        lambda_nm: f64,
        r0: Option<f64>,
        tol: &Tolerance,
    ) -> Result<DesignResult, DesignError> {
        self.validate()?;
        if !(a_nm > 0.0) || !a_nm.is_finite() {
            return Err(DesignError::Invalid(format!(
                "a must be positive, got {a_nm}"
            )));
        }
        if !(lambda_nm > 0.0) || !lambda_nm.is_finite() {
            return Err(DesignError::Invalid(format!(
                "lambda must be positive, got {lambda_nm}"
            )));
        }
        let r0 = r0.unwrap_or(a_nm / 3.0);
        if !(r0 > 0.0 && r0 < 0.5 * a_nm) {
            return Err(DesignError::Invalid(format!(
                "initial radius {r0} nm outside (0, a/2)"
            )));
        }
        let n = self.material.refractive_index(lambda_nm)?;
        let f_fp = vertical_cavity(self.h_nm, n, lambda_nm)?.f_fp;
        let bragg = bragg_intercept(lambda_nm, n, self.theta_gr, self.conventions.emission_angle)?;
        let (r, trace) = fixed_point(
            |r| {
                self.pass(&self.spec(a_nm, r), lambda_nm, n, f_fp, bragg.c1)
                    .map(|p| p.r_next)
            },
            r0,
            (0.0, 0.5 * a_nm),
            tol,
            self.damping,
        )?;
        let spec = self.spec(a_nm, r);
        let fin = self.pass(&spec, lambda_nm, n, f_fp, bragg.c1)?;
        let mut warnings = Vec::new();
        if let Some(w) = fin.slope.warning.clone() {
            warnings.push(w);
        }
        if fin.mode_volume.raw_intensity_ratio > 1.0 {
            warnings.push(format!(
                "Cornu intensity ratio {:.6} clamped to 1",
                fin.mode_volume.raw_intensity_ratio
            ));
        }
        Ok(DesignResult {
            spec,
            lambda_nm,
            n,
            theta_wg: fin.theta_wg,
            c1: bragg.c1,
            c2: fin.slope.c2,
            f_pcw: fin.f_pcw,
            f_fp,
            beta: beta_factor(fin.f_pcw)?,
            a_slp: bragg.a_slp,
            a_par: bragg.a_par,
            eta_slp: bragg.eta_slp,
            eta_par: bragg.eta_par,
            emission_angle: bragg.emission_angle,
            mode_volume: fin.mode_volume,
            conventions: self.conventions,
            trace,
            warnings,
        })
    }

    /// Design radii along a sorted grid of periods, warm-starting each point
    /// from the previous feasible solution.
    pub fn design_curve(
        &self,
        lambda_nm: f64,
        a_grid: &[f64],
        tol: &Tolerance,
    ) -> Result<Vec<CurvePoint>, DesignError> {
        if a_grid.is_empty() {
            return Err(DesignError::Invalid("period grid is empty".into()));
        }
        if a_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DesignError::Invalid(
                "period grid must be strictly increasing".into(),
            ));
        }
        let mut points = Vec::with_capacity(a_grid.len());
        let mut warm: Option<f64> = None;
        for &a in a_grid {
            let r0 = warm.filter(|&r| r < 0.5 * a);
            let result = self.design_radius(a, lambda_nm, r0, tol);
            if let Ok(d) = &result {
                warm = Some(d.spec.r_nm);
            }
            points.push(CurvePoint { a_nm: a, result });
        }
        if points.iter().all(|p| p.result.is_err()) {
            let count = points.len();
            let first = points
                .into_iter()
                .find_map(|p| p.result.err())
                .expect("all points failed");
            return Err(DesignError::CurveFailed {
                points: count,
                first: Box::new(first),
            });
        }
        Ok(points)
    }

    /// Wavelength whose design radius at period `a_nm` equals `r_nm`.
    pub fn peak_wavelength(
        &self,
        a_nm: f64,
        r_nm: f64,
        bracket_nm: (f64, f64),
        tol: &Tolerance,
    ) -> Result<f64, DesignError> {
        let (lo, hi) = bracket_nm;
        if !(lo > 0.0 && lo < hi) {
            return Err(DesignError::Invalid(format!(
                "wavelength bracket [{lo}, {hi}] must be positive and increasing"
            )));
        }
        find_root_with(|lambda| self.map_residual(a_nm, lambda, r_nm), lo, hi, tol)
    }

    /// `g(r) − r` for one undamped pass of the design map at `lambda_nm`.
    ///
    /// Zero exactly where `r` is the design radius for `lambda_nm`, and it
    /// has the sign of `design_radius(a, λ).r − r` while the fixed point is
    /// attracting, so peak searches can root-find on it without running the
    /// full iteration at every wavelength.
    pub fn map_residual(&self, a_nm: f64, lambda_nm: f64, r_nm: f64) -> Result<f64, DesignError> {
        if !(lambda_nm > 0.0) || !lambda_nm.is_finite() {
            return Err(DesignError::Invalid(format!(
                "lambda must be positive, got {lambda_nm}"
            )));
        }
        let n = self.material.refractive_index(lambda_nm)?;
        let f_fp = vertical_cavity(self.h_nm, n, lambda_nm)?.f_fp;
        let bragg = bragg_intercept(lambda_nm, n, self.theta_gr, self.conventions.emission_angle)?;
        let pass = self.pass(&self.spec(a_nm, r_nm), lambda_nm, n, f_fp, bragg.c1)?;
        Ok(pass.r_next - r_nm)
    }
}

impl Designer {
    /// Wavelength whose design radius at `a_nm` equals `r_nm`, searched
    /// outward from `guess_nm` in `step_nm` increments until the residual
    /// changes sign (at most `max_steps` steps).
    pub fn peak_near(
        &self,
        a_nm: f64,
        r_nm: f64,
        guess_nm: f64,
        step_nm: f64,
        max_steps: usize,
        tol: &Tolerance,
    ) -> Result<f64, DesignError> {
        if !(step_nm > 0.0) {
            return Err(DesignError::Invalid(format!(
                "scan step must be positive, got {step_nm}"
            )));
        }
        let residual = |lambda: f64| self.map_residual(a_nm, lambda, r_nm);
        let g0 = residual(guess_nm)?;
        if g0 == 0.0 {
            return Ok(guess_nm);
        }
        // The design radius falls with wavelength.
        let dir = if g0 > 0.0 { 1.0 } else { -1.0 };
        let mut prev = guess_nm;
        for k in 1..=max_steps {
            let next = guess_nm + dir * step_nm * k as f64;
            if residual(next)?.signum() != g0.signum() {
                let (lo, hi) = if dir > 0.0 {
                    (prev, next)
                } else {
                    (next, prev)
                };
                return find_root_with(residual, lo, hi, tol);
            }
            prev = next;
        }
        Err(DesignError::NoBracket {
            lo_nm: guess_nm.min(prev),
            hi_nm: guess_nm.max(prev),
        })
    }
}

/// Result of one grid point of [`Designer::design_curve`].
#[derive(Debug)]
pub struct CurvePoint {
    pub a_nm: f64,
    pub result: Result<DesignResult, DesignError>,
}

/// [`Designer::design_radius`] with default conventions.
pub fn design_radius(
    a_nm: f64,
    lambda_nm: f64,
    h_nm: f64,
    material: &MaterialModel,
    theta_gr: f64,
    r0: Option<f64>,
    tol: &Tolerance,
) -> Result<DesignResult, DesignError> {
    Designer::new(h_nm, material.clone(), theta_gr)?.design_radius(a_nm, lambda_nm, r0, tol)
}

/// [`Designer::peak_wavelength`] for an existing geometry.
pub fn peak_wavelength(
    spec: &LatticeSpec,
    bracket_nm: (f64, f64),
    tol: &Tolerance,
) -> Result<f64, DesignError> {
    Designer::for_spec(spec).peak_wavelength(spec.a_nm, spec.r_nm, bracket_nm, tol)
}
