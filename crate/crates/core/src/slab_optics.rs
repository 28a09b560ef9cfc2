//! Membrane material dispersion and the vertical Fabry-Perot resonator
//! formed between the top and bottom membrane surfaces.

use crate::numerics::{integrate, NumericsError, Tolerance};
use crate::units::SPEED_OF_LIGHT;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("wavelength {lambda_nm} nm outside the {material} table range [{lo_nm}, {hi_nm}] nm")]
    Extrapolation {
        material: String,
        lambda_nm: f64,
        lo_nm: f64,
        hi_nm: f64,
    },
    #[error("invalid material table: {0}")]
    InvalidTable(String),
    #[error("{0}")]
    Domain(String),
    #[error("reading material file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// What to do when a wavelength falls outside the tabulated range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfRange {
    Error,
    Fallback,
}

/// Refractive index versus wavelength, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub name: String,
    index_samples: Vec<(f64, f64)>,
    pub fallback_n: f64,
    pub out_of_range: OutOfRange,
}

impl MaterialModel {
    pub fn new(
        name: impl Into<String>,
        index_samples: Vec<(f64, f64)>,
        fallback_n: f64,
    ) -> Result<Self, OpticsError> {
        if !(fallback_n > 1.0) {
            return Err(OpticsError::InvalidTable(format!(
                "fallback index must exceed 1, got {fallback_n}"
            )));
        }
        for (i, &(lambda, n)) in index_samples.iter().enumerate() {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(OpticsError::InvalidTable(format!(
                    "row {}: wavelength must be positive, got {lambda}",
                    i + 1
                )));
            }
            if !(n > 1.0) || !n.is_finite() {
                return Err(OpticsError::InvalidTable(format!(
                    "row {}: index must exceed 1, got {n}",
                    i + 1
                )));
            }
        }
        if index_samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(OpticsError::InvalidTable(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            index_samples,
            fallback_n,
            out_of_range: OutOfRange::Error,
        })
    }

    /// Wavelength-independent material.
    pub fn constant(name: impl Into<String>, n: f64) -> Result<Self, OpticsError> {
        Self::new(name, Vec::new(), n)
    }

    /// GaAs with n = 3.46 at 925 nm, held constant outside the single sample.
    pub fn gaas() -> Self {
        Self {
            name: "GaAs".into(),
            index_samples: vec![(925.0, 3.46)],
            fallback_n: 3.46,
            out_of_range: OutOfRange::Fallback,
        }
    }

    pub fn with_out_of_range(mut self, policy: OutOfRange) -> Self {
        self.out_of_range = policy;
        self
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.index_samples
    }

    pub fn refractive_index(&self, lambda_nm: f64) -> Result<f64, OpticsError> {
        if !(lambda_nm > 0.0) || !lambda_nm.is_finite() {
            return Err(OpticsError::Domain(format!(
                "wavelength must be positive, got {lambda_nm}"
            )));
        }
        let samples = &self.index_samples;
        let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
            return Ok(self.fallback_n);
        };
        if lambda_nm < first.0 || lambda_nm > last.0 {
            return match self.out_of_range {
                OutOfRange::Fallback => Ok(self.fallback_n),
                OutOfRange::Error => Err(OpticsError::Extrapolation {
                    material: self.name.clone(),
                    lambda_nm,
                    lo_nm: first.0,
                    hi_nm: last.0,
                }),
            };
        }
        let idx = samples.partition_point(|&(l, _)| l < lambda_nm);
        if idx == 0 {
            return Ok(first.1);
        }
        let (l0, n0) = samples[idx - 1];
        let (l1, n1) = samples[idx];
        Ok(n0 + (n1 - n0) * (lambda_nm - l0) / (l1 - l0))
    }

    /// Parse a two-column `wavelength_nm n` table. Columns may be separated
    /// by whitespace or commas; `#` starts a comment and a single non-numeric
    /// header line is allowed before the data.
    pub fn parse_table(name: impl Into<String>, text: &str) -> Result<Self, OpticsError> {
        let mut samples = Vec::new();
        let mut seen_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 => samples.push((v[0], v[1])),
                None if samples.is_empty() && !seen_header => seen_header = true,
                _ => {
                    return Err(OpticsError::InvalidTable(format!(
                        "line {}: expected two numeric columns, got {raw:?}",
                        lineno + 1
                    )))
                }
            }
        }
        if samples.is_empty() {
            return Err(OpticsError::InvalidTable("table has no data rows".into()));
        }
        let fallback = samples[0].1;
        Self::new(name, samples, fallback)
    }

    pub fn load(path: &Path) -> Result<Self, OpticsError> {
        let text = std::fs::read_to_string(path).map_err(|source| OpticsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "material".into());
        Self::parse_table(name, &text)
    }
}

/// Quantities of the m = 1 vertical Fabry-Perot resonance of the membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalCavity {
    pub h_nm: f64,
    pub n: f64,
    pub lambda_nm: f64,
    /// Normal-incidence intensity reflectance of one surface.
    pub reflectance: f64,
    /// Angular frequency of the first resonance, rad/s.
    pub omega_1: f64,
    /// Resonance linewidth, rad/s.
    pub d_omega: f64,
    pub q: f64,
    /// Effective mode volume, nm³.
    pub v_eff_nm3: f64,
    /// Lorentzian detuning factor in (0, 1].
    pub lorentzian: f64,
    pub f_fp: f64,
}

pub fn vertical_cavity(h_nm: f64, n: f64, lambda_nm: f64) -> Result<VerticalCavity, OpticsError> {
    if !(h_nm > 0.0) || !h_nm.is_finite() {
        return Err(OpticsError::Domain("h must be positive".into()));
    }
    if !(n > 1.0) || !n.is_finite() {
        return Err(OpticsError::Domain("n must exceed 1".into()));
    }
    if !(lambda_nm > 0.0) || !lambda_nm.is_finite() {
        return Err(OpticsError::Domain("lambda must be positive".into()));
    }
    let h_m = h_nm * 1e-9;
    let c = SPEED_OF_LIGHT;
    let reflectance = ((n - 1.0) / (n + 1.0)).powi(2);
    let omega_1 = PI * c / (n * h_m);
    let d_omega = c * (1.0 - reflectance) / (n * reflectance.sqrt() * h_m);
    let q = omega_1 / d_omega;
    let v_eff_nm3 = VEFF_PREFACTOR * h_nm.powi(3);
    let omega = 2.0 * PI * c / (lambda_nm * 1e-9);
    let lorentzian = d_omega * d_omega / (4.0 * (omega - omega_1).powi(2) + d_omega * d_omega);
    let peak = 3.0 * q * (lambda_nm / n).powi(3) / (4.0 * PI * PI * v_eff_nm3);
    Ok(VerticalCavity {
        h_nm,
        n,
        lambda_nm,
        reflectance,
        omega_1,
        d_omega,
        q,
        v_eff_nm3,
        lorentzian,
        f_fp: peak * lorentzian,
    })
}

/// Prefactor of `h³` in the effective volume of the vertical cavity.
pub const VEFF_PREFACTOR: f64 = 2.0 / 3.0;

/// Evaluates the effective-length construction numerically and returns the
/// dimensionless prefactor `V_eff / h³`.
///
/// With `I_max ∝ 1/(h/2)²` the polar length is `(h/2)·∫₀^π sin³θ dθ` and the
/// azimuthal length is `(h/2)·∫₀^π sinφ dφ`; the volume is `h·l_θ·l_φ`.
pub fn verify_veff_prefactor() -> Result<f64, OpticsError> {
    effective_volume(1.0).map_err(Into::into)
}

/// `h·l_θ·l_φ` for a membrane of thickness `h` (any length unit).
pub fn effective_volume(h: f64) -> Result<f64, NumericsError> {
    let tol = Tolerance {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_iter: 200,
    };
    let half = 0.5 * h;
    let i_max = 1.0 / (half * half);
    let l_theta = integrate(|t: f64| t.sin().powi(3) / half, 0.0, PI, &tol)? / i_max;
    let l_phi = integrate(|p: f64| p.sin() / half, 0.0, PI, &tol)? / i_max;
    Ok(h * l_theta * l_phi)
}
