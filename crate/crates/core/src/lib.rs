//! Design toolkit linking photonic-crystal-waveguide geometry to the
//! wavelength of peak Purcell enhancement.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod heuristic;
pub mod numerics;
pub mod radiometry;
pub mod robustness;
pub mod slab_optics;
pub mod units;

pub use heuristic::{
    design_radius, peak_wavelength, DesignError, DesignResult, Designer, LatticeSpec,
    ModelConventions,
};
pub use numerics::{ConvergenceTrace, NumericsError, Tolerance};
pub use robustness::{
    build_compound, compound_peak, run_perturbation, sensitivity, CompoundDesign,
    PerturbationConfig, PerturbationReport, RobustnessError,
};
pub use slab_optics::{MaterialModel, OpticsError};
