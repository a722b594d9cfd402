//! Structural-condition machinery: the Lyapunov function `V_p = f^p e^{φ(f)}`
//! with its closed-form derivatives, empirical checkers for the drift and
//! gradient-domination conditions, exponential noise-moment estimation, the
//! replicated descent diagnostic, and gradient-flow growth certificates.
//!
//! The checkers are grid/sample surrogates for continuum statements; each
//! report says what was sampled and serializes to JSON for the CLI.

mod checks;
mod flow;
mod lyapunov;
mod phi;

pub use checks::{
    check_h_kl, check_h_phi, check_noise_moments, descent_diagnostic, region_points,
    DescentConfig, DescentReport, HphiReport, KlReport, NoiseMomentReport, Violation,
    DEFAULT_DRIFT_FLOOR, REGION_EXCLUSION,
};
pub use flow::{
    desingularize, verify_growth_by_flow, FlowOutcome, FlowPoint, GrowthCertificate,
};
pub use lyapunov::{
    descent_alignment, lyapunov_gradient, lyapunov_hessian, lyapunov_value, NearMinimizer,
    SINGULAR_RADIUS,
};
pub use phi::{sub_additivity_constant, BadPhiParameter, PhiFunction};
