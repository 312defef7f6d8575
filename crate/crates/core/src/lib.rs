//! Stability certificates for affine softmax (logit) feedback systems.
//!
//! A system is `x = F(x)` with blockwise `Fᵃ(x) = σ(βₐ(bᵃ + Σ_c Wᵃᶜxᶜ))` on a
//! product of probability simplices. Because the softmax Jacobian is the
//! categorical covariance `Diag(p) − ppᵀ`, whose norm never exceeds ½, the
//! map is a contraction whenever `½‖B_βΠWΠ‖ < 1`, where `Π` removes the
//! payoff-shift directions softmax cannot see. This crate computes that
//! certificate alongside the classical unit-softmax bound, the
//! entropy-curvature bound for symmetric `W`, and a block ℓ1 influence
//! bound, and it simulates the resulting dynamics.
//!
//! Modules:
//! - [`geometry`]: simplices, tangent projection, softmax, covariance.
//! - [`spectral`]: dense operator norms and eigenvalues.
//! - [`system`]: the affine logit system and its Jacobian.
//! - [`certificates`]: every certificate and the combined report.
//! - [`dynamics`]: Picard iteration, logit ODE, multi-start collapse.
//! - [`potential`]: entropy-regularized potentials and KKT checks.
//! - [`instances`]: named examples and seeded random families.
//! - [`experiments`]: batch drivers producing CSV data.
//! - [`io`]: system JSON files and CSV number formatting.
//!
//! ```
//! use softmax_stability::{certify, dynamics, instances};
//!
//! let sys = instances::pitchfork_system(1.5)?;
//! let report = certify(&sys)?;
//! assert!(report.contraction.passes() && !report.classical.passes());
//!
//! let x0 = instances::pitchfork_point(0.8)?;
//! let run = dynamics::picard(&sys, &x0, 1_000, 1e-12)?;
//! assert!(run.converged);
//! # Ok::<(), softmax_stability::Error>(())
//! ```

pub mod certificates;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod instances;
pub mod io;
pub mod potential;
pub mod spectral;
pub mod system;

pub use certificates::{certify, CertificateReport, Verdict};
pub use error::{Error, Result};
pub use geometry::{ProductPoint, SimplexPoint, TangentVector};
pub use instances::SeedSpec;
pub use system::AffineLogitSystem;
