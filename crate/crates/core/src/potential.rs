//! Entropy-regularized potentials for symmetric interactions.
//!
//! Everything is computed in the product normalization
//! `Ψ(x) = Σₐ H(xᵃ)/βₐ + ½xᵀWx + bᵀx`. For a single block with one β the
//! reported object is `Φ_β = β·Ψ = H(x) + (β/2)xᵀWx + βbᵀx`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::certificates::{self, SymmetricCertificate, Verdict};
use crate::error::{Error, Result};
use crate::geometry::{ProductPoint, SimplexPoint, TangentVector};
use crate::instances::{self, SeedSpec};
use crate::spectral;
use crate::system::AffineLogitSystem;

/// Coordinates below this value are treated as boundary points.
pub const INTERIOR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Φ_β`, single block with uniform β.
    Phi,
    /// `Ψ`, product normalization.
    Psi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialEval {
    pub normalization: Normalization,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// ‖Π∇‖₂ with the block tangent projection.
    pub kkt_residual: f64,
    /// Largest eigenvalue of the Hessian restricted to the tangent space.
    pub tangent_hessian_max: f64,
    /// Smallest coordinate is below 1e−6; Hessian terms `1/xᵢ` are large.
    pub near_boundary: bool,
}

fn normalization(system: &AffineLogitSystem) -> (Normalization, f64) {
    match (system.num_blocks(), system.uniform_beta()) {
        (1, Some(beta)) => (Normalization::Phi, beta),
        _ => (Normalization::Psi, 1.0),
    }
}

fn require_symmetric(system: &AffineLogitSystem) -> Result<()> {
    if !system.is_symmetric() {
        return Err(Error::Precondition(
            "potentials exist only for symmetric interaction matrices".into(),
        ));
    }
    Ok(())
}

fn require_interior(system: &AffineLogitSystem, x: &ProductPoint) -> Result<Vec<f64>> {
    if x.dims() != system.block_dims() {
        return Err(Error::Dimension(format!(
            "point has block dimensions {:?}, system expects {:?}",
            x.dims(),
            system.block_dims()
        )));
    }
    let min = x.min_entry();
    if min < INTERIOR_EPS {
        return Err(Error::Precondition(format!(
            "potential needs an interior point (min coordinate {min:e} < {INTERIOR_EPS:e})"
        )));
    }
    Ok(x.to_flat())
}

/// Value, gradient, KKT residual and tangent Hessian bound at an interior
/// point.
pub fn eval_potential(system: &AffineLogitSystem, x: &ProductPoint) -> Result<PotentialEval> {
    require_symmetric(system)?;
    let flat = require_interior(system, x)?;
    let (norm, factor) = normalization(system);
    let betas = system.beta_per_coordinate();
    let xv = DVector::from_column_slice(&flat);
    let wx = system.w() * &xv;

    let entropy: f64 = flat
        .iter()
        .zip(&betas)
        .map(|(&xi, &bi)| -xi * xi.ln() / bi)
        .sum();
    let psi = entropy + 0.5 * xv.dot(&wx) + system.b().dot(&xv);
    let grad: Vec<f64> = (0..flat.len())
        .map(|i| factor * (-(1.0 + flat[i].ln()) / betas[i] + wx[i] + system.b()[i]))
        .collect();
    let projected = crate::geometry::project_block_tangent(system.block_dims(), &grad)?;
    let kkt_residual = crate::geometry::norm2(&projected);

    let hessian = DMatrix::from_fn(flat.len(), flat.len(), |i, j| {
        let d = if i == j { -1.0 / (betas[i] * flat[i]) } else { 0.0 };
        factor * (d + system.w()[(i, j)])
    });
    let tangent_hessian_max = spectral::block_tangent_lambda_max(&hessian, system.block_dims())?;

    Ok(PotentialEval {
        normalization: norm,
        value: factor * psi,
        gradient: grad,
        kkt_residual,
        tangent_hessian_max,
        near_boundary: x.min_entry() < 1e-6,
    })
}

/// Potential value only; cheaper than [`eval_potential`].
pub fn potential_value(system: &AffineLogitSystem, x: &ProductPoint) -> Result<f64> {
    require_symmetric(system)?;
    let flat = require_interior(system, x)?;
    let (_, factor) = normalization(system);
    let betas = system.beta_per_coordinate();
    let xv = DVector::from_column_slice(&flat);
    let entropy: f64 = flat
        .iter()
        .zip(&betas)
        .map(|(&xi, &bi)| -xi * xi.ln() / bi)
        .sum();
    Ok(factor * (entropy + 0.5 * xv.dot(&(system.w() * &xv)) + system.b().dot(&xv)))
}

/// `vᵀ∇²v` in the reported normalization:
/// `−Σₐ(1/βₐ)Σᵢ(vᵢᵃ)²/xᵢᵃ + vᵀWv` for Ψ, or `−Σᵢvᵢ²/xᵢ + βvᵀWv` for Φ_β.
pub fn tangent_hessian_quadform(
    system: &AffineLogitSystem,
    x: &ProductPoint,
    v: &[f64],
) -> Result<f64> {
    require_symmetric(system)?;
    let flat = require_interior(system, x)?;
    if v.len() != flat.len() {
        return Err(Error::Dimension(format!(
            "direction has length {}, expected {}",
            v.len(),
            flat.len()
        )));
    }
    let mut offset = 0;
    for &d in system.block_dims() {
        let s: f64 = v[offset..offset + d].iter().sum();
        if s.abs() > crate::geometry::FEASIBILITY_TOL * (1.0 + crate::geometry::norm2(v)) {
            return Err(Error::Infeasible(format!(
                "direction is not zero-sum on its block (sum {s:e})"
            )));
        }
        offset += d;
    }
    Ok(quadform_unchecked(system, &flat, v))
}

fn quadform_unchecked(system: &AffineLogitSystem, x: &[f64], v: &[f64]) -> f64 {
    let (_, factor) = normalization(system);
    let betas = system.beta_per_coordinate();
    let entropy: f64 = (0..x.len()).map(|i| v[i] * v[i] / (betas[i] * x[i])).sum();
    let vv = DVector::from_column_slice(v);
    factor * (-entropy + vv.dot(&(system.w() * &vv)))
}

/// Both sides of `Σᵢ vᵢ²/xᵢ ≥ 2‖v‖²` for interior `x` and zero-sum `v`.
pub fn entropy_curvature_check(x: &SimplexPoint, v: &TangentVector) -> Result<(f64, f64)> {
    if x.len() != v.len() {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, direction has {}",
            x.len(),
            v.len()
        )));
    }
    if x.min_entry() < INTERIOR_EPS {
        return Err(Error::Precondition("entropy curvature needs an interior point".into()));
    }
    let lhs = x
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(xi, vi)| vi * vi / xi)
        .sum();
    let rhs = 2.0 * v.as_slice().iter().map(|vi| vi * vi).sum::<f64>();
    Ok((lhs, rhs))
}

/// Sampling budget for the empirical concavity probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub points: usize,
    pub directions: usize,
    pub seed: SeedSpec,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            points: 256,
            directions: 16,
            seed: SeedSpec::new(0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalVerdict {
    /// Analytic verdict; the only basis for certification.
    pub verdict: Verdict,
    pub certificate: SymmetricCertificate,
    pub probes: usize,
    /// Probes with a nonnegative Hessian quadratic form.
    pub nonnegative_probes: usize,
    /// Largest `vᵀ∇²v / ‖v‖²` seen.
    pub max_normalized_quadform: f64,
}

/// Analytic strict-concavity certificate plus a diagnostic probe of the
/// tangent Hessian at the barycenter and at Dirichlet(1) interior points.
pub fn variational_uniqueness(
    system: &AffineLogitSystem,
    probe: ProbeConfig,
) -> Result<VariationalVerdict> {
    let certificate = certificates::certify_symmetric(system)?;
    let dims = system.block_dims().to_vec();
    let mut rng = probe.seed.rng();
    let mut points = vec![ProductPoint::uniform(&dims)];
    while points.len() < probe.points.max(1) {
        let p = instances::dirichlet_with(&mut rng, &dims)?;
        if p.min_entry() >= INTERIOR_EPS {
            points.push(p);
        }
    }
    let n = system.dim();
    let mut probes = 0;
    let mut nonneg = 0;
    let mut worst = f64::NEG_INFINITY;
    for (pi, x) in points.iter().enumerate() {
        let flat = x.to_flat();
        for di in 0..probe.directions.max(1) {
            let v = if pi == 0 && di == 0 {
                // Two-point direction on the first block with at least two actions.
                let mut v = vec![0.0; n];
                if let Some(a) = dims.iter().position(|&d| d >= 2) {
                    let start: usize = dims[..a].iter().sum();
                    v[start] = 1.0;
                    v[start + 1] = -1.0;
                }
                v
            } else {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                crate::geometry::project_block_tangent(&dims, &raw)?
            };
            let nv = crate::geometry::norm2(&v);
            if nv == 0.0 {
                continue;
            }
            let qf = quadform_unchecked(system, &flat, &v) / (nv * nv);
            probes += 1;
            if qf >= 0.0 {
                nonneg += 1;
            }
            worst = worst.max(qf);
        }
    }
    Ok(VariationalVerdict {
        verdict: certificate.verdict,
        certificate,
        probes,
        nonnegative_probes: nonneg,
        max_normalized_quadform: worst,
    })
}
