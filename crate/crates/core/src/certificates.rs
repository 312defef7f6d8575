//! Stability certificates: the classical unit-softmax bound, the
//! covariance-calibrated tangent contraction bound, the entropy-curvature
//! bound for symmetric interactions, and the block ℓ1 (Dobrushin-type)
//! influence bound.

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::{self, DEFAULT_TOL};
use crate::system::AffineLogitSystem;

/// Relative width of the band around a threshold that is reported as
/// [`Verdict::Boundary`] instead of a pass or a fail.
pub const BOUNDARY_REL: f64 = 8.0 * f64::EPSILON;

/// Tangent norms below this multiple of ‖W‖_F are round-off from projecting
/// out pure payoff shifts and are treated as exactly zero.
const ZERO_TANGENT_REL: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Value strictly below the threshold.
    Certified,
    /// Value equal to the threshold up to rounding: not certified.
    Boundary,
    NotCertified,
}

impl Verdict {
    /// Strict `value < threshold`, with values within [`BOUNDARY_REL`] of the
    /// threshold classified as [`Verdict::Boundary`].
    pub fn classify(value: f64, threshold: f64) -> Self {
        let band = BOUNDARY_REL * threshold.abs();
        if (value - threshold).abs() <= band {
            Verdict::Boundary
        } else if value < threshold {
            Verdict::Certified
        } else {
            Verdict::NotCertified
        }
    }

    pub fn passes(self) -> bool {
        self == Verdict::Certified
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCertificate {
    /// Classical factor ‖B_βW‖₂.
    pub q_old: f64,
    pub classical: Verdict,
    /// Tangent factor ½‖B_βΠWΠ‖.
    pub q_new: f64,
    pub contraction: Verdict,
}

/// Classical and tangent contraction factors.
pub fn certify_contraction(system: &AffineLogitSystem) -> Result<ContractionCertificate> {
    let mut bw = system.w().clone();
    spectral::scale_rows(&mut bw, &system.beta_per_coordinate());
    let q_old = spectral::spectral_norm(&bw, DEFAULT_TOL)?;
    let q_new = 0.5 * spectral::block_tangent_norm(system, true)?;
    Ok(ContractionCertificate {
        q_old,
        classical: Verdict::classify(q_old, 1.0),
        q_new,
        contraction: Verdict::classify(q_new, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricCertificate {
    /// λ_max(B_β^{1/2} ΠWΠ B_β^{1/2}) on the block tangent space.
    pub kappa_scaled: f64,
    /// Unscaled tangent λ_max(W_tan); only for single-block systems.
    pub kappa: Option<f64>,
    /// The interaction is tangent negative semidefinite, so the potential is
    /// concave for every temperature.
    pub kappa_nonpositive: bool,
    pub verdict: Verdict,
}

/// Entropy-curvature certificate for symmetric `W`.
pub fn certify_symmetric(system: &AffineLogitSystem) -> Result<SymmetricCertificate> {
    if !system.is_symmetric() {
        return Err(Error::Precondition(
            "the entropy-curvature certificate needs a symmetric interaction matrix".into(),
        ));
    }
    let sqrt_beta: Vec<f64> = system.beta_per_coordinate().iter().map(|b| b.sqrt()).collect();
    let scaled = DMatrix::from_fn(system.dim(), system.dim(), |i, j| {
        sqrt_beta[i] * system.w()[(i, j)] * sqrt_beta[j]
    });
    let kappa_scaled = spectral::block_tangent_lambda_max(&scaled, system.block_dims())?;
    let kappa = if system.num_blocks() == 1 {
        Some(spectral::tangent_lambda_max(system.w())?)
    } else {
        None
    };
    let kappa_nonpositive = kappa_scaled <= 0.0;
    let verdict = if kappa_nonpositive {
        Verdict::Certified
    } else {
        Verdict::classify(kappa_scaled, 2.0)
    };
    Ok(SymmetricCertificate {
        kappa_scaled,
        kappa,
        kappa_nonpositive,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DobrushinCertificate {
    /// Row-major `m × m` influence matrix `C_ab = (βₐ/2)‖ΠₐWᵃᵇΠ_b‖₁→₁`.
    pub influence: Vec<Vec<f64>>,
    pub rho: f64,
    pub verdict: Verdict,
}

/// Block ℓ1 influence matrix and its Perron root.
pub fn certify_dobrushin(system: &AffineLogitSystem) -> Result<DobrushinCertificate> {
    let m = system.num_blocks();
    let dims = system.block_dims();
    let mut c = DMatrix::zeros(m, m);
    for a in 0..m {
        let ra = system.block_range(a);
        for bb in 0..m {
            let rb = system.block_range(bb);
            let block = system
                .w()
                .view((ra.start, rb.start), (dims[a], dims[bb]))
                .into_owned();
            let projected = project_rect(&block);
            c[(a, bb)] = 0.5 * system.beta()[a] * spectral::l1_operator_norm(&projected);
        }
    }
    let rho = spectral::spectral_radius_nonneg(&c)?;
    Ok(DobrushinCertificate {
        influence: c.row_iter().map(|r| r.iter().copied().collect()).collect(),
        rho,
        verdict: Verdict::classify(rho, 1.0),
    })
}

/// `Πₐ M Π_b` for a rectangular block.
fn project_rect(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

/// Certified inverse-temperature ranges when a single β is treated as free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaRange {
    #[serde(serialize_with = "extended_f64")]
    pub beta_old: f64,
    #[serde(serialize_with = "extended_f64")]
    pub beta_new: f64,
    /// `β_new / β_old = 2‖W‖₂ / ‖ΠWΠ‖`; `+∞` when the tangent part vanishes.
    #[serde(serialize_with = "extended_f64")]
    pub gain: f64,
    pub ambient_norm: f64,
    pub tangent_norm: f64,
}

/// `β_old = 1/‖W‖₂` and `β_new = 2/‖ΠWΠ‖`. Requires a uniform β.
pub fn certified_beta_range(system: &AffineLogitSystem) -> Result<BetaRange> {
    if system.uniform_beta().is_none() {
        return Err(Error::Precondition(
            "certified β range needs one inverse temperature shared by all blocks".into(),
        ));
    }
    let ambient = spectral::spectral_norm(system.w(), DEFAULT_TOL)?;
    let mut tangent = spectral::block_tangent_norm(system, false)?;
    if tangent <= ZERO_TANGENT_REL * system.w().norm() {
        tangent = 0.0;
    }
    Ok(range_from_norms(ambient, tangent))
}

pub(crate) fn range_from_norms(ambient: f64, tangent: f64) -> BetaRange {
    let beta_old = if ambient > 0.0 { 1.0 / ambient } else { f64::INFINITY };
    let beta_new = if tangent > 0.0 { 2.0 / tangent } else { f64::INFINITY };
    let gain = if tangent > 0.0 {
        2.0 * ambient / tangent
    } else {
        f64::INFINITY
    };
    BetaRange {
        beta_old,
        beta_new,
        gain,
        ambient_norm: ambient,
        tangent_norm: tangent,
    }
}

/// Everything the toolkit can certify about one system.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub q_old: f64,
    pub classical: Verdict,
    pub classical_margin: f64,
    pub q_new: f64,
    pub contraction: Verdict,
    pub contraction_margin: f64,
    pub symmetric: bool,
    pub kappa_scaled: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_nonpositive: Option<bool>,
    pub curvature: Option<Verdict>,
    pub curvature_margin: Option<f64>,
    pub dobrushin_rho: f64,
    pub dobrushin: Verdict,
    pub dobrushin_margin: f64,
    pub dobrushin_influence: Vec<Vec<f64>>,
    /// Present when all blocks share one β.
    pub beta_range: Option<BetaRange>,
}

pub fn certify(system: &AffineLogitSystem) -> Result<CertificateReport> {
    let contraction = certify_contraction(system)?;
    let symmetric = system.is_symmetric();
    let curvature = if symmetric {
        Some(certify_symmetric(system)?)
    } else {
        None
    };
    let dob = certify_dobrushin(system)?;
    let beta_range = match system.uniform_beta() {
        Some(_) => Some(certified_beta_range(system)?),
        None => None,
    };
    Ok(CertificateReport {
        q_old: contraction.q_old,
        classical: contraction.classical,
        classical_margin: 1.0 - contraction.q_old,
        q_new: contraction.q_new,
        contraction: contraction.contraction,
        contraction_margin: 1.0 - contraction.q_new,
        symmetric,
        kappa_scaled: curvature.map(|c| c.kappa_scaled),
        kappa: curvature.and_then(|c| c.kappa),
        kappa_nonpositive: curvature.map(|c| c.kappa_nonpositive),
        curvature: curvature.map(|c| c.verdict),
        curvature_margin: curvature.map(|c| 2.0 - c.kappa_scaled),
        dobrushin_rho: dob.rho,
        dobrushin: dob.verdict,
        dobrushin_margin: 1.0 - dob.rho,
        dobrushin_influence: dob.influence,
        beta_range,
    })
}

/// Serializes infinities as the strings `"inf"` / `"-inf"`, which plain JSON
/// numbers cannot represent.
pub fn extended_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn classify_is_strict() {
        assert_eq!(Verdict::classify(0.5, 1.0), Verdict::Certified);
        assert_eq!(Verdict::classify(1.0, 1.0), Verdict::Boundary);
        assert_eq!(Verdict::classify(1.0 + 1e-15, 1.0), Verdict::Boundary);
        assert_eq!(Verdict::classify(1.0 + 1e-12, 1.0), Verdict::NotCertified);
        assert_eq!(Verdict::classify(1.0 - 1e-12, 1.0), Verdict::Certified);
    }

    #[test]
    fn contraction_examples() {
        let c = certify_contraction(&instances::pitchfork_system(1.5).unwrap()).unwrap();
        assert_abs_diff_eq!(c.q_old, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.q_new, 0.75, epsilon = 1e-12);
        assert_eq!(c.classical, Verdict::NotCertified);
        assert_eq!(c.contraction, Verdict::Certified);

        let zero = AffineLogitSystem::single(DMatrix::zeros(3, 3), DVector::zeros(3), 4.0).unwrap();
        let c = certify_contraction(&zero).unwrap();
        assert_eq!((c.q_old, c.q_new), (0.0, 0.0));

        let h = instances::hadamard_separation(8, 1.0).unwrap();
        assert_abs_diff_eq!(certify_contraction(&h).unwrap().q_new, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_examples() {
        let c = certify_symmetric(&instances::pitchfork_system(1.9).unwrap()).unwrap();
        assert_abs_diff_eq!(c.kappa_scaled, 1.9, epsilon = 1e-14);
        assert_abs_diff_eq!(c.kappa.unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(c.verdict, Verdict::Certified);

        let at_two = certify_symmetric(&instances::pitchfork_system(2.0).unwrap()).unwrap();
        assert_eq!(at_two.verdict, Verdict::Boundary);

        for beta in [0.1, 10.0, 1e3] {
            let neg = AffineLogitSystem::single(-DMatrix::identity(3, 3), DVector::zeros(3), beta).unwrap();
            let c = certify_symmetric(&neg).unwrap();
            assert!(c.kappa_nonpositive);
            assert_abs_diff_eq!(c.kappa.unwrap(), -1.0, epsilon = 1e-14);
            assert_eq!(c.verdict, Verdict::Certified);
        }

        let asym = AffineLogitSystem::single(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DVector::zeros(2),
            1.0,
        )
        .unwrap();
        assert!(matches!(certify_symmetric(&asym), Err(Error::Precondition(_))));
    }

    #[test]
    fn scaled_kappa_matches_compressed_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let g = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let w = (&g + g.transpose()) * 0.5;
        let sys = AffineLogitSystem::new(vec![2, 3], w.clone(), DVector::zeros(5), vec![2.0, 0.5]).unwrap();
        let got = certify_symmetric(&sys).unwrap().kappa_scaled;
        // Oracle: B^{1/2} Π W Π B^{1/2} via explicit matrices, nalgebra eigen-solve
        // on the tangent compression.
        let p = spectral::block_projection(&[2, 3]);
        let bh = DMatrix::from_diagonal(&DVector::from_vec(
            sys.beta_per_coordinate().iter().map(|b| b.sqrt()).collect(),
        ));
        let m = &bh * &p * &w * &p * &bh;
        let q = spectral::tangent_basis(&[2, 3]);
        let oracle = (q.transpose() * m * &q).symmetric_eigen().eigenvalues.max();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);

        // Sampling bound from below.
        let mut best = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = DVector::from_vec(crate::geometry::project_block_tangent(&[2, 3], &raw).unwrap());
            let y = &bh * &v;
            let ratio = (y.transpose() * &w * &y)[(0, 0)] / v.norm_squared();
            best = best.max(ratio);
        }
        assert!(best <= got + 1e-12);
        assert!(got - best < 1e-2 * got.abs().max(1.0));
    }

    #[test]
    fn dobrushin_examples() {
        let h = certify_dobrushin(&instances::hadamard_separation(8, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(h.rho, 8f64.sqrt() / 2.0, epsilon = 1e-12);
        assert_eq!(h.verdict, Verdict::NotCertified);

        let ut = certify_dobrushin(&instances::upper_triangular_counterexample(4, 5.0).unwrap()).unwrap();
        assert_eq!(ut.rho, 0.0);
        assert_eq!(ut.verdict, Verdict::Certified);

        let p = certify_dobrushin(&instances::pitchfork_system(1.0).unwrap()).unwrap();
        assert_eq!(p.influence, vec![vec![0.5]]);
        assert_abs_diff_eq!(p.rho, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn beta_range_examples() {
        let r = certified_beta_range(&instances::pitchfork_system(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.beta_old, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.beta_new, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gain, 2.0, epsilon = 1e-12);

        let ones = DVector::from_element(4, 1.0);
        let a = DVector::from_vec(vec![0.1, -0.7, 0.3, 2.0]);
        let shift = AffineLogitSystem::single(&ones * a.transpose(), DVector::zeros(4), 1.0).unwrap();
        let r = certified_beta_range(&shift).unwrap();
        assert!(r.beta_new.is_infinite() && r.gain.is_infinite());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"beta_new\":\"inf\""));

        let nonuniform = AffineLogitSystem::new(vec![2, 2], DMatrix::zeros(4, 4), DVector::zeros(4), vec![1.0, 2.0]).unwrap();
        assert!(certified_beta_range(&nonuniform).is_err());
    }

    #[test]
    fn full_report_on_pitchfork() {
        let r = certify(&instances::pitchfork_system(1.5).unwrap()).unwrap();
        assert_eq!(r.classical, Verdict::NotCertified);
        assert_eq!(r.contraction, Verdict::Certified);
        assert_eq!(r.curvature, Some(Verdict::Certified));
        assert_abs_diff_eq!(r.contraction_margin, 0.25, epsilon = 1e-12);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["contraction"], "certified");
        assert_eq!(json["classical"], "not_certified");
    }
}
