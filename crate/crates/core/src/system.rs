//! The affine block logit system `Fᵃ(x) = σ(βₐ(bᵃ + Σ_c Wᵃᶜ xᶜ))`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, block_softmax_covariance, check_dims, ProductPoint};
use crate::spectral;

/// An affine logit system on a product of simplices.
///
/// `W` is stored as one flat `N × N` matrix; block `a` occupies the index
/// range [`block_range`](Self::block_range). A single simplex is the case
/// `m = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLogitSystem {
    block_dims: Vec<usize>,
    offsets: Vec<usize>,
    w: DMatrix<f64>,
    b: DVector<f64>,
    beta: Vec<f64>,
}

impl AffineLogitSystem {
    pub fn new(
        block_dims: Vec<usize>,
        w: DMatrix<f64>,
        b: DVector<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::Dimension(format!(
                "W must be square, got {}x{}",
                n,
                w.ncols()
            )));
        }
        check_dims(&block_dims, n)?;
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "bias has length {}, expected {n}",
                b.len()
            )));
        }
        if beta.len() != block_dims.len() {
            return Err(Error::Dimension(format!(
                "{} inverse temperatures for {} blocks",
                beta.len(),
                block_dims.len()
            )));
        }
        if w.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("system coefficients".into()));
        }
        if let Some(bad) = beta.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Precondition(format!(
                "inverse temperatures must be positive and finite, got {bad}"
            )));
        }
        let offsets = block_dims
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect();
        Ok(Self {
            block_dims,
            offsets,
            w,
            b,
            beta,
        })
    }

    /// Single-simplex system `σ(β(Wx + b))`.
    pub fn single(w: DMatrix<f64>, b: DVector<f64>, beta: f64) -> Result<Self> {
        let n = w.nrows();
        Self::new(vec![n], w, b, vec![beta])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Total dimension `N`.
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn block_range(&self, a: usize) -> std::ops::Range<usize> {
        self.offsets[a]..self.offsets[a] + self.block_dims[a]
    }

    /// The common inverse temperature if all blocks share one.
    pub fn uniform_beta(&self) -> Option<f64> {
        let first = self.beta[0];
        self.beta.iter().all(|&x| x == first).then_some(first)
    }

    /// Copy with every block temperature set to `beta`.
    pub fn with_uniform_beta(&self, beta: f64) -> Result<Self> {
        Self::new(
            self.block_dims.clone(),
            self.w.clone(),
            self.b.clone(),
            vec![beta; self.block_dims.len()],
        )
    }

    pub fn with_beta(&self, beta: Vec<f64>) -> Result<Self> {
        Self::new(self.block_dims.clone(), self.w.clone(), self.b.clone(), beta)
    }

    /// Diagonal of `B_β`: βₐ repeated over the coordinates of block `a`.
    pub fn beta_per_coordinate(&self) -> Vec<f64> {
        self.block_dims
            .iter()
            .zip(&self.beta)
            .flat_map(|(&d, &b)| std::iter::repeat_n(b, d))
            .collect()
    }

    /// `B_β = blkdiag(β₁I, …, β_mI)`.
    pub fn beta_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.beta_per_coordinate()))
    }

    pub fn is_symmetric(&self) -> bool {
        spectral::asymmetry(&self.w) <= spectral::SYMMETRY_TOL
    }

    fn check_point(&self, x: &ProductPoint) -> Result<()> {
        if x.dims() != self.block_dims {
            return Err(Error::Dimension(format!(
                "point has block dimensions {:?}, system expects {:?}",
                x.dims(),
                self.block_dims
            )));
        }
        Ok(())
    }

    /// The block logit response `F(x)`.
    pub fn response(&self, x: &ProductPoint) -> Result<ProductPoint> {
        self.check_point(x)?;
        let out = self.response_flat(&x.to_flat());
        Ok(ProductPoint::from_flat_unchecked(&self.block_dims, &out))
    }

    /// Response on a flat coordinate vector of length `N`.
    pub(crate) fn response_flat(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.response_into(x, &mut out);
        out
    }

    pub(crate) fn response_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut z = vec![0.0; n];
        // Column-major storage: accumulate W x column by column.
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = self.w.column(j);
            for (zi, wij) in z.iter_mut().zip(col.iter()) {
                *zi += wij * xj;
            }
        }
        for (a, &beta) in self.beta.iter().enumerate() {
            let r = self.block_range(a);
            for i in r.clone() {
                z[i] = beta * (z[i] + self.b[i]);
            }
            geometry::softmax_into(&z[r.clone()], &mut out[r]);
        }
    }

    /// Jacobian `DF(x) = Σ_blk(F(x)) B_β W`.
    pub fn response_jacobian(&self, x: &ProductPoint) -> Result<DMatrix<f64>> {
        let fx = self.response(x)?;
        let sigma = block_softmax_covariance(&fx);
        let mut bw = self.w.clone();
        spectral::scale_rows(&mut bw, &self.beta_per_coordinate());
        Ok(sigma * bw)
    }

    /// Structural diagnostics; never fails.
    pub fn validate(&self) -> Diagnostics {
        let asym = spectral::asymmetry(&self.w);
        let projected = spectral::project_both_sides(&self.w, &self.block_dims);
        let shift = &self.w - &projected;
        let norm = |m: &DMatrix<f64>| spectral::spectral_norm(m, spectral::DEFAULT_TOL).ok();
        let mut warnings = Vec::new();
        let shift_norm = norm(&shift);
        if let Some(s) = shift_norm {
            if s > 0.0 {
                warnings.push(format!(
                    "W carries payoff-shift or off-tangent components of norm {s:.6e}; they do not affect the response"
                ));
            }
        }
        if self.block_dims.contains(&1) {
            warnings.push("some blocks have a single action and a constant response".into());
        }
        Diagnostics {
            symmetry: SymmetryTag {
                is_symmetric: asym <= spectral::SYMMETRY_TOL,
                max_asymmetry: asym,
            },
            block_dims: self.block_dims.clone(),
            beta: self.beta.clone(),
            total_dim: self.dim(),
            ambient_norm: norm(&self.w),
            tangent_norm: norm(&projected),
            shift_component_norm: shift_norm,
            warnings,
        }
    }
}

/// Whether `W` is symmetric within [`spectral::SYMMETRY_TOL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryTag {
    pub is_symmetric: bool,
    pub max_asymmetry: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub symmetry: SymmetryTag,
    pub block_dims: Vec<usize>,
    pub beta: Vec<f64>,
    pub total_dim: usize,
    pub ambient_norm: Option<f64>,
    pub tangent_norm: Option<f64>,
    /// ‖W − ΠWΠ‖₂: the part of `W` invisible to the response.
    pub shift_component_norm: Option<f64>,
    pub warnings: Vec<String>,
}
