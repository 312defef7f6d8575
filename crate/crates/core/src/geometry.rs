//! Simplex and product-simplex geometry: feasibility, tangent projection,
//! softmax and the softmax covariance matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for nonnegativity and unit-sum checks.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// A probability vector on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Validates `values` without modifying them. Entries must be finite,
    /// nonnegative and sum to one within [`FEASIBILITY_TOL`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("simplex point must be non-empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("simplex entry {v}")));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::Infeasible(format!("entry {i} is negative ({v:e})")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "entries sum to {sum:.17} instead of 1"
            )));
        }
        Ok(Self(values))
    }

    /// Clamps negative entries at zero and rescales to unit sum. Meant for
    /// ingesting user data; never applied implicitly.
    pub fn normalize(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("simplex point must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cannot normalize non-finite vector".into()));
        }
        let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Infeasible(
                "vector has no positive mass to normalize".into(),
            ));
        }
        Ok(Self(clamped.into_iter().map(|v| v / sum).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs n >= 1");
        Self(vec![1.0 / n as f64; n])
    }

    /// Point mass on coordinate `i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(i < n);
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    /// Skips validation; callers guarantee feasibility by construction.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Smallest coordinate; used for interior checks.
    pub fn min_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A zero-sum direction in the simplex tangent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TangentVector(Vec<f64>);

impl TangentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("tangent vector must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tangent vector entry".into()));
        }
        let sum: f64 = values.iter().sum();
        if sum.abs() > FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "tangent vector sums to {sum:e} instead of 0"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }
}

/// A point of the product simplex Δ₁ × … × Δ_m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductPoint {
    blocks: Vec<SimplexPoint>,
}

impl ProductPoint {
    pub fn new(blocks: Vec<SimplexPoint>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Dimension("product point needs at least one block".into()));
        }
        Ok(Self { blocks })
    }

    pub fn single(point: SimplexPoint) -> Self {
        Self { blocks: vec![point] }
    }

    pub fn uniform(dims: &[usize]) -> Self {
        Self {
            blocks: dims.iter().map(|&n| SimplexPoint::uniform(n)).collect(),
        }
    }

    /// Splits a flat vector according to `dims` and validates every block.
    pub fn from_flat(dims: &[usize], values: &[f64]) -> Result<Self> {
        check_dims(dims, values.len())?;
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(dims.len());
        for &n in dims {
            blocks.push(SimplexPoint::new(values[offset..offset + n].to_vec())?);
            offset += n;
        }
        Self::new(blocks)
    }

    pub(crate) fn from_flat_unchecked(dims: &[usize], values: &[f64]) -> Self {
        let mut offset = 0;
        let blocks = dims
            .iter()
            .map(|&n| {
                let b = SimplexPoint::from_raw(values[offset..offset + n].to_vec());
                offset += n;
                b
            })
            .collect();
        Self { blocks }
    }

    pub fn blocks(&self) -> &[SimplexPoint] {
        &self.blocks
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(SimplexPoint::len).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(SimplexPoint::len).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.as_slice().iter().copied())
            .collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.blocks
            .iter()
            .map(SimplexPoint::min_entry)
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean distance over the flattened coordinates.
    pub fn distance(&self, other: &ProductPoint) -> f64 {
        let a = self.to_flat();
        let b = other.to_flat();
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<SimplexPoint> for ProductPoint {
    fn from(p: SimplexPoint) -> Self {
        Self::single(p)
    }
}

pub(crate) fn check_dims(dims: &[usize], total: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Dimension(format!("invalid block dimensions {dims:?}")));
    }
    let n: usize = dims.iter().sum();
    if n != total {
        return Err(Error::Dimension(format!(
            "block dimensions {dims:?} sum to {n}, but vector has length {total}"
        )));
    }
    Ok(())
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Orthogonal projection onto the zero-sum subspace: `v - mean(v)·1`.
pub fn project_tangent(v: &[f64]) -> Result<TangentVector> {
    if v.is_empty() {
        return Err(Error::Dimension("cannot project an empty vector".into()));
    }
    let mut out = v.to_vec();
    center_in_place(&mut out);
    Ok(TangentVector(out))
}

/// Blockwise tangent projection on a product simplex.
pub fn project_block_tangent(dims: &[usize], v: &[f64]) -> Result<Vec<f64>> {
    check_dims(dims, v.len())?;
    let mut out = v.to_vec();
    let mut offset = 0;
    for &n in dims {
        center_in_place(&mut out[offset..offset + n]);
        offset += n;
    }
    Ok(out)
}

pub(crate) fn center_in_place(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Result<SimplexPoint> {
    if z.is_empty() {
        return Err(Error::Dimension("softmax of an empty vector".into()));
    }
    if let Some(v) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("softmax input {v}")));
    }
    let mut out = vec![0.0; z.len()];
    softmax_into(z, &mut out);
    Ok(SimplexPoint(out))
}

/// Softmax into a preallocated buffer. Inputs must be finite.
pub(crate) fn softmax_into(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = (zi - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// The categorical covariance `Diag(p) - p pᵀ`, which is also the Jacobian
/// of softmax at any `z` with `softmax(z) = p`.
pub fn softmax_covariance(p: &SimplexPoint) -> DMatrix<f64> {
    let p = p.as_slice();
    let n = p.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { p[i] } else { 0.0 };
        d - p[i] * p[j]
    })
}

/// Block-diagonal covariance over a product point.
pub fn block_softmax_covariance(x: &ProductPoint) -> DMatrix<f64> {
    let n = x.total_dim();
    let mut out = DMatrix::zeros(n, n);
    let mut offset = 0;
    for block in x.blocks() {
        let k = block.len();
        out.view_mut((offset, offset), (k, k))
            .copy_from(&softmax_covariance(block));
        offset += k;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projection_examples() {
        let c = project_tangent(&[4.2; 5]).unwrap();
        assert!(c.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(project_tangent(&[1.0, -1.0]).unwrap().as_slice(), &[1.0, -1.0]);
        let p = project_tangent(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, -1.0, 0.0]);
        let pp = project_tangent(p.as_slice()).unwrap();
        assert_eq!(pp, p);
        assert!(matches!(project_tangent(&[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[0.0; 4]).unwrap();
        assert!(u.as_slice().iter().all(|&x| x == 0.25));

        let z = [0.3, -1.2, 2.5];
        let shifted: Vec<f64> = z.iter().map(|x| x + 7.0).collect();
        let a = softmax(&z).unwrap();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }

        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        let naive = [2.0 / 3.0, 1.0 / 3.0];
        assert_abs_diff_eq!(p.as_slice()[0], naive[0], epsilon = 1e-15);
        assert_abs_diff_eq!(p.as_slice()[1], naive[1], epsilon = 1e-15);

        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn softmax_large_inputs_stay_feasible() {
        let p = softmax(&[1e3, -1e3, 999.0, 0.0]).unwrap();
        SimplexPoint::new(p.into_inner()).unwrap();
    }

    #[test]
    fn covariance_examples() {
        let half = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let s = softmax_covariance(&half);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]));
        let norm = s.symmetric_eigen().eigenvalues.amax();
        assert_abs_diff_eq!(norm, 0.5, epsilon = 1e-15);

        let vertex = SimplexPoint::vertex(2, 0);
        assert_eq!(softmax_covariance(&vertex), DMatrix::zeros(2, 2));
    }

    #[test]
    fn covariance_annihilates_ones() {
        let p = SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let s = softmax_covariance(&p);
        let row_sums = s.column_sum();
        assert!(row_sums.iter().all(|r| r.abs() < 1e-16));
    }

    #[test]
    fn feasibility_is_strict() {
        assert!(SimplexPoint::new(vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(SimplexPoint::new(vec![1.0 + 1e-10, -1e-10]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
        assert!(TangentVector::new(vec![1.0, -0.5]).is_err());
        let n = SimplexPoint::normalize(&[2.0, -1.0, 6.0]).unwrap();
        assert_eq!(n.as_slice(), &[0.25, 0.0, 0.75]);
        assert!(SimplexPoint::normalize(&[-1.0, 0.0]).is_err());
    }

    #[test]
    fn product_point_round_trip() {
        let x = ProductPoint::from_flat(&[2, 3], &[0.5, 0.5, 0.2, 0.3, 0.5]).unwrap();
        assert_eq!(x.dims(), vec![2, 3]);
        assert_eq!(x.to_flat(), vec![0.5, 0.5, 0.2, 0.3, 0.5]);
        assert!(ProductPoint::from_flat(&[2, 2], &[0.5, 0.5, 0.2]).is_err());
        assert!(ProductPoint::from_flat(&[2, 2], &[0.5, 0.5, 0.2, 0.7]).is_err());
        let v = project_block_tangent(&[2, 3], &[1.0, 3.0, 1.0, 1.0, 4.0]).unwrap();
        assert_eq!(v, vec![-1.0, 1.0, -1.0, -1.0, 2.0]);
    }
}
