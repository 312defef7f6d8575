//! Named example systems and random instance families.
//!
//! All randomness goes through [`SeedSpec`], which seeds a ChaCha8 stream
//! cipher generator (`seed` as the key, `stream` as the stream id). Identical
//! specs reproduce identical instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ProductPoint, SimplexPoint};
use crate::system::AffineLogitSystem;

/// Deterministic seed: a 64-bit key plus a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// The two-action system `W = [[0, −1], [−1, 0]]`, `b = 0`.
pub fn pitchfork_system(beta: f64) -> Result<AffineLogitSystem> {
    AffineLogitSystem::single(
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]),
        DVector::zeros(2),
        beta,
    )
}

/// Point `((1+m)/2, (1−m)/2)` of the two-action simplex.
pub fn pitchfork_point(m: f64) -> Result<ProductPoint> {
    if !(-1.0..=1.0).contains(&m) {
        return Err(Error::Infeasible(format!("imbalance {m} outside [-1, 1]")));
    }
    Ok(ProductPoint::single(SimplexPoint::new(vec![
        (1.0 + m) / 2.0,
        (1.0 - m) / 2.0,
    ])?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        }
    }
}

/// A root of `m = tanh(βm/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PitchforkRoot {
    pub m: f64,
    pub stability: Stability,
}

/// Lower end of the positive-root bracket.
pub const PITCHFORK_BRACKET_FLOOR: f64 = 1e-15;

/// All fixed points of `m = tanh(βm/2)` on [−1, 1], sorted ascending.
///
/// `m = 0` is always a root. For `β > 2` there is exactly one positive root,
/// found by bisection on `g(m) = tanh(βm/2) − m` over `(1e−15, 1)`; bisection
/// stops once the bracket is narrower than `tol` or cannot shrink further.
/// Stability follows the sign of `g'`; at `β = 2` the origin is still
/// globally attracting and is labelled stable.
pub fn solve_pitchfork(beta: f64, tol: f64) -> Result<Vec<PitchforkRoot>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Precondition(format!("β must be positive, got {beta}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let a = beta / 2.0;
    if a <= 1.0 {
        return Ok(vec![PitchforkRoot {
            m: 0.0,
            stability: Stability::Stable,
        }]);
    }
    let g = |m: f64| (a * m).tanh() - m;
    let (mut lo, mut hi) = (PITCHFORK_BRACKET_FLOOR, 1.0);
    if g(lo) <= 0.0 {
        // β so close to 2 that the root is below the bracket floor.
        return Ok(vec![PitchforkRoot {
            m: 0.0,
            stability: Stability::Stable,
        }]);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    let slope = |m: f64| a / (a * m).cosh().powi(2) - 1.0;
    let label = |m: f64| {
        if slope(m) < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    };
    Ok(vec![
        PitchforkRoot {
            m: -root,
            stability: label(root),
        },
        PitchforkRoot {
            m: 0.0,
            stability: Stability::Unstable,
        },
        PitchforkRoot {
            m: root,
            stability: label(root),
        },
    ])
}

/// Fixed points of the two-action model over a β grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitchforkDiagram {
    pub beta_grid: Vec<f64>,
    pub fixed_points: Vec<Vec<PitchforkRoot>>,
}

impl PitchforkDiagram {
    pub fn compute(beta_grid: Vec<f64>, tol: f64) -> Result<Self> {
        let fixed_points = beta_grid
            .iter()
            .map(|&b| solve_pitchfork(b, tol))
            .collect::<Result<_>>()?;
        Ok(Self {
            beta_grid,
            fixed_points,
        })
    }

    pub fn counts(&self) -> Vec<usize> {
        self.fixed_points.iter().map(Vec::len).collect()
    }
}

/// `steps + 1` evenly spaced points from `lo` to `hi`, computed as
/// `(lo·(steps−i) + hi·i)/steps` so grid points that are integers in exact
/// arithmetic (such as β = 2) land on them exactly.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![lo];
    }
    let s = steps as f64;
    (0..=steps)
        .map(|i| {
            let i = i as f64;
            (lo * (s - i) + hi * i) / s
        })
        .collect()
}

/// Sylvester Hadamard matrix of order `m` (a power of two):
/// `H[a][b] = (−1)^{popcount(a & b)}`.
pub fn sylvester_hadamard(m: usize) -> Result<DMatrix<f64>> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::Precondition(format!(
            "Sylvester construction needs a power of two, got {m}"
        )));
    }
    Ok(DMatrix::from_fn(m, m, |a, b| {
        if (a & b).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }))
}

/// `uuᵀ` for `u = (1, −1)/√2`, built exactly.
fn binary_tangent_outer() -> [[f64; 2]; 2] {
    [[0.5, -0.5], [-0.5, 0.5]]
}

/// `m` binary blocks with `Wᵃᵇ = (α/√m)·H[a][b]·uuᵀ`, unit temperatures and
/// zero bias. Tangent norm `α`, block influence radius `α√m/2`.
pub fn hadamard_separation(m: usize, alpha: f64) -> Result<AffineLogitSystem> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Precondition(format!("α must be positive, got {alpha}")));
    }
    let h = sylvester_hadamard(m)?;
    let uu = binary_tangent_outer();
    let scale = alpha / (m as f64).sqrt();
    let w = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        scale * h[(i / 2, j / 2)] * uu[i % 2][j % 2]
    });
    AffineLogitSystem::new(vec![2; m], w, DVector::zeros(2 * m), vec![1.0; m])
}

/// `m` binary blocks with `Wᵃᵇ = c·uuᵀ` for `a < b` and zero otherwise.
/// The block influence matrix is strictly upper triangular, so its spectral
/// radius is zero, while the tangent norm grows with `c`.
pub fn upper_triangular_counterexample(m: usize, c: f64) -> Result<AffineLogitSystem> {
    if m < 2 {
        return Err(Error::Precondition(format!("need at least two blocks, got {m}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Precondition(format!("coupling must be positive, got {c}")));
    }
    let uu = binary_tangent_outer();
    let w = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        if i / 2 < j / 2 {
            c * uu[i % 2][j % 2]
        } else {
            0.0
        }
    });
    AffineLogitSystem::new(vec![2; m], w, DVector::zeros(2 * m), vec![1.0; m])
}

/// Random single-simplex families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomKind {
    Gaussian,
    GaussianSymmetric,
    Shifted,
    ShiftedSymmetric,
}

impl RandomKind {
    pub const ALL: [RandomKind; 4] = [
        RandomKind::Gaussian,
        RandomKind::GaussianSymmetric,
        RandomKind::Shifted,
        RandomKind::ShiftedSymmetric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RandomKind::Gaussian => "gaussian",
            RandomKind::GaussianSymmetric => "gaussian_symmetric",
            RandomKind::Shifted => "shifted",
            RandomKind::ShiftedSymmetric => "shifted_symmetric",
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, RandomKind::GaussianSymmetric | RandomKind::ShiftedSymmetric)
    }

    pub fn is_shifted(self) -> bool {
        matches!(self, RandomKind::Shifted | RandomKind::ShiftedSymmetric)
    }
}

impl std::str::FromStr for RandomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RandomKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown random kind `{s}`")))
    }
}

/// Parameters for [`random_instance_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomOptions {
    /// Standard deviation of the shift vectors relative to `scale`.
    pub shift_rel: f64,
    /// Standard deviation of i.i.d. Normal bias entries (0 for no bias).
    pub bias_std: f64,
    pub beta: f64,
}

impl Default for RandomOptions {
    fn default() -> Self {
        Self {
            shift_rel: 3.0,
            bias_std: 0.0,
            beta: 1.0,
        }
    }
}

/// Random instance with default options: unit β, zero bias, shifts of
/// standard deviation `3·scale`.
pub fn random_instance(
    kind: RandomKind,
    n: usize,
    scale: f64,
    seed: SeedSpec,
) -> Result<AffineLogitSystem> {
    random_instance_with(kind, n, scale, seed, RandomOptions::default())
}

/// Draw order: the `n × n` Gaussian matrix (row-major), then the shift
/// vector(s), then the bias.
///
/// Unshifted kinds use `G` (symmetrized as `(G + Gᵀ)/2`). Shifted kinds use
/// `ΠGΠ + 1aᵀ + c1ᵀ` (with `c = a` in the symmetric variant), so their
/// tangent part is exactly `ΠGΠ`.
pub fn random_instance_with(
    kind: RandomKind,
    n: usize,
    scale: f64,
    seed: SeedSpec,
    opts: RandomOptions,
) -> Result<AffineLogitSystem> {
    if n < 2 {
        return Err(Error::Precondition(format!("random instances need n ≥ 2, got {n}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Precondition(format!("scale must be positive, got {scale}")));
    }
    let mut rng = seed.rng();
    let mut normal = |std: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        std * z
    };
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = normal(scale);
        }
    }
    if kind.is_symmetric() {
        g = (&g + g.transpose()) * 0.5;
    }
    let w = if kind.is_shifted() {
        let base = crate::spectral::project_both_sides(&g, &[n]);
        let shift_std = opts.shift_rel * scale;
        let a: Vec<f64> = (0..n).map(|_| normal(shift_std)).collect();
        let c: Vec<f64> = if kind.is_symmetric() {
            a.clone()
        } else {
            (0..n).map(|_| normal(shift_std)).collect()
        };
        DMatrix::from_fn(n, n, |i, j| base[(i, j)] + a[j] + c[i])
    } else {
        g
    };
    let b = if opts.bias_std > 0.0 {
        DVector::from_fn(n, |_, _| normal(opts.bias_std))
    } else {
        DVector::zeros(n)
    };
    AffineLogitSystem::single(w, b, opts.beta)
}

/// Per-block Dirichlet(1, …, 1) sample via normalized Exp(1) draws.
pub fn dirichlet_start(dims: &[usize], seed: SeedSpec) -> Result<ProductPoint> {
    crate::geometry::check_dims(dims, dims.iter().sum())?;
    let mut rng = seed.rng();
    dirichlet_with(&mut rng, dims)
}

pub(crate) fn dirichlet_with<R: Rng>(rng: &mut R, dims: &[usize]) -> Result<ProductPoint> {
    let blocks = dims
        .iter()
        .map(|&d| {
            let e: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
            let sum: f64 = e.iter().sum();
            SimplexPoint::from_raw(e.into_iter().map(|x: f64| x / sum).collect())
        })
        .collect();
    ProductPoint::new(blocks)
}
