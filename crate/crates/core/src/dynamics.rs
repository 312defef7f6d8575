//! Picard iteration `x ← F(x)` and the logit adjustment flow `ẋ = F(x) − x`,
//! with their contraction-based error envelopes.

use std::io::Write;

use serde::Serialize;

use crate::certificates;
use crate::error::{Error, Result};
use crate::geometry::{norm2, ProductPoint, FEASIBILITY_TOL};
use crate::io::fmt_f64;
use crate::system::AffineLogitSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Picard,
    Ode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    /// Step index for Picard, time for the ODE.
    pub at: f64,
    pub point: ProductPoint,
}

/// A simulated trajectory.
///
/// For Picard, `residuals[k] = ‖x_{k+1} − x_k‖` and `envelope[k]` is the
/// a-priori bound `q^k · residuals[0] / (1 − q)` on `‖x_k − x*‖`. For the ODE,
/// `residuals[k] = ‖F(x(t_k)) − x(t_k)‖` and `envelope[k]` is
/// `e^{−(1−q)t_k}·‖x(0) − x*‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub kind: TrajectoryKind,
    pub samples: Vec<Sample>,
    pub residuals: Vec<f64>,
    pub envelope: Option<Vec<f64>>,
    pub converged: bool,
    pub fixed_point: Option<ProductPoint>,
    /// Tangent contraction factor `q_new` of the system.
    pub contraction_factor: f64,
    /// `q_new < 1`, so convergence to the unique fixed point is guaranteed.
    pub guaranteed: bool,
    /// Largest simplex drift observed (ODE only); zero for Picard.
    pub max_drift: f64,
}

impl TrajectoryRecord {
    /// CSV with columns `step_or_time, x_<block>_<i>…, residual, envelope`.
    /// Empty cells mark values that are not available for a row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let dims = self
            .samples
            .first()
            .map(|s| s.point.dims())
            .unwrap_or_default();
        let mut header = vec!["step_or_time".to_string()];
        for (a, &d) in dims.iter().enumerate() {
            for i in 0..d {
                header.push(format!("x_{a}_{i}"));
            }
        }
        header.push("residual".into());
        header.push("envelope".into());
        wtr.write_record(&header)?;
        for (k, s) in self.samples.iter().enumerate() {
            let mut row = Vec::with_capacity(header.len());
            row.push(match self.kind {
                TrajectoryKind::Picard => format!("{}", s.at as u64),
                TrajectoryKind::Ode => fmt_f64(s.at),
            });
            row.extend(s.point.to_flat().into_iter().map(fmt_f64));
            row.push(self.residuals.get(k).map(|&r| fmt_f64(r)).unwrap_or_default());
            row.push(
                self.envelope
                    .as_ref()
                    .and_then(|e| e.get(k))
                    .map(|&v| fmt_f64(v))
                    .unwrap_or_default(),
            );
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
    }
}

fn check_start(system: &AffineLogitSystem, x0: &ProductPoint) -> Result<()> {
    if x0.dims() != system.block_dims() {
        return Err(Error::Dimension(format!(
            "start has block dimensions {:?}, system expects {:?}",
            x0.dims(),
            system.block_dims()
        )));
    }
    Ok(())
}

/// Picard iteration with the contraction-aware stopping rule.
///
/// When `q_new < 1` iteration stops once `‖x_{k+1} − x_k‖ ≤ tol·(1 − q)`, which
/// certifies `‖x_{k+1} − x*‖ ≤ tol`; otherwise it stops at raw residual `tol`.
/// Exhausting `max_iter` yields `converged = false`.
pub fn picard(
    system: &AffineLogitSystem,
    x0: &ProductPoint,
    max_iter: usize,
    tol: f64,
) -> Result<TrajectoryRecord> {
    let q = certificates::certify_contraction(system)?.q_new;
    picard_with_factor(system, x0, max_iter, tol, q)
}

/// [`picard`] with a precomputed contraction factor.
pub fn picard_with_factor(
    system: &AffineLogitSystem,
    x0: &ProductPoint,
    max_iter: usize,
    tol: f64,
    q: f64,
) -> Result<TrajectoryRecord> {
    check_start(system, x0)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let guaranteed = q < 1.0;
    let threshold = if guaranteed { tol * (1.0 - q) } else { tol };
    let dims = system.block_dims().to_vec();
    let mut x = x0.to_flat();
    let mut samples = vec![Sample {
        at: 0.0,
        point: x0.clone(),
    }];
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut next = vec![0.0; x.len()];
    for k in 0..max_iter {
        system.response_into(&x, &mut next);
        let r = diff_norm(&next, &x);
        residuals.push(r);
        std::mem::swap(&mut x, &mut next);
        samples.push(Sample {
            at: (k + 1) as f64,
            point: ProductPoint::from_flat_unchecked(&dims, &x),
        });
        if r <= threshold {
            converged = true;
            break;
        }
    }
    let envelope = (guaranteed && !residuals.is_empty()).then(|| {
        let r0 = residuals[0];
        (0..samples.len())
            .map(|k| q.powi(k as i32) * r0 / (1.0 - q))
            .collect()
    });
    let fixed_point = converged.then(|| samples.last().unwrap().point.clone());
    Ok(TrajectoryRecord {
        kind: TrajectoryKind::Picard,
        samples,
        residuals,
        envelope,
        converged,
        fixed_point,
        contraction_factor: q,
        guaranteed,
        max_drift: 0.0,
    })
}

/// Settings for [`logit_ode`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeOptions {
    pub t_end: f64,
    pub dt: f64,
    /// The run counts as converged when `‖F(x) − x‖ ≤ tol` at `t_end`.
    pub tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            t_end: 50.0,
            dt: 0.01,
            tol: 1e-8,
        }
    }
}

/// Fixed-step classical RK4 for `ẋ = F(x) − x`.
///
/// After each step the state is checked against the simplex; if the sum or
/// sign drift exceeds 1e−12 it is clamped at zero and rescaled, and the drift
/// is recorded. When `q_new < 1` the fixed point is computed by Picard and the
/// exponential envelope is attached.
pub fn logit_ode(
    system: &AffineLogitSystem,
    x0: &ProductPoint,
    opts: OdeOptions,
) -> Result<TrajectoryRecord> {
    check_start(system, x0)?;
    let OdeOptions { t_end, dt, tol } = opts;
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::StepSize { dt });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Precondition(format!("t_end must be finite and ≥ 0, got {t_end}")));
    }
    let q = certificates::certify_contraction(system)?.q_new;
    let guaranteed = q < 1.0;
    let dims = system.block_dims().to_vec();
    let n = system.dim();

    let field = |x: &[f64], out: &mut [f64]| {
        system.response_into(x, out);
        out.iter_mut().zip(x).for_each(|(o, xi)| *o -= xi);
    };

    let steps = (t_end / dt).round() as usize;
    let mut x = x0.to_flat();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut residuals = Vec::with_capacity(steps + 1);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut max_drift = 0.0f64;

    field(&x, &mut k1);
    samples.push(Sample { at: 0.0, point: x0.clone() });
    residuals.push(norm2(&k1));
    for step in 1..=steps {
        field(&x, &mut k1);
        axpy_into(&x, 0.5 * dt, &k1, &mut tmp);
        field(&tmp, &mut k2);
        axpy_into(&x, 0.5 * dt, &k2, &mut tmp);
        field(&tmp, &mut k3);
        axpy_into(&x, dt, &k3, &mut tmp);
        field(&tmp, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        max_drift = max_drift.max(restore_feasibility(&mut x, &dims));
        field(&x, &mut k1);
        residuals.push(norm2(&k1));
        samples.push(Sample {
            at: step as f64 * dt,
            point: ProductPoint::from_flat_unchecked(&dims, &x),
        });
    }

    let final_point = samples.last().unwrap().point.clone();
    let converged = residuals.last().is_some_and(|&r| r <= tol);
    let envelope = if guaranteed {
        let star = picard_with_factor(system, x0, 100_000, 1e-13, q)?;
        star.fixed_point.map(|xs| {
            let d0 = x0.distance(&xs);
            samples
                .iter()
                .map(|s| (-(1.0 - q) * s.at).exp() * d0)
                .collect()
        })
    } else {
        None
    };
    Ok(TrajectoryRecord {
        kind: TrajectoryKind::Ode,
        samples,
        residuals,
        envelope,
        converged,
        fixed_point: converged.then_some(final_point),
        contraction_factor: q,
        guaranteed,
        max_drift,
    })
}

fn axpy_into(x: &[f64], a: f64, k: &[f64], out: &mut [f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

/// Returns the drift measured before any correction. Corrects only when the
/// drift exceeds [`FEASIBILITY_TOL`].
fn restore_feasibility(x: &mut [f64], dims: &[usize]) -> f64 {
    let mut offset = 0;
    let mut worst = 0.0f64;
    for &d in dims {
        let block = &mut x[offset..offset + d];
        let sum: f64 = block.iter().sum();
        let neg = block.iter().copied().fold(0.0f64, |acc, v| acc.max(-v));
        let drift = (sum - 1.0).abs().max(neg);
        worst = worst.max(drift);
        if drift > FEASIBILITY_TOL {
            block.iter_mut().for_each(|v| *v = v.max(0.0));
            let s: f64 = block.iter().sum();
            block.iter_mut().for_each(|v| *v /= s);
        }
        offset += d;
    }
    worst
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-step diameter of a cloud of Picard iterates run in lockstep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseSeries {
    /// `diameters[k]` is the maximum pairwise distance after `k` steps.
    pub diameters: Vec<f64>,
    pub contraction_factor: f64,
    pub converged: bool,
}

/// Runs Picard from every start simultaneously and records the maximum
/// pairwise Euclidean distance per step. Stops after `max_iter` steps or once
/// the diameter is at most `tol`. A single start gives an all-zero series.
pub fn multi_start_collapse(
    system: &AffineLogitSystem,
    starts: &[ProductPoint],
    max_iter: usize,
    tol: f64,
) -> Result<CollapseSeries> {
    let q = certificates::certify_contraction(system)?.q_new;
    multi_start_collapse_with_factor(system, starts, max_iter, tol, q)
}

pub fn multi_start_collapse_with_factor(
    system: &AffineLogitSystem,
    starts: &[ProductPoint],
    max_iter: usize,
    tol: f64,
    q: f64,
) -> Result<CollapseSeries> {
    if starts.is_empty() {
        return Err(Error::Precondition("multi-start collapse needs at least one start".into()));
    }
    for s in starts {
        check_start(system, s)?;
    }
    let mut points: Vec<Vec<f64>> = starts.iter().map(ProductPoint::to_flat).collect();
    let mut diameters = vec![diameter(&points)];
    let mut converged = diameters[0] <= tol;
    let mut buf = vec![0.0; system.dim()];
    for _ in 0..max_iter {
        if converged {
            break;
        }
        for p in points.iter_mut() {
            system.response_into(p, &mut buf);
            p.copy_from_slice(&buf);
        }
        let d = diameter(&points);
        diameters.push(d);
        converged = d <= tol;
    }
    Ok(CollapseSeries {
        diameters,
        contraction_factor: q,
        converged,
    })
}

fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max(diff_norm(&points[i], &points[j]));
        }
    }
    best
}
