//! Reproducible experiment drivers behind the CLI: the two-action phase
//! diagram, the Hadamard separation sweep, certificate-gain statistics and
//! Picard collapse in the newly certified regime.
//!
//! Batch work may run in parallel (feature `parallel`); results are always
//! collected in index order, so every CSV is byte-identical across runs.

use serde::Serialize;

use crate::certificates::{self, Verdict};
use crate::dynamics::{self, CollapseSeries};
use crate::error::{Error, Result};
use crate::instances::{self, PitchforkDiagram, RandomKind, RandomOptions, SeedSpec};
use crate::io::fmt_f64;
use crate::spectral;

/// Environment variable that caps the worker thread count.
pub const THREADS_ENV: &str = "SOFTMAX_STABILITY_THREADS";

/// Ordered parallel map.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0);
    match threads.and_then(|t| rayon::ThreadPoolBuilder::new().num_threads(t).build().ok()) {
        Some(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
        None => items.into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
}

// ---------------------------------------------------------------------------
// Two-action phase diagram

/// Columns `beta, m, stability`; the last two rows mark the classical (β = 1)
/// and tangent (β = 2) thresholds with an empty `m`.
pub fn pitchfork_csv(diagram: &PitchforkDiagram) -> Result<String> {
    let mut rows = Vec::new();
    for (beta, roots) in diagram.beta_grid.iter().zip(&diagram.fixed_points) {
        for r in roots {
            rows.push(vec![fmt_f64(*beta), fmt_f64(r.m), r.stability.as_str().to_string()]);
        }
    }
    rows.push(vec![fmt_f64(1.0), String::new(), "threshold_old".into()]);
    rows.push(vec![fmt_f64(2.0), String::new(), "threshold_new".into()]);
    csv_string(&["beta", "m", "stability"], rows)
}

// ---------------------------------------------------------------------------
// Hadamard separation

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationRow {
    pub m: usize,
    pub q_l2: f64,
    pub rho_c: f64,
    pub euclidean: Verdict,
    pub dobrushin: Verdict,
}

/// Certificates of the Hadamard construction for `m = 1, 2, 4, …, max_blocks`.
pub fn separation(max_blocks: usize, alpha: f64) -> Result<Vec<SeparationRow>> {
    if max_blocks == 0 {
        return Err(Error::Precondition("max_blocks must be at least 1".into()));
    }
    let sizes: Vec<usize> = std::iter::successors(Some(1usize), |m| m.checked_mul(2))
        .take_while(|&m| m <= max_blocks)
        .collect();
    par_map(sizes, |m| {
        let sys = instances::hadamard_separation(m, alpha)?;
        let c = certificates::certify_contraction(&sys)?;
        let d = certificates::certify_dobrushin(&sys)?;
        Ok(SeparationRow {
            m,
            q_l2: c.q_new,
            rho_c: d.rho,
            euclidean: c.contraction,
            dobrushin: d.verdict,
        })
    })
    .into_iter()
    .collect()
}

pub fn separation_csv(rows: &[SeparationRow]) -> Result<String> {
    csv_string(
        &["m", "q_l2", "rho_C"],
        rows.iter()
            .map(|r| vec![r.m.to_string(), fmt_f64(r.q_l2), fmt_f64(r.rho_c)]),
    )
}

// ---------------------------------------------------------------------------
// Certificate gain

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainRow {
    pub kind: RandomKind,
    pub seed: u64,
    pub norm_ambient: f64,
    pub norm_tangent: f64,
    pub gain: f64,
}

/// Draw `d` of every kind uses `SeedSpec { seed: base_seed + d, stream: 0 }`,
/// so shifted and unshifted kinds share their Gaussian core.
pub fn gain(n: usize, draws: usize, kinds: &[RandomKind], base_seed: u64) -> Result<Vec<GainRow>> {
    let jobs: Vec<(RandomKind, u64)> = kinds
        .iter()
        .flat_map(|&k| (0..draws as u64).map(move |d| (k, base_seed.wrapping_add(d))))
        .collect();
    par_map(jobs, |(kind, seed)| {
        let sys = instances::random_instance(kind, n, 1.0, SeedSpec::new(seed, 0))?;
        let r = certificates::certified_beta_range(&sys)?;
        Ok(GainRow {
            kind,
            seed,
            norm_ambient: r.ambient_norm,
            norm_tangent: r.tangent_norm,
            gain: r.gain,
        })
    })
    .into_iter()
    .collect()
}

pub fn gain_csv(rows: &[GainRow]) -> Result<String> {
    csv_string(
        &["kind", "seed", "norm_ambient", "norm_tangent", "gain"],
        rows.iter().map(|r| {
            vec![
                r.kind.as_str().to_string(),
                r.seed.to_string(),
                fmt_f64(r.norm_ambient),
                fmt_f64(r.norm_tangent),
                fmt_f64(r.gain),
            ]
        }),
    )
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

// ---------------------------------------------------------------------------
// Newly certified convergence

/// First stream id used for Dirichlet starts; instance streams count up from 0.
pub const START_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewlyCertifiedConfig {
    pub instances: usize,
    pub n: usize,
    pub starts: usize,
    pub beta_frac: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Collapse stops once the diameter is at most this value.
    pub tol: f64,
    pub scale: f64,
    /// Shift standard deviation relative to `scale`.
    pub shift_rel: f64,
    pub bias_std: f64,
}

impl Default for NewlyCertifiedConfig {
    fn default() -> Self {
        Self {
            instances: 12,
            n: 20,
            starts: 10,
            beta_frac: 0.72,
            seed: 0,
            max_iter: 200,
            tol: 1e-14,
            scale: 1.0,
            shift_rel: 3.0,
            bias_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub instance: usize,
    pub stream: u64,
    pub beta_old: f64,
    pub beta: f64,
    pub beta_new: f64,
    pub q_new: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewlyCertified {
    pub thresholds: Vec<ThresholdRow>,
    pub series: Vec<CollapseSeries>,
    /// Streams skipped because `β` did not land strictly inside the gap.
    pub regenerated: usize,
}

/// Shifted non-symmetric instances run at `β = beta_frac · β_new`.
///
/// Instance `i` is drawn from the next unused stream; a draw for which
/// `β ≤ β_old` or `β ≥ β_new` is discarded and the following stream is tried.
pub fn newly_certified(cfg: &NewlyCertifiedConfig) -> Result<NewlyCertified> {
    if cfg.beta_frac.is_nan() || cfg.beta_frac <= 0.0 {
        return Err(Error::Precondition("beta_frac must be positive".into()));
    }
    let opts = RandomOptions {
        shift_rel: cfg.shift_rel,
        bias_std: cfg.bias_std,
        beta: 1.0,
    };
    let mut systems = Vec::with_capacity(cfg.instances);
    let mut stream = 0u64;
    let mut regenerated = 0;
    while systems.len() < cfg.instances {
        let base = instances::random_instance_with(
            RandomKind::Shifted,
            cfg.n,
            cfg.scale,
            SeedSpec::new(cfg.seed, stream),
            opts,
        )?;
        let range = certificates::certified_beta_range(&base)?;
        let beta = cfg.beta_frac * range.beta_new;
        if beta.is_finite() && beta > range.beta_old && beta < range.beta_new {
            systems.push((systems.len(), stream, base.with_uniform_beta(beta)?, range, beta));
        } else {
            regenerated += 1;
            if regenerated > 1000 {
                return Err(Error::Precondition(format!(
                    "beta_frac {} never lands strictly between the thresholds",
                    cfg.beta_frac
                )));
            }
        }
        stream += 1;
    }
    let results: Vec<Result<(ThresholdRow, CollapseSeries)>> =
        par_map(systems, |(i, stream, sys, range, beta)| {
            let starts = (0..cfg.starts)
                .map(|j| {
                    let s = SeedSpec::new(cfg.seed, START_STREAM_BASE + (i * cfg.starts + j) as u64);
                    instances::dirichlet_start(sys.block_dims(), s)
                })
                .collect::<Result<Vec<_>>>()?;
            let q_new = 0.5 * spectral::block_tangent_norm(&sys, true)?;
            let series = if starts.is_empty() {
                CollapseSeries {
                    diameters: vec![0.0],
                    contraction_factor: q_new,
                    converged: true,
                }
            } else {
                dynamics::multi_start_collapse_with_factor(&sys, &starts, cfg.max_iter, cfg.tol, q_new)?
            };
            Ok((
                ThresholdRow {
                    instance: i,
                    stream,
                    beta_old: range.beta_old,
                    beta,
                    beta_new: range.beta_new,
                    q_new,
                },
                series,
            ))
        });
    let mut thresholds = Vec::with_capacity(results.len());
    let mut series = Vec::with_capacity(results.len());
    for r in results {
        let (t, s) = r?;
        thresholds.push(t);
        series.push(s);
    }
    Ok(NewlyCertified {
        thresholds,
        series,
        regenerated,
    })
}

pub fn thresholds_csv(result: &NewlyCertified) -> Result<String> {
    csv_string(
        &["instance", "beta_old", "beta", "beta_new"],
        result.thresholds.iter().map(|t| {
            vec![
                t.instance.to_string(),
                fmt_f64(t.beta_old),
                fmt_f64(t.beta),
                fmt_f64(t.beta_new),
            ]
        }),
    )
}

pub fn diameters_csv(result: &NewlyCertified) -> Result<String> {
    let rows = result.series.iter().enumerate().flat_map(|(i, s)| {
        s.diameters
            .iter()
            .enumerate()
            .map(move |(k, d)| vec![i.to_string(), k.to_string(), fmt_f64(*d)])
    });
    csv_string(&["instance", "step", "diameter"], rows)
}
