//! Browser bindings for the interactive demo in `www/`.
//!
//! Every operation is a plain function returning JSON text so it can be
//! exercised natively; the `#[wasm_bindgen]` wrappers only convert errors.

use serde::Serialize;
use softmax_stability::dynamics::{self, OdeOptions};
use softmax_stability::experiments::{self, SeparationRow};
use softmax_stability::instances::{self, PitchforkDiagram, PitchforkRoot};
use softmax_stability::io as sio;
use softmax_stability::{certificates, CertificateReport, ProductPoint};
use softmax_stability::system::Diagnostics;
use wasm_bindgen::prelude::*;

const DIAGRAM_BETA_MAX: f64 = 4.0;
const DIAGRAM_STEPS: usize = 160;
const PICARD_STEPS: usize = 60;
const ODE_T_END: f64 = 20.0;
const ODE_DT: f64 = 0.02;
const ODE_STRIDE: usize = 5;

type Json = Result<String, String>;

fn to_json<T: Serialize>(value: &T) -> Json {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn err(e: softmax_stability::Error) -> String {
    e.to_string()
}

fn imbalance(x: &ProductPoint) -> f64 {
    let p = x.blocks()[0].as_slice();
    p[0] - p[1]
}

#[derive(Serialize)]
struct DiagramPoint {
    beta: f64,
    m: f64,
    stable: bool,
}

/// Fixed points of `m = tanh(βm/2)` on a grid `0 < β ≤ 4`, flattened for
/// scatter plotting.
pub fn pitchfork_diagram_json() -> Json {
    let grid: Vec<f64> = (1..=DIAGRAM_STEPS)
        .map(|i| DIAGRAM_BETA_MAX * i as f64 / DIAGRAM_STEPS as f64)
        .collect();
    let d = PitchforkDiagram::compute(grid, 1e-15).map_err(err)?;
    let points: Vec<DiagramPoint> = d
        .beta_grid
        .iter()
        .zip(&d.fixed_points)
        .flat_map(|(&beta, roots)| {
            roots.iter().map(move |r| DiagramPoint {
                beta,
                m: r.m,
                stable: r.stability == instances::Stability::Stable,
            })
        })
        .collect();
    to_json(&points)
}

#[derive(Serialize)]
struct PitchforkRun {
    beta: f64,
    q_old: f64,
    q_new: f64,
    roots: Vec<PitchforkRoot>,
    /// `m_k` for the first Picard steps.
    picard: Vec<f64>,
    /// `(t, m(t))` for the logit ODE.
    ode: Vec<(f64, f64)>,
    /// `e^{−(1−β/2)t}|m₀|` when `β < 2`.
    envelope: Option<Vec<(f64, f64)>>,
}

/// Certificates, fixed points and both trajectories of the two-action model
/// started at imbalance `m0`.
pub fn pitchfork_run_json(beta: f64, m0: f64) -> Json {
    let sys = instances::pitchfork_system(beta).map_err(err)?;
    let x0 = instances::pitchfork_point(m0).map_err(err)?;
    let cert = certificates::certify_contraction(&sys).map_err(err)?;
    let roots = instances::solve_pitchfork(beta, 1e-15).map_err(err)?;
    let picard = dynamics::picard_with_factor(&sys, &x0, PICARD_STEPS, 1e-300, cert.q_new)
        .map_err(err)?
        .samples
        .iter()
        .map(|s| imbalance(&s.point))
        .collect();
    let opts = OdeOptions { t_end: ODE_T_END, dt: ODE_DT, tol: 1e-8 };
    let ode: Vec<(f64, f64)> = dynamics::logit_ode(&sys, &x0, opts)
        .map_err(err)?
        .samples
        .iter()
        .step_by(ODE_STRIDE)
        .map(|s| (s.at, imbalance(&s.point)))
        .collect();
    let envelope = (beta < 2.0).then(|| {
        ode.iter()
            .map(|&(t, _)| (t, (-(1.0 - beta / 2.0) * t).exp() * m0.abs()))
            .collect()
    });
    to_json(&PitchforkRun {
        beta,
        q_old: cert.q_old,
        q_new: cert.q_new,
        roots,
        picard,
        ode,
        envelope,
    })
}

#[derive(Serialize)]
struct CertifyOutput {
    report: CertificateReport,
    diagnostics: Diagnostics,
}

/// Full certificate report for a system in the JSON file format.
pub fn certify_json(system: &str) -> Json {
    let sys = sio::parse_system(system).map_err(err)?;
    let report = certificates::certify(&sys).map_err(err)?;
    to_json(&CertifyOutput { report, diagnostics: sys.validate() })
}

/// A named example system as editable JSON: `pitchfork`, `hadamard8`,
/// `upper_triangular` or `zero`.
pub fn example_system_json(name: &str, beta: f64) -> Json {
    let sys = match name {
        "pitchfork" => instances::pitchfork_system(beta),
        "hadamard8" => instances::hadamard_separation(8, beta),
        "upper_triangular" => instances::upper_triangular_counterexample(2, 5.0 * beta),
        "zero" => sio::parse_system(r#"{"block_dims":[3],"beta":[1],"W":[[0,0,0],[0,0,0],[0,0,0]],"b":[0,0,0]}"#),
        other => return Err(format!("unknown example `{other}`")),
    }
    .map_err(err)?;
    Ok(sio::system_to_json(&sys))
}

/// Hadamard separation rows for `m = 1, 2, 4, …, max_blocks`.
pub fn separation_json(max_blocks: usize, alpha: f64) -> Json {
    let rows: Vec<SeparationRow> = experiments::separation(max_blocks, alpha).map_err(err)?;
    to_json(&rows)
}

fn js(r: Json) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pitchforkDiagram)]
pub fn pitchfork_diagram() -> Result<String, JsError> {
    js(pitchfork_diagram_json())
}

#[wasm_bindgen(js_name = pitchforkRun)]
pub fn pitchfork_run(beta: f64, m0: f64) -> Result<String, JsError> {
    js(pitchfork_run_json(beta, m0))
}

#[wasm_bindgen(js_name = certifySystem)]
pub fn certify_system(system: &str) -> Result<String, JsError> {
    js(certify_json(system))
}

#[wasm_bindgen(js_name = exampleSystem)]
pub fn example_system(name: &str, scale: f64) -> Result<String, JsError> {
    js(example_system_json(name, scale))
}

#[wasm_bindgen(js_name = separation)]
pub fn separation(max_blocks: usize, alpha: f64) -> Result<String, JsError> {
    js(separation_json(max_blocks, alpha))
}
