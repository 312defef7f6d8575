use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;
use softmax_stability::dynamics::{self, OdeOptions};
use softmax_stability::experiments::{self, NewlyCertifiedConfig};
use softmax_stability::geometry::{ProductPoint, SimplexPoint};
use softmax_stability::instances::{self, PitchforkDiagram, RandomOptions, SeedSpec};
use softmax_stability::io::{self as sio, SystemFile};
use softmax_stability::{certify, AffineLogitSystem, Error, Result};

use crate::{Command, Instance, Mode, NewlyCertifiedArgs, SimulateArgs};

pub enum Status {
    Done,
    NotConverged(String),
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::Certify { system, json_out } => {
            let sys = sio::read_system(&system)?;
            let report = certify(&sys)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            emit(json_out.as_deref(), &(text + "\n"))?;
            Ok(Status::Done)
        }
        Command::Simulate(args) => simulate(args),
        Command::Pitchfork { beta_min, beta_max, steps, tol, csv_out } => {
            if !(beta_min > 0.0 && beta_max >= beta_min) {
                return Err(Error::Precondition(format!(
                    "need 0 < beta-min ≤ beta-max, got {beta_min}..{beta_max}"
                )));
            }
            let grid = instances::linear_grid(beta_min, beta_max, steps);
            let diagram = PitchforkDiagram::compute(grid, tol)?;
            emit(csv_out.as_deref(), &experiments::pitchfork_csv(&diagram)?)?;
            Ok(Status::Done)
        }
        Command::Separation { max_blocks, alpha, csv_out } => {
            let rows = experiments::separation(max_blocks, alpha)?;
            emit(csv_out.as_deref(), &experiments::separation_csv(&rows)?)?;
            Ok(Status::Done)
        }
        Command::Gain { n, draws, kinds, seed, csv_out } => {
            let rows = experiments::gain(n, draws, &kinds, seed)?;
            emit(csv_out.as_deref(), &experiments::gain_csv(&rows)?)?;
            Ok(Status::Done)
        }
        Command::NewlyCertified(args) => newly_certified(args),
        Command::Generate { instance, out } => {
            let sys = generate(instance)?;
            emit(out.as_deref(), &(sio::system_to_json(&sys) + "\n"))?;
            Ok(Status::Done)
        }
    }
}

fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<Status> {
    let sys = sio::read_system(&args.system)?;
    let x0 = parse_start(&args.start, sys.block_dims())?;
    let rec = match args.mode {
        Mode::Picard => dynamics::picard(&sys, &x0, args.max_iter, args.tol)?,
        Mode::Ode => dynamics::logit_ode(
            &sys,
            &x0,
            OdeOptions { t_end: args.t_end, dt: args.dt, tol: args.tol },
        )?,
    };
    emit(args.csv_out.as_deref(), &rec.to_csv_string()?)?;
    let last = rec.residuals.last().copied().unwrap_or(0.0);
    if rec.converged {
        eprintln!(
            "converged: {} samples, final residual {last:e}, q_new = {}",
            rec.samples.len(),
            rec.contraction_factor
        );
        Ok(Status::Done)
    } else {
        Ok(Status::NotConverged(format!(
            "final residual {last:e} after {} samples (q_new = {})",
            rec.samples.len(),
            rec.contraction_factor
        )))
    }
}

fn parse_start(spec: &str, dims: &[usize]) -> Result<ProductPoint> {
    if spec == "uniform" {
        return Ok(ProductPoint::uniform(dims));
    }
    if let Some(seed) = spec.strip_prefix("dirichlet:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::Precondition(format!("bad Dirichlet seed `{seed}`")))?;
        return instances::dirichlet_start(dims, SeedSpec::new(seed, 0));
    }
    let text = if spec.trim_start().starts_with('[') {
        spec.to_string()
    } else {
        fs::read_to_string(spec).map_err(|source| Error::Read {
            path: spec.into(),
            source,
        })?
    };
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: "start".into(),
        message: e.to_string(),
    };
    if let Ok(blocks) = serde_json::from_str::<Vec<Vec<f64>>>(&text) {
        let blocks = blocks
            .into_iter()
            .map(SimplexPoint::new)
            .collect::<Result<Vec<_>>>()?;
        let point = ProductPoint::new(blocks)?;
        if point.dims() != dims {
            return Err(Error::Dimension(format!(
                "start has block dimensions {:?}, system expects {dims:?}",
                point.dims()
            )));
        }
        return Ok(point);
    }
    let flat: Vec<f64> = serde_json::from_str(&text).map_err(parse_err)?;
    ProductPoint::from_flat(dims, &flat)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}_{suffix}"))
}

fn newly_certified(args: NewlyCertifiedArgs) -> Result<Status> {
    let cfg = NewlyCertifiedConfig {
        instances: args.instances,
        n: args.n,
        starts: args.starts,
        beta_frac: args.beta_frac,
        seed: args.seed,
        max_iter: args.max_iter,
        tol: args.tol,
        scale: 1.0,
        shift_rel: args.shift_rel,
        bias_std: args.bias_std,
    };
    let result = experiments::newly_certified(&cfg)?;
    emit(args.csv_out.as_deref(), &experiments::diameters_csv(&result)?)?;

    let thresholds_out = args
        .thresholds_out
        .or_else(|| args.csv_out.as_deref().map(|p| sibling(p, "thresholds.csv")));
    if let Some(p) = &thresholds_out {
        fs::write(p, experiments::thresholds_csv(&result)?)?;
    }
    let misses: Vec<usize> = result
        .series
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.diameters.iter().any(|&d| d < args.target))
        .map(|(i, _)| i)
        .collect();
    let meta_out = args
        .meta_out
        .or_else(|| args.csv_out.as_deref().map(|p| sibling(p, "meta.json")));
    if let Some(p) = &meta_out {
        let meta = json!({
            "config": cfg,
            "target": args.target,
            "regenerated": result.regenerated,
            "thresholds": result.thresholds,
            "missed_target": misses,
        });
        fs::write(p, serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n")?;
    }
    if misses.is_empty() {
        Ok(Status::Done)
    } else {
        Ok(Status::NotConverged(format!(
            "instances {misses:?} did not collapse below {:e} within {} iterations",
            args.target, args.max_iter
        )))
    }
}

fn generate(instance: Instance) -> Result<AffineLogitSystem> {
    match instance {
        Instance::Pitchfork { beta } => instances::pitchfork_system(beta),
        Instance::Hadamard { m, alpha } => instances::hadamard_separation(m, alpha),
        Instance::UpperTriangular { m, c } => instances::upper_triangular_counterexample(m, c),
        Instance::Zero { n, beta } => SystemFile {
            block_dims: vec![n],
            beta: vec![beta],
            w: vec![vec![0.0; n]; n],
            b: vec![0.0; n],
        }
        .into_system(),
        Instance::Random { kind, n, scale, seed, stream, beta, bias_std, shift_rel } => {
            let opts = RandomOptions { shift_rel, bias_std, beta };
            instances::random_instance_with(kind, n, scale, SeedSpec::new(seed, stream), opts)
        }
    }
}
