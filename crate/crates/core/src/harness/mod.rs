//! Replicate studies: shared training sets, every configured method, error
//! metrics against reference statistics and report output.

mod config;
mod metrics;
mod report;

use std::time::Instant;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::hermite::{enumerate_basis, full_basis_size, MultiIndexBasis};
use crate::numerics::{sample_std_normal, RngStream};
use crate::problems::{evaluate_rows, Problem, Qoi};
use crate::rotate::{
    default_theta, fit_adm, fit_gradient_reduced, fit_l1, fit_sadmdr, AdmInit, SurrogateModel,
};

pub use config::{
    default_basis, AdmConfig, BasisConfig, ExperimentConfig, FitConfig, Method, ReductionConfig,
    ReferenceConfig,
};
pub use metrics::{
    moment_errors, nearest_rank, relative_l2, relative_l2_on, sample_moments, summarize, Estimate,
    MomentErrors, Summary,
};
pub use report::{
    CellSummary, ExperimentReport, Provenance, ReferenceStats, ReplicateRow, CSV_HEADER,
    REPORT_FORMAT, REPORT_VERSION,
};

pub const THREADS_ENV: &str = "RPCE_THREADS";

const PURPOSE_TRAIN: u64 = 0;
const PURPOSE_PROBLEM: u64 = 1;
const PURPOSE_FIT: u64 = 2;
const PURPOSE_VALIDATION: u64 = 3;
const PURPOSE_REFERENCE: u64 = 4;
const SHARED_STREAM: u64 = u64::MAX;
const REFERENCE_CHUNK: usize = 8192;

/// Stream id for one purpose within a replicate.
fn stream_id(replicate: usize, purpose: u64, index: usize) -> u64 {
    ((replicate as u64) << 32) | (purpose << 24) | index as u64
}

/// Worker cap from `RPCE_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| {
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got '{v}'"
                ))
            }),
        Err(_) => Ok(None),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceFile {
    mean: f64,
    std: f64,
}

/// Reference `(mean, std)` for one problem instance.
pub fn compute_reference(
    cfg: &ExperimentConfig,
    problem: &Problem,
    rng: &mut RngStream,
) -> Result<ReferenceStats> {
    match &cfg.reference {
        ReferenceConfig::Mc { samples } => {
            let mut values = Vec::with_capacity(*samples);
            let mut left = *samples;
            while left > 0 {
                let n = left.min(REFERENCE_CHUNK);
                let pts = sample_std_normal(rng, n, problem.dim())?;
                values.extend(evaluate_rows(problem, pts.view())?);
                left -= n;
            }
            let (mean, std) = sample_moments(ArrayView1::from(&values));
            Ok(ReferenceStats {
                kind: "mc".into(),
                mean,
                std,
                mean_std_error: Some(std / (*samples as f64).sqrt()),
                samples: Some(*samples),
            })
        }
        ReferenceConfig::Exact => {
            let (mean, std) = problem
                .exact_moments()
                .ok_or_else(|| Error::Config("problem has no closed-form moments".into()))?;
            Ok(ReferenceStats {
                kind: "exact".into(),
                mean,
                std,
                mean_std_error: None,
                samples: None,
            })
        }
        ReferenceConfig::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("reference file {}: {e}", path.display())))?;
            let f: ReferenceFile = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("reference file: {e}")))?;
            Ok(ReferenceStats {
                kind: "file".into(),
                mean: f.mean,
                std: f.std,
                mean_std_error: None,
                samples: None,
            })
        }
    }
}

enum Fitted {
    Moments(f64, f64),
    Model(Box<SurrogateModel>),
}

struct Shared {
    problem: Option<Problem>,
    reference: Option<ReferenceStats>,
    basis: Option<MultiIndexBasis>,
}

fn fit_method(
    cfg: &ExperimentConfig,
    method: Method,
    basis: Option<&MultiIndexBasis>,
    x: ArrayView2<f64>,
    u: ArrayView1<f64>,
    rng: &mut RngStream,
) -> Result<Fitted> {
    let norm = u.dot(&u).sqrt();
    let adm = cfg.adm_options(norm);
    let need_basis = || basis.ok_or_else(|| Error::invalid("no basis configured"));
    let model = match method {
        Method::Mc => {
            let (m, s) = sample_moments(u);
            return Ok(Fitted::Moments(m, s));
        }
        Method::L1 => fit_l1(x, u, need_basis()?, &cfg.fit_options(norm, false), rng)?,
        Method::ReweightedL1 => fit_l1(x, u, need_basis()?, &cfg.fit_options(norm, true), rng)?,
        Method::Adm => fit_adm(x, u, need_basis()?, &adm, AdmInit::Identity, rng)?,
        Method::Sadm => fit_adm(x, u, need_basis()?, &adm, AdmInit::Sir, rng)?,
        Method::Sadmdr => {
            let r = cfg.reduction.expect("validated");
            fit_sadmdr(x, u, r.d_tilde, r.order, &adm, rng)?
        }
        Method::GradientReduced => {
            let r = cfg.reduction.expect("validated");
            let pilot = fit_l1(
                x,
                u,
                need_basis()?,
                &cfg.fit_options(norm, cfg.fit.reweighted),
                rng,
            )?;
            fit_gradient_reduced(x, u, &pilot, r.d_tilde, r.order, &adm, rng)?
        }
    };
    Ok(Fitted::Model(Box::new(model)))
}

fn failed_row(method: Method, m: usize, replicate: usize, err: &Error) -> ReplicateRow {
    ReplicateRow {
        method,
        m,
        replicate,
        err_mean: None,
        err_std: None,
        rel_l2: None,
        n_basis: None,
        d_tilde: None,
        converged: None,
        seconds: 0.0,
        mean_absolute: false,
        estimate: None,
        error: Some(err.to_string()),
    }
}

fn run_replicate(cfg: &ExperimentConfig, shared: &Shared, r: usize) -> Vec<ReplicateRow> {
    let seed = cfg.seed;
    let prepared = (|| -> Result<_> {
        let owned;
        let problem = match &shared.problem {
            Some(p) => p,
            None => {
                owned = cfg
                    .problem
                    .build(&mut RngStream::new(seed, stream_id(r, PURPOSE_PROBLEM, 0)))?;
                &owned
            }
        };
        let reference = match &shared.reference {
            Some(s) => s.clone(),
            None => compute_reference(
                cfg,
                problem,
                &mut RngStream::new(seed, stream_id(r, PURPOSE_REFERENCE, 0)),
            )?,
        };
        let m_max = *cfg.m_values.iter().max().expect("validated");
        let x = sample_std_normal(
            &mut RngStream::new(seed, stream_id(r, PURPOSE_TRAIN, 0)),
            m_max,
            problem.dim(),
        )?;
        let u = evaluate_rows(problem, x.view())?;
        let validation = if cfg.rel_l2_samples > 0 {
            let mut rng = RngStream::new(seed, stream_id(r, PURPOSE_VALIDATION, 0));
            let pts = sample_std_normal(&mut rng, cfg.rel_l2_samples, problem.dim())?;
            let vals = evaluate_rows(problem, pts.view())?;
            Some((pts, vals))
        } else {
            None
        };
        Ok((reference, x, u, validation))
    })();
    let (reference, x, u, validation): (
        ReferenceStats,
        Array2<f64>,
        Array1<f64>,
        Option<(Array2<f64>, Array1<f64>)>,
    ) = match prepared {
        Ok(p) => p,
        Err(e) => {
            return cfg
                .m_values
                .iter()
                .flat_map(|&m| cfg.methods.iter().map(move |&k| (k, m)))
                .map(|(k, m)| failed_row(k, m, r, &e))
                .collect();
        }
    };

    let mut rows = Vec::new();
    for (mi, &m) in cfg.m_values.iter().enumerate() {
        let xs = x.slice(s![..m, ..]);
        let us = u.slice(s![..m]);
        for (k, &method) in cfg.methods.iter().enumerate() {
            let mut rng = RngStream::new(seed, stream_id(r, PURPOSE_FIT, mi * 256 + k));
            let start = Instant::now();
            let fitted = fit_method(cfg, method, shared.basis.as_ref(), xs, us, &mut rng);
            let seconds = if cfg.record_timing {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            let row = fitted.and_then(|f| {
                let (estimate, rel_l2, n_basis, d_tilde, converged) = match f {
                    Fitted::Moments(a, b) => ((a, b), None, None, None, true),
                    Fitted::Model(model) => {
                        let (mean, var) = model.moments();
                        let rel = match &validation {
                            Some((pts, vals)) => {
                                Some(relative_l2_on(&model, pts.view(), vals.view())?.value)
                            }
                            None => None,
                        };
                        let dt = model.reduction.as_ref().map(|a| a.nrows());
                        (
                            (mean, var.sqrt()),
                            rel,
                            Some(model.basis.len()),
                            dt,
                            model.converged,
                        )
                    }
                };
                let errs = moment_errors(estimate, (reference.mean, reference.std))?;
                Ok(ReplicateRow {
                    method,
                    m,
                    replicate: r,
                    err_mean: Some(errs.mean),
                    err_std: Some(errs.std),
                    rel_l2,
                    n_basis,
                    d_tilde,
                    converged: Some(converged),
                    seconds,
                    mean_absolute: errs.mean_absolute,
                    estimate: Some(estimate),
                    error: None,
                })
            });
            rows.push(row.unwrap_or_else(|e| failed_row(method, m, r, &e)));
        }
    }
    rows
}

fn summarize_cells(cfg: &ExperimentConfig, rows: &[ReplicateRow]) -> (Vec<CellSummary>, bool) {
    let d = cfg.problem.dim();
    let mut cells = Vec::new();
    let mut partial = false;
    for &method in &cfg.methods {
        for &m in &cfg.m_values {
            let cell: Vec<&ReplicateRow> = rows
                .iter()
                .filter(|r| r.method == method && r.m == m)
                .collect();
            let ok: Vec<&ReplicateRow> =
                cell.iter().copied().filter(|r| r.error.is_none()).collect();
            let failures = cell.len() - ok.len();
            if failures as f64 > cfg.failure_quota * cfg.replicates as f64 {
                partial = true;
            }
            let collect = |f: &dyn Fn(&ReplicateRow) -> Option<f64>| -> Option<Summary> {
                summarize(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            let theta = method.rotates().then(|| {
                cfg.adm
                    .theta
                    .unwrap_or_else(|| match (method.needs_reduction(), cfg.reduction) {
                        (true, Some(red)) => default_theta(red.d_tilde),
                        _ => default_theta(d),
                    })
            });
            let mut errors: Vec<String> = cell.iter().filter_map(|r| r.error.clone()).collect();
            errors.dedup();
            cells.push(CellSummary {
                method,
                m,
                n_basis: ok.iter().find_map(|r| r.n_basis),
                d_tilde: ok.iter().find_map(|r| r.d_tilde),
                theta,
                replicates: cell.len(),
                failures,
                converged: ok.iter().filter(|r| r.converged == Some(true)).count(),
                err_mean: collect(&|r| r.err_mean),
                err_std: collect(&|r| r.err_std),
                rel_l2: collect(&|r| r.rel_l2),
                estimate_mean: collect(&|r| r.estimate.map(|e| e.0)),
                estimate_std: collect(&|r| r.estimate.map(|e| e.1)),
                mean_absolute: ok.iter().any(|r| r.mean_absolute),
                errors,
            });
        }
    }
    (cells, partial)
}

fn advisories(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(red) = cfg.reduction {
        if cfg.methods.iter().any(|m| m.needs_reduction()) {
            let n = full_basis_size(red.d_tilde, red.order).unwrap_or(u128::MAX);
            for &m in &cfg.m_values {
                if n < 2 * m as u128 || n > 5 * m as u128 {
                    out.push(format!(
                        "reduced basis has N={n} terms at M={m}; orders giving N between 2M and 5M are usually preferable"
                    ));
                }
            }
        }
    }
    out
}

fn run_all(cfg: &ExperimentConfig, shared: &Shared) -> Vec<Vec<ReplicateRow>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(cfg, shared, r))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.replicates)
            .map(|r| run_replicate(cfg, shared, r))
            .collect()
    }
}

/// Runs every method on every `(replicate, M)` training set.
///
/// Replicate `r` draws its samples from stream `r` of the configured seed and
/// uses the first `M` of them for each sample size, so all methods and sizes
/// within a replicate share one nested design. Results do not depend on the
/// number of worker threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let shared = {
        let problem = if cfg.problem.varies_per_replicate() {
            None
        } else {
            Some(
                cfg.problem
                    .build(&mut RngStream::new(cfg.seed, SHARED_STREAM))?,
            )
        };
        let reference = match &problem {
            Some(p) => Some(compute_reference(
                cfg,
                p,
                &mut RngStream::new(cfg.seed, SHARED_STREAM - 1),
            )?),
            None => None,
        };
        let needs_basis = cfg
            .methods
            .iter()
            .any(|m| !matches!(m, Method::Mc | Method::Sadmdr));
        let basis = if needs_basis {
            let b = cfg.basis();
            Some(enumerate_basis(cfg.problem.dim(), b.order, b.mode)?)
        } else {
            None
        };
        Shared {
            problem,
            reference,
            basis,
        }
    };

    let per_replicate = match thread_limit()? {
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_all(cfg, &shared)),
        _ => run_all(cfg, &shared),
    };
    let mut rows: Vec<ReplicateRow> = per_replicate.into_iter().flatten().collect();
    let m_pos = |m: usize| {
        cfg.m_values
            .iter()
            .position(|&v| v == m)
            .unwrap_or(usize::MAX)
    };
    let k_pos = |k: Method| {
        cfg.methods
            .iter()
            .position(|&v| v == k)
            .unwrap_or(usize::MAX)
    };
    rows.sort_by_key(|r| (m_pos(r.m), k_pos(r.method), r.replicate));

    let (cells, partial) = summarize_cells(cfg, &rows);
    Ok(ExperimentReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            library_version: crate::VERSION.into(),
            problem: cfg.problem.name().into(),
        },
        config: cfg.clone(),
        reference: shared.reference,
        cells,
        advisories: advisories(cfg),
        partial,
        wall_seconds: cfg.record_timing.then(|| start.elapsed().as_secs_f64()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn monte_carlo_only_echoes_sample_statistics() {
        let cfg = config(
            r#"{"problem": {"name": "highdim", "d": 5}, "methods": ["mc"], "m_values": [30],
                "replicates": 1, "seed": 3, "reference": {"kind": "exact"}}"#,
        );
        let rep = run_experiment(&cfg).unwrap();
        let p = cfg.problem.build(&mut RngStream::new(0, 0)).unwrap();
        let x = sample_std_normal(
            &mut RngStream::new(3, stream_id(0, PURPOSE_TRAIN, 0)),
            30,
            5,
        )
        .unwrap();
        let u = evaluate_rows(&p, x.view()).unwrap();
        let (m, s) = sample_moments(u.view());
        let cell = rep.cell(Method::Mc, 30).unwrap();
        assert_eq!(cell.estimate_mean.unwrap().mean, m);
        assert_eq!(cell.estimate_std.unwrap().mean, s);
        let (rm, rs) = p.exact_moments().unwrap();
        assert_eq!(rep.rows[0].err_mean.unwrap(), (m - rm).abs() / rm);
        assert_eq!(rep.rows[0].err_std.unwrap(), (s - rs).abs() / rs);
        assert_eq!(rep.reference.as_ref().unwrap().kind, "exact");
    }

    #[test]
    fn rows_are_ordered_and_complete() {
        let cfg = config(
            r#"{"problem": {"name": "ridge", "d": 3}, "methods": ["mc", "l1"], "m_values": [20, 12],
                "replicates": 3, "seed": 1, "reference": {"kind": "exact"}, "rel_l2_samples": 1000}"#,
        );
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 12);
        let keys: Vec<(usize, Method, usize)> = rep
            .rows
            .iter()
            .map(|r| (r.m, r.method, r.replicate))
            .collect();
        assert_eq!(keys[0], (20, Method::Mc, 0));
        assert_eq!(keys[3], (20, Method::L1, 0));
        assert_eq!(keys[6], (12, Method::Mc, 0));
        let l1 = rep.cell(Method::L1, 20).unwrap();
        assert_eq!(l1.n_basis, Some(20));
        assert!(l1.rel_l2.is_some());
        assert!(rep.cell(Method::Mc, 20).unwrap().rel_l2.is_none());
        assert!(!rep.partial);
    }

    #[test]
    fn failures_trip_the_quota() {
        // a one-sample training set cannot be split for cross-validation
        let cfg = config(
            r#"{"problem": {"name": "ridge", "d": 2}, "methods": ["l1"], "m_values": [1],
                "replicates": 2, "seed": 1, "reference": {"kind": "exact"}}"#,
        );
        let rep = run_experiment(&cfg).unwrap();
        let cell = rep.cell(Method::L1, 1).unwrap();
        assert_eq!(cell.failures, 2);
        assert!(cell.err_mean.is_none() && !cell.errors.is_empty());
        assert!(rep.partial);
    }

    #[test]
    fn stream_ids_do_not_collide() {
        let a = stream_id(1, PURPOSE_FIT, 0);
        let b = stream_id(0, PURPOSE_FIT, 1);
        let c = stream_id(1, PURPOSE_TRAIN, 0);
        assert!(a != b && a != c && b != c);
    }
}
