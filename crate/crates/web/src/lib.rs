//! WebAssembly bindings for the browser demo in `www/`.

use ndarray::Array1;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use rpce::harness::relative_l2_on;
use rpce::hermite::{enumerate_basis, full_basis_size, BasisMode};
use rpce::numerics::{sample_std_normal, RngStream};
use rpce::problems::{evaluate_rows, kl_1d, Qoi, Ridge};
use rpce::rotate::{fit_adm, fit_l1, AdmInit, AdmOptions, FitOptions, SurrogateModel};

#[derive(Debug, Serialize, PartialEq)]
pub struct FitSummary {
    pub rel_l2: f64,
    pub mean: f64,
    pub std: f64,
    pub basis_size: usize,
    pub converged: bool,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct RidgeStudy {
    pub d: usize,
    pub m: usize,
    pub exact_mean: f64,
    pub exact_std: f64,
    pub l1: FitSummary,
    pub adm: FitSummary,
}

pub fn basis_count(d: usize, order: u32, no_interaction: bool) -> Result<f64, String> {
    if no_interaction {
        Ok((1 + d * order as usize) as f64)
    } else {
        full_basis_size(d, order)
            .map(|n| n as f64)
            .ok_or_else(|| "basis size overflows".to_string())
    }
}

pub fn kl_eigenvalues(correlation_length: f64, terms: usize) -> Result<Vec<f64>, String> {
    if terms > 2000 {
        return Err("at most 2000 terms".into());
    }
    kl_1d(correlation_length, terms, 1.0)
        .map(|kl| kl.eigenvalues)
        .map_err(|e| e.to_string())
}

fn summarize(
    model: &SurrogateModel,
    pts: &ndarray::Array2<f64>,
    truth: &Array1<f64>,
) -> Result<FitSummary, String> {
    let rel = relative_l2_on(model, pts.view(), truth.view()).map_err(|e| e.to_string())?;
    let (mean, var) = model.moments();
    Ok(FitSummary {
        rel_l2: rel.value,
        mean,
        std: var.sqrt(),
        basis_size: model.basis.len(),
        converged: model.converged,
    })
}

/// Plain ℓ1 against identity-start ADM on the ridge function, on one
/// training set of `m` points.
pub fn ridge_comparison(
    d: usize,
    m: usize,
    seed: u32,
    max_rotations: usize,
) -> Result<RidgeStudy, String> {
    if !(2..=8).contains(&d) {
        return Err("the demo supports 2 to 8 dimensions".into());
    }
    if !(10..=400).contains(&m) {
        return Err("the demo supports 10 to 400 samples".into());
    }
    let err = |e: rpce::Error| e.to_string();
    let ridge = Ridge { d };
    let basis = enumerate_basis(d, 3, BasisMode::Full).map_err(err)?;
    let mut rng = RngStream::new(seed as u64, 0);
    let x = sample_std_normal(&mut rng, m, d).map_err(err)?;
    let u = evaluate_rows(&ridge, x.view()).map_err(err)?;
    let pts = sample_std_normal(&mut rng.fork(1), 2000, d).map_err(err)?;
    let truth = evaluate_rows(&ridge, pts.view()).map_err(err)?;

    let l1 = fit_l1(
        x.view(),
        u.view(),
        &basis,
        &FitOptions::default(),
        &mut rng.fork(2),
    )
    .map_err(err)?;
    let opts = AdmOptions {
        max_rotations,
        ..AdmOptions::default()
    };
    let adm = fit_adm(
        x.view(),
        u.view(),
        &basis,
        &opts,
        AdmInit::Identity,
        &mut rng.fork(3),
    )
    .map_err(err)?;
    let (exact_mean, exact_std) = ridge
        .exact_moments()
        .expect("ridge has closed-form moments");
    Ok(RidgeStudy {
        d,
        m,
        exact_mean,
        exact_std,
        l1: summarize(&l1, &pts, &truth)?,
        adm: summarize(&adm, &pts, &truth)?,
    })
}

#[wasm_bindgen(js_name = basisSize)]
pub fn basis_size(d: usize, order: u32, no_interaction: bool) -> Result<f64, JsError> {
    basis_count(d, order, no_interaction).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = klSpectrum)]
pub fn kl_spectrum(correlation_length: f64, terms: usize) -> Result<Vec<f64>, JsError> {
    kl_eigenvalues(correlation_length, terms).map_err(|e| JsError::new(&e))
}

/// JSON string of a [`RidgeStudy`].
#[wasm_bindgen(js_name = ridgeStudy)]
pub fn ridge_study(d: usize, m: usize, seed: u32, max_rotations: usize) -> Result<String, JsError> {
    let study = ridge_comparison(d, m, seed, max_rotations).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&study).map_err(|e| JsError::new(&e.to_string()))
}
