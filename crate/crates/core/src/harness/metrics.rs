use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sample_std_normal, RngStream};
use crate::problems::{evaluate_rows, Qoi};
use crate::rotate::SurrogateModel;

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// `‖u − u_g‖₂ / ‖u‖₂` estimated from `n_mc` fresh standard-normal points.
pub fn relative_l2(
    model: &SurrogateModel,
    truth: &dyn Qoi,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<Estimate> {
    if n_mc < 1000 {
        return Err(Error::invalid(format!(
            "relative L2 needs at least 1000 samples, got {n_mc}"
        )));
    }
    let points = sample_std_normal(rng, n_mc, truth.dim())?;
    let values = evaluate_rows(truth, points.view())?;
    relative_l2_on(model, points.view(), values.view())
}

/// Relative L2 error on given points with known true values; the standard
/// error comes from the delta method on the ratio of sample means.
pub fn relative_l2_on(
    model: &SurrogateModel,
    points: ArrayView2<f64>,
    truth: ArrayView1<f64>,
) -> Result<Estimate> {
    let approx = model.evaluate(points)?;
    let n = truth.len() as f64;
    let e2: Vec<f64> = approx
        .iter()
        .zip(truth)
        .map(|(a, t)| (a - t) * (a - t))
        .collect();
    let u2: Vec<f64> = truth.iter().map(|t| t * t).collect();
    let a = e2.iter().sum::<f64>() / n;
    let b = u2.iter().sum::<f64>() / n;
    if !(b > f64::MIN_POSITIVE && b.is_finite()) {
        return Err(Error::Degenerate("reference norm is zero".into()));
    }
    let ratio = a / b;
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (x, y) in e2.iter().zip(&u2) {
        vaa += (x - a) * (x - a);
        vbb += (y - b) * (y - b);
        vab += (x - a) * (y - b);
    }
    let denom = (n - 1.0).max(1.0) * n;
    let var_ratio = (vaa / denom) / (b * b) + (a * a / b.powi(4)) * (vbb / denom)
        - 2.0 * (a / b.powi(3)) * (vab / denom);
    let value = ratio.sqrt();
    let std_error = if value > 0.0 {
        var_ratio.max(0.0).sqrt() / (2.0 * value)
    } else {
        0.0
    };
    Ok(Estimate { value, std_error })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    pub mean: f64,
    pub std: f64,
    /// The reference mean is zero, so `mean` is an absolute error.
    pub mean_absolute: bool,
}

/// Relative errors of `(mean, std)` against a reference.
pub fn moment_errors(estimate: (f64, f64), reference: (f64, f64)) -> Result<MomentErrors> {
    let (m, s) = reference;
    if !(s > 0.0 && s.is_finite() && m.is_finite()) {
        return Err(Error::Degenerate(format!(
            "reference standard deviation {s} must be positive"
        )));
    }
    let mean_absolute = m == 0.0;
    let dm = (estimate.0 - m).abs();
    Ok(MomentErrors {
        mean: if mean_absolute { dm } else { dm / m.abs() },
        std: (estimate.1 - s).abs() / s,
        mean_absolute,
    })
}

/// Sample mean and standard deviation (`n − 1` denominator).
pub fn sample_moments(values: ArrayView1<f64>) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.sum() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Nearest-rank quantile of already sorted values.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Mean, median and quartiles of a set of replicate values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: nearest_rank(&sorted, 0.5),
        q25: nearest_rank(&sorted, 0.25),
        q75: nearest_rank(&sorted, 0.75),
    })
}
