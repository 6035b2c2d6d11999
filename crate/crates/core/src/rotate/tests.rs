use super::*;
use crate::hermite::{eval_univariate, MultiIndex};
use crate::numerics::sample_std_normal;
use ndarray::{array, Axis};

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn random_orthogonal(d: usize, rng: &mut RngStream) -> Array2<f64> {
    let mut a = sample_std_normal(rng, d, d).unwrap();
    for k in 0..d {
        for j in 0..k {
            let p = a.row(k).dot(&a.row(j));
            let rj = a.row(j).to_owned();
            a.row_mut(k).scaled_add(-p, &rj);
        }
        let n = a.row(k).dot(&a.row(k)).sqrt();
        a.row_mut(k).mapv_inplace(|x| x / n);
    }
    a
}

#[test]
fn zero_coefficients_give_zero_gradient_matrix() {
    let b = enumerate_basis(3, 3, BasisMode::Full).unwrap();
    let g = gradient_matrix(Array1::zeros(b.len()).view(), &KernelSet::new(&b)).unwrap();
    assert_eq!(g, Array2::<f64>::zeros((3, 3)));
}

#[test]
fn linear_function_gives_outer_product() {
    let b = enumerate_basis(4, 2, BasisMode::Full).unwrap();
    let a = array![0.5, -1.25, 2.0, 0.0];
    let mut c = Array1::zeros(b.len());
    for i in 0..4 {
        let mut deg = vec![0; 4];
        deg[i] = 1;
        c[b.position(&MultiIndex::new(deg)).unwrap()] = a[i];
    }
    let g = gradient_matrix(c.view(), &KernelSet::new(&b)).unwrap();
    let outer = a
        .view()
        .insert_axis(Axis(1))
        .dot(&a.view().insert_axis(Axis(0)));
    assert!(max_abs(&(&g - &outer)) < 1e-15);
}

#[test]
fn second_hermite_in_first_variable() {
    let b = enumerate_basis(2, 2, BasisMode::Full).unwrap();
    let mut c = Array1::zeros(b.len());
    c[b.position(&MultiIndex::new(vec![2, 0])).unwrap()] = 1.0;
    let g = gradient_matrix(c.view(), &KernelSet::new(&b)).unwrap();
    assert!(max_abs(&(&g - &array![[2.0, 0.0], [0.0, 0.0]])) < 1e-14);
}

#[test]
fn single_term_is_recovered_from_fewer_samples_than_terms() {
    let b = enumerate_basis(2, 3, BasisMode::Full).unwrap();
    let m = 4 * b.len() / 5;
    let mut rng = RngStream::new(11, 0);
    let x = sample_std_normal(&mut rng, m, 2).unwrap();
    let u = x.column(0).mapv(|v| eval_univariate(3, v));
    let norm = u.dot(&u).sqrt();
    let opts = FitOptions {
        candidates: Some(vec![1e-10 * norm, 1e-6 * norm, 1e-2 * norm]),
        ..Default::default()
    };
    let model = fit_l1(x.view(), u.view(), &b, &opts, &mut rng).unwrap();
    let k = b.position(&MultiIndex::new(vec![3, 0])).unwrap();
    let mut truth = Array1::<f64>::zeros(b.len());
    truth[k] = 1.0;
    let err = (&model.coeffs - &truth)
        .mapv(f64::abs)
        .fold(0.0f64, |a, &v| a.max(v));
    assert!(err <= 1e-4, "error {err}");
}

#[test]
fn zero_outputs_give_zero_model() {
    let b = enumerate_basis(3, 2, BasisMode::Full).unwrap();
    let mut rng = RngStream::new(1, 0);
    let x = sample_std_normal(&mut rng, 20, 3).unwrap();
    let u = Array1::zeros(20);
    let model = fit_l1(x.view(), u.view(), &b, &FitOptions::default(), &mut rng).unwrap();
    assert!(model.coeffs.iter().all(|&c| c == 0.0));
}

#[test]
fn one_dimensional_rotation_is_trivial() {
    let b = enumerate_basis(1, 4, BasisMode::Full).unwrap();
    let mut rng = RngStream::new(2, 0);
    let x = sample_std_normal(&mut rng, 12, 1).unwrap();
    let u = x.column(0).mapv(|v| v.powi(3) - 0.5 * v + 1.0);
    let fit = FitOptions {
        epsilon: Some(1e-6),
        ..Default::default()
    };
    let plain = fit_l1(x.view(), u.view(), &b, &fit, &mut RngStream::new(3, 0)).unwrap();
    let opts = AdmOptions {
        fit,
        ..Default::default()
    };
    let adm = fit_adm(
        x.view(),
        u.view(),
        &b,
        &opts,
        AdmInit::Identity,
        &mut RngStream::new(3, 0),
    )
    .unwrap();
    let s = adm.rotation[[0, 0]];
    assert_eq!(s.abs(), 1.0);
    for (k, (a, p)) in adm.coeffs.iter().zip(&plain.coeffs).enumerate() {
        let sign = if k % 2 == 1 { s } else { 1.0 };
        assert!((a - sign * p).abs() < 1e-10);
    }
    assert!(adm.converged);
}

#[test]
fn permutation_distance_is_zero() {
    let p = array![[0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]];
    assert_eq!(rotation_distance(p.view()), 0.0);
    assert_eq!(rotation_distance(Array2::<f64>::eye(5).view()), 0.0);
    let h = 0.5f64.sqrt();
    let r = array![[h, h], [-h, h]];
    assert!((rotation_distance(r.view()) - (4.0 * h - 2.0)).abs() < 1e-15);
}

#[test]
fn iteration_grids() {
    assert_eq!(iteration_grid(1.0, 3), vec![0.2, 0.5, 1.0]);
    assert_eq!(iteration_grid(2.0, 1), vec![2.0]);
    let g = iteration_grid(1.0, 5);
    assert!((g[0] - 0.2).abs() < 1e-15 && (g[4] - 1.0).abs() < 1e-15);
    assert_eq!(default_theta(12), 3.0);
    assert_eq!(default_theta(100), 65.0);
}

fn random_model(
    rng: &mut RngStream,
    d: usize,
    d_tilde: Option<usize>,
    order: u32,
) -> SurrogateModel {
    let bd = d_tilde.unwrap_or(d);
    let basis = enumerate_basis(bd, order, BasisMode::Full).unwrap();
    let coeffs = Array1::from_iter((0..basis.len()).map(|_| rng.normal()));
    let mut model = SurrogateModel::new(basis, coeffs).unwrap();
    model.rotation = random_orthogonal(bd, rng);
    if let Some(k) = d_tilde {
        let q = random_orthogonal(d, rng);
        model.reduction = Some(q.slice(s![..k, ..]).to_owned());
    }
    model
}

/// Independent evaluation: explicit matrix-vector products per point and a
/// product of univariate polynomials per multi-index.
fn brute_force(model: &SurrogateModel, x: ArrayView1<f64>) -> f64 {
    let xi = match &model.reduction {
        Some(r) => r.dot(&x),
        None => x.to_owned(),
    };
    let eta = model.rotation.dot(&xi);
    model
        .basis
        .indices()
        .iter()
        .zip(model.coeffs.iter())
        .map(|(alpha, c)| {
            c * alpha
                .degrees()
                .iter()
                .zip(eta.iter())
                .map(|(&a, &e)| eval_univariate(a, e))
                .product::<f64>()
        })
        .sum()
}

#[test]
fn evaluation_matches_brute_force_chain() {
    let mut rng = RngStream::new(4, 0);
    for red in [None, Some(2)] {
        let model = random_model(&mut rng, 4, red, 3);
        let x = sample_std_normal(&mut rng, 50, 4).unwrap();
        let fast = model.evaluate(x.view()).unwrap();
        for (q, row) in x.rows().into_iter().enumerate() {
            let slow = brute_force(&model, row);
            assert!((fast[q] - slow).abs() <= 1e-12 * (1.0 + slow.abs()));
        }
    }
}

#[test]
fn constant_model_and_identity_model() {
    let basis = enumerate_basis(3, 2, BasisMode::Full).unwrap();
    let mut c = Array1::zeros(basis.len());
    c[0] = 1.0;
    let model = SurrogateModel::new(basis.clone(), c).unwrap();
    let mut rng = RngStream::new(5, 0);
    let x = sample_std_normal(&mut rng, 10, 3).unwrap();
    assert!(model.evaluate(x.view()).unwrap().iter().all(|&v| v == 1.0));

    let c = Array1::from_iter((0..basis.len()).map(|k| k as f64 - 3.0));
    let model = SurrogateModel::new(basis.clone(), c.clone()).unwrap();
    let direct = measurement_matrix(&basis, x.view()).unwrap().dot(&c);
    let via_model = model.evaluate(x.view()).unwrap();
    assert!(direct
        .iter()
        .zip(&via_model)
        .all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(model.evaluate(x.slice(s![.., ..2])).is_err());
}

#[test]
fn closed_form_moments() {
    let basis = enumerate_basis(2, 2, BasisMode::Full).unwrap();
    let mut c = Array1::zeros(basis.len());
    c[0] = 3.0;
    c[1] = 4.0;
    let model = SurrogateModel::new(basis.clone(), c).unwrap();
    assert_eq!(model.moments(), (3.0, 16.0));
    let zero = SurrogateModel::new(basis, Array1::zeros(6)).unwrap();
    assert_eq!(zero.moments(), (0.0, 0.0));
}

#[test]
fn moments_ignore_rotations() {
    let mut rng = RngStream::new(6, 0);
    let mut model = random_model(&mut rng, 3, None, 3);
    let before = model.moments();
    model.rotation = random_orthogonal(3, &mut rng).dot(&model.rotation);
    let after = model.moments();
    assert_eq!(before.0.to_bits(), after.0.to_bits());
    assert_eq!(before.1.to_bits(), after.1.to_bits());
}

#[test]
fn serialization_round_trip_is_lossless() {
    let mut rng = RngStream::new(7, 0);
    let mut model = random_model(&mut rng, 5, Some(3), 3);
    model.coeffs[1] = 1e-310;
    model.coeffs[2] = -0.1;
    model.coeffs[3] = f64::MAX;
    model.coeffs[4] = std::f64::consts::PI * 1e-200;
    model.history.push(IterationRecord {
        iteration: 0,
        epsilon: Some(0.1 + 0.2),
        distance: None,
        residual: Some(1.0 / 3.0),
        validation: None,
        error: None,
    });
    model.converged = false;
    let text = model.to_json().unwrap();
    let back = SurrogateModel::from_json(&text).unwrap();
    let bits = |a: &Array1<f64>| a.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&model.coeffs), bits(&back.coeffs));
    assert_eq!(
        model
            .rotation
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>(),
        back.rotation
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    );
    assert_eq!(model.reduction, back.reduction);
    assert_eq!(model.history, back.history);
    assert!(!back.converged);
    assert_eq!(back.basis.len(), model.basis.len());
    assert_eq!(back.to_json().unwrap(), text);
}

#[test]
fn model_file_is_strict() {
    let mut rng = RngStream::new(8, 0);
    let model = random_model(&mut rng, 2, None, 2);
    let text = model.to_json().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["extra"] = serde_json::json!(1);
    assert!(SurrogateModel::from_json(&v.to_string()).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = serde_json::json!(99);
    assert!(matches!(
        SurrogateModel::from_json(&v.to_string()),
        Err(Error::Format(_))
    ));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["coeffs"] = serde_json::json!([1.0, 2.0]);
    assert!(SurrogateModel::from_json(&v.to_string()).is_err());
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let mut rng = RngStream::new(9, 0);
    let model = random_model(&mut rng, 3, None, 2);
    model.save(&path).unwrap();
    let back = SurrogateModel::load(&path).unwrap();
    assert_eq!(model.coeffs, back.coeffs);
}

#[test]
fn gradient_reduction_of_linear_model() {
    let basis = enumerate_basis(3, 2, BasisMode::Full).unwrap();
    let a = array![1.0, -2.0, 2.0];
    let mut c = Array1::zeros(basis.len());
    for (k, alpha) in basis.indices().iter().enumerate() {
        if alpha.total_degree() == 1 {
            let i = alpha.support()[0].0;
            c[k] = a[i];
        }
    }
    let model = SurrogateModel::new(basis, c).unwrap();
    let red = reduce_via_gradient(&model, 1).unwrap();
    let dir = red.map.row(0);
    assert!((dir.dot(&a).abs() - 3.0).abs() < 1e-12);
    assert!(!red.rank_deficient);
    let full = reduce_via_gradient(&model, 3).unwrap();
    assert!(row_orthonormality_error(full.map.view()) < 1e-12);
    assert!(full.rank_deficient);
}

#[test]
fn gradient_reduction_sees_through_rotation() {
    // u(ξ) = ψ₁((Aξ)₀) is linear in the direction of A's first row
    let mut rng = RngStream::new(10, 0);
    let basis = enumerate_basis(3, 2, BasisMode::Full).unwrap();
    let mut c = Array1::zeros(basis.len());
    c[1] = 1.0;
    let mut model = SurrogateModel::new(basis, c).unwrap();
    model.rotation = random_orthogonal(3, &mut rng);
    let red = reduce_via_gradient(&model, 1).unwrap();
    assert!((red.map.row(0).dot(&model.rotation.row(0)).abs() - 1.0).abs() < 1e-12);
}

fn ridge(x: ArrayView2<f64>) -> Array1<f64> {
    x.map_axis(Axis(1), |r| {
        let s = r.sum();
        s + 0.25 * s * s + 0.025 * s * s * s
    })
}

#[test]
fn adm_keeps_rotations_orthogonal_and_gradients_psd() {
    let d = 4;
    let basis = enumerate_basis(d, 3, BasisMode::Full).unwrap();
    let mut rng = RngStream::new(12, 0);
    let x = sample_std_normal(&mut rng, 25, d).unwrap();
    let u = ridge(x.view());
    let opts = AdmOptions {
        theta: Some(1e-9),
        max_rotations: 5,
        ..Default::default()
    };
    let model = fit_adm(
        x.view(),
        u.view(),
        &basis,
        &opts,
        AdmInit::Identity,
        &mut rng,
    )
    .unwrap();
    assert!(row_orthonormality_error(model.rotation.view()) <= 1e-10);
    assert!(!model.converged);
    let kernels = KernelSet::new(&basis);
    let g = gradient_matrix(model.coeffs.view(), &kernels).unwrap();
    let eig = sym_eigen(g.view()).unwrap();
    assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10));
    assert_eq!(model.history.len(), 6);
}

#[test]
fn adm_improves_a_ridge_fit() {
    let d = 4;
    let basis = enumerate_basis(d, 3, BasisMode::Full).unwrap();
    let mut rng = RngStream::new(13, 0);
    let x = sample_std_normal(&mut rng, 24, d).unwrap();
    let u = ridge(x.view());
    let test = sample_std_normal(&mut rng, 2000, d).unwrap();
    let truth = ridge(test.view());
    let err = |m: &SurrogateModel| {
        let e = m.evaluate(test.view()).unwrap() - &truth;
        (e.dot(&e) / truth.dot(&truth)).sqrt()
    };
    let l1 = fit_l1(
        x.view(),
        u.view(),
        &basis,
        &FitOptions::default(),
        &mut RngStream::new(1, 1),
    )
    .unwrap();
    let adm = fit_adm(
        x.view(),
        u.view(),
        &basis,
        &AdmOptions::default(),
        AdmInit::Identity,
        &mut RngStream::new(1, 1),
    )
    .unwrap();
    assert!(
        err(&adm) < 0.5 * err(&l1),
        "adm {} vs l1 {}",
        err(&adm),
        err(&l1)
    );
}

#[test]
fn sir_initialized_adm_starts_rotated() {
    let d = 4;
    let basis = enumerate_basis(d, 3, BasisMode::Full).unwrap();
    let mut rng = RngStream::new(14, 0);
    let x = sample_std_normal(&mut rng, 60, d).unwrap();
    let u = ridge(x.view());
    let model = fit_adm(
        x.view(),
        u.view(),
        &basis,
        &AdmOptions::default(),
        AdmInit::Sir,
        &mut rng,
    )
    .unwrap();
    assert!(model.history[0].distance.is_some());
    let diag = Array1::from_elem(d, 0.5);
    assert!(model.rotation.row(0).dot(&diag).abs() > 0.99);
}

#[test]
fn given_init_must_be_orthogonal() {
    let basis = enumerate_basis(2, 2, BasisMode::Full).unwrap();
    let mut rng = RngStream::new(15, 0);
    let x = sample_std_normal(&mut rng, 10, 2).unwrap();
    let u = x.column(0).to_owned();
    let bad = array![[1.0, 1.0], [0.0, 1.0]];
    let r = fit_adm(
        x.view(),
        u.view(),
        &basis,
        &AdmOptions::default(),
        AdmInit::Given(bad),
        &mut rng,
    );
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn reduced_fits_have_the_published_basis_sizes() {
    let mut rng = RngStream::new(16, 0);
    let d = 100;
    let x = sample_std_normal(&mut rng, 60, d).unwrap();
    let u = x.map_axis(Axis(1), |r| {
        r.iter()
            .enumerate()
            .map(|(i, v)| v / (i + 1) as f64)
            .sum::<f64>()
            .exp()
    });
    let opts = AdmOptions {
        max_rotations: 1,
        ..Default::default()
    };
    for (dt, n) in [(12, 455), (20, 1771)] {
        let model = fit_sadmdr(x.view(), u.view(), dt, 3, &opts, &mut rng).unwrap();
        assert_eq!(model.basis.len(), n);
        assert_eq!(model.input_dim(), d);
        assert_eq!(model.reduction.as_ref().unwrap().dim(), (dt, d));
        assert!(model
            .evaluate(x.view())
            .unwrap()
            .iter()
            .all(|v| v.is_finite()));
    }
    assert!(fit_sadmdr(x.view(), u.view(), d, 3, &opts, &mut rng).is_err());
}

#[test]
fn rotated_samples_stay_standard_normal() {
    let mut rng = RngStream::new(17, 0);
    let d = 6;
    let m = 10_000;
    let x = sample_std_normal(&mut rng, m, d).unwrap();
    let a = random_orthogonal(d, &mut rng);
    let eta = x.dot(&a.t());
    let se_mean = 1.0 / (m as f64).sqrt();
    let se_var = (2.0 / m as f64).sqrt();
    for col in eta.columns() {
        let mean = col.mean().unwrap();
        let var = col.mapv(|v| (v - mean).powi(2)).sum() / (m - 1) as f64;
        assert!(mean.abs() < 4.0 * se_mean);
        assert!((var - 1.0).abs() < 4.0 * se_var);
    }
}
