use std::collections::BTreeMap;

use ndarray::Axis;
use rpce::harness::{nearest_rank, relative_l2, run_experiment, ExperimentConfig};
use rpce::hermite::{enumerate_basis, BasisMode};
use rpce::numerics::{sample_std_normal, RngStream};
use rpce::problems::{ridge_eval, Qoi, Ridge};
use rpce::rotate::{fit_l1, FitOptions};
use serde_json::Value;

const SMALL: &str = r#"{
    "problem": {"name": "ridge", "d": 4},
    "methods": ["mc", "l1", "adm"],
    "m_values": [20, 35],
    "replicates": 5,
    "seed": 17,
    "reference": {"kind": "exact"},
    "rel_l2_samples": 2000
}"#;

#[test]
fn summary_matches_the_replicate_table() {
    let cfg = ExperimentConfig::from_json(SMALL).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let summary: Value = serde_json::from_str(&report.summary_json().unwrap()).unwrap();

    let mut groups: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(csv.as_slice());
    assert_eq!(
        reader
            .headers()
            .unwrap()
            .iter()
            .collect::<Vec<_>>()
            .join(","),
        "method,M,replicate,err_mean,err_std,rel_l2,N,d_tilde,converged,seconds"
    );
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let key = (rec[0].to_string(), rec[1].parse::<usize>().unwrap());
        let em: f64 = rec[3].parse().unwrap();
        let es: f64 = rec[4].parse().unwrap();
        groups.entry(key).or_default().push((em, es));
        rows += 1;
    }
    assert_eq!(rows, 3 * 2 * 5);

    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.len(), groups.len());
    for cell in cells {
        let key = (
            cell["method"].as_str().unwrap().to_string(),
            cell["M"].as_u64().unwrap() as usize,
        );
        let vals = &groups[&key];
        for (k, field) in ["err_mean", "err_std"].iter().enumerate() {
            let mut v: Vec<f64> = vals
                .iter()
                .map(|p| if k == 0 { p.0 } else { p.1 })
                .collect();
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let s = &cell[*field];
            assert_eq!(
                s["median"].as_f64().unwrap(),
                nearest_rank(&v, 0.5),
                "{key:?} {field}"
            );
            assert_eq!(s["q25"].as_f64().unwrap(), nearest_rank(&v, 0.25));
            assert_eq!(s["q75"].as_f64().unwrap(), nearest_rank(&v, 0.75));
            assert!((s["mean"].as_f64().unwrap() - mean).abs() <= 1e-15 * mean.abs().max(1.0));
        }
    }
    assert_eq!(summary["provenance"]["seed"].as_u64(), Some(17));
    assert_eq!(
        summary["provenance"]["config_hash"].as_str().unwrap(),
        cfg.hash()
    );
}

#[test]
fn relative_error_agrees_with_a_large_independent_sample() {
    let d = 4;
    let mut rng = RngStream::new(21, 0);
    let x = sample_std_normal(&mut rng, 25, d).unwrap();
    let u = x.map_axis(Axis(1), ridge_eval);
    let basis = enumerate_basis(d, 3, BasisMode::Full).unwrap();
    let model = fit_l1(
        x.view(),
        u.view(),
        &basis,
        &FitOptions::default(),
        &mut rng.fork(1),
    )
    .unwrap();
    let est = relative_l2(&model, &Ridge { d }, 20_000, &mut RngStream::new(22, 0)).unwrap();

    let (mut num, mut den) = (0.0, 0.0);
    for chunk in 0..20 {
        let pts = sample_std_normal(&mut RngStream::new(23, chunk), 50_000, d).unwrap();
        let pred = model.evaluate(pts.view()).unwrap();
        for (row, p) in pts.rows().into_iter().zip(pred.iter()) {
            let t = Ridge { d }.eval(row).unwrap();
            num += (p - t) * (p - t);
            den += t * t;
        }
    }
    let oracle = (num / den).sqrt();
    assert!(
        (est.value - oracle).abs() <= 3.0 * est.std_error,
        "estimate {} ± {}, oracle {oracle}",
        est.value,
        est.std_error
    );
}

#[test]
fn identical_configs_give_identical_reports() {
    let cfg = ExperimentConfig::from_json(SMALL).unwrap();
    let render = || {
        let r = run_experiment(&cfg).unwrap();
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        (csv, r.summary_json().unwrap())
    };
    assert_eq!(render(), render());
}
