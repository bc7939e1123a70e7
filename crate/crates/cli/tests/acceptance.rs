//! End-to-end acceptance suite. Each test exercises one guarantee the
//! workspace promises, drives the same entry points as the binary, prints a
//! single summary line, and enforces a wall-clock budget.

use std::time::Instant;

use serde_json::Value;
use sketchspec_cli::calibrate::{run_calibration, Calibration, REGIME_KEYS};
use sketchspec_cli::config::ExperimentConfig;
use sketchspec_cli::runner::{execute, RunOutput};
use sketchspec_cli::support::{exact_rank_instance, power_law_instance};
use sketchspec_core::chernoff::{deviation_samples, MatrixEnsemble};
use sketchspec_core::linalg::{
    best_rank_k, check_rayleigh_sandwich, default_rank_tol, project_rank_k, pseudo_inverse,
    spectral_norm, stable_rank, svd_default,
};
use sketchspec_core::sketch::{
    amm_row_distribution, apply_sketch, leverage_distribution_default, SketchOp,
};
use sketchspec_core::DenseMatrix;

fn run_json(text: &str) -> RunOutput {
    let cfg = ExperimentConfig::from_json(text).unwrap_or_else(|e| panic!("config: {e}"));
    execute(&cfg).unwrap_or_else(|e| panic!("run: {e}"))
}

fn field(row: &str, idx: usize) -> String {
    row.split(',')
        .nth(idx)
        .unwrap_or_else(|| panic!("row {row:?} has no column {idx}"))
        .to_string()
}

fn num(row: &str, idx: usize) -> f64 {
    field(row, idx)
        .parse()
        .unwrap_or_else(|e| panic!("column {idx} of {row:?}: {e}"))
}

fn records(out: &RunOutput) -> Vec<Value> {
    out.jsonl_lines
        .iter()
        .map(|l| serde_json::from_str(l).expect("record line parses"))
        .collect()
}

fn rec_f64(rec: &Value, key: &str) -> f64 {
    rec[key]
        .as_f64()
        .unwrap_or_else(|| panic!("record lacks numeric {key}: {rec}"))
}

fn norm(a: &DenseMatrix) -> f64 {
    spectral_norm(a).expect("norm")
}

fn finish(label: &str, started: Instant, budget_secs: f64, detail: &str) {
    let elapsed = started.elapsed().as_secs_f64();
    println!("criterion {label}: PASS ({detail}; {elapsed:.1}s of {budget_secs:.0}s budget)");
    assert!(
        elapsed < budget_secs,
        "criterion {label} exceeded its {budget_secs:.0}s budget: {elapsed:.1}s"
    );
}

#[test]
fn criterion_01_exactness_oracle() {
    let started = Instant::now();

    let amm = run_json(
        r#"{
        "version": 1, "task": "amm-project", "identity_hook": true,
        "generator": {"shape": [48, 8], "spectrum": {"kind": "exact-rank", "r": 3}, "seed": 101},
        "generator_b": {"shape": [48, 8], "spectrum": {"kind": "exact-rank", "r": 3}, "seed": 102},
        "sweep": {"eps": [0.25]},
        "trials": 7, "seed_base": 11, "output_path": "unused"
    }"#,
    );
    assert_eq!(amm.failures, 0, "identity amm trials must not error");
    let amm_recs = records(&amm);
    assert_eq!(amm_recs.len(), 7);
    for rec in &amm_recs {
        assert_eq!(
            rec_f64(rec, "achieved_error"),
            0.0,
            "identity sketch must reproduce the product exactly: {rec}"
        );
    }

    let reg = run_json(
        r#"{
        "version": 1, "task": "regression", "identity_hook": true,
        "generator": {"shape": [64, 6], "spectrum": {"kind": "exact-rank", "r": 4}, "seed": 103},
        "sweep": {"eps": [0.1]},
        "trials": 6, "seed_base": 12, "output_path": "unused"
    }"#,
    );
    assert_eq!(reg.failures, 0, "identity regression trials must not error");
    let reg_recs = records(&reg);
    assert!(!reg_recs.is_empty());
    let mut reg_trials = std::collections::BTreeSet::new();
    for rec in &reg_recs {
        reg_trials.insert(rec["trial"].as_u64().expect("trial index"));
        assert!(
            (rec_f64(rec, "residual_ratio") - 1.0).abs() <= 1e-10,
            "identity regression residual ratio must be 1: {rec}"
        );
        assert!(
            rec_f64(rec, "solution_distance") <= 1e-10,
            "identity regression must match the exact solver: {rec}"
        );
    }
    assert_eq!(reg_trials.len(), 6);

    let low = run_json(
        r#"{
        "version": 1, "task": "lowrank-sign", "identity_hook": true,
        "generator": {"shape": [40, 12], "spectrum": {"kind": "power-law", "alpha": 1.0}, "seed": 104},
        "sweep": {"eps": [0.25]},
        "trials": 7, "seed_base": 13, "output_path": "unused"
    }"#,
    );
    assert_eq!(low.failures, 0, "identity low-rank trials must not error");
    let low_recs = records(&low);
    assert!(!low_recs.is_empty());
    let mut low_trials = std::collections::BTreeSet::new();
    for rec in &low_recs {
        low_trials.insert(rec["trial"].as_u64().expect("trial index"));
        assert!(
            (rec_f64(rec, "ratio") - 1.0).abs() <= 1e-10,
            "identity projection must match the optimal truncation: {rec}"
        );
    }
    assert_eq!(low_trials.len(), 7);

    finish(
        "01",
        started,
        60.0,
        &format!(
            "identity hook exact on {} amm, {} regression, {} low-rank instances",
            amm_recs.len(),
            reg_trials.len(),
            low_trials.len()
        ),
    );
}

#[test]
fn criterion_02_invariant_suite() {
    let started = Instant::now();

    let a_pl = power_law_instance(30, 18, 1.0, 201);
    let f = svd_default(&a_pl).expect("svd");
    assert_eq!(f.rank(), 18);
    for &k in &[1usize, 5, 17] {
        let best = best_rank_k(&a_pl, k).expect("truncation");
        let err = norm(&a_pl.sub(&best).expect("shape"));
        let target = f.sigma[k];
        assert!(
            (err - target).abs() <= 1e-10 * f.sigma[0],
            "rank-{k} truncation error {err} should equal sigma_{} = {target}",
            k + 1
        );
        let sk = SketchOp::sign(k + 3, 30, 500 + k as u64);
        let sa = apply_sketch(&sk, &a_pl).expect("sketch");
        let competitor = project_rank_k(&a_pl, &sa, k).expect("projection");
        let cerr = norm(&a_pl.sub(&competitor).expect("shape"));
        assert!(
            cerr >= target - 1e-10 * f.sigma[0],
            "no rank-{k} competitor may beat the optimal error: {cerr} < {target}"
        );
    }

    let a_er = exact_rank_instance(20, 8, 6, 202);
    let p = pseudo_inverse(&a_er, default_rank_tol(20, 8)).expect("pinv");
    let na = norm(&a_er);
    let np = norm(&p);
    let apa = a_er.mul(&p).unwrap().mul(&a_er).unwrap();
    assert!(norm(&apa.sub(&a_er).unwrap()) <= 1e-9 * na, "A P A = A fails");
    let pap = p.mul(&a_er).unwrap().mul(&p).unwrap();
    assert!(norm(&pap.sub(&p).unwrap()) <= 1e-9 * np, "P A P = P fails");
    let ap = a_er.mul(&p).unwrap();
    assert!(norm(&ap.sub(&ap.transpose()).unwrap()) <= 1e-9, "A P symmetry fails");
    let pa = p.mul(&a_er).unwrap();
    assert!(norm(&pa.sub(&pa.transpose()).unwrap()) <= 1e-9, "P A symmetry fails");

    let a_small = exact_rank_instance(6, 3, 2, 203);
    for m in [&a_pl, &a_er, &a_small] {
        let sr = stable_rank(m).expect("stable rank");
        let rank = svd_default(m).expect("svd").rank() as f64;
        assert!(sr <= rank + 1e-9, "stable rank {sr} exceeds rank {rank}");
        assert!(sr >= 1.0 - 1e-9, "stable rank of a nonzero matrix is at least 1");
    }

    let lev = leverage_distribution_default(&a_pl).expect("leverage distribution");
    let amm_dist = amm_row_distribution(&a_er, &a_er).expect("norm distribution");
    for (dist, rows) in [(&lev, 30usize), (&amm_dist, 20)] {
        assert_eq!(dist.probs.len(), rows);
        assert!(dist.probs.iter().all(|&p| p >= 0.0));
        let total: f64 = dist.probs.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "probabilities sum to {total}");
    }

    let op = SketchOp::sign(10, 30, 777);
    let m1 = op.materialize().expect("materialize");
    let m2 = op.materialize().expect("materialize");
    assert_eq!(m1.entries(), m2.entries(), "same seed must give the same sketch");
    let s1 = apply_sketch(&op, &a_pl).expect("apply");
    let s2 = apply_sketch(&op, &a_pl).expect("apply");
    assert_eq!(s1.entries(), s2.entries(), "apply must be deterministic");
    let other = SketchOp::sign(10, 30, 778).materialize().expect("materialize");
    assert_ne!(m1.entries(), other.entries(), "different seeds must differ");
    let g1 = SketchOp::gaussian(6, 30, 123).materialize().unwrap();
    let g2 = SketchOp::gaussian(6, 30, 123).materialize().unwrap();
    assert_eq!(g1.entries(), g2.entries());
    let r1 = SketchOp::row_sample(5, 999, &lev).materialize().unwrap();
    let r2 = SketchOp::row_sample(5, 999, &lev).materialize().unwrap();
    assert_eq!(r1.entries(), r2.entries());

    let dist6 = amm_row_distribution(&a_small, &a_small).expect("distribution");
    let exact = a_small.t_mul(&a_small).expect("gram");
    let cells = exact.rows() * exact.cols();
    let trials = 20_000usize;
    let mut sums = vec![0.0f64; cells];
    let mut sq_sums = vec![0.0f64; cells];
    for seed in 0..trials {
        let op = SketchOp::row_sample(4, seed as u64, &dist6);
        let sa = apply_sketch(&op, &a_small).expect("apply");
        let g = sa.t_mul(&sa).expect("gram");
        for (i, &v) in g.entries().iter().enumerate() {
            sums[i] += v;
            sq_sums[i] += v * v;
        }
    }
    let n = trials as f64;
    for i in 0..cells {
        let mean = sums[i] / n;
        let var = (sq_sums[i] - n * mean * mean).max(0.0) / (n - 1.0);
        let se = (var / n).sqrt();
        let want = exact.entries()[i];
        assert!(
            (mean - want).abs() <= 5.0 * se + 1e-12,
            "row sampling biased at cell {i}: mean {mean}, expected {want}, se {se}"
        );
    }

    let a_sw = power_law_instance(24, 6, 1.0, 204);
    let sig2: Vec<f64> = svd_default(&a_sw)
        .expect("svd")
        .sigma
        .iter()
        .map(|s| s * s)
        .collect();
    assert_eq!(sig2.len(), 6);
    let slack = 1e-9 * sig2[0];
    let mut holds = 0usize;
    for i in 0..10u64 {
        let op = SketchOp::sign(150, 24, 9100 + i);
        let atil = apply_sketch(&op, &a_sw).expect("apply");
        let verdict = check_rayleigh_sandwich(&a_sw, &atil, 0.5).expect("sandwich");
        if verdict.holds {
            holds += 1;
            let st = svd_default(&atil).expect("svd");
            for (j, &s2_exact) in sig2.iter().enumerate() {
                let s2 = st.sigma.get(j).map_or(0.0, |s| s * s);
                assert!(
                    s2 >= 0.5 * s2_exact - slack && s2 <= 1.5 * s2_exact + slack,
                    "sandwich held but eigenvalue {j} escaped the band: {s2} vs {s2_exact}"
                );
            }
        }
    }
    assert!(holds >= 1, "the sandwich check never held at t = 150, eps = 0.5");

    finish(
        "02",
        started,
        600.0,
        &format!(
            "truncation optimality, pseudo-inverse identities, stable rank, \
             distributions, determinism, unbiased sampling ({trials} seeds), \
             sandwich implication ({holds}/10 held)"
        ),
    );
}

#[test]
fn criterion_03_amm_dimension_independence() {
    let started = Instant::now();
    let out = run_json(
        r#"{
        "version": 1, "task": "amm-project",
        "generator": {"shape": [512, 40], "spectrum": {"kind": "exact-rank", "r": 5}, "seed": 31001},
        "generator_b": {"shape": [512, 40], "spectrum": {"kind": "exact-rank", "r": 5}, "seed": 31002},
        "sweep": {"n": [512, 2048, 8192], "eps": [0.25]},
        "trials": 100, "seed_base": 424242, "output_path": "unused"
    }"#,
    );
    assert_eq!(out.failures, 0);
    assert_eq!(out.csv_rows.len(), 3, "one summary row per dimension");
    let mut medians = Vec::new();
    let mut detail = Vec::new();
    for row in &out.csv_rows {
        let n = num(row, 2);
        let t = num(row, 4);
        let rate = num(row, 6);
        let median = num(row, 7);
        assert!(
            rate >= 0.9,
            "pass rate {rate} at n = {n} fell below 0.9 (t = {t})"
        );
        medians.push(median);
        detail.push(format!("n={n}: rate {rate:.2}"));
    }
    let lo = medians.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = medians.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        hi / lo < 2.0,
        "median error must be flat in n: spread {hi}/{lo} = {}",
        hi / lo
    );
    finish(
        "03",
        started,
        900.0,
        &format!("{}; median spread {:.2}x", detail.join(", "), hi / lo),
    );
}

#[test]
fn criterion_04_row_sampling_amm() {
    let started = Instant::now();
    let out = run_json(
        r#"{
        "version": 1, "task": "amm-row-sample",
        "generator": {"shape": [512, 40], "spectrum": {"kind": "exact-rank", "r": 10}, "seed": 33301},
        "sweep": {"eps": [0.25]},
        "trials": 100, "seed_base": 424242, "output_path": "unused"
    }"#,
    );
    assert_eq!(out.failures, 0);
    assert_eq!(out.csv_rows.len(), 1);
    let row = &out.csv_rows[0];
    let t = num(row, 4);
    let rate = num(row, 6);
    assert!(rate >= 0.9, "row sampling pass rate {rate} below 0.9 at t = {t}");
    finish(
        "04",
        started,
        600.0,
        &format!("pass rate {rate:.2} at eps 0.25, t = {t}"),
    );
}

#[test]
fn criterion_05_error_scales_with_inverse_sqrt_t() {
    let started = Instant::now();
    let out = run_json(
        r#"{
        "version": 1, "task": "amm-project",
        "generator": {"shape": [512, 40], "spectrum": {"kind": "exact-rank", "r": 5}, "seed": 50001},
        "generator_b": {"shape": [512, 40], "spectrum": {"kind": "exact-rank", "r": 5}, "seed": 50002},
        "sweep": {"t": [64, 256], "eps": [0.25]},
        "trials": 200, "seed_base": 600, "output_path": "unused"
    }"#,
    );
    assert_eq!(out.failures, 0);
    assert_eq!(out.csv_rows.len(), 2);
    let mut med_by_t = std::collections::BTreeMap::new();
    for row in &out.csv_rows {
        med_by_t.insert(num(row, 4) as usize, num(row, 7));
    }
    let ratio = med_by_t[&64] / med_by_t[&256];
    assert!(
        (1.4..=2.9).contains(&ratio),
        "quadrupling t should roughly halve the median error, got ratio {ratio}"
    );
    finish(
        "05",
        started,
        600.0,
        &format!("median error ratio t=64 vs t=256 is {ratio:.2} (expected in [1.4, 2.9])"),
    );
}

#[test]
fn criterion_06_regression_guarantees() {
    let started = Instant::now();
    let cal = Calibration::defaults();
    let c_res = cal.constant("regression-residual").expect("pinned constant");
    let c_dist = cal.constant("regression-distance").expect("pinned constant");
    let t_res = (c_res * 20.0 / 0.1).ceil() as usize;
    let t_dist = (c_dist * 20.0 / (0.1 * 0.1)).ceil() as usize;

    let out = run_json(
        r#"{
        "version": 1, "task": "regression",
        "generator": {"shape": [4096, 40], "spectrum": {"kind": "exact-rank", "r": 20}, "seed": 33306},
        "sweep": {"eps": [0.1]},
        "trials": 100, "seed_base": 424242, "output_path": "unused"
    }"#,
    );
    assert_eq!(out.failures, 0);
    assert_eq!(out.csv_rows.len(), 2, "one row per sketch-size regime");
    let find = |t: usize| {
        out.csv_rows
            .iter()
            .find(|r| num(r, 3) as usize == t)
            .unwrap_or_else(|| panic!("no summary row at t = {t}"))
    };
    let res_row = find(t_res);
    let approx_rate = num(res_row, 5);
    assert!(
        approx_rate >= 0.9,
        "residual ratio <= 1.1 in only {approx_rate} of trials at t = {t_res}"
    );
    let dist_row = find(t_dist);
    let dist_rate = num(dist_row, 6);
    assert!(
        dist_rate >= 0.9,
        "solution distance bound held in only {dist_rate} of trials at t = {t_dist}"
    );
    finish(
        "06",
        started,
        600.0,
        &format!(
            "residual rate {approx_rate:.2} at t = {t_res}, distance rate {dist_rate:.2} at t = {t_dist}"
        ),
    );
}

#[test]
fn criterion_07_low_rank_approximation() {
    let started = Instant::now();
    let base = |task: &str| {
        format!(
            r#"{{
            "version": 1, "task": "{task}",
            "generator": {{"shape": [320, 40], "spectrum": {{"kind": "power-law", "alpha": 1.0}}, "seed": 33307}},
            "sweep": {{"eps": [0.2]}},
            "trials": 100, "seed_base": 424242, "output_path": "unused"
        }}"#
        )
    };

    let sign = run_json(&base("lowrank-sign"));
    assert_eq!(sign.failures, 0);
    let joint = sign
        .csv_rows
        .iter()
        .find(|r| num(r, 5) as usize == 0)
        .expect("joint all-k row");
    let sign_rate = num(joint, 7);
    assert!(
        sign_rate >= 0.9,
        "simultaneous all-k guarantee held in only {sign_rate} of sign-sketch trials"
    );

    let gaussian = run_json(&base("lowrank-gaussian"));
    assert_eq!(gaussian.failures, 0);
    assert_eq!(gaussian.csv_rows.len(), 6, "one row per k in the sweep");
    let mut gauss_min: f64 = 1.0;
    for row in &gaussian.csv_rows {
        let k = num(row, 5);
        let rate = num(row, 7);
        assert!(
            rate >= 0.9,
            "gaussian oversampling bound at k = {k} held in only {rate} of trials"
        );
        gauss_min = gauss_min.min(rate);
    }

    let leverage = run_json(&base("lowrank-leverage"));
    assert_eq!(leverage.failures, 0);
    let joint = leverage
        .csv_rows
        .iter()
        .find(|r| num(r, 5) as usize == 0)
        .expect("joint all-k row");
    let lev_rate = num(joint, 7);
    assert!(
        lev_rate >= 0.9,
        "simultaneous all-k guarantee held in only {lev_rate} of leverage-sampled trials"
    );

    finish(
        "07",
        started,
        1200.0,
        &format!(
            "sign joint rate {sign_rate:.2}, gaussian per-k min rate {gauss_min:.2}, leverage joint rate {lev_rate:.2}"
        ),
    );
}

#[test]
fn criterion_08_stable_rank_tail_bounds() {
    let started = Instant::now();
    let out = run_json(
        r#"{
        "version": 1, "task": "lowrank-tail",
        "generator": {"shape": [1024, 64], "spectrum": {"kind": "power-law", "alpha": 1.0}, "seed": 44101},
        "sweep": {"eps": [0.25], "k": [10]},
        "trials": 100, "seed_base": 500, "output_path": "unused"
    }"#,
    );
    assert_eq!(out.failures, 0);
    let rate_of = |method: &str| {
        let row = out
            .csv_rows
            .iter()
            .find(|r| field(r, 1) == method)
            .unwrap_or_else(|| panic!("no summary row for {method}"));
        num(row, 7)
    };
    let rank_k = rate_of("tail-sign-proj");
    let full = rate_of("tail-full-proj");
    assert!(rank_k >= 0.9, "rank-k tail bound held in only {rank_k} of trials");
    assert!(full >= 0.9, "full-rank tail bound held in only {full} of trials");
    finish(
        "08",
        started,
        600.0,
        &format!("rank-k mode rate {rank_k:.2}, full-rank mode rate {full:.2} at eps 0.25"),
    );
}

#[test]
fn criterion_09_concentration_labs() {
    let started = Instant::now();

    let frame = |n: usize| {
        format!(
            r#"{{
            "version": 1, "task": "chernoff-lab",
            "ensemble": {{"kind": "rank-r-frame", "n": {n}, "r": 4, "gamma": 8.0}},
            "sweep": {{"t": [4, 8]}},
            "trials": 300, "seed_base": 700, "output_path": "unused"
        }}"#
        )
    };
    let mut frame_meds: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for n in [32usize, 128, 512] {
        let out = run_json(&frame(n));
        assert_eq!(out.failures, 0);
        for row in &out.csv_rows {
            let t = num(row, 4) as usize;
            frame_meds.entry(t).or_default().push(num(row, 6));
        }
    }
    let mut frame_spread: f64 = 1.0;
    for (t, meds) in &frame_meds {
        assert_eq!(meds.len(), 3);
        let lo = meds.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = meds.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            hi / lo <= 2.0,
            "fixed-scale frame medians at t = {t} spread {}x across n",
            hi / lo
        );
        frame_spread = frame_spread.max(hi / lo);
    }

    let mut prev_hi = f64::NEG_INFINITY;
    let mut prev_med = f64::NEG_INFINITY;
    let mut diag_meds = Vec::new();
    for n in [8usize, 64, 512] {
        let ensemble = MatrixEnsemble::diagonal_rademacher(n).expect("ensemble");
        let mut samples = deviation_samples(&ensemble, 16, 2000, 905).expect("samples");
        samples.sort_by(|a, b| a.total_cmp(b));
        let median = samples[999];
        let ci_lo = samples[955];
        let ci_hi = samples[1043];
        assert!(
            median > prev_med,
            "diagonal deviation median must grow with n: {median} after {prev_med}"
        );
        assert!(
            ci_lo > prev_hi,
            "median confidence intervals must separate across n: [{ci_lo}, {ci_hi}] after hi {prev_hi}"
        );
        prev_hi = ci_hi;
        prev_med = median;
        diag_meds.push(median);
    }

    let jl = run_json(
        r#"{
        "version": 1, "task": "jl-lab",
        "sweep": {"t": [32, 40, 48], "eps": [0.5], "n": [64, 256, 1024], "k": [4]},
        "trials": 300, "seed_base": 808, "output_path": "unused"
    }"#,
    );
    assert_eq!(jl.failures, 0);
    let mut jl_rates: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for row in &jl.csv_rows {
        jl_rates.entry(num(row, 3) as usize).or_default().push(num(row, 7));
    }
    let mut jl_spread: f64 = 1.0;
    for (t, rates) in &jl_rates {
        assert_eq!(rates.len(), 3, "one failure rate per ambient dimension");
        let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rates.iter().cloned().fold(0.0f64, f64::max);
        assert!(lo > 0.0, "subspace embedding failure rate vanished at t = {t}");
        assert!(
            hi / lo <= 2.0,
            "failure rate at t = {t} varies {}x with ambient dimension",
            hi / lo
        );
        jl_spread = jl_spread.max(hi / lo);
    }

    let rudelson = run_json(
        r#"{
        "version": 1, "task": "rudelson-lab",
        "generator": {"shape": [256, 32], "spectrum": {"kind": "power-law", "alpha": 1.0}, "seed": 60601},
        "sweep": {"t": [20]},
        "trials": 1000, "seed_base": 909, "output_path": "unused"
    }"#,
    );
    assert_eq!(rudelson.failures, 0);
    assert_eq!(rudelson.csv_rows.len(), 1);
    let row = &rudelson.csv_rows[0];
    assert_eq!(num(row, 2) as usize, 1000);
    let exceed = num(row, 3) as usize;
    assert_eq!(
        exceed, 0,
        "sampled second moment exceeded the expectation bound {exceed} times"
    );

    finish(
        "09",
        started,
        1200.0,
        &format!(
            "frame medians flat within {frame_spread:.2}x, diagonal medians rise {:.3} -> {:.3} -> {:.3}, \
             embedding failure rate flat within {jl_spread:.2}x, norm bound exceedances 0/1000",
            diag_meds[0], diag_meds[1], diag_meds[2]
        ),
    );
}

#[test]
fn criterion_10_calibration_stability() {
    let started = Instant::now();
    let (cal_a, outcomes_a) = run_calibration(200, 1000).expect("calibration run");
    let (cal_b, outcomes_b) = run_calibration(200, 2000).expect("calibration run");
    for outcomes in [&outcomes_a, &outcomes_b] {
        assert_eq!(outcomes.len(), REGIME_KEYS.len());
    }
    let mut worst: f64 = 1.0;
    for key in REGIME_KEYS {
        let a = cal_a.constant(key).expect("regime present");
        let b = cal_b.constant(key).expect("regime present");
        assert!(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0);
        let ratio = (a / b).max(b / a);
        assert!(
            ratio <= 1.25 + 1e-9,
            "constant for {key} drifted {ratio}x between seed bases: {a} vs {b}"
        );
        worst = worst.max(ratio);
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 10: PASS (constants agree within {worst:.2}x across disjoint seed bases; {elapsed:.1}s)"
    );
}
