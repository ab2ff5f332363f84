//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phytoclass::dtw::{
    dissimilarity_matrix, dissimilarity_matrix_with_workers, dtw_dissimilarity, local_dissimilarity,
    DissimilarityMatrix, DtwConfig, PointNorm,
};
use phytoclass::eval::{
    cross_validate_data, evaluate, render_report, render_text, stratified_folds, ClassifierSpec,
    EvalConfig, FamilyData,
};
use phytoclass::features::{
    derived_features, derived_names, extract, percentile, proposed_features, proposed_names,
    shannon_entropy, third_central_moment, count_peaks, FeatureFamily, FeatureMatrix,
};
use phytoclass::forest::{train_forest, ForestConfig, ForestVariant};
use phytoclass::signal::{load_dataset, save_dataset, Dataset, PulseProfile};
use phytoclass::svm::{svm_train, svm_train_binary, KernelSpec, SmoParams};
use phytoclass::synth::{generate_dataset, SynthSpec};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn small_reference(cells_per_species: usize) -> Dataset {
    let spec = SynthSpec {
        cells_per_species,
        ..SynthSpec::reference()
    };
    generate_dataset(&spec).unwrap()
}

// ---------------------------------------------------------------- 1

/// Minimum mean cost over every monotone warping path, by exhaustive search.
fn enumerate_paths(cost: &[Vec<f64>]) -> f64 {
    fn walk(cost: &[Vec<f64>], i: usize, j: usize, total: f64, len: usize, best: &mut f64) {
        let total = total + cost[i][j];
        let len = len + 1;
        let (n, m) = (cost.len(), cost[0].len());
        if i + 1 == n && j + 1 == m {
            *best = best.min(total / len as f64);
            return;
        }
        if i + 1 < n && j + 1 < m {
            walk(cost, i + 1, j + 1, total, len, best);
        }
        if i + 1 < n {
            walk(cost, i + 1, j, total, len, best);
        }
        if j + 1 < m {
            walk(cost, i, j + 1, total, len, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(cost, 0, 0, 0.0, 0, &mut best);
    best
}

fn random_profile(rng: &mut ChaCha8Rng, id: &str, n: usize) -> PulseProfile {
    let channels = std::array::from_fn(|_| {
        (0..n)
            .map(|_| {
                if rng.random_bool(0.15) {
                    0.0
                } else {
                    rng.random_range(-5.0..100.0)
                }
            })
            .collect()
    });
    PulseProfile::new(id, None, channels, 0.5).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs = 1200;
    let mut worst: f64 = 0.0;
    for k in 0..pairs {
        let (n, m) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let q = random_profile(&mut rng, "q", n);
        let r = random_profile(&mut rng, "r", m);
        let norm = if k % 2 == 0 { PointNorm::L2 } else { PointNorm::L1 };
        let cost: Vec<Vec<f64>> = (0..q.len())
            .map(|i| (0..r.len()).map(|j| local_dissimilarity(&q.point(i), &r.point(j), norm)).collect())
            .collect();
        let expected = enumerate_paths(&cost);
        let cfg = DtwConfig { point_norm: norm, ..DtwConfig::default() };
        let got = dtw_dissimilarity(&q, &r, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((got - expected).abs());
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-12, format!("max deviation {worst:e} > 1e-12"))?;
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("{pairs} pairs, max deviation {worst:e}, {elapsed:.2?}"))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let full = small_reference(8);
    let ds = full.subset(&(0..50).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let cfg = DtwConfig::default();
    let m1 = dissimilarity_matrix_with_workers(&ds, &cfg, 1).map_err(|e| e.to_string())?;
    let n = m1.len();
    check(n == 50, format!("matrix has {n} rows"))?;
    for i in 0..n {
        check(m1.get(i, i) == 0.0, format!("diagonal {i} nonzero"))?;
        for j in 0..n {
            let v = m1.get(i, j);
            check((0.0..=1.0).contains(&v), format!("entry ({i},{j}) = {v} outside [0,1]"))?;
            check(v.to_bits() == m1.get(j, i).to_bits(), format!("asymmetric at ({i},{j})"))?;
        }
    }
    for workers in [2, 8] {
        let m = dissimilarity_matrix_with_workers(&ds, &cfg, workers).map_err(|e| e.to_string())?;
        let same = (0..n).all(|i| (0..n).all(|j| m.get(i, j).to_bits() == m1.get(i, j).to_bits()));
        check(same, format!("{workers} workers differ from 1 worker"))?;
    }
    Ok("50 profiles, symmetric, zero diagonal, in [0,1], identical for 1/2/8 workers".into())
}

// ---------------------------------------------------------------- 3

/// k-th smallest value (0-based) by counting, without sorting.
fn kth_smallest(v: &[f64], k: usize) -> f64 {
    *v.iter()
        .find(|&&x| {
            let below = v.iter().filter(|&&y| y < x).count();
            let at_most = v.iter().filter(|&&y| y <= x).count();
            below <= k && k < at_most
        })
        .unwrap()
}

fn percentile_oracle(v: &[f64], m: f64) -> f64 {
    let h = (v.len() - 1) as f64 * m / 100.0;
    let lo = h.floor() as usize;
    let a = kth_smallest(v, lo);
    if lo + 1 >= v.len() {
        return a;
    }
    a + (h - lo as f64) * (kth_smallest(v, lo + 1) - a)
}

/// Exact third central moment of `k_i / 4` via integer power sums.
fn third_moment_oracle(quarters: &[i64]) -> f64 {
    let n = quarters.len() as i128;
    let s1: i128 = quarters.iter().map(|&k| k as i128).sum();
    let s2: i128 = quarters.iter().map(|&k| (k as i128).pow(2)).sum();
    let s3: i128 = quarters.iter().map(|&k| (k as i128).pow(3)).sum();
    // n^3 * mu3 * 4^3 = n^2 s3 - 3 n s1 s2 + 2 s1^3
    let scaled = n * n * s3 - 3 * n * s1 * s2 + 2 * s1.pow(3);
    scaled as f64 / (n.pow(3) as f64 * 64.0)
}

/// H = ln S - (1/S) sum q ln q over the positive part.
fn entropy_oracle(v: &[f64]) -> f64 {
    let q: Vec<f64> = v.iter().map(|x| x.max(0.0)).filter(|&x| x > 0.0).collect();
    let s: f64 = q.iter().sum();
    if s == 0.0 {
        return 0.0;
    }
    s.ln() - q.iter().map(|x| x * x.ln()).sum::<f64>() / s
}

/// Collapses runs of equal values, then counts strict interior maxima.
fn peaks_oracle(v: &[f64]) -> usize {
    let mut runs: Vec<f64> = Vec::new();
    for &x in v {
        if runs.last() != Some(&x) {
            runs.push(x);
        }
    }
    (1..runs.len().saturating_sub(1))
        .filter(|&i| runs[i - 1] < runs[i] && runs[i] > runs[i + 1])
        .count()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sequences = 10_000;
    let tol = 1e-9;
    for s in 0..sequences {
        let n = rng.random_range(1..=60);
        let (quarters, values): (Vec<i64>, Vec<f64>) = if s % 2 == 0 {
            // small integer levels force ties and plateaus
            let k: Vec<i64> = (0..n).map(|_| rng.random_range(-1..=4)).collect();
            let v = k.iter().map(|&x| x as f64 / 4.0).collect();
            (k, v)
        } else {
            let k: Vec<i64> = (0..n).map(|_| rng.random_range(-40..=800)).collect();
            let v = k.iter().map(|&x| x as f64 / 4.0).collect();
            (k, v)
        };
        let m = rng.random_range(0.0..=100.0);
        let p = percentile(&values, m).map_err(|e| e.to_string())?;
        let po = percentile_oracle(&values, m);
        check((p - po).abs() <= tol, format!("percentile {p} vs {po} on {values:?}, m={m}"))?;
        let p30 = percentile(&values, 30.0).unwrap();
        check((p30 - percentile_oracle(&values, 30.0)).abs() <= tol, "percentile30 mismatch")?;

        let mu3 = third_central_moment(&values).map_err(|e| e.to_string())?;
        let mo = third_moment_oracle(&quarters);
        check((mu3 - mo).abs() <= tol * mo.abs().max(1.0), format!("mu3 {mu3} vs {mo} on {values:?}"))?;

        let h = shannon_entropy(&values).map_err(|e| e.to_string())?;
        let ho = entropy_oracle(&values);
        check((h - ho).abs() <= tol, format!("entropy {h} vs {ho} on {values:?}"))?;
        check(h >= 0.0 && h <= (n as f64).ln() + 1e-12, format!("entropy {h} outside [0, ln {n}]"))?;

        let c = count_peaks(&values);
        let co = peaks_oracle(&values);
        check(c == co, format!("peaks {c} vs {co} on {values:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let profile = random_profile(&mut rng, "p", 17);
    let d = derived_features(&profile).len();
    let p = proposed_features(&profile).map_err(|e| e.to_string())?.len();
    check(d == 32 && derived_names().len() == 32, format!("derived dimension {d}"))?;
    check(p == 72 && proposed_names().len() == 72, format!("proposed dimension {p}"))?;
    Ok(format!("{sequences} sequences within {tol:e}; dimensions 32 and 72"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let ds = small_reference(29);
    let ds = ds.subset(&(0..200).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let f = extract(&ds, FeatureFamily::Proposed).map_err(|e| e.to_string())?;
    check(f.n_rows() == 200, "feature matrix is not 200 rows")?;
    let cfg = |variant| ForestConfig {
        ntree: 50,
        seed: 44,
        ..ForestConfig::new(variant)
    };
    let fit = |c: &ForestConfig| train_forest(&f, c).map_err(|e| e.to_string());
    let rf = fit(&cfg(ForestVariant::Rf))?;
    let rrf1 = fit(&ForestConfig { lambda: 1.0, ..cfg(ForestVariant::Rrf) })?;
    let grf0 = fit(&ForestConfig { gamma: Some(0.0), ..cfg(ForestVariant::Grf) })?;
    let rrf = fit(&cfg(ForestVariant::Rrf))?;
    let grrf0 = fit(&ForestConfig { gamma: Some(0.0), ..cfg(ForestVariant::Grrf) })?;
    let same = |a: &phytoclass::forest::ForestModel, b: &phytoclass::forest::ForestModel| {
        a.trees.len() == 50 && a.trees.iter().zip(&b.trees).all(|(x, y)| x == y)
    };
    check(same(&rf, &rrf1), "RRF(lambda=1) differs from RF")?;
    check(same(&rf, &grf0), "GRF(gamma=0) differs from RF")?;
    check(same(&rrf, &grrf0), "GRRF(gamma=0) differs from RRF")?;
    Ok("RRF(1)=RF, GRF(0)=RF, GRRF(0)=RRF over 50 trees on 200 rows".into())
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let ds = small_reference(10);
    let f = extract(&ds, FeatureFamily::Proposed).map_err(|e| e.to_string())?;
    let mut machines = 0;
    for (kernel, c) in [
        (KernelSpec::rbf(0.01), 32.0),
        (KernelSpec::polynomial(1.0 / 72.0, 3, 0.0), 32.0),
        (KernelSpec::rbf(0.5), 1.0),
    ] {
        let params = SmoParams { c, ..SmoParams::default() };
        let model = svm_train(&f, kernel, params, true, 5).map_err(|e| e.to_string())?;
        for pm in &model.machines {
            let m = &pm.machine;
            check(m.alpha.iter().all(|&a| (0.0..=c).contains(&a)), "alpha outside [0, C]")?;
            let b = m.dual_balance();
            check(b.abs() <= 1e-9, format!("|sum alpha y| = {b:e}"))?;
            machines += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..80 {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let x: f64 = rng.random_range(-3.0..3.0);
        let offset = rng.random_range(0.5..3.0);
        rows.push(vec![x, y * offset - 0.5 * x]);
        labels.push(y);
    }
    let c = 1e4;
    let params = SmoParams { c, ..SmoParams::default() };
    let m = svm_train_binary(&rows, &labels, KernelSpec::polynomial(1.0, 1, 0.0), params, 9).map_err(|e| e.to_string())?;
    check(m.alpha.iter().all(|&a| (0.0..=c).contains(&a)), "separable: alpha outside [0, C]")?;
    check(m.dual_balance().abs() <= 1e-9, "separable: dual balance")?;
    let correct = rows.iter().zip(&labels).filter(|(r, y)| m.decision(r) * **y > 0.0).count();
    check(correct == rows.len(), format!("separable training accuracy {correct}/{}", rows.len()))?;
    Ok(format!("{machines} one-vs-one machines feasible; separable set 100% at C=1e4"))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let ds = generate_dataset(&SynthSpec::reference()).map_err(|e| e.to_string())?;
    let labels = ds.labels().map_err(|e| e.to_string())?;
    check(labels.len() == 700 && ds.label_set().len() == 7, "reference set is not 7 x 100")?;
    let plan = stratified_folds(&labels, 4, 10, 2017).map_err(|e| e.to_string())?;
    for r in 0..10 {
        for f in 0..4 {
            let test = plan.test_indices(r, f);
            check(test.len() == 175, format!("repeat {r} fold {f}: {} cells", test.len()))?;
            for l in ds.label_set() {
                let c = test.iter().filter(|&&i| &labels[i] == l).count();
                check(c == 25, format!("repeat {r} fold {f}: {c} of {l}"))?;
            }
        }
    }
    Ok("10 repeats x 4 folds, each 175 = 25 x 7".into())
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let ds = generate_dataset(&SynthSpec::reference()).map_err(|e| e.to_string())?;
    let cfg = EvalConfig::reference();
    let matrix = dissimilarity_matrix(&ds, &cfg.dtw).map_err(|e| e.to_string())?;
    let report = evaluate(&ds, &cfg, Some(&matrix)).map_err(|e| e.to_string())?;
    let text = render_text(&report, &cfg.comparisons).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    render_report(&report, &cfg.comparisons, dir.path()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    check(report.cells.len() == 18, format!("{} cells instead of 18", report.cells.len()))?;
    check(report.repeats == 10 && report.k == 4, "grid is not 4-fold x 10-repeat")?;
    let rf = report.cell("proposed/RF").map_err(|e| e.to_string())?.mean;
    check(rf >= 0.95, format!("proposed/RF average {rf:.4} < 0.95"))?;
    let worst = report
        .cells
        .iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
        .unwrap();
    check(worst.mean >= 0.70, format!("{} average {:.4} < 0.70", worst.id(), worst.mean))?;
    let tables = text.lines().filter(|l| l.starts_with("ACCURACY OF TEST RECOGNITION")).count();
    check(tables == 3, format!("{tables} accuracy tables rendered"))?;
    for l in text.lines().filter(|l| l.starts_with("Fold") || l.starts_with("Average") || l.starts_with("Classifier")) {
        check(l.split_whitespace().count() == 7, format!("table row has wrong width: {l}"))?;
    }
    check(text.contains("CONTINGENCY TABLE"), "no contingency table rendered")?;
    check(elapsed < Duration::from_secs(15 * 60), format!("took {elapsed:?}"))?;
    let threads = rayon::current_num_threads();
    Ok(format!(
        "proposed/RF {:.2}%, lowest {} {:.2}%, {elapsed:.1?} on {threads} thread(s)",
        100.0 * rf,
        worst.id(),
        100.0 * worst.mean
    ))
}

// ---------------------------------------------------------------- 8

const INJECTED: &str = "FLY_LS_third_moment";
const INJECTED_RANGE: f64 = 69_000_000.0;

/// Affinely maps one column onto `[0, INJECTED_RANGE]`.
fn inject_huge_range(f: &FeatureMatrix) -> FeatureMatrix {
    let j = f.column_index(INJECTED).unwrap();
    let col = f.column(j);
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = f.clone();
    for row in &mut out.rows {
        row[j] = (row[j] - lo) / (hi - lo) * INJECTED_RANGE;
    }
    out
}

fn criterion_8() -> Outcome {
    let ds = generate_dataset(&SynthSpec::reference()).map_err(|e| e.to_string())?;
    let cfg = EvalConfig::reference();
    let labels = ds.labels().map_err(|e| e.to_string())?;
    let plan = stratified_folds(&labels, cfg.k, cfg.repeats, cfg.seed).map_err(|e| e.to_string())?;
    let pick = |name: &str| -> ClassifierSpec {
        cfg.classifiers
            .iter()
            .find(|c| c.name == name && c.applies_to(FeatureFamily::Proposed))
            .unwrap()
            .clone()
    };
    let knn = pick("K-NN");
    let rf = pick("RF");
    let base = extract(&ds, FeatureFamily::Proposed).map_err(|e| e.to_string())?;
    let injected = inject_huge_range(&base);
    let mean = |f: &FeatureMatrix, c: &ClassifierSpec| -> Result<f64, String> {
        let out = cross_validate_data(&FamilyData::Fixed(f.clone()), c, &plan).map_err(|e| e.to_string())?;
        Ok(phytoclass::eval::average_accuracy(&out))
    };
    let rf_base = mean(&base, &rf)?;
    let rf_inj = mean(&injected, &rf)?;
    let knn_base = mean(&base, &knn)?;
    let knn_inj = mean(&injected, &knn)?;
    let summary = format!(
        "RF {:.2}% -> {:.2}%, unscaled K-NN {:.2}% -> {:.2}%",
        100.0 * rf_base,
        100.0 * rf_inj,
        100.0 * knn_base,
        100.0 * knn_inj
    );
    check(rf_inj - knn_inj >= 0.10, format!("K-NN only {:.2} points below RF: {summary}", 100.0 * (rf_inj - knn_inj)))?;
    check((rf_inj - rf_base).abs() <= 0.01, format!("RF moved by more than 1 point: {summary}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- 9

fn pipeline_once(dir: &std::path::Path, threads: usize) -> Result<Vec<u8>, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let e = |e: phytoclass::Error| e.to_string();
        let ds_path = dir.join("dataset.jsonl");
        save_dataset(&generate_dataset(&SynthSpec::reference()).map_err(e)?, &ds_path).map_err(e)?;
        let ds = load_dataset(&ds_path).map_err(e)?;
        for family in [FeatureFamily::Derived, FeatureFamily::Proposed] {
            let f = extract(&ds, family).map_err(e)?;
            let mut buf = Vec::new();
            f.write_csv(&mut buf).map_err(|x| x.to_string())?;
            std::fs::write(dir.join(format!("{family}.csv")), buf).map_err(|x| x.to_string())?;
        }
        let mut cfg = EvalConfig::reference();
        cfg.repeats = 2;
        for c in &mut cfg.classifiers {
            if let phytoclass::eval::ClassifierKind::Forest(f) = &mut c.kind {
                f.ntree = 40;
            }
        }
        let m = dissimilarity_matrix(&ds, &cfg.dtw).map_err(e)?;
        let mut buf = Vec::new();
        m.write_csv(&mut buf).map_err(|x| x.to_string())?;
        let m = DissimilarityMatrix::read_csv(&buf[..]).map_err(e)?.with_labels(&ds).map_err(e)?;
        let report = evaluate(&ds, &cfg, Some(&m)).map_err(e)?;
        render_report(&report, &cfg.comparisons, dir).map_err(e)?;
        std::fs::read(dir.join("report.json")).map_err(|x| x.to_string())
    })
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ra = pipeline_once(a.path(), 1)?;
    let rb = pipeline_once(b.path(), 4)?;
    check(!ra.is_empty() && ra == rb, "report.json differs between runs")?;
    for f in ["dataset.jsonl", "derived.csv", "proposed.csv", "report.txt"] {
        let x = std::fs::read(a.path().join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| e.to_string())?;
        check(x == y, format!("{f} differs between runs"))?;
    }
    Ok(format!("two runs (1 and 4 threads) gave identical {}-byte report.json", ra.len()))
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {n}: PASS  {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL  {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
