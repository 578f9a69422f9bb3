//! Acceptance criteria. Each test prints one `[acceptance]` line with its verdict.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use causal_shap::attribution::{
    causal_shap, exact_shapley, AttributionResult, CausalSampler, CoalitionSampler, Method, NodeModel, SamplerConfig,
};
use causal_shap::config::RunConfig;
use causal_shap::data::{cardio_spec, lung_cancer_spec, sample_sem, train_test_split, DataTable};
use causal_shap::discovery::{pc, pc_with_test, Cpdag, DSeparationOracle, Dag};
use causal_shap::effects::{estimate_effects, CausalEffects, CausalWeights, EffectsConfig};
use causal_shap::model::{expected_prediction, train_linear, FnPredictor, LinearModel, Predictor};
use causal_shap::pipeline;

fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    println!(
        "[acceptance] criterion {criterion:>2} {} | {title} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Discovery, effects and a sampler on the training split of a built-in dataset.
struct Fitted {
    train: DataTable,
    test: DataTable,
    model: LinearModel,
    effects: CausalEffects,
    sampler: CausalSampler,
    baseline: f64,
}

fn fit(table: DataTable, seed: u64) -> Fitted {
    let split = train_test_split(&table, 0.2, seed).unwrap();
    let model = train_linear(&split.train, 0.0).unwrap();
    let result = pc(&split.train, 0.05, causal_shap::discovery::default_max_cond_size(table.n_columns())).unwrap();
    let effects = estimate_effects(&split.train, &result.cpdag, EffectsConfig::default()).unwrap();
    let sampler = CausalSampler::new(&split.train, effects.dag.clone()).unwrap();
    let baseline = expected_prediction(&model, &split.train).unwrap().expected_prediction;
    Fitted {
        train: split.train,
        test: split.test,
        model,
        effects,
        sampler,
        baseline,
    }
}

fn explain_test(f: &Fitted, config: &SamplerConfig) -> Vec<AttributionResult> {
    (0..f.test.row_count())
        .into_par_iter()
        .map(|r| {
            causal_shap(
                &f.model,
                &f.test.feature_row(r),
                &f.sampler,
                &f.effects.weights,
                f.baseline,
                config,
                r,
            )
            .unwrap()
        })
        .collect()
}

fn feature(t: &DataTable, name: &str) -> usize {
    t.feature_names().iter().position(|n| n == name).unwrap()
}

#[test]
fn criterion_01_local_accuracy() {
    let start = Instant::now();
    let mut checked = 0;
    let mut degenerate = 0;
    let mut worst: f64 = 0.0;
    for table in [
        sample_sem(&lung_cancer_spec(0), 1000).unwrap(),
        sample_sem(&cardio_spec(0), 1000).unwrap(),
    ] {
        let f = fit(table, 0);
        assert_eq!(f.test.row_count(), 200);
        for r in explain_test(&f, &SamplerConfig::new(0)) {
            if r.is_degenerate() {
                degenerate += 1;
                continue;
            }
            let gap = r.prediction - r.baseline;
            let err = (r.phi_normalized.iter().sum::<f64>() - gap).abs() / gap.abs().max(1.0);
            worst = worst.max(err);
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 120.0 && checked > 0;
    report(
        1,
        "local accuracy",
        pass,
        &format!("{checked} instances checked, {degenerate} degenerate, worst relative error {worst:.2e}, {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_missingness() {
    let lung = fit(sample_sem(&lung_cancer_spec(0), 1000).unwrap(), 0);
    let cardio = fit(sample_sem(&cardio_spec(0), 1000).unwrap(), 0);
    let cfg = SamplerConfig::new(0);
    let mut failures = Vec::new();
    for (f, names) in [(&lung, vec!["drink_coffee"]), (&cardio, vec!["mental_health", "family_history"])] {
        let results = explain_test(f, &cfg);
        for name in names {
            let k = feature(&f.train, name);
            let bad = results
                .iter()
                .filter(|r| r.phi_causal[k] != 0.0 || r.phi_normalized[k] != 0.0)
                .count();
            if bad > 0 || f.effects.gamma()[k] != 0.0 {
                failures.push(format!("{name}: {bad} nonzero instances, gamma {}", f.effects.gamma()[k]));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        2,
        "missingness",
        pass,
        &if pass {
            "drink_coffee, mental_health, family_history exactly 0 on all 200 test instances".to_string()
        } else {
            failures.join("; ")
        },
    );
    assert!(pass);
}

/// `f + δ·1[x_i > threshold]`.
fn bumped(model: &LinearModel, i: usize, threshold: f64, delta: f64) -> impl Predictor + '_ {
    let n = model.n_features();
    FnPredictor::new(n, move |row: &[f64]| {
        model.intercept
            + model.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
            + if row[i] > threshold { delta } else { 0.0 }
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[test]
fn criterion_03_consistency() {
    let fitted = [
        fit(sample_sem(&lung_cancer_spec(1), 1000).unwrap(), 1),
        fit(sample_sem(&cardio_spec(1), 1000).unwrap(), 1),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut passes = 0;
    let mut hypothesis_violations = 0;
    let trials = 100;
    for trial in 0..trials {
        let f = &fitted[trial % 2];
        let n = f.train.n_features();
        let candidates: Vec<usize> = (0..n).filter(|&k| f.effects.gamma()[k] > 0.0).collect();
        let i = *candidates.choose(&mut rng).unwrap();
        let column = f.train.column(f.train.feature_indices()[i]);
        let threshold = median(column);
        // Instances on the high side of the bump, where Δf′(S) ≥ Δf(S) holds for every S.
        let rows: Vec<usize> = (0..f.test.row_count())
            .filter(|&r| f.test.feature_row(r)[i] > threshold)
            .collect();
        let r = *rows.choose(&mut rng).unwrap();
        let x = f.test.feature_row(r);
        let delta = rng.random_range(0.1..5.0);
        let mut cfg = SamplerConfig::new(rng.random());
        cfg.mc_samples = 32;
        if trial % 4 == 3 {
            cfg.exhaustive_max_features = 0;
            cfg.mc_iterations = 48;
        }
        let f_prime = bumped(&f.model, i, threshold, delta);
        let base_prime = expected_prediction(&f_prime, &f.train).unwrap().expected_prediction;
        let a = causal_shap(&f.model, &x, &f.sampler, &f.effects.weights, f.baseline, &cfg, r).unwrap();
        let b = causal_shap(&f_prime, &x, &f.sampler, &f.effects.weights, base_prime, &cfg, r).unwrap();

        // Check the hypothesis on every coalition with an independent frozen sample.
        let noise = f.sampler.draw_noise(32, &mut ChaCha8Rng::seed_from_u64(trial as u64));
        for mask in 0u32..(1 << n) {
            let s: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
            if s[i] {
                continue;
            }
            let mut si = s.clone();
            si[i] = true;
            let mean = |p: &dyn Predictor, c: &[bool]| {
                let preds = p.predict_batch(&f.sampler.rows(&x, c, &noise)).unwrap();
                preds.iter().sum::<f64>() / preds.len() as f64
            };
            let d = mean(&f.model, &si) - mean(&f.model, &s);
            let d_prime = mean(&f_prime, &si) - mean(&f_prime, &s);
            if d_prime < d - 1e-9 {
                hypothesis_violations += 1;
            }
        }
        if b.phi_causal[i] >= a.phi_causal[i] {
            passes += 1;
        }
    }
    let pass = passes == trials && hypothesis_violations == 0;
    report(
        3,
        "consistency",
        pass,
        &format!("{passes}/{trials} trials with phi_i(f') >= phi_i(f); {hypothesis_violations} hypothesis violations"),
    );
    assert!(pass);
}

fn ground_truth_ordering(criterion: u32, builtin: &str) {
    let start = Instant::now();
    let cfg = RunConfig::from_json_str(
        &format!(r#"{{"seed": 0, "dataset": {{"builtin": "{builtin}", "n": 1000}}, "evaluation": {{"seeds": [0]}}}}"#),
        &[],
    )
    .unwrap();
    let rep = pipeline::evaluate(&cfg).unwrap();
    let gt = &rep.seeds[0].ground_truth;
    let get = |m: &str| gt.iter().find(|g| g.method == m).unwrap();
    let (c, m, k) = (get("causal"), get("marginal"), get("kernel"));
    let pass = c.rmse < m.rmse && c.rmse < k.rmse && (criterion != 4 || c.rmse < 0.5);
    let secs = start.elapsed().as_secs_f64();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    report(
        criterion,
        &format!("ground-truth RMSE ordering, {builtin}"),
        pass && secs < 300.0,
        &format!(
            "reduced {:?}; RMSE signed-mean profile causal {:.4} marginal {:.4} kernel {:.4}; \
             mean-|phi| RMSE {:.4}/{:.4}/{:.4}; per-instance RMSE {:.4}/{:.4}/{:.4}; \
             truth [{}] causal [{}] marginal [{}]; truth |.| [{}] causal |.| [{}]; {secs:.1}s",
            c.reduced_features,
            c.rmse,
            m.rmse,
            k.rmse,
            c.rmse_mean_abs,
            m.rmse_mean_abs,
            k.rmse_mean_abs,
            c.rmse_per_instance,
            m.rmse_per_instance,
            k.rmse_per_instance,
            fmt(&c.exact_values),
            fmt(&c.method_values),
            fmt(&m.method_values),
            fmt(&c.exact_mean_abs),
            fmt(&c.method_mean_abs),
        ),
    );
    assert!(pass && secs < 300.0);
}

#[test]
fn criterion_04_ground_truth_lung_cancer() {
    ground_truth_ordering(4, "lung_cancer");
}

#[test]
fn criterion_05_ground_truth_cardio() {
    ground_truth_ordering(5, "cardio");
}

// Markov equivalence class by covered-edge reversals, over parent bitmasks.
fn equivalence_class(parents: &[u8]) -> Vec<Vec<u8>> {
    let n = parents.len();
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut queue = VecDeque::from([parents.to_vec()]);
    seen.insert(parents.to_vec());
    while let Some(g) = queue.pop_front() {
        for y in 0..n {
            for x in 0..n {
                // x → y is covered when pa(y) = pa(x) ∪ {x}.
                if g[y] >> x & 1 == 1 && g[y] == g[x] | (1 << x) {
                    let mut h = g.clone();
                    h[y] &= !(1 << x);
                    h[x] |= 1 << y;
                    if seen.insert(h.clone()) {
                        queue.push_back(h);
                    }
                }
            }
        }
    }
    seen.into_iter().collect()
}

/// (directed, undirected) edge sets of the essential graph.
fn essential_graph(parents: &[u8]) -> (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>) {
    let class = equivalence_class(parents);
    let n = parents.len();
    let mut directed = BTreeSet::new();
    let mut undirected = BTreeSet::new();
    for y in 0..n {
        for x in 0..n {
            if parents[y] >> x & 1 == 1 {
                if class.iter().all(|g| g[y] >> x & 1 == 1) {
                    directed.insert((x, y));
                } else {
                    undirected.insert((x.min(y), x.max(y)));
                }
            }
        }
    }
    (directed, undirected)
}

fn cpdag_edges(g: &Cpdag) -> (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>) {
    let mut directed = BTreeSet::new();
    let mut undirected = BTreeSet::new();
    for (a, b) in g.skeleton_pairs() {
        if g.is_undirected(a, b) {
            undirected.insert((a, b));
        } else if g.is_directed(a, b) {
            directed.insert((a, b));
        } else {
            directed.insert((b, a));
        }
    }
    (directed, undirected)
}

#[test]
fn criterion_06_pc_recovery() {
    let truth: BTreeSet<(usize, usize)> = [(0, 2), (0, 3), (1, 2), (1, 3)].into_iter().collect();
    let mut recovered = 0;
    let mut details = Vec::new();
    for seed in 0..5 {
        let t = sample_sem(&lung_cancer_spec(seed), 1000).unwrap();
        let r = pc(&t, 0.05, causal_shap::discovery::default_max_cond_size(t.n_columns())).unwrap();
        let skel: BTreeSet<(usize, usize)> = r.cpdag.skeleton_pairs().into_iter().collect();
        if skel == truth {
            recovered += 1;
        } else {
            let names = t.column_names();
            let missing: Vec<String> = truth
                .difference(&skel)
                .map(|&(a, b)| format!("{}-{}", names[a], names[b]))
                .collect();
            let extra: Vec<String> = skel
                .difference(&truth)
                .map(|&(a, b)| format!("{}-{}", names[a], names[b]))
                .collect();
            details.push(format!("seed {seed}: missing {missing:?} extra {extra:?}"));
        }
    }

    // Every DAG on up to 6 nodes up to isomorphism: upper-triangular edge sets, randomly relabelled.
    let mut oracle_total = 0usize;
    let mut oracle_failures = 0usize;
    for n in 1..=6usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let outcomes: Vec<bool> = (0u32..1 << pairs.len())
            .into_par_iter()
            .map(|mask| {
                let mut rng = ChaCha8Rng::seed_from_u64(mask as u64 * 31 + n as u64);
                let mut relabel: Vec<usize> = (0..n).collect();
                relabel.shuffle(&mut rng);
                let edges: Vec<(usize, usize)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &(a, b))| (relabel[a], relabel[b]))
                    .collect();
                let mut parents = vec![0u8; n];
                for &(a, b) in &edges {
                    parents[b] |= 1 << a;
                }
                let names: Vec<String> = (0..n).map(|k| format!("v{k}")).collect();
                let dag = Dag::new(names.clone(), &edges).unwrap();
                let result = pc_with_test(&DSeparationOracle { dag: &dag }, names, n.saturating_sub(2));
                cpdag_edges(&result.cpdag) == essential_graph(&parents)
            })
            .collect();
        oracle_total += outcomes.len();
        oracle_failures += outcomes.iter().filter(|&&ok| !ok).count();
    }
    let pass = recovered >= 4 && oracle_failures == 0;
    report(
        6,
        "PC recovery",
        pass,
        &format!(
            "lung skeleton recovered in {recovered}/5 seeds {details:?}; oracle CPDAG exact on {}/{oracle_total} DAGs",
            oracle_total - oracle_failures
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_ida_fidelity() {
    let t = sample_sem(&cardio_spec(0), 5000).unwrap();
    let r = pc(&t, 0.05, causal_shap::discovery::default_max_cond_size(t.n_columns())).unwrap();
    let e = estimate_effects(&t, &r.cpdag, EffectsConfig::default()).unwrap();
    let w_diet = e.total_effects[feature(&t, "diet_score")];
    let w_sleep = e.total_effects[feature(&t, "sleep_duration")];
    let pass = (w_diet - 0.6).abs() <= 0.1 && (w_sleep - 0.75).abs() <= 0.1;
    report(
        7,
        "IDA fidelity",
        pass,
        &format!("W_diet {w_diet:.4} (0.6), W_sleep {w_sleep:.4} (0.75)"),
    );
    assert!(pass);
}

/// `v_c(S)` for a linear model: the model at the interventional mean of the fitted SEM.
fn analytic_value(model: &LinearModel, sampler: &CausalSampler, x: &[f64], coalition: &[bool]) -> f64 {
    let dag = sampler.dag();
    let columns = sampler.feature_columns();
    let mut mean = vec![0.0; dag.n()];
    for v in dag.topological_order() {
        mean[v] = match columns.iter().position(|&c| c == v) {
            Some(k) if coalition[k] => x[k],
            _ => match &sampler.cache().nodes[v] {
                NodeModel::Root { pool } => pool.iter().sum::<f64>() / pool.len() as f64,
                NodeModel::Linear {
                    parents,
                    intercept,
                    coefficients,
                    ..
                } => intercept + parents.iter().zip(coefficients).map(|(&p, b)| b * mean[p]).sum::<f64>(),
            },
        };
    }
    model.intercept + model.weights.iter().zip(columns).map(|(w, &c)| w * mean[c]).sum::<f64>()
}

#[test]
fn criterion_08_oracle_equivalence() {
    let t = sample_sem(&lung_cancer_spec(8), 1000).unwrap();
    let dag = Dag::new(t.column_names().to_vec(), &[(0, 2), (1, 2), (0, 3), (1, 3)]).unwrap();
    let sampler = CausalSampler::new(&t, dag).unwrap();
    let model = LinearModel::new(vec![2.0, 1.2, 0.5], 1.0);
    let weights = CausalWeights {
        gamma: vec![0.5, 0.3, 0.2],
        no_causal_signal: false,
    };
    let x = t.feature_row(17);
    let exact = exact_shapley(3, |s| Ok(analytic_value(&model, &sampler, &x, s))).unwrap();
    let mut worst_z: f64 = 0.0;
    let mut within = 0;
    for seed in 0..5 {
        let mut cfg = SamplerConfig::new(seed);
        cfg.mc_samples = 10_000;
        let r = causal_shap(&model, &x, &sampler, &weights, 0.0, &cfg, 0).unwrap();
        assert!(r.diagnostics.exhaustive);
        for k in 0..3 {
            let target = weights.gamma[k] * exact[k];
            let gap = (r.phi_causal[k] - target).abs();
            let z = gap / r.std_errors[k];
            worst_z = worst_z.max(z);
            if gap <= 3.0 * r.std_errors[k] {
                within += 1;
            }
        }
    }
    let pass = within == 15;
    report(
        8,
        "oracle equivalence",
        pass,
        &format!("{within}/15 coordinates within 3 SE; largest |error|/SE {worst_z:.2}"),
    );
    assert!(pass);
}

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_causal-shap"))
}

fn run_cli(dir: &Path, threads: usize, args: &[&str]) {
    let status = Command::new(bin())
        .current_dir(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "{args:?}");
}

#[test]
fn criterion_09_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = r#"{"seed": 11, "dataset": {"builtin": "cardio", "n": 600},
        "attribution": {"max_instances": 40, "mc_samples": 32},
        "evaluation": {"seeds": [0, 1]}}"#;
    let class_config = r#"{"seed": 5, "dataset": {"builtin": "classification", "n": 600},
        "model": {"kind": "random_forest", "forest": {"n_trees": 20, "max_depth": 5}},
        "attribution": {"max_instances": 30, "mc_samples": 16},
        "evaluation": {"seeds": [0, 1], "methods": ["causal", "marginal"]}}"#;
    std::fs::write(tmp.path().join("reg.json"), config).unwrap();
    std::fs::write(tmp.path().join("class.json"), class_config).unwrap();
    let mut artifacts = Vec::new();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for threads in [1usize, 4] {
        let out = format!("output_dir=t{threads}");
        let outc = format!("output_dir=c{threads}");
        for args in [
            vec!["discover", "--config", "reg.json", "--set", &out],
            vec!["effects", "--config", "reg.json", "--set", &out],
            vec!["attribute", "--config", "reg.json", "--set", &out],
            vec!["evaluate", "--config", "reg.json", "--set", &out],
            vec!["evaluate", "--config", "class.json", "--set", &outc],
        ] {
            run_cli(tmp.path(), threads, &args);
        }
        for method in ["marginal", "kernel", "exact"] {
            let dir = format!("output_dir=t{threads}/{method}");
            run_cli(tmp.path(), threads, &["attribute", "--config", "reg.json", "--method", method, "--set", &dir]);
        }
        let gen = format!("g{threads}.csv");
        run_cli(tmp.path(), threads, &["generate", "--spec", "lung_cancer", "--n", "300", "--seed", "4", "--out", &gen]);
        artifacts.push(threads);
    }
    let files = [
        "t{}/cpdag.json",
        "t{}/discovery.json",
        "t{}/effects.json",
        "t{}/attributions.json",
        "t{}/report.json",
        "t{}/report.csv",
        "t{}/marginal/attributions.json",
        "t{}/kernel/attributions.json",
        "t{}/exact/attributions.json",
        "c{}/report.json",
        "c{}/report.csv",
        "g{}.csv",
        "g{}.truth.json",
    ];
    for pattern in files {
        let a = std::fs::read(tmp.path().join(pattern.replace("{}", "1"))).unwrap();
        let b = std::fs::read(tmp.path().join(pattern.replace("{}", "4"))).unwrap();
        compared += 1;
        if a != b {
            mismatched.push(pattern.replace("{}", "N"));
        }
    }
    let pass = mismatched.is_empty();
    report(
        9,
        "determinism across --threads 1 and 4",
        pass,
        &format!("{compared} artifacts compared, mismatched {mismatched:?}"),
    );
    assert!(pass);
}

fn classification_config(mc_samples: usize) -> RunConfig {
    RunConfig::from_json_str(
        &format!(
            r#"{{"seed": 0, "dataset": {{"builtin": "classification", "n": 2000}},
            "model": {{"kind": "random_forest", "forest": {{"n_trees": 50, "max_depth": 6}}}},
            "attribution": {{"max_instances": 100, "mc_samples": {mc_samples}}},
            "evaluation": {{"seeds": [0, 1, 2, 3, 4], "methods": ["causal", "marginal"]}}}}"#
        ),
        &[],
    )
    .unwrap()
}

#[test]
fn criterion_10_insertion_substitute() {
    let rep = pipeline::evaluate(&classification_config(64)).unwrap();
    let get = |m: &str| rep.insertion.iter().find(|r| r.method == m).unwrap();
    let (c, m, r) = (get("causal"), get("marginal"), get("random"));
    let wins = c
        .runs
        .iter()
        .zip(&m.runs)
        .filter(|(a, b)| a.aggregate.auroc >= b.aggregate.auroc)
        .count();
    let pass = c.mean.auroc >= r.mean.auroc + 0.05 && wins >= 3;
    report(
        10,
        "insertion AUROC ordering",
        pass,
        &format!(
            "causal {:.4}±{:.4}, marginal {:.4}±{:.4}, random {:.4}±{:.4}; causal >= marginal in {wins}/5 seeds; causal ranking seed 0 {:?}",
            c.mean.auroc, c.sd.auroc, m.mean.auroc, m.sd.auroc, r.mean.auroc, r.sd.auroc, c.runs[0].ranking
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_m_insensitivity() {
    let auroc = |m: usize| {
        let rep = pipeline::evaluate(&classification_config(m)).unwrap();
        rep.insertion.iter().find(|r| r.method == Method::Causal.to_string()).unwrap().mean.auroc
    };
    let (a, b) = (auroc(64), auroc(128));
    let pass = (a - b).abs() < 0.01;
    report(
        11,
        "M-insensitivity",
        pass,
        &format!("aggregate insertion AUROC M=64 {a:.4}, M=128 {b:.4}, difference {:.4}", (a - b).abs()),
    );
    assert!(pass);
}
