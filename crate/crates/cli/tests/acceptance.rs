//! Acceptance suite: one test per release criterion, each printing a
//! `criterion NN (<name>): PASS ...` line with the measured values (visible
//! with `--nocapture`, and in full on failure).
//!
//! Criteria 4-6 share three trained pipelines (root seeds 1, 2, 3) built
//! once behind a lock; criterion 7 trains its own 4 x 5 strategy grid.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use matchx_core::augment::{train_with_augmentation, AugmentConfig, Strategy};
use matchx_core::datagen::{gen_motif_dataset, DatasetSpec};
use matchx_core::explain::{
    explain, explain_random, explain_sa, explain_with_stats, Budget, ExplainConfig, ReferenceSet,
};
use matchx_core::gnn::{
    accuracy, edge_saliency, forward_logits, forward_predict, train_supervised, Model, Pooling,
    TrainConfig,
};
use matchx_core::graph::Graph;
use matchx_core::matcher::{brute_force_match, greedy_match, DistanceMatrix, Metric};
use matchx_core::matrix::Matrix;
use matchx_core::metrics::{acc_at_rho, acc_auc, build_report, default_rho_grid};
use matchx_core::rng::{derive_seed, derive_seed_str};

// ---------------------------------------------------------------------------
// shared toy pipelines (ba2 preset, default model, 100 epochs)

const PIPELINE_SEEDS: [u64; 3] = [1, 2, 3];

struct Pipeline {
    seed: u64,
    model: Model,
    test: Vec<Graph>,
    refs: ReferenceSet,
    test_acc: f64,
}

fn pipelines() -> &'static [Pipeline] {
    static CELL: OnceLock<Vec<Pipeline>> = OnceLock::new();
    CELL.get_or_init(|| {
        PIPELINE_SEEDS
            .iter()
            .map(|&seed| {
                let train =
                    gen_motif_dataset(&DatasetSpec::preset_ba2(300, derive_seed(seed, "data", 0)))
                        .unwrap();
                let test =
                    gen_motif_dataset(&DatasetSpec::preset_ba2(100, derive_seed(seed, "data", 1)))
                        .unwrap();
                let width = train[0].feature_width();
                let model = Model::new(vec![width, 64, 64, 2], Pooling::Sum, seed).unwrap();
                let cfg = TrainConfig {
                    epochs: 100,
                    seed,
                    ..TrainConfig::default()
                };
                let (model, _) = train_supervised(&model, &train, &cfg).unwrap();
                let test_acc = accuracy(&model, &test).unwrap();
                let refs = ReferenceSet::build(&model, train).unwrap();
                Pipeline {
                    seed,
                    model,
                    test,
                    refs,
                    test_acc,
                }
            })
            .collect()
    })
}

fn match_explanation(
    p: &Pipeline,
    g: &Graph,
    k: usize,
) -> matchx_core::Result<matchx_core::explain::Explanation> {
    let cfg = ExplainConfig {
        budget: Budget::Nodes(k),
        reference_sample: None,
        seed: derive_seed_str(p.seed, "accept-explain", &g.id),
        metric: Metric::Euclidean,
    };
    explain(&p.model, g, &p.refs, &cfg)
}

// ---------------------------------------------------------------------------

/// Criterion 1: greedy total never beats the brute-force optimum on 200
/// random instances; equality on 50 planted unique-zero permutations.
#[test]
fn criterion_01_greedy_vs_oracle() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut trials = 0usize;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let d = DistanceMatrix::from_matrix(Matrix::from_rows(rows).unwrap(), Metric::Euclidean)
            .unwrap();
        for k in 1..=n.min(m) {
            let g = greedy_match(&d, k).unwrap();
            let b = brute_force_match(&d, k).unwrap();
            assert!(
                g.total_distance >= b.total_distance - 1e-12,
                "greedy {} beat the oracle {} (n={n}, m={m}, k={k})",
                g.total_distance,
                b.total_distance,
            );
            trials += 1;
        }
    }

    let mut exact = 0usize;
    for _ in 0..50 {
        let n = rng.gen_range(2..=6);
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if perm[i] == j {
                            0.0
                        } else {
                            rng.gen_range(1.0..2.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let d = DistanceMatrix::from_matrix(Matrix::from_rows(rows).unwrap(), Metric::Euclidean)
            .unwrap();
        let g = greedy_match(&d, n).unwrap();
        let b = brute_force_match(&d, n).unwrap();
        assert!((g.total_distance - b.total_distance).abs() <= 1e-12);
        assert!(g.total_distance.abs() <= 1e-12);
        exact += 1;
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget 10 s");
    println!(
        "criterion 01 (greedy vs oracle): PASS — {trials} random K-instances dominated, \
         {exact} zero-permutations recovered exactly, {elapsed:.2?}"
    );
}

/// Criterion 2: ACC@rho=1.0 is exactly 1.0 for every explainer that returns
/// full node sets, on a trained model.
#[test]
fn criterion_02_fidelity_identity() {
    let p = &pipelines()[0];
    let match_fn = |_m: &Model, g: &Graph, k: usize| match_explanation(p, g, k);
    let random_fn =
        |_m: &Model, g: &Graph, k: usize| explain_random(g, k, derive_seed_str(2, "rand", &g.id));
    let sa_fn = |m: &Model, g: &Graph, k: usize| explain_sa(m, g, k);

    let acc_match = acc_at_rho(&p.model, &match_fn, &p.test, 1.0).unwrap();
    let acc_random = acc_at_rho(&p.model, &random_fn, &p.test, 1.0).unwrap();
    let acc_sa = acc_at_rho(&p.model, &sa_fn, &p.test, 1.0).unwrap();
    assert_eq!(acc_match, 1.0, "match explainer ACC@1.0");
    assert_eq!(acc_random, 1.0, "random explainer ACC@1.0");
    assert_eq!(acc_sa, 1.0, "sa explainer ACC@1.0");
    println!("criterion 02 (fidelity identity): PASS — ACC@1.0 == 1.0 for match, random, and sa");
}

/// Criterion 3: analytic parameter gradients of the cross-entropy and edge
/// gradients of the class logit match central finite differences at
/// relative error < 1e-4 on 10 random (model, graph) pairs.
#[test]
fn criterion_03_gradient_exactness() {
    let started = std::time::Instant::now();
    let rel_err = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let h = 1e-5;
    let mut checked_params = 0usize;
    let mut checked_edges = 0usize;

    for pair in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + pair);
        let widths = if pair % 2 == 0 {
            vec![3, 6, 6, 2]
        } else {
            vec![2, 5, 5, 3]
        };
        let pooling = if pair % 3 == 0 {
            Pooling::Mean
        } else {
            Pooling::Sum
        };
        let mut model = Model::with_activation(
            widths.clone(),
            pooling,
            matchx_core::gnn::Activation::Softplus,
            300 + pair,
        )
        .unwrap();
        for p in model.params_mut() {
            *p += rng.gen_range(-0.4..0.4);
        }
        let n = rng.gen_range(3..=7);
        let feats: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..widths[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(0.5) {
                    edges.push((u, v, rng.gen_range(0.5..1.5)));
                }
            }
        }
        let label = rng.gen_range(0..*widths.last().unwrap());
        let g = Graph::new(format!("gc{pair}"), feats, edges, Some(label)).unwrap();

        // parameter gradients of the cross-entropy
        let ce = |m: &Model| -> f64 { -forward_predict(m, &g).unwrap()[label].max(1e-300).ln() };
        let (_, grads) = loss_and_grads(&model, &g, label);
        for i in 0..model.params().len() {
            let mut plus = model.clone();
            plus.params_mut()[i] += h;
            let mut minus = model.clone();
            minus.params_mut()[i] -= h;
            let fd = (ce(&plus) - ce(&minus)) / (2.0 * h);
            assert!(
                rel_err(grads[i], fd) < 1e-4,
                "pair {pair} param {i}: analytic {} vs fd {fd}",
                grads[i]
            );
            checked_params += 1;
        }

        // edge-weight gradients of the class logit
        let class = rng.gen_range(0..*widths.last().unwrap());
        let analytic = edge_saliency(&model, &g, class).unwrap();
        for (idx, grad) in analytic.iter().enumerate() {
            let mut plus = g.clone();
            plus.edges[idx].w += h;
            let mut minus = g.clone();
            minus.edges[idx].w -= h;
            let fd = (forward_logits(&model, &plus).unwrap()[class]
                - forward_logits(&model, &minus).unwrap()[class])
                / (2.0 * h);
            assert!(
                rel_err(*grad, fd) < 1e-4,
                "pair {pair} edge {idx}: analytic {grad} vs fd {fd}"
            );
            checked_edges += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30 s");
    println!(
        "criterion 03 (gradient exactness): PASS — {checked_params} parameter and \
         {checked_edges} edge gradients within 1e-4 of finite differences, {elapsed:.2?}"
    );
}

fn loss_and_grads(model: &Model, g: &Graph, label: usize) -> (f64, Vec<f64>) {
    let (loss, grads) = matchx_core::gnn::loss_gradients(model, g, label).unwrap();
    (loss, grads.params)
}

/// Criterion 4: the toy preset trains to >= 0.90 test accuracy with the
/// default model in 100 epochs.
#[test]
fn criterion_04_toy_training() {
    let started = std::time::Instant::now();
    let p = &pipelines()[0];
    assert!(
        p.test_acc >= 0.90,
        "test accuracy {} below 0.90",
        p.test_acc
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    let all: Vec<String> = pipelines()
        .iter()
        .map(|p| format!("seed {} -> {:.3}", p.seed, p.test_acc))
        .collect();
    println!(
        "criterion 04 (toy training): PASS — test accuracy {} (gate >= 0.90 on seed 1)",
        all.join(", ")
    );
}

/// Criterion 5: matching explanations at K = motif size recover >= 0.70 of
/// the ground-truth nodes on average (3 seeds) and beat the random
/// explainer by >= 0.30.
#[test]
fn criterion_05_motif_recovery() {
    let started = std::time::Instant::now();
    let mut match_means = Vec::new();
    let mut random_means = Vec::new();
    for p in pipelines() {
        let mut match_sum = 0.0;
        let mut random_sum = 0.0;
        for g in &p.test {
            let gt = g.gt_nodes.as_ref().expect("toy graphs carry ground truth");
            let k = gt.len();
            let recall =
                |nodes: &matchx_core::NodeSet| nodes.intersection_len(gt) as f64 / gt.len() as f64;
            match_sum += match recall_of(match_explanation(p, g, k)) {
                Some(nodes) => recall(&nodes),
                None => 0.0,
            };
            let r = explain_random(g, k, derive_seed_str(p.seed, "accept-random", &g.id)).unwrap();
            random_sum += recall(&r.nodes);
        }
        match_means.push(match_sum / p.test.len() as f64);
        random_means.push(random_sum / p.test.len() as f64);
    }
    let match_mean = match_means.iter().sum::<f64>() / match_means.len() as f64;
    let random_mean = random_means.iter().sum::<f64>() / random_means.len() as f64;
    assert!(
        match_mean >= 0.70,
        "mean recall {match_mean:.3} below 0.70 (per seed: {match_means:?})"
    );
    assert!(
        match_mean - random_mean >= 0.30,
        "margin over random {:.3} below 0.30 (match {match_means:?}, random {random_means:?})",
        match_mean - random_mean
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    println!(
        "criterion 05 (motif recovery): PASS — mean Recall@K {match_mean:.3} \
         (random {random_mean:.3}, margin {:.3}), per seed {match_means:?}, {elapsed:.2?}",
        match_mean - random_mean
    );
}

fn recall_of(
    e: matchx_core::Result<matchx_core::explain::Explanation>,
) -> Option<matchx_core::NodeSet> {
    e.ok().map(|e| e.nodes)
}

/// Criterion 6: matching ACC-AUC beats the random explainer's by >= 0.10 on
/// the 10-point grid, mean of 3 seeds.
#[test]
fn criterion_06_fidelity_dominance() {
    let started = std::time::Instant::now();
    let grid = default_rho_grid();
    let mut match_aucs = Vec::new();
    let mut random_aucs = Vec::new();
    for p in pipelines() {
        let match_fn = |_m: &Model, g: &Graph, k: usize| match_explanation(p, g, k);
        let random_fn = |_m: &Model, g: &Graph, k: usize| {
            explain_random(g, k, derive_seed_str(p.seed, "accept-random-auc", &g.id))
        };
        match_aucs.push(
            build_report(&p.model, &match_fn, &p.test, &grid)
                .unwrap()
                .acc_auc,
        );
        random_aucs.push(
            build_report(&p.model, &random_fn, &p.test, &grid)
                .unwrap()
                .acc_auc,
        );
    }
    let match_mean = match_aucs.iter().sum::<f64>() / match_aucs.len() as f64;
    let random_mean = random_aucs.iter().sum::<f64>() / random_aucs.len() as f64;
    assert!(
        match_mean >= random_mean + 0.10,
        "ACC-AUC margin {:.3} below 0.10 (match {match_aucs:?}, random {random_aucs:?})",
        match_mean - random_mean
    );
    println!(
        "criterion 06 (fidelity dominance): PASS — ACC-AUC match {match_mean:.3} vs \
         random {random_mean:.3} (margin {:.3}), per seed {match_aucs:?} vs {random_aucs:?}, {:.2?}",
        match_mean - random_mean,
        started.elapsed()
    );
}

/// Criterion 7: over 5 seeds at rho = 0.95 on the toy preset, mean test
/// accuracy satisfies MatchDrop >= DropNode and FPDrop < no-augmentation,
/// with the ordering holding in >= 3 of 5 seed-wise comparisons.
#[test]
fn criterion_07_augmentation_direction() {
    let started = std::time::Instant::now();
    let seeds: [u64; 5] = [1, 2, 3, 4, 5];
    let strategies = [
        Strategy::None,
        Strategy::DropNode,
        Strategy::FpDrop,
        Strategy::MatchDrop,
    ];
    let mut acc = vec![Vec::new(); strategies.len()];
    for &seed in &seeds {
        let train =
            gen_motif_dataset(&DatasetSpec::preset_ba2(300, derive_seed(seed, "data", 0))).unwrap();
        let test =
            gen_motif_dataset(&DatasetSpec::preset_ba2(100, derive_seed(seed, "data", 1))).unwrap();
        let width = train[0].feature_width();
        let model = Model::new(vec![width, 64, 64, 2], Pooling::Sum, seed).unwrap();
        let cfg = TrainConfig {
            epochs: 100,
            seed,
            ..TrainConfig::default()
        };
        for (si, &strategy) in strategies.iter().enumerate() {
            let acfg = AugmentConfig {
                strategy,
                rho: 0.95,
                warmup_epochs: cfg.epochs / 10,
                seed,
            };
            let (m, _) = train_with_augmentation(&model, &train, &cfg, &acfg).unwrap();
            acc[si].push(accuracy(&m, &test).unwrap());
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (none, drop, fp, matchdrop) = (&acc[0], &acc[1], &acc[2], &acc[3]);
    let seedwise = (0..seeds.len())
        .filter(|&i| matchdrop[i] >= drop[i] && fp[i] < none[i])
        .count();
    let summary = format!(
        "none {none:?} dropnode {drop:?} fpdrop {fp:?} matchdrop {matchdrop:?}, \
         seed-wise ordering in {seedwise}/5, {:.1?}",
        started.elapsed()
    );
    assert!(
        mean(matchdrop) >= mean(drop),
        "mean(matchdrop) {:.3} < mean(dropnode) {:.3} — {summary}",
        mean(matchdrop),
        mean(drop)
    );
    assert!(
        mean(fp) < mean(none),
        "mean(fpdrop) {:.3} !< mean(none) {:.3} — {summary}",
        mean(fp),
        mean(none)
    );
    assert!(
        seedwise >= 3,
        "ordering held in only {seedwise}/5 seeds — {summary}"
    );
    assert!(started.elapsed().as_secs() < 1200, "budget 20 min exceeded");
    println!("criterion 07 (augmentation direction): PASS — {summary}");
}

/// Criterion 8: the mean-curve AUC of the published reference curve is
/// 0.644 within 1e-9 (the companion table's 0.634 reflects a different,
/// unrecoverable aggregation and is documented, not reproduced).
#[test]
fn criterion_08_auc_arithmetic_anchor() {
    let curve = [0.31, 0.31, 0.31, 0.34, 0.49, 0.71, 0.97, 1.0, 1.0, 1.0];
    let auc = acc_auc(&curve).unwrap();
    assert!(
        (auc - 0.644).abs() <= 1e-9,
        "mean of reference curve: {auc} != 0.644"
    );
    println!("criterion 08 (AUC arithmetic anchor): PASS — mean {auc:.12} == 0.644 ± 1e-9");
}

/// Criterion 9: a full gen -> train -> explain -> eval pipeline rerun with
/// identical flags and seed reproduces byte-identical outputs (timestamps
/// live only in the dataset manifest).
#[test]
fn criterion_09_cli_determinism() {
    let started = std::time::Instant::now();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_pipeline(dir_a.path());
    run_pipeline(dir_b.path());

    let files = [
        "data.json",
        "data.config.json",
        "model.json",
        "model.log.csv",
        "model.config.json",
        "expl/explanations.json",
        "expl/run_config.json",
        "ev.report.csv",
        "ev.summary.json",
        "ev.config.json",
    ];
    for f in files {
        let a = std::fs::read(dir_a.path().join(f)).unwrap_or_else(|_| panic!("missing {f}"));
        let b = std::fs::read(dir_b.path().join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }
    // every DOT file, too
    let mut dots = 0;
    for entry in std::fs::read_dir(dir_a.path().join("expl")).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".dot") {
            let a = std::fs::read(dir_a.path().join("expl").join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join("expl").join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs");
            dots += 1;
        }
    }
    // manifests agree modulo the timestamp
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("generated_at_unix");
        v
    };
    assert_eq!(
        strip(&dir_a.path().join("data.manifest.json")),
        strip(&dir_b.path().join("data.manifest.json"))
    );
    println!(
        "criterion 09 (CLI determinism): PASS — {} files and {dots} DOT exports byte-identical, {:.1?}",
        files.len(),
        started.elapsed()
    );
}

fn run_pipeline(dir: &Path) {
    let bin = env!("CARGO_BIN_EXE_matchx");
    let run = |args: &[&str]| {
        let out = Command::new(bin)
            .current_dir(dir)
            .args(args)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "matchx {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&[
        "gen",
        "--preset",
        "ba2",
        "--n",
        "40",
        "--seed",
        "17",
        "-o",
        "data.json",
    ]);
    run(&[
        "train",
        "--data",
        "data.json",
        "--test-data",
        "data.json",
        "--epochs",
        "6",
        "--hidden",
        "16",
        "--strategy",
        "matchdrop",
        "--rho",
        "0.9",
        "--warmup",
        "2",
        "--seed",
        "11",
        "-o",
        "model.json",
    ]);
    run(&[
        "explain",
        "--checkpoint",
        "model.json",
        "--data",
        "data.json",
        "--rho",
        "0.4",
        "--seed",
        "5",
        "--outdir",
        "expl",
    ]);
    run(&[
        "eval",
        "--checkpoint",
        "model.json",
        "--data",
        "data.json",
        "--explainer",
        "match",
        "--rho-grid",
        "0.2,0.6,1.0",
        "--seed",
        "5",
        "-o",
        "ev",
    ]);
}

/// Criterion 10: explaining against a reference set of size R performs
/// exactly R qualifications and at most R matchings of exactly K rounds
/// each.
#[test]
fn criterion_10_cost_contract() {
    let refs_graphs =
        gen_motif_dataset(&DatasetSpec::preset_ba2(37, derive_seed(10, "data", 0))).unwrap();
    let targets =
        gen_motif_dataset(&DatasetSpec::preset_ba2(5, derive_seed(10, "data", 1))).unwrap();
    let width = refs_graphs[0].feature_width();
    let model = Model::new(vec![width, 16, 16, 2], Pooling::Sum, 10).unwrap();
    let refs = ReferenceSet::build(&model, refs_graphs).unwrap();

    let k = 5;
    for g in &targets {
        let cfg = ExplainConfig::with_budget(Budget::Nodes(k));
        let (_, stats) = explain_with_stats(&model, g, &refs, &cfg).unwrap();
        assert_eq!(
            stats.qualifications, 37,
            "graph {}: expected exactly R = 37 qualifications",
            g.id
        );
        assert!(
            stats.matchings <= 37,
            "graph {}: {} matchings exceed R",
            g.id,
            stats.matchings
        );
        assert_eq!(
            stats.matching_rounds,
            stats.matchings * k as u64,
            "graph {}: rounds != matchings * K",
            g.id
        );
    }
    println!(
        "criterion 10 (cost contract): PASS — 5 targets, R = 37 qualifications each, \
         K = {k} rounds per matching"
    );
}
