mod common;

use common::{dataset_from, dense_forward, dense_propagation, knn_oracle, max_abs_diff, random_matrix, to_dense};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use textgcn::baseline::{predict_logreg, train_logreg, train_logreg_traced, LogRegModel, LogRegParams};
use textgcn::dataset::{
    build_label_matrix, make_split, parse_csv, synth_blobs, to_csv, EmbeddingDataset, LabeledSplit,
};
use textgcn::gcn::{self, softmax_row, GcnModel, Hyperparams};
use textgcn::graph::{
    epsilon_graph, knn_graph, normalize, parse_edge_list, to_edge_list, Metric, SparseAdjacency,
};
use textgcn::harness::{EvalReport, ResultRow};

fn blobs_with_labels(n: usize, classes: usize, seed: u64) -> EmbeddingDataset {
    synth_blobs(n, 4, classes, 3.0, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_partitions_the_nodes(n in 6usize..120, classes in 2usize..5, frac in 0.0f64..1.0, seed: u64, stratified: bool) {
        let ds = blobs_with_labels(n, classes, seed);
        let l = classes + ((n - classes - 1) as f64 * frac) as usize;
        let split = make_split(&ds, l, seed, stratified).unwrap();
        prop_assert_eq!(split.labeled.len(), l);
        prop_assert_eq!(split.unlabeled.len(), n - l);
        let mut all: Vec<usize> = split.labeled.iter().chain(&split.unlabeled).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(split.labeled.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(split.unlabeled.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn stratified_split_is_balanced(per_class in 5usize..40, classes in 2usize..5, quota in 1usize..5, seed: u64) {
        let n = per_class * classes;
        let ds = blobs_with_labels(n, classes, seed);
        let l = quota * classes;
        let split = make_split(&ds, l, seed, true).unwrap();
        let mut counts = vec![0usize; classes];
        for &i in &split.labeled {
            counts[ds.label(i).unwrap()] += 1;
        }
        prop_assert!(counts.iter().all(|&c| c == quota), "{:?}", counts);
    }

    #[test]
    fn label_matrix_is_one_hot_on_labeled_rows_only(per_class in 2usize..20, classes in 2usize..5, seed: u64) {
        let n = per_class * classes;
        let ds = blobs_with_labels(n, classes, seed);
        let split = make_split(&ds, classes + 1, seed, true).unwrap();
        let y = build_label_matrix(&ds, &split).unwrap();
        prop_assert_eq!(y.y.dim(), (n, classes));
        for &i in &split.labeled {
            prop_assert_eq!(y.y.row(i).sum(), 1.0);
            prop_assert_eq!(y.class_of(i), ds.label(i));
        }
        for &i in &split.unlabeled {
            prop_assert!(y.y.row(i).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn csv_round_trip_is_exact(n in 1usize..30, d in 1usize..6, seed: u64, labeled: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, n, d, 1e3);
        let ids = (0..n).map(|i| format!("t{i}")).collect();
        let truth = labeled.then(|| (0..n).map(|i| if i % 4 == 3 { None } else { Some(i % 3) }).collect());
        let ds = EmbeddingDataset::new(ids, x, truth, 3).unwrap();
        let text = to_csv(&ds);
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(to_csv(&back), text);
    }

    #[test]
    fn knn_matches_full_sort_oracle(n in 12usize..200, k in prop::sample::select(vec![1usize, 5, 10]), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, n, 3, 1.0);
        let oracle = knn_oracle(&to_dense(&x), k);
        let adj = knn_graph(&dataset_from(x), k, Metric::Euclidean).unwrap();
        prop_assert_eq!(adj.edges(), &oracle[..]);
        prop_assert!(adj.degrees().iter().all(|&deg| deg >= k));
    }

    #[test]
    fn knn_breaks_ties_towards_lower_index(n in 4usize..40, k in 1usize..3) {
        // All points coincide, so every distance ties.
        let x = Array2::zeros((n, 2));
        let adj = knn_graph(&dataset_from(x), k, Metric::Euclidean).unwrap();
        let oracle = knn_oracle(&vec![vec![0.0, 0.0]; n], k);
        prop_assert_eq!(adj.edges(), &oracle[..]);
    }

    #[test]
    fn epsilon_graph_grows_with_eps(n in 3usize..40, seed: u64, e1 in 0.01f64..2.0, grow in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = dataset_from(random_matrix(&mut rng, n, 2, 1.0));
        let small = epsilon_graph(&ds, e1, Metric::Euclidean).unwrap();
        let large = epsilon_graph(&ds, e1 + grow, Metric::Euclidean).unwrap();
        prop_assert!(small.edges().iter().all(|&(i, j)| large.has_edge(i, j)));
    }

    #[test]
    fn edge_list_round_trip(seed: u64, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adj = common::random_knn_style_graph(&mut rng, 50, k);
        let back = parse_edge_list(&to_edge_list(&adj)).unwrap();
        prop_assert_eq!(back, adj);
    }

    #[test]
    fn edge_list_keeps_isolated_nodes(n in 2usize..30, seed: u64, p in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adj = common::random_graph(&mut rng, n, p);
        let back = parse_edge_list(&to_edge_list(&adj)).unwrap();
        prop_assert_eq!(back, adj);
    }

    #[test]
    fn softmax_rows_are_distributions(row in prop::collection::vec(-800.0f64..800.0, 1..12)) {
        let z = softmax_row(&row);
        let sum: f64 = z.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum {}", sum);
        prop_assert!(z.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let arg = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert!(z[arg] >= 1.0 / row.len() as f64 - 1e-15);
    }

    #[test]
    fn softmax_matches_extended_precision_reference(row in prop::collection::vec(-30.0f64..30.0, 2..8)) {
        // Reference: shift, exponentiate and normalize with compensated
        // (Neumaier) summation.
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &v in &e {
            let t = s + v;
            c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
            s = t;
        }
        let total = s + c;
        let z = softmax_row(&row);
        for (got, want) in z.iter().zip(e.iter().map(|v| v / total)) {
            prop_assert!((got - want).abs() <= 4.0 * f64::EPSILON * want.max(f64::MIN_POSITIVE), "{} vs {}", got, want);
        }
    }

    #[test]
    fn gcn_is_permutation_equivariant(n in 6usize..40, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, n, 4, 1.0);
        let ds = dataset_from(x);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut perm_inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            perm_inv[old] = new;
        }

        let adj = knn_graph(&ds, 3, Metric::Euclidean).unwrap();
        let pds = ds.permuted(&perm);
        let padj = knn_graph(&pds, 3, Metric::Euclidean).unwrap();
        // Ties could legitimately resolve differently after renaming, but
        // continuous random features make them vanishingly unlikely.
        prop_assert_eq!(&padj, &adj.relabeled(&perm_inv));

        let model = GcnModel::init(4, 5, 3, seed).unwrap();
        let z = gcn::forward(&model, &normalize(&adj), ds.x.view()).unwrap().z;
        let pz = gcn::forward(&model, &normalize(&padj), pds.x.view()).unwrap().z;
        let expect = z.select(Axis(0), &perm);
        prop_assert!(max_abs_diff(&to_dense(&pz), &to_dense(&expect)) < 1e-12);
    }

    #[test]
    fn forward_matches_dense_oracle_on_random_graphs(n in 2usize..30, p in 0.0f64..0.6, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adj = common::random_graph(&mut rng, n, p);
        let x = random_matrix(&mut rng, n, 3, 1.0);
        let model = GcnModel::init(3, 4, 2, seed).unwrap();
        let z = gcn::forward(&model, &normalize(&adj), x.view()).unwrap().z;
        let want = dense_forward(&dense_propagation(&adj), &to_dense(&x), &to_dense(&model.theta1), &to_dense(&model.theta2)).z;
        prop_assert!(max_abs_diff(&to_dense(&z), &want) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn logreg_gradient_matches_finite_differences(seed: u64, l2 in 0.0f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, 12, 3, 1.0);
        let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let model = LogRegModel::new(random_matrix(&mut rng, 3, 3, 0.5), Array1::from(vec![0.1, -0.2, 0.05])).unwrap();
        let g = model.gradients(x.view(), &y, l2).unwrap();
        let h = 1e-6;
        for idx in [(0, 0), (1, 2), (2, 1)] {
            let mut plus = model.clone();
            plus.w[idx] += h;
            let mut minus = model.clone();
            minus.w[idx] -= h;
            let fd = (plus.objective(x.view(), &y, l2).unwrap() - minus.objective(x.view(), &y, l2).unwrap()) / (2.0 * h);
            prop_assert!((fd - g.g_w[idx]).abs() < 1e-7, "w{:?}: {} vs {}", idx, fd, g.g_w[idx]);
        }
        for c in 0..3 {
            let mut plus = model.clone();
            plus.b[c] += h;
            let mut minus = model.clone();
            minus.b[c] -= h;
            let fd = (plus.objective(x.view(), &y, l2).unwrap() - minus.objective(x.view(), &y, l2).unwrap()) / (2.0 * h);
            prop_assert!((fd - g.g_b[c]).abs() < 1e-7, "b{}: {} vs {}", c, fd, g.g_b[c]);
        }
    }

    #[test]
    fn gcn_ignores_unlabeled_ground_truth(seed: u64) {
        let ds = synth_blobs(60, 4, 3, 4.0, seed).unwrap();
        let split = make_split(&ds, 9, seed, true).unwrap();
        let mut scrambled = ds.clone();
        let truth = scrambled.truth.as_mut().unwrap();
        for &i in &split.unlabeled {
            truth[i] = Some((truth[i].unwrap() + 1) % 3);
        }
        let s = normalize(&knn_graph(&ds, 5, Metric::Euclidean).unwrap());
        let hp = Hyperparams { epochs: 30, seed, ..Default::default() };
        let run = |d: &EmbeddingDataset| {
            let y = build_label_matrix(d, &split).unwrap();
            let init = GcnModel::init(4, hp.hidden, 3, seed).unwrap();
            gcn::train(&init, &s, d.x.view(), &y, &split.labeled, &hp).unwrap()
        };
        prop_assert_eq!(run(&ds), run(&scrambled));
    }
}

#[test]
fn logreg_ignores_unlabeled_rows() {
    let ds = synth_blobs(80, 4, 2, 5.0, 9).unwrap();
    let split = make_split(&ds, 10, 9, true).unwrap();
    let yl: Vec<usize> = split.labeled.iter().map(|&i| ds.label(i).unwrap()).collect();
    let hp = LogRegParams::default();
    let clean = train_logreg(ds.x.select(Axis(0), &split.labeled).view(), &yl, 2, &hp).unwrap();

    let mut garbage = ds.x.clone();
    for &i in &split.unlabeled {
        garbage.row_mut(i).fill(1e9);
    }
    let dirty = train_logreg(garbage.select(Axis(0), &split.labeled).view(), &yl, 2, &hp).unwrap();
    assert_eq!(clean, dirty);
}

#[test]
fn logreg_separates_well_separated_blobs() {
    let ds = synth_blobs(200, 5, 2, 8.0, 4).unwrap();
    let truth = ds.complete_truth().unwrap();
    let model = train_logreg(ds.x.view(), &truth, 2, &LogRegParams::default()).unwrap();
    let pred = predict_logreg(&model, ds.x.view()).unwrap();
    assert_eq!(pred, truth);
}

#[test]
fn logreg_objective_decreases_monotonically() {
    let ds = synth_blobs(100, 3, 3, 2.0, 12).unwrap();
    let truth = ds.complete_truth().unwrap();
    let hp = LogRegParams { lr: 0.1, epochs: 200, l2: 1e-3 };
    let (_, trace) = train_logreg_traced(ds.x.view(), &truth, 3, &hp).unwrap();
    assert_eq!(trace.len(), 201);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn gcn_loss_non_increasing_at_small_lr() {
    let ds = synth_blobs(120, 6, 3, 4.0, 21).unwrap();
    let split = make_split(&ds, 12, 21, true).unwrap();
    let y = build_label_matrix(&ds, &split).unwrap();
    let s = normalize(&knn_graph(&ds, 5, Metric::Euclidean).unwrap());
    let hp = Hyperparams { lr: 0.01, epochs: 150, seed: 21, ..Default::default() };
    let init = GcnModel::init(6, hp.hidden, 3, 21).unwrap();
    let (_, trace) = gcn::train(&init, &s, ds.x.view(), &y, &split.labeled, &hp).unwrap();
    assert!(trace.last().unwrap() < &trace[0]);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn different_seeds_give_different_splits() {
    let ds = synth_blobs(2126, 4, 2, 3.0, 0).unwrap();
    let a = make_split(&ds, 10, 1, true).unwrap();
    let b = make_split(&ds, 10, 2, true).unwrap();
    assert_ne!(a.labeled, b.labeled);
    assert_eq!(make_split(&ds, 10, 1, true).unwrap(), a);
}

#[test]
fn explicit_split_normalizes_and_validates() {
    assert!(LabeledSplit::from_labeled(5, vec![0, 5]).is_err());
    assert!(LabeledSplit::from_labeled(5, vec![]).is_err());
    assert_eq!(LabeledSplit::from_labeled(5, vec![1, 1]).unwrap().labeled, vec![1]);
    let split = LabeledSplit::from_labeled(5, vec![3, 0]).unwrap();
    assert_eq!(split.labeled, vec![0, 3]);
    assert_eq!(split.unlabeled, vec![1, 2, 4]);
}

#[test]
fn aggregates_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut rows = Vec::new();
    for model in ["gcn", "logreg"] {
        for budget in [10, 20, 50] {
            for repeat in 0..7 {
                rows.push(ResultRow {
                    model: model.to_owned(),
                    budget,
                    repeat,
                    seed: repeat as u64,
                    accuracy_pct: rand::Rng::random_range(&mut rng, 40.0..100.0),
                    wall_ms: 0,
                });
            }
        }
    }
    let report = EvalReport::from_rows(rows.clone());
    assert_eq!(report.aggregates.len(), 6);
    for agg in &report.aggregates {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.model == agg.model && r.budget == agg.budget)
            .map(|r| r.accuracy_pct)
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_eq!(agg.repeats, 7);
        assert!((agg.mean_pct - mean).abs() < 1e-12);
        assert!((agg.std_pct - std).abs() < 1e-12);
    }
    assert_eq!(EvalReport::parse_csv(&report.to_csv()).unwrap(), report);
}

#[test]
fn propagation_rows_of_isolated_nodes_are_identity() {
    let adj = SparseAdjacency::from_edges(4, [(0, 1)]).unwrap();
    let s = normalize(&adj);
    assert_eq!(s.get(2, 2), 1.0);
    assert_eq!(s.get(3, 3), 1.0);
    assert_eq!(s.get(0, 1), 0.5);
}
