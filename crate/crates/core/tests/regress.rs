mod common;

use moldline::linalg::Matrix;
use moldline::regress::ensemble::{weighted_median, AdaBoost, BoostLoss, Forest, Gbm};
use moldline::regress::knn::{brute_force, KnnModel};
use moldline::regress::linear::{
    fit_coordinate_descent, fit_linear_svr, fit_ols, fit_sgd_linear, lambda_max, soft_threshold, LinearModel,
};
use moldline::regress::tree::{Node, Tree, TreeParams};
use moldline::regress::{evaluate, score, ElasticNetParams, ForestParams, ModelSpec, Regressor, KINDS};
use moldline::{rng, Error};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng::seeded(seed);
    Matrix::new(rows, cols, (0..rows * cols).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut r)).collect()).unwrap()
}

fn planted(rows: usize, seed: u64, noise: f64) -> (Matrix, Vec<f64>) {
    let x = gaussian_matrix(rows, 4, seed);
    let mut r = rng::named(seed, "noise");
    let y = x
        .iter_rows()
        .map(|row| 1.5 * row[0] - 2.0 * row[1] + 0.5 * row[2] + noise * Distribution::<f64>::sample(&StandardNormal, &mut r))
        .collect();
    (x, y)
}

fn column(v: &[f64]) -> Matrix {
    Matrix::column_vector(v)
}

#[test]
fn ols_recovers_exact_line() {
    let x = column(&[-2.0, 0.5, 1.0, 3.0, 7.0]);
    let y: Vec<f64> = x.data().iter().map(|v| 2.0 * v + 1.0).collect();
    let (m, ridged) = fit_ols(&x, &y).unwrap();
    assert!(!ridged);
    assert!((m.coef[0] - 2.0).abs() < 1e-9);
    assert!((m.intercept - 1.0).abs() < 1e-9);
}

#[test]
fn ols_constant_target() {
    let x = gaussian_matrix(20, 2, 3);
    let (m, _) = fit_ols(&x, &[4.25; 20]).unwrap();
    assert!(m.coef.iter().all(|c| c.abs() < 1e-12));
    assert!((m.intercept - 4.25).abs() < 1e-12);
}

#[test]
fn ols_residuals_orthogonal_to_columns() {
    let x = gaussian_matrix(50, 3, 9);
    let mut r = rng::seeded(10);
    let y: Vec<f64> = (0..50).map(|_| r.random::<f64>() * 10.0).collect();
    let (m, _) = fit_ols(&x, &y).unwrap();
    let resid: Vec<f64> = x.iter_rows().zip(&y).map(|(row, t)| t - m.predict_row(row)).collect();
    for j in 0..3 {
        let xr: f64 = x.column(j).iter().zip(&resid).map(|(a, b)| a * b).sum();
        assert!(xr.abs() < 1e-8, "column {j}: {xr}");
    }
    assert!(resid.iter().sum::<f64>().abs() < 1e-8);
}

#[test]
fn ols_duplicate_column_uses_ridge_fallback() {
    let base = gaussian_matrix(30, 1, 4);
    let rows: Vec<Vec<f64>> = base.data().iter().map(|v| vec![*v, *v]).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y: Vec<f64> = base.data().iter().map(|v| 3.0 * v).collect();
    let (m, ridged) = fit_ols(&x, &y).unwrap();
    assert!(ridged);
    assert!((m.coef[0] + m.coef[1] - 3.0).abs() < 1e-6);
    let mut reg = Regressor::new(ModelSpec::default_for("ols").unwrap(), 0);
    reg.fit(&x, &y).unwrap();
    assert_eq!(reg.flags, vec!["ridge_fallback".to_string()]);
}

fn standardized(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
    v.iter().map(|x| (x - m) / s).collect()
}

proptest! {
    #[test]
    fn one_dimensional_elastic_net_is_soft_threshold(
        xs in prop::collection::vec(-5.0f64..5.0, 8..40),
        slope in -3.0f64..3.0,
        l1 in 0.0f64..2.0,
        l2 in 0.0f64..2.0,
        seed in 0u64..1000,
    ) {
        let x = standardized(&xs);
        prop_assume!(x.iter().all(|v| v.is_finite()));
        let mut r = rng::seeded(seed);
        let y: Vec<f64> = x.iter().map(|v| slope * v + r.random::<f64>() - 0.5).collect();
        let n = y.len() as f64;
        let ym = y.iter().sum::<f64>() / n;
        let beta_ols = x.iter().zip(&y).map(|(a, b)| a * (b - ym)).sum::<f64>() / n;
        let expect = soft_threshold(beta_ols, l1) / (1.0 + l2);
        let out = fit_coordinate_descent(&column(&x), &y, l1, l2, 1e-12, 100).unwrap();
        prop_assert!((out.model.coef[0] - expect).abs() < 1e-8);
    }

    #[test]
    fn coordinate_descent_objective_never_increases(seed in 0u64..500, l1 in 0.0f64..0.5, l2 in 0.0f64..0.5) {
        let (x, y) = planted(40, seed, 0.5);
        let out = fit_coordinate_descent(&x, &y, l1, l2, 1e-12, 500).unwrap();
        for w in out.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn tree_is_piecewise_constant(seed in 0u64..500, jitter in -1.0f64..1.0) {
        let (x, y) = planted(40, seed, 0.2);
        let t = Tree::fit(&x, &y, TreeParams { max_depth: Some(3), ..Default::default() }).unwrap();
        // Moving a query inside its leaf cell must not change the answer.
        let q = x.row(0).to_vec();
        let leaf = t.apply(&q);
        let mut moved = q.clone();
        moved[3] += jitter; // column 3 carries no signal, so probe along it
        if t.apply(&moved) == leaf {
            prop_assert_eq!(t.predict_row(&moved), t.predict_row(&q));
        }
    }
}

#[test]
fn lasso_zero_at_lambda_max() {
    let (x, y) = planted(60, 5, 0.3);
    let lmax = lambda_max(&x, &y).unwrap();
    for l1 in [lmax, lmax * 1.5, lmax * 10.0] {
        let out = fit_coordinate_descent(&x, &y, l1, 0.0, 1e-12, 1000).unwrap();
        assert!(out.model.coef.iter().all(|c| *c == 0.0), "l1={l1}");
    }
    let just_below = fit_coordinate_descent(&x, &y, lmax * 0.99, 0.0, 1e-12, 1000).unwrap();
    assert!(just_below.model.coef.iter().any(|c| *c != 0.0));
}

#[test]
fn unpenalized_coordinate_descent_matches_ols() {
    let (x, y) = planted(60, 6, 0.3);
    let (ols, _) = fit_ols(&x, &y).unwrap();
    let cd = fit_coordinate_descent(&x, &y, 0.0, 0.0, 1e-13, 100_000).unwrap();
    assert!(cd.converged);
    for (a, b) in ols.coef.iter().zip(&cd.model.coef) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((ols.intercept - cd.model.intercept).abs() < 1e-6);
}

#[test]
fn coordinate_descent_flags_iteration_cap() {
    let (x, y) = planted(60, 6, 0.3);
    let mut reg = Regressor::new(ModelSpec::ElasticNet(ElasticNetParams { l1: 0.0, l2: 0.0, tol: 0.0, max_iter: 2 }), 0);
    reg.fit(&x, &y).unwrap();
    assert_eq!(reg.flags, vec!["not_converged".to_string()]);
    assert!(reg.predict(&x).unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn svr_inside_tube_keeps_zero_weights() {
    let x = gaussian_matrix(30, 2, 7);
    let y: Vec<f64> = (0..30).map(|i| 0.001 * (i as f64 - 15.0) / 15.0).collect();
    let m = fit_linear_svr(&x, &y, 1.0, 0.01, 50, 0).unwrap();
    assert!(m.coef.iter().all(|c| *c == 0.0));
    assert_eq!(m.intercept, 0.0);
}

#[test]
fn svr_slope_close_to_ols() {
    let xs: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 20.0).collect();
    let x = column(&xs);
    let y: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
    let (ols, _) = fit_ols(&x, &y).unwrap();
    let svr = fit_linear_svr(&x, &y, 1.0, 0.01, 10_000, 3).unwrap();
    assert!((svr.coef[0] - ols.coef[0]).abs() < 0.05, "svr slope {}", svr.coef[0]);
}

#[test]
fn svr_zero_c_is_zero() {
    let (x, y) = planted(20, 1, 0.1);
    let m = fit_linear_svr(&x, &y, 0.0, 0.1, 100, 0).unwrap();
    assert!(m.coef.iter().all(|c| *c == 0.0));
}

#[test]
fn knn_examples() {
    let x = column(&[0.0, 1.0, 10.0]);
    let y = [0.0, 1.0, 10.0];
    let m = KnnModel::fit(&x, &y, 2, 1.0).unwrap();
    assert_eq!(m.predict_row(&[0.4]), 0.5);
    let one = KnnModel::fit(&x, &y, 1, 1.0).unwrap();
    assert_eq!(one.predict_row(&[10.0]), 10.0);
    let all = KnnModel::fit(&x, &y, 3, 1.0).unwrap();
    for q in [-100.0, 3.0, 55.0] {
        assert!((all.predict_row(&[q]) - 11.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn knn_ties_go_to_lower_index() {
    let x = column(&[1.0, -1.0, 1.0, -1.0]);
    let m = KnnModel::fit(&x, &[0.0, 1.0, 2.0, 3.0], 2, 1.0).unwrap();
    let nb: Vec<usize> = m.neighbours(&[0.0]).iter().map(|p| p.1).collect();
    assert_eq!(nb, vec![0, 1]);
}

#[test]
fn kd_tree_matches_brute_force_with_duplicates() {
    let mut r = rng::seeded(21);
    // Coarse grid values force many exact distance ties.
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..3).map(|_| r.random_range(0..5) as f64).collect()).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y: Vec<f64> = (0..300).map(|i| i as f64).collect();
    for k in [1, 2, 7] {
        for p in [1.0, 2.0, 3.0] {
            let m = KnnModel::fit(&x, &y, k, p).unwrap();
            for _ in 0..50 {
                let q: Vec<f64> = (0..3).map(|_| r.random_range(-1..6) as f64 * 0.5).collect();
                assert_eq!(m.neighbours(&q), brute_force(&x, &q, k, p));
            }
        }
    }
    let m = KnnModel::fit(&x, &y, 2, 1.0).unwrap();
    for _ in 0..50 {
        let q: Vec<f64> = (0..3).map(|_| r.random::<f64>() * 5.0).collect();
        let nb = m.neighbours(&q);
        let oracle = common::brute_l1_neighbours(&x, &q, 2);
        assert_eq!(nb.iter().map(|p| p.1).collect::<Vec<_>>(), oracle.iter().map(|p| p.1).collect::<Vec<_>>());
    }
}

#[test]
fn sgd_zero_rate_leaves_weights() {
    let (x, y) = planted(30, 2, 0.1);
    let init = LinearModel { coef: vec![0.3, -0.1, 0.0, 2.0], intercept: 0.7 };
    let out = fit_sgd_linear(&x, &y, 0.0001, 0.00067, 5, 0.0, 0.25, 0, Some(init.clone())).unwrap();
    assert_eq!(out.model, init);
}

#[test]
fn sgd_slope_error_shrinks_every_epoch() {
    let xs: Vec<f64> = standardized(&(0..50).map(|i| i as f64).collect::<Vec<_>>());
    let y: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
    let out = fit_sgd_linear(&column(&xs), &y, 0.0001, 0.00067, 5, 0.01, 0.25, 4, None).unwrap();
    let gaps: Vec<f64> = out.epochs.iter().map(|m| (m.coef[0] - 2.0).abs()).collect();
    assert_eq!(gaps.len(), 5);
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "{gaps:?}");
    }
}

#[test]
fn sgd_penalty_only_contracts() {
    let x = gaussian_matrix(40, 3, 8);
    let norm = |m: &LinearModel| m.coef.iter().map(|c| c * c).sum::<f64>().sqrt();
    let init = LinearModel { coef: vec![1.0, -2.0, 0.5], intercept: 0.0 };
    let out = fit_sgd_linear(&x, &[0.0; 40], 0.0001, 0.00067, 5, 0.01, 0.25, 1, Some(init.clone())).unwrap();
    let mut prev = norm(&init);
    for m in &out.epochs {
        assert!(norm(m) <= prev);
        prev = norm(m);
    }
}

#[test]
fn stump_fits_step_exactly() {
    let xs: Vec<f64> = (-10..10).map(|i| i as f64 * 0.3).collect();
    let y: Vec<f64> = xs.iter().map(|v| if *v < 0.0 { 0.0 } else { 1.0 }).collect();
    let t = Tree::fit(&column(&xs), &y, TreeParams { max_depth: Some(1), ..Default::default() }).unwrap();
    let pred: Vec<f64> = xs.iter().map(|v| t.predict_row(&[*v])).collect();
    assert_eq!(score(&pred, &y).unwrap().mse, 0.0);
    // The chosen threshold is the midpoint between the two classes.
    match t.nodes[0] {
        Node::Split { feature: 0, threshold, .. } => assert_eq!(threshold, 0.5 * (xs[9] + xs[10])),
        ref other => panic!("expected a split, got {other:?}"),
    }
}

#[test]
fn tree_constant_and_depth_zero() {
    let (x, y) = planted(20, 3, 0.1);
    let c = Tree::fit(&x, &[2.5; 20], TreeParams::default()).unwrap();
    assert_eq!(c.nodes, vec![Node::Leaf { value: 2.5 }]);
    let d0 = Tree::fit(&x, &y, TreeParams { max_depth: Some(0), ..Default::default() }).unwrap();
    assert_eq!(d0.nodes.len(), 1);
    assert!((d0.predict_row(x.row(0)) - y.iter().sum::<f64>() / 20.0).abs() < 1e-12);
}

#[test]
fn tree_tie_prefers_lower_feature() {
    // Both columns separate the targets identically.
    let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
    let t = Tree::fit(&x, &[0.0, 0.0, 1.0, 1.0], TreeParams { max_depth: Some(1), ..Default::default() }).unwrap();
    assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
}

#[test]
fn bagging_of_one_row_is_the_tree() {
    let x = column(&[3.0]);
    let f = Forest::fit(&x, &[7.0], 10, true, TreeParams::default(), 1).unwrap();
    assert_eq!(f.predict_row(&[3.0]), 7.0);
    assert_eq!(f.predict_row(&[-30.0]), 7.0);
}

#[test]
fn bagging_averages_members() {
    let mut f = Forest::fit(&column(&[0.0]), &[0.0], 3, true, TreeParams::default(), 0).unwrap();
    for (t, v) in f.trees.iter_mut().zip([1.0, 2.0, 3.0]) {
        t.set_leaf(0, v);
    }
    assert_eq!(f.predict_row(&[0.0]), 2.0);
}

#[test]
fn bagging_reduces_prediction_variance() {
    // Variance across training draws of the prediction at fixed queries.
    let queries = gaussian_matrix(20, 4, 99);
    let mut single = vec![Vec::new(); 20];
    let mut bagged = vec![Vec::new(); 20];
    for rep in 0..30 {
        let (x, y) = planted(60, 1000 + rep, 1.0);
        let t = Tree::fit(&x, &y, TreeParams::default()).unwrap();
        let f = Forest::fit(&x, &y, 10, true, TreeParams::default(), rep).unwrap();
        for (i, q) in queries.iter_rows().enumerate() {
            single[i].push(t.predict_row(q));
            bagged[i].push(f.predict_row(q));
        }
    }
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
    };
    let vs: f64 = single.iter().map(|v| var(v)).sum();
    let vb: f64 = bagged.iter().map(|v| var(v)).sum();
    assert!(vb <= vs, "bagged {vb} single {vs}");
}

#[test]
fn forest_degenerate_equals_tree() {
    let (x, y) = planted(50, 12, 0.3);
    let f = Forest::fit(&x, &y, 1, false, TreeParams::default(), 0).unwrap();
    let t = Tree::fit(&x, &y, TreeParams::default()).unwrap();
    assert_eq!(f.trees[0], t);
}

#[test]
fn forest_beats_single_tree_and_is_deterministic() {
    let (x, y) = planted(150, 13, 0.5);
    let (xt, yt) = planted(60, 14, 0.5);
    let mut single = Regressor::new(ModelSpec::Tree(moldline::regress::TreeSpec { max_depth: None, min_samples_split: 2 }), 0);
    single.fit(&x, &y).unwrap();
    let spec = ModelSpec::RandomForest(ForestParams { max_features: Some(2), ..Default::default() });
    let mut rf = Regressor::new(spec.clone(), 5);
    rf.fit(&x, &y).unwrap();
    let r_single = evaluate(&single, &xt, &yt).unwrap().r2;
    let r_forest = evaluate(&rf, &xt, &yt).unwrap().r2;
    assert!(r_forest >= r_single, "forest {r_forest} tree {r_single}");
    let mut again = Regressor::new(spec, 5);
    again.fit(&x, &y).unwrap();
    let (a, b) = (rf.predict(&xt).unwrap(), again.predict(&xt).unwrap());
    assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn gbm_without_stages_predicts_median() {
    let (x, _) = planted(5, 1, 0.0);
    let out = Gbm::fit(&x, &[5.0, 1.0, 3.0, 9.0, 2.0], 0, 0.1, TreeParams::default()).unwrap();
    for row in x.iter_rows() {
        assert_eq!(out.model.predict_row(row), 3.0);
    }
}

#[test]
fn gbm_l1_loss_never_increases() {
    let (x, y) = planted(80, 15, 0.7);
    let tp = TreeParams { max_depth: Some(4), ..Default::default() };
    for lr in [0.1, 0.5, 1.0] {
        let out = Gbm::fit(&x, &y, 60, lr, tp).unwrap();
        for w in out.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "lr {lr}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn gbm_one_stump_matches_brute_force() {
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let y = [1.0, 1.0, 2.0, 1.0, 8.0, 9.0, 7.0];
    let lr = 0.5;
    let out = Gbm::fit(&column(&xs), &y, 1, lr, TreeParams { max_depth: Some(1), ..Default::default() }).unwrap();
    // Brute force: F0 = median = 2; residual signs (-,-,0,-,+,+,+); the best
    // squared-error split on the signs is between 3 and 4.
    let f0 = 2.0;
    let left_resid = [-1.0, -1.0, 0.0, -1.0];
    let right_resid = [6.0, 7.0, 5.0];
    let med = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    };
    for (i, v) in xs.iter().enumerate() {
        let leaf = if i < 4 { med(&left_resid) } else { med(&right_resid) };
        assert_eq!(out.model.predict_row(&[*v]), f0 + lr * leaf);
    }
}

#[test]
fn adaboost_perfect_learner_stops() {
    let x = column(&[0.0, 1.0, 2.0, 3.0]);
    let y = [0.0, 0.0, 5.0, 5.0];
    let out =
        AdaBoost::fit(&x, &y, 50, 1.0, BoostLoss::Linear, TreeParams { max_depth: Some(3), ..Default::default() }, 2).unwrap();
    // Unless a resample misses a class, the first tree is perfect.
    if out.rounds[0].avg_loss == 0.0 {
        assert_eq!(out.model.estimators.len(), 1);
        for (row, t) in x.iter_rows().zip(y) {
            assert_eq!(out.model.predict_row(row), t);
        }
    }
}

#[test]
fn weighted_median_examples() {
    assert_eq!(weighted_median(&[1.0, 2.0, 9.0], &[1.0, 1.0, 1.0]), 2.0);
    assert_eq!(weighted_median(&[9.0, 1.0, 2.0], &[0.2, 0.2, 0.2]), 2.0);
    // Brute force: the smallest value whose cumulative weight reaches half.
    let vals = [4.0, 1.0, 3.0, 2.0];
    let ws = [0.1, 0.4, 0.3, 0.2];
    assert_eq!(weighted_median(&vals, &ws), 2.0);
}

#[test]
fn adaboost_three_rounds_match_hand_trace() {
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [1.0, 2.0, 2.0, 5.0, 4.0, 7.0];
    for seed in [3, 11, 42] {
        let hand = common::adaboost_hand_trace(&xs, &y, 3, seed);
        let out = AdaBoost::fit(
            &column(&xs),
            &y,
            3,
            1.0,
            BoostLoss::Linear,
            TreeParams { max_depth: Some(1), ..Default::default() },
            seed,
        )
        .unwrap();
        assert_eq!(out.rounds.len(), hand.len());
        for (a, h) in out.rounds.iter().zip(&hand) {
            assert_eq!(a.sample, h.sample);
            assert_eq!(a.avg_loss, h.avg_loss);
            assert_eq!(a.beta, h.beta);
            assert_eq!(a.estimator_weight, h.estimator_weight);
            assert_eq!(a.weights, h.weights);
        }
    }
}

#[test]
fn adaboost_kept_rounds_have_small_loss() {
    let (x, y) = planted(60, 16, 0.5);
    let out =
        AdaBoost::fit(&x, &y, 40, 1.0, BoostLoss::Linear, TreeParams { max_depth: Some(3), ..Default::default() }, 1).unwrap();
    assert!(!out.rounds.is_empty());
    if !out.stopped_early || out.rounds.len() > 1 {
        assert!(out.rounds.iter().all(|r| r.avg_loss < 0.5));
    }
    assert_eq!(out.model.estimators.len(), out.rounds.len());
}

#[test]
fn evaluate_reference_points() {
    let y = [1.0, 3.0, 2.0, 6.0];
    let perfect = score(&y, &y).unwrap();
    assert_eq!((perfect.mse, perfect.r2), (0.0, 1.0));
    let mean = score(&[3.0; 4], &y).unwrap();
    assert_eq!(mean.r2, 0.0);
    assert_eq!(mean.mse, (4.0 + 0.0 + 1.0 + 9.0) / 4.0);
}

#[test]
fn predict_before_fit_fails() {
    for k in KINDS {
        let r = Regressor::new(ModelSpec::default_for(k).unwrap(), 0);
        assert!(matches!(r.predict(&gaussian_matrix(2, 4, 0)), Err(Error::NotFitted)));
    }
}

fn small_spec(kind: &str) -> ModelSpec {
    let s = ModelSpec::default_for(kind).unwrap();
    match kind {
        "linear_svr" => s.with_param("epochs", 50.into()).unwrap(),
        "random_forest" => s.with_param("n_estimators", 8.into()).unwrap(),
        "gbm" => s.with_param("n_stages", 30.into()).unwrap(),
        "adaboost" => s.with_param("n_estimators", 20.into()).unwrap(),
        _ => s,
    }
}

#[test]
fn every_kind_is_deterministic_and_round_trips_bitwise() {
    let (x, y) = planted(50, 17, 0.4);
    let (xt, _) = planted(20, 18, 0.4);
    let dir = tempfile::tempdir().unwrap();
    for k in KINDS {
        let mut a = Regressor::new(small_spec(k), 9);
        a.fit(&x, &y).unwrap();
        let pa = a.predict(&xt).unwrap();
        let mut b = Regressor::new(small_spec(k), 9);
        b.fit(&x, &y).unwrap();
        b.fit(&x, &y).unwrap();
        let pb = b.predict(&xt).unwrap();
        assert!(pa.iter().zip(&pb).all(|(p, q)| p.to_bits() == q.to_bits()), "{k} not deterministic");
        let path = dir.path().join(format!("{k}.json"));
        a.save(&path).unwrap();
        let loaded = Regressor::load(&path).unwrap();
        assert_eq!(loaded, a);
        let pl = loaded.predict(&xt).unwrap();
        assert!(pa.iter().zip(&pl).all(|(p, q)| p.to_bits() == q.to_bits()), "{k} changed after reload");
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(json["version"], 1);
        assert_eq!(json["model"]["spec"]["kind"], k);
    }
}

#[test]
fn wrong_width_rejected() {
    let (x, y) = planted(20, 1, 0.1);
    let mut r = Regressor::new(ModelSpec::default_for("ols").unwrap(), 0);
    r.fit(&x, &y).unwrap();
    assert!(matches!(r.predict(&gaussian_matrix(3, 2, 0)), Err(Error::Shape(_))));
}
