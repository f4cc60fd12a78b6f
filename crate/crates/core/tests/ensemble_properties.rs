use ndarray::{Array1, Array2};
use rand::Rng;
use tree_kernels::rng::stream_rng;
use tree_kernels::{
    fit_gbt, fit_rf, fit_tree, Dataset, Ensemble, EnsembleParams, GbtParams, Loss, RfParams, Task, TreeParams,
};

fn regression_data(n: usize, p: usize, seed: u64) -> Dataset<f64> {
    let mut rng = stream_rng(seed, 0);
    let x = Array2::from_shape_fn((n, p), |_| rng.random::<f64>());
    let y = Array1::from_shape_fn(n, |i| 3.0 * x[[i, 0]] - 2.0 * x[[i, 1]].powi(2) + 0.1 * rng.random::<f64>());
    Dataset::new(x, y, Task::Regression).unwrap()
}

fn classification_data(n: usize, p: usize, seed: u64) -> Dataset<f64> {
    let mut rng = stream_rng(seed, 0);
    let x = Array2::from_shape_fn((n, p), |_| rng.random::<f64>());
    let y = Array1::from_shape_fn(n, |i| {
        let s = x[[i, 0]] + x[[i, 1]] - 1.0 + 0.3 * (rng.random::<f64>() - 0.5);
        if s > 0.0 { 1.0 } else { 0.0 }
    });
    Dataset::new(x, y, Task::Classification).unwrap()
}

fn with_trees(e: &Ensemble<f64>, trees: Vec<tree_kernels::Tree<f64>>) -> Ensemble<f64> {
    let params = match e.params() {
        EnsembleParams::Rf(r) => EnsembleParams::Rf(r.clone().with_trees(trees.len())),
        EnsembleParams::Gbt(g) => EnsembleParams::Gbt(g.clone().with_rounds(trees.len())),
    };
    Ensemble::from_trees(e.kind(), params, trees, e.n_features()).unwrap()
}

#[test]
fn forest_ignores_tree_order() {
    let d = regression_data(120, 4, 1);
    let e = fit_rf(&d, &RfParams::for_task(Task::Regression).with_trees(30), 5).unwrap();
    let mut rev = e.trees().to_vec();
    rev.reverse();
    let r = with_trees(&e, rev);
    for (a, b) in e.predict_batch(d.features()).unwrap().iter().zip(r.predict_batch(d.features()).unwrap().iter()) {
        assert!((a - b).abs() < 1e-12);
    }

    let c = classification_data(120, 4, 2);
    let e = fit_rf(&c, &RfParams::for_task(Task::Classification).with_trees(31), 5).unwrap();
    let mut rev = e.trees().to_vec();
    rev.reverse();
    assert_eq!(e.predict_batch(c.features()).unwrap(), with_trees(&e, rev).predict_batch(c.features()).unwrap());
}

#[test]
fn booster_rounds_are_not_interchangeable() {
    let d = regression_data(120, 3, 3);
    let e = fit_gbt(&d, &GbtParams::new(Loss::SquaredError).with_rounds(20), 0).unwrap();
    let trees = e.trees().to_vec();
    let early = with_trees(&e, trees[..5].to_vec());
    let late = with_trees(&e, trees[15..].to_vec());
    let pe = early.predict_batch(d.features()).unwrap();
    let pl = late.predict_batch(d.features()).unwrap();
    let gap: f64 = pe.iter().zip(&pl).map(|(a, b)| (a - b).abs()).sum();
    assert!(gap > 1.0, "early and late rounds should fit different residuals, gap {gap}");
    // later rounds fit residuals, so they are the smaller corrections
    let mag = |t: &tree_kernels::Tree<f64>| t.leaves().iter().map(|l| l.1.abs()).fold(0.0, f64::max);
    assert!(mag(&trees[19]) < mag(&trees[0]));
}

#[test]
fn forest_predictions_stay_in_target_range() {
    let d = regression_data(150, 5, 4);
    let e = fit_rf(&d, &RfParams::for_task(Task::Regression).with_trees(25), 9).unwrap();
    let (lo, hi) = d.target().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mut rng = stream_rng(99, 0);
    let probe = Array2::from_shape_fn((300, 5), |_| rng.random::<f64>() * 3.0 - 1.0);
    for v in e.predict_batch(probe.view()).unwrap() {
        assert!(v >= lo && v <= hi);
    }
}

#[test]
fn same_seed_same_leaf_assignments() {
    let d = regression_data(100, 6, 5);
    let params = RfParams::for_task(Task::Regression).with_trees(20);
    let a = fit_rf(&d, &params, 17).unwrap();
    let b = fit_rf(&d, &params, 17).unwrap();
    let c = fit_rf(&d, &params, 18).unwrap();
    assert_eq!(a.leaf_assignments(d.features()).unwrap(), b.leaf_assignments(d.features()).unwrap());
    assert_ne!(a, c);
    let g = GbtParams::new(Loss::SquaredError).with_rounds(10);
    assert_eq!(fit_gbt(&d, &g, 1).unwrap(), fit_gbt(&d, &g, 2).unwrap());
}

#[test]
fn one_unbagged_tree_is_plain_cart() {
    let d = regression_data(90, 3, 6);
    let tree = TreeParams { mtry: Some(3), ..TreeParams::regression() };
    let params = RfParams { num_trees: 1, tree: tree.clone(), bootstrap: false };
    let e = fit_rf(&d, &params, 0).unwrap();
    let cart = fit_tree(&d, &tree, &mut stream_rng(0, 0)).unwrap();
    assert_eq!(e.trees()[0], cart);
    assert_eq!(e.predict_batch(d.features()).unwrap().to_vec(), d.features().outer_iter().map(|r| cart.predict(r).unwrap()).collect::<Vec<_>>());
}

fn log_loss(e: &Ensemble<f64>, d: &Dataset<f64>) -> f64 {
    let n = d.n_samples() as f64;
    d.features()
        .outer_iter()
        .zip(d.target())
        .map(|(row, &y)| {
            let p = e.gbt_probability(row).unwrap();
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

#[test]
fn logistic_training_loss_decreases() {
    let d = classification_data(200, 3, 7);
    let mut prev = f64::INFINITY;
    for rounds in 1..=10 {
        let e = fit_gbt(&d, &GbtParams::new(Loss::Logistic).with_rounds(rounds), 0).unwrap();
        let loss = log_loss(&e, &d);
        assert!(loss < prev, "round {rounds}: {loss} !< {prev}");
        prev = loss;
    }
}

#[test]
fn squared_training_loss_decreases() {
    let d = regression_data(200, 3, 8);
    let e = fit_gbt(&d, &GbtParams::new(Loss::SquaredError).with_rounds(10), 0).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..=10 {
        let part = with_trees(&e, e.trees()[..k].to_vec());
        let pred = part.predict_batch(d.features()).unwrap();
        let loss = (&pred - &d.target()).mapv(|r| r * r).mean().unwrap();
        assert!(loss < prev);
        prev = loss;
    }
}

#[test]
fn classification_outputs_are_labels() {
    let d = classification_data(150, 4, 9);
    let rf = fit_rf(&d, &RfParams::for_task(Task::Classification).with_trees(15), 0).unwrap();
    let gb = fit_gbt(&d, &GbtParams::new(Loss::Logistic).with_rounds(10), 0).unwrap();
    for e in [rf, gb] {
        let pred = e.predict_batch(d.features()).unwrap();
        assert!(pred.iter().all(|&v| v == 0.0 || v == 1.0));
        let acc = pred.iter().zip(d.target()).filter(|(a, b)| a == b).count() as f64 / 150.0;
        assert!(acc > 0.85, "{:?} training accuracy {acc}", e.kind());
    }
}

#[test]
fn single_precision_ensembles() {
    let d = regression_data(80, 3, 10);
    let (x, y, _) = d.into_parts();
    let d32 = Dataset::new(x.mapv(|v| v as f32), y.mapv(|v| v as f32), Task::Regression).unwrap();
    let rf = fit_rf(&d32, &RfParams::for_task(Task::Regression).with_trees(10), 0).unwrap();
    let gb = fit_gbt(&d32, &GbtParams::<f32>::new(Loss::SquaredError).with_rounds(10), 0).unwrap();
    assert!(rf.predict_batch(d32.features()).unwrap().iter().all(|v| v.is_finite()));
    assert!(gb.predict_batch(d32.features()).unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn sensitivity_depth_two_booster() {
    let d = regression_data(200, 4, 11);
    let params = GbtParams { max_depth: 2, ..GbtParams::new(Loss::SquaredError).with_rounds(15) };
    let e = fit_gbt(&d, &params, 0).unwrap();
    assert!(e.trees().iter().all(|t| t.depth() <= 2));
    let deep = fit_gbt(&d, &GbtParams::new(Loss::SquaredError).with_rounds(15), 0).unwrap();
    assert!(deep.trees().iter().any(|t| t.depth() > 2));
}
