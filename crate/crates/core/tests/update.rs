use genbayes_core::gibbs::{sequential_vs_batch, DiscreteBelief};
use genbayes_core::loss::{DatasetLoss, DensityModel, FnLoss, PointLoss};
use genbayes_core::math::normal_log_pdf;
use genbayes_core::{LogPrior, ParamPoint};
use proptest::prelude::*;

fn grid(lo: f64, hi: f64, points: usize) -> (Vec<ParamPoint>, f64) {
    let step = (hi - lo) / (points - 1) as f64;
    ((0..points).map(|k| ParamPoint::scalar(lo + k as f64 * step).unwrap()).collect(), step)
}

fn tabulated(values: Vec<f64>) -> DatasetLoss {
    let n = values.len();
    DatasetLoss::whole_sample(FnLoss::new(1, move |t: &[f64]| values[(t[0] as usize).min(n - 1)]))
}

fn index_grid(k: usize) -> Vec<ParamPoint> {
    (0..k).map(|i| ParamPoint::scalar(i as f64).unwrap()).collect()
}

#[test]
fn conjugate_normal_density_is_recovered() {
    let (support, step) = grid(-8.0, 8.0, 4096);
    let prior = LogPrior::standard_normal(1).unwrap();
    let belief = DiscreteBelief::discretize(&prior, support.clone()).unwrap();
    let nll = PointLoss::NegLogDensity(DensityModel::NormalLocation { sd: 1.0 });
    let post = belief.update(&DatasetLoss::scalar(nll, &[0.0]).unwrap(), 1.0).unwrap();
    for (t, w) in support.iter().zip(post.weights()) {
        let exact = normal_log_pdf(t[0], 0.0, 0.5).exp();
        assert!((w / step - exact).abs() < 1e-8);
    }
}

#[test]
fn likelihood_times_prior_on_a_grid() {
    let (support, _) = grid(-3.0, 4.0, 301);
    let prior_w: Vec<f64> = (0..support.len()).map(|k| 1.0 + (k % 7) as f64).collect();
    let total: f64 = prior_w.iter().sum();
    let prior_w: Vec<f64> = prior_w.iter().map(|w| w / total).collect();
    let data = [0.3, 1.7, -0.4, 2.2];
    let belief = DiscreteBelief::new(support.clone(), &prior_w).unwrap();
    let nll = PointLoss::NegLogDensity(DensityModel::NormalLocation { sd: 1.3 });
    let post = belief.update(&DatasetLoss::scalar(nll, &data).unwrap(), 1.0).unwrap();
    let direct: Vec<f64> =
        support.iter().zip(&prior_w).map(|(t, p)| p * data.iter().map(|x| normal_log_pdf(*x, t[0], 1.69).exp()).product::<f64>()).collect();
    let z: f64 = direct.iter().sum();
    for (a, b) in post.weights().iter().zip(&direct) {
        assert!((a - b / z).abs() < 1e-12);
    }
}

#[test]
fn negligible_weight_returns_the_prior() {
    let (support, _) = grid(-2.0, 2.0, 41);
    let belief = DiscreteBelief::discretize(&LogPrior::standard_normal(1).unwrap(), support).unwrap();
    let post = belief.update(&DatasetLoss::scalar(PointLoss::Squared, &[5.0, -3.0, 8.0]).unwrap(), 1e-300).unwrap();
    for (a, b) in post.weights().iter().zip(belief.weights()) {
        assert!((a - b).abs() < 1e-9);
    }
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, f64)> {
    (2usize..12, 1usize..5).prop_flat_map(|(k, batches)| {
        (
            proptest::collection::vec(0.01..1.0f64, k),
            proptest::collection::vec(proptest::collection::vec(0.0..20.0f64, k), batches),
            prop_oneof![0.01..1.0f64, 1.0..50.0f64],
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sequential_equals_batch((raw, batches, w) in instance()) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let belief = DiscreteBelief::new(index_grid(raw.len()), &weights).unwrap();
        let losses: Vec<DatasetLoss> = batches.into_iter().map(tabulated).collect();
        let (seq, batch) = sequential_vs_batch(&belief, &losses, w).unwrap();
        for (a, b) in seq.weights().iter().zip(batch.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn batch_order_does_not_matter((raw, batches, w) in instance()) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let belief = DiscreteBelief::new(index_grid(raw.len()), &weights).unwrap();
        let forward: Vec<DatasetLoss> = batches.iter().cloned().map(tabulated).collect();
        let backward: Vec<DatasetLoss> = batches.iter().rev().cloned().map(tabulated).collect();
        let (_, a) = sequential_vs_batch(&belief, &forward, w).unwrap();
        let (_, b) = sequential_vs_batch(&belief, &backward, w).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn data_order_does_not_matter(data in proptest::collection::vec(-3.0..3.0f64, 1..20), w in 0.1..5.0f64) {
        let (support, _) = grid(-4.0, 4.0, 81);
        let belief = DiscreteBelief::discretize(&LogPrior::standard_normal(1).unwrap(), support).unwrap();
        let mut reversed = data.clone();
        reversed.reverse();
        let a = belief.update(&DatasetLoss::scalar(PointLoss::Absolute, &data).unwrap(), w).unwrap();
        let b = belief.update(&DatasetLoss::scalar(PointLoss::Absolute, &reversed).unwrap(), w).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn doubling_weight_keeps_the_loss_minimizer(raw in proptest::collection::vec(0.01..1.0f64, 3..10), losses in proptest::collection::vec(0.0..5.0f64, 10)) {
        let k = raw.len();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let belief = DiscreteBelief::new(index_grid(k), &weights).unwrap();
        let losses = losses[..k].to_vec();
        let best = (0..k).fold(0, |b, i| if losses[i] < losses[b] { i } else { b });
        let loss = tabulated(losses);
        let mut w = 0.125;
        let mut locked = false;
        for _ in 0..14 {
            let arg = belief.update(&loss, w).unwrap().argmax();
            if locked {
                prop_assert_eq!(arg, best);
            }
            locked |= arg == best;
            w *= 2.0;
        }
    }
}
