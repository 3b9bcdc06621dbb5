mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracle;
use gpts::gp::{
    log_marginal_likelihood, posterior, GpHyperparams, InputPoint, KernelFamily, KernelSpec, MeanSpec, RegressionData,
};

fn pts(xs: &[Vec<f64>]) -> Vec<InputPoint> {
    xs.iter().map(|x| InputPoint::new(x.clone()).unwrap()).collect()
}

fn hp(family: KernelFamily, ls: Vec<f64>, scale: f64, noise: f64, c: f64) -> GpHyperparams {
    GpHyperparams {
        mean: MeanSpec::constant(c),
        kernel: KernelSpec::new(family, ls, scale).unwrap(),
        noise_variance: noise,
    }
}

#[test]
fn log_marginal_likelihood_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=10);
        let matern = rng.random::<bool>();
        let ls: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
        let (scale, noise, c) = (rng.random_range(0.5..2.0), rng.random_range(0.01..0.5), rng.random_range(-1.0..1.0));
        // Repeat some inputs to cover duplicated arms.
        let mut xs: Vec<Vec<f64>> = Vec::new();
        for _ in 0..n {
            if !xs.is_empty() && rng.random::<f64>() < 0.3 {
                let i = rng.random_range(0..xs.len());
                xs.push(xs[i].clone());
            } else {
                xs.push((0..d).map(|_| rng.random::<f64>()).collect());
            }
        }
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let family = if matern { KernelFamily::Matern52 } else { KernelFamily::SquaredExponential };
        let ours = log_marginal_likelihood(
            &hp(family, ls.clone(), scale, noise, c),
            &RegressionData::new(pts(&xs), ys.clone()).unwrap(),
        )
        .unwrap();
        let reference = oracle::Model { matern, ls: &ls, scale, noise, mean: c }.log_marginal_likelihood(&xs, &ys);
        assert!((ours - reference).abs() < 1e-8, "{ours} vs {reference}");
    }
}

#[test]
fn joint_samples_have_posterior_moments() {
    let xs = vec![vec![0.1], vec![0.4], vec![0.45], vec![0.9]];
    let ys = vec![1.0, -0.5, -0.3, 0.8];
    let qs = vec![vec![0.2], vec![0.3], vec![0.7], vec![1.5]];
    let model = hp(KernelFamily::Matern52, vec![0.3], 1.2, 0.05, 0.2);
    let post = posterior(&model, &RegressionData::new(pts(&xs), ys).unwrap()).unwrap();
    let pred = post.predict(&pts(&qs)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 20_000;
    // Twenty moments are checked at once, so each gets a four-sigma band.
    let samples: Vec<Vec<f64>> = (0..n).map(|_| post.sample_joint(&pts(&qs), &mut rng).unwrap()).collect();
    let q = qs.len();
    let mean: Vec<f64> = (0..q).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / n as f64).collect();
    for i in 0..q {
        let se = (pred.cov[(i, i)] / n as f64).sqrt();
        assert!((mean[i] - pred.mean[i]).abs() < 4.0 * se, "mean {i}: {} vs {}", mean[i], pred.mean[i]);
        for j in 0..q {
            let c: f64 = samples.iter().map(|s| (s[i] - mean[i]) * (s[j] - mean[j])).sum::<f64>() / (n - 1) as f64;
            let (sii, sjj, sij) = (pred.cov[(i, i)], pred.cov[(j, j)], pred.cov[(i, j)]);
            let se = ((sii * sjj + sij * sij) / n as f64).sqrt();
            assert!((c - sij).abs() < 4.0 * se, "cov {i},{j}: {c} vs {sij}");
        }
    }
}

#[test]
fn far_queries_revert_to_prior() {
    let model = hp(KernelFamily::SquaredExponential, vec![0.1, 0.1], 2.0, 0.01, 0.7);
    let data = RegressionData::new(pts(&[vec![0.5, 0.5]]), vec![3.0]).unwrap();
    let pred = posterior(&model, &data).unwrap().predict(&pts(&[vec![50.0, 50.0]])).unwrap();
    assert!((pred.mean[0] - 0.7).abs() < 1e-12);
    assert!((pred.cov[(0, 0)] - 2.0).abs() < 1e-12);
}
