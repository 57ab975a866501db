mod common;

use tlearn::baselines::finite_difference_matrix;
use tlearn::closedform::{closed_form_reconstruct, row_split, SignPattern};
use tlearn::data::SignalSpec;
use tlearn::denoise::{admm_denoise, AdmmParams};
use tlearn::eval::denoise_testset;
use tlearn::gradient::{fd_gradient, sample_gradient, GradientOptions};
use tlearn::io;
use tlearn::seeds;
use tlearn::train::{blorc_train, Init, TrainConfig};

#[test]
fn saved_dataset_trains_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SignalSpec::piecewise(16, 0.1);
    io::save_dataset(dir.path(), &spec.generate(4, 0, 40).unwrap()).unwrap();
    let pairs = io::load_dataset(dir.path()).unwrap();
    assert_eq!(pairs, spec.generate(4, 0, 40).unwrap());

    let config = TrainConfig {
        batch_size: 10,
        epochs: 5,
        learning_rate: 1e-2,
        init: Init::Identity,
        rng_seed: 4,
        ..TrainConfig::default()
    };
    let (w, log) = blorc_train(&pairs[..30], &config, Some(&pairs[30..])).unwrap();
    assert!(log.final_loss().unwrap() < log.initial_loss);
    let report = denoise_testset(&w, 1.0, &pairs[30..], &AdmmParams::default()).unwrap();
    assert_eq!(report.len(), 10);
    assert!(report.mean_psnr().is_finite());
}

#[test]
fn closed_form_agrees_with_kkt_oracle_and_admm_on_differences() {
    let w = finite_difference_matrix(12).unwrap();
    let spec = SignalSpec::piecewise(12, 0.05);
    let params = AdmmParams {
        max_iters: 200_000,
        ..AdmmParams::default()
    };
    for i in 0..10 {
        let y = spec.pair(9, i).unwrap().y_noisy;
        let beta = 0.05 + 0.02 * i as f64;
        let r = admm_denoise(&w, &y, beta, &params).unwrap();
        let split = row_split(&w, &SignPattern::from_signs(r.sign_pattern)).unwrap();
        let cf = closed_form_reconstruct(&split, &y, beta, None).unwrap();
        // rows of a difference matrix are independent, so the saddle system is regular
        let kkt = common::kkt_reconstruct(&split, &y, beta).unwrap();
        assert!((&cf - &kkt).amax() < 1e-10, "instance {i}");
        assert!((&cf - &r.x_star).amax() < 1e-6, "instance {i}");
    }
}

#[test]
fn analytic_gradient_matches_differences_at_a_generic_w() {
    let mut rng = seeds::rng(31);
    let step = 1e-6;
    let opts = GradientOptions {
        gamma: 20.0 * step,
        admm: AdmmParams::high_accuracy(),
        ..GradientOptions::default()
    };
    let mut checked = 0;
    for i in 0..6 {
        let w = common::gaussian_matrix(&mut rng, 10, 10, 0.3);
        let pair = SignalSpec::piecewise(10, 0.1).pair(31, i).unwrap();
        let g = sample_gradient(&w, &pair, &opts).unwrap();
        if g.sign_pattern.margin <= 10.0 * step {
            continue;
        }
        let fd = fd_gradient(&w, &pair, 1.0, step, &AdmmParams::high_accuracy()).unwrap();
        assert!((&g.grad_w - &fd).amax() < 1e-6, "instance {i}");
        checked += 1;
    }
    assert!(checked >= 4);
}
