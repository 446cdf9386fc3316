//! Analytic gradients against central finite differences.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swingid::net::{Adjoint, NetInput, NetOutput, NetParams};

#[test]
fn forward_and_rate_weights() {
    let worst = forward_and_rate_weight_gradients();
    assert!(worst < TOL, "worst relative error {worst:e}");
}

#[test]
fn time_derivative_in_time() {
    let worst = time_derivative_matches_finite_difference_in_time();
    assert!(worst < TOL, "worst relative error {worst:e}");
}

#[test]
fn data_loss() {
    let worst = data_loss_gradient();
    assert!(worst < TOL, "worst relative error {worst:e}");
}

#[test]
fn physics_loss_with_lambda() {
    let worst = physics_loss_gradient_including_lambda();
    assert!(worst < TOL, "worst relative error {worst:e}");
}

#[test]
fn log_posterior_all_coordinates() {
    let worst = log_posterior_gradient_over_all_coordinates();
    assert!(worst < TOL, "worst relative error {worst:e}");
}

#[test]
fn fd1_at_trained_weight_scale() {
    let err = fd1_dataset_gradient_at_trained_scale();
    assert!(err < TOL, "relative error {err:e}");
}

#[test]
fn forward_matches_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let net = random_net(&mut rng);
        let (s, p) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.2));
        let w1 = DMatrix::from_row_slice(10, 2, net.w1());
        let w2 = DMatrix::from_row_slice(2, 10, net.w2());
        let b1 = DVector::from_column_slice(net.b1());
        let b2 = DVector::from_column_slice(&net.b2());
        let z = &w1 * DVector::from_column_slice(&[s, p]) + b1;
        let y = w2 * z.map(f64::tanh) + b2;
        let out = net.forward(s, p);
        assert!((out.delta - y[0]).abs() < 1e-12);
        assert!((out.omega - y[1]).abs() < 1e-12);
    }
}

#[test]
fn time_derivative_tight_step() {
    // Step 1e-6 in normalized time, relative error below 1e-5.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let net = random_net(&mut rng);
        let duration = rng.gen_range(5.0..30.0);
        let (s, p) = (rng.gen_range(0.05..0.95), rng.gen_range(0.0..0.2));
        let rate = net.time_derivative(s, p, duration);
        let h = 1e-6;
        let (up, down) = (net.forward(s + h, p), net.forward(s - h, p));
        let fd = [
            (up.delta - down.delta) / (2.0 * h * duration),
            (up.omega - down.omega) / (2.0 * h * duration),
        ];
        let err = max_rel_err(&[rate.delta, rate.omega], &fd, 1e-2);
        assert!(err < 1e-5, "relative error {err:e}");
    }
}

#[test]
fn squared_output_gradient_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let net = random_net(&mut rng);
        let input = NetInput {
            t_norm: rng.gen_range(0.0..1.0),
            power: 0.1,
        };
        let g = net
            .grad_scalar(&[input], 27.0, |_, v, _| Adjoint {
                value: NetOutput::new(2.0 * v.delta, 2.0 * v.omega),
                rate: NetOutput::default(),
            })
            .unwrap();
        let fd = central_diff(net.as_slice(), 1e-6, |x| {
            let y = NetParams::from_flat(10, x.to_vec()).unwrap().forward(input.t_norm, input.power);
            y.delta * y.delta + y.omega * y.omega
        });
        let err = max_rel_err(g.as_slice(), &fd, 1e-3);
        assert!(err < 1e-5, "relative error {err:e}");
    }
}

#[test]
fn gradient_step_decreases_by_norm_squared() {
    // L(Θ + εg) − L(Θ) ≈ ε‖g‖² for small ε.
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let net = random_net(&mut rng);
    let input = NetInput { t_norm: 0.4, power: 0.1 };
    let scalar = |p: &NetParams| p.forward(input.t_norm, input.power).delta;
    let g = net
        .grad_scalar(&[input], 27.0, |_, _, _| Adjoint {
            value: NetOutput::new(1.0, 0.0),
            rate: NetOutput::default(),
        })
        .unwrap();
    let eps = 1e-7;
    let mut moved = net.clone();
    moved.axpy(eps, &g);
    let change = scalar(&moved) - scalar(&net);
    assert!((change / (eps * g.norm_sq()) - 1.0).abs() < 1e-4);
}
