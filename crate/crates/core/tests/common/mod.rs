//! Finite-difference and closed-form oracles shared by the integration
//! and acceptance targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swingid::bpinn::{log_posterior, log_posterior_grad, Particle, PriorSpec};
use swingid::dynamics::{add_noise, simulate, NoiseSpec, Preset, Scenario, SystemParams, State};
use swingid::net::{Adjoint, NetInput, NetOutput, NetParams};
use swingid::pinn::{data_loss, loss_and_grad, physics_loss, Batch, ScenarioConstants};

pub const DRAWS: u64 = 100;
pub const TOL: f64 = 1e-4;

/// Largest componentwise relative error. Components far below the vector's
/// scale are compared against `floor · ‖fd‖∞` instead of their own size.
pub fn max_rel_err(analytic: &[f64], fd: &[f64], floor: f64) -> f64 {
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / f.abs().max(floor * scale).max(1e-12))
        .fold(0.0, f64::max)
}

pub fn central_diff<F: FnMut(&[f64]) -> f64>(x: &[f64], step: f64, mut f: F) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            let h = step * orig.abs().max(1.0);
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn random_net(rng: &mut ChaCha8Rng) -> NetParams {
    let time_std = rng.gen_range(0.5..10.0);
    let mut p = NetParams::init_with_time_std(10, time_std, rng);
    let b2 = p.split_mut().3;
    b2[0] = rng.gen_range(-1.0..1.0);
    b2[1] = rng.gen_range(-1.0..1.0);
    p
}

pub fn random_scenario(rng: &mut ChaCha8Rng) -> (Scenario, ScenarioConstants) {
    let params = SystemParams::new(
        rng.gen_range(0.2..2.0),
        rng.gen_range(0.1..1.5),
        0.2,
        rng.gen_range(0.02..0.15),
    )
    .unwrap();
    let c = ScenarioConstants {
        power: params.power,
        susceptance: params.susceptance,
    };
    (Scenario::custom("random", params, State::default()).unwrap(), c)
}

/// Worst relative error over all draws.
pub fn forward_and_rate_weight_gradients() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..DRAWS {
        let net = random_net(&mut rng);
        let input = NetInput {
            t_norm: rng.gen_range(0.0..1.0),
            power: rng.gen_range(0.0..0.2),
        };
        let duration = rng.gen_range(5.0..30.0);
        // Random linear functional of (x̂, dx̂/dt).
        let w: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let scalar = |p: &NetParams| {
            let (v, r) = p.evaluate(input.t_norm, input.power, duration);
            w[0] * v.delta + w[1] * v.omega + w[2] * r.delta + w[3] * r.omega
        };
        let g = net
            .grad_scalar(&[input], duration, |_, _, _| Adjoint {
                value: NetOutput::new(w[0], w[1]),
                rate: NetOutput::new(w[2], w[3]),
            })
            .unwrap();
        let fd = central_diff(net.as_slice(), 1e-6, |x| {
            scalar(&NetParams::from_flat(10, x.to_vec()).unwrap())
        });
        worst = worst.max(max_rel_err(g.as_slice(), &fd, 1e-3));
    }
    worst
}

/// Worst relative error over all draws.
pub fn time_derivative_matches_finite_difference_in_time() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..DRAWS {
        let net = random_net(&mut rng);
        let duration = rng.gen_range(5.0..30.0);
        let t = rng.gen_range(0.05..0.95) * duration;
        let power = rng.gen_range(0.0..0.2);
        let rate = net.time_derivative(t / duration, power, duration);
        let h = 1e-5;
        let up = net.forward((t + h) / duration, power);
        let down = net.forward((t - h) / duration, power);
        let fd = [(up.delta - down.delta) / (2.0 * h), (up.omega - down.omega) / (2.0 * h)];
        worst = worst.max(max_rel_err(&[rate.delta, rate.omega], &fd, 1e-2));
    }
    worst
}

pub fn random_batch(rng: &mut ChaCha8Rng) -> Batch {
    let (scenario, c) = random_scenario(rng);
    let traj = simulate(&scenario, rng.gen_range(3.0..8.0), 10.0).unwrap();
    let noisy = add_noise(&traj, &NoiseSpec::new(0.03, rng.gen())).unwrap();
    Batch::new(&noisy, c)
}

/// Worst relative error over all draws.
pub fn data_loss_gradient() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..DRAWS {
        let net = random_net(&mut rng);
        let batch = random_batch(&mut rng);
        let lg = loss_and_grad(&net, 0.0, 0.0, &batch, 1.0, 0.0).unwrap();
        let fd = central_diff(net.as_slice(), 1e-6, |x| {
            data_loss(&NetParams::from_flat(10, x.to_vec()).unwrap(), &batch)
        });
        worst = worst.max(max_rel_err(lg.theta.as_slice(), &fd, 1e-3));
    }
    worst
}

/// Worst relative error over all draws.
pub fn physics_loss_gradient_including_lambda() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..DRAWS {
        let net = random_net(&mut rng);
        let batch = random_batch(&mut rng);
        let log_m: f64 = rng.gen_range(-1.5..1.0);
        let log_d: f64 = rng.gen_range(-2.0..1.0);
        let lg = loss_and_grad(&net, log_m, log_d, &batch, 0.0, 1.0).unwrap();
        let mut analytic = lg.theta.as_slice().to_vec();
        analytic.extend([lg.log_m, lg.log_d]);
        let mut x0 = net.as_slice().to_vec();
        x0.extend([log_m, log_d]);
        let fd = central_diff(&x0, 1e-6, |x| {
            let n = x.len() - 2;
            let p = NetParams::from_flat(10, x[..n].to_vec()).unwrap();
            physics_loss(&p, (x[n].exp(), x[n + 1].exp()), &batch)
        });
        worst = worst.max(max_rel_err(&analytic, &fd, 1e-3));
    }
    worst
}

/// Worst relative error over all draws.
pub fn log_posterior_gradient_over_all_coordinates() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..DRAWS {
        let prior = PriorSpec {
            time_weight_std: rng.gen_range(0.5..10.0),
            ..Default::default()
        };
        let mut particle = Particle::sample(10, &prior, &mut rng);
        particle.log_m = rng.gen_range(-1.5..1.0);
        particle.log_d = rng.gen_range(-2.0..1.0);
        particle.log_sigma_x = [rng.gen_range(-2.0..0.5), rng.gen_range(-2.0..0.5)];
        particle.log_sigma_h = [rng.gen_range(-2.0..0.5), rng.gen_range(-2.0..0.5)];
        particle.log_p_prec = rng.gen_range(-1.0..3.0);
        let batch = random_batch(&mut rng);
        let (_, g) = log_posterior_grad(&particle, &batch, &prior).unwrap();
        let mut probe = particle.clone();
        let fd = central_diff(&particle.to_flat(), 1e-6, |x| {
            probe.set_flat(x);
            log_posterior(&probe, &batch, &prior).total
        });
        worst = worst.max(max_rel_err(&g, &fd, 1e-3));
    }
    worst
}

pub fn fd1_dataset_gradient_at_trained_scale() -> f64 {
    // The cases above use random systems; this one uses a preset with
    // realistic large time weights.
    let clean = simulate(&Preset::Fd1.scenario(), 27.0, 10.0).unwrap();
    let batch = Batch::new(
        &clean,
        ScenarioConstants {
            power: 0.1,
            susceptance: 0.2,
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = NetParams::init_with_time_std(10, 20.0, &mut rng);
    let lg = loss_and_grad(&net, 0.3f64.ln(), 0.15f64.ln(), &batch, 1.0, 0.3).unwrap();
    let mut analytic = lg.theta.as_slice().to_vec();
    analytic.extend([lg.log_m, lg.log_d]);
    let mut x0 = net.as_slice().to_vec();
    x0.extend([0.3f64.ln(), 0.15f64.ln()]);
    let fd = central_diff(&x0, 1e-6, |x| {
        let n = x.len() - 2;
        let p = NetParams::from_flat(10, x[..n].to_vec()).unwrap();
        data_loss(&p, &batch) + 0.3 * physics_loss(&p, (x[n].exp(), x[n + 1].exp()), &batch)
    });
    max_rel_err(&analytic, &fd, 1e-3)
}

/// SVGD on a correlated 2-D Gaussian. Returns the largest mean error and the
/// largest relative covariance error.
pub fn svgd_gaussian(n_particles: usize, steps: usize) -> (f64, f64) {
    use rand_distr::{Distribution, Normal};
    use swingid::bpinn::svgd_step;

    let mean = [1.0, -2.0];
    let cov = [[1.0, 0.5], [0.5, 2.0]];
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let prec = [
        [cov[1][1] / det, -cov[0][1] / det],
        [-cov[1][0] / det, cov[0][0] / det],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let nd = Normal::new(0.0, 1.0).unwrap();
    let mut ps: Vec<Vec<f64>> = (0..n_particles)
        .map(|_| vec![nd.sample(&mut rng), nd.sample(&mut rng)])
        .collect();
    for _ in 0..steps {
        svgd_step(&mut ps, 0.05, |_, x| {
            let dx = [x[0] - mean[0], x[1] - mean[1]];
            vec![
                -(prec[0][0] * dx[0] + prec[0][1] * dx[1]),
                -(prec[1][0] * dx[0] + prec[1][1] * dx[1]),
            ]
        });
    }
    let n = ps.len() as f64;
    let mu = [
        ps.iter().map(|p| p[0]).sum::<f64>() / n,
        ps.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let emp = |a: usize, b: usize| {
        ps.iter().map(|p| (p[a] - mu[a]) * (p[b] - mu[b])).sum::<f64>() / (n - 1.0)
    };
    let mean_err = (mu[0] - mean[0]).abs().max((mu[1] - mean[1]).abs());
    let mut cov_err = 0.0f64;
    for a in 0..2 {
        for b in 0..2 {
            cov_err = cov_err.max((emp(a, b) - cov[a][b]).abs() / cov[a][b].abs());
        }
    }
    (mean_err, cov_err)
}
