//! Plain SVGD on a correlated 2-D Gaussian, compared against its moments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use swingid::bpinn::svgd_step;

fn main() {
    let mean = [1.0, -2.0];
    // Precision of [[1, 0.5], [0.5, 2]].
    let det = 1.75;
    let prec = [[2.0 / det, -0.5 / det], [-0.5 / det, 1.0 / det]];

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut particles: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..2).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();

    for step in 0..=2000 {
        if step % 500 == 0 {
            let (mu, cov) = moments(&particles);
            println!("step {step:>4}  mean ({:.3}, {:.3})  cov {cov:.3?}", mu[0], mu[1]);
        }
        svgd_step(&mut particles, 0.05, |_, x| {
            let dx = [x[0] - mean[0], x[1] - mean[1]];
            vec![
                -(prec[0][0] * dx[0] + prec[0][1] * dx[1]),
                -(prec[1][0] * dx[0] + prec[1][1] * dx[1]),
            ]
        });
    }
    println!("target mean (1, -2), cov [[1, 0.5], [0.5, 2]]");
}

fn moments(ps: &[Vec<f64>]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = ps.len() as f64;
    let mu = [0, 1].map(|i| ps.iter().map(|p| p[i]).sum::<f64>() / n);
    let c = |a: usize, b: usize| ps.iter().map(|p| (p[a] - mu[a]) * (p[b] - mu[b])).sum::<f64>() / (n - 1.0);
    (mu, [[c(0, 0), c(0, 1)], [c(1, 0), c(1, 1)]])
}
