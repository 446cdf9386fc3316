//! Stein variational gradient descent over flat particle vectors.
//!
//! Kernel: `k(x, y) = exp(−‖x − y‖² / h)` with the median heuristic
//! `h = median(‖xᵢ − xⱼ‖²) / ln(n + 1)`.

/// Smallest bandwidth used, so coincident particles do not divide by zero.
pub const MIN_BANDWIDTH: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise squared distances, `n × n` row-major.
pub fn pairwise_sq_dists(particles: &[Vec<f64>]) -> Vec<f64> {
    let n = particles.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(&particles[i], &particles[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Median-heuristic bandwidth over all ordered pairs `i ≠ j`.
pub fn median_bandwidth(sq_dists: &[f64], n: usize) -> f64 {
    if n < 2 {
        return 1.0;
    }
    let mut off: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| sq_dists[i * n + j])
        .collect();
    off.sort_by(f64::total_cmp);
    let mid = off.len() / 2;
    let median = if off.len().is_multiple_of(2) {
        0.5 * (off[mid - 1] + off[mid])
    } else {
        off[mid]
    };
    (median / ((n + 1) as f64).ln()).max(MIN_BANDWIDTH)
}

/// RBF kernel value for a squared distance.
pub fn rbf(sq_dist: f64, bandwidth: f64) -> f64 {
    (-sq_dist / bandwidth).exp()
}

/// Stein direction for every particle:
/// `φᵢ = (1/n) Σⱼ [k(xⱼ, xᵢ) ∇log p(xⱼ) + ∇_{xⱼ} k(xⱼ, xᵢ)]`.
///
/// Returns the directions and the bandwidth used.
pub fn stein_direction(particles: &[Vec<f64>], grads: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = particles.len();
    assert_eq!(grads.len(), n);
    let dim = particles.first().map_or(0, Vec::len);
    let sq = pairwise_sq_dists(particles);
    let h = median_bandwidth(&sq, n);
    let inv_n = 1.0 / n as f64;
    let mut phi = vec![vec![0.0; dim]; n];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        for j in 0..n {
            let k = rbf(sq[i * n + j], h);
            // ∇_{xj} k(xj, xi) = −2 (xj − xi) / h · k
            let c = -2.0 * k / h;
            let (xi, xj, gj) = (&particles[i], &particles[j], &grads[j]);
            for a in 0..dim {
                phi_i[a] += k * gj[a] + c * (xj[a] - xi[a]);
            }
        }
        for v in phi_i.iter_mut() {
            *v *= inv_n;
        }
    }
    (phi, h)
}

/// One plain SVGD update `xᵢ ← xᵢ + ε φᵢ`.
///
/// `grad_log_p` is called once per particle with its index and coordinates.
pub fn svgd_step<F>(particles: &mut [Vec<f64>], step_size: f64, mut grad_log_p: F)
where
    F: FnMut(usize, &[f64]) -> Vec<f64>,
{
    let grads: Vec<Vec<f64>> = particles
        .iter()
        .enumerate()
        .map(|(i, x)| grad_log_p(i, x))
        .collect();
    let (phi, _) = stein_direction(particles, &grads);
    for (x, p) in particles.iter_mut().zip(&phi) {
        for (xa, pa) in x.iter_mut().zip(p) {
            *xa += step_size * pa;
        }
    }
}
