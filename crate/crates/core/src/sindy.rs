//! Least-squares regression of finite-difference derivatives onto the known
//! swing-equation library `[1, Δω, sin δ]`.
//!
//! Only the `dΔω/dt` equation carries unknown parameters. With the
//! coefficients `Ξ = (c0, c1, c2)` the model reads
//! `dΔω/dt = c0 + c1·Δω + c2·sin δ`, so `c0 = P/m`, `c1 = −d/m`, `c2 = −B/m`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

pub const LIBRARY_COLUMNS: [&str; 3] = ["constant", "omega", "sin_delta"];

/// Relative size of a triangular pivot below which a column is treated as
/// linearly dependent on the preceding ones.
const RANK_TOL: f64 = 1e-10;

/// Relative susceptance mismatch that raises the consistency flag.
pub const B_CHECK_TOLERANCE: f64 = 0.2;

/// Library `ζ(x)` evaluated along a trajectory, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLibrary {
    rows: Vec<[f64; 3]>,
}

impl CandidateLibrary {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            rows: traj
                .states()
                .iter()
                .map(|s| [1.0, s.omega, s.delta.sin()])
                .collect(),
        }
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), 3, |i, j| self.rows[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SindyCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Sparsity weight ν; zero selects plain least squares.
    pub nu: f64,
    /// ‖y − ζΞ‖₂ of the final fit.
    pub residual_norm: f64,
}

impl SindyCoefficients {
    pub fn as_array(&self) -> [f64; 3] {
        [self.c0, self.c1, self.c2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SindyEstimate {
    pub m_hat: f64,
    pub d_hat: f64,
    pub b_check: f64,
    pub residual_norm: f64,
    pub flags: Vec<String>,
}

/// Derivative sequences `(dδ/dt, dΔω/dt)` by finite differences.
///
/// Central differences inside, second-order one-sided stencils at both ends.
pub fn finite_diff_derivatives(traj: &Trajectory) -> Result<(Vec<f64>, Vec<f64>)> {
    if traj.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: traj.len(),
        });
    }
    let h = traj.step();
    Ok((
        differentiate(&traj.deltas(), h),
        differentiate(&traj.omegas(), h),
    ))
}

fn differentiate(s: &[f64], h: f64) -> Vec<f64> {
    let n = s.len();
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (s[i + 1] - s[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * h);
    out
}

/// Fits `dΔω/dt` from finite differences of the trajectory itself.
pub fn fit(traj: &Trajectory, nu: f64) -> Result<SindyCoefficients> {
    if traj.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: traj.len(),
        });
    }
    let (_, omega_dot) = finite_diff_derivatives(traj)?;
    fit_with_derivatives(&CandidateLibrary::from_trajectory(traj), &omega_dot, nu)
}

/// Fits a supplied derivative sequence against the library.
///
/// `nu = 0` is ordinary least squares through a QR factorization. For
/// `nu > 0` coefficients with magnitude below `nu` are zeroed and the
/// remaining columns refit until the active set stops changing.
pub fn fit_with_derivatives(
    library: &CandidateLibrary,
    omega_dot: &[f64],
    nu: f64,
) -> Result<SindyCoefficients> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::InvalidConfig(format!("nu must be nonnegative, got {nu}")));
    }
    if library.len() != omega_dot.len() {
        return Err(Error::InvalidConfig(format!(
            "library has {} rows but {} derivative samples",
            library.len(),
            omega_dot.len()
        )));
    }
    if library.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: library.len(),
        });
    }
    let a = library.matrix();
    let y = DVector::from_column_slice(omega_dot);

    let mut active = [true; 3];
    let mut coeffs = least_squares(&a, &y, &active)?;
    if nu > 0.0 {
        for _ in 0..10 {
            let next: [bool; 3] = std::array::from_fn(|j| active[j] && coeffs[j].abs() >= nu);
            if next == active || !next.iter().any(|&b| b) {
                break;
            }
            active = next;
            coeffs = least_squares(&a, &y, &active)?;
        }
        for j in 0..3 {
            if !active[j] || coeffs[j].abs() < nu {
                coeffs[j] = 0.0;
            }
        }
    }
    let fitted = &a * DVector::from_column_slice(&coeffs);
    let residual_norm = (y - fitted).norm();
    Ok(SindyCoefficients {
        c0: coeffs[0],
        c1: coeffs[1],
        c2: coeffs[2],
        nu,
        residual_norm,
    })
}

fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>, active: &[bool; 3]) -> Result<[f64; 3]> {
    let cols: Vec<usize> = (0..3).filter(|&j| active[j]).collect();
    let sub = a.select_columns(&cols);
    let qr = sub.clone().qr();
    let r = qr.r();
    let mut offending = Vec::new();
    for (k, &j) in cols.iter().enumerate() {
        let col_norm = sub.column(k).norm();
        if col_norm == 0.0 || r[(k, k)].abs() <= RANK_TOL * col_norm {
            offending.push(LIBRARY_COLUMNS[j].to_string());
        }
    }
    if !offending.is_empty() {
        return Err(Error::SingularLibrary { columns: offending });
    }
    let qty = qr.q().transpose() * y;
    let sol = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularLibrary {
            columns: cols.iter().map(|&j| LIBRARY_COLUMNS[j].to_string()).collect(),
        })?;
    let mut out = [0.0; 3];
    for (k, &j) in cols.iter().enumerate() {
        out[j] = sol[k];
    }
    Ok(out)
}

/// Maps coefficients back to `(m, d)` using the known `P`; `B` is recovered
/// as a cross-check.
pub fn extract_params(coeffs: &SindyCoefficients, power: f64, susceptance: f64) -> Result<SindyEstimate> {
    if coeffs.c0.is_nan() || coeffs.c0.abs() <= 1e-12 {
        return Err(Error::UnidentifiableInertia { c0: coeffs.c0 });
    }
    let m_hat = power / coeffs.c0;
    let d_hat = -coeffs.c1 * m_hat;
    let b_check = -coeffs.c2 * m_hat;
    let mut flags = Vec::new();
    if ((b_check - susceptance) / susceptance).abs() > B_CHECK_TOLERANCE {
        flags.push("b_check_mismatch".to_string());
    }
    if m_hat <= 0.0 {
        flags.push("nonpositive_inertia".to_string());
    }
    if d_hat < 0.0 {
        flags.push("negative_damping".to_string());
    }
    Ok(SindyEstimate {
        m_hat,
        d_hat,
        b_check,
        residual_norm: coeffs.residual_norm,
        flags,
    })
}

/// `fit` followed by `extract_params`.
pub fn estimate(traj: &Trajectory, power: f64, susceptance: f64, nu: f64) -> Result<SindyEstimate> {
    extract_params(&fit(traj, nu)?, power, susceptance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, swing_rhs, Preset, State};

    fn grid(n: usize, h: f64, f: impl Fn(f64) -> State) -> Trajectory {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let states = times.iter().map(|&t| f(t)).collect();
        Trajectory::new(times, states, 1.0 / h).unwrap()
    }

    #[test]
    fn constant_trajectory_has_zero_derivatives() {
        let traj = grid(10, 0.1, |_| State::new(0.4, -0.2));
        let (dd, dw) = finite_diff_derivatives(&traj).unwrap();
        assert!(dd.iter().chain(&dw).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn central_difference_exact_for_quadratic() {
        let traj = grid(20, 0.1, |t| State::new(t * t, 0.0));
        let (dd, _) = finite_diff_derivatives(&traj).unwrap();
        for (i, d) in dd.iter().enumerate() {
            // One-sided second-order stencils are exact for quadratics too.
            let t = traj.times()[i];
            assert!((d - 2.0 * t).abs() < 1e-12, "i={i}: {d} vs {}", 2.0 * t);
        }
    }

    #[test]
    fn fd_matches_rhs_on_clean_fd1() {
        let sc = Preset::Fd1.scenario();
        let traj = simulate(&sc, 27.0, 10.0).unwrap();
        let (_, dw) = finite_diff_derivatives(&traj).unwrap();
        let worst = traj
            .states()
            .iter()
            .zip(&dw)
            .map(|(s, d)| (d - swing_rhs(s, &sc.params).omega).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn too_short_is_error() {
        let traj = grid(2, 0.1, |t| State::new(t, t));
        assert!(matches!(
            finite_diff_derivatives(&traj),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
        let traj = grid(3, 0.1, |t| State::new(t, t));
        assert!(matches!(fit(&traj, 0.0), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn exact_derivatives_recover_fd1_coefficients() {
        let sc = Preset::Fd1.scenario();
        let traj = simulate(&sc, 27.0, 10.0).unwrap();
        let rhs: Vec<f64> = traj
            .states()
            .iter()
            .map(|s| swing_rhs(s, &sc.params).omega)
            .collect();
        let c = fit_with_derivatives(&CandidateLibrary::from_trajectory(&traj), &rhs, 0.0).unwrap();
        assert!((c.c0 - 1.0 / 3.0).abs() < 1e-10);
        assert!((c.c1 + 0.5).abs() < 1e-10);
        assert!((c.c2 + 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn clean_fd1_inertia_within_five_percent() {
        let sc = Preset::Fd1.scenario();
        let traj = simulate(&sc, 27.0, 10.0).unwrap();
        let est = estimate(&traj, 0.1, 0.2, 0.0).unwrap();
        assert!(((est.m_hat - 0.3) / 0.3).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn zero_target_gives_zero_coefficients() {
        let traj = simulate(&Preset::Fd2.scenario(), 27.0, 10.0).unwrap();
        let lib = CandidateLibrary::from_trajectory(&traj);
        let c = fit_with_derivatives(&lib, &vec![0.0; lib.len()], 0.0).unwrap();
        assert!(c.as_array().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn collinear_library_names_columns() {
        // Constant Δω makes the Δω column a multiple of the constant one.
        let traj = grid(30, 0.1, |t| State::new(0.3 * t, 0.3));
        match fit(&traj, 0.0) {
            Err(Error::SingularLibrary { columns }) => assert_eq!(columns, vec!["omega"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extraction_inverts_fd1() {
        let c = SindyCoefficients {
            c0: 1.0 / 3.0,
            c1: -0.5,
            c2: -2.0 / 3.0,
            nu: 0.0,
            residual_norm: 0.0,
        };
        let e = extract_params(&c, 0.1, 0.2).unwrap();
        assert!((e.m_hat - 0.3).abs() < 1e-12);
        assert!((e.d_hat - 0.15).abs() < 1e-12);
        assert!((e.b_check - 0.2).abs() < 1e-12);
        assert!(e.flags.is_empty());
    }

    #[test]
    fn extraction_unit_inertia() {
        let c = SindyCoefficients {
            c0: 0.1,
            c1: 0.0,
            c2: -0.2,
            nu: 0.0,
            residual_norm: 0.0,
        };
        let e = extract_params(&c, 0.1, 0.2).unwrap();
        assert!((e.m_hat - 1.0).abs() < 1e-12);
        assert_eq!(e.d_hat, 0.0);
    }

    #[test]
    fn extraction_flags_and_errors() {
        let mut c = SindyCoefficients {
            c0: 0.0,
            c1: -0.5,
            c2: -2.0 / 3.0,
            nu: 0.0,
            residual_norm: 0.0,
        };
        assert!(matches!(
            extract_params(&c, 0.1, 0.2),
            Err(Error::UnidentifiableInertia { .. })
        ));
        c.c0 = 1.0 / 3.0;
        c.c2 = -1.0;
        let e = extract_params(&c, 0.1, 0.2).unwrap();
        assert!(e.flags.contains(&"b_check_mismatch".to_string()));
    }

    #[test]
    fn thresholding_drops_small_terms() {
        let sc = Preset::Fd1.scenario();
        let traj = simulate(&sc, 27.0, 10.0).unwrap();
        let lib = CandidateLibrary::from_trajectory(&traj);
        // Target with no Δω dependence: the threshold should remove it.
        let y: Vec<f64> = lib.rows().iter().map(|r| 0.5 - 0.8 * r[2] + 1e-4 * r[1]).collect();
        let c = fit_with_derivatives(&lib, &y, 0.01).unwrap();
        assert_eq!(c.c1, 0.0);
        assert!((c.c0 - 0.5).abs() < 1e-3);
        assert!((c.c2 + 0.8).abs() < 1e-3);
    }
}
