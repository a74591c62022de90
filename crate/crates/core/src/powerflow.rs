//! Forward power-flow evaluation and a Newton solver used to generate
//! synthetic operating points.
//!
//! Injections are computed through two independent routes that must agree:
//! branch-wise sums over the candidate set (the form that is linear in the
//! line parameters) and the classic admittance-matrix form. The Newton
//! solver uses the admittance form with analytic polar-coordinate partials.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{assemble_admittance, GridSpec, StateParams};

/// One system snapshot: voltage magnitudes, phase angles (radians), and
/// real/reactive injections, all per-unit and indexed by bus.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub v: DVector<f64>,
    pub theta: DVector<f64>,
    pub p: DVector<f64>,
    pub q: DVector<f64>,
}

fn check_profile(spec: &GridSpec, v: &DVector<f64>, theta: &DVector<f64>) -> Result<()> {
    if v.len() != spec.n_bus() || theta.len() != spec.n_bus() {
        return Err(Error::DimensionMismatch(format!(
            "profile length ({}, {}) does not match bus count {}",
            v.len(),
            theta.len(),
            spec.n_bus()
        )));
    }
    if v.iter().chain(theta.iter()).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite voltage profile".into()));
    }
    Ok(())
}

/// Branch-wise injections: for each bus `i`, sums over incident candidate
/// branches `j = (a, b)` with angle difference taken in branch orientation,
///
/// `p_i += g_j (v_i^2 - v_a v_b cos Δ) - b_j s v_a v_b sin Δ`
/// `q_i += b_j (v_a v_b cos Δ - v_i^2) - g_j s v_a v_b sin Δ`
///
/// where `Δ = θ_a - θ_b` and `s` is the incidence sign of bus `i`. This is
/// linear in `(g, b)` and is the form the regressors are built from.
pub fn injections(
    spec: &GridSpec,
    params: &StateParams,
    v: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_profile(spec, v, theta)?;
    if params.n_branch() != spec.n_branch() {
        return Err(Error::DimensionMismatch(format!(
            "params cover {} branches, grid has {}",
            params.n_branch(),
            spec.n_branch()
        )));
    }
    let n = spec.n_bus();
    let mut p = DVector::zeros(n);
    let mut q = DVector::zeros(n);
    for (j, &(a, b)) in spec.branches().iter().enumerate() {
        let (ia, ib) = (a - 1, b - 1);
        let delta = theta[ia] - theta[ib];
        let cross = v[ia] * v[ib];
        let cos_d = delta.cos();
        let sin_d = delta.sin();
        let gj = params.g[j];
        let bj = params.b[j];

        // Bus a sees the branch with sign +1, bus b with sign -1; cos is
        // even in the signed angle, sin is odd.
        p[ia] += gj * (v[ia] * v[ia] - cross * cos_d) - bj * cross * sin_d;
        q[ia] += bj * (cross * cos_d - v[ia] * v[ia]) - gj * cross * sin_d;

        p[ib] += gj * (v[ib] * v[ib] - cross * cos_d) + bj * cross * sin_d;
        q[ib] += bj * (cross * cos_d - v[ib] * v[ib]) + gj * cross * sin_d;
    }
    Ok((p, q))
}

/// Admittance-form injections,
/// `p_i = Σ_k v_i v_k (G_ik cos θ_ik + B_ik sin θ_ik)` and
/// `q_i = Σ_k v_i v_k (G_ik sin θ_ik - B_ik cos θ_ik)`.
///
/// Kept as an independent route; it must agree with [`injections`] to
/// numerical precision.
pub fn injections_admittance(
    spec: &GridSpec,
    params: &StateParams,
    v: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_profile(spec, v, theta)?;
    let (g_mat, b_mat) = assemble_admittance(spec, params)?;
    Ok(injections_from_matrices(&g_mat, &b_mat, v, theta))
}

fn injections_from_matrices(
    g_mat: &DMatrix<f64>,
    b_mat: &DMatrix<f64>,
    v: &DVector<f64>,
    theta: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let n = v.len();
    let mut p = DVector::zeros(n);
    let mut q = DVector::zeros(n);
    for i in 0..n {
        let mut pi = 0.0;
        let mut qi = 0.0;
        for k in 0..n {
            let gik = g_mat[(i, k)];
            let bik = b_mat[(i, k)];
            if gik == 0.0 && bik == 0.0 {
                continue;
            }
            let d = theta[i] - theta[k];
            let w = v[i] * v[k];
            pi += w * (gik * d.cos() + bik * d.sin());
            qi += w * (gik * d.sin() - bik * d.cos());
        }
        p[i] = pi;
        q[i] = qi;
    }
    (p, q)
}

/// Newton power-flow settings. All buses except the slack are treated as
/// PQ buses; the slack holds `v = 1.0`, `θ = 0`.
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-12,
        }
    }
}

/// Solves for the operating point with the specified injections at every
/// non-slack bus (slack entries of `p_spec`/`q_spec` are ignored).
///
/// The returned injections are re-evaluated branch-wise from the solved
/// voltages, so downstream identities in the line parameters hold to
/// machine precision rather than to the solver tolerance.
pub fn solve_powerflow(
    spec: &GridSpec,
    params: &StateParams,
    p_spec: &DVector<f64>,
    q_spec: &DVector<f64>,
) -> Result<OperatingPoint> {
    solve_powerflow_with(spec, params, p_spec, q_spec, &NewtonOptions::default())
}

pub fn solve_powerflow_with(
    spec: &GridSpec,
    params: &StateParams,
    p_spec: &DVector<f64>,
    q_spec: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<OperatingPoint> {
    let n = spec.n_bus();
    if p_spec.len() != n || q_spec.len() != n {
        return Err(Error::DimensionMismatch(
            "injection vectors must match bus count".into(),
        ));
    }
    check_connected(spec, params)?;
    let (g_mat, b_mat) = assemble_admittance(spec, params)?;
    let slack = spec.slack_bus() - 1;
    let free: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let nf = free.len();

    // Flat start.
    let mut v = DVector::from_element(n, 1.0);
    let mut theta = DVector::zeros(n);

    let mut mismatch = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let (p, q) = injections_from_matrices(&g_mat, &b_mat, &v, &theta);
        let mut f = DVector::zeros(2 * nf);
        for (r, &i) in free.iter().enumerate() {
            f[r] = p[i] - p_spec[i];
            f[nf + r] = q[i] - q_spec[i];
        }
        mismatch = f.amax();
        if mismatch < opts.tolerance {
            let (p_out, q_out) = injections(spec, params, &v, &theta)?;
            return Ok(OperatingPoint {
                v,
                theta,
                p: p_out,
                q: q_out,
            });
        }
        if !mismatch.is_finite() {
            break;
        }

        // Standard polar-coordinate Jacobian blocks.
        let mut jac = DMatrix::zeros(2 * nf, 2 * nf);
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                let (dp_dth, dp_dv, dq_dth, dq_dv) = if i == j {
                    (
                        -q[i] - b_mat[(i, i)] * v[i] * v[i],
                        p[i] / v[i] + g_mat[(i, i)] * v[i],
                        p[i] - g_mat[(i, i)] * v[i] * v[i],
                        q[i] / v[i] - b_mat[(i, i)] * v[i],
                    )
                } else {
                    let gij = g_mat[(i, j)];
                    let bij = b_mat[(i, j)];
                    if gij == 0.0 && bij == 0.0 {
                        continue;
                    }
                    let d = theta[i] - theta[j];
                    let w = v[i] * v[j];
                    (
                        w * (gij * d.sin() - bij * d.cos()),
                        v[i] * (gij * d.cos() + bij * d.sin()),
                        -w * (gij * d.cos() + bij * d.sin()),
                        v[i] * (gij * d.sin() - bij * d.cos()),
                    )
                };
                jac[(r, c)] = dp_dth;
                jac[(r, nf + c)] = dp_dv;
                jac[(nf + r, c)] = dq_dth;
                jac[(nf + r, nf + c)] = dq_dv;
            }
        }

        let step = jac
            .lu()
            .solve(&(-f))
            .ok_or_else(|| Error::SingularSystem("power-flow Jacobian".into()))?;
        for (r, &i) in free.iter().enumerate() {
            theta[i] += step[r];
            v[i] += step[nf + r];
            if v[i] <= 0.0 {
                return Err(Error::PowerFlowDiverged {
                    iterations: opts.max_iterations,
                    mismatch,
                });
            }
        }
    }
    Err(Error::PowerFlowDiverged {
        iterations: opts.max_iterations,
        mismatch,
    })
}

/// A branch is treated as present when its admittance magnitude exceeds
/// this threshold; the active subgraph must connect every bus to the slack.
const PRESENCE_EPS: f64 = 1e-9;

fn check_connected(spec: &GridSpec, params: &StateParams) -> Result<()> {
    let n = spec.n_bus();
    let mut adj = vec![Vec::new(); n];
    for (j, &(a, b)) in spec.branches().iter().enumerate() {
        if params.g[j].hypot(params.b[j]) > PRESENCE_EPS {
            adj[a - 1].push(b - 1);
            adj[b - 1].push(a - 1);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![spec.slack_bus() - 1];
    seen[spec.slack_bus() - 1] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(Error::DisconnectedNetwork)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_bus() -> GridSpec {
        GridSpec::new(2, 1, &[(1, 2)]).unwrap()
    }

    #[test]
    fn flat_profile_gives_zero_injections() {
        let spec = two_bus();
        let params = StateParams::from_slices(&[3.0], &[-7.0]).unwrap();
        let v = DVector::from_element(2, 1.0);
        let theta = DVector::zeros(2);
        let (p, q) = injections(&spec, &params, &v, &theta).unwrap();
        assert!(p.amax() < 1e-15);
        assert!(q.amax() < 1e-15);
    }

    #[test]
    fn two_bus_hand_values() {
        let spec = two_bus();
        let params = StateParams::from_slices(&[1.0], &[0.0]).unwrap();
        let v = DVector::from_row_slice(&[1.0, 0.9]);
        let theta = DVector::zeros(2);
        let (p, q) = injections(&spec, &params, &v, &theta).unwrap();
        assert_relative_eq!(p[0], 0.1, epsilon = 1e-14);
        assert_relative_eq!(p[1], -0.09, epsilon = 1e-14);
        assert!(q.amax() < 1e-15);
    }

    fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> (DVector<f64>, DVector<f64>) {
        let v = DVector::from_fn(n, |_, _| 0.9 + 0.2 * rng.random::<f64>());
        let theta = DVector::from_fn(n, |_, _| -0.2 + 0.4 * rng.random::<f64>());
        (v, theta)
    }

    #[test]
    fn branch_form_matches_admittance_form() {
        let spec = GridSpec::new(4, 1, &[(1, 2), (2, 3), (3, 4), (1, 4), (2, 4)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let params = StateParams::new(
                DVector::from_fn(5, |_, _| rng.random::<f64>() * 8.0),
                DVector::from_fn(5, |_, _| -12.0 * rng.random::<f64>()),
            )
            .unwrap();
            let (v, theta) = random_profile(&mut rng, 4);
            let (p1, q1) = injections(&spec, &params, &v, &theta).unwrap();
            let (p2, q2) = injections_admittance(&spec, &params, &v, &theta).unwrap();
            assert!((p1 - p2).amax() < 1e-10);
            assert!((q1 - q2).amax() < 1e-10);
        }
    }

    #[test]
    fn lossless_network_balances_real_power() {
        let spec = GridSpec::new(3, 1, &[(1, 2), (2, 3)]).unwrap();
        let params = StateParams::from_slices(&[0.0, 0.0], &[-8.0, -6.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (v, theta) = random_profile(&mut rng, 3);
            let (p, _) = injections(&spec, &params, &v, &theta).unwrap();
            assert!(p.sum().abs() < 1e-10);
        }
    }

    #[test]
    fn zero_loads_solve_to_flat_profile() {
        let spec = two_bus();
        let params = StateParams::from_slices(&[1.0], &[-10.0]).unwrap();
        let zero = DVector::zeros(2);
        let op = solve_powerflow(&spec, &params, &zero, &zero).unwrap();
        assert!((op.v[1] - 1.0).abs() < 1e-12);
        assert!(op.theta[1].abs() < 1e-12);
    }

    #[test]
    fn solution_reproduces_specified_loads() {
        let spec = GridSpec::new(3, 1, &[(1, 2), (2, 3)]).unwrap();
        let params = StateParams::from_slices(&[4.0, 3.0], &[-8.0, -6.0]).unwrap();
        let p_spec = DVector::from_row_slice(&[0.0, -0.05, -0.03]);
        let q_spec = DVector::from_row_slice(&[0.0, -0.02, -0.01]);
        let op = solve_powerflow(&spec, &params, &p_spec, &q_spec).unwrap();
        for i in 1..3 {
            assert!((op.p[i] - p_spec[i]).abs() < 1e-10);
            assert!((op.q[i] - q_spec[i]).abs() < 1e-10);
        }
        assert_eq!(op.theta[0], 0.0);
        assert_eq!(op.v[0], 1.0);
    }

    /// Independent oracle: a test-local 2-unknown Newton iteration with a
    /// finite-difference Jacobian, sharing no code with the solver.
    #[test]
    fn two_bus_matches_independent_newton() {
        let g = 1.0;
        let b = -10.0;
        let p2 = -0.01;
        let q2 = 0.0;

        let inj = |th2: f64, v2: f64| {
            let p = g * (v2 * v2 - v2 * th2.cos()) + b * v2 * th2.sin();
            let q = b * (v2 * th2.cos() - v2 * v2) + g * v2 * th2.sin();
            (p, q)
        };
        let mut th2 = 0.0_f64;
        let mut v2 = 1.0_f64;
        for _ in 0..60 {
            let (p, q) = inj(th2, v2);
            let (fp, fq) = (p - p2, q - q2);
            if fp.abs().max(fq.abs()) < 1e-13 {
                break;
            }
            let h = 1e-7;
            let (p_th, q_th) = inj(th2 + h, v2);
            let (p_v, q_v) = inj(th2, v2 + h);
            let j11 = (p_th - p) / h;
            let j12 = (p_v - p) / h;
            let j21 = (q_th - q) / h;
            let j22 = (q_v - q) / h;
            let det = j11 * j22 - j12 * j21;
            th2 -= (fp * j22 - fq * j12) / det;
            v2 -= (fq * j11 - fp * j21) / det;
        }

        let spec = two_bus();
        let params = StateParams::from_slices(&[g], &[b]).unwrap();
        let p_spec = DVector::from_row_slice(&[0.0, p2]);
        let q_spec = DVector::from_row_slice(&[0.0, q2]);
        let op = solve_powerflow(&spec, &params, &p_spec, &q_spec).unwrap();
        assert_relative_eq!(op.theta[1], th2, epsilon = 1e-8);
        assert_relative_eq!(op.v[1], v2, epsilon = 1e-8);
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let spec = GridSpec::new(3, 1, &[(1, 2), (2, 3)]).unwrap();
        let params = StateParams::from_slices(&[4.0, 0.0], &[-8.0, 0.0]).unwrap();
        let zero = DVector::zeros(3);
        assert!(matches!(
            solve_powerflow(&spec, &params, &zero, &zero),
            Err(Error::DisconnectedNetwork)
        ));
    }

    #[test]
    fn hopeless_loading_reports_divergence() {
        let spec = two_bus();
        let params = StateParams::from_slices(&[0.1], &[-0.2]).unwrap();
        let p_spec = DVector::from_row_slice(&[0.0, -5.0]);
        let q_spec = DVector::from_row_slice(&[0.0, -5.0]);
        assert!(matches!(
            solve_powerflow(&spec, &params, &p_spec, &q_spec),
            Err(Error::PowerFlowDiverged { .. }) | Err(Error::SingularSystem(_))
        ));
    }
}
