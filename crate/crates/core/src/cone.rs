//! Projection onto a polyhedral cone `{z : G z ≥ 0}`.
//!
//! The primal problem `min ½‖z − w‖²  s.t.  G z ≥ 0` is solved through its dual
//! `min_{λ ≥ 0} ½‖Gᵀλ + w‖²` with the Lawson–Hanson active-set method; the
//! primal solution is recovered as `z = w + Gᵀλ`. Starting from `λ = 0` means
//! the first iterate is the unconstrained minimizer `z = w`, and constraints
//! enter the active set only as they are violated.

use nalgebra::{DMatrix, DVector};

use crate::linalg;

#[derive(Clone, Debug)]
pub(crate) struct ConeQp {
    pub z: DVector<f64>,
    pub kkt_residual: f64,
}

pub(crate) fn project_onto_cone(g: &DMatrix<f64>, w: &DVector<f64>) -> ConeQp {
    let (m, r) = g.shape();
    if r == 0 {
        return ConeQp {
            z: DVector::zeros(0),
            kkt_residual: 0.0,
        };
    }

    let mut lambda = DVector::<f64>::zeros(m);
    let tol = 1e-13 * (1.0 + w.norm());
    let mut passive = vec![false; m];
    let mut blocked = vec![false; m];
    let max_outer = 10 * m + 50;

    let mut z = w.clone();
    for _ in 0..max_outer {
        // dual gradient: −G z; a positive entry is a violated constraint
        let gz = g * &z;
        let pick = (0..m)
            .filter(|&i| !passive[i] && !blocked[i] && -gz[i] > tol)
            .max_by(|&i, &j| (-gz[i]).total_cmp(&-gz[j]).then(j.cmp(&i)));
        let Some(j) = pick else { break };
        passive[j] = true;

        let before = lambda.clone();
        for _ in 0..(3 * m + 10) {
            let idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
            let mu = solve_passive(g, w, &idx);
            if mu.iter().all(|&v| v > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    lambda[i] = mu[k];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (k, &i) in idx.iter().enumerate() {
                if mu[k] <= 0.0 {
                    let denom = lambda[i] - mu[k];
                    let step = if denom > 0.0 { lambda[i] / denom } else { 0.0 };
                    alpha = alpha.min(step);
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                lambda[i] += alpha * (mu[k] - lambda[i]);
            }
            let floor = 1e-15 * (1.0 + lambda.amax());
            for &i in &idx {
                if lambda[i] <= floor {
                    lambda[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }

        if (&lambda - &before).amax() == 0.0 {
            // the new constraint could not enter (rounding); skip it until λ moves
            blocked[j] = true;
            passive[j] = false;
        } else {
            blocked.iter_mut().for_each(|b| *b = false);
        }
        z = w + g.transpose() * &lambda;
    }

    let z = w + g.transpose() * &lambda;
    let kkt_residual = kkt_residual(g, w, &z, &lambda);
    ConeQp {
        z,
        kkt_residual,
    }
}

fn solve_passive(g: &DMatrix<f64>, w: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    // min ‖G_Pᵀ μ + w‖
    let gp_t = g.select_rows(idx.iter()).transpose();
    linalg::lstsq(&gp_t, &(-w))
}

/// Largest violation among primal feasibility, dual feasibility,
/// complementary slackness and stationarity.
pub(crate) fn kkt_residual(
    g: &DMatrix<f64>,
    w: &DVector<f64>,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
) -> f64 {
    let gz = g * z;
    let primal = gz.iter().fold(0.0f64, |acc, &v| acc.max(-v));
    let dual = lambda.iter().fold(0.0f64, |acc, &v| acc.max(-v));
    let comp = gz
        .iter()
        .zip(lambda.iter())
        .fold(0.0f64, |acc, (&a, &l)| acc.max((a * l).abs()));
    let stat = (z - w - g.transpose() * lambda).amax();
    primal.max(dual).max(comp).max(stat)
}
