//! Global minimization of `‖|Ax| − b‖²` by exhaustive cone decomposition,
//! the fixed-point iteration `x ← (AᵀA)⁻¹Aᵀ(b ⊙ s(Ax))`, and a brute-force
//! grid oracle used for cross-checking.

use std::collections::HashSet;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, project_index};
use crate::problem::{
    abs_measure, objective, quotient_distance, Observation, SenseMatrix, SignClass, SignPattern,
    SolutionSet,
};
use crate::serde_util;

/// Relative tie tolerance on the optimal value.
pub const DEFAULT_TIE_RTOL: f64 = 1e-9;

/// Two minimizers are the same class when their quotient distance is below
/// this times `1 + ‖x‖`.
pub const CLASS_MERGE_RTOL: f64 = 1e-7;

/// Tolerance used for the internal fixed-point check of returned classes.
pub const FIXED_POINT_CHECK_TOL: f64 = 1e-7;

/// Largest grid the oracle will evaluate.
pub const GRID_POINT_CAP: usize = 1 << 25;

pub fn solve_global(a: &SenseMatrix, b: &Observation, tol: f64) -> Result<SolutionSet> {
    b.check_against(a)?;
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tie tolerance {tol} must be ≥ 0")));
    }
    let dists = geometry::cone_distances(a, b.values())?;
    let n = dists.len();
    let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let f_star = best * best;
    let band = f_star + tol * (1.0 + f_star);

    // recompute candidates exactly on the objective, in pattern order
    let candidates: Vec<(DVector<f64>, f64)> = dists
        .iter()
        .enumerate()
        .filter(|(_, &d)| d * d <= band)
        .map(|(k, _)| {
            let x = project_index(a, k, b.values()).preimage;
            let f = objective(a, b, &x).expect("dimensions checked");
            (x, f)
        })
        .collect();
    let optimal_value = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let band = optimal_value + tol * (1.0 + optimal_value);

    let mut classes: Vec<SignClass> = Vec::new();
    for (x, f) in candidates {
        if f > band {
            continue;
        }
        let merge = CLASS_MERGE_RTOL * (1.0 + x.norm());
        let duplicate = classes
            .iter()
            .any(|c| quotient_distance(&c.rep, &x).expect("same length") <= merge);
        if !duplicate {
            classes.push(SignClass::new(&x, f));
        }
    }

    let fixed_point_verified = if a.has_full_column_rank() && b.is_nonnegative() {
        let mut ok = true;
        for c in &classes {
            ok &= verify_fixed_point(a, b, &c.rep, FIXED_POINT_CHECK_TOL)?;
        }
        Some(ok)
    } else {
        None
    };

    Ok(SolutionSet {
        optimal_value,
        classes,
        num_patterns_explored: n,
        ties_within: tol,
        fixed_point_verified,
    })
}

/// The fixed-point map `x ↦ (AᵀA)⁻¹Aᵀ(b ⊙ s(Ax))` with `s(0) = +1`.
pub fn fixed_point_map(a: &SenseMatrix, b: &Observation, x: &DVector<f64>) -> Result<DVector<f64>> {
    b.check_against(a)?;
    a.check_d(x, "x")?;
    let pinv = a.pseudo_inverse()?;
    let s = SignPattern::of_vector(&(a.entries() * x));
    Ok(pinv * s.apply(b.values()))
}

pub fn verify_fixed_point(a: &SenseMatrix, b: &Observation, x: &DVector<f64>, tol: f64) -> Result<bool> {
    let image = fixed_point_map(a, b, x)?;
    Ok((x - image).norm() <= tol * (1.0 + x.norm()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRun {
    #[serde(with = "serde_util::dvec")]
    pub x: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Objective at `x0` followed by the objective after each update.
    pub objective_trace: Vec<f64>,
}

/// Alternating iteration `x ← (AᵀA)⁻¹Aᵀ(b ⊙ s(Ax))`.
///
/// Stops as converged when the sign pattern of the new iterate equals the
/// previous one (the next update would reproduce it exactly) or when the step
/// is below `tol·(1 + ‖x‖)`. A revisit of an older pattern stops the run
/// unconverged.
pub fn fixed_point_iterate(
    a: &SenseMatrix,
    b: &Observation,
    x0: &DVector<f64>,
    max_iters: usize,
    tol: f64,
) -> Result<FixedPointRun> {
    b.check_against(a)?;
    a.check_d(x0, "x0")?;
    let pinv = a.pseudo_inverse()?;

    let mut x = x0.clone();
    let mut pattern = SignPattern::of_vector(&(a.entries() * &x));
    let mut seen: HashSet<SignPattern> = HashSet::from([pattern.clone()]);
    let mut trace = vec![objective(a, b, &x)?];

    for iter in 1..=max_iters {
        let next = &pinv * pattern.apply(b.values());
        let next_pattern = SignPattern::of_vector(&(a.entries() * &next));
        trace.push(objective(a, b, &next)?);
        let step = (&next - &x).norm();
        let small_step = step <= tol * (1.0 + x.norm());
        if next_pattern == pattern || small_step {
            return Ok(FixedPointRun {
                x: next,
                iters: iter,
                converged: true,
                objective_trace: trace,
            });
        }
        if !seen.insert(next_pattern.clone()) {
            return Ok(FixedPointRun {
                x: next,
                iters: iter,
                converged: false,
                objective_trace: trace,
            });
        }
        x = next;
        pattern = next_pattern;
    }
    Ok(FixedPointRun {
        x,
        iters: max_iters,
        converged: false,
        objective_trace: trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_value: f64,
    #[serde(with = "serde_util::dvec_list")]
    pub argmins: Vec<DVector<f64>>,
    pub points_evaluated: usize,
    pub cell_tolerance: f64,
}

/// Upper bound on the gradient norm of the objective over the box:
/// `2 σ_max (σ_max R + ‖b‖)` with `R` the largest norm in the box.
pub fn grid_lipschitz_bound(a: &SenseMatrix, b: &Observation, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    let r = lo
        .iter()
        .zip(hi.iter())
        .map(|(l, h)| l.abs().max(h.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    2.0 * a.sigma_max() * (a.sigma_max() * r + b.norm())
}

/// Evaluates the objective on the grid `lo + step·k` inside `[lo, hi]`.
///
/// `argmins` holds the grid-local minima (no worse than any axis neighbour)
/// whose value is within one cell of the best, where a cell is worth
/// `L·step·√d / 2` for the bound `L` of [`grid_lipschitz_bound`].
pub fn grid_oracle(
    a: &SenseMatrix,
    b: &Observation,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    step: f64,
) -> Result<GridResult> {
    b.check_against(a)?;
    a.check_d(lo, "lo")?;
    a.check_d(hi, "hi")?;
    let d = a.d();
    if d > 3 {
        return Err(Error::InvalidArgument(format!("grid oracle supports d ≤ 3, got {d}")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("grid step {step} must be positive")));
    }
    if lo.iter().zip(hi.iter()).any(|(l, h)| h < l) {
        return Err(Error::InvalidArgument("empty grid: hi < lo".into()));
    }
    let counts: Vec<usize> = lo
        .iter()
        .zip(hi.iter())
        .map(|(l, h)| ((h - l) / step + 1e-9).floor() as usize + 1)
        .collect();
    let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
    let total = match total {
        Some(t) if t <= GRID_POINT_CAP => t,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "grid of {counts:?} points exceeds the cap of {GRID_POINT_CAP}"
            )))
        }
    };

    let point = |flat: usize| -> DVector<f64> {
        let mut rem = flat;
        DVector::from_fn(d, |j, _| {
            let stride: usize = counts[j + 1..].iter().product();
            let k = rem / stride;
            rem %= stride;
            lo[j] + step * k as f64
        })
    };

    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let y = abs_measure(a, &point(flat)).expect("dimensions checked");
            (y - b.values()).norm_squared()
        })
        .collect();
    let best_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let cell_tolerance = grid_lipschitz_bound(a, b, lo, hi) * step * (d as f64).sqrt() / 2.0;

    let strides: Vec<usize> = (0..d).map(|j| counts[j + 1..].iter().product()).collect();
    let argmins: Vec<DVector<f64>> = (0..total)
        .into_par_iter()
        .filter(|&flat| {
            let v = values[flat];
            if v > best_value + cell_tolerance {
                return false;
            }
            (0..d).all(|j| {
                let k = (flat / strides[j]) % counts[j];
                let left = k == 0 || values[flat - strides[j]] >= v;
                let right = k + 1 == counts[j] || values[flat + strides[j]] >= v;
                left && right
            })
        })
        .map(point)
        .collect();

    Ok(GridResult {
        best_value,
        argmins,
        points_evaluated: total,
        cell_tolerance,
    })
}
