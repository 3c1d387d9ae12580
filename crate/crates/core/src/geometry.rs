//! Geometry of the phaseless surface `K_A = {|Ax| : x ∈ ℝᵈ}`, which is the
//! union over sign patterns `ε` of the convex cones `K_ε = {D_ε A x : D_ε A x ≥ 0}`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{self, Verdict};
use crate::cone;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{check_enumeration_cap, Observation, SenseMatrix, SignPattern};
use crate::serde_util;

/// Default tie and dedup tolerance for best-approximation sets.
pub const DEFAULT_BEST_APPROX_TOL: f64 = 1e-7;

/// Minimum surface distance of a nonconvexity midpoint.
pub const NONCONVEX_MIN_DISTANCE: f64 = 1e-6;

/// The nearest point of one cone `K_ε` to `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeProjection {
    pub pattern: SignPattern,
    #[serde(with = "serde_util::dvec")]
    pub point: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub preimage: DVector<f64>,
    pub distance: f64,
    pub kkt_residual: f64,
}

/// Projection of `b` onto `K_ε`, by solving
/// `min ‖D_ε A x − b‖²  s.t.  D_ε A x ≥ 0`.
pub fn cone_project(a: &SenseMatrix, eps: &SignPattern, b: &Observation) -> Result<ConeProjection> {
    b.check_against(a)?;
    if eps.len() != a.m() {
        return Err(Error::DimensionMismatch {
            what: "sign pattern",
            expected: a.m(),
            got: eps.len(),
        });
    }
    Ok(project_pattern(a, eps, b.values()))
}

pub(crate) fn project_pattern(a: &SenseMatrix, eps: &SignPattern, b: &DVector<f64>) -> ConeProjection {
    // With A x = Q z for an orthonormal basis Q of range(A), the cone is
    // {G z : G z ≥ 0} with G = D_ε Q, and ‖G z − b‖² = ‖z − Gᵀb‖² + const.
    let g = eps.apply_rows(a.range_basis());
    let w = g.transpose() * b;
    let qp = cone::project_onto_cone(&g, &w);
    let point = &g * &qp.z;
    let preimage = a.coords() * &qp.z;
    let distance = (b - &point).norm();
    ConeProjection {
        pattern: eps.clone(),
        point,
        preimage,
        distance,
        kkt_residual: qp.kkt_residual,
    }
}

pub(crate) fn project_index(a: &SenseMatrix, k: usize, b: &DVector<f64>) -> ConeProjection {
    project_pattern(a, &SignPattern::canonical_from_index(a.m(), k), b)
}

/// Distances from `b` to every canonical cone, ordered by pattern index.
pub(crate) fn cone_distances(a: &SenseMatrix, b: &DVector<f64>) -> Result<Vec<f64>> {
    check_enumeration_cap(a.m())?;
    let n = SignPattern::canonical_count(a.m());
    Ok((0..n)
        .into_par_iter()
        .map(|k| project_index(a, k, b).distance)
        .collect())
}

fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best })
}

/// Verdict of a membership query against `K_A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Membership {
    Inside {
        #[serde(with = "serde_util::dvec")]
        witness: DVector<f64>,
        residual: f64,
    },
    Outside {
        distance_lower_bound: f64,
    },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

pub fn membership(a: &SenseMatrix, y: &DVector<f64>, tol: f64) -> Result<Membership> {
    a.check_m(y, "y")?;
    if y.iter().any(|&v| v < -tol) {
        let neg = y.map(|v| v.min(0.0)).norm();
        return Ok(Membership::Outside {
            distance_lower_bound: neg,
        });
    }
    let dists = cone_distances(a, y)?;
    let (k, best) = argmin(&dists);
    if best <= tol {
        let proj = project_index(a, k, y);
        let residual = ((a.entries() * &proj.preimage).abs() - y).norm();
        if residual <= tol {
            return Ok(Membership::Inside {
                witness: proj.preimage,
                residual,
            });
        }
    }
    Ok(Membership::Outside {
        distance_lower_bound: best,
    })
}

/// `d(K_A, b)`.
pub fn surface_distance(a: &SenseMatrix, b: &Observation) -> Result<f64> {
    b.check_against(a)?;
    let dists = cone_distances(a, b.values())?;
    Ok(argmin(&dists).1)
}

/// The set `P_{K_A}(b)` of nearest points of the phaseless surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestApproximationSet {
    pub distance: f64,
    #[serde(with = "serde_util::dvec_list")]
    pub points: Vec<DVector<f64>>,
    /// Canonical pattern index that produced each point.
    pub patterns: Vec<usize>,
    pub tol: f64,
}

impl BestApproximationSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Keeps every cone projection with distance `≤ d*(1 + tol) + tol` and merges
/// points closer than `tol`, in pattern-index order.
pub fn best_approximations(a: &SenseMatrix, b: &Observation, tol: f64) -> Result<BestApproximationSet> {
    b.check_against(a)?;
    let dists = cone_distances(a, b.values())?;
    let (_, best) = argmin(&dists);
    let band = best * (1.0 + tol) + tol;
    let mut points: Vec<DVector<f64>> = Vec::new();
    let mut patterns = Vec::new();
    for (k, &dist) in dists.iter().enumerate() {
        if dist > band {
            continue;
        }
        let p = project_index(a, k, b.values()).point;
        if points.iter().all(|q| (q - &p).norm() > tol) {
            points.push(p);
            patterns.push(k);
        }
    }
    Ok(BestApproximationSet {
        distance: best,
        points,
        patterns,
        tol,
    })
}

/// Two points of `K_A` whose midpoint lies off the surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonconvexityWitness {
    #[serde(with = "serde_util::dvec")]
    pub x1: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub x2: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub y1: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub y2: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub midpoint: DVector<f64>,
    pub midpoint_distance: f64,
    pub attempts: usize,
}

/// Searches for `y₁, y₂ ∈ K_A` with `d(K_A, (y₁+y₂)/2) > NONCONVEX_MIN_DISTANCE`.
///
/// In coordinates where `d` independent rows of `A` are the identity, `x` is
/// paired with `x′` obtained by negating some coordinates. The first attempt
/// uses `x = (1,…,1)` with the first `d − 1` coordinates negated; later attempts
/// draw `x` and the flipped subset at random from `rng_seed`.
pub fn nonconvexity_witness(a: &SenseMatrix, budget: usize, rng_seed: u64) -> Result<NonconvexityWitness> {
    let cp = certificates::complement_property(a)?;
    if cp.verdict != Verdict::Holds {
        return Err(Error::Precondition(
            "matrix lacks the complement (phase retrieval) property".into(),
        ));
    }
    let d = a.d();
    let basis = independent_rows(a);
    let b = a.entries().select_rows(basis.iter());
    let b_inv = b
        .try_inverse()
        .ok_or_else(|| Error::Precondition("no invertible row basis".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for attempt in 0..budget {
        let (u, flip): (DVector<f64>, Vec<bool>) = if attempt == 0 {
            (DVector::from_element(d, 1.0), (0..d).map(|j| j + 1 < d).collect())
        } else {
            let u = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let mut flip: Vec<bool> = (0..d).map(|_| rng.random_bool(0.5)).collect();
            if flip.iter().all(|&f| f) || flip.iter().all(|&f| !f) {
                let j = rng.random_range(0..d);
                flip.iter_mut().for_each(|f| *f = false);
                flip[j] = true;
            }
            (u, flip)
        };
        let u2 = DVector::from_fn(d, |j, _| if flip[j] { -u[j] } else { u[j] });
        let x1 = &b_inv * &u;
        let x2 = &b_inv * &u2;
        let y1 = (a.entries() * &x1).abs();
        let y2 = (a.entries() * &x2).abs();
        let midpoint = (&y1 + &y2) * 0.5;
        let midpoint_distance = surface_distance(a, &Observation::from(midpoint.clone()))?;
        if midpoint_distance > NONCONVEX_MIN_DISTANCE {
            return Ok(NonconvexityWitness {
                x1,
                x2,
                y1,
                y2,
                midpoint,
                midpoint_distance,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::SearchExhausted {
        attempts: budget,
        what: "no midpoint off the phaseless surface".into(),
    })
}

/// First `rank` rows (in index order) that are linearly independent.
fn independent_rows(a: &SenseMatrix) -> Vec<usize> {
    let mut rows = Vec::new();
    for i in 0..a.m() {
        rows.push(i);
        if linalg::subset_rank(a.entries(), &rows, a.sigma_max()) < rows.len() {
            rows.pop();
        }
        if rows.len() == a.rank() {
            break;
        }
    }
    rows
}
