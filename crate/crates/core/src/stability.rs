//! Stability experiments: distances between solution sets, the two-projection
//! instability construction, searches for observations with several best
//! approximations, and empirical Lipschitz ratios on balls of unique projection.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates;
use crate::error::{Error, Result};
use crate::geometry::{self, project_index, ConeProjection};
use crate::problem::{check_enumeration_cap, quotient_distance, Observation, SenseMatrix, SignPattern};
use crate::serde_util;
use crate::solver::{self, DEFAULT_TIE_RTOL};

/// Relative gap by which the second-best distinct projection must trail the best.
pub const UNIQUE_REGION_RTOL: f64 = 1e-8;

/// Projections closer than this (absolute, scaled by `1 + ‖p‖`) are the same point.
pub const POINT_MERGE_TOL: f64 = 1e-7;

/// Bisection stops once the two nearest distinct projections tie within this.
pub const BISECTION_TIE_TOL: f64 = 1e-10;

pub const MAX_BISECTION_STEPS: usize = 60;

struct Ranked {
    best: ConeProjection,
    /// Smallest distance among projections whose point differs from the best point.
    runner_up: Option<ConeProjection>,
}

fn rank_projections(a: &SenseMatrix, b: &DVector<f64>) -> Result<Ranked> {
    check_enumeration_cap(a.m())?;
    let n = SignPattern::canonical_count(a.m());
    let projs: Vec<ConeProjection> = (0..n).into_par_iter().map(|k| project_index(a, k, b)).collect();
    let best_k = (0..n)
        .min_by(|&i, &j| projs[i].distance.total_cmp(&projs[j].distance).then(i.cmp(&j)))
        .expect("at least one pattern");
    let merge = POINT_MERGE_TOL * (1.0 + projs[best_k].point.norm());
    let runner_k = (0..n)
        .filter(|&k| (&projs[k].point - &projs[best_k].point).norm() > merge)
        .min_by(|&i, &j| projs[i].distance.total_cmp(&projs[j].distance).then(i.cmp(&j)));
    let runner_up = runner_k.map(|k| projs[k].clone());
    let best = projs.into_iter().nth(best_k).expect("index in range");
    Ok(Ranked { best, runner_up })
}

fn gap_threshold(best: f64) -> f64 {
    UNIQUE_REGION_RTOL * (1.0 + best)
}

/// The unique nearest point of `K_A` to `b`, or `OutsideUniqueRegion` when a
/// different point is within `UNIQUE_REGION_RTOL·(1 + d(K_A, b))` of the optimum.
pub fn unique_projection(a: &SenseMatrix, b: &Observation) -> Result<ConeProjection> {
    b.check_against(a)?;
    let r = rank_projections(a, b.values())?;
    if let Some(second) = &r.runner_up {
        let gap = second.distance - r.best.distance;
        if gap <= gap_threshold(r.best.distance) {
            return Err(Error::OutsideUniqueRegion {
                point: b.values().iter().copied().collect(),
                reason: format!(
                    "two nearest points of the surface at distances {} and {} (gap {gap:e})",
                    r.best.distance, second.distance
                ),
            });
        }
    }
    Ok(r.best)
}

/// Whether `b` has a unique best approximation on `K_A` at the working tolerance.
pub fn in_unique_region(a: &SenseMatrix, b: &Observation) -> Result<bool> {
    match unique_projection(a, b) {
        Ok(_) => Ok(true),
        Err(Error::OutsideUniqueRegion { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// `min` over solution classes `x ∈ Φ(b₁)`, `y ∈ Φ(b₂)` of `min(‖x − y‖, ‖x + y‖)`.
pub fn solution_set_distance(a: &SenseMatrix, b1: &Observation, b2: &Observation) -> Result<f64> {
    let s1 = solver::solve_global(a, b1, DEFAULT_TIE_RTOL)?;
    let s2 = solver::solve_global(a, b2, DEFAULT_TIE_RTOL)?;
    let mut best = f64::INFINITY;
    for c1 in &s1.classes {
        for c2 in &s2.classes {
            best = best.min(quotient_distance(&c1.rep, &c2.rep)?);
        }
    }
    Ok(best)
}

/// Two nearby observations whose projections, and solutions, are far apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    pub b1: Observation,
    pub b2: Observation,
    pub epsilon: f64,
    #[serde(with = "serde_util::dvec")]
    pub seed: DVector<f64>,
    /// Verified unique projections of `b1` and `b2`.
    #[serde(with = "serde_util::dvec")]
    pub projection1: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub projection2: DVector<f64>,
    pub input_distance: f64,
    pub projection_distance: f64,
    pub projection_ratio: f64,
    pub solution_distance: f64,
    /// `dist(Φ(b1), Φ(b2)) / ‖b1 − b2‖`.
    pub ratio: f64,
}

/// From `b₀` with two best approximations `y₁ ≠ y₂`, builds
/// `b_i = (ε/2) y_i + (1 − ε/2) b₀`; each `b_i` then projects uniquely to `y_i`
/// while `‖b₁ − b₂‖ = (ε/2)‖y₁ − y₂‖`.
pub fn instability_witness(a: &SenseMatrix, b0: &Observation, epsilon: f64) -> Result<WitnessPair> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let best = geometry::best_approximations(a, b0, geometry::DEFAULT_BEST_APPROX_TOL)?;
    if best.len() < 2 {
        return Err(Error::Precondition(
            "seed has a unique best approximation; no witness can be built from it".into(),
        ));
    }
    let (y1, y2) = (&best.points[0], &best.points[1]);
    let h = epsilon / 2.0;
    let b1 = Observation::new(y1 * h + b0.values() * (1.0 - h))?;
    let b2 = Observation::new(y2 * h + b0.values() * (1.0 - h))?;

    let p1 = unique_projection(a, &b1)?.point;
    let p2 = unique_projection(a, &b2)?.point;
    for (p, y, which) in [(&p1, y1, "b1"), (&p2, y2, "b2")] {
        if (p - y).norm() > POINT_MERGE_TOL * (1.0 + y.norm()) {
            return Err(Error::Precondition(format!(
                "projection of {which} moved off its seed best approximation"
            )));
        }
    }
    let input_distance = (b1.values() - b2.values()).norm();
    let projection_distance = (&p1 - &p2).norm();
    let solution_distance = solution_set_distance(a, &b1, &b2)?;
    Ok(WitnessPair {
        seed: b0.values().clone(),
        projection1: p1,
        projection2: p2,
        input_distance,
        projection_distance,
        projection_ratio: projection_distance / input_distance,
        solution_distance,
        ratio: solution_distance / input_distance,
        b1,
        b2,
        epsilon,
    })
}

fn has_multiple_classes(a: &SenseMatrix, b: &Observation) -> Result<bool> {
    Ok(solver::solve_global(a, b, DEFAULT_TIE_RTOL)?.classes.len() >= 2)
}

/// Bisects the segment `lo → hi`, whose endpoints project to different points,
/// towards a jump of the nearest-point map, keeping at each step the half whose
/// endpoint projections differ more. A jump of `P` is where two distinct
/// nearest points tie.
fn bisect_tie(a: &SenseMatrix, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<Option<DVector<f64>>> {
    let mut p_lo = rank_projections(a, lo)?.best.point;
    let mut p_hi = rank_projections(a, hi)?.best.point;
    let merge = POINT_MERGE_TOL * (1.0 + p_lo.norm().max(p_hi.norm()));
    if (&p_lo - &p_hi).norm() <= merge {
        return Ok(None);
    }
    let (mut t_lo, mut t_hi) = (0.0f64, 1.0f64);
    let at = |t: f64| lo + (hi - lo) * t;
    let mut mid = at(0.5);
    for _ in 0..MAX_BISECTION_STEPS {
        let t = 0.5 * (t_lo + t_hi);
        mid = at(t);
        let r = rank_projections(a, &mid)?;
        if let Some(second) = &r.runner_up {
            if second.distance - r.best.distance <= BISECTION_TIE_TOL * (1.0 + r.best.distance) {
                break;
            }
        }
        let p = r.best.point;
        if (&p - &p_lo).norm() >= (&p_hi - &p).norm() {
            t_hi = t;
            p_hi = p;
        } else {
            t_lo = t;
            p_lo = p;
        }
    }
    Ok(Some(mid))
}

fn uniform_x(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
}

/// Looks for observations with at least two solution classes.
///
/// Without the complement property, `b = |Ax|` for random `x` already has two
/// classes. Otherwise trial 0 starts from a nonconvexity witness: its midpoint
/// is tested directly and then the segment between its two surface points is
/// bisected. Later trials bisect segments between `|Ax|` and `|Ax′|` for random
/// `x, x′`. Every returned seed is confirmed by `solve_global`.
pub fn nonunique_seed_search(a: &SenseMatrix, trials: usize, rng_seed: u64) -> Result<Vec<Observation>> {
    check_enumeration_cap(a.m())?;
    let mut seeds: Vec<Observation> = Vec::new();
    if trials == 0 {
        return Ok(seeds);
    }
    let push = |seeds: &mut Vec<Observation>, b: Observation| {
        let tol = 1e-9 * (1.0 + b.norm());
        if seeds.iter().all(|s| (s.values() - b.values()).norm() > tol) {
            seeds.push(b);
        }
    };

    let cp = certificates::complement_property(a)?;
    let d = a.d();
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(trial as u64);
        if !cp.holds() {
            let b = Observation::new((a.entries() * uniform_x(&mut rng, d)).abs())?;
            if has_multiple_classes(a, &b)? {
                push(&mut seeds, b);
            }
            continue;
        }
        let (y1, y2) = if trial == 0 {
            match geometry::nonconvexity_witness(a, 16, rng_seed) {
                Ok(w) => {
                    let mid = Observation::new(w.midpoint.clone())?;
                    if has_multiple_classes(a, &mid)? {
                        push(&mut seeds, mid);
                        continue;
                    }
                    (w.y1, w.y2)
                }
                Err(Error::SearchExhausted { .. }) | Err(Error::Precondition(_)) => continue,
                Err(e) => return Err(e),
            }
        } else {
            (
                (a.entries() * uniform_x(&mut rng, d)).abs(),
                (a.entries() * uniform_x(&mut rng, d)).abs(),
            )
        };
        if let Some(b) = bisect_tie(a, &y1, &y2)? {
            let b = Observation::new(b)?;
            if has_multiple_classes(a, &b)? {
                push(&mut seeds, b);
            }
        }
    }
    Ok(seeds)
}

/// The sampled ball `{b : ‖b − center‖ ≤ radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRegion {
    #[serde(with = "serde_util::dvec")]
    pub center: DVector<f64>,
    pub radius: f64,
    pub samples: usize,
    pub rng_seed: u64,
    /// Coverage statement: only the sampled points are checked for unique projection.
    pub verified: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPair {
    #[serde(with = "serde_util::dvec")]
    pub b: DVector<f64>,
    #[serde(with = "serde_util::dvec")]
    pub b_prime: DVector<f64>,
    pub distance: f64,
    pub projection_ratio: f64,
    pub solution_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub region: ScanRegion,
    pub max_projection_ratio: f64,
    pub max_solution_ratio: f64,
    pub pairs: Vec<ScanPair>,
}

fn sample_ball(rng: &mut ChaCha8Rng, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let m = center.len();
    let dir = loop {
        let g = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = g.norm();
        if n > 0.0 {
            break g / n;
        }
    };
    let r = radius * rng.random::<f64>().powf(1.0 / m as f64);
    center + dir * r
}

/// Samples `samples` pairs uniformly in the ball and reports the largest ratios
/// `‖P(b) − P(b′)‖ / ‖b − b′‖` and `dist(Φ(b), Φ(b′)) / ‖b − b′‖`.
///
/// Every sampled point (and the center) must have a unique projection;
/// the first one that does not aborts the scan.
pub fn convex_region_scan(
    a: &SenseMatrix,
    center: &Observation,
    radius: f64,
    samples: usize,
    rng_seed: u64,
) -> Result<StabilityReport> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius {radius} must be finite and ≥ 0")));
    }
    unique_projection(a, center)?;
    let region = ScanRegion {
        center: center.values().clone(),
        radius,
        samples,
        rng_seed,
        verified: "sampled points only".into(),
    };
    if radius == 0.0 {
        return Ok(StabilityReport {
            region,
            max_projection_ratio: 0.0,
            max_solution_ratio: 0.0,
            pairs: Vec::new(),
        });
    }
    let pairs: Vec<ScanPair> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<ScanPair> {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i as u64);
            let b = Observation::new(sample_ball(&mut rng, center.values(), radius))?;
            let bp = Observation::new(sample_ball(&mut rng, center.values(), radius))?;
            let p = unique_projection(a, &b)?.point;
            let pp = unique_projection(a, &bp)?.point;
            let distance = (b.values() - bp.values()).norm();
            let sol = solution_set_distance(a, &b, &bp)?;
            let (projection_ratio, solution_ratio) = if distance > 0.0 {
                ((&p - &pp).norm() / distance, sol / distance)
            } else {
                (0.0, 0.0)
            };
            Ok(ScanPair {
                b: b.values().clone(),
                b_prime: bp.values().clone(),
                distance,
                projection_ratio,
                solution_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let max_projection_ratio = pairs.iter().map(|p| p.projection_ratio).fold(0.0, f64::max);
    let max_solution_ratio = pairs.iter().map(|p| p.solution_ratio).fold(0.0, f64::max);
    Ok(StabilityReport {
        region,
        max_projection_ratio,
        max_solution_ratio,
        pairs,
    })
}

/// `max_t ‖P(b_{t+1}) − P(b_t)‖` over the uniform partition of `start → end`
/// into `steps` pieces. Every partition point must have a unique projection.
pub fn segment_max_step(a: &SenseMatrix, start: &Observation, end: &Observation, steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be ≥ 1".into()));
    }
    end.check_against(a)?;
    let points: Vec<DVector<f64>> = (0..=steps)
        .into_par_iter()
        .map(|t| {
            let s = t as f64 / steps as f64;
            let b = Observation::new(start.values() * (1.0 - s) + end.values() * s)?;
            Ok(unique_projection(a, &b)?.point)
        })
        .collect::<Result<_>>()?;
    Ok(points.windows(2).map(|w| (&w[1] - &w[0]).norm()).fold(0.0, f64::max))
}
