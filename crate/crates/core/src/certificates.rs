//! Uniqueness certificates: the complement property, the σ-strong complement
//! property, the whitened polynomial screen, the near-surface noise condition,
//! and ground-truth uniqueness by exhaustive solution.
//!
//! Row indices in evidence are 0-based.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{
    abs_measure, check_enumeration_cap, orthonormality_defect, whiten, Observation, SenseMatrix,
    SignClass, SignPattern, WHITENING_TOL,
};
use crate::solver;

/// Default relative tolerance of the polynomial screen (relative to `‖b‖²`).
pub const DEFAULT_POLY_TOL: f64 = 1e-8;

/// Upper cap on `β` used by the near-surface certificate.
pub const BETA_CAP: f64 = 1.0 - 1e-12;

/// Most near-zero pattern pairs kept as evidence.
pub const MAX_LISTED_PAIRS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    ComplementProperty,
    #[serde(rename = "SCP")]
    Scp,
    PolyScreen,
    NearSurface,
    ExactUnique,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplementEvidence {
    /// A subset `I` such that neither `I` nor its complement spans `ℝᵈ`.
    pub violating_subset: Option<Vec<usize>>,
    pub subsets_checked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScpEvidence {
    pub sigma: f64,
    pub sigma_squared: f64,
    /// A subset `Γ` attaining the minimum.
    pub gamma: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternPair {
    pub first: SignPattern,
    pub second: SignPattern,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyScreenEvidence {
    pub threshold: f64,
    pub min_abs_value: Option<f64>,
    pub pairs_checked: u64,
    pub near_zero_count: u64,
    pub near_zero_pairs: Vec<PatternPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearSurfaceEvidence {
    pub beta: f64,
    pub lambda: f64,
    pub eta_norm: f64,
    /// `β²λ − ‖η‖`; nonnegative exactly when the noise condition holds.
    pub margin: f64,
    pub whitened_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactEvidence {
    pub optimal_value: Option<f64>,
    pub classes: Vec<SignClass>,
    pub diagnosis: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Evidence {
    ComplementProperty(ComplementEvidence),
    Scp(ScpEvidence),
    PolyScreen(PolyScreenEvidence),
    NearSurface(NearSurfaceEvidence),
    ExactUnique(ExactEvidence),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub verdict: Verdict,
    pub evidence: Evidence,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn sigma(&self) -> Option<f64> {
        match &self.evidence {
            Evidence::Scp(e) => Some(e.sigma),
            _ => None,
        }
    }
}

fn mask_rows(mask: usize, m: usize) -> (Vec<usize>, Vec<usize>) {
    (0..m).partition(|&i| mask >> i & 1 == 1)
}

/// For every subset `I`, the rows in `I` or in its complement must span `ℝᵈ`.
///
/// Subsets are visited by bitmask with the last row always in the complement,
/// since `I` and `Iᶜ` give the same condition; the lowest failing mask is reported.
pub fn complement_property(a: &SenseMatrix) -> Result<Certificate> {
    let m = a.m();
    check_enumeration_cap(m)?;
    let d = a.d();
    let half = 1usize << (m - 1);
    let scale = a.sigma_max();
    let spans = |rows: &[usize]| rows.len() >= d && linalg::subset_rank(a.entries(), rows, scale) == d;
    let violating = (0..half).into_par_iter().find_first(|&mask| {
        let (inside, outside) = mask_rows(mask, m);
        !spans(&inside) && !spans(&outside)
    });
    let verdict = if violating.is_some() {
        Verdict::Fails
    } else {
        Verdict::Holds
    };
    Ok(Certificate {
        kind: CertificateKind::ComplementProperty,
        verdict,
        evidence: Evidence::ComplementProperty(ComplementEvidence {
            violating_subset: violating.map(|mask| mask_rows(mask, m).0),
            subsets_checked: violating.map_or(half, |k| k + 1),
        }),
    })
}

/// `max(λ_min(A_Γᵀ A_Γ), λ_min(A_Γᶜᵀ A_Γᶜ))` for the split encoded by `mask`.
pub fn scp_split_value(a: &SenseMatrix, mask: usize) -> f64 {
    let m = a.m();
    let (inside, outside) = mask_rows(mask, m);
    let lam = |rows: &[usize]| {
        if rows.is_empty() {
            0.0
        } else {
            linalg::lambda_min(&linalg::row_gram(a.entries(), rows.iter().copied())).max(0.0)
        }
    };
    lam(&inside).max(lam(&outside))
}

/// Largest `σ` for which `A` has the σ-strong complement property:
/// `σ² = min_Γ max(λ_min(A_Γᵀ A_Γ), λ_min(A_Γᶜᵀ A_Γᶜ))`.
pub fn scp_sigma(a: &SenseMatrix) -> Result<Certificate> {
    let m = a.m();
    check_enumeration_cap(m)?;
    let half = 1usize << (m - 1);
    let (mask, sigma_squared) = (0..half)
        .into_par_iter()
        .map(|mask| (mask, scp_split_value(a, mask)))
        .reduce(
            || (usize::MAX, f64::INFINITY),
            |x, y| match x.1.total_cmp(&y.1) {
                std::cmp::Ordering::Less => x,
                std::cmp::Ordering::Greater => y,
                std::cmp::Ordering::Equal => {
                    if x.0 <= y.0 {
                        x
                    } else {
                        y
                    }
                }
            },
        );
    let sigma = sigma_squared.sqrt();
    Ok(Certificate {
        kind: CertificateKind::Scp,
        verdict: if sigma > 0.0 { Verdict::Holds } else { Verdict::Fails },
        evidence: Evidence::Scp(ScpEvidence {
            sigma,
            sigma_squared,
            gamma: mask_rows(mask, m).0,
        }),
    })
}

/// SCP constant that a Gaussian `m × d` matrix has with probability at least
/// `1 − exp(−ε m)`, for `m > 2d`:
/// `σ = (m − 2d + 2) / (√2 e^{1 + ε/(R−2)} 2^{R/(R−2)} √m)` with `R = m/d`.
pub fn gaussian_scp_bound(m: usize, d: usize, eps: f64) -> Result<f64> {
    if d == 0 || m <= 2 * d {
        return Err(Error::InvalidArgument(format!(
            "the Gaussian SCP bound needs m > 2d (got m = {m}, d = {d})"
        )));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    let (mf, df) = (m as f64, d as f64);
    let r = mf / df;
    let lead = 1.0 / (2f64.sqrt() * (1.0 + eps / (r - 2.0)).exp());
    let tail = (mf - 2.0 * df + 2.0) / (2f64.powf(r / (r - 2.0)) * mf.sqrt());
    Ok(lead * tail)
}

fn require_whitened(aw: &SenseMatrix) -> Result<()> {
    let deviation = orthonormality_defect(aw);
    if deviation > WHITENING_TOL {
        return Err(Error::NotWhitened { deviation });
    }
    Ok(())
}

fn whitened_form(aw: &SenseMatrix, eps: &SignPattern, b: &DVector<f64>) -> f64 {
    (aw.entries().transpose() * eps.apply(b)).norm_squared()
}

/// `P_{ε′,ε}(b) = ‖ÃᵀD_{ε′}b‖² − ‖ÃᵀD_ε b‖²` for a matrix with orthonormal columns.
pub fn poly_screen_value(
    aw: &SenseMatrix,
    eps1: &SignPattern,
    eps2: &SignPattern,
    b: &Observation,
) -> Result<f64> {
    require_whitened(aw)?;
    b.check_against(aw)?;
    for p in [eps1, eps2] {
        if p.len() != aw.m() {
            return Err(Error::DimensionMismatch {
                what: "sign pattern",
                expected: aw.m(),
                got: p.len(),
            });
        }
    }
    Ok(whitened_form(aw, eps1, b.values()) - whitened_form(aw, eps2, b.values()))
}

/// Necessary-condition screen for non-uniqueness.
///
/// Two minimizers with sign patterns `ε′ ≠ ±ε` force `P_{ε′,ε}(b) = 0` on the
/// whitened matrix. `Holds` means every pair of distinct canonical patterns has
/// `|P| > tol·‖b‖²`; otherwise the verdict is `Inconclusive` and the near-zero
/// pairs are listed. A zero does not prove non-uniqueness.
pub fn poly_screen(a: &SenseMatrix, b: &Observation, tol: f64) -> Result<Certificate> {
    b.check_against(a)?;
    let m = a.m();
    check_enumeration_cap(m)?;
    let aw = whiten(a)?.whitened_matrix().expect("whitening present");
    let n = SignPattern::canonical_count(m);
    let forms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| whitened_form(&aw, &SignPattern::canonical_from_index(m, k), b.values()))
        .collect();

    let threshold = tol * b.values().norm_squared();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| forms[i].total_cmp(&forms[j]).then(i.cmp(&j)));

    let mut near_zero_count: u64 = 0;
    let mut listed: Vec<(usize, usize)> = Vec::new();
    let mut min_abs: Option<f64> = None;
    for (pos, &i) in order.iter().enumerate() {
        if let Some(&next) = order.get(pos + 1) {
            let gap = forms[next] - forms[i];
            min_abs = Some(min_abs.map_or(gap, |g: f64| g.min(gap)));
        }
        for &j in &order[pos + 1..] {
            if forms[j] - forms[i] > threshold {
                break;
            }
            near_zero_count += 1;
            if listed.len() < 4 * MAX_LISTED_PAIRS {
                listed.push((i.min(j), i.max(j)));
            }
        }
    }
    listed.sort_unstable();
    listed.truncate(MAX_LISTED_PAIRS);
    let near_zero_pairs = listed
        .into_iter()
        .map(|(i, j)| PatternPair {
            first: SignPattern::canonical_from_index(m, i),
            second: SignPattern::canonical_from_index(m, j),
            value: forms[i] - forms[j],
        })
        .collect();

    let nn = n as u64;
    Ok(Certificate {
        kind: CertificateKind::PolyScreen,
        verdict: if near_zero_count == 0 {
            Verdict::Holds
        } else {
            Verdict::Inconclusive
        },
        evidence: Evidence::PolyScreen(PolyScreenEvidence {
            threshold,
            min_abs_value: min_abs,
            pairs_checked: nn * (nn - 1) / 2,
            near_zero_count,
            near_zero_pairs,
        }),
    })
}

/// Sufficient condition for uniqueness when `b = |Ax₀| + η` lies near the surface:
/// with `β = min(σ(Ã), 1 − 1e−12)` the SCP constant of the whitened matrix and
/// `λ = min_i |Ax₀|_i`, uniqueness holds if `‖η‖ ≤ β²λ`.
pub fn near_surface_uniqueness(a: &SenseMatrix, x0: &DVector<f64>, eta: &DVector<f64>) -> Result<Certificate> {
    let b = Observation::synthesized(a, x0, eta)?;
    if let Some((i, v)) = b.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::Precondition(format!(
            "b = |Ax0| + eta must be nonnegative; entry {i} is {v}"
        )));
    }
    let aw = whiten(a)?.whitened_matrix().expect("whitening present");
    let whitened_sigma = scp_sigma(&aw)?.sigma().expect("scp evidence");
    let beta = whitened_sigma.min(BETA_CAP);
    let lambda = abs_measure(a, x0)?.min();
    let eta_norm = eta.norm();
    let margin = beta * beta * lambda - eta_norm;
    let verdict = if beta <= 0.0 {
        Verdict::Inconclusive
    } else if margin >= 0.0 {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    Ok(Certificate {
        kind: CertificateKind::NearSurface,
        verdict,
        evidence: Evidence::NearSurface(NearSurfaceEvidence {
            beta,
            lambda,
            eta_norm,
            margin,
            whitened_sigma,
        }),
    })
}

/// Ground truth by exhaustive solution: holds iff exactly one sign class attains
/// the optimum within the tie band. Requires the complement property.
pub fn certify_unique(a: &SenseMatrix, b: &Observation, tol: f64) -> Result<Certificate> {
    b.check_against(a)?;
    let cp = complement_property(a)?;
    if !cp.holds() {
        return Ok(Certificate {
            kind: CertificateKind::ExactUnique,
            verdict: Verdict::Inconclusive,
            evidence: Evidence::ExactUnique(ExactEvidence {
                optimal_value: None,
                classes: Vec::new(),
                diagnosis: Some(
                    "matrix lacks the complement property; uniqueness of the solution is not \
                     equivalent to a unique best approximation"
                        .into(),
                ),
            }),
        });
    }
    let set = solver::solve_global(a, b, tol)?;
    Ok(Certificate {
        kind: CertificateKind::ExactUnique,
        verdict: if set.is_unique() {
            Verdict::Holds
        } else {
            Verdict::Fails
        },
        evidence: Evidence::ExactUnique(ExactEvidence {
            optimal_value: Some(set.optimal_value),
            classes: set.classes,
            diagnosis: None,
        }),
    })
}
