//! Input "niceness" quantifiers: the separability ratio OPT_k/OPT_{k-1}, the
//! center-deletion and center-separation stability parameters, and the
//! approximation-center matching predicate used to verify that near-optimal
//! center sets sit close to the true optima.

use crate::error::{Error, Result};
use crate::geometry::{
    brute_force_opt, cost, kmeanspp_lloyd, partition_by_nearest, sq_dist, CenterSet,
    CostObjective, Dataset,
};
use serde::{Deserialize, Serialize};

/// How optimal clusterings are obtained for the stability quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptMode {
    /// Exact enumeration; refuses n > 14.
    Exact,
    /// Best-of-restarts seeded Lloyd; an estimate, labeled as such.
    Heuristic { restarts: usize, seed: u64 },
    /// Exact when n <= 14, otherwise heuristic with the given settings.
    Auto { restarts: usize, seed: u64 },
}

impl OptMode {
    pub fn auto() -> Self {
        OptMode::Auto {
            restarts: 50,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    ExactOracle,
    Heuristic,
}

/// Optimal (or estimated-optimal) centers and cost for level k.
pub fn opt_centers(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    mode: OptMode,
) -> Result<(CenterSet, f64, OptMethod)> {
    let resolved = match mode {
        OptMode::Auto { restarts, seed } => {
            if data.n() <= crate::geometry::BRUTE_FORCE_MAX_N {
                OptMode::Exact
            } else {
                OptMode::Heuristic { restarts, seed }
            }
        }
        m => m,
    };
    match resolved {
        OptMode::Exact => {
            let (c, v) = brute_force_opt(data, k, obj)?;
            Ok((c, v, OptMethod::ExactOracle))
        }
        OptMode::Heuristic { restarts, seed } => {
            let c = kmeanspp_lloyd(data, k, obj, restarts, seed)?;
            let v = cost(data, &c, obj)?;
            Ok((c, v, OptMethod::Heuristic))
        }
        OptMode::Auto { .. } => unreachable!(),
    }
}

/// Separability estimate plus the per-notion stability parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    /// OPT_k / OPT_{k-1} (this is φ^p, not φ).
    pub phi_p: f64,
    /// min over (i, j != i) of the delete-center-i-onto-j cost over OPT_k.
    pub beta_deletion: f64,
    /// min over i of n_i D_i^p / OPT_k.
    pub gamma_separation: f64,
    /// D_i = min_{j != i} ||c_i - c_j|| per optimal center.
    pub per_center_d: Vec<f64>,
    pub method: OptMethod,
    pub degenerate: bool,
    pub opt_k: f64,
    pub opt_k_minus_1: f64,
}

impl StabilityReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// OPT_k / OPT_{k-1}. Errors when OPT_{k-1} = 0 (all points identical).
pub fn separability_ratio(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    mode: OptMode,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParam("separability needs k >= 2".into()));
    }
    let (_, opt_k, _) = opt_centers(data, k, obj, mode)?;
    let (_, opt_km1, _) = opt_centers(data, k - 1, obj, mode)?;
    if opt_km1 <= 0.0 {
        return Err(Error::Degenerate(
            "OPT_{k-1} = 0: all points identical".into(),
        ));
    }
    Ok(opt_k / opt_km1)
}

/// β: the cheapest way to delete one optimal center and reassign its cluster
/// to a surviving center, relative to OPT_k. Degenerate OPT_k = 0 yields the
/// +inf sentinel.
pub fn center_deletion_stability(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    mode: OptMode,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParam("center deletion needs k >= 2".into()));
    }
    let (centers, opt_k, _) = opt_centers(data, k, obj, mode)?;
    if opt_k <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let part = partition_by_nearest(data, &centers)?;
    let kk = centers.len();
    // within-cluster cost per cluster at its own center
    let mut within = vec![0.0; kk];
    for (idx, &ci) in part.cluster_of.iter().enumerate() {
        within[ci] += obj.from_sq_dist(sq_dist(data.point(idx), centers.center(ci)));
    }
    let total: f64 = within.iter().sum();
    let mut best = f64::INFINITY;
    for i in 0..kk {
        let members = part.members(i);
        if members.is_empty() {
            continue;
        }
        for j in 0..kk {
            if j == i {
                continue;
            }
            let moved: f64 = members
                .iter()
                .map(|&idx| obj.from_sq_dist(sq_dist(data.point(idx), centers.center(j))))
                .sum();
            let deleted_cost = total - within[i] + moved;
            if deleted_cost < best {
                best = deleted_cost;
            }
        }
    }
    Ok(best / opt_k)
}

/// γ: min_i n_i D_i^p / OPT_k for the (oracle or heuristic) optimal
/// clustering. Degenerate OPT_k = 0 yields the +inf sentinel.
pub fn center_separation_stability(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    mode: OptMode,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParam("center separation needs k >= 2".into()));
    }
    let (centers, opt_k, _) = opt_centers(data, k, obj, mode)?;
    if opt_k <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let part = partition_by_nearest(data, &centers)?;
    let d = per_center_min_distances(&centers);
    let mut best = f64::INFINITY;
    for i in 0..centers.len() {
        if part.cluster_sizes[i] == 0 {
            continue;
        }
        let v = part.cluster_sizes[i] as f64 * d[i].powi(obj.p() as i32) / opt_k;
        if v < best {
            best = v;
        }
    }
    Ok(best)
}

/// D_i = min_{j != i} ||c_i - c_j|| for every center.
pub fn per_center_min_distances(centers: &CenterSet) -> Vec<f64> {
    let k = centers.len();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| sq_dist(centers.center(i), centers.center(j)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Full stability report from one pass of the optimizer at levels k and k-1.
pub fn stability_report(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    mode: OptMode,
) -> Result<StabilityReport> {
    if k < 2 {
        return Err(Error::InvalidParam("stability report needs k >= 2".into()));
    }
    let (centers, opt_k, method) = opt_centers(data, k, obj, mode)?;
    let (_, opt_km1, _) = opt_centers(data, k - 1, obj, mode)?;
    let per_center_d = per_center_min_distances(&centers);
    let degenerate = opt_k <= 0.0 || opt_km1 <= 0.0;
    let phi_p = if opt_km1 > 0.0 {
        opt_k / opt_km1
    } else {
        f64::NAN
    };
    let (beta, gamma) = if opt_k > 0.0 {
        (
            center_deletion_stability(data, k, obj, mode)?,
            center_separation_stability(data, k, obj, mode)?,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(StabilityReport {
        phi_p,
        beta_deletion: beta,
        gamma_separation: gamma,
        per_center_d,
        method,
        degenerate,
        opt_k,
        opt_k_minus_1: opt_km1,
    })
}

/// Witness of a failed matching: the optimal center that could not be paired.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationWitness {
    pub optimal_index: usize,
    pub nearest_candidate: usize,
    pub distance_p: f64,
    pub required_p: f64,
}

/// Outcome of the approximation-center matching predicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchResult {
    /// optimal index -> candidate index under the η·D_i^p rule, if a perfect
    /// matching exists.
    pub matched: Option<Vec<usize>>,
    pub violation: Option<ViolationWitness>,
    /// matching under the closeness-theorem radius (distance units).
    pub theorem_matched: Option<Vec<usize>>,
    pub theorem_radii: Vec<f64>,
    pub eta: f64,
    /// cost(candidate) / OPT_{k-1}
    pub alpha: f64,
    pub phi_p: f64,
    pub cost_ratio_vs_opt_k: f64,
    pub precondition_ok: bool,
    pub per_center_d: Vec<f64>,
}

/// Tries to match candidate centers one-to-one to optimal centers with
/// ||c_i - ĉ_{φ(i)}||^p < η D_i^p (η defaults to 1/4 in callers, any constant
/// < 1/2 is admissible), and independently under the closeness-theorem radius
/// 2 sqrt((α+φ²)/(1-φ²)) D_i for k-means or 2 (α+φ)/(1-φ) D_i for k-median.
#[allow(clippy::too_many_arguments)]
pub fn check_approx_center_stability(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    candidate: &CenterSet,
    delta_factor: f64,
    eta: f64,
    mode: OptMode,
) -> Result<MatchResult> {
    if k < 2 {
        return Err(Error::InvalidParam("matching needs k >= 2".into()));
    }
    let (optimal, opt_k, _) = opt_centers(data, k, obj, mode)?;
    let (_, opt_km1, _) = opt_centers(data, k - 1, obj, mode)?;
    if opt_k <= 0.0 || opt_km1 <= 0.0 {
        return Err(Error::Degenerate("zero optimal cost".into()));
    }
    let cand_cost = cost(data, candidate, obj)?;
    let cost_ratio = cand_cost / opt_k;
    let alpha = cand_cost / opt_km1;
    let phi_p = opt_k / opt_km1;
    let p = obj.p() as i32;
    let d = per_center_min_distances(&optimal);

    // quarter rule: opt i may take candidate j iff dist^p < eta * D_i^p
    let kk = optimal.len();
    let kc = candidate.len();
    let quarter_ok = |i: usize, j: usize| {
        sq_dist(optimal.center(i), candidate.center(j))
            .sqrt()
            .powi(p)
            < eta * d[i].powi(p)
    };
    let (matched, violation) = match bipartite_match(kk, kc, &quarter_ok) {
        Ok(m) => (Some(m), None),
        Err(unmatched_i) => {
            let (nearest, dist_p) = (0..kc)
                .map(|j| {
                    (
                        j,
                        sq_dist(optimal.center(unmatched_i), candidate.center(j))
                            .sqrt()
                            .powi(p),
                    )
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            (
                None,
                Some(ViolationWitness {
                    optimal_index: unmatched_i,
                    nearest_candidate: nearest,
                    distance_p: dist_p,
                    required_p: eta * d[unmatched_i].powi(p),
                }),
            )
        }
    };

    // closeness-theorem radius, in distance units
    let phi_base = match obj {
        CostObjective::KMeans => phi_p,
        CostObjective::KMedian => phi_p,
    };
    let theorem_radii: Vec<f64> = d
        .iter()
        .map(|&di| match obj {
            CostObjective::KMeans => 2.0 * ((alpha + phi_base) / (1.0 - phi_base)).sqrt() * di,
            CostObjective::KMedian => 2.0 * (alpha + phi_base) / (1.0 - phi_base) * di,
        })
        .collect();
    let theorem_ok = |i: usize, j: usize| {
        sq_dist(optimal.center(i), candidate.center(j)).sqrt() <= theorem_radii[i]
    };
    let theorem_matched = bipartite_match(kk, kc, &theorem_ok).ok();

    Ok(MatchResult {
        matched,
        violation,
        theorem_matched,
        theorem_radii,
        eta,
        alpha,
        phi_p,
        cost_ratio_vs_opt_k: cost_ratio,
        precondition_ok: cost_ratio <= delta_factor,
        per_center_d: d,
    })
}

/// Simple augmenting-path bipartite matching; returns left -> right or the
/// first left vertex that cannot be matched.
fn bipartite_match(
    left: usize,
    right: usize,
    allowed: &impl Fn(usize, usize) -> bool,
) -> std::result::Result<Vec<usize>, usize> {
    let mut match_right: Vec<Option<usize>> = vec![None; right];
    for i in 0..left {
        let mut visited = vec![false; right];
        if !augment(i, left, right, allowed, &mut visited, &mut match_right) {
            return Err(i);
        }
    }
    let mut out = vec![usize::MAX; left];
    for (j, m) in match_right.iter().enumerate() {
        if let Some(i) = m {
            out[*i] = j;
        }
    }
    Ok(out)
}

fn augment(
    i: usize,
    left: usize,
    right: usize,
    allowed: &impl Fn(usize, usize) -> bool,
    visited: &mut [bool],
    match_right: &mut [Option<usize>],
) -> bool {
    for j in 0..right {
        if visited[j] || !allowed(i, j) {
            continue;
        }
        visited[j] = true;
        if match_right[j].is_none()
            || augment(match_right[j].unwrap(), left, right, allowed, visited, match_right)
        {
            match_right[j] = Some(i);
            return true;
        }
    }
    false
}
