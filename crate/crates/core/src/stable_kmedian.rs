//! Centralized private k-median: partition by the subroutine's centers, then
//! solve a private 1-median per part with projected noisy subgradient
//! descent, and select between the refined candidate and the subroutine's
//! output by noisy cost.

use crate::error::{Error, Result};
use crate::geometry::{
    clamp_to_ball, cost, partition_by_nearest, CenterSet, CostObjective, Dataset,
};
use crate::mech::{
    gaussian_sample, noisy_cost_pair, BudgetLedger, MechanismKind, PrivacyParams, RngSeed,
};
use crate::stable_kmeans::{
    CenterDiag, ClusteringOutcome, DpClusteringSubroutine, SelectedCandidate,
};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Settings for the private convex solver behind the 1-median step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DpConvexConfig {
    /// subgradient steps; defaults to min(n², 10⁶)
    pub steps: Option<usize>,
    /// per-point Lipschitz clip; 1 for the ‖w − x‖ loss
    pub clip: f64,
    /// iterates live in B(0, Λ)
    pub domain_radius: f64,
    pub pp: PrivacyParams,
    pub beta: f64,
}

pub const DP_MEDIAN_MAX_STEPS: usize = 1_000_000;
const MINIBATCH: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpMedianResult {
    pub value: Vec<f64>,
    pub empty: bool,
    pub steps_run: usize,
    pub per_step_epsilon: f64,
    pub per_step_sigma: f64,
}

/// Per-step ε such that `steps` adaptive (ε₀, δ/(2·steps)) mechanisms
/// compose, by advanced composition with δ' = δ/2, to exactly (ε, δ).
fn per_step_epsilon(total: PrivacyParams, steps: usize) -> Result<f64> {
    if total.is_noiseless() {
        return Ok(f64::INFINITY);
    }
    if !(total.delta > 0.0) {
        return Err(Error::InvalidParam(
            "private subgradient descent needs delta > 0".into(),
        ));
    }
    let delta_prime = total.delta / 2.0;
    let target = total.epsilon;
    let eval = |x: f64| {
        (2.0 * steps as f64 * (1.0 / delta_prime).ln()).sqrt() * x
            + steps as f64 * x * (x.exp() - 1.0)
    };
    // stay inside the theorem's per-step range ε₀ <= 1
    if eval(1.0) <= target {
        return Ok(1.0);
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Projected noisy subgradient descent for the 1-median objective
/// Σᵢ ‖w − xᵢ‖ over B(0, Λ): minibatch subgradients clipped per point,
/// per-step Gaussian noise calibrated so advanced composition across all
/// steps totals (ε, δ), step size Λ/(L√t), output the projected average of
/// the trailing half of the trajectory.
pub fn dp_one_median(
    points: &[f64],
    dim: usize,
    cfg: &DpConvexConfig,
    rng: &mut ChaCha12Rng,
) -> Result<DpMedianResult> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: points.len() % dim,
        });
    }
    let n = points.len() / dim;
    if n == 0 {
        return Ok(DpMedianResult {
            value: vec![0.0; dim],
            empty: true,
            steps_run: 0,
            per_step_epsilon: 0.0,
            per_step_sigma: 0.0,
        });
    }
    let lambda = cfg.domain_radius;
    let clip = cfg.clip;
    let steps = cfg
        .steps
        .unwrap_or_else(|| n.saturating_mul(n).min(DP_MEDIAN_MAX_STEPS))
        .clamp(1, DP_MEDIAN_MAX_STEPS);
    let batch = n.min(MINIBATCH);

    let eps0 = per_step_epsilon(cfg.pp, steps)?;
    let sigma = if cfg.pp.is_noiseless() {
        0.0
    } else {
        // replace-one moves one clipped subgradient in the batch average by
        // at most 2L/b
        let delta0 = cfg.pp.delta / (2.0 * steps as f64);
        2.0 * clip / (batch as f64 * eps0) * (2.0 * (1.25 / delta0).ln()).sqrt()
    };

    let mut w = vec![0.0f64; dim];
    let suffix_start = steps / 2; // average iterates with t > suffix_start
    let mut acc = vec![0.0f64; dim];
    let mut acc_n = 0usize;
    let mut g = vec![0.0f64; dim];
    let full_batch = batch == n;
    for t in 1..=steps {
        g.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..batch {
            let i = if full_batch {
                b
            } else {
                rng.random_range(0..n)
            };
            let x = &points[i * dim..(i + 1) * dim];
            let mut nd_sq = 0.0;
            for (wj, xj) in w.iter().zip(x) {
                nd_sq += (wj - xj) * (wj - xj);
            }
            let nd = nd_sq.sqrt();
            if nd > 1e-300 {
                // unit subgradient, clipped to L
                let scale = (clip / nd).min(1.0 / nd);
                for ((gj, wj), xj) in g.iter_mut().zip(&w).zip(x) {
                    *gj += (wj - xj) * scale;
                }
            }
        }
        let inv_b = 1.0 / batch as f64;
        for gj in g.iter_mut() {
            *gj *= inv_b;
        }
        if sigma > 0.0 {
            for gj in g.iter_mut() {
                *gj += gaussian_sample(rng, sigma);
            }
        }
        let eta = lambda / (clip * (t as f64).sqrt());
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= eta * gj;
        }
        clamp_to_ball(&mut w, lambda);
        if t > suffix_start {
            for (a, wj) in acc.iter_mut().zip(&w) {
                *a += wj;
            }
            acc_n += 1;
        }
    }
    let mut value: Vec<f64> = acc.iter().map(|a| a / acc_n as f64).collect();
    clamp_to_ball(&mut value, lambda);
    Ok(DpMedianResult {
        value,
        empty: false,
        steps_run: steps,
        per_step_epsilon: eps0,
        per_step_sigma: sigma,
    })
}

/// Per-invocation budget and solver settings for the k-median pipeline.
/// Declared total: (k + 2)(ε, δ) — one subroutine call, k private medians,
/// one selection query.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PrivateKMedianConfig {
    pub pp_per_step: PrivacyParams,
    pub beta: f64,
    pub sgd_steps: Option<usize>,
    pub record_exact_costs: bool,
}

impl PrivateKMedianConfig {
    pub fn new(pp: PrivacyParams, beta: f64) -> Self {
        PrivateKMedianConfig {
            pp_per_step: pp,
            beta,
            sgd_steps: None,
            record_exact_costs: true,
        }
    }

    pub fn declared_budget(&self, k: usize) -> PrivacyParams {
        self.pp_per_step.scaled((k + 2) as f64)
    }
}

/// The k-median pipeline: subroutine centers B, full nearest-center
/// partition (no carving), a private 1-median per part at (ε, δ) with
/// confidence β/k, then noisy-cost selection at (ε, δ).
pub fn private_stable_kmedian(
    data: &Dataset,
    k: usize,
    cfg: &PrivateKMedianConfig,
    subroutine: &dyn DpClusteringSubroutine,
    seed: &RngSeed,
) -> Result<ClusteringOutcome> {
    if data.n() == 0 {
        return Err(Error::InvalidParam("empty dataset".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    let pp = cfg.pp_per_step;
    let mut ledger = BudgetLedger::new();

    let mut sub_ledger = BudgetLedger::new();
    let mut rng_b = seed.child("subroutine").rng();
    let b = subroutine
        .run(data, k, pp, &mut rng_b, &mut sub_ledger)
        .map_err(|e| Error::Subroutine(format!("{}: {e}", subroutine.name())))?;
    let b = b.clamped_to_ball(data.radius());
    ledger.absorb(subroutine.name(), &sub_ledger);

    let part = partition_by_nearest(data, &b)?;
    let d_hats = if b.len() == 1 {
        vec![f64::INFINITY]
    } else {
        crate::stability::per_center_min_distances(&b)
    };

    let mut chat_flat = Vec::with_capacity(b.len() * data.dim());
    let mut diags = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let members = part.members(i);
        let flat: Vec<f64> = members
            .iter()
            .flat_map(|&idx| data.point(idx).iter().copied())
            .collect();
        let solver_cfg = DpConvexConfig {
            steps: cfg.sgd_steps,
            clip: 1.0,
            domain_radius: data.radius(),
            pp,
            beta: cfg.beta / k as f64,
        };
        let mut rng_i = seed.child(&format!("one-median-{i}")).rng();
        let med = dp_one_median(&flat, data.dim(), &solver_cfg, &mut rng_i)?;
        if med.empty {
            chat_flat.extend_from_slice(b.center(i));
        } else {
            chat_flat.extend_from_slice(&med.value);
        }
        ledger.record(&format!("dp-one-median-{i}"), pp, MechanismKind::Composite);
        diags.push(CenterDiag {
            d_hat: d_hats[i],
            carved_size: members.len(),
            small_cluster: med.empty,
            noise_norm: med.per_step_sigma,
        });
    }
    let chat = CenterSet::from_flat(chat_flat, data.dim(), k, "dp-one-medians")?;

    let mut rng_sel = seed.child("selection").rng();
    let (cost_chat, cost_b) =
        noisy_cost_pair(data, &chat, &b, CostObjective::KMedian, pp, &mut rng_sel)?;
    ledger.record("select-cost", pp, MechanismKind::Gaussian);

    let selected = if cost_chat <= cost_b {
        SelectedCandidate::Averaged
    } else {
        SelectedCandidate::Subroutine
    };
    let chosen = match selected {
        SelectedCandidate::Averaged => chat.clone(),
        SelectedCandidate::Subroutine => b.clone(),
    };
    let exact_costs = if cfg.record_exact_costs {
        Some((
            cost(data, &chat, CostObjective::KMedian)?,
            cost(data, &b, CostObjective::KMedian)?,
        ))
    } else {
        None
    };

    ledger.close();
    Ok(ClusteringOutcome {
        objective: CostObjective::KMedian,
        chosen: chosen.clone(),
        final_centers: chosen,
        selected,
        candidate_b: b,
        candidate_chat: chat,
        noisy_costs: (cost_chat, cost_b),
        exact_costs,
        diagnostics: diags,
        notes: vec![format!(
            "declared budget (k+2)(eps, delta) with k = {k}"
        )],
        ledger,
        declared_budget: cfg.declared_budget(k),
    })
}

/// Cost of routing every point through B first: Σ ‖x − C*(B(x))‖, where
/// C*(B(x)) is the nearest member of `targets` to the nearest member of
/// `via` to x. Never smaller than cost_X(targets).
pub fn cost_routed_through(
    data: &Dataset,
    via: &CenterSet,
    targets: &CenterSet,
    obj: CostObjective,
) -> Result<f64> {
    let mut total = 0.0;
    for p in data.iter_points() {
        let (bi, _) = crate::geometry::nearest_center(p, via);
        let (ti, _) = crate::geometry::nearest_center(via.center(bi), targets);
        let mut sq = 0.0;
        for (a, b) in p.iter().zip(targets.center(ti)) {
            sq += (a - b) * (a - b);
        }
        total += obj.from_sq_dist(sq);
    }
    Ok(total)
}
