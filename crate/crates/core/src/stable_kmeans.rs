//! Centralized private clustering for stable k-means inputs: run a pluggable
//! DP k-means subroutine to get rough centers B, carve out the points with a
//! clear preference for one center (the D̂_i/3 balls), privately average each
//! carved set, and keep whichever of the two candidate center sets has the
//! lower noisy cost. An optional trailing noisy Lloyd step turns the output
//! into full-cluster averages.

use crate::error::{Error, Result};
use crate::geometry::{
    clamp_to_ball, cost, partition_by_nearest, sq_dist, CenterSet, CostObjective, Dataset,
};
use crate::mech::{
    laplace_sample, noisy_average, noisy_cost_pair, BudgetLedger, MechanismKind, PrivacyParams,
    RngSeed,
};
use crate::stable_kmedian::{dp_one_median, DpConvexConfig};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Any (ε, δ)-DP routine producing at most k centers inside the ball. The
/// implementation receives its own rng stream and must record its spend.
pub trait DpClusteringSubroutine {
    fn run(
        &self,
        data: &Dataset,
        k: usize,
        pp: PrivacyParams,
        rng: &mut ChaCha12Rng,
        ledger: &mut BudgetLedger,
    ) -> Result<CenterSet>;

    fn name(&self) -> &'static str {
        "subroutine"
    }
}

/// Test helper: a "subroutine" that returns fixed centers and records the
/// budget it was granted.
pub struct FixedCenters(pub CenterSet);

impl DpClusteringSubroutine for FixedCenters {
    fn run(
        &self,
        _data: &Dataset,
        _k: usize,
        pp: PrivacyParams,
        _rng: &mut ChaCha12Rng,
        ledger: &mut BudgetLedger,
    ) -> Result<CenterSet> {
        ledger.record("fixed-centers", pp, MechanismKind::Subroutine);
        Ok(self.0.clone())
    }

    fn name(&self) -> &'static str {
        "fixed-centers"
    }
}

/// The default grid-seeded DP baseline. It claims no worst-case
/// approximation factor; its empirical cost on separable instances is what
/// the guarantee-shape checks consume as (v, t).
pub struct GridBaseline {
    pub objective: CostObjective,
    pub refine_steps: usize,
    /// subgradient steps per private 1-median call when refining with p = 1
    pub median_sgd_steps: usize,
}

impl GridBaseline {
    pub fn kmeans() -> Self {
        GridBaseline {
            objective: CostObjective::KMeans,
            refine_steps: 5,
            median_sgd_steps: 20_000,
        }
    }

    pub fn kmedian() -> Self {
        GridBaseline {
            objective: CostObjective::KMedian,
            refine_steps: 5,
            median_sgd_steps: 20_000,
        }
    }
}

impl DpClusteringSubroutine for GridBaseline {
    fn run(
        &self,
        data: &Dataset,
        k: usize,
        pp: PrivacyParams,
        rng: &mut ChaCha12Rng,
        ledger: &mut BudgetLedger,
    ) -> Result<CenterSet> {
        default_private_baseline(
            data,
            k,
            self.objective,
            pp,
            self.refine_steps,
            self.median_sgd_steps,
            rng,
            ledger,
        )
    }

    fn name(&self) -> &'static str {
        "grid-baseline"
    }
}

const MAX_OCCUPIED_CELLS: usize = 1 << 20;

/// Simple (ε, δ)-DP clustering baseline: noisy counts over a randomly
/// shifted grid (heavy cells released through a stability threshold, ε/2 of
/// the budget), k-means++ seeding over the heaviest cells weighted by noisy
/// count, then `refine_steps` noisy refinement steps sharing the other ε/2.
#[allow(clippy::too_many_arguments)]
pub fn default_private_baseline(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    pp: PrivacyParams,
    refine_steps: usize,
    median_sgd_steps: usize,
    rng: &mut ChaCha12Rng,
    ledger: &mut BudgetLedger,
) -> Result<CenterSet> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    let n = data.n();
    let d = data.dim();
    let radius = data.radius();
    let grid_pp = pp.scaled(0.5);

    // grid resolution Λ / ceil(n^{1/max(d,2)}) per axis
    let cells_per_axis = (n.max(1) as f64)
        .powf(1.0 / d.max(2) as f64)
        .ceil()
        .max(1.0);
    let cell_w = radius / cells_per_axis;
    let shift: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..cell_w)).collect();

    // occupied cells only
    let mut counts: HashMap<Vec<i64>, (usize, Vec<f64>)> = HashMap::new();
    for p in data.iter_points() {
        let key: Vec<i64> = p
            .iter()
            .zip(&shift)
            .map(|(x, s)| ((x + radius + s) / cell_w).floor() as i64)
            .collect();
        let entry = counts.entry(key).or_insert_with(|| (0, vec![0.0; d]));
        entry.0 += 1;
    }
    // deterministic order before drawing noise
    let mut cells: Vec<(Vec<i64>, usize)> =
        counts.into_iter().map(|(key, (c, _))| (key, c)).collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0));
    if cells.len() > MAX_OCCUPIED_CELLS {
        cells.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        cells.truncate(MAX_OCCUPIED_CELLS);
        cells.sort_by(|a, b| a.0.cmp(&b.0));
    }

    // replace-one changes two cell counts, so the histogram is released at
    // Laplace scale 2/(ε/2); only cells above the stability threshold leak.
    let lap_scale = if grid_pp.is_noiseless() {
        0.0
    } else {
        2.0 / grid_pp.epsilon
    };
    let tau = if grid_pp.is_noiseless() {
        1.0
    } else {
        if !(grid_pp.delta > 0.0) {
            return Err(Error::InvalidParam(
                "grid baseline needs delta > 0 (stability threshold)".into(),
            ));
        }
        1.0 + lap_scale * (2.0 / grid_pp.delta).ln()
    };
    let mut heavy: Vec<(f64, Vec<f64>)> = Vec::new();
    for (key, c) in &cells {
        let noisy = *c as f64 + laplace_sample(rng, lap_scale);
        if noisy >= tau {
            let center: Vec<f64> = key
                .iter()
                .zip(&shift)
                .map(|(idx, s)| (*idx as f64 + 0.5) * cell_w - radius - s)
                .collect();
            heavy.push((noisy, center));
        }
    }
    ledger.record("baseline-grid", grid_pp, MechanismKind::Laplace);

    let target = (k as f64 * (n.max(2) as f64).ln().ceil()) as usize;
    heavy.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    heavy.truncate(target.max(k));

    let mut centers = if heavy.is_empty() {
        // degenerate: nothing survived the threshold; seed from the rng alone
        let mut cs: Vec<Vec<f64>> = Vec::with_capacity(k);
        for _ in 0..k {
            let mut v: Vec<f64> = (0..d)
                .map(|_| rng.random_range(-radius..radius))
                .collect();
            clamp_to_ball(&mut v, radius);
            cs.push(v);
        }
        CenterSet::new(cs, d, k, "baseline-degenerate")?
    } else {
        let pts: Vec<Vec<f64>> = heavy.iter().map(|(_, c)| c.clone()).collect();
        let wts: Vec<f64> = heavy.iter().map(|(w, _)| w.max(0.0)).collect();
        let mut cs = crate::geometry::weighted_kmeanspp_lloyd(&pts, &wts, d, k, rng)?;
        if cs.len() < k {
            // duplicate the heaviest cell up to k centers
            let mut flat = cs.flat().to_vec();
            while flat.len() < k * d {
                flat.extend_from_slice(&pts[0]);
            }
            cs = CenterSet::from_flat(flat, d, k, "baseline-seed")?;
        }
        cs
    };

    // refinement: refine_steps noisy Lloyd steps sharing ε/2 by simple
    // composition
    if refine_steps > 0 {
        let step_pp = pp.scaled(0.5 / refine_steps as f64);
        for step in 0..refine_steps {
            centers = noisy_recenter(
                data,
                &centers,
                obj,
                step_pp,
                0.05,
                median_sgd_steps,
                rng,
            )?;
            ledger.record(
                &format!("baseline-refine-{step}"),
                step_pp,
                MechanismKind::Composite,
            );
        }
    }

    let mut centers = centers.clamped_to_ball(radius);
    centers.set_provenance("grid-baseline");
    Ok(centers)
}

/// One noisy Lloyd step at privacy `pp`: partition by nearest center, then a
/// private recentering of every cluster (noisy average for k-means, private
/// 1-median for k-median). Clusters that come back flagged small keep their
/// previous center. The clusters are disjoint, so the whole step is one
/// (ε, δ) release.
fn noisy_recenter(
    data: &Dataset,
    centers: &CenterSet,
    obj: CostObjective,
    pp: PrivacyParams,
    beta: f64,
    median_sgd_steps: usize,
    rng: &mut ChaCha12Rng,
) -> Result<CenterSet> {
    let part = partition_by_nearest(data, centers)?;
    let mut out = centers.clone();
    let k = centers.len();
    for j in 0..k {
        let members = part.members(j);
        let flat: Vec<f64> = members
            .iter()
            .flat_map(|&i| data.point(i).iter().copied())
            .collect();
        match obj {
            CostObjective::KMeans => {
                let avg = noisy_average(
                    &flat,
                    data.dim(),
                    data.radius(),
                    pp,
                    beta,
                    k,
                    rng,
                    None,
                )?;
                if !avg.small_cluster {
                    out.center_mut(j).copy_from_slice(&avg.value);
                }
            }
            CostObjective::KMedian => {
                if members.is_empty() {
                    continue;
                }
                let cfg = DpConvexConfig {
                    steps: Some(median_sgd_steps),
                    clip: 1.0,
                    domain_radius: data.radius(),
                    pp,
                    beta,
                };
                let med = dp_one_median(&flat, data.dim(), &cfg, rng)?;
                if !med.empty {
                    out.center_mut(j).copy_from_slice(&med.value);
                }
            }
        }
    }
    out.set_provenance("noisy-lloyd-step");
    Ok(out)
}

/// Public noisy Lloyd step over full clusters (k-means averaging), recording
/// a single (ε, δ) entry.
pub fn noisy_lloyd_step(
    data: &Dataset,
    centers: &CenterSet,
    pp: PrivacyParams,
    beta: f64,
    rng: &mut ChaCha12Rng,
    ledger: Option<&mut BudgetLedger>,
) -> Result<CenterSet> {
    let out = noisy_recenter(data, centers, CostObjective::KMeans, pp, beta, 0, rng)?;
    if let Some(l) = ledger {
        l.record("noisy-lloyd-step", pp, MechanismKind::Composite);
    }
    Ok(out)
}

/// Per-invocation privacy budget and failure probability for the pipeline.
/// The pipeline applies four (ε, δ) mechanisms, so the declared total is
/// 4 (ε, δ) by simple composition (5 with the trailing Lloyd step).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PrivateKMeansConfig {
    pub pp_per_step: PrivacyParams,
    pub beta: f64,
    pub do_final_noisy_lloyd: bool,
    /// compute exact candidate costs into the outcome (verification only)
    pub record_exact_costs: bool,
}

impl PrivateKMeansConfig {
    pub fn new(pp: PrivacyParams, beta: f64) -> Self {
        PrivateKMeansConfig {
            pp_per_step: pp,
            beta,
            do_final_noisy_lloyd: false,
            record_exact_costs: true,
        }
    }

    pub fn declared_budget(&self) -> PrivacyParams {
        let steps = if self.do_final_noisy_lloyd { 5.0 } else { 4.0 };
        self.pp_per_step.scaled(steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectedCandidate {
    Averaged,
    Subroutine,
}

/// Per-center diagnostics of the carve-and-average phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterDiag {
    pub d_hat: f64,
    pub carved_size: usize,
    pub small_cluster: bool,
    pub noise_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteringOutcome {
    pub objective: CostObjective,
    pub chosen: CenterSet,
    /// output after the optional trailing noisy Lloyd step (equals `chosen`
    /// when the step is disabled)
    pub final_centers: CenterSet,
    pub selected: SelectedCandidate,
    pub candidate_b: CenterSet,
    pub candidate_chat: CenterSet,
    /// (noisy cost of the averaged candidate, noisy cost of B)
    pub noisy_costs: (f64, f64),
    pub exact_costs: Option<(f64, f64)>,
    pub diagnostics: Vec<CenterDiag>,
    pub notes: Vec<String>,
    pub ledger: BudgetLedger,
    pub declared_budget: PrivacyParams,
}

impl ClusteringOutcome {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "objective": self.objective,
            "chosen": self.chosen,
            "final_centers": self.final_centers,
            "selected": self.selected,
            "candidates": {
                "b": self.candidate_b,
                "chat": self.candidate_chat,
            },
            "noisy_costs": self.noisy_costs,
            "exact_costs": self.exact_costs,
            "diagnostics": self.diagnostics,
            "notes": self.notes,
            "ledger": self.ledger.to_json(),
            "declared_budget": self.declared_budget,
        })
    }
}

/// Membership of the carve sets X̂_i = {x : ‖x − b_i‖ <= D̂_i/3}. The balls
/// are disjoint whenever all D̂ come from the same center set; overlapping
/// degenerate cases tie-break to the lowest index. For a single center the
/// whole dataset is carved.
pub fn carve_sets(data: &Dataset, b: &CenterSet) -> (Vec<f64>, Vec<Vec<usize>>) {
    let k = b.len();
    let d_hats: Vec<f64> = if k == 1 {
        vec![f64::INFINITY]
    } else {
        crate::stability::per_center_min_distances(b)
    };
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, p) in data.iter_points().enumerate() {
        for i in 0..k {
            let r = d_hats[i] / 3.0;
            if sq_dist(p, b.center(i)).sqrt() <= r {
                sets[i].push(idx);
                break;
            }
        }
    }
    (d_hats, sets)
}

/// The main pipeline. Steps: (1) subroutine centers B; (2) D̂_i; (3) carve
/// X̂_i; (4) one noisy average per carved set at (ε, δ) (disjoint sets, one
/// release); (5) noisy-cost selection between the averaged candidate and B,
/// recorded at the writeup's two-mechanism accounting. Optionally a trailing
/// noisy Lloyd step at one more (ε, δ).
pub fn private_stable_kmeans(
    data: &Dataset,
    k: usize,
    cfg: &PrivateKMeansConfig,
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
    let mut notes = Vec::new();

    // step 1: subroutine
    let mut sub_ledger = BudgetLedger::new();
    let mut rng_b = seed.child("subroutine").rng();
    let b = subroutine
        .run(data, k, pp, &mut rng_b, &mut sub_ledger)
        .map_err(|e| Error::Subroutine(format!("{}: {e}", subroutine.name())))?;
    let b = b.clamped_to_ball(data.radius());
    ledger.absorb(subroutine.name(), &sub_ledger);

    // steps 2-3: D̂_i and the carve sets
    let (d_hats, sets) = carve_sets(data, &b);

    // step 4: noisy averages over the disjoint carve sets; one (ε, δ)
    let mut rng_avg = seed.child("averages").rng();
    let mut chat_flat: Vec<f64> = Vec::with_capacity(b.len() * data.dim());
    let mut diags = Vec::with_capacity(b.len());
    for (i, set) in sets.iter().enumerate() {
        let flat: Vec<f64> = set
            .iter()
            .flat_map(|&idx| data.point(idx).iter().copied())
            .collect();
        let avg = noisy_average(
            &flat,
            data.dim(),
            data.radius(),
            pp,
            cfg.beta,
            b.len(),
            &mut rng_avg,
            None,
        )?;
        if avg.small_cluster {
            // fall back to b_i so the averaged candidate never loses to B on
            // degenerate carves
            chat_flat.extend_from_slice(b.center(i));
        } else {
            chat_flat.extend_from_slice(&avg.value);
        }
        diags.push(CenterDiag {
            d_hat: d_hats[i],
            carved_size: set.len(),
            small_cluster: avg.small_cluster,
            noise_norm: avg.sum_noise_norm,
        });
    }
    let chat = CenterSet::from_flat(chat_flat, data.dim(), k, "carved-averages")?;
    ledger.record("noisy-averages", pp, MechanismKind::Gaussian);

    // step 5: selection by noisy cost; both estimates drawn as one
    // vector-valued Gaussian of sensitivity sqrt(2)(2Λ)^p, recorded at the
    // writeup's two-entry accounting
    let mut rng_sel = seed.child("selection").rng();
    let (cost_chat, cost_b) = noisy_cost_pair(
        data,
        &chat,
        &b,
        CostObjective::KMeans,
        pp,
        &mut rng_sel,
    )?;
    ledger.record("select-cost-averaged", pp, MechanismKind::Gaussian);
    ledger.record("select-cost-subroutine", pp, MechanismKind::Gaussian);

    let selected = if cost_chat <= cost_b {
        SelectedCandidate::Averaged
    } else {
        SelectedCandidate::Subroutine
    };
    let chosen = match selected {
        SelectedCandidate::Averaged => chat.clone(),
        SelectedCandidate::Subroutine => b.clone(),
    };

    let final_centers = if cfg.do_final_noisy_lloyd {
        let mut rng_lloyd = seed.child("final-lloyd").rng();
        let out = noisy_lloyd_step(
            data,
            &chosen,
            pp,
            cfg.beta,
            &mut rng_lloyd,
            Some(&mut ledger),
        )?;
        notes.push("final noisy Lloyd step applied".into());
        out
    } else {
        chosen.clone()
    };

    let exact_costs = if cfg.record_exact_costs {
        Some((
            cost(data, &chat, CostObjective::KMeans)?,
            cost(data, &b, CostObjective::KMeans)?,
        ))
    } else {
        None
    };

    ledger.close();
    Ok(ClusteringOutcome {
        objective: CostObjective::KMeans,
        chosen,
        final_centers,
        selected,
        candidate_b: b,
        candidate_chat: chat,
        noisy_costs: (cost_chat, cost_b),
        exact_costs,
        diagnostics: diags,
        notes,
        ledger,
        declared_budget: cfg.declared_budget(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::brute_force_opt;
    use crate::mech::stream_rng;
    use rand_distr::{Distribution, Normal};

    fn two_blob_dataset(n: usize, std: f64, seed: u64) -> (Dataset, Vec<Vec<f64>>) {
        let mut rng = stream_rng(seed, "blob-gen");
        let normal = Normal::new(0.0, std).unwrap();
        let centers = [[-0.5, 0.0], [0.5, 0.0]];
        let mut flat = Vec::with_capacity(n * 2);
        for i in 0..n {
            let c = &centers[i % 2];
            let mut p = [c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng)];
            clamp_to_ball(&mut p, 1.0);
            flat.extend_from_slice(&p);
        }
        let data = Dataset::from_flat(flat, 2, 1.0).unwrap();
        // realized per-blob means
        let mut means = vec![vec![0.0; 2]; 2];
        let mut counts = [0usize; 2];
        for (i, p) in data.iter_points().enumerate() {
            let b = i % 2;
            counts[b] += 1;
            means[b][0] += p[0];
            means[b][1] += p[1];
        }
        for b in 0..2 {
            means[b][0] /= counts[b] as f64;
            means[b][1] /= counts[b] as f64;
        }
        (data, means)
    }

    #[test]
    fn noiseless_oracle_subroutine_recovers_opt() {
        let data = Dataset::from_1d(&[0.0, 1.0, 10.0, 11.0], 100.0).unwrap();
        let (opt, opt_cost) = brute_force_opt(&data, 2, CostObjective::KMeans).unwrap();
        let cfg = PrivateKMeansConfig::new(PrivacyParams::noiseless(), 0.05);
        let out = private_stable_kmeans(
            &data,
            2,
            &cfg,
            &FixedCenters(opt),
            &RngSeed::new(1, "t"),
        )
        .unwrap();
        assert_eq!(out.selected, SelectedCandidate::Averaged);
        let c = cost(&data, &out.chosen, CostObjective::KMeans).unwrap();
        assert!((c - opt_cost).abs() < 1e-9, "cost {c} vs {opt_cost}");
        // exact means recovered
        assert!((out.chosen.center(0)[0] - 0.5).abs() < 1e-12);
        assert!((out.chosen.center(1)[0] - 10.5).abs() < 1e-12);
    }

    #[test]
    fn collapsed_subroutine_degenerates_to_b() {
        let data = Dataset::from_1d(&[0.0, 1.0, 10.0, 11.0], 100.0).unwrap();
        let b = CenterSet::from_1d(&[5.0, 5.0], "collapsed").unwrap();
        let cfg = PrivateKMeansConfig::new(PrivacyParams::noiseless(), 0.05);
        let out = private_stable_kmeans(
            &data,
            2,
            &cfg,
            &FixedCenters(b.clone()),
            &RngSeed::new(2, "t"),
        )
        .unwrap();
        // D̂ = 0, every carve set empty, so the averaged candidate equals B
        assert!(out.diagnostics.iter().all(|d| d.small_cluster));
        assert_eq!(out.candidate_chat.flat(), b.flat());
    }

    #[test]
    fn ledger_totals_four_eps_delta() {
        let data = Dataset::from_1d(&[0.0, 1.0, 10.0, 11.0], 12.0).unwrap();
        let pp = PrivacyParams::new(0.5, 1e-6).unwrap();
        let cfg = PrivateKMeansConfig::new(pp, 0.05);
        let opt = CenterSet::from_1d(&[0.5, 10.5], "oracle").unwrap();
        let out = private_stable_kmeans(
            &data,
            2,
            &cfg,
            &FixedCenters(opt),
            &RngSeed::new(3, "t"),
        )
        .unwrap();
        let total = out.ledger.compose_simple();
        assert!((total.epsilon - 4.0 * pp.epsilon).abs() < 1e-12);
        assert!((total.delta - 4.0 * pp.delta).abs() < 1e-18);
        assert_eq!(out.declared_budget.epsilon, 4.0 * pp.epsilon);
    }

    #[test]
    fn ledger_totals_five_with_final_lloyd() {
        let data = Dataset::from_1d(&[0.0, 1.0, 10.0, 11.0], 12.0).unwrap();
        let pp = PrivacyParams::new(0.5, 1e-6).unwrap();
        let mut cfg = PrivateKMeansConfig::new(pp, 0.05);
        cfg.do_final_noisy_lloyd = true;
        let opt = CenterSet::from_1d(&[0.5, 10.5], "oracle").unwrap();
        let out = private_stable_kmeans(
            &data,
            2,
            &cfg,
            &FixedCenters(opt),
            &RngSeed::new(4, "t"),
        )
        .unwrap();
        let total = out.ledger.compose_simple();
        assert!((total.epsilon - 5.0 * pp.epsilon).abs() < 1e-12);
    }

    #[test]
    fn selection_is_argmin_of_noisy_costs() {
        let data = Dataset::from_1d(&[0.0, 1.0, 10.0, 11.0], 12.0).unwrap();
        let pp = PrivacyParams::new(1.0, 1e-5).unwrap();
        let cfg = PrivateKMeansConfig::new(pp, 0.05);
        for s in 0..20 {
            let out = private_stable_kmeans(
                &data,
                2,
                &cfg,
                &FixedCenters(CenterSet::from_1d(&[0.4, 10.6], "b").unwrap()),
                &RngSeed::new(s, "sel"),
            )
            .unwrap();
            let (cc, cb) = out.noisy_costs;
            match out.selected {
                SelectedCandidate::Averaged => assert!(cc <= cb),
                SelectedCandidate::Subroutine => assert!(cb < cc),
            }
        }
    }

    #[test]
    fn k_one_supported() {
        let data = Dataset::from_1d(&[0.0, 1.0, 2.0], 12.0).unwrap();
        let cfg = PrivateKMeansConfig::new(PrivacyParams::noiseless(), 0.05);
        let out = private_stable_kmeans(
            &data,
            1,
            &cfg,
            &FixedCenters(CenterSet::from_1d(&[0.1], "b").unwrap()),
            &RngSeed::new(5, "t"),
        )
        .unwrap();
        // X̂_1 = X, so the averaged candidate is the exact mean
        assert!((out.candidate_chat.center(0)[0] - 1.0).abs() < 1e-12);
        assert_eq!(out.diagnostics[0].carved_size, 3);
    }

    #[test]
    fn noisy_lloyd_step_noiseless_equals_lloyd() {
        let data = Dataset::from_1d(&[0.0, 1.0, 10.0, 11.0], 12.0).unwrap();
        let centers = CenterSet::from_1d(&[0.2, 10.8], "t").unwrap();
        let mut rng = stream_rng(6, "nl");
        let out = noisy_lloyd_step(
            &data,
            &centers,
            PrivacyParams::noiseless(),
            0.05,
            &mut rng,
            None,
        )
        .unwrap();
        let exact =
            crate::geometry::lloyd_step(&data, &centers, CostObjective::KMeans).unwrap();
        assert_eq!(out.flat(), exact.flat());
    }

    #[test]
    fn baseline_lands_near_blob_means() {
        let (data, means) = two_blob_dataset(10_000, 0.01, 99);
        let pp = PrivacyParams::new(1.0, 1e-5).unwrap();
        let mut ok = 0;
        let trials = 100;
        for t in 0..trials {
            let mut ledger = BudgetLedger::new();
            let mut rng = stream_rng(t, "baseline-trial");
            let b = default_private_baseline(
                &data,
                2,
                CostObjective::KMeans,
                pp,
                5,
                0,
                &mut rng,
                &mut ledger,
            )
            .unwrap();
            // ledger records exactly (ε, δ)
            let total = ledger.compose_simple();
            assert!((total.epsilon - pp.epsilon).abs() < 1e-12);
            assert!((total.delta - pp.delta).abs() < 1e-18);
            // match each blob mean to its nearest returned center
            let close = means.iter().all(|m| {
                (0..b.len())
                    .map(|i| sq_dist(b.center(i), m).sqrt())
                    .fold(f64::INFINITY, f64::min)
                    <= 0.1
            });
            if close {
                ok += 1;
            }
        }
        assert!(ok >= 80, "baseline close in {ok}/{trials} trials");
    }

    #[test]
    fn baseline_noiseless_limit_is_deterministic_grid_clustering() {
        let (data, means) = two_blob_dataset(2_000, 0.01, 7);
        let mut ledger = BudgetLedger::new();
        let mut rng = stream_rng(8, "noiseless-baseline");
        let b = default_private_baseline(
            &data,
            2,
            CostObjective::KMeans,
            PrivacyParams::noiseless(),
            5,
            0,
            &mut rng,
            &mut ledger,
        )
        .unwrap();
        for m in &means {
            let dist = (0..b.len())
                .map(|i| sq_dist(b.center(i), m).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(dist < 0.02, "noiseless baseline off by {dist}");
        }
    }
}
