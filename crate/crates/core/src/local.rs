//! Simulated local-model protocols: per-user randomizers produce explicit
//! message objects, and the server aggregates messages only — it never sees
//! a raw point. Rounds are one-shot and non-interactive; the simulation is
//! in-process with no real networking.

use crate::error::{Error, Result};
use crate::geometry::{
    clamp_to_ball, nearest_center, sq_dist, weighted_kmeanspp_lloyd, CenterSet, CostObjective,
    Dataset,
};
use crate::mech::{
    gaussian_sample, gaussian_sigma, BudgetLedger, MechanismKind, PrivacyParams, RngSeed,
};
use crate::stable_kmeans::{CenterDiag, ClusteringOutcome, SelectedCandidate};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One user's broadcast for one protocol round. The payload is a function of
/// the user's own point, the public parameters, and the user's coins only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMessage {
    pub user_id: usize,
    pub round: String,
    pub payload: Payload,
    pub noise_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// unary-encoding randomized-response report, bit-packed
    Bits { len: usize, words: Vec<u64> },
    /// dense real vector
    Dense(Vec<f64>),
}

/// Writes a transcript as JSON-lines, one message per line.
pub fn write_transcript<W: Write>(w: &mut W, transcript: &[UserMessage]) -> Result<()> {
    for msg in transcript {
        serde_json::to_writer(&mut *w, msg)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Disjoint ball regions over B(0, Λ) plus an implicit "outside" region.
/// Overlaps tie-break to the lowest index, preserving disjointness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionPartition {
    centers: Vec<f64>,
    radii: Vec<f64>,
    dim: usize,
}

impl RegionPartition {
    pub fn balls(centers: &CenterSet, radii: Vec<f64>) -> Result<Self> {
        if radii.len() != centers.len() {
            return Err(Error::CardinalityMismatch {
                left: centers.len(),
                right: radii.len(),
            });
        }
        Ok(RegionPartition {
            centers: centers.flat().to_vec(),
            radii,
            dim: centers.dim(),
        })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, t: usize) -> &[f64] {
        &self.centers[t * self.dim..(t + 1) * self.dim]
    }

    /// Region index of x, or None for "outside".
    pub fn membership(&self, x: &[f64]) -> Option<usize> {
        for t in 0..self.len() {
            if sq_dist(x, self.center(t)).sqrt() <= self.radii[t] {
                return Some(t);
            }
        }
        None
    }
}

/// Randomized-response flip probability 1/(1 + e^{ε/2}); 0 in the noiseless
/// limit.
pub fn rr_flip_probability(epsilon: f64) -> f64 {
    1.0 / (1.0 + (epsilon / 2.0).exp())
}

fn rr_message<R: Rng + ?Sized>(
    user_id: usize,
    round: &str,
    value: usize,
    domain: usize,
    flip: f64,
    rng: &mut R,
) -> UserMessage {
    let words_len = domain.div_ceil(64);
    let mut words = vec![0u64; words_len];
    for u in 0..domain {
        let flipped = flip > 0.0 && rng.random::<f64>() < flip;
        let bit = (u == value) ^ flipped;
        if bit {
            words[u / 64] |= 1u64 << (u % 64);
        }
    }
    UserMessage {
        user_id,
        round: round.to_string(),
        payload: Payload::Bits {
            len: domain,
            words,
        },
        noise_scale: flip,
    }
}

struct FreqAccumulator {
    counts: Vec<f64>,
    n: usize,
}

impl FreqAccumulator {
    fn new(domain: usize) -> Self {
        FreqAccumulator {
            counts: vec![0.0; domain],
            n: 0,
        }
    }

    fn absorb(&mut self, msg: &UserMessage) -> Result<()> {
        match &msg.payload {
            Payload::Bits { len, words } => {
                if *len != self.counts.len() {
                    return Err(Error::InvalidParam("bit report length mismatch".into()));
                }
                for u in 0..*len {
                    if words[u / 64] >> (u % 64) & 1 == 1 {
                        self.counts[u] += 1.0;
                    }
                }
                self.n += 1;
                Ok(())
            }
            _ => Err(Error::InvalidParam("expected a bit report".into())),
        }
    }

    /// Debiased estimates: (c_u − n q) / (1 − 2q).
    fn finish(self, flip: f64) -> Vec<f64> {
        let n = self.n as f64;
        self.counts
            .iter()
            .map(|c| (c - n * flip) / (1.0 - 2.0 * flip))
            .collect()
    }
}

/// (ε, 0)-LDP frequency oracle by unary-encoding randomized response: every
/// user perturbs each of |U| bits with flip probability 1/(1 + e^{ε/2}); the
/// server debiases the bit counts.
pub fn ldp_frequency_oracle(
    values: &[usize],
    domain: usize,
    epsilon: f64,
    seed: &RngSeed,
    mut transcript: Option<&mut Vec<UserMessage>>,
) -> Result<Vec<f64>> {
    if domain == 0 {
        return Err(Error::InvalidParam("empty symbol domain".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParam("epsilon must be > 0".into()));
    }
    let flip = rr_flip_probability(epsilon);
    let mut rng = seed.rng();
    let mut acc = FreqAccumulator::new(domain);
    for (i, &v) in values.iter().enumerate() {
        if v >= domain {
            return Err(Error::InvalidParam(format!(
                "user {i} holds symbol {v} outside domain {domain}"
            )));
        }
        let msg = rr_message(i, "freq-oracle", v, domain, flip, &mut rng);
        acc.absorb(&msg)?;
        if let Some(t) = transcript.as_deref_mut() {
            t.push(msg);
        }
    }
    Ok(acc.finish(flip))
}

/// (ε, δ)-LDP vector sum: every user reports its point plus per-coordinate
/// N(0, σ²) with σ = (2Λ/ε) sqrt(2 ln(1.25/δ)); the server adds reports.
pub fn ldp_vector_sum(
    data: &Dataset,
    pp: PrivacyParams,
    seed: &RngSeed,
    mut transcript: Option<&mut Vec<UserMessage>>,
) -> Result<Vec<f64>> {
    let sigma = gaussian_sigma(2.0 * data.radius(), pp)?;
    let mut rng = seed.rng();
    let mut sum = vec![0.0; data.dim()];
    for (i, p) in data.iter_points().enumerate() {
        let report: Vec<f64> = p.iter().map(|x| x + gaussian_sample(&mut rng, sigma)).collect();
        for (s, v) in sum.iter_mut().zip(&report) {
            *s += v;
        }
        if let Some(t) = transcript.as_deref_mut() {
            t.push(UserMessage {
                user_id: i,
                round: "vector-sum".to_string(),
                payload: Payload::Dense(report),
                noise_scale: sigma,
            });
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdpAvgOutcome {
    /// per-region average estimates
    pub estimates: Vec<Vec<f64>>,
    /// debiased noisy region counts
    pub noisy_counts: Vec<f64>,
    /// regions whose noisy count came back nonpositive (estimate fell back
    /// to the region center)
    pub flagged: Vec<bool>,
    pub noise_sigma: f64,
}

/// Per-region averages under LDP: every user sends a T-block vector of pure
/// Gaussian noise (σ = (8Λ/ε) sqrt(ln(1.25/δ))) with its point added to its
/// own region's block; region counts come from the frequency oracle at ε/2;
/// the server divides block sums by the noisy counts.
pub fn ldp_avg(
    data: &Dataset,
    regions: &RegionPartition,
    pp: PrivacyParams,
    seed: &RngSeed,
    mut transcript: Option<&mut Vec<UserMessage>>,
) -> Result<LdpAvgOutcome> {
    if regions.is_empty() {
        return Err(Error::InvalidParam("need at least one region".into()));
    }
    if regions.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: regions.dim(),
        });
    }
    let t_regions = regions.len();
    let d = data.dim();
    let sigma = if pp.is_noiseless() {
        0.0
    } else {
        if !(pp.delta > 0.0) {
            return Err(Error::InvalidParam("ldp_avg needs delta > 0".into()));
        }
        8.0 * data.radius() / pp.epsilon * (1.25 / pp.delta).ln().sqrt()
    };

    // noise round: block sums
    let mut rng = seed.child("avg-noise").rng();
    let mut block_sums = vec![0.0; t_regions * d];
    let mut memberships: Vec<usize> = Vec::with_capacity(data.n());
    for (i, p) in data.iter_points().enumerate() {
        let m = regions.membership(p);
        memberships.push(m.unwrap_or(t_regions));
        if let Some(tr) = transcript.as_deref_mut() {
            let mut y = vec![0.0; t_regions * d];
            for v in y.iter_mut() {
                *v = gaussian_sample(&mut rng, sigma);
            }
            if let Some(t) = m {
                for (j, x) in p.iter().enumerate() {
                    y[t * d + j] += x;
                }
            }
            for (s, v) in block_sums.iter_mut().zip(&y) {
                *s += v;
            }
            tr.push(UserMessage {
                user_id: i,
                round: "avg-noise".to_string(),
                payload: Payload::Dense(y),
                noise_scale: sigma,
            });
        } else {
            // identical aggregation without materializing the message
            for s in block_sums.iter_mut() {
                *s += gaussian_sample(&mut rng, sigma);
            }
            if let Some(t) = m {
                for (j, x) in p.iter().enumerate() {
                    block_sums[t * d + j] += x;
                }
            }
        }
    }

    // count round at ε/2 over region-or-outside symbols
    let count_eps = if pp.is_noiseless() {
        f64::INFINITY
    } else {
        pp.epsilon / 2.0
    };
    let counts = ldp_frequency_oracle(
        &memberships,
        t_regions + 1,
        count_eps,
        &seed.child("avg-counts"),
        transcript.as_deref_mut(),
    )?;

    let mut estimates = Vec::with_capacity(t_regions);
    let mut flagged = Vec::with_capacity(t_regions);
    for t in 0..t_regions {
        let r_hat = counts[t];
        if r_hat <= 0.0 {
            estimates.push(regions.center(t).to_vec());
            flagged.push(true);
        } else {
            let est: Vec<f64> = (0..d).map(|j| block_sums[t * d + j] / r_hat).collect();
            estimates.push(est);
            flagged.push(false);
        }
    }
    Ok(LdpAvgOutcome {
        estimates,
        noisy_counts: counts[..t_regions].to_vec(),
        flagged,
        noise_sigma: sigma,
    })
}

/// An (ε, δ)-LDP protocol producing at most k centers. Implementations must
/// only look at the data through user messages.
pub trait LdpSubroutine {
    fn run(
        &self,
        data: &Dataset,
        k: usize,
        pp: PrivacyParams,
        seed: &RngSeed,
        ledger: &mut BudgetLedger,
    ) -> Result<CenterSet>;

    fn name(&self) -> &'static str {
        "ldp-subroutine"
    }
}

/// Default LDP seeding round: frequency oracle over a randomly shifted grid
/// (ε/2) to find heavy cells, one LDP-AVG round over those cells (ε/2, δ),
/// then server-side weighted seeding over the estimated cell centroids.
pub struct GridLdpBaseline;

const LDP_GRID_MAX_CELLS: usize = 4096;
const LDP_GRID_MAX_PER_AXIS: usize = 16;

impl LdpSubroutine for GridLdpBaseline {
    fn run(
        &self,
        data: &Dataset,
        k: usize,
        pp: PrivacyParams,
        seed: &RngSeed,
        ledger: &mut BudgetLedger,
    ) -> Result<CenterSet> {
        let n = data.n();
        let d = data.dim();
        let radius = data.radius();
        let per_axis_budget = (LDP_GRID_MAX_CELLS as f64)
            .powf(1.0 / d as f64)
            .floor()
            .max(2.0) as usize;
        let g = ((n.max(2) as f64).powf(1.0 / d.max(2) as f64).ceil() as usize)
            .clamp(2, LDP_GRID_MAX_PER_AXIS.min(per_axis_budget));
        let w = 2.0 * radius / g as f64;
        let mut shift_rng = seed.child("grid-shift").rng();
        let shift: Vec<f64> = (0..d).map(|_| shift_rng.random_range(0.0..w)).collect();
        let bins_per_axis = g + 1;
        let domain = bins_per_axis.pow(d as u32);

        let cell_of = |p: &[f64]| -> usize {
            let mut id = 0usize;
            for (x, s) in p.iter().zip(&shift) {
                let idx = (((x + radius + s) / w).floor() as usize).min(bins_per_axis - 1);
                id = id * bins_per_axis + idx;
            }
            id
        };
        let values: Vec<usize> = data.iter_points().map(cell_of).collect();
        let half = pp.scaled(0.5);
        let counts =
            ldp_frequency_oracle(&values, domain, half.epsilon, &seed.child("grid-freq"), None)?;

        // heavy cells: top k * ceil(ln n)
        let target = ((k as f64) * (n.max(2) as f64).ln().ceil()) as usize;
        let mut order: Vec<usize> = (0..domain).collect();
        order.sort_by(|&a, &b| {
            counts[b]
                .partial_cmp(&counts[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let heavy: Vec<usize> = order.into_iter().take(target.max(k)).collect();

        let cell_center = |id: usize| -> Vec<f64> {
            let mut rem = id;
            let mut idxs = vec![0usize; d];
            for j in (0..d).rev() {
                idxs[j] = rem % bins_per_axis;
                rem /= bins_per_axis;
            }
            idxs.iter()
                .zip(&shift)
                .map(|(idx, s)| (*idx as f64 + 0.5) * w - radius - s)
                .collect()
        };
        let heavy_centers: Vec<Vec<f64>> = heavy.iter().map(|&id| cell_center(id)).collect();
        let ball_r = w * (d as f64).sqrt() / 2.0;
        let region_centers = CenterSet::new(heavy_centers, d, heavy.len(), "grid-cells")?;
        let regions = RegionPartition::balls(&region_centers, vec![ball_r; heavy.len()])?;
        let avg = ldp_avg(data, &regions, half, &seed.child("grid-avg"), None)?;

        let weights: Vec<f64> = avg.noisy_counts.iter().map(|c| c.max(0.0)).collect();
        let mut centroids: Vec<Vec<f64>> = avg.estimates.clone();
        for c in centroids.iter_mut() {
            clamp_to_ball(c, radius);
        }
        let mut server_rng = seed.child("server-seeding").rng();
        let mut centers = weighted_kmeanspp_lloyd(&centroids, &weights, d, k, &mut server_rng)?;
        if centers.len() < k {
            let mut flat = centers.flat().to_vec();
            while flat.len() < k * d {
                flat.extend_from_slice(&centroids[0]);
            }
            centers = CenterSet::from_flat(flat, d, k, "ldp-grid-baseline")?;
        }
        ledger.record("ldp-subroutine", pp, MechanismKind::Composite);
        let mut centers = centers.clamped_to_ball(radius);
        centers.set_provenance("ldp-grid-baseline");
        Ok(centers)
    }

    fn name(&self) -> &'static str {
        "ldp-grid-baseline"
    }
}

/// Per-user cost reports for the selection round, drawn as one 2-vector
/// Gaussian per user at sensitivity sqrt(2)(2Λ)^p.
fn ldp_cost_pair(
    data: &Dataset,
    first: &CenterSet,
    second: &CenterSet,
    obj: CostObjective,
    pp: PrivacyParams,
    seed: &RngSeed,
    mut transcript: Option<&mut Vec<UserMessage>>,
) -> Result<(f64, f64)> {
    let sens = std::f64::consts::SQRT_2 * (2.0 * data.radius()).powi(obj.p() as i32);
    let sigma = gaussian_sigma(sens, pp)?;
    let mut rng = seed.rng();
    let mut sums = (0.0, 0.0);
    for (i, p) in data.iter_points().enumerate() {
        let (_, sq1) = nearest_center(p, first);
        let (_, sq2) = nearest_center(p, second);
        let report = vec![
            obj.from_sq_dist(sq1) + gaussian_sample(&mut rng, sigma),
            obj.from_sq_dist(sq2) + gaussian_sample(&mut rng, sigma),
        ];
        sums.0 += report[0];
        sums.1 += report[1];
        if let Some(t) = transcript.as_deref_mut() {
            t.push(UserMessage {
                user_id: i,
                round: "select-costs".to_string(),
                payload: Payload::Dense(report),
                noise_scale: sigma,
            });
        }
    }
    Ok(sums)
}

/// The local-model pipeline mirroring the centralized one: LDP subroutine
/// for B, D̂_i/3 ball regions, LDP-AVG for the refined candidate, and an
/// LDP-sum selection round. Per-user spend totals 4 (ε, δ).
pub fn ldp_stable_kmeans(
    data: &Dataset,
    k: usize,
    pp: PrivacyParams,
    beta: f64,
    subroutine: &dyn LdpSubroutine,
    seed: &RngSeed,
    mut transcript: Option<&mut Vec<UserMessage>>,
) -> Result<ClusteringOutcome> {
    if data.n() == 0 {
        return Err(Error::InvalidParam("no users".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    let _ = beta;
    let mut ledger = BudgetLedger::new();

    // round 1: subroutine
    let mut sub_ledger = BudgetLedger::new();
    let b = subroutine
        .run(data, k, pp, &seed.child("subroutine"), &mut sub_ledger)
        .map_err(|e| Error::Subroutine(format!("{}: {e}", subroutine.name())))?;
    let b = b.clamped_to_ball(data.radius());
    ledger.absorb(subroutine.name(), &sub_ledger);

    // rounds 2-3: public region geometry from B
    let d_hats: Vec<f64> = if b.len() == 1 {
        vec![f64::INFINITY]
    } else {
        crate::stability::per_center_min_distances(&b)
    };
    let radii: Vec<f64> = d_hats
        .iter()
        .map(|d| {
            if d.is_finite() {
                d / 3.0
            } else {
                2.0 * data.radius()
            }
        })
        .collect();
    let regions = RegionPartition::balls(&b, radii)?;

    // round 4: refined candidate via LDP-AVG at (ε, δ)
    let avg = ldp_avg(
        data,
        &regions,
        pp,
        &seed.child("refine-avg"),
        transcript.as_deref_mut(),
    )?;
    ledger.record("ldp-avg", pp, MechanismKind::Composite);
    let mut chat_flat = Vec::with_capacity(k * data.dim());
    let mut diags = Vec::with_capacity(k);
    for i in 0..b.len() {
        let mut est = avg.estimates[i].clone();
        clamp_to_ball(&mut est, data.radius());
        let small = avg.flagged[i] || avg.noisy_counts[i] < 1.0;
        if small {
            chat_flat.extend_from_slice(b.center(i));
        } else {
            chat_flat.extend_from_slice(&est);
        }
        diags.push(CenterDiag {
            d_hat: d_hats[i],
            carved_size: avg.noisy_counts[i].max(0.0) as usize,
            small_cluster: small,
            noise_norm: avg.noise_sigma,
        });
    }
    let chat = CenterSet::from_flat(chat_flat, data.dim(), k, "ldp-averages")?;

    // round 5: selection by per-user noisy cost reports, recorded at the
    // writeup's two-aggregate accounting
    let (cost_chat, cost_b) = ldp_cost_pair(
        data,
        &chat,
        &b,
        CostObjective::KMeans,
        pp,
        &seed.child("select"),
        transcript.as_deref_mut(),
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
    let exact_costs = Some((
        crate::geometry::cost(data, &chat, CostObjective::KMeans)?,
        crate::geometry::cost(data, &b, CostObjective::KMeans)?,
    ));

    ledger.close();
    Ok(ClusteringOutcome {
        objective: CostObjective::KMeans,
        chosen: chosen.clone(),
        final_centers: chosen,
        selected,
        candidate_b: b,
        candidate_chat: chat,
        noisy_costs: (cost_chat, cost_b),
        exact_costs,
        diagnostics: diags,
        notes: vec!["per-user budget: 4 (eps, delta)".into()],
        ledger,
        declared_budget: pp.scaled(4.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(s: u64, l: &str) -> RngSeed {
        RngSeed::new(s, l)
    }

    #[test]
    fn frequency_oracle_noiseless_exact() {
        let values = vec![0usize, 1, 1, 2, 2, 2];
        let est =
            ldp_frequency_oracle(&values, 4, f64::INFINITY, &seed(1, "fo"), None).unwrap();
        assert_eq!(est, vec![1.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn frequency_oracle_debiasing_concentrates() {
        // all users hold symbol 0: other symbols estimate near zero
        let n = 10_000usize;
        let values = vec![0usize; n];
        let eps = 1.0;
        let est = ldp_frequency_oracle(&values, 3, eps, &seed(2, "fo2"), None).unwrap();
        let q = rr_flip_probability(eps);
        let std = (n as f64 * q * (1.0 - q)).sqrt() / (1.0 - 2.0 * q);
        assert!((est[0] - n as f64).abs() <= 4.0 * std, "est0 {}", est[0]);
        assert!(est[1].abs() <= 4.0 * std, "est1 {}", est[1]);
        assert!(est[2].abs() <= 4.0 * std, "est2 {}", est[2]);
    }

    #[test]
    fn frequency_oracle_transcript_is_per_user() {
        let values = vec![0usize, 2, 1];
        let mut transcript = Vec::new();
        ldp_frequency_oracle(&values, 3, 1.0, &seed(3, "fo3"), Some(&mut transcript)).unwrap();
        assert_eq!(transcript.len(), 3);
        assert!(transcript
            .iter()
            .enumerate()
            .all(|(i, m)| m.user_id == i && m.round == "freq-oracle"));
    }

    #[test]
    fn vector_sum_noiseless_single_user() {
        let data = Dataset::new(vec![vec![0.25, -0.5]], 2, 1.0).unwrap();
        let sum = ldp_vector_sum(&data, PrivacyParams::noiseless(), &seed(4, "vs"), None)
            .unwrap();
        assert_eq!(sum, vec![0.25, -0.5]);
    }

    #[test]
    fn vector_sum_messages_uncorrelated() {
        // two users' noise draws over repeated trials have tiny sample
        // correlation
        let data = Dataset::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], 2, 1.0).unwrap();
        let pp = PrivacyParams::new(1.0, 1e-5).unwrap();
        let trials = 10_000;
        let mut xs = Vec::with_capacity(trials);
        let mut ys = Vec::with_capacity(trials);
        for t in 0..trials {
            let mut transcript = Vec::new();
            ldp_vector_sum(&data, pp, &seed(t as u64, "corr"), Some(&mut transcript)).unwrap();
            let get = |m: &UserMessage| match &m.payload {
                Payload::Dense(v) => v[0],
                _ => unreachable!(),
            };
            xs.push(get(&transcript[0]));
            ys.push(get(&transcript[1]));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mx = mean(&xs);
        let my = mean(&ys);
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            cov += (x - mx) * (y - my);
            vx += (x - mx).powi(2);
            vy += (y - my).powi(2);
        }
        let corr = cov / (vx.sqrt() * vy.sqrt());
        assert!(corr.abs() <= 0.05, "corr {corr}");
    }

    #[test]
    fn ldp_avg_single_region_noiseless() {
        let data = Dataset::new(
            vec![vec![0.2, 0.0], vec![0.4, 0.2], vec![0.0, 0.4]],
            2,
            1.0,
        )
        .unwrap();
        let c = CenterSet::new(vec![vec![0.2, 0.2]], 2, 1, "r").unwrap();
        let regions = RegionPartition::balls(&c, vec![1.0]).unwrap();
        let out = ldp_avg(
            &data,
            &regions,
            PrivacyParams::noiseless(),
            &seed(5, "avg"),
            None,
        )
        .unwrap();
        assert!(!out.flagged[0]);
        assert!((out.estimates[0][0] - 0.2).abs() < 1e-12);
        assert!((out.estimates[0][1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ldp_avg_empty_region_flagged() {
        let data = Dataset::new(vec![vec![0.5, 0.0]], 2, 1.0).unwrap();
        let c = CenterSet::new(vec![vec![-0.9, 0.0]], 2, 1, "r").unwrap();
        let regions = RegionPartition::balls(&c, vec![0.01]).unwrap();
        let out = ldp_avg(
            &data,
            &regions,
            PrivacyParams::noiseless(),
            &seed(6, "avg2"),
            None,
        )
        .unwrap();
        assert!(out.flagged[0]);
        assert_eq!(out.estimates[0], vec![-0.9, 0.0]);
    }

    #[test]
    fn region_membership_tiebreaks_low_index() {
        let c = CenterSet::new(vec![vec![0.0, 0.0], vec![0.1, 0.0]], 2, 2, "r").unwrap();
        let regions = RegionPartition::balls(&c, vec![0.5, 0.5]).unwrap();
        assert_eq!(regions.membership(&[0.05, 0.0]), Some(0));
        assert_eq!(regions.membership(&[0.9, 0.0]), None);
    }

    #[test]
    fn pipeline_noiseless_matches_exact_averages() {
        // two tight blobs; at ε = ∞ the refined candidate must equal the
        // exact within-region means and selection must use exact costs
        let mut pts = Vec::new();
        for i in 0..50 {
            let off = (i % 5) as f64 * 1e-3;
            pts.push(vec![-0.5 + off, 0.0]);
            pts.push(vec![0.5 - off, 0.0]);
        }
        let data = Dataset::new(pts, 2, 1.0).unwrap();
        let out = ldp_stable_kmeans(
            &data,
            2,
            PrivacyParams::noiseless(),
            0.05,
            &GridLdpBaseline,
            &seed(7, "pipe"),
            None,
        )
        .unwrap();
        // every region average is an exact mean of the carved points
        let regions = RegionPartition::balls(
            &out.candidate_b,
            crate::stability::per_center_min_distances(&out.candidate_b)
                .iter()
                .map(|d| d / 3.0)
                .collect(),
        )
        .unwrap();
        for i in 0..2 {
            let members: Vec<&[f64]> = data
                .iter_points()
                .filter(|p| regions.membership(p) == Some(i))
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; 2];
            for p in &members {
                mean[0] += p[0];
                mean[1] += p[1];
            }
            mean[0] /= members.len() as f64;
            mean[1] /= members.len() as f64;
            let got = out.candidate_chat.center(i);
            assert!(
                sq_dist(got, &mean).sqrt() < 1e-9,
                "region {i}: {got:?} vs {mean:?}"
            );
        }
        // noiseless selection equals exact-cost comparison
        let (ec, eb) = out.exact_costs.unwrap();
        assert!((out.noisy_costs.0 - ec).abs() < 1e-9);
        assert!((out.noisy_costs.1 - eb).abs() < 1e-9);
    }

    #[test]
    fn pipeline_per_user_ledger_totals() {
        let mut pts = Vec::new();
        for i in 0..40 {
            pts.push(vec![if i % 2 == 0 { -0.5 } else { 0.5 }, 0.0]);
        }
        let data = Dataset::new(pts, 2, 1.0).unwrap();
        let pp = PrivacyParams::new(2.0, 1e-5).unwrap();
        let out = ldp_stable_kmeans(
            &data,
            2,
            pp,
            0.05,
            &GridLdpBaseline,
            &seed(8, "pipe2"),
            None,
        )
        .unwrap();
        let total = out.ledger.compose_simple();
        assert!((total.epsilon - 4.0 * pp.epsilon).abs() < 1e-12);
        assert!((total.delta - 4.0 * pp.delta).abs() < 1e-18);
    }

    #[test]
    fn transcript_round_labels() {
        let data = Dataset::new(vec![vec![0.1, 0.0], vec![-0.1, 0.0]], 2, 1.0).unwrap();
        let mut transcript = Vec::new();
        let pp = PrivacyParams::new(1.0, 1e-5).unwrap();
        ldp_stable_kmeans(
            &data,
            1,
            pp,
            0.05,
            &GridLdpBaseline,
            &seed(9, "tr"),
            Some(&mut transcript),
        )
        .unwrap();
        assert!(transcript.iter().any(|m| m.round == "avg-noise"));
        assert!(transcript.iter().any(|m| m.round == "freq-oracle"));
        assert!(transcript.iter().any(|m| m.round == "select-costs"));
        let mut buf = Vec::new();
        write_transcript(&mut buf, &transcript).unwrap();
        assert_eq!(
            buf.iter().filter(|&&b| b == b'\n').count(),
            transcript.len()
        );
    }
}
