//! Non-private k-means++/k-median++ seeding with Lloyd refinement. This is
//! both the baseline the experiments compare against and the per-subsample
//! clustering step of the sample-and-aggregate pipeline.

use super::{cost, lloyd_step, nearest_center, CenterSet, CostObjective, Dataset};
use crate::error::{Error, Result};
use crate::mech::stream_rng;
use rand::Rng;

const REL_IMPROVEMENT_STOP: f64 = 1e-9;
const MAX_LLOYD_ITERS: usize = 300;

/// D^p-weighted seeding followed by Lloyd iterations until the relative cost
/// improvement drops below 1e-9; the best of `restarts` runs wins.
/// Deterministic given `seed`.
pub fn kmeanspp_lloyd(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    restarts: usize,
    seed: u64,
) -> Result<CenterSet> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!(
            "k must satisfy 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let restarts = restarts.max(1);
    let mut best: Option<(f64, CenterSet)> = None;
    for r in 0..restarts {
        let mut rng = stream_rng(seed, &format!("kmeanspp-restart-{r}"));
        let mut centers = seed_pp(data, k, obj, &mut rng)?;
        let mut prev = cost(data, &centers, obj)?;
        for _ in 0..MAX_LLOYD_ITERS {
            let next = lloyd_step(data, &centers, obj)?;
            let c = cost(data, &next, obj)?;
            centers = next;
            if prev - c < REL_IMPROVEMENT_STOP * prev.max(1e-300) {
                prev = c;
                break;
            }
            prev = c;
        }
        match &best {
            Some((bc, _)) if *bc <= prev => {}
            _ => best = Some((prev, centers)),
        }
    }
    let (_, mut centers) = best.unwrap();
    centers.set_provenance("kmeanspp-lloyd");
    Ok(centers)
}

fn seed_pp<R: Rng>(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    rng: &mut R,
) -> Result<CenterSet> {
    let n = data.n();
    let d = data.dim();
    let mut flat = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    flat.extend_from_slice(data.point(first));
    let mut min_sq: Vec<f64> = {
        let c0 = &flat[0..d];
        data.iter_points().map(|p| super::sq_dist(p, c0)).collect()
    };
    for _ in 1..k {
        let weights: Vec<f64> = min_sq.iter().map(|&sq| obj.from_sq_dist(sq)).collect();
        let total: f64 = weights.iter().sum();
        let idx = if total <= 0.0 {
            // all remaining mass at existing centers; any point works
            rng.random_range(0..n)
        } else {
            let mut u = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        };
        let start = flat.len();
        flat.extend_from_slice(data.point(idx));
        let c = flat[start..start + d].to_vec();
        for (m, p) in min_sq.iter_mut().zip(data.iter_points()) {
            let sq = super::sq_dist(p, &c);
            if sq < *m {
                *m = sq;
            }
        }
    }
    CenterSet::from_flat(flat, d, k, "kmeanspp-seed")
}

/// Weighted k-means++ + Lloyd over a small summary (point, weight) collection.
/// Used by the private baselines to cluster noisy cell statistics; weights
/// must be nonnegative.
pub fn weighted_kmeanspp_lloyd(
    points: &[Vec<f64>],
    weights: &[f64],
    dim: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<CenterSet> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::InvalidParam(
            "weighted seeding needs matching nonempty points/weights".into(),
        ));
    }
    let n = points.len();
    let k = k.min(n);
    // seed
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let total_w: f64 = weights.iter().sum();
    let first = if total_w > 0.0 {
        let mut u = rng.random_range(0.0..total_w);
        let mut chosen = n - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                chosen = i;
                break;
            }
            u -= w;
        }
        chosen
    } else {
        0
    };
    centers.push(points[first].clone());
    let mut min_sq: Vec<f64> = points
        .iter()
        .map(|p| super::sq_dist(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let wts: Vec<f64> = min_sq
            .iter()
            .zip(weights)
            .map(|(sq, w)| sq * w.max(0.0))
            .collect();
        let total: f64 = wts.iter().sum();
        let idx = if total <= 0.0 {
            centers.len() % n
        } else {
            let mut u = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, w) in wts.iter().enumerate() {
                if u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        };
        centers.push(points[idx].clone());
        for (m, p) in min_sq.iter_mut().zip(points) {
            let sq = super::sq_dist(p, &centers[centers.len() - 1]);
            if sq < *m {
                *m = sq;
            }
        }
    }
    // weighted Lloyd rounds on the summary
    let cs = CenterSet::new(centers, dim, k, "weighted-seed")?;
    let mut cs = cs;
    for _ in 0..30 {
        let mut sums = vec![vec![0.0; dim]; cs.len()];
        let mut mass = vec![0.0; cs.len()];
        for (p, &w) in points.iter().zip(weights) {
            let (j, _) = nearest_center(p, &cs);
            let w = w.max(0.0);
            mass[j] += w;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        let mut moved = 0.0f64;
        for j in 0..cs.len() {
            if mass[j] > 0.0 {
                let new: Vec<f64> = sums[j].iter().map(|s| s / mass[j]).collect();
                moved += super::sq_dist(&new, cs.center(j));
                cs.center_mut(j).copy_from_slice(&new);
            }
        }
        if moved < 1e-18 {
            break;
        }
    }
    Ok(cs)
}
