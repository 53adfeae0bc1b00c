//! Exact OPT oracle for tiny instances, by enumerating every partition of the
//! points into at most k blocks. Test-only ground truth; hard-gated on n.

use super::{cluster_mean, cluster_median, sq_dist, CenterSet, CostObjective, Dataset};
use crate::error::{Error, Result};

/// Enumeration guard: set partitions of n = 14 into <= k blocks is the most
/// this oracle will attempt.
pub const BRUTE_FORCE_MAX_N: usize = 14;

/// Exact OPT^p_k by exhaustive partition enumeration. Per block the center is
/// the mean (p = 2) or the geometric median (p = 1). Refuses n > 14.
pub fn brute_force_opt(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
) -> Result<(CenterSet, f64)> {
    let n = data.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::OracleTooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    if k == 0 || n == 0 {
        return Err(Error::InvalidParam("need n >= 1 and k >= 1".into()));
    }
    if k >= n {
        // every point its own center
        let centers: Vec<Vec<f64>> = data.iter_points().map(|p| p.to_vec()).collect();
        let cs = CenterSet::new(centers, data.dim(), k, "brute-force-opt")?;
        return Ok((cs, 0.0));
    }

    let mut assign = vec![0usize; n];
    let mut best_cost = f64::INFINITY;
    let mut best_assign = vec![0usize; n];
    enumerate(data, k, obj, &mut assign, 1, 1, &mut best_cost, &mut best_assign)?;

    let blocks = *best_assign.iter().max().unwrap() + 1;
    let mut centers = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let members: Vec<usize> = (0..n).filter(|&i| best_assign[i] == b).collect();
        let c = match obj {
            CostObjective::KMeans => cluster_mean(data, &members)?,
            CostObjective::KMedian => cluster_median(data, &members, 1e-12)?,
        };
        centers.push(c);
    }
    let cs = CenterSet::new(centers, data.dim(), k, "brute-force-opt")?;
    Ok((cs, best_cost))
}

/// Restricted-growth enumeration: point 0 is always in block 0; point i may
/// join blocks 0..used or open block `used` while used < k.
fn enumerate(
    data: &Dataset,
    k: usize,
    obj: CostObjective,
    assign: &mut [usize],
    next: usize,
    used: usize,
    best_cost: &mut f64,
    best_assign: &mut [usize],
) -> Result<()> {
    let n = data.n();
    if next == n {
        let c = partition_cost(data, assign, used, obj)?;
        if c < *best_cost {
            *best_cost = c;
            best_assign.copy_from_slice(assign);
        }
        return Ok(());
    }
    let open_limit = if used < k { used + 1 } else { used };
    for b in 0..open_limit {
        assign[next] = b;
        let new_used = used.max(b + 1);
        enumerate(data, k, obj, assign, next + 1, new_used, best_cost, best_assign)?;
    }
    Ok(())
}

fn partition_cost(
    data: &Dataset,
    assign: &[usize],
    blocks: usize,
    obj: CostObjective,
) -> Result<f64> {
    let n = data.n();
    let mut total = 0.0;
    for b in 0..blocks {
        let members: Vec<usize> = (0..n).filter(|&i| assign[i] == b).collect();
        if members.is_empty() {
            continue;
        }
        match obj {
            CostObjective::KMeans => {
                let c = cluster_mean(data, &members)?;
                for &i in &members {
                    total += sq_dist(data.point(i), &c);
                }
            }
            CostObjective::KMedian => {
                let c = cluster_median(data, &members, 1e-12)?;
                for &i in &members {
                    total += sq_dist(data.point(i), &c).sqrt();
                }
            }
        }
    }
    Ok(total)
}
