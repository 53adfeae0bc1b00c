//! Deterministic geometry and cost kernel: datasets, center sets, costs,
//! nearest-center partitions, means/medians, Lloyd iterations, non-private
//! baselines and the brute-force / matching oracles used by the tests.

mod brute;
mod io;
mod kmeans;
mod wasserstein;

pub use brute::{brute_force_opt, BRUTE_FORCE_MAX_N};
pub use io::{read_dataset_csv, read_dataset_json, write_dataset_csv, write_dataset_json};
pub use kmeans::{kmeanspp_lloyd, weighted_kmeanspp_lloyd};
pub use wasserstein::{hungarian_min_cost, wasserstein, wasserstein_enumerated};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Slack applied to the ball-membership check so points clipped exactly onto
/// the boundary survive floating-point round-off.
const BALL_TOL: f64 = 1e-9;

/// Cost exponent: 1 for k-median, 2 for k-means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostObjective {
    KMedian,
    KMeans,
}

impl CostObjective {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(CostObjective::KMedian),
            2 => Ok(CostObjective::KMeans),
            other => Err(Error::InvalidParam(format!("p must be 1 or 2, got {other}"))),
        }
    }

    pub fn p(self) -> u32 {
        match self {
            CostObjective::KMedian => 1,
            CostObjective::KMeans => 2,
        }
    }

    /// ‖·‖^p from a squared Euclidean distance.
    #[inline]
    pub fn from_sq_dist(self, sq: f64) -> f64 {
        match self {
            CostObjective::KMedian => sq.sqrt(),
            CostObjective::KMeans => sq,
        }
    }
}

/// An ordered collection of d-dimensional points inside the ball B(0, Λ).
///
/// Points are stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<f64>,
    dim: usize,
    radius: f64,
}

impl Dataset {
    /// Builds a dataset, rejecting points outside B(0, Λ) or with mismatched
    /// dimension.
    pub fn new(points: Vec<Vec<f64>>, dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dim must be >= 1".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParam("radius must be > 0".into()));
        }
        let mut flat = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            let norm = norm2(p);
            if !norm.is_finite() || norm > radius * (1.0 + BALL_TOL) {
                return Err(Error::PointOutsideBall {
                    index: i,
                    norm,
                    radius,
                });
            }
            flat.extend_from_slice(p);
        }
        Ok(Dataset {
            points: flat,
            dim,
            radius,
        })
    }

    /// Builds from an already-flat buffer (same checks as [`Dataset::new`]).
    pub fn from_flat(points: Vec<f64>, dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dim must be >= 1".into()));
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.len() % dim,
            });
        }
        for i in 0..points.len() / dim {
            let norm = norm2(&points[i * dim..(i + 1) * dim]);
            if !norm.is_finite() || norm > radius * (1.0 + BALL_TOL) {
                return Err(Error::PointOutsideBall {
                    index: i,
                    norm,
                    radius,
                });
            }
        }
        Ok(Dataset {
            points,
            dim,
            radius,
        })
    }

    /// Convenience constructor for 1-d data.
    pub fn from_1d(values: &[f64], radius: f64) -> Result<Self> {
        Dataset::from_flat(values.to_vec(), 1, radius)
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.points
    }

    /// Dataset restricted to `indices` (same ball).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut flat = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            flat.extend_from_slice(self.point(i));
        }
        Dataset {
            points: flat,
            dim: self.dim,
            radius: self.radius,
        }
    }
}

/// A set of at most k centers with a provenance label.
///
/// Centers need not lie inside the ball unless the producing operation says
/// so; they must be finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    centers: Vec<f64>,
    dim: usize,
    k: usize,
    provenance: String,
}

impl CenterSet {
    pub fn new(centers: Vec<Vec<f64>>, dim: usize, k: usize, provenance: &str) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptyCenterSet);
        }
        let mut flat = Vec::with_capacity(centers.len() * dim);
        for c in &centers {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam("non-finite center".into()));
            }
            flat.extend_from_slice(c);
        }
        Ok(CenterSet {
            centers: flat,
            dim,
            k,
            provenance: provenance.to_string(),
        })
    }

    pub fn from_flat(centers: Vec<f64>, dim: usize, k: usize, provenance: &str) -> Result<Self> {
        if centers.is_empty() || centers.len() % dim != 0 {
            return Err(Error::EmptyCenterSet);
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("non-finite center".into()));
        }
        Ok(CenterSet {
            centers,
            dim,
            k,
            provenance: provenance.to_string(),
        })
    }

    pub fn from_1d(values: &[f64], provenance: &str) -> Result<Self> {
        CenterSet::from_flat(values.to_vec(), 1, values.len(), provenance)
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Intended cardinality (the k the producer aimed for).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn set_provenance(&mut self, p: &str) {
        self.provenance = p.to_string();
    }

    #[inline]
    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn center_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.centers
    }

    /// Copy with every center radially clamped into B(0, Λ).
    pub fn clamped_to_ball(&self, radius: f64) -> CenterSet {
        let mut out = self.clone();
        for i in 0..out.len() {
            clamp_to_ball(out.center_mut(i), radius);
        }
        out
    }
}

/// Nearest-center assignment of every point, with per-cluster sizes.
///
/// Ties break to the lowest center index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub cluster_of: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
}

impl Partition {
    /// Point indices of cluster `i`.
    pub fn members(&self, i: usize) -> Vec<usize> {
        self.cluster_of
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == i)
            .map(|(idx, _)| idx)
            .collect()
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Radially clamps `v` into the ball of the given radius.
pub fn clamp_to_ball(v: &mut [f64], radius: f64) {
    let n = norm2(v);
    if n > radius {
        let s = radius / n;
        for x in v.iter_mut() {
            *x *= s;
        }
    }
}

/// Index of the nearest center and the squared distance to it; ties break to
/// the lowest index.
#[inline]
pub fn nearest_center(point: &[f64], centers: &CenterSet) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_sq = f64::INFINITY;
    for (j, c) in centers.iter_centers().enumerate() {
        let sq = sq_dist(point, c);
        if sq < best_sq {
            best_sq = sq;
            best = j;
        }
    }
    (best, best_sq)
}

fn check_dims(data: &Dataset, centers: &CenterSet) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::EmptyCenterSet);
    }
    if data.dim() != centers.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: centers.dim(),
        });
    }
    Ok(())
}

/// cost^p_X(C) = Σ_x min_c ‖x − c‖^p. Empty dataset costs 0.
pub fn cost(data: &Dataset, centers: &CenterSet, obj: CostObjective) -> Result<f64> {
    check_dims(data, centers)?;
    Ok(data
        .iter_points()
        .map(|p| {
            let (_, sq) = nearest_center(p, centers);
            obj.from_sq_dist(sq)
        })
        .sum())
}

/// Assigns each point to its nearest center (lowest-index tie-break).
pub fn partition_by_nearest(data: &Dataset, centers: &CenterSet) -> Result<Partition> {
    check_dims(data, centers)?;
    let k = centers.len();
    let mut cluster_of = Vec::with_capacity(data.n());
    let mut cluster_sizes = vec![0usize; k];
    for p in data.iter_points() {
        let (j, _) = nearest_center(p, centers);
        cluster_of.push(j);
        cluster_sizes[j] += 1;
    }
    Ok(Partition {
        cluster_of,
        cluster_sizes,
    })
}

/// Coordinatewise arithmetic mean of the selected points.
pub fn cluster_mean(data: &Dataset, subset: &[usize]) -> Result<Vec<f64>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut mean = vec![0.0; data.dim()];
    for &i in subset {
        for (m, x) in mean.iter_mut().zip(data.point(i)) {
            *m += x;
        }
    }
    let inv = 1.0 / subset.len() as f64;
    for m in mean.iter_mut() {
        *m *= inv;
    }
    Ok(mean)
}

/// Geometric median of the selected points.
///
/// For d = 1 this is the exact coordinate median (midpoint of the two middle
/// order statistics for even counts). Otherwise runs the Weiszfeld iteration
/// with the Vardi–Zhang correction for iterates that land on a data point,
/// stopping when the relative cost improvement drops below `tol`.
pub fn cluster_median(data: &Dataset, subset: &[usize], tol: f64) -> Result<Vec<f64>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParam("tol must be > 0".into()));
    }
    let d = data.dim();
    if d == 1 {
        let mut vals: Vec<f64> = subset.iter().map(|&i| data.point(i)[0]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = vals.len();
        let med = if n % 2 == 1 {
            vals[n / 2]
        } else {
            0.5 * (vals[n / 2 - 1] + vals[n / 2])
        };
        return Ok(vec![med]);
    }

    let pts: Vec<&[f64]> = subset.iter().map(|&i| data.point(i)).collect();
    let mut y = {
        let mut m = vec![0.0; d];
        for p in &pts {
            for (mi, xi) in m.iter_mut().zip(*p) {
                *mi += xi;
            }
        }
        let inv = 1.0 / pts.len() as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    };

    let cost_at = |y: &[f64]| -> f64 { pts.iter().map(|p| sq_dist(y, p).sqrt()).sum() };
    let mut prev_cost = cost_at(&y);
    const MAX_ITERS: usize = 10_000;
    for _ in 0..MAX_ITERS {
        // One Vardi–Zhang step: T(y) over points distinct from y, pulled
        // toward y proportionally to the multiplicity at y.
        let mut num = vec![0.0; d];
        let mut denom = 0.0;
        let mut r = vec![0.0; d];
        let mut at_y = 0usize;
        for p in &pts {
            let dist = sq_dist(&y, p).sqrt();
            if dist < 1e-300 {
                at_y += 1;
                continue;
            }
            let w = 1.0 / dist;
            denom += w;
            for i in 0..d {
                num[i] += p[i] * w;
                r[i] += (p[i] - y[i]) * w;
            }
        }
        if denom == 0.0 {
            // every point coincides with y
            break;
        }
        let r_norm = norm2(&r);
        if at_y > 0 && r_norm <= at_y as f64 {
            // y is a data point and already optimal
            break;
        }
        let t: Vec<f64> = num.iter().map(|v| v / denom).collect();
        let next: Vec<f64> = if at_y == 0 {
            t
        } else {
            let eta = (at_y as f64 / r_norm).min(1.0);
            t.iter()
                .zip(&y)
                .map(|(ti, yi)| (1.0 - eta) * ti + eta * yi)
                .collect()
        };
        let next_cost = cost_at(&next);
        let denom_cost = prev_cost.max(1e-300);
        let rel = (prev_cost - next_cost) / denom_cost;
        y = next;
        if rel.abs() < tol {
            prev_cost = next_cost;
            break;
        }
        prev_cost = next_cost;
    }
    let _ = prev_cost;
    Ok(y)
}

/// One full (non-private) Lloyd step: partition by nearest center, then
/// recenter every cluster at its mean (k-means) or geometric median
/// (k-median). Empty clusters keep their previous center.
pub fn lloyd_step(data: &Dataset, centers: &CenterSet, obj: CostObjective) -> Result<CenterSet> {
    check_dims(data, centers)?;
    let part = partition_by_nearest(data, centers)?;
    let mut out = centers.clone();
    for j in 0..centers.len() {
        let members = part.members(j);
        if members.is_empty() {
            continue;
        }
        let c = match obj {
            CostObjective::KMeans => cluster_mean(data, &members)?,
            CostObjective::KMedian => cluster_median(data, &members, 1e-10)?,
        };
        out.center_mut(j).copy_from_slice(&c);
    }
    out.set_provenance("lloyd-step");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech::stream_rng;
    use rand::Rng;

    fn ds(vals: &[f64]) -> Dataset {
        Dataset::from_1d(vals, 100.0).unwrap()
    }

    fn random_dataset(n: usize, d: usize, radius: f64, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, "geom-test");
        let mut flat = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            flat.push(rng.random_range(-radius / (d as f64).sqrt()..radius / (d as f64).sqrt()));
        }
        Dataset::from_flat(flat, d, radius).unwrap()
    }

    #[test]
    fn cost_symmetric_pair() {
        let data = ds(&[0.0, 2.0]);
        let c = CenterSet::from_1d(&[1.0], "t").unwrap();
        assert_eq!(cost(&data, &c, CostObjective::KMeans).unwrap(), 2.0);
        assert_eq!(cost(&data, &c, CostObjective::KMedian).unwrap(), 2.0);
    }

    #[test]
    fn cost_two_blobs() {
        // brute-force nearest per point: 0.25 * 4
        let data = ds(&[0.0, 1.0, 10.0, 11.0]);
        let c = CenterSet::from_1d(&[0.5, 10.5], "t").unwrap();
        assert!((cost(&data, &c, CostObjective::KMeans).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cost_dim_mismatch() {
        let data = ds(&[0.0, 2.0]);
        let c = CenterSet::new(vec![vec![1.0, 1.0]], 2, 1, "t").unwrap();
        assert!(matches!(
            cost(&data, &c, CostObjective::KMeans),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_dataset_costs_zero() {
        let data = Dataset::from_flat(Vec::new(), 1, 1.0).unwrap();
        let c = CenterSet::from_1d(&[0.5], "t").unwrap();
        assert_eq!(cost(&data, &c, CostObjective::KMeans).unwrap(), 0.0);
    }

    #[test]
    fn dataset_rejects_outside_points() {
        assert!(matches!(
            Dataset::from_1d(&[0.0, 3.0], 1.0),
            Err(Error::PointOutsideBall { .. })
        ));
    }

    #[test]
    fn partition_basic_and_tiebreak() {
        let data = ds(&[0.0, 1.0, 10.0, 11.0]);
        let b = CenterSet::from_1d(&[0.0, 10.0], "t").unwrap();
        let p = partition_by_nearest(&data, &b).unwrap();
        assert_eq!(p.cluster_of, vec![0, 0, 1, 1]);
        assert_eq!(p.cluster_sizes, vec![2, 2]);

        // equidistant point goes to the lowest index
        let data = ds(&[5.0]);
        let p = partition_by_nearest(&data, &b).unwrap();
        assert_eq!(p.cluster_of, vec![0]);
    }

    #[test]
    fn partition_respects_nearest_regardless_of_order() {
        let data = ds(&[0.0, 1.0, 10.0, 11.0]);
        let b = CenterSet::from_1d(&[11.0, 0.0], "t").unwrap();
        let p = partition_by_nearest(&data, &b).unwrap();
        assert_eq!(p.cluster_sizes, vec![2, 2]);
        assert_eq!(p.cluster_of, vec![1, 1, 0, 0]);
        // cluster-wise cost sums to the total cost
        let total = cost(&data, &b, CostObjective::KMeans).unwrap();
        let mut by_cluster = 0.0;
        for j in 0..2 {
            for i in p.members(j) {
                by_cluster += sq_dist(data.point(i), b.center(j));
            }
        }
        assert!((total - by_cluster).abs() < 1e-12);
    }

    #[test]
    fn mean_examples() {
        let data = ds(&[0.0, 2.0]);
        assert_eq!(cluster_mean(&data, &[0, 1]).unwrap(), vec![1.0]);
        let data2 = Dataset::new(
            vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]],
            2,
            10.0,
        )
        .unwrap();
        assert_eq!(cluster_mean(&data2, &[0, 1, 2]).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(
            cluster_mean(&data, &[]),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn mean_minimizes_one_means_cost() {
        // random-candidate oracle: the mean beats 1000 random candidates
        let data = random_dataset(50, 3, 10.0, 11);
        let idx: Vec<usize> = (0..50).collect();
        let mean = cluster_mean(&data, &idx).unwrap();
        let mean_cost: f64 = data.iter_points().map(|p| sq_dist(p, &mean)).sum();
        let mut rng = stream_rng(12, "candidates");
        for _ in 0..1000 {
            let cand: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let c: f64 = data.iter_points().map(|p| sq_dist(p, &cand)).sum();
            assert!(mean_cost <= c + 1e-9);
        }
    }

    #[test]
    fn median_1d_exact() {
        let data = ds(&[0.0, 1.0, 100.0]);
        assert_eq!(cluster_median(&data, &[0, 1, 2], 1e-10).unwrap(), vec![1.0]);
    }

    #[test]
    fn median_square_symmetry() {
        let data = Dataset::new(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
            ],
            2,
            10.0,
        )
        .unwrap();
        let m = cluster_median(&data, &[0, 1, 2, 3], 1e-12).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-6 && (m[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn median_beats_grid_oracle() {
        let data = random_dataset(30, 2, 1.0, 21);
        let idx: Vec<usize> = (0..30).collect();
        let tol = 1e-10;
        let med = cluster_median(&data, &idx, tol).unwrap();
        let med_cost: f64 = data.iter_points().map(|p| sq_dist(p, &med).sqrt()).sum();
        // 100x100 grid over the ball's bounding box
        let mut best = f64::INFINITY;
        for gx in 0..100 {
            for gy in 0..100 {
                let cand = [
                    -1.0 + 2.0 * (gx as f64 + 0.5) / 100.0,
                    -1.0 + 2.0 * (gy as f64 + 0.5) / 100.0,
                ];
                let c: f64 = data.iter_points().map(|p| sq_dist(p, &cand).sqrt()).sum();
                best = best.min(c);
            }
        }
        assert!(med_cost <= best + tol * data.radius() + 1e-6);
    }

    #[test]
    fn median_handles_iterate_on_data_point() {
        // collinear with the middle point being the median: the mean starting
        // point moves onto it
        let data = Dataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 0.0]],
            2,
            10.0,
        )
        .unwrap();
        let m = cluster_median(&data, &[0, 1, 2], 1e-12).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-6 && m[1].abs() < 1e-6);
    }

    #[test]
    fn lloyd_step_examples() {
        let data = ds(&[0.0, 1.0, 10.0, 11.0]);
        let b = CenterSet::from_1d(&[0.2, 10.8], "t").unwrap();
        let stepped = lloyd_step(&data, &b, CostObjective::KMeans).unwrap();
        assert_eq!(stepped.flat(), &[0.5, 10.5]);
        // fixed point
        let again = lloyd_step(&data, &stepped, CostObjective::KMeans).unwrap();
        assert_eq!(again.flat(), stepped.flat());
    }

    #[test]
    fn lloyd_step_never_increases_kmeans_cost() {
        for seed in 0..100u64 {
            let data = random_dataset(40, 2, 5.0, 1000 + seed);
            let mut rng = stream_rng(seed, "lloyd-centers");
            let centers = CenterSet::new(
                (0..3)
                    .map(|_| (0..2).map(|_| rng.random_range(-3.0..3.0)).collect())
                    .collect(),
                2,
                3,
                "t",
            )
            .unwrap();
            let before = cost(&data, &centers, CostObjective::KMeans).unwrap();
            let stepped = lloyd_step(&data, &centers, CostObjective::KMeans).unwrap();
            let after = cost(&data, &stepped, CostObjective::KMeans).unwrap();
            assert!(after <= before + 1e-9 * before.max(1.0));
        }
    }

    #[test]
    fn empty_cluster_keeps_center() {
        let data = ds(&[0.0, 1.0]);
        let b = CenterSet::from_1d(&[0.5, 50.0], "t").unwrap();
        let stepped = lloyd_step(&data, &b, CostObjective::KMeans).unwrap();
        assert_eq!(stepped.center(1), &[50.0]);
    }
}
