//! Cross-checks between the stability notions on instances small enough for
//! the exact partition oracle, plus the closeness-predicate guarantee.

use dpcluster_core::geometry::{
    brute_force_opt, cost, kmeanspp_lloyd, lloyd_step, sq_dist, CenterSet, CostObjective,
    Dataset,
};
use dpcluster_core::mech::stream_rng;
use dpcluster_core::stability::{
    center_deletion_stability, center_separation_stability, check_approx_center_stability,
    per_center_min_distances, separability_ratio, OptMode,
};
use rand::Rng;

/// Tiny two-blob instance with controllable gap; n <= 12 so the exact oracle
/// applies.
fn tiny_instance(seed: u64, gap: f64) -> Dataset {
    let mut rng = stream_rng(seed, "tiny-instance");
    let n_per = 4 + (seed % 3) as usize; // 4..6 per blob
    let mut flat = Vec::new();
    for i in 0..2 {
        let c = if i == 0 { -gap / 2.0 } else { gap / 2.0 };
        for _ in 0..n_per {
            flat.push(c + rng.random_range(-0.5..0.5));
            flat.push(rng.random_range(-0.5..0.5));
        }
    }
    Dataset::from_flat(flat, 2, gap + 2.0).unwrap()
}

#[test]
fn implication_chain_on_exact_instances() {
    for seed in 0..50u64 {
        let data = tiny_instance(seed, 14.0);
        for obj in [CostObjective::KMeans, CostObjective::KMedian] {
            let phi_p = separability_ratio(&data, 2, obj, OptMode::Exact).unwrap();
            let beta = center_deletion_stability(&data, 2, obj, OptMode::Exact).unwrap();
            let gamma = center_separation_stability(&data, 2, obj, OptMode::Exact).unwrap();
            // separated => beta-deletion with beta >= phi^{-p}
            assert!(
                beta >= 1.0 / phi_p - 1e-9 * (1.0 / phi_p),
                "seed {seed}: beta {beta} < 1/phi_p {}",
                1.0 / phi_p
            );
            // beta-deletion => (beta - 1)-separation
            assert!(
                gamma >= beta - 1.0 - 1e-9 * beta,
                "seed {seed}: gamma {gamma} < beta-1 {}",
                beta - 1.0
            );
            // for k-means the reassignment identity makes it an equality
            if obj == CostObjective::KMeans {
                assert!(
                    (gamma - (beta - 1.0)).abs() <= 1e-9 * beta,
                    "seed {seed}: gamma {gamma} vs beta-1 {}",
                    beta - 1.0
                );
            }
        }
    }
}

#[test]
fn exact_ratio_identity() {
    for seed in 0..50u64 {
        let data = tiny_instance(seed, 10.0);
        let (_, opt2) = brute_force_opt(&data, 2, CostObjective::KMeans).unwrap();
        let (_, opt1) = brute_force_opt(&data, 1, CostObjective::KMeans).unwrap();
        let ratio = separability_ratio(&data, 2, CostObjective::KMeans, OptMode::Exact).unwrap();
        assert!(
            (ratio * opt1 - opt2).abs() <= 1e-9 * opt2.max(1e-300),
            "seed {seed}"
        );
    }
}

#[test]
fn closeness_theorem_matching_holds_for_cheap_candidates() {
    // every candidate with cost <= alpha * OPT_{k-1} and
    // (alpha + phi^2)/(1 - phi^2) < 1/16 must match within the theorem radius
    let mut checked = 0usize;
    for seed in 0..40u64 {
        let data = tiny_instance(seed, 30.0);
        let (optimal, opt_k) = brute_force_opt(&data, 2, CostObjective::KMeans).unwrap();
        let (_, opt_km1) = brute_force_opt(&data, 1, CostObjective::KMeans).unwrap();
        let phi_sq = opt_k / opt_km1;

        // candidate menu: perturbed Lloyd outputs and perturbed optima
        let mut rng = stream_rng(seed, "candidates");
        let mut candidates: Vec<CenterSet> = Vec::new();
        for r in 0..6 {
            let c = kmeanspp_lloyd(&data, 2, CostObjective::KMeans, 1, seed * 31 + r).unwrap();
            candidates.push(lloyd_step(&data, &c, CostObjective::KMeans).unwrap());
        }
        for scale in [0.05, 0.3, 1.0] {
            let mut flat = optimal.flat().to_vec();
            for v in flat.iter_mut() {
                *v += rng.random_range(-scale..scale);
            }
            candidates.push(CenterSet::from_flat(flat, 2, 2, "perturbed").unwrap());
        }

        for cand in candidates {
            let c_cost = cost(&data, &cand, CostObjective::KMeans).unwrap();
            let alpha = c_cost / opt_km1;
            if (alpha + phi_sq) / (1.0 - phi_sq) >= 1.0 / 16.0 {
                continue; // outside the theorem's range
            }
            let res = check_approx_center_stability(
                &data,
                2,
                CostObjective::KMeans,
                &cand,
                f64::INFINITY,
                0.25,
                OptMode::Exact,
            )
            .unwrap();
            let matched = res
                .theorem_matched
                .unwrap_or_else(|| panic!("seed {seed}: no theorem matching (alpha {alpha})"));
            // verify the matched distances directly against the radii
            let d = per_center_min_distances(&optimal);
            let radius =
                |i: usize| 2.0 * ((alpha + phi_sq) / (1.0 - phi_sq)).sqrt() * d[i];
            for (i, &j) in matched.iter().enumerate() {
                let dist = sq_dist(optimal.center(i), cand.center(j)).sqrt();
                assert!(
                    dist <= radius(i) + 1e-9,
                    "seed {seed}: center {i} matched at {dist} > {}",
                    radius(i)
                );
            }
            checked += 1;
        }
    }
    assert!(checked >= 40, "only {checked} candidates exercised the theorem");
}

#[test]
fn sandwich_property_on_tiny_instances() {
    // with B near the optimal centers, the carve sets satisfy
    // X_cor ⊆ X̂ ⊆ X* (computed by direct set membership)
    for seed in 0..30u64 {
        let data = tiny_instance(seed, 40.0);
        let (optimal, opt_k) = brute_force_opt(&data, 2, CostObjective::KMeans).unwrap();
        let (_, opt_km1) = brute_force_opt(&data, 1, CostObjective::KMeans).unwrap();
        let phi_sq = opt_k / opt_km1;
        let rho = 100.0 * phi_sq / (1.0 - phi_sq);
        if rho >= 1.0 {
            continue; // instance not separated enough for the carve analysis
        }
        let d = per_center_min_distances(&optimal);

        // B = optimal centers nudged by a small fraction of D_i
        let mut rng = stream_rng(seed, "nudge");
        let mut b_flat = optimal.flat().to_vec();
        for (i, chunk) in b_flat.chunks_mut(2).enumerate() {
            for v in chunk.iter_mut() {
                *v += rng.random_range(-0.01..0.01) * d[i];
            }
        }
        let b = CenterSet::from_flat(b_flat, 2, 2, "nudged").unwrap();

        let (d_hats, carved) = dpcluster_core::stable_kmeans::carve_sets(&data, &b);
        for i in 0..2 {
            // optimal cluster and its concentrated core
            let members: Vec<usize> = (0..data.n())
                .filter(|&idx| {
                    let p = data.point(idx);
                    let di = sq_dist(p, optimal.center(i)).sqrt();
                    let dj = sq_dist(p, optimal.center(1 - i)).sqrt();
                    di < dj || (di == dj && i == 0)
                })
                .collect();
            let r_i = (members
                .iter()
                .map(|&idx| sq_dist(data.point(idx), optimal.center(i)))
                .sum::<f64>()
                / members.len() as f64)
                .sqrt();
            let core: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&idx| {
                    sq_dist(data.point(idx), optimal.center(i)).sqrt() <= r_i / rho.sqrt()
                })
                .collect();
            let carved_set: std::collections::HashSet<usize> =
                carved[i].iter().copied().collect();
            for idx in &core {
                assert!(
                    carved_set.contains(idx),
                    "seed {seed}: core point {idx} not carved (d_hat {})",
                    d_hats[i]
                );
            }
            let member_set: std::collections::HashSet<usize> =
                members.iter().copied().collect();
            for idx in &carved_set {
                assert!(
                    member_set.contains(idx),
                    "seed {seed}: carved point {idx} outside the optimal cluster"
                );
            }
        }
    }
}

#[test]
fn sandwich_property_on_large_heuristic_instance() {
    use dpcluster_core::bench::{generate_instance, InstanceSpec};
    use dpcluster_core::geometry::partition_by_nearest;

    let mut spec = InstanceSpec::blobs(3, 2, 3000, 0.01, 77);
    spec.report_restarts = 10;
    let inst = generate_instance(&spec, CostObjective::KMeans).unwrap();
    let heuristic =
        kmeanspp_lloyd(&inst.data, 3, CostObjective::KMeans, 10, 123).unwrap();
    let phi_sq = inst.report.phi_p;
    let rho = 100.0 * phi_sq / (1.0 - phi_sq);
    assert!(rho < 1.0, "instance not separated enough: rho {rho}");
    let d = per_center_min_distances(&heuristic);

    let mut rng = stream_rng(77, "nudge-large");
    let mut b_flat = heuristic.flat().to_vec();
    for (i, chunk) in b_flat.chunks_mut(2).enumerate() {
        for v in chunk.iter_mut() {
            *v += rng.random_range(-0.01..0.01) * d[i];
        }
    }
    let b = CenterSet::from_flat(b_flat, 2, 3, "nudged").unwrap();
    let (_, carved) = dpcluster_core::stable_kmeans::carve_sets(&inst.data, &b);
    let part = partition_by_nearest(&inst.data, &heuristic).unwrap();

    for i in 0..3 {
        let members = part.members(i);
        let r_i = (members
            .iter()
            .map(|&idx| sq_dist(inst.data.point(idx), heuristic.center(i)))
            .sum::<f64>()
            / members.len() as f64)
            .sqrt();
        let core: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&idx| {
                sq_dist(inst.data.point(idx), heuristic.center(i)).sqrt() <= r_i / rho.sqrt()
            })
            .collect();
        let carved_set: std::collections::HashSet<usize> = carved[i].iter().copied().collect();
        let member_set: std::collections::HashSet<usize> = members.iter().copied().collect();
        for idx in &core {
            assert!(carved_set.contains(idx), "core point {idx} not carved");
        }
        for idx in &carved_set {
            assert!(member_set.contains(idx), "carved point {idx} crossed clusters");
        }
    }
}
