//! Synthetic instance generation, the lemma-verification suite, and the
//! experiment orchestrator that runs the four pipelines over seeds and emits
//! machine-readable result tables.

use crate::error::{Error, Result};
use crate::geometry::{
    clamp_to_ball, cluster_mean, cluster_median, cost, kmeanspp_lloyd, sq_dist,
    write_dataset_csv, CenterSet, CostObjective, Dataset,
};
use crate::local::{ldp_stable_kmeans, GridLdpBaseline};
use crate::mech::{stream_rng, PrivacyParams, RngSeed};
use crate::sample_aggregate::{sample_aggregate_kmeans, SampleAggregateConfig};
use crate::stability::{stability_report, OptMode, StabilityReport};
use crate::stable_kmeans::{private_stable_kmeans, GridBaseline, PrivateKMeansConfig};
use crate::stable_kmedian::{private_stable_kmedian, PrivateKMedianConfig};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// How blob centers are placed inside the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// scaled regular simplex when d >= k, otherwise evenly spaced on a
    /// circle (d >= 2) or segment (d = 1); `scale` is the vertex norm as a
    /// fraction of Λ
    SimplexScaled { scale: f64 },
    /// rejection-sampled uniform centers with pairwise separation >= min_sep
    RandomMinSep { min_sep: f64, scale: f64 },
}

/// Generator settings for one synthetic mixture instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub radius: f64,
    /// cluster weights; empty means uniform
    pub weights: Vec<f64>,
    pub placement: Placement,
    pub sigma: f64,
    pub seed: u64,
    /// reject-and-resample until the realized OPT_k/OPT_{k-1} is below this
    pub phi_p_max: Option<f64>,
    /// restarts for the recorded stability report
    pub report_restarts: usize,
}

impl InstanceSpec {
    pub fn blobs(k: usize, d: usize, n: usize, sigma: f64, seed: u64) -> Self {
        InstanceSpec {
            k,
            d,
            n,
            radius: 1.0,
            weights: Vec::new(),
            placement: Placement::SimplexScaled { scale: 0.9 },
            sigma,
            seed,
            phi_p_max: None,
            report_restarts: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedInstance {
    pub data: Dataset,
    /// realized per-cluster means (k-means) or medians (k-median)
    pub oracle: CenterSet,
    pub report: StabilityReport,
    /// the generating cluster of each point
    pub assignment: Vec<usize>,
}

fn place_centers(spec: &InstanceSpec, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let k = spec.k;
    let d = spec.d;
    let lam = spec.radius;
    match &spec.placement {
        Placement::SimplexScaled { scale } => {
            let r = scale * lam;
            if d >= k {
                // basis vectors minus their centroid span a regular simplex
                let mut centers = vec![vec![0.0; d]; k];
                for (i, c) in centers.iter_mut().enumerate() {
                    for (j, v) in c.iter_mut().enumerate().take(k) {
                        *v = if i == j { 1.0 } else { 0.0 } - 1.0 / k as f64;
                    }
                    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                    for v in c.iter_mut() {
                        *v *= r / norm;
                    }
                }
                Ok(centers)
            } else if d >= 2 {
                Ok((0..k)
                    .map(|i| {
                        let ang = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                        let mut c = vec![0.0; d];
                        c[0] = r * ang.cos();
                        c[1] = r * ang.sin();
                        c
                    })
                    .collect())
            } else {
                Ok((0..k)
                    .map(|i| {
                        let x = if k == 1 {
                            0.0
                        } else {
                            -r + 2.0 * r * i as f64 / (k - 1) as f64
                        };
                        vec![x]
                    })
                    .collect())
            }
        }
        Placement::RandomMinSep { min_sep, scale } => {
            let r = scale * lam;
            for _ in 0..10_000 {
                let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
                for _ in 0..k {
                    let mut c: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
                    clamp_to_ball(&mut c, r);
                    centers.push(c);
                }
                let ok = (0..k).all(|i| {
                    (0..i).all(|j| sq_dist(&centers[i], &centers[j]).sqrt() >= *min_sep)
                });
                if ok {
                    return Ok(centers);
                }
            }
            Err(Error::Degenerate(
                "could not place centers at the requested separation".into(),
            ))
        }
    }
}

/// Generates a mixture of spherical blobs clipped into the ball, the realized
/// per-cluster oracle centers, and a stability report. Re-samples with a
/// bumped seed while the realized φ^p exceeds `phi_p_max`.
pub fn generate_instance(
    spec: &InstanceSpec,
    obj: CostObjective,
) -> Result<GeneratedInstance> {
    if spec.k == 0 || spec.d == 0 || spec.n == 0 {
        return Err(Error::InvalidParam("k, d, n must all be >= 1".into()));
    }
    let mut attempt_seed = spec.seed;
    for _attempt in 0..20 {
        let inst = generate_once(spec, obj, attempt_seed)?;
        match spec.phi_p_max {
            Some(bound) if !(inst.report.phi_p <= bound) => {
                attempt_seed = attempt_seed.wrapping_add(0x9e3779b97f4a7c15);
            }
            _ => return Ok(inst),
        }
    }
    Err(Error::Degenerate(format!(
        "realized separation never reached phi_p_max = {:?}",
        spec.phi_p_max
    )))
}

fn generate_once(
    spec: &InstanceSpec,
    obj: CostObjective,
    seed: u64,
) -> Result<GeneratedInstance> {
    let mut rng = stream_rng(seed, "instance-gen");
    let centers = place_centers(spec, &mut rng)?;
    let weights = if spec.weights.is_empty() {
        vec![1.0 / spec.k as f64; spec.k]
    } else {
        if spec.weights.len() != spec.k {
            return Err(Error::InvalidParam("weights length must equal k".into()));
        }
        let total: f64 = spec.weights.iter().sum();
        spec.weights.iter().map(|w| w / total).collect()
    };
    // largest-remainder apportionment of n points
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| (w * spec.n as f64).floor() as usize)
        .collect();
    let mut rem: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (w * spec.n as f64 - counts[i] as f64, i))
        .collect();
    rem.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut leftover = spec.n - counts.iter().sum::<usize>();
    for (_, i) in rem {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }

    let normal = Normal::new(0.0, spec.sigma.max(0.0)).map_err(|e| {
        Error::InvalidParam(format!("bad sigma: {e}"))
    })?;
    let mut flat = Vec::with_capacity(spec.n * spec.d);
    let mut assignment = Vec::with_capacity(spec.n);
    for (ci, &cnt) in counts.iter().enumerate() {
        for _ in 0..cnt {
            let mut p: Vec<f64> = centers[ci]
                .iter()
                .map(|c| c + if spec.sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 })
                .collect();
            clamp_to_ball(&mut p, spec.radius);
            flat.extend_from_slice(&p);
            assignment.push(ci);
        }
    }
    let data = Dataset::from_flat(flat, spec.d, spec.radius)?;

    // realized oracle centers from the generating assignment
    let mut oracle_flat = Vec::with_capacity(spec.k * spec.d);
    for ci in 0..spec.k {
        let members: Vec<usize> = (0..spec.n).filter(|&i| assignment[i] == ci).collect();
        let c = if members.is_empty() {
            centers[ci].clone()
        } else {
            match obj {
                CostObjective::KMeans => cluster_mean(&data, &members)?,
                CostObjective::KMedian => cluster_median(&data, &members, 1e-10)?,
            }
        };
        oracle_flat.extend_from_slice(&c);
    }
    let oracle = CenterSet::from_flat(oracle_flat, spec.d, spec.k, "realized-oracle")?;

    let mode = if spec.k >= 2 {
        OptMode::Auto {
            restarts: spec.report_restarts,
            seed: seed ^ 0x5eed,
        }
    } else {
        OptMode::Exact
    };
    let report = if spec.k >= 2 {
        stability_report(&data, spec.k, obj, mode)?
    } else {
        StabilityReport {
            phi_p: f64::NAN,
            beta_deletion: f64::NAN,
            gamma_separation: f64::NAN,
            per_center_d: vec![f64::INFINITY],
            method: crate::stability::OptMethod::Heuristic,
            degenerate: false,
            opt_k: cost(&data, &oracle, obj)?,
            opt_k_minus_1: f64::NAN,
        }
    };
    Ok(GeneratedInstance {
        data,
        oracle,
        report,
        assignment,
    })
}

// ---------------------------------------------------------------------------
// lemma suite
// ---------------------------------------------------------------------------

/// Pass counts for the five identity/inequality checks run on random
/// instances at 1e-9 relative tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub instances: usize,
    pub shift_identity_pass: usize,
    pub pairwise_identity_pass: usize,
    pub subset_mean_pass: usize,
    pub markov_radius_pass: usize,
    pub sum_of_squares_pass: usize,
    pub worst_rel_err: f64,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.shift_identity_pass == self.instances
            && self.pairwise_identity_pass == self.instances
            && self.subset_mean_pass == self.instances
            && self.markov_radius_pass == self.instances
            && self.sum_of_squares_pass == self.instances
    }

    pub fn lines(&self) -> Vec<String> {
        let f = |name: &str, pass: usize| {
            format!(
                "{}: {}/{} {}",
                name,
                pass,
                self.instances,
                if pass == self.instances { "PASS" } else { "FAIL" }
            )
        };
        vec![
            f("shift-identity (1-means cost vs center offset)", self.shift_identity_pass),
            f("pairwise-identity (pair sums vs centered sums)", self.pairwise_identity_pass),
            f("subset-mean bound", self.subset_mean_pass),
            f("markov radius bound", self.markov_radius_pass),
            f("sum-of-squares bound", self.sum_of_squares_pass),
        ]
    }
}

const LEMMA_REL_TOL: f64 = 1e-9;

/// Runs the five checks on `instances` random datasets with n <= 200 and
/// d <= 8.
pub fn verify_lemmas(instances: usize, seed: u64) -> LemmaReport {
    let mut rep = LemmaReport {
        instances,
        shift_identity_pass: 0,
        pairwise_identity_pass: 0,
        subset_mean_pass: 0,
        markov_radius_pass: 0,
        sum_of_squares_pass: 0,
        worst_rel_err: 0.0,
    };
    for i in 0..instances {
        let mut rng = stream_rng(seed, &format!("lemma-{i}"));
        let n = rng.random_range(2..=200usize);
        let d = rng.random_range(1..=8usize);
        let scale = rng.random_range(0.1..10.0f64);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
            .collect();
        let c_hat: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();

        let mean = {
            let mut m = vec![0.0; d];
            for p in &pts {
                for (mi, x) in m.iter_mut().zip(p) {
                    *mi += x;
                }
            }
            m.iter_mut().for_each(|v| *v /= n as f64);
            m
        };
        let centered: f64 = pts.iter().map(|p| sq_dist(p, &mean)).sum();

        // Σ ||x - ĉ||² = n ||ĉ - c||² + Σ ||x - c||²
        let lhs: f64 = pts.iter().map(|p| sq_dist(p, &c_hat)).sum();
        let rhs = n as f64 * sq_dist(&c_hat, &mean) + centered;
        let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        rep.worst_rel_err = rep.worst_rel_err.max(rel);
        if rel <= LEMMA_REL_TOL {
            rep.shift_identity_pass += 1;
        }

        // Σ_{pairs} ||x1 - x2||² = n Σ ||x - c||²  (brute-force pair sum)
        let mut pair_sum = 0.0;
        for a in 0..n {
            for b in (a + 1)..n {
                pair_sum += sq_dist(&pts[a], &pts[b]);
            }
        }
        let rhs2 = n as f64 * centered;
        let rel2 = (pair_sum - rhs2).abs() / pair_sum.abs().max(rhs2.abs()).max(1e-300);
        rep.worst_rel_err = rep.worst_rel_err.max(rel2);
        if rel2 <= LEMMA_REL_TOL {
            rep.pairwise_identity_pass += 1;
        }

        // random nonempty subset: ||mean(S) - mean(X)||² <= OPT1/|X| * |X\S|/|S|
        let mut subset: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
        if subset.is_empty() {
            subset.push(rng.random_range(0..n));
        }
        let s_mean = {
            let mut m = vec![0.0; d];
            for &idx in &subset {
                for (mi, x) in m.iter_mut().zip(&pts[idx]) {
                    *mi += x;
                }
            }
            m.iter_mut().for_each(|v| *v /= subset.len() as f64);
            m
        };
        let lhs3 = sq_dist(&s_mean, &mean);
        let bound3 = centered / n as f64 * ((n - subset.len()) as f64 / subset.len() as f64);
        if lhs3 <= bound3 + 1e-9 {
            rep.subset_mean_pass += 1;
        }

        // markov: |{x : ||x - μ|| >= r/a}| <= a² n for every a in {0.1..1.0}
        let r = (centered / n as f64).sqrt();
        let mut markov_ok = r > 0.0;
        if markov_ok {
            for step in 1..=10 {
                let a = step as f64 / 10.0;
                let far = pts
                    .iter()
                    .filter(|p| sq_dist(p, &mean).sqrt() >= r / a)
                    .count();
                if far as f64 > a * a * n as f64 * (1.0 + LEMMA_REL_TOL) + LEMMA_REL_TOL {
                    markov_ok = false;
                    break;
                }
            }
        }
        if markov_ok {
            rep.markov_radius_pass += 1;
        }

        // ||x + y||² <= 2(||x||² + ||y||²)
        let x = &pts[0];
        let y = &pts[n - 1];
        let sum_sq: f64 = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum();
        let bound4 = 2.0
            * (x.iter().map(|v| v * v).sum::<f64>() + y.iter().map(|v| v * v).sum::<f64>());
        if sum_sq <= bound4 * (1.0 + LEMMA_REL_TOL) {
            rep.sum_of_squares_pass += 1;
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// experiment suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    CentralKmeans,
    CentralKmedian,
    LdpKmeans,
    SampleAggregate,
}

impl PipelineKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "central-kmeans" => Some(PipelineKind::CentralKmeans),
            "central-kmedian" => Some(PipelineKind::CentralKmedian),
            "ldp-kmeans" => Some(PipelineKind::LdpKmeans),
            "sample-aggregate" => Some(PipelineKind::SampleAggregate),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::CentralKmeans => "central-kmeans",
            PipelineKind::CentralKmedian => "central-kmedian",
            PipelineKind::LdpKmeans => "ldp-kmeans",
            PipelineKind::SampleAggregate => "sample-aggregate",
        }
    }

    pub fn objective(self) -> CostObjective {
        match self {
            PipelineKind::CentralKmedian => CostObjective::KMedian,
            _ => CostObjective::KMeans,
        }
    }
}

/// Optional pass thresholds; when present the suite's exit status reflects
/// them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    /// multiplicative slack coefficient on φ^p
    pub mult_coeff: Option<f64>,
    /// additive slack coefficient on the per-pipeline noise term
    pub add_coeff: Option<f64>,
    /// upper bound on the matching distance to the oracle centers
    pub wasserstein_max: Option<f64>,
    /// fraction of trials that must pass
    pub min_pass_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            mult_coeff: None,
            add_coeff: None,
            wasserstein_max: None,
            min_pass_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub instance: InstanceSpec,
    pub pipelines: Vec<PipelineKind>,
    pub trials: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub final_noisy_lloyd: bool,
    pub oracle_restarts: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// sample-aggregate subsample count (m = n/(2T))
    pub sa_t: usize,
    pub thresholds: Thresholds,
}

impl SuiteConfig {
    pub fn new(instance: InstanceSpec, out_dir: &Path) -> Self {
        SuiteConfig {
            instance,
            pipelines: vec![PipelineKind::CentralKmeans],
            trials: 10,
            epsilon: 1.0,
            delta: 1e-5,
            beta: 0.05,
            final_noisy_lloyd: false,
            oracle_restarts: 50,
            master_seed: 1,
            out_dir: out_dir.to_path_buf(),
            sa_t: 0,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub pipeline: String,
    pub trial: u64,
    pub exact_cost: f64,
    pub opt_est: f64,
    pub cost_ratio: f64,
    pub additive_residual: f64,
    pub wasserstein: f64,
    pub eps_total: f64,
    pub delta_total: f64,
    pub oracle_label: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteResult {
    pub rows: Vec<TrialRow>,
    pub summary: serde_json::Value,
    pub all_pass: bool,
    pub csv: String,
}

/// The additive noise-term shape a pipeline is held to, in the bound
/// cost <= (1 + mult·φ^p)·OPT_est + add·shape.
pub fn additive_shape(
    kind: PipelineKind,
    k: usize,
    d: usize,
    n: usize,
    lambda: f64,
    epsilon: f64,
    delta: f64,
    beta: f64,
) -> f64 {
    let kf = k as f64;
    let df = d as f64;
    match kind {
        PipelineKind::CentralKmeans | PipelineKind::SampleAggregate => {
            kf * lambda * lambda * df.sqrt() * (df * kf / (beta * delta)).ln() / epsilon
        }
        PipelineKind::LdpKmeans => {
            kf * lambda
                * lambda
                * (df * n as f64).sqrt()
                * (df * kf / (beta * delta)).ln()
                / epsilon
        }
        PipelineKind::CentralKmedian => {
            let l = (n as f64 / (beta * delta)).ln();
            kf * lambda * df.sqrt() * l * l / epsilon
        }
    }
}

/// Runs every requested pipeline over the trial seeds and writes
/// `results.csv`, `summary.json`, and `instance.csv` to the output
/// directory. Deterministic: identical configs produce byte-identical CSVs.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResult> {
    let pp = PrivacyParams::new(cfg.epsilon, cfg.delta)?;
    let mut rows: Vec<TrialRow> = Vec::new();
    let mut per_pipeline_summary = serde_json::Map::new();
    let mut all_pass = true;
    let suite_started = std::time::Instant::now();

    let mut instance_for_csv: Option<GeneratedInstance> = None;
    for &kind in &cfg.pipelines {
        let obj = kind.objective();
        let inst = generate_instance(&cfg.instance, obj)?;
        let opt_est_centers = kmeanspp_lloyd(
            &inst.data,
            cfg.instance.k,
            obj,
            cfg.oracle_restarts,
            cfg.master_seed ^ 0x0c0ffee,
        )?;
        let opt_est = cost(&inst.data, &opt_est_centers, obj)?;
        let phi_p = inst.report.phi_p;
        let add_shape = additive_shape(
            kind,
            cfg.instance.k,
            cfg.instance.d,
            cfg.instance.n,
            cfg.instance.radius,
            cfg.epsilon,
            cfg.delta,
            cfg.beta,
        );
        let bound = match (cfg.thresholds.mult_coeff, cfg.thresholds.add_coeff) {
            (Some(m), Some(a)) => Some((1.0 + m * phi_p) * opt_est + a * add_shape),
            _ => None,
        };

        let trial_results: Vec<(TrialRow, f64)> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let started = std::time::Instant::now();
                let row = run_one_trial(
                    kind, cfg, &inst, pp, trial, opt_est, bound,
                )
                .unwrap_or_else(|e| TrialRow {
                    pipeline: kind.name().to_string(),
                    trial,
                    exact_cost: f64::NAN,
                    opt_est,
                    cost_ratio: f64::NAN,
                    additive_residual: f64::NAN,
                    wasserstein: f64::NAN,
                    eps_total: f64::NAN,
                    delta_total: f64::NAN,
                    oracle_label: format!("error: {e}"),
                    pass: false,
                });
                (row, started.elapsed().as_secs_f64() * 1e3)
            })
            .collect();

        let passes = trial_results.iter().filter(|(r, _)| r.pass).count();
        let frac = if cfg.trials > 0 {
            passes as f64 / cfg.trials as f64
        } else {
            1.0
        };
        let pipeline_pass = bound.is_none() && cfg.thresholds.wasserstein_max.is_none()
            || frac >= cfg.thresholds.min_pass_fraction;
        all_pass &= pipeline_pass;
        let runtimes: Vec<f64> = trial_results.iter().map(|(_, t)| *t).collect();
        per_pipeline_summary.insert(
            kind.name().to_string(),
            serde_json::json!({
                "trials": cfg.trials,
                "passes": passes,
                "pass_fraction": frac,
                "pipeline_pass": pipeline_pass,
                "opt_est": opt_est,
                "phi_p": phi_p,
                "bound": bound,
                "mean_runtime_ms": runtimes.iter().sum::<f64>() / runtimes.len().max(1) as f64,
            }),
        );
        rows.extend(trial_results.into_iter().map(|(r, _)| r));
        if instance_for_csv.is_none() {
            instance_for_csv = Some(inst);
        }
    }

    // deterministic CSV
    let mut csv = String::from(
        "pipeline,trial,exact_cost,opt_est,cost_ratio,additive_residual,wasserstein,eps_total,delta_total,oracle_label,pass\n",
    );
    for r in &rows {
        writeln!(
            &mut csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.pipeline,
            r.trial,
            r.exact_cost,
            r.opt_est,
            r.cost_ratio,
            r.additive_residual,
            r.wasserstein,
            r.eps_total,
            r.delta_total,
            r.oracle_label,
            r.pass
        )
        .expect("string write");
    }

    let summary = serde_json::json!({
        "pipelines": per_pipeline_summary,
        "all_pass": all_pass,
        "total_runtime_ms": suite_started.elapsed().as_secs_f64() * 1e3,
        "config": cfg,
    });

    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("results.csv"), csv.as_bytes())?;
    std::fs::write(
        cfg.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    if let Some(inst) = &instance_for_csv {
        let mut f = std::fs::File::create(cfg.out_dir.join("instance.csv"))?;
        write_dataset_csv(&mut f, &inst.data)?;
    }

    Ok(SuiteResult {
        rows,
        summary,
        all_pass,
        csv,
    })
}

fn run_one_trial(
    kind: PipelineKind,
    cfg: &SuiteConfig,
    inst: &GeneratedInstance,
    pp: PrivacyParams,
    trial: u64,
    opt_est: f64,
    bound: Option<f64>,
) -> Result<TrialRow> {
    let k = cfg.instance.k;
    let seed = RngSeed::new(
        cfg.master_seed.wrapping_add(trial),
        &format!("{}-trial-{trial}", kind.name()),
    );
    let obj = kind.objective();
    let (centers, eps_total, delta_total) = match kind {
        PipelineKind::CentralKmeans => {
            let mut pcfg = PrivateKMeansConfig::new(pp, cfg.beta);
            pcfg.do_final_noisy_lloyd = cfg.final_noisy_lloyd;
            let out =
                private_stable_kmeans(&inst.data, k, &pcfg, &GridBaseline::kmeans(), &seed)?;
            let t = out.ledger.compose_simple();
            (out.final_centers, t.epsilon, t.delta)
        }
        PipelineKind::CentralKmedian => {
            let pcfg = PrivateKMedianConfig::new(pp, cfg.beta);
            let out =
                private_stable_kmedian(&inst.data, k, &pcfg, &GridBaseline::kmedian(), &seed)?;
            let t = out.ledger.compose_simple();
            (out.final_centers, t.epsilon, t.delta)
        }
        PipelineKind::LdpKmeans => {
            let out = ldp_stable_kmeans(
                &inst.data,
                k,
                pp,
                cfg.beta,
                &GridLdpBaseline,
                &seed,
                None,
            )?;
            let t = out.ledger.compose_simple();
            (out.final_centers, t.epsilon, t.delta)
        }
        PipelineKind::SampleAggregate => {
            let t_subsamples = if cfg.sa_t > 0 {
                cfg.sa_t
            } else {
                (cfg.instance.n / 40).max(1)
            };
            let sa_cfg = SampleAggregateConfig::for_dataset(&inst.data, t_subsamples, pp, cfg.beta);
            let out = sample_aggregate_kmeans(&inst.data, k, &sa_cfg, &seed)?;
            let t = out.ledger.compose_simple();
            (out.output, t.epsilon, t.delta)
        }
    };

    let exact_cost = cost(&inst.data, &centers, obj)?;
    let wasserstein = crate::geometry::wasserstein(&centers, &inst.oracle).unwrap_or(f64::NAN);
    let mut pass = true;
    if let Some(b) = bound {
        pass &= exact_cost <= b;
    }
    if let Some(wmax) = cfg.thresholds.wasserstein_max {
        pass &= wasserstein <= wmax;
    }
    Ok(TrialRow {
        pipeline: kind.name().to_string(),
        trial,
        exact_cost,
        opt_est,
        cost_ratio: exact_cost / opt_est.max(f64::MIN_POSITIVE),
        additive_residual: exact_cost - opt_est,
        wasserstein,
        eps_total,
        delta_total,
        oracle_label: format!("best-of-{}-lloyd", cfg.oracle_restarts),
        pass,
    })
}

// ---------------------------------------------------------------------------
// config file
// ---------------------------------------------------------------------------

/// Parses the flat `key = value` suite configuration (full grammar in the
/// README). Unknown keys and malformed values report their line number.
pub fn parse_suite_config(text: &str, default_out: &Path) -> Result<SuiteConfig> {
    let mut cfg = SuiteConfig::new(InstanceSpec::blobs(2, 2, 1000, 0.05, 1), default_out);
    let mut placement = String::from("simplex");
    let mut placement_scale = 0.9f64;
    let mut min_separation = 0.5f64;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Config {
            line: lineno + 1,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |msg: String| Error::Config {
            line: lineno + 1,
            msg,
        };
        let parse_f64 =
            |v: &str| -> Result<f64> { v.parse().map_err(|_| bad(format!("bad number {v:?}"))) };
        let parse_usize =
            |v: &str| -> Result<usize> { v.parse().map_err(|_| bad(format!("bad integer {v:?}"))) };
        let parse_u64 =
            |v: &str| -> Result<u64> { v.parse().map_err(|_| bad(format!("bad integer {v:?}"))) };
        let parse_bool =
            |v: &str| -> Result<bool> { v.parse().map_err(|_| bad(format!("bad bool {v:?}"))) };
        match key {
            "k" => cfg.instance.k = parse_usize(value)?,
            "d" => cfg.instance.d = parse_usize(value)?,
            "n" => cfg.instance.n = parse_usize(value)?,
            "radius" => cfg.instance.radius = parse_f64(value)?,
            "sigma" => cfg.instance.sigma = parse_f64(value)?,
            "weights" => {
                cfg.instance.weights = value
                    .split(',')
                    .map(|t| parse_f64(t.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "placement" => placement = value.to_string(),
            "placement_scale" => placement_scale = parse_f64(value)?,
            "min_separation" => min_separation = parse_f64(value)?,
            "instance_seed" => cfg.instance.seed = parse_u64(value)?,
            "phi_p_max" => cfg.instance.phi_p_max = Some(parse_f64(value)?),
            "report_restarts" => cfg.instance.report_restarts = parse_usize(value)?,
            "pipelines" => {
                cfg.pipelines = value
                    .split(',')
                    .map(|t| t.trim())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        PipelineKind::parse(t).ok_or(bad(format!("unknown pipeline {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            "trials" => cfg.trials = parse_usize(value)?,
            "epsilon" => cfg.epsilon = parse_f64(value)?,
            "delta" => cfg.delta = parse_f64(value)?,
            "beta" => cfg.beta = parse_f64(value)?,
            "final_noisy_lloyd" => cfg.final_noisy_lloyd = parse_bool(value)?,
            "oracle_restarts" => cfg.oracle_restarts = parse_usize(value)?,
            "master_seed" => cfg.master_seed = parse_u64(value)?,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "sa_t" => cfg.sa_t = parse_usize(value)?,
            "pass_mult" => cfg.thresholds.mult_coeff = Some(parse_f64(value)?),
            "pass_add" => cfg.thresholds.add_coeff = Some(parse_f64(value)?),
            "pass_wasserstein" => cfg.thresholds.wasserstein_max = Some(parse_f64(value)?),
            "pass_fraction" => cfg.thresholds.min_pass_fraction = parse_f64(value)?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    cfg.instance.placement = match placement.as_str() {
        "simplex" => Placement::SimplexScaled {
            scale: placement_scale,
        },
        "random" => Placement::RandomMinSep {
            min_sep: min_separation,
            scale: placement_scale,
        },
        other => {
            return Err(Error::Config {
                line: 0,
                msg: format!("unknown placement {other:?} (simplex | random)"),
            })
        }
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_instance_has_zero_cost() {
        let mut spec = InstanceSpec::blobs(2, 2, 100, 0.0, 7);
        spec.report_restarts = 5;
        let inst = generate_instance(&spec, CostObjective::KMeans).unwrap();
        assert!(inst.report.phi_p.abs() < 1e-15);
        let c = cost(&inst.data, &inst.oracle, CostObjective::KMeans).unwrap();
        assert!(c < 1e-18);
    }

    #[test]
    fn two_blob_phi_matches_moment_estimate() {
        // k=2, d=1, centers ±0.5, σ=0.01: φ² ≈ within-variance / 1-means cost
        let mut spec = InstanceSpec::blobs(2, 1, 10_000, 0.01, 11);
        spec.placement = Placement::SimplexScaled { scale: 0.5 };
        spec.report_restarts = 10;
        let inst = generate_instance(&spec, CostObjective::KMeans).unwrap();
        let phi = inst.report.phi_p;
        let expect = 4e-4; // σ²/(0.25 + σ²)
        assert!(
            phi > expect * 0.5 && phi < expect * 1.5,
            "phi {phi} vs {expect}"
        );
    }

    #[test]
    fn seed_determinism() {
        let spec = InstanceSpec::blobs(3, 2, 500, 0.05, 3);
        let a = generate_instance(&spec, CostObjective::KMeans).unwrap();
        let b = generate_instance(&spec, CostObjective::KMeans).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.oracle.flat(), b.oracle.flat());
    }

    #[test]
    fn rejection_resampling_bounds_phi() {
        let mut spec = InstanceSpec::blobs(2, 2, 400, 0.02, 5);
        spec.phi_p_max = Some(0.01);
        let inst = generate_instance(&spec, CostObjective::KMeans).unwrap();
        assert!(inst.report.phi_p <= 0.01);
    }

    #[test]
    fn lemma_suite_small_run_passes() {
        let rep = verify_lemmas(50, 123);
        assert!(rep.all_pass(), "{:?}", rep);
    }

    #[test]
    fn empty_pipeline_list_runs_clean() {
        let dir = std::env::temp_dir().join("dpcluster-bench-test-empty");
        let mut cfg = SuiteConfig::new(InstanceSpec::blobs(2, 2, 50, 0.02, 1), &dir);
        cfg.pipelines.clear();
        let res = run_suite(&cfg).unwrap();
        assert!(res.all_pass);
        assert!(res.rows.is_empty());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn config_parsing_and_errors() {
        let text = "\
# instance
k = 3
n = 500
sigma = 0.02
pipelines = central-kmeans, ldp-kmeans
trials = 7
epsilon = 0.5
pass_mult = 50
";
        let cfg = parse_suite_config(text, Path::new("out")).unwrap();
        assert_eq!(cfg.instance.k, 3);
        assert_eq!(cfg.trials, 7);
        assert_eq!(
            cfg.pipelines,
            vec![PipelineKind::CentralKmeans, PipelineKind::LdpKmeans]
        );
        assert_eq!(cfg.thresholds.mult_coeff, Some(50.0));

        let err = parse_suite_config("k = 2\nbogus_key = 1\n", Path::new("out")).unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_suite_config("k : 2\n", Path::new("out")).unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
    }

    #[test]
    fn suite_rerun_is_byte_identical() {
        let dir = std::env::temp_dir().join("dpcluster-bench-test-det");
        let mut cfg = SuiteConfig::new(InstanceSpec::blobs(2, 2, 300, 0.02, 2), &dir);
        cfg.trials = 3;
        cfg.pipelines = vec![PipelineKind::CentralKmeans];
        cfg.oracle_restarts = 5;
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a.csv, b.csv);
        std::fs::remove_dir_all(&dir).ok();
    }
}
