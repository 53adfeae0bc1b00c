//! Calibrated noise primitives and privacy accounting: Laplace/Gaussian
//! samplers, noisy counts/averages/costs, and the composition arithmetic.
//!
//! Samplers are pure given an explicit rng handle. An optional ledger records
//! every spend; accounting is advisory and never gates execution.

mod compose;
mod rng;

pub use compose::{
    amplify_by_sampling, compose_advanced, compose_simple, group_privacy, BudgetLedger,
    LedgerEntry, MechanismKind,
};
pub use rng::{stream_rng, RngSeed};

use crate::error::{Error, Result};
use crate::geometry::{clamp_to_ball, cost, CenterSet, CostObjective, Dataset};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// An (ε, δ) privacy budget. `epsilon = +inf` encodes the noiseless limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParam(format!(
                "delta must be in [0, 1), got {delta}"
            )));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    pub fn noiseless() -> Self {
        PrivacyParams {
            epsilon: f64::INFINITY,
            delta: 0.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.epsilon.is_infinite()
    }

    /// Both parameters scaled by `f` (budget splitting).
    pub fn scaled(&self, f: f64) -> Self {
        PrivacyParams {
            epsilon: self.epsilon * f,
            delta: self.delta * f,
        }
    }

    /// The Gaussian-mechanism theorem is stated for ε < 1; larger values are
    /// accepted but flagged outside the cited range.
    pub fn in_gaussian_theorem_range(&self) -> bool {
        self.epsilon < 1.0 && self.delta > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityNorm {
    L1,
    L2,
}

/// L1 or L2 sensitivity of a query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub value: f64,
    pub norm: SensitivityNorm,
}

impl Sensitivity {
    pub fn l1(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::InvalidParam("sensitivity must be >= 0".into()));
        }
        Ok(Sensitivity {
            value,
            norm: SensitivityNorm::L1,
        })
    }

    pub fn l2(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::InvalidParam("sensitivity must be >= 0".into()));
        }
        Ok(Sensitivity {
            value,
            norm: SensitivityNorm::L2,
        })
    }
}

/// A noise draw together with the scale and mechanism that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyValue {
    pub value: Vec<f64>,
    pub scale: f64,
    pub mechanism: MechanismKind,
}

/// One Laplace(b) draw via inverse CDF.
#[inline]
pub fn laplace_sample<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    // always consume one uniform so rng streams stay aligned at scale 0
    let u: f64 = rng.random::<f64>() - 0.5;
    if scale == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

#[inline]
pub fn gaussian_sample<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// σ of the Gaussian mechanism at (ε, δ) for L2 sensitivity λ:
/// σ = (λ/ε) sqrt(2 ln(1.25/δ)), the minimal permitted value (equality).
pub fn gaussian_sigma(lambda: f64, pp: PrivacyParams) -> Result<f64> {
    if lambda == 0.0 || pp.is_noiseless() {
        return Ok(0.0);
    }
    if !(pp.delta > 0.0) {
        return Err(Error::InvalidParam(
            "gaussian mechanism needs delta > 0".into(),
        ));
    }
    Ok(lambda / pp.epsilon * (2.0 * (1.25 / pp.delta).ln()).sqrt())
}

/// i.i.d. Laplace(λ/ε) per coordinate for an L1-sensitivity-λ query.
pub fn laplace_noise<R: Rng + ?Sized>(
    sens: Sensitivity,
    pp: PrivacyParams,
    dim: usize,
    rng: &mut R,
    ledger: Option<&mut BudgetLedger>,
) -> Result<NoisyValue> {
    if sens.norm != SensitivityNorm::L1 {
        return Err(Error::InvalidParam(
            "laplace mechanism needs an L1 sensitivity".into(),
        ));
    }
    let scale = if pp.is_noiseless() {
        0.0
    } else {
        sens.value / pp.epsilon
    };
    let value = (0..dim).map(|_| laplace_sample(rng, scale)).collect();
    if let Some(l) = ledger {
        l.record(
            "laplace",
            PrivacyParams {
                epsilon: pp.epsilon,
                delta: 0.0,
            },
            MechanismKind::Laplace,
        );
    }
    Ok(NoisyValue {
        value,
        scale,
        mechanism: MechanismKind::Laplace,
    })
}

/// i.i.d. N(0, σ²) per coordinate at the minimal calibrated σ for an
/// L2-sensitivity-λ query.
pub fn gaussian_noise<R: Rng + ?Sized>(
    sens: Sensitivity,
    pp: PrivacyParams,
    dim: usize,
    rng: &mut R,
    ledger: Option<&mut BudgetLedger>,
) -> Result<NoisyValue> {
    if sens.norm != SensitivityNorm::L2 {
        return Err(Error::InvalidParam(
            "gaussian mechanism needs an L2 sensitivity".into(),
        ));
    }
    let sigma = gaussian_sigma(sens.value, pp)?;
    let value = (0..dim).map(|_| gaussian_sample(rng, sigma)).collect();
    if let Some(l) = ledger {
        l.record("gaussian", pp, MechanismKind::Gaussian);
    }
    Ok(NoisyValue {
        value,
        scale: sigma,
        mechanism: MechanismKind::Gaussian,
    })
}

/// Sensitivity-1 Laplace count: true_count + Lap(1/ε).
pub fn noisy_count<R: Rng + ?Sized>(
    true_count: usize,
    pp: PrivacyParams,
    rng: &mut R,
    ledger: Option<&mut BudgetLedger>,
) -> f64 {
    let scale = if pp.is_noiseless() {
        0.0
    } else {
        1.0 / pp.epsilon
    };
    let out = true_count as f64 + laplace_sample(rng, scale);
    if let Some(l) = ledger {
        l.record(
            "noisy-count",
            PrivacyParams {
                epsilon: pp.epsilon,
                delta: 0.0,
            },
            MechanismKind::Laplace,
        );
    }
    out
}

/// Private mean via noisy-sum / noisy-count with the small-cluster fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyAverage {
    pub value: Vec<f64>,
    pub small_cluster: bool,
    pub noisy_count: f64,
    pub true_count: usize,
    pub sum_noise_norm: f64,
    pub sum_sigma: f64,
    pub count_scale: f64,
}

/// Count threshold below which a noisy average is abandoned:
/// max(1, (16/ε) ln(4k/(βδ))).
pub fn small_cluster_threshold(pp: PrivacyParams, beta: f64, k_ctx: usize) -> f64 {
    if pp.is_noiseless() {
        return 1.0;
    }
    let k = k_ctx.max(1) as f64;
    let delta = if pp.delta > 0.0 { pp.delta } else { 1e-12 };
    (16.0 / pp.epsilon * (4.0 * k / (beta * delta)).ln()).max(1.0)
}

/// Noisy average of `points` (flat, row-major) inside B(0, Λ):
/// Gaussian noise on the coordinate sum (L2 sensitivity 2Λ, budget
/// (ε/2, δ/2)) over a Laplace-noised count (sensitivity 1, budget ε/2).
/// If the noisy count falls below the small-cluster threshold the origin is
/// returned with a flag; the result is always clamped into the ball.
#[allow(clippy::too_many_arguments)]
pub fn noisy_average<R: Rng + ?Sized>(
    points: &[f64],
    dim: usize,
    lambda: f64,
    pp: PrivacyParams,
    beta: f64,
    k_ctx: usize,
    rng: &mut R,
    ledger: Option<&mut BudgetLedger>,
) -> Result<NoisyAverage> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: points.len() % dim,
        });
    }
    let n = points.len() / dim;
    let sum_pp = pp.scaled(0.5);
    let count_eps = pp.epsilon * 0.5;

    let sum_sigma = gaussian_sigma(2.0 * lambda, sum_pp)?;
    let count_scale = if pp.is_noiseless() {
        0.0
    } else {
        1.0 / count_eps
    };

    let mut sum = vec![0.0; dim];
    for p in points.chunks_exact(dim) {
        for (s, x) in sum.iter_mut().zip(p) {
            *s += x;
        }
    }
    let mut noise_sq = 0.0;
    for s in sum.iter_mut() {
        let z = gaussian_sample(rng, sum_sigma);
        noise_sq += z * z;
        *s += z;
    }
    let ncount = n as f64 + laplace_sample(rng, count_scale);

    if let Some(l) = ledger {
        l.record("noisy-average", pp, MechanismKind::Composite);
    }

    let threshold = small_cluster_threshold(pp, beta, k_ctx);
    if n == 0 || ncount < threshold {
        return Ok(NoisyAverage {
            value: vec![0.0; dim],
            small_cluster: true,
            noisy_count: ncount,
            true_count: n,
            sum_noise_norm: noise_sq.sqrt(),
            sum_sigma,
            count_scale,
        });
    }

    let mut value: Vec<f64> = sum.iter().map(|s| s / ncount).collect();
    clamp_to_ball(&mut value, lambda);
    Ok(NoisyAverage {
        value,
        small_cluster: false,
        noisy_count: ncount,
        true_count: n,
        sum_noise_norm: noise_sq.sqrt(),
        sum_sigma,
        count_scale,
    })
}

/// Noisy cost estimate: cost_X(C) + N(0, σ²) with L2 sensitivity (2Λ)^p.
/// Centers are clamped into the ball before evaluation.
pub fn noisy_cost<R: Rng + ?Sized>(
    data: &Dataset,
    centers: &CenterSet,
    obj: CostObjective,
    pp: PrivacyParams,
    rng: &mut R,
    ledger: Option<&mut BudgetLedger>,
) -> Result<f64> {
    let clamped = centers.clamped_to_ball(data.radius());
    let exact = cost(data, &clamped, obj)?;
    let sens = (2.0 * data.radius()).powi(obj.p() as i32);
    let sigma = gaussian_sigma(sens, pp)?;
    let out = exact + gaussian_sample(rng, sigma);
    if let Some(l) = ledger {
        l.record("noisy-cost", pp, MechanismKind::Gaussian);
    }
    Ok(out)
}

/// The two selection-step cost estimates drawn as a single vector-valued
/// Gaussian query of L2 sensitivity sqrt(2)·(2Λ)^p at (ε, δ). The ledger
/// treatment is the caller's (the pipelines keep the composition accounting
/// of their writeups).
pub fn noisy_cost_pair<R: Rng + ?Sized>(
    data: &Dataset,
    first: &CenterSet,
    second: &CenterSet,
    obj: CostObjective,
    pp: PrivacyParams,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let sens = std::f64::consts::SQRT_2 * (2.0 * data.radius()).powi(obj.p() as i32);
    let sigma = gaussian_sigma(sens, pp)?;
    let a = cost(data, &first.clamped_to_ball(data.radius()), obj)? + gaussian_sample(rng, sigma);
    let b = cost(data, &second.clamped_to_ball(data.radius()), obj)? + gaussian_sample(rng, sigma);
    Ok((a, b))
}
