//! Privacy accounting: the budget ledger plus simple/advanced composition,
//! group privacy and subsampling amplification as pure arithmetic.

use super::PrivacyParams;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Laplace,
    Gaussian,
    SparseVector,
    Composite,
    Subroutine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
    pub delta: f64,
    pub mechanism: MechanismKind,
}

/// Running record of (ε, δ) spends. Advisory, not an enforcement gate:
/// algorithms record what they spend, tests assert the totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    entries: Vec<LedgerEntry>,
    closed: bool,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, label: &str, pp: PrivacyParams, mechanism: MechanismKind) {
        debug_assert!(!self.closed, "recording into a closed ledger");
        self.entries.push(LedgerEntry {
            label: label.to_string(),
            epsilon: pp.epsilon,
            delta: pp.delta,
            mechanism,
        });
    }

    /// Absorbs another ledger's entries under a label prefix.
    pub fn absorb(&mut self, prefix: &str, other: &BudgetLedger) {
        for e in &other.entries {
            self.entries.push(LedgerEntry {
                label: format!("{prefix}/{}", e.label),
                ..e.clone()
            });
        }
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Simple composition total: (Σ ε_i, Σ δ_i). Empty ledger -> (0, 0).
    pub fn compose_simple(&self) -> PrivacyParams {
        let epsilon = self.entries.iter().map(|e| e.epsilon).sum();
        let delta = self.entries.iter().map(|e| e.delta).sum();
        PrivacyParams { epsilon, delta }
    }

    /// Advanced-composition total treating every entry as a copy of the
    /// worst (max-ε, max-δ) entry; a monotone upper bound for mixed ledgers.
    pub fn compose_advanced(&self, delta_prime: f64) -> Result<PrivacyParams> {
        if self.entries.is_empty() {
            return Ok(PrivacyParams {
                epsilon: 0.0,
                delta: delta_prime,
            });
        }
        let eps = self.entries.iter().map(|e| e.epsilon).fold(0.0, f64::max);
        let delta = self.entries.iter().map(|e| e.delta).fold(0.0, f64::max);
        compose_advanced(self.len(), eps, delta, delta_prime)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self
            .entries
            .iter()
            .map(|e| serde_json::json!({
                "label": e.label,
                "epsilon": e.epsilon,
                "delta": e.delta,
                "mechanism": e.mechanism,
            }))
            .collect::<Vec<_>>())
    }
}

/// Simple composition of k adaptive (ε, δ) mechanisms: (kε, kδ).
pub fn compose_simple(ledger: &BudgetLedger) -> PrivacyParams {
    ledger.compose_simple()
}

/// Advanced composition: k adaptive (ε, δ) mechanisms are
/// (ε', kδ + δ')-DP with ε' = sqrt(2k ln(1/δ')) ε + k ε (e^ε − 1).
pub fn compose_advanced(
    k: usize,
    epsilon: f64,
    delta: f64,
    delta_prime: f64,
) -> Result<PrivacyParams> {
    if !(epsilon >= 0.0) || epsilon > 1.0 + 1e-12 {
        return Err(Error::InvalidParam(format!(
            "advanced composition needs epsilon in (0, 1], got {epsilon}"
        )));
    }
    if !(delta_prime > 0.0) || delta_prime > 1.0 {
        return Err(Error::InvalidParam(format!(
            "delta' must be in (0, 1], got {delta_prime}"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParam(format!(
            "delta must be in [0, 1], got {delta}"
        )));
    }
    if k == 0 {
        return Ok(PrivacyParams {
            epsilon: 0.0,
            delta: delta_prime,
        });
    }
    let kf = k as f64;
    let eps_prime = (2.0 * kf * (1.0 / delta_prime).ln()).sqrt() * epsilon
        + kf * epsilon * (epsilon.exp() - 1.0);
    Ok(PrivacyParams {
        epsilon: eps_prime,
        delta: kf * delta + delta_prime,
    })
}

/// Group privacy for groups of g rows: (gε, g e^{gε} δ).
pub fn group_privacy(pp: PrivacyParams, group_size: usize) -> PrivacyParams {
    if group_size == 0 {
        return PrivacyParams {
            epsilon: 0.0,
            delta: 0.0,
        };
    }
    let g = group_size as f64;
    PrivacyParams {
        epsilon: g * pp.epsilon,
        delta: g * (g * pp.epsilon).exp() * pp.delta,
    }
}

/// Amplification by sampling m of n rows with replacement (ε <= 1, n >= 2m):
/// (6εm/n, e^{6εm/n} (4m/n) δ).
pub fn amplify_by_sampling(pp: PrivacyParams, m: usize, n: usize) -> Result<PrivacyParams> {
    if pp.epsilon > 1.0 {
        return Err(Error::InvalidParam(format!(
            "amplification stated for epsilon <= 1, got {}",
            pp.epsilon
        )));
    }
    if m == 0 {
        return Ok(PrivacyParams {
            epsilon: 0.0,
            delta: 0.0,
        });
    }
    if n < 2 * m {
        return Err(Error::InvalidParam(format!(
            "amplification needs n >= 2m, got n={n}, m={m}"
        )));
    }
    let ratio = m as f64 / n as f64;
    let eps = 6.0 * pp.epsilon * ratio;
    Ok(PrivacyParams {
        epsilon: eps,
        delta: eps.exp() * 4.0 * ratio * pp.delta,
    })
}
