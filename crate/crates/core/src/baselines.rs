//! Competing model-selection scores: AIC, BIC and the Figueiredo-Jain
//! criterion with its annihilating weight rule.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::data::{DataSet, WeightedSample};
use crate::error::{Error, Result};
use crate::mixture::{e_step, mixture_msglen_with, MixtureModel, MsglenSettings};

/// Scores of one model on one data set.
///
/// `aic`, `bic` and `i_fj` are in nats; `i_mml` is in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub aic: f64,
    pub bic: f64,
    pub i_fj: f64,
    pub i_mml: f64,
}

/// `AIC = p - L` and `BIC = (p/2) log N - L`, with `L` the log-likelihood.
pub fn aic_bic_from(loglik: f64, p: usize, n: f64) -> (f64, f64) {
    let p = p as f64;
    (p - loglik, 0.5 * p * n.ln() - loglik)
}

pub fn score_aic_bic(model: &MixtureModel, data: &DataSet) -> Result<(f64, f64)> {
    let (_, loglik) = e_step(model, &WeightedSample::unit(data))?;
    Ok(aic_bic_from(loglik, model.free_params(), data.n() as f64))
}

/// Figueiredo-Jain message length from its ingredients, in nats.
pub fn fj_from(loglik: f64, weights: &[f64], n_p: usize, n: f64) -> Result<f64> {
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Domain("every weight must be positive"));
    }
    let np = n_p as f64;
    let m = weights.len() as f64;
    let weight_part: f64 = weights.iter().map(|w| (n * w / 12.0).ln()).sum();
    Ok(0.5 * np * weight_part + 0.5 * m * (n / 12.0).ln() + 0.5 * m * (np + 1.0) - loglik)
}

pub fn score_fj(model: &MixtureModel, data: &DataSet) -> Result<f64> {
    let (_, loglik) = e_step(model, &WeightedSample::unit(data))?;
    let n_p = model.family().free_params(model.d());
    fj_from(loglik, model.weights(), n_p, data.n() as f64)
}

/// All four scores of `model` on `data`.
pub fn score_report(model: &MixtureModel, data: &DataSet) -> Result<ScoreReport> {
    let (aic, bic) = score_aic_bic(model, data)?;
    let i_fj = score_fj(model, data)?;
    let i_mml = mixture_msglen_with(model, &WeightedSample::unit(data), &MsglenSettings::default())?.total;
    Ok(ScoreReport { aic, bic, i_fj, i_mml })
}

/// Result of the annihilating weight rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FjWeights {
    /// Zero for annihilated components; the rest sum to one.
    pub weights: Vec<f64>,
    pub annihilated: Vec<bool>,
}

/// `w_j ∝ max(0, n_j - N_p/2)`.
pub fn fj_weight_update(n: &[f64], n_p: usize) -> Result<FjWeights> {
    if n.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain("memberships must be non-negative"));
    }
    let half = 0.5 * n_p as f64;
    let raw: Vec<f64> = n.iter().map(|v| (v - half).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllAnnihilated);
    }
    Ok(FjWeights {
        annihilated: raw.iter().map(|v| *v == 0.0).collect(),
        weights: raw.iter().map(|v| v / total).collect(),
    })
}
