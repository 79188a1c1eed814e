//! Finite mixtures: densities, responsibilities, EM and the total message
//! length of a mixture.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::data::{DataSet, WeightedSample};
use crate::error::{Error, Result};
use crate::gaussian::{
    gaussian_free_params, gaussian_kl, gaussian_log_density, gaussian_parameter_nats, gaussian_sample,
    params_from_scatter, weighted_moments, GaussianParams, GaussianPrior,
};
use crate::special_functions::ln_gamma;
use crate::vmf::{
    directional_stats, vmf_kl, vmf_ml_from_stats, vmf_mml_from_stats, vmf_parameter_nats, vmf_sample, VmfParams,
};
use crate::{lattice_nats, nats_to_bits};

/// Default relative-improvement threshold for EM.
pub const DEFAULT_EM_TOL: f64 = 1e-5;
/// Default iteration cap for EM.
pub const DEFAULT_EM_MAX_ITER: usize = 1000;
/// Consecutive undersized M-steps tolerated before a Gaussian component is
/// declared collapsed.
pub const COLLAPSE_STRIKES: u32 = 3;

const WEIGHT_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Vmf,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Vmf => "vmf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(Family::Gaussian),
            "vmf" => Some(Family::Vmf),
            _ => None,
        }
    }

    /// Free parameters of one component in dimension `d`.
    pub fn free_params(self, d: usize) -> usize {
        match self {
            Family::Gaussian => gaussian_free_params(d),
            Family::Vmf => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Gaussian(GaussianParams),
    Vmf(VmfParams),
}

impl Component {
    pub fn family(&self) -> Family {
        match self {
            Component::Gaussian(_) => Family::Gaussian,
            Component::Vmf(_) => Family::Vmf,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Component::Gaussian(p) => p.d(),
            Component::Vmf(p) => p.d(),
        }
    }

    pub fn free_params(&self) -> usize {
        self.family().free_params(self.d())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        Prepared::new(self)?.check(x)?;
        match self {
            Component::Gaussian(p) => gaussian_log_density(p, x),
            Component::Vmf(p) => crate::vmf::vmf_log_density(p, x),
        }
    }

    /// Draws `n` rows from this component.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Component::Gaussian(p) => gaussian_sample(p, n, rng),
            Component::Vmf(p) => vmf_sample(p, n, rng),
        }
    }
}

/// `KL(a ‖ b)` in nats between components of the same family.
pub fn component_kl(a: &Component, b: &Component) -> Result<f64> {
    match (a, b) {
        (Component::Gaussian(f), Component::Gaussian(g)) => gaussian_kl(f, g),
        (Component::Vmf(f), Component::Vmf(g)) => vmf_kl(f, g),
        _ => Err(Error::Domain("components belong to different families")),
    }
}

/// A component with its data-independent terms evaluated once.
enum Prepared<'a> {
    Gaussian(&'a GaussianParams),
    Vmf { mu: &'a [f64], kappa: f64, log_c: f64 },
}

impl<'a> Prepared<'a> {
    fn new(c: &'a Component) -> Result<Self> {
        Ok(match c {
            Component::Gaussian(p) => Prepared::Gaussian(p),
            Component::Vmf(p) => Prepared::Vmf { mu: &p.mean_direction, kappa: p.kappa, log_c: p.log_norm_constant()? },
        })
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        let d = match self {
            Prepared::Gaussian(p) => p.d(),
            Prepared::Vmf { mu, .. } => mu.len(),
        };
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Prepared::Gaussian(p) => {
                let d = p.d() as f64;
                -0.5 * (d * (2.0 * core::f64::consts::PI).ln() + p.log_det() + p.mahalanobis_sq(x))
            }
            Prepared::Vmf { mu, kappa, log_c } => log_c + kappa * mu.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    family: Family,
    components: Vec<Component>,
    weights: Vec<f64>,
}

impl MixtureModel {
    /// Validates that weights are positive and sum to one and that every
    /// component has the same family and dimension.
    pub fn new(components: Vec<Component>, weights: Vec<f64>) -> Result<Self> {
        let first = components.first().ok_or(Error::Domain("a mixture needs at least one component"))?;
        let (family, d) = (first.family(), first.d());
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch { expected: components.len(), found: weights.len() });
        }
        for c in &components {
            if c.family() != family {
                return Err(Error::Domain("components belong to different families"));
            }
            if c.d() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.d() });
            }
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Domain("mixture weights must be positive"));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Domain("mixture weights must sum to one"));
        }
        Ok(MixtureModel { family, components, weights })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn d(&self) -> usize {
        self.components[0].d()
    }

    /// Total number of free parameters: component parameters plus `M - 1` weights.
    pub fn free_params(&self) -> usize {
        self.components.iter().map(Component::free_params).sum::<usize>() + self.m() - 1
    }

    /// Draws `n` rows and the index of the component that generated each.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<usize>) {
        let mut labels = Vec::with_capacity(n);
        let mut counts = vec![0usize; self.m()];
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.m() - 1;
            for (j, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = j;
                    break;
                }
            }
            labels.push(k);
            counts[k] += 1;
        }
        let blocks: Vec<Vec<f64>> = self.components.iter().zip(&counts).map(|(c, &k)| c.sample(k, rng)).collect();
        let d = self.d();
        let mut cursor = vec![0usize; self.m()];
        let mut out = Vec::with_capacity(n * d);
        for &k in &labels {
            out.extend_from_slice(&blocks[k][cursor[k] * d..(cursor[k] + 1) * d]);
            cursor[k] += 1;
        }
        (out, labels)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log Σ w_j f_j(x)`.
pub fn mixture_log_density(model: &MixtureModel, x: &[f64]) -> Result<f64> {
    MixtureDensity::new(model)?.log_density(x)
}

/// A mixture density with normalising constants evaluated once, for
/// repeated evaluation.
pub struct MixtureDensity<'a> {
    prepared: Vec<Prepared<'a>>,
    log_w: Vec<f64>,
}

impl<'a> MixtureDensity<'a> {
    pub fn new(model: &'a MixtureModel) -> Result<Self> {
        Ok(MixtureDensity { prepared: prepare(model)?, log_w: model.weights.iter().map(|w| w.ln()).collect() })
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.prepared[0].check(x)?;
        let terms: Vec<f64> = self.prepared.iter().zip(&self.log_w).map(|(p, lw)| lw + p.eval(x)).collect();
        Ok(log_sum_exp(&terms))
    }
}

fn prepare(model: &MixtureModel) -> Result<Vec<Prepared<'_>>> {
    model.components.iter().map(Prepared::new).collect()
}

/// Row-major `N × M` matrix of memberships with weighted column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMatrix {
    r: Vec<f64>,
    n: Vec<f64>,
    rows: usize,
    m: usize,
}

impl ResponsibilityMatrix {
    /// Wraps `r` (row-major, rows summing to one); column sums are weighted
    /// by the sample weights.
    pub fn new(r: Vec<f64>, m: usize, sample: &WeightedSample<'_>) -> Result<Self> {
        let rows = sample.data.n();
        if m == 0 || r.len() != rows * m {
            return Err(Error::DimensionMismatch { expected: rows * m.max(1), found: r.len() });
        }
        if r.iter().any(|v| !(*v >= 0.0 && *v <= 1.0 + 1e-12)) {
            return Err(Error::Domain("responsibilities must lie in [0, 1]"));
        }
        let mut n = vec![0.0; m];
        for (i, row) in r.chunks_exact(m).enumerate() {
            let w = sample.weight(i);
            for (nj, rij) in n.iter_mut().zip(row) {
                *nj += w * rij;
            }
        }
        Ok(ResponsibilityMatrix { r, n, rows, m })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Effective memberships `n_j`.
    pub fn n(&self) -> &[f64] {
        &self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.r[i * self.m..(i + 1) * self.m]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.r
    }

    /// Index of the largest membership in each row.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.r
            .chunks_exact(self.m)
            .map(|row| row.iter().enumerate().fold(0, |b, (j, v)| if *v > row[b] { j } else { b }))
            .collect()
    }
}

/// Responsibilities under `model` and the weighted log-likelihood `Σ wᵢ log f(xᵢ)` in nats.
pub fn e_step(model: &MixtureModel, sample: &WeightedSample<'_>) -> Result<(ResponsibilityMatrix, f64)> {
    let data = sample.data;
    if data.d() != model.d() {
        return Err(Error::DimensionMismatch { expected: model.d(), found: data.d() });
    }
    let prepared = prepare(model)?;
    let m = model.m();
    let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
    let mut r = vec![0.0; data.n() * m];
    let mut loglik = 0.0;
    for (i, x) in data.rows().enumerate() {
        let row = &mut r[i * m..(i + 1) * m];
        for ((v, p), lw) in row.iter_mut().zip(&prepared).zip(&log_w) {
            *v = lw + p.eval(x);
        }
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            return Err(Error::Underflow { row: i });
        }
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
        loglik += sample.weight(i) * lse;
    }
    Ok((ResponsibilityMatrix::new(r, m, sample)?, loglik))
}

/// Responsibilities of every datum under `model`, with unit data weights.
pub fn compute_responsibilities(model: &MixtureModel, data: &DataSet) -> Result<ResponsibilityMatrix> {
    e_step(model, &WeightedSample::unit(data)).map(|(r, _)| r)
}

/// `w_j = (n_j + ½) / (N + M/2)`.
pub fn mml_weight_update(n: &[f64], total: f64) -> Vec<f64> {
    let denom = total + 0.5 * n.len() as f64;
    n.iter().map(|nj| (nj + 0.5) / denom).collect()
}

/// `w_j = n_j / N`.
pub fn ml_weight_update(n: &[f64], total: f64) -> Vec<f64> {
    n.iter().map(|nj| nj / total).collect()
}

/// Prior on the number of components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentCountPrior {
    /// `P(M) ∝ 2^{-M}`, costing `M` bits.
    Geometric,
    /// Uniform on `1..=max_components`.
    Uniform { max_components: usize },
}

/// Prior constants shared by every mixture being compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsglenSettings {
    pub gaussian_prior: GaussianPrior,
    pub component_prior: ComponentCountPrior,
}

impl Default for MsglenSettings {
    fn default() -> Self {
        MsglenSettings { gaussian_prior: GaussianPrior::default(), component_prior: ComponentCountPrior::Geometric }
    }
}

/// Parts of a mixture's two-part message, all in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageLengthBreakdown {
    /// Number of components.
    pub i_m: f64,
    /// Mixture weights.
    pub i_w: f64,
    /// Per-component `-log h + ½ log|F|`.
    pub i_theta: Vec<f64>,
    /// Data given the model, including `-N d log ε`.
    pub i_data: f64,
    /// Lattice quantisation terms for all free parameters.
    pub constants: f64,
    pub total: f64,
}

impl MessageLengthBreakdown {
    /// First part of the message: everything except `i_data`.
    pub fn hypothesis(&self) -> f64 {
        self.total - self.i_data
    }
}

/// Message length of `model` on unit-weight `data` with default settings.
pub fn mixture_msglen(model: &MixtureModel, data: &DataSet) -> Result<MessageLengthBreakdown> {
    mixture_msglen_with(model, &WeightedSample::unit(data), &MsglenSettings::default())
}

pub fn mixture_msglen_with(
    model: &MixtureModel,
    sample: &WeightedSample<'_>,
    settings: &MsglenSettings,
) -> Result<MessageLengthBreakdown> {
    let (r, loglik) = e_step(model, sample)?;
    msglen_from_parts(model, r.n(), loglik, sample, settings)
}

/// Memberships below one are raised to one inside Fisher terms, where the
/// asymptotic information would otherwise go to `-∞`.
const FISHER_MIN_MEMBERSHIP: f64 = 1.0;

pub(crate) fn msglen_from_parts(
    model: &MixtureModel,
    n: &[f64],
    loglik: f64,
    sample: &WeightedSample<'_>,
    settings: &MsglenSettings,
) -> Result<MessageLengthBreakdown> {
    let m = model.m();
    let total_n = sample.total_weight();
    let mf = m as f64;
    let i_m = match settings.component_prior {
        ComponentCountPrior::Geometric => mf,
        ComponentCountPrior::Uniform { max_components } => nats_to_bits((max_components.max(1) as f64).ln()),
    };
    let i_w = nats_to_bits(
        0.5 * (mf - 1.0) * total_n.ln() - 0.5 * model.weights.iter().map(|w| w.ln()).sum::<f64>() - ln_gamma(mf),
    );
    let mut i_theta = Vec::with_capacity(m);
    for (c, nj) in model.components.iter().zip(n) {
        let nj = nj.max(FISHER_MIN_MEMBERSHIP);
        let nats = match c {
            Component::Gaussian(p) => gaussian_parameter_nats(p, nj, &settings.gaussian_prior)?,
            Component::Vmf(p) => vmf_parameter_nats(p.kappa, nj, p.d())?,
        };
        i_theta.push(nats_to_bits(nats));
    }
    let d = model.d() as f64;
    let i_data = nats_to_bits(-total_n * d * sample.data.epsilon().ln() - loglik);
    let constants = nats_to_bits(lattice_nats(model.free_params()));
    let total = i_m + i_w + i_theta.iter().sum::<f64>() + i_data + constants;
    if !total.is_finite() {
        return Err(Error::NonFinite("mixture message length"));
    }
    Ok(MessageLengthBreakdown { i_m, i_w, i_theta, i_data, constants, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmMode {
    /// Maximum likelihood updates; scores are log-likelihoods in nats.
    Ml,
    /// MML updates; scores are total message lengths in bits.
    Mml,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub mode: EmMode,
    pub tol: f64,
    pub max_iter: usize,
    pub settings: MsglenSettings,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { mode: EmMode::Mml, tol: DEFAULT_EM_TOL, max_iter: DEFAULT_EM_MAX_ITER, settings: MsglenSettings::default() }
    }
}

impl EmConfig {
    pub fn ml() -> Self {
        EmConfig { mode: EmMode::Ml, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: MixtureModel,
    pub responsibilities: ResponsibilityMatrix,
    /// Score after each iteration, preceded by the score of the starting
    /// model when there is one.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted log-likelihood of the final model in nats.
    pub log_likelihood: f64,
    /// Present in MML mode.
    pub breakdown: Option<MessageLengthBreakdown>,
}

impl EmFit {
    /// Final score: message length (MML) or log-likelihood (ML).
    pub fn score(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Runs EM from `model0`.
pub fn em_fit(model0: &MixtureModel, sample: &WeightedSample<'_>, config: &EmConfig) -> Result<EmFit> {
    let (r, loglik) = e_step(model0, sample)?;
    let initial = score(model0, &r, loglik, sample, config)?;
    run_em(model0.family, sample, r, config, Some(initial))
}

/// Runs EM starting with an M-step on the given memberships.
pub fn em_from_responsibilities(
    family: Family,
    sample: &WeightedSample<'_>,
    r: ResponsibilityMatrix,
    config: &EmConfig,
) -> Result<EmFit> {
    if r.rows() != sample.data.n() {
        return Err(Error::DimensionMismatch { expected: sample.data.n(), found: r.rows() });
    }
    run_em(family, sample, r, config, None)
}

fn score(
    model: &MixtureModel,
    r: &ResponsibilityMatrix,
    loglik: f64,
    sample: &WeightedSample<'_>,
    config: &EmConfig,
) -> Result<f64> {
    Ok(match config.mode {
        EmMode::Ml => loglik,
        EmMode::Mml => msglen_from_parts(model, r.n(), loglik, sample, &config.settings)?.total,
    })
}

fn run_em(
    family: Family,
    sample: &WeightedSample<'_>,
    mut r: ResponsibilityMatrix,
    config: &EmConfig,
    initial: Option<f64>,
) -> Result<EmFit> {
    if !(config.tol > 0.0) {
        return Err(Error::Domain("EM tolerance must be positive"));
    }
    let mut strikes = vec![0u32; r.m()];
    let mut trace: Vec<f64> = initial.into_iter().collect();
    let mut converged = false;
    let mut iterations = 0;
    let mut last: Option<(MixtureModel, f64)> = None;
    while iterations < config.max_iter.max(1) {
        iterations += 1;
        let model = m_step(family, sample, &r, config.mode, &mut strikes)?;
        let (r_new, loglik) = e_step(&model, sample)?;
        let s = score(&model, &r_new, loglik, sample, config)?;
        let Some(&prev) = trace.last() else {
            trace.push(s);
            r = r_new;
            last = Some((model, loglik));
            continue;
        };
        let gain = match config.mode {
            EmMode::Ml => s - prev,
            EmMode::Mml => prev - s,
        };
        // A worse iterate is discarded when an earlier one can be returned.
        if gain < 0.0 && last.is_some() {
            converged = true;
            break;
        }
        trace.push(s);
        r = r_new;
        last = Some((model, loglik));
        if gain < config.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let (model, log_likelihood) = last.expect("the first iterate is always kept");
    if family == Family::Gaussian {
        // a Gaussian with fewer than d + 1 members has no proper estimate
        let floor = sample.data.d() as f64 + 1.0 - 1e-9;
        if let Some(j) = r.n().iter().position(|&n| n < floor) {
            return Err(Error::Collapse { component: j, n_eff: r.n()[j] });
        }
    }
    let breakdown = match config.mode {
        EmMode::Ml => None,
        EmMode::Mml => Some(msglen_from_parts(&model, r.n(), log_likelihood, sample, &config.settings)?),
    };
    Ok(EmFit { model, responsibilities: r, trace, iterations, converged, log_likelihood, breakdown })
}

/// Fits one component to a weighted sample; the Gaussian covariance divisor
/// is `Σw` (ML) or `Σw - 1` (MML), floored if needed.
pub fn estimate_component(family: Family, sample: &WeightedSample<'_>, mode: EmMode) -> Result<Component> {
    match family {
        Family::Gaussian => {
            let (mean, scatter, n) = weighted_moments(sample)?;
            let divisor = match mode {
                EmMode::Ml => n,
                EmMode::Mml => n - 1.0,
            };
            if !(divisor > 0.0) {
                return Err(Error::InsufficientData { needed: 2, found: n as usize });
            }
            params_from_scatter(mean, &scatter, divisor).map(|(p, _)| Component::Gaussian(p))
        }
        Family::Vmf => {
            let stats = directional_stats(sample)?;
            match mode {
                EmMode::Ml => vmf_ml_from_stats(&stats),
                EmMode::Mml => vmf_mml_from_stats(&stats),
            }
            .map(Component::Vmf)
        }
    }
}

fn m_step(
    family: Family,
    sample: &WeightedSample<'_>,
    r: &ResponsibilityMatrix,
    mode: EmMode,
    strikes: &mut [u32],
) -> Result<MixtureModel> {
    let data = sample.data;
    let d = data.d();
    let m = r.m();
    let mut components = Vec::with_capacity(m);
    let mut wj = vec![0.0; data.n()];
    for j in 0..m {
        for (i, w) in wj.iter_mut().enumerate() {
            *w = (sample.weight(i) * r.get(i, j)).min(1.0);
        }
        let sub = WeightedSample::weighted(data, &wj)?;
        let nj = r.n()[j];
        let collapse = Error::Collapse { component: j, n_eff: nj };
        match family {
            Family::Gaussian => {
                if !(nj > 1.0) {
                    return Err(collapse);
                }
                if nj < d as f64 + 1.0 {
                    strikes[j] += 1;
                    if strikes[j] >= COLLAPSE_STRIKES {
                        return Err(collapse);
                    }
                } else {
                    strikes[j] = 0;
                }
            }
            Family::Vmf => {
                if !(nj >= 1.0) {
                    return Err(collapse);
                }
            }
        }
        let comp = estimate_component(family, &sub, mode).map_err(|e| match e {
            Error::Singular | Error::ZeroResultant | Error::InsufficientData { .. } => collapse,
            other => other,
        })?;
        components.push(comp);
    }
    let total = sample.total_weight();
    let weights = match mode {
        EmMode::Ml => ml_weight_update(r.n(), total),
        EmMode::Mml => mml_weight_update(r.n(), total),
    };
    let s: f64 = weights.iter().sum();
    MixtureModel::new(components, weights.into_iter().map(|w| w / s).collect())
}
