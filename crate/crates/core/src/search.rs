//! Greedy search over the number of mixture components by splitting,
//! deleting and merging, plus the annihilation search used as a baseline
//! and fixed-size fits.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::baselines::{fj_from, fj_weight_update};
use crate::data::{DataSet, WeightedSample};
use crate::error::{Error, Result};
use crate::gaussian::{params_from_scatter, principal_axis, GaussianParams};
use crate::mixture::{
    component_kl, e_step, em_fit, em_from_responsibilities, estimate_component, Component, EmConfig, EmFit, EmMode,
    Family, MixtureModel, ResponsibilityMatrix,
};
use crate::rng::{stream, SimRng};
use crate::vmf::{directional_stats, estimate_kappa, KappaMethod, VmfParams};

/// Components with less membership than this are not split.
pub const MIN_SPLIT_MEMBERSHIP: f64 = 4.0;
/// Default relative improvement an accepted perturbation must achieve.
pub const DEFAULT_MIN_IMPROVEMENT: f64 = 1e-4;
/// Default starting size of the annihilation search.
pub const DEFAULT_FJ_INITIAL_M: usize = 25;

const FJ_STREAM: u64 = 0xF1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PerturbationKind {
    Delete,
    Merge,
    Split,
}

impl PerturbationKind {
    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::Delete => "delete",
            PerturbationKind::Merge => "merge",
            PerturbationKind::Split => "split",
        }
    }
}

/// A candidate move before it is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub target: usize,
    pub partner: Option<usize>,
}

/// An evaluated move: the refitted mixture and its message length in bits.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub target: usize,
    pub partner: Option<usize>,
    pub resulting_model: MixtureModel,
    pub resulting_score: f64,
    pub fit: EmFit,
}

/// Which side of the divergence the merge target sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlDirection {
    /// `KL(target ‖ candidate)`.
    FromTarget,
    /// `KL(candidate ‖ target)`.
    ToTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStrategy {
    MmlSearch,
    FjSearch,
}

impl SearchStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SearchStrategy::MmlSearch => "mml_search",
            SearchStrategy::FjSearch => "fj_search",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mml_search" | "mml" => Some(SearchStrategy::MmlSearch),
            "fj_search" | "fj" => Some(SearchStrategy::FjSearch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub strategy: SearchStrategy,
    pub em: EmConfig,
    pub min_improvement: f64,
    pub min_split_membership: f64,
    pub max_rounds: usize,
    pub merge_kl: KlDirection,
    pub fj_initial_m: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: SearchStrategy::MmlSearch,
            em: EmConfig::default(),
            min_improvement: DEFAULT_MIN_IMPROVEMENT,
            min_split_membership: MIN_SPLIT_MEMBERSHIP,
            max_rounds: 100,
            merge_kl: KlDirection::FromTarget,
            fj_initial_m: DEFAULT_FJ_INITIAL_M,
            seed: 0,
        }
    }
}

/// One round of the greedy search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchRound {
    pub iteration: usize,
    pub score_before: f64,
    pub m_before: usize,
    pub m_after: usize,
    /// Best candidate of the round, if any candidate could be fitted.
    pub best: Option<PerturbationSpec>,
    pub best_score: Option<f64>,
    pub accepted: bool,
    /// Candidates whose EM failed and were skipped.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    pub rounds: Vec<SearchRound>,
    /// `(M, I_FJ)` after convergence at each size visited by the annihilation search.
    pub fj_path: Vec<(usize, f64)>,
}

impl SearchTrace {
    /// Scores of the starting model and of every accepted move.
    pub fn accepted_scores(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(first) = self.rounds.first() {
            out.push(first.score_before);
        }
        for r in &self.rounds {
            if r.accepted {
                out.push(r.best_score.expect("accepted rounds have a score"));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub model: MixtureModel,
    /// Message length in bits for the greedy search, `I_FJ` in nats for the
    /// annihilation search.
    pub score: f64,
    pub trace: SearchTrace,
}

/// Evaluates a batch of independent candidates; implementations may run
/// them concurrently but must return results in job order.
pub trait CandidateRunner {
    fn run(
        &self,
        jobs: &[PerturbationSpec],
        eval: &(dyn Fn(&PerturbationSpec) -> Option<Perturbation> + Sync),
    ) -> Vec<Option<Perturbation>>;
}

/// Runs candidates one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl CandidateRunner for Sequential {
    fn run(
        &self,
        jobs: &[PerturbationSpec],
        eval: &(dyn Fn(&PerturbationSpec) -> Option<Perturbation> + Sync),
    ) -> Vec<Option<Perturbation>> {
        jobs.iter().map(eval).collect()
    }
}

/// MML fit of a single component to the whole sample.
pub fn fit_one_component(family: Family, sample: &WeightedSample<'_>, em: &EmConfig) -> Result<EmFit> {
    let r = ResponsibilityMatrix::new(vec![1.0; sample.data.n()], 1, sample)?;
    em_from_responsibilities(family, sample, r, em)
}

fn check_index(model: &MixtureModel, alpha: usize) -> Result<()> {
    if alpha >= model.m() {
        return Err(Error::Domain("component index out of range"));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Initial memberships of the two children of a split.
fn split_seed_memberships<R: Rng + ?Sized>(component: &Component, data: &DataSet, rng: &mut R) -> Vec<f64> {
    let mut rc = vec![0.0; 2 * data.n()];
    match component {
        Component::Gaussian(p) => {
            let (lambda, v) = principal_axis(p);
            let sd = lambda.sqrt();
            let c1: Vec<f64> = p.mean().iter().zip(&v).map(|(m, e)| m + sd * e).collect();
            let c2: Vec<f64> = p.mean().iter().zip(&v).map(|(m, e)| m - sd * e).collect();
            for (i, x) in data.rows().enumerate() {
                let k = usize::from(sq_dist(x, &c2) < sq_dist(x, &c1));
                rc[2 * i + k] = 1.0;
            }
        }
        Component::Vmf(v) => {
            // a random great circle through the mean direction bisects the data
            let mu = &v.mean_direction;
            let normal = loop {
                let mut u: Vec<f64> = (0..mu.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let along: f64 = u.iter().zip(mu).map(|(a, b)| a * b).sum();
                u.iter_mut().zip(mu).for_each(|(a, b)| *a -= along * b);
                if u.iter().map(|a| a * a).sum::<f64>() > 1e-12 {
                    break u;
                }
            };
            for (i, x) in data.rows().enumerate() {
                let side: f64 = x.iter().zip(&normal).map(|(a, b)| a * b).sum();
                rc[2 * i + usize::from(side < 0.0)] = 1.0;
            }
        }
    }
    rc
}

/// Splits component `alpha` into two children fitted by a weighted
/// two-component EM and returns the reintegrated mixture with its
/// memberships, before the full EM.
pub fn split_init<R: Rng + ?Sized>(
    model: &MixtureModel,
    sample: &WeightedSample<'_>,
    r: &ResponsibilityMatrix,
    alpha: usize,
    min_membership: f64,
    em: &EmConfig,
    rng: &mut R,
) -> Result<(MixtureModel, ResponsibilityMatrix)> {
    check_index(model, alpha)?;
    let data = sample.data;
    let n_alpha = r.n()[alpha];
    if n_alpha < min_membership {
        return Err(Error::InsufficientData { needed: min_membership as usize, found: n_alpha as usize });
    }
    let sub_weights: Vec<f64> = (0..data.n()).map(|i| (sample.weight(i) * r.get(i, alpha)).min(1.0)).collect();
    let sub = WeightedSample::weighted(data, &sub_weights)?;
    let rc0 = split_seed_memberships(&model.components()[alpha], data, rng);
    let rc0 = ResponsibilityMatrix::new(rc0, 2, &sub)?;
    let child = em_from_responsibilities(model.family(), &sub, rc0, em)?;
    let rc = &child.responsibilities;

    let m = model.m();
    let w_alpha = model.weights()[alpha];
    let mut comps = Vec::with_capacity(m + 1);
    let mut weights = Vec::with_capacity(m + 1);
    for j in 0..m {
        if j == alpha {
            for k in 0..2 {
                comps.push(child.model.components()[k].clone());
                weights.push(w_alpha * child.model.weights()[k]);
            }
        } else {
            comps.push(model.components()[j].clone());
            weights.push(model.weights()[j]);
        }
    }
    let mut r_new = Vec::with_capacity(data.n() * (m + 1));
    for i in 0..data.n() {
        for j in 0..m {
            if j == alpha {
                r_new.push(r.get(i, alpha) * rc.get(i, 0));
                r_new.push(r.get(i, alpha) * rc.get(i, 1));
            } else {
                r_new.push(r.get(i, j));
            }
        }
    }
    Ok((MixtureModel::new(comps, weights)?, ResponsibilityMatrix::new(r_new, m + 1, sample)?))
}

/// Splits component `alpha` and refits the enlarged mixture.
pub fn split_component<R: Rng + ?Sized>(
    model: &MixtureModel,
    sample: &WeightedSample<'_>,
    r: &ResponsibilityMatrix,
    alpha: usize,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<EmFit> {
    let (init, _) = split_init(model, sample, r, alpha, config.min_split_membership, &config.em, rng)?;
    em_fit(&init, sample, &config.em)
}

/// Weights and memberships after removing component `alpha`.
pub fn delete_init(model: &MixtureModel, r: &ResponsibilityMatrix, alpha: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_index(model, alpha)?;
    let m = model.m();
    if m < 2 {
        return Err(Error::Domain("cannot delete the only component"));
    }
    let w_alpha = model.weights()[alpha];
    let weights = (0..m).filter(|&j| j != alpha).map(|j| model.weights()[j] / (1.0 - w_alpha)).collect();
    let mut r_new = Vec::with_capacity(r.rows() * (m - 1));
    for i in 0..r.rows() {
        let rest = 1.0 - r.get(i, alpha);
        // the row of a datum owned entirely by `alpha` is shared evenly
        let uniform = rest <= 1e-12;
        for j in (0..m).filter(|&j| j != alpha) {
            r_new.push(if uniform { 1.0 / (m - 1) as f64 } else { (r.get(i, j) / rest).min(1.0) });
        }
    }
    Ok((weights, r_new))
}

/// Deletes component `alpha` and refits.
pub fn delete_component(
    model: &MixtureModel,
    sample: &WeightedSample<'_>,
    r: &ResponsibilityMatrix,
    alpha: usize,
    em: &EmConfig,
) -> Result<EmFit> {
    let (_, r_new) = delete_init(model, r, alpha)?;
    let r_new = ResponsibilityMatrix::new(r_new, model.m() - 1, sample)?;
    em_from_responsibilities(model.family(), sample, r_new, em)
}

/// The component closest to `alpha` in KL divergence.
pub fn merge_partner(model: &MixtureModel, alpha: usize, direction: KlDirection) -> Result<usize> {
    check_index(model, alpha)?;
    if model.m() < 2 {
        return Err(Error::Domain("merging needs two components"));
    }
    let a = &model.components()[alpha];
    let mut best = (usize::MAX, f64::INFINITY);
    for (j, c) in model.components().iter().enumerate() {
        if j == alpha {
            continue;
        }
        let kl = match direction {
            KlDirection::FromTarget => component_kl(a, c)?,
            KlDirection::ToTarget => component_kl(c, a)?,
        };
        if kl < best.1 || best.0 == usize::MAX {
            best = (j, kl);
        }
    }
    Ok(best.0)
}

/// Mixture with `alpha` and `beta` replaced by one component fitted to the
/// pooled memberships `r_α + r_β`, carrying weight `w_α + w_β`.
pub fn merge_init(
    model: &MixtureModel,
    sample: &WeightedSample<'_>,
    r: &ResponsibilityMatrix,
    alpha: usize,
    beta: usize,
    em: &EmConfig,
) -> Result<(MixtureModel, Vec<f64>)> {
    check_index(model, alpha)?;
    check_index(model, beta)?;
    if alpha == beta {
        return Err(Error::Domain("a component cannot merge with itself"));
    }
    let data = sample.data;
    let pooled: Vec<f64> = (0..data.n()).map(|i| (r.get(i, alpha) + r.get(i, beta)).min(1.0)).collect();
    let weighted: Vec<f64> = pooled.iter().enumerate().map(|(i, p)| p * sample.weight(i)).collect();
    let sub = WeightedSample::weighted(data, &weighted)?;
    let merged = estimate_component(model.family(), &sub, em.mode)?;
    let (lo, hi) = if alpha < beta { (alpha, beta) } else { (beta, alpha) };
    let mut comps = Vec::with_capacity(model.m() - 1);
    let mut weights = Vec::with_capacity(model.m() - 1);
    let mut r_new = Vec::with_capacity(data.n() * (model.m() - 1));
    for j in 0..model.m() {
        if j == lo {
            comps.push(merged.clone());
            weights.push(model.weights()[alpha] + model.weights()[beta]);
        } else if j != hi {
            comps.push(model.components()[j].clone());
            weights.push(model.weights()[j]);
        }
    }
    for i in 0..data.n() {
        for j in 0..model.m() {
            if j == lo {
                r_new.push(pooled[i]);
            } else if j != hi {
                r_new.push(r.get(i, j));
            }
        }
    }
    Ok((MixtureModel::new(comps, weights)?, r_new))
}

/// Merges `alpha` with `beta` and refits.
pub fn merge_components(
    model: &MixtureModel,
    sample: &WeightedSample<'_>,
    r: &ResponsibilityMatrix,
    alpha: usize,
    beta: usize,
    em: &EmConfig,
) -> Result<EmFit> {
    let (init, _) = merge_init(model, sample, r, alpha, beta, em)?;
    em_fit(&init, sample, em)
}

/// Every split, delete and merge available from `model`, with merge pairs
/// deduplicated.
pub fn enumerate_perturbations(model: &MixtureModel, direction: KlDirection) -> Result<Vec<PerturbationSpec>> {
    let m = model.m();
    let mut out = Vec::with_capacity(3 * m);
    for a in 0..m {
        out.push(PerturbationSpec { kind: PerturbationKind::Split, target: a, partner: None });
    }
    if m > 1 {
        for a in 0..m {
            out.push(PerturbationSpec { kind: PerturbationKind::Delete, target: a, partner: None });
        }
        let mut seen: Vec<(usize, usize)> = Vec::new();
        for a in 0..m {
            let b = merge_partner(model, a, direction)?;
            let key = (a.min(b), a.max(b));
            if !seen.contains(&key) {
                seen.push(key);
                out.push(PerturbationSpec { kind: PerturbationKind::Merge, target: a, partner: Some(b) });
            }
        }
    }
    Ok(out)
}

fn split_rng(seed: u64, round: usize, target: usize) -> SimRng {
    stream(seed, ((round as u64) << 24) | target as u64)
}

fn evaluate(
    spec: &PerturbationSpec,
    current: &EmFit,
    sample: &WeightedSample<'_>,
    config: &SearchConfig,
    round: usize,
) -> Option<Perturbation> {
    let model = &current.model;
    let r = &current.responsibilities;
    let fit = match spec.kind {
        PerturbationKind::Split => {
            let mut rng = split_rng(config.seed, round, spec.target);
            split_component(model, sample, r, spec.target, config, &mut rng)
        }
        PerturbationKind::Delete => delete_component(model, sample, r, spec.target, &config.em),
        PerturbationKind::Merge => {
            merge_components(model, sample, r, spec.target, spec.partner.expect("merge has a partner"), &config.em)
        }
    }
    .ok()?;
    let score = fit.score();
    if !score.is_finite() {
        return None;
    }
    Some(Perturbation {
        kind: spec.kind,
        target: spec.target,
        partner: spec.partner,
        resulting_model: fit.model.clone(),
        resulting_score: score,
        fit,
    })
}

fn better(a: &Perturbation, b: &Perturbation) -> bool {
    (a.resulting_score, a.kind, a.target) < (b.resulting_score, b.kind, b.target)
}

/// Infers the number of components and their parameters.
pub fn infer_mixture(data: &DataSet, family: Family, config: &SearchConfig) -> Result<SearchOutcome> {
    infer_mixture_with(data, family, config, &Sequential)
}

pub fn infer_mixture_with(
    data: &DataSet,
    family: Family,
    config: &SearchConfig,
    runner: &dyn CandidateRunner,
) -> Result<SearchOutcome> {
    let needed = match family {
        Family::Gaussian => data.d() + 2,
        Family::Vmf => 2,
    };
    if data.n() < needed {
        return Err(Error::InsufficientData { needed, found: data.n() });
    }
    match config.strategy {
        SearchStrategy::MmlSearch => mml_search(data, family, config, runner),
        SearchStrategy::FjSearch => fj_search(data, family, config),
    }
}

fn mml_search(
    data: &DataSet,
    family: Family,
    config: &SearchConfig,
    runner: &dyn CandidateRunner,
) -> Result<SearchOutcome> {
    let sample = WeightedSample::unit(data);
    let em = EmConfig { mode: EmMode::Mml, ..config.em };
    let config = SearchConfig { em, ..*config };
    let mut current = fit_one_component(family, &sample, &em)?;
    let mut trace = SearchTrace::default();
    for round in 0..config.max_rounds {
        let score_before = current.score();
        let specs = enumerate_perturbations(&current.model, config.merge_kl)?;
        let eval = |s: &PerturbationSpec| evaluate(s, &current, &sample, &config, round);
        let results = runner.run(&specs, &eval);
        let failed = results.iter().filter(|r| r.is_none()).count();
        let best = results.into_iter().flatten().fold(None::<Perturbation>, |acc, p| match acc {
            Some(b) if !better(&p, &b) => Some(b),
            _ => Some(p),
        });
        let m_before = current.model.m();
        let mut rec = SearchRound {
            iteration: round,
            score_before,
            m_before,
            m_after: m_before,
            best: best.as_ref().map(|p| PerturbationSpec { kind: p.kind, target: p.target, partner: p.partner }),
            best_score: best.as_ref().map(|p| p.resulting_score),
            accepted: false,
            failed,
        };
        let accept = best.as_ref().is_some_and(|p| {
            let gain = score_before - p.resulting_score;
            gain > 0.0 && gain >= config.min_improvement * score_before.abs()
        });
        if accept {
            let p = best.expect("accepted move exists");
            rec.accepted = true;
            rec.m_after = p.resulting_model.m();
            current = p.fit;
        }
        trace.rounds.push(rec);
        if !accept {
            break;
        }
    }
    let score = current.score();
    Ok(SearchOutcome { model: current.model, score, trace })
}

/// Initial components for the annihilation search: means at distinct random
/// data points, a shared spherical covariance (or concentration).
fn fj_initial_components<R: Rng + ?Sized>(data: &DataSet, family: Family, m: usize, rng: &mut R) -> Result<Vec<Component>> {
    let d = data.d();
    let idx = sample_indices(rng, data.n(), m.min(data.n()));
    match family {
        Family::Gaussian => {
            let n = data.n() as f64;
            let mut max_var: f64 = 0.0;
            for k in 0..d {
                let mean = data.rows().map(|r| r[k]).sum::<f64>() / n;
                let var = data.rows().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
                max_var = max_var.max(var);
            }
            let var = if max_var > 0.0 { max_var / 10.0 } else { 1.0 };
            let cov = nalgebra::DMatrix::identity(d, d) * var;
            idx.iter()
                .map(|i| GaussianParams::new(data.row(i).to_vec(), cov.clone()).map(Component::Gaussian))
                .collect()
        }
        Family::Vmf => {
            let stats = directional_stats(&WeightedSample::unit(data))?;
            let kappa = if stats.rbar > 0.0 && stats.rbar < 1.0 {
                estimate_kappa(&stats, d, KappaMethod::Banerjee)?.max(1.0)
            } else {
                1.0
            };
            idx.iter().map(|i| VmfParams::new(data.row(i).to_vec(), kappa).map(Component::Vmf)).collect()
        }
    }
}

fn fj_refit(family: Family, data: &DataSet, column: &[f64], n_j: f64) -> Option<Component> {
    let sub = WeightedSample::weighted(data, column).ok()?;
    match family {
        Family::Gaussian => {
            let (mean, scatter, n) = crate::gaussian::weighted_moments(&sub).ok()?;
            if !(n_j > 0.0) {
                return None;
            }
            params_from_scatter(mean, &scatter, n).ok().map(|(p, _)| Component::Gaussian(p))
        }
        Family::Vmf => estimate_component(family, &sub, EmMode::Ml).ok(),
    }
}

fn normalised(weights: &[f64]) -> Vec<f64> {
    let s: f64 = weights.iter().sum();
    weights.iter().map(|w| w / s).collect()
}

/// Component-wise EM with annihilation, started from many components and
/// shrunk one component at a time; the size with the smallest `I_FJ` wins.
pub fn fj_search(data: &DataSet, family: Family, config: &SearchConfig) -> Result<SearchOutcome> {
    let sample = WeightedSample::unit(data);
    let n = data.n() as f64;
    let n_p = family.free_params(data.d());
    let mut rng = stream(config.seed, FJ_STREAM);
    let mut comps = fj_initial_components(data, family, config.fj_initial_m.max(1), &mut rng)?;
    let mut weights = vec![1.0 / comps.len() as f64; comps.len()];
    let mut trace = SearchTrace::default();
    let mut best: Option<(MixtureModel, f64)> = None;
    loop {
        let mut prev = f64::INFINITY;
        for _ in 0..config.em.max_iter.max(1) {
            let mut j = 0;
            while j < comps.len() {
                let model = MixtureModel::new(comps.clone(), normalised(&weights))?;
                let (r, _) = e_step(&model, &sample)?;
                // the last survivor keeps weight one even below N_p/2
                let wj = match fj_weight_update(r.n(), n_p) {
                    Ok(update) => update.weights[j],
                    Err(Error::AllAnnihilated) if comps.len() == 1 => 1.0,
                    Err(Error::AllAnnihilated) => 0.0,
                    Err(e) => return Err(e),
                };
                let refit = if wj > 0.0 { fj_refit(family, data, &r.column(j), r.n()[j]) } else { None };
                match refit {
                    Some(c) => {
                        weights[j] = wj;
                        weights = normalised(&weights);
                        comps[j] = c;
                        j += 1;
                    }
                    None => {
                        if comps.len() == 1 {
                            return Err(Error::AllAnnihilated);
                        }
                        comps.remove(j);
                        weights.remove(j);
                        weights = normalised(&weights);
                    }
                }
            }
            let model = MixtureModel::new(comps.clone(), normalised(&weights))?;
            let (_, loglik) = e_step(&model, &sample)?;
            let score = fj_from(loglik, model.weights(), n_p, n)?;
            let done = (prev - score).abs() < config.em.tol * score.abs();
            prev = score;
            if done {
                break;
            }
        }
        let model = MixtureModel::new(comps.clone(), normalised(&weights))?;
        trace.fj_path.push((model.m(), prev));
        if best.as_ref().is_none_or(|(_, s)| prev < *s) {
            best = Some((model, prev));
        }
        if comps.len() == 1 {
            break;
        }
        let smallest = weights
            .iter()
            .enumerate()
            .fold(0, |b, (j, w)| if *w < weights[b] { j } else { b });
        comps.remove(smallest);
        weights.remove(smallest);
        weights = normalised(&weights);
    }
    let (model, score) = best.expect("at least one size is visited");
    Ok(SearchOutcome { model, score, trace })
}

/// Seeds for a `k`-means++ style start: the first uniformly, the rest with
/// probability proportional to squared distance from the nearest seed.
fn plus_plus_seeds<R: Rng + ?Sized>(data: &DataSet, family: Family, m: usize, rng: &mut R) -> Vec<usize> {
    let dist = |a: &[f64], b: &[f64]| match family {
        Family::Gaussian => sq_dist(a, b),
        Family::Vmf => 1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>(),
    };
    let mut seeds = vec![rng.random_range(0..data.n())];
    let mut nearest: Vec<f64> = data.rows().map(|x| dist(x, data.row(seeds[0]))).collect();
    while seeds.len() < m {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = data.n() - 1;
            for (i, v) in nearest.iter().enumerate() {
                if u < *v {
                    pick = i;
                    break;
                }
                u -= v;
            }
            pick
        } else {
            rng.random_range(0..data.n())
        };
        seeds.push(next);
        for (v, x) in nearest.iter_mut().zip(data.rows()) {
            *v = v.min(dist(x, data.row(next)));
        }
    }
    seeds
}

/// Best of `restarts` MML fits with exactly `m` components.
pub fn fit_fixed_m(
    data: &DataSet,
    family: Family,
    m: usize,
    restarts: usize,
    seed: u64,
    em: &EmConfig,
) -> Result<EmFit> {
    if m == 0 || m > data.n() {
        return Err(Error::Domain("component count must lie in 1..=N"));
    }
    let sample = WeightedSample::unit(data);
    let mut best: Option<EmFit> = None;
    let mut last_err = Error::Domain("no restarts were run");
    for restart in 0..restarts.max(1) {
        let mut rng = stream(seed, restart as u64);
        let seeds = plus_plus_seeds(data, family, m, &mut rng);
        let mut r = vec![0.0; data.n() * m];
        for (i, x) in data.rows().enumerate() {
            let k = (0..m)
                .min_by(|&a, &b| {
                    let da = sq_dist(x, data.row(seeds[a]));
                    let db = sq_dist(x, data.row(seeds[b]));
                    da.total_cmp(&db)
                })
                .expect("m is positive");
            r[i * m + k] = 1.0;
        }
        let r = ResponsibilityMatrix::new(r, m, &sample)?;
        match em_from_responsibilities(family, &sample, r, em) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.score() < b.score()) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = e,
        }
    }
    best.ok_or(last_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::mixture_msglen;
    use nalgebra::DMatrix;

    fn gauss(mean: Vec<f64>, cov: &[f64]) -> Component {
        let d = mean.len();
        Component::Gaussian(GaussianParams::new(mean, DMatrix::from_row_slice(d, d, cov)).unwrap())
    }

    fn bimodal(seed: u64) -> DataSet {
        let truth = MixtureModel::new(vec![gauss(vec![0.0], &[1.0]), gauss(vec![10.0], &[1.0])], vec![0.5, 0.5]).unwrap();
        let (xs, _) = truth.sample(200, &mut stream(seed, 0));
        DataSet::new(xs, 1).unwrap()
    }

    #[test]
    fn split_improves_bimodal_fit() {
        let data = bimodal(1);
        let s = WeightedSample::unit(&data);
        let em = EmConfig::default();
        let one = fit_one_component(Family::Gaussian, &s, &em).unwrap();
        let cfg = SearchConfig::default();
        let (init, r2) = split_init(&one.model, &s, &one.responsibilities, 0, 4.0, &em, &mut stream(0, 0)).unwrap();
        for i in 0..data.n() {
            assert!((r2.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(init.m(), 2);
        let two = split_component(&one.model, &s, &one.responsibilities, 0, &cfg, &mut stream(0, 0)).unwrap();
        assert!(two.score() < one.score());
    }

    #[test]
    fn delete_rules() {
        let data = DataSet::new(vec![-1.0, 0.0, 5.0, 6.0, 6.5], 1).unwrap();
        let s = WeightedSample::unit(&data);
        let model = MixtureModel::new(vec![gauss(vec![0.0], &[1.0]), gauss(vec![6.0], &[1.0])], vec![0.5, 0.5]).unwrap();
        let r = ResponsibilityMatrix::new(vec![1.0, 0.0, 0.3, 0.7, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 2, &s).unwrap();
        let (w, r2) = delete_init(&model, &r, 1).unwrap();
        assert_eq!(w, vec![1.0]);
        assert!(r2.iter().all(|v| (v - 1.0).abs() < 1e-15));

        let three = MixtureModel::new(
            vec![gauss(vec![0.0], &[1.0]), gauss(vec![3.0], &[1.0]), gauss(vec![6.0], &[1.0])],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let rows = vec![0.0, 0.0, 1.0, 0.2, 0.2, 0.6, 0.5, 0.5, 0.0, 0.1, 0.8, 0.1, 0.0, 0.0, 1.0];
        let r = ResponsibilityMatrix::new(rows, 3, &s).unwrap();
        let (w, r2) = delete_init(&three, &r, 2).unwrap();
        assert!((w[0] - 0.4).abs() < 1e-15 && (w[1] - 0.6).abs() < 1e-15);
        assert_eq!(&r2[..2], &[0.5, 0.5]);
        assert!((r2[2] - 0.5).abs() < 1e-15);
        for row in r2.chunks(2) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deleting_a_true_component_is_worse() {
        let data = bimodal(2);
        let s = WeightedSample::unit(&data);
        let em = EmConfig::default();
        let two = fit_fixed_m(&data, Family::Gaussian, 2, 3, 0, &em).unwrap();
        let del = delete_component(&two.model, &s, &two.responsibilities, 0, &em).unwrap();
        assert!(del.score() > two.score());
    }

    #[test]
    fn merge_partner_and_identical_merge() {
        let a = gauss(vec![0.0], &[1.0]);
        let b = gauss(vec![0.5], &[1.0]);
        let c = gauss(vec![3.0], &[1.0]);
        let model = MixtureModel::new(vec![a.clone(), b.clone(), c.clone()], vec![0.3, 0.3, 0.4]).unwrap();
        let kab = component_kl(&a, &b).unwrap();
        let kac = component_kl(&a, &c).unwrap();
        assert!(kab < kac);
        assert_eq!(merge_partner(&model, 0, KlDirection::FromTarget).unwrap(), 1);

        let truth = MixtureModel::new(vec![a.clone()], vec![1.0]).unwrap();
        let (xs, _) = truth.sample(300, &mut stream(3, 0));
        let data = DataSet::new(xs, 1).unwrap();
        let s = WeightedSample::unit(&data);
        let em = EmConfig::default();
        let one = fit_one_component(Family::Gaussian, &s, &em).unwrap();
        let c0 = one.model.components()[0].clone();
        let dup = MixtureModel::new(vec![c0.clone(), c0], vec![0.5, 0.5]).unwrap();
        let (r, _) = e_step(&dup, &s).unwrap();
        let (_, pooled) = merge_init(&dup, &s, &r, 0, 1, &em).unwrap();
        for row in pooled.iter() {
            assert!((row - 1.0).abs() < 1e-12);
        }
        let merged = merge_components(&dup, &s, &r, 0, 1, &em).unwrap();
        assert!(merged.score() < mixture_msglen(&dup, &data).unwrap().total);
    }

    #[test]
    fn merge_pairs_are_deduplicated() {
        let model = MixtureModel::new(
            vec![gauss(vec![0.0], &[1.0]), gauss(vec![0.1], &[1.0]), gauss(vec![9.0], &[1.0])],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        let specs = enumerate_perturbations(&model, KlDirection::FromTarget).unwrap();
        let merges: Vec<_> = specs.iter().filter(|s| s.kind == PerturbationKind::Merge).collect();
        // 0↔1 found from both ends, 2→1
        assert_eq!(merges.len(), 2);
        assert_eq!(specs.len(), 3 + 3 + 2);
    }

    #[test]
    fn search_finds_two_clusters() {
        let data = bimodal(4);
        let out = infer_mixture(&data, Family::Gaussian, &SearchConfig::default()).unwrap();
        assert_eq!(out.model.m(), 2);
        let scores = out.trace.accepted_scores();
        for w in scores.windows(2) {
            assert!(w[1] < w[0]);
        }
        for round in &out.trace.rounds {
            assert!(round.best.is_some());
        }
    }

    #[test]
    fn search_on_directional_data() {
        let a = Component::Vmf(VmfParams::new(vec![1.0, 0.0, 0.0], 40.0).unwrap());
        let b = Component::Vmf(VmfParams::new(vec![0.0, 1.0, 0.0], 40.0).unwrap());
        let truth = MixtureModel::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        let (xs, _) = truth.sample(300, &mut stream(5, 0));
        let data = DataSet::unit_vectors(xs, 3).unwrap();
        let cfg = SearchConfig { seed: 9, ..SearchConfig::default() };
        let out = infer_mixture(&data, Family::Vmf, &cfg).unwrap();
        assert_eq!(out.model.m(), 2);
        let again = infer_mixture(&data, Family::Vmf, &cfg).unwrap();
        assert_eq!(out.score, again.score);
    }

    #[test]
    fn fj_search_recovers_separated_clusters() {
        let data = bimodal(6);
        let cfg = SearchConfig { strategy: SearchStrategy::FjSearch, fj_initial_m: 10, ..SearchConfig::default() };
        let out = infer_mixture(&data, Family::Gaussian, &cfg).unwrap();
        assert_eq!(out.model.m(), 2);
        assert!(out.trace.fj_path.iter().any(|(m, _)| *m == 1));
    }

    #[test]
    fn fixed_m_fit_is_deterministic() {
        let data = bimodal(7);
        let em = EmConfig::default();
        let a = fit_fixed_m(&data, Family::Gaussian, 3, 2, 11, &em).unwrap();
        let b = fit_fixed_m(&data, Family::Gaussian, 3, 2, 11, &em).unwrap();
        assert_eq!(a.score(), b.score());
    }
}
