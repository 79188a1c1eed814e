//! von Mises-Fisher distributions on the unit sphere in `R^d`.
//!
//! Densities are `C_d(κ) exp(κ μᵀx)`. Six estimators of κ are provided, the
//! MML message length of a component, the closed-form KL divergence and
//! Wood's rejection sampler.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::data::{WeightedSample, UNIT_NORM_TOL};
use crate::error::{Error, Result};
use crate::special_functions::{
    bessel_ratio, bessel_ratio_derivatives, ln_gamma, log_sphere_area, log_vmf_norm_constant,
    BesselRatioTable,
};
use crate::{lattice_nats, nats_to_bits};

/// Smallest concentration any estimator returns.
pub const KAPPA_MIN: f64 = 1e-6;
/// Largest concentration any estimator returns.
pub const KAPPA_MAX: f64 = 1e10;
/// Mean resultant lengths are clamped to at most `1 - RBAR_GAP`.
pub const RBAR_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams {
    pub mean_direction: Vec<f64>,
    pub kappa: f64,
}

impl VmfParams {
    pub fn new(mean_direction: Vec<f64>, kappa: f64) -> Result<Self> {
        if mean_direction.len() < 2 {
            return Err(Error::Domain("vMF dimension must be at least 2"));
        }
        let norm = norm(&mean_direction);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain("mean direction must be a unit vector"));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Domain("concentration must be finite and non-negative"));
        }
        Ok(VmfParams { mean_direction, kappa })
    }

    pub fn d(&self) -> usize {
        self.mean_direction.len()
    }

    pub fn log_norm_constant(&self) -> Result<f64> {
        log_vmf_norm_constant(self.d(), self.kappa)
    }
}

/// Sufficient statistics of a (weighted) sample of unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalStats {
    pub resultant: Vec<f64>,
    pub resultant_norm: f64,
    pub n_effective: f64,
    pub rbar: f64,
}

impl DirectionalStats {
    pub fn d(&self) -> usize {
        self.resultant.len()
    }

    /// Statistics from a resultant vector and sample size, with `R̄` clamped.
    pub fn from_resultant(resultant: Vec<f64>, n_effective: f64) -> Result<Self> {
        if !(n_effective > 0.0) {
            return Err(Error::Domain("effective sample size must be positive"));
        }
        let mut resultant_norm = norm(&resultant);
        let cap = (1.0 - RBAR_GAP) * n_effective;
        if resultant_norm > cap {
            resultant_norm = cap;
        }
        Ok(DirectionalStats { rbar: resultant_norm / n_effective, resultant, resultant_norm, n_effective })
    }

    /// Unit vector along the resultant.
    pub fn mean_direction(&self) -> Result<Vec<f64>> {
        let r = norm(&self.resultant);
        if !(r > 0.0) {
            return Err(Error::ZeroResultant);
        }
        Ok(self.resultant.iter().map(|v| v / r).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KappaMethod {
    Banerjee,
    Tanabe,
    Sra,
    Song,
    MmlNewton,
    MmlHalley,
}

impl KappaMethod {
    pub const ALL: [KappaMethod; 6] = [
        KappaMethod::Banerjee,
        KappaMethod::Tanabe,
        KappaMethod::Sra,
        KappaMethod::Song,
        KappaMethod::MmlNewton,
        KappaMethod::MmlHalley,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KappaMethod::Banerjee => "banerjee",
            KappaMethod::Tanabe => "tanabe",
            KappaMethod::Sra => "sra",
            KappaMethod::Song => "song",
            KappaMethod::MmlNewton => "mml_newton",
            KappaMethod::MmlHalley => "mml_halley",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log f(x) = log C_d(κ) + κ μᵀx`.
pub fn vmf_log_density(params: &VmfParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.d() {
        return Err(Error::DimensionMismatch { expected: params.d(), found: x.len() });
    }
    if (norm(x) - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Domain("observation is not a unit vector"));
    }
    Ok(params.log_norm_constant()? + params.kappa * dot(&params.mean_direction, x))
}

/// Weighted resultant of a sample of unit vectors.
pub fn directional_stats(sample: &WeightedSample<'_>) -> Result<DirectionalStats> {
    let d = sample.data.d();
    let mut resultant = vec![0.0; d];
    let mut n = 0.0;
    for (w, row) in sample.iter() {
        if w == 0.0 {
            continue;
        }
        n += w;
        for (r, x) in resultant.iter_mut().zip(row) {
            *r += w * x;
        }
    }
    if !(n > 0.0) {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    DirectionalStats::from_resultant(resultant, n)
}

fn clamp_kappa(k: f64) -> f64 {
    k.max(KAPPA_MIN).min(KAPPA_MAX)
}

/// Banerjee's closed-form approximation.
fn kappa_banerjee(rbar: f64, d: f64) -> f64 {
    rbar * (d - rbar * rbar) / (1.0 - rbar * rbar)
}

/// `I(κ)` up to its κ-free constant, `G = I'` and the next two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaObjective {
    pub i: f64,
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
}

/// Message length of a single vMF as a function of κ (nats), with derivatives.
pub fn mml_kappa_objective(kappa: f64, stats: &DirectionalStats, d: usize) -> Result<KappaObjective> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Domain("concentration must be positive"));
    }
    let t = bessel_ratio_derivatives(d, kappa)?;
    let log_c = log_vmf_norm_constant(d, kappa)?;
    let (n, r) = (stats.n_effective, stats.resultant_norm);
    let obj = objective_from_table(&t, log_c, n, r);
    if !(obj.i.is_finite() && obj.g.is_finite() && obj.g1.is_finite() && obj.g2.is_finite()) {
        return Err(Error::NonFinite("MML concentration objective"));
    }
    Ok(obj)
}

fn objective_from_table(t: &BesselRatioTable, log_c: f64, n: f64, r: f64) -> KappaObjective {
    let (a, a1, a2, a3, k) = (t.a, t.a1, t.a2, t.a3, t.kappa);
    let df = t.d as f64;
    let c = df - 1.0;
    let k2 = k * k;
    let k3 = k2 * k;
    let one_k2 = 1.0 + k2;

    let i = 0.5 * c * (a / k).ln() + 0.5 * a1.ln() + 0.5 * (df + 1.0) * one_k2.ln() - n * log_c - k * r;

    // (A'/A)' and (A'/A)''
    let ra1 = -a1 / (a * a) - a1 + c / k2;
    let ra2 = 2.0 * a1 * a1 / (a * a * a) - a2 / (a * a) - a2 - 2.0 * c / k3;
    // (A''/A')' and (A''/A')''
    let qa1 = -2.0 * a1 + 2.0 * c / k2 - c / k3 * (a / a1) * (k * a2 / a1 + 2.0);
    let dx = (k * a * a1 * a3 + k * a1 * a1 * a2 - 2.0 * k * a * a2 * a2 - 2.0 * a * a1 * a2) / (k3 * a1 * a1 * a1);
    let dy = 1.0 / k3 - a / (k2 * k2 * a1 * a1) * (k * a2 + 3.0 * a1);
    let qa2 = -2.0 * a2 - 4.0 * c / k3 - c * dx - 2.0 * c * dy;

    let g = -c / (2.0 * k) + (df + 1.0) * k / one_k2 + 0.5 * c * a1 / a + 0.5 * a2 / a1 + n * a - r;
    let g1 = c / (2.0 * k2) + (df + 1.0) * (1.0 - k2) / (one_k2 * one_k2) + 0.5 * c * ra1 + 0.5 * qa1 + n * a1;
    let g2 = -c / k3 + (df + 1.0) * 2.0 * k * (k2 - 3.0) / (one_k2 * one_k2 * one_k2)
        + 0.5 * c * ra2
        + 0.5 * qa2
        + n * a2;
    KappaObjective { i, g, g1, g2 }
}

fn newton_step(k: f64, f: f64, f1: f64) -> f64 {
    k - f / f1
}

fn halley_step(k: f64, f: f64, f1: f64, f2: f64) -> f64 {
    k - 2.0 * f * f1 / (2.0 * f1 * f1 - f * f2)
}

fn checked(k: f64, step: &'static str) -> Result<f64> {
    if k.is_finite() {
        Ok(k)
    } else {
        Err(Error::NonFinite(step))
    }
}

/// Estimate of κ from directional statistics by the chosen method.
///
/// The polishing methods take exactly two Newton or Halley steps from
/// Banerjee's value; every result is clamped to `[KAPPA_MIN, KAPPA_MAX]`.
pub fn estimate_kappa(stats: &DirectionalStats, d: usize, method: KappaMethod) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain("dimension must be at least 2"));
    }
    let rbar = stats.rbar;
    if !(rbar > 0.0 && rbar < 1.0) {
        return Err(Error::Domain("mean resultant length must lie in (0, 1)"));
    }
    let df = d as f64;
    let kb = clamp_kappa(kappa_banerjee(rbar, df));
    let out = match method {
        KappaMethod::Banerjee => kb,
        KappaMethod::Tanabe => {
            let denom = 1.0 - rbar * rbar;
            let kl = rbar * (df - 2.0) / denom;
            let ku = rbar * df / denom;
            let phi = |k: f64| -> Result<f64> {
                if k == 0.0 {
                    // lim κ→0 of R̄κ/A_d(κ)
                    Ok(rbar * df)
                } else {
                    Ok(rbar * k / bessel_ratio(d, k)?)
                }
            };
            let (pl, pu) = (phi(kl)?, phi(ku)?);
            checked((kl * pu - ku * pl) / ((pu - pl) - (ku - kl)), "tanabe interpolation")?
        }
        KappaMethod::Sra | KappaMethod::Song => {
            let mut k = kb;
            for step in ["first root-polishing step", "second root-polishing step"] {
                let t = bessel_ratio_derivatives(d, k)?;
                let f = t.a - rbar;
                k = if method == KappaMethod::Sra {
                    newton_step(k, f, t.a1)
                } else {
                    halley_step(k, f, t.a1, t.a2)
                };
                k = clamp_kappa(checked(k, step)?);
            }
            k
        }
        KappaMethod::MmlNewton | KappaMethod::MmlHalley => {
            let mut k = kb;
            for step in ["first MML step", "second MML step"] {
                let o = mml_kappa_objective(k, stats, d)?;
                k = if method == KappaMethod::MmlNewton {
                    newton_step(k, o.g, o.g1)
                } else {
                    halley_step(k, o.g, o.g1, o.g2)
                };
                k = clamp_kappa(checked(k, step)?);
            }
            k
        }
    };
    Ok(clamp_kappa(out))
}

/// Root of `G(κ) = 0` in `[KAPPA_MIN, KAPPA_MAX]`, polished to convergence.
///
/// Starts from the two-step Halley estimate and falls back to bisection on
/// the bracket whenever a Halley step leaves it.
pub fn mml_kappa_root(stats: &DirectionalStats, d: usize) -> Result<f64> {
    let mut k = estimate_kappa(stats, d, KappaMethod::MmlHalley)?;
    let (mut lo, mut hi) = (KAPPA_MIN, KAPPA_MAX);
    let g_lo = mml_kappa_objective(lo, stats, d)?.g;
    if g_lo >= 0.0 {
        return Ok(lo);
    }
    if mml_kappa_objective(hi, stats, d)?.g <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let o = mml_kappa_objective(k, stats, d)?;
        if o.g == 0.0 {
            return Ok(k);
        }
        if o.g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let mut next = halley_step(k, o.g, o.g1, o.g2);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        }
        if (next - k).abs() <= 1e-13 * k {
            return Ok(next);
        }
        k = next;
    }
    Ok(k)
}

/// Maximum likelihood κ: the root of `A_d(κ) = R̄`, polished to convergence.
pub fn ml_kappa_root(rbar: f64, d: usize) -> Result<f64> {
    if !(rbar > 0.0 && rbar < 1.0) {
        return Err(Error::Domain("mean resultant length must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (KAPPA_MIN, KAPPA_MAX);
    if bessel_ratio(d, lo)? >= rbar {
        return Ok(lo);
    }
    if bessel_ratio(d, hi)? <= rbar {
        return Ok(hi);
    }
    let mut k = clamp_kappa(kappa_banerjee(rbar, d as f64));
    for _ in 0..200 {
        let t = bessel_ratio_derivatives(d, k)?;
        let f = t.a - rbar;
        if f == 0.0 {
            return Ok(k);
        }
        if f < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let mut next = newton_step(k, f, t.a1);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        }
        if (next - k).abs() <= 1e-13 * k {
            return Ok(next);
        }
        k = next;
    }
    Ok(k)
}

pub(crate) fn vmf_ml_from_stats(stats: &DirectionalStats) -> Result<VmfParams> {
    let mu = stats.mean_direction()?;
    let kappa = ml_kappa_root(stats.rbar, stats.d())?;
    Ok(VmfParams { mean_direction: mu, kappa })
}

/// Estimates the mean direction and κ of a weighted sample.
pub fn estimate_vmf(sample: &WeightedSample<'_>, method: KappaMethod) -> Result<VmfParams> {
    let stats = directional_stats(sample)?;
    let mu = stats.mean_direction()?;
    let kappa = estimate_kappa(&stats, sample.data.d(), method)?;
    Ok(VmfParams { mean_direction: mu, kappa })
}

/// MML estimate with κ at the exact root of `G`; used inside EM.
pub fn estimate_vmf_mml(sample: &WeightedSample<'_>) -> Result<VmfParams> {
    let stats = directional_stats(sample)?;
    vmf_mml_from_stats(&stats)
}

pub(crate) fn vmf_mml_from_stats(stats: &DirectionalStats) -> Result<VmfParams> {
    let mu = stats.mean_direction()?;
    let kappa = mml_kappa_root(stats, stats.d())?;
    Ok(VmfParams { mean_direction: mu, kappa })
}

/// Log of the normalising constant of the prior on κ,
/// `h(κ) ∝ κ^{d-1} / (1+κ²)^{(d+1)/2}` over `(0, ∞)`.
fn log_kappa_prior_norm(d: usize) -> f64 {
    let df = d as f64;
    LN_2 + ln_gamma(0.5 * (df + 1.0)) - 0.5 * PI.ln() - ln_gamma(0.5 * df)
}

/// `log |F(μ, κ)| = (d-1) log(NκA) + log(N A')`.
pub fn vmf_log_fisher(kappa: f64, n_effective: f64, d: usize) -> Result<f64> {
    if !(n_effective > 0.0) {
        return Err(Error::Domain("effective sample size must be positive"));
    }
    let t = bessel_ratio_derivatives(d, kappa)?;
    let c = (d - 1) as f64;
    Ok(c * (n_effective * kappa * t.a).ln() + (n_effective * t.a1).ln())
}

/// `-log h(μ, κ)` in nats: uniform on the sphere for μ, the normalised
/// `κ^{d-1}/(1+κ²)^{(d+1)/2}` density for κ.
pub fn vmf_neg_log_prior(kappa: f64, d: usize) -> f64 {
    let df = d as f64;
    log_sphere_area(d) - log_kappa_prior_norm(d) - (df - 1.0) * kappa.ln()
        + 0.5 * (df + 1.0) * (1.0 + kappa * kappa).ln()
}

/// Cost of stating one vMF component, in bits: `-log h + ½ log|F|` plus the
/// lattice terms for its `d` free parameters.
pub fn vmf_component_msglen(params: &VmfParams, stats: &DirectionalStats) -> Result<f64> {
    Ok(nats_to_bits(vmf_parameter_nats(params.kappa, stats.n_effective, params.d())? + lattice_nats(params.d())))
}

/// `-log h + ½ log|F|` in nats.
pub(crate) fn vmf_parameter_nats(kappa: f64, n_effective: f64, d: usize) -> Result<f64> {
    if kappa <= 0.0 {
        return Err(Error::Domain("the concentration prior vanishes at zero"));
    }
    Ok(vmf_neg_log_prior(kappa, d) + 0.5 * vmf_log_fisher(kappa, n_effective, d)?)
}

/// Single-component message length of a data set in bits, including the data
/// precision term `-N d log ε`.
pub fn vmf_total_msglen(params: &VmfParams, sample: &WeightedSample<'_>) -> Result<f64> {
    let stats = directional_stats(sample)?;
    let log_c = params.log_norm_constant()?;
    let loglik = stats.n_effective * log_c + params.kappa * dot(&params.mean_direction, &stats.resultant);
    let d = params.d() as f64;
    let precision = -stats.n_effective * d * sample.data.epsilon().ln();
    Ok(vmf_component_msglen(params, &stats)? + nats_to_bits(precision - loglik))
}

/// `KL(f ‖ g)` in nats.
pub fn vmf_kl(f: &VmfParams, g: &VmfParams) -> Result<f64> {
    if f.d() != g.d() {
        return Err(Error::DimensionMismatch { expected: f.d(), found: g.d() });
    }
    let d = f.d();
    let a1 = if f.kappa == 0.0 { 0.0 } else { bessel_ratio(d, f.kappa)? };
    let cos = dot(&f.mean_direction, &g.mean_direction);
    let kl = log_vmf_norm_constant(d, f.kappa)? - log_vmf_norm_constant(d, g.kappa)? + a1 * (f.kappa - g.kappa * cos);
    Ok(kl.max(0.0))
}

/// Draws `n` unit vectors with Wood's rejection scheme; rows are concatenated.
pub fn vmf_sample<R: Rng + ?Sized>(params: &VmfParams, n: usize, rng: &mut R) -> Vec<f64> {
    let d = params.d();
    let dm1 = (d - 1) as f64;
    let kappa = params.kappa;
    // b = (-2κ + sqrt(4κ² + (d-1)²)) / (d-1), written without cancellation
    let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
    let beta = Beta::new(0.5 * dm1, 0.5 * dm1).expect("shape parameters are positive");
    let ln_1pb = b.ln_1p();
    let one_minus_x0 = 2.0 * b / (1.0 + b);
    let mut out = Vec::with_capacity(n * d);
    let mut tangent = vec![0.0; d];
    for _ in 0..n {
        let (w, one_minus_w) = loop {
            let z: f64 = beta.sample(rng);
            let denom = 1.0 - (1.0 - b) * z;
            let one_minus_w = 2.0 * b * z / denom;
            let w = 1.0 - one_minus_w;
            // κ(w - x0) + (d-1)[log(1 - x0 w) - log(1 - x0²)]
            let log_accept = kappa * (one_minus_x0 - one_minus_w) + dm1 * (ln_1pb - LN_2 - denom.ln());
            let u: f64 = rng.random();
            if log_accept >= u.ln() {
                break (w, one_minus_w);
            }
        };
        let mu = &params.mean_direction;
        let tnorm = loop {
            for t in tangent.iter_mut() {
                *t = StandardNormal.sample(rng);
            }
            let proj = dot(&tangent, mu);
            for (t, m) in tangent.iter_mut().zip(mu) {
                *t -= proj * m;
            }
            let tn = norm(&tangent);
            if tn > 1e-12 {
                break tn;
            }
        };
        let s = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
        let start = out.len();
        out.extend(mu.iter().zip(&tangent).map(|(m, t)| w * m + s * t / tnorm));
        let nrm = norm(&out[start..]);
        out[start..].iter_mut().for_each(|v| *v /= nrm);
    }
    out
}

/// [`vmf_sample`] on stream 0 of the generator keyed by `seed`.
pub fn vmf_sample_seeded(params: &VmfParams, n: usize, seed: u64) -> Vec<f64> {
    vmf_sample(params, n, &mut crate::rng::stream(seed, 0))
}

/// Unit vector at polar angle `theta` and azimuth `phi` (radians).
pub fn angles_to_unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}
