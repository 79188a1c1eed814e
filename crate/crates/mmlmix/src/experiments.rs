//! Seeded simulation studies: κ-estimator benchmarks, mixture recovery
//! experiments and message-length curves, with CSV/TSV emitters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mmlmix_core::data::WeightedSample;
use mmlmix_core::evaluation::compare_models;
use mmlmix_core::gaussian::GaussianParams;
use mmlmix_core::mixture::{Component, EmConfig, Family, MixtureModel};
use mmlmix_core::rng::stream;
use mmlmix_core::search::{fit_fixed_m, infer_mixture_with, SearchConfig, SearchStrategy};
use mmlmix_core::vmf::{directional_stats, estimate_kappa, vmf_kl, vmf_sample, vmf_total_msglen, KappaMethod, VmfParams};
use mmlmix_core::{DataSet, Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::parallel::{parallel_map, Threaded};

/// Trials per benchmark cell at desk scale and with `--full`.
pub const DESK_KAPPA_TRIALS: usize = 200;
pub const FULL_KAPPA_TRIALS: usize = 1000;
pub const DESK_RECOVERY_TRIALS: usize = 20;
pub const FULL_RECOVERY_TRIALS: usize = 50;

/// Samples drawn from the generator for each empirical KL estimate.
pub const DEFAULT_KL_SAMPLES: usize = 10_000;

/// Derives a child seed from `h` and `v`.
pub fn mix(h: u64, v: u64) -> u64 {
    // splitmix64 finaliser over the running hash
    let mut z = h ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed` with [`mix`].
pub fn key(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(seed, |h, &p| mix(h, p))
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A row of an emitted table.
pub trait TableRow {
    fn header() -> Vec<&'static str>;
    fn fields(&self) -> Vec<String>;
}

/// First 8 bytes of the SHA-256 of the grid description, as hex.
pub fn grid_hash(grid: &str) -> String {
    Sha256::digest(grid.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `{experiment}_{grid-hash}.csv` and a matching gnuplot `.tsv`.
pub fn write_table<R: TableRow>(dir: &Path, experiment: &str, grid: &str, rows: &[R]) -> std::io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let stem = format!("{experiment}_{}", grid_hash(grid));
    let csv_path = dir.join(format!("{stem}.csv"));
    let tsv_path = dir.join(format!("{stem}.tsv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(R::header())?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    let mut t = BufWriter::new(File::create(&tsv_path)?);
    writeln!(t, "# {}", R::header().join("\t"))?;
    for r in rows {
        writeln!(t, "{}", r.fields().join("\t"))?;
    }
    t.flush()?;
    Ok((csv_path, tsv_path))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaCell {
    pub n: usize,
    pub d: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaBenchmarkSpec {
    pub cells: Vec<KappaCell>,
    pub methods: Vec<KappaMethod>,
    pub trials: usize,
    pub seed: u64,
    pub threads: usize,
}

impl KappaBenchmarkSpec {
    /// The `N × d × κ` grid `{10,100} × {10,100,1000} × {10,100,1000}`.
    pub fn standard(full: bool, seed: u64) -> Self {
        let mut cells = Vec::new();
        for n in [10, 100] {
            for d in [10, 100, 1000] {
                for kappa in [10.0, 100.0, 1000.0] {
                    cells.push(KappaCell { n, d, kappa });
                }
            }
        }
        KappaBenchmarkSpec {
            cells,
            methods: vec![
                KappaMethod::Tanabe,
                KappaMethod::Sra,
                KappaMethod::Song,
                KappaMethod::MmlNewton,
                KappaMethod::MmlHalley,
            ],
            trials: if full { FULL_KAPPA_TRIALS } else { DESK_KAPPA_TRIALS },
            seed,
            threads: 1,
        }
    }

    pub fn grid_description(&self) -> String {
        let cells: Vec<String> = self.cells.iter().map(|c| format!("{},{},{}", c.n, c.d, c.kappa)).collect();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        format!("kappa;{};{};trials={};seed={}", cells.join(";"), methods.join(","), self.trials, self.seed)
    }
}

/// Per-(cell, method) statistics over the trials.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaRow {
    pub n: usize,
    pub d: usize,
    pub kappa: f64,
    pub method: &'static str,
    pub trials: usize,
    pub mean_estimate: f64,
    pub mean_abs_err: f64,
    pub abs_err_se: f64,
    pub mse: f64,
    pub bias_sq: f64,
    pub variance: f64,
    /// `KL(true ‖ estimate)` in bits.
    pub mean_kl: f64,
    pub kl_se: f64,
    /// Single-component message length of the sample, in bits.
    pub mean_msglen: f64,
}

impl TableRow for KappaRow {
    fn header() -> Vec<&'static str> {
        vec![
            "N", "d", "kappa", "method", "trials", "mean_estimate", "mean_abs_err", "abs_err_se", "mse", "bias_sq",
            "variance", "mean_kl", "kl_se", "mean_msglen",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.d.to_string(),
            self.kappa.to_string(),
            self.method.to_string(),
            self.trials.to_string(),
            self.mean_estimate.to_string(),
            self.mean_abs_err.to_string(),
            self.abs_err_se.to_string(),
            self.mse.to_string(),
            self.bias_sq.to_string(),
            self.variance.to_string(),
            self.mean_kl.to_string(),
            self.kl_se.to_string(),
            self.mean_msglen.to_string(),
        ]
    }
}

fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

struct KappaTrial {
    estimate: Vec<f64>,
    kl: Vec<f64>,
    msglen: Vec<f64>,
}

fn kappa_trial(cell: &KappaCell, methods: &[KappaMethod], seed: u64) -> Result<KappaTrial> {
    let mut rng = stream(seed, 0);
    let truth = VmfParams::new(random_direction(cell.d, &mut rng), cell.kappa)?;
    let data = DataSet::normalized(vmf_sample(&truth, cell.n, &mut rng), cell.d)?;
    let sample = WeightedSample::unit(&data);
    let stats = directional_stats(&sample)?;
    let mu = stats.mean_direction()?;
    let mut out = KappaTrial { estimate: Vec::new(), kl: Vec::new(), msglen: Vec::new() };
    for &m in methods {
        let k = estimate_kappa(&stats, cell.d, m)?;
        let fitted = VmfParams::new(mu.clone(), k)?;
        out.estimate.push(k);
        out.kl.push(vmf_kl(&truth, &fitted)? / std::f64::consts::LN_2);
        out.msglen.push(vmf_total_msglen(&fitted, &sample)?);
    }
    Ok(out)
}

/// Monte Carlo error, divergence and message-length statistics of each
/// κ estimator, one row per (cell, method).
pub fn run_kappa_benchmark(spec: &KappaBenchmarkSpec) -> Result<Vec<KappaRow>> {
    if spec.trials == 0 || spec.cells.is_empty() || spec.methods.is_empty() {
        return Err(Error::Domain("benchmark needs trials, cells and methods"));
    }
    let mut rows = Vec::new();
    for cell in &spec.cells {
        let cell_seed = key(spec.seed, &[cell.n as u64, cell.d as u64, cell.kappa.to_bits()]);
        let trials = parallel_map(spec.trials, spec.threads, |t| kappa_trial(cell, &spec.methods, mix(cell_seed, t as u64)));
        let trials: Vec<KappaTrial> = trials.into_iter().collect::<Result<_>>()?;
        for (j, m) in spec.methods.iter().enumerate() {
            let est: Vec<f64> = trials.iter().map(|t| t.estimate[j]).collect();
            let abs: Vec<f64> = est.iter().map(|k| (k - cell.kappa).abs()).collect();
            let kl: Vec<f64> = trials.iter().map(|t| t.kl[j]).collect();
            let n = est.len() as f64;
            let mean_est = est.iter().sum::<f64>() / n;
            let (mean_abs_err, abs_err_se) = mean_se(&abs);
            let (mean_kl, kl_se) = mean_se(&kl);
            rows.push(KappaRow {
                n: cell.n,
                d: cell.d,
                kappa: cell.kappa,
                method: m.name(),
                trials: spec.trials,
                mean_estimate: mean_est,
                mean_abs_err,
                abs_err_se,
                mse: abs.iter().map(|e| e * e).sum::<f64>() / n,
                bias_sq: (mean_est - cell.kappa).powi(2),
                variance: est.iter().map(|k| (k - mean_est).powi(2)).sum::<f64>() / n,
                mean_kl,
                kl_se,
                mean_msglen: trials.iter().map(|t| t.msglen[j]).sum::<f64>() / n,
            });
        }
    }
    Ok(rows)
}

/// Two-component bivariate mixture with means `(0,0)` and `(δ,0)`, identity covariances.
pub fn bivariate_pair(delta: f64) -> Result<MixtureModel> {
    gaussian_pair(2, &[delta, 0.0])
}

/// Two-component 10-variate mixture with means `0` and `(δ,…,δ)`, identity covariances.
pub fn ten_variate_pair(delta: f64) -> Result<MixtureModel> {
    gaussian_pair(10, &[delta; 10])
}

fn gaussian_pair(d: usize, offset: &[f64]) -> Result<MixtureModel> {
    let a = GaussianParams::new(vec![0.0; d], DMatrix::identity(d, d))?;
    let b = GaussianParams::new(offset.to_vec(), DMatrix::identity(d, d))?;
    MixtureModel::new(vec![Component::Gaussian(a), Component::Gaussian(b)], vec![0.5, 0.5])
}

/// Equal-weight bivariate mixture of three parallel bars: means `(0,-2)`,
/// `(0,0)`, `(0,2)` and covariances `diag(2, 0.2)`.
pub fn three_bars() -> Result<MixtureModel> {
    let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.2]));
    let comps = [-2.0, 0.0, 2.0]
        .iter()
        .map(|&y| GaussianParams::new(vec![0.0, y], cov.clone()).map(Component::Gaussian))
        .collect::<Result<Vec<_>>>()?;
    MixtureModel::new(comps, vec![1.0 / 3.0; 3])
}

/// Equal-weight vMF mixture in `d` dimensions; component `j` has
/// concentration `kappas[j]` and mean at angle `angles_deg[j]` from the
/// last axis, rotated towards the first.
pub fn vmf_family(d: usize, kappas: &[f64], angles_deg: &[f64]) -> Result<MixtureModel> {
    if kappas.len() != angles_deg.len() || d < 2 {
        return Err(Error::Domain("one angle per concentration and d ≥ 2"));
    }
    let comps = kappas
        .iter()
        .zip(angles_deg)
        .map(|(&k, &a)| {
            let mut mu = vec![0.0; d];
            mu[d - 1] = a.to_radians().cos();
            mu[0] += a.to_radians().sin();
            VmfParams::new(mu, k).map(Component::Vmf)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = comps.len();
    MixtureModel::new(comps, vec![1.0 / m as f64; m])
}

/// Draws `n` points and wraps them as a data set of the generator's family.
pub fn simulate(model: &MixtureModel, n: usize, seed: u64) -> Result<(DataSet, Vec<usize>)> {
    let (values, labels) = model.sample(n, &mut stream(seed, 0));
    let data = match model.family() {
        Family::Gaussian => DataSet::new(values, model.d())?,
        Family::Vmf => DataSet::normalized(values, model.d())?,
    };
    Ok((data, labels))
}

#[derive(Debug, Clone)]
pub struct RecoveryCell {
    /// Sweep variable name, e.g. `delta` or `N`.
    pub label: String,
    pub value: f64,
    pub n: usize,
    pub generator: MixtureModel,
}

#[derive(Debug, Clone)]
pub struct RecoverySpec {
    pub name: String,
    pub cells: Vec<RecoveryCell>,
    pub trials: usize,
    pub seed: u64,
    pub kl_samples: usize,
    pub search: SearchConfig,
    pub threads: usize,
}

impl RecoverySpec {
    pub fn new(name: &str, cells: Vec<RecoveryCell>, trials: usize, seed: u64) -> Self {
        RecoverySpec {
            name: name.to_string(),
            cells,
            trials,
            seed,
            kl_samples: DEFAULT_KL_SAMPLES,
            search: SearchConfig::default(),
            threads: 1,
        }
    }

    /// Bivariate pair, `N = 100`, `δ ∈ {1.8, 1.9, …, 2.6}`.
    pub fn bivariate(full: bool, seed: u64) -> Result<Self> {
        let cells = (0..9)
            .map(|i| {
                let delta = (18 + i) as f64 / 10.0;
                Ok(RecoveryCell { label: "delta".into(), value: delta, n: 100, generator: bivariate_pair(delta)? })
            })
            .collect::<Result<_>>()?;
        Ok(Self::new("recovery_bivariate", cells, recovery_trials(full), seed))
    }

    /// 10-variate pair, `N = 50`, `δ ∈ {10, 100, 1000}`.
    pub fn small_sample(full: bool, seed: u64) -> Result<Self> {
        let cells = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&delta| Ok(RecoveryCell { label: "delta".into(), value: delta, n: 50, generator: ten_variate_pair(delta)? }))
            .collect::<Result<_>>()?;
        Ok(Self::new("recovery_small_sample", cells, recovery_trials(full), seed))
    }

    /// Two vMF components in `d = 3`, `κ = (10, 100)`, means 20° apart, over growing `N`.
    pub fn vmf_separated(full: bool, seed: u64) -> Result<Self> {
        let g = vmf_family(3, &[10.0, 100.0], &[0.0, 20.0])?;
        Ok(Self::new("recovery_vmf_separated", n_sweep(&g, &[25, 50, 100, 200]), recovery_trials(full), seed))
    }

    /// Two vMF components in `d = 10` sharing a mean, `κ = (10, 100)`, over growing `N`.
    pub fn vmf_shared_mean(full: bool, seed: u64) -> Result<Self> {
        let g = vmf_family(10, &[10.0, 100.0], &[0.0, 0.0])?;
        Ok(Self::new("recovery_vmf_shared_mean", n_sweep(&g, &[25, 50, 100]), recovery_trials(full), seed))
    }

    pub fn grid_description(&self) -> String {
        let cells: Vec<String> = self
            .cells
            .iter()
            .map(|c| format!("{}={},N={},{:?}", c.label, c.value, c.n, crate::io::ModelJson::from_model(&c.generator)))
            .collect();
        format!(
            "{};{};trials={};seed={};kl={};min_improvement={}",
            self.name,
            cells.join(";"),
            self.trials,
            self.seed,
            self.kl_samples,
            self.search.min_improvement
        )
    }
}

fn recovery_trials(full: bool) -> usize {
    if full {
        FULL_RECOVERY_TRIALS
    } else {
        DESK_RECOVERY_TRIALS
    }
}

fn n_sweep(g: &MixtureModel, ns: &[usize]) -> Vec<RecoveryCell> {
    ns.iter().map(|&n| RecoveryCell { label: "N".into(), value: n as f64, n, generator: g.clone() }).collect()
}

/// Outcome of both searches on one simulated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryTrial {
    pub m_mml: usize,
    pub m_fj: usize,
    pub delta_i_mml: f64,
    pub delta_i_fj: f64,
    pub kl_mml: f64,
    pub kl_fj: f64,
}

/// Simulates one sample from `cell` and runs both searches on it.
pub fn recovery_trial(cell: &RecoveryCell, search: &SearchConfig, kl_samples: usize, seed: u64, threads: usize) -> Result<RecoveryTrial> {
    let (data, _) = simulate(&cell.generator, cell.n, mix(seed, 1))?;
    let family = cell.generator.family();
    let runner = Threaded { threads };
    let mml_cfg = SearchConfig { strategy: SearchStrategy::MmlSearch, seed: mix(seed, 2), ..*search };
    let fj_cfg = SearchConfig { strategy: SearchStrategy::FjSearch, seed: mix(seed, 3), ..*search };
    let ours = infer_mixture_with(&data, family, &mml_cfg, &runner)?;
    let theirs = infer_mixture_with(&data, family, &fj_cfg, &runner)?;
    let r = compare_models(&cell.generator, &ours.model, &theirs.model, &data, kl_samples, mix(seed, 4))?;
    Ok(RecoveryTrial {
        m_mml: r.m_ours,
        m_fj: r.m_theirs,
        delta_i_mml: r.delta_i_mml,
        delta_i_fj: r.delta_i_fj,
        kl_mml: r.kl_ours,
        kl_fj: r.kl_theirs,
    })
}

/// Per-(cell, strategy) summary of a recovery study. The ΔI columns compare
/// the two strategies and repeat on both rows of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRow {
    pub label: String,
    pub value: f64,
    pub n: usize,
    pub method: &'static str,
    pub trials: usize,
    pub true_m: usize,
    pub pct_correct: f64,
    pub mean_m: f64,
    /// Sample variance (divisor `trials − 1`).
    pub var_m: f64,
    pub mean_delta_i_mml: f64,
    pub delta_i_mml_se: f64,
    pub pct_delta_i_mml_positive: f64,
    pub mean_delta_i_fj: f64,
    pub delta_i_fj_se: f64,
    pub pct_delta_i_fj_positive: f64,
    pub mean_kl: f64,
    pub kl_se: f64,
}

impl TableRow for RecoveryRow {
    fn header() -> Vec<&'static str> {
        vec![
            "sweep", "value", "N", "method", "trials", "true_M", "pct_correct", "mean_M", "var_M", "mean_delta_I_MML",
            "delta_I_MML_se", "pct_delta_I_MML_positive", "mean_delta_I_FJ", "delta_I_FJ_se", "pct_delta_I_FJ_positive",
            "mean_KL", "KL_se",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.label.clone(),
            self.value.to_string(),
            self.n.to_string(),
            self.method.to_string(),
            self.trials.to_string(),
            self.true_m.to_string(),
            self.pct_correct.to_string(),
            self.mean_m.to_string(),
            self.var_m.to_string(),
            self.mean_delta_i_mml.to_string(),
            self.delta_i_mml_se.to_string(),
            self.pct_delta_i_mml_positive.to_string(),
            self.mean_delta_i_fj.to_string(),
            self.delta_i_fj_se.to_string(),
            self.pct_delta_i_fj_positive.to_string(),
            self.mean_kl.to_string(),
            self.kl_se.to_string(),
        ]
    }
}

fn pct(xs: impl Iterator<Item = bool>) -> f64 {
    let (hit, total) = xs.fold((0usize, 0usize), |(h, t), b| (h + b as usize, t + 1));
    100.0 * hit as f64 / total as f64
}

pub fn summarise_recovery(cell: &RecoveryCell, trials: &[RecoveryTrial]) -> Vec<RecoveryRow> {
    let true_m = cell.generator.m();
    let dm: Vec<f64> = trials.iter().map(|t| t.delta_i_mml).collect();
    let df: Vec<f64> = trials.iter().map(|t| t.delta_i_fj).collect();
    let (mean_dm, se_dm) = mean_se(&dm);
    let (mean_df, se_df) = mean_se(&df);
    let pos_dm = pct(dm.iter().map(|v| *v > 0.0));
    let pos_df = pct(df.iter().map(|v| *v > 0.0));
    let per_method: [(&'static str, Vec<f64>, Vec<f64>); 2] = [
        (
            SearchStrategy::MmlSearch.name(),
            trials.iter().map(|t| t.m_mml as f64).collect(),
            trials.iter().map(|t| t.kl_mml).collect(),
        ),
        (SearchStrategy::FjSearch.name(), trials.iter().map(|t| t.m_fj as f64).collect(), trials.iter().map(|t| t.kl_fj).collect()),
    ];
    per_method
        .into_iter()
        .map(|(method, ms, kls)| {
            let (mean_m, se_m) = mean_se(&ms);
            let (mean_kl, kl_se) = mean_se(&kls);
            RecoveryRow {
                label: cell.label.clone(),
                value: cell.value,
                n: cell.n,
                method,
                trials: trials.len(),
                true_m,
                pct_correct: pct(ms.iter().map(|m| *m as usize == true_m)),
                mean_m,
                var_m: se_m * se_m * ms.len() as f64,
                mean_delta_i_mml: mean_dm,
                delta_i_mml_se: se_dm,
                pct_delta_i_mml_positive: pos_dm,
                mean_delta_i_fj: mean_df,
                delta_i_fj_se: se_df,
                pct_delta_i_fj_positive: pos_df,
                mean_kl,
                kl_se,
            }
        })
        .collect()
}

/// Runs both searches on `trials` fresh samples per cell.
pub fn run_recovery_study(spec: &RecoverySpec) -> Result<Vec<RecoveryRow>> {
    if spec.trials == 0 || spec.cells.is_empty() {
        return Err(Error::Domain("recovery study needs trials and cells"));
    }
    let mut rows = Vec::new();
    for cell in &spec.cells {
        let cell_seed = key(spec.seed, &[cell.value.to_bits(), cell.n as u64]);
        let trials = parallel_map(spec.trials, spec.threads, |t| {
            recovery_trial(cell, &spec.search, spec.kl_samples, mix(cell_seed, t as u64), 1)
        });
        let trials: Vec<RecoveryTrial> = trials.into_iter().collect::<Result<_>>()?;
        rows.extend(summarise_recovery(cell, &trials));
    }
    Ok(rows)
}

/// Best total message length (bits) of fixed-size MML fits for `M = 1..=m_max`.
pub fn message_length_curve(
    data: &DataSet,
    family: Family,
    m_max: usize,
    restarts: usize,
    seed: u64,
    em: &EmConfig,
) -> Result<Vec<(usize, f64)>> {
    (1..=m_max).map(|m| Ok((m, fit_fixed_m(data, family, m, restarts, mix(seed, m as u64), em)?.score()))).collect()
}
