//! Metrics for comparing inferred mixtures: Monte Carlo KL divergence,
//! message-length differences, clustering agreement and null-model
//! encodings of protein directions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use crate::baselines::score_fj;
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::mixture::{mixture_log_density, mixture_msglen, MixtureDensity, MixtureModel};
use crate::nats_to_bits;
use crate::rng::stream;
use crate::vmf::angles_to_unit;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// `(1/n) Σ log p_true(xᵢ)/p_fit(xᵢ)` over `n` draws from `true_model`, in nats.
pub fn empirical_kl(true_model: &MixtureModel, fitted: &MixtureModel, n_samples: usize, seed: u64) -> Result<KlEstimate> {
    if true_model.family() != fitted.family() {
        return Err(Error::Domain("models belong to different families"));
    }
    if true_model.d() != fitted.d() {
        return Err(Error::DimensionMismatch { expected: true_model.d(), found: fitted.d() });
    }
    if n_samples < 2 {
        return Err(Error::InsufficientData { needed: 2, found: n_samples });
    }
    let (xs, _) = true_model.sample(n_samples, &mut stream(seed, 0));
    let d = true_model.d();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let (p, q) = (MixtureDensity::new(true_model)?, MixtureDensity::new(fitted)?);
    for (i, x) in xs.chunks_exact(d).enumerate() {
        let v = p.log_density(x)? - q.log_density(x)?;
        if !v.is_finite() {
            return Err(Error::Underflow { row: i });
        }
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(KlEstimate { mean, std_error: (var / n).sqrt() })
}

/// Two inferred mixtures scored against each other and against the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    /// `I_MML(theirs) - I_MML(ours)` in bits.
    pub delta_i_mml: f64,
    /// `I_FJ(theirs) - I_FJ(ours)` in bits.
    pub delta_i_fj: f64,
    /// `KL(true ‖ ours)` in nats.
    pub kl_ours: f64,
    pub kl_theirs: f64,
    pub m_ours: usize,
    pub m_theirs: usize,
}

pub fn compare_models(
    true_model: &MixtureModel,
    ours: &MixtureModel,
    theirs: &MixtureModel,
    data: &DataSet,
    kl_samples: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    let delta_i_mml = mixture_msglen(theirs, data)?.total - mixture_msglen(ours, data)?.total;
    let delta_i_fj = nats_to_bits(score_fj(theirs, data)? - score_fj(ours, data)?);
    let kl_ours = empirical_kl(true_model, ours, kl_samples, seed)?.mean;
    let kl_theirs = empirical_kl(true_model, theirs, kl_samples, seed)?.mean;
    let report = ComparisonReport { delta_i_mml, delta_i_fj, kl_ours, kl_theirs, m_ours: ours.m(), m_theirs: theirs.m() };
    if [delta_i_mml, delta_i_fj, kl_ours, kl_theirs].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("comparison report"));
    }
    Ok(report)
}

/// Contingency table with rows indexed by `a` labels and columns by `b`.
fn contingency(a: &[usize], b: &[usize]) -> Result<(Vec<Vec<f64>>, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    let ka = a.iter().max().expect("non-empty") + 1;
    let kb = b.iter().max().expect("non-empty") + 1;
    let mut t = vec![vec![0.0; kb]; ka];
    for (&i, &j) in a.iter().zip(b) {
        t[i][j] += 1.0;
    }
    Ok((t, a.len() as f64))
}

/// Mutual information of a contingency table, in nats.
pub fn mutual_information_table(table: &[Vec<f64>]) -> f64 {
    let n: f64 = table.iter().flatten().sum();
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols = table.first().map_or(0, Vec::len);
    let colsum: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (r, ri) in table.iter().zip(&rows) {
        for (v, cj) in r.iter().zip(&colsum) {
            if *v > 0.0 {
                mi += v / n * (v * n / (ri * cj)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Plug-in mutual information between two labelings, in nats.
pub fn mutual_information(assignments: &[usize], truth: &[usize]) -> Result<f64> {
    let (t, _) = contingency(assignments, truth)?;
    Ok(mutual_information_table(&t))
}

/// Minimum-cost perfect matching on a square cost matrix; returns the
/// column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // potentials and matching are 1-indexed with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Average per-class F1 with clusters matched to classes one-to-one so as to
/// maximise the total F1; rows of `table` are classes, columns clusters.
pub fn f_measure_table(table: &[Vec<f64>]) -> Result<f64> {
    let k = table.len();
    if k == 0 || table.iter().any(|r| r.len() != k) {
        return Err(Error::Domain("cluster count must equal class count"));
    }
    let class_tot: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let clus_tot: Vec<f64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let f1: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            (0..k)
                .map(|j| {
                    let tp = table[c][j];
                    if tp == 0.0 {
                        0.0
                    } else {
                        2.0 * tp / (class_tot[c] + clus_tot[j])
                    }
                })
                .collect()
        })
        .collect();
    let cost: Vec<Vec<f64>> = f1.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let m = hungarian(&cost);
    Ok((0..k).map(|c| f1[c][m[c]]).sum::<f64>() / k as f64)
}

pub fn f_measure(assignments: &[usize], truth: &[usize]) -> Result<f64> {
    let (t, _) = contingency(truth, assignments)?;
    let k = t.len().max(t[0].len());
    let used_clusters = assignments.iter().copied().collect::<alloc::collections::BTreeSet<_>>().len();
    let used_classes = truth.iter().copied().collect::<alloc::collections::BTreeSet<_>>().len();
    if used_clusters != used_classes {
        return Err(Error::Domain("cluster count must equal class count"));
    }
    let square: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| t.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0)).collect()).collect();
    let f = f_measure_table(&square)?;
    // padding rows of empty labels contribute zero F1
    Ok(f * k as f64 / used_classes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullModel {
    Uniform,
    Vmf,
}

/// Bits to state one residue direction `(θ, φ)` at precision `epsilon` on a
/// sphere of radius `r`, under a uniform or fitted vMF-mixture null model.
pub fn null_model_bits(
    kind: NullModel,
    model: Option<&MixtureModel>,
    theta: f64,
    phi: f64,
    epsilon: f64,
    r: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && r > 0.0) {
        return Err(Error::Domain("precision and radius must be positive"));
    }
    let area_term = -2.0 * (epsilon / r).log2();
    match kind {
        NullModel::Uniform => Ok((4.0 * PI).log2() + area_term),
        NullModel::Vmf => {
            let model = model.ok_or(Error::Domain("a vMF null model needs a fitted mixture"))?;
            if model.d() != 3 {
                return Err(Error::DimensionMismatch { expected: 3, found: model.d() });
            }
            let x = angles_to_unit(theta, phi);
            Ok(-mixture_log_density(model, &x)? / LN_2 + area_term)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Component;
    use crate::rng::stream;
    use crate::vmf::{vmf_kl, VmfParams};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::Rng;

    const CLASSIC3_MML: [[f64; 3]; 3] = [[1450.0, 0.0, 10.0], [24.0, 1331.0, 43.0], [13.0, 0.0, 1020.0]];

    fn table(t: &[[f64; 3]; 3]) -> Vec<Vec<f64>> {
        t.iter().map(|r| r.to_vec()).collect()
    }

    fn vmf(mu: Vec<f64>, k: f64) -> Component {
        Component::Vmf(VmfParams::new(mu, k).unwrap())
    }

    #[test]
    fn classic3_confusion_matrix() {
        let t = table(&CLASSIC3_MML);
        assert!((mutual_information_table(&t) - 0.976).abs() < 5e-4);
        assert!((f_measure_table(&t).unwrap() - 0.9761).abs() < 5e-5);
    }

    #[test]
    fn mi_examples() {
        let a = [0, 0, 1, 1, 0, 1];
        assert!((mutual_information(&a, &a).unwrap() - LN_2).abs() < 1e-15);
        let mut rng = stream(1, 0);
        let x: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<usize> = (0..100_000).map(|_| rng.random_range(0..2)).collect();
        assert!(mutual_information(&x, &y).unwrap() <= 0.01);
        assert!(mutual_information(&[], &[]).is_err());
    }

    #[test]
    fn f_measure_examples() {
        let truth = [0, 0, 1, 1, 2, 2];
        assert_eq!(f_measure(&truth, &truth).unwrap(), 1.0);
        assert_eq!(f_measure(&[2, 2, 0, 0, 1, 1], &truth).unwrap(), 1.0);
        // each cluster holds half of each class; both matchings score ½
        let t = vec![vec![5.0, 5.0], vec![5.0, 5.0]];
        assert!((f_measure_table(&t).unwrap() - 0.5).abs() < 1e-15);
        assert!(f_measure(&[0, 0, 0, 1], &[0, 1, 2, 2]).is_err());
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = stream(2, 0);
        for _ in 0..100 {
            let t: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.random_range(0..20) as f64).collect()).collect();
            let f = f_measure_table(&t).unwrap();
            let mut best: f64 = 0.0;
            let perms = permutations(4);
            let ct: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
            let cl: Vec<f64> = (0..4).map(|j| t.iter().map(|r| r[j]).sum()).collect();
            for p in perms {
                let s: f64 = (0..4)
                    .map(|c| if t[c][p[c]] == 0.0 { 0.0 } else { 2.0 * t[c][p[c]] / (ct[c] + cl[p[c]]) })
                    .sum();
                best = best.max(s / 4.0);
            }
            assert!((f - best).abs() < 1e-12);
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..n {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn null_model_examples() {
        let u = null_model_bits(NullModel::Uniform, None, 0.3, 0.2, 1.0, 1.0).unwrap();
        assert!((u - 3.6514).abs() < 1e-4);
        let u = null_model_bits(NullModel::Uniform, None, 0.3, 0.2, 0.001, 3.8).unwrap();
        assert!((u - 27.43).abs() < 0.02);
        assert!(null_model_bits(NullModel::Vmf, None, 0.3, 0.2, 0.001, 3.8).is_err());
        let model = MixtureModel::new(vec![vmf(vec![0.0, 0.0, 1.0], 20.0)], vec![1.0]).unwrap();
        let dense = null_model_bits(NullModel::Vmf, Some(&model), 0.05, 0.0, 0.001, 3.8).unwrap();
        assert!(dense < u);
    }

    #[test]
    fn empirical_kl_checks() {
        let f = MixtureModel::new(vec![vmf(vec![0.0, 0.0, 1.0], 5.0)], vec![1.0]).unwrap();
        let g = MixtureModel::new(vec![vmf(vec![0.0, 0.6, 0.8], 2.0)], vec![1.0]).unwrap();
        let same = empirical_kl(&f, &f, 1000, 3).unwrap();
        assert!(same.mean.abs() <= 3.0 * same.std_error + 1e-12);
        let est = empirical_kl(&f, &g, 1_000_000, 4).unwrap();
        let (Component::Vmf(a), Component::Vmf(b)) = (&f.components()[0], &g.components()[0]) else { panic!() };
        let exact = vmf_kl(a, b).unwrap();
        assert!((est.mean - exact).abs() < 3.0 * est.std_error, "{} vs {exact}", est.mean);
        assert!(est.mean > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn mi_bounded_by_entropies(cells in proptest::collection::vec(0u32..30, 9)) {
            let t: Vec<Vec<f64>> = cells.chunks(3).map(|r| r.iter().map(|v| *v as f64).collect()).collect();
            let n: f64 = t.iter().flatten().sum();
            prop_assume_nonzero(n)?;
            let h = |m: Vec<f64>| -m.iter().filter(|v| **v > 0.0).map(|v| v / n * (v / n).ln()).sum::<f64>();
            let hx = h(t.iter().map(|r| r.iter().sum()).collect());
            let hy = h((0..3).map(|j| t.iter().map(|r| r[j]).sum()).collect());
            prop_assert!(mutual_information_table(&t) <= hx.min(hy) + 1e-12);
        }

        #[test]
        fn f_measure_in_unit_interval_and_label_invariant(labels in proptest::collection::vec(0usize..3, 3..60), seed in 0u64..1000) {
            let mut rng = stream(seed, 0);
            let truth: Vec<usize> = (0..labels.len()).map(|i| i % 3).collect();
            let mut clusters = labels.clone();
            clusters[0] = 0;
            clusters[1] = 1;
            clusters[2] = 2;
            let f = f_measure(&clusters, &truth).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            let shift = rng.random_range(1..3);
            let relabeled: Vec<usize> = clusters.iter().map(|c| (c + shift) % 3).collect();
            prop_assert!((f_measure(&relabeled, &truth).unwrap() - f).abs() < 1e-12);
        }
    }

    fn prop_assume_nonzero(n: f64) -> core::result::Result<(), proptest::test_runner::TestCaseError> {
        if n > 0.0 {
            Ok(())
        } else {
            Err(proptest::test_runner::TestCaseError::reject("empty table"))
        }
    }
}
