//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Criteria that cannot be met are reported as FAIL without failing the
//! test run; a panic here means the harness itself broke.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use mmlmix::experiments::{
    message_length_curve, mix, recovery_trial, run_kappa_benchmark, run_recovery_study, simulate, three_bars,
    KappaBenchmarkSpec, KappaRow, RecoveryCell, RecoverySpec, RecoveryTrial,
};
use mmlmix::parallel::{available_threads, parallel_map};
use mmlmix::protein;
use mmlmix_core::evaluation::{empirical_kl, null_model_bits, NullModel};
use mmlmix_core::gaussian::GaussianParams;
use mmlmix_core::mixture::{
    em_fit, em_from_responsibilities, Component, EmConfig, EmMode, Family, MixtureModel, ResponsibilityMatrix,
};
use mmlmix_core::rng::stream;
use mmlmix_core::search::{infer_mixture_with, SearchConfig};
use mmlmix_core::special_functions::bessel_ratio_derivatives;
use mmlmix_core::vmf::{mml_kappa_objective, vmf_kl, DirectionalStats, KappaMethod, VmfParams};
use mmlmix_core::{DataSet, WeightedSample};

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, ok: bool, title: &str, detail: String, started: Instant) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} [{id:>2}] {title}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
    }
}

fn threads() -> usize {
    available_threads()
}

fn row<'a>(rows: &'a [KappaRow], n: usize, d: usize, kappa: f64, method: KappaMethod) -> &'a KappaRow {
    rows.iter()
        .find(|r| r.n == n && r.d == d && r.kappa == kappa && r.method == method.name())
        .expect("benchmark cell present")
}

const METHODS: [KappaMethod; 5] =
    [KappaMethod::Tanabe, KappaMethod::Sra, KappaMethod::Song, KappaMethod::MmlNewton, KappaMethod::MmlHalley];

/// Published mean absolute errors, in the order of `METHODS`.
const PUBLISHED_ERRORS: [((usize, usize, f64), [f64; 5]); 3] = [
    ((100, 10, 10.0), [0.5092, 0.5047, 0.5047, 0.4906, 0.4906]),
    ((100, 100, 100.0), [2.187, 2.186, 2.186, 1.683, 1.683]),
    ((10, 10, 100.0), [18.79, 18.77, 18.77, 13.16, 13.16]),
];

fn kappa_criteria(report: &mut Report) {
    let started = Instant::now();
    let mut spec = KappaBenchmarkSpec::standard(true, 7);
    spec.threads = threads();
    let rows = run_kappa_benchmark(&spec).expect("kappa benchmark");

    let mut worst = (0.0f64, String::new());
    for ((n, d, k), published) in PUBLISHED_ERRORS {
        for (m, p) in METHODS.iter().zip(published) {
            let got = row(&rows, n, d, k, *m).mean_abs_err;
            let dev = (got - p).abs() / p;
            if dev > worst.0 {
                worst = (dev, format!("({n},{d},{k}) {}: {got:.4} vs {p}", m.name()));
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report.line(
        1,
        worst.0 <= 0.15 && elapsed <= 300.0,
        "κ mean absolute errors within 15% (1000 trials)",
        format!("largest deviation {:.1}% at {}", 100.0 * worst.0, worst.1),
        started,
    );

    let started = Instant::now();
    let worst_rel = rows
        .iter()
        .map(|r| ((r.bias_sq + r.variance) - r.mse).abs() / r.mse.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    report.line(
        2,
        worst_rel <= 1e-9,
        "bias² + variance = MSE on every row",
        format!("{} rows, worst relative gap {worst_rel:.2e}", rows.len()),
        started,
    );

    let started = Instant::now();
    let mut violations = Vec::new();
    let mut checked = 0;
    for d in [10, 100, 1000] {
        for k in [10.0, 100.0, 1000.0] {
            let mh = row(&rows, 10, d, k, KappaMethod::MmlHalley).mean_kl;
            let t = row(&rows, 10, d, k, KappaMethod::Tanabe).mean_kl;
            checked += 1;
            if mh > t {
                violations.push(format!("(10,{d},{k}) MH {mh:.3} > T {t:.3} bits"));
            }
        }
    }
    report.line(
        3,
        violations.is_empty(),
        "N = 10 cells: mean KL of κ_MH ≤ κ_T",
        if violations.is_empty() { format!("{checked} cells") } else { violations.join("; ") },
        started,
    );
}

fn derivative_criterion(report: &mut Report) {
    let started = Instant::now();
    let central = |f: &dyn Fn(f64) -> f64, x: f64| {
        let h = 1e-5 * x;
        (f(x + h) - f(x - h)) / (2.0 * h)
    };
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut worst = (0.0f64, String::new());
    let mut note = |e: f64, what: &str, d: usize, k: f64| {
        if e > worst.0 {
            worst = (e, format!("{what} at d={d}, κ={k}"));
        }
    };
    for d in [2usize, 3, 10, 100] {
        for k in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let t = bessel_ratio_derivatives(d, k).unwrap();
            let a = |i: usize| {
                move |x: f64| {
                    let t = bessel_ratio_derivatives(d, x).unwrap();
                    [t.a, t.a1, t.a2][i]
                }
            };
            note(rel(central(&a(0), k), t.a1), "A′", d, k);
            note(rel(central(&a(1), k), t.a2), "A″", d, k);
            note(rel(central(&a(2), k), t.a3), "A‴", d, k);

            let n = 10.0;
            let rbar = 0.9 * t.a;
            let mut resultant = vec![0.0; d];
            resultant[0] = rbar * n;
            let stats = DirectionalStats::from_resultant(resultant, n).unwrap();
            let o = mml_kappa_objective(k, &stats, d).unwrap();
            let g = |i: usize| {
                let s = stats.clone();
                move |x: f64| {
                    let o = mml_kappa_objective(x, &s, d).unwrap();
                    [o.g, o.g1][i]
                }
            };
            note(rel(central(&g(0), k), o.g1), "G′", d, k);
            note(rel(central(&g(1), k), o.g2), "G″", d, k);
        }
    }
    report.line(
        4,
        worst.0 <= 1e-4,
        "A′, A″, A‴, G′, G″ against centred differences",
        format!("worst relative error {:.2e} ({})", worst.0, worst.1),
        started,
    );
}

fn random_unit<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.1 && norm <= 1.0 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn kl_criterion(report: &mut Report) {
    let started = Instant::now();
    let pairs: Vec<(VmfParams, VmfParams)> = (0..20)
        .map(|i| {
            let mut rng = stream(55, i);
            let mut draw = || {
                let kappa = 10f64.powf(rng.random_range(0.0..2.0));
                VmfParams::new(random_unit(3, &mut rng), kappa).unwrap()
            };
            (draw(), draw())
        })
        .collect();
    let results = parallel_map(pairs.len(), threads(), |i| {
        let (f, g) = &pairs[i];
        let exact = vmf_kl(f, g).unwrap();
        let one = |p: &VmfParams| MixtureModel::new(vec![Component::Vmf(p.clone())], vec![1.0]).unwrap();
        let est = empirical_kl(&one(f), &one(g), 1_000_000, mix(56, i as u64)).unwrap();
        (est.mean - exact).abs() / est.std_error
    });
    let inside = results.iter().filter(|&&z| z <= 3.0).count();
    let worst = results.iter().copied().fold(0.0, f64::max);
    report.line(
        5,
        inside == results.len(),
        "closed-form vMF KL within 3 SE of Monte Carlo (10⁶ samples)",
        format!("{inside}/{} pairs, largest |z| = {worst:.2}", results.len()),
        started,
    );
}

fn random_instance(family: Family, d: usize, seed: u64) -> DataSet {
    let mut rng = stream(seed, 0);
    let m = rng.random_range(2..=3usize);
    let comps: Vec<Component> = (0..m)
        .map(|_| match family {
            Family::Gaussian => {
                let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
                let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
                Component::Gaussian(GaussianParams::new(mean, cov).unwrap())
            }
            Family::Vmf => Component::Vmf(VmfParams::new(random_unit(d, &mut rng), rng.random_range(2.0..50.0)).unwrap()),
        })
        .collect();
    let model = MixtureModel::new(comps, vec![1.0 / m as f64; m]).unwrap();
    let n = if family == Family::Gaussian { 60 * d.max(2) } else { 200 };
    simulate(&model, n, mix(seed, 1)).unwrap().0
}

struct Monotonicity {
    /// Largest regression over the trace returned by `em_fit`.
    returned: f64,
    /// Largest regression over single EM steps taken without rollback.
    raw: f64,
}

fn regression(mode: EmMode, before: f64, after: f64) -> f64 {
    match mode {
        EmMode::Mml => after - before,
        EmMode::Ml => before - after,
    }
}

/// Score regressions of EM from a random soft start; `None` when a run aborted.
fn em_regressions(data: &DataSet, family: Family, mode: EmMode, seed: u64) -> Option<Monotonicity> {
    let sample = WeightedSample::unit(data);
    let m = 2;
    let mut rng = stream(seed, 2);
    let mut r = Vec::with_capacity(data.n() * m);
    for _ in 0..data.n() {
        let a: f64 = rng.random_range(0.05..0.95);
        r.extend([a, 1.0 - a]);
    }
    let step = EmConfig { mode, max_iter: 1, ..EmConfig::default() };
    let r = ResponsibilityMatrix::new(r, m, &sample).ok()?;
    let start = em_from_responsibilities(family, &sample, r, &step).ok()?.model;

    let full = em_fit(&start, &sample, &EmConfig { mode, ..EmConfig::default() }).ok()?;
    let returned = full.trace.windows(2).map(|w| regression(mode, w[0], w[1])).fold(f64::NEG_INFINITY, f64::max);

    let mut model = start;
    let mut raw = f64::NEG_INFINITY;
    for _ in 0..300 {
        let fit = em_fit(&model, &sample, &step).ok()?;
        let change = regression(mode, fit.trace[0], fit.trace[1]);
        raw = raw.max(change);
        model = fit.model;
        if change.abs() < 1e-9 * fit.trace[0].abs() {
            break;
        }
    }
    Some(Monotonicity { returned, raw })
}

fn monotonicity_criterion(report: &mut Report) {
    let started = Instant::now();
    let cases: Vec<(Family, usize)> = [(Family::Gaussian, [1, 2, 10]), (Family::Vmf, [2, 3, 10])]
        .iter()
        .flat_map(|&(f, ds)| ds.into_iter().map(move |d| (f, d)))
        .collect();
    let results = parallel_map(100, threads(), |i| {
        let (family, d) = cases[i % cases.len()];
        let data = random_instance(family, d, mix(66, i as u64));
        let mml = em_regressions(&data, family, EmMode::Mml, mix(67, i as u64));
        let ml = em_regressions(&data, family, EmMode::Ml, mix(68, i as u64));
        (mml, ml)
    });
    let aborted = results.iter().filter(|(a, b)| a.is_none() || b.is_none()).count();
    let count = |pick: &dyn Fn(&(Option<Monotonicity>, Option<Monotonicity>)) -> Option<f64>, tol: f64| {
        results.iter().filter(|r| pick(r).is_some_and(|w| w > tol)).count()
    };
    let mml_returned = count(&|r| r.0.as_ref().map(|m| m.returned), 1e-6);
    let ml_returned = count(&|r| r.1.as_ref().map(|m| m.returned), 1e-9);
    let mml_raw = count(&|r| r.0.as_ref().map(|m| m.raw), 1e-6);
    let ml_raw = count(&|r| r.1.as_ref().map(|m| m.raw), 1e-9);
    let worst_raw = results.iter().filter_map(|r| r.0.as_ref().map(|m| m.raw)).fold(f64::NEG_INFINITY, f64::max);
    report.line(
        6,
        aborted == 0 && mml_returned == 0 && ml_returned == 0,
        "EM monotone on 100 random instances",
        format!(
            "returned traces: MML increases {mml_returned}, ML decreases {ml_returned}, aborted {aborted}; \
             single steps without rollback: MML increases {mml_raw} (largest {worst_raw:.1e} bits), ML decreases {ml_raw}"
        ),
        started,
    );
}

fn three_bars_criterion(report: &mut Report) {
    let started = Instant::now();
    let g = three_bars().unwrap();
    let outcomes = parallel_map(20, threads(), |t| {
        let t = t as u64;
        let (data, _) = simulate(&g, 900, mix(70, t)).unwrap();
        let config = SearchConfig { seed: mix(71, t), ..SearchConfig::default() };
        let found = infer_mixture_with(&data, Family::Gaussian, &config, &mmlmix_core::search::Sequential).unwrap();
        let curve = message_length_curve(&data, Family::Gaussian, 8, 5, mix(72, t), &EmConfig::default()).unwrap();
        let best = curve.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        (found.model.m(), best)
    });
    let search_hits = outcomes.iter().filter(|o| o.0 == 3).count();
    let curve_hits = outcomes.iter().filter(|o| o.1 == 3).count();
    let found: Vec<String> = outcomes.iter().map(|o| o.0.to_string()).collect();
    report.line(
        7,
        search_hits >= 18 && curve_hits >= 18,
        "three-bar mixture, 20 samples of 900",
        format!("search M = 3 in {search_hits}/20 (M: {}), curve minimum at 3 in {curve_hits}/20", found.join(" ")),
        started,
    );
}

fn trials_for(cell: &RecoveryCell, trials: usize, seed: u64, kl_samples: usize) -> Vec<RecoveryTrial> {
    let search = SearchConfig::default();
    parallel_map(trials, threads(), |t| recovery_trial(cell, &search, kl_samples, mix(seed, t as u64), 1).unwrap())
}

fn small_sample_criterion(report: &mut Report) {
    let started = Instant::now();
    let spec = RecoverySpec::small_sample(true, 80).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, cell) in spec.cells.iter().enumerate() {
        let trials = trials_for(cell, spec.trials, mix(81, i as u64), 1000);
        let n = trials.len() as f64;
        let pct = |f: &dyn Fn(&RecoveryTrial) -> bool| 100.0 * trials.iter().filter(|t| f(t)).count() as f64 / n;
        let fj1 = pct(&|t| t.m_fj == 1);
        let mml2 = pct(&|t| t.m_mml == 2);
        let dm = pct(&|t| t.delta_i_mml > 0.0);
        let df = pct(&|t| t.delta_i_fj > 0.0);
        ok &= fj1 >= 95.0 && mml2 >= 95.0 && dm >= 95.0 && df >= 95.0;
        parts.push(format!("δ={}: FJ M=1 {fj1:.0}%, MML M=2 {mml2:.0}%, ΔI_MML>0 {dm:.0}%, ΔI_FJ>0 {df:.0}%", cell.value));
    }
    report.line(8, ok, "10-variate N = 50, 50 trials per δ", parts.join("; "), started);
}

fn bivariate_criterion(report: &mut Report) {
    let started = Instant::now();
    let mut spec = RecoverySpec::bivariate(true, 90).unwrap();
    spec.threads = threads();
    spec.kl_samples = 1000;
    let rows = run_recovery_study(&spec).unwrap();
    let ours: Vec<_> = rows.iter().filter(|r| r.method == "mml_search").collect();
    let ok = ours.iter().all(|r| (0.7..=1.4).contains(&r.mean_m));
    let means: Vec<String> = ours.iter().map(|r| format!("{}:{:.2}", r.value, r.mean_m)).collect();
    report.line(9, ok, "bivariate N = 100, mean M̂ within 0.3 of 1.0–1.1", format!("δ:M̂ {}", means.join(" ")), started);
}

fn acidity_criterion(report: &mut Report) {
    let started = Instant::now();
    report.line(
        10,
        false,
        "acidity data set (155 points)",
        "not available in this build; no substitute data is used".into(),
        started,
    );
}

fn vmf_recovery_criterion(report: &mut Report) {
    let started = Instant::now();
    let spec = RecoverySpec::vmf_shared_mean(true, 100).unwrap();
    let cell = spec.cells.iter().find(|c| c.n == 100).unwrap();
    let trials = trials_for(cell, spec.trials, 101, 1000);
    let hits = trials.iter().filter(|t| t.m_mml == 2).count();
    report.line(
        11,
        hits * 100 >= 80 * trials.len(),
        "shared-mean vMF pair, d = 10, N = 100",
        format!("M = 2 in {hits}/{} trials", trials.len()),
        started,
    );
}

fn null_model_criterion(report: &mut Report) {
    let started = Instant::now();
    let uniform = null_model_bits(NullModel::Uniform, None, 0.3, 1.2, protein::PRECISION, protein::RADIUS).unwrap();
    let data = protein::bundled_directions().unwrap();
    let angles = protein::bundled_angles().unwrap();
    let config = SearchConfig { seed: 120, ..SearchConfig::default() };
    let model = infer_mixture_with(&data, Family::Vmf, &config, &mmlmix_core::search::Sequential).unwrap().model;
    let vmf: f64 = angles
        .iter()
        .map(|&(t, p)| {
            null_model_bits(NullModel::Vmf, Some(&model), t.to_radians(), p.to_radians(), protein::PRECISION, protein::RADIUS)
                .unwrap()
        })
        .sum::<f64>()
        / angles.len() as f64;
    report.line(
        12,
        (uniform - 27.43).abs() <= 0.02 && vmf < uniform,
        "null models at ε = 0.001, r = 3.8",
        format!("uniform {uniform:.3} bits; fitted {}-component vMF mean {vmf:.3} bits over {} directions", model.m(), angles.len()),
        started,
    );
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; this report has no cases to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let started = Instant::now();
    let mut report = Report { passed: 0, failed: 0 };
    println!("acceptance report ({} threads)", threads());
    kappa_criteria(&mut report);
    derivative_criterion(&mut report);
    kl_criterion(&mut report);
    monotonicity_criterion(&mut report);
    three_bars_criterion(&mut report);
    small_sample_criterion(&mut report);
    bivariate_criterion(&mut report);
    acidity_criterion(&mut report);
    vmf_recovery_criterion(&mut report);
    null_model_criterion(&mut report);
    println!(
        "acceptance summary: {} passed, {} failed ({:.1}s)",
        report.passed,
        report.failed,
        started.elapsed().as_secs_f64()
    );
}
