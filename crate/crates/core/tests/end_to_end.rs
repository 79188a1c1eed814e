use mmlmix_core::evaluation::{f_measure, mutual_information};
use mmlmix_core::gaussian::GaussianParams;
use mmlmix_core::mixture::{compute_responsibilities, mixture_msglen, Component, Family, MixtureModel};
use mmlmix_core::rng::stream;
use mmlmix_core::search::{fj_search, infer_mixture, SearchConfig};
use mmlmix_core::vmf::VmfParams;
use mmlmix_core::DataSet;
use nalgebra::DMatrix;

fn well_separated_gaussians() -> (DataSet, Vec<usize>) {
    let comps = [-6.0, 6.0]
        .iter()
        .map(|&c| Component::Gaussian(GaussianParams::new(vec![c, 0.0], DMatrix::identity(2, 2)).unwrap()))
        .collect();
    let truth = MixtureModel::new(comps, vec![0.5, 0.5]).unwrap();
    let (values, labels) = truth.sample(400, &mut stream(11, 0));
    (DataSet::new(values, 2).unwrap(), labels)
}

#[test]
fn search_recovers_two_separated_gaussians() {
    let (data, labels) = well_separated_gaussians();
    let out = infer_mixture(&data, Family::Gaussian, &SearchConfig { seed: 3, ..SearchConfig::default() }).unwrap();
    assert_eq!(out.model.m(), 2);
    let rescored = mixture_msglen(&out.model, &data).unwrap().total;
    assert!((rescored - out.score).abs() < 1e-6 * out.score.abs());
    let assigned = compute_responsibilities(&out.model, &data).unwrap().hard_labels();
    assert!((f_measure(&assigned, &labels).unwrap() - 1.0).abs() < 1e-12);
    assert!(mutual_information(&assigned, &labels).unwrap() > 0.69);
}

#[test]
fn annihilation_search_returns_the_best_size_on_its_path() {
    let (data, _) = well_separated_gaussians();
    let out = fj_search(&data, Family::Gaussian, &SearchConfig { seed: 3, ..SearchConfig::default() }).unwrap();
    let path = &out.trace.fj_path;
    assert_eq!(path.last().unwrap().0, 1);
    assert!(path.windows(2).all(|w| w[1].0 < w[0].0));
    let (best_m, best) = path.iter().copied().fold((0, f64::INFINITY), |b, p| if p.1 < b.1 { p } else { b });
    assert_eq!(out.model.m(), best_m);
    assert_eq!(out.score, best);
    let one = path.iter().find(|p| p.0 == 1).unwrap().1;
    let two = path.iter().find(|p| p.0 == 2).unwrap().1;
    assert!(two < one - 100.0);
}

#[test]
fn search_scores_never_increase_across_accepted_moves() {
    let comps = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        .iter()
        .map(|mu| Component::Vmf(VmfParams::new(mu.to_vec(), 40.0).unwrap()))
        .collect();
    let truth = MixtureModel::new(comps, vec![1.0 / 3.0; 3]).unwrap();
    let (values, _) = truth.sample(300, &mut stream(5, 0));
    let data = DataSet::unit_vectors(values, 3).unwrap();
    let out = infer_mixture(&data, Family::Vmf, &SearchConfig { seed: 1, ..SearchConfig::default() }).unwrap();
    assert_eq!(out.model.m(), 3);
    let scores = out.trace.accepted_scores();
    assert!(scores.windows(2).all(|w| w[1] < w[0]), "{scores:?}");
}

