//! Bundled `(θ, φ)` direction data for null-model experiments.
//!
//! The bundled file is a synthetic stand-in for backbone direction data:
//! 2000 draws from [`reference_mixture`], written in degrees by
//! `mmlmix simulate --preset protein --seed 2024 --n 2000`.

use mmlmix_core::mixture::{Component, MixtureModel};
use mmlmix_core::vmf::{angles_to_unit, VmfParams};
use mmlmix_core::{DataSet, Result};

use crate::io::{parse_dataset, IoError, RowFormat};

pub const BUNDLED_ANGLES: &str = include_str!("../data/protein_angles.csv");
pub const BUNDLED_SEED: u64 = 2024;
pub const BUNDLED_N: usize = 2000;

/// Sphere radius and stating precision used by the null-model comparison.
pub const RADIUS: f64 = 3.8;
pub const PRECISION: f64 = 0.001;

/// Five-component vMF mixture over co-latitude/longitude (degrees).
pub fn reference_mixture() -> Result<MixtureModel> {
    let spec: [(f64, f64, f64, f64); 5] = [
        (30.0, 40.0, 30.0, 0.25),
        (100.0, 200.0, 15.0, 0.2),
        (120.0, 300.0, 60.0, 0.2),
        (60.0, 120.0, 8.0, 0.2),
        (150.0, 80.0, 25.0, 0.15),
    ];
    let comps = spec
        .iter()
        .map(|&(t, p, k, _)| VmfParams::new(angles_to_unit(t.to_radians(), p.to_radians()).to_vec(), k).map(Component::Vmf))
        .collect::<Result<Vec<_>>>()?;
    MixtureModel::new(comps, spec.iter().map(|s| s.3).collect())
}

/// `(θ, φ)` in degrees for a unit vector in three dimensions.
pub fn unit_to_angles(x: &[f64]) -> (f64, f64) {
    let theta = x[2].clamp(-1.0, 1.0).acos().to_degrees();
    let phi = x[1].atan2(x[0]).to_degrees().rem_euclid(360.0);
    (theta, phi)
}

/// The bundled angles as unit vectors.
pub fn bundled_directions() -> std::result::Result<DataSet, IoError> {
    parse_dataset(BUNDLED_ANGLES, RowFormat::Angles)
}

/// The bundled angles as `(θ, φ)` pairs in degrees.
pub fn bundled_angles() -> std::result::Result<Vec<(f64, f64)>, IoError> {
    let (v, _) = crate::io::parse_rows(BUNDLED_ANGLES)?;
    Ok(v.chunks_exact(2).map(|p| (p[0], p[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::simulate;

    #[test]
    fn angles_round_trip() {
        for &(t, p) in &[(10.0, 20.0), (90.0, 270.0), (170.0, 359.0)] {
            let u = angles_to_unit(f64::to_radians(t), f64::to_radians(p));
            let (t2, p2) = unit_to_angles(&u);
            assert!((t - t2).abs() < 1e-9 && (p - p2).abs() < 1e-9);
        }
    }

    #[test]
    fn bundled_file_matches_generator() {
        let angles = bundled_angles().unwrap();
        assert_eq!(angles.len(), BUNDLED_N);
        let (data, _) = simulate(&reference_mixture().unwrap(), BUNDLED_N, BUNDLED_SEED).unwrap();
        for (x, (t, p)) in data.rows().zip(&angles).take(50) {
            let (t2, p2) = unit_to_angles(x);
            assert!((t - t2).abs() < 1e-6 && (p - p2).abs() < 1e-6);
        }
    }
}
