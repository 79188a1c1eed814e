//! Modified Bessel function ratios and the vMF normalising constant.
//!
//! `A_d(κ) = I_{d/2}(κ) / I_{d/2-1}(κ)` is evaluated with Perron's continued
//! fraction, which converges in a handful of terms for large κ and stays well
//! behaved for small κ. Derivatives are obtained by running the same fraction
//! in truncated Taylor arithmetic, which keeps full relative accuracy where the
//! Riccati recurrence `A' = 1 - A² - (d-1)A/κ` would cancel catastrophically.
//!
//! `log I_ν(x)` uses Debye's uniform expansion for orders of at least
//! [`DEBYE_MIN_ORDER`]; lower orders are reached by shifting downwards with the
//! continued-fraction ratios.

use core::f64::consts::PI;
use core::ops::{Add, Div, Mul, Sub};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Smallest order at which Debye's expansion is used directly.
const DEBYE_MIN_ORDER: f64 = 50.0;

/// Polynomials `u_k(t)` of Debye's expansion, lowest power first.
const DEBYE_U: [&[f64]; 8] = [
    &[1.0],
    &[0.0, 0.125, 0.0, -0.20833333333333334],
    &[0.0, 0.0, 0.0703125, 0.0, -0.4010416666666667, 0.0, 0.3342013888888889],
    &[
        0.0, 0.0, 0.0, 0.0732421875, 0.0, -0.8912109375, 0.0, 1.8464626736111112, 0.0,
        -1.0258125964506173,
    ],
    &[
        0.0, 0.0, 0.0, 0.0, 0.112152099609375, 0.0, -2.3640869140625, 0.0, 8.78912353515625, 0.0,
        -11.207002616222994, 0.0, 4.669584423426247,
    ],
    &[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.22710800170898438, 0.0, -7.368794359479632, 0.0,
        42.53499874538846, 0.0, -91.81824154324002, 0.0, 84.63621767460073, 0.0,
        -28.212072558200244,
    ],
    &[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5725014209747314, 0.0, -26.491430486951554, 0.0,
        218.1905117442116, 0.0, -699.5796273761325, 0.0, 1059.9904525279999, 0.0,
        -765.2524681411817, 0.0, 212.57013003921713,
    ],
    &[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.7277275025844574, 0.0, -108.09091978839466, 0.0,
        1200.9029132163525, 0.0, -5305.646978613403, 0.0, 11655.393336864534, 0.0,
        -13586.550006434138, 0.0, 8061.722181737309, 0.0, -1919.457662318407,
    ],
];

/// `A_d(κ)` together with its first three derivatives in κ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselRatioTable {
    pub d: usize,
    pub kappa: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

/// Truncated Taylor series `c0 + c1 h + c2 h² + c3 h³`.
#[derive(Debug, Clone, Copy)]
struct Jet([f64; 4]);

impl Jet {
    fn variable(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0])
    }

    fn recip(self) -> Self {
        let a = self.0;
        let mut q = [0.0; 4];
        q[0] = 1.0 / a[0];
        for k in 1..4 {
            let mut s = 0.0;
            for i in 1..=k {
                s += a[i] * q[k - i];
            }
            q[k] = -s * q[0];
        }
        Jet(q)
    }

    fn scale(self, s: f64) -> Self {
        Jet(self.0.map(|c| c * s))
    }

    fn shift(mut self, s: f64) -> Self {
        self.0[0] += s;
        self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2], self.0[3] + o.0[3]])
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2], self.0[3] - o.0[3]])
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        Jet([
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[1] * b[1] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0],
        ])
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

fn check_args(d: usize, kappa: f64) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain("dimension must be at least 2"));
    }
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::Domain("concentration must be finite and non-negative"));
    }
    Ok(())
}

/// Number of levels Perron's fraction for `I_v(x)/I_{v-1}(x)` needs, found by
/// running it forwards with the modified Lentz method.
fn perron_depth(v: f64, x: f64) -> (usize, f64) {
    const TINY: f64 = 1e-300;
    let mut f = 2.0 * v + x;
    let mut c = f;
    let mut dd = 0.0;
    let mut k = 1usize;
    while k < 1_000_000 {
        let kf = k as f64;
        let a = -(2.0 * v + 2.0 * kf - 1.0) * x;
        let b = 2.0 * v + kf + 2.0 * x;
        dd = b + a * dd;
        if dd == 0.0 {
            dd = TINY;
        }
        c = b + a / c;
        if c == 0.0 {
            c = TINY;
        }
        dd = 1.0 / dd;
        let delta = c * dd;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
        k += 1;
    }
    (k, x / f)
}

/// `I_v(x) / I_{v-1}(x)` for `v > 0`, `x ≥ 0`.
fn ratio_value(v: f64, x: f64) -> f64 {
    perron_depth(v, x).1
}

/// `I_v(x) / I_{v-1}(x)` as a Taylor jet in `x`, evaluated backwards to a
/// depth with some margin beyond what the value alone needs.
fn ratio_jet(v: f64, x: f64) -> Jet {
    let (n, _) = perron_depth(v, x);
    let depth = n + n / 4 + 8;
    let xj = Jet::variable(x);
    let two_x = xj.scale(2.0);
    let mut t = two_x.shift(2.0 * v + depth as f64);
    for k in (1..depth).rev() {
        let kf = k as f64;
        let num = xj.scale(-(2.0 * v + 2.0 * kf + 1.0));
        t = two_x.shift(2.0 * v + kf) + num / t;
    }
    let f = xj.shift(2.0 * v) + xj.scale(-(2.0 * v + 1.0)) / t;
    xj / f
}

/// `A_d(κ) = I_{d/2}(κ) / I_{d/2-1}(κ)`.
pub fn bessel_ratio(d: usize, kappa: f64) -> Result<f64> {
    check_args(d, kappa)?;
    if kappa == 0.0 {
        return Err(Error::Domain("concentration must be positive"));
    }
    Ok(ratio_value(d as f64 / 2.0, kappa))
}

/// `A_d(κ)` and its first three derivatives.
///
/// The values satisfy `A' = 1 - A² - (d-1)A/κ` and its two differentiated
/// forms, but are computed without using them.
pub fn bessel_ratio_derivatives(d: usize, kappa: f64) -> Result<BesselRatioTable> {
    check_args(d, kappa)?;
    let j = ratio_jet(d as f64 / 2.0, kappa);
    let t = BesselRatioTable {
        d,
        kappa,
        a: j.0[0],
        a1: j.0[1],
        a2: 2.0 * j.0[2],
        a3: 6.0 * j.0[3],
    };
    if !(t.a.is_finite() && t.a1.is_finite() && t.a2.is_finite() && t.a3.is_finite()) {
        return Err(Error::NonFinite("Bessel ratio derivatives"));
    }
    Ok(t)
}

fn debye_log_i(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let s = (1.0 + z * z).sqrt();
    let t = 1.0 / s;
    let eta = s + (z / (1.0 + s)).ln();
    let mut sum = 0.0;
    let mut nu_pow = 1.0;
    for poly in DEBYE_U.iter() {
        let mut p = 0.0;
        for &c in poly.iter().rev() {
            p = p * t + c;
        }
        sum += p / nu_pow;
        nu_pow *= nu;
    }
    nu * eta - 0.5 * (2.0 * PI * nu).ln() - 0.5 * s.ln() + sum.ln()
}

/// `log I_ν(x) - ν log x` for `x > 0`.
///
/// The power series is summed for `x ≤ ν + SERIES_MARGIN`, where all its terms
/// are positive and few; otherwise Debye's expansion is used, shifted down
/// from order [`DEBYE_MIN_ORDER`] when `ν` is small.
fn log_bessel_i_over_power(nu: f64, x: f64) -> f64 {
    if x <= nu + SERIES_MARGIN {
        return series_log_i_over_power(nu, x);
    }
    if nu >= DEBYE_MIN_ORDER {
        return debye_log_i(nu, x) - nu * x.ln();
    }
    let m = (DEBYE_MIN_ORDER - nu).ceil().max(1.0) as usize;
    let mut acc = debye_log_i(nu + m as f64, x);
    for j in 1..=m {
        acc -= ratio_value(nu + j as f64, x).ln();
    }
    acc - nu * x.ln()
}

/// Series branch: `I_ν(x) = (x/2)^ν / Γ(ν+1) · Σ_k y^k / (k! (ν+1)_k)`, `y = x²/4`.
fn series_log_i_over_power(nu: f64, x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= y / (k * (nu + k));
        sum += term;
        if term < 1e-17 * sum && k > y.sqrt() {
            break;
        }
        k += 1.0;
    }
    -nu * core::f64::consts::LN_2 - libm::lgamma(nu + 1.0) + sum.ln()
}

/// Width of the region above `x = ν` still handled by the power series.
const SERIES_MARGIN: f64 = 10.0;

/// `log I_ν(x)` for `ν ≥ 0` and `x > 0`, without overflow.
pub fn log_bessel_i(nu: f64, x: f64) -> f64 {
    log_bessel_i_over_power(nu, x) + nu * x.ln()
}

/// `log C_d(κ)`, the log normaliser of the d-dimensional vMF density.
///
/// At κ = 0 this is minus the log area of the unit sphere.
pub fn log_vmf_norm_constant(d: usize, kappa: f64) -> Result<f64> {
    check_args(d, kappa)?;
    let df = d as f64;
    if kappa == 0.0 {
        return Ok(-log_sphere_area(d));
    }
    let nu = df / 2.0 - 1.0;
    Ok(-0.5 * df * (2.0 * PI).ln() - log_bessel_i_over_power(nu, kappa))
}

/// Log surface area of the unit sphere in `R^d`, `log(2 π^{d/2} / Γ(d/2))`.
pub fn log_sphere_area(d: usize) -> f64 {
    let df = d as f64;
    core::f64::consts::LN_2 + 0.5 * df * PI.ln() - libm::lgamma(0.5 * df)
}

/// `log Γ(x)` for positive `x`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn coth(x: f64) -> f64 {
        1.0 / x.tanh()
    }

    #[test]
    fn a3_closed_form() {
        let a = bessel_ratio(3, 1.0).unwrap();
        assert!(rel(a, coth(1.0) - 1.0) < 1e-14);
        assert!((a - 0.313035).abs() < 1e-6);
        for &k in &[1e-3, 0.1, 2.0, 30.0, 700.0] {
            let a = bessel_ratio(3, k).unwrap();
            let exact = coth(k) - 1.0 / k;
            assert!(rel(a, exact) < 1e-10, "kappa={k}: {a} vs {exact}");
        }
    }

    #[test]
    fn a3_derivative_closed_form() {
        let t = bessel_ratio_derivatives(3, 1.0).unwrap();
        let s = 1.0 / 1.0f64.sinh();
        let exact = 1.0 - s * s;
        assert!(rel(t.a1, exact) < 1e-13);
    }

    #[test]
    fn small_kappa_limit() {
        let a = bessel_ratio(3, 1e-3).unwrap();
        assert!(a < 1e-3);
        assert!(rel(a, 1e-3 / 3.0) < 1e-6);
    }

    // Frozen from a 50-digit evaluation of the defining Bessel series.
    #[test]
    fn high_dimension_oracle() {
        let a = bessel_ratio(1000, 1000.0).unwrap();
        assert!(rel(a, 0.618186812910105) < 1e-8, "{a}");
        let c = log_vmf_norm_constant(1000, 1000.0).unwrap();
        assert!(rel(c, 1654.5508377313324) < 1e-8, "{c}");
    }

    #[test]
    fn log_c_closed_form_d3() {
        let c = log_vmf_norm_constant(3, 1.0).unwrap();
        assert!(rel(c, (1.0 / (4.0 * PI * 1.0f64.sinh())).ln()) < 1e-13);
        let c0 = log_vmf_norm_constant(3, 1e-6).unwrap();
        assert!((c0 - (1.0 / (4.0 * PI)).ln()).abs() < 1e-4);
        for &k in &[1e-6, 0.5, 10.0, 300.0, 1e5] {
            let c = log_vmf_norm_constant(3, k).unwrap();
            // log(κ / (4π sinh κ)) written overflow-safely
            let exact = k.ln() - (2.0 * PI).ln() - k - (-(-2.0 * k).exp()).ln_1p();
            assert!((c - exact).abs() < 1e-10 * exact.abs().max(1.0), "kappa={k}");
        }
    }

    #[test]
    fn huge_arguments_stay_finite() {
        for &d in &[2usize, 3, 10, 1000, 10_000] {
            for &k in &[1e-6, 1.0, 1e3, 1e6, 1e10] {
                let t = bessel_ratio_derivatives(d, k).unwrap();
                assert!(t.a > 0.0 && t.a < 1.0, "d={d} k={k}");
                assert!(t.a1 > 0.0, "d={d} k={k}");
                assert!(log_vmf_norm_constant(d, k).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_ratio(1, 1.0).is_err());
        assert!(bessel_ratio(3, 0.0).is_err());
        assert!(bessel_ratio(3, -1.0).is_err());
        assert!(bessel_ratio(3, f64::NAN).is_err());
        assert!(bessel_ratio(3, f64::INFINITY).is_err());
        assert!(log_vmf_norm_constant(3, -2.0).is_err());
    }

    #[test]
    fn monotone_on_grid() {
        let grid = [1e-3, 1.0, 10.0, 100.0, 1000.0];
        for &d in &[2usize, 3, 10, 100, 1000] {
            let vals: std::vec::Vec<f64> = grid.iter().map(|&k| bessel_ratio(d, k).unwrap()).collect();
            for w in vals.windows(2) {
                assert!(w[1] > w[0], "d={d}");
            }
        }
    }

    fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5 * x;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &d in &[2usize, 3, 10, 100] {
            for &k in &[0.1, 1.0, 10.0, 100.0, 1000.0] {
                let t = bessel_ratio_derivatives(d, k).unwrap();
                let g = |i: usize| {
                    move |x: f64| {
                        let t = bessel_ratio_derivatives(d, x).unwrap();
                        [t.a, t.a1, t.a2][i]
                    }
                };
                assert!(rel(central(g(0), k), t.a1) < 1e-4, "A1 d={d} k={k}");
                assert!(rel(central(g(1), k), t.a2) < 1e-4, "A2 d={d} k={k}");
                assert!(rel(central(g(2), k), t.a3) < 1e-4, "A3 d={d} k={k}");
            }
        }
    }

    #[test]
    fn recurrences_hold() {
        for &d in &[2usize, 3, 10, 100] {
            for &k in &[0.1, 1.0, 10.0, 100.0] {
                let t = bessel_ratio_derivatives(d, k).unwrap();
                let c = (d - 1) as f64;
                let a = t.a;
                let a1 = 1.0 - a * a - c * a / k;
                let df = d as f64;
                let a2 = 2.0 * a.powi(3) + 3.0 * c * a * a / k + (df * df - df - 2.0 * k * k) * a / (k * k)
                    - c / k;
                let a3 = -2.0 * a * a2 - 2.0 * a1 * a1 - c * a2 / k - 2.0 * c * a / k.powi(3)
                    + 2.0 * c * a1 / (k * k);
                assert!((t.a1 - a1).abs() < 1e-9 * t.a1.abs().max(1e-3), "d={d} k={k}");
                assert!((t.a2 - a2).abs() < 1e-7 * t.a2.abs().max(1e-3), "d={d} k={k}");
                assert!((t.a3 - a3).abs() < 1e-5 * t.a3.abs().max(1e-3), "d={d} k={k}");
            }
        }
    }

    #[test]
    fn log_c_derivative_is_minus_a() {
        for &d in &[2usize, 3, 10, 100, 1000] {
            for &k in &[0.1, 1.0, 10.0, 100.0, 1000.0] {
                let f = |x: f64| log_vmf_norm_constant(d, x).unwrap();
                let h = 1e-4 * k;
                let fd = (f(k + h) - f(k - h)) / (2.0 * h);
                let a = bessel_ratio(d, k).unwrap();
                // truncation error plus cancellation in the difference quotient
                let tol = 1e-7 * a + 100.0 * f64::EPSILON * f(k).abs() / h;
                assert!((fd + a).abs() < tol, "d={d} k={k}: {fd} vs {a}");
            }
        }
    }

    #[test]
    fn branches_agree_at_switchovers() {
        // Series against the asymptotic branch on both sides of `x = ν + margin`.
        for &nu in &[0.0, 0.5, 4.0, 49.0, 49.5, 60.0, 499.0] {
            let x = nu + SERIES_MARGIN;
            for &xx in &[x * (1.0 - 1e-12), x * (1.0 + 1e-12), x * 0.9, x * 1.1] {
                let s = series_log_i_over_power(nu, xx);
                let a = if nu >= DEBYE_MIN_ORDER {
                    debye_log_i(nu, xx) - nu * xx.ln()
                } else {
                    let m = (DEBYE_MIN_ORDER - nu).ceil() as usize;
                    let mut acc = debye_log_i(nu + m as f64, xx);
                    for j in 1..=m {
                        acc -= ratio_value(nu + j as f64, xx).ln();
                    }
                    acc - nu * xx.ln()
                };
                assert!((s - a).abs() < 1e-9 * s.abs().max(1.0), "nu={nu} x={xx}: {s} vs {a}");
            }
        }
    }

    proptest! {
        #[test]
        fn ratio_in_unit_interval(d in 2usize..400, lk in -6.0f64..8.0) {
            let t = bessel_ratio_derivatives(d, 10f64.powf(lk)).unwrap();
            prop_assert!(t.a > 0.0 && t.a < 1.0);
            prop_assert!(t.a1 > 0.0);
        }
    }
}
