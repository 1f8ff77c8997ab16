//! Closed-form characteristic functions of the example models, written
//! independently of the generic construction so the two can be compared.
//!
//! The hematopoiesis oracles work in rescaled time (`p1 = 1`).

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ParamMap;

fn param(p: &ParamMap, name: &str) -> Result<f64> {
    p.get(name).copied().ok_or_else(|| Error::MissingParameter(name.to_string()))
}

/// Lac-operon characteristic function in cleared form,
///
/// ```text
/// (λ + β_E Ē K_E / (K_E + E)^2 + γ_E)(λ + γ_I)(λ + γ_M)
///   - (α_E - β_E E / (K_E + E)) α_I F_E e^{-ν_M τ_I} e^{-λ (τ_I + τ_M)},
/// ```
///
/// where `F_E = d/dE F(e^{-ν_E τ_M} E)` and `F(y) = v y^n / (K^n + y^n)`.
/// `ebar_star` is the intermediate protein level; it must satisfy
/// `(α_E - β_E E / (K_E + E)) Ē = γ_E E`.
pub fn yildirim_char_oracle(params: &ParamMap, e_star: f64, ebar_star: f64, lambda: Complex64) -> Result<Complex64> {
    let g = |n: &str| param(params, n);
    let (gm, gi, ge) = (g("gamma_m")?, g("gamma_i")?, g("gamma_e")?);
    let (ai, ae, be, ke) = (g("alpha_i")?, g("alpha_e")?, g("beta_e")?, g("k_e")?);
    let (vmax, k, n) = (g("vmax")?, g("k")?, g("n")?);
    let (tau_m, tau_i, nu_e, nu_m) = (g("tau_m")?, g("tau_i")?, g("nu_e")?, g("nu_m")?);

    let gate = ae - be * e_star / (ke + e_star);
    let mismatch = (gate * ebar_star - ge * e_star).abs();
    if mismatch > 1e-8 * (ge * e_star).abs().max(1.0) {
        return Err(Error::InfeasibleParameters(format!(
            "E* = {e_star}, Ebar* = {ebar_star} violate the E balance by {mismatch:e}"
        )));
    }
    let shrink = (-nu_e * tau_m).exp();
    let y = shrink * e_star;
    let dfdy = if y > 0.0 {
        vmax * n * k.powf(n) * y.powf(n - 1.0) / (k.powf(n) + y.powf(n)).powi(2)
    } else if n == 1.0 {
        vmax / k
    } else {
        0.0
    };
    let f_e = shrink * dfdy;
    let slope = be * ebar_star * ke / ((ke + e_star) * (ke + e_star));
    let delay = (-lambda * (tau_i + tau_m)).exp();
    Ok((lambda + slope + ge) * (lambda + gi) * (lambda + gm) - gate * ai * f_e * (-nu_m * tau_i).exp() * delay)
}

fn knauer_ratio(a1: f64, a2: f64) -> Result<f64> {
    if !(a2 < a1) {
        return Err(Error::InfeasibleParameters(format!("positive equilibrium requires a2 < a1 (a1 = {a1}, a2 = {a2})")));
    }
    if !(2.0 * a1 > 1.0) {
        return Err(Error::InfeasibleParameters(format!("positive equilibrium requires 2 a1 > 1 (a1 = {a1})")));
    }
    Ok(a2 / a1)
}

/// Coefficients `[1, c2, c1, c0]` of the published hematopoiesis cubic.
pub fn knauer_published_cubic(a1: f64, a2: f64, p2: f64, d3: f64) -> Result<[f64; 4]> {
    let r = knauer_ratio(a1, a2)?;
    let b = 1.0 - 1.0 / (2.0 * a1);
    let c2 = (1.0 - r) * p2 + (1.0 - r) * b / (2.0 - r);
    let c1 = ((1.0 - r) * (1.0 - r) * b / (2.0 - r) - b * (1.0 - 2.0 * r)) * d3 * p2;
    let c0 = b * (1.0 - 2.0 * r) * d3 * p2;
    Ok([1.0, c2, c1, c0])
}

fn horner(coeffs: &[f64; 4], lambda: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * lambda + c)
}

/// The published cubic evaluated at `lambda`.
pub fn knauer_char_oracle(a1: f64, a2: f64, p2: f64, d3: f64, lambda: Complex64) -> Result<Complex64> {
    Ok(horner(&knauer_published_cubic(a1, a2, p2, d3)?, lambda))
}

/// `det(λ I - A(λ)) (λ + p2 (1 - a2/a1))` for the published two-variable
/// linearization matrix, with `h_1(u3*) = 1` and the constant `A_22`
/// correction.
pub fn knauer_matrix_char(a1: f64, a2: f64, p2: f64, d3: f64, lambda: Complex64) -> Result<Complex64> {
    let r = knauer_ratio(a1, a2)?;
    let b = 1.0 - 1.0 / (2.0 * a1);
    let shift = lambda + p2 * (1.0 - r);
    let a11 = Complex64::new(0.0, 0.0);
    let a12 = Complex64::new(b * d3 / (2.0 - r) * (1.0 - r), 0.0);
    let a21 = p2 * (2.0 - r) / shift;
    let a22 = d3 * (b * r / (2.0 - r) - 1.0) + p2 * d3 * (1.0 - 2.0 * r) * b;
    let det = (lambda - a11) * (lambda - a22) - a12 * a21;
    Ok(det * shift)
}

/// Coefficients `[1, c2, c1, c0]` of `det(λ I - J)` for the exact Jacobian
/// of the three-compartment model at its positive equilibrium (`p1 = 1`).
pub fn knauer_jacobian_cubic(a1: f64, a2: f64, p2: f64, d3: f64) -> Result<[f64; 4]> {
    let r = knauer_ratio(a1, a2)?;
    let b = 1.0 - 1.0 / (2.0 * a1);
    let c = (2.0 - r - b * r) / (2.0 - r);
    let d = (1.0 - r) * c + b * (2.0 * r - 1.0);
    Ok([1.0, (1.0 - r) * p2 + d3 * c, d3 * p2 * d, d3 * p2 * b * (1.0 - r)])
}

/// Cubic `knauer_jacobian_cubic` evaluated at `lambda`.
pub fn knauer_jacobian_char(a1: f64, a2: f64, p2: f64, d3: f64, lambda: Complex64) -> Result<Complex64> {
    Ok(horner(&knauer_jacobian_cubic(a1, a2, p2, d3)?, lambda))
}

/// `d3` at which `c2 c1 = c0` for the Jacobian cubic (a root pair sits on
/// the imaginary axis). `None` if no positive crossing exists.
pub fn knauer_routh_hurwitz_crossing(a1: f64, a2: f64, p2: f64) -> Result<Option<f64>> {
    let r = knauer_ratio(a1, a2)?;
    let b = 1.0 - 1.0 / (2.0 * a1);
    let c = (2.0 - r - b * r) / (2.0 - r);
    let d = (1.0 - r) * c + b * (2.0 * r - 1.0);
    // ((1-r) p2 + d3 c) d3 p2 d = d3 p2 b (1-r)
    let d3 = (b * (1.0 - r) / d - (1.0 - r) * p2) / c;
    Ok((d3 > 0.0 && d3.is_finite()).then_some(d3))
}

/// `c2 c1 - c0` for a monic cubic; positive with positive coefficients
/// means all roots lie in the open left half-plane.
pub fn routh_hurwitz_margin(coeffs: &[f64; 4]) -> f64 {
    coeffs[1] * coeffs[2] - coeffs[3] * coeffs[0]
}

/// Roots of a monic cubic from its companion matrix.
pub fn cubic_roots(coeffs: &[f64; 4]) -> [Complex64; 3] {
    let m = Matrix3::new(
        -coeffs[1], -coeffs[2], -coeffs[3], //
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0,
    );
    let ev = m.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambdas() -> Vec<Complex64> {
        [(1.0, 2.0), (-1.0, 2.0), (0.5, -0.3), (2.0, 0.0), (-0.2, 5.0)]
            .iter()
            .map(|&(a, b)| Complex64::new(a, b))
            .collect()
    }

    #[test]
    fn published_constant_coefficient() {
        let c = knauer_published_cubic(0.9, 0.5, 1.0, 1.0).unwrap();
        let expected = (1.0 - 1.0 / 1.8) * (1.0 - 10.0 / 9.0);
        assert!((c[3] - expected).abs() < 1e-15);
        assert!((c[3] + 0.049383).abs() < 1e-6);
    }

    #[test]
    fn conjugate_symmetry() {
        let mut p = ParamMap::new();
        for (k, v) in [
            ("gamma_m", 1.0), ("gamma_i", 0.8), ("gamma_e", 0.5), ("alpha_i", 1.2), ("alpha_e", 1.0),
            ("beta_e", 0.0), ("k_e", 1.0), ("vmax", 2.0), ("k", 1.0), ("n", 2.0),
            ("tau_m", 0.4), ("tau_i", 0.3), ("nu_e", 0.1), ("nu_m", 0.2),
        ] {
            p.insert(k.into(), v);
        }
        for l in lambdas() {
            let a = yildirim_char_oracle(&p, 1.0, 0.5, l.conj()).unwrap();
            let b = yildirim_char_oracle(&p, 1.0, 0.5, l).unwrap().conj();
            assert!((a - b).norm() <= 1e-14 * a.norm().max(1.0));
            let a = knauer_char_oracle(0.9, 0.5, 1.0, 1.0, l.conj()).unwrap();
            assert!((a - knauer_char_oracle(0.9, 0.5, 1.0, 1.0, l).unwrap().conj()).norm() <= 1e-14 * a.norm());
            let a = knauer_matrix_char(0.9, 0.5, 1.0, 1.0, l.conj()).unwrap();
            assert!((a - knauer_matrix_char(0.9, 0.5, 1.0, 1.0, l).unwrap().conj()).norm() <= 1e-14 * a.norm());
        }
    }

    #[test]
    fn decoupled_limit_roots() {
        let mut p = ParamMap::new();
        for (k, v) in [
            ("gamma_m", 1.0), ("gamma_i", 2.0), ("gamma_e", 3.0), ("alpha_i", 1.0), ("alpha_e", 1.0),
            ("beta_e", 0.0), ("k_e", 1.0), ("vmax", 0.0), ("k", 1.0), ("n", 2.0),
            ("tau_m", 0.0), ("tau_i", 0.0), ("nu_e", 0.0), ("nu_m", 0.0),
        ] {
            p.insert(k.into(), v);
        }
        for g in [1.0, 2.0, 3.0] {
            let v = yildirim_char_oracle(&p, 0.0, 0.0, Complex64::new(-g, 0.0)).unwrap();
            assert!(v.norm() < 1e-14);
        }
    }

    #[test]
    fn infeasible_parameters() {
        assert!(matches!(knauer_char_oracle(0.5, 0.6, 1.0, 1.0, Complex64::new(0.0, 0.0)), Err(Error::InfeasibleParameters(_))));
        assert!(matches!(knauer_matrix_char(0.4, 0.1, 1.0, 1.0, Complex64::new(0.0, 0.0)), Err(Error::InfeasibleParameters(_))));
    }

    #[test]
    fn matrix_determinant_at_zero() {
        // det(-A(0)) (p2 (1 - r)) = -a12 a21(0) p2 (1 - r)
        let (a1, a2, p2, d3) = (0.9, 0.5, 1.0, 1.0);
        let r = a2 / a1;
        let b = 1.0 - 1.0 / (2.0 * a1);
        let v = knauer_matrix_char(a1, a2, p2, d3, Complex64::new(0.0, 0.0)).unwrap();
        assert!((v.re + b * d3 * p2 * (1.0 - r)).abs() < 1e-15);
    }

    #[test]
    fn jacobian_cubic_exact_values() {
        // rational values at the fixture point
        let c = knauer_jacobian_cubic(0.9, 0.5, 1.0, 1.0).unwrap();
        for (got, want) in c.iter().zip([1.0, 149.0 / 117.0, 440.0 / 1053.0, 16.0 / 81.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn routh_hurwitz_crossing_zeroes_the_margin() {
        let d3 = knauer_routh_hurwitz_crossing(0.9, 0.3, 0.3).unwrap().unwrap();
        let m = routh_hurwitz_margin(&knauer_jacobian_cubic(0.9, 0.3, 0.3, d3).unwrap());
        assert!(m.abs() < 1e-14);
        let roots = cubic_roots(&knauer_jacobian_cubic(0.9, 0.3, 0.3, d3).unwrap());
        assert!(roots.iter().map(|z| z.re).fold(f64::MIN, f64::max).abs() < 1e-9);
    }
}
