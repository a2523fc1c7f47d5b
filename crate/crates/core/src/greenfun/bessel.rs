//! Bessel function of the first kind of order one.
//!
//! Power series below [`CROSSOVER`], Hankel asymptotic expansion above. Both
//! branches are accurate to better than `1e-12` absolute on their range.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Switch point between the two branches.
pub const CROSSOVER: f64 = 12.0;

const MAX_TERMS: usize = 80;

/// `J1(x)`; odd in `x`.
pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x < CROSSOVER {
        0.5 * x * reduced_series(x)
    } else {
        asymptotic(x)
    }
}

/// `2 J1(ξ) / ξ`, with the removable singularity at zero filled in.
pub fn shape_factor(xi: f64) -> f64 {
    let xi = xi.abs();
    if xi < CROSSOVER {
        reduced_series(xi)
    } else {
        2.0 * asymptotic(xi) / xi
    }
}

/// `Σ (-1)^k (x/2)^{2k} / (k! (k+1)!)`, i.e. `2 J1(x) / x`.
fn reduced_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        term *= -q / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn asymptotic(x: f64) -> f64 {
    const MU: f64 = 4.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    for k in 1..MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = term * (MU - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        let signed = if (k / 2) % 2 == 0 { term } else { -term };
        if k % 2 == 0 {
            p += signed;
        } else {
            q += signed;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    // cos(x - 3π/4) and sin(x - 3π/4) expanded to avoid reducing a shifted argument.
    let (s, c) = x.sin_cos();
    let cos_phase = (s - c) * FRAC_1_SQRT_2;
    let sin_phase = -(s + c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_phase - q * sin_phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    // Reference values from 30-digit arbitrary-precision evaluation, kept in full.
    #[allow(clippy::excessive_precision)]
    // Reference values from 30-digit arbitrary-precision evaluation.
    const TABLE: [(f64, f64); 14] = [
        (0.1, 0.049937526036242000321),
        (0.5, 0.24226845767487388638),
        (1.0, 0.44005058574493351596),
        (2.0, 0.5767248077568733872),
        (5.0, -0.32757913759146522204),
        (7.5, 0.13524842757970550518),
        (10.0, 0.04347274616886143667),
        (11.9, -0.22898324966192405505),
        (12.1, -0.21574897337692480827),
        (15.0, 0.20510403861352276115),
        (25.0, -0.12535024958028990465),
        (50.0, -0.097511828125175137661),
        (100.0, -0.077145352014112158033),
        (1000.0, 0.0047283119070895239176),
    ];

    #[test]
    fn matches_tabulated_values() {
        for (x, want) in TABLE {
            let got = bessel_j1(x);
            assert!((got - want).abs() < 1e-12, "J1({x}) = {got}, expected {want}");
        }
    }

    #[test]
    fn branches_agree_at_crossover() {
        let x = CROSSOVER;
        assert!((0.5 * x * reduced_series(x) - asymptotic(x)).abs() < 1e-12);
    }

    #[test]
    fn shape_factor_examples() {
        assert_eq!(shape_factor(0.0), 1.0);
        assert!(shape_factor(3.831_705_970_207_512_3).abs() < 1e-8);
        assert!((shape_factor(1.0) - 0.880_101_171_5).abs() < 1e-9);
        assert_eq!(bessel_j1(-2.0), -bessel_j1(2.0));
    }

    #[test]
    fn shape_factor_is_bounded() {
        for i in 0..20_000 {
            let xi = i as f64 * 0.05;
            assert!(shape_factor(xi).abs() <= 1.0, "F({xi}) out of range");
        }
    }
}
