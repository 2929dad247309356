//! Scalar special functions not covered by `statrs`, plus complex helpers
//! that stay accurate near the origin.

use num_complex::Complex64;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

pub use statrs::function::erf::{erf, erfc};
pub use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

/// 1/Γ(x), exact zero at the poles x = 0, -1, -2, ...
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Exponential integral E1(x) = ∫_x^∞ e^{-u}/u du for x > 0.
pub fn e1(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x <= 1.0 {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER - x.ln() + sum
    } else {
        // Modified Lentz on the continued fraction of e^x E1(x).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Surface area of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

pub fn clog1p(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        z * (1.0 - z * (0.5 - z * (1.0 / 3.0 - z * 0.25)))
    } else {
        (1.0 + z).ln()
    }
}

pub fn cexpm1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))
    } else {
        z.exp() - 1.0
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1_quadrature(x: f64) -> f64 {
        // ∫_0^∞ e^{-x(1+s)}/(1+s) ds after s = u/(1-u), midpoint rule
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let s = u / (1.0 - u);
            let jac = 1.0 / ((1.0 - u) * (1.0 - u));
            acc += (-x * (1.0 + s)).exp() / (1.0 + s) * jac;
        }
        acc / n as f64
    }

    #[test]
    fn e1_matches_quadrature_on_both_branches() {
        for &x in &[0.05, 0.5, 1.0, 1.5, 4.0, 20.0] {
            let q = e1_quadrature(x);
            assert!((e1(x) / q - 1.0).abs() < 1e-6, "x={x} {} {}", e1(x), q);
        }
    }

    #[test]
    fn e1_reference_values() {
        assert!((e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
        assert!((e1(0.1) - 1.822_923_958_419_390_7).abs() < 1e-14);
    }

    #[test]
    fn recip_gamma_poles() {
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-2.0), 0.0);
        assert!((recip_gamma(0.5) - 1.0 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn complex_helpers_agree_with_direct_forms() {
        for &z in &[
            Complex64::new(1e-6, 2e-6),
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.5, 1.5),
        ] {
            assert!((clog1p(z) - (1.0 + z).ln()).norm() < 1e-12 * (1.0 + z.norm()));
            assert!((cexpm1(z) - (z.exp() - 1.0)).norm() < 1e-12 * (1.0 + z.norm()));
        }
        let z = Complex64::new(1e-9, 0.0);
        assert!((clog1p(z).re / 1e-9f64.ln_1p() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
