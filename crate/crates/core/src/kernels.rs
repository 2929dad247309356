//! Subordinator kernel classes: Laplace symbols K(λ), exponents Φ(λ) = λK(λ),
//! time-domain tails k(t) and admissibility diagnostics.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::special::{cexpm1, clog1p, e1, erfc, gamma_fn, gamma_lr, recip_gamma};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "params", rename_all = "snake_case")]
pub enum KernelClass {
    Stable {
        theta: f64,
    },
    /// Realized as the mixture μ(α) = C α^{κ-1}/Γ(κ) on [0, 1], whose symbol
    /// behaves like C λ^{-1}(-ln λ)^{-κ} as λ → 0⁺.
    DistributedOrder {
        #[serde(rename = "C")]
        c: f64,
        kappa: f64,
    },
    InverseGamma {
        a: f64,
        b: f64,
    },
    Gamma {
        a: f64,
        b: f64,
    },
    TemperedStable {
        theta: f64,
        beta: f64,
    },
    /// μ tabulated as [alpha, weight] pairs, linearly interpolated.
    DistributedMu {
        mu: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelClass", into = "KernelClass")]
pub struct KernelSpec {
    class: KernelClass,
}

impl TryFrom<KernelClass> for KernelSpec {
    type Error = Error;
    fn try_from(class: KernelClass) -> Result<Self> {
        KernelSpec::new(class)
    }
}

impl From<KernelSpec> for KernelClass {
    fn from(s: KernelSpec) -> Self {
        s.class
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn unit_open(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda must be positive and finite, got {lambda}")))
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

impl KernelSpec {
    pub fn new(class: KernelClass) -> Result<Self> {
        match &class {
            KernelClass::Stable { theta } => unit_open("theta", *theta)?,
            KernelClass::DistributedOrder { c, kappa } => {
                positive("C", *c)?;
                positive("kappa", *kappa)?;
            }
            KernelClass::InverseGamma { a, b } => {
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::InvalidParameter(format!("a must be nonnegative, got {a}")));
                }
                positive("b", *b)?;
            }
            KernelClass::Gamma { a, b } => {
                positive("a", *a)?;
                positive("b", *b)?;
            }
            KernelClass::TemperedStable { theta, beta } => {
                unit_open("theta", *theta)?;
                positive("beta", *beta)?;
            }
            KernelClass::DistributedMu { mu } => validate_mu(mu)?,
        }
        Ok(Self { class })
    }

    pub fn stable(theta: f64) -> Result<Self> {
        Self::new(KernelClass::Stable { theta })
    }
    pub fn distributed_order(c: f64, kappa: f64) -> Result<Self> {
        Self::new(KernelClass::DistributedOrder { c, kappa })
    }
    pub fn inverse_gamma(a: f64, b: f64) -> Result<Self> {
        Self::new(KernelClass::InverseGamma { a, b })
    }
    pub fn gamma(a: f64, b: f64) -> Result<Self> {
        Self::new(KernelClass::Gamma { a, b })
    }
    pub fn tempered_stable(theta: f64, beta: f64) -> Result<Self> {
        Self::new(KernelClass::TemperedStable { theta, beta })
    }
    pub fn distributed_mu(mu: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(KernelClass::DistributedMu { mu })
    }

    pub fn class(&self) -> &KernelClass {
        &self.class
    }

    pub fn name(&self) -> &'static str {
        match self.class {
            KernelClass::Stable { .. } => "stable",
            KernelClass::DistributedOrder { .. } => "distributed_order",
            KernelClass::InverseGamma { .. } => "inverse_gamma",
            KernelClass::Gamma { .. } => "gamma",
            KernelClass::TemperedStable { .. } => "tempered_stable",
            KernelClass::DistributedMu { .. } => "distributed_mu",
        }
    }

    /// Stable cache key: the canonical JSON encoding.
    pub fn key(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{:?}", self.class))
    }

    /// Regular-variation index ϱ of K at the origin.
    pub fn varrho(&self) -> f64 {
        match &self.class {
            KernelClass::Stable { theta } => 1.0 - theta,
            KernelClass::InverseGamma { a, .. } if *a == 0.0 => 0.5,
            KernelClass::DistributedOrder { .. } | KernelClass::InverseGamma { .. } => 1.0,
            KernelClass::Gamma { .. } | KernelClass::TemperedStable { .. } => 0.0,
            KernelClass::DistributedMu { mu } => 1.0 - mu_support_start(mu),
        }
    }

    /// Limit ℓ of λK(λ) as λ → 0⁺.
    pub fn ell(&self) -> f64 {
        match &self.class {
            KernelClass::InverseGamma { a, b } => (a * b).sqrt(),
            _ => 0.0,
        }
    }

    /// Φ'(0) = E[S_1] when finite.
    pub fn mean_rate(&self) -> Option<f64> {
        match &self.class {
            KernelClass::Gamma { a, b } => Some(a / b),
            KernelClass::TemperedStable { theta, beta } => Some(theta * beta.powf(theta - 1.0)),
            _ => None,
        }
    }

    /// K(λ) for real λ > 0.
    pub fn k_laplace(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let v = match &self.class {
            KernelClass::Stable { theta } => lambda.powf(theta - 1.0),
            KernelClass::DistributedOrder { c, kappa } if lambda < 0.5 => {
                let u = -lambda.ln();
                c * gamma_lr(*kappa, u) * u.powf(-kappa) / lambda
            }
            KernelClass::InverseGamma { a, b } => {
                b.sqrt() / lambda * (2.0 * (2.0 * lambda + a).sqrt() - a.sqrt())
            }
            KernelClass::Gamma { a, b } => a * (lambda / b).ln_1p() / lambda,
            KernelClass::TemperedStable { theta, beta } => {
                beta.powf(*theta) * (theta * (lambda / beta).ln_1p()).exp_m1() / lambda
            }
            _ => self.k_complex(Complex64::new(lambda, 0.0)).re,
        };
        finite(v, "K(lambda)")
    }

    /// Φ(λ) = λK(λ) for real λ > 0.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let v = match &self.class {
            KernelClass::Stable { theta } => lambda.powf(*theta),
            KernelClass::InverseGamma { a, b } => b.sqrt() * (2.0 * (2.0 * lambda + a).sqrt() - a.sqrt()),
            KernelClass::Gamma { a, b } => a * (lambda / b).ln_1p(),
            KernelClass::TemperedStable { theta, beta } => {
                beta.powf(*theta) * (theta * (lambda / beta).ln_1p()).exp_m1()
            }
            _ => lambda * self.k_laplace(lambda)?,
        };
        finite(v, "Phi(lambda)")
    }

    /// K continued analytically off the real axis (principal branches).
    pub fn k_complex(&self, lambda: Complex64) -> Complex64 {
        match &self.class {
            KernelClass::Stable { theta } => ((theta - 1.0) * lambda.ln()).exp(),
            KernelClass::DistributedOrder { c, kappa } => distributed_order_k(*c, *kappa, lambda),
            KernelClass::InverseGamma { a, b } => {
                b.sqrt() / lambda * (2.0 * (2.0 * lambda + a).sqrt() - a.sqrt())
            }
            KernelClass::Gamma { a, b } => {
                let z = lambda / b;
                if z.norm() < 1e-4 {
                    a / b * (1.0 - z * (0.5 - z * (1.0 / 3.0 - z * 0.25)))
                } else {
                    a * clog1p(z) / lambda
                }
            }
            KernelClass::TemperedStable { theta, beta } => {
                let z = lambda / beta;
                if z.norm() < 1e-6 {
                    let th = *theta;
                    beta.powf(th - 1.0) * th * (1.0 + (th - 1.0) * 0.5 * z)
                } else {
                    beta.powf(*theta) * cexpm1(theta * clog1p(z)) / lambda
                }
            }
            KernelClass::DistributedMu { mu } => distributed_mu_k(mu, lambda),
        }
    }

    pub fn phi_complex(&self, lambda: Complex64) -> Complex64 {
        match &self.class {
            KernelClass::Stable { theta } => (theta * lambda.ln()).exp(),
            KernelClass::InverseGamma { a, b } => b.sqrt() * (2.0 * (2.0 * lambda + a).sqrt() - a.sqrt()),
            KernelClass::Gamma { a, b } => a * clog1p(lambda / b),
            KernelClass::TemperedStable { theta, beta } => {
                beta.powf(*theta) * cexpm1(theta * clog1p(lambda / beta))
            }
            _ => lambda * self.k_complex(lambda),
        }
    }

    /// Time-domain kernel k(t), the tail of the Lévy measure (plus killing).
    pub fn k_time(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("t must be positive and finite, got {t}")));
        }
        let v = match &self.class {
            KernelClass::Stable { theta } => t.powf(-theta) * recip_gamma(1.0 - theta),
            KernelClass::Gamma { a, b } => a * e1(b * t),
            KernelClass::InverseGamma { a, b } => {
                // Inverse transform of the symbol above; tends to √(ab) as t → ∞.
                let z = (a * t / 2.0).sqrt();
                2.0 * (2.0 * b / PI).sqrt() * (-a * t / 2.0).exp() / t.sqrt()
                    + (a * b).sqrt() * (1.0 - 2.0 * erfc(z))
            }
            KernelClass::DistributedMu { mu } => {
                let lt = t.ln();
                integrate_mu(mu, lt.abs(), |alpha| (-alpha * lt).exp() * recip_gamma(1.0 - alpha))
            }
            KernelClass::DistributedOrder { .. } => {
                return Err(Error::Unsupported {
                    class: "distributed_order",
                    what: "time-domain kernel",
                })
            }
            KernelClass::TemperedStable { .. } => {
                return Err(Error::Unsupported {
                    class: "tempered_stable",
                    what: "time-domain kernel",
                })
            }
        };
        finite(v, "k(t)")
    }

    /// Slowly varying part L(x) = x^{-ϱ} K(1/x).
    pub fn svf(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::Domain(format!("x must be positive and finite, got {x}")));
        }
        let v = match &self.class {
            KernelClass::Stable { .. } => 1.0,
            KernelClass::DistributedOrder { c, kappa } if x > 2.0 => {
                let u = x.ln();
                c * gamma_lr(*kappa, u) * u.powf(-kappa)
            }
            KernelClass::InverseGamma { a, b } if *a == 0.0 => 2.0 * (2.0 * b).sqrt(),
            KernelClass::InverseGamma { a, b } => b.sqrt() * (2.0 * (2.0 / x + a).sqrt() - a.sqrt()),
            KernelClass::Gamma { a, b } => a * x * (1.0 / (b * x)).ln_1p(),
            KernelClass::TemperedStable { theta, beta } => {
                x * beta.powf(*theta) * (theta * (1.0 / (x * beta)).ln_1p()).exp_m1()
            }
            _ => x.powf(-self.varrho()) * self.k_laplace(1.0 / x)?,
        };
        finite(v, "L(x)")
    }

    pub fn admissibility_report(&self) -> AdmissibilityReport {
        admissibility_report(self)
    }
}

fn validate_mu(mu: &[[f64; 2]]) -> Result<()> {
    if mu.len() < 2 {
        return Err(Error::InvalidParameter("mu table needs at least two points".into()));
    }
    for w in mu.windows(2) {
        if !(w[1][0] > w[0][0]) {
            return Err(Error::InvalidParameter("mu alphas must be strictly increasing".into()));
        }
    }
    for p in mu {
        if !(p[0].is_finite() && (0.0..=1.0).contains(&p[0])) {
            return Err(Error::InvalidParameter(format!("mu alpha {} outside [0, 1]", p[0])));
        }
        if !(p[1].is_finite() && p[1] >= 0.0) {
            return Err(Error::InvalidParameter(format!("mu weight {} must be nonnegative", p[1])));
        }
    }
    if mu.iter().all(|p| p[1] == 0.0) {
        return Err(Error::InvalidParameter("mu must have positive mass".into()));
    }
    Ok(())
}

/// Left end of the support of the interpolated μ.
fn mu_support_start(mu: &[[f64; 2]]) -> f64 {
    match mu.iter().position(|p| p[1] > 0.0) {
        Some(0) | None => mu[0][0],
        Some(i) => mu[i - 1][0],
    }
}

/// ∫ f(α) μ(α) dα over the tabulated support; `rate` bounds |d ln f/dα| and
/// drives the panel subdivision.
pub(crate) fn integrate_mu<F: Fn(f64) -> f64>(mu: &[[f64; 2]], rate: f64, f: F) -> f64 {
    let gl = gauss_legendre(16);
    let mut acc = 0.0;
    for w in mu.windows(2) {
        let (a0, w0) = (w[0][0], w[0][1]);
        let (a1, w1) = (w[1][0], w[1][1]);
        if w0 == 0.0 && w1 == 0.0 {
            continue;
        }
        let pieces = ((a1 - a0) * rate / 4.0).ceil().max(1.0) as usize;
        let h = (a1 - a0) / pieces as f64;
        for p in 0..pieces {
            let lo = a0 + p as f64 * h;
            for (alpha, wt) in gl.mapped(lo, lo + h) {
                let m = w0 + (w1 - w0) * (alpha - a0) / (a1 - a0);
                acc += wt * m * f(alpha);
            }
        }
    }
    acc
}

fn distributed_mu_k(mu: &[[f64; 2]], lambda: Complex64) -> Complex64 {
    let gl = gauss_legendre(16);
    let l = lambda.ln();
    let rate = l.norm();
    let mut acc = Complex64::new(0.0, 0.0);
    for w in mu.windows(2) {
        let (a0, w0) = (w[0][0], w[0][1]);
        let (a1, w1) = (w[1][0], w[1][1]);
        if w0 == 0.0 && w1 == 0.0 {
            continue;
        }
        let pieces = ((a1 - a0) * rate / 4.0).ceil().max(1.0) as usize;
        let h = (a1 - a0) / pieces as f64;
        for p in 0..pieces {
            let lo = a0 + p as f64 * h;
            for (alpha, wt) in gl.mapped(lo, lo + h) {
                let m = w0 + (w1 - w0) * (alpha - a0) / (a1 - a0);
                acc += wt * m * ((alpha - 1.0) * l).exp();
            }
        }
    }
    acc
}

const DYADIC_LEVELS: i32 = 48;

/// (C/Γ(κ)) ∫_0^1 α^{κ-1} λ^{α-1} dα on dyadic panels toward α = 0.
fn distributed_order_k(c: f64, kappa: f64, lambda: Complex64) -> Complex64 {
    let gl = gauss_legendre(12);
    let l = lambda.ln();
    let rate = l.norm();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..DYADIC_LEVELS {
        let hi = 0.5f64.powi(k);
        let lo = 0.5 * hi;
        let pieces = ((hi - lo) * rate / 3.0).ceil().max(1.0) as usize;
        let h = (hi - lo) / pieces as f64;
        for p in 0..pieces {
            let a = lo + p as f64 * h;
            for (alpha, wt) in gl.mapped(a, a + h) {
                acc += wt * alpha.powf(kappa - 1.0) * ((alpha - 1.0) * l).exp();
            }
        }
    }
    // Remaining sliver [0, ε]: λ^{α-1} ≈ λ^{-1}(1 + α ln λ).
    let eps = 0.5f64.powi(DYADIC_LEVELS);
    let inv = (-l).exp();
    acc += inv * (eps.powf(kappa) / kappa + l * eps.powf(kappa + 1.0) / (kappa + 1.0));
    acc * (c / gamma_fn(kappa))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvfRatio {
    pub x: f64,
    pub c: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub class: String,
    pub varrho: f64,
    pub ell: f64,
    /// (λ, λK(λ)) along λ = 10^-2 .. 10^-8.
    pub limit_samples: Vec<(f64, f64)>,
    pub limit_estimate: f64,
    pub limit_deviation: f64,
    /// The small-λ limit matches ℓ within tolerance.
    pub limit_ok: bool,
    /// ℓ > 0: the weighted-norm regime applies.
    pub positive_limit: bool,
    pub svf_table: Vec<SvfRatio>,
    pub svf_pass: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

pub const LIMIT_TOLERANCE: f64 = 1e-2;
pub const SVF_TOLERANCE: f64 = 1e-2;

pub fn admissibility_report(spec: &KernelSpec) -> AdmissibilityReport {
    let ell = spec.ell();
    let mut notes = Vec::new();
    let mut limit_samples = Vec::new();
    for k in 2..=8 {
        let lambda = 10f64.powi(-k);
        match spec.phi(lambda) {
            Ok(v) => limit_samples.push((lambda, v)),
            Err(e) => notes.push(format!("lambda={lambda:e}: {e}")),
        }
    }
    let limit_estimate = limit_samples.last().map(|p| p.1).unwrap_or(f64::NAN);
    let limit_deviation = (limit_estimate - ell).abs();
    let limit_ok = limit_deviation <= LIMIT_TOLERANCE;
    let positive_limit = ell > 0.0;
    if positive_limit && limit_ok {
        notes.push(format!("small-lambda limit holds with ell = {ell} > 0"));
    }
    if !limit_ok {
        notes.push(format!(
            "lambda*K(lambda) at 1e-8 is {limit_estimate:e}, off the limit {ell} by more than {LIMIT_TOLERANCE}"
        ));
    }
    let mut svf_table = Vec::new();
    let mut svf_pass = true;
    for &c in &[2.0, 10.0] {
        let mut prev = f64::INFINITY;
        let mut last = f64::NAN;
        for k in 2..=8 {
            let x = 10f64.powi(k);
            let ratio = match (spec.svf(c * x), spec.svf(x)) {
                (Ok(a), Ok(b)) => (a / b - 1.0).abs(),
                _ => f64::NAN,
            };
            if !(ratio <= prev * (1.0 + 1e-9) + 1e-15) {
                svf_pass = false;
            }
            prev = ratio;
            last = ratio;
            svf_table.push(SvfRatio { x, c, ratio });
        }
        if !(last < SVF_TOLERANCE) {
            svf_pass = false;
            notes.push(format!("SVF ratio for c={c} at x=1e8 is {last:.4e}, above {SVF_TOLERANCE}"));
        }
    }
    AdmissibilityReport {
        class: spec.name().to_string(),
        varrho: spec.varrho(),
        ell,
        limit_samples,
        limit_estimate,
        limit_deviation,
        limit_ok,
        positive_limit,
        svf_table,
        svf_pass,
        pass: limit_ok && svf_pass,
        notes,
    }
}

pub fn eval_k_laplace(spec: &KernelSpec, lambda: f64) -> Result<f64> {
    spec.k_laplace(lambda)
}

pub fn eval_phi(spec: &KernelSpec, lambda: f64) -> Result<f64> {
    spec.phi(lambda)
}

pub fn eval_k_time(spec: &KernelSpec, t: f64) -> Result<f64> {
    spec.k_time(t)
}

pub fn svf_l(spec: &KernelSpec, x: f64) -> Result<f64> {
    spec.svf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive_breakpoints, geometric_breakpoints, Tolerance};
    use proptest::prelude::*;

    fn all_classes() -> Vec<KernelSpec> {
        vec![
            KernelSpec::stable(0.5).unwrap(),
            KernelSpec::distributed_order(1.5, 2.0).unwrap(),
            KernelSpec::inverse_gamma(1.0, 1.0).unwrap(),
            KernelSpec::gamma(2.0, 1.0).unwrap(),
            KernelSpec::tempered_stable(0.5, 1.0).unwrap(),
            KernelSpec::distributed_mu(vec![[0.2, 1.0], [0.5, 2.0], [0.9, 0.5]]).unwrap(),
        ]
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn closed_form_values() {
        assert!(rel(KernelSpec::stable(0.5).unwrap().k_laplace(4.0).unwrap(), 0.5) < 1e-12);
        let g = KernelSpec::gamma(2.0, 1.0).unwrap();
        assert!(rel(g.k_laplace(1.0).unwrap(), 2.0 * 2f64.ln()) < 1e-12);
        let ig = KernelSpec::inverse_gamma(0.0, 2.0).unwrap();
        assert!(rel(ig.k_laplace(2.0).unwrap(), 2.0 * 2f64.sqrt()) < 1e-12);
        let ts = KernelSpec::tempered_stable(0.5, 1.0).unwrap();
        assert!(rel(ts.phi(3.0).unwrap(), 1.0) < 1e-12);
        let ig1 = KernelSpec::inverse_gamma(1.0, 1.0).unwrap();
        assert!((ig1.phi(1e-8).unwrap() - 1.0).abs() < 1e-3);
        assert!(KernelSpec::stable(0.5).unwrap().phi(1e-300).unwrap() < 1e-100);
    }

    #[test]
    fn inverse_gamma_without_drift_is_scaled_half_stable() {
        let b = 2.0;
        let ig = KernelSpec::inverse_gamma(0.0, b).unwrap();
        let st = KernelSpec::stable(0.5).unwrap();
        for k in -6..=6 {
            let l = 10f64.powf(k as f64 * 0.7);
            let r = ig.k_laplace(l).unwrap() / st.k_laplace(l).unwrap();
            assert!(rel(r, 2.0 * (2.0 * b).sqrt()) < 1e-12, "lambda={l}");
        }
    }

    #[test]
    fn time_kernel_values() {
        let st = KernelSpec::stable(0.5).unwrap();
        assert!(rel(st.k_time(1.0).unwrap(), 1.0 / PI.sqrt()) < 1e-12);
        // Γ(0, 1) by quadrature of ∫_1^∞ e^{-u}/u du
        let q = adaptive_breakpoints(|u: f64| (-u).exp() / u, &[1.0, 2.0, 5.0, 20.0, 80.0], Tolerance::new(1e-16, 1e-14))
            .unwrap()
            .value;
        let g = KernelSpec::gamma(1.0, 1.0).unwrap();
        assert!(rel(g.k_time(1.0).unwrap(), q) < 1e-10);
        assert!(matches!(
            KernelSpec::tempered_stable(0.5, 1.0).unwrap().k_time(1.0),
            Err(Error::Unsupported { .. })
        ));
        assert!(matches!(
            KernelSpec::distributed_order(1.0, 1.0).unwrap().k_time(1.0),
            Err(Error::Unsupported { .. })
        ));
    }

    fn laplace_of_k(spec: &KernelSpec, lambda: f64) -> f64 {
        // ∫_0^∞ e^{-λt} k(t) dt on panels that cluster at t = 0
        let top = 60.0 / lambda;
        let mut pts = geometric_breakpoints(0.0, 1.0, 60);
        let mut x = 1.0;
        while x < top {
            x *= 2.0;
            pts.push(x.min(top));
        }
        adaptive_breakpoints(
            |t| if t > 0.0 { (-lambda * t).exp() * spec.k_time(t).unwrap() } else { 0.0 },
            &pts,
            Tolerance::new(1e-14, 1e-11),
        )
        .unwrap()
        .value
    }

    #[test]
    fn forward_transform_of_time_kernel_recovers_symbol() {
        let specs = [
            KernelSpec::stable(0.3).unwrap(),
            KernelSpec::gamma(2.0, 1.5).unwrap(),
            KernelSpec::inverse_gamma(1.0, 2.0).unwrap(),
            KernelSpec::inverse_gamma(0.0, 1.0).unwrap(),
            KernelSpec::distributed_mu(vec![[0.1, 0.0], [0.4, 1.0], [0.8, 1.0]]).unwrap(),
        ];
        for s in &specs {
            for &l in &[0.5, 1.0, 5.0] {
                let q = laplace_of_k(s, l);
                let k = s.k_laplace(l).unwrap();
                assert!(rel(q, k) < 1e-6, "{} lambda={l}: {q} vs {k}", s.name());
            }
        }
    }

    #[test]
    fn svf_values() {
        assert_eq!(KernelSpec::stable(0.7).unwrap().svf(123.0).unwrap(), 1.0);
        let g = KernelSpec::gamma(1.0, 1.0).unwrap();
        assert!((g.svf(1e6).unwrap() - 1.0).abs() < 1e-6);
        // The mixture realization carries the factor P(κ, ln x) → 1.
        let c2 = KernelSpec::distributed_order(3.0, 2.0).unwrap();
        let x = 4f64.exp();
        let exact = 3.0 / 16.0 * (1.0 - 5.0 * (-4f64).exp());
        assert!(rel(c2.svf(x).unwrap(), exact) < 1e-12);
        let far = 1e30;
        assert!(rel(c2.svf(far).unwrap(), 3.0 * far.ln().powi(-2)) < 1e-12);
    }

    #[test]
    fn distributed_order_complex_path_matches_closed_form() {
        let c2 = KernelSpec::distributed_order(1.3, 0.6).unwrap();
        for &l in &[1e-8, 1e-4, 0.01, 0.3, 0.49] {
            let closed = c2.k_laplace(l).unwrap();
            let quad = c2.k_complex(Complex64::new(l, 0.0));
            assert!(rel(quad.re, closed) < 1e-11, "lambda={l}: {} vs {closed}", quad.re);
            assert!(quad.im.abs() < 1e-12 * closed);
        }
    }

    #[test]
    fn complex_and_real_paths_agree() {
        for s in all_classes() {
            for &l in &[1e-5, 0.01, 0.7, 3.0, 250.0] {
                let r = s.k_laplace(l).unwrap();
                let c = s.k_complex(Complex64::new(l, 0.0));
                assert!(rel(c.re, r) < 1e-11, "{} lambda={l}", s.name());
                let p = s.phi_complex(Complex64::new(l, 0.0)).re;
                assert!(rel(p, s.phi(l).unwrap()) < 1e-11, "{} lambda={l}", s.name());
            }
        }
    }

    #[test]
    fn point_mass_mu_reproduces_stable() {
        let a0 = 0.35;
        let w = 1e-4;
        let mu = KernelSpec::distributed_mu(vec![[a0 - w, 0.0], [a0, 1.0 / w], [a0 + w, 0.0]]).unwrap();
        let st = KernelSpec::stable(a0).unwrap();
        for &l in &[0.01, 0.5, 2.0, 40.0] {
            assert!(rel(mu.k_laplace(l).unwrap(), st.k_laplace(l).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn indices_and_limits() {
        let expect = [0.5, 1.0, 1.0, 0.0, 0.0, 0.8];
        for (s, e) in all_classes().iter().zip(expect) {
            assert!((s.varrho() - e).abs() < 1e-15, "{}", s.name());
            let ell = s.ell();
            if s.name() == "inverse_gamma" {
                assert_eq!(ell, 1.0);
            } else {
                assert_eq!(ell, 0.0);
            }
        }
        assert_eq!(KernelSpec::inverse_gamma(0.0, 3.0).unwrap().ell(), 0.0);
    }

    #[test]
    fn admissibility_examples() {
        let r = KernelSpec::stable(0.3).unwrap().admissibility_report();
        assert!(r.pass && r.limit_estimate <= 1e-2);
        let r = KernelSpec::inverse_gamma(1.0, 4.0).unwrap().admissibility_report();
        assert!((r.limit_estimate - 2.0).abs() < 1e-3);
        assert!(r.positive_limit && r.limit_ok);
        assert!(r.notes.iter().any(|n| n.contains("ell = 2")));
        let r = KernelSpec::distributed_order(1.0, 1.0).unwrap().admissibility_report();
        let row = r.svf_table.iter().find(|s| s.c == 2.0 && s.x == 1e8).unwrap();
        let hand = (1e8f64.ln() / 2e8f64.ln() - 1.0).abs();
        assert!((row.ratio - hand).abs() < 1e-6 && (hand - 0.0363).abs() < 1e-4);
        let col: Vec<f64> = r.svf_table.iter().filter(|s| s.c == 2.0).map(|s| s.ratio).collect();
        assert!(col.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn nonpositive_lambda_rejected() {
        let s = KernelSpec::gamma(1.0, 1.0).unwrap();
        assert!(matches!(s.k_laplace(0.0), Err(Error::Domain(_))));
        assert!(matches!(s.phi(-1.0), Err(Error::Domain(_))));
        let st = KernelSpec::stable(0.5).unwrap();
        assert!(matches!(st.k_laplace(1e-320), Err(Error::NonFinite(_)) | Ok(_)));
        let c2 = KernelSpec::distributed_order(1.0, 1.0).unwrap();
        assert!(matches!(c2.k_laplace(4e-324), Err(Error::NonFinite(_))));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(KernelSpec::stable(1.0).is_err());
        assert!(KernelSpec::gamma(0.0, 1.0).is_err());
        assert!(KernelSpec::inverse_gamma(-1.0, 1.0).is_err());
        assert!(KernelSpec::distributed_mu(vec![[0.5, 1.0]]).is_err());
        assert!(KernelSpec::distributed_mu(vec![[0.5, 1.0], [0.4, 1.0]]).is_err());
        assert!(KernelSpec::distributed_mu(vec![[0.1, 0.0], [0.4, 0.0]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        for s in all_classes() {
            let j = serde_json::to_string(&s).unwrap();
            let back: KernelSpec = serde_json::from_str(&j).unwrap();
            assert_eq!(back, s);
        }
        let s: KernelSpec =
            serde_json::from_str(r#"{"class":"distributed_order","params":{"C":2.0,"kappa":1.5}}"#).unwrap();
        assert_eq!(s, KernelSpec::distributed_order(2.0, 1.5).unwrap());
        let bad = serde_json::from_str::<KernelSpec>(r#"{"class":"stable","params":{"theta":1.5}}"#);
        assert!(bad.is_err());
    }

    /// Φ, Φ', Φ'' by central differences in ln λ.
    fn bernstein_signs(s: &KernelSpec, l: f64) -> (f64, f64, f64) {
        let h: f64 = 1e-3;
        let p = |x: f64| s.phi(x).unwrap();
        let (lm, l0, lp) = (l * (-h).exp(), l, l * h.exp());
        let (fm, f0, fp) = (p(lm), p(l0), p(lp));
        let d1 = (fp - fm) / (lp - lm);
        let dl = (fp - f0) / (lp - l0);
        let dr = (f0 - fm) / (l0 - lm);
        let d2 = 2.0 * (dl - dr) / (lp - lm);
        (f0, d1, d2)
    }

    proptest! {
        #[test]
        fn phi_is_bernstein(idx in 0usize..6, e in -4.0f64..2.0) {
            let s = &all_classes()[idx];
            let l = 10f64.powf(e);
            let (f, d1, d2) = bernstein_signs(s, l);
            prop_assert!(f >= 0.0);
            prop_assert!(d1 >= -1e-4 * d1.abs().max(f / l));
            prop_assert!(d2 <= 1e-4 * d1.abs() / l);
        }

        #[test]
        fn svf_consistent_with_symbol(idx in 0usize..6, e in -3.0f64..9.0) {
            let s = &all_classes()[idx];
            let x = 10f64.powf(e);
            let direct = x.powf(-s.varrho()) * s.k_laplace(1.0 / x).unwrap();
            let l = s.svf(x).unwrap();
            prop_assert!((direct / l - 1.0).abs() < 1e-12, "{} x={} {} {}", s.name(), x, direct, l);
        }

        #[test]
        fn symbol_positive(idx in 0usize..6, e in -8.0f64..6.0) {
            let s = &all_classes()[idx];
            prop_assert!(s.k_laplace(10f64.powf(e)).unwrap() > 0.0);
        }

        #[test]
        fn inverse_gamma_half_stable_ratio(b in 0.01f64..50.0, e in -6.0f64..6.0) {
            let l = 10f64.powf(e);
            let r = KernelSpec::inverse_gamma(0.0, b).unwrap().k_laplace(l).unwrap()
                / KernelSpec::stable(0.5).unwrap().k_laplace(l).unwrap();
            prop_assert!((r / (2.0 * (2.0 * b).sqrt()) - 1.0).abs() < 1e-12);
        }
    }
}
