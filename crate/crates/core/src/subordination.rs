//! Subordinated solutions v^E(t) = ∫ v(τ) G_t(τ) dτ, their Cesàro means,
//! the predicted long-time asymptotes, decay fits and the Caputo operator.

use crate::error::{Error, Result};
use crate::heat::MassSummary;
use crate::kernels::{integrate_mu, KernelClass, KernelSpec};
use crate::laplace::{GDensity, Weight};
use crate::quadrature::gauss_legendre;
use crate::series::{linear_fit, AsymptoticFit, FitModel, SeriesTag, TimeSeries};
use crate::special::gamma_fn;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Largest admissible bound on the τ-tail beyond the series, relative to
/// the integral.
pub const COVERAGE_TOLERANCE: f64 = 1e-4;
/// Head share of a Cesàro integral above which the result is flagged.
pub const HEAD_FLAG: f64 = 0.01;
const QUAD_REL: f64 = 1e-9;

/// G_t tables shared across probe points, keyed by (spec, t).
#[derive(Default)]
pub struct GCache {
    inner: RwLock<HashMap<(String, u64), Arc<GDensity>>>,
}

impl GCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, spec: &KernelSpec, t: f64) -> Result<Arc<GDensity>> {
        let key = (spec.key(), t.to_bits());
        if let Some(g) = self.inner.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(g.clone());
        }
        let g = Arc::new(GDensity::new(spec, t)?);
        let mut map = self.inner.write().unwrap_or_else(|e| e.into_inner());
        Ok(map.entry(key).or_insert(g).clone())
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// v^E(x, t) = ∫ v(x, τ) G_t(τ) dτ for a nonnegative series.
pub fn subordinate(v: &TimeSeries, spec: &KernelSpec, t: f64) -> Result<f64> {
    subordinate_with(&GDensity::new(spec, t)?, v)
}

pub fn subordinate_with(g: &GDensity, v: &TimeSeries) -> Result<f64> {
    if v.values().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter("subordinated series must be nonnegative".into()));
    }
    Ok(integrate_series(g, v, Weight::Density)?.max(0.0))
}

/// As `subordinate_with` without the sign requirement.
pub fn subordinate_signed(g: &GDensity, v: &TimeSeries) -> Result<f64> {
    integrate_series(g, v, Weight::Density)
}

/// M_t by the kernel route: ∫ v(τ) (1/t)∫_0^t G_s(τ) ds dτ.
/// For finite-mean classes each kernel value is itself an s-quadrature,
/// so this costs seconds to minutes per t.
pub fn cesaro_by_kernel(v: &TimeSeries, spec: &KernelSpec, t: f64) -> Result<f64> {
    integrate_series(&GDensity::new(spec, t)?, v, Weight::Cumulative)
}

/// ∫ v w dτ with v interpolated inside the series and the tail beyond it
/// bounded through P(E_t > τ) ≤ e^{1 − τΦ(1/t)}, which also bounds the
/// Cesàro kernel's tail mass.
fn integrate_series(g: &GDensity, v: &TimeSeries, weight: Weight) -> Result<f64> {
    let end = v.t_max();
    let r = g.integrate_against(|tau| if tau <= end { v.interpolate(tau) } else { 0.0 }, weight, QUAD_REL)?;
    let phi = g.spec().phi(1.0 / g.t())?;
    let prob = (1.0 - end * phi).exp().min(1.0);
    let last = &v.values()[v.len().saturating_sub(8)..];
    let scale = last.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tail = scale * prob;
    if tail > COVERAGE_TOLERANCE * r.value.abs() {
        return Err(Error::Coverage(format!(
            "series ends at tau={end:e}; tail bound {tail:e} against integral {:e} at t={}",
            r.value,
            g.t()
        )));
    }
    Ok(r.value)
}

/// v^E on a set of times, evaluated in parallel through the cache.
pub fn subordinated_series(v: &TimeSeries, spec: &KernelSpec, times: &[f64], cache: &GCache) -> Result<TimeSeries> {
    let values = times
        .par_iter()
        .map(|&t| subordinate_with(&*cache.get(spec, t)?, v))
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(times.to_vec(), values, SeriesTag::VE)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CesaroMean {
    pub value: f64,
    /// Share of the integral carried by the [0, t_min] head.
    pub head_share: f64,
    pub flagged: bool,
}

/// ∫_a^b f dt as ∫ f(e^u) e^u du, four Gauss points on the series interpolant.
fn segment_integral(series: &TimeSeries, a: f64, b: f64) -> f64 {
    gauss_legendre(4)
        .mapped(a.ln(), b.ln())
        .map(|(u, w)| {
            let x = u.exp();
            w * x * series.interpolate(x)
        })
        .sum()
}

/// (1/t)∫_0^t f(s) ds from a log-spaced series; the head [0, t_min] takes
/// the first sample value and is flagged above 1% of the total.
pub fn cesaro_mean(series: &TimeSeries, t: f64) -> Result<CesaroMean> {
    if !(t.is_finite() && t > 0.0) || t > series.t_max() * (1.0 + 1e-12) {
        return Err(Error::Coverage(format!(
            "t={t} outside the series range (0, {}]",
            series.t_max()
        )));
    }
    let t = t.min(series.t_max());
    let times = series.times();
    let head = times[0].min(t) * series.values()[0];
    let mut body = 0.0;
    for w in times.windows(2) {
        if w[0] >= t {
            break;
        }
        body += segment_integral(series, w[0], w[1].min(t));
    }
    Ok(finish(head, body, t))
}

fn finish(head: f64, body: f64, t: f64) -> CesaroMean {
    let denom = head.abs() + body.abs();
    let head_share = if denom > 0.0 { head.abs() / denom } else { 0.0 };
    CesaroMean {
        value: (head + body) / t,
        head_share,
        flagged: head_share > HEAD_FLAG,
    }
}

/// M_t at every series time, with the largest head share over t ≥ `from`.
pub fn cesaro_series(series: &TimeSeries, from: f64) -> Result<(TimeSeries, f64)> {
    let times = series.times();
    let head0 = times[0] * series.values()[0];
    let mut body = 0.0;
    let mut values = Vec::with_capacity(times.len());
    let mut worst = 0.0f64;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            body += segment_integral(series, times[i - 1], t);
        }
        let m = finish(head0, body, t);
        if t >= from {
            worst = worst.max(m.head_share);
        }
        values.push(m.value);
    }
    Ok((TimeSeries::new(times.to_vec(), values, SeriesTag::Cesaro)?, worst))
}

fn l1_norm(mass: &MassSummary) -> Result<f64> {
    if mass.l1_time.is_finite() {
        Ok(mass.l1_time)
    } else {
        Err(Error::Divergent("‖v(x)‖₁ is infinite at this probe".into()))
    }
}

/// ‖v(x)‖₁/Γ(ϱ+1) · t^{-1}K(1/t), the general form for ℓ = 0.
pub fn general_asymptote(spec: &KernelSpec, l1: f64, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    Ok(l1 / gamma_fn(spec.varrho() + 1.0) * spec.k_laplace(1.0 / t)? / t)
}

/// Predicted long-time value of M_t, per kernel class.
pub fn predicted_asymptote(spec: &KernelSpec, mass: &MassSummary, t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    match spec.class() {
        KernelClass::Stable { theta } => Ok(l1_norm(mass)? * t.powf(-theta) / gamma_fn(2.0 - theta)),
        KernelClass::DistributedOrder { c, kappa } => {
            if t <= 1.0 {
                return Err(Error::Domain(format!("the logarithmic row needs t > 1, got {t}")));
            }
            Ok(c * l1_norm(mass)? * t.ln().powf(-kappa))
        }
        KernelClass::InverseGamma { a, b } if *a > 0.0 => {
            let ell = (a * b).sqrt();
            if !((mass.ell - ell).abs() <= 1e-12 * ell && mass.l1_time_weighted.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "the inverse gamma row needs ‖v(x)‖_{{1,ℓ}} with ℓ={ell}, got ℓ={}",
                    mass.ell
                )));
            }
            Ok(2.0 * ell * mass.l1_time_weighted)
        }
        KernelClass::InverseGamma { .. } => general_asymptote(spec, l1_norm(mass)?, t),
        KernelClass::Gamma { a, b } => Ok(a / b * l1_norm(mass)? / t),
        KernelClass::TemperedStable { theta, beta } => Ok(theta * beta.powf(theta - 1.0) * l1_norm(mass)? / t),
        KernelClass::DistributedMu { mu } => {
            let lt = t.ln();
            let moment = integrate_mu(mu, lt.abs(), |alpha| (-alpha * lt).exp());
            Ok(l1_norm(mass)? / gamma_fn(spec.varrho() + 1.0) * moment)
        }
    }
}

/// The closed-form row for a class, for reports.
pub fn class_row(spec: &KernelSpec) -> &'static str {
    match spec.class() {
        KernelClass::Stable { .. } => "‖v‖₁ t^{-θ}/Γ(2-θ)",
        KernelClass::DistributedOrder { .. } => "C‖v‖₁ (ln t)^{-κ}",
        KernelClass::InverseGamma { a, .. } if *a > 0.0 => "2√(ab) ‖v‖_{1,√(ab)}",
        KernelClass::InverseGamma { .. } => "‖v‖₁ 2√(2b) t^{-1/2}/Γ(3/2)",
        KernelClass::Gamma { .. } => "(a/b)‖v‖₁ t^{-1}",
        KernelClass::TemperedStable { .. } => "θβ^{θ-1}‖v‖₁ t^{-1}",
        KernelClass::DistributedMu { .. } => "‖v‖₁/Γ(ϱ+1) ∫ t^{-α}μ(α)dα",
    }
}

/// Comparison function t^{(ϱ-1)/2s} L(t)^{1/2s}/Γ(1+ϱ) for N = 1.
pub fn predicted_band_n1(spec: &KernelSpec, s: f64, t: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&s) {
        return Err(Error::Domain(format!("the one-dimensional band needs 1/2 <= s < 1, got {s}")));
    }
    if spec.ell() > 0.0 {
        return Err(Error::Domain("the one-dimensional band needs ℓ = 0".into()));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let rho = spec.varrho();
    let l = spec.svf(t)?;
    Ok(t.powf((rho - 1.0) / (2.0 * s)) * l.powf(1.0 / (2.0 * s)) / gamma_fn(1.0 + rho))
}

fn window_samples(series: &TimeSeries, window: [f64; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(window[0] > 0.0 && window[1] > window[0] && window[1].is_finite()) {
        return Err(Error::Fit(format!("degenerate window {window:?}")));
    }
    let (lo, hi) = (window[0] * (1.0 - 1e-12), window[1] * (1.0 + 1e-12));
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (&t, &v) in series.times().iter().zip(series.values()) {
        if t >= lo && t <= hi {
            if !(v > 0.0) {
                return Err(Error::Fit(format!("nonpositive value {v} at t={t}")));
            }
            ts.push(t);
            vs.push(v);
        }
    }
    if ts.len() < 8 {
        return Err(Error::Fit(format!("{} samples in window {window:?}; need 8", ts.len())));
    }
    Ok((ts, vs))
}

/// Least squares on ln M against ln t, and ln ln t for the logarithmic model.
pub fn fit_decay(series: &TimeSeries, window: [f64; 2], model: FitModel) -> Result<AsymptoticFit> {
    let (ts, vs) = window_samples(series, window)?;
    let x: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let (exponent, kappa, intercept) = match model {
        FitModel::PurePower => {
            let (p, c) = linear_fit(&x, &y);
            (p, 0.0, c)
        }
        FitModel::PowerWithLog => {
            if ts[0] <= 1.0 {
                return Err(Error::Fit("the logarithmic model needs t > 1".into()));
            }
            let z: Vec<f64> = x.iter().map(|x| x.ln()).collect();
            let (p, k, c) = two_regressor_fit(&x, &z, &y)?;
            (p, -k, c)
        }
    };
    let prefactor = intercept.exp();
    let fit = AsymptoticFit {
        exponent,
        log_correction_kappa: kappa,
        prefactor,
        window: [ts[0], ts[ts.len() - 1]],
        max_residual: 0.0,
    };
    let max_residual = ts
        .iter()
        .zip(&vs)
        .map(|(&t, &v)| (v / fit.eval(t) - 1.0).abs())
        .fold(0.0, f64::max);
    if !(exponent.is_finite() && prefactor.is_finite() && max_residual.is_finite()) {
        return Err(Error::Fit("non-finite fit".into()));
    }
    Ok(AsymptoticFit { max_residual, ..fit })
}

/// y ≈ a·x + b·z + c by centred normal equations.
fn two_regressor_fit(x: &[f64], z: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, mz, my) = (mean(x), mean(z), mean(y));
    let (mut sxx, mut szz, mut sxz, mut sxy, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let (dx, dz, dy) = (x[i] - mx, z[i] - mz, y[i] - my);
        sxx += dx * dx;
        szz += dz * dz;
        sxz += dx * dz;
        sxy += dx * dy;
        szy += dz * dy;
    }
    let det = sxx * szz - sxz * sxz;
    if !(det > 1e-14 * sxx * szz) {
        return Err(Error::Fit("collinear regressors".into()));
    }
    let a = (sxy * szz - szy * sxz) / det;
    let b = (szy * sxx - sxy * sxz) / det;
    Ok((a, b, my - a * mx - b * mz))
}

/// Prefactor with the exponent and log correction held fixed: the
/// geometric mean of M_t t^{-p} (ln t)^{κ} over the window.
pub fn fit_prefactor(series: &TimeSeries, window: [f64; 2], exponent: f64, kappa: f64) -> Result<f64> {
    let (ts, vs) = window_samples(series, window)?;
    let mean = ts
        .iter()
        .zip(&vs)
        .map(|(&t, &v)| v.ln() - exponent * t.ln() + kappa * t.ln().ln())
        .sum::<f64>()
        / ts.len() as f64;
    Ok(mean.exp())
}

/// ∫_0^t k(t − s)(g(s) − g(0)) ds for piecewise-linear g through `nodes`
/// (starting at s = 0), with k(u) = u^{-θ}/Γ(1−θ) integrated exactly on
/// each segment.
fn caputo_integral(nodes: &[(f64, f64)], theta: f64, t: f64) -> f64 {
    let g0 = nodes[0].1;
    let (e1, e2) = (1.0 - theta, 2.0 - theta);
    let mut acc = 0.0;
    for w in nodes.windows(2) {
        let (s0, v0) = w[0];
        let (s1, v1) = w[1];
        if s0 >= t {
            break;
        }
        let d = (v1 - v0) / (s1 - s0);
        let s1 = s1.min(t);
        let _ = v1;
        let c = v0 - g0;
        let (u0, u1) = (t - s0, t - s1);
        acc += (c + d * u0) * (u0.powf(e1) - u1.powf(e1)) / e1 - d * (u0.powf(e2) - u1.powf(e2)) / e2;
    }
    acc / gamma_fn(1.0 - theta)
}

fn caputo_derivative(nodes: &[(f64, f64)], theta: f64, t: f64) -> f64 {
    let i = nodes.partition_point(|n| n.0 <= t).clamp(1, nodes.len() - 1);
    let spacing = (nodes[i].0 - nodes[i - 1].0).min(t);
    let h = 1e-2 * spacing;
    (caputo_integral(nodes, theta, t + h) - caputo_integral(nodes, theta, t - h)) / (2.0 * h)
}

/// D^{(k)} g(t) = d/dt ∫_0^t k(t−s)(g(s) − g(0)) ds for the stable kernel,
/// by product integration and a central difference. Refinement is judged
/// against the same computation on every other node.
pub fn dk_apply(g0: f64, g: &TimeSeries, spec: &KernelSpec, t: f64) -> Result<f64> {
    let KernelClass::Stable { theta } = *spec.class() else {
        return Err(Error::Unsupported {
            class: spec.name(),
            what: "the Caputo operator",
        });
    };
    if !(t > 0.0 && t < g.t_max()) {
        return Err(Error::Coverage(format!("t={t} must lie inside (0, {})", g.t_max())));
    }
    let mut nodes = Vec::with_capacity(g.len() + 1);
    nodes.push((0.0, g0));
    nodes.extend(g.times().iter().copied().zip(g.values().iter().copied()));
    let fine = caputo_derivative(&nodes, theta, t);
    let coarse_nodes: Vec<(f64, f64)> = nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0 || *i == nodes.len() - 1)
        .map(|(_, n)| *n)
        .collect();
    let coarse = caputo_derivative(&coarse_nodes, theta, t);
    let scale = fine.abs().max(1e-12 * (g0.abs() + 1.0));
    if (fine - coarse).abs() > 0.01 * scale {
        return Err(Error::Resolution(format!(
            "Caputo derivative moved from {coarse:e} to {fine:e} under refinement"
        )));
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::log_grid;
    use statrs::function::erf::erfc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sampled<F: Fn(f64) -> f64>(lo: f64, hi: f64, per: usize, f: F) -> TimeSeries {
        TimeSeries::sample(lo, hi, per, SeriesTag::VAtProbe, |t| Ok(f(t))).unwrap()
    }

    fn mass(l1: f64) -> MassSummary {
        MassSummary::from_norms(1.0, l1, l1, 0.0)
    }

    #[test]
    fn constants_are_preserved() {
        let one = sampled(1e-8, 1e4, 4, |_| 1.0);
        let v = subordinate(&one, &KernelSpec::stable(0.4).unwrap(), 5.0).unwrap();
        assert!((v - 1.0).abs() < 1e-5, "{v}");
        let v = subordinate(&one, &KernelSpec::gamma(1.0, 1.0).unwrap(), 5.0).unwrap();
        assert!((v - 1.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn mittag_leffler_oracle() {
        let e = sampled(1e-10, 1e3, 40, |t| (-t).exp());
        let v = subordinate(&e, &KernelSpec::stable(0.5).unwrap(), 1.0).unwrap();
        let oracle = 1f64.exp() * erfc(1.0);
        assert!((v - 0.427_584).abs() < 1e-6 && (v / oracle - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn ordering_and_coverage() {
        let spec = KernelSpec::tempered_stable(0.5, 1.0).unwrap();
        let a = sampled(1e-8, 1e5, 10, |t| (-t).exp());
        let b = sampled(1e-8, 1e5, 10, |t| (-0.5 * t).exp());
        assert!(subordinate(&a, &spec, 3.0).unwrap() <= subordinate(&b, &spec, 3.0).unwrap());
        let short = sampled(1e-8, 1.0, 10, |_| 1.0);
        assert!(matches!(subordinate(&short, &spec, 100.0), Err(Error::Coverage(_))));
        let neg = sampled(1e-8, 1e3, 4, |t| t - 1.0);
        assert!(subordinate(&neg, &spec, 1.0).is_err());
    }

    #[test]
    fn cesaro_examples() {
        let one = sampled(1e-3, 10.0, 10, |_| 1.0);
        assert!((cesaro_mean(&one, 7.0).unwrap().value - 1.0).abs() < 1e-12);
        let lin = sampled(1e-3, 10.0, 10, |t| t);
        assert!((cesaro_mean(&lin, 10.0).unwrap().value - 5.0).abs() < 1e-6);
        let e = sampled(1e-4, 10.0, 40, |t| (-t).exp());
        let m = cesaro_mean(&e, 2.0).unwrap();
        assert!((m.value - (1.0 - (-2f64).exp()) / 2.0).abs() < 1e-6, "{}", m.value);
        assert!((m.value - 0.432_332).abs() < 1e-6);
        assert!(!m.flagged);
        assert!(cesaro_mean(&e, 11.0).is_err());
        let (series, head) = cesaro_series(&e, 1.0).unwrap();
        assert!((series.interpolate(2.0) - m.value).abs() < 1e-6);
        assert!(head < 1e-3);
    }

    #[test]
    fn predicted_rows() {
        let v = predicted_asymptote(&KernelSpec::stable(0.5).unwrap(), &mass(1.0), 100.0).unwrap();
        assert!((v - 0.112_838).abs() < 1e-6);
        let v = predicted_asymptote(&KernelSpec::tempered_stable(0.5, 1.0).unwrap(), &mass(2.0), 10.0).unwrap();
        assert!((v - 0.1).abs() < 1e-15);
        let ig = KernelSpec::inverse_gamma(1.0, 1.0).unwrap();
        let m = MassSummary::from_norms(1.0, f64::INFINITY, 0.3, 1.0);
        for t in [1.0, 1e3, 1e6] {
            assert!((predicted_asymptote(&ig, &m, t).unwrap() - 0.6).abs() < 1e-15);
        }
        assert!(predicted_asymptote(&ig, &mass(1.0), 10.0).is_err());
        // Rows agree with the general form where it is exact.
        for spec in [KernelSpec::stable(0.3).unwrap(), KernelSpec::distributed_mu(vec![[0.2, 1.0], [0.7, 2.0]]).unwrap()] {
            let a = predicted_asymptote(&spec, &mass(1.3), 50.0).unwrap();
            let b = general_asymptote(&spec, 1.3, 50.0).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        let g = KernelSpec::gamma(2.0, 3.0).unwrap();
        let a = predicted_asymptote(&g, &mass(1.0), 1e8).unwrap();
        assert!((a / general_asymptote(&g, 1.0, 1e8).unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn band_examples() {
        let theta = 0.4;
        let st = KernelSpec::stable(theta).unwrap();
        let r = predicted_band_n1(&st, 0.75, 1e4).unwrap() / predicted_band_n1(&st, 0.75, 10.0).unwrap();
        assert!((r / 1e3f64.powf(-2.0 * theta / 3.0) - 1.0).abs() < 1e-12);
        let g = KernelSpec::gamma(2.0, 4.0).unwrap();
        let v = predicted_band_n1(&g, 0.5, 1e6).unwrap();
        assert!((v * 1e6 / 0.5 - 1.0).abs() < 1e-6);
        assert!(predicted_band_n1(&st, 0.4, 1.0).is_err());
        assert!(predicted_band_n1(&st, 1.0, 1.0).is_err());
    }

    #[test]
    fn fit_examples() {
        let p = sampled(1.0, 1e5, 10, |t| 3.0 * t.powf(-0.5));
        let f = fit_decay(&p, [1e2, 1e5], FitModel::PurePower).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-10 && (f.prefactor / 3.0 - 1.0).abs() < 1e-10);
        assert!(f.max_residual < 1e-10);
        let l = sampled(10.0, 1e7, 10, |t| 2.0 * t.ln().powi(-2));
        let f = fit_decay(&l, [1e3, 1e6], FitModel::PowerWithLog).unwrap();
        assert!((f.log_correction_kappa - 2.0).abs() < 0.05 && f.exponent.abs() < 1e-6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noisy = sampled(1.0, 1e5, 10, |t| t.powf(-0.7))
            .map(|_, v| v * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)), SeriesTag::Scaled)
            .unwrap();
        let f = fit_decay(&noisy, [1e2, 1e5], FitModel::PurePower).unwrap();
        assert!((f.exponent + 0.7).abs() < 0.02);
        assert!(fit_decay(&p, [1e2, 2e2], FitModel::PurePower).is_err());
        assert!(fit_decay(&p, [1e2, 1e2], FitModel::PurePower).is_err());
        let pre = fit_prefactor(&p, [1e2, 1e5], -0.5, 0.0).unwrap();
        assert!((pre - 3.0).abs() < 1e-10);
    }

    #[test]
    fn caputo_examples() {
        let spec = KernelSpec::stable(0.5).unwrap();
        let lin = TimeSeries::new(log_grid(1e-6, 10.0, 20).unwrap(), log_grid(1e-6, 10.0, 20).unwrap(), SeriesTag::Scaled).unwrap();
        let d = dk_apply(0.0, &lin, &spec, 1.0).unwrap();
        assert!((d - 1.128_379).abs() < 1e-6, "{d}");
        let c = sampled(1e-6, 10.0, 10, |_| 2.0);
        assert_eq!(dk_apply(2.0, &c, &spec, 1.0).unwrap(), 0.0);
        let gam = KernelSpec::gamma(1.0, 1.0).unwrap();
        assert!(matches!(dk_apply(0.0, &lin, &gam, 1.0), Err(Error::Unsupported { .. })));
        // s² against 2 s^{2-θ}/Γ(3-θ).
        let sq = sampled(1e-6, 10.0, 40, |t| t * t);
        let d = dk_apply(0.0, &sq, &spec, 2.0).unwrap();
        let exact = 2.0 * 2f64.powf(1.5) / gamma_fn(2.5);
        assert!((d / exact - 1.0).abs() < 1e-3, "{d} {exact}");
    }

    #[test]
    fn two_routes_to_the_cesaro_mean() {
        let v = sampled(1e-10, 1e8, 20, |t| (1.0 + t).powf(-4.0 / 3.0));
        for spec in [KernelSpec::stable(0.5).unwrap(), KernelSpec::stable(0.8).unwrap()] {
            let t = 5.0;
            let times = log_grid(1e-7, t, 16).unwrap();
            let ve = subordinated_series(&v, &spec, &times, &GCache::new()).unwrap();
            let a = cesaro_mean(&ve, t).unwrap();
            let b = cesaro_by_kernel(&v, &spec, t).unwrap();
            assert!((a.value / b - 1.0).abs() < 1e-3, "{} {} {b}", spec.name(), a.value);
        }
    }

    #[test]
    fn cache_shares_tables() {
        let cache = GCache::new();
        let spec = KernelSpec::stable(0.5).unwrap();
        let a = cache.get(&spec, 2.0).unwrap();
        let b = cache.get(&spec, 2.0).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let _ = cache.get(&spec, 3.0).unwrap();
        assert_eq!(cache.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn cesaro_is_linear(a in 0.0f64..3.0, b in 0.0f64..3.0, t in 0.01f64..9.0) {
            let f = sampled(1e-3, 10.0, 10, |s| (-s).exp());
            let g = sampled(1e-3, 10.0, 10, |s| 1.0 / (1.0 + s * s));
            let h = TimeSeries::new(
                f.times().to_vec(),
                f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect(),
                SeriesTag::Scaled,
            ).unwrap();
            let lhs = cesaro_mean(&h, t).unwrap().value;
            let rhs = a * cesaro_mean(&f, t).unwrap().value + b * cesaro_mean(&g, t).unwrap().value;
            // The log-log interpolant is not linear, so only to interpolation accuracy.
            prop_assert!((lhs - rhs).abs() < 1e-4 * (a.abs() + b.abs() + 1e-12));
        }
    }
}
