//! Numerical checks of the Tauberian correspondence, slowly varying ratios
//! and the incomplete-gamma asymptotic used for N = 1.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::laplace::forward_laplace;
use crate::quadrature::{adaptive_breakpoints, geometric_breakpoints, Tolerance};
use crate::series::{linear_fit, TimeSeries};
use crate::special::gamma_fn;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const LAMBDA_PROBES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const TIME_PROBES: [f64; 4] = [1e1, 1e2, 1e3, 1e4];

/// A nondecreasing U with its declared index and slowly varying part.
pub struct MonotoneFn<'a> {
    pub u: &'a (dyn Fn(f64) -> f64 + Sync),
    pub rho: f64,
    pub svf: &'a (dyn Fn(f64) -> f64 + Sync),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaramataReport {
    pub rho: f64,
    /// (λ, L(U)(λ)·λ^{1+ρ}/L(1/λ)).
    pub transform_ratios: Vec<(f64, f64)>,
    /// (t, U(t)·Γ(1+ρ)/(t^ρ L(t))).
    pub time_ratios: Vec<(f64, f64)>,
    /// Relative gap between the two ratios at the extreme probes.
    pub gap: f64,
    pub monotone: bool,
}

impl KaramataReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Both sides of U(t) ~ C t^ρ L(t)/Γ(1+ρ) ⇔ L(U)(λ) ~ C λ^{−1−ρ} L(1/λ).
pub fn karamata_pair_check(f: &MonotoneFn<'_>, lambdas: &[f64], times: &[f64]) -> Result<KaramataReport> {
    if lambdas.is_empty() || times.is_empty() {
        return Err(Error::InvalidParameter("empty probe grid".into()));
    }
    let grid: Vec<f64> = (0..=80).map(|k| 10f64.powf(-4.0 + 0.125 * k as f64)).collect();
    let monotone = grid.windows(2).all(|w| (f.u)(w[1]) >= (f.u)(w[0]) * (1.0 - 1e-12));
    let transformable = forward_laplace(|t| (f.u)(t), 1.0, -f.rho)?;
    if !transformable.value.is_finite() {
        return Err(Error::Divergent("L(U)(1) is not finite".into()));
    }
    let transform_ratios = lambdas
        .iter()
        .map(|&lam| {
            let w = forward_laplace(|t| (f.u)(t), lam, -f.rho)?.value;
            if !w.is_finite() {
                return Err(Error::Divergent(format!("L(U)({lam}) is not finite")));
            }
            Ok((lam, w * lam.powf(1.0 + f.rho) / (f.svf)(1.0 / lam)))
        })
        .collect::<Result<Vec<_>>>()?;
    let time_ratios: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| (t, (f.u)(t) * gamma_fn(1.0 + f.rho) / (t.powf(f.rho) * (f.svf)(t))))
        .collect();
    let a = transform_ratios[transform_ratios.len() - 1].1;
    let b = time_ratios[time_ratios.len() - 1].1;
    Ok(KaramataReport {
        rho: f.rho,
        transform_ratios,
        time_ratios,
        gap: (a / b - 1.0).abs(),
        monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgfValue {
    pub theta: f64,
    pub eps: f64,
    pub value: f64,
    /// ε^{θ−1}Γ(1−θ).
    pub predicted: f64,
    pub ratio: f64,
}

/// F(ε) = ∫_1^∞ τ^{−θ}e^{−ετ}dτ, truncated where e^{−ετ} < e^{−50}.
pub fn incomplete_gamma_f(theta: f64, eps: f64) -> Result<IgfValue> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let hi = 1.0 + 50.0 / eps;
    let pts: Vec<f64> = geometric_breakpoints(0.0, hi - 1.0, 40).into_iter().map(|x| 1.0 + x).collect();
    let r = adaptive_breakpoints(
        |tau| tau.powf(-theta) * (-eps * tau).exp(),
        &pts,
        Tolerance::new(1e-300, 1e-11),
    )?;
    let predicted = eps.powf(theta - 1.0) * gamma_fn(1.0 - theta);
    Ok(IgfValue {
        theta,
        eps,
        value: r.value,
        predicted,
        ratio: r.value / predicted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvfTable {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    /// deviations[i][j] = L(c_j x_i)/L(x_i) − 1.
    pub deviations: Vec<Vec<f64>>,
    pub column_pass: Vec<bool>,
    pub pass: bool,
}

impl SvfTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x");
        for c in &self.c {
            let _ = write!(s, ",c={c}");
        }
        s.push('\n');
        for (x, row) in self.x.iter().zip(&self.deviations) {
            let _ = write!(s, "{x:e}");
            for d in row {
                let _ = write!(s, ",{d:e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Deviations below this count as zero.
const SVF_FLOOR: f64 = 1e-10;
pub const SVF_ONSET: f64 = 1e4;

/// L(cx)/L(x) − 1 on a grid; a column passes when, beyond x = 10⁴, its
/// magnitude is nonincreasing and falls by at least 1% or to zero.
pub fn svf_ratio_test<L: FnMut(f64) -> f64>(mut l: L, x_grid: &[f64], c_set: &[f64]) -> Result<SvfTable> {
    let mut deviations = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let lx = l(x);
        if !(lx > 0.0 && lx.is_finite()) {
            return Err(Error::Domain(format!("L must be positive, got L({x}) = {lx}")));
        }
        let row = c_set
            .iter()
            .map(|&c| {
                let lc = l(c * x);
                if !(lc > 0.0 && lc.is_finite()) {
                    return Err(Error::Domain(format!("L must be positive, got L({}) = {lc}", c * x)));
                }
                Ok(lc / lx - 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        deviations.push(row);
    }
    let column_pass: Vec<bool> = (0..c_set.len())
        .map(|j| {
            let col: Vec<f64> = x_grid
                .iter()
                .zip(&deviations)
                .filter(|(&x, _)| x >= SVF_ONSET)
                .map(|(_, r)| r[j].abs().max(SVF_FLOOR))
                .collect();
            if col.len() < 2 {
                return false;
            }
            let monotone = col.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
            let last = col[col.len() - 1];
            monotone && (last <= SVF_FLOOR || last <= 0.99 * col[0])
        })
        .collect();
    let pass = column_pass.iter().all(|&p| p);
    Ok(SvfTable {
        x: x_grid.to_vec(),
        c: c_set.to_vec(),
        deviations,
        column_pass,
        pass,
    })
}

/// Default grid: x = 10^4 .. 10^16 by decades, c ∈ {2, 10}.
pub fn kernel_svf_check(spec: &KernelSpec) -> Result<SvfTable> {
    let xs: Vec<f64> = (4..=16).map(|k| 10f64.powi(k)).collect();
    let mut err = None;
    let table = svf_ratio_test(
        |x| match spec.svf(x) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        &xs,
        &[2.0, 10.0],
    );
    match err {
        Some(e) => Err(e),
        None => table,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassRecovery {
    pub lambda: f64,
    /// λ w(λ)/K(λ) with w the transform of U(t) = t M_t.
    pub ratio: f64,
    pub l1: f64,
    pub relative_error: f64,
}

/// λ L(U)(λ)/K(λ) for U(t) = t·M_t from a Cesàro series, to compare with
/// ‖v(x)‖₁. Below the series U is linear; beyond it a power law fitted on
/// the last decade continues it.
pub fn mass_from_cesaro(cesaro: &TimeSeries, spec: &KernelSpec, l1: f64, lambda: f64) -> Result<MassRecovery> {
    let (t0, t1) = (cesaro.t_min(), cesaro.t_max());
    let tail: Vec<usize> = (0..cesaro.len()).filter(|&i| cesaro.times()[i] >= t1 / 10.0).collect();
    if tail.len() < 3 {
        return Err(Error::Fit("the Cesàro series needs a final decade to extend".into()));
    }
    let xs: Vec<f64> = tail.iter().map(|&i| cesaro.times()[i].ln()).collect();
    let ys: Vec<f64> = tail
        .iter()
        .map(|&i| (cesaro.times()[i] * cesaro.values()[i]).max(f64::MIN_POSITIVE).ln())
        .collect();
    let (p, c) = linear_fit(&xs, &ys);
    let u = |t: f64| {
        if t <= t0 {
            t * cesaro.values()[0]
        } else if t <= t1 {
            t * cesaro.interpolate(t)
        } else {
            (c + p * t.ln()).exp()
        }
    };
    let w = forward_laplace(u, lambda, -p)?.value;
    let ratio = lambda * w / spec.k_laplace(lambda)?;
    Ok(MassRecovery {
        lambda,
        ratio,
        l1,
        relative_error: (ratio / l1 - 1.0).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SeriesTag;
    use crate::special::gamma_ur;
    use proptest::prelude::*;

    #[test]
    fn power_pair() {
        let rho = 0.7;
        let u = move |t: f64| t.powf(rho) / gamma_fn(1.0 + rho);
        let one = |_: f64| 1.0;
        let r = karamata_pair_check(&MonotoneFn { u: &u, rho, svf: &one }, &LAMBDA_PROBES, &TIME_PROBES).unwrap();
        assert!(r.monotone);
        for (_, v) in r.transform_ratios.iter().chain(&r.time_ratios) {
            assert!((v - 1.0).abs() < 1e-2, "{v}");
        }
        assert!(r.gap < 1e-2);
    }

    #[test]
    fn constant_transform_is_reciprocal() {
        let u = |_: f64| 1.0;
        let one = |_: f64| 1.0;
        let r = karamata_pair_check(&MonotoneFn { u: &u, rho: 0.0, svf: &one }, &LAMBDA_PROBES, &TIME_PROBES).unwrap();
        for (_, v) in &r.transform_ratios {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn logarithmic_pair() {
        let u = |t: f64| t * t.ln_1p();
        let l = |t: f64| t.ln().max(1e-300);
        let r = karamata_pair_check(&MonotoneFn { u: &u, rho: 1.0, svf: &l }, &LAMBDA_PROBES, &TIME_PROBES).unwrap();
        let last = r.transform_ratios[3].1;
        // λ²L(U)(λ) = ln(1/λ) + 1 − γ + o(1).
        let oracle = 1.0 + (1.0 - 0.577_215_664_901_532_9) / 1e4f64.ln();
        assert!((last / oracle - 1.0).abs() < 1e-3, "{last}");
        assert!((last - 1.0).abs() < 0.05);
        assert!(r.transform_ratios.windows(2).all(|w| (w[1].1 - 1.0).abs() < (w[0].1 - 1.0).abs()));
    }

    #[test]
    fn igf_values() {
        let v = incomplete_gamma_f(0.5, 1e-4).unwrap();
        assert!((v.predicted - 177.245_385).abs() < 1e-5);
        assert!((v.ratio - 1.0).abs() < 0.02);
        let oracle = 1e-4f64.powf(-0.5) * gamma_ur(0.5, 1e-4) * gamma_fn(0.5);
        assert!((v.value / oracle - 1.0).abs() < 1e-8, "{} {oracle}", v.value);
        let v = incomplete_gamma_f(0.5, 1.0).unwrap();
        assert!((v.value - 0.278_806).abs() < 1e-6, "{}", v.value);
        for eps in [5.0, 20.0, 100.0] {
            let v = incomplete_gamma_f(0.3, eps).unwrap();
            assert!(v.value <= (-eps).exp() / eps);
        }
        assert!(incomplete_gamma_f(1.0, 1.0).is_err());
    }

    #[test]
    fn svf_tables() {
        let xs: Vec<f64> = (4..=16).map(|k| 10f64.powi(k)).collect();
        let t = svf_ratio_test(|_| 3.0, &xs, &[2.0, 10.0]).unwrap();
        assert!(t.pass && t.deviations.iter().flatten().all(|&d| d == 0.0));
        let t = svf_ratio_test(|x: f64| x.ln().powi(-2), &xs, &[10.0]).unwrap();
        assert!(t.pass);
        let i8 = xs.iter().position(|&x| x == 1e8).unwrap();
        assert!((t.deviations[i8][0].abs() - 0.209_877).abs() < 1e-5);
        let t = svf_ratio_test(|x: f64| x.powf(0.1), &xs, &[10.0]).unwrap();
        assert!(!t.pass);
        assert!(svf_ratio_test(|x: f64| -x, &xs, &[2.0]).is_err());
    }

    #[test]
    fn every_class_is_slowly_varying() {
        for spec in [
            KernelSpec::stable(0.4).unwrap(),
            KernelSpec::distributed_order(1.0, 2.0).unwrap(),
            KernelSpec::inverse_gamma(1.0, 2.0).unwrap(),
            KernelSpec::inverse_gamma(0.0, 2.0).unwrap(),
            KernelSpec::gamma(2.0, 3.0).unwrap(),
            KernelSpec::tempered_stable(0.5, 1.0).unwrap(),
            KernelSpec::distributed_mu(vec![[0.2, 1.0], [0.8, 0.5]]).unwrap(),
        ] {
            let t = kernel_svf_check(&spec).unwrap();
            assert!(t.pass, "{} {:?}", spec.name(), t.deviations);
        }
    }

    #[test]
    fn mass_recovered_from_exact_cesaro() {
        // v^E = ‖v‖₁ t^{-θ}/Γ(1−θ) has M_t = ‖v‖₁ t^{-θ}/Γ(2−θ).
        let theta = 0.5;
        let spec = KernelSpec::stable(theta).unwrap();
        let m = TimeSeries::sample(1e-3, 1e6, 10, SeriesTag::Cesaro, |t| Ok(0.7 * t.powf(-theta) / gamma_fn(2.0 - theta))).unwrap();
        let r = mass_from_cesaro(&m, &spec, 0.7, 1e-4).unwrap();
        assert!(r.relative_error < 1e-3, "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn igf_exceeds_its_bounds(theta in 0.05f64..0.95, eps in 1e-3f64..10.0) {
            let v = incomplete_gamma_f(theta, eps).unwrap();
            // τ^{-θ} ≤ 1 on [1, ∞) and F ≤ ε^{θ−1}Γ(1−θ).
            prop_assert!(v.value <= (-eps).exp() / eps * (1.0 + 1e-9));
            prop_assert!(v.value <= v.predicted * (1.0 + 1e-9));
            prop_assert!(v.value > 0.0);
        }
    }
}
