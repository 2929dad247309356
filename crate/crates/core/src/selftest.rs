//! Quick invariant suites per module, reported as pass/fail records.

use crate::asymptotics::{incomplete_gamma_f, karamata_pair_check, kernel_svf_check, MonotoneFn, LAMBDA_PROBES, TIME_PROBES};
use crate::error::{Error, Result};
use crate::heat::{closed_form_profile, profile, HeatParams};
use crate::kernels::KernelSpec;
use crate::laplace::{invert, GDensity, Method, TransformFn, Weight};
use crate::montecarlo::laplace_exponent_check;
use crate::series::{log_grid, SeriesTag, TimeSeries};
use crate::special::{erfc, gamma_fn};
use crate::subordination::{cesaro_mean, dk_apply, subordinate};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kernels,
    Laplace,
    Heat,
    Subordination,
    Montecarlo,
    Asymptotics,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["kernels", "laplace", "heat", "subordination", "montecarlo", "asymptotics", "all"];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "kernels" => Suite::Kernels,
            "laplace" => Suite::Laplace,
            "heat" => Suite::Heat,
            "subordination" => Suite::Subordination,
            "montecarlo" => Suite::Montecarlo,
            "asymptotics" => Suite::Asymptotics,
            "all" => Suite::All,
            _ => return Err(Error::Parse(format!("unknown suite {s:?}; expected one of {:?}", Self::NAMES))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SelftestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    /// Records `f`; an error counts as a failure with its message.
    fn check<F: FnOnce() -> Result<(bool, String)>>(&mut self, name: &str, f: F) {
        let (pass, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
        self.checks.push(Check {
            suite: self.suite.to_string(),
            name: name.to_string(),
            pass,
            detail,
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn kernels(r: &mut Recorder) {
    r.check("stable_symbol", || {
        let v = KernelSpec::stable(0.5)?.k_laplace(4.0)?;
        Ok((rel(v, 0.5) < 1e-12, format!("K(4) = {v}")))
    });
    r.check("inverse_gamma_degenerate_identity", || {
        let b = 3.0;
        let ig = KernelSpec::inverse_gamma(0.0, b)?;
        let st = KernelSpec::stable(0.5)?;
        let worst = [1e-3, 0.5, 7.0]
            .iter()
            .map(|&l| Ok(rel(ig.k_laplace(l)?, 2.0 * (2.0 * b).sqrt() * st.k_laplace(l)?)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok((worst < 1e-12, format!("max relative gap {worst:e}")))
    });
    r.check("admissibility", || {
        let specs = [
            KernelSpec::stable(0.3)?,
            KernelSpec::gamma(1.0, 2.0)?,
            KernelSpec::tempered_stable(0.5, 1.0)?,
            KernelSpec::inverse_gamma(1.0, 1.0)?,
        ];
        let bad: Vec<&str> = specs.iter().filter(|s| !s.admissibility_report().pass).map(|s| s.name()).collect();
        Ok((bad.is_empty(), format!("failing: {bad:?}")))
    });
}

fn laplace(r: &mut Recorder) {
    r.check("tabulated_pairs", || {
        let pairs: Vec<(TransformFn<'_>, Box<dyn Fn(f64) -> f64>)> = vec![
            (TransformFn::complex(|z: Complex64| 1.0 / (z + 1.0)), Box::new(|t: f64| (-t).exp())),
            (TransformFn::complex(|z: Complex64| 1.0 / (z * z)), Box::new(|t: f64| t)),
            (TransformFn::complex(|z: Complex64| 1.0 / z.sqrt()), Box::new(|t: f64| 1.0 / (PI * t).sqrt())),
        ];
        let mut worst = 0.0f64;
        for (f, exact) in &pairs {
            for t in [0.1, 1.0, 10.0] {
                worst = worst.max(rel(invert(f, t, Method::Talbot)?.value, exact(t)));
            }
        }
        Ok((worst < 1e-5, format!("max relative error {worst:e}")))
    });
    r.check("talbot_vs_stehfest", || {
        let f = TransformFn::complex(|z: Complex64| 1.0 / (z * (z + 1.0)));
        let a = invert(&f, 2.0, Method::Talbot)?.value;
        let b = invert(&f, 2.0, Method::GaverStehfest)?.value;
        Ok((rel(a, b) < 1e-3, format!("{a} vs {b}")))
    });
    r.check("half_stable_density", || {
        let g = GDensity::new(&KernelSpec::stable(0.5)?, 1.0)?;
        let mut worst = 0.0f64;
        for tau in [0.1, 1.0, 3.0, 6.0] {
            worst = worst.max(rel(g.density(tau)?, (-tau * tau / 4.0).exp() / PI.sqrt()));
        }
        Ok((worst < 1e-6, format!("max relative error {worst:e}")))
    });
    r.check("normalization", || {
        let mut worst = 0.0f64;
        for spec in [KernelSpec::stable(0.7)?, KernelSpec::gamma(1.0, 1.0)?, KernelSpec::inverse_gamma(1.0, 1.0)?] {
            let m = GDensity::new(&spec, 1.0)?.integrate_against(|_| 1.0, Weight::Density, 1e-9)?.value;
            worst = worst.max((m - 1.0).abs());
        }
        Ok((worst < 1e-6, format!("max |mass - 1| {worst:e}")))
    });
}

fn heat(r: &mut Recorder) {
    r.check("gauss_profile", || {
        let p = HeatParams::new(1.0, 1)?;
        let v = profile(&p, 1.0)?.value;
        let exact = closed_form_profile(1.0, 1, 1.0).ok_or(Error::Domain("no closed form".into()))?;
        Ok(((v - exact).abs() < 1e-12, format!("{v} vs {exact}")))
    });
    r.check("fft_profile_half", || {
        let p = HeatParams::new(0.5, 1)?.with_box(64.0, 4096)?;
        let grid = crate::heat::ProfileGrid::new(&p)?;
        let r0 = 1.0;
        let v = grid.interpolate_axis(r0);
        let exact = 1.0 / (PI * (1.0 + r0 * r0));
        Ok(((v - exact).abs() < 1e-4, format!("{v} vs {exact}")))
    });
}

fn subordination(r: &mut Recorder) {
    r.check("constants_preserved", || {
        let one = TimeSeries::sample(1e-8, 1e4, 4, SeriesTag::VAtProbe, |_| Ok(1.0))?;
        let v = subordinate(&one, &KernelSpec::stable(0.4)?, 5.0)?;
        Ok(((v - 1.0).abs() < 1e-5, format!("{v}")))
    });
    r.check("mittag_leffler", || {
        let e = TimeSeries::sample(1e-10, 1e3, 40, SeriesTag::VAtProbe, |t| Ok((-t).exp()))?;
        let v = subordinate(&e, &KernelSpec::stable(0.5)?, 1.0)?;
        let exact = 1f64.exp() * erfc(1.0);
        Ok((rel(v, exact) < 1e-5, format!("{v} vs {exact}")))
    });
    r.check("cesaro_closed_form", || {
        let e = TimeSeries::sample(1e-4, 10.0, 40, SeriesTag::VAtProbe, |t| Ok((-t).exp()))?;
        let m = cesaro_mean(&e, 2.0)?.value;
        let exact = (1.0 - (-2f64).exp()) / 2.0;
        Ok(((m - exact).abs() < 1e-6, format!("{m} vs {exact}")))
    });
    r.check("caputo_monomial", || {
        let g = log_grid(1e-6, 10.0, 20)?;
        let lin = TimeSeries::new(g.clone(), g, SeriesTag::Scaled)?;
        let d = dk_apply(0.0, &lin, &KernelSpec::stable(0.5)?, 1.0)?;
        let exact = 1.0 / gamma_fn(1.5);
        Ok((rel(d, exact) < 1e-6, format!("{d} vs {exact}")))
    });
}

fn montecarlo(r: &mut Recorder) {
    for (name, spec) in [
        ("laplace_stable", KernelSpec::stable(0.5)),
        ("laplace_gamma", KernelSpec::gamma(1.0, 1.0)),
        ("laplace_tempered", KernelSpec::tempered_stable(0.5, 1.0)),
    ] {
        r.check(name, || {
            let e = laplace_exponent_check(&spec?, 1.0, 1.0, 20_000, 1)?;
            Ok((e.covered == Some(true), format!("{} ± {} vs {:?}", e.estimate, e.std_error, e.target)))
        });
    }
}

fn asymptotics(r: &mut Recorder) {
    r.check("karamata_power", || {
        let rho = 0.7;
        let u = move |t: f64| t.powf(rho) / gamma_fn(1.0 + rho);
        let one = |_: f64| 1.0;
        let rep = karamata_pair_check(&MonotoneFn { u: &u, rho, svf: &one }, &LAMBDA_PROBES, &TIME_PROBES)?;
        let a = rep.transform_ratios[rep.transform_ratios.len() - 1].1;
        let b = rep.time_ratios[rep.time_ratios.len() - 1].1;
        Ok(((a - 1.0).abs() < 1e-2 && (b - 1.0).abs() < 1e-2, format!("{a}, {b}")))
    });
    r.check("incomplete_gamma", || {
        let v = incomplete_gamma_f(0.5, 1e-4)?;
        Ok(((v.ratio - 1.0).abs() < 0.02, format!("ratio {}", v.ratio)))
    });
    r.check("kernel_svf", || {
        let spec = KernelSpec::gamma(2.0, 1.0)?;
        let t = kernel_svf_check(&spec)?;
        Ok((t.pass, format!("{:?}", t.column_pass)))
    });
}

pub fn run_selftests(suite: Suite) -> SelftestReport {
    let all: [(Suite, &'static str, fn(&mut Recorder)); 6] = [
        (Suite::Kernels, "kernels", kernels),
        (Suite::Laplace, "laplace", laplace),
        (Suite::Heat, "heat", heat),
        (Suite::Subordination, "subordination", subordination),
        (Suite::Montecarlo, "montecarlo", montecarlo),
        (Suite::Asymptotics, "asymptotics", asymptotics),
    ];
    let mut checks = Vec::new();
    for (s, name, f) in all {
        if suite == Suite::All || suite == s {
            let mut r = Recorder { suite: name, checks: Vec::new() };
            f(&mut r);
            checks.extend(r.checks);
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    SelftestReport { checks, pass }
}
