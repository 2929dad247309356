//! Forward Laplace quadrature, Talbot and Gaver–Stehfest inversion, and the
//! inverse-subordinator density G_t(τ).

use crate::error::{Error, Result};
use crate::kernels::{KernelClass, KernelSpec};
use crate::quadrature::{adaptive, adaptive_breakpoints, geometric_breakpoints, QuadResult, Tolerance};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

pub const TALBOT_NODES: usize = 32;
pub const STEHFEST_ORDER: usize = 14;
/// Negative inversion output smaller than this is treated as noise.
pub const CLAMP_THRESHOLD: f64 = 1e-10;

type ComplexFn<'a> = Box<dyn Fn(Complex64) -> Complex64 + Send + Sync + 'a>;
type RealFn<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;

/// A Laplace-domain function, tagged by where it may be evaluated.
pub enum TransformFn<'a> {
    Complex(ComplexFn<'a>),
    RealAxis(RealFn<'a>),
}

impl<'a> TransformFn<'a> {
    pub fn complex<F: Fn(Complex64) -> Complex64 + Send + Sync + 'a>(f: F) -> Self {
        TransformFn::Complex(Box::new(f))
    }

    pub fn real<F: Fn(f64) -> f64 + Send + Sync + 'a>(f: F) -> Self {
        TransformFn::RealAxis(Box::new(f))
    }

    fn eval_real(&self, x: f64) -> f64 {
        match self {
            TransformFn::Complex(f) => f(Complex64::new(x, 0.0)).re,
            TransformFn::RealAxis(f) => f(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Talbot,
    GaverStehfest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    /// Rounding-noise estimate of the quadrature sum.
    pub noise: f64,
    /// Gaver–Stehfest partial results failed to settle.
    pub oscillation: bool,
}

pub fn invert(f: &TransformFn<'_>, t: f64, method: Method) -> Result<Inversion> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    match (method, f) {
        (Method::Talbot, TransformFn::Complex(g)) => {
            let (value, noise) = talbot(|z| g(z), t, TALBOT_NODES);
            if !value.is_finite() {
                return Err(Error::NonFinite("Talbot sum".into()));
            }
            Ok(Inversion {
                value,
                noise,
                oscillation: false,
            })
        }
        (Method::Talbot, TransformFn::RealAxis(_)) => Err(Error::Domain(
            "Talbot inversion needs a transform evaluable off the real axis".into(),
        )),
        (Method::GaverStehfest, _) => {
            let f10 = stehfest(|x| f.eval_real(x), t, 10);
            let f12 = stehfest(|x| f.eval_real(x), t, 12);
            let f14 = stehfest(|x| f.eval_real(x), t, STEHFEST_ORDER);
            if !f14.is_finite() {
                return Err(Error::NonFinite("Gaver-Stehfest sum".into()));
            }
            let d1 = (f12 - f10).abs();
            let d2 = (f14 - f12).abs();
            let oscillation = d2 > d1 && d2 > 1e-3 * f14.abs().max(1e-300);
            Ok(Inversion {
                value: f14,
                noise: d2,
                oscillation,
            })
        }
    }
}

/// Fixed Talbot contour λ(θ) = ρθ(cot θ + i) with ρ = 2M/(5t).
pub fn talbot<F: Fn(Complex64) -> Complex64>(f: F, t: f64, m: usize) -> (f64, f64) {
    talbot_shifted(f, t, m, 0.0, 2.0 * m as f64 / (5.0 * t))
}

/// Talbot contour crossing the real axis at σ + ρ.
pub fn talbot_shifted<F: Fn(Complex64) -> Complex64>(f: F, t: f64, m: usize, sigma: f64, rho: f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut mag = 0.0;
    let x0 = sigma + rho;
    let c0 = 0.5 * (x0 * t).exp() * f(Complex64::new(x0, 0.0));
    sum += c0.re;
    mag += c0.norm();
    for k in 1..m {
        let (lam, dl) = talbot_node(k, m, sigma, rho);
        let term = (lam * t).exp() * f(lam) * dl;
        sum += term.re;
        mag += term.norm();
    }
    let scale = rho / m as f64;
    (scale * sum, scale * mag * f64::EPSILON)
}

/// Node λ_k and the factor (1 + iσ_k) of the trapezoid rule.
fn talbot_node(k: usize, m: usize, sigma: f64, rho: f64) -> (Complex64, Complex64) {
    let th = k as f64 * PI / m as f64;
    let cot = 1.0 / th.tan();
    let lam = Complex64::new(sigma + rho * th * cot, rho * th);
    let sg = th + (th * cot - 1.0) * cot;
    (lam, Complex64::new(1.0, sg))
}

fn stehfest_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let fact = |k: usize| -> f64 { (1..=k).map(|i| i as f64).product() };
    (1..=n)
        .map(|k| {
            let mut s = 0.0;
            for j in k.div_ceil(2)..=k.min(half) {
                s += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half) % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect()
}

pub fn stehfest<F: Fn(f64) -> f64>(f: F, t: f64, n: usize) -> f64 {
    let a = LN_2 / t;
    stehfest_weights(n)
        .iter()
        .enumerate()
        .map(|(i, v)| v * f((i + 1) as f64 * a))
        .sum::<f64>()
        * a
}

/// ∫_0^∞ e^{-λt} f(t) dt: geometric panels toward 0 on [0, T*] with
/// T* = 40/λ, plus a power-law tail f(t) ≈ f(T*)(t/T*)^{-p} beyond.
pub fn forward_laplace<F: Fn(f64) -> f64>(f: F, lambda: f64, tail_exponent: f64) -> Result<QuadResult> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let t_star = 40.0 / lambda;
    let pts = geometric_breakpoints(0.0, t_star, 90);
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-10,
        max_intervals: 6000,
    };
    let head = adaptive_breakpoints(|t| if t > 0.0 { (-lambda * t).exp() * f(t) } else { 0.0 }, &pts, tol);
    let head = match head {
        Ok(r) => r,
        Err(Error::NoConvergence { value, error }) if error <= 1e-8 * (1.0 + value.abs()) => QuadResult {
            value,
            error,
            intervals: tol.max_intervals,
        },
        Err(e) => return Err(e),
    };
    let f_star = f(t_star);
    let tail = if f_star == 0.0 {
        0.0
    } else {
        adaptive(
            |t| f_star * (t / t_star).powf(-tail_exponent) * (-lambda * t).exp(),
            t_star,
            t_star + 60.0 / lambda,
            Tolerance::new(1e-300, 1e-10),
        )?
        .value
    };
    let value = head.value + tail;
    if head.error > 1e-8 * (1.0 + value.abs()) {
        return Err(Error::NoConvergence {
            value,
            error: head.error,
        });
    }
    Ok(QuadResult {
        value,
        error: head.error,
        intervals: head.intervals,
    })
}

/// Density of the one-sided s-stable law, inverse transform of e^{-λ^s}.
pub fn stable_profile_density(s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1), got {s}")));
    }
    let f = TransformFn::complex(move |z: Complex64| (-(s * z.ln()).exp()).exp());
    let inv = invert(&f, t, Method::Talbot)?;
    clamp(inv.value, inv.noise)
}

fn clamp(value: f64, noise: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if -value <= CLAMP_THRESHOLD.max(100.0 * noise) {
        Ok(0.0)
    } else {
        Err(Error::Inversion(format!(
            "negative value {value:e} above the noise floor {noise:e}"
        )))
    }
}

/// Which transform of G is inverted: K e^{-τΦ} (density) or
/// K e^{-τΦ}/λ (its running time integral).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Density,
    Cumulative,
}

struct FixedNode {
    /// (ρ/M) e^{λt} K(λ) (1 + iσ_k); the midpoint node carries the ½.
    coef: Complex64,
    lambda: Complex64,
    phi: Complex64,
}

enum Contour {
    /// One contour per t, shared across τ up to `tau_switch`, where the
    /// saddle of the integrand leaves the contour; beyond it the saddle
    /// contour about the branch point 0 takes over.
    Fixed { nodes: Vec<FixedNode>, tau_switch: f64 },
    /// Contour around the branch point `branch`, crossing the real axis at the
    /// dominant saddle of each integrand. Used where the subordinator has
    /// finite mean and G_t concentrates far from τ = 0. `killing` is Φ(0),
    /// the residue weight of the pole of K at 0.
    Saddle { branch: f64, killing: f64 },
}

/// Inverse-subordinator density at a fixed t, reusable across τ.
pub struct GDensity {
    spec: KernelSpec,
    t: f64,
    contour: Contour,
}

impl GDensity {
    pub fn new(spec: &KernelSpec, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("t must be positive, got {t}")));
        }
        let contour = match *spec.class() {
            KernelClass::Gamma { b, .. } => Contour::Saddle {
                branch: -b,
                killing: 0.0,
            },
            KernelClass::TemperedStable { beta, .. } => Contour::Saddle {
                branch: -beta,
                killing: 0.0,
            },
            KernelClass::InverseGamma { a, b } => Contour::Saddle {
                branch: -0.5 * a,
                killing: (a * b).sqrt(),
            },
            _ => {
                let m = TALBOT_NODES;
                let rho = 2.0 * m as f64 / (5.0 * t);
                let scale = rho / m as f64;
                let mut nodes = Vec::with_capacity(m);
                let x0 = Complex64::new(rho, 0.0);
                nodes.push(FixedNode {
                    coef: 0.5 * scale * (x0 * t).exp() * spec.k_complex(x0),
                    lambda: x0,
                    phi: spec.phi_complex(x0),
                });
                for k in 1..m {
                    let (lam, dl) = talbot_node(k, m, 0.0, rho);
                    nodes.push(FixedNode {
                        coef: scale * (lam * t).exp() * spec.k_complex(lam) * dl,
                        lambda: lam,
                        phi: spec.phi_complex(lam),
                    });
                }
                if nodes.iter().any(|n| !(n.coef.re.is_finite() && n.coef.im.is_finite() && n.phi.re.is_finite())) {
                    return Err(Error::NonFinite(format!("kernel symbol on the Talbot contour at t={t}")));
                }
                // Saddle of tx + ln K(x) − τΦ(x) sits at x = ρ when τ equals this.
                let h = 1e-5 * rho;
                let dlnk = (spec.k_laplace(rho + h)?.ln() - spec.k_laplace(rho - h)?.ln()) / (2.0 * h);
                let dphi = (spec.phi(rho + h)? - spec.phi(rho - h)?) / (2.0 * h);
                let tau_switch = if dphi > 0.0 {
                    ((t + dlnk) / dphi).max(0.0)
                } else {
                    f64::INFINITY
                };
                Contour::Fixed { nodes, tau_switch }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            t,
            contour,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// G_t(τ), negative noise clamped.
    pub fn density(&self, tau: f64) -> Result<f64> {
        let (v, n) = self.raw(tau, Weight::Density)?;
        clamp(v, n)
    }

    /// (1/t) ∫_0^t G_s(τ) ds.
    pub fn cesaro(&self, tau: f64) -> Result<f64> {
        let (v, n) = self.raw(tau, Weight::Cumulative)?;
        Ok(clamp(v, n)? / self.t)
    }

    /// Unclamped inversion value and its noise estimate. The cumulative
    /// weight is not divided by t here.
    pub fn raw(&self, tau: f64, weight: Weight) -> Result<(f64, f64)> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::Domain(format!("tau must be nonnegative, got {tau}")));
        }
        let out = match (&self.contour, weight) {
            (&Contour::Fixed { tau_switch, .. }, _) if tau > tau_switch => {
                saddle_inversion(&self.spec, self.t, tau, 0.0, 0.0, weight == Weight::Cumulative)
            }
            (Contour::Fixed { nodes, .. }, _) => {
                let mut sum = 0.0;
                let mut mag = 0.0;
                for n in nodes {
                    let mut term = n.coef * (-tau * n.phi).exp();
                    if weight == Weight::Cumulative {
                        term /= n.lambda;
                    }
                    sum += term.re;
                    mag += term.norm();
                }
                (sum, mag * f64::EPSILON)
            }
            (&Contour::Saddle { branch, killing }, Weight::Density) => {
                saddle_inversion(&self.spec, self.t, tau, branch, killing, false)
            }
            (&Contour::Saddle { branch, killing }, Weight::Cumulative) => {
                // The 1/λ pole merges with the saddle in the bulk, so integrate
                // the densities over s instead.
                self.cumulative_by_quadrature(tau, branch, killing)?
            }
        };
        if !out.0.is_finite() {
            return Err(Error::NonFinite(format!("G inversion at t={}, tau={tau}", self.t)));
        }
        Ok(out)
    }

    fn cumulative_by_quadrature(&self, tau: f64, branch: f64, killing: f64) -> Result<(f64, f64)> {
        let t = self.t;
        let mut pts = geometric_breakpoints(0.0, t, 60);
        if let Some((m, v)) = moments(&self.spec) {
            let centre = m * tau;
            let sd = (v * tau).sqrt().max(1e-6 * t);
            pts.extend((-16..=16).map(|j| centre + 0.5 * j as f64 * sd).filter(|&s| s > 0.0 && s < t));
            pts.sort_by(f64::total_cmp);
            pts.dedup();
        }
        let mut noise = 0.0;
        let r = adaptive_breakpoints(
            |s| {
                if s <= 0.0 {
                    return 0.0;
                }
                let (v, n) = saddle_inversion(&self.spec, s, tau, branch, killing, false);
                noise += n;
                v
            },
            &pts,
            Tolerance {
                abs: 1e-15,
                rel: 1e-9,
                max_intervals: 4000,
            },
        );
        let r = match r {
            Ok(r) => r,
            Err(Error::NoConvergence { value, error }) if error <= 1e-6 * value.abs().max(1e-12) => QuadResult {
                value,
                error,
                intervals: 0,
            },
            Err(e) => return Err(e),
        };
        Ok((r.value, r.error + noise))
    }
}

/// ln K(λ) − τΦ(λ).
fn log_symbol(spec: &KernelSpec, lam: Complex64, tau: f64) -> Complex64 {
    spec.k_complex(lam).ln() - tau * spec.phi_complex(lam)
}

/// Minimiser of `g` along x = at(u), by bisection on the sign of the slope in u.
fn bisect_saddle<G: Fn(f64) -> f64, A: Fn(f64) -> f64>(g: &G, at: A, mut lo: f64, mut hi: f64) -> f64 {
    let slope = |u: f64| g(at(u + 1e-4)) - g(at(u - 1e-4));
    if slope(lo) >= 0.0 {
        return at(lo);
    }
    let mut guard = 0;
    while slope(hi) <= 0.0 && guard < 200 {
        hi += 2.0;
        guard += 1;
    }
    for _ in 0..200 {
        if hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Talbot contour λ = b + ρθ(cot θ + i) around the branch point b, crossing
/// the real axis at the saddle of e^{λt}K(λ)e^{−τΦ(λ)}. When K has a pole at
/// 0 and the contour crosses to its left, the residue κe^{−τκ} is added.
/// `cumulative` divides the integrand by λ; only valid with the branch at 0.
fn saddle_inversion(spec: &KernelSpec, t: f64, tau: f64, branch: f64, killing: f64, cumulative: bool) -> (f64, f64) {
    let lnf = |lam: Complex64| {
        let e = lam * t + log_symbol(spec, lam, tau);
        if cumulative {
            e - lam.ln()
        } else {
            e
        }
    };
    let g = |x: f64| lnf(Complex64::new(x, 0.0)).re;
    let pole = killing > 0.0 && branch < 0.0;
    let w0 = branch.abs();
    let scale = w0.max(1.0 / t);
    let right = |lo_base: f64| {
        bisect_saddle(&g, |u: f64| lo_base + u.exp(), (1e-8 * scale).ln(), (1.0 / t + scale).ln())
    };
    let xs = if pole {
        let r = right(0.0);
        let l = bisect_saddle(&g, |u: f64| branch + w0 / (1.0 + (-u).exp()), -30.0, 30.0);
        if g(l) < g(r) {
            l
        } else {
            r
        }
    } else {
        right(branch)
    };
    let floor = if branch == 0.0 { 2.0 * TALBOT_NODES as f64 / 5.0 } else { 5.0 };
    let mut rho = (xs - branch).max(floor / t);
    let mut xc = branch + rho;
    if pole && xc.abs() < 0.25 * rho {
        xc = 0.25 * rho * if xc >= 0.0 { 1.0 } else { -1.0 };
        rho = xc - branch;
    }
    let residue = if pole && xc < 0.0 {
        killing * (-tau * killing).exp()
    } else {
        0.0
    };
    let c0 = 0.5 * lnf(Complex64::new(xc, 0.0)).exp();
    if c0.re.abs() < 1e-300 && residue == 0.0 && g(xc) < -700.0 {
        return (0.0, 0.0);
    }
    let delta = if pole { rho.min(xc.abs()) } else { rho };
    let h = 1e-3 * delta;
    let curv = ((g(xc + h) - 2.0 * g(xc) + g(xc - h)) / (h * h)).max(1e-300);
    let width = 1.0 / curv.sqrt();
    let m = (3.0 * PI * rho / width)
        .max(20.0 * rho / delta)
        .max(TALBOT_NODES as f64)
        .min(4000.0)
        .ceil() as usize;
    let mut sum = c0.re;
    let mut mag = c0.norm();
    for k in 1..m {
        let (lam, dl) = talbot_node(k, m, branch, rho);
        let term = lnf(lam).exp() * dl;
        if term.re.is_finite() {
            sum += term.re;
            mag += term.norm();
        }
    }
    let s = rho / m as f64;
    (s * sum + residue, s * mag * f64::EPSILON + residue * f64::EPSILON)
}

/// (Φ'(0), −Φ''(0)), the mean and variance rates of S, when finite.
fn moments(spec: &KernelSpec) -> Option<(f64, f64)> {
    match *spec.class() {
        KernelClass::Gamma { a, b } => Some((a / b, a / (b * b))),
        KernelClass::TemperedStable { theta, beta } => Some((
            theta * beta.powf(theta - 1.0),
            theta * (1.0 - theta) * beta.powf(theta - 2.0),
        )),
        KernelClass::InverseGamma { a, b } if a > 0.0 => Some((2.0 * (b / a).sqrt(), 2.0 * b.sqrt() * a.powf(-1.5))),
        _ => None,
    }
}

impl GDensity {
    /// τ beyond which P(E_t > τ) ≤ e^{1 - τΦ(1/t)} drops below `tail`.
    pub fn tau_max(&self, tail: f64) -> Result<f64> {
        let phi = self.spec.phi(1.0 / self.t)?;
        Ok((1.0 - tail.ln()) / phi)
    }

    /// Breakpoints for τ-quadrature: geometric toward 0, refined around the
    /// bulk when the subordinator has a finite mean.
    pub fn breakpoints(&self, tau_hi: f64) -> Vec<f64> {
        let mut pts = vec![0.0];
        for k in (1..=100).rev() {
            pts.push(tau_hi * 2f64.powf(-0.5 * k as f64));
        }
        pts.push(tau_hi);
        if let Some(mean) = self.spec.mean_rate() {
            let centre = self.t / mean;
            let var = moments(&self.spec).map_or(0.0, |m| m.1);
            let sd = (self.t * var / mean.powi(3)).sqrt().max(1e-3 * centre);
            for j in -24..=24 {
                let x = centre + 0.5 * j as f64 * sd;
                if x > 0.0 && x < tau_hi {
                    pts.push(x);
                }
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup();
        }
        pts
    }

    /// ∫_0^∞ f(τ) w(τ) dτ with w = G_t (Density) or the Cesàro kernel
    /// (Cumulative, divided by t).
    pub fn integrate_against<F: FnMut(f64) -> f64>(&self, mut f: F, weight: Weight, rel_tol: f64) -> Result<QuadResult> {
        let tau_hi = self.tau_max(1e-17)?;
        let pts = self.breakpoints(tau_hi);
        let mut err: Option<Error> = None;
        let tol = Tolerance {
            abs: 1e-300,
            rel: rel_tol,
            max_intervals: 8000,
        };
        let res = adaptive_breakpoints(
            |tau| {
                let w = match weight {
                    Weight::Density => self.density(tau),
                    Weight::Cumulative => self.cesaro(tau),
                };
                match w {
                    Ok(w) if w == 0.0 => 0.0,
                    Ok(w) => w * f(tau),
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            &pts,
            tol,
        );
        if let Some(e) = err {
            return Err(e);
        }
        match res {
            Ok(r) => Ok(r),
            Err(Error::NoConvergence { value, error }) if error <= 100.0 * rel_tol * value.abs() => Ok(QuadResult {
                value,
                error,
                intervals: tol.max_intervals,
            }),
            Err(e) => Err(e),
        }
    }
}

/// G_t(τ) for a single point; build a `GDensity` to reuse the contour.
pub fn g_density(spec: &KernelSpec, t: f64, tau: f64) -> Result<f64> {
    GDensity::new(spec, t)?.density(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::erfc;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn tabulated_pairs_invert() {
        let one = TransformFn::complex(|z: Complex64| 1.0 / z);
        assert!(rel(invert(&one, 3.0, Method::Talbot).unwrap().value, 1.0) < 1e-10);
        let shift = TransformFn::complex(|z: Complex64| 1.0 / (z + 1.0));
        assert!(rel(invert(&shift, 2.0, Method::Talbot).unwrap().value, (-2f64).exp()) < 1e-10);
        let half = TransformFn::complex(|z: Complex64| 1.0 / z.sqrt());
        assert!(rel(invert(&half, 1.0, Method::Talbot).unwrap().value, 1.0 / PI.sqrt()) < 1e-10);
    }

    #[test]
    fn stehfest_cross_check() {
        let shift = TransformFn::complex(|z: Complex64| 1.0 / (z + 1.0));
        for &t in &[0.1, 1.0, 5.0] {
            let a = invert(&shift, t, Method::Talbot).unwrap().value;
            let b = invert(&shift, t, Method::GaverStehfest).unwrap();
            // Stehfest loses absolute accuracy ~1e-4 on fast decay.
            assert!((a - b.value).abs() < 2e-4, "t={t}");
            assert!(!b.oscillation);
        }
        let real_only = TransformFn::real(|x| 1.0 / (x * x + x));
        assert!(invert(&real_only, 1.0, Method::Talbot).is_err());
        let gs = invert(&real_only, 1.0, Method::GaverStehfest).unwrap().value;
        assert!(rel(gs, 1.0 - (-1f64).exp()) < 1e-4);
    }

    #[test]
    fn forward_pairs() {
        assert!(rel(forward_laplace(|_| 1.0, 2.0, 0.0).unwrap().value, 0.5) < 1e-10);
        assert!(rel(forward_laplace(|t| (-t).exp(), 1.0, 0.0).unwrap().value, 0.5) < 1e-10);
        let r = forward_laplace(|t| 1.0 / (PI * t).sqrt(), 1.0, 0.5).unwrap();
        assert!(rel(r.value, 1.0) < 1e-9, "{}", r.value);
    }

    #[test]
    fn round_trip_through_quadrature() {
        let fs: Vec<(Box<dyn Fn(f64) -> f64 + Sync + Send>, f64)> = vec![
            (Box::new(|t: f64| (-t).exp()), 0.0),
            (Box::new(|t: f64| t * (-t).exp()), 0.0),
            (Box::new(|t: f64| (-1.0 / (4.0 * t)).exp() / (PI * t).sqrt()), 0.5),
        ];
        for (f, p) in &fs {
            for &t in &[0.1, 1.0, 10.0] {
                let g = |x: f64| forward_laplace(f, x, *p).unwrap().value;
                let v = stehfest(g, t, 12);
                assert!((v - f(t)).abs() < 1e-3 * (1.0 + f(t)), "t={t} {v} {}", f(t));
            }
        }
    }

    #[test]
    fn half_stable_density_closed_form() {
        for &t in &[1.0, 10.0] {
            let g = GDensity::new(&KernelSpec::stable(0.5).unwrap(), t).unwrap();
            for i in 0..=30 {
                let tau = 6.0 * t.sqrt() * i as f64 / 30.0;
                let exact = (-tau * tau / (4.0 * t)).exp() / (PI * t).sqrt();
                assert!(rel(g.density(tau).unwrap(), exact) < 1e-6, "t={t} tau={tau}");
            }
        }
        assert!(rel(g_density(&KernelSpec::stable(0.5).unwrap(), 1.0, 2.0).unwrap(), (-1f64).exp() / PI.sqrt()) < 1e-8);
    }

    #[test]
    fn gamma_density_matches_incomplete_gamma_derivative() {
        // P(E_t > τ) = P(S_τ < t) = P(aτ, bt); differentiate in τ.
        let (a, b) = (2.0, 1.0);
        let spec = KernelSpec::gamma(a, b).unwrap();
        for &t in &[1.0, 10.0, 1000.0] {
            let g = GDensity::new(&spec, t).unwrap();
            for &f in &[0.2, 0.5, 1.0, 1.5] {
                let tau = f * t * b / a;
                let sd = (t * a / (b * b) * (b / a).powi(3)).sqrt();
                let h = 1e-2 * sd.min(tau);
                let p = |x: f64| crate::special::gamma_lr(a * x, b * t);
                let fd = -(8.0 * (p(tau + h) - p(tau - h)) - (p(tau + 2.0 * h) - p(tau - 2.0 * h))) / (12.0 * h);
                let v = g.density(tau).unwrap();
                assert!((v - fd).abs() < 1e-6 * fd.abs().max(1e-12) + 1e-12, "t={t} tau={tau} {v} {fd}");
            }
        }
    }

    #[test]
    fn stable_profile_examples() {
        let exact = |t: f64| t.powf(-1.5) * (-1.0 / (4.0 * t)).exp() / (2.0 * PI.sqrt());
        assert!(rel(stable_profile_density(0.5, 1.0).unwrap(), exact(1.0)) < 1e-8);
        assert!(rel(stable_profile_density(0.5, 4.0).unwrap(), exact(4.0)) < 1e-8);
        assert!((exact(1.0) - 0.219_696).abs() < 1e-6);
    }

    #[test]
    fn mittag_leffler_transform_of_half_stable() {
        // E[e^{-E_1}] = E_{1/2}(-1) = e·erfc(1)
        let g = GDensity::new(&KernelSpec::stable(0.5).unwrap(), 1.0).unwrap();
        let r = g.integrate_against(|tau| (-tau).exp(), Weight::Density, 1e-10).unwrap();
        assert!(rel(r.value, std::f64::consts::E * erfc(1.0)) < 1e-8);
    }

    #[test]
    fn cesaro_kernel_integrates_to_one() {
        for spec in [KernelSpec::stable(0.4).unwrap(), KernelSpec::gamma(2.0, 1.0).unwrap()] {
            let g = GDensity::new(&spec, 7.0).unwrap();
            let r = g.integrate_against(|_| 1.0, Weight::Cumulative, 1e-10).unwrap();
            assert!(rel(r.value, 1.0) < 1e-7, "{} {}", spec.name(), r.value);
        }
    }

    #[test]
    fn normalized_for_every_class() {
        let specs = [
            KernelSpec::stable(0.3).unwrap(),
            KernelSpec::distributed_order(1.0, 2.0).unwrap(),
            KernelSpec::inverse_gamma(1.0, 1.0).unwrap(),
            KernelSpec::gamma(2.0, 1.0).unwrap(),
            KernelSpec::tempered_stable(0.5, 1.0).unwrap(),
            KernelSpec::distributed_mu(vec![[0.2, 1.0], [0.6, 2.0], [0.9, 0.5]]).unwrap(),
        ];
        for spec in &specs {
            for &t in &[1.0, 10.0] {
                let g = GDensity::new(spec, t).unwrap();
                let r = g.integrate_against(|_| 1.0, Weight::Density, 1e-10).unwrap();
                assert!((r.value - 1.0).abs() < 1e-6, "{} t={t} {}", spec.name(), r.value);
            }
        }
    }

    #[test]
    fn inverse_gamma_density_matches_high_precision_values() {
        // Talbot inversion in 40-digit arithmetic of K(λ)e^{-τΦ(λ)}.
        let spec = KernelSpec::inverse_gamma(1.0, 1.0).unwrap();
        let cases = [
            (1.0, 0.3, 1.172_480_f64),
            (7.0, 3.0, 4.931_244e-2),
            (100.0, 1.0, 3.678_794e-1),
        ];
        for (t, tau, v) in cases {
            assert!(rel(g_density(&spec, t, tau).unwrap(), v) < 2e-6, "t={t} tau={tau}");
        }
    }

    #[test]
    fn clamp_rules() {
        assert_eq!(clamp(-5e-11, 0.0).unwrap(), 0.0);
        assert_eq!(clamp(0.25, 0.0).unwrap(), 0.25);
        assert!(matches!(clamp(-1e-3, 1e-12), Err(Error::Inversion(_))));
    }
}
