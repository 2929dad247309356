//! Gauss–Legendre rules and globally adaptive Gauss–Kronrod integration.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// n-point rule on [-1, 1] by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared rules for n in 1..=64.
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=64).map(GaussLegendre::new).collect());
    &rules[n.clamp(1, 64) - 1]
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: (integral, error estimate).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive GK15 over [a, b].
pub fn adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    adaptive_breakpoints(f, &[a, b], tol)
}

/// Globally adaptive GK15 over consecutive breakpoints; the worst panel is
/// bisected until the summed error estimate meets the tolerance.
pub fn adaptive_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e) = gk15(&mut f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    let mut steps = 0usize;
    while err > tol.abs.max(tol.rel * total.abs()) {
        steps += 1;
        if steps % 32 == 0 || heap.len() >= tol.max_intervals {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
            if err <= tol.abs.max(tol.rel * total.abs()) {
                break;
            }
        }
        if heap.len() >= tol.max_intervals {
            if !total.is_finite() || !err.is_finite() {
                return Err(Error::NonFinite("adaptive quadrature integrand".into()));
            }
            return Err(Error::NoConvergence {
                value: total,
                error: err,
            });
        }
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel {
            a: p.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: m,
            b: p.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated update drift.
    let mut value = 0.0;
    let mut error = 0.0;
    let intervals = heap.len();
    for p in heap {
        value += p.value;
        error += p.error;
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("adaptive quadrature integrand".into()));
    }
    Ok(QuadResult {
        value,
        error,
        intervals,
    })
}

/// Breakpoints a·r^k accumulating geometrically toward `a`, covering [a, b];
/// `levels` dyadic panels shrink toward the left endpoint.
pub fn geometric_breakpoints(a: f64, b: f64, levels: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(levels + 2);
    pts.push(a);
    let len = b - a;
    for k in (0..levels).rev() {
        pts.push(a + len * 0.5f64.powi(k as i32 + 1));
    }
    pts.push(b);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 33, 64] {
            let gl = GaussLegendre::new(n);
            let wsum: f64 = gl.weights().iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let v = gl.integrate(|x| x.powi(deg as i32 - 1) + x.powi(deg as i32), 0.0, 1.0);
            let exact = 1.0 / deg as f64 + 1.0 / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-13, "n={n} {v} {exact}");
        }
    }

    #[test]
    fn gk15_panel_matches_exponential() {
        let (v, e) = gk15(&mut |x: f64| x.exp(), 0.0, 1.0);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!(e < 1e-10);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let pts = geometric_breakpoints(0.0, 1.0, 60);
        let r = adaptive_breakpoints(|x| 1.0 / x.sqrt(), &pts, Tolerance::new(1e-13, 1e-12)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn adaptive_resolves_narrow_peak() {
        let w = 1e-2;
        let r = adaptive(
            |x| (-(x - 0.3) * (x - 0.3) / (2.0 * w * w)).exp(),
            0.0,
            1.0,
            Tolerance::new(1e-14, 1e-10),
        )
        .unwrap();
        let exact = w * (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-15,
            max_intervals: 4,
        };
        match adaptive(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, tol) {
            Err(Error::NoConvergence { .. }) => {}
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
