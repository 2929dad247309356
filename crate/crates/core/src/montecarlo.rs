//! Stochastic oracle: subordinator paths, first-passage times E_t and
//! Monte Carlo estimates of v^E(x, t) = E[v(x, E_t)].

use crate::error::{Error, Result};
use crate::kernels::{KernelClass, KernelSpec};
use crate::laplace::GDensity;
use crate::quadrature::{adaptive, Tolerance};
use crate::series::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Identifies one random stream: a run seed, an experiment id and a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub experiment: u64,
    pub path: u64,
}

impl SeedRecord {
    pub fn new(seed: u64, experiment: u64, path: u64) -> Self {
        Self { seed, experiment, path }
    }

    /// ChaCha20 keyed by (seed, experiment) on stream `path`, so each path's
    /// draws are fixed regardless of scheduling.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(self.path);
        rng
    }
}

/// Discretised subordinator path on a uniform step.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    step: f64,
    increments: Vec<f64>,
    running_values: Vec<f64>,
    seed: Option<SeedRecord>,
}

impl SubordinatorPath {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// S at 0, step, 2·step, ...; starts at 0.
    pub fn running_values(&self) -> &[f64] {
        &self.running_values
    }

    pub fn seed(&self) -> Option<SeedRecord> {
        self.seed
    }
}

/// Draws one increment S_step; samplers exist for the stable, gamma and
/// tempered stable classes.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Stable { theta: f64, scale: f64 },
    Gamma(Gamma<f64>),
    Tempered { theta: f64, scale: f64, beta: f64 },
}

impl IncrementSampler {
    pub fn new(spec: &KernelSpec, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
        }
        let kind = match *spec.class() {
            KernelClass::Stable { theta } => SamplerKind::Stable {
                theta,
                scale: step.powf(1.0 / theta),
            },
            KernelClass::Gamma { a, b } => SamplerKind::Gamma(
                Gamma::new(a * step, 1.0 / b).map_err(|e| Error::InvalidParameter(e.to_string()))?,
            ),
            KernelClass::TemperedStable { theta, beta } => SamplerKind::Tempered {
                theta,
                scale: step.powf(1.0 / theta),
                beta,
            },
            _ => {
                return Err(Error::Unsupported {
                    class: spec.name(),
                    what: "path sampling",
                })
            }
        };
        Ok(Self { kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Stable { theta, scale } => scale * positive_stable(*theta, rng),
            SamplerKind::Gamma(g) => g.sample(rng),
            SamplerKind::Tempered { theta, scale, beta } => loop {
                let x = scale * positive_stable(*theta, rng);
                if rng.random::<f64>() < (-beta * x).exp() {
                    break x;
                }
            },
        }
    }
}

/// Kanter's representation of the one-sided stable law with
/// E e^{−λS} = e^{−λ^θ}.
pub fn positive_stable<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let u = PI * open_unit(rng);
    let w: f64 = Exp1.sample(rng);
    let a = (theta * u).sin().powf(theta / (1.0 - theta)) * ((1.0 - theta) * u).sin()
        / u.sin().powf(1.0 / (1.0 - theta));
    (a / w).powf((1.0 - theta) / theta)
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}

pub fn sample_increments<R: Rng + ?Sized>(spec: &KernelSpec, step: f64, count: usize, rng: &mut R) -> Result<SubordinatorPath> {
    let sampler = IncrementSampler::new(spec, step)?;
    let increments: Vec<f64> = (0..count).map(|_| sampler.sample(rng)).collect();
    let mut running_values = Vec::with_capacity(count + 1);
    let mut acc = 0.0;
    running_values.push(acc);
    for &x in &increments {
        acc += x;
        running_values.push(acc);
    }
    Ok(SubordinatorPath {
        step,
        increments,
        running_values,
        seed: None,
    })
}

/// Path from its seed record.
pub fn sample_path(spec: &KernelSpec, step: f64, count: usize, seed: SeedRecord) -> Result<SubordinatorPath> {
    let mut path = sample_increments(spec, step, count, &mut seed.rng())?;
    path.seed = Some(seed);
    Ok(path)
}

/// E_t = inf{s ≥ 0 : S_s ≥ t}, to the grid: step times the first index
/// whose running value reaches t.
pub fn inverse_passage(path: &SubordinatorPath, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let rv = &path.running_values;
    let k = rv.partition_point(|&s| s < t);
    if k == rv.len() {
        return Err(Error::PathTooShort {
            reached: rv[rv.len() - 1],
            target: t,
        });
    }
    Ok(path.step * k as f64)
}

/// Natural step for E_t: 10^{-3}/Φ(1/t), a thousandth of its scale.
pub fn default_step(spec: &KernelSpec, t: f64) -> Result<f64> {
    Ok(1e-3 / spec.phi(1.0 / t)?)
}

/// Step cap: a thousand times the typical E_t over the step.
fn step_budget(spec: &KernelSpec, t: f64, step: f64) -> Result<usize> {
    let scale = 1.0 / spec.phi(1.0 / t)?;
    Ok(((1e3 * scale / step) as usize).clamp(10_000, 100_000_000))
}

/// One E_t draw, streaming increments until S passes t.
pub fn sample_passage<R: Rng + ?Sized>(sampler: &IncrementSampler, step: f64, t: f64, max_steps: usize, rng: &mut R) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for k in 1..=max_steps {
        s += sampler.sample(rng);
        if s >= t {
            return Ok(step * k as f64);
        }
    }
    Err(Error::PathTooShort { reached: s, target: t })
}

/// Compensated (Neumaier) accumulator of sum, sum of squares and count.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    sum: f64,
    sum_c: f64,
    sq: f64,
    sq_c: f64,
    n: usize,
}

fn neumaier(sum: &mut f64, c: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *c += (*sum - t) + x;
    } else {
        *c += (x - t) + *sum;
    }
    *sum = t;
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        neumaier(&mut self.sum, &mut self.sum_c, x);
        neumaier(&mut self.sq, &mut self.sq_c, x * x);
        self.n += 1;
    }

    pub fn merge(mut self, o: Moments) -> Moments {
        neumaier(&mut self.sum, &mut self.sum_c, o.sum);
        neumaier(&mut self.sum, &mut self.sum_c, o.sum_c);
        neumaier(&mut self.sq, &mut self.sq_c, o.sq);
        neumaier(&mut self.sq, &mut self.sq_c, o.sq_c);
        self.n += o.n;
        self
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        (self.sum + self.sum_c) / self.n as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = ((self.sq + self.sq_c) / n - m * m).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    }
}

/// A Monte Carlo mean with its standard error and, when known, the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    #[serde(rename = "se")]
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
    pub target: Option<f64>,
    /// |estimate − target| ≤ 3 SE + allowance.
    pub covered: Option<bool>,
    #[serde(default)]
    pub clamped_fraction: f64,
}

impl McEstimate {
    fn from_values(values: &[f64], seed: u64) -> Self {
        let m = values.iter().fold(Moments::default(), |mut m, &x| {
            m.push(x);
            m
        });
        Self {
            estimate: m.mean(),
            std_error: m.std_error(),
            n: m.count(),
            seed,
            target: None,
            covered: None,
            clamped_fraction: 0.0,
        }
    }

    /// Records a target and whether it lies within 3 SE + `allowance`.
    pub fn against(mut self, target: f64, allowance: f64) -> Self {
        self.target = Some(target);
        self.covered = Some((self.estimate - target).abs() <= 3.0 * self.std_error + allowance);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate serializes")
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    Ok(())
}

/// Experiment ids separating the streams of the different checks.
mod stream {
    pub const LAPLACE: u64 = 1;
    pub const PASSAGE: u64 = 2;
    pub const SUBORDINATE: u64 = 3;
    pub const SCALING: u64 = 4;
}

/// Per-path values in path order, so the estimate is schedule independent.
fn per_path<F: Fn(&mut ChaCha20Rng) -> Result<f64> + Sync>(seed: u64, experiment: u64, n: usize, f: F) -> Result<Vec<f64>> {
    (0..n as u64)
        .into_par_iter()
        .map(|p| f(&mut SeedRecord::new(seed, experiment, p).rng()))
        .collect()
}

/// Mean of e^{−λS_t} against e^{−tΦ(λ)}.
pub fn laplace_exponent_check(spec: &KernelSpec, t: f64, lambda: f64, n_paths: usize, seed: u64) -> Result<McEstimate> {
    check_paths(n_paths)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let sampler = IncrementSampler::new(spec, t)?;
    let values = per_path(seed, stream::LAPLACE, n_paths, |rng| Ok((-lambda * sampler.sample(rng)).exp()))?;
    let target = if lambda == 0.0 { 1.0 } else { (-t * spec.phi(lambda)?).exp() };
    Ok(McEstimate::from_values(&values, seed).against(target, 0.0))
}

/// E_t samples at the given step (default 10^{-3}/Φ(1/t)).
pub fn passage_samples(spec: &KernelSpec, t: f64, n_paths: usize, step: Option<f64>, seed: u64) -> Result<Vec<f64>> {
    check_paths(n_paths)?;
    let step = match step {
        Some(h) => h,
        None => default_step(spec, t)?,
    };
    let sampler = IncrementSampler::new(spec, step)?;
    let max_steps = step_budget(spec, t, step)?;
    per_path(seed, stream::PASSAGE, n_paths, |rng| sample_passage(&sampler, step, t, max_steps, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageBias {
    pub step: f64,
    pub mean: f64,
    pub se: f64,
}

/// Mean of E_t as the step halves; the O(step) bias should shrink.
pub fn passage_bias_study(spec: &KernelSpec, t: f64, n_paths: usize, levels: usize, seed: u64) -> Result<Vec<PassageBias>> {
    let base = 8.0 * default_step(spec, t)?;
    (0..levels)
        .map(|k| {
            let step = base * 0.5f64.powi(k as i32);
            let e = McEstimate::from_values(&passage_samples(spec, t, n_paths, Some(step), seed)?, seed);
            Ok(PassageBias {
                step,
                mean: e.estimate,
                se: e.std_error,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCheck {
    pub n: usize,
    pub ks_statistic: f64,
    /// 1.36/√n plus the step-bias allowance.
    pub threshold: f64,
    pub pass: bool,
    /// (bin centre, empirical density, G_t at the centre).
    pub histogram: Vec<(f64, f64, f64)>,
}

pub const STEP_BIAS_ALLOWANCE: f64 = 0.01;

/// Kolmogorov–Smirnov distance between sampled E_t and the quadrature CDF
/// of G_t.
pub fn empirical_density_check(spec: &KernelSpec, t: f64, n_paths: usize, bins: usize, seed: u64) -> Result<DensityCheck> {
    check_paths(n_paths)?;
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    let mut xs = passage_samples(spec, t, n_paths, None, seed)?;
    xs.sort_by(f64::total_cmp);
    let g = GDensity::new(spec, t)?;
    let hi = xs[xs.len() - 1].max(1e-300);
    let cdf = CdfTable::new(&g, hi, 2000)?;
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf.eval(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let edge = xs[((xs.len() as f64 * 0.999) as usize).min(xs.len() - 1)].max(1e-300);
    let width = edge / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &xs {
        let b = (x / width) as usize;
        if b < bins {
            counts[b] += 1;
        }
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let centre = (b as f64 + 0.5) * width;
            Ok((centre, c as f64 / (n * width), g.density(centre)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = 1.36 / n.sqrt() + STEP_BIAS_ALLOWANCE;
    Ok(DensityCheck {
        n: xs.len(),
        ks_statistic: d,
        threshold,
        pass: d < threshold,
        histogram,
    })
}

/// ∫_0^τ G_t on a grid, linearly interpolated.
struct CdfTable {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl CdfTable {
    fn new(g: &GDensity, hi: f64, n: usize) -> Result<Self> {
        // Quadratic spacing resolves the τ → 0 end.
        let grid: Vec<f64> = (0..=n).map(|k| hi * (k as f64 / n as f64).powi(2)).collect();
        let pieces = grid
            .par_windows(2)
            .map(|w| {
                let mut err = None;
                let r = adaptive(
                    |tau| match g.density(tau) {
                        Ok(v) => v,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    },
                    w[0],
                    w[1],
                    Tolerance::new(1e-13, 1e-10),
                )?;
                match err {
                    Some(e) => Err(e),
                    None => Ok(r.value),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        values.push(0.0);
        for p in pieces {
            acc += p;
            values.push(acc);
        }
        Ok(Self { grid, values })
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= x);
        if i == 0 {
            return 0.0;
        }
        if i == self.grid.len() {
            return self.values[i - 1];
        }
        let (a, b) = (self.grid[i - 1], self.grid[i]);
        let w = (x - a) / (b - a);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }
}

/// Largest share of samples past the series end before it is an error.
pub const CLAMP_LIMIT: f64 = 1e-3;

/// E[v(E_t)] with v interpolated on the series and clamped beyond it.
pub fn mc_subordinate(v: &TimeSeries, spec: &KernelSpec, t: f64, n_paths: usize, seed: u64) -> Result<McEstimate> {
    check_paths(n_paths)?;
    let step = default_step(spec, t)?;
    let sampler = IncrementSampler::new(spec, step)?;
    let max_steps = step_budget(spec, t, step)?;
    let end = v.t_max();
    let draws = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = SeedRecord::new(seed, stream::SUBORDINATE, p).rng();
            let e = sample_passage(&sampler, step, t, max_steps, &mut rng)?;
            Ok((v.interpolate(e), e > end))
        })
        .collect::<Result<Vec<_>>>()?;
    let clamped = draws.iter().filter(|d| d.1).count() as f64 / n_paths as f64;
    if clamped > CLAMP_LIMIT {
        return Err(Error::Coverage(format!(
            "{:.3}% of E_t samples fall beyond the series end {end:e}",
            100.0 * clamped
        )));
    }
    let values: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let mut est = McEstimate::from_values(&values, seed);
    est.clamped_fraction = clamped;
    Ok(est)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at level 1%.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub theta: f64,
    pub t: f64,
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// S_t against t^{1/θ}S_1 for the stable subordinator, independent streams.
pub fn self_similarity_check(theta: f64, t: f64, n: usize, seed: u64) -> Result<ScalingCheck> {
    check_paths(n)?;
    let spec = KernelSpec::stable(theta)?;
    let direct = IncrementSampler::new(&spec, t)?;
    let unit = IncrementSampler::new(&spec, 1.0)?;
    let a = per_path(seed, stream::SCALING, n, |rng| Ok(direct.sample(rng)))?;
    let scale = t.powf(1.0 / theta);
    let b = per_path(seed ^ 0x5eed, stream::SCALING, n, |rng| Ok(scale * unit.sample(rng)))?;
    let statistic = two_sample_ks(&a, &b);
    let critical = ks_critical_1pct(n, n);
    Ok(ScalingCheck {
        theta,
        t,
        statistic,
        critical,
        pass: statistic < critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SeriesTag;
    use crate::special::{erfc, gamma_fn};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn increments_nonnegative_and_gamma_mean() {
        for spec in [
            KernelSpec::stable(0.3).unwrap(),
            KernelSpec::gamma(0.5, 2.0).unwrap(),
            KernelSpec::tempered_stable(0.6, 2.0).unwrap(),
        ] {
            let p = sample_path(&spec, 0.01, 2000, SeedRecord::new(1, 0, 0)).unwrap();
            assert!(p.increments().iter().all(|&x| x >= 0.0));
            assert!(p.running_values().windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(p.running_values()[0], 0.0);
        }
        let g = KernelSpec::gamma(2.0, 4.0).unwrap();
        let s = IncrementSampler::new(&g, 1.0).unwrap();
        let v = per_path(3, 9, 100_000, |rng| Ok(s.sample(rng))).unwrap();
        let e = McEstimate::from_values(&v, 3).against(0.5, 0.0);
        assert_eq!(e.covered, Some(true), "{e:?}");
    }

    #[test]
    fn tempered_acceptance_rate() {
        let n = 100_000;
        let accepted = per_path(5, 9, n, |rng| {
            let x = positive_stable(0.5, rng);
            Ok(if rng.random::<f64>() < (-x).exp() { 1.0 } else { 0.0 })
        })
        .unwrap();
        let e = McEstimate::from_values(&accepted, 5).against((-1f64).exp(), 0.0);
        assert_eq!(e.covered, Some(true), "{e:?}");
    }

    #[test]
    fn laplace_exponents() {
        let e = laplace_exponent_check(&KernelSpec::stable(0.5).unwrap(), 1.0, 1.0, 100_000, 11).unwrap();
        assert_eq!(e.covered, Some(true), "{e:?}");
        assert!((e.target.unwrap() - 0.367_879).abs() < 1e-6);
        let e = laplace_exponent_check(&KernelSpec::gamma(1.0, 1.0).unwrap(), 2.0, 1.0, 100_000, 11).unwrap();
        assert_eq!(e.covered, Some(true), "{e:?}");
        assert!((e.target.unwrap() - 0.25).abs() < 1e-12);
        let e = laplace_exponent_check(&KernelSpec::tempered_stable(0.5, 1.0).unwrap(), 1.0, 0.0, 1000, 11).unwrap();
        assert_eq!((e.estimate, e.std_error), (1.0, 0.0));
        assert!(laplace_exponent_check(&KernelSpec::inverse_gamma(1.0, 1.0).unwrap(), 1.0, 1.0, 10, 1).is_err());
        assert!(laplace_exponent_check(&KernelSpec::stable(0.5).unwrap(), 1.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn passage_times() {
        let spec = KernelSpec::stable(0.5).unwrap();
        let p = sample_path(&spec, 1e-3, 20_000, SeedRecord::new(2, 0, 0)).unwrap();
        assert_eq!(inverse_passage(&p, 0.0).unwrap(), 0.0);
        let mut last = 0.0;
        for t in [0.01, 0.1, 0.5, 1.0, 2.0] {
            let e = inverse_passage(&p, t).unwrap();
            assert!(e >= last);
            last = e;
        }
        assert!(matches!(inverse_passage(&p, 1e12), Err(Error::PathTooShort { .. })));
        let xs = passage_samples(&spec, 1.0, 100_000, None, 4).unwrap();
        let e = McEstimate::from_values(&xs, 4).against(1.0 / gamma_fn(1.5), 0.0);
        assert_eq!(e.covered, Some(true), "{e:?}");
    }

    #[test]
    fn density_matches_g() {
        let r = empirical_density_check(&KernelSpec::stable(0.5).unwrap(), 1.0, 100_000, 40, 6).unwrap();
        assert!(r.pass, "{} {}", r.ks_statistic, r.threshold);
        let r = empirical_density_check(&KernelSpec::stable(0.3).unwrap(), 10.0, 20_000, 40, 6).unwrap();
        assert!(r.pass, "{} {}", r.ks_statistic, r.threshold);
        assert!(empirical_density_check(&KernelSpec::stable(0.5).unwrap(), 1.0, 0, 10, 6).is_err());
    }

    #[test]
    fn subordinated_means() {
        let spec = KernelSpec::stable(0.5).unwrap();
        let one = TimeSeries::sample(1e-8, 1e4, 4, SeriesTag::VAtProbe, |_| Ok(1.0)).unwrap();
        let e = mc_subordinate(&one, &spec, 1.0, 1000, 8).unwrap();
        assert_eq!((e.estimate, e.std_error), (1.0, 0.0));
        let exp = TimeSeries::sample(1e-8, 1e3, 40, SeriesTag::VAtProbe, |t| Ok((-t).exp())).unwrap();
        let e = mc_subordinate(&exp, &spec, 1.0, 100_000, 8).unwrap().against(1f64.exp() * erfc(1.0), 1e-3);
        assert_eq!(e.covered, Some(true), "{e:?}");
        let short = TimeSeries::sample(1e-8, 0.1, 4, SeriesTag::VAtProbe, |_| Ok(1.0)).unwrap();
        assert!(matches!(mc_subordinate(&short, &spec, 1.0, 1000, 8), Err(Error::Coverage(_))));
    }

    #[test]
    fn stable_self_similarity() {
        for theta in [0.3, 0.7] {
            let r = self_similarity_check(theta, 5.0, 10_000, 13).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn bias_shrinks_with_step() {
        let spec = KernelSpec::stable(0.5).unwrap();
        let rows = passage_bias_study(&spec, 1.0, 20_000, 3, 21).unwrap();
        let exact = 1.0 / gamma_fn(1.5);
        // Same streams at each level, so the O(step) overshoot dominates the change.
        assert!(rows[0].mean - exact > rows[2].mean - exact - 3.0 * rows[2].se);
        assert!(rows.windows(2).all(|w| w[1].step < w[0].step));
    }

    #[test]
    fn compensated_moments_merge() {
        let mut a = Moments::default();
        let mut b = Moments::default();
        for i in 0..1000 {
            a.push(1e8 + i as f64);
            b.push(1e-8 * i as f64);
        }
        let m = a.merge(b);
        assert_eq!(m.count(), 2000);
        let exact = (1000.0 * 1e8 + 499_500.0 + 1e-8 * 499_500.0) / 2000.0;
        assert!((m.mean() - exact).abs() <= 1e-15 * exact);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn streams_are_deterministic(seed in any::<u64>(), path in 0u64..1000) {
            let spec = KernelSpec::gamma(1.0, 2.0).unwrap();
            let a = sample_path(&spec, 0.1, 50, SeedRecord::new(seed, 7, path)).unwrap();
            let b = sample_path(&spec, 0.1, 50, SeedRecord::new(seed, 7, path)).unwrap();
            prop_assert_eq!(&a, &b);
            let c = sample_path(&spec, 0.1, 50, SeedRecord::new(seed, 7, path + 1)).unwrap();
            prop_assert_ne!(a.increments(), c.increments());
        }

        #[test]
        fn passage_monotone_in_t(seed in any::<u64>(), t1 in 0.0f64..2.0, dt in 0.0f64..2.0) {
            let spec = KernelSpec::tempered_stable(0.5, 1.0).unwrap();
            let p = sample_path(&spec, 1e-2, 5000, SeedRecord::new(seed, 0, 0)).unwrap();
            let (a, b) = (inverse_passage(&p, t1), inverse_passage(&p, t1 + dt));
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!(a <= b);
            }
        }
    }
}
