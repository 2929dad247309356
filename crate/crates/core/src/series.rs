//! Sampled time series and fitted asymptotic records.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesTag {
    VAtProbe,
    #[serde(rename = "v_E")]
    VE,
    Cesaro,
    Scaled,
}

impl SeriesTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesTag::VAtProbe => "v_at_probe",
            SeriesTag::VE => "v_E",
            SeriesTag::Cesaro => "cesaro",
            SeriesTag::Scaled => "scaled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "v_at_probe" => Ok(SeriesTag::VAtProbe),
            "v_E" | "v_e" => Ok(SeriesTag::VE),
            "cesaro" => Ok(SeriesTag::Cesaro),
            "scaled" => Ok(SeriesTag::Scaled),
            _ => Err(Error::Parse(format!("unknown series tag {s:?}"))),
        }
    }
}

/// Values on a strictly increasing grid of positive times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    tag: SeriesTag,
}

#[derive(Deserialize)]
struct RawSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    tag: SeriesTag,
}

impl TryFrom<RawSeries> for TimeSeries {
    type Error = Error;
    fn try_from(r: RawSeries) -> Result<Self> {
        TimeSeries::new(r.times, r.values, r.tag)
    }
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, tag: SeriesTag) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidParameter("empty time series".into()));
        }
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("times must be finite and positive".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series value".into()));
        }
        Ok(Self { times, values, tag })
    }

    /// Samples `f` on `log_grid(t_min, t_max, per_decade)`.
    pub fn sample<F: FnMut(f64) -> Result<f64>>(
        t_min: f64,
        t_max: f64,
        per_decade: usize,
        tag: SeriesTag,
        mut f: F,
    ) -> Result<Self> {
        let times = log_grid(t_min, t_max, per_decade)?;
        let values = times.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(times, values, tag)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> SeriesTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_min(&self) -> f64 {
        self.times[0]
    }

    pub fn t_max(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn with_tag(mut self, tag: SeriesTag) -> Self {
        self.tag = tag;
        self
    }

    /// Pointwise map keeping the grid.
    pub fn map<F: FnMut(f64, f64) -> f64>(&self, mut f: F, tag: SeriesTag) -> Result<Self> {
        let values = self.times.iter().zip(&self.values).map(|(&t, &v)| f(t, v)).collect();
        Self::new(self.times.clone(), values, tag)
    }

    /// Interpolated value: cubic in (ln t, ln v) when the four neighbours are
    /// positive, otherwise linear in ln t. Constant outside the grid.
    pub fn interpolate(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let lt = t.ln();
        if n >= 4 {
            let j0 = i.saturating_sub(1).min(n - 4);
            let idx = [j0, j0 + 1, j0 + 2, j0 + 3];
            if idx.iter().all(|&j| self.values[j] > 0.0) {
                let xs = idx.map(|j| self.times[j].ln());
                let ys = idx.map(|j| self.values[j].ln());
                return lagrange(&xs, &ys, lt).exp();
            }
        }
        let (t0, t1) = (self.times[i].ln(), self.times[i + 1].ln());
        let w = (lt - t0) / (t1 - t0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:e},{v:e}");
        }
        s
    }

    /// Parses `t,value` rows. A header line is optional; `#` lines are skipped.
    pub fn from_csv(text: &str, tag: SeriesTag) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    times.push(t);
                    values.push(v);
                }
                _ if times.is_empty() && lineno == 0 => continue,
                _ => return Err(Error::Parse(format!("line {}: not a number", lineno + 1))),
            }
        }
        Self::new(times, values, tag).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn lagrange(xs: &[f64; 4], ys: &[f64; 4], x: f64) -> f64 {
    let mut out = 0.0;
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        out += w * ys[i];
    }
    out
}

/// Log-spaced grid from t_min to t_max inclusive.
pub fn log_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || per_decade == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad log grid [{t_min}, {t_max}] with {per_decade} per decade"
        )));
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
    let (a, b) = (t_min.ln(), t_max.ln());
    Ok((0..=n)
        .map(|k| match k {
            0 => t_min,
            k if k == n => t_max,
            k => (a + (b - a) * k as f64 / n as f64).exp(),
        })
        .collect())
}

/// Least-squares line y ≈ slope·x + intercept, returning (slope, intercept).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    PurePower,
    PowerWithLog,
}

/// M ≈ prefactor · t^exponent · (ln t)^{−kappa} over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub exponent: f64,
    #[serde(rename = "kappa")]
    pub log_correction_kappa: f64,
    pub prefactor: f64,
    pub window: [f64; 2],
    #[serde(rename = "residual")]
    pub max_residual: f64,
}

impl AsymptoticFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * t.powf(self.exponent) * t.ln().powf(-self.log_correction_kappa)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit record serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeSeries::new(vec![1.0, 1.0], vec![0.0, 0.0], SeriesTag::VE).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![0.0, 0.0], SeriesTag::VE).is_err());
        assert!(TimeSeries::new(vec![1.0], vec![f64::NAN], SeriesTag::VE).is_err());
        assert!(TimeSeries::new(vec![1.0, 2.0], vec![0.0], SeriesTag::VE).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-2, 1e3, 8).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 1e-2);
        assert_eq!(*g.last().unwrap(), 1e3);
        assert!((g[8] / 0.1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_exact_on_powers() {
        let s = TimeSeries::sample(1e-2, 1e2, 10, SeriesTag::VAtProbe, |t| Ok(3.0 * t.powf(-0.7))).unwrap();
        for &t in &[0.013, 0.5, 7.7, 99.0] {
            assert!((s.interpolate(t) / (3.0 * t.powf(-0.7)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::sample(1.0, 100.0, 8, SeriesTag::Cesaro, |t| Ok(t.sqrt() - 3.0)).unwrap();
        let back = TimeSeries::from_csv(&s.to_csv(), SeriesTag::Cesaro).unwrap();
        assert_eq!(s, back);
        assert!(TimeSeries::from_csv("t,value\n1,2\n1,3\n", SeriesTag::VE).is_err());
        assert!(TimeSeries::from_csv("1,2,3\n", SeriesTag::VE).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let s = TimeSeries::new(vec![1.0, 2.0], vec![0.5, 0.25], SeriesTag::VE).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<TimeSeries>(&j).unwrap(), s);
        let bad = r#"{"times":[2.0,1.0],"values":[0,0],"tag":"v_E"}"#;
        assert!(serde_json::from_str::<TimeSeries>(bad).is_err());
    }
}
