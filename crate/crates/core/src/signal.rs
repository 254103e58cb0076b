use std::io::Read;

use crate::error::{Error, Result};

/// Regression input: abscissae, observations and positive weights.
///
/// Replicated measurements at one abscissa must be aggregated by the caller
/// into a mean observation with the replicate count as weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    z: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Signal {
    pub fn new(z: Vec<f64>, y: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if z.len() != n || w.len() != n {
            return Err(Error::InvalidSignal(format!(
                "length mismatch: z={}, y={}, w={}",
                z.len(),
                n,
                w.len()
            )));
        }
        if n < 3 {
            return Err(Error::InvalidSignal(format!(
                "at least 3 points are required, got {n}"
            )));
        }
        if let Some(i) = (0..n).find(|&i| !z[i].is_finite() || !y[i].is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite value at index {i}")));
        }
        if let Some(i) = (1..n).find(|&i| z[i] <= z[i - 1]) {
            return Err(Error::InvalidSignal(format!(
                "abscissae must be strictly increasing (z[{}]={} >= z[{}]={})",
                i - 1,
                z[i - 1],
                i,
                z[i]
            )));
        }
        if let Some(i) = (0..n).find(|&i| !(w[i] > 0.0) || !w[i].is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "weights must be positive and finite (w[{i}]={})",
                w[i]
            )));
        }
        Ok(Self { z, y, w })
    }

    /// Unit weights.
    pub fn unweighted(z: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(z, y, vec![1.0; n])
    }

    /// Abscissae `1, 2, ..., n` with unit weights.
    pub fn uniform(y: Vec<f64>) -> Result<Self> {
        let z = (1..=y.len()).map(|i| i as f64).collect();
        Self::unweighted(z, y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn is_unit_weight(&self) -> bool {
        self.w.iter().all(|&w| w == 1.0)
    }

    /// True when consecutive gaps agree to a relative 1e-12.
    pub fn is_uniformly_spaced(&self) -> bool {
        let d0 = self.z[1] - self.z[0];
        self.z
            .windows(2)
            .all(|p| ((p[1] - p[0]) - d0).abs() <= 1e-12 * d0.abs().max(1.0))
    }

    /// Same abscissae and weights, different observations.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.z.clone(), y, self.w.clone())
    }

    /// Weighted squared distance `sum_i w_i (a_i - b_i)^2`.
    pub fn weighted_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (a, b))| w * (a - b) * (a - b))
            .sum()
    }

    /// Objective `||x - y||^2_{2,w}`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.weighted_sq_dist(x, &self.y)
    }

    /// Parse CSV with a header naming columns `z`, `y` and optionally `w`
    /// (any order, missing weights default to 1). Errors carry the 1-based
    /// line number of the offending row.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rd.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
        let column = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (Some(zc), Some(yc)) = (column("z"), column("y")) else {
            return Err(parse_error(1, "header must name columns z and y".into()));
        };
        let wc = column("w");
        let (mut z, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
        let mut line = 1;
        for row in rd.records() {
            let row = row.map_err(|e| {
                let at = e.position().map_or(line + 1, |p| p.line() as usize);
                parse_error(at, e.to_string())
            })?;
            line = row.position().map_or(line + 1, |p| p.line() as usize);
            let field = |c: usize, name: &str| -> Result<f64> {
                let text = row.get(c).unwrap_or("");
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(parse_error(line, format!("{name} is not a finite number: '{text}'"))),
                }
            };
            let zi = field(zc, "z")?;
            if z.last().is_some_and(|&prev| zi <= prev) {
                return Err(parse_error(line, format!("z must be strictly increasing (got {zi})")));
            }
            let wi = match wc {
                Some(c) => field(c, "w")?,
                None => 1.0,
            };
            if !(wi > 0.0) {
                return Err(parse_error(line, format!("weight must be positive (got {wi})")));
            }
            z.push(zi);
            y.push(field(yc, "y")?);
            w.push(wi);
        }
        if y.len() < 3 {
            return Err(parse_error(line, format!("at least 3 data rows are required, got {}", y.len())));
        }
        Self::new(z, y, w)
    }
}

fn parse_error(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}
