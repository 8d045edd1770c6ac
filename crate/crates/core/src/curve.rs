//! Survival tail curves shared by the oracle, the Monte Carlo engine and the fits.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default spacing of checkpoint grids.
pub const DEFAULT_RATIO: f64 = 1.189_207_115_002_721; // 2^(1/4)

/// Which probability law a curve estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Quenched,
    Annealed,
    MixedTheta,
    MixedOmega,
}

impl Measure {
    pub const ALL: [Measure; 4] =
        [Measure::Quenched, Measure::Annealed, Measure::MixedTheta, Measure::MixedOmega];

    pub fn label(self) -> &'static str {
        match self {
            Measure::Quenched => "quenched",
            Measure::Annealed => "annealed",
            Measure::MixedTheta => "mixed-theta",
            Measure::MixedOmega => "mixed-omega",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("unknown measure '{s}'") })
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo,
    ExactDp,
}

/// Raw material for resampling a curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replicates {
    None,
    /// `deaths[k]` walkers died in `(n_{k−1}, n_k]` (with `n_{−1} = 0`);
    /// `survivors` were alive at the last checkpoint.
    Walkers { deaths: Vec<u64>, survivors: u64 },
    /// Per-environment survival values, one row per environment.
    Environments { values: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub measure: Measure,
    pub method: Method,
    pub checkpoints: Vec<u64>,
    pub estimate: Vec<f64>,
    /// Natural log of the estimate; finite even where `estimate` underflows.
    #[serde(deserialize_with = "log_values")]
    pub ln_estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Exact-DP bounds (averaged over environments where applicable).
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Walkers alive at each checkpoint (Monte Carlo only).
    pub alive: Option<Vec<u64>>,
    pub walkers: u64,
    pub environments: u64,
    /// Walkers still alive at the last checkpoint.
    pub censored: u64,
    pub seed: u64,
    pub replicates: Replicates,
}

/// JSON has no infinities: `ln 0` is written as `null` and read back as `−∞`.
pub(crate) fn log_values<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let raw = Vec::<Option<f64>>::deserialize(d)?;
    Ok(raw.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect())
}

pub(crate) fn log_value<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

/// Geometric grid `round(ratio^k)` on `[1, n_max]`, deduplicated, always ending at `n_max`.
pub fn geometric_checkpoints(n_max: u64, ratio: f64) -> Result<Vec<u64>> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    if !(ratio > 1.0) {
        return Err(Error::Domain(format!("checkpoint ratio {ratio} must exceed 1")));
    }
    let mut out = Vec::new();
    let mut x = 1.0f64;
    while x.round() as u64 <= n_max {
        let n = x.round() as u64;
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= ratio;
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    Ok(out)
}

pub(crate) fn check_checkpoints(checkpoints: &[u64]) -> Result<u64> {
    if checkpoints.is_empty() {
        return Err(Error::Domain("at least one checkpoint is required".into()));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("checkpoints must be positive and strictly increasing".into()));
    }
    Ok(*checkpoints.last().unwrap())
}

/// Alive counts from a death histogram.
pub fn alive_from_deaths(deaths: &[u64], survivors: u64) -> Vec<u64> {
    let mut alive = vec![0; deaths.len()];
    let mut acc = survivors;
    for k in (0..deaths.len()).rev() {
        alive[k] = acc;
        acc += deaths[k];
    }
    alive
}

impl TailCurve {
    /// Curve from Monte Carlo death counts with binomial standard errors.
    pub fn from_deaths(
        measure: Measure,
        checkpoints: Vec<u64>,
        deaths: Vec<u64>,
        survivors: u64,
        environments: u64,
        seed: u64,
    ) -> Self {
        let walkers = deaths.iter().sum::<u64>() + survivors;
        let alive = alive_from_deaths(&deaths, survivors);
        let nw = walkers.max(1) as f64;
        let estimate: Vec<f64> = alive.iter().map(|&a| a as f64 / nw).collect();
        let stderr = estimate.iter().map(|&q| (q * (1.0 - q) / nw).sqrt()).collect();
        Self {
            measure,
            method: Method::MonteCarlo,
            checkpoints,
            ln_estimate: estimate.iter().map(|q| q.ln()).collect(),
            estimate,
            stderr,
            lower: None,
            upper: None,
            alive: Some(alive),
            walkers,
            environments,
            censored: survivors,
            seed,
            replicates: Replicates::Walkers { deaths, survivors },
        }
    }

    /// Curve averaging per-environment exact values; `lower`/`upper` rows are
    /// the per-environment bracket ends.
    pub fn from_environment_rows(
        measure: Measure,
        checkpoints: Vec<u64>,
        lower_rows: Vec<Vec<f64>>,
        upper_rows: Vec<Vec<f64>>,
        seed: u64,
    ) -> Self {
        let m = lower_rows.len();
        let k = checkpoints.len();
        let mean = |rows: &[Vec<f64>], j: usize| rows.iter().map(|r| r[j]).sum::<f64>() / m as f64;
        let estimate: Vec<f64> = (0..k).map(|j| mean(&lower_rows, j)).collect();
        let upper: Vec<f64> = (0..k).map(|j| mean(&upper_rows, j)).collect();
        let stderr = (0..k)
            .map(|j| {
                if m < 2 {
                    return 0.0;
                }
                let mu = estimate[j];
                let var = lower_rows.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / (m - 1) as f64;
                (var / m as f64).sqrt()
            })
            .collect();
        Self {
            measure,
            method: Method::ExactDp,
            checkpoints,
            ln_estimate: estimate.iter().map(|q| q.ln()).collect(),
            lower: Some(estimate.clone()),
            estimate,
            stderr,
            upper: Some(upper),
            alive: None,
            walkers: 0,
            environments: m as u64,
            censored: 0,
            seed,
            replicates: Replicates::Environments { values: lower_rows },
        }
    }

    /// Resampled log-estimates, or `None` when the curve has no replicate data.
    pub fn bootstrap_ln<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        match &self.replicates {
            Replicates::None => None,
            Replicates::Walkers { deaths, survivors } => {
                let total = deaths.iter().sum::<u64>() + survivors;
                let mut left = total;
                let mut mass = 1.0;
                let mut draws = Vec::with_capacity(deaths.len());
                for &d in deaths {
                    let q = if mass > 0.0 { (d as f64 / total as f64 / mass).min(1.0) } else { 0.0 };
                    let x = if left == 0 || q <= 0.0 {
                        0
                    } else {
                        Binomial::new(left, q).expect("valid binomial").sample(rng)
                    };
                    draws.push(x);
                    left -= x;
                    mass -= d as f64 / total as f64;
                }
                let alive = alive_from_deaths(&draws, left);
                Some(alive.iter().map(|&a| (a as f64 / total as f64).ln()).collect())
            }
            Replicates::Environments { values } => {
                let m = values.len();
                let k = self.checkpoints.len();
                let mut acc = vec![0.0; k];
                for _ in 0..m {
                    let row = &values[rng.random_range(0..m)];
                    for j in 0..k {
                        acc[j] += row[j];
                    }
                }
                Some(acc.iter().map(|s| (s / m as f64).ln()).collect())
            }
        }
    }

    /// Exactly non-increasing alive counts (always true by construction; checked
    /// on deserialized curves).
    pub fn counts_monotone(&self) -> bool {
        self.alive.as_ref().is_none_or(|a| a.windows(2).all(|w| w[0] >= w[1]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,n,estimate,stderr,ln_estimate,lower,upper,walkers,envs,seed\n");
        let opt = |v: &Option<Vec<f64>>, j: usize| v.as_ref().map(|v| v[j].to_string()).unwrap_or_default();
        for j in 0..self.checkpoints.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                self.measure,
                self.checkpoints[j],
                self.estimate[j],
                self.stderr[j],
                self.ln_estimate[j],
                opt(&self.lower, j),
                opt(&self.upper, j),
                self.walkers,
                self.environments,
                self.seed
            ));
        }
        out
    }
}
