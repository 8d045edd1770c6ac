//! Empirical tail exponents, parametric shape fits, and verdicts against theory.

use serde::{Deserialize, Serialize};

use crate::curve::TailCurve;
use crate::error::{Error, Result};
use crate::optimize::golden_min;
use crate::rng::{stream_rng, Stream};

/// Fewer usable checkpoints than this give an inconclusive fit.
pub const MIN_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    LoglogSlope,
    DoubleLogRatio,
}

/// Inclusive range of checkpoint times used by a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub n_lo: u64,
    pub n_hi: u64,
}

impl FitWindow {
    pub fn new(n_lo: u64, n_hi: u64) -> Self {
        Self { n_lo, n_hi }
    }

    /// Upper half of the window on a logarithmic scale.
    pub fn upper_half(&self) -> Self {
        let mid = ((self.n_lo as f64).ln() + (self.n_hi as f64).ln()) / 2.0;
        Self { n_lo: mid.exp().round() as u64, n_hi: self.n_hi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub replicas: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self { replicas: 200, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl VerdictStatus {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(self) -> i32 {
        match self {
            VerdictStatus::Pass => 0,
            VerdictStatus::Fail => 2,
            VerdictStatus::Inconclusive => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub theory: f64,
    pub tolerance: f64,
}

/// Pass when the point estimate is within `tolerance` of `theory`; fail when
/// the whole interval lies outside that band; otherwise (or without an
/// estimate) inconclusive.
pub fn verdict(theory: f64, estimate: Option<f64>, ci: Option<(f64, f64)>, tolerance: f64) -> Verdict {
    let status = match estimate {
        None => VerdictStatus::Inconclusive,
        Some(e) if !e.is_finite() => VerdictStatus::Inconclusive,
        Some(e) if (e - theory).abs() <= tolerance => VerdictStatus::Pass,
        Some(e) => {
            let (lo, hi) = ci.unwrap_or((e, e));
            if hi < theory - tolerance || lo > theory + tolerance {
                VerdictStatus::Fail
            } else {
                VerdictStatus::Inconclusive
            }
        }
    };
    Verdict { status, theory, tolerance }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub points: usize,
    pub rms: f64,
    pub max_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub kind: EstimatorKind,
    pub window: FitWindow,
    /// Regression slope; `None` when too few checkpoints are usable.
    pub estimate: Option<f64>,
    pub intercept: Option<f64>,
    /// 95% percentile bootstrap interval, widened to contain the estimate.
    pub ci: Option<(f64, f64)>,
    /// `ln(−ln P(n))/ln n` at the last usable checkpoint (double-log only).
    pub pointwise_ratio: Option<f64>,
    pub residuals: Option<Residuals>,
    /// `(n, observed, fitted)` on the regression scale.
    pub table: Vec<(u64, f64, f64)>,
    pub bootstrap_replicas: usize,
    /// Why the fit is inconclusive or suspicious, if it is.
    pub note: Option<String>,
    pub verdict: Option<Verdict>,
}

impl ExponentFit {
    pub fn judge(&mut self, theory: f64, tolerance: f64) -> &Verdict {
        self.verdict = Some(verdict(theory, self.estimate, self.ci, tolerance));
        if self.note.is_some() {
            if let Some(v) = &mut self.verdict {
                if v.status == VerdictStatus::Pass {
                    v.status = VerdictStatus::Inconclusive;
                }
            }
        }
        self.verdict.as_ref().unwrap()
    }

    /// Columns `n,fitted,observed,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,fitted,observed,residual\n");
        for &(n, obs, fit) in &self.table {
            out.push_str(&format!("{n},{fit},{obs},{}\n", obs - fit));
        }
        out
    }
}

/// Weighted least squares `y = a + b x`; returns `(a, b)`.
fn wls(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    if x.len() < 2 || !(sw > 0.0) {
        return None;
    }
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

fn residuals(x: &[f64], y: &[f64], (a, b): (f64, f64)) -> Residuals {
    let r: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi - (a + b * xi)).collect();
    Residuals {
        points: r.len(),
        rms: (r.iter().map(|e| e * e).sum::<f64>() / r.len() as f64).sqrt(),
        max_abs: r.iter().fold(0.0, |m, e| m.max(e.abs())),
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

struct Design {
    idx: Vec<usize>,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

/// Generic estimator over usable checkpoints. `transform` maps a log-survival
/// value to the regression ordinate (or `None` if unusable), `weight` gives
/// the inverse variance from `(ln P, P, stderr)`.
fn estimate_slope(
    curve: &TailCurve,
    window: FitWindow,
    boot: &Bootstrap,
    kind: EstimatorKind,
    usable: impl Fn(usize) -> std::result::Result<bool, String>,
    transform: impl Fn(f64) -> Option<f64>,
    weight: impl Fn(f64, f64, f64) -> f64,
) -> ExponentFit {
    let mut fit = ExponentFit {
        kind,
        window,
        estimate: None,
        intercept: None,
        ci: None,
        pointwise_ratio: None,
        residuals: None,
        table: Vec::new(),
        bootstrap_replicas: 0,
        note: None,
        verdict: None,
    };
    let mut d = Design { idx: vec![], x: vec![], y: vec![], w: vec![] };
    for (j, &n) in curve.checkpoints.iter().enumerate() {
        if n < window.n_lo || n > window.n_hi {
            continue;
        }
        match usable(j) {
            Ok(true) => {}
            Ok(false) => continue,
            Err(msg) => {
                fit.note = Some(msg);
                return fit;
            }
        }
        let Some(y) = transform(curve.ln_estimate[j]) else { continue };
        d.idx.push(j);
        d.x.push((n as f64).ln());
        d.y.push(y);
        d.w.push(weight(curve.ln_estimate[j], curve.estimate[j], curve.stderr[j]));
    }
    if d.idx.len() < MIN_POINTS {
        fit.note = Some(format!("only {} usable checkpoints in window (need {MIN_POINTS})", d.idx.len()));
        return fit;
    }
    if d.w.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        d.w.iter_mut().for_each(|w| *w = 1.0);
    }
    let Some((a, b)) = wls(&d.x, &d.y, &d.w) else {
        fit.note = Some("degenerate regression".into());
        return fit;
    };
    fit.estimate = Some(b);
    fit.intercept = Some(a);
    fit.residuals = Some(residuals(&d.x, &d.y, (a, b)));
    fit.table = d.idx.iter().zip(&d.x).zip(&d.y).map(|((&j, x), y)| (curve.checkpoints[j], *y, a + b * x)).collect();
    let mut reps = Vec::with_capacity(boot.replicas);
    for r in 0..boot.replicas {
        let Some(ln) = curve.bootstrap_ln(&mut stream_rng(boot.seed, Stream::Bootstrap, r as u64)) else { break };
        let ys: Option<Vec<f64>> = d.idx.iter().map(|&j| transform(ln[j])).collect();
        if let Some((_, s)) = ys.and_then(|ys| wls(&d.x, &ys, &d.w)) {
            reps.push(s);
        }
    }
    fit.bootstrap_replicas = reps.len();
    let (lo, hi) = if reps.len() >= 20 {
        reps.sort_by(|p, q| p.total_cmp(q));
        (percentile(&reps, 0.025), percentile(&reps, 0.975))
    } else {
        (b, b)
    };
    fit.ci = Some((lo.min(b), hi.max(b)));
    fit
}

/// Slope of `ln P` against `ln n`. Checkpoints with `P ≤ 10·stderr` are skipped.
pub fn loglog_slope(curve: &TailCurve, window: FitWindow, boot: &Bootstrap) -> ExponentFit {
    let mut fit = estimate_slope(
        curve,
        window,
        boot,
        EstimatorKind::LoglogSlope,
        |j| Ok(curve.ln_estimate[j].is_finite() && (curve.stderr[j] == 0.0 || curve.estimate[j] > 10.0 * curve.stderr[j])),
        |ln| ln.is_finite().then_some(ln),
        |_, p, se| (p / se).powi(2),
    );
    if let Some(s) = fit.estimate {
        if s >= 0.0 && fit.note.is_none() {
            fit.note = Some(format!("non-negative slope {s}"));
        }
    }
    fit
}

/// Slope of `ln(−ln P)` against `ln n`, plus the pointwise ratio at the last
/// usable checkpoint. Any checkpoint in the window with `P ∈ {0, 1}` makes the
/// fit inconclusive.
pub fn double_log_exponent(curve: &TailCurve, window: FitWindow, boot: &Bootstrap) -> ExponentFit {
    let mut fit = estimate_slope(
        curve,
        window,
        boot,
        EstimatorKind::DoubleLogRatio,
        |j| {
            let ln = curve.ln_estimate[j];
            if ln.is_finite() && ln < 0.0 {
                Ok(true)
            } else {
                Err(format!("estimate {} at n = {} is not strictly inside (0,1)", ln.exp(), curve.checkpoints[j]))
            }
        },
        |ln| (ln.is_finite() && ln < 0.0).then(|| (-ln).ln()),
        |ln, p, se| (p * ln / se).powi(2),
    );
    if let Some(&(n, y, _)) = fit.table.last() {
        fit.pointwise_ratio = Some(y / (n as f64).ln());
    }
    fit
}

/// Least-squares slopes over sliding runs of `span` usable checkpoints.
pub fn local_slopes(curve: &TailCurve, window: FitWindow, span: usize, double_log: bool) -> Vec<(u64, u64, f64)> {
    let pts: Vec<(u64, f64, f64)> = curve
        .checkpoints
        .iter()
        .zip(&curve.ln_estimate)
        .filter(|(n, ln)| **n >= window.n_lo && **n <= window.n_hi && ln.is_finite() && (!double_log || **ln < 0.0))
        .map(|(&n, &ln)| (n, (n as f64).ln(), if double_log { (-ln).ln() } else { ln }))
        .collect();
    if span < 2 || pts.len() < span {
        return vec![];
    }
    pts.windows(span)
        .filter_map(|w| {
            let x: Vec<f64> = w.iter().map(|p| p.1).collect();
            let y: Vec<f64> = w.iter().map(|p| p.2).collect();
            wls(&x, &y, &vec![1.0; span]).map(|(_, s)| (w[0].0, w[span - 1].0, s))
        })
        .collect()
}

/// Parametric families for `ln P(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Shape {
    /// `C n^{−a}`.
    Power,
    /// `C e^{−k n}`.
    Exponential,
    /// `C exp(−K n^β)`, `β ∈ (0, 1]`.
    Stretched,
    /// `C exp(−K ln^d n)`.
    LogPower { d: u32 },
    /// `exp(−K₁ n exp(−K₂ ln^{1/d} n))`.
    QuenchedD { d: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    pub shape: Shape,
    pub window: FitWindow,
    /// Named parameters of the family.
    pub params: Vec<(String, f64)>,
    /// Root-mean-square residual of `ln P`.
    pub residual_norm: f64,
    pub points: usize,
    /// Bootstrap 95% intervals, one per parameter, when replicates exist.
    pub param_ci: Option<Vec<(f64, f64)>>,
}

impl FittedConstants {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

fn fit_shape(shape: Shape, n: &[f64], ln_p: &[f64]) -> Result<(Vec<(String, f64)>, Vec<f64>)> {
    let ones = vec![1.0; n.len()];
    let linear = |feature: &dyn Fn(f64) -> f64| -> Option<(f64, f64, Vec<f64>)> {
        let x: Vec<f64> = n.iter().map(|&v| feature(v)).collect();
        let (a, b) = wls(&x, ln_p, &ones)?;
        let fitted = x.iter().map(|xi| a + b * xi).collect();
        Some((a, -b, fitted))
    };
    let named = |pairs: &[(&str, f64)]| pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect::<Vec<_>>();
    let fail = || Error::Consistency(format!("{shape:?} fit is degenerate on this window"));
    match shape {
        Shape::Power => {
            let (c, a, f) = linear(&|v| v.ln()).ok_or_else(fail)?;
            Ok((named(&[("C", c.exp()), ("a", a)]), f))
        }
        Shape::Exponential => {
            let (c, k, f) = linear(&|v| v).ok_or_else(fail)?;
            Ok((named(&[("C", c.exp()), ("k", k)]), f))
        }
        Shape::LogPower { d } => {
            let (c, k, f) = linear(&|v| v.ln().powi(d as i32)).ok_or_else(fail)?;
            Ok((named(&[("C", c.exp()), ("K", k)]), f))
        }
        Shape::Stretched => {
            let rss = |beta: f64| match linear(&|v| v.powf(beta)) {
                Some((_, _, f)) => f.iter().zip(ln_p).map(|(a, b)| (a - b).powi(2)).sum(),
                None => f64::INFINITY,
            };
            // Coarse grid, then golden refinement around the best cell.
            let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
            let best = grid.iter().copied().min_by(|a, b| rss(*a).total_cmp(&rss(*b))).unwrap();
            let (beta, value) = golden_min(rss, (best - 0.01).max(1e-4), (best + 0.01).min(1.0), 1e-10);
            if !value.is_finite() {
                return Err(Error::Consistency(format!(
                    "stretched fit did not converge (residual trace: {:?})",
                    grid.iter().map(|&b| rss(b)).collect::<Vec<_>>()
                )));
            }
            let (c, k, f) = linear(&|v| v.powf(beta)).ok_or_else(fail)?;
            Ok((named(&[("C", c.exp()), ("K", k), ("beta", beta)]), f))
        }
        Shape::QuenchedD { d } => {
            // ln(−ln P) − ln n = ln K₁ − K₂ ln^{1/d} n
            if ln_p.iter().any(|&l| !(l < 0.0)) {
                return Err(Error::Consistency("quenched shape needs P < 1 on the window".into()));
            }
            let x: Vec<f64> = n.iter().map(|v| v.ln().powf(1.0 / d as f64)).collect();
            let y: Vec<f64> = n.iter().zip(ln_p).map(|(v, l)| (-l).ln() - v.ln()).collect();
            let (a, b) = wls(&x, &y, &ones).ok_or_else(fail)?;
            let (k1, k2) = (a.exp(), -b);
            let f = n.iter().map(|&v| -k1 * v * (-k2 * v.ln().powf(1.0 / d as f64)).exp()).collect();
            Ok((named(&[("K1", k1), ("K2", k2)]), f))
        }
    }
}

/// Least-squares fit of a parametric family to `ln P` on the window. The
/// constants are descriptive; no verdict is attached.
pub fn fit_constants(curve: &TailCurve, shape: Shape, window: FitWindow, boot: &Bootstrap) -> Result<FittedConstants> {
    let idx: Vec<usize> = (0..curve.checkpoints.len())
        .filter(|&j| {
            let n = curve.checkpoints[j];
            n >= window.n_lo && n <= window.n_hi && curve.ln_estimate[j].is_finite()
        })
        .collect();
    if idx.len() < 3 {
        return Err(Error::Consistency(format!("only {} usable checkpoints for {shape:?}", idx.len())));
    }
    let n: Vec<f64> = idx.iter().map(|&j| curve.checkpoints[j] as f64).collect();
    let ln_p: Vec<f64> = idx.iter().map(|&j| curve.ln_estimate[j]).collect();
    let (params, fitted) = fit_shape(shape, &n, &ln_p)?;
    let rss: f64 = fitted.iter().zip(&ln_p).map(|(a, b)| (a - b).powi(2)).sum();
    let mut draws: Vec<Vec<f64>> = vec![Vec::new(); params.len()];
    for r in 0..boot.replicas {
        let Some(ln) = curve.bootstrap_ln(&mut stream_rng(boot.seed, Stream::Bootstrap, r as u64)) else { break };
        let ys: Vec<f64> = idx.iter().map(|&j| ln[j]).collect();
        if ys.iter().any(|y| !y.is_finite()) {
            continue;
        }
        if let Ok((p, _)) = fit_shape(shape, &n, &ys) {
            for (k, (_, v)) in p.iter().enumerate() {
                draws[k].push(*v);
            }
        }
    }
    let param_ci = (draws[0].len() >= 20).then(|| {
        draws
            .iter_mut()
            .zip(&params)
            .map(|(d, (_, v))| {
                d.sort_by(|a, b| a.total_cmp(b));
                (percentile(d, 0.025).min(*v), percentile(d, 0.975).max(*v))
            })
            .collect()
    });
    Ok(FittedConstants {
        shape,
        window,
        params,
        residual_norm: (rss / idx.len() as f64).sqrt(),
        points: idx.len(),
        param_ci,
    })
}
