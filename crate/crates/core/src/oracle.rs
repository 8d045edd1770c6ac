//! Exact quenched survival by dynamic programming, with certified brackets,
//! exact exit-time statistics, and environment averaging.
//!
//! The DP propagates the sub-probability vector `v_n(y) = P_σ[ξ_n = y, τ > n]`
//! through `v_{n+1}(y) = (1 − r θ_y) Σ_x v_n(x) ω_x(y − x)`. Mass is kept
//! renormalized (the log of the scale is tracked separately) so curves far
//! below `f64` range stay exact. Two things can lose mass: leaving the
//! largest allowed window, and values falling below the flush floor. Both go
//! to a reservoir that the lower bound treats as dead and the upper bound as
//! surviving forever.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{check_checkpoints, Measure, TailCurve};
use crate::envmodel::{validate_spec, SampledField, SiteField, SiteLawSpec, Window};
use crate::error::{Error, Result};
use crate::potential::{barrier_stats, potential_on, BarrierStats};
use crate::rng::{derive_seed, Stream};

/// Dense arrays above this many sites are refused.
pub const MAX_DP_SITES: u64 = 1 << 24;

/// Window and truncation settings for [`exact_survival`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolicy {
    /// Half-width of the first window (1-d), or of the only window (d ≥ 2).
    pub initial_half_width: u64,
    /// Largest half-width the 1-d window may double to.
    pub max_half_width: u64,
    /// Largest acceptable `1 − lower/upper` at a reported checkpoint.
    pub gap_tol: f64,
    /// Values below `flush × (current maximum)` are moved to the reservoir.
    pub flush: f64,
}

impl Default for BoundaryPolicy {
    fn default() -> Self {
        Self { initial_half_width: 256, max_half_width: 1 << 20, gap_tol: 1e-6, flush: 1e-300 }
    }
}

impl BoundaryPolicy {
    pub fn with_gap_tol(gap_tol: f64) -> Self {
        Self { gap_tol, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if self.initial_half_width == 0 || self.max_half_width < self.initial_half_width {
            return Err(Error::Domain("need 0 < initial_half_width ≤ max_half_width".into()));
        }
        if !(self.gap_tol >= 0.0 && self.gap_tol <= 1.0) || !(self.flush >= 0.0 && self.flush <= 1e-20) {
            return Err(Error::Domain("gap_tol must be in [0,1] and flush at most 1e-20".into()));
        }
        Ok(())
    }
}

/// Certified lower and upper bounds on `P_σ[τ > n]` at each checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalBracket {
    pub checkpoints: Vec<u64>,
    #[serde(deserialize_with = "crate::curve::log_values")]
    pub ln_lower: Vec<f64>,
    #[serde(deserialize_with = "crate::curve::log_values")]
    pub ln_upper: Vec<f64>,
    /// Window in effect at the end of the run.
    pub window: Window,
    pub policy: BoundaryPolicy,
    /// Total mass that left the largest window (log).
    #[serde(deserialize_with = "crate::curve::log_value")]
    pub ln_escaped: f64,
    /// Total mass removed by the flush floor (log).
    #[serde(deserialize_with = "crate::curve::log_value")]
    pub ln_flushed: f64,
    /// Some checkpoint has `1 − lower/upper > gap_tol`.
    pub widened: bool,
}

impl SurvivalBracket {
    pub fn lower(&self) -> Vec<f64> {
        self.ln_lower.iter().map(|x| x.exp()).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.ln_upper.iter().map(|x| x.exp()).collect()
    }

    /// `1 − lower/upper` per checkpoint.
    pub fn gap(&self) -> Vec<f64> {
        self.ln_lower.iter().zip(&self.ln_upper).map(|(l, u)| -(l - u).exp_m1()).collect()
    }

    /// Columns `n,lower,upper,ln_lower,ln_upper,n_envs,seed`.
    pub fn to_csv(&self, seed: Option<u64>) -> String {
        let mut out = String::from("n,lower,upper,ln_lower,ln_upper,n_envs,seed\n");
        let seed = seed.map(|s| s.to_string()).unwrap_or_default();
        for j in 0..self.checkpoints.len() {
            out.push_str(&format!(
                "{},{},{},{},{},1,{}\n",
                self.checkpoints[j],
                self.ln_lower[j].exp(),
                self.ln_upper[j].exp(),
                self.ln_lower[j],
                self.ln_upper[j],
                seed
            ));
        }
        out
    }

    /// Single-environment curve; the point estimate is the lower bound (the
    /// mass retained by the DP).
    pub fn to_curve(&self, seed: u64) -> TailCurve {
        let mut c = TailCurve::from_environment_rows(
            Measure::Quenched,
            self.checkpoints.clone(),
            vec![self.lower()],
            vec![self.upper()],
            seed,
        );
        c.ln_estimate = self.ln_lower.clone();
        c.replicates = crate::curve::Replicates::None;
        c
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Running totals shared by the 1-d and general DP.
struct Ledger {
    ln_scale: f64,
    ln_escaped: f64,
    ln_flushed: f64,
    ln_lower: Vec<f64>,
    ln_upper: Vec<f64>,
}

impl Ledger {
    fn new(k: usize) -> Self {
        Self {
            ln_scale: 0.0,
            ln_escaped: f64::NEG_INFINITY,
            ln_flushed: f64::NEG_INFINITY,
            ln_lower: Vec::with_capacity(k),
            ln_upper: Vec::with_capacity(k),
        }
    }

    fn escape(&mut self, scaled: f64) {
        if scaled > 0.0 {
            self.ln_escaped = log_add(self.ln_escaped, scaled.ln() + self.ln_scale);
        }
    }

    fn flush(&mut self, scaled: f64) {
        if scaled > 0.0 {
            self.ln_flushed = log_add(self.ln_flushed, scaled.ln() + self.ln_scale);
        }
    }

    fn record(&mut self, total: f64) {
        let lower = if total > 0.0 { total.ln() + self.ln_scale } else { f64::NEG_INFINITY };
        self.ln_lower.push(lower);
        self.ln_upper.push(log_add(lower, log_add(self.ln_escaped, self.ln_flushed)));
    }
}

struct Lane<'a, F: ?Sized> {
    field: &'a F,
    r: f64,
    half: i64,
    up: Vec<f64>,
    dn: Vec<f64>,
    keep: Vec<f64>,
    cur: Vec<f64>,
    nxt: Vec<f64>,
    band: (usize, usize),
    nxt_dirty: (usize, usize),
}

impl<'a, F: SiteField + ?Sized> Lane<'a, F> {
    fn new(field: &'a F, r: f64, half: i64) -> Self {
        let mut lane = Self {
            field,
            r,
            half: 0,
            up: Vec::new(),
            dn: Vec::new(),
            keep: Vec::new(),
            cur: Vec::new(),
            nxt: Vec::new(),
            band: (0, 0),
            nxt_dirty: (0, 0),
        };
        lane.resize(half);
        let o = half as usize;
        lane.cur[o] = 1.0;
        lane.band = (o, o);
        lane.nxt_dirty = (o, o);
        lane
    }

    fn keep_at(&self, x: i64) -> f64 {
        if self.field.obstacle_1d(x) {
            1.0 - self.r
        } else {
            1.0
        }
    }

    /// Re-centres the arrays on a window of half-width `half`.
    fn resize(&mut self, half: i64) {
        let len = (2 * half + 1) as usize;
        let shift = (half - self.half) as usize;
        let (mut up, mut dn, mut keep) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for (i, x) in (-half..=half).enumerate() {
            let u = self.field.omega_plus(x);
            up[i] = u;
            dn[i] = 1.0 - u;
            keep[i] = self.keep_at(x);
        }
        let mut cur = vec![0.0; len];
        let mut nxt = vec![0.0; len];
        if !self.cur.is_empty() {
            cur[shift..shift + self.cur.len()].copy_from_slice(&self.cur);
            nxt[shift..shift + self.nxt.len()].copy_from_slice(&self.nxt);
            self.band = (self.band.0 + shift, self.band.1 + shift);
            self.nxt_dirty = (self.nxt_dirty.0 + shift, self.nxt_dirty.1 + shift);
        }
        (self.up, self.dn, self.keep, self.cur, self.nxt) = (up, dn, keep, cur, nxt);
        self.half = half;
    }

    /// One step; returns `(total, max)` of the new scaled vector.
    fn step(&mut self, ledger: &mut Ledger, cap: i64, flush: f64, max_prev: f64) -> (f64, f64) {
        let len = self.cur.len();
        if (self.band.0 == 0 || self.band.1 == len - 1) && self.half < cap {
            self.resize((2 * self.half).min(cap));
        }
        let len = self.cur.len();
        let (a, b) = self.band;
        if a == 0 {
            ledger.escape(self.cur[0] * self.dn[0] * self.keep_at(-self.half - 1));
        }
        if b == len - 1 {
            ledger.escape(self.cur[len - 1] * self.up[len - 1] * self.keep_at(self.half + 1));
        }
        let c = 1.0 / max_prev;
        ledger.ln_scale += max_prev.ln();
        let a2 = a.saturating_sub(1);
        let b2 = (b + 1).min(len - 1);
        let (cur, nxt) = (&self.cur, &mut self.nxt);
        let (up, dn, keep) = (&self.up, &self.dn, &self.keep);
        let mut sums = [[0.0f64; 4]; 3]; // total, max, flushed
        let mut general = |y: usize, nxt: &mut [f64]| {
            let from_left = if y > a && y - 1 <= b { cur[y - 1] * up[y - 1] } else { 0.0 };
            let from_right = if y < b && y + 1 >= a { cur[y + 1] * dn[y + 1] } else { 0.0 };
            let mut w = c * keep[y] * (from_left + from_right);
            if w < flush {
                sums[2][0] += w;
                w = 0.0;
            }
            nxt[y] = w;
            sums[0][0] += w;
            sums[1][0] = sums[1][0].max(w);
        };
        if b <= a + 1 {
            for y in a2..=b2 {
                general(y, nxt);
            }
        } else {
            for y in a2..=a {
                general(y, nxt);
            }
            for y in b..=b2 {
                general(y, nxt);
            }
            // Interior: both neighbours lie in the band. Four independent
            // accumulators let the loop vectorize.
            let (lo, hi) = (a + 1, b);
            let n = hi - lo;
            let left = &cur[lo - 1..hi - 1];
            let upl = &up[lo - 1..hi - 1];
            let right = &cur[lo + 1..hi + 1];
            let dnr = &dn[lo + 1..hi + 1];
            let kp = &keep[lo..hi];
            let out = &mut nxt[lo..hi];
            let (mut tot, mut mx, mut fl) = ([0.0f64; 4], [0.0f64; 4], [0.0f64; 4]);
            let chunks = n / 4;
            for k in 0..chunks {
                for j in 0..4 {
                    let i = 4 * k + j;
                    let w = c * kp[i] * (left[i] * upl[i] + right[i] * dnr[i]);
                    let small = w < flush;
                    fl[j] += if small { w } else { 0.0 };
                    let w = if small { 0.0 } else { w };
                    out[i] = w;
                    tot[j] += w;
                    mx[j] = if w > mx[j] { w } else { mx[j] };
                }
            }
            for i in 4 * chunks..n {
                let w = c * kp[i] * (left[i] * upl[i] + right[i] * dnr[i]);
                let small = w < flush;
                fl[0] += if small { w } else { 0.0 };
                let w = if small { 0.0 } else { w };
                out[i] = w;
                tot[0] += w;
                mx[0] = if w > mx[0] { w } else { mx[0] };
            }
            for j in 0..4 {
                sums[0][j] += tot[j];
                sums[1][j] = sums[1][j].max(mx[j]);
                sums[2][j] += fl[j];
            }
        }
        let total: f64 = sums[0].iter().sum();
        let max = sums[1].iter().fold(0.0f64, |m, &x| m.max(x));
        let flushed: f64 = sums[2].iter().sum();
        let (da, db) = self.nxt_dirty;
        for i in da..a2 {
            nxt[i] = 0.0;
        }
        for i in (b2 + 1)..=db.max(b2) {
            nxt[i] = 0.0;
        }
        ledger.flush(flushed);
        std::mem::swap(&mut self.cur, &mut self.nxt);
        // nxt now holds the previous vector, nonzero only on [a, b].
        self.nxt_dirty = (a, b);
        let (mut lo, mut hi) = (a2, b2);
        while lo < hi && self.cur[lo] == 0.0 {
            lo += 1;
        }
        while hi > lo && self.cur[hi] == 0.0 {
            hi -= 1;
        }
        // Zeros left outside the trimmed band are harmless: they are re-read as 0.
        self.band = (lo, hi);
        (total, max)
    }
}

fn run_1d<F: SiteField + ?Sized>(
    field: &F,
    r: f64,
    checkpoints: &[u64],
    policy: &BoundaryPolicy,
) -> Result<SurvivalBracket> {
    let n_max = *checkpoints.last().unwrap();
    let cap = policy.max_half_width.min(n_max) as i64;
    let half = (policy.initial_half_width as i64).min(cap).max(1);
    if 2 * cap as u64 + 1 > MAX_DP_SITES {
        return Err(Error::Resource(format!("1-d window of half-width {cap} exceeds the DP cap")));
    }
    let mut lane = Lane::new(field, r, half);
    let mut ledger = Ledger::new(checkpoints.len());
    let mut next = 0;
    let mut max_prev = 1.0;
    let mut total = 1.0;
    for t in 1..=n_max {
        if max_prev > 0.0 {
            (total, max_prev) = lane.step(&mut ledger, cap, policy.flush, max_prev);
        }
        if t == checkpoints[next] {
            ledger.record(total);
            next += 1;
        }
    }
    Ok(finish(checkpoints, ledger, Window::line(-lane.half, lane.half), policy))
}

fn finish(checkpoints: &[u64], l: Ledger, window: Window, policy: &BoundaryPolicy) -> SurvivalBracket {
    let mut b = SurvivalBracket {
        checkpoints: checkpoints.to_vec(),
        ln_lower: l.ln_lower,
        ln_upper: l.ln_upper,
        window,
        policy: policy.clone(),
        ln_escaped: l.ln_escaped,
        ln_flushed: l.ln_flushed,
        widened: false,
    };
    b.widened = b.gap().iter().any(|&g| g > policy.gap_tol);
    b
}

/// Dense DP on the fixed cube `[−L, L]^d`, `L = min(initial_half_width, n_max)`.
fn run_dense<F: SiteField + ?Sized>(
    field: &F,
    r: f64,
    checkpoints: &[u64],
    policy: &BoundaryPolicy,
) -> Result<SurvivalBracket> {
    let d = field.dim();
    let n_max = *checkpoints.last().unwrap();
    let half = (policy.initial_half_width.min(n_max)) as i64;
    let window = Window::cube(d, half);
    let vol = window.volume();
    if vol * (2 * d as u128 + 3) > MAX_DP_SITES as u128 * 4 {
        return Err(Error::Resource(format!("{d}-d window with {vol} sites exceeds the DP cap")));
    }
    let n = vol as usize;
    let side = (2 * half + 1) as usize;
    let mut strides = vec![1usize; d];
    for k in (0..d - 1).rev() {
        strides[k] = strides[k + 1] * side;
    }
    let mut moves = Vec::with_capacity(n * 2 * d);
    let mut keep = Vec::with_capacity(n);
    for idx in 0..n {
        let x = window.point(idx);
        moves.extend_from_slice(field.moves(&x));
        keep.push(if field.obstacle(&x) { 1.0 - r } else { 1.0 });
    }
    let keep_at = |x: &[i64]| if field.obstacle(x) { 1.0 - r } else { 1.0 };
    let mut cur = vec![0.0; n];
    let mut nxt = vec![0.0; n];
    let origin = window.index_of(&vec![0; d]).unwrap();
    cur[origin] = 1.0;
    let mut ledger = Ledger::new(checkpoints.len());
    let (mut next, mut max_prev, mut total) = (0, 1.0f64, 1.0f64);
    let mut x = vec![0i64; d];
    for t in 1..=n_max {
        if max_prev > 0.0 {
            let c = 1.0 / max_prev;
            let prev = (t as i64 - 1).min(half);
            for v in nxt.iter_mut() {
                *v = 0.0;
            }
            let mut escaped = 0.0;
            for idx in 0..n {
                let m = cur[idx];
                if m == 0.0 {
                    continue;
                }
                let mut rem = idx;
                for k in 0..d {
                    x[k] = (rem / strides[k]) as i64 - half;
                    rem %= strides[k];
                }
                if x.iter().any(|c| c.abs() > prev) {
                    continue;
                }
                for k in 0..d {
                    for (s, sign) in [(0usize, 1i64), (1, -1)] {
                        let q = moves[idx * 2 * d + 2 * k + s];
                        let y = x[k] + sign;
                        if y.abs() > half {
                            x[k] = y;
                            escaped += m * q * keep_at(&x);
                            x[k] -= sign;
                        } else if sign > 0 {
                            nxt[idx + strides[k]] += m * q;
                        } else {
                            nxt[idx - strides[k]] += m * q;
                        }
                    }
                }
            }
            ledger.escape(escaped);
            ledger.ln_scale += max_prev.ln();
            let (mut tot, mut mx, mut flushed) = (0.0f64, 0.0f64, 0.0f64);
            for idx in 0..n {
                let mut w = c * keep[idx] * nxt[idx];
                if w != 0.0 && w < policy.flush {
                    flushed += w;
                    w = 0.0;
                }
                nxt[idx] = w;
                tot += w;
                mx = mx.max(w);
            }
            ledger.flush(flushed);
            std::mem::swap(&mut cur, &mut nxt);
            total = tot;
            max_prev = mx;
        }
        if t == checkpoints[next] {
            ledger.record(total);
            next += 1;
        }
    }
    Ok(finish(checkpoints, ledger, window, policy))
}

/// Bracket on `P_σ[τ > n]` at each checkpoint for killing probability `r`.
///
/// In one dimension the window starts at `initial_half_width` and doubles
/// whenever mass reaches its edge, up to `max_half_width`; mass stepping out
/// of the largest window is escaped. In higher dimensions a single dense cube
/// of half-width `initial_half_width` is used.
pub fn exact_survival<F: SiteField + ?Sized>(
    field: &F,
    r: f64,
    checkpoints: &[u64],
    policy: &BoundaryPolicy,
) -> Result<SurvivalBracket> {
    check_checkpoints(checkpoints)?;
    policy.check()?;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("killing probability {r} not in (0,1)")));
    }
    if field.dim() == 1 {
        run_1d(field, r, checkpoints, policy)
    } else {
        run_dense(field, r, checkpoints, policy)
    }
}

/// Annealed curve: exact brackets averaged over `n_envs` environments drawn
/// from `spec` at density `p`. Environment `i` uses seed
/// `derive_seed(seed, Environment, i)`.
pub fn annealed_survival(
    spec: &SiteLawSpec,
    p: f64,
    r: f64,
    checkpoints: &[u64],
    n_envs: u64,
    seed: u64,
    policy: &BoundaryPolicy,
) -> Result<TailCurve> {
    check_checkpoints(checkpoints)?;
    if n_envs == 0 {
        return Err(Error::Domain("n_envs must be positive".into()));
    }
    let spec = if spec.independent { spec.with_density(p)? } else { spec.clone() };
    let report = validate_spec(&spec)?;
    if !report.passes() {
        return Err(Error::Domain(format!("spec fails its standing assumptions: {}", report.messages.join("; "))));
    }
    let spec = Arc::new(spec);
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..n_envs)
        .into_par_iter()
        .map(|i| {
            let field = SampledField::new(spec.clone(), derive_seed(seed, Stream::Environment, i));
            let b = exact_survival(&field, r, checkpoints, policy)?;
            Ok((b.lower(), b.upper()))
        })
        .collect();
    let mut lower = Vec::with_capacity(rows.len());
    let mut upper = Vec::with_capacity(rows.len());
    for row in rows {
        let (l, u) = row?;
        lower.push(l);
        upper.push(u);
    }
    Ok(TailCurve::from_environment_rows(Measure::Annealed, checkpoints.to_vec(), lower, upper, seed))
}

/// Exit statistics of the interval `(a, c)` for the walk without killing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeStats {
    pub interval: (i64, i64),
    pub x_start: i64,
    /// `E_x[T]`, `T` the first time the walk hits `{a, c}`.
    pub expected_exit_time: f64,
    pub t_grid: Vec<u64>,
    /// `P_x[T > t]` on `t_grid`.
    pub tail: Vec<f64>,
    pub barrier: BarrierStats,
}

fn check_interval(interval: (i64, i64), x_start: i64) -> Result<()> {
    let (a, c) = interval;
    if !(a < x_start && x_start < c) {
        return Err(Error::Domain(format!("start {x_start} not strictly inside [{a}, {c}]")));
    }
    if (c - a) as u64 > MAX_DP_SITES {
        return Err(Error::Resource(format!("interval [{a}, {c}] too long")));
    }
    Ok(())
}

/// `E_x[T]` for every interior `x` of `(a, c)`, by a tridiagonal solve of `(I − Q) u = 1`.
pub fn expected_exit_times<F: SiteField + ?Sized>(field: &F, interval: (i64, i64)) -> Result<Vec<f64>> {
    let (a, c) = interval;
    if c - a < 2 {
        return Err(Error::Domain(format!("interval [{a}, {c}] has no interior")));
    }
    let m = (c - a - 1) as usize;
    // Row i: −ω⁻ u_{i−1} + u_i − ω⁺ u_{i+1} = 1.
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for i in 0..m {
        let up = field.omega_plus(a + 1 + i as i64);
        let lower = -(1.0 - up);
        let upper = -up;
        let denom = 1.0 - if i > 0 { lower * cp[i - 1] } else { 0.0 };
        if !(denom.abs() > 1e-300) {
            return Err(Error::Consistency("singular exit-time system".into()));
        }
        cp[i] = upper / denom;
        dp[i] = (1.0 - if i > 0 { lower * dp[i - 1] } else { 0.0 }) / denom;
    }
    let mut u = vec![0.0; m];
    u[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        u[i] = dp[i] - cp[i] * u[i + 1];
    }
    Ok(u)
}

/// `P_x[T > t]` for `t = 0..=t_max`, by iterating `u_{t+1} = Q u_t` from `u_0 = 1`.
pub fn exit_tail_curve<F: SiteField + ?Sized>(
    field: &F,
    interval: (i64, i64),
    x_start: i64,
    t_max: u64,
) -> Result<Vec<f64>> {
    check_interval(interval, x_start)?;
    let (a, c) = interval;
    let m = (c - a - 1) as usize;
    let up: Vec<f64> = (0..m).map(|i| field.omega_plus(a + 1 + i as i64)).collect();
    let mut u = vec![1.0; m + 2];
    u[0] = 0.0;
    u[m + 1] = 0.0;
    let mut w = u.clone();
    let s = (x_start - a) as usize;
    let mut out = Vec::with_capacity(t_max as usize + 1);
    out.push(1.0);
    for _ in 0..t_max {
        for i in 1..=m {
            let q = up[i - 1];
            w[i] = q * u[i + 1] + (1.0 - q) * u[i - 1];
        }
        std::mem::swap(&mut u, &mut w);
        out.push(u[s]);
    }
    Ok(out)
}

pub fn exit_time_stats<F: SiteField + ?Sized>(
    field: &F,
    interval: (i64, i64),
    x_start: i64,
    t_grid: &[u64],
) -> Result<ExitTimeStats> {
    check_interval(interval, x_start)?;
    if t_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("t_grid must be non-decreasing".into()));
    }
    let (a, c) = interval;
    let times = expected_exit_times(field, interval)?;
    let t_max = t_grid.last().copied().unwrap_or(0);
    let curve = exit_tail_curve(field, interval, x_start, t_max)?;
    let profile = potential_on(field, a, c)?;
    Ok(ExitTimeStats {
        interval,
        x_start,
        expected_exit_time: times[(x_start - a - 1) as usize],
        t_grid: t_grid.to_vec(),
        tail: t_grid.iter().map(|&t| curve[t as usize]).collect(),
        barrier: barrier_stats(&profile, interval)?,
    })
}
