//! Theoretical tail exponents of the one-dimensional walk.
//!
//! Everything here is a function of the finite law of `ln ρ₀`, so moments
//! `E ρ₀^{±λ}` are exact finite sums (evaluated in log space), the roots
//! `κ_ℓ, κ_r, κ` are found by bracketing and bisection on a convex function,
//! and the Legendre-type suprema inside `ψ` maximize a concave function.

use num::integer::lcm;
use num::{BigUint, One};
use serde::{Deserialize, Serialize};

use crate::envmodel::{beta_extremes, SiteLawSpec};
use crate::error::{Error, Result};
use crate::optimize::{bisect_increasing, golden_max, golden_min};

const LAMBDA_CAP: f64 = 1e8;
const SINAI_TOL: f64 = 1e-14;
const PSI_TILDE_REL_TOL: f64 = 1e-6;
const FIXED_POINT_TOL: f64 = 1e-9;

/// `Right` refers to moments of `ρ₀`, `Left` to moments of `1/ρ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Right => "right",
            Direction::Left => "left",
        })
    }
}

/// Finite law of `ln ρ₀` as `(weight, ln ρ)` pairs.
#[derive(Clone, Debug)]
pub struct RhoLaw {
    atoms: Vec<(f64, f64)>,
}

/// Value of `sup_{λ>0} {λh − b ln E ρ^{±λ}}` and where it is reached
/// (`None` when approached only as `λ → ∞`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Supremum {
    pub value: f64,
    pub argmax: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaRoot {
    pub value: f64,
    /// `|E ρ^{±κ} − 1/(1−p)|`.
    pub residual: f64,
}

impl RhoLaw {
    pub fn from_spec(spec: &SiteLawSpec) -> Result<Self> {
        let atoms = spec
            .omega_law_1d()?
            .into_iter()
            .map(|(w, up)| (w, ((1.0 - up) / up).ln()))
            .collect();
        Ok(Self { atoms })
    }

    pub fn mean_log(&self, dir: Direction) -> f64 {
        dir.sign() * self.atoms.iter().map(|&(w, l)| w * l).sum::<f64>()
    }

    /// Largest value of `±ln ρ` and its total weight.
    fn top(&self, dir: Direction) -> (f64, f64) {
        let s = dir.sign();
        let lmax = self.atoms.iter().map(|&(_, l)| s * l).fold(f64::NEG_INFINITY, f64::max);
        let w = self.atoms.iter().filter(|&&(_, l)| s * l == lmax).map(|&(w, _)| w).sum();
        (lmax, w)
    }

    /// `ln E ρ^{±λ}`.
    pub fn log_moment(&self, lambda: f64, dir: Direction) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let s = dir.sign() * lambda;
        let m = self.atoms.iter().map(|&(_, l)| s * l).fold(f64::NEG_INFINITY, f64::max);
        m + self.atoms.iter().map(|&(w, l)| w * (s * l - m).exp()).sum::<f64>().ln()
    }

    /// Derivative of `log_moment` in `λ`.
    pub fn log_moment_slope(&self, lambda: f64, dir: Direction) -> f64 {
        let sg = dir.sign();
        let s = sg * lambda;
        let m = self.atoms.iter().map(|&(_, l)| s * l).fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for &(w, l) in &self.atoms {
            let e = w * (s * l - m).exp();
            num += e * sg * l;
            den += e;
        }
        num / den
    }

    /// Positive root of `E ρ^{±λ} = 1/(1−p_eff)`.
    pub fn kappa(&self, p_eff: f64, dir: Direction) -> Result<KappaRoot> {
        if !(0.0..1.0).contains(&p_eff) {
            return Err(Error::Domain(format!("effective density {p_eff} not in [0,1)")));
        }
        let target = -(1.0 - p_eff).ln();
        let (lmax, _) = self.top(dir);
        if lmax <= 0.0 {
            return Err(Error::NoRoot(format!(
                "E ρ^λ stays bounded in the {dir} direction: no atom on the {} side of 1/2 \
                 (nestling fails)",
                if dir == Direction::Right { "lower" } else { "upper" }
            )));
        }
        let lo = if target > 0.0 {
            0.0
        } else {
            if self.mean_log(dir) >= 0.0 {
                return Err(Error::NoRoot(format!(
                    "E ln ρ^(±1) ≥ 0 in the {dir} direction: E ρ^λ = 1 has no positive root"
                )));
            }
            let mut hi = 1.0;
            while self.log_moment_slope(hi, dir) <= 0.0 {
                hi *= 2.0;
                if hi > LAMBDA_CAP {
                    return Err(Error::NoRoot(format!("minimum of ln E ρ^λ beyond λ = {LAMBDA_CAP}")));
                }
            }
            bisect_increasing(|l| self.log_moment_slope(l, dir), 0.0, hi)
        };
        let g = |l: f64| self.log_moment(l, dir) - target;
        let mut hi = lo.max(1.0);
        while g(hi) < 0.0 {
            hi *= 2.0;
            if hi > LAMBDA_CAP {
                return Err(Error::NoRoot(format!("no bracket for the root below λ = {LAMBDA_CAP}")));
            }
        }
        let value = bisect_increasing(g, lo, hi);
        let residual = (self.log_moment(value, dir).exp() - 1.0 / (1.0 - p_eff)).abs();
        Ok(KappaRoot { value, residual })
    }

    /// `sup_{λ>0} {λh − b ln E ρ^{±λ}}` for `b > 0`.
    pub fn legendre_sup(&self, h: f64, b: f64, dir: Direction) -> Result<Supremum> {
        let slope = |l: f64| h - b * self.log_moment_slope(l, dir);
        if slope(0.0) <= 0.0 {
            return Ok(Supremum { value: 0.0, argmax: Some(0.0) });
        }
        let (lmax, wmax) = self.top(dir);
        let limit = b * lmax;
        if (h - limit).abs() <= 1e-14 * h.abs().max(1.0) {
            return Ok(Supremum { value: -b * wmax.ln(), argmax: None });
        }
        if h > limit {
            return Ok(Supremum { value: f64::INFINITY, argmax: None });
        }
        let objective = |l: f64| l * h - b * self.log_moment(l, dir);
        let mut hi = 1.0;
        while slope(hi) > 0.0 {
            hi *= 2.0;
            if hi > LAMBDA_CAP {
                return Err(Error::Consistency(format!(
                    "objective still increasing at λ = {LAMBDA_CAP} (h = {h}, b = {b})"
                )));
            }
        }
        let (x, value) = golden_max(objective, 0.0, hi, 1e-10);
        let probe = 1e-6 * hi.max(1.0);
        if slope((x - probe).max(0.0)) < -1e-7 || slope(x + probe) > 1e-7 {
            return Err(Error::Consistency(format!(
                "derivative does not change sign at the located maximum λ = {x}"
            )));
        }
        Ok(Supremum { value, argmax: Some(x) })
    }
}

/// `E ρ₀^λ` (right) or `E ρ₀^{−λ}` (left).
pub fn moment(spec: &SiteLawSpec, lambda: f64, dir: Direction) -> Result<f64> {
    let lm = RhoLaw::from_spec(spec)?.log_moment(lambda, dir);
    if lm > f64::MAX.ln() {
        return Err(Error::Range(format!(
            "moment overflows at λ = {lambda} (log-moment {lm}); use log_moment"
        )));
    }
    Ok(lm.exp())
}

pub fn log_moment(spec: &SiteLawSpec, lambda: f64, dir: Direction) -> Result<f64> {
    Ok(RhoLaw::from_spec(spec)?.log_moment(lambda, dir))
}

pub fn kappa(spec: &SiteLawSpec, p_effective: f64, dir: Direction) -> Result<f64> {
    Ok(kappa_root(spec, p_effective, dir)?.value)
}

pub fn kappa_root(spec: &SiteLawSpec, p_effective: f64, dir: Direction) -> Result<KappaRoot> {
    RhoLaw::from_spec(spec)?.kappa(p_effective, dir)
}

/// `ψ(h, b₁, b₂)`; `+∞` when a supremum diverges.
pub fn psi(spec: &SiteLawSpec, h: f64, b1: f64, b2: f64) -> Result<f64> {
    if !(h > 0.0 && b1 > 0.0 && b2 > 0.0) {
        return Err(Error::Domain(format!("psi needs h, b1, b2 > 0 (got {h}, {b1}, {b2})")));
    }
    let law = RhoLaw::from_spec(spec)?;
    Ok(law.legendre_sup(h, b2, Direction::Right)?.value
        + law.legendre_sup(h, b1, Direction::Left)?.value)
}

/// Decay exponents of the trap events at the origin: `P[Λ⁰] ≈ n^{lambda_exponent}`
/// and `P[A⁰] ≈ n^{free_exponent}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapRates {
    pub psi: f64,
    pub lambda_exponent: f64,
    pub free_exponent: f64,
}

pub fn trap_rates(spec: &SiteLawSpec, p: f64, h: f64, b1: f64, b2: f64) -> Result<TrapRates> {
    let psi = psi(spec, h, b1, b2)?;
    Ok(TrapRates { psi, lambda_exponent: -psi, free_exponent: (b1 + b2) * (1.0 - p).ln() - psi })
}

/// `ψ̃(h)` both as `(κ_ℓ + κ_r) h` and by direct minimization over `(b₁, b₂)`,
/// with the minimizing extents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiTilde {
    pub closed_form: f64,
    pub numeric: f64,
    pub b1: f64,
    pub b2: f64,
}

pub fn psi_tilde(spec: &SiteLawSpec, p: f64, h: f64) -> Result<PsiTilde> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p = {p} not in (0,1)")));
    }
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("h = {h} must be non-negative")));
    }
    if h == 0.0 {
        return Ok(PsiTilde { closed_form: 0.0, numeric: 0.0, b1: 0.0, b2: 0.0 });
    }
    let law = RhoLaw::from_spec(spec)?;
    let obstacle_cost = -(1.0 - p).ln();
    let mut parts = [(0.0, 0.0, 0.0); 2]; // (kappa, numeric value, optimal b)
    for (slot, dir) in [Direction::Left, Direction::Right].into_iter().enumerate() {
        let k = law.kappa(p, dir)?.value;
        let b_star = h / law.log_moment_slope(k, dir);
        let cost = |b: f64| match law.legendre_sup(h, b, dir) {
            Ok(s) => b * obstacle_cost + s.value,
            Err(_) => f64::NAN,
        };
        let (mut lo, mut hi) = (b_star / 8.0, b_star * 8.0);
        let mut best = golden_min(cost, lo, hi, 1e-12 * b_star);
        for _ in 0..20 {
            let edge = 0.01 * (hi - lo);
            if best.0 - lo < edge {
                lo /= 8.0;
            } else if hi - best.0 < edge {
                hi *= 8.0;
            } else {
                break;
            }
            best = golden_min(cost, lo, hi, 1e-12 * b_star);
        }
        if !best.1.is_finite() {
            return Err(Error::Consistency(format!("ψ̃ minimization diverged in the {dir} direction")));
        }
        parts[slot] = (k, best.1, best.0);
    }
    let closed_form = (parts[0].0 + parts[1].0) * h;
    let numeric = parts[0].1 + parts[1].1;
    if ((numeric - closed_form) / closed_form).abs() > PSI_TILDE_REL_TOL {
        return Err(Error::Consistency(format!(
            "ψ̃({h}) numeric {numeric} disagrees with closed form {closed_form}"
        )));
    }
    Ok(PsiTilde { closed_form, numeric, b1: parts[0].2, b2: parts[1].2 })
}

/// Largest trap depth per unit length at the extremes of the ω⁺ support.
pub fn f_e(beta0: f64, beta1: f64) -> Result<f64> {
    for (name, b) in [("β₀", beta0), ("β₁", beta1)] {
        if !(b > 0.0 && b < 0.5) {
            return Err(Error::Domain(format!("{name} = {b} not in (0, 1/2): nestling violated")));
        }
    }
    let a = ((1.0 - beta1) / beta1).ln();
    let c = ((1.0 - beta0) / beta0).ln();
    Ok(a * c / (a + c))
}

/// `|ln(1−p)| / (|ln(1−p)| + F_e)`.
pub fn gamma(p: f64, fe: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(fe > 0.0) {
        return Err(Error::Domain(format!("gamma needs 0 < p < 1 and F_e > 0 (got {p}, {fe})")));
    }
    let l = (1.0 - p).ln().abs();
    Ok(l / (l + fe))
}

/// Best rational `num/den` (den ≤ `max_den`) whose correctly rounded value is `x`.
fn rationalize(x: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x > 0.0) || !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (1u64, x.floor() as u64);
    let (mut k0, mut k1) = (0u64, 1u64);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if h1 as f64 / k1 as f64 == x {
            return Some((h1, k1));
        }
        if frac == 0.0 {
            return None;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
    }
    None
}

/// Exact decision of `E ln ρ₀ = 0` when all weights and `ω⁺` values are
/// small-denominator rationals: `Π ρ_i^{w_i} = 1` in integers.
fn sinai_exact(law: &[(f64, f64)]) -> Option<bool> {
    let mut parts = Vec::with_capacity(law.len());
    let mut den = 1u64;
    for &(w, up) in law {
        let (wn, wd) = rationalize(w, 10_000)?;
        let (un, ud) = rationalize(up, 1_000_000)?;
        den = lcm(den, wd);
        if den > 10_000 {
            return None;
        }
        parts.push((wn, wd, un, ud));
    }
    let (mut lhs, mut rhs) = (BigUint::one(), BigUint::one());
    for (wn, wd, un, ud) in parts {
        let e = u32::try_from(wn * (den / wd)).ok()?;
        // ρ = (ud − un)/un
        lhs *= BigUint::from(ud - un).pow(e);
        rhs *= BigUint::from(un).pow(e);
    }
    Some(lhs == rhs)
}

/// Whether `E ln ρ₀ = 0`, exactly for rational laws and to 1e-14 otherwise.
pub fn is_sinai(spec: &SiteLawSpec) -> Result<bool> {
    let law = spec.omega_law_1d()?;
    if let Some(v) = sinai_exact(&law) {
        return Ok(v);
    }
    Ok(RhoLaw::from_spec(spec)?.mean_log(Direction::Right).abs() <= SINAI_TOL)
}

/// All theoretical quantities for a one-dimensional product law at density `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub p: f64,
    pub kappa_left: f64,
    pub kappa_right: f64,
    pub kappa_left_residual: f64,
    pub kappa_right_residual: f64,
    /// Root of `E ρ₀^{±κ} = 1` in the transient direction; absent in the Sinai regime.
    pub kappa: Option<f64>,
    pub kappa_residual: Option<f64>,
    pub sinai: bool,
    pub mean_log_rho: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub f_e: f64,
    pub gamma: f64,
    pub a_bar: f64,
    /// `|1 − ā − ψ̃(ā)|` with `ψ̃` evaluated numerically.
    pub a_bar_residual: f64,
    pub exponent_annealed: f64,
    pub exponent_quenched: f64,
    pub exponent_mixed_theta: f64,
    /// `κ/(κ+1)`; absent in the Sinai regime, where the ω-quenched tail is
    /// governed by `ln² n` valleys instead.
    pub exponent_mixed_omega: Option<f64>,
}

impl ExponentTable {
    /// Two-column CSV `quantity,value` (absent values left empty).
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let rows: Vec<(&str, String)> = vec![
            ("p", self.p.to_string()),
            ("kappa_left", self.kappa_left.to_string()),
            ("kappa_right", self.kappa_right.to_string()),
            ("kappa_left_residual", self.kappa_left_residual.to_string()),
            ("kappa_right_residual", self.kappa_right_residual.to_string()),
            ("kappa", opt(self.kappa)),
            ("kappa_residual", opt(self.kappa_residual)),
            ("sinai", self.sinai.to_string()),
            ("mean_log_rho", self.mean_log_rho.to_string()),
            ("beta0", self.beta0.to_string()),
            ("beta1", self.beta1.to_string()),
            ("f_e", self.f_e.to_string()),
            ("gamma", self.gamma.to_string()),
            ("a_bar", self.a_bar.to_string()),
            ("a_bar_residual", self.a_bar_residual.to_string()),
            ("exponent_annealed", self.exponent_annealed.to_string()),
            ("exponent_quenched", self.exponent_quenched.to_string()),
            ("exponent_mixed_theta", self.exponent_mixed_theta.to_string()),
            ("exponent_mixed_omega", opt(self.exponent_mixed_omega)),
        ];
        let mut out = String::from("quantity,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

pub fn exponent_table(spec: &SiteLawSpec, p: f64) -> Result<ExponentTable> {
    let law = RhoLaw::from_spec(spec)?;
    let (beta0, beta1) = beta_extremes(spec)?;
    let left = law.kappa(p, Direction::Left)?;
    let right = law.kappa(p, Direction::Right)?;
    let sum = left.value + right.value;
    let sinai = is_sinai(spec)?;
    let mean_log_rho = law.mean_log(Direction::Right);
    let transient = if sinai {
        None
    } else if mean_log_rho < 0.0 {
        Some(law.kappa(0.0, Direction::Right)?)
    } else {
        Some(law.kappa(0.0, Direction::Left)?)
    };
    let fe = f_e(beta0, beta1)?;
    let a_bar = 1.0 / (1.0 + sum);
    let a_bar_residual = (1.0 - a_bar - psi_tilde(spec, p, a_bar)?.numeric).abs();
    if a_bar_residual > FIXED_POINT_TOL {
        return Err(Error::Consistency(format!(
            "fixed point 1 − ā = ψ̃(ā) violated by {a_bar_residual}"
        )));
    }
    Ok(ExponentTable {
        p,
        kappa_left: left.value,
        kappa_right: right.value,
        kappa_left_residual: left.residual,
        kappa_right_residual: right.residual,
        kappa: transient.map(|k| k.value),
        kappa_residual: transient.map(|k| k.residual),
        sinai,
        mean_log_rho,
        beta0,
        beta1,
        f_e: fe,
        gamma: gamma(p, fe)?,
        a_bar,
        a_bar_residual,
        exponent_annealed: sum,
        exponent_quenched: sum / (1.0 + sum),
        exponent_mixed_theta: gamma(p, fe)?,
        exponent_mixed_omega: transient.map(|k| k.value / (k.value + 1.0)),
    })
}
