//! Trajectory sampling of the killed walk under the four measures, and
//! direct sampling of trap events at the origin.
//!
//! Walker `i` draws its steps and killing coins from
//! `stream_rng(seed, Walker, i)`; resampled environment halves come from
//! seeds derived from `(seed, i)`. Counts are reduced exactly, so curves do not
//! depend on the number of worker threads.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{check_checkpoints, Measure, TailCurve};
use crate::envmodel::{validate_spec, SampledField, SiteField, SiteLawSpec, SplitField};
use crate::error::{Error, Result};
use crate::exponents::psi;
use crate::potential::{depth_threshold, potential_on, to_fixed};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Trap-event sampling is refused when the predicted `P[Λ⁰]` is below this.
pub const FEASIBILITY_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkOutcome {
    /// Killing time, `None` if alive at `n_cap`.
    pub tau: Option<u64>,
    pub final_position: Vec<i64>,
    /// Largest sup-norm distance from the origin reached.
    pub max_excursion: u64,
    pub n_cap: u64,
}

impl WalkOutcome {
    pub fn alive_at(&self, checkpoints: &[u64]) -> Vec<bool> {
        checkpoints.iter().map(|&n| n <= self.n_cap && self.tau.is_none_or(|t| t > n)).collect()
    }
}

/// Runs one walker from the origin for at most `n_cap` steps.
pub fn walk<F: SiteField + ?Sized, R: Rng + ?Sized>(field: &F, r: f64, n_cap: u64, rng: &mut R) -> WalkOutcome {
    if field.dim() == 1 {
        let mut x = 0i64;
        let mut excursion = 0u64;
        for t in 1..=n_cap {
            let u: f64 = rng.random();
            x += if u < field.omega_plus(x) { 1 } else { -1 };
            excursion = excursion.max(x.unsigned_abs());
            if field.obstacle_1d(x) && rng.random::<f64>() < r {
                return WalkOutcome { tau: Some(t), final_position: vec![x], max_excursion: excursion, n_cap };
            }
        }
        return WalkOutcome { tau: None, final_position: vec![x], max_excursion: excursion, n_cap };
    }
    let d = field.dim();
    let mut x = vec![0i64; d];
    let mut excursion = 0u64;
    for t in 1..=n_cap {
        let u: f64 = rng.random();
        let moves = field.moves(&x);
        let mut acc = 0.0;
        let mut k = 2 * d - 1;
        for (j, &q) in moves.iter().enumerate() {
            acc += q;
            if u < acc {
                k = j;
                break;
            }
        }
        x[k / 2] += if k.is_multiple_of(2) { 1 } else { -1 };
        excursion = excursion.max(x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0));
        if field.obstacle(&x) && rng.random::<f64>() < r {
            return WalkOutcome { tau: Some(t), final_position: x, max_excursion: excursion, n_cap };
        }
    }
    WalkOutcome { tau: None, final_position: x, max_excursion: excursion, n_cap }
}

/// One walker in a fixed environment, seeded by `stream_rng(seed, Walker, 0)`.
pub fn sample_tau<F: SiteField + ?Sized>(field: &F, r: f64, seed: u64, n_cap: u64) -> Result<WalkOutcome> {
    check_r(r)?;
    Ok(walk(field, r, n_cap, &mut stream_rng(seed, Stream::Walker, 0)))
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("killing probability {r} not in (0,1]")));
    }
    Ok(())
}

/// Death histogram over checkpoint bins, summed exactly across workers.
fn death_counts<G>(checkpoints: &[u64], walkers: u64, tau_of: G) -> (Vec<u64>, u64)
where
    G: Fn(u64) -> Option<u64> + Sync,
{
    let k = checkpoints.len();
    let hist = (0..walkers)
        .into_par_iter()
        .fold(
            || vec![0u64; k + 1],
            |mut h, i| {
                match tau_of(i) {
                    Some(t) => h[checkpoints.partition_point(|&n| n < t)] += 1,
                    None => h[k] += 1,
                }
                h
            },
        )
        .reduce(
            || vec![0u64; k + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    // Deaths after the last checkpoint cannot occur (n_cap is the last checkpoint).
    let survivors = hist[k];
    (hist[..k].to_vec(), survivors)
}

fn prepare(checkpoints: &[u64], walkers: u64, r: f64) -> Result<u64> {
    check_r(r)?;
    if walkers == 0 {
        return Err(Error::Domain("walkers must be positive".into()));
    }
    check_checkpoints(checkpoints)
}

/// `P_σ[τ > n]` in a fixed environment.
pub fn quenched_tail<F: SiteField + ?Sized>(
    field: &F,
    r: f64,
    checkpoints: &[u64],
    walkers: u64,
    seed: u64,
) -> Result<TailCurve> {
    let n_cap = prepare(checkpoints, walkers, r)?;
    let (deaths, survivors) = death_counts(checkpoints, walkers, |i| {
        walk(field, r, n_cap, &mut stream_rng(seed, Stream::Walker, i)).tau
    });
    Ok(TailCurve::from_deaths(Measure::Quenched, checkpoints.to_vec(), deaths, survivors, 1, seed))
}

fn checked_spec(spec: &SiteLawSpec, p: Option<f64>) -> Result<Arc<SiteLawSpec>> {
    let spec = match p {
        Some(p) if spec.independent => spec.with_density(p)?,
        Some(p) if (p - spec.p).abs() > 1e-12 => {
            return Err(Error::NotApplicable("obstacle density of a joint law is fixed by its atoms".into()))
        }
        _ => spec.clone(),
    };
    let report = validate_spec(&spec)?;
    if !report.passes() {
        return Err(Error::Domain(format!("spec fails its standing assumptions: {}", report.messages.join("; "))));
    }
    Ok(Arc::new(spec))
}

fn require_product_1d(spec: &SiteLawSpec) -> Result<()> {
    if spec.dim != 1 || !spec.independent {
        return Err(Error::NotApplicable("mixed measures require a one-dimensional product law".into()));
    }
    Ok(())
}

/// `P[τ > n]` with a fresh environment for every walker.
pub fn annealed_tail(
    spec: &SiteLawSpec,
    p: f64,
    r: f64,
    checkpoints: &[u64],
    walkers: u64,
    seed: u64,
) -> Result<TailCurve> {
    let n_cap = prepare(checkpoints, walkers, r)?;
    let spec = checked_spec(spec, Some(p))?;
    let (deaths, survivors) = death_counts(checkpoints, walkers, |i| {
        let env = SampledField::new(spec.clone(), derive_seed(seed, Stream::Environment, i));
        walk(&env, r, n_cap, &mut stream_rng(seed, Stream::Walker, i)).tau
    });
    Ok(TailCurve::from_deaths(Measure::Annealed, checkpoints.to_vec(), deaths, survivors, walkers, seed))
}

/// `P_θ[τ > n]`: obstacles from `pattern`, transition probabilities resampled
/// from `spec` for every walker.
pub fn mixed_tail_theta<F: SiteField + ?Sized>(
    pattern: &F,
    spec: &SiteLawSpec,
    r: f64,
    checkpoints: &[u64],
    walkers: u64,
    seed: u64,
) -> Result<TailCurve> {
    let n_cap = prepare(checkpoints, walkers, r)?;
    require_product_1d(spec)?;
    let spec = checked_spec(spec, None)?;
    let (deaths, survivors) = death_counts(checkpoints, walkers, |i| {
        let omega = SampledField::new(spec.clone(), derive_seed(seed, Stream::Resample, i));
        let env = SplitField { omega: &omega, theta: pattern };
        walk(&env, r, n_cap, &mut stream_rng(seed, Stream::Walker, i)).tau
    });
    Ok(TailCurve::from_deaths(Measure::MixedTheta, checkpoints.to_vec(), deaths, survivors, walkers, seed))
}

/// `P_ω[τ > n]`: transition probabilities from `omega_env`, obstacles
/// resampled at density `p` for every walker.
pub fn mixed_tail_omega<F: SiteField + ?Sized>(
    omega_env: &F,
    spec: &SiteLawSpec,
    p: f64,
    r: f64,
    checkpoints: &[u64],
    walkers: u64,
    seed: u64,
) -> Result<TailCurve> {
    let n_cap = prepare(checkpoints, walkers, r)?;
    require_product_1d(spec)?;
    let spec = checked_spec(spec, Some(p))?;
    let (deaths, survivors) = death_counts(checkpoints, walkers, |i| {
        let theta = SampledField::new(spec.clone(), derive_seed(seed, Stream::Resample, i));
        let env = SplitField { omega: omega_env, theta: &theta };
        walk(&env, r, n_cap, &mut stream_rng(seed, Stream::Walker, i)).tau
    });
    Ok(TailCurve::from_deaths(Measure::MixedOmega, checkpoints.to_vec(), deaths, survivors, walkers, seed))
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let q = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (q + z * z / (2.0 * n)) / denom;
    let half = z * (q * (1.0 - q) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Sampled frequencies of the trap events at the origin next to their predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapFrequency {
    pub h: f64,
    pub b1: f64,
    pub b2: f64,
    pub n: u64,
    /// Extents in sites, `⌊b ln n⌋`.
    pub left_sites: u64,
    pub right_sites: u64,
    /// Required rise, `h ln n`.
    pub depth: f64,
    pub n_envs: u64,
    pub seed: u64,
    pub trap_count: u64,
    pub free_trap_count: u64,
    pub trap_frequency: f64,
    pub free_trap_frequency: f64,
    pub trap_ci: (f64, f64),
    pub free_trap_ci: (f64, f64),
    pub psi: f64,
    /// `n^{−ψ}`.
    pub predicted_trap: f64,
    /// `n^{(b₁+b₂) ln(1−p) − ψ}`.
    pub predicted_free_trap: f64,
}

fn trap_extents(h: f64, b1: f64, b2: f64, n: u64) -> Result<(u64, u64, f64)> {
    if n < 2 {
        return Err(Error::Domain("n must be at least 2".into()));
    }
    let ln_n = (n as f64).ln();
    Ok(((b1 * ln_n).floor() as u64, (b2 * ln_n).floor() as u64, h * ln_n))
}

/// Samples `n_envs` environments at density `p` and counts the events
/// "a trap of depth `h ln n` with bottom 0 on `[−⌊b₁ ln n⌋, ⌊b₂ ln n⌋]`"
/// and its obstacle-free version.
pub fn trap_event_frequency(
    spec: &SiteLawSpec,
    p: f64,
    h: f64,
    b1: f64,
    b2: f64,
    n: u64,
    n_envs: u64,
    seed: u64,
) -> Result<TrapFrequency> {
    require_product_1d(spec)?;
    let spec = checked_spec(spec, Some(p))?;
    let psi = psi(&spec, h, b1, b2)?;
    let ln_n = (n as f64).ln();
    let predicted_trap = (-psi * ln_n).exp();
    let predicted_free_trap = (((b1 + b2) * (1.0 - p).ln() - psi) * ln_n).exp();
    if !(predicted_trap >= FEASIBILITY_FLOOR) {
        return Err(Error::Infeasible { predicted: predicted_trap, floor: FEASIBILITY_FLOOR });
    }
    if n_envs == 0 {
        return Err(Error::Domain("n_envs must be positive".into()));
    }
    let (left, right, depth) = trap_extents(h, b1, b2, n)?;
    let (lo, hi) = (-(left as i64), right as i64);
    let (trap_count, free_trap_count) = (0..n_envs)
        .into_par_iter()
        .map(|i| {
            let env = SampledField::new(spec.clone(), derive_seed(seed, Stream::Environment, i));
            let profile = potential_on(&env, lo, hi).expect("non-empty window");
            if profile.is_trap(0, left, right, depth) {
                (1u64, profile.obstacle_free(lo, hi) as u64)
            } else {
                (0, 0)
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = n_envs as f64;
    Ok(TrapFrequency {
        h,
        b1,
        b2,
        n,
        left_sites: left,
        right_sites: right,
        depth,
        n_envs,
        seed,
        trap_count,
        free_trap_count,
        trap_frequency: trap_count as f64 / m,
        free_trap_frequency: free_trap_count as f64 / m,
        trap_ci: wilson_interval(trap_count, n_envs),
        free_trap_ci: wilson_interval(free_trap_count, n_envs),
        psi,
        predicted_trap,
        predicted_free_trap,
    })
}

/// Exact probabilities of the two trap events for a finite product law, by
/// enumerating the distribution of the fixed-point potential on each side.
pub fn exact_trap_probabilities(
    spec: &SiteLawSpec,
    p: f64,
    h: f64,
    b1: f64,
    b2: f64,
    n: u64,
) -> Result<(f64, f64)> {
    require_product_1d(spec)?;
    let law = spec.omega_law_1d()?;
    let (left, right, depth) = trap_extents(h, b1, b2, n)?;
    let t = depth_threshold(depth);
    let steps: Vec<(f64, i64)> = law.iter().map(|&(w, up)| (w, to_fixed(((1.0 - up) / up).ln()))).collect();
    // Walk of V away from the bottom: must stay ≥ 0 and end ≥ t.
    let side = |len: u64, sign: i64| -> f64 {
        let mut dist: HashMap<i64, f64> = HashMap::from([(0, 1.0)]);
        for _ in 0..len {
            let mut next: HashMap<i64, f64> = HashMap::with_capacity(dist.len() * steps.len());
            for (&v, &q) in &dist {
                for &(w, s) in &steps {
                    let u = v + sign * s;
                    if u >= 0 {
                        *next.entry(u).or_insert(0.0) += q * w;
                    }
                }
            }
            dist = next;
        }
        dist.iter().filter(|(&v, _)| v >= t).map(|(_, &q)| q).sum()
    };
    let trap = side(right, 1) * side(left, -1);
    let free = trap * (1.0 - p).powi((left + right + 1) as i32);
    Ok((trap, free))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{geometric_checkpoints, DEFAULT_RATIO};
    use crate::envmodel::{sample_environment, Environment, Window};
    use crate::oracle::{exact_survival, BoundaryPolicy};

    fn symmetric(p: f64) -> SiteLawSpec {
        SiteLawSpec::one_dim(&[(0.5, 1.0 / 3.0), (0.5, 2.0 / 3.0)], p, 0.5, 0.05).unwrap()
    }

    #[test]
    fn certain_killing_stops_at_step_one() {
        let env = Environment::homogeneous(1, vec![0.5, 0.5], true).unwrap();
        for s in 0..50 {
            assert_eq!(sample_tau(&env, 1.0, s, 100).unwrap().tau, Some(1));
        }
    }

    #[test]
    fn no_obstacles_means_censoring() {
        let env = Environment::homogeneous(1, vec![0.3, 0.7], false).unwrap();
        let o = sample_tau(&env, 0.5, 3, 500).unwrap();
        assert_eq!(o.tau, None);
        assert!(o.alive_at(&[1, 500]).iter().all(|&a| a));
        assert!(!o.alive_at(&[501])[0]);
    }

    #[test]
    fn geometric_killing_has_mean_two() {
        let env = Environment::homogeneous(1, vec![0.5, 0.5], true).unwrap();
        let total: u64 = (0..100_000u64)
            .map(|i| walk(&env, 0.5, 10_000, &mut stream_rng(5, Stream::Walker, i)).tau.unwrap())
            .sum();
        let mean = total as f64 / 1e5;
        // sd of Geometric(1/2) is √2; 3 standard errors ≈ 0.013.
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn single_walker_curve_is_zero_or_one() {
        let env = sample_environment(&symmetric(0.5), &Window::line(-50, 50), 2).unwrap();
        let c = quenched_tail(&env, 0.5, &[1, 2, 4, 8, 16, 32], 1, 7).unwrap();
        assert!(c.estimate.iter().all(|&q| q == 0.0 || q == 1.0));
        assert!(c.counts_monotone());
    }

    #[test]
    fn quenched_tail_matches_oracle() {
        for s in 0..20 {
            let env = sample_environment(&symmetric(0.3), &Window::line(-50, 50), 100 + s).unwrap();
            let cps = geometric_checkpoints(200, DEFAULT_RATIO).unwrap();
            let mc = quenched_tail(&env, 0.5, &cps, 20_000, s).unwrap();
            let b = exact_survival(&env, 0.5, &cps, &BoundaryPolicy::default()).unwrap();
            let (lo, hi) = (b.lower(), b.upper());
            for j in 0..cps.len() {
                let q = hi[j];
                let sigma = (q * (1.0 - q) / 20_000.0).sqrt().max(1e-12);
                assert!(
                    mc.estimate[j] >= lo[j] - 4.0 * sigma && mc.estimate[j] <= hi[j] + 4.0 * sigma,
                    "env {s} n {}: {} vs [{}, {}]",
                    cps[j],
                    mc.estimate[j],
                    lo[j],
                    hi[j]
                );
            }
        }
    }

    #[test]
    fn doubling_walkers_shrinks_errors_by_root_two() {
        let env = Environment::homogeneous(1, vec![0.5, 0.5], true).unwrap();
        let a = quenched_tail(&env, 0.5, &[1, 2], 20_000, 1).unwrap();
        let b = quenched_tail(&env, 0.5, &[1, 2], 40_000, 1).unwrap();
        for j in 0..2 {
            let ratio = a.stderr[j] / b.stderr[j];
            assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
        }
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let spec = symmetric(0.3);
        let cps = geometric_checkpoints(300, DEFAULT_RATIO).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| annealed_tail(&spec, 0.3, 0.5, &cps, 3000, 42).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn annealed_one_step_identity() {
        let c = annealed_tail(&symmetric(0.5), 0.5, 0.5, &[1], 200_000, 8).unwrap();
        assert!((c.estimate[0] - 0.75).abs() <= 4.0 * c.stderr[0]);
    }

    #[test]
    fn mixed_theta_without_obstacles_survives() {
        let pattern = Environment::homogeneous(1, vec![0.5, 0.5], false).unwrap();
        let c = mixed_tail_theta(&pattern, &symmetric(0.5), 0.5, &[1, 10, 100], 500, 3).unwrap();
        assert_eq!(c.estimate, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn mixed_omega_one_step_identity() {
        let env = Environment::homogeneous(1, vec![0.5, 0.5], false).unwrap();
        let c = mixed_tail_omega(&env, &symmetric(0.5), 0.2, 0.5, &[1], 200_000, 4).unwrap();
        assert!((c.estimate[0] - 0.9).abs() <= 4.0 * c.stderr[0]);
    }

    fn planar(p: f64) -> SiteLawSpec {
        let atoms = (0..4)
            .map(|k| {
                let mut moves = vec![0.2; 4];
                moves[k] = 0.4;
                crate::envmodel::Atom { weight: 0.25, moves, obstacle: None }
            })
            .collect();
        SiteLawSpec::new(2, atoms, p, 0.5, true, 0.05).unwrap()
    }

    #[test]
    fn mixed_measures_need_product_laws() {
        let spec = planar(0.5);
        let env = Environment::homogeneous(2, vec![0.25; 4], false).unwrap();
        assert!(matches!(mixed_tail_theta(&env, &spec, 0.5, &[1], 10, 0), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn two_dimensional_walks_run() {
        let spec = planar(0.1);
        let c = annealed_tail(&spec, 0.1, 0.5, &[1, 10, 100], 2000, 1).unwrap();
        assert!((c.estimate[0] - 0.95).abs() <= 4.0 * c.stderr[0]);
        assert!(c.counts_monotone());
    }

    #[test]
    fn exact_trap_probability_by_hand() {
        // ⌊ln 7⌋ = 1 site per side for b = 1; each side's single ±ln 2 step must go up.
        let n = 7;
        let (trap, free) = exact_trap_probabilities(&symmetric(0.5), 0.5, 0.1, 1.0, 1.0, n).unwrap();
        assert!((trap - 0.25).abs() < 1e-15);
        assert!((free - 0.25 * 0.125).abs() < 1e-15);
    }

    #[test]
    fn sampled_trap_frequency_matches_enumeration() {
        let spec = symmetric(0.3);
        let (h, b, n) = (0.3, 0.8, 1000);
        let f = trap_event_frequency(&spec, 0.3, h, b, b, n, 200_000, 6).unwrap();
        let (trap, free) = exact_trap_probabilities(&spec, 0.3, h, b, b, n).unwrap();
        let se = (trap * (1.0 - trap) / 2e5).sqrt();
        assert!((f.trap_frequency - trap).abs() <= 4.0 * se, "{} vs {}", f.trap_frequency, trap);
        let se = (free * (1.0 - free) / 2e5).sqrt();
        assert!((f.free_trap_frequency - free).abs() <= 4.0 * se);
        assert!(f.trap_ci.0 <= f.trap_frequency && f.trap_frequency <= f.trap_ci.1);
    }

    #[test]
    fn infeasible_trap_requests_are_refused() {
        let err = trap_event_frequency(&symmetric(0.5), 0.5, 5.0, 1.0, 1.0, 1000, 10, 0).unwrap_err();
        assert!(matches!(err, Error::Infeasible { predicted, .. } if predicted < FEASIBILITY_FLOOR));
    }

    #[test]
    fn free_traps_approach_traps_as_density_vanishes() {
        let spec = symmetric(0.5);
        let (t, f) = exact_trap_probabilities(&spec, 1e-9, 0.3, 0.8, 0.8, 1000).unwrap();
        assert!((f / t - 1.0).abs() < 1e-7);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        assert_eq!(wilson_interval(0, 10).0, 0.0);
        let (lo, hi) = wilson_interval(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
    }
}
