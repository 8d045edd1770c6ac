//! One-dimensional potential landscape, traps and barrier heights.
//!
//! `V(0) = 0` and `V(x) − V(x−1) = ln ρ_x` with `ρ_x = ω_x⁻/ω_x⁺`. Values are
//! held in fixed point (resolution 2⁻³²) so that ties between sites reached by
//! different paths compare exactly; the depth tests below are therefore exact
//! predicates on the stored landscape.

use serde::{Deserialize, Serialize};

use crate::envmodel::{Environment, SiteField};
use crate::error::{Error, Result};

const SCALE: f64 = 4_294_967_296.0; // 2^32

pub(crate) fn to_fixed(v: f64) -> i64 {
    (v * SCALE).round() as i64
}

/// Smallest fixed-point difference that is at least `h`.
pub(crate) fn depth_threshold(h: f64) -> i64 {
    (h * SCALE).ceil() as i64
}

fn from_fixed(v: i64) -> f64 {
    v as f64 / SCALE
}

/// Potential values on `[lo, hi]` together with the obstacle bits there.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialProfile {
    lo: i64,
    fixed: Vec<i64>,
    obstacles: Vec<bool>,
    obstacle_prefix: Vec<u32>,
}

impl PotentialProfile {
    /// Synthetic profile from explicit values (used for planted landscapes).
    pub fn from_values(lo: i64, values: &[f64], obstacles: &[bool]) -> Result<Self> {
        if values.is_empty() || values.len() != obstacles.len() {
            return Err(Error::Domain("profile needs matching, non-empty arrays".into()));
        }
        Ok(Self::from_fixed(lo, values.iter().map(|&v| to_fixed(v)).collect(), obstacles.to_vec()))
    }

    fn from_fixed(lo: i64, fixed: Vec<i64>, obstacles: Vec<bool>) -> Self {
        let mut obstacle_prefix = Vec::with_capacity(obstacles.len() + 1);
        obstacle_prefix.push(0);
        let mut acc = 0;
        for &o in &obstacles {
            acc += u32::from(o);
            obstacle_prefix.push(acc);
        }
        Self { lo, fixed, obstacles, obstacle_prefix }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.fixed.len() as i64 - 1
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.lo && x <= self.hi()
    }

    fn idx(&self, x: i64) -> usize {
        debug_assert!(self.contains(x), "site {x} outside profile");
        (x - self.lo) as usize
    }

    pub fn value(&self, x: i64) -> f64 {
        from_fixed(self.fixed[self.idx(x)])
    }

    pub fn values(&self) -> Vec<f64> {
        self.fixed.iter().map(|&v| from_fixed(v)).collect()
    }

    pub fn obstacle(&self, x: i64) -> bool {
        self.obstacles[self.idx(x)]
    }

    /// No obstacle on `[a, c]`.
    pub fn obstacle_free(&self, a: i64, c: i64) -> bool {
        let (i, j) = (self.idx(a), self.idx(c));
        self.obstacle_prefix[j + 1] == self.obstacle_prefix[i]
    }

    /// The profile restricted to `[a, c]`, values unchanged.
    pub fn slice(&self, a: i64, c: i64) -> Self {
        let (i, j) = (self.idx(a), self.idx(c));
        Self::from_fixed(a, self.fixed[i..=j].to_vec(), self.obstacles[i..=j].to_vec())
    }

    /// Direct evaluation of the trap predicates: `V(x)` is the minimum of `V`
    /// on `[x−b₁, x+b₂]` and both endpoints rise at least `h` above it.
    pub fn is_trap(&self, x: i64, b1: u64, b2: u64, h: f64) -> bool {
        let (a, c) = (x - b1 as i64, x + b2 as i64);
        if !self.contains(a) || !self.contains(c) {
            return false;
        }
        let bottom = self.fixed[self.idx(x)];
        let t = depth_threshold(h);
        (a..=c).all(|y| self.fixed[self.idx(y)] >= bottom)
            && self.fixed[self.idx(a)] - bottom >= t
            && self.fixed[self.idx(c)] - bottom >= t
    }
}

/// Potential of a one-dimensional environment on its stored window.
pub fn potential(env: &Environment) -> Result<PotentialProfile> {
    let w = env.window();
    if w.dim() != 1 {
        return Err(Error::NotApplicable(format!("potential requested for d = {}", w.dim())));
    }
    potential_on(env, w.lo[0], w.hi[0])
}

/// Potential of any one-dimensional field on `[lo, hi]`.
pub fn potential_on<F: SiteField + ?Sized>(field: &F, lo: i64, hi: i64) -> Result<PotentialProfile> {
    if field.dim() != 1 {
        return Err(Error::NotApplicable(format!("potential requested for d = {}", field.dim())));
    }
    if hi < lo {
        return Err(Error::Domain(format!("empty window [{lo}, {hi}]")));
    }
    let log_rho = |x: i64| {
        let up = field.omega_plus(x);
        to_fixed(((1.0 - up) / up).ln())
    };
    let (start, end) = (lo.min(0), hi.max(0));
    let mut full = vec![0i64; (end - start + 1) as usize];
    let zero = (-start) as usize;
    for x in 1..=end {
        let i = zero + x as usize;
        full[i] = full[i - 1] + log_rho(x);
    }
    for x in (start..0).rev() {
        let i = (x - start) as usize;
        full[i] = full[i + 1] - log_rho(x + 1);
    }
    let a = (lo - start) as usize;
    let b = (hi - start) as usize;
    let obstacles = (lo..=hi).map(|x| field.obstacle_1d(x)).collect();
    Ok(PotentialProfile::from_fixed(lo, full[a..=b].to_vec(), obstacles))
}

/// A trap `[bottom − b1, bottom + b2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trap {
    pub bottom: i64,
    pub b1: u64,
    pub b2: u64,
    /// Smaller of the two barrier rises actually realized at the extents.
    pub depth: f64,
    pub obstacle_free: bool,
}

impl Trap {
    pub fn left(&self) -> i64 {
        self.bottom - self.b1 as i64
    }

    pub fn right(&self) -> i64 {
        self.bottom + self.b2 as i64
    }
}

/// Range-maximum tree answering "first/last index holding a value ≥ t".
struct MaxTree {
    size: usize,
    tree: Vec<i64>,
}

impl MaxTree {
    fn new(values: &[i64]) -> Self {
        let size = values.len().next_power_of_two().max(1);
        let mut tree = vec![i64::MIN; 2 * size];
        tree[size..size + values.len()].copy_from_slice(values);
        for i in (1..size).rev() {
            tree[i] = tree[2 * i].max(tree[2 * i + 1]);
        }
        Self { size, tree }
    }

    /// First index `≥ from` with value `≥ t`.
    fn first_at_least(&self, from: usize, t: i64) -> Option<usize> {
        self.first_in(1, 0, self.size, from, t)
    }

    fn first_in(&self, node: usize, nl: usize, nr: usize, from: usize, t: i64) -> Option<usize> {
        if nr <= from || self.tree[node] < t {
            return None;
        }
        if nr - nl == 1 {
            return Some(nl);
        }
        let mid = (nl + nr) / 2;
        self.first_in(2 * node, nl, mid, from, t)
            .or_else(|| self.first_in(2 * node + 1, mid, nr, from, t))
    }

    /// Last index `< before` with value `≥ t`.
    fn last_at_least(&self, before: usize, t: i64) -> Option<usize> {
        self.last_in(1, 0, self.size, before, t)
    }

    fn last_in(&self, node: usize, nl: usize, nr: usize, before: usize, t: i64) -> Option<usize> {
        if nl >= before || self.tree[node] < t {
            return None;
        }
        if nr - nl == 1 {
            return Some(nl);
        }
        let mid = (nl + nr) / 2;
        self.last_in(2 * node + 1, mid, nr, before, t)
            .or_else(|| self.last_in(2 * node, nl, mid, before, t))
    }
}

/// For every bottom in `bottoms`, the minimal `(b1, b2)` of a trap of depth
/// `≥ t` lying inside `v`, with the bottom as leftmost minimizer.
fn traps_in_slice(v: &[i64], t: i64, bottoms: std::ops::Range<usize>) -> Vec<(usize, usize, usize)> {
    let n = v.len();
    if t <= 0 {
        // Every site is a trap of non-positive depth with zero extents.
        return bottoms.map(|i| (i, 0, 0)).collect();
    }
    // Next strictly smaller to the right, previous smaller-or-equal to the left.
    let mut next_smaller = vec![n; n];
    let mut prev_le = vec![usize::MAX; n];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..n {
        while let Some(&j) = stack.last() {
            if v[i] < v[j] {
                next_smaller[j] = i;
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(i);
    }
    stack.clear();
    for i in 0..n {
        while let Some(&j) = stack.last() {
            if v[j] > v[i] {
                stack.pop();
            } else {
                break;
            }
        }
        if let Some(&j) = stack.last() {
            prev_le[i] = j;
        }
        stack.push(i);
    }
    let tree = MaxTree::new(v);
    let mut out = Vec::new();
    for i in bottoms {
        let target = v[i].saturating_add(t);
        let Some(k) = tree.first_at_least(i + 1, target) else { continue };
        if k >= next_smaller[i] {
            continue;
        }
        let Some(j) = tree.last_at_least(i, target) else { continue };
        if prev_le[i] != usize::MAX && j <= prev_le[i] {
            continue;
        }
        out.push((i, i - j, k - i));
    }
    out
}

fn check_region(profile: &PotentialProfile, region: (i64, i64)) -> Result<()> {
    if region.0 > region.1 || !profile.contains(region.0) || !profile.contains(region.1) {
        return Err(Error::Domain(format!(
            "region [{}, {}] not inside profile window [{}, {}]",
            region.0,
            region.1,
            profile.lo(),
            profile.hi()
        )));
    }
    Ok(())
}

fn to_trap(profile: &PotentialProfile, (i, b1, b2): (usize, usize, usize)) -> Trap {
    let v = &profile.fixed;
    let depth = from_fixed((v[i - b1] - v[i]).min(v[i + b2] - v[i]));
    let bottom = profile.lo + i as i64;
    Trap {
        bottom,
        b1: b1 as u64,
        b2: b2 as u64,
        depth,
        obstacle_free: profile.obstacle_free(bottom - b1 as i64, bottom + b2 as i64),
    }
}

/// All traps of depth `≥ h_min` whose bottom lies in `region`, one per bottom,
/// each with its smallest enclosing extents; ordered by bottom.
pub fn find_traps(
    profile: &PotentialProfile,
    h_min: f64,
    region: (i64, i64),
    obstacle_free_only: bool,
) -> Result<Vec<Trap>> {
    check_region(profile, region)?;
    let a = profile.idx(region.0);
    let c = profile.idx(region.1);
    Ok(traps_in_slice(&profile.fixed, depth_threshold(h_min), a..c + 1)
        .into_iter()
        .map(|t| to_trap(profile, t))
        .filter(|t| !obstacle_free_only || t.obstacle_free)
        .collect())
}

/// Traps lying entirely inside `[a, c]`.
pub fn traps_within(profile: &PotentialProfile, h_min: f64, a: i64, c: i64) -> Result<Vec<Trap>> {
    check_region(profile, (a, c))?;
    let sub = profile.slice(a, c);
    Ok(traps_in_slice(&sub.fixed, depth_threshold(h_min), 0..sub.fixed.len())
        .into_iter()
        .map(|t| to_trap(&sub, t))
        .collect())
}

/// Barrier heights of `V` on an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierStats {
    pub interval: (i64, i64),
    pub h_minus: f64,
    pub h_plus: f64,
    pub h: f64,
    /// First minimizer of `V` on the interval.
    pub bottom: i64,
}

/// `H₋ = max_x (max_{[a,x]} V − min_{[x,c]} V)`, `H₊` symmetrically, `H = H₋ ∧ H₊`,
/// by running extrema in linear time.
pub fn barrier_stats(profile: &PotentialProfile, interval: (i64, i64)) -> Result<BarrierStats> {
    let (a, c) = interval;
    if c - a < 2 {
        return Err(Error::Domain(format!("degenerate interval [{a}, {c}]")));
    }
    check_region(profile, interval)?;
    let v = &profile.fixed[profile.idx(a)..=profile.idx(c)];
    let n = v.len();
    let mut suf_min = vec![0i64; n];
    let mut suf_max = vec![0i64; n];
    suf_min[n - 1] = v[n - 1];
    suf_max[n - 1] = v[n - 1];
    for i in (0..n - 1).rev() {
        suf_min[i] = suf_min[i + 1].min(v[i]);
        suf_max[i] = suf_max[i + 1].max(v[i]);
    }
    let (mut pre_min, mut pre_max) = (i64::MAX, i64::MIN);
    let (mut h_minus, mut h_plus) = (i64::MIN, i64::MIN);
    let mut bottom = 0;
    for i in 0..n {
        pre_max = pre_max.max(v[i]);
        if v[i] < pre_min {
            pre_min = v[i];
            bottom = i;
        }
        h_minus = h_minus.max(pre_max - suf_min[i]);
        h_plus = h_plus.max(suf_max[i] - pre_min);
    }
    Ok(BarrierStats {
        interval,
        h_minus: from_fixed(h_minus),
        h_plus: from_fixed(h_plus),
        h: from_fixed(h_minus.min(h_plus)),
        bottom: a + bottom as i64,
    })
}

/// Distances to the first trap of a given depth on either side of the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapRadius {
    /// Smallest `x > 0` such that a trap lies inside `[1, x]`.
    pub plus: Option<u64>,
    /// Smallest `x > 0` such that a trap lies inside `[−x, −1]`.
    pub minus: Option<u64>,
    pub radius: Option<u64>,
    /// Radius of the window that was searched.
    pub searched: u64,
}

/// First-trap radii over the environment's stored window `[lo, hi] ∋ 0`.
pub fn first_trap_radius(env: &Environment, depth: f64) -> Result<TrapRadius> {
    let w = env.window();
    if w.dim() != 1 {
        return Err(Error::NotApplicable(format!("trap radius requested for d = {}", w.dim())));
    }
    let (lo, hi) = (w.lo[0], w.hi[0]);
    if lo > -1 || hi < 1 {
        return Err(Error::Domain("window must contain [-1, 1]".into()));
    }
    let profile = potential(env)?;
    radius_from_profile(&profile, depth)
}

pub(crate) fn radius_from_profile(profile: &PotentialProfile, depth: f64) -> Result<TrapRadius> {
    let (lo, hi) = (profile.lo(), profile.hi());
    let plus = traps_within(profile, depth, 1, hi)?.iter().map(|t| t.right() as u64).min();
    let minus = traps_within(profile, depth, lo, -1)?.iter().map(|t| (-t.left()) as u64).min();
    let radius = match (plus, minus) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Ok(TrapRadius { plus, minus, radius, searched: (-lo).min(hi) as u64 })
}

/// First-trap radius of a sampled environment, doubling the window from
/// `initial` until a trap is found or `max_radius` is exceeded.
pub fn first_trap_radius_growing(
    env: &Environment,
    depth: f64,
    initial: u64,
    max_radius: u64,
) -> Result<TrapRadius> {
    let mut radius = initial.max(2);
    loop {
        let windowed = env.rewindow(&crate::envmodel::Window::line(-(radius as i64), radius as i64))?;
        let found = first_trap_radius(&windowed, depth)?;
        if found.radius.is_some() || radius >= max_radius {
            return Ok(found);
        }
        radius = (radius * 2).min(max_radius);
    }
}

/// CSV with columns `bottom,b1,b2,depth,obstacle_free`.
pub fn traps_to_csv(traps: &[Trap]) -> String {
    let mut out = String::from("bottom,b1,b2,depth,obstacle_free\n");
    for t in traps {
        out.push_str(&format!("{},{},{},{},{}\n", t.bottom, t.b1, t.b2, t.depth, t.obstacle_free));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::{sample_environment, SiteLawSpec, Window};
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    /// Cubic enumeration straight from the trap predicates, keeping for each
    /// bottom the smallest extents and requiring the bottom to be the leftmost
    /// minimizer of the trap interval.
    fn brute_force_traps(p: &PotentialProfile, h: f64, a: i64, c: i64) -> Vec<(i64, u64, u64)> {
        let mut out = Vec::new();
        for x in a..=c {
            let mut best: Option<(u64, u64)> = None;
            for b1 in 0..=(x - a) as u64 {
                for b2 in 0..=(c - x) as u64 {
                    let leftmost = ((x - b1 as i64)..x).all(|y| p.value(y) > p.value(x));
                    if leftmost && p.is_trap(x, b1, b2, h) {
                        best = Some(match best {
                            None => (b1, b2),
                            Some((c1, c2)) => (c1.min(b1), c2.min(b2)),
                        });
                    }
                }
            }
            if let Some((b1, b2)) = best {
                out.push((x, b1, b2));
            }
        }
        out
    }

    fn random_profile(seed: u64, half: i64) -> PotentialProfile {
        let spec = SiteLawSpec::one_dim(&[(0.5, 1.0 / 3.0), (0.3, 0.6), (0.2, 0.75)], 0.4, 0.5, 0.05)
            .unwrap();
        potential(&sample_environment(&spec, &Window::line(-half, half), seed).unwrap()).unwrap()
    }

    #[test]
    fn three_site_hand_computation() {
        let env = Environment::line(0, &[0.5, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], &[false; 4], (0.5, false))
            .unwrap();
        let v = potential(&env).unwrap();
        assert_eq!(v.value(0), 0.0);
        assert!(close(v.value(1), -LN2));
        assert!(close(v.value(2), 0.0));
        assert!(close(v.value(3), LN2));
    }

    #[test]
    fn zero_drift_is_flat() {
        let env = Environment::line(-5, &[0.5; 11], &[false; 11], (0.5, false)).unwrap();
        assert!(potential(&env).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn left_branch_single_site() {
        let up0 = 0.7;
        let env = Environment::line(-1, &[0.4, up0], &[false, false], (0.5, false)).unwrap();
        let v = potential(&env).unwrap();
        assert!(close(v.value(-1), (up0 / (1.0 - up0)).ln()));
    }

    #[test]
    fn increments_are_bounded_by_ellipticity() {
        let eps0: f64 = 0.05;
        let p = random_profile(3, 500);
        let bound = ((1.0 - eps0) / eps0).ln();
        let vals = p.values();
        assert!(vals.windows(2).all(|w| (w[1] - w[0]).abs() <= bound + 1e-9));
    }

    #[test]
    fn flat_landscape_has_no_positive_depth_trap() {
        let p = PotentialProfile::from_values(0, &[0.0; 30], &[false; 30]).unwrap();
        assert!(find_traps(&p, 0.1, (0, 29), false).unwrap().is_empty());
    }

    #[test]
    fn single_valley_yields_one_trap() {
        let depth = 3.0;
        let vals: Vec<f64> = (0..21).map(|i| depth * ((i as f64 - 10.0).abs() / 10.0)).collect();
        let p = PotentialProfile::from_values(-10, &vals, &[false; 21]).unwrap();
        let traps = find_traps(&p, depth / 2.0, (-10, 10), false).unwrap();
        assert_eq!(traps.len(), 1);
        assert_eq!(traps[0].bottom, 0);
        assert_eq!((traps[0].b1, traps[0].b2), (5, 5));
        assert!(traps[0].depth >= depth / 2.0);
    }

    #[test]
    fn matches_brute_force_on_a_thousand_sites() {
        let p = random_profile(77, 500);
        let fast: Vec<_> = find_traps(&p, 2.0, (p.lo(), p.hi()), false)
            .unwrap()
            .into_iter()
            .map(|t| (t.bottom, t.b1, t.b2))
            .collect();
        // The cubic oracle is run on the first 300 sites; traps confined there agree.
        let brute = brute_force_traps(&p, 2.0, p.lo(), p.lo() + 299);
        let fast_sub: Vec<_> = traps_within(&p, 2.0, p.lo(), p.lo() + 299)
            .unwrap()
            .into_iter()
            .map(|t| (t.bottom, t.b1, t.b2))
            .collect();
        assert_eq!(fast_sub, brute);
        assert!(!fast.is_empty());
    }

    #[test]
    fn obstacle_free_filter() {
        let vals = [2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let mut obst = [false; 9];
        obst[6] = true;
        let p = PotentialProfile::from_values(0, &vals, &obst).unwrap();
        let all = find_traps(&p, 2.0, (0, 8), false).unwrap();
        let free = find_traps(&p, 2.0, (0, 8), true).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(free.len(), 1);
        assert_eq!(free[0].bottom, 2);
    }

    #[test]
    fn region_outside_window_is_rejected() {
        let p = PotentialProfile::from_values(0, &[0.0; 5], &[false; 5]).unwrap();
        assert!(find_traps(&p, 1.0, (-1, 3), false).is_err());
    }

    #[test]
    fn barrier_stats_examples() {
        let inc: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let p = PotentialProfile::from_values(0, &inc, &[false; 10]).unwrap();
        let b = barrier_stats(&p, (0, 9)).unwrap();
        assert_eq!(b.h, 0.0);
        assert_eq!(b.h_minus, 0.0);
        assert_eq!(b.bottom, 0);

        let valley: Vec<f64> = (0..11).map(|i| (i as f64 - 5.0).abs()).collect();
        let p = PotentialProfile::from_values(0, &valley, &[false; 11]).unwrap();
        let b = barrier_stats(&p, (0, 10)).unwrap();
        assert_eq!((b.h_minus, b.h_plus, b.h, b.bottom), (5.0, 5.0, 5.0, 5));
        assert!(barrier_stats(&p, (0, 1)).is_err());
    }

    fn brute_barrier(p: &PotentialProfile, a: i64, c: i64) -> (f64, f64) {
        let max_on = |l: i64, r: i64| (l..=r).map(|y| p.value(y)).fold(f64::NEG_INFINITY, f64::max);
        let min_on = |l: i64, r: i64| (l..=r).map(|y| p.value(y)).fold(f64::INFINITY, f64::min);
        let hm = (a..=c).map(|x| max_on(a, x) - min_on(x, c)).fold(f64::NEG_INFINITY, f64::max);
        let hp = (a..=c).map(|x| max_on(x, c) - min_on(a, x)).fold(f64::NEG_INFINITY, f64::max);
        (hm, hp)
    }

    #[test]
    fn barrier_stats_match_quadratic_oracle() {
        for seed in 0..20 {
            let p = random_profile(seed, 100);
            let b = barrier_stats(&p, (-100, 99)).unwrap();
            let (hm, hp) = brute_barrier(&p, -100, 99);
            assert!(close(b.h_minus, hm) && close(b.h_plus, hp));
            assert!(b.h >= 0.0);
        }
    }

    #[test]
    fn depth_zero_radius_is_one() {
        let spec = SiteLawSpec::one_dim(&[(0.5, 1.0 / 3.0), (0.5, 2.0 / 3.0)], 0.5, 0.5, 0.05).unwrap();
        let env = sample_environment(&spec, &Window::line(-10, 10), 1).unwrap();
        let r = first_trap_radius(&env, 0.0).unwrap();
        assert_eq!((r.plus, r.minus, r.radius), (Some(1), Some(1), Some(1)));
    }

    #[test]
    fn planted_valley_radius_matches_scan() {
        // Flat for x < 20, a valley of depth 4 centred at 24, flat again after.
        let mut omega = vec![0.5; 61];
        for x in 20..24 {
            omega[(x + 30) as usize] = 0.8; // V decreases
        }
        for x in 24..28 {
            omega[(x + 30) as usize] = 0.2; // V increases
        }
        let env = Environment::line(-30, &omega, &[false; 61], (0.5, false)).unwrap();
        let depth = 4.0 * (4.0f64).ln();
        let r = first_trap_radius(&env, depth).unwrap();
        let p = potential(&env).unwrap();
        let scan = (1..=30)
            .find(|&x| !brute_force_traps(&p, depth, 1, x).is_empty())
            .map(|x| x as u64);
        assert_eq!(r.plus, scan);
        assert_eq!(r.plus, Some(27));
        assert_eq!(r.minus, None);
        assert_eq!(r.radius, Some(27));
    }

    /// Triple loop over `(x, b1, b2)` with running minima, for longer windows.
    fn brute_force_triples(p: &PotentialProfile, h: f64) -> Vec<(i64, u64, u64)> {
        let (a, c) = (p.lo(), p.hi());
        let mut out = Vec::new();
        for x in a..=c {
            let vx = p.value(x);
            let mut best: Option<(u64, u64)> = None;
            let mut left_min_strict = f64::INFINITY; // min over [x-b1, x)
            for b1 in 0..=(x - a) as u64 {
                if b1 > 0 {
                    left_min_strict = left_min_strict.min(p.value(x - b1 as i64));
                }
                let mut right_min = vx; // min over [x, x+b2]
                for b2 in 0..=(c - x) as u64 {
                    right_min = right_min.min(p.value(x + b2 as i64));
                    let is_min = left_min_strict > vx && right_min >= vx;
                    let rises = p.value(x - b1 as i64) - vx >= h - 1e-12
                        && p.value(x + b2 as i64) - vx >= h - 1e-12;
                    if is_min && rises && p.is_trap(x, b1, b2, h) {
                        best = Some(best.map_or((b1, b2), |(c1, c2)| (c1.min(b1), c2.min(b2))));
                    }
                }
            }
            if let Some((b1, b2)) = best {
                out.push((x, b1, b2));
            }
        }
        out
    }

    #[test]
    fn three_hundred_site_windows_match_triple_loop() {
        for seed in 0..100 {
            let p = random_profile(1000 + seed, 150).slice(-150, 149);
            let fast: Vec<_> = find_traps(&p, 2.0, (p.lo(), p.hi()), false)
                .unwrap()
                .into_iter()
                .map(|t| (t.bottom, t.b1, t.b2))
                .collect();
            assert_eq!(fast, brute_force_triples(&p, 2.0), "seed {seed}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn fast_traps_equal_brute_force(seed in any::<u64>(), h in 0.0f64..4.0) {
            let p = random_profile(seed, 30);
            let fast: Vec<_> = find_traps(&p, h, (p.lo(), p.hi()), false)
                .unwrap()
                .into_iter()
                .map(|t| (t.bottom, t.b1, t.b2))
                .collect();
            prop_assert_eq!(fast, brute_force_traps(&p, h, p.lo(), p.hi()));
        }

        #[test]
        fn reported_traps_satisfy_the_predicates(seed in any::<u64>(), h in 0.1f64..4.0) {
            let p = random_profile(seed, 150);
            for t in find_traps(&p, h, (p.lo(), p.hi()), false).unwrap() {
                prop_assert!(p.is_trap(t.bottom, t.b1, t.b2, h));
                prop_assert!(t.depth >= h - 1e-9);
                prop_assert_eq!(t.obstacle_free, p.obstacle_free(t.left(), t.right()));
            }
        }

        #[test]
        fn raising_depth_or_shrinking_region_never_adds(seed in any::<u64>(), h in 0.1f64..3.0, dh in 0.0f64..2.0) {
            let p = random_profile(seed, 150);
            let base: Vec<i64> = find_traps(&p, h, (p.lo(), p.hi()), false).unwrap().iter().map(|t| t.bottom).collect();
            let deeper: Vec<i64> = find_traps(&p, h + dh, (p.lo(), p.hi()), false).unwrap().iter().map(|t| t.bottom).collect();
            let narrower: Vec<i64> = find_traps(&p, h, (-50, 50), false).unwrap().iter().map(|t| t.bottom).collect();
            prop_assert!(deeper.iter().all(|b| base.contains(b)));
            prop_assert!(narrower.iter().all(|b| base.contains(b)));
        }

        #[test]
        fn barrier_height_shift_and_bump_properties(seed in any::<u64>(), shift in -5.0f64..5.0, bump in 0.0f64..3.0) {
            let p = random_profile(seed, 40);
            let vals = p.values();
            let obst = vec![false; vals.len()];
            let base = barrier_stats(&p, (p.lo(), p.hi())).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let ps = PotentialProfile::from_values(p.lo(), &shifted, &obst).unwrap();
            prop_assert!((barrier_stats(&ps, (p.lo(), p.hi())).unwrap().h - base.h).abs() < 1e-8);
            let mut bumped = vals.clone();
            for v in bumped.iter_mut().take(60).skip(20) {
                *v += bump;
            }
            let pb = PotentialProfile::from_values(p.lo(), &bumped, &obst).unwrap();
            prop_assert!((barrier_stats(&pb, (p.lo(), p.hi())).unwrap().h - base.h).abs() <= bump + 1e-8);
        }
    }
}
