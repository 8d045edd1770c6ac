use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{validate_spec, SiteLawSpec};
use crate::error::{Error, Result};
use crate::rng::{site_uniform, site_uniform_1d, Stream};

/// Largest number of sites a stored environment may hold by default.
pub const DEFAULT_MAX_SITES: u64 = 50_000_000;

/// Inclusive integer box `Π [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Window {
    pub fn line(lo: i64, hi: i64) -> Self {
        Self { lo: vec![lo], hi: vec![hi] }
    }

    /// `[-radius, radius]^dim`.
    pub fn cube(dim: usize, radius: i64) -> Self {
        Self { lo: vec![-radius; dim], hi: vec![radius; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> u64 {
        if self.hi[axis] < self.lo[axis] {
            0
        } else {
            (self.hi[axis] - self.lo[axis]) as u64 + 1
        }
    }

    pub fn volume(&self) -> u128 {
        (0..self.dim()).map(|a| self.side(a) as u128).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&c, (&l, &h))| l <= c && c <= h)
    }

    /// Row-major index, last axis fastest.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for a in 0..self.dim() {
            idx = idx * self.side(a) as usize + (x[a] - self.lo[a]) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        let mut x = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let s = self.side(a) as usize;
            x[a] = self.lo[a] + (idx % s) as i64;
            idx /= s;
        }
        x
    }
}

/// Read access to an environment on all of `Z^d`.
pub trait SiteField: Sync {
    fn dim(&self) -> usize;

    /// Transition probabilities at `x`, ordered `e1, -e1, e2, -e2, ...`.
    fn moves(&self, x: &[i64]) -> &[f64];

    fn obstacle(&self, x: &[i64]) -> bool;

    fn omega_plus(&self, x: i64) -> f64 {
        self.moves(&[x])[0]
    }

    fn obstacle_1d(&self, x: i64) -> bool {
        self.obstacle(&[x])
    }
}

/// An environment materialized lazily from `(spec, seed)`: the site at `x` is
/// a pure function of the seed and `x`.
#[derive(Clone, Debug)]
pub struct SampledField {
    spec: Arc<SiteLawSpec>,
    seed: u64,
    cumulative: Vec<f64>,
}

impl SampledField {
    pub fn new(spec: Arc<SiteLawSpec>, seed: u64) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = spec
            .atoms
            .iter()
            .map(|a| {
                acc += a.weight;
                acc
            })
            .collect();
        if let Some(last) = cumulative.last_mut() {
            *last = f64::INFINITY;
        }
        Self { spec, seed, cumulative }
    }

    pub fn spec(&self) -> &SiteLawSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn pick(&self, u: f64) -> usize {
        self.cumulative.iter().position(|&c| u < c).unwrap_or(self.cumulative.len() - 1)
    }

    pub fn atom_index(&self, x: &[i64]) -> usize {
        self.pick(site_uniform(self.seed, Stream::Atom, x))
    }

    #[inline]
    pub fn atom_index_1d(&self, x: i64) -> usize {
        self.pick(site_uniform_1d(self.seed, Stream::Atom, x))
    }
}

impl SiteField for SampledField {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn moves(&self, x: &[i64]) -> &[f64] {
        &self.spec.atoms[self.atom_index(x)].moves
    }

    fn obstacle(&self, x: &[i64]) -> bool {
        if self.spec.independent {
            site_uniform(self.seed, Stream::Obstacle, x) < self.spec.p
        } else {
            self.spec.atoms[self.atom_index(x)].obstacle == Some(true)
        }
    }

    #[inline]
    fn omega_plus(&self, x: i64) -> f64 {
        self.spec.atoms[self.atom_index_1d(x)].moves[0]
    }

    #[inline]
    fn obstacle_1d(&self, x: i64) -> bool {
        if self.spec.independent {
            site_uniform_1d(self.seed, Stream::Obstacle, x) < self.spec.p
        } else {
            self.spec.atoms[self.atom_index_1d(x)].obstacle == Some(true)
        }
    }
}

/// Transition probabilities from one field, obstacles from another. Used for
/// the mixed measures, where one half of the environment is held fixed.
pub struct SplitField<'a, A: ?Sized, B: ?Sized> {
    pub omega: &'a A,
    pub theta: &'a B,
}

impl<A: SiteField + ?Sized, B: SiteField + ?Sized> SiteField for SplitField<'_, A, B> {
    fn dim(&self) -> usize {
        self.omega.dim()
    }

    fn moves(&self, x: &[i64]) -> &[f64] {
        self.omega.moves(x)
    }

    fn obstacle(&self, x: &[i64]) -> bool {
        self.theta.obstacle(x)
    }

    fn omega_plus(&self, x: i64) -> f64 {
        self.omega.omega_plus(x)
    }

    fn obstacle_1d(&self, x: i64) -> bool {
        self.theta.obstacle_1d(x)
    }
}

#[derive(Clone, Debug)]
enum Exterior {
    Sampled(SampledField),
    Uniform { moves: Vec<f64>, obstacle: bool },
}

/// A stored window of sites. Outside the window the environment continues
/// either with the same site-addressed sampler (sampled environments) or with a
/// fixed exterior site (hand-built environments).
#[derive(Clone, Debug)]
pub struct Environment {
    window: Window,
    moves: Vec<f64>,
    obstacles: Vec<bool>,
    exterior: Exterior,
}

/// Samples the sites of `window` from `spec` with the default size cap.
pub fn sample_environment(spec: &SiteLawSpec, window: &Window, seed: u64) -> Result<Environment> {
    sample_environment_capped(spec, window, seed, DEFAULT_MAX_SITES)
}

pub fn sample_environment_capped(
    spec: &SiteLawSpec,
    window: &Window,
    seed: u64,
    max_sites: u64,
) -> Result<Environment> {
    let report = validate_spec(spec)?;
    if !report.passes() {
        return Err(Error::Domain(format!(
            "cannot sample from a spec failing its standing assumptions: {}",
            report.messages.join("; ")
        )));
    }
    if window.dim() != spec.dim {
        return Err(Error::Domain(format!(
            "window has dimension {}, spec has {}",
            window.dim(),
            spec.dim
        )));
    }
    let volume = window.volume();
    if volume > max_sites as u128 {
        return Err(Error::Resource(format!("window of {volume} sites exceeds cap {max_sites}")));
    }
    let field = SampledField::new(Arc::new(spec.clone()), seed);
    let n = volume as usize;
    let mut moves = Vec::with_capacity(n * 2 * spec.dim);
    let mut obstacles = Vec::with_capacity(n);
    if spec.dim == 1 {
        for x in window.lo[0]..=window.hi[0] {
            moves.extend_from_slice(&spec.atoms[field.atom_index_1d(x)].moves);
            obstacles.push(field.obstacle_1d(x));
        }
    } else {
        for idx in 0..n {
            let x = window.point(idx);
            moves.extend_from_slice(field.moves(&x));
            obstacles.push(field.obstacle(&x));
        }
    }
    Ok(Environment { window: window.clone(), moves, obstacles, exterior: Exterior::Sampled(field) })
}

fn check_moves(m: &[f64]) -> Result<()> {
    let s: f64 = m.iter().sum();
    if m.iter().any(|&q| !(0.0..=1.0).contains(&q)) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::Malformed(format!("transition vector {m:?} is not a probability vector")));
    }
    Ok(())
}

impl Environment {
    /// Hand-built environment on `window`; `moves` holds `2d` entries per site
    /// in window order. Sites outside the window all equal the exterior site.
    pub fn explicit(
        window: Window,
        moves: Vec<f64>,
        obstacles: Vec<bool>,
        exterior_moves: Vec<f64>,
        exterior_obstacle: bool,
    ) -> Result<Self> {
        let d = window.dim();
        let n = window.volume() as usize;
        if moves.len() != 2 * d * n || obstacles.len() != n || exterior_moves.len() != 2 * d {
            return Err(Error::Malformed("site arrays do not match the window".into()));
        }
        for m in moves.chunks(2 * d).chain(std::iter::once(exterior_moves.as_slice())) {
            check_moves(m)?;
        }
        Ok(Self {
            window,
            moves,
            obstacles,
            exterior: Exterior::Uniform { moves: exterior_moves, obstacle: exterior_obstacle },
        })
    }

    /// One-dimensional hand-built environment on `[lo, lo + len − 1]`.
    pub fn line(
        lo: i64,
        omega_plus: &[f64],
        obstacles: &[bool],
        exterior: (f64, bool),
    ) -> Result<Self> {
        let hi = lo + omega_plus.len() as i64 - 1;
        let moves = omega_plus.iter().flat_map(|&u| [u, 1.0 - u]).collect();
        Self::explicit(
            Window::line(lo, hi),
            moves,
            obstacles.to_vec(),
            vec![exterior.0, 1.0 - exterior.0],
            exterior.1,
        )
    }

    /// Every site identical.
    pub fn homogeneous(dim: usize, moves: Vec<f64>, obstacle: bool) -> Result<Self> {
        Self::explicit(Window::cube(dim, 0), moves.clone(), vec![obstacle], moves, obstacle)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.exterior {
            Exterior::Sampled(f) => Some(f.seed),
            Exterior::Uniform { .. } => None,
        }
    }

    pub fn spec(&self) -> Option<&SiteLawSpec> {
        match &self.exterior {
            Exterior::Sampled(f) => Some(&f.spec),
            Exterior::Uniform { .. } => None,
        }
    }

    /// Re-samples the same window from the stored spec and seed.
    pub fn regenerate(&self) -> Result<Self> {
        match &self.exterior {
            Exterior::Sampled(f) => sample_environment(&f.spec, &self.window, f.seed),
            Exterior::Uniform { .. } => {
                Err(Error::NotApplicable("hand-built environments have no seed".into()))
            }
        }
    }

    /// The same environment on a different window (sampled environments only).
    pub fn rewindow(&self, window: &Window) -> Result<Self> {
        match &self.exterior {
            Exterior::Sampled(f) => sample_environment(&f.spec, window, f.seed),
            Exterior::Uniform { .. } => {
                Err(Error::NotApplicable("hand-built environments cannot be re-windowed".into()))
            }
        }
    }

    /// Stored obstacle bits, in window order.
    pub fn obstacle_bits(&self) -> &[bool] {
        &self.obstacles
    }

    /// Stored transition vectors, `2d` entries per site in window order.
    pub fn move_table(&self) -> &[f64] {
        &self.moves
    }

    fn index_1d(&self, x: i64) -> Option<usize> {
        let lo = self.window.lo[0];
        (x >= lo && x <= self.window.hi[0]).then(|| (x - lo) as usize)
    }
}

impl PartialEq for Environment {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window
            && self.moves == other.moves
            && self.obstacles == other.obstacles
            && self.seed() == other.seed()
    }
}

impl SiteField for Environment {
    fn dim(&self) -> usize {
        self.window.dim()
    }

    fn moves(&self, x: &[i64]) -> &[f64] {
        let d2 = 2 * self.dim();
        match self.window.index_of(x) {
            Some(i) => &self.moves[i * d2..(i + 1) * d2],
            None => match &self.exterior {
                Exterior::Sampled(f) => f.moves(x),
                Exterior::Uniform { moves, .. } => moves,
            },
        }
    }

    fn obstacle(&self, x: &[i64]) -> bool {
        match self.window.index_of(x) {
            Some(i) => self.obstacles[i],
            None => match &self.exterior {
                Exterior::Sampled(f) => f.obstacle(x),
                Exterior::Uniform { obstacle, .. } => *obstacle,
            },
        }
    }

    #[inline]
    fn omega_plus(&self, x: i64) -> f64 {
        match self.index_1d(x) {
            Some(i) => self.moves[2 * i],
            None => match &self.exterior {
                Exterior::Sampled(f) => f.omega_plus(x),
                Exterior::Uniform { moves, .. } => moves[0],
            },
        }
    }

    #[inline]
    fn obstacle_1d(&self, x: i64) -> bool {
        match self.index_1d(x) {
            Some(i) => self.obstacles[i],
            None => match &self.exterior {
                Exterior::Sampled(f) => f.obstacle_1d(x),
                Exterior::Uniform { obstacle, .. } => *obstacle,
            },
        }
    }
}
