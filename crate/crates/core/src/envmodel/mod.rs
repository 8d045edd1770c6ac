//! Site laws, their standing-assumption checks, and i.i.d. environments.

mod environment;
mod hull;
pub mod specfile;

pub use environment::{
    sample_environment, sample_environment_capped, Environment, SampledField, SiteField,
    SplitField, Window, DEFAULT_MAX_SITES,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// One support point of the site law: a nearest-neighbour transition vector,
/// its probability weight and (for joint laws) the obstacle bit.
///
/// `moves` is ordered `e1, -e1, e2, -e2, ...`, so in one dimension
/// `moves = [ω⁺, ω⁻]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub moves: Vec<f64>,
    pub obstacle: Option<bool>,
}

impl Atom {
    pub fn omega_plus(&self) -> f64 {
        self.moves[0]
    }

    /// Local drift: sum over unit moves of probability times direction.
    pub fn drift(&self) -> Vec<f64> {
        self.moves.chunks(2).map(|pm| pm[0] - pm[1]).collect()
    }
}

/// Finite-support law of `(ω₀, θ₀)`.
///
/// With `independent` set the obstacle bit is Bernoulli(`p`) independent of
/// the transition vector and atoms carry no obstacle bit; otherwise every atom
/// carries its own bit and `p` must equal the obstacle mass of the atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteLawSpec {
    pub dim: usize,
    pub atoms: Vec<Atom>,
    pub p: f64,
    pub r: f64,
    pub independent: bool,
    pub eps0: f64,
}

impl SiteLawSpec {
    /// Builds and structurally checks a spec.
    pub fn new(
        dim: usize,
        atoms: Vec<Atom>,
        p: f64,
        r: f64,
        independent: bool,
        eps0: f64,
    ) -> Result<Self> {
        let spec = Self { dim, atoms, p, r, independent, eps0 };
        spec.check_structure()?;
        Ok(spec)
    }

    /// One-dimensional product law from `(weight, ω⁺)` pairs.
    pub fn one_dim(law: &[(f64, f64)], p: f64, r: f64, eps0: f64) -> Result<Self> {
        let atoms = law
            .iter()
            .map(|&(weight, up)| Atom { weight, moves: vec![up, 1.0 - up], obstacle: None })
            .collect();
        Self::new(1, atoms, p, r, true, eps0)
    }

    /// Same law with every transition vector reflected (`ω⁺ ↔ ω⁻` in each coordinate).
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            for pair in atom.moves.chunks_mut(2) {
                pair.swap(0, 1);
            }
        }
        out
    }

    /// Same transition law with a different obstacle density.
    pub fn with_density(&self, p: f64) -> Result<Self> {
        if !self.independent {
            return Err(Error::NotApplicable(
                "obstacle density of a joint law is fixed by its atoms".into(),
            ));
        }
        Self::new(self.dim, self.atoms.clone(), p, self.r, true, self.eps0)
    }

    pub fn with_killing(&self, r: f64) -> Result<Self> {
        Self::new(self.dim, self.atoms.clone(), self.p, r, self.independent, self.eps0)
    }

    pub fn check_structure(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Malformed(msg));
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if self.atoms.is_empty() {
            return bad("site law has no atoms".into());
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("obstacle density p = {} not in (0,1)", self.p));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return bad(format!("killing probability r = {} not in (0,1)", self.r));
        }
        let max_eps = 1.0 / (2 * self.dim) as f64;
        if !(self.eps0 > 0.0 && self.eps0 <= max_eps + 1e-15) {
            return bad(format!("eps0 = {} not in (0, {}]", self.eps0, max_eps));
        }
        let mut total = 0.0;
        let mut obstacle_mass = 0.0;
        for (i, atom) in self.atoms.iter().enumerate() {
            if !(atom.weight > 0.0) || !atom.weight.is_finite() {
                return bad(format!("atom {i}: weight {} is not strictly positive", atom.weight));
            }
            total += atom.weight;
            if atom.moves.len() != 2 * self.dim {
                return bad(format!(
                    "atom {i}: {} move probabilities, expected {}",
                    atom.moves.len(),
                    2 * self.dim
                ));
            }
            if atom.moves.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
                return bad(format!("atom {i}: move probability outside [0,1]"));
            }
            let s: f64 = atom.moves.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return bad(format!("atom {i}: move probabilities sum to {s}, not 1"));
            }
            match (self.independent, atom.obstacle) {
                (true, Some(_)) => {
                    return bad(format!("atom {i}: obstacle bit given for a product law"))
                }
                (false, None) => return bad(format!("atom {i}: joint law needs an obstacle bit")),
                (false, Some(true)) => obstacle_mass += atom.weight,
                _ => {}
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return bad(format!("atom weights sum to {total}, not 1"));
        }
        if !self.independent && (obstacle_mass - self.p).abs() > NORMALIZATION_TOL {
            return bad(format!(
                "joint atoms carry obstacle mass {obstacle_mass}, but p = {}",
                self.p
            ));
        }
        Ok(())
    }

    /// `(weight, ω⁺)` pairs of a one-dimensional product law.
    pub fn omega_law_1d(&self) -> Result<Vec<(f64, f64)>> {
        if self.dim != 1 {
            return Err(Error::NotApplicable(format!(
                "one-dimensional quantity requested for d = {}",
                self.dim
            )));
        }
        if !self.independent {
            return Err(Error::NotApplicable(
                "one-dimensional theory requires the product law (independence flag)".into(),
            ));
        }
        Ok(self.atoms.iter().map(|a| (a.weight, a.omega_plus())).collect())
    }

    /// Atoms that can occur at an obstacle-free site.
    fn obstacle_free_atoms(&self) -> Vec<usize> {
        (0..self.atoms.len())
            .filter(|&i| self.independent || self.atoms[i].obstacle == Some(false))
            .collect()
    }

    /// Canonical text form and its SHA-256, used to key runs and reports.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = specfile::format_spec(self);
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

/// Certificate backing the nestling verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NestlingWitness {
    /// Indices of obstacle-free atoms with `ω⁺ < 1/2` and `ω⁺ > 1/2`.
    OneDim { below: Option<usize>, above: Option<usize> },
    /// Strictly positive convex weights over `atoms` whose drifts average to zero,
    /// plus the rank of the drift set.
    Hull { atoms: Vec<usize>, weights: Option<Vec<f64>>, rank: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ellipticity: Verdict,
    pub min_move_probability: f64,
    pub nestling: Verdict,
    pub nestling_witness: NestlingWitness,
    pub independence: Verdict,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.ellipticity == Verdict::Pass && self.nestling == Verdict::Pass
    }
}

/// Checks uniform ellipticity, the nestling condition and independence of `(ω, θ)`.
pub fn validate_spec(spec: &SiteLawSpec) -> Result<ValidationReport> {
    spec.check_structure()?;
    let mut messages = Vec::new();

    let min_move_probability = spec
        .atoms
        .iter()
        .flat_map(|a| a.moves.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let ellipticity = if min_move_probability >= spec.eps0 {
        Verdict::Pass
    } else {
        messages.push(format!(
            "ellipticity: smallest move probability {min_move_probability} < eps0 = {}",
            spec.eps0
        ));
        Verdict::Fail
    };

    let free = spec.obstacle_free_atoms();
    let (nestling, nestling_witness) = if spec.dim == 1 {
        let below = free.iter().copied().find(|&i| spec.atoms[i].omega_plus() < 0.5);
        let above = free.iter().copied().find(|&i| spec.atoms[i].omega_plus() > 0.5);
        let verdict = if below.is_some() && above.is_some() {
            Verdict::Pass
        } else {
            messages.push(format!(
                "nestling: obstacle-free support of ω⁺ does not straddle 1/2 (below: {}, above: {})",
                below.is_some(),
                above.is_some()
            ));
            Verdict::Fail
        };
        (verdict, NestlingWitness::OneDim { below, above })
    } else {
        let drifts: Vec<Vec<f64>> = free.iter().map(|&i| spec.atoms[i].drift()).collect();
        let rank = hull::rank(&drifts, spec.dim);
        let weights = if rank == spec.dim { hull::strictly_positive_balance(&drifts) } else { None };
        let verdict = if weights.is_some() {
            Verdict::Pass
        } else {
            messages.push(format!(
                "nestling: 0 is not interior to the hull of {} obstacle-free drifts (rank {rank})",
                drifts.len()
            ));
            Verdict::Fail
        };
        (verdict, NestlingWitness::Hull { atoms: free, weights, rank })
    };

    let independence = if spec.independent {
        Verdict::Pass
    } else if joint_law_factorizes(spec) {
        messages.push("joint atoms happen to factorize into ω and θ marginals".into());
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    Ok(ValidationReport {
        ellipticity,
        min_move_probability,
        nestling,
        nestling_witness,
        independence,
        messages,
    })
}

fn joint_law_factorizes(spec: &SiteLawSpec) -> bool {
    let mut groups: Vec<(&[f64], f64, f64)> = Vec::new();
    for atom in &spec.atoms {
        let hit = atom.obstacle == Some(true);
        match groups.iter_mut().find(|g| g.0 == atom.moves.as_slice()) {
            Some(g) => {
                g.1 += atom.weight;
                if hit {
                    g.2 += atom.weight;
                }
            }
            None => groups.push((&atom.moves, atom.weight, if hit { atom.weight } else { 0.0 })),
        }
    }
    groups.iter().all(|&(_, w, w_obst)| (w_obst - w * spec.p).abs() <= 1e-12)
}

/// Extremes of the ω⁺ support: `β₀ = min ω⁺`, `β₁ = 1 − max ω⁺`.
pub fn beta_extremes(spec: &SiteLawSpec) -> Result<(f64, f64)> {
    let law = spec.omega_law_1d()?;
    let report = validate_spec(spec)?;
    if report.nestling != Verdict::Pass {
        return Err(Error::NotApplicable(
            "β₀, β₁ require the nestling condition".into(),
        ));
    }
    let lo = law.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
    let hi = law.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, 1.0 - hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(a: f64, b: f64) -> SiteLawSpec {
        SiteLawSpec::one_dim(&[(0.5, a), (0.5, b)], 0.5, 0.5, 0.05).unwrap()
    }

    #[test]
    fn symmetric_two_point_law_passes() {
        let spec = SiteLawSpec::one_dim(&[(0.5, 1.0 / 3.0), (0.5, 2.0 / 3.0)], 0.5, 0.5, 1.0 / 3.0)
            .unwrap();
        let rep = validate_spec(&spec).unwrap();
        assert_eq!(rep.ellipticity, Verdict::Pass);
        assert_eq!(rep.nestling, Verdict::Pass);
        assert_eq!(rep.independence, Verdict::Pass);
        assert_eq!(rep.nestling_witness, NestlingWitness::OneDim { below: Some(0), above: Some(1) });
    }

    #[test]
    fn one_sided_support_is_not_nestling() {
        let rep = validate_spec(&two_point(0.6, 0.8)).unwrap();
        assert_eq!(rep.nestling, Verdict::Fail);
        assert_eq!(rep.nestling_witness, NestlingWitness::OneDim { below: None, above: Some(0) });
    }

    #[test]
    fn ellipticity_floor_is_checked() {
        let spec = SiteLawSpec::one_dim(&[(0.5, 0.04), (0.5, 0.7)], 0.5, 0.5, 0.05).unwrap();
        let rep = validate_spec(&spec).unwrap();
        assert_eq!(rep.ellipticity, Verdict::Fail);
        assert_eq!(rep.min_move_probability, 0.04);
    }

    #[test]
    fn four_biased_atoms_in_the_plane_are_nestling() {
        let atoms = (0..4)
            .map(|k| {
                let mut moves = vec![0.2; 4];
                moves[k] = 0.4;
                Atom { weight: 0.25, moves, obstacle: None }
            })
            .collect();
        let spec = SiteLawSpec::new(2, atoms, 0.3, 0.5, true, 0.05).unwrap();
        let rep = validate_spec(&spec).unwrap();
        assert_eq!(rep.nestling, Verdict::Pass);
        let NestlingWitness::Hull { atoms, weights: Some(w), rank } = rep.nestling_witness else {
            panic!("expected a hull certificate");
        };
        assert_eq!(rank, 2);
        assert!(w.iter().all(|&x| x > 0.0));
        let mut balance = [0.0; 2];
        for (&i, &wi) in atoms.iter().zip(&w) {
            for (b, d) in balance.iter_mut().zip(spec.atoms[i].drift()) {
                *b += wi * d;
            }
        }
        assert!(balance.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn three_atoms_in_a_half_plane_are_not_nestling() {
        let atoms = [[0.4, 0.2, 0.2, 0.2], [0.2, 0.2, 0.4, 0.2], [0.2, 0.2, 0.2, 0.4]]
            .iter()
            .map(|m| Atom { weight: 1.0 / 3.0, moves: m.to_vec(), obstacle: None })
            .collect();
        let spec = SiteLawSpec::new(2, atoms, 0.3, 0.5, true, 0.05).unwrap();
        assert_eq!(validate_spec(&spec).unwrap().nestling, Verdict::Fail);
    }

    #[test]
    fn obstacle_atoms_do_not_count_towards_nestling() {
        let atoms = vec![
            Atom { weight: 0.5, moves: vec![0.3, 0.7], obstacle: Some(false) },
            Atom { weight: 0.5, moves: vec![0.7, 0.3], obstacle: Some(true) },
        ];
        let spec = SiteLawSpec::new(1, atoms, 0.5, 0.5, false, 0.05).unwrap();
        let rep = validate_spec(&spec).unwrap();
        assert_eq!(rep.nestling, Verdict::Fail);
        assert_eq!(rep.independence, Verdict::Fail);
    }

    #[test]
    fn malformed_specs_are_rejected() {
        assert!(matches!(
            SiteLawSpec::one_dim(&[(0.5, 0.3), (0.4, 0.7)], 0.5, 0.5, 0.05),
            Err(Error::Malformed(_))
        ));
        assert!(SiteLawSpec::one_dim(&[(1.0, 0.3)], 0.0, 0.5, 0.05).is_err());
        assert!(SiteLawSpec::one_dim(&[(1.0, 0.3)], 0.5, 1.0, 0.05).is_err());
        assert!(SiteLawSpec::one_dim(&[(1.0, 0.3)], 0.5, 0.5, 0.6).is_err());
        let bad_moves = vec![Atom { weight: 1.0, moves: vec![0.5, 0.6], obstacle: None }];
        assert!(SiteLawSpec::new(1, bad_moves, 0.5, 0.5, true, 0.05).is_err());
        let joint_mismatch = vec![Atom { weight: 1.0, moves: vec![0.5, 0.5], obstacle: Some(false) }];
        assert!(SiteLawSpec::new(1, joint_mismatch, 0.5, 0.5, false, 0.05).is_err());
    }

    #[test]
    fn beta_extremes_read_off_the_support() {
        let (b0, b1) = beta_extremes(&two_point(1.0 / 3.0, 2.0 / 3.0)).unwrap();
        assert_eq!((b0, b1), (1.0 / 3.0, 1.0 - 2.0 / 3.0));
        let spec = SiteLawSpec::one_dim(&[(0.3, 0.1), (0.3, 0.5), (0.4, 0.75)], 0.5, 0.5, 0.05)
            .unwrap();
        assert_eq!(beta_extremes(&spec).unwrap(), (0.1, 0.25));
        let (b0, b1) = beta_extremes(&two_point(0.2, 0.8)).unwrap();
        assert_eq!(b0, 0.2);
        assert!((b1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn beta_extremes_need_one_dimensional_product_law() {
        let atoms = vec![Atom { weight: 1.0, moves: vec![0.25; 4], obstacle: None }];
        let spec = SiteLawSpec::new(2, atoms, 0.5, 0.5, true, 0.05).unwrap();
        assert!(matches!(beta_extremes(&spec), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn mirroring_reflects_every_move() {
        let spec = two_point(0.3, 0.8);
        let m = spec.mirrored();
        assert_eq!(m.atoms[0].moves, vec![0.7, 0.3]);
        assert_eq!(m.mirrored(), spec);
    }
}
