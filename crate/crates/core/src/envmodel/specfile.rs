//! Plain-text site-law files.
//!
//! ```text
//! # comments run to end of line
//! format_version = 1
//! d = 1
//! p = 0.5
//! r = 0.5
//! eps0 = 0.05
//! independence = true
//! 0.5 : 1/3 2/3          # weight : p_e1 p_-e1 [p_e2 p_-e2 ...] [theta_bit]
//! 0.5 : 2/3 1/3
//! ```
//!
//! Every key must appear exactly once, before the first atom line. Numbers are
//! decimal literals or rationals `a/b`. Atom lines of a joint law
//! (`independence = false`) end with a `0`/`1` obstacle bit; product laws must
//! not carry one.

use super::{Atom, SiteLawSpec};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const KEYS: [&str; 6] = ["format_version", "d", "p", "r", "eps0", "independence"];

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let err = || Error::Parse { line, msg: format!("invalid number `{tok}`") };
    let v = match tok.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| err())?;
            let b: f64 = b.trim().parse().map_err(|_| err())?;
            if b == 0.0 {
                return Err(err());
            }
            a / b
        }
        None => tok.parse().map_err(|_| err())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err())
    }
}

/// Parses a spec file and checks its structure.
pub fn parse_spec(text: &str) -> Result<SiteLawSpec> {
    let mut values: [Option<(String, usize)>; 6] = Default::default();
    let mut atom_lines: Vec<(String, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.contains(':') {
            atom_lines.push((content.to_string(), line));
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse { line, msg: format!("expected `key = value`, got `{content}`") });
        };
        if !atom_lines.is_empty() {
            return Err(Error::Parse { line, msg: "key after atom lines".into() });
        }
        let key = key.trim();
        let Some(slot) = KEYS.iter().position(|&k| k == key) else {
            return Err(Error::Parse { line, msg: format!("unknown key `{key}`") });
        };
        if values[slot].is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
        }
        values[slot] = Some((value.trim().to_string(), line));
    }

    let get = |k: usize| -> Result<(&str, usize)> {
        values[k].as_ref().map(|(v, l)| (v.as_str(), *l)).ok_or_else(|| Error::Parse {
            line: text.lines().count().max(1),
            msg: format!("missing key `{}`", KEYS[k]),
        })
    };

    let (v, line) = get(0)?;
    let version: u32 =
        v.parse().map_err(|_| Error::Parse { line, msg: format!("invalid format_version `{v}`") })?;
    if version != FORMAT_VERSION {
        return Err(Error::Parse { line, msg: format!("unsupported format_version {version}") });
    }
    let (v, line) = get(1)?;
    let dim: usize = v
        .parse()
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::Parse { line, msg: format!("invalid dimension `{v}`") })?;
    let (v, line) = get(2)?;
    let p = parse_number(v, line)?;
    let (v, line) = get(3)?;
    let r = parse_number(v, line)?;
    let (v, line) = get(4)?;
    let eps0 = parse_number(v, line)?;
    let (v, line) = get(5)?;
    let independent = match v {
        "true" => true,
        "false" => false,
        _ => return Err(Error::Parse { line, msg: format!("independence must be true/false, got `{v}`") }),
    };

    if atom_lines.is_empty() {
        return Err(Error::Parse { line: text.lines().count().max(1), msg: "no atom lines".into() });
    }
    let mut atoms = Vec::with_capacity(atom_lines.len());
    for (content, line) in &atom_lines {
        let line = *line;
        let (w, rest) = content.split_once(':').expect("atom lines contain ':'");
        let weight = parse_number(w.trim(), line)?;
        let toks: Vec<&str> = rest.split_whitespace().collect();
        let expected = 2 * dim + usize::from(!independent);
        if toks.len() != expected {
            return Err(Error::Parse {
                line,
                msg: format!("atom has {} fields after `:`, expected {expected}", toks.len()),
            });
        }
        let moves =
            toks[..2 * dim].iter().map(|t| parse_number(t, line)).collect::<Result<Vec<_>>>()?;
        let obstacle = if independent {
            None
        } else {
            match toks[2 * dim] {
                "0" => Some(false),
                "1" => Some(true),
                t => return Err(Error::Parse { line, msg: format!("obstacle bit must be 0/1, got `{t}`") }),
            }
        };
        atoms.push(Atom { weight, moves, obstacle });
    }
    SiteLawSpec::new(dim, atoms, p, r, independent, eps0)
}

/// Canonical text form; parses back to an identical spec.
pub fn format_spec(spec: &SiteLawSpec) -> String {
    let mut out = format!(
        "format_version = {FORMAT_VERSION}\nd = {}\np = {}\nr = {}\neps0 = {}\nindependence = {}\n",
        spec.dim, spec.p, spec.r, spec.eps0, spec.independent
    );
    for atom in &spec.atoms {
        out.push_str(&format!("{} :", atom.weight));
        for m in &atom.moves {
            out.push_str(&format!(" {m}"));
        }
        if let Some(bit) = atom.obstacle {
            out.push_str(if bit { " 1" } else { " 0" });
        }
        out.push('\n');
    }
    out
}

pub fn read_spec(path: &std::path::Path) -> Result<SiteLawSpec> {
    parse_spec(&std::fs::read_to_string(path)?)
}
