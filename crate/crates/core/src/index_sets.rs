//! Multi-index sets for polynomial approximation spaces: weighted `l^p` balls
//! and weighted hyperbolic crosses, intersected with a per-coordinate degree cap.
//!
//! Generated sets are ordered by total degree, ties broken lexicographically.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MEMBER_LIMIT: usize = 1_000_000;

/// Slack toward inclusion in membership tests.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum IndexSetKind {
    /// `||gamma ⊙ lambda||_p <= k`; `p = f64::INFINITY` for the max norm.
    LpBall { p: f64 },
    /// `||gamma ⊙ log(lambda + 1)||_1 <= log(k + 1)`.
    HyperbolicCross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSetSpec {
    pub kind: IndexSetKind,
    pub radius: f64,
    pub gamma: Vec<f64>,
    pub degree_cap: usize,
    #[serde(default = "default_limit")]
    pub member_limit: usize,
}

fn default_limit() -> usize {
    DEFAULT_MEMBER_LIMIT
}

impl IndexSetSpec {
    pub fn new(kind: IndexSetKind, radius: f64, gamma: Vec<f64>, degree_cap: usize) -> Self {
        Self {
            kind,
            radius,
            gamma,
            degree_cap,
            member_limit: DEFAULT_MEMBER_LIMIT,
        }
    }

    pub fn isotropic(kind: IndexSetKind, radius: f64, dim: usize, degree_cap: usize) -> Self {
        Self::new(kind, radius, vec![1.0; dim], degree_cap)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self) -> Result<()> {
        if self.gamma.is_empty() {
            return Err(Error::InvalidIndexSpec("dimension must be at least 1".into()));
        }
        if self.gamma.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidIndexSpec("gamma entries must be positive".into()));
        }
        if !(self.radius >= 0.0) {
            return Err(Error::InvalidIndexSpec("radius must be non-negative".into()));
        }
        if let IndexSetKind::LpBall { p } = self.kind {
            if !(p >= 1.0) {
                return Err(Error::InvalidIndexSpec("p must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Term contributed by coordinate `j` at degree `n`, plus the budget the
    /// terms must stay within.
    fn term(&self, j: usize, n: usize) -> f64 {
        let g = self.gamma[j];
        match self.kind {
            IndexSetKind::LpBall { p } if p.is_infinite() => g * n as f64,
            IndexSetKind::LpBall { p } => (g * n as f64).powf(p),
            IndexSetKind::HyperbolicCross => g * ((n + 1) as f64).ln(),
        }
    }

    fn budget(&self) -> f64 {
        match self.kind {
            IndexSetKind::LpBall { p } if p.is_infinite() => self.radius,
            IndexSetKind::LpBall { p } => self.radius.powf(p),
            IndexSetKind::HyperbolicCross => (self.radius + 1.0).ln(),
        }
    }

    fn combine(&self, acc: f64, term: f64) -> f64 {
        match self.kind {
            IndexSetKind::LpBall { p } if p.is_infinite() => acc.max(term),
            _ => acc + term,
        }
    }

    /// Largest admissible degree in coordinate `j` on its own.
    fn coordinate_bound(&self, j: usize) -> usize {
        let g = self.gamma[j];
        let raw = match self.kind {
            IndexSetKind::LpBall { .. } => self.radius / g,
            IndexSetKind::HyperbolicCross => (self.radius + 1.0).powf(1.0 / g) - 1.0,
        };
        let raw = (raw + BOUNDARY_SLACK).floor();
        if raw.is_finite() && raw < self.degree_cap as f64 {
            raw.max(0.0) as usize
        } else {
            self.degree_cap
        }
    }

    pub fn contains(&self, idx: &MultiIndex) -> bool {
        if idx.dim() != self.dim() || idx.0.iter().any(|&n| n > self.degree_cap) {
            return false;
        }
        let value = idx
            .0
            .iter()
            .enumerate()
            .fold(0.0, |acc, (j, &n)| self.combine(acc, self.term(j, n)));
        value <= self.budget() + BOUNDARY_SLACK
    }
}

/// Total degree first, then lexicographic.
pub fn canonical_order(a: &MultiIndex, b: &MultiIndex) -> std::cmp::Ordering {
    a.total_degree()
        .cmp(&b.total_degree())
        .then_with(|| a.0.cmp(&b.0))
}

pub fn generate(spec: &IndexSetSpec) -> Result<Vec<MultiIndex>> {
    spec.validate()?;
    let d = spec.dim();
    let bounds: Vec<usize> = (0..d).map(|j| spec.coordinate_bound(j)).collect();
    let budget = spec.budget() + BOUNDARY_SLACK;
    let mut out = Vec::new();
    let mut cur = vec![0usize; d];
    dfs(spec, &bounds, budget, 0, 0.0, &mut cur, &mut out)?;
    out.sort_by(canonical_order);
    Ok(out)
}

fn dfs(
    spec: &IndexSetSpec,
    bounds: &[usize],
    budget: f64,
    j: usize,
    acc: f64,
    cur: &mut Vec<usize>,
    out: &mut Vec<MultiIndex>,
) -> Result<()> {
    if j == cur.len() {
        if out.len() >= spec.member_limit {
            return Err(Error::IndexSetTooLarge {
                limit: spec.member_limit,
            });
        }
        out.push(MultiIndex(cur.clone()));
        return Ok(());
    }
    for n in 0..=bounds[j] {
        let next = spec.combine(acc, spec.term(j, n));
        if next > budget {
            break;
        }
        cur[j] = n;
        dfs(spec, bounds, budget, j + 1, next, cur, out)?;
    }
    cur[j] = 0;
    Ok(())
}

pub fn is_monotone_lower(set: &[MultiIndex]) -> bool {
    let members: HashSet<&MultiIndex> = set.iter().collect();
    set.iter().all(|idx| {
        (0..idx.dim()).filter(|&j| idx.0[j] > 0).all(|j| {
            let mut down = idx.clone();
            down.0[j] -= 1;
            members.contains(&down)
        })
    })
}

pub fn effective_dimension(set: &[MultiIndex]) -> usize {
    set.len()
}

/// One index per line, entries separated by single spaces.
pub fn to_text(set: &[MultiIndex]) -> String {
    let mut s = String::new();
    for idx in set {
        let mut first = true;
        for n in &idx.0 {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{n}");
        }
        s.push('\n');
    }
    s
}

pub fn from_text(text: &str) -> Result<Vec<MultiIndex>> {
    let mut out = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let entries = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::IndexSetParse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        match dim {
            None => dim = Some(entries.len()),
            Some(d) if d != entries.len() => {
                return Err(Error::IndexSetParse {
                    line: i + 1,
                    reason: format!("expected {d} entries, found {}", entries.len()),
                })
            }
            _ => {}
        }
        out.push(MultiIndex(entries));
    }
    Ok(out)
}

/// Prefix of the ordered set; graded order keeps any prefix downward closed.
pub fn first_n(set: &[MultiIndex], n: usize) -> Vec<MultiIndex> {
    set.iter().take(n).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn one_dimensional_l1_ball() {
        let spec = IndexSetSpec::isotropic(IndexSetKind::LpBall { p: 1.0 }, 2.0, 1, 10);
        let set = generate(&spec).unwrap();
        assert_eq!(set, vec![mi(&[0]), mi(&[1]), mi(&[2])]);
        assert_eq!(effective_dimension(&set), 3);
    }

    #[test]
    fn hyperbolic_cross_radius_zero_is_the_origin() {
        for d in 1..5 {
            let spec = IndexSetSpec::isotropic(IndexSetKind::HyperbolicCross, 0.0, d, 10);
            let set = generate(&spec).unwrap();
            assert_eq!(set, vec![MultiIndex::zero(d)]);
        }
    }

    /// Brute-force scan of [0..3]^2 against sum log(l_j + 1) <= log 4.
    #[test]
    fn hyperbolic_cross_two_dims_matches_scan() {
        let mut oracle = Vec::new();
        for a in 0..=3usize {
            for b in 0..=3usize {
                let v = ((a + 1) as f64).ln() + ((b + 1) as f64).ln();
                if v <= 4f64.ln() + 1e-12 {
                    oracle.push(mi(&[a, b]));
                }
            }
        }
        assert_eq!(oracle.len(), 8);
        let spec = IndexSetSpec::isotropic(IndexSetKind::HyperbolicCross, 3.0, 2, 10);
        let set = generate(&spec).unwrap();
        let mut got = set.clone();
        got.sort();
        oracle.sort();
        assert_eq!(got, oracle);
        assert_eq!(effective_dimension(&set), 8);
        // graded order: the first entry is the origin, the last two have degree 3
        assert_eq!(set[0], mi(&[0, 0]));
        assert!(set[6].total_degree() == 3 && set[7].total_degree() == 3);
    }

    #[test]
    fn ordering_is_graded_then_lexicographic() {
        let spec = IndexSetSpec::isotropic(IndexSetKind::LpBall { p: 1.0 }, 2.0, 2, 10);
        let set = generate(&spec).unwrap();
        let expected: Vec<MultiIndex> = [[0, 0], [0, 1], [1, 0], [0, 2], [1, 1], [2, 0]]
            .iter()
            .map(|v| mi(v))
            .collect();
        assert_eq!(set, expected);
    }

    #[test]
    fn monotone_lower_examples() {
        assert!(is_monotone_lower(&[mi(&[0, 0]), mi(&[1, 0])]));
        assert!(!is_monotone_lower(&[mi(&[1, 0])]));
        assert!(is_monotone_lower(&[]));
    }

    #[test]
    fn degree_cap_applies() {
        let spec = IndexSetSpec::isotropic(IndexSetKind::LpBall { p: 1.0 }, 5.0, 2, 2);
        let set = generate(&spec).unwrap();
        assert!(set.iter().all(|i| i.0.iter().all(|&n| n <= 2)));
        assert_eq!(set.len(), 9);
    }

    #[test]
    fn member_limit_is_enforced() {
        let mut spec = IndexSetSpec::isotropic(IndexSetKind::LpBall { p: f64::INFINITY }, 4.0, 4, 10);
        spec.member_limit = 100;
        assert_eq!(
            generate(&spec),
            Err(Error::IndexSetTooLarge { limit: 100 })
        );
    }

    #[test]
    fn rejects_bad_specs() {
        let bad_gamma = IndexSetSpec::new(IndexSetKind::HyperbolicCross, 2.0, vec![1.0, 0.0], 5);
        assert!(generate(&bad_gamma).is_err());
        let bad_p = IndexSetSpec::isotropic(IndexSetKind::LpBall { p: 0.5 }, 2.0, 2, 5);
        assert!(generate(&bad_p).is_err());
    }

    #[test]
    fn irrational_radius_boundary_included() {
        // gamma_2 * 2 == k exactly in floating point up to rounding
        let g = 1.0 - 0.99 / 20.0;
        let spec = IndexSetSpec::new(IndexSetKind::LpBall { p: 1.0 }, 2.0 * g, vec![1.0, g], 10);
        let set = generate(&spec).unwrap();
        assert!(set.contains(&mi(&[0, 2])));
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let set = vec![mi(&[0, 0, 1]), mi(&[2, 0, 3])];
        let text = to_text(&set);
        assert_eq!(text, "0 0 1\n2 0 3\n");
        assert_eq!(from_text(&text).unwrap(), set);
        assert!(from_text("0 1\n1\n").is_err());
        assert!(from_text("0 x\n").is_err());
    }
}
