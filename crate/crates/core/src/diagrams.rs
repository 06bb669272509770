//! Collision patterns: sequences of walker pairs with no immediate repetition.
//!
//! Walkers are numbered `1..=h` and collisions `1..=m`; a parent value of `0`
//! means "no earlier collision".

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Module};
use crate::{Error, Result};

/// Default limit on exhaustive enumeration.
pub const DEFAULT_CAP: u128 = 10_000_000;

/// An unordered pair `{i, j}` of walkers stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", try_from = "[usize; 2]")]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b || a == 0 || b == 0 {
            return Err(Error::Domain(format!("invalid pair {{{a}, {b}}}")));
        }
        Ok(Self { i: a.min(b), j: a.max(b) })
    }

    pub fn contains(&self, walker: usize) -> bool {
        self.i == walker || self.j == walker
    }

    /// Position of the pair in the lexicographic list of pairs of `1..=h`.
    pub fn rank(&self, h: usize) -> usize {
        (self.i - 1) * (2 * h - self.i) / 2 + (self.j - self.i - 1)
    }
}

impl From<Pair> for [usize; 2] {
    fn from(p: Pair) -> Self {
        [p.i, p.j]
    }
}

impl TryFrom<[usize; 2]> for Pair {
    type Error = Error;
    fn try_from(v: [usize; 2]) -> Result<Self> {
        Pair::new(v[0], v[1])
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.i, self.j)
    }
}

/// All pairs of `1..=h` in lexicographic order.
pub fn all_pairs(h: usize) -> Vec<Pair> {
    let mut out = Vec::with_capacity(pair_count(h));
    for i in 1..=h {
        for j in i + 1..=h {
            out.push(Pair { i, j });
        }
    }
    out
}

pub fn pair_count(h: usize) -> usize {
    h * h.saturating_sub(1) / 2
}

/// `|Col^(h,m)| = C(h,2) (C(h,2) - 1)^(m-1)`, saturating at `u128::MAX`.
/// The empty pattern (`m = 0`) counts once.
pub fn pattern_count(h: usize, m: usize) -> u128 {
    if m == 0 {
        return 1;
    }
    let p = pair_count(h) as u128;
    if p == 0 {
        return 0;
    }
    let mut count = p;
    for _ in 1..m {
        count = count.saturating_mul(p - 1);
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPattern")]
pub struct CollisionPattern {
    h: usize,
    pairs: Vec<Pair>,
}

#[derive(Deserialize)]
struct RawPattern {
    h: usize,
    pairs: Vec<Pair>,
}

impl TryFrom<RawPattern> for CollisionPattern {
    type Error = Error;
    fn try_from(raw: RawPattern) -> Result<Self> {
        CollisionPattern::new(raw.h, raw.pairs)
    }
}

impl CollisionPattern {
    pub fn new(h: usize, pairs: Vec<Pair>) -> Result<Self> {
        if h == 0 {
            return Err(Error::Domain("a pattern needs h >= 1".into()));
        }
        for (r, p) in pairs.iter().enumerate() {
            if p.i >= p.j || p.j > h || p.i == 0 {
                return Err(Error::Domain(format!("pair {p} at position {} is not within 1..={h}", r + 1)));
            }
            if r > 0 && pairs[r - 1] == *p {
                return Err(Error::Domain(format!("pair {p} repeats at positions {} and {}", r, r + 1)));
            }
        }
        Ok(Self { h, pairs })
    }

    /// Builds a pattern from `(i, j)` tuples.
    pub fn from_tuples(h: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let pairs = pairs.iter().map(|&(a, b)| Pair::new(a, b)).collect::<Result<Vec<_>>>()?;
        Self::new(h, pairs)
    }

    pub fn empty(h: usize) -> Self {
        Self { h, pairs: Vec::new() }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// Walkers taking part in at least one collision, ascending.
    pub fn active_walkers(&self) -> Vec<usize> {
        let mut seen = vec![false; self.h + 1];
        for p in &self.pairs {
            seen[p.i] = true;
            seen[p.j] = true;
        }
        (1..=self.h).filter(|&w| seen[w]).collect()
    }

    pub fn parent_map(&self) -> ParentMap {
        parent_map(&self.pairs)
    }

    pub fn gap_profile(&self) -> GapProfile {
        gap_profile(&self.pairs)
    }
}

impl fmt::Display for CollisionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, p) in self.pairs.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// Parents of both walkers of every collision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentMap {
    pub p_i: Vec<usize>,
    pub p_j: Vec<usize>,
}

impl ParentMap {
    pub fn zero_count(&self) -> usize {
        self.p_i.iter().chain(&self.p_j).filter(|&&p| p == 0).count()
    }

    /// `Σ_r (r - p_i[r]) + (r - p_j[r])`.
    pub fn total_jump(&self) -> usize {
        let jumps = |list: &[usize]| list.iter().enumerate().map(|(k, &p)| k + 1 - p).sum::<usize>();
        jumps(&self.p_i) + jumps(&self.p_j)
    }
}

/// Parent of walker `w` at collision `r` (1-based): the last earlier collision
/// involving `w`, or 0.
pub fn parent_map(pairs: &[Pair]) -> ParentMap {
    let h = pairs.iter().map(|p| p.j).max().unwrap_or(0);
    let mut last = vec![0usize; h + 1];
    let mut p_i = Vec::with_capacity(pairs.len());
    let mut p_j = Vec::with_capacity(pairs.len());
    for (k, p) in pairs.iter().enumerate() {
        p_i.push(last[p.i]);
        p_j.push(last[p.j]);
        last[p.i] = k + 1;
        last[p.j] = k + 1;
    }
    ParentMap { p_i, p_j }
}

/// The A/B partition of collisions and the sorted multiset of parent gaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapProfile {
    /// Collisions whose two walkers share a parent.
    pub set_a: Vec<usize>,
    pub set_b: Vec<usize>,
    /// `|A| + 2|B|`.
    pub eta: usize,
    /// The gaps `r - p`, non-increasing.
    pub gaps_sorted: Vec<usize>,
}

impl GapProfile {
    /// `∏_{k ≤ ⌈m/2⌉} gaps_sorted[k] / (2h)^⌈m/2⌉`.
    pub fn short_ratio(&self, h: usize) -> f64 {
        let m = self.set_a.len() + self.set_b.len();
        let top = m.div_ceil(2);
        let log: f64 = self.gaps_sorted[..top].iter().map(|&g| (g as f64 / (2 * h) as f64).ln()).sum();
        log.exp()
    }
}

pub fn gap_profile(pairs: &[Pair]) -> GapProfile {
    let parents = parent_map(pairs);
    let mut profile = GapProfile { set_a: Vec::new(), set_b: Vec::new(), eta: 0, gaps_sorted: Vec::new() };
    for r in 1..=pairs.len() {
        let (pi, pj) = (parents.p_i[r - 1], parents.p_j[r - 1]);
        if pi == pj {
            profile.set_a.push(r);
            profile.gaps_sorted.push(r - pi);
        } else {
            profile.set_b.push(r);
            profile.gaps_sorted.push(r - pi);
            profile.gaps_sorted.push(r - pj);
        }
    }
    profile.eta = profile.gaps_sorted.len();
    profile.gaps_sorted.sort_unstable_by(|a, b| b.cmp(a));
    profile
}

fn check_sizes(h: usize, m: usize, cap: u128) -> Result<u128> {
    if h < 2 {
        return Err(Error::Domain(format!("enumeration needs h >= 2, got {h}")));
    }
    if m < 1 {
        return Err(Error::Domain("enumeration needs m >= 1".into()));
    }
    let count = pattern_count(h, m);
    if count > cap {
        return Err(Error::TooLarge { count, cap });
    }
    Ok(count)
}

/// Lexicographic stream over `Col^(h,m)` (ordered by pair ranks).
pub fn enumerate_patterns(h: usize, m: usize) -> Result<PatternIter> {
    enumerate_patterns_capped(h, m, DEFAULT_CAP)
}

pub fn enumerate_patterns_capped(h: usize, m: usize, cap: u128) -> Result<PatternIter> {
    let count = check_sizes(h, m, cap)?;
    let pairs = all_pairs(h);
    let ranks = if count == 0 { None } else { Some((0..m).map(|k| k % 2).collect()) };
    Ok(PatternIter { h, pairs, ranks })
}

pub struct PatternIter {
    h: usize,
    pairs: Vec<Pair>,
    ranks: Option<Vec<usize>>,
}

impl PatternIter {
    fn advance(&mut self) {
        let Some(ranks) = self.ranks.as_mut() else { return };
        let p = self.pairs.len();
        let m = ranks.len();
        let mut k = m;
        loop {
            if k == 0 {
                self.ranks = None;
                return;
            }
            k -= 1;
            let mut next = ranks[k] + 1;
            if k > 0 && next == ranks[k - 1] {
                next += 1;
            }
            if next < p {
                ranks[k] = next;
                break;
            }
        }
        for q in k + 1..m {
            ranks[q] = usize::from(ranks[q - 1] == 0);
        }
    }
}

impl Iterator for PatternIter {
    type Item = CollisionPattern;

    fn next(&mut self) -> Option<CollisionPattern> {
        let ranks = self.ranks.as_ref()?;
        let pattern = CollisionPattern { h: self.h, pairs: ranks.iter().map(|&r| self.pairs[r]).collect() };
        self.advance();
        Some(pattern)
    }
}

/// Visits every pattern of `Col^(h,m)` in lexicographic order without
/// allocating per pattern. Returns the number visited.
pub fn for_each_pattern<F: FnMut(&[Pair])>(h: usize, m: usize, cap: u128, mut f: F) -> Result<u128> {
    check_sizes(h, m, cap)?;
    let pairs = all_pairs(h);
    let mut current = Vec::with_capacity(m);
    let mut visited = 0u128;
    fn walk<F: FnMut(&[Pair])>(pairs: &[Pair], m: usize, current: &mut Vec<Pair>, visited: &mut u128, f: &mut F) {
        if current.len() == m {
            *visited += 1;
            f(current);
            return;
        }
        for &p in pairs {
            if current.last() == Some(&p) {
                continue;
            }
            current.push(p);
            walk(pairs, m, current, visited, f);
            current.pop();
        }
    }
    walk(&pairs, m, &mut current, &mut visited, &mut f);
    Ok(visited)
}

/// Uniform draw from `Col^(h,m)`: uniform first pair, then each subsequent
/// pair uniform among those differing from its predecessor.
pub fn sample_pattern<R: Rng + ?Sized>(h: usize, m: usize, rng: &mut R) -> Result<CollisionPattern> {
    if m == 0 {
        return Ok(CollisionPattern::empty(h.max(1)));
    }
    let pairs = all_pairs(h);
    if pairs.is_empty() || (pairs.len() == 1 && m > 1) {
        return Err(Error::Domain(format!("Col^({h},{m}) is empty")));
    }
    let mut ranks = Vec::with_capacity(m);
    let mut prev = rng.random_range(0..pairs.len());
    ranks.push(prev);
    for _ in 1..m {
        let mut r = rng.random_range(0..pairs.len() - 1);
        if r >= prev {
            r += 1;
        }
        ranks.push(r);
        prev = r;
    }
    Ok(CollisionPattern { h, pairs: ranks.into_iter().map(|r| pairs[r]).collect() })
}

/// [`sample_pattern`] with a dedicated random stream for `seed`.
pub fn sample_pattern_seeded(h: usize, m: usize, seed: u64) -> Result<CollisionPattern> {
    sample_pattern(h, m, &mut stream(seed, Module::Patterns, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(h: usize, pairs: &[(usize, usize)]) -> CollisionPattern {
        CollisionPattern::from_tuples(h, pairs).unwrap()
    }

    #[test]
    fn pair_ranks_are_lexicographic() {
        for h in 2..7 {
            for (k, p) in all_pairs(h).iter().enumerate() {
                assert_eq!(p.rank(h), k);
            }
        }
    }

    #[test]
    fn validation_rejects_repeats_and_bad_indices() {
        assert!(CollisionPattern::from_tuples(3, &[(1, 2), (2, 1)]).is_err());
        assert!(CollisionPattern::from_tuples(3, &[(1, 4)]).is_err());
        assert!(Pair::new(2, 2).is_err());
        assert_eq!(Pair::new(3, 1).unwrap(), Pair { i: 1, j: 3 });
    }

    #[test]
    fn small_enumerations() {
        let v: Vec<_> = enumerate_patterns(2, 1).unwrap().collect();
        assert_eq!(v, vec![pat(2, &[(1, 2)])]);
        assert_eq!(enumerate_patterns(2, 2).unwrap().count(), 0);
        assert_eq!(enumerate_patterns(4, 3).unwrap().count(), 150);
        assert!(enumerate_patterns(1, 1).is_err());
        assert!(enumerate_patterns(3, 0).is_err());
        assert!(matches!(enumerate_patterns(10, 9), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn iterator_and_visitor_agree_in_order() {
        let from_iter: Vec<Vec<Pair>> = enumerate_patterns(4, 3).unwrap().map(|p| p.pairs).collect();
        let mut from_visit = Vec::new();
        for_each_pattern(4, 3, DEFAULT_CAP, |p| from_visit.push(p.to_vec())).unwrap();
        assert_eq!(from_iter, from_visit);
        let mut sorted = from_iter.clone();
        sorted.sort();
        assert_eq!(sorted, from_iter);
    }

    #[test]
    fn parent_map_examples() {
        let p = pat(3, &[(1, 2), (2, 3), (1, 2)]).parent_map();
        assert_eq!(p.p_i, vec![0, 1, 1]);
        assert_eq!(p.p_j, vec![0, 0, 2]);
        let p = pat(2, &[(1, 2)]).parent_map();
        assert_eq!((p.p_i, p.p_j), (vec![0], vec![0]));
    }

    #[test]
    fn gap_profile_examples() {
        let g = pat(3, &[(1, 2), (2, 3), (1, 2)]).gap_profile();
        assert_eq!(g.set_a, vec![1]);
        assert_eq!(g.set_b, vec![2, 3]);
        assert_eq!(g.eta, 5);
        assert_eq!(g.gaps_sorted, vec![2, 2, 1, 1, 1]);
        assert!((g.short_ratio(3) - 4.0 / 36.0).abs() < 1e-15);
        let g = pat(2, &[(1, 2)]).gap_profile();
        assert_eq!((g.set_a, g.eta, g.gaps_sorted), (vec![1], 1, vec![1]));
    }

    #[test]
    fn four_walker_pattern_degrees() {
        // Every collision point connects to at most two parents.
        let p = pat(4, &[(1, 2), (3, 4), (2, 3)]);
        let parents = p.parent_map();
        assert_eq!(parents.p_i, vec![0, 0, 1]);
        assert_eq!(parents.p_j, vec![0, 0, 2]);
        assert!(parents.zero_count() <= 4);
        assert_eq!(p.active_walkers(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn total_jump_counts_both_lists() {
        let p = pat(3, &[(1, 2), (2, 3), (1, 2)]).parent_map();
        // (1-0)+(2-1)+(3-1) + (1-0)+(2-0)+(3-2)
        assert_eq!(p.total_jump(), 8);
    }

    #[test]
    fn sampling_is_seeded_and_valid() {
        let a = sample_pattern_seeded(5, 7, 3).unwrap();
        let b = sample_pattern_seeded(5, 7, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.m(), 7);
        assert_eq!(sample_pattern_seeded(2, 1, 99).unwrap(), pat(2, &[(1, 2)]));
        assert!(sample_pattern_seeded(2, 2, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = pat(3, &[(1, 2), (2, 3)]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"h":3,"pairs":[[1,2],[2,3]]}"#);
        let back: CollisionPattern = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<CollisionPattern>(r#"{"h":3,"pairs":[[1,2],[1,2]]}"#).is_err());
    }
}
