//! Configuration-model realizations as half-edge pairings, and percolation
//! at the level of degrees.
//!
//! Vertex `v` owns the contiguous half-edge block `offsets[v]..offsets[v+1]`,
//! so retention indicators and pairings are reproducible from a seed.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::degrees::{criticality, DegreeSequence, Exponents};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, substream};

/// A multigraph given by a perfect matching of half-edges. Self-loops and
/// parallel edges are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfEdgeGraph {
    n: usize,
    offsets: Vec<usize>,
    owner: Vec<u32>,
    mate: Vec<u32>,
}

impl HalfEdgeGraph {
    fn with_blocks(degrees: &[u32]) -> (Vec<usize>, Vec<u32>) {
        let mut offsets = Vec::with_capacity(degrees.len() + 1);
        let mut owner = Vec::new();
        offsets.push(0);
        for (v, &d) in degrees.iter().enumerate() {
            owner.extend(std::iter::repeat_n(v as u32, d as usize));
            offsets.push(owner.len());
        }
        (offsets, owner)
    }

    /// Builds a graph from an explicit 0-based edge list. Half-edges of each
    /// vertex are consumed in the order the edges are listed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut deg = vec![0u32; n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Domain(format!("edge ({u},{v}) outside vertex range 0..{n}")));
            }
            deg[u] += 1;
            deg[v] += 1;
        }
        let (offsets, owner) = Self::with_blocks(&deg);
        let mut next: Vec<usize> = offsets[..n].to_vec();
        let mut mate = vec![0u32; owner.len()];
        for &(u, v) in edges {
            let a = next[u];
            next[u] += 1;
            let b = next[v];
            next[v] += 1;
            mate[a] = b as u32;
            mate[b] = a as u32;
        }
        Ok(Self { n, offsets, owner, mate })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of half-edges, `ell_n`.
    pub fn half_edge_count(&self) -> usize {
        self.mate.len()
    }

    pub fn edge_count(&self) -> usize {
        self.mate.len() / 2
    }

    pub fn degree(&self, v: usize) -> u32 {
        (self.offsets[v + 1] - self.offsets[v]) as u32
    }

    pub fn degrees(&self) -> Vec<u32> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    pub fn half_edges(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub fn owner(&self, h: usize) -> usize {
        self.owner[h] as usize
    }

    pub fn mate(&self, h: usize) -> usize {
        self.mate[h] as usize
    }

    /// Neighbours of `v` with multiplicity, in half-edge order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.half_edges(v).map(move |h| self.owner(self.mate(h)))
    }

    /// Each edge once, as `(u, v)` with the lower half-edge first.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.mate.len())
            .filter(|&h| h < self.mate(h))
            .map(|h| (self.owner(h), self.owner(self.mate(h))))
            .collect()
    }

    /// True when `mate` is a fixed-point-free involution consistent with the blocks.
    pub fn is_valid_matching(&self) -> bool {
        let ell = self.mate.len();
        self.offsets.len() == self.n + 1
            && self.offsets[self.n] == ell
            && (0..ell).all(|h| {
                let m = self.mate(h);
                m < ell && m != h && self.mate(m) == h
            })
    }

    /// Edge list text: header `# n=<n> m=<edges>`, then `u v` per line, 1-based.
    pub fn to_edge_list(&self) -> String {
        let edges = self.edges();
        let mut out = format!("# n={} m={}\n", self.n, edges.len());
        for (u, v) in edges {
            let _ = writeln!(out, "{} {}", u + 1, v + 1);
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut m: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("n=") {
                        n = v.parse().ok();
                    } else if let Some(v) = tok.strip_prefix("m=") {
                        m = v.parse().ok();
                    }
                }
                continue;
            }
            let bad = || Error::Parse(format!("line {}: expected 'u v', got {line:?}", lineno + 1));
            let mut it = line.split_whitespace();
            let u: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let v: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if u == 0 || v == 0 || it.next().is_some() {
                return Err(bad());
            }
            edges.push((u - 1, v - 1));
        }
        let n = n.ok_or_else(|| Error::Parse("missing '# n=<n> m=<m>' header".into()))?;
        if let Some(m) = m {
            if m != edges.len() {
                return Err(Error::Parse(format!("header says m={m}, found {} edges", edges.len())));
            }
        }
        Self::from_edges(n, &edges)
    }
}

/// Uniform pairing of half-edges: the lowest-index unpaired half-edge is
/// matched with a uniformly chosen other unpaired half-edge until none remain.
pub fn pair_degrees(degrees: &[u32], seed: u64) -> Result<HalfEdgeGraph> {
    let ell: u64 = degrees.iter().map(|&d| d as u64).sum();
    if ell % 2 == 1 {
        return Err(Error::Parity { ell });
    }
    let (offsets, owner) = HalfEdgeGraph::with_blocks(degrees);
    let ell = owner.len();
    let mut rng = rng_from_seed(seed);
    // free[pos[h]] == h for every unpaired h
    let mut free: Vec<u32> = (0..ell as u32).collect();
    let mut pos: Vec<u32> = (0..ell as u32).collect();
    let mut mate = vec![u32::MAX; ell];
    let remove = |free: &mut Vec<u32>, pos: &mut Vec<u32>, h: u32| {
        let i = pos[h as usize] as usize;
        let last = *free.last().expect("non-empty free list");
        free[i] = last;
        pos[last as usize] = i as u32;
        free.pop();
    };
    for h in 0..ell as u32 {
        if mate[h as usize] != u32::MAX {
            continue;
        }
        remove(&mut free, &mut pos, h);
        let f = free[rng.random_range(0..free.len())];
        remove(&mut free, &mut pos, f);
        mate[h as usize] = f;
        mate[f as usize] = h;
    }
    Ok(HalfEdgeGraph { n: degrees.len(), offsets, owner, mate })
}

pub fn pair_half_edges(d: &DegreeSequence, seed: u64) -> Result<HalfEdgeGraph> {
    pair_degrees(d.degrees(), seed)
}

/// No self-loops and no parallel edges.
pub fn is_simple(g: &HalfEdgeGraph) -> bool {
    let mut mark = vec![usize::MAX; g.n()];
    for v in 0..g.n() {
        for w in g.neighbors(v) {
            if w == v || mark[w] == v {
                return false;
            }
            mark[w] = v;
        }
    }
    true
}

#[derive(Debug, Clone)]
pub struct SimpleSample {
    pub graph: HalfEdgeGraph,
    pub attempts: usize,
}

pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

/// Rejection sampling of a uniform simple graph with degrees `d`.
pub fn sample_simple(d: &DegreeSequence, seed: u64, max_attempts: usize) -> Result<SimpleSample> {
    if !d.is_even() {
        return Err(Error::Parity { ell: d.ell() });
    }
    for attempt in 1..=max_attempts {
        let g = pair_half_edges(d, substream(seed, attempt as u64))?;
        if is_simple(&g) {
            return Ok(SimpleSample { graph: g, attempts: attempt });
        }
    }
    Err(Error::RejectionFailure { attempts: max_attempts })
}

/// `clamp(1/nu_n + lambda n^-eta, 0, 1)`.
pub fn critical_p(d: &DegreeSequence, exp: &Exponents) -> Result<f64> {
    let nu = criticality(d)?;
    if nu <= 1.0 {
        return Err(Error::Domain(format!(
            "percolation window needs a supercritical base sequence, nu_n = {nu}"
        )));
    }
    Ok((1.0 / nu + exp.lambda * (d.n() as f64).powf(-exp.eta)).clamp(0.0, 1.0))
}

/// Percolated degrees, aligned with the original vertex labels.
#[derive(Debug, Clone)]
pub struct PercolationOutcome {
    /// Number of retained edges `R_n`.
    pub retained_count: u64,
    pub percolated_degrees: Vec<u32>,
    /// Per half-edge retention indicator, in block order.
    pub retention: Vec<bool>,
}

impl PercolationOutcome {
    /// Falling-factorial moment `sum_i (d_i^p)_r` for `r` in {1, 2}.
    pub fn factorial_moment(&self, r: u32) -> f64 {
        factorial_moment(&self.percolated_degrees, r)
    }
}

pub fn factorial_moment(degrees: &[u32], r: u32) -> f64 {
    degrees
        .iter()
        .map(|&d| {
            let d = d as f64;
            (0..r).map(|k| d - k as f64).product::<f64>().max(0.0)
        })
        .sum()
}

/// Keeps `R_n ~ Bin(ell_n/2, p)` edges' worth of half-edges, chosen as a
/// uniform subset of size `2 R_n`.
pub fn percolate_degrees(d: &DegreeSequence, p: f64, seed: u64) -> Result<PercolationOutcome> {
    percolate_degree_list(d.degrees(), p, seed)
}

pub fn percolate_degree_list(degrees: &[u32], p: f64, seed: u64) -> Result<PercolationOutcome> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("retention probability must lie in [0,1], got {p}")));
    }
    let ell: u64 = degrees.iter().map(|&d| d as u64).sum();
    if ell % 2 == 1 {
        return Err(Error::Parity { ell });
    }
    let mut rng = rng_from_seed(seed);
    let binom = Binomial::new(ell / 2, p).map_err(|e| Error::Domain(e.to_string()))?;
    let retained = binom.sample(&mut rng);
    let mut retention = vec![false; ell as usize];
    for h in index::sample(&mut rng, ell as usize, 2 * retained as usize) {
        retention[h] = true;
    }
    let mut percolated = Vec::with_capacity(degrees.len());
    let mut h = 0usize;
    for &dv in degrees {
        let kept = retention[h..h + dv as usize].iter().filter(|&&b| b).count();
        percolated.push(kept as u32);
        h += dv as usize;
    }
    Ok(PercolationOutcome { retained_count: retained, percolated_degrees: percolated, retention })
}

/// A configuration model on the percolated degrees.
pub fn realize_percolated(outcome: &PercolationOutcome, seed: u64) -> Result<HalfEdgeGraph> {
    pair_degrees(&outcome.percolated_degrees, seed)
}

/// Deletes every edge incident to the first `k` vertices (the largest hubs).
pub fn remove_hubs(g: &HalfEdgeGraph, k: usize) -> Result<HalfEdgeGraph> {
    if k > g.n() {
        return Err(Error::Domain(format!("K={k} exceeds n={}", g.n())));
    }
    let kept: Vec<(usize, usize)> = g.edges().into_iter().filter(|&(u, v)| u >= k && v >= k).collect();
    HalfEdgeGraph::from_edges(g.n(), &kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[u32]) -> DegreeSequence {
        DegreeSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_leaves_one_edge() {
        let g = pair_half_edges(&seq(&[1, 1]), 3).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert!(is_simple(&g));
    }

    #[test]
    fn single_vertex_loop() {
        let g = pair_half_edges(&seq(&[2]), 3).unwrap();
        assert_eq!(g.edges(), vec![(0, 0)]);
        assert!(!is_simple(&g));
    }

    #[test]
    fn two_twos_never_simple() {
        for s in 0..50 {
            assert!(!is_simple(&pair_half_edges(&seq(&[2, 2]), s).unwrap()));
        }
        assert!(matches!(
            sample_simple(&seq(&[2, 2]), 1, 25),
            Err(Error::RejectionFailure { attempts: 25 })
        ));
        assert_eq!(sample_simple(&seq(&[1, 1]), 1, 25).unwrap().attempts, 1);
    }

    #[test]
    fn odd_total_rejected() {
        assert!(matches!(pair_half_edges(&seq(&[2, 1]), 0), Err(Error::Parity { ell: 3 })));
    }

    #[test]
    fn critical_p_arithmetic() {
        // nu = 2 for degrees all 3
        let d = DegreeSequence::new(vec![3; 10_000]).unwrap();
        let e = Exponents::from_tau(3.5, 1.0).unwrap();
        let p = critical_p(&d, &e).unwrap();
        assert!((p - (0.5 + 10f64.powf(-0.8))).abs() < 1e-12);
        assert!((p - 0.6585).abs() < 1e-4);
        let e0 = Exponents::from_tau(3.5, 0.0).unwrap();
        assert_eq!(critical_p(&d, &e0).unwrap(), 0.5);
        let huge = Exponents::from_tau(3.5, 1e9).unwrap();
        assert_eq!(critical_p(&d, &huge).unwrap(), 1.0);
        assert!(matches!(critical_p(&seq(&[2, 2]), &e0), Err(Error::Domain(_))));
    }

    #[test]
    fn percolation_extremes() {
        let d = seq(&[3, 2, 2, 1]);
        let all = percolate_degrees(&d, 1.0, 5).unwrap();
        assert_eq!(all.percolated_degrees, d.degrees());
        assert_eq!(all.retained_count, 4);
        let none = percolate_degrees(&d, 0.0, 5).unwrap();
        assert!(none.percolated_degrees.iter().all(|&x| x == 0));
        assert_eq!(none.retained_count, 0);
        let empty = realize_percolated(&none, 1).unwrap();
        assert_eq!(empty.edge_count(), 0);
        assert_eq!(empty.n(), 4);
    }

    #[test]
    fn hub_removal_on_triangle() {
        let tri = HalfEdgeGraph::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(remove_hubs(&tri, 0).unwrap().edges(), tri.edges());
        assert_eq!(remove_hubs(&tri, 1).unwrap().edges(), vec![(1, 2)]);
        assert_eq!(remove_hubs(&tri, 3).unwrap().edge_count(), 0);
    }

    #[test]
    fn edge_list_roundtrip_keeps_loops_and_multi_edges() {
        let g = HalfEdgeGraph::from_edges(3, &[(0, 0), (0, 1), (0, 1), (1, 2)]).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("# n=3 m=4\n1 1\n"));
        assert_eq!(HalfEdgeGraph::from_edge_list(&text).unwrap(), g);
        assert!(HalfEdgeGraph::from_edge_list("1 2\n").is_err());
    }
}
