//! Breadth-first exploration of a realized configuration model and the
//! distance statistics built on it.
//!
//! The exploration walk `S(l)` counts active half-edges after `l` pairings.
//! Along with it we record the compensator `A(l)` and the predictable
//! quadratic variation of `M = S - S(0) - A`, both computed from the
//! conditional law of the next mate given the revealed pairings: the mate is
//! uniform over the `ell - 2l + 1` alive half-edges, so
//!
//! ```text
//! E[d_(l) | F_{l-1}]   = sum_{k undiscovered} d_k^2 / (ell - 2l + 1)
//! E[d_(l)^2 | F_{l-1}] = sum_{k undiscovered} d_k^3 / (ell - 2l + 1)
//! ```

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use crate::degrees::Exponents;
use crate::error::{Error, Result};
use crate::graph::{remove_hubs, HalfEdgeGraph};
use crate::num::sig12;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Discovery {
    pub step: usize,
    pub vertex: usize,
    pub degree: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplorationTrace {
    pub start: usize,
    pub walk: Vec<i64>,
    pub discovered: Vec<Discovery>,
    pub drift: Vec<f64>,
    pub martingale: Vec<f64>,
    pub quad_var: Vec<f64>,
    pub hit_zero_at: Option<usize>,
}

impl ExplorationTrace {
    /// Number of pairing steps performed.
    pub fn steps(&self) -> usize {
        self.walk.len().saturating_sub(1)
    }

    /// `M(min(l, sigma))`, the walk's martingale part stopped at absorption.
    pub fn stopped_martingale(&self, l: usize) -> f64 {
        self.martingale[l.min(self.martingale.len() - 1)]
    }

    /// CSV with columns `step,S,A,M,QV,discovered_vertex` (vertex 1-based,
    /// blank when the step found no new vertex).
    pub fn to_csv(&self) -> String {
        let mut found = vec![None; self.walk.len()];
        for d in &self.discovered {
            found[d.step] = Some(d.vertex);
        }
        let mut out = String::from("step,S,A,M,QV,discovered_vertex\n");
        for l in 0..self.walk.len() {
            let v = found[l].map(|v| (v + 1).to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{l},{},{},{},{},{v}",
                self.walk[l],
                sig12(self.drift[l]),
                sig12(self.martingale[l]),
                sig12(self.quad_var[l])
            );
        }
        out
    }
}

/// Explores the component of `start`: FIFO over discovered vertices, each
/// vertex's half-edges in index order, following the realized `mate` map.
pub fn explore_component(g: &HalfEdgeGraph, start: usize) -> Result<ExplorationTrace> {
    if start >= g.n() {
        return Err(Error::Domain(format!("start vertex {start} outside 0..{}", g.n())));
    }
    let ell = g.half_edge_count() as f64;
    let mut discovered_flag = vec![false; g.n()];
    let mut killed = vec![false; g.half_edge_count()];
    let d_start = g.degree(start) as f64;
    let mut undiscovered_sq: f64 = (0..g.n()).map(|v| (g.degree(v) as f64).powi(2)).sum::<f64>() - d_start * d_start;
    let mut undiscovered_cube: f64 =
        (0..g.n()).map(|v| (g.degree(v) as f64).powi(3)).sum::<f64>() - d_start * d_start * d_start;

    discovered_flag[start] = true;
    let mut queue = VecDeque::from([start]);
    let s0 = g.degree(start) as i64;
    let mut walk = vec![s0];
    let mut drift = vec![0.0];
    let mut martingale = vec![0.0];
    let mut quad_var = vec![0.0];
    let mut discovered = vec![Discovery { step: 0, vertex: start, degree: g.degree(start) }];
    let (mut s, mut a, mut qv) = (s0, 0.0f64, 0.0f64);
    let mut step = 0usize;

    while let Some(&v) = queue.front() {
        let Some(e) = g.half_edges(v).find(|&h| !killed[h]) else {
            queue.pop_front();
            continue;
        };
        step += 1;
        let f = g.mate(e);
        killed[e] = true;
        killed[f] = true;

        let denom = ell - 2.0 * step as f64 + 1.0;
        let mean = undiscovered_sq / denom;
        let second = undiscovered_cube / denom;
        a += mean - 2.0;
        qv += (second - mean * mean).max(0.0);

        let w = g.owner(f);
        let found = if discovered_flag[w] {
            0
        } else {
            discovered_flag[w] = true;
            let dw = g.degree(w);
            let dwf = dw as f64;
            undiscovered_sq -= dwf * dwf;
            undiscovered_cube -= dwf * dwf * dwf;
            discovered.push(Discovery { step, vertex: w, degree: dw });
            queue.push_back(w);
            dw as i64
        };
        s += found - 2;
        walk.push(s);
        drift.push(a);
        martingale.push((s - s0) as f64 - a);
        quad_var.push(qv);
        debug_assert!(s >= 0);
    }
    let hit_zero_at = (s == 0).then_some(step);
    Ok(ExplorationTrace { start, walk, discovered, drift, martingale, quad_var, hit_zero_at })
}

/// Distances in hops; `None` for unreachable vertices.
pub fn bfs_distances(g: &HalfEdgeGraph, v: usize) -> Result<Vec<Option<u32>>> {
    if v >= g.n() {
        return Err(Error::Domain(format!("vertex {v} outside 0..{}", g.n())));
    }
    let mut dist = vec![None; g.n()];
    dist[v] = Some(0);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued vertices have a distance");
        for w in g.neighbors(u) {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    Ok(dist)
}

/// Reusable truncated BFS with generation stamps.
struct Bfs {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    generation: u32,
    queue: Vec<usize>,
}

impl Bfs {
    fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], dist: vec![0; n], generation: 0, queue: Vec::new() }
    }

    /// Number of vertices at each depth `0..=max_depth` from `src`.
    fn layers(&mut self, g: &HalfEdgeGraph, src: usize, max_depth: u32) -> Vec<usize> {
        self.generation += 1;
        let gen = self.generation;
        self.queue.clear();
        self.queue.push(src);
        self.stamp[src] = gen;
        self.dist[src] = 0;
        let mut layers = vec![1usize];
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            let du = self.dist[u];
            if du == max_depth {
                continue;
            }
            for w in g.neighbors(u) {
                if self.stamp[w] != gen {
                    self.stamp[w] = gen;
                    self.dist[w] = du + 1;
                    if layers.len() <= (du + 1) as usize {
                        layers.push(0);
                    }
                    layers[(du + 1) as usize] += 1;
                    self.queue.push(w);
                }
            }
        }
        layers
    }

    fn eccentricity(&mut self, g: &HalfEdgeGraph, src: usize) -> (u32, usize) {
        let layers = self.layers(g, src, u32::MAX);
        let far = *self.queue.last().expect("source is queued");
        ((layers.len() - 1) as u32, far)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentSummary {
    pub index: usize,
    pub vertices: usize,
    pub edges: usize,
    pub surplus: usize,
    pub diameter: u32,
    pub member_list: Vec<usize>,
}

/// Exact diameter of the component containing `members` by BFS from every member.
fn exact_diameter(g: &HalfEdgeGraph, members: &[usize]) -> u32 {
    if members.len() <= 1 {
        return 0;
    }
    if members.len() < 512 {
        let mut bfs = Bfs::new(g.n());
        return members.iter().map(|&v| bfs.eccentricity(g, v).0).max().unwrap_or(0);
    }
    members
        .par_chunks(64)
        .map_init(|| Bfs::new(g.n()), |bfs, chunk| chunk.iter().map(|&v| bfs.eccentricity(g, v).0).max().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Two-sweep lower bound on the diameter of the component of `v`.
pub fn double_sweep_lower_bound(g: &HalfEdgeGraph, v: usize) -> u32 {
    let mut bfs = Bfs::new(g.n());
    let (_, far) = bfs.eccentricity(g, v);
    bfs.eccentricity(g, far).0
}

/// All components, largest first; ties go to the component with the smaller
/// least member.
pub fn components(g: &HalfEdgeGraph) -> Vec<ComponentSummary> {
    let mut label = vec![usize::MAX; g.n()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..g.n() {
        if label[s] != usize::MAX {
            continue;
        }
        let id = groups.len();
        label[s] = id;
        let mut members = vec![s];
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for w in g.neighbors(u) {
                if label[w] == usize::MAX {
                    label[w] = id;
                    members.push(w);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    // groups are discovered in order of their least member, so a stable sort keeps that tie-break
    groups.sort_by(|a, b| b.len().cmp(&a.len()));
    groups
        .into_iter()
        .enumerate()
        .map(|(index, members)| {
            let half: usize = members.iter().map(|&v| g.degree(v) as usize).sum();
            let edges = half / 2;
            ComponentSummary {
                index,
                vertices: members.len(),
                edges,
                surplus: edges + 1 - members.len(),
                diameter: exact_diameter(g, &members),
                member_list: members,
            }
        })
        .collect()
}

/// Component of `v` alone, without enumerating the rest of the graph.
pub fn component_of(g: &HalfEdgeGraph, v: usize) -> ComponentSummary {
    let dist = bfs_distances(g, v).expect("valid vertex");
    let members: Vec<usize> = (0..g.n()).filter(|&u| dist[u].is_some()).collect();
    let half: usize = members.iter().map(|&u| g.degree(u) as usize).sum();
    ComponentSummary {
        index: usize::MAX,
        vertices: members.len(),
        edges: half / 2,
        surplus: half / 2 + 1 - members.len(),
        diameter: exact_diameter(g, &members),
        member_list: members,
    }
}

/// Ball radius `floor(delta * n^eta)`.
pub fn radius_for(delta: f64, n: usize, exp: &Exponents) -> u32 {
    let r = (delta * (n as f64).powf(exp.eta) * (1.0 + 1e-12)).floor();
    r.clamp(0.0, u32::MAX as f64) as u32
}

/// `|N_v(delta)|`: vertices within `floor(delta n^eta)` hops of `v`.
pub fn neighborhood_size(g: &HalfEdgeGraph, v: usize, delta: f64, exp: &Exponents) -> Result<usize> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be non-negative, got {delta}")));
    }
    if v >= g.n() {
        return Err(Error::Domain(format!("vertex {v} outside 0..{}", g.n())));
    }
    let r = radius_for(delta, g.n(), exp);
    Ok(Bfs::new(g.n()).layers(g, v, r).iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    Exact,
    /// Infimum over a uniform sample of members only; an approximation.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct MassProfile {
    pub component: usize,
    pub delta_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Smallest ball size behind each value.
    pub min_ball: Vec<usize>,
    pub argmin: Vec<usize>,
    pub approximate: bool,
}

impl MassProfile {
    /// CSV `delta,value,argmin_vertex` (vertex 1-based).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,value,argmin_vertex\n");
        for ((d, v), a) in self.delta_grid.iter().zip(&self.values).zip(&self.argmin) {
            let _ = writeln!(out, "{},{},{}", sig12(*d), sig12(*v), a + 1);
        }
        out
    }
}

/// `inf_{v in comp} n^{-rho} |N_v(delta)|` on each grid point.
pub fn mass_profile(
    g: &HalfEdgeGraph,
    comp: &ComponentSummary,
    delta_grid: &[f64],
    exp: &Exponents,
) -> Result<MassProfile> {
    mass_profile_with(g, comp, delta_grid, exp, MassMode::Exact)
}

pub fn mass_profile_with(
    g: &HalfEdgeGraph,
    comp: &ComponentSummary,
    delta_grid: &[f64],
    exp: &Exponents,
    mode: MassMode,
) -> Result<MassProfile> {
    if comp.member_list.is_empty() {
        return Err(Error::Domain("mass profile of an empty component".into()));
    }
    if delta_grid.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::Domain("delta grid must be non-negative".into()));
    }
    let radii: Vec<u32> = delta_grid.iter().map(|&d| radius_for(d, g.n(), exp)).collect();
    let r_max = radii.iter().copied().max().unwrap_or(0);
    let (sources, approximate): (Vec<usize>, bool) = match mode {
        MassMode::Exact => (comp.member_list.clone(), false),
        MassMode::Sampled { samples, seed } if samples < comp.member_list.len() => {
            let mut rng = rng_from_seed(seed);
            let mut picked: Vec<usize> = index::sample(&mut rng, comp.member_list.len(), samples)
                .into_iter()
                .map(|i| comp.member_list[i])
                .collect();
            picked.sort_unstable();
            (picked, true)
        }
        MassMode::Sampled { .. } => (comp.member_list.clone(), false),
    };

    // per source: cumulative ball sizes at each radius on the grid
    let balls: Vec<Vec<usize>> = sources
        .par_chunks(64)
        .map_init(
            || Bfs::new(g.n()),
            |bfs, chunk| {
                chunk
                    .iter()
                    .map(|&v| {
                        let layers = bfs.layers(g, v, r_max);
                        let mut cum = Vec::with_capacity(layers.len());
                        let mut acc = 0;
                        for c in layers {
                            acc += c;
                            cum.push(acc);
                        }
                        radii.iter().map(|&r| cum[(r as usize).min(cum.len() - 1)]).collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>()
            },
        )
        .flatten()
        .collect();

    let scale = (g.n() as f64).powf(-exp.rho);
    let mut values = Vec::with_capacity(radii.len());
    let mut argmin = Vec::with_capacity(radii.len());
    let mut min_ball = Vec::with_capacity(radii.len());
    for k in 0..radii.len() {
        let (best_i, best) = balls
            .iter()
            .enumerate()
            .min_by_key(|(i, b)| (b[k], sources[*i]))
            .map(|(i, b)| (i, b[k]))
            .expect("non-empty sources");
        values.push(best as f64 * scale);
        min_ball.push(best);
        argmin.push(sources[best_i]);
    }
    Ok(MassProfile { component: comp.index, delta_grid: delta_grid.to_vec(), values, min_ball, argmin, approximate })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HubMass {
    pub mass: usize,
    pub threshold: f64,
    pub below: bool,
}

/// `|N_i(delta)|` for the hub with 1-based index `i`, against `theta_i delta n^rho`.
pub fn hub_mass_statistic(
    g: &HalfEdgeGraph,
    i: usize,
    delta: f64,
    exp: &Exponents,
    theta_i: f64,
) -> Result<HubMass> {
    if i == 0 || i > g.n() {
        return Err(Error::Domain(format!("hub index {i} outside 1..={}", g.n())));
    }
    let mass = neighborhood_size(g, i - 1, delta, exp)?;
    let threshold = theta_i * delta * (g.n() as f64).powf(exp.rho);
    Ok(HubMass { mass, threshold, below: mass as f64 <= threshold })
}

/// Largest component diameter after deleting the edges of the first `k` vertices.
pub fn hub_removed_diameter(g: &HalfEdgeGraph, k: usize) -> Result<u32> {
    let pruned = remove_hubs(g, k)?;
    Ok(max_diameter(&pruned))
}

pub fn max_diameter(g: &HalfEdgeGraph) -> u32 {
    components(g).iter().map(|c| c.diameter).max().unwrap_or(0)
}

/// `(t, n^{-alpha} S(floor(t n^rho)))` on the grid `t = k n^{-rho}`.
pub fn rescaled_walk(trace: &ExplorationTrace, exp: &Exponents, n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let (tstep, vscale) = (nf.powf(-exp.rho), nf.powf(-exp.alpha));
    trace.walk.iter().enumerate().map(|(k, &s)| (k as f64 * tstep, s as f64 * vscale)).collect()
}

/// First index with `series[i] <= u`.
pub fn hitting_time(series: &[f64], u: f64) -> Option<usize> {
    series.iter().position(|&x| x <= u)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryDiagnostic {
    /// `(l, |V_l| - l)` for every recorded step.
    pub gaps: Vec<(usize, i64)>,
    pub max_abs_gap: i64,
}

pub fn discovery_diagnostic(trace: &ExplorationTrace) -> DiscoveryDiagnostic {
    let mut gaps = Vec::with_capacity(trace.walk.len());
    let mut found = 0i64;
    let mut next = trace.discovered.iter().peekable();
    for l in 0..trace.walk.len() {
        while next.peek().is_some_and(|d| d.step == l) {
            found += 1;
            next.next();
        }
        gaps.push((l, found - l as i64));
    }
    let max_abs_gap = gaps.iter().map(|&(_, g)| g.abs()).max().unwrap_or(0);
    DiscoveryDiagnostic { gaps, max_abs_gap }
}
