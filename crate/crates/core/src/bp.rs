//! Branching-process domination of the exploration.
//!
//! [`ProgenyLaw`] holds an offspring distribution as exact integer weights.
//! The near-critical laws built from a degree sequence are size-biased and
//! shifted: `k` children with probability `(k+1) n_{k+1} / L`, with the mass
//! at zero reduced by twice the number `t = ceil(n^{rho+eps})` of steps the
//! exploration is run for.
//!
//! The breadth-first walk `s(u) = s(u-1) + zeta_u - 1` of a Galton-Watson
//! tree is simulated with i.i.d. `zeta`. Trees and walks draw the offspring
//! counts from one stream in breadth-first order, so [`bf_walk`] and
//! [`gw_height`] with the same seed describe the same tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::degrees::{beta_profile, criticality, ordered_pairs, DegreeSequence, Exponents, Flag};
use crate::error::{Error, Result};
use crate::num::{binomial_se, quantile_sorted, sig12};
use crate::rng::{rng_from_seed, substream, SimRng};

pub use crate::degrees::i2_lambda;

/// Offspring law with rational probabilities `weights[k] / denom`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgenyLaw {
    weights: Vec<u64>,
    denom: u64,
}

impl ProgenyLaw {
    /// Law proportional to `weights` (index = number of children).
    pub fn from_weights(mut weights: Vec<u64>) -> Result<Self> {
        while weights.len() > 1 && weights.last() == Some(&0) {
            weights.pop();
        }
        let denom: u64 = weights.iter().sum();
        if denom == 0 {
            return Err(Error::Domain("progeny law with zero total weight".into()));
        }
        Ok(Self { weights, denom })
    }

    /// Law from `(k, weight)` pairs.
    pub fn from_pairs(pairs: &[(usize, u64)]) -> Result<Self> {
        let len = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        let mut w = vec![0; len];
        for &(k, x) in pairs {
            w[k] += x;
        }
        Self::from_weights(w)
    }

    /// Point mass at `k`.
    pub fn degenerate(k: usize) -> Self {
        let mut w = vec![0; k + 1];
        w[k] = 1;
        Self { weights: w, denom: 1 }
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn denominator(&self) -> u64 {
        self.denom
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.weights.get(k).map_or(0.0, |&w| w as f64 / self.denom as f64)
    }

    pub fn support_max(&self) -> usize {
        self.weights.iter().rposition(|&w| w > 0).unwrap_or(0)
    }

    /// Mean as an exact fraction `(numerator, denominator)`.
    pub fn mean_exact(&self) -> (u128, u128) {
        let num = self.weights.iter().enumerate().map(|(k, &w)| k as u128 * w as u128).sum();
        (num, self.denom as u128)
    }

    pub fn mean(&self) -> f64 {
        let (a, b) = self.mean_exact();
        a as f64 / b as f64
    }

    pub fn variance(&self) -> f64 {
        let second: u128 = self.weights.iter().enumerate().map(|(k, &w)| (k * k) as u128 * w as u128).sum();
        let m = self.mean();
        second as f64 / self.denom as f64 - m * m
    }

    /// `P(xi >= k)`.
    pub fn tail(&self, k: usize) -> f64 {
        let w: u64 = self.weights.iter().skip(k).sum();
        w as f64 / self.denom as f64
    }

    /// CSV `k,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,probability\n");
        for (k, &w) in self.weights.iter().enumerate() {
            let _ = writeln!(out, "{k},{}", sig12(w as f64 / self.denom as f64));
        }
        out
    }

    fn sampler(&self) -> Sampler {
        let mut acc = 0;
        let cum = self
            .weights
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        Sampler { cum, denom: self.denom }
    }
}

/// Exact inverse-CDF sampling on the integer weights.
struct Sampler {
    cum: Vec<u64>,
    denom: u64,
}

impl Sampler {
    fn draw(&self, rng: &mut SimRng) -> u64 {
        let u = rng.random_range(0..self.denom);
        self.cum.partition_point(|&c| c <= u) as u64
    }
}

/// `t = ceil(n^{rho+eps})` after validating `0 < eps < eps0`.
pub fn exploration_horizon(n: usize, exp: &Exponents, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < exp.eps0()) {
        return Err(Error::Domain(format!("eps={eps} outside (0, {})", exp.eps0())));
    }
    Ok(((n as f64).powf(exp.rho + eps) * (1.0 - 1e-12)).ceil() as u64)
}

/// Dominating law `(k+1) n_{k+1} / (ell - 2t)`, `p_0 = (n_1 - 2t) / (ell - 2t)`.
pub fn progeny_law(d: &DegreeSequence, exp: &Exponents, eps: f64) -> Result<ProgenyLaw> {
    progeny_law_with_horizon(d, exploration_horizon(d.n(), exp, eps)?)
}

pub fn progeny_law_with_horizon(d: &DegreeSequence, t: u64) -> Result<ProgenyLaw> {
    truncated_progeny_law_with_horizon(d, 1, t)
}

/// Law with the degrees of vertices `1..i` removed from the support.
pub fn truncated_progeny_law(d: &DegreeSequence, i: usize, exp: &Exponents, eps: f64) -> Result<ProgenyLaw> {
    truncated_progeny_law_with_horizon(d, i, exploration_horizon(d.n(), exp, eps)?)
}

pub fn truncated_progeny_law_with_horizon(d: &DegreeSequence, i: usize, t: u64) -> Result<ProgenyLaw> {
    if i == 0 || i > d.n() {
        return Err(Error::Domain(format!("truncation index {i} outside 1..={}", d.n())));
    }
    let kept = &d.degrees()[i - 1..];
    let total: u64 = kept.iter().map(|&x| x as u64).sum();
    let normalizer = total as i128 - 2 * t as i128;
    if normalizer <= 0 {
        return Err(Error::TruncationInfeasible(format!("normalizer {normalizer} <= 0 at i={i}, t={t}")));
    }
    let ones = kept.iter().filter(|&&x| x == 1).count() as i128;
    let p0 = ones - 2 * t as i128;
    if p0 < 0 {
        return Err(Error::TruncationInfeasible(format!(
            "mass at zero would be {p0}/{normalizer} (n_1={ones}, t={t})"
        )));
    }
    let top = kept.first().copied().unwrap_or(0) as usize;
    let mut w = vec![0u64; top.max(1)];
    w[0] = p0 as u64;
    for &x in kept.iter().filter(|&&x| x >= 2) {
        w[x as usize - 1] += x as u64;
    }
    debug_assert_eq!(w.iter().sum::<u64>() as i128, normalizer);
    ProgenyLaw::from_weights(w)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanBound {
    pub i: usize,
    pub mean: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Means of the truncated laws against `1 - beta_i n^{-eta}`.
pub fn mean_bound_check(
    d: &DegreeSequence,
    exp: &Exponents,
    eps: f64,
    i_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<MeanBound>> {
    let t = exploration_horizon(d.n(), exp, eps)?;
    let beta = beta_profile(d, exp, *i_range.end())?;
    let shrink = (d.n() as f64).powf(-exp.eta);
    i_range
        .map(|i| {
            let mean = truncated_progeny_law_with_horizon(d, i, t)?.mean();
            let bound = 1.0 - beta[i - 1] * shrink;
            Ok(MeanBound { i, mean, bound, satisfied: mean <= bound })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkTrace {
    pub path: Vec<u64>,
    pub sigma: Option<usize>,
    pub harmonic: f64,
    pub scale_series: Vec<u32>,
    pub scale_time: BTreeMap<u32, usize>,
    pub visits: BTreeMap<u32, usize>,
    pub upcrossings: Vec<((u64, u64), usize)>,
    pub absorbed: bool,
}

impl WalkTrace {
    pub fn upcrossings_of(&self, a: u64, b: u64) -> Option<usize> {
        self.upcrossings.iter().find(|(iv, _)| *iv == (a, b)).map(|x| x.1)
    }
}

/// `l` with `s` in `[2^{l-1}, 2^l)`, for `s >= 1`.
pub fn scale_of(s: u64) -> u32 {
    64 - s.leading_zeros()
}

fn in_scale_interval(s: u64, l: u32) -> bool {
    s >= 1u64 << (l - 1) && s < 1u64 << (l + 1)
}

/// Strict upcrossings of `[a, b)`: a visit below `a` followed by one at or above `b`.
pub fn count_upcrossings(path: &[u64], a: u64, b: u64) -> usize {
    let (mut armed, mut count) = (false, 0);
    for &s in path {
        if s < a {
            armed = true;
        } else if armed && s >= b {
            count += 1;
            armed = false;
        }
    }
    count
}

/// One-step crossings of level `a`: `s(u-1) < a <= s(u)`.
pub fn level_crossings(path: &[u64], a: u64) -> usize {
    path.windows(2).filter(|w| w[0] < a && w[1] >= a).count()
}

/// Builds the walk functionals from a path that starts at `path[0] >= 1`.
pub fn walk_from_path(path: Vec<u64>, intervals: &[(u64, u64)]) -> Result<WalkTrace> {
    if path.first().is_none_or(|&s| s == 0) {
        return Err(Error::Domain("walk must start at a positive value".into()));
    }
    let sigma = path.iter().position(|&s| s == 0);
    let live = sigma.unwrap_or(path.len());
    let harmonic = path[..live].iter().map(|&s| 1.0 / s as f64).sum();

    let mut scale_series = Vec::with_capacity(live);
    let mut scale_time = BTreeMap::new();
    let mut visits = BTreeMap::new();
    let mut l = scale_of(path[0]);
    *visits.entry(l).or_insert(0) += 1;
    for &s in &path[..live] {
        if !in_scale_interval(s, l) {
            l = scale_of(s);
            *visits.entry(l).or_insert(0) += 1;
        }
        scale_series.push(l);
        *scale_time.entry(l).or_insert(0) += 1;
    }
    let upcrossings = intervals.iter().map(|&(a, b)| ((a, b), count_upcrossings(&path, a, b))).collect();
    Ok(WalkTrace {
        absorbed: sigma.is_some(),
        path,
        sigma,
        harmonic,
        scale_series,
        scale_time,
        visits,
        upcrossings,
    })
}

/// Breadth-first walk from `init` until absorption or `max_steps` steps.
pub fn bf_walk(
    law: &ProgenyLaw,
    init: u64,
    seed: u64,
    max_steps: usize,
    intervals: &[(u64, u64)],
) -> Result<WalkTrace> {
    if init == 0 {
        return Err(Error::Domain("init must be at least 1".into()));
    }
    let sampler = law.sampler();
    let mut rng = rng_from_seed(seed);
    let mut path = vec![init];
    let mut s = init;
    while s > 0 && path.len() <= max_steps {
        s = s + sampler.draw(&mut rng) - 1;
        path.push(s);
    }
    walk_from_path(path, intervals)
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeHeight {
    /// Number of nonempty generations; the root cohort is generation 1.
    pub height: usize,
    pub generation_sizes: Vec<u64>,
    pub extinct: bool,
}

/// Generation sizes of the tree whose breadth-first offspring counts are given.
pub fn height_from_children(children: &[u64], init: u64) -> Result<TreeHeight> {
    if init == 0 {
        return Err(Error::Domain("init must be at least 1".into()));
    }
    let mut sizes = vec![init];
    let mut pos = 0usize;
    loop {
        let cur = *sizes.last().expect("non-empty") as usize;
        if pos + cur > children.len() {
            return Ok(TreeHeight { height: sizes.len(), generation_sizes: sizes, extinct: false });
        }
        let next: u64 = children[pos..pos + cur].iter().sum();
        pos += cur;
        sizes.push(next);
        if next == 0 {
            return Ok(TreeHeight { height: sizes.len() - 1, generation_sizes: sizes, extinct: true });
        }
    }
}

/// Galton-Watson height by generation, drawing offspring counts in
/// breadth-first order from the same stream as [`bf_walk`].
pub fn gw_height(law: &ProgenyLaw, init: u64, seed: u64, max_gen: usize) -> Result<TreeHeight> {
    if init == 0 {
        return Err(Error::Domain("init must be at least 1".into()));
    }
    let sampler = law.sampler();
    let mut rng = rng_from_seed(seed);
    let mut sizes = vec![init];
    while sizes.len() <= max_gen {
        let cur = *sizes.last().expect("non-empty");
        let next: u64 = (0..cur).map(|_| sampler.draw(&mut rng)).sum();
        sizes.push(next);
        if next == 0 {
            return Ok(TreeHeight { height: sizes.len() - 1, generation_sizes: sizes, extinct: true });
        }
    }
    Ok(TreeHeight { height: sizes.len(), generation_sizes: sizes, extinct: false })
}

/// Diagnostic record shared by the Monte Carlo checks.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(serialize_with = "ordered_pairs")]
    pub params: Vec<(String, f64)>,
    pub empirical: f64,
    pub bound: f64,
    pub flag: Flag,
}

impl CheckResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn params(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("trials must be positive".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct HeightHarmonic {
    pub violations: usize,
    pub max_ratio: f64,
    pub absorbed: usize,
    pub excluded: usize,
}

/// Height `<= 3 H(sigma)` on trees built once per trial.
pub fn height_harmonic_check(law: &ProgenyLaw, seed: u64, trials: usize, max_steps: usize) -> Result<HeightHarmonic> {
    check_trials(trials)?;
    let results: Vec<Option<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let walk = bf_walk(law, 1, substream(seed, k), max_steps, &[]).expect("init 1");
            let sigma = walk.sigma?;
            // the walk's increments are the offspring counts in breadth-first order
            let children: Vec<u64> = walk.path.windows(2).map(|w| w[1] + 1 - w[0]).collect();
            debug_assert_eq!(children.len(), sigma);
            let tree = height_from_children(&children, 1).expect("init 1");
            debug_assert!(tree.extinct);
            Some(tree.height as f64 / (3.0 * walk.harmonic))
        })
        .collect();
    let ratios: Vec<f64> = results.iter().flatten().copied().collect();
    Ok(HeightHarmonic {
        violations: ratios.iter().filter(|&&r| r > 1.0).count(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        absorbed: ratios.len(),
        excluded: trials - ratios.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitTime {
    pub scale: u32,
    pub r_nl: usize,
    pub bound: f64,
    pub argmax_start: u64,
}

/// Starting points on which the exit time is maximized.
fn scale_grid(l: u32) -> Vec<u64> {
    let (lo, hi) = (1u64 << (l - 1), (1u64 << (l + 1)) - 1);
    if hi - lo < 64 {
        return (lo..=hi).collect();
    }
    let mut g: Vec<u64> = (0..16).map(|j| lo + (hi - lo) * j / 15).collect();
    g.dedup();
    g
}

/// Max over starting points in `I_l` of the median exit time from `I_l`.
pub fn exit_time_estimate(
    law: &ProgenyLaw,
    l: u32,
    tau: f64,
    trials: usize,
    seed: u64,
    max_steps: usize,
) -> Result<ExitTime> {
    check_trials(trials)?;
    if l == 0 || l > 40 {
        return Err(Error::Domain(format!("scale {l} outside 1..=40")));
    }
    let sampler = law.sampler();
    let mut best = (0usize, 0u64);
    for (xi, x) in scale_grid(l).into_iter().enumerate() {
        let mut times: Vec<f64> = (0..trials as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_from_seed(substream(substream(seed, xi as u64), k));
                let mut s = x;
                let mut t = 0usize;
                while in_scale_interval(s, l) && t < max_steps {
                    s = s + sampler.draw(&mut rng) - 1;
                    t += 1;
                }
                t as f64
            })
            .collect();
        times.sort_by(f64::total_cmp);
        let median = quantile_sorted(&times, 0.5) as usize;
        if median > best.0 {
            best = (median, x);
        }
    }
    Ok(ExitTime { scale: l, r_nl: best.0, bound: 2f64.powf((tau - 2.0) * l as f64), argmax_start: best.1 })
}

fn require_subcritical(law: &ProgenyLaw, margin: f64) -> Result<()> {
    if law.mean() >= 1.0 - margin {
        return Err(Error::Precondition(format!("law mean {} is not below 1 - {margin}", law.mean())));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct UpcrossingRow {
    pub k: usize,
    pub empirical: f64,
    pub bound: f64,
    pub se: f64,
    pub exceeds: bool,
}

/// Empirical `P(U(sigma, [a, b)) >= k)` against `((a-1)/b)^k` for the walk from 1.
pub fn upcrossing_tail_check(
    law: &ProgenyLaw,
    a: u64,
    b: u64,
    k_max: usize,
    trials: usize,
    seed: u64,
    max_steps: usize,
) -> Result<Vec<UpcrossingRow>> {
    check_trials(trials)?;
    if !(1 <= a && a < b) {
        return Err(Error::Domain(format!("need 1 <= a < b, got a={a}, b={b}")));
    }
    require_subcritical(law, 0.0)?;
    let counts: Vec<usize> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let w = bf_walk(law, 1, substream(seed, k), max_steps, &[(a, b)]).expect("init 1");
            w.upcrossings[0].1
        })
        .collect();
    Ok((1..=k_max)
        .map(|k| {
            let empirical = counts.iter().filter(|&&c| c >= k).count() as f64 / trials as f64;
            let bound = ((a - 1) as f64 / b as f64).powi(k as i32);
            let se = binomial_se(bound, trials).max(binomial_se(empirical, trials));
            UpcrossingRow { k, empirical, bound, se, exceeds: empirical > bound + 3.0 * se }
        })
        .collect())
}

/// Empirical probability that the walk from 1 reaches `h` before 0, against `1/h`.
pub fn hitting_probability_check(
    law: &ProgenyLaw,
    h: u64,
    trials: usize,
    seed: u64,
    margin: f64,
) -> Result<CheckResult> {
    check_trials(trials)?;
    if h == 0 {
        return Err(Error::Domain("level H must be at least 1".into()));
    }
    if !(margin > 0.0) {
        return Err(Error::Precondition("margin must be positive".into()));
    }
    require_subcritical(law, margin)?;
    let sampler = law.sampler();
    let hits = (0..trials as u64)
        .into_par_iter()
        .filter(|&k| {
            let mut rng = rng_from_seed(substream(seed, k));
            let mut s = 1u64;
            while s > 0 && s < h {
                s = s + sampler.draw(&mut rng) - 1;
            }
            s >= h
        })
        .count();
    let empirical = hits as f64 / trials as f64;
    let bound = 1.0 / h as f64;
    let se = binomial_se(bound, trials);
    Ok(CheckResult {
        name: "hitting_probability".into(),
        params: params(&[("H", h as f64), ("trials", trials as f64), ("mean", law.mean())]),
        empirical,
        bound,
        flag: if empirical <= bound + 3.0 * se { Flag::Pass } else { Flag::Fail },
    })
}

/// Monte Carlo `sup_x P(s(t) in [x, x + L))` for the unabsorbed walk.
pub fn levy_concentration(law: &ProgenyLaw, t: usize, width: u64, trials: usize, seed: u64) -> Result<f64> {
    check_trials(trials)?;
    if t == 0 || width == 0 {
        return Err(Error::Domain("t and L must be at least 1".into()));
    }
    let sampler = law.sampler();
    let mut ends: Vec<i64> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(substream(seed, k));
            (0..t).map(|_| sampler.draw(&mut rng) as i64 - 1).sum::<i64>()
        })
        .collect();
    ends.sort_unstable();
    let mut best = 0usize;
    let mut lo = 0usize;
    for hi in 0..ends.len() {
        while ends[hi] - ends[lo] >= width as i64 {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    Ok(best as f64 / trials as f64)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathTail {
    pub nu_prime: f64,
    pub ell_prime: f64,
    pub length: f64,
    pub bound: f64,
}

/// `ell'^2 nu'^{eps n^eta} / (1 - nu')` for the hub-removed sequence.
pub fn subcritical_path_tail(d_sub: &DegreeSequence, exp: &Exponents, eps: f64) -> Result<PathTail> {
    let nu = criticality(d_sub)?;
    let length = eps * (d_sub.n() as f64).powf(exp.eta);
    geometric_path_tail(nu, d_sub.ell() as f64, length)
}

pub fn geometric_path_tail(nu_prime: f64, ell_prime: f64, length: f64) -> Result<PathTail> {
    if nu_prime >= 1.0 {
        return Err(Error::Precondition(format!("nu'={nu_prime} >= 1 makes the path bound vacuous")));
    }
    let bound = ell_prime * ell_prime * nu_prime.powf(length) / (1.0 - nu_prime);
    Ok(PathTail { nu_prime, ell_prime, length, bound })
}
