//! Heavy-tailed degree sequences and critical-window quantities.
//!
//! Degrees are stored sorted non-increasingly, so vertex `1` (index 0) is
//! always the largest hub. Exponents follow the power-law tail exponent
//! `tau` in `(3, 4)`:
//!
//! ```text
//! alpha = 1/(tau-1)   rho = (tau-2)/(tau-1)   eta = (tau-3)/(tau-1)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand_distr::{Distribution, Exp1};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::rng::rng_from_seed;

/// Scaling exponents of the critical window together with its location `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub tau: f64,
    pub alpha: f64,
    pub rho: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl Exponents {
    pub fn from_tau(tau: f64, lambda: f64) -> Result<Self> {
        if !(tau > 3.0 && tau < 4.0) {
            return Err(Error::Domain(format!("tau must lie in (3,4), got {tau}")));
        }
        if !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be finite, got {lambda}")));
        }
        Ok(Self {
            tau,
            alpha: 1.0 / (tau - 1.0),
            rho: (tau - 2.0) / (tau - 1.0),
            eta: (tau - 3.0) / (tau - 1.0),
            lambda,
        })
    }

    /// Target criticality `1 + lambda * n^-eta`.
    pub fn target_criticality(&self, n: usize) -> f64 {
        1.0 + self.lambda * (n as f64).powf(-self.eta)
    }

    /// Upper end of the feasible truncation window, `(4 - tau)/(tau - 1)`.
    pub fn eps0(&self) -> f64 {
        (4.0 - self.tau) / (self.tau - 1.0)
    }

    /// `min(0.1, eps0 / 2)`.
    pub fn default_eps(&self) -> f64 {
        0.1f64.min(self.eps0() / 2.0)
    }
}

pub fn exponents_from_tau(tau: f64, lambda: f64) -> Result<Exponents> {
    Exponents::from_tau(tau, lambda)
}

/// Non-increasing sequence of vertex degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    degrees: Vec<u32>,
    ell: u64,
    counts: BTreeMap<u32, usize>,
}

impl DegreeSequence {
    /// Wraps `degrees`, which must already be non-increasing. An odd total is
    /// accepted here; pairing rejects it.
    pub fn new(degrees: Vec<u32>) -> Result<Self> {
        if degrees.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("degree sequence must be non-increasing".into()));
        }
        let ell = degrees.iter().map(|&d| d as u64).sum();
        let mut counts = BTreeMap::new();
        for &d in &degrees {
            *counts.entry(d).or_insert(0) += 1;
        }
        Ok(Self { degrees, ell, counts })
    }

    /// Sorts an arbitrary degree list non-increasingly first.
    pub fn from_unsorted(mut degrees: Vec<u32>) -> Self {
        degrees.sort_unstable_by(|a, b| b.cmp(a));
        Self::new(degrees).expect("sorted input")
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Total degree `ell_n`.
    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn is_even(&self) -> bool {
        self.ell % 2 == 0
    }

    /// Number of vertices with degree `k`.
    pub fn count(&self, k: u32) -> usize {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<u32, usize> {
        &self.counts
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees.first().copied().unwrap_or(0)
    }

    /// `sum d_i (d_i - 1)`.
    pub fn second_factorial_sum(&self) -> u64 {
        self.degrees.iter().map(|&d| d as u64 * (d as u64).saturating_sub(1)).sum()
    }

    pub fn power_sum(&self, p: u32) -> f64 {
        self.degrees.iter().map(|&d| (d as f64).powi(p as i32)).sum()
    }

    /// Newline-delimited text form with a `# n=<n> ell=<ell>` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# n={} ell={}\n", self.n(), self.ell);
        for d in &self.degrees {
            let _ = writeln!(out, "{d}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut degrees = Vec::new();
        let mut header: Option<(usize, u64)> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                header = parse_header(rest).or(header);
                continue;
            }
            let d: u32 = line
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: not a degree: {line:?}", lineno + 1)))?;
            degrees.push(d);
        }
        let seq = Self::new(degrees)?;
        if let Some((n, ell)) = header {
            if n != seq.n() || ell != seq.ell {
                return Err(Error::Parse(format!(
                    "header says n={n} ell={ell}, body has n={} ell={}",
                    seq.n(),
                    seq.ell
                )));
            }
        }
        Ok(seq)
    }

    fn fix_parity(mut degrees: Vec<u32>) -> Vec<u32> {
        let ell: u64 = degrees.iter().map(|&d| d as u64).sum();
        if ell % 2 == 1 {
            degrees[0] += 1;
        }
        degrees
    }
}

fn parse_header(rest: &str) -> Option<(usize, u64)> {
    let mut n = None;
    let mut ell = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("ell=") {
            ell = v.parse().ok();
        }
    }
    Some((n?, ell?))
}

/// `max(1, floor(x^alpha))`, nudged upward by a few ulps so that exact
/// integer powers are not floored down by rounding.
fn clamped_quantile(x: f64, alpha: f64) -> u32 {
    let v = x.powf(alpha) * (1.0 + 1e-12);
    (v.floor() as u32).max(1)
}

/// Deterministic power-law sequence `d_i = max(1, floor((c_f n / i)^alpha))`.
pub fn powerlaw_quantile_sequence(n: usize, tau: f64, c_f: f64) -> Result<DegreeSequence> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    if !(c_f > 0.0) {
        return Err(Error::Domain(format!("c_f must be positive, got {c_f}")));
    }
    let exp = Exponents::from_tau(tau, 0.0)?;
    let degrees: Vec<u32> = (1..=n)
        .map(|i| clamped_quantile(c_f * n as f64 / i as f64, exp.alpha))
        .collect();
    DegreeSequence::new(DegreeSequence::fix_parity(degrees))
}

/// Partial sums `Gamma_1..Gamma_{n+1}` of `n + 1` unit exponentials.
pub fn gamma_partial_sums(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut acc = 0.0;
    (0..=n)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut rng);
            acc += e;
            acc
        })
        .collect()
}

/// i.i.d. power-law degrees from order statistics, `d_i = max(1, floor((c_f Gamma_{n+1}/Gamma_i)^alpha))`.
pub fn iid_powerlaw_sequence(n: usize, tau: f64, c_f: f64, seed: u64) -> Result<DegreeSequence> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2, got {n}")));
    }
    if !(c_f > 0.0) {
        return Err(Error::Domain(format!("c_f must be positive, got {c_f}")));
    }
    let exp = Exponents::from_tau(tau, 0.0)?;
    let gamma = gamma_partial_sums(n, seed);
    let total = gamma[n];
    let mut degrees: Vec<u32> = gamma[..n]
        .iter()
        .map(|&g| clamped_quantile(c_f * total / g, exp.alpha))
        .collect();
    degrees.sort_unstable_by(|a, b| b.cmp(a));
    DegreeSequence::new(DegreeSequence::fix_parity(degrees))
}

/// `nu_n = sum d_i (d_i - 1) / sum d_i`.
pub fn criticality(d: &DegreeSequence) -> Result<f64> {
    if d.ell() == 0 {
        return Err(Error::Undefined("criticality of a sequence with zero total degree".into()));
    }
    Ok(d.second_factorial_sum() as f64 / d.ell() as f64)
}

/// Outcome of [`retune_to_criticality`].
#[derive(Debug, Clone)]
pub struct Retuned {
    pub sequence: DegreeSequence,
    pub achieved: f64,
    pub target: f64,
    /// Signed number of pair moves: positive turns pairs of degree-1
    /// vertices into degree 2, negative the reverse.
    pub pair_moves: i64,
}

/// Moves degree mass between degree-1 and degree-2 vertices, two vertices at
/// a time, until `nu_n` is as close as possible to `1 + lambda n^-eta`.
///
/// A pair move changes `sum d` by 2 and `sum d(d-1)` by 4, so
/// `nu(m) = (S2 + 4m) / (ell + 2m)` for `m` moves, which is monotone in `m`.
pub fn retune_to_criticality(d: &DegreeSequence, exp: &Exponents) -> Result<Retuned> {
    let n1 = d.count(1);
    let n2 = d.count(2);
    if n1 < 2 && n2 < 2 {
        return Err(Error::Precondition(format!(
            "retuning needs two vertices of degree 1 or two of degree 2 (have {n1}, {n2})"
        )));
    }
    let target = exp.target_criticality(d.n());
    if !(target < 2.0) {
        return Err(Error::Unreachable { target, gap: f64::INFINITY });
    }
    let s2 = d.second_factorial_sum() as f64;
    let ell = d.ell() as f64;
    let nu_at = |m: i64| (s2 + 4.0 * m as f64) / (ell + 2.0 * m as f64);
    let lo = -((n2 / 2) as i64);
    let hi = (n1 / 2) as i64;

    let ideal = (target * ell - s2) / (4.0 - 2.0 * target);
    let mut best = 0i64;
    let mut best_gap = (nu_at(0) - target).abs();
    for cand in [ideal.floor() as i64, ideal.ceil() as i64, lo, hi] {
        let m = cand.clamp(lo, hi);
        let gap = (nu_at(m) - target).abs();
        if gap < best_gap {
            best = m;
            best_gap = gap;
        }
    }

    let step_near = |m: i64| -> f64 {
        let up = if m < hi { (nu_at(m + 1) - nu_at(m)).abs() } else { 0.0 };
        let down = if m > lo { (nu_at(m) - nu_at(m - 1)).abs() } else { 0.0 };
        up.max(down)
    };
    let outside = target < nu_at(lo) || target > nu_at(hi);
    if outside && best_gap > 0.5 * step_near(best) {
        return Err(Error::Unreachable { target, gap: best_gap });
    }

    let mut degrees = d.degrees().to_vec();
    if best > 0 {
        let first_one = degrees.iter().position(|&x| x == 1).expect("n1 >= 2");
        for x in &mut degrees[first_one..first_one + 2 * best as usize] {
            *x = 2;
        }
    } else if best < 0 {
        let last_two = degrees.iter().rposition(|&x| x == 2).expect("n2 >= 2");
        let k = 2 * (-best) as usize;
        for x in &mut degrees[last_two + 1 - k..=last_two] {
            *x = 1;
        }
    }
    let sequence = DegreeSequence::new(degrees)?;
    let achieved = criticality(&sequence)?;
    Ok(Retuned { sequence, achieved, target, pair_moves: best })
}

/// Largest change of `nu_n` caused by one pair move on `d`.
pub fn pair_move_increment(d: &DegreeSequence) -> f64 {
    let s2 = d.second_factorial_sum() as f64;
    let ell = d.ell() as f64;
    let nu = s2 / ell;
    let up = (s2 + 4.0) / (ell + 2.0) - nu;
    let down = if ell > 2.0 { nu - (s2 - 4.0) / (ell - 2.0) } else { 0.0 };
    up.abs().max(down.abs())
}

/// `beta_i = n^{-2 alpha} sum_{j<i} d_j^2` for `i = 1..=i_max` (constant fixed to 1).
pub fn beta_profile(d: &DegreeSequence, exp: &Exponents, i_max: usize) -> Result<Vec<f64>> {
    if i_max > d.n() {
        return Err(Error::Domain(format!("i_max={i_max} exceeds n={}", d.n())));
    }
    let scale = (d.n() as f64).powf(-2.0 * exp.alpha);
    let mut acc = 0.0;
    Ok((0..i_max)
        .map(|i| {
            let beta = scale * acc;
            let di = d.degrees()[i] as f64;
            acc += di * di;
            beta
        })
        .collect())
}

/// Default hub cutoff `K_n`.
pub fn kn_default(n: usize, exp: &Exponents) -> Result<usize> {
    if n < 3 {
        return Err(Error::Domain(format!("K_n needs n >= 3, got {n}")));
    }
    let ln = (n as f64).ln();
    let growth = (ln.powf(1.0 / (1.0 - 2.0 * exp.alpha)) * ln.ln()).ceil();
    let cap = ((n as f64).powf(exp.alpha) / ln).floor();
    let k = growth.min(cap).max(1.0).min(n as f64);
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Pass,
    Fail,
    Inconclusive,
}

/// One named diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    #[serde(serialize_with = "ordered_pairs")]
    pub values: Vec<(String, f64)>,
    pub threshold: Option<f64>,
    pub flag: Flag,
    pub detail: String,
}

pub(crate) fn ordered_pairs<S: Serializer>(pairs: &[(String, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(pairs.len()))?;
    for (k, v) in pairs {
        map.serialize_entry(k, v)?;
    }
    map.end()
}

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct AssumptionReport {
    pub checks: Vec<CheckRecord>,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `min_{1 <= l <= d_1} l^{tau-2} * (sum_{j : d_j >= l} d_j) / ell_n`.
pub fn size_biased_tail_constant(d: &DegreeSequence, tau: f64) -> f64 {
    let ell = d.ell() as f64;
    if ell == 0.0 {
        return 0.0;
    }
    // mass[l] = sum of degrees >= l, built from the top degree down.
    let dmax = d.max_degree() as usize;
    let mut mass_at = vec![0u64; dmax + 2];
    for (&k, &c) in d.counts() {
        mass_at[k as usize] += k as u64 * c as u64;
    }
    let mut running = 0u64;
    let mut best = f64::INFINITY;
    for l in (1..=dmax).rev() {
        running += mass_at[l];
        let v = (l as f64).powf(tau - 2.0) * running as f64 / ell;
        best = best.min(v);
    }
    best
}

/// Finite-`n` diagnostics for the degree assumptions. Asymptotic clauses are
/// reported as [`Flag::Inconclusive`] with the measured values attached.
pub fn check_assumptions(d: &DegreeSequence, exp: &Exponents, k_probe: usize) -> Result<AssumptionReport> {
    let n = d.n();
    if k_probe > n {
        return Err(Error::Domain(format!("k_probe={k_probe} exceeds n={n}")));
    }
    let nf = n as f64;
    let na = nf.powf(exp.alpha);
    let degs = d.degrees();
    let mut checks = Vec::new();

    checks.push(CheckRecord {
        name: "hub_scaling".into(),
        values: (0..k_probe).map(|i| (format!("theta_hat_{}", i + 1), degs[i] as f64 / na)).collect(),
        threshold: None,
        flag: Flag::Inconclusive,
        detail: "n^-alpha d_i for the leading hubs; convergence cannot be certified at one n".into(),
    });

    let mu = d.ell() as f64 / nf;
    let mu2 = d.power_sum(2) / nf;
    checks.push(CheckRecord {
        name: "moments".into(),
        values: vec![("mean_degree".into(), mu), ("mean_square_degree".into(), mu2)],
        threshold: None,
        flag: Flag::Inconclusive,
        detail: "ell_n/n and sum d_i^2/n".into(),
    });

    let cube_tail = |k: usize| -> f64 {
        let k = k.min(n);
        degs[k..].iter().map(|&x| (x as f64).powi(3)).sum::<f64>() / nf.powf(3.0 * exp.alpha)
    };
    let (t1, t2) = (cube_tail(k_probe), cube_tail(2 * k_probe));
    checks.push(CheckRecord {
        name: "third_moment_tail".into(),
        values: vec![(format!("K={k_probe}"), t1), (format!("K={}", 2 * k_probe), t2)],
        threshold: None,
        flag: Flag::Inconclusive,
        detail: "n^-3alpha sum_{i>K} d_i^3 must vanish as K grows after n grows".into(),
    });

    let frac1 = d.count(1) as f64 / nf;
    checks.push(CheckRecord {
        name: "degree_one_fraction".into(),
        values: vec![("n1_over_n".into(), frac1)],
        threshold: Some(0.0),
        flag: if frac1 > 0.0 { Flag::Pass } else { Flag::Fail },
        detail: "a positive fraction of vertices must have degree one".into(),
    });

    let c0 = size_biased_tail_constant(d, exp.tau);
    checks.push(CheckRecord {
        name: "size_biased_tail_c0".into(),
        values: vec![("c0".into(), c0)],
        threshold: Some(0.0),
        flag: if c0 > 0.0 { Flag::Pass } else { Flag::Fail },
        detail: "min over l of l^(tau-2) P(D* >= l)".into(),
    });

    let nu = criticality(d)?;
    checks.push(CheckRecord {
        name: "criticality".into(),
        values: vec![
            ("nu_n".into(), nu),
            ("target".into(), exp.target_criticality(n)),
            ("window_offset".into(), (nu - 1.0) * nf.powf(exp.eta)),
        ],
        threshold: None,
        flag: Flag::Inconclusive,
        detail: "(nu_n - 1) n^eta should approach lambda".into(),
    });

    let kn = if n >= 3 { kn_default(n, exp)? } else { 1 };
    let beta = beta_profile(d, exp, kn.min(n))?;
    let beta_kn = *beta.last().unwrap_or(&0.0);
    checks.push(CheckRecord {
        name: "beta_kn_over_log_n".into(),
        values: vec![("K_n".into(), kn as f64), ("beta_Kn".into(), beta_kn), ("ratio".into(), beta_kn / nf.ln())],
        threshold: None,
        flag: Flag::Inconclusive,
        detail: "beta uses constant C=1; ratio must diverge with n".into(),
    });

    let hub_sum = |eps: f64| -> f64 {
        ((k_probe + 1)..kn)
            .map(|i| degs[i - 1] as f64 / na * (-eps * beta[i - 1]).exp())
            .sum()
    };
    checks.push(CheckRecord {
        name: "hub_tail_sum".into(),
        values: [0.1, 0.5, 1.0].iter().map(|&e| (format!("eps={e}"), hub_sum(e))).collect(),
        threshold: None,
        flag: Flag::Inconclusive,
        detail: format!("sum over K < i < K_n of (d_i/n^alpha) exp(-eps beta_i), K={k_probe}, K_n={kn}"),
    });

    Ok(AssumptionReport { checks })
}

/// Limiting hub weights `theta_i`, either explicit (zero beyond the listed
/// values) or the power rule `scale * i^-exponent`.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaRule {
    Explicit(Vec<f64>),
    PowerLaw { scale: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSequence {
    pub rule: ThetaRule,
    pub mu: f64,
}

impl ThetaSequence {
    pub fn explicit(values: Vec<f64>, mu: f64) -> Result<Self> {
        if values.iter().any(|&t| !(t > 0.0)) || values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("theta must be positive and non-increasing".into()));
        }
        Ok(Self { rule: ThetaRule::Explicit(values), mu })
    }

    pub fn power_law(scale: f64, exponent: f64, mu: f64) -> Result<Self> {
        if !(scale > 0.0 && exponent > 0.0) {
            return Err(Error::Domain("power rule needs positive scale and exponent".into()));
        }
        Ok(Self { rule: ThetaRule::PowerLaw { scale, exponent }, mu })
    }

    /// `theta_i` for 1-based `i`; zero past the end of an explicit list.
    pub fn get(&self, i: usize) -> f64 {
        match &self.rule {
            ThetaRule::Explicit(v) => v.get(i - 1).copied().unwrap_or(0.0),
            ThetaRule::PowerLaw { scale, exponent } => scale * (i as f64).powf(-exponent),
        }
    }

    /// Number of non-zero terms, `None` for an unbounded rule.
    pub fn support_len(&self) -> Option<usize> {
        match &self.rule {
            ThetaRule::Explicit(v) => Some(v.len()),
            ThetaRule::PowerLaw { .. } => None,
        }
    }

    /// Truncated probes of membership in l^3 \ l^2: the share of the cube sum
    /// carried by `(i_max/2, i_max]` and the square partial sums at
    /// `i_max/4, i_max/2, i_max`.
    pub fn admissibility_probe(&self, i_max: usize) -> (f64, [f64; 3]) {
        let upto = self.support_len().map_or(i_max, |l| l.min(i_max));
        let mut cube_head = 0.0;
        let mut cube_tail = 0.0;
        let mut sq = 0.0;
        let mut marks = [0.0; 3];
        for i in 1..=i_max {
            let t = if i <= upto { self.get(i) } else { 0.0 };
            if i <= i_max / 2 {
                cube_head += t * t * t;
            } else {
                cube_tail += t * t * t;
            }
            sq += t * t;
            if i == i_max / 4 {
                marks[0] = sq;
            }
            if i == i_max / 2 {
                marks[1] = sq;
            }
        }
        marks[2] = sq;
        (cube_tail / (cube_head + cube_tail).max(f64::MIN_POSITIVE), marks)
    }
}

/// `e^{-z} - 1 + z`, accurate for small `z`.
fn phi(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        z2 * (0.5 - z / 6.0 + z2 / 24.0 - z2 * z / 120.0)
    } else {
        (-z).exp_m1() + z
    }
}

/// Partial sum `sum_{i <= trunc} theta_i (e^{-u theta_i} - 1 + u theta_i)`.
pub fn psi_theta(theta: &ThetaSequence, u: f64, trunc: usize) -> Result<f64> {
    if !(u >= 0.0) || trunc < 1 {
        return Err(Error::Domain("psi needs u >= 0 and trunc >= 1".into()));
    }
    let upto = theta.support_len().map_or(trunc, |l| l.min(trunc));
    Ok((1..=upto).map(|i| {
        let t = theta.get(i);
        t * phi(u * t)
    }).sum())
}

/// Head length summed term by term before a power rule switches to its
/// integral tail.
const POWER_HEAD: usize = 4096;
const SERIES_REL_CUTOFF: f64 = 1e-15;

fn head_sum(theta: &ThetaSequence, u: f64, upto: usize) -> f64 {
    let mut acc = 0.0;
    for i in 1..=upto {
        let t = theta.get(i);
        let term = t * phi(u * t);
        acc += term;
        // summands are non-increasing in i
        if term < SERIES_REL_CUTOFF * acc {
            break;
        }
    }
    acc
}

/// `int_0^{z_end} phi(z) z^{-p} dz` for `p in [2, 3)`.
fn tail_kernel(z_end: f64, p: f64) -> f64 {
    let z0 = z_end.min(1.0);
    // term-wise integration of the Taylor series of phi on [0, z0]
    let mut series = 0.0;
    let mut fact = 1.0;
    for k in 2..40 {
        fact *= k as f64;
        let e = k as f64 + 1.0 - p;
        let term = z0.powf(e) / (fact * e);
        series += if k % 2 == 0 { term } else { -term };
        if term < 1e-18 * series.abs() {
            break;
        }
    }
    if z_end <= 1.0 {
        return series;
    }
    // log-spaced quadrature on [1, z_end]
    let g = |s: f64| {
        let z = s.exp();
        phi(z) * z.powf(1.0 - p)
    };
    series + adaptive_simpson(&g, 0.0, z_end.ln(), 1e-10)
}

/// Full `Psi_theta(u)`. Explicit sequences are summed until summands drop
/// below `1e-15` of the running sum; power rules add the integral tail
/// `int_{N+1/2}^inf theta(x) phi(u theta(x)) dx` past a head of `N` terms.
pub fn psi_full(theta: &ThetaSequence, u: f64) -> f64 {
    match &theta.rule {
        ThetaRule::Explicit(v) => head_sum(theta, u, v.len()),
        ThetaRule::PowerLaw { scale, exponent } => power_psi(theta, *scale, *exponent, u, POWER_HEAD),
    }
}

fn power_psi(theta: &ThetaSequence, scale: f64, exponent: f64, u: f64, head_len: usize) -> f64 {
    let head = head_sum(theta, u, head_len);
    if u == 0.0 {
        return head;
    }
    // substitute z = u * theta(x) in the tail integral
    let p = 1.0 / exponent;
    let x0 = head_len as f64 + 0.5;
    let z_end = u * scale * x0.powf(-exponent);
    let pref = (u * scale).powf(p) / (exponent * u);
    head + pref * tail_kernel(z_end, p)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessDiagnostics {
    pub inf_condition: f64,
    /// `(eps, sum_{i <= i_max} theta_i exp(-eps sum_{j<=i} theta_j^2))`
    pub tail_sum: Vec<(f64, f64)>,
    pub integral_estimate: f64,
}

/// Finite probes of the compactness criterion for the limit objects.
pub fn compactness_diagnostics(
    theta: &ThetaSequence,
    tau: f64,
    i_max: usize,
    u_max: f64,
) -> Result<CompactnessDiagnostics> {
    if i_max < 2 {
        return Err(Error::Domain("compactness diagnostics need i_max >= 2".into()));
    }
    if !(u_max >= 1.0) {
        return Err(Error::Domain(format!("u_max must be >= 1, got {u_max}")));
    }
    let mut partial = 0.0;
    let mut inf = f64::INFINITY;
    for i in 1..i_max {
        partial += theta.get(i);
        inf = inf.min(theta.get(i + 1).powf(tau - 2.0) * partial);
    }
    let tail_sum = [0.1, 1.0]
        .iter()
        .map(|&eps| {
            let mut sq = 0.0;
            let s: f64 = (1..=i_max)
                .map(|i| {
                    let t = theta.get(i);
                    sq += t * t;
                    t * (-eps * sq).exp()
                })
                .sum();
            (eps, s)
        })
        .collect();
    Ok(CompactnessDiagnostics {
        inf_condition: inf,
        tail_sum,
        integral_estimate: inverse_psi_integral(theta, u_max),
    })
}

/// `int_1^{u_max} du / Psi_theta(u)`, integrated in `log u`.
pub fn inverse_psi_integral(theta: &ThetaSequence, u_max: f64) -> f64 {
    let g = |s: f64| {
        let u = s.exp();
        u / psi_full(theta, u)
    };
    adaptive_simpson(&g, 0.0, u_max.ln(), 1e-6)
}

/// Smallest `i` with `(1/mu) sum_{j <= i} theta_j^2 >= 5 lambda`, searched up to `i_limit`.
pub fn i2_lambda(theta: &ThetaSequence, lambda: f64, i_limit: usize) -> Result<usize> {
    if lambda <= 0.0 {
        return Ok(1);
    }
    let goal = 5.0 * lambda;
    let mut acc = 0.0;
    let upto = theta.support_len().map_or(i_limit, |l| l.min(i_limit));
    for i in 1..=upto {
        let t = theta.get(i);
        acc += t * t / theta.mu;
        if acc >= goal {
            return Ok(i);
        }
    }
    Err(Error::RangeExhausted { partial: acc, terms: upto })
}
