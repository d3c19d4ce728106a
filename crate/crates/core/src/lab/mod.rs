//! Seeded Monte Carlo experiments over the critical-window pipeline.
//!
//! Each trial is a pure function of `(master_seed, n, trial)`. Trials run in
//! a work pool and are merged by sorting on `(n, trial)`, so the JSON-lines
//! output does not depend on scheduling. Every float written is rounded to
//! 12 significant digits, and the summary quantiles are computed from those
//! rounded values so they can be recomputed exactly from the trial file.

pub mod cli;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::degrees::{
    kn_default, powerlaw_quantile_sequence, retune_to_criticality, size_biased_tail_constant, AssumptionReport,
    CheckRecord, DegreeSequence, Exponents, Flag,
};
use crate::error::{Error, Result};
use crate::explore::{
    bfs_distances, components, hub_removed_diameter, mass_profile_with, ComponentSummary, MassMode,
};
use crate::graph::{
    critical_p, factorial_moment, pair_half_edges, percolate_degrees, realize_percolated, HalfEdgeGraph,
};
use crate::num::{quantile_sorted, sig12};
use crate::rng::{mix_seed, rng_from_seed, substream};

/// Above this many vertices the mass profile is taken over a vertex sample.
pub const EXACT_MASS_LIMIT: usize = 100_000;

/// Default cross-n dispersion ratio below which a statistic is called
/// tight-consistent. A harness setting.
pub const DEFAULT_TIGHTNESS_THRESHOLD: f64 = 2.0;

pub const MIN_TIGHTNESS_TRIALS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Supercritical base sequence thinned at `p_c(lambda)`.
    Percolation,
    /// Base sequence retuned to `nu_n = 1 + lambda n^{-eta}` by degree moves.
    DirectCritical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub tau: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub eps: Option<f64>,
    pub n_list: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_delta_grid")]
    pub delta_grid: Vec<f64>,
    /// Hubs removed for the `Delta^{>K}` statistic; `K_n` when absent.
    #[serde(default)]
    pub hub_count: Option<usize>,
    #[serde(default = "default_ranks")]
    pub component_ranks: Vec<usize>,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Constant of the base quantile sequence; 1 for percolation, 0.5 for direct-critical.
    #[serde(default)]
    pub c_f: Option<f64>,
    #[serde(default = "default_mass_samples")]
    pub mass_samples: usize,
    #[serde(default = "default_threshold")]
    pub tightness_threshold: f64,
    /// Adds per-trial wall-clock milliseconds (makes output non-reproducible).
    #[serde(default)]
    pub record_wall_clock: bool,
    #[serde(default)]
    pub trials_out: Option<String>,
    #[serde(default)]
    pub summary_out: Option<String>,
}

fn default_delta_grid() -> Vec<f64> {
    vec![0.5]
}
fn default_ranks() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_mode() -> Mode {
    Mode::DirectCritical
}
fn default_mass_samples() -> usize {
    1000
}
fn default_threshold() -> f64 {
    DEFAULT_TIGHTNESS_THRESHOLD
}

impl ExperimentSpec {
    pub fn minimal(tau: f64, n_list: Vec<usize>, trials: usize, master_seed: u64) -> Self {
        Self {
            tau,
            lambda: 0.0,
            eps: None,
            n_list,
            trials,
            master_seed,
            delta_grid: default_delta_grid(),
            hub_count: None,
            component_ranks: default_ranks(),
            mode: Mode::DirectCritical,
            c_f: None,
            mass_samples: default_mass_samples(),
            tightness_threshold: DEFAULT_TIGHTNESS_THRESHOLD,
            record_wall_clock: false,
            trials_out: None,
            summary_out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        Exponents::from_tau(self.tau, self.lambda)?;
        let bad = |m: &str| Err(Error::Domain(m.to_string()));
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_list must be non-empty and strictly ascending");
        }
        if self.n_list[0] < 3 {
            return bad("every n must be at least 3");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.delta_grid.is_empty()
            || self.delta_grid.iter().any(|&d| !(d > 0.0))
            || self.delta_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("delta_grid must be positive and strictly ascending");
        }
        if self.component_ranks.iter().any(|&r| r == 0) {
            return bad("component ranks are 1-based");
        }
        if self.c_f.is_some_and(|c| !(c > 0.0)) {
            return bad("c_f must be positive");
        }
        if self.mass_samples == 0 {
            return bad("mass_samples must be positive");
        }
        Ok(())
    }

    pub fn base_constant(&self) -> f64 {
        self.c_f.unwrap_or(match self.mode {
            Mode::Percolation => 1.0,
            Mode::DirectCritical => 0.5,
        })
    }

    fn exponents(&self) -> Result<Exponents> {
        Exponents::from_tau(self.tau, self.lambda)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComponentRecord {
    pub rank: usize,
    pub size: usize,
    pub edges: usize,
    pub surplus: usize,
    pub diameter: u32,
    /// 1-based vertex the radius is measured from.
    pub radius_vertex: usize,
    pub radius: u32,
    /// Smallest `|N_v(delta)|` over the component, per grid point.
    pub min_ball: Vec<usize>,
    pub mass: Vec<f64>,
    pub inverse_mass: Vec<f64>,
    pub mass_approximate: bool,
    pub size_rescaled: f64,
    pub diameter_rescaled: f64,
    pub radius_rescaled: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PercolationFields {
    pub p: f64,
    pub retained_pairs: u64,
    pub m1: f64,
    pub m2: f64,
    pub m1_percolated: f64,
    pub m2_percolated: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub nu: f64,
    pub components: Vec<ComponentRecord>,
    pub hub_count: usize,
    pub hub_removed_diameter: u32,
    pub hub_removed_diameter_rescaled: f64,
    /// Edges in the component of vertex 1.
    pub hub_component_edges: usize,
    pub percolation: Option<PercolationFields>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
}

impl TrialRecord {
    /// Named scalar statistics summarized per n, as rounded for output.
    pub fn statistics(&self, delta_grid: &[f64]) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for c in &self.components {
            let r = c.rank;
            out.push((format!("size_rescaled_{r}"), c.size_rescaled));
            out.push((format!("diameter_rescaled_{r}"), c.diameter_rescaled));
            out.push((format!("radius_rescaled_{r}"), c.radius_rescaled));
            for (d, v) in delta_grid.iter().zip(&c.inverse_mass) {
                out.push((format!("inverse_mass_{r}_delta_{d}"), *v));
            }
        }
        out.push(("hub_removed_diameter_rescaled".into(), self.hub_removed_diameter_rescaled));
        out.push(("hub_component_edges".into(), self.hub_component_edges as f64));
        if let Some(p) = &self.percolation {
            out.push(("retained_pairs".into(), p.retained_pairs as f64));
        }
        out.into_iter().map(|(k, v)| (k, sig12(v))).collect()
    }

    /// Largest relative gap between each rescaled field and raw times the power of n.
    pub fn rescaling_error(&self, exp: &Exponents) -> f64 {
        let nf = self.n as f64;
        let (sr, se) = (nf.powf(-exp.rho), nf.powf(-exp.eta));
        let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() };
        let mut worst = rel(self.hub_removed_diameter_rescaled, self.hub_removed_diameter as f64 * se);
        for c in &self.components {
            worst = worst
                .max(rel(c.size_rescaled, c.size as f64 * sr))
                .max(rel(c.diameter_rescaled, c.diameter as f64 * se))
                .max(rel(c.radius_rescaled, c.radius as f64 * se));
            for ((m, b), inv) in c.mass.iter().zip(&c.min_ball).zip(&c.inverse_mass) {
                worst = worst.max(rel(*m, *b as f64 * sr)).max(rel(*inv, 1.0 / (*b as f64 * sr)));
            }
        }
        worst
    }

    pub fn component(&self, rank: usize) -> Option<&ComponentRecord> {
        self.components.iter().find(|c| c.rank == rank)
    }
}

/// Degree data shared by every trial at one n.
struct Prepared {
    n: usize,
    exp: Exponents,
    degrees: DegreeSequence,
    nu: f64,
    p: Option<f64>,
    hub_count: usize,
}

fn prepare(spec: &ExperimentSpec, n: usize) -> Result<Prepared> {
    let exp = spec.exponents()?;
    let base = powerlaw_quantile_sequence(n, spec.tau, spec.base_constant())?;
    let (degrees, p) = match spec.mode {
        Mode::Percolation => {
            let p = critical_p(&base, &exp)?;
            (base, Some(p))
        }
        Mode::DirectCritical => (retune_to_criticality(&base, &exp)?.sequence, None),
    };
    let nu = crate::degrees::criticality(&degrees)?;
    let hub_count = match spec.hub_count {
        Some(k) => k.min(n),
        None => kn_default(n, &exp)?,
    };
    Ok(Prepared { n, exp, degrees, nu, p, hub_count })
}

fn eccentricity(g: &HalfEdgeGraph, v: usize) -> u32 {
    bfs_distances(g, v).expect("valid vertex").into_iter().flatten().max().unwrap_or(0)
}

fn component_record(
    spec: &ExperimentSpec,
    prep: &Prepared,
    g: &HalfEdgeGraph,
    comp: &ComponentSummary,
    rank: usize,
    seed: u64,
) -> Result<ComponentRecord> {
    let mut rng = rng_from_seed(substream(seed, 10 + rank as u64));
    let v = comp.member_list[rng.random_range(0..comp.member_list.len())];
    let radius = eccentricity(g, v);
    let mode = if prep.n > EXACT_MASS_LIMIT {
        MassMode::Sampled { samples: spec.mass_samples, seed: substream(seed, 100 + rank as u64) }
    } else {
        MassMode::Exact
    };
    let profile = mass_profile_with(g, comp, &spec.delta_grid, &prep.exp, mode)?;
    let nf = prep.n as f64;
    let (sr, se) = (nf.powf(-prep.exp.rho), nf.powf(-prep.exp.eta));
    Ok(ComponentRecord {
        rank,
        size: comp.vertices,
        edges: comp.edges,
        surplus: comp.surplus,
        diameter: comp.diameter,
        radius_vertex: v + 1,
        radius,
        inverse_mass: profile.values.iter().map(|m| 1.0 / m).collect(),
        min_ball: profile.min_ball,
        mass: profile.values,
        mass_approximate: profile.approximate,
        size_rescaled: comp.vertices as f64 * sr,
        diameter_rescaled: comp.diameter as f64 * se,
        radius_rescaled: radius as f64 * se,
    })
}

fn run_trial(spec: &ExperimentSpec, prep: &Prepared, trial: usize) -> Result<TrialRecord> {
    let clock = Instant::now();
    let seed = mix_seed(spec.master_seed, prep.n as u64, trial as u64);
    let (g, percolation) = match prep.p {
        Some(p) => {
            let outcome = percolate_degrees(&prep.degrees, p, substream(seed, 1))?;
            let g = realize_percolated(&outcome, substream(seed, 2))?;
            let fields = PercolationFields {
                p,
                retained_pairs: outcome.retained_count,
                m1: factorial_moment(prep.degrees.degrees(), 1),
                m2: factorial_moment(prep.degrees.degrees(), 2),
                m1_percolated: outcome.factorial_moment(1),
                m2_percolated: outcome.factorial_moment(2),
            };
            (g, Some(fields))
        }
        None => (pair_half_edges(&prep.degrees, substream(seed, 2))?, None),
    };
    let comps = components(&g);
    let mut records = Vec::new();
    for &rank in &spec.component_ranks {
        if let Some(c) = comps.get(rank - 1) {
            records.push(component_record(spec, prep, &g, c, rank, seed)?);
        }
    }
    let hub_component_edges = comps
        .iter()
        .find(|c| c.member_list.binary_search(&0).is_ok())
        .map_or(0, |c| c.edges);
    let hub_removed = hub_removed_diameter(&g, prep.hub_count)?;
    Ok(TrialRecord {
        n: prep.n,
        trial,
        seed,
        nu: prep.nu,
        components: records,
        hub_count: prep.hub_count,
        hub_removed_diameter: hub_removed,
        hub_removed_diameter_rescaled: hub_removed as f64 * (prep.n as f64).powf(-prep.exp.eta),
        hub_component_edges,
        percolation,
        wall_ms: spec.record_wall_clock.then(|| clock.elapsed().as_secs_f64() * 1e3),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatisticQuantiles {
    pub name: String,
    pub count: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NSummary {
    pub n: usize,
    pub trials: usize,
    pub nu: f64,
    pub p: Option<f64>,
    pub hub_count: usize,
    pub statistics: Vec<StatisticQuantiles>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub spec: ExperimentSpec,
    pub per_n: Vec<NSummary>,
    pub tightness: Vec<Tightness>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summary: ExperimentSummary,
}

impl ExperimentOutput {
    pub fn jsonl(&self) -> Result<String> {
        records_jsonl(&self.records)
    }

    pub fn summary_json(&self) -> Result<String> {
        to_rounded_json(&self.summary, true)
    }

    /// Values of one named statistic, grouped by n.
    pub fn statistic(&self, name: &str) -> BTreeMap<usize, Vec<f64>> {
        group_statistic(&self.records, &self.summary.spec.delta_grid, name)
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            if let Some(x) = num.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(sig12(x)) {
                    *num = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// JSON with every float rounded to 12 significant digits.
pub fn to_rounded_json<T: Serialize>(x: &T, pretty: bool) -> Result<String> {
    let mut v = serde_json::to_value(x)?;
    round_floats(&mut v);
    Ok(if pretty { serde_json::to_string_pretty(&v)? } else { serde_json::to_string(&v)? })
}

pub fn records_jsonl(records: &[TrialRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&to_rounded_json(r, false)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TrialRecord>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

pub fn group_statistic(records: &[TrialRecord], delta_grid: &[f64], name: &str) -> BTreeMap<usize, Vec<f64>> {
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some((_, v)) = r.statistics(delta_grid).into_iter().find(|(k, _)| k == name) {
            out.entry(r.n).or_default().push(v);
        }
    }
    out
}

fn summarize(spec: &ExperimentSpec, preps: &[Prepared], records: &[TrialRecord]) -> ExperimentSummary {
    let mut names: Vec<String> = Vec::new();
    let mut per_n = Vec::new();
    for prep in preps {
        let mut stats: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let these: Vec<&TrialRecord> = records.iter().filter(|r| r.n == prep.n).collect();
        for r in &these {
            for (k, v) in r.statistics(&spec.delta_grid) {
                if !names.contains(&k) {
                    names.push(k.clone());
                }
                stats.entry(k).or_default().push(v);
            }
        }
        let statistics = stats
            .into_iter()
            .map(|(name, mut v)| {
                v.sort_by(f64::total_cmp);
                StatisticQuantiles {
                    name,
                    count: v.len(),
                    q10: quantile_sorted(&v, 0.1),
                    q50: quantile_sorted(&v, 0.5),
                    q90: quantile_sorted(&v, 0.9),
                }
            })
            .collect();
        per_n.push(NSummary {
            n: prep.n,
            trials: these.len(),
            nu: prep.nu,
            p: prep.p,
            hub_count: prep.hub_count,
            statistics,
        });
    }
    names.sort();
    let tightness = names
        .iter()
        .filter_map(|name| {
            let groups = group_statistic(records, &spec.delta_grid, name);
            tightness_diagnostic(&groups, name, spec.tightness_threshold).ok()
        })
        .collect();
    ExperimentSummary { spec: spec.clone(), per_n, tightness }
}

/// Runs every `(n, trial)` of the spec and summarizes per n. On a trial
/// failure, the records completed so far are written to the configured
/// trial file before the error is returned.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let mut preps = Vec::with_capacity(spec.n_list.len());
    for &n in &spec.n_list {
        preps.push(prepare(spec, n).map_err(|e| Error::Trial { n, trial: 0, source: Box::new(e) })?);
    }
    let jobs: Vec<(usize, usize)> =
        (0..preps.len()).flat_map(|i| (0..spec.trials).map(move |t| (i, t))).collect();
    let results: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            run_trial(spec, &preps[i], t).map_err(|e| Error::Trial { n: preps[i].n, trial: t, source: Box::new(e) })
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut first_error = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    records.sort_by_key(|r| (r.n, r.trial));
    if let Some(e) = first_error {
        if let Some(path) = &spec.trials_out {
            std::fs::write(path, records_jsonl(&records)?)?;
        }
        return Err(e);
    }
    let summary = summarize(spec, &preps, &records);
    Ok(ExperimentOutput { records, summary })
}

/// Writes trial JSONL and summary JSON to the given paths.
pub fn write_outputs(out: &ExperimentOutput, trials: &Path, summary: &Path) -> Result<()> {
    std::fs::File::create(trials)?.write_all(out.jsonl()?.as_bytes())?;
    std::fs::File::create(summary)?.write_all(out.summary_json()?.as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TightnessRow {
    pub n: usize,
    pub count: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tightness {
    pub statistic: String,
    pub rows: Vec<TightnessRow>,
    /// `max_n q90(n) / min_n q90(n)`.
    pub ratio: f64,
    pub threshold: f64,
    pub tight_consistent: bool,
}

/// Cross-n stability of the upper quantile of a statistic.
pub fn tightness_diagnostic(groups: &BTreeMap<usize, Vec<f64>>, statistic: &str, threshold: f64) -> Result<Tightness> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!("{statistic}: need at least 2 values of n")));
    }
    if let Some((n, v)) = groups.iter().find(|(_, v)| v.len() < MIN_TIGHTNESS_TRIALS) {
        return Err(Error::InsufficientData(format!(
            "{statistic}: n={n} has {} trials, need {MIN_TIGHTNESS_TRIALS}",
            v.len()
        )));
    }
    let rows: Vec<TightnessRow> = groups
        .iter()
        .map(|(&n, v)| {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            TightnessRow {
                n,
                count: v.len(),
                q10: quantile_sorted(&v, 0.1),
                q50: quantile_sorted(&v, 0.5),
                q90: quantile_sorted(&v, 0.9),
            }
        })
        .collect();
    let hi = rows.iter().map(|r| r.q90).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.q90).fold(f64::INFINITY, f64::min);
    let ratio = if hi == lo { 1.0 } else if lo <= 0.0 { f64::INFINITY } else { hi / lo };
    Ok(Tightness {
        statistic: statistic.to_string(),
        rows,
        ratio,
        threshold,
        tight_consistent: ratio < threshold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PercolationReport {
    pub p: f64,
    pub trials: usize,
    pub checks: AssumptionReport,
    pub m1_deviation: Vec<f64>,
    pub m2_deviation: Vec<f64>,
}

fn quantile_values(v: &[f64]) -> Vec<(String, f64)> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    vec![("q50".into(), quantile_sorted(&s, 0.5)), ("q90".into(), quantile_sorted(&s, 0.9))]
}

/// Concentration of percolated moments and hub degrees over repeated thinning.
pub fn percolation_assumption_report(
    d: &DegreeSequence,
    exp: &Exponents,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<PercolationReport> {
    if trials < 100 {
        return Err(Error::InsufficientData(format!("need at least 100 trials, got {trials}")));
    }
    let m1 = factorial_moment(d.degrees(), 1);
    let m2 = factorial_moment(d.degrees(), 2);
    let hubs = d.n().min(10);
    struct One {
        coupled: bool,
        m1p: f64,
        m2p: f64,
        hub_dev: f64,
        tail: f64,
    }
    let runs: Vec<One> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let out = percolate_degrees(d, p, substream(seed, k))?;
            let sum: u64 = out.percolated_degrees.iter().map(|&x| x as u64).sum();
            let hub_dev = (0..hubs)
                .map(|i| {
                    let expect = d.degrees()[i] as f64 * p;
                    if expect == 0.0 {
                        0.0
                    } else {
                        (out.percolated_degrees[i] as f64 - expect).abs() / expect
                    }
                })
                .fold(0.0, f64::max);
            let tail = size_biased_tail_constant(&DegreeSequence::from_unsorted(out.percolated_degrees.clone()), exp.tau);
            Ok(One {
                coupled: sum == 2 * out.retained_count,
                m1p: out.factorial_moment(1),
                m2p: out.factorial_moment(2),
                hub_dev,
                tail,
            })
        })
        .collect::<Result<_>>()?;

    let nf = d.n() as f64;
    let mut checks = Vec::new();
    let broken = runs.iter().filter(|r| !r.coupled).count();
    checks.push(CheckRecord {
        name: "coupling".into(),
        values: vec![("violations".into(), broken as f64)],
        threshold: Some(0.0),
        flag: if broken == 0 { Flag::Pass } else { Flag::Fail },
        detail: "sum of percolated degrees equals 2 R_n".into(),
    });

    let skip = p == 0.0 || m1 == 0.0;
    let m1_deviation: Vec<f64> = if skip { vec![] } else { runs.iter().map(|r| (r.m1p / (p * m1) - 1.0).abs()).collect() };
    let m2_deviation: Vec<f64> =
        if skip || m2 == 0.0 { vec![] } else { runs.iter().map(|r| (r.m2p / (p * p * m2) - 1.0).abs()).collect() };
    for (name, dev, thr, what) in [
        ("m1_concentration", &m1_deviation, 5.0 * nf.powf(-0.5), "q90 of |M1^p/(p M1) - 1| against 5 n^{-1/2}"),
        (
            "m2_concentration",
            &m2_deviation,
            5.0 * nf.powf(1.5 * exp.alpha - 1.0),
            "q90 of |M2^p/(p^2 M2) - 1| against 5 n^{3 alpha/2 - 1}",
        ),
    ] {
        checks.push(if dev.is_empty() {
            CheckRecord {
                name: name.into(),
                values: vec![],
                threshold: Some(thr),
                flag: Flag::Inconclusive,
                detail: "skipped: percolated moment is zero".into(),
            }
        } else {
            let values = quantile_values(dev);
            let q90 = values[1].1;
            CheckRecord {
                name: name.into(),
                values,
                threshold: Some(thr),
                flag: if q90 < thr { Flag::Pass } else { Flag::Fail },
                detail: what.into(),
            }
        });
    }

    let hub: Vec<f64> = runs.iter().map(|r| r.hub_dev).collect();
    checks.push(CheckRecord {
        name: "hub_concentration".into(),
        values: quantile_values(&hub),
        threshold: None,
        flag: Flag::Inconclusive,
        detail: format!("max over the {hubs} largest hubs of |d_i^p - p d_i| / (p d_i)"),
    });
    let tails: Vec<f64> = runs.iter().map(|r| r.tail).collect();
    let tmin = tails.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(CheckRecord {
        name: "percolated_tail".into(),
        values: [quantile_values(&tails), vec![("min".into(), tmin)]].concat(),
        threshold: Some(0.0),
        flag: if tmin > 0.0 { Flag::Pass } else { Flag::Fail },
        detail: "min over l of l^{tau-2} sum_i d_i^p 1{d_i^p >= l} / ell^p".into(),
    });
    Ok(PercolationReport { p, trials, checks: AssumptionReport { checks }, m1_deviation, m2_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults_and_validation() {
        let s = ExperimentSpec::from_json(r#"{"tau":3.5,"n_list":[100],"trials":2}"#).unwrap();
        assert_eq!(s.component_ranks, vec![1, 2, 3]);
        assert_eq!(s.mode, Mode::DirectCritical);
        assert_eq!(s.base_constant(), 0.5);
        assert!(ExperimentSpec::from_json(r#"{"tau":3.5,"n_list":[100,50],"trials":2}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"tau":3.5,"n_list":[100],"trials":0}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"tau":3.5,"n_list":[100],"trials":1,"typo":1}"#).is_err());
        let s = ExperimentSpec::from_json(r#"{"tau":3.5,"n_list":[100],"trials":1,"mode":"percolation"}"#).unwrap();
        assert_eq!(s.base_constant(), 1.0);
    }

    #[test]
    fn smoke_single_trial() {
        let out = run_experiment(&ExperimentSpec::minimal(3.5, vec![10], 1, 5)).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert!(!r.components.is_empty());
        assert!(r.percolation.is_none());
        assert!((r.nu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tightness_examples() {
        let mut g = BTreeMap::new();
        g.insert(1000, vec![3.0; 50]);
        g.insert(10000, vec![3.0; 50]);
        assert_eq!(tightness_diagnostic(&g, "c", 2.0).unwrap().ratio, 1.0);
        let mut g = BTreeMap::new();
        g.insert(1000, vec![1000.0; 50]);
        g.insert(10000, vec![10000.0; 50]);
        let t = tightness_diagnostic(&g, "n", 2.0).unwrap();
        assert_eq!(t.ratio, 10.0);
        assert!(!t.tight_consistent);
        g.remove(&1000);
        assert!(matches!(tightness_diagnostic(&g, "n", 2.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn percolation_report_extremes() {
        let d = powerlaw_quantile_sequence(500, 3.5, 1.0).unwrap();
        let e = Exponents::from_tau(3.5, 0.0).unwrap();
        let r = percolation_assumption_report(&d, &e, 1.0, 100, 1).unwrap();
        assert!(r.m1_deviation.iter().all(|&x| x == 0.0));
        assert!(r.m2_deviation.iter().all(|&x| x == 0.0));
        let r = percolation_assumption_report(&d, &e, 0.0, 100, 1).unwrap();
        assert_eq!(r.checks.get("m1_concentration").unwrap().flag, Flag::Inconclusive);
        assert!(percolation_assumption_report(&d, &e, 0.5, 99, 1).is_err());
    }
}
