// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Monte Carlo simulation of the single-urn and cascading-urn processes.
//!
//! Single urn: `m` gold balls; each phase draws `d` balls with replacement.
//! A gold draw earns a point and turns the drawn ball (and whatever else the
//! adversary picks) to lead; lead balls leave at the end of the phase. The run
//! ends at `d` points or an empty urn.
//!
//! Cascade: urns `1..=t`; a phase draws `2^r` balls from urn `r` in increasing
//! order and a gold draw there is worth `d / 2^r`. At the end of a phase each
//! lead ball is destroyed or moved, gold again, to a strictly higher urn.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndedBy {
    Points,
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrnOutcome {
    pub phases: usize,
    pub points: u64,
    pub ended_by: EndedBy,
}

/// Decides which other gold balls turn to lead after a gold draw.
pub trait UrnAdversary {
    /// `gold` counts the gold balls left besides the drawn one; returns how
    /// many of them turn to lead.
    fn extra_conversions(&mut self, gold: u64, rng: &mut dyn RngCore) -> u64;
}

fn binomial(n: u64, p: f64, rng: &mut dyn RngCore) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Only the drawn ball turns to lead.
pub struct DrawnOnly;

impl UrnAdversary for DrawnOnly {
    fn extra_conversions(&mut self, _gold: u64, _rng: &mut dyn RngCore) -> u64 {
        0
    }
}

/// Each other gold ball turns to lead independently with probability `f`.
pub struct RandomFraction(pub f64);

impl UrnAdversary for RandomFraction {
    fn extra_conversions(&mut self, gold: u64, rng: &mut dyn RngCore) -> u64 {
        binomial(gold, self.0, rng)
    }
}

/// Everything turns to lead on the first gold draw.
pub struct MaxDamage;

impl UrnAdversary for MaxDamage {
    fn extra_conversions(&mut self, gold: u64, _rng: &mut dyn RngCore) -> u64 {
        gold
    }
}

/// `floor(f * gold)` of the other gold balls turn to lead.
pub struct GoldFraction(pub f64);

impl UrnAdversary for GoldFraction {
    fn extra_conversions(&mut self, gold: u64, _rng: &mut dyn RngCore) -> u64 {
        (self.0 * gold as f64).floor() as u64
    }
}

/// Demotions taken from an actual coverage run. Balls are random sets of
/// size 8 over a universe of `8 d` elements, gold while they still have at
/// least 4 uncovered elements. A gold draw adds a uniformly random gold set
/// to the covered set; every set that falls below the threshold turns lead.
pub struct ThresholdMimic {
    sets: Vec<Vec<u32>>,
    by_element: Vec<Vec<u32>>,
    covered: Vec<bool>,
    residual: Vec<u32>,
    gold: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl ThresholdMimic {
    const SET_SIZE: usize = 8;
    const THRESHOLD: u32 = 4;

    pub fn new(m: usize, d: u64, seed: u64) -> Self {
        let universe = (8 * d.max(1)) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_element = vec![Vec::new(); universe];
        let sets: Vec<Vec<u32>> = (0..m)
            .map(|i| {
                let mut s = rand::seq::index::sample(&mut rng, universe, Self::SET_SIZE.min(universe))
                    .into_vec();
                s.sort_unstable();
                for &e in &s {
                    by_element[e].push(i as u32);
                }
                s.into_iter().map(|e| e as u32).collect()
            })
            .collect();
        let residual = sets.iter().map(|s| s.len() as u32).collect();
        Self {
            by_element,
            covered: vec![false; universe],
            residual,
            gold: (0..m as u32).collect(),
            pos: (0..m).map(Some).collect(),
            sets,
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    fn demote(&mut self, i: u32) {
        if let Some(p) = self.pos[i as usize].take() {
            let last = self.gold.pop().expect("nonempty");
            if last != i {
                self.gold[p] = last;
                self.pos[last as usize] = Some(p);
            }
        }
    }
}

impl UrnAdversary for ThresholdMimic {
    fn extra_conversions(&mut self, gold: u64, rng: &mut dyn RngCore) -> u64 {
        debug_assert_eq!(gold + 1, self.gold.len() as u64);
        let drawn = self.gold[rng.random_range(0..self.gold.len())];
        self.demote(drawn);
        for &e in &self.sets[drawn as usize].clone() {
            if std::mem::replace(&mut self.covered[e as usize], true) {
                continue;
            }
            for &j in &self.by_element[e as usize].clone() {
                self.residual[j as usize] -= 1;
                if self.residual[j as usize] < Self::THRESHOLD {
                    self.demote(j);
                }
            }
        }
        gold - self.gold.len() as u64
    }
}

/// Runs one single-urn process.
pub fn run_single_urn(m: u64, d: u64, adversary: &mut dyn UrnAdversary, seed: u64) -> UrnOutcome {
    assert!(d >= 1, "d must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gold = m;
    let mut phases = 0;
    let mut points = 0;
    loop {
        if gold == 0 {
            return UrnOutcome {
                phases,
                points,
                ended_by: EndedBy::Empty,
            };
        }
        phases += 1;
        let mut lead = 0u64;
        for _ in 0..d {
            if gold == 0 {
                // Only lead balls remain for the rest of the phase.
                break;
            }
            if rng.random_range(0..gold + lead) < gold {
                points += 1;
                gold -= 1;
                lead += 1;
                let extra = adversary.extra_conversions(gold, &mut rng).min(gold);
                gold -= extra;
                lead += extra;
                if points >= d {
                    return UrnOutcome {
                        phases,
                        points,
                        ended_by: EndedBy::Points,
                    };
                }
            }
        }
    }
}

/// Adversary for the cascading process. Urns are 0-based here.
pub trait CascadeAdversary {
    /// After a gold draw from urn `r`; `gold` holds the current gold counts
    /// (the drawn ball already counted as lead). Returns conversions per urn.
    fn conversions(&mut self, r: usize, gold: &[u64], rng: &mut dyn RngCore) -> Vec<u64>;

    /// At phase end, where the `lead` lead balls of urn `r` go, as
    /// `(target urn, count)` pairs with `target > r`. The rest are destroyed.
    fn settle(&mut self, r: usize, lead: u64, t: usize, rng: &mut dyn RngCore) -> Vec<(usize, u64)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CascadeStrategy {
    /// Only the drawn ball converts; lead balls are destroyed.
    DrawnOnly,
    /// A gold draw turns its whole urn to lead; every lead ball moves up one
    /// urn (destroyed past the last).
    PromoteEverything,
    /// Every other gold ball in every urn converts with probability `f`;
    /// lead balls move up one urn.
    RandomFraction(f64),
    /// The first gold draw turns every ball in every urn to lead; lead balls
    /// are destroyed.
    MaxDamage,
    /// `floor(f * gold)` balls convert in every urn; lead balls move up one
    /// urn.
    GoldFraction(f64),
}

fn promote_one(r: usize, lead: u64, t: usize) -> Vec<(usize, u64)> {
    if r + 1 < t && lead > 0 {
        vec![(r + 1, lead)]
    } else {
        Vec::new()
    }
}

impl CascadeAdversary for CascadeStrategy {
    fn conversions(&mut self, r: usize, gold: &[u64], rng: &mut dyn RngCore) -> Vec<u64> {
        match *self {
            CascadeStrategy::DrawnOnly => vec![0; gold.len()],
            CascadeStrategy::PromoteEverything => {
                let mut c = vec![0; gold.len()];
                c[r] = gold[r];
                c
            }
            CascadeStrategy::RandomFraction(f) => gold.iter().map(|&g| binomial(g, f, rng)).collect(),
            CascadeStrategy::MaxDamage => gold.to_vec(),
            CascadeStrategy::GoldFraction(f) => gold.iter().map(|&g| (f * g as f64).floor() as u64).collect(),
        }
    }

    fn settle(&mut self, r: usize, lead: u64, t: usize, _rng: &mut dyn RngCore) -> Vec<(usize, u64)> {
        match self {
            CascadeStrategy::DrawnOnly | CascadeStrategy::MaxDamage => Vec::new(),
            _ => promote_one(r, lead, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutcome {
    pub phases: usize,
    /// Points times `2^t`, exact.
    pub points_scaled: u128,
    pub t: usize,
    pub ended_by: EndedBy,
    /// `Q_p = sum_r 2^(t-r) m_{r,p}` before each phase and after the last.
    pub q_trace: Vec<u128>,
}

impl CascadeOutcome {
    pub fn points(&self) -> f64 {
        self.points_scaled as f64 / (1u128 << self.t) as f64
    }
}

fn potential(gold: &[u64]) -> u128 {
    let t = gold.len();
    gold.iter()
        .enumerate()
        .map(|(r, &g)| (g as u128) << (t - 1 - r))
        .sum()
}

/// Runs one cascading-urn process over `m[0..t]`.
pub fn run_cascade(m: &[u64], d: u64, adversary: &mut dyn CascadeAdversary, seed: u64) -> CascadeOutcome {
    let t = m.len();
    assert!((1..64).contains(&t), "need 1 <= t < 64 urns");
    assert!(d >= 1, "d must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = (d as u128) << t;
    let mut gold = m.to_vec();
    let mut points: u128 = 0;
    let mut phases = 0;
    let mut q_trace = vec![potential(&gold)];
    loop {
        if gold.iter().all(|&g| g == 0) {
            return CascadeOutcome {
                phases,
                points_scaled: points,
                t,
                ended_by: EndedBy::Empty,
                q_trace,
            };
        }
        phases += 1;
        let before: u64 = gold.iter().sum();
        let mut lead = vec![0u64; t];
        for r in 0..t {
            for _ in 0..(1u64 << (r + 1)) {
                if gold[r] == 0 {
                    break;
                }
                if rng.random_range(0..gold[r] + lead[r]) >= gold[r] {
                    continue;
                }
                points += (d as u128) << (t - 1 - r);
                gold[r] -= 1;
                lead[r] += 1;
                let conv = adversary.conversions(r, &gold, &mut rng);
                for (u, c) in conv.into_iter().enumerate() {
                    let c = c.min(gold[u]);
                    gold[u] -= c;
                    lead[u] += c;
                }
                if points >= target {
                    q_trace.push(potential(&gold));
                    return CascadeOutcome {
                        phases,
                        points_scaled: points,
                        t,
                        ended_by: EndedBy::Points,
                        q_trace,
                    };
                }
            }
        }
        for (r, &lead_r) in lead.iter().enumerate() {
            let mut moved = 0;
            for (target_urn, c) in adversary.settle(r, lead_r, t, &mut rng) {
                assert!(target_urn > r && target_urn < t, "lead balls only move to higher urns");
                moved += c;
                gold[target_urn] += c;
            }
            assert!(moved <= lead_r, "cannot move more lead balls than exist");
        }
        debug_assert!(gold.iter().sum::<u64>() <= before);
        q_trace.push(potential(&gold));
    }
}

/// `log2 log2 m / log2 m`.
pub fn gamma(m: u64) -> f64 {
    let l = (m.max(4) as f64).log2();
    l.log2() / l
}

/// `ceil(12 / gamma)`.
pub fn default_d(m: u64) -> u64 {
    (12.0 / gamma(m)).ceil() as u64
}

/// `log2 m / log2 log2 m`.
pub fn single_scale(m: u64) -> f64 {
    1.0 / gamma(m)
}

/// `t + log2 m`.
pub fn cascade_scale(t: usize, m: u64) -> f64 {
    t as f64 + (m.max(2) as f64).log2()
}

/// Named adversaries usable from configuration files and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversarySpec {
    DrawnOnly,
    RandomFraction(f64),
    MaxDamage,
    /// Fraction `f`; `None` uses `gamma(m)`.
    GoldFraction(Option<f64>),
    ThresholdMimic,
    PromoteEverything,
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::DrawnOnly => write!(f, "drawn-only"),
            AdversarySpec::RandomFraction(p) => write!(f, "random-fraction:{p}"),
            AdversarySpec::MaxDamage => write!(f, "max-damage"),
            AdversarySpec::GoldFraction(None) => write!(f, "gold-fraction"),
            AdversarySpec::GoldFraction(Some(p)) => write!(f, "gold-fraction:{p}"),
            AdversarySpec::ThresholdMimic => write!(f, "threshold-mimic"),
            AdversarySpec::PromoteEverything => write!(f, "promote-everything"),
        }
    }
}

impl FromStr for AdversarySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let frac = |a: Option<&str>| -> Result<Option<f64>> {
            a.map(|a| {
                a.parse::<f64>()
                    .ok()
                    .filter(|p| (0.0..=1.0).contains(p))
                    .ok_or_else(|| Error::InvalidConfig(format!("bad fraction '{a}' in adversary '{s}'")))
            })
            .transpose()
        };
        let spec = match name {
            "drawn-only" => AdversarySpec::DrawnOnly,
            "random-fraction" => AdversarySpec::RandomFraction(
                frac(arg)?.ok_or_else(|| Error::InvalidConfig("random-fraction needs :f".into()))?,
            ),
            "max-damage" => AdversarySpec::MaxDamage,
            "gold-fraction" => AdversarySpec::GoldFraction(frac(arg)?),
            "threshold-mimic" => AdversarySpec::ThresholdMimic,
            "promote-everything" => AdversarySpec::PromoteEverything,
            _ => return Err(Error::InvalidConfig(format!("unknown adversary '{s}'"))),
        };
        if arg.is_some() && !matches!(spec, AdversarySpec::RandomFraction(_) | AdversarySpec::GoldFraction(_)) {
            return Err(Error::InvalidConfig(format!("adversary '{name}' takes no argument")));
        }
        Ok(spec)
    }
}

impl AdversarySpec {
    fn single(&self, m: u64, d: u64, seed: u64) -> Result<Box<dyn UrnAdversary>> {
        Ok(match *self {
            AdversarySpec::DrawnOnly => Box::new(DrawnOnly),
            AdversarySpec::RandomFraction(f) => Box::new(RandomFraction(f)),
            AdversarySpec::MaxDamage => Box::new(MaxDamage),
            AdversarySpec::GoldFraction(f) => Box::new(GoldFraction(f.unwrap_or_else(|| gamma(m)))),
            AdversarySpec::ThresholdMimic => Box::new(ThresholdMimic::new(m as usize, d, seed ^ 0x7717)),
            AdversarySpec::PromoteEverything => {
                return Err(Error::InvalidConfig("promote-everything needs the cascade process".into()))
            }
        })
    }

    fn cascade(&self, m: u64) -> Result<CascadeStrategy> {
        Ok(match *self {
            AdversarySpec::DrawnOnly => CascadeStrategy::DrawnOnly,
            AdversarySpec::RandomFraction(f) => CascadeStrategy::RandomFraction(f),
            AdversarySpec::MaxDamage => CascadeStrategy::MaxDamage,
            AdversarySpec::GoldFraction(f) => CascadeStrategy::GoldFraction(f.unwrap_or_else(|| gamma(m))),
            AdversarySpec::PromoteEverything => CascadeStrategy::PromoteEverything,
            AdversarySpec::ThresholdMimic => {
                return Err(Error::InvalidConfig("threshold-mimic needs the single-urn process".into()))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Process {
    Single,
    /// `t` urns; the total `m` is split evenly, remainder to the low urns.
    Cascade { t: usize },
}

/// Splits `m` over `t` urns as evenly as possible.
pub fn split_even(m: u64, t: usize) -> Vec<u64> {
    let (q, r) = (m / t as u64, m % t as u64);
    (0..t as u64).map(|i| q + u64::from(i < r)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub process: Process,
    pub sizes: Vec<u64>,
    pub trials: usize,
    pub adversaries: Vec<AdversarySpec>,
    /// Draws per phase and point target; `None` uses `ceil(12 / gamma(m))`.
    pub d: Option<u64>,
    pub seed: u64,
}

/// One trial, as written to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub process: String,
    /// Total `m`, or the per-urn sizes joined by `;`.
    pub m: String,
    pub d: u64,
    pub adversary: String,
    pub seed: u64,
    pub phases: usize,
    pub points: f64,
    pub ended_by: EndedBy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub process: String,
    pub m: u64,
    pub d: u64,
    pub adversary: String,
    pub trials: usize,
    pub p90_phases: usize,
    pub max_phases: usize,
    /// `log m / log log m` (single) or `t + log m` (cascade).
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub rows: Vec<TrialRow>,
    pub summaries: Vec<PhaseSummary>,
}

/// Smallest value with at least 90% of the samples at or below it.
pub fn percentile90(values: &[usize]) -> usize {
    let mut v = values.to_vec();
    v.sort_unstable();
    let idx = ((v.len() as f64 * 0.9).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

fn trial_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.random()
}

pub fn phase_bound_experiment(spec: &ExperimentSpec) -> Result<Experiment> {
    if spec.trials == 0 || spec.sizes.is_empty() || spec.adversaries.is_empty() {
        return Err(Error::InvalidConfig(
            "experiment needs trials, sizes and adversaries".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut stream = 0u64;
    for &m in &spec.sizes {
        let d = spec.d.unwrap_or_else(|| default_d(m));
        for adv in &spec.adversaries {
            let mut phases = Vec::with_capacity(spec.trials);
            for _ in 0..spec.trials {
                let seed = trial_seed(spec.seed, stream);
                stream += 1;
                let row = match spec.process {
                    Process::Single => {
                        let mut a = adv.single(m, d, seed)?;
                        let out = run_single_urn(m, d, a.as_mut(), seed);
                        TrialRow {
                            process: "single".into(),
                            m: m.to_string(),
                            d,
                            adversary: adv.to_string(),
                            seed,
                            phases: out.phases,
                            points: out.points as f64,
                            ended_by: out.ended_by,
                        }
                    }
                    Process::Cascade { t } => {
                        let urns = split_even(m, t);
                        let mut a = adv.cascade(m)?;
                        let out = run_cascade(&urns, d, &mut a, seed);
                        TrialRow {
                            process: format!("cascade-t{t}"),
                            m: urns.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
                            d,
                            adversary: adv.to_string(),
                            seed,
                            phases: out.phases,
                            points: out.points(),
                            ended_by: out.ended_by,
                        }
                    }
                };
                phases.push(row.phases);
                rows.push(row);
            }
            let (process, scale) = match spec.process {
                Process::Single => ("single".to_string(), single_scale(m)),
                Process::Cascade { t } => (format!("cascade-t{t}"), cascade_scale(t, m)),
            };
            summaries.push(PhaseSummary {
                process,
                m,
                d,
                adversary: adv.to_string(),
                trials: spec.trials,
                p90_phases: percentile90(&phases),
                max_phases: *phases.iter().max().expect("trials >= 1"),
                scale,
            });
        }
    }
    Ok(Experiment { rows, summaries })
}

pub fn write_trials_csv<W: std::io::Write>(out: W, rows: &[TrialRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: std::io::Write>(out: W, rows: &[PhaseSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
