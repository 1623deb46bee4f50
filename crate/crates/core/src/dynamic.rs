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

//! Multi-pass thresholded greedy for dynamic set streams.
//!
//! The run alternates two kinds of passes. A sampling pass feeds every token
//! to ℓ0 samplers restricted to residual-size bands of the current covered set
//! `C`; a retrieval pass stores `S \ C` for the sampled ids. Sampled sets are
//! then offered to the solution in draw order. The first phase works through
//! the halving bands `F_1..F_ell` together; the tail then empties the
//! geometric bands `G_1, G_2, ...` one at a time.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hashing::{Sparsifier, SparsifierConfig};
use crate::l0::{reps_for_delta, Band, BatchConfig, BatchSampler, L0Outcome, L0Sketch};
use crate::ledger::{MetricsLedger, StorageMeter};
use crate::model::{CoverageState, DynamicStream, SetId, SetRecord, StreamToken};
use crate::params::{ceil_log2, floor_log2, Epsilon};

/// A stream that can be read any number of times.
pub trait StreamSource {
    fn universe(&self) -> u32;
    fn id_space(&self) -> u64;
    /// Distinct set ids in the stream.
    fn set_count(&self) -> usize;
    fn replay(&self, visit: &mut dyn FnMut(&StreamToken)) -> Result<()>;
}

impl StreamSource for DynamicStream {
    fn universe(&self) -> u32 {
        self.n()
    }

    fn id_space(&self) -> u64 {
        DynamicStream::id_space(self)
    }

    fn set_count(&self) -> usize {
        self.distinct_sets()
    }

    fn replay(&self, visit: &mut dyn FnMut(&StreamToken)) -> Result<()> {
        self.tokens().iter().for_each(visit);
        Ok(())
    }
}

/// Ceiling that tolerates floating error just above an integer.
fn ceil_threshold(x: f64) -> usize {
    (x - 1e-9 * x.abs().max(1.0)).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicConfig {
    pub k: usize,
    pub epsilon: Epsilon,
    /// Guess for the optimum; guarantees hold for `opt/2 <= v <= opt`.
    pub v: u64,
    /// Failure probability per sketch; `None` picks `1/(m log m)`.
    pub delta: Option<f64>,
    /// `None` picks [`DynamicConfig::default_pass_cap`].
    pub pass_cap: Option<usize>,
    pub seed: u64,
    /// Extra attempts for an iteration whose sampling fails.
    pub retries: usize,
}

impl DynamicConfig {
    pub fn new(k: usize, epsilon: Epsilon, v: u64, seed: u64) -> Self {
        Self {
            k,
            epsilon,
            v,
            delta: None,
            pass_cap: None,
            seed,
            retries: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.v == 0 {
            return Err(Error::InvalidConfig("guess v must be at least 1".into()));
        }
        let e = self.epsilon.value();
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon {e} outside (0, 1)")));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::InvalidConfig(format!("delta {d} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// `floor(log2 k)`.
    pub fn ell(&self) -> usize {
        floor_log2(self.k as u64) as usize
    }

    /// `theta_i = 2v / 2^i`; `theta_0` is infinite.
    pub fn theta(&self, i: usize) -> f64 {
        if i == 0 {
            f64::INFINITY
        } else {
            2.0 * self.v as f64 / (i as f64).exp2()
        }
    }

    /// Number of tail levels, `1 + ceil(log_{1+eps}(16e))`.
    pub fn tail_levels(&self) -> usize {
        let e = self.epsilon.value();
        1 + ((16.0 * std::f64::consts::E).ln() / (1.0 + e).ln()).ceil() as usize
    }

    /// `tau_i = (2v / 2^ell) / (1+eps)^(i-1)`; `tau_0` is infinite.
    pub fn tau(&self, i: usize) -> f64 {
        if i == 0 {
            return f64::INFINITY;
        }
        self.theta(self.ell()) / (1.0 + self.epsilon.value()).powi(i as i32 - 1)
    }

    /// `F_i`: `theta_i <= |S \ C| < theta_{i-1}`.
    pub fn cascade_band(&self, i: usize) -> Band {
        let lo = ((2 * self.v as u128).div_ceil(1u128 << i)).max(1) as usize;
        let hi = (i > 1).then(|| (2 * self.v as u128).div_ceil(1u128 << (i - 1)) as usize);
        Band::new(lo, hi)
    }

    /// `G_i`: `tau_i <= |S \ C| < tau_{i-1}`.
    pub fn tail_band(&self, i: usize) -> Band {
        let hi = (i > 1).then(|| ceil_threshold(self.tau(i - 1)));
        Band::new(ceil_threshold(self.tau(i)), hi)
    }

    /// Largest total residual a cascade retrieval may hold: `4 v ell`.
    pub fn cascade_storage_bound(&self) -> u64 {
        4 * self.v * self.ell() as u64
    }

    /// Largest total residual a tail retrieval at level `i` may hold:
    /// `k tau_{i-1}`, with `tau_0` read as `2v`.
    pub fn tail_storage_bound(&self, i: usize) -> f64 {
        let cap = if i == 1 { 2.0 * self.v as f64 } else { self.tau(i - 1) };
        self.k as f64 * cap
    }

    pub fn default_delta(m: usize) -> f64 {
        let m = m.max(2) as f64;
        (1.0 / (m * m.log2())).min(0.25)
    }

    /// `20 (1 + eps^-1 / log2 log2 m) log2 m`, with `m` floored at 4.
    pub fn default_pass_cap(&self, m: usize) -> usize {
        let lm = (m.max(4) as f64).log2();
        (20.0 * (1.0 + 1.0 / (self.epsilon.value() * lm.log2())) * lm).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grow {
    Grew,
    Skipped,
    BudgetFull,
}

/// Adds `set` when `|S \ C| >= theta`.
pub fn grow_solution(state: &mut CoverageState, set: &SetRecord, theta: f64) -> Grow {
    grow_at_least(state, set.id, set.elements(), ceil_threshold(theta))
}

fn grow_at_least(state: &mut CoverageState, id: SetId, elements: &[u32], lo: usize) -> Grow {
    if state.is_full() {
        return Grow::BudgetFull;
    }
    if state.marginal(elements) >= lo {
        state.add(id, elements);
        Grow::Grew
    } else {
        Grow::Skipped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cascade,
    Tail(usize),
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Every band is empty.
    Completed,
    /// The solution reached `k` sets.
    BudgetFull,
    /// A sampled set had more than `2v` uncovered elements, so `v < opt/2`.
    GuessTooLow,
}

/// One sampling pass plus one retrieval pass.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub phase: Phase,
    pub draws: usize,
    pub distinct: usize,
    pub retrieved_elements: usize,
    pub storage_bound: f64,
    pub added: usize,
    /// Retrieved sets whose residual was outside the band they were drawn
    /// from.
    pub membership_violations: usize,
    /// Some retrieved residual exceeded `2v`; the storage bound does not
    /// apply to this iteration.
    pub guess_too_low: bool,
}

impl IterationRecord {
    /// Retrieved more than the storage bound allows.
    pub fn over_budget(&self) -> bool {
        !self.guess_too_low && self.retrieved_elements as f64 > self.storage_bound
    }
}

#[derive(Debug, Clone)]
pub struct DynamicOutcome {
    pub state: CoverageState,
    pub status: RunStatus,
    pub passes: usize,
    pub retries: usize,
    pub cascade_iterations: usize,
    /// Iterations spent at each tail level, index `i - 1` for `G_i`.
    pub tail_iterations: Vec<usize>,
    pub trace: Vec<IterationRecord>,
    pub peak_stored_elements: u64,
    pub peak_sketch_words: u64,
    pub ledger: MetricsLedger,
}

impl DynamicOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BandKey {
    F(usize),
    G(usize),
}

struct BandSampler {
    key: BandKey,
    band: Band,
    sampler: BatchSampler,
    probe: L0Sketch,
}

impl BandSampler {
    fn is_empty(&self) -> bool {
        self.probe.query() == L0Outcome::Empty
    }
}

struct Run<'a, S: StreamSource + ?Sized> {
    source: &'a S,
    cfg: &'a DynamicConfig,
    reps: usize,
    cap: usize,
    rng: ChaCha8Rng,
    state: CoverageState,
    meter: StorageMeter,
    passes: usize,
    peak_words: u64,
}

impl<S: StreamSource + ?Sized> Run<'_, S> {
    fn start_pass(&mut self) -> Result<()> {
        if self.passes >= self.cap {
            return Err(Error::PassCapExceeded { cap: self.cap });
        }
        self.passes += 1;
        Ok(())
    }

    fn sampling_pass(&mut self, keys: &[BandKey]) -> Result<Vec<BandSampler>> {
        self.start_pass()?;
        let id_space = self.source.id_space();
        let mut samplers: Vec<BandSampler> = keys
            .iter()
            .map(|&key| {
                let (band, r) = match key {
                    BandKey::F(i) => (self.cfg.cascade_band(i), 1usize << i),
                    BandKey::G(i) => (self.cfg.tail_band(i), self.cfg.k),
                };
                let cfg = BatchConfig {
                    r,
                    id_space,
                    reps: self.reps,
                };
                BandSampler {
                    key,
                    band,
                    sampler: BatchSampler::new(cfg, &mut self.rng),
                    probe: L0Sketch::new(id_space, self.reps, &mut self.rng),
                }
            })
            .collect();
        let words: usize = samplers
            .iter()
            .map(|b| b.sampler.sketch_words() + b.probe.sketch_words())
            .sum();
        self.peak_words = self.peak_words.max(words as u64);
        let state = &self.state;
        self.source.replay(&mut |tok| {
            let residual = state.marginal(tok.set.elements());
            for b in samplers.iter_mut().filter(|b| b.band.admits(residual)) {
                b.sampler.update(tok.set.id, tok.op.delta());
                b.probe.update(tok.set.id, tok.op.delta());
            }
        })?;
        Ok(samplers)
    }

    /// Stores `S \ C` for every id in `wanted`.
    fn retrieval_pass(&mut self, wanted: &[SetId]) -> Result<HashMap<SetId, Vec<u32>>> {
        self.start_pass()?;
        let mut out: HashMap<SetId, Vec<u32>> = HashMap::with_capacity(wanted.len());
        let mut pending: HashMap<SetId, ()> = wanted.iter().map(|&id| (id, ())).collect();
        let state = &self.state;
        let meter = &mut self.meter;
        self.source.replay(&mut |tok| {
            if pending.remove(&tok.set.id).is_some() {
                let r = state.residual(tok.set.elements());
                meter.alloc(r.len());
                out.insert(tok.set.id, r);
            }
        })?;
        if let Some(id) = pending.keys().next() {
            return Err(Error::SketchFailure(format!("sampled id {id} not found in stream")));
        }
        Ok(out)
    }

    fn add(&mut self, id: SetId, residual: &[u32], lo: usize) -> Grow {
        let before = self.state.value();
        let g = grow_at_least(&mut self.state, id, residual, lo);
        self.meter.alloc(self.state.value() - before);
        g
    }
}

fn keys_for(cfg: &DynamicConfig, phase: Phase) -> Vec<BandKey> {
    let tail_from = match phase {
        Phase::Tail(i) => i,
        _ => 1,
    };
    let mut keys = Vec::new();
    if phase == Phase::Cascade {
        keys.extend((1..=cfg.ell()).map(BandKey::F));
    }
    keys.extend((tail_from..=cfg.tail_levels()).map(BandKey::G));
    keys
}

/// Runs the full algorithm for one guess `cfg.v`.
pub fn run_dynamic<S: StreamSource + ?Sized>(source: &S, cfg: &DynamicConfig) -> Result<DynamicOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let m = source.set_count();
    let delta = cfg.delta.unwrap_or_else(|| DynamicConfig::default_delta(m));
    let mut run = Run {
        source,
        cfg,
        reps: reps_for_delta(delta),
        cap: cfg.pass_cap.unwrap_or_else(|| cfg.default_pass_cap(m)),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        state: CoverageState::new(cfg.k),
        meter: StorageMeter::new(),
        passes: 0,
        peak_words: 0,
    };
    let mut phase = if cfg.ell() > 0 { Phase::Cascade } else { Phase::Tail(1) };
    let mut trace = Vec::new();
    let mut cascade_iterations = 0;
    let mut tail_iterations = vec![0usize; cfg.tail_levels()];
    let mut retries_used = 0;
    let mut attempts_left = cfg.retries;
    let two_v = 2 * cfg.v as usize;

    let status = 'run: loop {
        let samplers = run.sampling_pass(&keys_for(cfg, phase))?;
        let nonempty = |key: BandKey| samplers.iter().any(|b| b.key == key && !b.is_empty());

        if phase == Phase::Cascade && !(1..=cfg.ell()).any(|i| nonempty(BandKey::F(i))) {
            phase = Phase::Tail(1);
        }
        if let Phase::Tail(i) = phase {
            match (i..=cfg.tail_levels()).find(|&j| nonempty(BandKey::G(j))) {
                Some(j) => phase = Phase::Tail(j),
                None => break RunStatus::Completed,
            }
        }

        // Draws per band, in the order they will be offered.
        let mut draws: Vec<(Band, Vec<SetId>)> = Vec::new();
        let mut failure = None;
        for mut b in samplers {
            let count = match (phase, b.key) {
                (Phase::Cascade, BandKey::F(i)) if !b.is_empty() => 1usize << i,
                (Phase::Tail(j), BandKey::G(i)) if i == j => cfg.k,
                _ => continue,
            };
            match b.sampler.draw_with_fallback(count, &mut run.rng) {
                Ok(ids) => draws.push((b.band, ids)),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failure {
            if attempts_left == 0 {
                return Err(Error::SketchFailure(format!("sampling failed after retry: {e}")));
            }
            attempts_left -= 1;
            retries_used += 1;
            continue;
        }
        attempts_left = cfg.retries;

        let mut wanted: Vec<SetId> = draws.iter().flat_map(|(_, ids)| ids.iter().copied()).collect();
        wanted.sort();
        wanted.dedup();
        let residuals = run.retrieval_pass(&wanted)?;
        let retrieved: usize = residuals.values().map(Vec::len).sum();
        let mut record = IterationRecord {
            phase,
            draws: draws.iter().map(|(_, ids)| ids.len()).sum(),
            distinct: wanted.len(),
            retrieved_elements: retrieved,
            storage_bound: match phase {
                Phase::Tail(i) => cfg.tail_storage_bound(i),
                _ => cfg.cascade_storage_bound() as f64,
            },
            added: 0,
            membership_violations: 0,
            guess_too_low: false,
        };
        for (band, ids) in &draws {
            record.membership_violations += ids
                .iter()
                .filter(|id| !band.admits(residuals[id].len()))
                .count();
        }
        let too_low = residuals.values().any(|r| r.len() > two_v);
        record.guess_too_low = too_low;
        if record.over_budget() {
            return Err(Error::BudgetExceeded {
                stored: retrieved as u64,
                budget: record.storage_bound as u64,
            });
        }

        let mut full = false;
        if !too_low {
            'grow: for (band, ids) in &draws {
                for id in ids {
                    match run.add(*id, &residuals[id], band.lo) {
                        Grow::Grew => record.added += 1,
                        Grow::Skipped => {}
                        Grow::BudgetFull => unreachable!("checked after every addition"),
                    }
                    if run.state.is_full() {
                        full = true;
                        break 'grow;
                    }
                }
            }
        }
        run.meter.release(retrieved);
        debug_assert_eq!(run.meter.current(), run.state.value() as u64);
        match phase {
            Phase::Cascade => cascade_iterations += 1,
            Phase::Tail(i) => tail_iterations[i - 1] += 1,
            Phase::Done => unreachable!(),
        }
        trace.push(record);
        if too_low {
            break 'run RunStatus::GuessTooLow;
        }
        if full {
            break 'run RunStatus::BudgetFull;
        }
    };

    let mut ledger = MetricsLedger::new("dynamic");
    ledger.passes = run.passes;
    ledger.peak_stored_elements = run.meter.peak();
    ledger.sketch_words = run.peak_words;
    ledger.coverage = run.state.value();
    ledger.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    ledger.seed = cfg.seed;
    ledger.k = cfg.k;
    ledger.epsilon = Some(cfg.epsilon.to_string());
    ledger.v = Some(cfg.v);
    ledger.delta = Some(delta);
    ledger.status = format!("{status:?}");
    Ok(DynamicOutcome {
        peak_stored_elements: run.meter.peak(),
        peak_sketch_words: run.peak_words,
        state: run.state,
        status,
        passes: run.passes,
        retries: retries_used,
        cascade_iterations,
        tail_iterations,
        trace,
        ledger,
    })
}

/// Filters every set of an underlying source through a sparsifier on the fly.
pub struct SparsifiedSource<'a, S: StreamSource + ?Sized> {
    inner: &'a S,
    sparsifier: &'a Sparsifier,
}

impl<'a, S: StreamSource + ?Sized> SparsifiedSource<'a, S> {
    pub fn new(inner: &'a S, sparsifier: &'a Sparsifier) -> Self {
        Self { inner, sparsifier }
    }
}

impl<S: StreamSource + ?Sized> StreamSource for SparsifiedSource<'_, S> {
    fn universe(&self) -> u32 {
        self.inner.universe()
    }

    fn id_space(&self) -> u64 {
        self.inner.id_space()
    }

    fn set_count(&self) -> usize {
        self.inner.set_count()
    }

    fn replay(&self, visit: &mut dyn FnMut(&StreamToken)) -> Result<()> {
        self.inner.replay(&mut |tok| {
            visit(&StreamToken {
                op: tok.op,
                set: self.sparsifier.sparsify_set(&tok.set),
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuessOptions {
    pub seed: u64,
    /// Subsample the universe per guess with keep probability
    /// `min(1, 10 k eps^-2 / v)`.
    pub sparsify: bool,
    pub gamma_multiplier: u32,
    pub delta: Option<f64>,
    pub pass_cap: Option<usize>,
}

impl Default for GuessOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            sparsify: true,
            gamma_multiplier: 2,
            delta: None,
            pass_cap: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GuessRun {
    pub v: u64,
    pub p_keep: f64,
    /// Guess handed to the algorithm on the subsampled stream.
    pub effective_v: u64,
    pub outcome: DynamicOutcome,
}

impl GuessRun {
    /// Coverage scaled back by the keep probability.
    pub fn estimated_value(&self) -> f64 {
        self.outcome.state.value() as f64 / self.p_keep
    }
}

#[derive(Debug, Clone)]
pub struct GuessOutcome {
    pub runs: Vec<GuessRun>,
    pub best: usize,
    /// Passes are shared across guesses; space adds up.
    pub ledger: MetricsLedger,
}

impl GuessOutcome {
    pub fn best_run(&self) -> &GuessRun {
        &self.runs[self.best]
    }

    pub fn chosen(&self) -> &[SetId] {
        self.best_run().outcome.state.chosen()
    }
}

/// `1, 2, 4, ..., 2^ceil(log2 n)`.
pub fn guess_ladder(n: u32) -> Vec<u64> {
    (0..=ceil_log2(n.max(1) as u64)).map(|i| 1u64 << i).collect()
}

/// Runs one independent estimator per guess over the same passes and keeps
/// the one with the largest estimated coverage.
pub fn run_with_guesses<S: StreamSource + ?Sized>(
    source: &S,
    k: usize,
    epsilon: Epsilon,
    opts: &GuessOptions,
) -> Result<GuessOutcome> {
    let started = Instant::now();
    let mut seeds = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut runs = Vec::new();
    for v in guess_ladder(source.universe()) {
        let seed = seeds.random();
        let mut sp_cfg = SparsifierConfig::new(k, epsilon, v, source.set_count(), seed ^ 0x5eed);
        sp_cfg.gamma_multiplier = opts.gamma_multiplier;
        let p_keep = if opts.sparsify { sp_cfg.p_keep() } else { num_rational::Ratio::from_integer(1) };
        let effective_v = if p_keep < num_rational::Ratio::from_integer(1) {
            (p_keep * v).to_integer().max(1)
        } else {
            v
        };
        let mut cfg = DynamicConfig::new(k, epsilon, effective_v, seed);
        cfg.delta = opts.delta;
        cfg.pass_cap = opts.pass_cap;
        let outcome = if p_keep < num_rational::Ratio::from_integer(1) {
            let sparsifier = Sparsifier::new(&sp_cfg)?;
            run_dynamic(&SparsifiedSource::new(source, &sparsifier), &cfg)?
        } else {
            run_dynamic(source, &cfg)?
        };
        runs.push(GuessRun {
            v,
            p_keep: *p_keep.numer() as f64 / *p_keep.denom() as f64,
            effective_v,
            outcome,
        });
    }
    let best = (0..runs.len())
        .max_by(|&a, &b| {
            runs[a]
                .estimated_value()
                .total_cmp(&runs[b].estimated_value())
                .then(b.cmp(&a))
        })
        .expect("ladder is never empty");

    let mut ledger = MetricsLedger::new("dynamic");
    ledger.passes = runs.iter().map(|r| r.outcome.passes).max().unwrap_or(0);
    ledger.peak_stored_elements = runs.iter().map(|r| r.outcome.peak_stored_elements).sum();
    ledger.sketch_words = runs.iter().map(|r| r.outcome.peak_sketch_words).sum();
    ledger.coverage = runs[best].outcome.state.value();
    ledger.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    ledger.seed = opts.seed;
    ledger.k = k;
    ledger.epsilon = Some(epsilon.to_string());
    ledger.v = Some(runs[best].v);
    ledger.delta = runs[best].outcome.ledger.delta;
    ledger.status = format!("{:?}", runs[best].outcome.status);
    Ok(GuessOutcome { runs, best, ledger })
}
