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

//! Single-pass windowed greedy for randomly ordered set streams.
//!
//! The stream is cut into `k * beta` groups whose sizes follow a multinomial.
//! Windows of `alpha * beta` consecutive groups are scored by running a greedy
//! pick over every `k+`-subset of the window's groups; the best subsequence is
//! committed, every set picked by any subsequence goes to a reserve, and
//! reserve sets that still cover at least `v / k` new elements are drained
//! into the solution at random.

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ledger::{MetricsLedger, StorageMeter};
use crate::model::{CoverageState, SetId, SetRecord};
use crate::oracle::binomial;
use crate::params::Epsilon;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomOrderConfig {
    pub k: usize,
    pub epsilon: Epsilon,
    pub alpha: usize,
    pub beta: usize,
    /// Guess for the optimum.
    pub v: u64,
    pub seed: u64,
    /// Fail the run when storage exceeds [`RandomOrderConfig::storage_cap`].
    pub enforce_budget: bool,
}

impl RandomOrderConfig {
    /// Desk-scale defaults `alpha = beta = 2`.
    pub fn new(k: usize, epsilon: Epsilon, v: u64, seed: u64) -> Self {
        Self {
            k,
            epsilon,
            alpha: 2,
            beta: 2,
            v,
            seed,
            enforce_budget: true,
        }
    }

    /// `ceil(4096 eps^-4 log2(2/eps))`.
    pub fn proven_alpha(epsilon: Epsilon) -> u64 {
        let e = epsilon.value();
        (4096.0 * e.powi(-4) * (2.0 / e).log2()).ceil() as u64
    }

    /// `ceil(32 eps^-2)`.
    pub fn proven_beta(epsilon: Epsilon) -> u64 {
        (32.0 * epsilon.value().powi(-2)).ceil() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.alpha == 0 || self.beta == 0 || self.v == 0 {
            return Err(Error::InvalidConfig(
                "k, alpha, beta and v must all be at least 1".into(),
            ));
        }
        let subsets = binomial((self.alpha * self.beta) as u64, self.alpha.min(self.k) as u64);
        if subsets > 1 << 20 {
            return Err(Error::InvalidConfig(format!(
                "window needs {subsets} greedy sequences; lower alpha or beta"
            )));
        }
        Ok(())
    }

    pub fn windows(&self) -> usize {
        self.k.div_ceil(self.alpha)
    }

    pub fn group_count(&self) -> usize {
        self.k * self.beta
    }

    /// True when the approximation guarantee is proven: `k >= alpha beta`,
    /// `alpha >= 4 beta^2 log2(beta / 8)`, `sqrt(8 / beta) <= eps / 2` and
    /// `alpha / k <= eps / 2`.
    pub fn proven_regime(&self) -> bool {
        let (a, b, e) = (self.alpha as f64, self.beta as f64, self.epsilon.value());
        self.k >= self.alpha * self.beta
            && a >= 4.0 * b * b * (b / 8.0).log2()
            && (8.0 / b).sqrt() <= e / 2.0 + 1e-12
            && a / self.k as f64 <= e / 2.0
    }

    /// Storage cap `|opt| + alpha B |opt| + (k / alpha) B opt / k` with
    /// `B = C(alpha beta, alpha)` and `opt` replaced by `2v`.
    pub fn storage_cap(&self) -> u64 {
        let b = binomial((self.alpha * self.beta) as u64, self.alpha as u64) as f64;
        let opt = 2.0 * self.v as f64;
        let windows = self.k as f64 / self.alpha as f64;
        (opt + self.alpha as f64 * b * opt + windows * b * opt / self.k as f64).floor() as u64
    }
}

/// Group sizes `|C_1|, ..., |C_{k beta}|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupBoundaries {
    pub counts: Vec<usize>,
}

/// Labels each of `m` sets uniformly in `{1..k beta}` and counts the labels.
pub fn assign_groups(m: usize, k: usize, beta: usize, seed: u64) -> GroupBoundaries {
    let cells = (k * beta).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; cells];
    for _ in 0..m {
        counts[rng.random_range(0..cells)] += 1;
    }
    GroupBoundaries { counts }
}

/// A reserve set, stored as its residual against `C` when it was inserted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReserveEntry {
    pub id: SetId,
    pub residual: Vec<u32>,
}

fn gain(residual: &[u32], covered: &BTreeSet<u32>, extra: &HashSet<u32>) -> usize {
    residual
        .iter()
        .filter(|e| !covered.contains(e) && !extra.contains(e))
        .count()
}

/// `(gain, id)` with larger gain winning and smaller id breaking ties.
fn beats(g: usize, id: SetId, best: Option<(usize, SetId)>) -> bool {
    match best {
        None => true,
        Some((bg, bid)) => g > bg || (g == bg && id < bid),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedySequence {
    /// `None` where both the group and the reserve were empty.
    pub picks: Vec<Option<SetId>>,
    pub gains: Vec<usize>,
    /// Elements the sequence adds beyond `C`.
    pub added: BTreeSet<u32>,
}

/// `S_j = argmax over R ∪ group_j of |S \ (C ∪ S_1 ∪ ... ∪ S_{j-1})|`, ties
/// to the smallest id.
pub fn greedy_sequence(
    covered: &BTreeSet<u32>,
    reserve: &[ReserveEntry],
    groups: &[&[SetRecord]],
) -> GreedySequence {
    let mut extra = HashSet::new();
    let mut seq = GreedySequence {
        picks: Vec::with_capacity(groups.len()),
        gains: Vec::with_capacity(groups.len()),
        added: BTreeSet::new(),
    };
    for group in groups {
        let mut best: Option<(usize, SetId, &[u32])> = None;
        let candidates = reserve
            .iter()
            .map(|r| (r.id, r.residual.as_slice()))
            .chain(group.iter().map(|s| (s.id, s.elements())));
        for (id, elems) in candidates {
            let g = gain(elems, covered, &extra);
            if beats(g, id, best.map(|(g, i, _)| (g, i))) {
                best = Some((g, id, elems));
            }
        }
        match best {
            Some((g, id, elems)) => {
                for &e in elems {
                    if !covered.contains(&e) && extra.insert(e) {
                        seq.added.insert(e);
                    }
                }
                seq.picks.push(Some(id));
                seq.gains.push(g);
            }
            None => {
                seq.picks.push(None);
                seq.gains.push(0);
            }
        }
    }
    seq
}

/// All `size`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..=(n - (size - cur.len())) {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if size <= n {
        rec(0, n, size, &mut Vec::with_capacity(size), &mut out);
    }
    out
}

/// A set id with its residual elements.
type Pick = (SetId, Vec<u32>);

struct Candidate {
    gain: usize,
    id: SetId,
    residual: Vec<u32>,
}

struct SequenceState {
    positions: Vec<usize>,
    next: usize,
    extra: HashSet<u32>,
    picks: Vec<Option<(SetId, Vec<u32>)>>,
    candidate: Option<Candidate>,
}

/// Outcome of one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowResult {
    pub k_plus: usize,
    /// Group positions (0-based within the window) of the winning subset.
    pub best_subset: Vec<usize>,
    /// `|C ∪ σ_I|` for every subset, in lexicographic subset order.
    pub values: Vec<usize>,
    /// Picks of the winning subsequence.
    pub best_picks: Vec<Option<SetId>>,
}

/// Computes every greedy subsequence of a window while its groups stream by.
/// Only the current picks and candidates of each subsequence are held.
pub struct WindowProcessor<'a> {
    covered: &'a BTreeSet<u32>,
    reserve: &'a [ReserveEntry],
    seqs: Vec<SequenceState>,
    k_plus: usize,
    meter: &'a mut StorageMeter,
}

impl<'a> WindowProcessor<'a> {
    pub fn new(
        width: usize,
        k_plus: usize,
        covered: &'a BTreeSet<u32>,
        reserve: &'a [ReserveEntry],
        meter: &'a mut StorageMeter,
    ) -> Self {
        let seqs = subsets(width, k_plus)
            .into_iter()
            .map(|positions| SequenceState {
                positions,
                next: 0,
                extra: HashSet::new(),
                picks: Vec::with_capacity(k_plus),
                candidate: None,
            })
            .collect();
        Self {
            covered,
            reserve,
            seqs,
            k_plus,
            meter,
        }
    }

    fn waiting_on(seq: &SequenceState, pos: usize) -> bool {
        seq.positions.get(seq.next) == Some(&pos)
    }

    /// A set of the group at window position `pos`.
    pub fn offer(&mut self, pos: usize, set: &SetRecord) {
        let residual: Vec<u32> = set
            .elements()
            .iter()
            .copied()
            .filter(|e| !self.covered.contains(e))
            .collect();
        for seq in self.seqs.iter_mut().filter(|s| Self::waiting_on(s, pos)) {
            let g = gain(&residual, self.covered, &seq.extra);
            if beats(g, set.id, seq.candidate.as_ref().map(|c| (c.gain, c.id))) {
                if let Some(old) = seq.candidate.take() {
                    self.meter.release(old.residual.len());
                }
                self.meter.alloc(residual.len());
                seq.candidate = Some(Candidate {
                    gain: g,
                    id: set.id,
                    residual: residual.clone(),
                });
            }
        }
    }

    /// Closes the group at `pos`: each subsequence waiting on it takes the
    /// better of its group candidate and the best reserve set.
    pub fn end_group(&mut self, pos: usize) {
        for seq in self.seqs.iter_mut().filter(|s| Self::waiting_on(s, pos)) {
            let mut best: Option<(usize, SetId, usize)> = None;
            for (i, r) in self.reserve.iter().enumerate() {
                let g = gain(&r.residual, self.covered, &seq.extra);
                if beats(g, r.id, best.map(|(g, id, _)| (g, id))) {
                    best = Some((g, r.id, i));
                }
            }
            let from_reserve = match (&seq.candidate, best) {
                (_, None) => None,
                (None, Some((_, _, i))) => Some(i),
                (Some(c), Some((g, id, i))) => beats(g, id, Some((c.gain, c.id))).then_some(i),
            };
            let pick = match from_reserve {
                Some(i) => {
                    if let Some(c) = seq.candidate.take() {
                        self.meter.release(c.residual.len());
                    }
                    let r = &self.reserve[i];
                    self.meter.alloc(r.residual.len());
                    Some((r.id, r.residual.clone()))
                }
                None => seq.candidate.take().map(|c| (c.id, c.residual)),
            };
            if let Some((_, res)) = &pick {
                seq.extra
                    .extend(res.iter().copied().filter(|e| !self.covered.contains(e)));
            }
            seq.picks.push(pick);
            seq.next += 1;
        }
    }

    /// Picks the winning subsequence (ties to the lexicographically smallest
    /// subset) and returns it with every set picked by any subsequence.
    pub fn finish(self) -> (WindowResult, Vec<Pick>, Vec<Option<Pick>>) {
        let values: Vec<usize> = self
            .seqs
            .iter()
            .map(|s| self.covered.len() + s.extra.len())
            .collect();
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        let mut all: Vec<(SetId, Vec<u32>)> = Vec::new();
        let mut seen = HashSet::new();
        let mut best_picks = Vec::new();
        let mut best_subset = Vec::new();
        for (i, seq) in self.seqs.into_iter().enumerate() {
            debug_assert_eq!(seq.picks.len(), self.k_plus);
            if i == best {
                best_subset = seq.positions.clone();
                best_picks = seq.picks.clone();
            }
            for (id, res) in seq.picks.into_iter().flatten() {
                self.meter.release(res.len());
                if seen.insert(id) {
                    all.push((id, res));
                }
            }
        }
        let result = WindowResult {
            k_plus: self.k_plus,
            best_subset,
            values,
            best_picks: best_picks.iter().map(|p| p.as_ref().map(|(id, _)| *id)).collect(),
        };
        (result, all, best_picks)
    }
}

/// Everything an auditor needs to re-evaluate one window from scratch.
#[derive(Debug, Clone)]
pub struct WindowAudit {
    pub window: usize,
    pub covered_before: BTreeSet<u32>,
    pub reserve_before: Vec<ReserveEntry>,
    pub groups: Vec<Vec<SetRecord>>,
    pub result: WindowResult,
}

/// Mutable state of a run between windows.
#[derive(Debug, Clone)]
pub struct RandomOrderState {
    pub coverage: CoverageState,
    pub k_prime: usize,
    pub reserve: Vec<ReserveEntry>,
    meter: StorageMeter,
    max_reserve_residual: usize,
}

impl RandomOrderState {
    pub fn new(k: usize) -> Self {
        Self {
            coverage: CoverageState::new(k),
            k_prime: 0,
            reserve: Vec::new(),
            meter: StorageMeter::new(),
            max_reserve_residual: 0,
        }
    }

    pub fn meter(&self) -> &StorageMeter {
        &self.meter
    }

    fn reserve_elements(&self) -> usize {
        self.reserve.iter().map(|r| r.residual.len()).sum()
    }

    /// Elements held by `C` and the reserve, counted from the structures.
    pub fn recount(&self) -> u64 {
        (self.coverage.value() + self.reserve_elements()) as u64
    }

    fn commit(&mut self, id: SetId, residual: &[u32]) {
        if self.coverage.contains_id(id) {
            return;
        }
        let before = self.coverage.value();
        self.coverage.add(id, residual);
        self.meter.alloc(self.coverage.value() - before);
    }

    fn insert_reserve(&mut self, id: SetId, residual: Vec<u32>) {
        if let Some(pos) = self.reserve.iter().position(|r| r.id == id) {
            let old = self.reserve.swap_remove(pos);
            self.meter.release(old.residual.len());
        }
        if residual.is_empty() || self.coverage.contains_id(id) {
            return;
        }
        self.max_reserve_residual = self.max_reserve_residual.max(residual.len());
        self.meter.alloc(residual.len());
        self.reserve.push(ReserveEntry { id, residual });
        self.reserve.sort_by_key(|r| r.id);
    }

    /// Trims reserve residuals against the current `C`.
    fn shrink_reserve(&mut self) {
        let covered = self.coverage.covered();
        let mut freed = 0;
        for r in &mut self.reserve {
            let before = r.residual.len();
            r.residual.retain(|e| !covered.contains(e));
            freed += before - r.residual.len();
        }
        self.reserve.retain(|r| !r.residual.is_empty());
        self.meter.release(freed);
    }

    fn clear_reserve(&mut self) {
        let n = self.reserve_elements();
        self.reserve.clear();
        self.meter.release(n);
    }

    /// Drains reserve sets with `|S \ C| >= v / k`, chosen uniformly at
    /// random, until the budget is used or none qualify.
    pub fn drain_reserve<R: Rng + ?Sized>(&mut self, k: usize, v: u64, rng: &mut R) -> Vec<SetId> {
        let mut added = Vec::new();
        while self.k_prime < k {
            let qualifying: Vec<usize> = (0..self.reserve.len())
                .filter(|&i| {
                    let r = &self.reserve[i];
                    !self.coverage.contains_id(r.id)
                        && self.coverage.marginal(&r.residual) as u64 * k as u64 >= v
                })
                .collect();
            if qualifying.is_empty() {
                break;
            }
            let i = qualifying[rng.random_range(0..qualifying.len())];
            let entry = self.reserve[i].clone();
            self.commit(entry.id, &entry.residual);
            self.k_prime += 1;
            added.push(entry.id);
            self.shrink_reserve();
        }
        added
    }
}

/// Scores one fully buffered window, commits the best subsequence and moves
/// every picked set into the reserve. Draining is left to the caller.
pub fn process_window(
    state: &mut RandomOrderState,
    alpha: usize,
    groups: &[Vec<SetRecord>],
) -> WindowResult {
    let k_plus = alpha.min(state.coverage.budget() - state.k_prime);
    if k_plus == 0 {
        return WindowResult {
            k_plus: 0,
            best_subset: Vec::new(),
            values: Vec::new(),
            best_picks: Vec::new(),
        };
    }
    let covered = state.coverage.covered().clone();
    let reserve = state.reserve.clone();
    let mut meter = std::mem::take(&mut state.meter);
    let mut wp = WindowProcessor::new(groups.len(), k_plus, &covered, &reserve, &mut meter);
    for (pos, g) in groups.iter().enumerate() {
        for s in g {
            wp.offer(pos, s);
        }
        wp.end_group(pos);
    }
    let (result, picked, best) = wp.finish();
    state.meter = meter;
    apply_window(state, k_plus, picked, best);
    result
}

fn apply_window(
    state: &mut RandomOrderState,
    k_plus: usize,
    picked: Vec<(SetId, Vec<u32>)>,
    best: Vec<Option<(SetId, Vec<u32>)>>,
) {
    for (id, res) in best.into_iter().flatten() {
        state.commit(id, &res);
    }
    state.k_prime += k_plus;
    state.shrink_reserve();
    for (id, res) in picked {
        let res = state.coverage.residual(&res);
        state.insert_reserve(id, res);
    }
}

#[derive(Debug, Clone)]
pub struct RandomOrderOutcome {
    pub state: CoverageState,
    pub k_prime: usize,
    pub windows: usize,
    /// Stream sets read; a single pass reads each exactly once.
    pub sets_read: usize,
    pub peak_stored_elements: u64,
    pub storage_cap: u64,
    pub max_reserve: usize,
    pub proven_regime: bool,
    pub ledger: MetricsLedger,
}

pub fn run_random_order(stream: &[SetRecord], cfg: &RandomOrderConfig) -> Result<RandomOrderOutcome> {
    run_random_order_observed(stream, cfg, None)
}

/// [`run_random_order`] with a callback after every window. With an observer
/// attached the window's groups are copied for it; that copy is not counted
/// as algorithm storage.
pub fn run_random_order_observed(
    stream: &[SetRecord],
    cfg: &RandomOrderConfig,
    mut observer: Option<&mut dyn FnMut(&WindowAudit)>,
) -> Result<RandomOrderOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let groups = assign_groups(stream.len(), cfg.k, cfg.beta, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd7a1_5eed);
    let mut state = RandomOrderState::new(cfg.k);
    let cap = cfg.storage_cap();
    let width = cfg.alpha * cfg.beta;
    let mut sets = stream.iter();
    let mut sets_read = 0usize;
    let mut max_reserve = 0usize;

    for w in 0..cfg.windows() {
        let k_plus = cfg.alpha.min(cfg.k - state.k_prime);
        let group_size = |pos: usize| groups.counts.get(w * width + pos).copied().unwrap_or(0);
        if k_plus == 0 {
            for pos in 0..width {
                for _ in 0..group_size(pos) {
                    sets.next().expect("group sizes sum to the stream length");
                    sets_read += 1;
                }
            }
            continue;
        }
        let audit_before = observer
            .is_some()
            .then(|| (state.coverage.covered().clone(), state.reserve.clone()));
        let mut audit_groups = Vec::new();

        let covered = state.coverage.covered().clone();
        let reserve = state.reserve.clone();
        let mut meter = state.meter;
        let mut wp = WindowProcessor::new(width, k_plus, &covered, &reserve, &mut meter);
        for pos in 0..width {
            let mut copy = Vec::new();
            for _ in 0..group_size(pos) {
                let s = sets.next().expect("group sizes sum to the stream length");
                sets_read += 1;
                wp.offer(pos, s);
                if audit_before.is_some() {
                    copy.push(s.clone());
                }
            }
            wp.end_group(pos);
            audit_groups.push(copy);
        }
        let (result, picked, best) = wp.finish();
        state.meter = meter;
        apply_window(&mut state, k_plus, picked, best);
        max_reserve = max_reserve.max(state.reserve.len());
        state.drain_reserve(cfg.k, cfg.v, &mut rng);
        if state.k_prime >= cfg.k {
            state.clear_reserve();
        }
        debug_assert_eq!(state.meter.current(), state.recount());
        debug_assert!(
            state.reserve_elements() <= state.reserve.len() * state.max_reserve_residual
        );
        if let (Some(obs), Some((covered_before, reserve_before))) = (observer.as_mut(), audit_before) {
            obs(&WindowAudit {
                window: w,
                covered_before,
                reserve_before,
                groups: audit_groups,
                result,
            });
        }
        if cfg.enforce_budget && state.meter.peak() > cap {
            return Err(Error::BudgetExceeded {
                stored: state.meter.peak(),
                budget: cap,
            });
        }
    }
    // Any sets past the last window still belong to the single pass.
    for _ in sets.by_ref() {
        sets_read += 1;
    }

    let proven_regime = cfg.proven_regime();
    let mut ledger = MetricsLedger::new("random-order");
    ledger.passes = 1;
    ledger.peak_stored_elements = state.meter.peak();
    ledger.coverage = state.coverage.value();
    ledger.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    ledger.seed = cfg.seed;
    ledger.k = cfg.k;
    ledger.epsilon = Some(cfg.epsilon.to_string());
    ledger.alpha = Some(cfg.alpha);
    ledger.beta = Some(cfg.beta);
    ledger.v = Some(cfg.v);
    if !proven_regime {
        ledger.status = "no-formal-guarantee".into();
    }
    Ok(RandomOrderOutcome {
        k_prime: state.k_prime,
        windows: cfg.windows(),
        sets_read,
        peak_stored_elements: state.meter.peak(),
        storage_cap: cap,
        max_reserve,
        proven_regime,
        state: state.coverage,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Instance;

    fn rec(id: u64, e: impl IntoIterator<Item = u32>) -> SetRecord {
        SetRecord::from_unsorted(SetId(id), e).unwrap()
    }

    fn eps() -> Epsilon {
        Epsilon::new(1, 5).unwrap()
    }

    #[test]
    fn group_assignment() {
        assert_eq!(assign_groups(17, 1, 1, 3).counts, vec![17]);
        for seed in 0..20 {
            assert_eq!(assign_groups(50, 3, 2, seed).counts.iter().sum::<usize>(), 50);
        }
        let g = assign_groups(10_000, 50, 2, 9);
        let (mean, sd) = (100.0, (10_000.0f64 * 0.01 * 0.99).sqrt());
        assert!(g.counts.iter().all(|&c| (c as f64 - mean).abs() <= 5.0 * sd));
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(
            subsets(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert!(subsets(2, 3).is_empty());
    }

    #[test]
    fn greedy_sequence_basics() {
        let s = rec(5, [1, 2]);
        let seq = greedy_sequence(&BTreeSet::new(), &[], &[std::slice::from_ref(&s)]);
        assert_eq!(seq.picks, vec![Some(SetId(5))]);

        let covered: BTreeSet<u32> = (1..=10).collect();
        let g = [rec(1, [1, 2]), rec(2, [3])];
        let seq = greedy_sequence(&covered, &[], &[&g[..]]);
        assert!(seq.added.is_empty());
        assert_eq!(seq.gains, vec![0]);

        let seq = greedy_sequence(&BTreeSet::new(), &[], &[&[]]);
        assert_eq!(seq.picks, vec![None]);
    }

    #[test]
    fn greedy_sequence_uses_reserve_and_earlier_picks() {
        let reserve = vec![ReserveEntry { id: SetId(9), residual: vec![7, 8, 9] }];
        let g1 = [rec(1, [1, 2, 3, 4]), rec(2, [1, 2])];
        let g2 = [rec(3, [1, 2, 3, 5])];
        let g3 = [rec(4, [10])];
        let seq = greedy_sequence(&BTreeSet::new(), &reserve, &[&g1[..], &g2[..], &g3[..]]);
        // Step 2: set 3 adds only {5}, the reserve adds three.
        assert_eq!(seq.picks, vec![Some(SetId(1)), Some(SetId(9)), Some(SetId(4))]);
        assert_eq!(seq.gains, vec![4, 3, 1]);
    }

    #[test]
    fn drain_picks_qualifying_uniformly() {
        let mut counts = [0usize; 3];
        for seed in 0..3000u64 {
            let mut st = RandomOrderState::new(3);
            for (i, base) in [10u32, 20, 30].iter().enumerate() {
                st.insert_reserve(SetId(i as u64 + 1), (*base..*base + 3).collect());
            }
            st.insert_reserve(SetId(9), vec![50]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let added = st.drain_reserve(3, 6, &mut rng);
            assert_eq!(added.len(), 3);
            assert!(!added.contains(&SetId(9)));
            counts[added[0].0 as usize - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / 3000.0 - 1.0 / 3.0).abs() <= 0.03, "{counts:?}");
        }
        let mut empty = RandomOrderState::new(2);
        assert!(empty.drain_reserve(2, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_empty());
    }

    #[test]
    fn window_matches_exhaustive_evaluation() {
        // alpha = 2, beta = 2: four groups, six subsets.
        let groups = vec![
            vec![rec(1, [1, 2, 3])],
            vec![rec(2, [3, 4]), rec(3, [5, 6, 7, 8])],
            vec![],
            vec![rec(4, [1, 9]), rec(5, [2, 3, 4, 5, 6])],
        ];
        let mut st = RandomOrderState::new(4);
        let result = process_window(&mut st, 2, &groups);
        let all = subsets(4, 2);
        let values: Vec<usize> = all
            .iter()
            .map(|s| {
                let gs: Vec<&[SetRecord]> = s.iter().map(|&p| &groups[p][..]).collect();
                greedy_sequence(&BTreeSet::new(), &[], &gs).added.len()
            })
            .collect();
        assert_eq!(result.values, values);
        let best = (0..6).find(|&i| values[i] == *values.iter().max().unwrap()).unwrap();
        assert_eq!(result.best_subset, all[best]);
        assert_eq!(st.k_prime, 2);
    }

    #[test]
    fn skipped_and_singleton_windows() {
        let mut st = RandomOrderState::new(1);
        st.k_prime = 1;
        assert_eq!(process_window(&mut st, 2, &[vec![rec(1, [1])]]).k_plus, 0);
        let mut st = RandomOrderState::new(2);
        let r = process_window(&mut st, 2, &[vec![rec(1, [1])], vec![rec(2, [2])]]);
        assert_eq!(r.best_subset, vec![0, 1]);
        assert_eq!(st.coverage.value(), 2);
    }

    #[test]
    fn disjoint_sets_fill_budget() {
        let sets: Vec<SetRecord> = (0..4u64).map(|i| rec(i + 1, (i as u32 * 3 + 1)..=(i as u32 * 3 + 3))).collect();
        let inst = Instance::new(12, 4, sets.clone()).unwrap();
        let cfg = RandomOrderConfig {
            alpha: 4,
            beta: 1,
            ..RandomOrderConfig::new(4, eps(), 6, 1)
        };
        let out = run_random_order(&sets, &cfg).unwrap();
        assert_eq!(out.state.value(), 12);
        assert!(out.state.consistent_with(&inst));
        assert_eq!(out.sets_read, 4);
    }

    #[test]
    fn regime_flag_and_proven_constants() {
        let cfg = RandomOrderConfig::new(4, eps(), 10, 0);
        assert!(!cfg.proven_regime());
        assert_eq!(RandomOrderConfig::proven_beta(eps()), 800);
        assert!(RandomOrderConfig::proven_alpha(eps()) > 1_000_000);
        let big = RandomOrderConfig {
            alpha: 20_000_000,
            beta: 800,
            ..RandomOrderConfig::new(20_000_000_000, eps(), 10, 0)
        };
        assert!(big.proven_regime());
        let short_alpha = RandomOrderConfig {
            alpha: RandomOrderConfig::proven_alpha(eps()) as usize,
            ..big.clone()
        };
        assert!(!short_alpha.proven_regime());
        let out = run_random_order(&[rec(1, [1])], &RandomOrderConfig::new(1, eps(), 1, 0)).unwrap();
        assert_eq!(out.ledger.status, "no-formal-guarantee");
    }

    #[test]
    fn storage_cap_formula() {
        // 2v (1 + alpha B + (k/alpha) B / k) with B = C(4, 2) = 6.
        let cfg = RandomOrderConfig::new(4, eps(), 5, 0);
        assert_eq!(cfg.storage_cap(), (10.0 * (1.0 + 12.0 + 3.0)) as u64);
    }
}
