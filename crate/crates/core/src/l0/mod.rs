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

//! ℓ0 sampling of live set ids from insert/delete streams.

mod batch;
mod recovery;

pub use batch::{restricted_sampler, Band, BatchConfig, BatchSampler};
pub use recovery::SparseRecovery;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{PrimeField, MERSENNE_61};
use crate::hashing::HashPolynomial;
use crate::model::SetId;
use crate::params::ceil_log2;

/// Result of querying an ℓ0 sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum L0Outcome {
    Sample(SetId),
    Empty,
    Fail,
}

/// Repetitions needed for failure probability at most `delta`.
pub fn reps_for_delta(delta: f64) -> usize {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    ((1.0 / delta).log2().ceil() as usize).max(1)
}

/// A 1-sparse recovery cell: net count, sum of ids and `sum z^id`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Cell {
    pub count: i64,
    pub id_sum: i128,
    pub fp: u64,
}

impl Cell {
    pub fn apply(&mut self, f: &PrimeField, id: u64, delta: i64, zpow: u64) {
        self.count += delta;
        self.id_sum += delta as i128 * id as i128;
        let term = if delta >= 0 {
            f.mul(zpow, f.reduce(delta as u64))
        } else {
            f.neg(f.mul(zpow, f.reduce(delta.unsigned_abs())))
        };
        self.fp = f.add(self.fp, term);
    }

    pub fn is_zero(&self) -> bool {
        self.count == 0 && self.id_sum == 0 && self.fp == 0
    }

    /// The single id with nonzero net count, if the cell holds exactly one.
    pub fn pure(&self, f: &PrimeField, z: u64, id_space: u64) -> Option<u64> {
        if self.count == 0 || self.id_sum % self.count as i128 != 0 {
            return None;
        }
        let id = self.id_sum / self.count as i128;
        if id < 0 || id >= id_space as i128 {
            return None;
        }
        let id = id as u64;
        let expect = f.mul(f.from_signed(self.count), f.pow(z, id));
        (expect == self.fp).then_some(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Repetition {
    level_hash: HashPolynomial,
    cells: Vec<Cell>,
}

/// Linear sketch over ids in `[0, id_space)`. Every repetition keeps nested
/// levels: id `x` lands in level `j` when its level hash is below `p / 2^j`.
/// A query reports the id found alone in the deepest nonempty level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L0Sketch {
    id_space: u64,
    z: u64,
    reps: Vec<Repetition>,
}

impl L0Sketch {
    pub fn new<R: Rng + ?Sized>(id_space: u64, reps: usize, rng: &mut R) -> Self {
        assert!(id_space >= 1 && reps >= 1);
        let field = PrimeField::mersenne61();
        let levels = ceil_log2(id_space) as usize + 1;
        let gamma = (ceil_log2(id_space) as usize).max(2);
        let z = rng.random_range(2..MERSENNE_61);
        let reps = (0..reps)
            .map(|_| Repetition {
                level_hash: HashPolynomial::sample_with(gamma, field, rng),
                cells: vec![Cell::default(); levels],
            })
            .collect();
        Self { id_space, z, reps }
    }

    pub fn with_seed(id_space: u64, reps: usize, seed: u64) -> Self {
        Self::new(id_space, reps, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn id_space(&self) -> u64 {
        self.id_space
    }

    pub fn reps(&self) -> usize {
        self.reps.len()
    }

    pub fn levels(&self) -> usize {
        self.reps[0].cells.len()
    }

    /// Words of memory: three per cell, the level hash coefficients, and `z`.
    pub fn sketch_words(&self) -> usize {
        1 + self
            .reps
            .iter()
            .map(|r| 3 * r.cells.len() + r.level_hash.gamma())
            .sum::<usize>()
    }

    pub fn update(&mut self, x: SetId, delta: i64) {
        assert!(x.0 < self.id_space, "id {x} outside sketch range {}", self.id_space);
        if delta == 0 {
            return;
        }
        let f = PrimeField::mersenne61();
        let zpow = f.pow(self.z, x.0);
        for rep in &mut self.reps {
            let h = rep.level_hash.eval(x.0);
            let depth = level_of(h, rep.cells.len());
            for cell in &mut rep.cells[..=depth] {
                cell.apply(&f, x.0, delta, zpow);
            }
        }
    }

    pub fn query(&self) -> L0Outcome {
        let f = PrimeField::mersenne61();
        if self.reps[0].cells[0].is_zero() {
            return L0Outcome::Empty;
        }
        for rep in &self.reps {
            let Some(deepest) = rep.cells.iter().rposition(|c| !c.is_zero()) else {
                continue;
            };
            if let Some(id) = rep.cells[deepest].pure(&f, self.z, self.id_space) {
                return L0Outcome::Sample(SetId(id));
            }
        }
        L0Outcome::Fail
    }
}

/// Deepest level `j < levels` with `h < p >> j`.
fn level_of(h: u64, levels: usize) -> usize {
    let mut j = 0;
    while j + 1 < levels && h < (MERSENNE_61 >> (j + 1)) {
        j += 1;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    #[test]
    fn empty_and_singleton() {
        let mut sk = L0Sketch::with_seed(1 << 20, 6, 1);
        assert_eq!(sk.query(), L0Outcome::Empty);
        sk.update(SetId(7), 1);
        assert_eq!(sk.query(), L0Outcome::Sample(SetId(7)));
    }

    #[test]
    fn insert_then_delete_restores_fresh_state() {
        let fresh = L0Sketch::with_seed(1000, 4, 3);
        let mut sk = fresh.clone();
        sk.update(SetId(99), 1);
        sk.update(SetId(5), 1);
        sk.update(SetId(99), -1);
        sk.update(SetId(5), -1);
        assert_eq!(sk, fresh);
        assert_eq!(sk.query(), L0Outcome::Empty);
    }

    #[test]
    fn state_is_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut tokens: Vec<(SetId, i64)> = Vec::new();
        for id in 0..200u64 {
            tokens.push((SetId(id * 13), 1));
            if id % 3 == 0 {
                tokens.push((SetId(id * 13), -1));
            }
        }
        let base = L0Sketch::with_seed(1 << 16, 5, 2);
        let mut a = base.clone();
        for &(x, d) in &tokens {
            a.update(x, d);
        }
        tokens.shuffle(&mut rng);
        let mut b = base;
        for &(x, d) in &tokens {
            b.update(x, d);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn query_returns_live_id() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let live: Vec<u64> = (0..150).map(|i| i * 7 + 1).collect();
        let mut fails = 0;
        for _ in 0..200 {
            let mut sk = L0Sketch::new(2048, reps_for_delta(0.01), &mut rng);
            for &x in &live {
                sk.update(SetId(x), 1);
            }
            sk.update(SetId(2000), 1);
            sk.update(SetId(2000), -1);
            match sk.query() {
                L0Outcome::Sample(id) => assert!(live.contains(&id.0)),
                L0Outcome::Fail => fails += 1,
                L0Outcome::Empty => panic!("nonempty support reported empty"),
            }
        }
        assert!(fails <= 4, "fails={fails}");
    }

    #[test]
    fn words_grow_with_log_range_and_reps() {
        let a = L0Sketch::with_seed(1 << 10, 3, 0);
        let b = L0Sketch::with_seed(1 << 20, 3, 0);
        let c = L0Sketch::with_seed(1 << 20, 6, 0);
        assert!(a.sketch_words() < b.sketch_words());
        assert_eq!(c.sketch_words() - 1, 2 * (b.sketch_words() - 1));
        assert_eq!(b.levels(), 21);
    }

    #[test]
    fn reps_from_delta() {
        assert_eq!(reps_for_delta(0.5), 1);
        assert_eq!(reps_for_delta(0.01), 7);
    }

    #[test]
    fn level_assignment_is_nested() {
        assert_eq!(level_of(MERSENNE_61 - 1, 10), 0);
        assert_eq!(level_of(0, 10), 9);
        assert_eq!(level_of(MERSENNE_61 >> 3, 10), 2);
    }
}
