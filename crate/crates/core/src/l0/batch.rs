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

use rand::Rng;

use super::{L0Outcome, L0Sketch, SparseRecovery};
use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::hashing::HashPolynomial;
use crate::model::{CoverageState, SetId, StreamToken};
use crate::params::ceil_log2;

/// Residual-size band `lo <= |S \ C| < hi`; `hi = None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl Band {
    pub fn new(lo: usize, hi: Option<usize>) -> Self {
        Self { lo, hi }
    }

    pub fn at_least(lo: usize) -> Self {
        Self { lo, hi: None }
    }

    pub fn admits(&self, residual: usize) -> bool {
        residual >= self.lo && self.hi.is_none_or(|h| residual < h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchConfig {
    /// Maximum number of draws.
    pub r: usize,
    pub id_space: u64,
    /// Repetitions inside each ℓ0 sketch.
    pub reps: usize,
}

/// With-replacement sampler for up to `r` draws. Ids are hashed into
/// `t = ceil(r / lg r)` groups, each holding `4 lg r` single-use sketches and
/// an exact live count; a draw picks a group in proportion to its live count
/// and queries that group's next unused sketch.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    r: usize,
    id_space: u64,
    group_hash: HashPolynomial,
    rho: Vec<i64>,
    sketches: Vec<Vec<L0Sketch>>,
    next: Vec<usize>,
    fallback: SparseRecovery,
    tokens: u64,
    max_touched: usize,
}

impl BatchSampler {
    pub fn new<R: Rng + ?Sized>(cfg: BatchConfig, rng: &mut R) -> Self {
        let r = cfg.r.max(1);
        let lg = (ceil_log2(r as u64) as usize).max(1);
        let t = r.div_ceil(lg);
        let per_group = 4 * lg;
        let group_hash = HashPolynomial::sample_with(lg.max(2), PrimeField::mersenne61(), rng);
        let sketches = (0..t)
            .map(|_| {
                (0..per_group)
                    .map(|_| L0Sketch::new(cfg.id_space, cfg.reps, rng))
                    .collect()
            })
            .collect();
        Self {
            r,
            id_space: cfg.id_space,
            group_hash,
            rho: vec![0; t],
            sketches,
            next: vec![0; t],
            fallback: SparseRecovery::new(4 * r, cfg.id_space, rng),
            tokens: 0,
            max_touched: 0,
        }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn groups(&self) -> usize {
        self.rho.len()
    }

    pub fn sketches_per_group(&self) -> usize {
        self.sketches[0].len()
    }

    pub fn rho(&self) -> &[i64] {
        &self.rho
    }

    /// Number of live ids.
    pub fn live_count(&self) -> i64 {
        self.rho.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.live_count() == 0
    }

    pub fn tokens_seen(&self) -> u64 {
        self.tokens
    }

    /// Largest number of ℓ0 sketches any single update touched.
    pub fn max_sketches_touched(&self) -> usize {
        self.max_touched
    }

    pub fn sketch_words(&self) -> usize {
        let l0: usize = self.sketches.iter().flatten().map(L0Sketch::sketch_words).sum();
        l0 + self.rho.len() + self.group_hash.gamma() + self.fallback.sketch_words()
    }

    pub fn group_of(&self, x: SetId) -> usize {
        let h = self.group_hash.eval(x.0) as u128;
        (h * self.rho.len() as u128 / self.group_hash.prime() as u128) as usize
    }

    pub fn update(&mut self, x: SetId, delta: i64) {
        let g = self.group_of(x);
        self.rho[g] += delta;
        for sk in &mut self.sketches[g] {
            sk.update(x, delta);
        }
        self.fallback.update(x, delta);
        self.tokens += 1;
        self.max_touched = self.max_touched.max(self.sketches[g].len());
    }

    fn pick_group<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.live_count();
        let mut u = rng.random_range(0..total);
        for (g, &c) in self.rho.iter().enumerate() {
            if u < c {
                return g;
            }
            u -= c;
        }
        unreachable!("group weights sum to the live count")
    }

    fn draw_one<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SetId> {
        let g = self.pick_group(rng);
        while self.next[g] < self.sketches[g].len() {
            let sk = &self.sketches[g][self.next[g]];
            self.next[g] += 1;
            if let L0Outcome::Sample(id) = sk.query() {
                return Ok(id);
            }
        }
        Err(Error::GroupExhausted {
            group: g,
            sketches: self.sketches[g].len(),
        })
    }

    fn check_count(&self, count: usize) -> Result<()> {
        if count > self.r {
            return Err(Error::InvalidConfig(format!(
                "requested {count} draws from a sampler sized for {}",
                self.r
            )));
        }
        if self.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(())
    }

    /// `count` draws with replacement. Sketches consumed by a draw are never
    /// queried again.
    pub fn draw<R: Rng + ?Sized>(&mut self, count: usize, rng: &mut R) -> Result<Vec<SetId>> {
        self.check_count(count)?;
        (0..count).map(|_| self.draw_one(rng)).collect()
    }

    /// Like [`BatchSampler::draw`], but when a group runs out of sketches the
    /// remaining draws come uniformly from the support decoded by the sparse
    /// recovery table.
    pub fn draw_with_fallback<R: Rng + ?Sized>(
        &mut self,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<SetId>> {
        self.check_count(count)?;
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            match self.draw_one(rng) {
                Ok(id) => out.push(id),
                Err(e @ Error::GroupExhausted { .. }) => {
                    let support = match self.fallback.recover() {
                        Some(s) if !s.is_empty() => s,
                        _ => return Err(e),
                    };
                    while out.len() < count {
                        out.push(support[rng.random_range(0..support.len())]);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    pub fn id_space(&self) -> u64 {
        self.id_space
    }
}

/// Builds a sampler over the ids whose set satisfies `band.admits(|S \ C|)`
/// in one pass over `tokens`.
pub fn restricted_sampler<'a, R: Rng + ?Sized>(
    tokens: impl IntoIterator<Item = &'a StreamToken>,
    state: &CoverageState,
    band: Band,
    cfg: BatchConfig,
    rng: &mut R,
) -> BatchSampler {
    let mut bs = BatchSampler::new(cfg, rng);
    for t in tokens {
        if band.admits(state.marginal(t.set.elements())) {
            bs.update(t.set.id, t.op.delta());
        }
    }
    bs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DynamicStream, SetRecord};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn cfg(r: usize) -> BatchConfig {
        BatchConfig {
            r,
            id_space: 1 << 20,
            reps: 7,
        }
    }

    #[test]
    fn empty_support_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut bs = BatchSampler::new(cfg(8), &mut rng);
        assert_eq!(bs.draw(1, &mut rng), Err(Error::EmptySupport));
        bs.update(SetId(4), 1);
        bs.update(SetId(4), -1);
        assert_eq!(bs.draw(1, &mut rng), Err(Error::EmptySupport));
    }

    #[test]
    fn singleton_support_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut bs = BatchSampler::new(cfg(5), &mut rng);
        bs.update(SetId(3), 1);
        assert_eq!(bs.draw(5, &mut rng).unwrap(), vec![SetId(3); 5]);
    }

    #[test]
    fn exhaustion_and_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut bs = BatchSampler::new(cfg(64), &mut rng);
        bs.update(SetId(11), 1);
        bs.update(SetId(12), 1);
        let mut again = bs.clone();
        assert!(matches!(
            bs.draw(64, &mut rng),
            Err(Error::GroupExhausted { sketches: 24, .. })
        ));
        let draws = again.draw_with_fallback(64, &mut rng).unwrap();
        assert_eq!(draws.len(), 64);
        assert!(draws.iter().all(|id| id.0 == 11 || id.0 == 12));
    }

    #[test]
    fn group_layout_and_update_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut bs = BatchSampler::new(cfg(64), &mut rng);
        assert_eq!(bs.groups(), 11);
        assert_eq!(bs.sketches_per_group(), 24);
        for i in 0..500 {
            bs.update(SetId(i), 1);
        }
        assert_eq!(bs.live_count(), 500);
        assert!(bs.max_sketches_touched() <= 4 * 6);
        assert_eq!(bs.tokens_seen(), 500);
        assert!(bs.draw(65, &mut rng).is_err());
    }

    #[test]
    fn draws_are_live_ids() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bs = BatchSampler::new(cfg(32), &mut rng);
        for i in 0..300u64 {
            bs.update(SetId(i), 1);
            if i % 2 == 1 {
                bs.update(SetId(i), -1);
            }
        }
        for id in bs.draw_with_fallback(32, &mut rng).unwrap() {
            assert_eq!(id.0 % 2, 0);
        }
    }

    #[test]
    fn restricted_sampler_admits_band_only() {
        let sets = [
            vec![1, 2, 3],       // residual 1
            vec![3, 4, 5, 6],    // residual 4
            vec![1, 2],          // residual 0
            vec![7, 8],          // residual 2
            vec![2, 9, 10, 11],  // residual 3
        ];
        let tokens: Vec<StreamToken> = sets
            .iter()
            .enumerate()
            .map(|(i, e)| StreamToken::insert(SetRecord::new(SetId(i as u64 + 1), e.clone()).unwrap()))
            .collect();
        let stream = DynamicStream::new(11, tokens).unwrap();
        let mut state = CoverageState::new(3);
        state.cover([1, 2]);
        let band = Band::new(2, Some(4));
        let expect: BTreeSet<SetId> = [SetId(4), SetId(5)].into();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut bs = restricted_sampler(stream.tokens(), &state, band, cfg(16), &mut rng);
        assert_eq!(bs.live_count(), 2);
        let got: BTreeSet<SetId> = bs.draw_with_fallback(16, &mut rng).unwrap().into_iter().collect();
        assert!(got.is_subset(&expect) && !got.is_empty());

        let none = restricted_sampler(stream.tokens(), &state, Band::new(10, None), cfg(4), &mut rng);
        assert!(none.is_empty());
        let all = restricted_sampler(stream.tokens(), &CoverageState::new(1), Band::at_least(1), cfg(4), &mut rng);
        assert_eq!(all.live_count(), 5);
    }
}
