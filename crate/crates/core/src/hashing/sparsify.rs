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

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{sample_hash, HashPolynomial};
use crate::error::{Error, Result};
use crate::field::MERSENNE_61;
use crate::model::{DynamicStream, Instance, SetRecord};
use crate::params::{ceil_log2, Epsilon};

/// `max(2, ceil(multiplier * k * log2 m))`.
pub fn default_gamma(k: usize, m: usize, multiplier: u32) -> usize {
    let g = multiplier as u64 * k as u64 * ceil_log2(m.max(1) as u64) as u64;
    (g as usize).max(2)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsifierConfig {
    pub k: usize,
    pub epsilon: Epsilon,
    /// Guess for the optimum.
    pub v: u64,
    /// Number of sets, used to size the independence.
    pub m: usize,
    pub gamma_multiplier: u32,
    pub seed: u64,
}

impl SparsifierConfig {
    pub fn new(k: usize, epsilon: Epsilon, v: u64, m: usize, seed: u64) -> Self {
        Self {
            k,
            epsilon,
            v,
            m,
            gamma_multiplier: 2,
            seed,
        }
    }

    /// `10 k / eps^2`, exact.
    pub fn lambda(&self) -> Ratio<u64> {
        let e = self.epsilon.ratio();
        Ratio::new(10 * self.k as u64 * e.denom() * e.denom(), e.numer() * e.numer())
    }

    /// `min(1, lambda / v)`.
    pub fn p_keep(&self) -> Ratio<u64> {
        let p = self.lambda() / Ratio::from_integer(self.v.max(1));
        p.min(Ratio::from_integer(1))
    }

    pub fn gamma(&self) -> usize {
        default_gamma(self.k, self.m, self.gamma_multiplier)
    }
}

/// Universe subsampling: keeps element `e` iff `h(e)` lands in
/// `[0, floor(p_keep * p))`.
#[derive(Debug, Clone)]
pub struct Sparsifier {
    hash: HashPolynomial,
    p_keep: Ratio<u64>,
    cutoff: u64,
    buffer: Vec<u32>,
}

impl Sparsifier {
    pub fn new(cfg: &SparsifierConfig) -> Result<Self> {
        if cfg.k == 0 || cfg.v == 0 {
            return Err(Error::InvalidConfig("sparsifier needs k >= 1 and v >= 1".into()));
        }
        let hash = sample_hash(cfg.gamma(), MERSENNE_61, cfg.seed)?;
        Self::with_hash(hash, cfg.p_keep())
    }

    /// A sparsifier with an explicit hash and keep probability in `[0, 1]`.
    pub fn with_hash(hash: HashPolynomial, p_keep: Ratio<u64>) -> Result<Self> {
        if p_keep > Ratio::from_integer(1) {
            return Err(Error::InvalidConfig(format!("keep probability {p_keep} above 1")));
        }
        let cutoff =
            (*p_keep.numer() as u128 * hash.prime() as u128 / *p_keep.denom() as u128) as u64;
        Ok(Self {
            hash,
            p_keep,
            cutoff,
            buffer: Vec::new(),
        })
    }

    pub fn p_keep(&self) -> Ratio<u64> {
        self.p_keep
    }

    /// Hash values strictly below this are kept.
    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    pub fn hash(&self) -> &HashPolynomial {
        &self.hash
    }

    pub fn keeps_everything(&self) -> bool {
        self.cutoff >= self.hash.prime()
    }

    pub fn keep(&self, e: u32) -> bool {
        self.keeps_everything() || self.hash.eval(e as u64) < self.cutoff
    }

    /// Keep decisions for a batch, evaluated through
    /// [`HashPolynomial::eval_batch`].
    pub fn keep_batch(&self, elements: &[u32]) -> Vec<bool> {
        if self.keeps_everything() {
            return vec![true; elements.len()];
        }
        let xs: Vec<u64> = elements.iter().map(|&e| e as u64).collect();
        self.hash
            .eval_batch(&xs)
            .into_iter()
            .map(|h| h < self.cutoff)
            .collect()
    }

    /// Queues `e`; once `gamma` elements are pending they are hashed together
    /// and returned with their decisions.
    pub fn push(&mut self, e: u32) -> Option<Vec<(u32, bool)>> {
        self.buffer.push(e);
        (self.buffer.len() >= self.hash.gamma()).then(|| self.flush())
    }

    /// Decisions for everything still pending.
    pub fn flush(&mut self) -> Vec<(u32, bool)> {
        let pending = std::mem::take(&mut self.buffer);
        let keep = self.keep_batch(&pending);
        pending.into_iter().zip(keep).collect()
    }

    pub fn pending(&self) -> usize {
        self.buffer.len()
    }

    pub fn sparsify_set(&self, set: &SetRecord) -> SetRecord {
        let keep = self.keep_batch(set.elements());
        let kept = set
            .elements()
            .iter()
            .zip(keep)
            .filter_map(|(&e, k)| k.then_some(e))
            .collect();
        SetRecord::new(set.id, kept).expect("subsequence of a valid set is valid")
    }

    pub fn sparsify_instance(&self, instance: &Instance) -> Instance {
        instance.map_sets(|s| self.sparsify_set(s))
    }

    pub fn sparsify_stream(&self, stream: &DynamicStream) -> DynamicStream {
        stream.map_sets(|s| self.sparsify_set(s))
    }
}
