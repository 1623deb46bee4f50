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

use super::Cell;
use crate::field::{PrimeField, MERSENNE_61};
use crate::hashing::HashPolynomial;
use crate::model::SetId;

const PARTITIONS: usize = 5;

/// Invertible Bloom lookup table: recovers the whole live support whenever it
/// holds at most `capacity` ids (with high probability).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseRecovery {
    capacity: usize,
    id_space: u64,
    z: u64,
    hashes: Vec<HashPolynomial>,
    width: usize,
    cells: Vec<Cell>,
}

impl SparseRecovery {
    pub fn new<R: Rng + ?Sized>(capacity: usize, id_space: u64, rng: &mut R) -> Self {
        let field = PrimeField::mersenne61();
        // Two cells per id keeps small tables well clear of the peeling
        // threshold and makes full collisions of two ids rare.
        let width = (2 * capacity.max(32)).div_ceil(PARTITIONS) + 1;
        let hashes = (0..PARTITIONS)
            .map(|_| HashPolynomial::sample_with(4, field, rng))
            .collect();
        Self {
            capacity,
            id_space,
            z: rng.random_range(2..MERSENNE_61),
            hashes,
            width,
            cells: vec![Cell::default(); width * PARTITIONS],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sketch_words(&self) -> usize {
        3 * self.cells.len() + self.hashes.iter().map(|h| h.gamma()).sum::<usize>() + 1
    }

    fn slots(&self, id: u64) -> [usize; PARTITIONS] {
        std::array::from_fn(|i| i * self.width + (self.hashes[i].eval(id) % self.width as u64) as usize)
    }

    pub fn update(&mut self, x: SetId, delta: i64) {
        let f = PrimeField::mersenne61();
        let zpow = f.pow(self.z, x.0);
        for s in self.slots(x.0) {
            self.cells[s].apply(&f, x.0, delta, zpow);
        }
    }

    /// Live ids in ascending order, or `None` when peeling gets stuck.
    pub fn recover(&self) -> Option<Vec<SetId>> {
        let f = PrimeField::mersenne61();
        let mut cells = self.cells.clone();
        let mut out = Vec::new();
        let mut progress = true;
        while progress {
            progress = false;
            for i in 0..cells.len() {
                let Some(id) = cells[i].pure(&f, self.z, self.id_space) else {
                    continue;
                };
                let count = cells[i].count;
                let zpow = f.pow(self.z, id);
                for s in self.slots(id) {
                    cells[s].apply(&f, id, -count, zpow);
                }
                if count > 0 {
                    out.push(SetId(id));
                }
                progress = true;
            }
        }
        if cells.iter().all(Cell::is_zero) {
            out.sort();
            Some(out)
        } else {
            None
        }
    }
}
