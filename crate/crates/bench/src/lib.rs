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

//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamcov::field::PrimeField;
use streamcov::generate::{generate, Generated, GeneratorProfile, ProfileKind};
use streamcov::hashing::HashPolynomial;

pub fn hash(gamma: usize, seed: u64) -> HashPolynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    HashPolynomial::sample_with(gamma, PrimeField::mersenne61(), &mut rng)
}

pub fn points(len: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random()).collect()
}

/// A churned planted instance with `m` inserted sets.
pub fn planted(n: u32, m: usize, k: usize, seed: u64) -> Generated {
    let cover = n / 2;
    generate(&GeneratorProfile::new(ProfileKind::PlantedOpt { cover }, n, m, k, seed).with_churn(0.25))
        .expect("valid profile")
}
