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

//! Polynomial hash families over a prime field.

mod poly;
mod sparsify;

pub use poly::{horner, multipoint_eval, SubproductTree};
pub use sparsify::{default_gamma, Sparsifier, SparsifierConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::PrimeField;

/// Batches at least this long go through the subproduct tree.
pub const MULTIPOINT_THRESHOLD: usize = 32;

/// `h(x) = c_0 + c_1 x + ... + c_{gamma-1} x^{gamma-1}` over `F_p`: a
/// `gamma`-wise independent family when the coefficients are uniform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashPolynomial {
    field: PrimeField,
    coeffs: Vec<u64>,
}

impl HashPolynomial {
    pub fn new(field: PrimeField, coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::BadField("hash polynomial needs at least one coefficient".into()));
        }
        if let Some(c) = coeffs.iter().find(|&&c| c >= field.modulus()) {
            return Err(Error::BadField(format!(
                "coefficient {c} not below modulus {}",
                field.modulus()
            )));
        }
        Ok(Self { field, coeffs })
    }

    /// Draws `gamma` uniform coefficients from `rng`.
    pub fn sample_with<R: Rng + ?Sized>(gamma: usize, field: PrimeField, rng: &mut R) -> Self {
        assert!(gamma >= 1, "gamma must be at least 1");
        let p = field.modulus();
        let coeffs = (0..gamma).map(|_| rng.random_range(0..p)).collect();
        Self { field, coeffs }
    }

    pub fn gamma(&self) -> usize {
        self.coeffs.len()
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn prime(&self) -> u64 {
        self.field.modulus()
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn eval(&self, x: u64) -> u64 {
        horner(&self.field, &self.coeffs, self.field.reduce(x))
    }

    /// Same values as mapping [`HashPolynomial::eval`] over `xs`. Long inputs
    /// are cut into windows of `max(gamma, MULTIPOINT_THRESHOLD)` points and
    /// each full-size window is evaluated with a subproduct tree.
    pub fn eval_batch(&self, xs: &[u64]) -> Vec<u64> {
        if xs.len() < MULTIPOINT_THRESHOLD {
            return xs.iter().map(|&x| self.eval(x)).collect();
        }
        let window = self.gamma().max(MULTIPOINT_THRESHOLD);
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(window) {
            if chunk.len() >= MULTIPOINT_THRESHOLD {
                out.extend(multipoint_eval(&self.field, &self.coeffs, chunk));
            } else {
                out.extend(chunk.iter().map(|&x| self.eval(x)));
            }
        }
        out
    }
}

/// Seeded hash with `gamma` coefficients over `F_prime`.
pub fn sample_hash(gamma: usize, prime: u64, seed: u64) -> Result<HashPolynomial> {
    if gamma == 0 {
        return Err(Error::BadField("gamma must be at least 1".into()));
    }
    let field = PrimeField::new(prime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(HashPolynomial::sample_with(gamma, field, &mut rng))
}

pub fn eval_point(h: &HashPolynomial, x: u64) -> u64 {
    h.eval(x)
}

pub fn eval_batch(h: &HashPolynomial, xs: &[u64]) -> Vec<u64> {
    h.eval_batch(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn field101() -> PrimeField {
        PrimeField::new(101).unwrap()
    }

    #[test]
    fn gamma_one_is_constant() {
        let h = sample_hash(1, 101, 9).unwrap();
        let c = h.eval(0);
        assert!((0..101).all(|x| h.eval(x) == c));
    }

    #[test]
    fn seeding_is_deterministic() {
        let a = sample_hash(8, crate::field::MERSENNE_61, 42).unwrap();
        let b = sample_hash(8, crate::field::MERSENNE_61, 42).unwrap();
        assert_eq!(a.coeffs(), b.coeffs());
        assert_ne!(a, sample_hash(8, crate::field::MERSENNE_61, 43).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(sample_hash(0, 101, 1).is_err());
        assert!(sample_hash(3, 100, 1).is_err());
        assert!(HashPolynomial::new(field101(), vec![]).is_err());
        assert!(HashPolynomial::new(field101(), vec![101]).is_err());
    }

    #[test]
    fn point_evaluation_examples() {
        let h = HashPolynomial::new(field101(), vec![7]).unwrap();
        assert_eq!(eval_point(&h, 55), 7);
        let h = HashPolynomial::new(field101(), vec![1, 1]).unwrap();
        assert_eq!(eval_point(&h, 5), 6);
        let h = HashPolynomial::new(field101(), vec![2, 3, 4]).unwrap();
        assert_eq!(eval_point(&h, 10), 28);
    }

    #[test]
    fn batch_edge_cases() {
        let h = sample_hash(5, 101, 3).unwrap();
        assert!(eval_batch(&h, &[]).is_empty());
        let out = eval_batch(&h, &[17, 17]);
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn batch_of_64_matches_horner() {
        let h = sample_hash(40, crate::field::MERSENNE_61, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<u64> = (0..64).map(|_| rng.random_range(0..1u64 << 40)).collect();
        let expect: Vec<u64> = xs.iter().map(|&x| eval_point(&h, x)).collect();
        assert_eq!(eval_batch(&h, &xs), expect);
    }

    #[test]
    fn pairwise_collision_rate_near_one_over_p() {
        // Each trial draws a fresh hash and a fresh pair of distinct points.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let trials = 10_000;
        let mut hits = 0;
        for _ in 0..trials {
            let h = HashPolynomial::sample_with(3, field101(), &mut rng);
            let x = rng.random_range(0..101);
            let mut y = rng.random_range(0..101);
            while y == x {
                y = rng.random_range(0..101);
            }
            hits += (h.eval(x) == h.eval(y)) as u32;
        }
        let p = 1.0 / 101.0;
        let mean = trials as f64 * p;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - mean).abs() <= 3.0 * sd, "hits={hits} mean={mean}");
    }
}
