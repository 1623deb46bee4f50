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

//! Arithmetic modulo a prime `p < 2^63`.
//!
//! All hashing and fingerprinting in the crate runs over [`PrimeField`]. The
//! Mersenne prime `2^61 - 1` gets a shift-and-add reduction; every other
//! modulus falls back to a 128-bit remainder.

use crate::error::{Error, Result};

/// `2^61 - 1`, the default modulus for hashing and fingerprints.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

pub fn is_prime(n: u64) -> bool {
    primal_check::miller_rabin(n)
}

/// Largest prime `<= n`, if any.
pub fn prev_prime(n: u64) -> Option<u64> {
    let mut c = n;
    while c >= 2 {
        if is_prime(c) {
            return Some(c);
        }
        c -= 1;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p >= 1 << 63 {
            return Err(Error::BadField(format!("modulus {p} does not fit below 2^63")));
        }
        if !is_prime(p) {
            return Err(Error::BadField(format!("modulus {p} is not prime")));
        }
        Ok(Self { p })
    }

    pub const fn mersenne61() -> Self {
        Self { p: MERSENNE_61 }
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.p
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let x = a as u128 * b as u128;
        if self.p == MERSENNE_61 {
            let mut r = (x as u64 & MERSENNE_61) + (x >> 61) as u64;
            if r >= MERSENNE_61 {
                r -= MERSENNE_61;
            }
            if r >= MERSENNE_61 {
                r -= MERSENNE_61;
            }
            r
        } else {
            (x % self.p as u128) as u64
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.p;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(!a.is_multiple_of(self.p), "zero has no inverse");
        self.pow(a, self.p - 2)
    }

    /// Maps a signed delta into the field.
    #[inline]
    pub fn from_signed(&self, d: i64) -> u64 {
        if d >= 0 {
            self.reduce(d as u64)
        } else {
            self.neg(self.reduce(d.unsigned_abs()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_composite_and_oversized_moduli() {
        assert!(PrimeField::new(100).is_err());
        assert!(PrimeField::new(1).is_err());
        assert!(PrimeField::new(0).is_err());
        assert!(PrimeField::new(101).is_ok());
        assert!(PrimeField::new(MERSENNE_61).is_ok());
    }

    #[test]
    fn prev_prime_small_values() {
        assert_eq!(prev_prime(1), None);
        assert_eq!(prev_prime(2), Some(2));
        assert_eq!(prev_prime(100), Some(97));
        assert_eq!(prev_prime(101), Some(101));
    }

    #[test]
    fn inverse_roundtrip() {
        let f = PrimeField::new(101).unwrap();
        for a in 1..101 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    proptest! {
        #[test]
        fn mersenne_mul_matches_generic(a in 0..MERSENNE_61, b in 0..MERSENNE_61) {
            let f = PrimeField::mersenne61();
            let expected = ((a as u128 * b as u128) % MERSENNE_61 as u128) as u64;
            prop_assert_eq!(f.mul(a, b), expected);
        }

        #[test]
        fn add_sub_inverse(a in 0..MERSENNE_61, b in 0..MERSENNE_61) {
            let f = PrimeField::mersenne61();
            prop_assert_eq!(f.sub(f.add(a, b), b), a);
        }
    }
}
