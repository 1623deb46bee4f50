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

//! Dense polynomial arithmetic over a prime field and subproduct-tree
//! multipoint evaluation.
//!
//! Coefficient vectors are stored lowest degree first. Products switch from
//! schoolbook to Karatsuba above [`KARATSUBA_CUTOFF`]; remainders by monic
//! divisors use Newton iteration on the reversed divisor once the divisor is
//! long enough for it to pay off.

use crate::field::PrimeField;

const KARATSUBA_CUTOFF: usize = 24;
const NEWTON_CUTOFF: usize = 48;

fn trim(mut p: Vec<u64>) -> Vec<u64> {
    while p.last() == Some(&0) {
        p.pop();
    }
    p
}

fn add_into(f: &PrimeField, dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = f.add(*d, *s);
    }
}

fn sub_into(f: &PrimeField, dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = f.sub(*d, *s);
    }
}

fn schoolbook(f: &PrimeField, a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = f.add(out[i + j], f.mul(x, y));
        }
    }
    out
}

/// `a * b`; the result has exactly `len(a) + len(b) - 1` coefficients unless
/// either input is empty.
pub fn mul(f: &PrimeField, a: &[u64], b: &[u64]) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) < KARATSUBA_CUTOFF {
        return schoolbook(f, a, b);
    }
    let h = a.len().max(b.len()) / 2;
    let split = |p: &[u64]| -> (Vec<u64>, Vec<u64>) {
        if p.len() <= h {
            (p.to_vec(), Vec::new())
        } else {
            (p[..h].to_vec(), p[h..].to_vec())
        }
    };
    let (a0, a1) = split(a);
    let (b0, b1) = split(b);
    let z0 = mul(f, &a0, &b0);
    let z2 = mul(f, &a1, &b1);
    let sum = |x: &[u64], y: &[u64]| {
        let mut s = vec![0u64; x.len().max(y.len())];
        add_into(f, &mut s, x);
        add_into(f, &mut s, y);
        s
    };
    let mut z1 = mul(f, &sum(&a0, &a1), &sum(&b0, &b1));
    sub_into(f, &mut z1, &z0);
    sub_into(f, &mut z1, &z2);

    let mut out = vec![0u64; a.len() + b.len() - 1];
    add_into(f, &mut out, &z0);
    add_into(f, &mut out[h..], &z1);
    if !z2.is_empty() {
        add_into(f, &mut out[2 * h..], &z2);
    }
    out
}

/// Power series inverse of `a` modulo `x^len`; requires `a[0] != 0`.
fn series_inverse(f: &PrimeField, a: &[u64], len: usize) -> Vec<u64> {
    let mut g = vec![f.inv(a[0])];
    let mut cur = 1;
    while cur < len {
        let next = (2 * cur).min(len);
        let a_trunc = &a[..a.len().min(next)];
        let mut t = mul(f, a_trunc, &g);
        t.resize(next, 0);
        // t <- 2 - a*g
        for c in t.iter_mut() {
            *c = f.neg(*c);
        }
        t[0] = f.add(t[0], 2 % f.modulus());
        let mut g2 = mul(f, &g, &t);
        g2.resize(next, 0);
        g = g2;
        cur = next;
    }
    g
}

fn rem_schoolbook(f: &PrimeField, a: &[u64], b: &[u64]) -> Vec<u64> {
    let m = b.len() - 1;
    let mut r = a.to_vec();
    for i in (m..r.len()).rev() {
        let c = r[i];
        if c != 0 {
            for j in 0..m {
                r[i - m + j] = f.sub(r[i - m + j], f.mul(c, b[j]));
            }
        }
        r[i] = 0;
    }
    r.truncate(m);
    r
}

/// `a mod b` for a monic `b` of degree at least 1.
pub fn rem_monic(f: &PrimeField, a: &[u64], b: &[u64]) -> Vec<u64> {
    debug_assert_eq!(b.last(), Some(&1), "divisor must be monic");
    if a.len() < b.len() {
        return a.to_vec();
    }
    let m = b.len() - 1;
    if m < NEWTON_CUTOFF {
        return rem_schoolbook(f, a, b);
    }
    let qlen = a.len() - m;
    let rev_a: Vec<u64> = a.iter().rev().take(qlen).copied().collect();
    let rev_b: Vec<u64> = b.iter().rev().copied().collect();
    let inv = series_inverse(f, &rev_b, qlen);
    let mut rev_q = mul(f, &rev_a, &inv);
    rev_q.resize(qlen, 0);
    let q: Vec<u64> = rev_q.into_iter().rev().collect();
    let qb = mul(f, &q, b);
    let mut r = a[..m].to_vec();
    sub_into(f, &mut r, &qb[..m.min(qb.len())]);
    r
}

/// Horner evaluation.
pub fn horner(f: &PrimeField, coeffs: &[u64], x: u64) -> u64 {
    coeffs.iter().rev().fold(0, |acc, &c| f.add(f.mul(acc, x), c))
}

/// Products of `(X - x_i)` arranged bottom-up; `levels[0]` holds the linear
/// leaves and the last level holds the single root.
pub struct SubproductTree {
    levels: Vec<Vec<Vec<u64>>>,
}

impl SubproductTree {
    pub fn new(f: &PrimeField, xs: &[u64]) -> Self {
        assert!(!xs.is_empty(), "subproduct tree needs at least one point");
        let leaves: Vec<Vec<u64>> = xs.iter().map(|&x| vec![f.neg(f.reduce(x)), 1]).collect();
        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let prev = levels.last().unwrap();
            let next = prev
                .chunks(2)
                .map(|pair| match pair {
                    [a, b] => mul(f, a, b),
                    [a] => a.clone(),
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        Self { levels }
    }

    pub fn root(&self) -> &[u64] {
        &self.levels.last().unwrap()[0]
    }

    /// Values of `poly` at the leaves, in leaf order.
    pub fn evaluate(&self, f: &PrimeField, poly: &[u64]) -> Vec<u64> {
        let mut rems = vec![rem_monic(f, &trim(poly.to_vec()), self.root())];
        for level in self.levels.iter().rev().skip(1) {
            rems = level
                .iter()
                .enumerate()
                .map(|(j, node)| rem_monic(f, &rems[j / 2], node))
                .collect();
        }
        rems.into_iter()
            .map(|r| r.first().copied().unwrap_or(0))
            .collect()
    }
}

/// `poly(x)` for every `x` in `xs` via a subproduct tree.
pub fn multipoint_eval(f: &PrimeField, poly: &[u64], xs: &[u64]) -> Vec<u64> {
    if xs.is_empty() {
        return Vec::new();
    }
    SubproductTree::new(f, xs).evaluate(f, poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(rng: &mut ChaCha8Rng, f: &PrimeField, len: usize) -> Vec<u64> {
        (0..len).map(|_| rng.random_range(0..f.modulus())).collect()
    }

    #[test]
    fn karatsuba_matches_schoolbook() {
        let f = PrimeField::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(la, lb) in &[(24, 24), (50, 31), (100, 100), (257, 64), (3, 90)] {
            let a = random_poly(&mut rng, &f, la);
            let b = random_poly(&mut rng, &f, lb);
            assert_eq!(mul(&f, &a, &b), schoolbook(&f, &a, &b), "{la}x{lb}");
        }
    }

    #[test]
    fn newton_remainder_matches_long_division() {
        let f = PrimeField::new(1_000_003).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(la, lb) in &[(200, 60), (130, 129), (400, 100), (60, 70)] {
            let a = random_poly(&mut rng, &f, la);
            let mut b = random_poly(&mut rng, &f, lb);
            *b.last_mut().unwrap() = 1;
            let expect = if la < lb { a.clone() } else { rem_schoolbook(&f, &a, &b) };
            assert_eq!(rem_monic(&f, &a, &b), expect, "{la} mod {lb}");
        }
    }

    #[test]
    fn series_inverse_is_inverse() {
        let f = PrimeField::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = random_poly(&mut rng, &f, 70);
        a[0] = 5;
        let g = series_inverse(&f, &a, 70);
        let mut prod = mul(&f, &a, &g);
        prod.truncate(70);
        assert_eq!(prod[0], 1);
        assert!(prod[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn tree_root_vanishes_on_points() {
        let f = PrimeField::new(101).unwrap();
        let xs = [3, 7, 11, 50, 99];
        let tree = SubproductTree::new(&f, &xs);
        assert_eq!(tree.root().len(), 6);
        for &x in &xs {
            assert_eq!(horner(&f, tree.root(), x), 0);
        }
    }

    proptest! {
        #[test]
        fn multipoint_matches_horner(
            seed in any::<u64>(),
            deg in 0usize..150,
            npts in 1usize..200,
        ) {
            let f = PrimeField::mersenne61();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = random_poly(&mut rng, &f, deg + 1);
            let xs: Vec<u64> = (0..npts).map(|_| rng.random_range(0..1000)).collect();
            let expect: Vec<u64> = xs.iter().map(|&x| horner(&f, &poly, x)).collect();
            prop_assert_eq!(multipoint_eval(&f, &poly, &xs), expect);
        }
    }
}
