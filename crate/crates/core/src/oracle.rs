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

//! Exact and greedy reference solvers.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{CoverageState, Instance, SetId};

/// Default cap on the number of `k`-subsets [`brute_force_opt`] enumerates.
pub const BRUTE_FORCE_CAP: u128 = 2_000_000;

/// `|union of the sets named by ids|`.
pub fn coverage(instance: &Instance, ids: &[SetId]) -> Result<usize> {
    let mut union = BTreeSet::new();
    for &id in ids {
        let s = instance.get(id).ok_or(Error::UnknownId(id))?;
        union.extend(s.elements().iter().copied());
    }
    Ok(union.len())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optimum {
    pub value: usize,
    /// Ascending ids of a lexicographically smallest optimal `k`-subset.
    pub witness: Vec<SetId>,
}

/// `C(m, k)`, saturating at `u128::MAX`.
pub fn binomial(m: u64, k: u64) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((m - i) as u128) {
            Some(x) => x / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

struct Bits(Vec<u64>);

impl Bits {
    fn from_elements(elements: &[u32], words: usize) -> Self {
        let mut v = vec![0u64; words];
        for &e in elements {
            v[e as usize / 64] |= 1 << (e % 64);
        }
        Bits(v)
    }
}

/// Exact optimum by enumerating every `k`-subset, refusing when more than
/// `cap` subsets would be needed.
pub fn brute_force_opt(instance: &Instance, cap: u128) -> Result<Optimum> {
    let m = instance.m();
    let k = instance.k();
    let subsets = binomial(m as u64, k as u64);
    if subsets > cap {
        return Err(Error::TooLarge { subsets, cap });
    }
    let words = instance.n() as usize / 64 + 1;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| instance.sets()[i].id);
    let bits: Vec<Bits> = order
        .iter()
        .map(|&i| Bits::from_elements(instance.sets()[i].elements(), words))
        .collect();

    let mut best = (0usize, Vec::new());
    let mut acc = vec![vec![0u64; words]; k + 1];
    let mut pick = Vec::with_capacity(k);
    enumerate(&bits, k, 0, &mut acc, &mut pick, &mut best);
    let witness = best.1.iter().map(|&i| instance.sets()[order[i]].id).collect();
    Ok(Optimum {
        value: best.0,
        witness,
    })
}

fn enumerate(
    bits: &[Bits],
    k: usize,
    start: usize,
    acc: &mut Vec<Vec<u64>>,
    pick: &mut Vec<usize>,
    best: &mut (usize, Vec<usize>),
) {
    let depth = pick.len();
    if depth == k {
        let v: usize = acc[depth].iter().map(|w| w.count_ones() as usize).sum();
        // Lexicographic enumeration: a strict improvement keeps the smallest tuple.
        if v > best.0 || best.1.is_empty() {
            *best = (v, pick.clone());
        }
        return;
    }
    let remaining = k - depth;
    for i in start..=bits.len() - remaining {
        let (lo, hi) = acc.split_at_mut(depth + 1);
        for (dst, (a, b)) in hi[0].iter_mut().zip(lo[depth].iter().zip(&bits[i].0)) {
            *dst = a | b;
        }
        pick.push(i);
        enumerate(bits, k, i + 1, acc, pick, best);
        pick.pop();
    }
}

/// Classic greedy: `k` rounds, each taking the set with the largest marginal
/// coverage (ties to the smallest id). Stops early once nothing adds coverage.
pub fn offline_greedy(instance: &Instance) -> CoverageState {
    let mut state = CoverageState::new(instance.k());
    while !state.is_full() {
        let best = instance
            .sets()
            .iter()
            .filter(|s| !state.contains_id(s.id))
            .map(|s| (state.marginal(s.elements()), s))
            .max_by(|(ga, a), (gb, b)| ga.cmp(gb).then(b.id.cmp(&a.id)));
        match best {
            Some((gain, s)) if gain > 0 => {
                state.add(s.id, s.elements());
            }
            _ => break,
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SetRecord;

    fn inst(n: u32, k: usize, sets: &[&[u32]]) -> Instance {
        let sets = sets
            .iter()
            .enumerate()
            .map(|(i, e)| SetRecord::new(SetId(i as u64 + 1), e.to_vec()).unwrap())
            .collect();
        Instance::new(n, k, sets).unwrap()
    }

    #[test]
    fn coverage_examples() {
        let i = inst(9, 1, &[&[1, 2, 3], &[3, 4], &[1, 4, 7]]);
        assert_eq!(coverage(&i, &[]).unwrap(), 0);
        assert_eq!(coverage(&i, &[SetId(3)]).unwrap(), 3);
        assert_eq!(coverage(&i, &[SetId(1), SetId(2)]).unwrap(), 4);
        assert_eq!(coverage(&i, &[SetId(99)]), Err(Error::UnknownId(SetId(99))));
    }

    #[test]
    fn brute_force_examples() {
        let single = inst(5, 1, &[&[1, 3, 5]]);
        assert_eq!(brute_force_opt(&single, BRUTE_FORCE_CAP).unwrap().value, 3);

        let i = inst(4, 2, &[&[1, 2], &[2, 3], &[3, 4]]);
        let opt = brute_force_opt(&i, BRUTE_FORCE_CAP).unwrap();
        assert_eq!(opt.value, 4);
        assert_eq!(opt.witness, vec![SetId(1), SetId(3)]);

        let full = inst(6, 3, &[&[1, 2], &[2, 3], &[5, 6]]);
        assert_eq!(brute_force_opt(&full, BRUTE_FORCE_CAP).unwrap().value, 5);
    }

    #[test]
    fn brute_force_ties_prefer_smallest_tuple() {
        let i = inst(4, 1, &[&[1, 2], &[3, 4], &[1, 3]]);
        let opt = brute_force_opt(&i, BRUTE_FORCE_CAP).unwrap();
        assert_eq!(opt.witness, vec![SetId(1)]);
    }

    #[test]
    fn brute_force_refuses_above_cap() {
        let sets: Vec<Vec<u32>> = (1..=30).map(|e| vec![e]).collect();
        let refs: Vec<&[u32]> = sets.iter().map(|v| v.as_slice()).collect();
        let i = inst(30, 15, &refs);
        assert!(matches!(
            brute_force_opt(&i, BRUTE_FORCE_CAP),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(30, 15), 155_117_520);
    }

    #[test]
    fn greedy_examples() {
        let disjoint = inst(9, 2, &[&[1, 2, 3, 4, 5], &[6, 7, 8], &[9]]);
        let g = offline_greedy(&disjoint);
        assert_eq!(g.chosen(), &[SetId(1), SetId(2)]);
        assert_eq!(g.value(), 8);

        let traced = inst(7, 2, &[&[1, 2, 3, 4], &[1, 2, 3, 5], &[5, 6, 7]]);
        let g = offline_greedy(&traced);
        assert_eq!(g.chosen(), &[SetId(1), SetId(3)]);
        assert_eq!(g.value(), 7);

        let same = inst(3, 2, &[&[1, 2, 3], &[1, 2, 3]]);
        let g = offline_greedy(&same);
        assert_eq!(g.value(), 3);
        assert_eq!(g.chosen(), &[SetId(1)]);
    }
}
