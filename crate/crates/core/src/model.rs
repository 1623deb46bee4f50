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

//! Instances, set streams and the coverage state shared by every algorithm.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PrimeField;

/// Identifier of a set. Valid ids lie below [`id_space`] for the instance
/// dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SetId(pub u64);

impl fmt::Display for SetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Largest id space the sketches accept; ids must be valid field points
/// below `2^61 - 1`.
pub const MAX_ID_SPACE: u64 = 1 << 60;

/// Size of the id range `[m^3 n]` for `m` sets over a universe of `n`
/// elements, floored at 2 and capped at [`MAX_ID_SPACE`].
pub fn id_space(m: usize, n: u32) -> u64 {
    let m = m as u128;
    let v = m * m * m * n as u128;
    v.clamp(2, MAX_ID_SPACE as u128) as u64
}

/// A set over the universe `{1..n}` with a strictly increasing element list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetRecord {
    pub id: SetId,
    elements: Vec<u32>,
}

impl SetRecord {
    pub fn new(id: SetId, elements: Vec<u32>) -> Result<Self> {
        if elements.first() == Some(&0) {
            return Err(Error::InvalidSet(format!("set {id} contains element 0")));
        }
        if elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSet(format!(
                "set {id} elements are not strictly increasing"
            )));
        }
        Ok(Self { id, elements })
    }

    /// Sorts and deduplicates; still rejects element 0.
    pub fn from_unsorted(id: SetId, elements: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut v: Vec<u32> = elements.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self::new(id, v)
    }

    pub fn elements(&self) -> &[u32] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn max_element(&self) -> Option<u32> {
        self.elements.last().copied()
    }
}

/// A maximum-coverage instance: budget `k` and a collection of sets over `{1..n}`.
#[derive(Debug, Clone)]
pub struct Instance {
    n: u32,
    k: usize,
    sets: Vec<SetRecord>,
    index: HashMap<SetId, usize>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k && self.sets == other.sets
    }
}

impl Instance {
    /// Validates `1 <= k <= m`, unique ids, elements in `{1..n}` and ids below
    /// `id_space(m, n)`.
    pub fn new(n: u32, k: usize, sets: Vec<SetRecord>) -> Result<Self> {
        let space = id_space(sets.len(), n);
        Self::with_id_space(n, k, sets, space)
    }

    /// Like [`Instance::new`] but with an explicit id range, for instances
    /// derived from a stream whose ids were drawn from a larger collection.
    pub fn with_id_space(n: u32, k: usize, sets: Vec<SetRecord>, space: u64) -> Result<Self> {
        let m = sets.len();
        if k == 0 || k > m {
            return Err(Error::InvalidInstance(format!(
                "budget k={k} must satisfy 1 <= k <= m={m}"
            )));
        }
        let mut index = HashMap::with_capacity(m);
        for (i, s) in sets.iter().enumerate() {
            if s.id.0 >= space {
                return Err(Error::InvalidInstance(format!(
                    "set id {} outside id range [0, {space})",
                    s.id
                )));
            }
            if let Some(e) = s.max_element() {
                if e > n {
                    return Err(Error::InvalidInstance(format!(
                        "set {} has element {e} outside universe 1..={n}",
                        s.id
                    )));
                }
            }
            if index.insert(s.id, i).is_some() {
                return Err(Error::InvalidInstance(format!("duplicate set id {}", s.id)));
            }
        }
        Ok(Self { n, k, sets, index })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sets(&self) -> &[SetRecord] {
        &self.sets
    }

    pub fn get(&self, id: SetId) -> Option<&SetRecord> {
        self.index.get(&id).map(|&i| &self.sets[i])
    }

    /// Same sets with a different budget.
    pub fn with_budget(&self, k: usize) -> Result<Self> {
        Self::with_id_space(self.n, k, self.sets.clone(), u64::MAX)
    }

    /// Replaces every set by `f(set)`, keeping ids, `n` and `k`.
    pub fn map_sets(&self, f: impl FnMut(&SetRecord) -> SetRecord) -> Self {
        let sets: Vec<SetRecord> = self.sets.iter().map(f).collect();
        Self {
            n: self.n,
            k: self.k,
            index: self.index.clone(),
            sets,
        }
    }

    /// Sets as an insert-only stream in instance order.
    pub fn insert_stream(&self) -> DynamicStream {
        let tokens = self.sets.iter().cloned().map(StreamToken::insert).collect();
        DynamicStream {
            n: self.n,
            tokens,
            id_space: id_space(self.m(), self.n).max(self.max_id_plus_one()),
            distinct: self.m(),
        }
    }

    fn max_id_plus_one(&self) -> u64 {
        self.sets.iter().map(|s| s.id.0 + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Insert,
    Delete,
}

impl Op {
    pub fn delta(self) -> i64 {
        match self {
            Op::Insert => 1,
            Op::Delete => -1,
        }
    }
}

/// One insertion or deletion of a whole set. After validation by
/// [`DynamicStream::new`] a delete token carries the elements of the set it
/// removes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamToken {
    pub op: Op,
    pub set: SetRecord,
}

impl StreamToken {
    pub fn insert(set: SetRecord) -> Self {
        Self { op: Op::Insert, set }
    }

    pub fn delete(set: SetRecord) -> Self {
        Self { op: Op::Delete, set }
    }

    /// A delete that names only the id; elements are filled in by validation.
    pub fn delete_id(id: SetId) -> Self {
        Self {
            op: Op::Delete,
            set: SetRecord {
                id,
                elements: Vec::new(),
            },
        }
    }
}

/// A validated dynamic set stream. Per id, the running balance of inserts
/// minus deletes never goes negative and ends in `{0, 1}`; repeated inserts of
/// an id carry identical elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicStream {
    n: u32,
    tokens: Vec<StreamToken>,
    id_space: u64,
    distinct: usize,
}

impl DynamicStream {
    pub fn new(n: u32, tokens: Vec<StreamToken>) -> Result<Self> {
        let mut first_insert: HashMap<SetId, Vec<u32>> = HashMap::new();
        let mut balance: HashMap<SetId, (i64, usize)> = HashMap::new();
        let mut resolved = Vec::with_capacity(tokens.len());
        for (index, mut tok) in tokens.into_iter().enumerate() {
            let invalid = |reason: String| Error::InvalidStream { index, reason };
            let id = tok.set.id;
            match tok.op {
                Op::Insert => {
                    if let Some(e) = tok.set.max_element() {
                        if e > n {
                            return Err(invalid(format!(
                                "set {id} has element {e} outside universe 1..={n}"
                            )));
                        }
                    }
                    match first_insert.get(&id) {
                        Some(prev) if prev != &tok.set.elements => {
                            return Err(invalid(format!(
                                "set {id} re-inserted with different elements"
                            )));
                        }
                        Some(_) => {}
                        None => {
                            first_insert.insert(id, tok.set.elements.clone());
                        }
                    }
                    let b = balance.entry(id).or_insert((0, index));
                    b.0 += 1;
                    b.1 = index;
                }
                Op::Delete => {
                    let Some(elems) = first_insert.get(&id) else {
                        return Err(invalid(format!("delete of never-inserted set {id}")));
                    };
                    if !tok.set.elements.is_empty() && &tok.set.elements != elems {
                        return Err(invalid(format!(
                            "delete of set {id} names different elements"
                        )));
                    }
                    let b = &mut balance.entry(id).or_insert((0, index)).0;
                    if *b == 0 {
                        return Err(invalid(format!("set {id} deleted more often than inserted")));
                    }
                    *b -= 1;
                    tok.set.elements = elems.clone();
                }
            }
            resolved.push(tok);
        }
        if let Some((id, &(b, last))) = balance
            .iter()
            .filter(|(_, &(b, _))| b > 1)
            .min_by_key(|(_, &(_, last))| last)
        {
            return Err(Error::InvalidStream {
                index: last,
                reason: format!("set {id} ends with net count {b}, expected 0 or 1"),
            });
        }
        let distinct = first_insert.len();
        let max_id = first_insert.keys().map(|id| id.0 + 1).max().unwrap_or(0);
        Ok(Self {
            n,
            tokens: resolved,
            id_space: id_space(distinct, n).max(max_id),
            distinct,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn tokens(&self) -> &[StreamToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Size of the id range the sketches are dimensioned for.
    pub fn id_space(&self) -> u64 {
        self.id_space
    }

    /// Number of distinct ids that appear in the stream.
    pub fn distinct_sets(&self) -> usize {
        self.distinct
    }

    /// Sets whose net count is 1, ordered by id.
    pub fn live_sets(&self) -> Vec<SetRecord> {
        let mut net: HashMap<SetId, (i64, &SetRecord)> = HashMap::new();
        for t in &self.tokens {
            let e = net.entry(t.set.id).or_insert((0, &t.set));
            e.0 += t.op.delta();
        }
        let mut live: Vec<SetRecord> = net
            .into_values()
            .filter(|(c, _)| *c == 1)
            .map(|(_, s)| s.clone())
            .collect();
        live.sort_by_key(|s| s.id);
        live
    }

    /// The instance formed by the net-live sets.
    pub fn live_instance(&self, k: usize) -> Result<Instance> {
        Instance::with_id_space(self.n, k, self.live_sets(), self.id_space)
    }

    /// Applies `f` to the elements of every token, keeping ids and ops.
    pub fn map_sets(&self, mut f: impl FnMut(&SetRecord) -> SetRecord) -> Self {
        Self {
            n: self.n,
            tokens: self
                .tokens
                .iter()
                .map(|t| StreamToken {
                    op: t.op,
                    set: f(&t.set),
                })
                .collect(),
            id_space: self.id_space,
            distinct: self.distinct,
        }
    }
}

/// The solution `Y` (chosen ids, in selection order) and the covered
/// elements `C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageState {
    k: usize,
    chosen: Vec<SetId>,
    covered: BTreeSet<u32>,
}

impl CoverageState {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            chosen: Vec::new(),
            covered: BTreeSet::new(),
        }
    }

    pub fn budget(&self) -> usize {
        self.k
    }

    pub fn budget_used(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_full(&self) -> bool {
        self.chosen.len() >= self.k
    }

    pub fn chosen(&self) -> &[SetId] {
        &self.chosen
    }

    pub fn covered(&self) -> &BTreeSet<u32> {
        &self.covered
    }

    pub fn value(&self) -> usize {
        self.covered.len()
    }

    pub fn contains_id(&self, id: SetId) -> bool {
        self.chosen.contains(&id)
    }

    /// `|S \ C|`.
    pub fn marginal(&self, elements: &[u32]) -> usize {
        elements.iter().filter(|e| !self.covered.contains(e)).count()
    }

    /// `S \ C`, ascending.
    pub fn residual(&self, elements: &[u32]) -> Vec<u32> {
        elements
            .iter()
            .copied()
            .filter(|e| !self.covered.contains(e))
            .collect()
    }

    /// Adds a set to the solution and returns how many new elements it covered.
    ///
    /// Panics if the budget is already used up.
    pub fn add(&mut self, id: SetId, elements: &[u32]) -> usize {
        assert!(!self.is_full(), "coverage state budget {} exhausted", self.k);
        self.chosen.push(id);
        elements
            .iter()
            .filter(|&&e| self.covered.insert(e))
            .count()
    }

    /// Adds elements to `C` without selecting a set.
    pub fn cover(&mut self, elements: impl IntoIterator<Item = u32>) {
        self.covered.extend(elements);
    }

    /// Records an id in `Y` without touching `C`, for callers that commit
    /// elements separately.
    pub fn push_id(&mut self, id: SetId) {
        assert!(!self.is_full(), "coverage state budget {} exhausted", self.k);
        self.chosen.push(id);
    }

    /// True when `C` equals the union of the chosen sets in `instance`.
    pub fn consistent_with(&self, instance: &Instance) -> bool {
        let mut union = BTreeSet::new();
        for id in &self.chosen {
            match instance.get(*id) {
                Some(s) => union.extend(s.elements().iter().copied()),
                None => return false,
            }
        }
        union == self.covered
    }
}

/// Content-derived id for a set: `prod_{u in S} (r - u)` over `F_p`.
pub fn assign_set_id(elements: &[u32], r: u64, p: u64) -> Result<SetId> {
    let field = PrimeField::new(p)?;
    if r >= p {
        return Err(Error::BadField(format!("evaluation point {r} not below modulus {p}")));
    }
    let v = elements.iter().fold(1 % p, |acc, &u| {
        field.mul(acc, field.sub(r, field.reduce(u as u64)))
    });
    Ok(SetId(v))
}
