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

//! Synthetic instances and dynamic streams.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DynamicStream, Instance, SetId, SetRecord, StreamToken};
use crate::oracle::coverage;
use crate::params::floor_log2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileKind {
    /// Pairwise disjoint sets partitioning `{1..n}`.
    Disjoint,
    /// Each element joins each set independently with probability `density`.
    Overlapping { density: f64 },
    /// `k` disjoint planted sets tile `{1..cover}`; decoys are smaller subsets
    /// of the same range, so the planted union is optimal.
    PlantedOpt { cover: u32 },
    /// Levels of sets with halving sizes; sets within a level are drawn from a
    /// shared pool twice their size, so each pick demotes its level-mates.
    AdversarialLadder,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Disjoint => write!(f, "disjoint"),
            ProfileKind::Overlapping { density } => write!(f, "overlapping:{density}"),
            ProfileKind::PlantedOpt { cover } => write!(f, "planted:{cover}"),
            ProfileKind::AdversarialLadder => write!(f, "ladder"),
        }
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidProfile(format!("unknown profile '{s}'"));
        Ok(match s.split_once(':') {
            None if s == "disjoint" => ProfileKind::Disjoint,
            None if s == "ladder" => ProfileKind::AdversarialLadder,
            Some(("overlapping", d)) => ProfileKind::Overlapping {
                density: d.parse().map_err(|_| bad())?,
            },
            Some(("planted", c)) => ProfileKind::PlantedOpt {
                cover: c.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    pub n: u32,
    /// Sets inserted into the stream.
    pub m: usize,
    pub k: usize,
    /// Fraction of the `m` inserted sets deleted again.
    #[serde(default)]
    pub churn: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Known optimum: the ids and their coverage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub value: usize,
    pub ids: Vec<SetId>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// The live sets of the stream with budget `k`.
    pub instance: Instance,
    pub stream: DynamicStream,
    pub certificate: Option<Certificate>,
}

impl GeneratorProfile {
    pub fn new(kind: ProfileKind, n: u32, m: usize, k: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            m,
            k,
            churn: 0.0,
            seed,
        }
    }

    pub fn with_churn(mut self, churn: f64) -> Self {
        self.churn = churn;
        self
    }

    /// Number of inserted sets that are deleted again.
    pub fn deletions(&self) -> usize {
        (self.churn * self.m as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be positive".into());
        }
        if !(0.0..1.0).contains(&self.churn) {
            return bad(format!("churn {} must lie in [0, 1)", self.churn));
        }
        let live = self.m - self.deletions();
        if self.k == 0 || self.k > live {
            return bad(format!("k={} must lie in 1..={live} live sets", self.k));
        }
        match self.kind {
            ProfileKind::Disjoint if (self.n as usize) < self.m => {
                bad(format!("disjoint needs n >= m, got n={} m={}", self.n, self.m))
            }
            ProfileKind::Overlapping { density } if !(density > 0.0 && density <= 1.0) => {
                bad(format!("density {density} must lie in (0, 1]"))
            }
            ProfileKind::PlantedOpt { cover } => {
                if cover > self.n || (cover as usize) < self.k {
                    bad(format!("cover={cover} must lie in k..=n"))
                } else if self.deletions() > self.m - self.k {
                    bad("churn would delete planted sets".into())
                } else {
                    Ok(())
                }
            }
            ProfileKind::AdversarialLadder if self.n < 4 => bad("ladder needs n >= 4".into()),
            _ => Ok(()),
        }
    }
}

fn disjoint(n: u32, m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    let mut cuts = index::sample(rng, n as usize - 1, m - 1).into_vec();
    cuts.iter_mut().for_each(|c| *c += 1);
    cuts.sort_unstable();
    cuts.push(n as usize);
    let mut start = 0;
    cuts.into_iter()
        .map(|end| {
            let s = (start as u32 + 1..=end as u32).collect();
            start = end;
            s
        })
        .collect()
}

fn overlapping(n: u32, m: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    (0..m)
        .map(|_| {
            let mut s: Vec<u32> = (1..=n).filter(|_| rng.random_bool(density)).collect();
            if s.is_empty() {
                s.push(rng.random_range(1..=n));
            }
            s
        })
        .collect()
}

fn random_subset(lo: u32, len: u32, size: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut s: Vec<u32> = index::sample(rng, len as usize, size as usize)
        .into_iter()
        .map(|e| lo + e as u32)
        .collect();
    s.sort_unstable();
    s
}

/// Planted sets come first.
fn planted(cover: u32, m: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    let mut sets = disjoint(cover, k, rng);
    let cap = cover.div_ceil(k as u32);
    for _ in k..m {
        let size = rng.random_range(1..=cap);
        sets.push(random_subset(1, cover, size, rng));
    }
    sets
}

fn ladder(n: u32, m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    let top = n / 4;
    let levels = (floor_log2(top as u64) as usize + 1).min(floor_log2(m as u64) as usize + 1);
    let mut sets = Vec::with_capacity(m);
    let mut pool_start = 1;
    for j in 0..levels {
        let size = (top >> j).max(1);
        let count = m / levels + usize::from(j < m % levels);
        for _ in 0..count {
            sets.push(random_subset(pool_start, 2 * size, size, rng));
        }
        pool_start += 2 * size;
    }
    sets
}

/// Interleaves `m` inserts with deletes of the ids in `deleted`; every delete
/// follows its insert.
fn churn_tokens(sets: &[SetRecord], deleted: &[bool], rng: &mut ChaCha8Rng) -> Vec<StreamToken> {
    let mut events: Vec<(f64, StreamToken)> = Vec::with_capacity(sets.len() * 2);
    for (s, &del) in sets.iter().zip(deleted) {
        let at: f64 = rng.random();
        if del {
            let later = at + (1.0 - at) * rng.random::<f64>();
            events.push((later, StreamToken::delete_id(s.id)));
        }
        events.push((at, StreamToken::insert(s.clone())));
    }
    // Ties put the insert first.
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1.op as u8).cmp(&(b.1.op as u8))));
    events.into_iter().map(|(_, t)| t).collect()
}

/// Builds the stream, its live instance and, where the optimum is known by
/// construction, a certificate checked against the instance.
pub fn generate(profile: &GeneratorProfile) -> Result<Generated> {
    profile.validate()?;
    let (n, m, k) = (profile.n, profile.m, profile.k);
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let elements = match profile.kind {
        ProfileKind::Disjoint => disjoint(n, m, &mut rng),
        ProfileKind::Overlapping { density } => overlapping(n, m, density, &mut rng),
        ProfileKind::PlantedOpt { cover } => planted(cover, m, k, &mut rng),
        ProfileKind::AdversarialLadder => ladder(n, m, &mut rng),
    };
    let mut ids: Vec<u64> = (0..m as u64).collect();
    ids.shuffle(&mut rng);
    let sets = elements
        .into_iter()
        .zip(&ids)
        .map(|(e, &id)| SetRecord::new(SetId(id), e))
        .collect::<Result<Vec<_>>>()?;

    let planted_count = match profile.kind {
        ProfileKind::PlantedOpt { .. } => k,
        _ => 0,
    };
    let mut deleted = vec![false; m];
    for i in index::sample(&mut rng, m - planted_count, profile.deletions()) {
        deleted[planted_count + i] = true;
    }
    let stream = DynamicStream::new(n, churn_tokens(&sets, &deleted, &mut rng))?;
    let live: Vec<SetRecord> = sets
        .iter()
        .zip(&deleted)
        .filter(|(_, &d)| !d)
        .map(|(s, _)| s.clone())
        .collect();
    let instance = Instance::with_id_space(n, k, live, stream.id_space())?;

    let certificate = match profile.kind {
        ProfileKind::PlantedOpt { cover } => Some(Certificate {
            value: cover as usize,
            ids: sets[..k].iter().map(|s| s.id).collect(),
        }),
        ProfileKind::Disjoint => {
            let mut by_size: Vec<&SetRecord> = instance.sets().iter().collect();
            by_size.sort_by_key(|s| (std::cmp::Reverse(s.len()), s.id));
            let ids: Vec<SetId> = by_size[..k].iter().map(|s| s.id).collect();
            Some(Certificate {
                value: ids.iter().map(|id| instance.get(*id).map_or(0, SetRecord::len)).sum(),
                ids,
            })
        }
        _ => None,
    };
    if let Some(c) = &certificate {
        let got = coverage(&instance, &c.ids)?;
        if got != c.value || c.ids.len() != k {
            return Err(Error::InvalidProfile(format!(
                "certificate claims {} but covers {got}",
                c.value
            )));
        }
    }
    Ok(Generated {
        instance,
        stream,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Op;
    use crate::oracle::{brute_force_opt, BRUTE_FORCE_CAP};

    #[test]
    fn disjoint_with_m_equal_k_covers_everything() {
        let g = generate(&GeneratorProfile::new(ProfileKind::Disjoint, 50, 7, 7, 1)).unwrap();
        let total: usize = g.instance.sets().iter().map(SetRecord::len).sum();
        assert_eq!(total, 50);
        let c = g.certificate.unwrap();
        assert_eq!(c.value, 50);
        assert_eq!(c.ids.len(), 7);
    }

    #[test]
    fn planted_certificate_matches_brute_force() {
        for seed in 0..20 {
            let p = GeneratorProfile::new(ProfileKind::PlantedOpt { cover: 30 }, 30, 10, 3, seed);
            let g = generate(&p).unwrap();
            let opt = brute_force_opt(&g.instance, BRUTE_FORCE_CAP).unwrap();
            assert_eq!(opt.value, g.certificate.unwrap().value);
            assert_eq!(opt.value, 30);
        }
    }

    #[test]
    fn churn_counts_tokens() {
        let p = GeneratorProfile::new(ProfileKind::Overlapping { density: 0.2 }, 40, 20, 3, 5).with_churn(0.5);
        let g = generate(&p).unwrap();
        assert_eq!(g.stream.len(), 30);
        assert_eq!(g.stream.tokens().iter().filter(|t| t.op == Op::Delete).count(), 10);
        assert_eq!(g.stream.live_sets().len(), 10);
        assert_eq!(g.instance.m(), 10);
    }

    #[test]
    fn planted_sets_survive_churn() {
        let p = GeneratorProfile::new(ProfileKind::PlantedOpt { cover: 60 }, 80, 30, 4, 2).with_churn(0.6);
        let g = generate(&p).unwrap();
        let c = g.certificate.unwrap();
        assert!(c.ids.iter().all(|id| g.instance.get(*id).is_some()));
    }

    #[test]
    fn deterministic_per_seed() {
        let p = GeneratorProfile::new(ProfileKind::AdversarialLadder, 256, 64, 8, 9).with_churn(0.25);
        let (a, b) = (generate(&p).unwrap(), generate(&p).unwrap());
        assert_eq!(a.stream, b.stream);
        assert_eq!(a.instance, b.instance);
        let c = generate(&GeneratorProfile { seed: 10, ..p }).unwrap();
        assert_ne!(a.stream, c.stream);
    }

    #[test]
    fn ladder_levels_halve() {
        let g = generate(&GeneratorProfile::new(ProfileKind::AdversarialLadder, 1024, 64, 8, 3)).unwrap();
        let mut sizes: Vec<usize> = g.instance.sets().iter().map(SetRecord::len).collect();
        sizes.sort_unstable();
        sizes.dedup();
        assert_eq!(sizes, vec![4, 8, 16, 32, 64, 128, 256]);
    }

    #[test]
    fn invalid_profiles_rejected() {
        let bad = [
            GeneratorProfile::new(ProfileKind::Disjoint, 5, 10, 2, 0),
            GeneratorProfile::new(ProfileKind::Overlapping { density: 0.0 }, 5, 10, 2, 0),
            GeneratorProfile::new(ProfileKind::PlantedOpt { cover: 40 }, 30, 10, 2, 0),
            GeneratorProfile::new(ProfileKind::Disjoint, 50, 10, 0, 0),
            GeneratorProfile::new(ProfileKind::Disjoint, 50, 10, 6, 0).with_churn(0.5),
            GeneratorProfile::new(ProfileKind::PlantedOpt { cover: 30 }, 30, 10, 3, 0).with_churn(0.9),
        ];
        for p in bad {
            assert!(matches!(generate(&p), Err(Error::InvalidProfile(_))), "{p:?}");
        }
    }

    #[test]
    fn profile_names_parse() {
        for s in ["disjoint", "ladder", "overlapping:0.3", "planted:30"] {
            assert_eq!(s.parse::<ProfileKind>().unwrap().to_string(), s);
        }
        assert!("planted".parse::<ProfileKind>().is_err());
    }
}
