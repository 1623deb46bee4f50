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

//! Run configuration, read from TOML and overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use streamcov::urn::{AdversarySpec, ExperimentSpec, Process};
use streamcov::Epsilon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    OfflineGreedy,
    Quantized,
    Dynamic,
    RandomOrder,
    Urn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OfflineGreedy => "offline-greedy",
            Algorithm::Quantized => "quantized",
            Algorithm::Dynamic => "dynamic",
            Algorithm::RandomOrder => "random-order",
            Algorithm::Urn => "urn",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Option<Algorithm>,
    pub instance: Option<PathBuf>,
    pub stream: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
    /// Universe size for a stream given without an instance.
    pub n: Option<u32>,
    pub k: Option<usize>,
    pub epsilon: Option<Epsilon>,
    /// Fixed guess `v`; without it the dynamic run uses the guess ladder and
    /// the other algorithms use the optimum.
    pub guess: Option<u64>,
    pub pass_cap: Option<usize>,
    pub delta: Option<f64>,
    pub alpha: Option<usize>,
    pub beta: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Brute-force the optimum when no certificate is given and it is cheap.
    pub oracle: Option<bool>,
    pub out: Option<PathBuf>,
    pub urn: Option<UrnConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrnConfig {
    /// `single` or `cascade`.
    pub process: Option<String>,
    /// Urn count for the cascade.
    pub t: Option<usize>,
    pub sizes: Option<Vec<u64>>,
    pub trials: Option<usize>,
    pub adversaries: Option<Vec<String>>,
    pub d: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl RunConfig {
    /// Loads a TOML file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.instance);
        fix(&mut cfg.stream);
        fix(&mut cfg.certificate);
        fix(&mut cfg.out);
        if let Some(u) = cfg.urn.as_mut() {
            fix(&mut u.out);
            fix(&mut u.summary);
        }
        Ok(cfg)
    }
}

impl UrnConfig {
    pub fn spec(&self) -> Result<ExperimentSpec> {
        let process = match self.process.as_deref().unwrap_or("single") {
            "single" => Process::Single,
            "cascade" => Process::Cascade { t: self.t.unwrap_or(4) },
            other => bail!("unknown urn process '{other}', expected single or cascade"),
        };
        if let Process::Cascade { t } = process {
            if !(1..64).contains(&t) {
                bail!("cascade needs 1 <= t < 64 urns, got {t}");
            }
        }
        let adversaries = match &self.adversaries {
            Some(list) => list.iter().map(|a| a.parse()).collect::<streamcov::Result<Vec<AdversarySpec>>>()?,
            None => vec![AdversarySpec::DrawnOnly],
        };
        Ok(ExperimentSpec {
            process,
            sizes: self.sizes.clone().unwrap_or_else(|| vec![1_000]),
            trials: self.trials.unwrap_or(200),
            adversaries,
            d: self.d,
            seed: self.seed.unwrap_or(0),
        })
    }
}
