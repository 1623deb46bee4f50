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

use thiserror::Error;

use crate::model::SetId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown set id {0}")]
    UnknownId(SetId),
    #[error("brute force needs {subsets} subsets, cap is {cap}")]
    TooLarge { subsets: u128, cap: u128 },
    #[error("bad field: {0}")]
    BadField(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid stream at token {index}: {reason}")]
    InvalidStream { index: usize, reason: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sampler support is empty")]
    EmptySupport,
    #[error("group {group} used all {sketches} of its sketches")]
    GroupExhausted { group: usize, sketches: usize },
    #[error("sketch failure: {0}")]
    SketchFailure(String),
    #[error("pass cap of {cap} exceeded")]
    PassCapExceeded { cap: usize },
    #[error("stored {stored} elements, budget is {budget}")]
    BudgetExceeded { stored: u64, budget: u64 },
    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: validation error: {msg}")]
    Validation { line: usize, msg: String },
    #[error("invalid generator profile: {0}")]
    InvalidProfile(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
