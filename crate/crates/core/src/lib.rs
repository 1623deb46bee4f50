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

//! Streaming maximum coverage.
//!
//! Set streams with insertions and deletions are handled by a multi-pass
//! thresholded greedy driven by ℓ0 samplers ([`dynamic`]); randomly ordered
//! insert-only streams by a single-pass windowed greedy ([`random_order`]).
//! Exact and greedy oracles, universe subsampling, polynomial hashing and an
//! urn-process simulator support both.

pub mod dynamic;
pub mod error;
pub mod field;
pub mod generate;
pub mod hashing;
pub mod io;
pub mod l0;
pub mod ledger;
pub mod model;
pub mod oracle;
pub mod params;
pub mod quantized;
pub mod random_order;
pub mod urn;

pub use error::{Error, Result};
pub use model::{
    assign_set_id, CoverageState, DynamicStream, Instance, Op, SetId, SetRecord, StreamToken,
};
pub use oracle::{brute_force_opt, coverage, offline_greedy, Optimum, BRUTE_FORCE_CAP};
pub use params::Epsilon;
pub use quantized::{quantized_greedy, ThresholdLadder};
