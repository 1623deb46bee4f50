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

//! Multi-pass threshold greedy over an insert-only set stream.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::model::{CoverageState, SetRecord};

/// Strictly decreasing positive pass thresholds `tau_1 > ... > tau_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdLadder {
    tau: Vec<f64>,
}

impl ThresholdLadder {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::InvalidConfig("threshold ladder is empty".into()));
        }
        if tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidConfig("thresholds must be positive".into()));
        }
        if tau.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidConfig("thresholds must strictly decrease".into()));
        }
        Ok(Self { tau })
    }

    /// `tau_i = tau_1 / (1 + eps)^(i - 1)` with `tau_1 = 2v/k`, extended until
    /// the last rung drops below `v / (4ek)`.
    pub fn geometric(v: f64, k: usize, eps: f64) -> Result<Self> {
        if v.is_nan() || v <= 0.0 || k == 0 || eps.is_nan() || eps <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "geometric ladder needs v > 0, k >= 1, eps > 0 (got v={v}, k={k}, eps={eps})"
            )));
        }
        let floor = v / (4.0 * E * k as f64);
        let mut tau = vec![2.0 * v / k as f64];
        while *tau.last().unwrap() >= floor {
            let next = tau[0] / (1.0 + eps).powi(tau.len() as i32);
            tau.push(next);
        }
        Self::new(tau)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.tau
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Checks `tau_1 >= v/k`, `tau_p < v/(4ek)` and `tau_i / tau_{i+1} <= 1 + eps`.
    pub fn satisfies(&self, v_low: f64, k: usize, eps: f64) -> bool {
        let k = k as f64;
        let first = self.tau[0] >= v_low / k;
        let last = *self.tau.last().unwrap() < v_low / (4.0 * E * k);
        let ratio = self
            .tau
            .windows(2)
            .all(|w| w[0] / w[1] <= (1.0 + eps) * (1.0 + 1e-12));
        first && last && ratio
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedOutcome {
    pub state: CoverageState,
    /// Passes started, including a pass cut short by a full budget.
    pub passes: usize,
}

/// One pass per rung; pass `i` admits every set covering at least `tau_i`
/// uncovered elements. Stops as soon as `k` sets are chosen.
pub fn quantized_greedy(stream: &[SetRecord], k: usize, ladder: &ThresholdLadder) -> QuantizedOutcome {
    let mut state = CoverageState::new(k);
    let mut passes = 0;
    'passes: for &tau in ladder.thresholds() {
        if state.is_full() {
            break;
        }
        passes += 1;
        for s in stream {
            if state.is_full() {
                break 'passes;
            }
            if state.marginal(s.elements()) as f64 >= tau {
                state.add(s.id, s.elements());
            }
        }
    }
    QuantizedOutcome { state, passes }
}
