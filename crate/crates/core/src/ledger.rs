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

//! Space and pass accounting shared by all algorithms, and the versioned
//! metrics CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_SCHEMA: u32 = 1;

/// Tracks retained elements. Every allocation site calls [`alloc`] and every
/// release [`release`]; the peak is what the ledger reports.
///
/// [`alloc`]: StorageMeter::alloc
/// [`release`]: StorageMeter::release
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StorageMeter {
    current: u64,
    peak: u64,
}

impl StorageMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, n: usize) {
        self.current += n as u64;
        self.peak = self.peak.max(self.current);
    }

    pub fn release(&mut self, n: usize) {
        assert!(
            n as u64 <= self.current,
            "releasing {n} elements with only {} held",
            self.current
        );
        self.current -= n as u64;
    }

    pub fn current(&self) -> u64 {
        self.current
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub schema: u32,
    pub algorithm: String,
    pub trial: usize,
    pub passes: usize,
    pub peak_stored_elements: u64,
    pub sketch_words: u64,
    pub coverage: usize,
    pub opt: Option<usize>,
    pub ratio: Option<f64>,
    pub wall_time_ms: f64,
    pub seed: u64,
    pub k: usize,
    pub epsilon: Option<String>,
    pub alpha: Option<usize>,
    pub beta: Option<usize>,
    pub v: Option<u64>,
    pub gamma: Option<usize>,
    pub delta: Option<f64>,
    pub status: String,
    pub passed: bool,
}

impl MetricsLedger {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            schema: CSV_SCHEMA,
            algorithm: algorithm.into(),
            status: "ok".into(),
            passed: true,
            ..Self::default()
        }
    }

    /// Records the optimum and the resulting ratio.
    pub fn set_opt(&mut self, opt: usize) {
        self.opt = Some(opt);
        self.ratio = Some(if opt == 0 {
            1.0
        } else {
            self.coverage as f64 / opt as f64
        });
    }

    pub fn fail(&mut self, status: impl Into<String>) {
        self.passed = false;
        self.status = status.into();
    }
}

pub const CSV_HEADER: [&str; 20] = [
    "schema",
    "algorithm",
    "trial",
    "passes",
    "peak_stored_elements",
    "sketch_words",
    "coverage",
    "opt",
    "ratio",
    "wall_time_ms",
    "seed",
    "k",
    "epsilon",
    "alpha",
    "beta",
    "v",
    "gamma",
    "delta",
    "status",
    "passed",
];

/// Writes the header row followed by `rows`.
pub fn write_csv<W: Write>(out: W, rows: &[MetricsLedger]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricsLedger>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        let row: MetricsLedger = rec.map_err(|e| Error::Io(e.to_string()))?;
        if row.schema != CSV_SCHEMA {
            return Err(Error::Io(format!("unsupported metrics schema {}", row.schema)));
        }
        rows.push(row);
    }
    Ok(rows)
}
