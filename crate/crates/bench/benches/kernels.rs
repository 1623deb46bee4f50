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

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use streamcov::dynamic::{run_dynamic, DynamicConfig};
use streamcov::l0::L0Sketch;
use streamcov::model::SetId;
use streamcov::Epsilon;
use streamcov_bench::{hash, planted, points};

fn hash_eval(c: &mut Criterion) {
    let mut g = c.benchmark_group("hash_eval");
    for gamma in [16usize, 64, 256] {
        let h = hash(gamma, 1);
        let xs = points(4096, 2);
        g.throughput(Throughput::Elements(xs.len() as u64));
        g.bench_with_input(BenchmarkId::new("horner", gamma), &xs, |b, xs| {
            b.iter(|| xs.iter().map(|&x| h.eval(x)).fold(0u64, |a, y| a ^ y))
        });
        g.bench_with_input(BenchmarkId::new("batch", gamma), &xs, |b, xs| {
            b.iter(|| h.eval_batch(black_box(xs)))
        });
    }
    g.finish();
}

fn l0_update(c: &mut Criterion) {
    let mut g = c.benchmark_group("l0_update");
    for reps in [4usize, 8, 16] {
        let mut sk = L0Sketch::with_seed(1 << 30, reps, 3);
        let ids = points(1024, 4);
        g.throughput(Throughput::Elements(ids.len() as u64));
        g.bench_function(BenchmarkId::from_parameter(reps), |b| {
            b.iter(|| {
                for &x in &ids {
                    sk.update(SetId(x >> 34), 1);
                }
            })
        });
    }
    g.finish();
}

fn dynamic_run(c: &mut Criterion) {
    let mut g = c.benchmark_group("dynamic_run");
    g.sample_size(10);
    for m in [32usize, 128] {
        let gen = planted(4 * m as u32, m, 4, 5);
        let v = gen.certificate.as_ref().expect("planted").value as u64;
        let cfg = DynamicConfig::new(4, Epsilon::new(1, 5).unwrap(), v, 6);
        g.bench_function(BenchmarkId::from_parameter(m), |b| {
            b.iter(|| run_dynamic(&gen.stream, &cfg).expect("run completes"))
        });
    }
    g.finish();
}

criterion_group!(benches, hash_eval, l0_update, dynamic_run);
criterion_main!(benches);
