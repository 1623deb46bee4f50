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

//! Trial loop behind `streamcov run`.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamcov::dynamic::{run_dynamic, run_with_guesses, DynamicConfig, GuessOptions, IterationRecord, StreamSource};
use streamcov::io::{parse_certificate, parse_instance, parse_stream_file, read_text, FileStream};
use streamcov::ledger::{write_csv, MetricsLedger};
use streamcov::oracle::binomial;
use streamcov::random_order::{run_random_order, RandomOrderConfig};
use streamcov::urn::{phase_bound_experiment, write_summary_csv, write_trials_csv};
use streamcov::{
    brute_force_opt, coverage, offline_greedy, quantized_greedy, CoverageState, Epsilon, Instance, SetRecord,
    ThresholdLadder, BRUTE_FORCE_CAP,
};

use crate::config::{Algorithm, RunConfig, UrnConfig};

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;
const SLACK: f64 = 1e-9;

/// Everything loaded once and shared by all trials.
struct Inputs {
    instance: Option<Instance>,
    stream: Option<FileStream>,
    opt: Option<usize>,
}

fn load(cfg: &RunConfig) -> Result<Inputs> {
    let mut instance = match &cfg.instance {
        Some(p) => Some(parse_instance(&read_text(p)?).with_context(|| format!("in {}", p.display()))?),
        None => None,
    };
    let n = cfg.n.or(instance.as_ref().map(Instance::n));
    let stream = match &cfg.stream {
        Some(p) => Some(FileStream::open(p, n).with_context(|| format!("in {}", p.display()))?),
        None => None,
    };
    if instance.is_none() {
        if let Some(p) = &cfg.stream {
            let k = cfg.k.context("a stream without an instance needs k")?;
            instance = Some(parse_stream_file(p, n)?.live_instance(k)?);
        }
    }
    if let (Some(inst), Some(k)) = (instance.as_mut(), cfg.k) {
        if k != inst.k() {
            *inst = inst.with_budget(k)?;
        }
    }
    let Some(inst) = &instance else {
        bail!("run needs an instance or a stream file");
    };
    let opt = match &cfg.certificate {
        Some(p) => {
            let cert = parse_certificate(&read_text(p)?).with_context(|| format!("in {}", p.display()))?;
            let got = coverage(inst, &cert.ids)?;
            if got != cert.value || cert.ids.len() > inst.k() {
                bail!("certificate claims {} with {} sets but covers {got}", cert.value, cert.ids.len());
            }
            Some(cert.value)
        }
        None if cfg.oracle.unwrap_or(true) && binomial(inst.m() as u64, inst.k() as u64) <= BRUTE_FORCE_CAP => {
            Some(brute_force_opt(inst, BRUTE_FORCE_CAP)?.value)
        }
        None => None,
    };
    Ok(Inputs { instance, stream, opt })
}

fn check_state(ledger: &mut MetricsLedger, state: &CoverageState, inst: &Instance) {
    if state.chosen().len() > inst.k() {
        ledger.fail(format!("chose {} sets with budget {}", state.chosen().len(), inst.k()));
    }
}

fn check_ratio(ledger: &mut MetricsLedger, floor: f64, what: &str) {
    if let (Some(opt), true) = (ledger.opt, ledger.passed) {
        if (ledger.coverage as f64) < floor * opt as f64 - SLACK {
            ledger.fail(format!("{what}: coverage {} below {floor:.4} x opt {opt}", ledger.coverage));
        }
    }
}

fn storage_violations(trace: &[IterationRecord]) -> usize {
    trace
        .iter()
        .filter(|r| r.over_budget())
        .count()
}

fn shuffled(inst: &Instance, rng: &mut ChaCha8Rng) -> Vec<SetRecord> {
    let mut sets = inst.sets().to_vec();
    sets.shuffle(rng);
    sets
}

fn guess_or_opt(cfg: &RunConfig, inputs: &Inputs) -> Result<u64> {
    cfg.guess
        .or(inputs.opt.map(|o| o as u64))
        .filter(|&v| v > 0)
        .context("needs a positive guess v or a known optimum")
}

fn run_trial(cfg: &RunConfig, alg: Algorithm, inputs: &Inputs, trial: usize, seed: u64) -> Result<MetricsLedger> {
    let inst = inputs.instance.as_ref().expect("loaded");
    let eps = cfg.epsilon.unwrap_or(Epsilon::new(1, 5)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let started = Instant::now();
    let mut ledger = match alg {
        Algorithm::OfflineGreedy => {
            let state = offline_greedy(inst);
            let mut l = MetricsLedger::new(alg.name());
            l.passes = 1;
            l.peak_stored_elements = inst.sets().iter().map(|s| s.len() as u64).sum();
            l.coverage = state.value();
            if !state.consistent_with(inst) {
                l.fail("coverage state disagrees with the instance");
            }
            check_state(&mut l, &state, inst);
            if let Some(o) = inputs.opt {
                l.set_opt(o);
            }
            check_ratio(&mut l, ONE_MINUS_INV_E, "greedy guarantee");
            l
        }
        Algorithm::Quantized => {
            let v = guess_or_opt(cfg, inputs)?;
            let ladder = ThresholdLadder::geometric(v as f64, inst.k(), eps.value())?;
            let out = quantized_greedy(&shuffled(inst, &mut rng), inst.k(), &ladder);
            let mut l = MetricsLedger::new(alg.name());
            l.passes = out.passes;
            l.peak_stored_elements = out.state.value() as u64;
            l.coverage = out.state.value();
            l.epsilon = Some(eps.to_string());
            l.v = Some(v);
            if !out.state.consistent_with(inst) {
                l.fail("coverage state disagrees with the instance");
            }
            check_state(&mut l, &out.state, inst);
            if let Some(o) = inputs.opt {
                l.set_opt(o);
                if 2 * v >= o as u64 && v <= o as u64 {
                    check_ratio(&mut l, ONE_MINUS_INV_E - eps.value(), "quantized guarantee");
                }
            }
            l
        }
        Algorithm::Dynamic => {
            let memory;
            let source: &dyn StreamSource = match &inputs.stream {
                Some(s) => s,
                None => {
                    memory = inst.insert_stream();
                    &memory
                }
            };
            let result = match cfg.guess {
                Some(v) => {
                    let mut d = DynamicConfig::new(inst.k(), eps, v, seed);
                    d.pass_cap = cfg.pass_cap;
                    d.delta = cfg.delta;
                    run_dynamic(source, &d).map(|o| (o.ledger, o.state, storage_violations(&o.trace)))
                }
                None => {
                    let opts = GuessOptions {
                        seed,
                        delta: cfg.delta,
                        pass_cap: cfg.pass_cap,
                        ..GuessOptions::default()
                    };
                    run_with_guesses(source, inst.k(), eps, &opts).map(|o| {
                        let bad = o.runs.iter().map(|r| storage_violations(&r.outcome.trace)).sum();
                        let state = o.best_run().outcome.state.clone();
                        (o.ledger, state, bad)
                    })
                }
            };
            match result {
                Ok((mut l, state, bad)) => {
                    match coverage(inst, state.chosen()) {
                        Ok(c) => l.coverage = c,
                        Err(e) => l.fail(format!("chose a set that is not live: {e}")),
                    }
                    check_state(&mut l, &state, inst);
                    if bad > 0 {
                        l.fail(format!("{bad} iterations over the storage bound"));
                    }
                    if let Some(o) = inputs.opt {
                        l.set_opt(o);
                    }
                    l
                }
                Err(e) => {
                    let mut l = MetricsLedger::new(alg.name());
                    l.k = inst.k();
                    l.epsilon = Some(eps.to_string());
                    l.fail(e.to_string());
                    l
                }
            }
        }
        Algorithm::RandomOrder => {
            let v = guess_or_opt(cfg, inputs)?;
            let mut ro = RandomOrderConfig::new(inst.k(), eps, v, rng.random());
            ro.alpha = cfg.alpha.unwrap_or(ro.alpha);
            ro.beta = cfg.beta.unwrap_or(ro.beta);
            let stream = shuffled(inst, &mut rng);
            match run_random_order(&stream, &ro) {
                Ok(out) => {
                    let mut l = out.ledger;
                    if out.sets_read != stream.len() {
                        l.fail(format!("read {} of {} sets", out.sets_read, stream.len()));
                    }
                    if out.peak_stored_elements > out.storage_cap {
                        l.fail("storage cap exceeded");
                    }
                    check_state(&mut l, &out.state, inst);
                    if let Some(o) = inputs.opt {
                        l.set_opt(o);
                        if l.coverage > o {
                            l.fail("coverage above the optimum");
                        }
                    }
                    l
                }
                Err(e) => {
                    let mut l = MetricsLedger::new(alg.name());
                    l.fail(e.to_string());
                    l
                }
            }
        }
        Algorithm::Urn => unreachable!("dispatched separately"),
    };
    ledger.trial = trial;
    ledger.seed = seed;
    ledger.k = inst.k();
    if ledger.epsilon.is_none() && alg != Algorithm::OfflineGreedy {
        ledger.epsilon = Some(eps.to_string());
    }
    ledger.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(ledger)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    })
}

/// Runs all trials; `Ok(false)` when any per-trial check failed.
pub fn run_experiment(cfg: &RunConfig) -> Result<bool> {
    let alg = cfg.algorithm.context("no algorithm given")?;
    if alg == Algorithm::Urn {
        let mut urn = cfg.urn.clone().unwrap_or_default();
        urn.seed = cfg.seed.or(urn.seed);
        return run_urn(&urn);
    }
    let inputs = load(cfg)?;
    let trials = cfg.trials.unwrap_or(1);
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        rows.push(run_trial(cfg, alg, &inputs, trial, seeds.random())?);
    }
    write_csv(sink(cfg.out.as_deref())?, &rows)?;
    let failed: Vec<&MetricsLedger> = rows.iter().filter(|r| !r.passed).collect();
    for r in &failed {
        eprintln!("trial {} failed: {}", r.trial, r.status);
    }
    Ok(failed.is_empty())
}

pub fn run_urn(urn: &UrnConfig) -> Result<bool> {
    let spec = urn.spec()?;
    let exp = phase_bound_experiment(&spec)?;
    write_trials_csv(sink(urn.out.as_deref())?, &exp.rows)?;
    match &urn.summary {
        Some(p) => write_summary_csv(sink(Some(p))?, &exp.summaries)?,
        None => {
            for s in &exp.summaries {
                eprintln!(
                    "{} m={} d={} {}: p90 {} phases, max {}, scale {:.2}",
                    s.process, s.m, s.d, s.adversary, s.p90_phases, s.max_phases, s.scale
                );
            }
        }
    }
    Ok(true)
}
