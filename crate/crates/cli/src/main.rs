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

mod config;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use streamcov::generate::{generate, GeneratorProfile, ProfileKind};
use streamcov::io::{
    parse_certificate, parse_instance, parse_stream_file, read_text, write_certificate, write_instance, write_stream,
};
use streamcov::{coverage, Epsilon};

use config::{Algorithm, RunConfig, UrnConfig};

/// Streaming maximum coverage experiments.
#[derive(Parser)]
#[command(name = "streamcov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance, a dynamic stream and, when known, a certificate.
    Gen(GenArgs),
    /// Run an algorithm over several trials and write a metrics CSV.
    Run(RunArgs),
    /// Simulate the urn processes and write per-trial phase counts.
    Urn(UrnArgs),
    /// Check instance, stream and certificate files.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenArgs {
    /// disjoint, overlapping:<density>, planted:<cover> or ladder.
    #[arg(long)]
    profile: ProfileKind,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    /// Fraction of inserted sets deleted again.
    #[arg(long, default_value_t = 0.0)]
    churn: f64,
    #[arg(long, env = "STREAMCOV_SEED", default_value_t = 0)]
    seed: u64,
    /// Directory for instance.txt, stream.txt and certificate.txt.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    stream: Option<PathBuf>,
    #[arg(long)]
    certificate: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epsilon: Option<Epsilon>,
    #[arg(long, conflicts_with = "guess_ladder")]
    guess: Option<u64>,
    /// Run every guess v = 1, 2, 4, ... and keep the best (the default).
    #[arg(long)]
    guess_ladder: bool,
    #[arg(long)]
    pass_cap: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "STREAMCOV_SEED")]
    seed: Option<u64>,
    /// Skip the brute-force optimum.
    #[arg(long)]
    no_oracle: bool,
    /// Metrics CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UrnArgs {
    /// single or cascade.
    #[arg(long, default_value = "single")]
    process: String,
    /// Urns in the cascade.
    #[arg(long, default_value_t = 4)]
    t: usize,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    sizes: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// drawn-only, random-fraction:<f>, max-damage, gold-fraction[:<f>],
    /// threshold-mimic or promote-everything.
    #[arg(long = "adversary", value_delimiter = ',', default_value = "drawn-only")]
    adversaries: Vec<String>,
    /// Draws per phase; defaults to ceil(12 / gamma).
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, env = "STREAMCOV_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-(size, adversary) 90th percentiles; printed to stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    stream: Option<PathBuf>,
    #[arg(long, requires = "instance")]
    certificate: Option<PathBuf>,
    /// Universe size for the stream; taken from the instance when given.
    #[arg(long)]
    n: Option<u32>,
}

fn gen(a: GenArgs) -> Result<bool> {
    let profile = GeneratorProfile::new(a.profile, a.n, a.m, a.k, a.seed).with_churn(a.churn);
    let g = generate(&profile)?;
    std::fs::create_dir_all(&a.out_dir)?;
    std::fs::write(a.out_dir.join("instance.txt"), write_instance(&g.instance))?;
    std::fs::write(a.out_dir.join("stream.txt"), write_stream(&g.stream))?;
    if let Some(c) = &g.certificate {
        std::fs::write(a.out_dir.join("certificate.txt"), write_certificate(c))?;
    }
    println!(
        "{} live sets, {} tokens{}",
        g.instance.m(),
        g.stream.len(),
        g.certificate.map_or(String::new(), |c| format!(", opt {}", c.value))
    );
    Ok(true)
}

fn run(a: RunArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $( if a.$f.is_some() { cfg.$f = a.$f; } )* };
    }
    over!(algorithm, instance, stream, certificate, n, k, epsilon, guess, pass_cap, delta, alpha, beta, trials, seed, out);
    if a.guess_ladder {
        cfg.guess = None;
    }
    if a.no_oracle {
        cfg.oracle = Some(false);
    }
    experiment::run_experiment(&cfg)
}

fn urn(a: UrnArgs) -> Result<bool> {
    experiment::run_urn(&UrnConfig {
        process: Some(a.process),
        t: Some(a.t),
        sizes: Some(a.sizes),
        trials: Some(a.trials),
        adversaries: Some(a.adversaries),
        d: a.d,
        seed: Some(a.seed),
        out: a.out,
        summary: a.summary,
    })
}

fn validate(a: ValidateArgs) -> Result<bool> {
    let mut ok = true;
    let mut n = a.n;
    if let Some(p) = &a.instance {
        let inst = parse_instance(&read_text(p)?).with_context(|| format!("in {}", p.display()))?;
        println!("{}: n={} m={} k={}", p.display(), inst.n(), inst.m(), inst.k());
        n = n.or(Some(inst.n()));
        if let Some(cp) = &a.certificate {
            let c = parse_certificate(&read_text(cp)?).with_context(|| format!("in {}", cp.display()))?;
            let got = coverage(&inst, &c.ids)?;
            if got == c.value && c.ids.len() <= inst.k() {
                println!("{}: opt {} verified", cp.display(), c.value);
            } else {
                println!("{}: claims {} with {} sets, covers {got}", cp.display(), c.value, c.ids.len());
                ok = false;
            }
        }
    }
    if let Some(p) = &a.stream {
        let s = parse_stream_file(p, n).with_context(|| format!("in {}", p.display()))?;
        println!("{}: {} tokens, {} live sets", p.display(), s.len(), s.live_sets().len());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Urn(a) => urn(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
