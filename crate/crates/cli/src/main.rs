// SPDX-License-Identifier: Apache-2.0

use clap::{Args, Parser, Subcommand};
use lderiv::harness::{exit_code, run, Command, RunConfig};
use lderiv::{Error, Result};
use num_complex::Complex64;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "lderiv", version, about = "Experiments on quadratic Dirichlet L-functions and the real zeros of L'")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Comma-separated list of x values.
    #[arg(long, global = true)]
    x: Option<String>,
    /// auto, hyp, or a positive number.
    #[arg(long, global = true)]
    nu: Option<String>,
    #[arg(long, global = true)]
    sample: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,
    /// Cache root; defaults to $LDERIV_CACHE_DIR.
    #[arg(long = "cache-dir", global = true)]
    cache_dir: Option<PathBuf>,
    /// Recompute about 1% of cache hits and compare.
    #[arg(long = "verify-cache", global = true)]
    verify_cache: bool,
    /// Exit with status 2 when any result is indeterminate.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write D(x) as CSV.
    Family,
    /// Evaluate L(s, chi_d).
    Eval {
        #[arg(long)]
        d: u64,
        /// `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        #[arg(long)]
        deriv: bool,
        #[arg(long)]
        oracle: bool,
    },
    /// Count real zeros of L' for sampled d.
    Zeros {
        /// auto (1/2 + nu/log x) or a number.
        #[arg(long = "sigma-min", default_value = "auto")]
        sigma_min: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lowest zero on the critical line and the zero-free disc check.
    GammaMin,
    /// Real zeros of Fekete polynomials and the Mellin identities.
    Fekete {
        #[arg(long, value_delimiter = ',')]
        d: Vec<u64>,
        #[arg(long = "count-zeros")]
        count_zeros: bool,
        #[arg(long = "check-identity")]
        check_identity: bool,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Distance between the family distribution of -L'/L(z) and the random model.
    Discrepancy,
    /// Character-sum moments, large-sieve ratios and moments near 1/2.
    Moments,
    /// Statistics of the number of real zeros of L'.
    RdStats,
    /// Plot data from a zero-count JSONL file.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the invariant suite.
    Verify,
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.apply(k, v)?;
    }
    let flags = [
        ("x_list", common.x.clone()),
        ("nu", common.nu.clone()),
        ("sample_size", common.sample.map(|v| v.to_string())),
        ("seed", common.seed.map(|v| v.to_string())),
        ("threads", common.threads.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.apply(k, &v)?;
        }
    }
    if let Some(p) = &common.out_dir {
        cfg.out_dir = p.clone();
    }
    if let Some(p) = &common.cache_dir {
        cfg.cache_dir = Some(p.clone());
    }
    cfg.verify_cache |= common.verify_cache;
    cfg.strict |= common.strict;
    Ok(cfg)
}

fn parse_s(text: &str) -> Result<Complex64> {
    let bad = || Error::Usage(format!("--s expects re or re,im, got {text:?}"));
    let mut parts = text.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad()));
    let re = parts.next().ok_or_else(bad)??;
    let im = parts.next().transpose()?.unwrap_or(0.0);
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn command(cmd: &Cmd) -> Result<Command> {
    Ok(match cmd {
        Cmd::Family => Command::Family,
        Cmd::Eval { d, s, deriv, oracle } => Command::Eval { d: *d, s: parse_s(s)?, deriv: *deriv, oracle: *oracle },
        Cmd::Zeros { sigma_min, out } => {
            let sigma_min = match sigma_min.as_str() {
                "auto" => None,
                t => Some(t.parse().map_err(|_| Error::Usage(format!("--sigma-min expects auto or a number, got {t:?}")))?),
            };
            Command::Zeros { sigma_min, out: out.clone() }
        }
        Cmd::GammaMin => Command::GammaMin,
        Cmd::Fekete { d, count_zeros, check_identity, s } => {
            if *check_identity && s.is_none() {
                return Err(Error::Usage("--check-identity needs --s".into()));
            }
            Command::Fekete { d: d.clone(), count_zeros: *count_zeros, identity_s: if *check_identity { *s } else { None } }
        }
        Cmd::Discrepancy => Command::Discrepancy,
        Cmd::Moments => Command::Moments,
        Cmd::RdStats => Command::RdStats,
        Cmd::Report { input } => Command::Report { input: input.clone() },
        Cmd::Verify => Command::Verify,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let prepared = config(&cli.common).and_then(|cfg| command(&cli.cmd).map(|cmd| (cfg, cmd)));
    let (cfg, cmd) = match prepared {
        Ok(v) => v,
        Err(e) => {
            eprintln!("lderiv: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = run(&cmd, &cfg);
    match &result {
        Ok(out) => {
            print!("{}", out.stdout);
            for f in &out.files {
                log::info!("wrote {}", f.display());
            }
            if out.indeterminate > 0 {
                eprintln!("lderiv: {} indeterminate result(s){}", out.indeterminate, if cfg.strict { " (strict)" } else { "" });
            }
        }
        Err(e) => eprintln!("lderiv {}: {e}", cmd.name()),
    }
    ExitCode::from(exit_code(&result, cfg.strict) as u8)
}
