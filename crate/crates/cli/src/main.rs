//! Command-line front end: sieve queries, shattering checks and
//! constructions, VC-dimension bounds and certified search, single-shot
//! selection and boosting runs, and the convergence experiment harness.
//!
//! Results go to stdout (or `--output`) in the requested format; everything
//! diagnostic goes to stderr. Exit status: 0 on success, 1 on domain errors,
//! 2 on usage errors.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;

use primevc::adaboost::{run_adaboost_with, BoostOptions};
use primevc::erm::{HypothesisClass, Sample};
use primevc::experiments::{
    run_erm_convergence, run_weight_convergence, summarize_erm, summarize_weights, write_csv_to,
    ExperimentConfig,
};
use primevc::shattering::{
    certified_vc_progression_with, check_shatter, construct_shatter_set, progression_vc_bounds,
    validate_certificate_prime_structure, ShatterOutcome, VcSearchOptions,
};
use primevc::{even_count, Error, Hypothesis, PrimeTable};

#[derive(Parser)]
#[command(name = "primevc", version, about = "Prime-divisibility rules: shattering, selection, boosting, experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputOpts {
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Artifact encoding.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassKind {
    /// Prime rules `p:<prime>`.
    Primes,
    /// Divisor rules `d:<divisor>`.
    Divisors,
    /// Progression rules `dk:<divisor>:<k>`.
    Progression,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LearnerClass {
    Prime,
    All,
}

impl From<LearnerClass> for HypothesisClass {
    fn from(c: LearnerClass) -> Self {
        match c {
            LearnerClass::Prime => HypothesisClass::PrimeDivisors,
            LearnerClass::All => HypothesisClass::AllDivisors,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentMode {
    Erm,
    Boost,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sieve and report prime counts (optionally factorizations).
    Sieve {
        /// Inclusive sieve bound, ≥ 2.
        #[arg(long)]
        limit: u64,
        /// Values to factorize against the sieve (repeatable).
        #[arg(long)]
        factor: Vec<u64>,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Construct a set shattered by the rules of the first 2^ell primes,
    /// check it, and validate its divisibility structure.
    ShatterConstruct {
        /// Set size, 1 ..= 8.
        #[arg(long)]
        ell: u32,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Check whether a class shatters a candidate set.
    ShatterCheck {
        /// Comma-separated candidate values (arbitrary precision).
        #[arg(long, value_delimiter = ',', required = true)]
        set: Vec<String>,
        /// Rule family to enumerate.
        #[arg(long, value_enum)]
        class: ClassKind,
        /// Largest prime for `--class primes`.
        #[arg(long)]
        max_prime: Option<u64>,
        /// Largest divisor for `--class divisors|progression`.
        #[arg(long)]
        max_divisor: Option<u64>,
        /// Progression length for `--class progression`.
        #[arg(long)]
        k: Option<u64>,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Closed-form VC-dimension bounds for the progression class of length k.
    VcBounds {
        #[arg(long)]
        k: u64,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Certified VC-dimension search for the progression class of length k.
    VcCertify {
        #[arg(long)]
        k: u64,
        /// Candidate sets draw elements from [2, domain-bound].
        #[arg(long)]
        domain_bound: u64,
        /// Restrict divisors to primes.
        #[arg(long)]
        prime_only: bool,
        /// Candidate-set budget before the search gives up.
        #[arg(long)]
        budget: Option<u64>,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Select the minimal risk-minimizing divisor for an explicit sample.
    Erm {
        /// Comma-separated instances, each ≥ 2.
        #[arg(long, value_delimiter = ',', required = true)]
        sample: Vec<u64>,
        /// Comma-separated weights summing to 1 (uniform when omitted).
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        /// Candidate class for the selection.
        #[arg(long, value_enum, default_value = "all")]
        class: LearnerClass,
        /// Sieve bound (defaults to the largest instance).
        #[arg(long)]
        sieve_limit: Option<u64>,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Run boosting on an explicit sample and emit the round trace.
    Boost {
        #[arg(long, value_delimiter = ',', required = true)]
        sample: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        /// Number of boosting rounds.
        #[arg(long)]
        rounds: u32,
        /// Weak-learner candidate class.
        #[arg(long, value_enum, default_value = "prime")]
        class: LearnerClass,
        #[arg(long)]
        sieve_limit: Option<u64>,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Run the convergence experiments from a JSON config and emit records.
    Experiment {
        /// JSON config file; `seed` defaults to 0, all other fields required.
        #[arg(long)]
        config: PathBuf,
        /// Which experiment(s) to run.
        #[arg(long, value_enum, default_value = "both")]
        mode: ExperimentMode,
        /// Worker threads (0 = library default).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        out: OutputOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

enum Artifact {
    Json(serde_json::Value),
    Csv(String),
}

fn emit(out: &OutputOpts, artifact: Artifact) -> Result<(), Error> {
    let text = match artifact {
        Artifact::Json(v) => {
            let mut s = serde_json::to_string_pretty(&v).expect("serializable artifact");
            s.push('\n');
            s
        }
        Artifact::Csv(s) => s,
    };
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Key/value rows for artifacts whose natural shape is a small record.
fn kv_csv(rows: &[(&str, String)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

fn certificate_csv(cert: &primevc::shattering::ShatterCertificate) -> String {
    let mut s = String::from("kind,key,value\n");
    for (i, c) in cert.candidates().iter().enumerate() {
        let _ = writeln!(s, "candidate,{},{c}", i + 1);
    }
    for code in 0..cert.dichotomy_count() {
        let labels: String = cert
            .labels_of_code(code)
            .iter()
            .map(|b| char::from(b'0' + b))
            .collect();
        let _ = writeln!(s, "witness,{labels},{}", cert.witness_by_code(code));
    }
    s
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Sieve { limit, factor, out } => {
            let table = PrimeTable::build(limit)?;
            let pi = table.prime_count(limit)?;
            let evens = even_count(limit)?;
            let mut factorizations = serde_json::Map::new();
            let mut csv_rows = vec![
                ("limit", limit.to_string()),
                ("prime_count", pi.to_string()),
                ("even_count", evens.to_string()),
            ];
            for x in factor {
                let rendered = table
                    .factorize(x)?
                    .iter()
                    .map(|(p, e)| {
                        if *e == 1 {
                            p.to_string()
                        } else {
                            format!("{p}^{e}")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("*");
                csv_rows.push(("factor", format!("{x}={rendered}")));
                factorizations.insert(x.to_string(), serde_json::json!(rendered));
            }
            let artifact = match out.format {
                Format::Json => Artifact::Json(serde_json::json!({
                    "limit": limit,
                    "prime_count": pi,
                    "even_count": evens,
                    "factorizations": factorizations,
                })),
                Format::Csv => Artifact::Csv(kv_csv(&csv_rows)),
            };
            emit(&out, artifact)
        }

        Command::ShatterConstruct { ell, out } => {
            // Sieve enough to hold the first 2^ell primes: p_j < j(ln j + ln ln j)
            // for j ≥ 6; 2000 covers every allowed ell ≤ 8 (p_256 = 1619).
            let table = PrimeTable::build(2_000)?;
            let set = construct_shatter_set(ell, &table)?;
            let class: Vec<Hypothesis> = table
                .primes()
                .iter()
                .take(1usize << ell)
                .map(|&p| Hypothesis::Prime(p))
                .collect();
            let outcome = check_shatter(&set, &class)?;
            let cert = outcome
                .into_certificate()
                .expect("constructed sets shatter against their own prime class");
            let report = validate_certificate_prime_structure(&cert, &table)?;
            let artifact = match out.format {
                Format::Json => Artifact::Json(serde_json::json!({
                    "ell": ell,
                    "certificate": cert,
                    "structure": report,
                })),
                Format::Csv => Artifact::Csv(certificate_csv(&cert)),
            };
            emit(&out, artifact)
        }

        Command::ShatterCheck {
            set,
            class,
            max_prime,
            max_divisor,
            k,
            out,
        } => {
            let candidates: Vec<BigUint> = set
                .iter()
                .map(|s| {
                    BigUint::from_str(s.trim())
                        .map_err(|_| Error::Domain(format!("cannot parse candidate {s:?}")))
                })
                .collect::<Result<_, _>>()?;
            let hypotheses = match class {
                ClassKind::Primes => {
                    let bound = max_prime
                        .ok_or_else(|| Error::Config("--class primes needs --max-prime".into()))?;
                    let table = PrimeTable::build(bound.max(2))?;
                    table
                        .primes()
                        .iter()
                        .map(|&p| Hypothesis::Prime(p))
                        .collect::<Vec<_>>()
                }
                ClassKind::Divisors => {
                    let bound = max_divisor.ok_or_else(|| {
                        Error::Config("--class divisors needs --max-divisor".into())
                    })?;
                    (2..=bound).map(Hypothesis::Divisor).collect()
                }
                ClassKind::Progression => {
                    let bound = max_divisor.ok_or_else(|| {
                        Error::Config("--class progression needs --max-divisor".into())
                    })?;
                    let k = k
                        .ok_or_else(|| Error::Config("--class progression needs --k".into()))?;
                    (2..=bound)
                        .map(|d| Hypothesis::Progression { d, k })
                        .collect()
                }
            };
            let outcome = check_shatter(&candidates, &hypotheses)?;
            let artifact = match (&outcome, out.format) {
                (ShatterOutcome::Shattered(cert), Format::Json) => {
                    Artifact::Json(serde_json::json!({
                        "shattered": true,
                        "candidates": cert.candidates().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                        "witnesses": serde_json::to_value(cert).expect("serializable")["witnesses"].clone(),
                    }))
                }
                (ShatterOutcome::Shattered(cert), Format::Csv) => {
                    Artifact::Csv(certificate_csv(cert))
                }
                (ShatterOutcome::Missing { dichotomy }, Format::Json) => {
                    let bits: String = dichotomy.iter().map(|b| char::from(b'0' + b)).collect();
                    Artifact::Json(serde_json::json!({
                        "shattered": false,
                        "missing": bits,
                    }))
                }
                (ShatterOutcome::Missing { dichotomy }, Format::Csv) => {
                    let bits: String = dichotomy.iter().map(|b| char::from(b'0' + b)).collect();
                    Artifact::Csv(kv_csv(&[
                        ("shattered", "false".to_string()),
                        ("missing", bits),
                    ]))
                }
            };
            emit(&out, artifact)
        }

        Command::VcBounds { k, out } => {
            let bounds = progression_vc_bounds(k)?;
            let artifact = match out.format {
                Format::Json => Artifact::Json(serde_json::json!({
                    "lower": bounds.lower,
                    "upper": bounds.upper,
                })),
                Format::Csv => Artifact::Csv(format!(
                    "lower,upper\n{},{}\n",
                    bounds.lower, bounds.upper
                )),
            };
            emit(&out, artifact)
        }

        Command::VcCertify {
            k,
            domain_bound,
            prime_only,
            budget,
            out,
        } => {
            let table = PrimeTable::build(domain_bound.max(2))?;
            let opts = budget
                .map(|set_budget| VcSearchOptions { set_budget })
                .unwrap_or_default();
            let search = certified_vc_progression_with(k, domain_bound, &table, prime_only, opts)?;
            let status = serde_json::to_value(search.status).expect("serializable status");
            let artifact = match out.format {
                Format::Json => Artifact::Json(serde_json::json!({
                    "k": search.k,
                    "prime_only": search.prime_only,
                    "domain_bound": search.domain_bound,
                    "lower": search.lower,
                    "upper": search.upper,
                    "dimension": search.dimension(),
                    "status": status,
                    "certificate": search.certificate,
                })),
                Format::Csv => Artifact::Csv(kv_csv(&[
                    ("k", search.k.to_string()),
                    ("prime_only", search.prime_only.to_string()),
                    ("lower", search.lower.to_string()),
                    ("upper", search.upper.to_string()),
                    (
                        "dimension",
                        search
                            .dimension()
                            .map(|d| d.to_string())
                            .unwrap_or_default(),
                    ),
                    ("status", status.as_str().unwrap_or("").to_string()),
                ])),
            };
            emit(&out, artifact)
        }

        Command::Erm {
            sample,
            weights,
            class,
            sieve_limit,
            out,
        } => {
            let (s, table) = build_sample(&sample, &weights, sieve_limit)?;
            let d = s.erm_select_in_class(class.into(), &table)?;
            let coverage = s.coverage(d)?;
            let risk = s.weighted_risk(&Hypothesis::Divisor(d))?;
            let artifact = match out.format {
                Format::Json => Artifact::Json(serde_json::json!({
                    "d_s": d,
                    "coverage": coverage,
                    "risk": risk,
                })),
                Format::Csv => Artifact::Csv(format!(
                    "d_s,coverage,risk\n{d},{coverage},{risk}\n"
                )),
            };
            emit(&out, artifact)
        }

        Command::Boost {
            sample,
            weights,
            rounds,
            class,
            sieve_limit,
            out,
        } => {
            if !weights.is_empty() {
                // Boosting starts from the uniform distribution; reject
                // rather than silently ignore.
                return Err(Error::Config(
                    "boost always starts uniform; drop --weights".into(),
                ));
            }
            let (s, table) = build_sample(&sample, &[], sieve_limit)?;
            let opts = BoostOptions {
                class: class.into(),
                ..BoostOptions::default()
            };
            let trace = run_adaboost_with(&s, rounds, &table, opts)?;
            let artifact = match out.format {
                Format::Json => Artifact::Json(serde_json::json!({
                    "rounds": trace.rounds,
                    "status": trace.status,
                })),
                Format::Csv => {
                    let n = s.instances().iter().copied().max().unwrap_or(2);
                    let mut buf = Vec::new();
                    trace
                        .write_csv(0, n, s.len(), &mut buf)
                        .expect("in-memory write");
                    Artifact::Csv(String::from_utf8(buf).expect("utf8 csv"))
                }
            };
            emit(&out, artifact)
        }

        Command::Experiment {
            config,
            mode,
            workers,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            eprintln!(
                "config: {}",
                serde_json::to_string(&cfg).expect("serializable config")
            );
            let run_all = || -> Result<_, Error> {
                let table = PrimeTable::build(cfg.max_n())?;
                let mut records = Vec::new();
                if matches!(mode, ExperimentMode::Erm | ExperimentMode::Both) {
                    let erm = run_erm_convergence(&cfg, &table)?;
                    for s in summarize_erm(&erm, &table)? {
                        eprintln!(
                            "erm n={} m={} mean_L={:.6} freq_ds_ne_2={:.4} hoeffding={:.6}",
                            s.n, s.m, s.mean_gen_error, s.freq_ds_ne_2, s.hoeffding
                        );
                    }
                    records.extend(erm);
                }
                if matches!(mode, ExperimentMode::Boost | ExperimentMode::Both) {
                    let boost = run_weight_convergence(&cfg, &table)?;
                    for s in summarize_weights(&boost) {
                        eprintln!(
                            "boost n={} m={} median_|W1|={:.6} median_max_|W|={:.6}",
                            s.n, s.m, s.median_abs_w1, s.median_max_abs_w
                        );
                    }
                    records.extend(boost);
                }
                Ok(records)
            };
            let records = if workers > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
                    .install(run_all)?
            } else {
                run_all()?
            };
            let artifact = match out.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_csv_to(&records, &mut buf).expect("in-memory write");
                    Artifact::Csv(String::from_utf8(buf).expect("utf8 csv"))
                }
                Format::Json => {
                    Artifact::Json(serde_json::to_value(&records).expect("serializable records"))
                }
            };
            emit(&out, artifact)
        }
    }
}

fn build_sample(
    instances: &[u64],
    weights: &[f64],
    sieve_limit: Option<u64>,
) -> Result<(Sample<f64>, PrimeTable), Error> {
    let max_x = instances
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::Domain("sample must hold at least one instance".into()))?;
    let limit = sieve_limit.unwrap_or(max_x).max(2);
    let table = PrimeTable::build(limit)?;
    let s = if weights.is_empty() {
        Sample::uniform(instances.to_vec(), &table)?
    } else {
        Sample::new(instances.to_vec(), weights.to_vec(), &table)?
    };
    Ok((s, table))
}
