use std::fmt::Debug;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value as Json};

use qgtype_core::bicrossed::{classify_pair, search_lambda};
use qgtype_core::classifier::{classify, evidence_rows};
use qgtype_core::haar::{MeasureKind, SetExpr};
use qgtype_core::matched_pair::verify_identities;
use qgtype_core::padic::PadicNumber;
use qgtype_core::rational;
use qgtype_core::rules::ListRule;
use qgtype_core::spec::ItpfiSpec;
use qgtype_core::subset::PrimeSubset;

mod config;
mod expr;

use config::{Format, RunConfig, PRECISION_ENV};

#[derive(Parser)]
#[command(name = "qgtype", version, about = "p-adic corners, ITPFI eigenvalue lists and factor types")]
struct Cli {
    /// JSON config file (precision, classifier, truncation, format, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// p-adic precision in digits; defaults to $QGTYPE_PRECISION or 32.
    #[arg(long, global = true)]
    precision: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an expression over Q_p, e.g. `1/3 + [p=5 v=1 digits=2]`.
    Padic {
        expr: String,
        #[arg(long)]
        prime: Option<u64>,
    },
    /// Haar measure of a compact open set: `measure 'ball(1,1)' mult --prime 5`.
    Measure {
        set: String,
        /// add, mult, mu or nu.
        kind: String,
        /// Prime as `p=5`; alternative to --prime.
        at: Option<String>,
        #[arg(long)]
        prime: Option<u64>,
    },
    /// Matched-pair identities.
    Action {
        #[command(subcommand)]
        command: ActionCommand,
    },
    /// Per-prime eigenvalue lists.
    Eigenlist {
        #[command(subcommand)]
        command: EigenlistCommand,
    },
    /// Classify an ITPFI spec given as JSON.
    Classify {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Types of the quantum group and its dual over a prime family.
    Pair {
        /// all_primes, none, explicit:2,3,5, ap:a:m, poly:d, squares, lacunary, ratio_pairs:lambda[:q_min[:tol]].
        #[arg(long)]
        subset: String,
    },
    /// Search a prime family whose type III ratio estimate is lambda.
    Search {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 4)]
        budget: usize,
    },
    /// Per-prime table of top eigenvalues and series terms.
    Report {
        #[arg(long, default_value = "all_primes")]
        subset: String,
        #[arg(long, default_value = "corner-units")]
        rule: String,
        /// Number of rows; defaults to 32.
        #[arg(long)]
        primes: Option<usize>,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Subcommand)]
enum ActionCommand {
    Verify {
        #[arg(long)]
        prime: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum EigenlistCommand {
    /// `eigenlist gen --rule corner-units p=3`.
    Gen {
        /// corner-units, corner-dual, corner-ls, boca:beta, powers:lambda, uniform:k, point-mass.
        #[arg(long)]
        rule: String,
        at: Option<String>,
        #[arg(long)]
        prime: Option<u64>,
        #[arg(long, default_value_t = 8)]
        levels: usize,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
}

enum Failure {
    Usage(String),
    Domain { name: String, message: String },
}

fn domain<E: Debug + std::fmt::Display>(e: E) -> Failure {
    let debug = format!("{e:?}");
    let name = debug.split(|c: char| !(c.is_alphanumeric() || c == '_')).next().unwrap_or("Error").to_string();
    Failure::Domain { name, message: e.to_string() }
}

fn named(name: &str, message: impl ToString) -> Failure {
    Failure::Domain { name: name.into(), message: message.to_string() }
}

type Outcome = Result<String, Failure>;

fn pretty(v: &Json) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

fn prime_arg(flag: Option<u64>, at: Option<&str>) -> Result<u64, Failure> {
    match (flag, at) {
        (Some(p), None) => Ok(p),
        (None, Some(text)) => text
            .strip_prefix("p=")
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| Failure::Usage(format!("expected p=<prime>, got {text}"))),
        (Some(_), Some(_)) => Err(Failure::Usage("give the prime once".into())),
        (None, None) => Err(Failure::Usage("missing prime (--prime P or p=P)".into())),
    }
}

fn run_padic(cfg: &RunConfig, text: &str, prime: Option<u64>) -> Outcome {
    let x: PadicNumber = expr::evaluate(text, prime, cfg.precision).map_err(domain)?;
    Ok(pretty(&json!({
        "prime": x.prime(),
        "precision": x.precision(),
        "value": x.to_string(),
        "valuation": x.valuation(),
        "norm": rational::format_rational(&x.norm()),
        "truncation": rational::format_rational(&x.to_rational()),
    })))
}

fn run_measure(set: &str, kind: &str, p: u64) -> Outcome {
    let expr: SetExpr = set.parse().map_err(domain)?;
    let kind: MeasureKind = kind.parse().map_err(domain)?;
    let value = expr.instantiate(p).map_err(domain)?.measure(kind).map_err(domain)?;
    Ok(pretty(&json!({
        "set": expr.to_string(),
        "kind": format!("{kind:?}").to_uppercase(),
        "prime": p,
        "measure": rational::format_rational(&value),
    })))
}

fn run_verify(cfg: &RunConfig, p: u64, samples: usize, seed: Option<u64>) -> Outcome {
    let r = verify_identities(p, samples, seed.unwrap_or(cfg.seed), cfg.precision).map_err(domain)?;
    let report = json!({
        "prime": r.prime,
        "samples": r.samples,
        "precision": cfg.precision.digits(),
        "singular": r.singular,
        "failures": {
            "reconstruct": r.reconstruct_failures,
            "cocycle": r.cocycle_failures,
            "action": r.action_failures,
            "factorize": r.factorize_failures,
            "selfdual": r.selfdual_failures,
        },
        "passed": r.all_passed(),
    });
    if r.all_passed() {
        Ok(pretty(&report))
    } else {
        Err(named("IdentityFailure", report))
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(domain)?;
    for row in rows {
        w.write_record(&row).map_err(domain)?;
    }
    let bytes = w.into_inner().map_err(|e| named("Csv", e))?;
    String::from_utf8(bytes).map_err(domain)
}

fn run_eigenlist(rule: &str, p: u64, levels: usize, format: Format) -> Outcome {
    let rule = ListRule::from_cli_name(rule).map_err(domain)?;
    let list = rule.list_at(p).map_err(domain)?;
    let top = list.levels(levels);
    match format {
        Format::Json => Ok(pretty(&json!({
            "rule": rule.to_json(),
            "prime": p,
            "list": list.to_json(),
            "mass": list.mass().to_json(),
            "levels": top.iter().map(|e| json!({"value": e.value.to_json(), "multiplicity": e.mult})).collect::<Vec<_>>(),
        }))),
        Format::Csv => {
            let rows = top
                .iter()
                .enumerate()
                .map(|(n, e)| vec![n.to_string(), e.value.to_text(), e.mult.to_string(), e.mass().to_text()])
                .collect();
            csv_text(&["n", "value", "multiplicity", "mass"], rows)
        }
    }
}

fn run_classify(cfg: &RunConfig, path: &PathBuf) -> Outcome {
    let text = std::fs::read_to_string(path).map_err(|e| named("Io", format!("{}: {e}", path.display())))?;
    let mut spec = ItpfiSpec::parse(&text).map_err(|e| named(e.name(), &e))?;
    if let Some(t) = cfg.truncation {
        spec.truncation = t;
    }
    let c = classify(&spec, &cfg.params).map_err(|e| named(e.name(), &e))?;
    let mut out = c.to_json();
    out["spec"] = spec.to_json();
    Ok(pretty(&out))
}

fn subset_arg(text: &str) -> Result<PrimeSubset, Failure> {
    text.parse().map_err(domain)
}

fn run_pair(cfg: &RunConfig, subset: &str) -> Outcome {
    let s = subset_arg(subset)?;
    let report = classify_pair(&s, &cfg.params).map_err(|e| named(e.name(), &e))?;
    Ok(pretty(&report.to_json()))
}

fn run_search(cfg: &RunConfig, lambda: f64, budget: usize) -> Outcome {
    let r = search_lambda(lambda, budget, &cfg.params).map_err(|e| named(e.name(), &e))?;
    Ok(pretty(&json!({
        "target": lambda,
        "attempts": r.attempts,
        "subset": r.subset.to_json(),
        "report": r.report.to_json(),
    })))
}

fn run_report(cfg: &RunConfig, subset: &str, rule: &str, primes: Option<usize>, format: Format) -> Outcome {
    let s = subset_arg(subset)?;
    let rule = ListRule::from_cli_name(rule).map_err(domain)?;
    let mut spec = ItpfiSpec::new(s, rule);
    let mut params = cfg.params.clone();
    let mut t = cfg.truncation.unwrap_or(spec.truncation);
    t.primes = primes.unwrap_or(32);
    params.truncation = Some(t);
    spec.truncation = t;
    let rows = evidence_rows(&spec, &params).map_err(|e| named(e.name(), &e))?;
    const TOP: usize = 3;
    match format {
        Format::Json => Ok(pretty(&json!({
            "rule": spec.rule.to_json(),
            "subset": spec.subset.to_json(),
            "rows": rows.iter().map(|r| json!({
                "primes": r.primes,
                "top": r.levels.iter().take(TOP).map(|&(v, m)| json!({"value": v, "multiplicity": m})).collect::<Vec<_>>(),
                "type_three_term": r.three_term,
                "type_one_term": r.deficit,
            })).collect::<Vec<_>>(),
        }))),
        Format::Csv => {
            let mut header = vec!["primes".to_string()];
            for i in 1..=TOP {
                header.push(format!("lambda_{i}"));
                header.push(format!("mult_{i}"));
            }
            header.push("type_three_term".into());
            header.push("type_one_term".into());
            let body = rows
                .iter()
                .map(|r| {
                    let mut row = vec![r.primes.iter().map(u64::to_string).collect::<Vec<_>>().join(";")];
                    for i in 0..TOP {
                        match r.levels.get(i) {
                            Some(&(v, m)) => {
                                row.push(v.to_string());
                                row.push(m.to_string());
                            }
                            None => row.extend([String::new(), String::new()]),
                        }
                    }
                    row.push(r.three_term.to_string());
                    row.push(r.deficit.to_string());
                    row
                })
                .collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            csv_text(&header, body)
        }
    }
}

fn pick(json_flag: bool, csv_flag: bool, cfg: Option<Format>, default: Format) -> Format {
    if json_flag {
        Format::Json
    } else if csv_flag {
        Format::Csv
    } else {
        cfg.unwrap_or(default)
    }
}

fn run(cli: Cli) -> Outcome {
    let env = std::env::var(PRECISION_ENV).ok();
    let cfg = RunConfig::load(cli.config.as_deref(), env, cli.precision).map_err(Failure::Usage)?;
    match cli.command {
        Command::Padic { expr, prime } => run_padic(&cfg, &expr, prime),
        Command::Measure { set, kind, at, prime } => run_measure(&set, &kind, prime_arg(prime, at.as_deref())?),
        Command::Action { command: ActionCommand::Verify { prime, samples, seed } } => run_verify(&cfg, prime, samples, seed),
        Command::Eigenlist { command: EigenlistCommand::Gen { rule, at, prime, levels, json, csv } } => {
            let p = prime_arg(prime, at.as_deref())?;
            run_eigenlist(&rule, p, levels, pick(json, csv, cfg.format, Format::Csv))
        }
        Command::Classify { spec } => run_classify(&cfg, &spec),
        Command::Pair { subset } => run_pair(&cfg, &subset),
        Command::Search { lambda, budget } => run_search(&cfg, lambda, budget),
        Command::Report { subset, rule, primes, csv } => {
            run_report(&cfg, &subset, &rule, primes, pick(false, csv, cfg.format, Format::Json))
        }
    }
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not an error for a report writer
    let _ = out.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = out.write_all(b"\n");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            emit(&text);
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain { name, message }) => {
            emit(&pretty(&json!({"error": name, "message": message})));
            ExitCode::from(1)
        }
    }
}
