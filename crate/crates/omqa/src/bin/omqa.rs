//! Command-line driver. Results go to stdout, diagnostics to stderr.
//! Exit codes: 0 yes/success, 1 no, 2 unknown or budget exhausted,
//! 64 usage, 65 parse error.

use std::collections::BTreeSet;
use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use omqa::chase::{chase, certain_answer, Strategy, Verdict};
use omqa::core::{BoundFunction, Database, Ded, Name, Schema, SchemaPart, Ucq};
use omqa::diag::run_procedure1;
use omqa::hom::evaluate_epfo;
use omqa::locality::{
    check_local, close_ontology, enumerate_databases, rewrite, verify_rewriting, LocalityOutcome,
    Oracle, VerifyLine, VerifyReport,
};
use omqa::succgen::{chains_dot, figure1, full_bundle};
use omqa::syntax::{
    parse_bound, parse_bundle, parse_database, parse_program, parse_query, serialize_bundle,
    serialize_program, serialize_query,
};
use omqa::umodels::{universal_model_set, HittingMode};

const EXIT_YES: u8 = 0;
const EXIT_NO: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_PARSE: u8 = 65;

#[derive(Parser)]
#[command(name = "omqa", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format. `dot` is meaningful for chase trees and chains.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Chase firing budget.
    #[arg(long, global = true, default_value_t = 10_000)]
    budget: usize,
    /// Trigger selection strategy.
    #[arg(long, global = true, value_enum, default_value_t = StrategyArg::Restricted)]
    strategy: StrategyArg,
    /// Worker threads for fan-out over candidate databases (rewriting
    /// verification). Other subcommands run single-task regardless.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Restricted,
    SemiOblivious,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Restricted => Strategy::Restricted,
            StrategyArg::SemiOblivious => Strategy::SemiOblivious,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    InclusionMinimal,
    CardinalityMinimum,
}

#[derive(Subcommand)]
enum Command {
    /// Certain answer of a boolean UCQ over a database and a DED program.
    Answer {
        #[arg(long)]
        data: String,
        #[arg(long)]
        rules: String,
        #[arg(long)]
        query: String,
    },
    /// Run the branching chase and print the resulting branches.
    Chase {
        #[arg(long)]
        data: String,
        #[arg(long)]
        rules: String,
    },
    /// Rewrite a query into an existential sentence with inequalities.
    Rewrite {
        #[arg(long)]
        rules: String,
        #[arg(long)]
        query: String,
        #[arg(long)]
        bound: String,
        /// Comma-separated `Name/arity` overriding the derived data schema.
        #[arg(long)]
        data_relations: Option<String>,
        /// Omit variable-constant inequalities from the per-database
        /// sentences (the literal construction).
        #[arg(long)]
        strict_lambda: bool,
    },
    /// Rewrite, then compare against the oracle on every small database.
    VerifyRewriting {
        #[arg(long)]
        rules: String,
        #[arg(long)]
        query: String,
        #[arg(long)]
        bound: String,
        #[arg(long)]
        max_constants: usize,
        #[arg(long)]
        data_relations: Option<String>,
        #[arg(long)]
        strict_lambda: bool,
    },
    /// Search for a small sub-database deciding membership like the whole.
    CheckLocal {
        #[arg(long)]
        data: String,
        #[arg(long)]
        rules: String,
        #[arg(long)]
        query: String,
        #[arg(long)]
        bound: String,
    },
    /// Universal model set of a derivable-query list over a database.
    Umodels {
        #[arg(long)]
        data: String,
        /// File with one UCQ per line.
        #[arg(long)]
        queries: String,
        #[arg(long, value_enum, default_value_t = ModeArg::CardinalityMinimum)]
        mode: ModeArg,
    },
    /// Emit the generated successor-encoding DED program.
    GenSucc {
        /// Comma-separated `Name/arity` data relations.
        #[arg(long)]
        data_relations: String,
        /// Comma-separated `Name/arity` query relations.
        #[arg(long)]
        query_relations: String,
    },
    /// The worked three-constant chain-generation example.
    Figure1,
    /// Run the diagonal selection procedure over a list of theories.
    Diag {
        /// DED program files, one theory each, in enumeration order.
        #[arg(long, num_args = 1.., required = true)]
        theories: Vec<String>,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        db_bound: usize,
        #[arg(long)]
        data_relations: Option<String>,
    },
    /// Close a pair table under conjunctions, implications, and injective
    /// database homomorphisms.
    PoolClose {
        /// Multi-instance database bundle (the universe).
        #[arg(long)]
        universe: String,
        /// File with one UCQ per line (the pool).
        #[arg(long)]
        pool: String,
        /// File with `db-index query-index` lines (the starting pairs).
        #[arg(long)]
        pairs: String,
        #[arg(long, default_value_t = 4)]
        conj_cap: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("omqa: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn parse_failure(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_PARSE,
        message: message.to_string(),
    }
}

fn internal(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_UNKNOWN,
        message: message.to_string(),
    }
}

fn read(path: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))
}

fn load_database(path: &str) -> Result<Database, Failure> {
    parse_database(&read(path)?).map_err(|e| parse_failure(format!("{path}: {e}")))
}

fn load_program(path: &str) -> Result<Vec<Ded>, Failure> {
    parse_program(&read(path)?).map_err(|e| parse_failure(format!("{path}: {e}")))
}

fn load_query(path: &str) -> Result<Ucq, Failure> {
    parse_query(&read(path)?).map_err(|e| parse_failure(format!("{path}: {e}")))
}

fn load_bound(path: &str) -> Result<BoundFunction, Failure> {
    parse_bound(&read(path)?).map_err(|e| parse_failure(format!("{path}: {e}")))
}

/// One UCQ per non-empty, non-comment line.
fn load_query_list(path: &str) -> Result<Vec<Ucq>, Failure> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| parse_query(l).map_err(|e| parse_failure(format!("{path}: {e}"))))
        .collect()
}

fn parse_relation_list(spec: &str, part: SchemaPart, schema: &mut Schema) -> Result<(), Failure> {
    for entry in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, arity) = entry
            .trim()
            .split_once('/')
            .ok_or_else(|| usage(format!("bad relation spec {entry:?}; expected Name/arity")))?;
        let arity: usize = arity
            .parse()
            .map_err(|_| usage(format!("bad arity in {entry:?}")))?;
        schema
            .declare(name.trim(), arity, part)
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

/// The data schema of a program: relations that occur in rule bodies but
/// in no head are treated as data.
fn derive_data_schema(rules: &[Ded]) -> Schema {
    let mut heads: BTreeSet<Name> = BTreeSet::new();
    for r in rules {
        for h in &r.heads {
            for ha in &h.atoms {
                if let omqa::core::HeadAtom::Rel(a) = ha {
                    heads.insert(a.symbol.clone());
                }
            }
        }
    }
    let mut schema = Schema::new();
    for r in rules {
        for a in &r.body {
            if !heads.contains(&a.symbol) {
                let _ = schema.declare(a.symbol.clone(), a.args.len(), SchemaPart::Data);
            }
        }
    }
    schema
}

fn data_schema(rules: &[Ded], spec: &Option<String>) -> Result<Schema, Failure> {
    match spec {
        Some(s) => {
            let mut schema = Schema::new();
            parse_relation_list(s, SchemaPart::Data, &mut schema)?;
            Ok(schema)
        }
        None => Ok(derive_data_schema(rules)),
    }
}

fn verdict_exit(v: &Verdict) -> u8 {
    match v {
        Verdict::Yes => EXIT_YES,
        Verdict::No { .. } => EXIT_NO,
        Verdict::Unknown => EXIT_UNKNOWN,
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let strategy: Strategy = cli.strategy.into();
    match cli.command {
        Command::Answer { data, rules, query } => {
            let d = load_database(&data)?;
            let sigma = load_program(&rules)?;
            let q = load_query(&query)?;
            let verdict = certain_answer(&d, &sigma, &q, cli.budget, strategy)
                .map_err(|e| parse_failure(e))?;
            match cli.format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "verdict": verdict.to_string(),
                        "budget": cli.budget,
                    })
                ),
                _ => println!("{verdict}"),
            }
            Ok(verdict_exit(&verdict))
        }
        Command::Chase { data, rules } => {
            let d = load_database(&data)?;
            let sigma = load_program(&rules)?;
            let tree = chase(&d, &sigma, cli.budget, strategy).map_err(|e| parse_failure(e))?;
            match cli.format {
                Format::Dot => print!("{}", tree.to_dot()),
                Format::Json => {
                    let branches: Vec<_> = tree
                        .branches
                        .iter()
                        .map(|b| {
                            json!({
                                "id": b.id,
                                "status": format!("{:?}", b.status),
                                "facts": b.instance.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    println!(
                        "{}",
                        json!({
                            "branches": branches,
                            "firings": tree.firings,
                            "exhausted": tree.exhausted,
                        })
                    );
                }
                Format::Text => {
                    for b in &tree.branches {
                        println!("# branch {} {:?}", b.id, b.status);
                        print!("{}", b.instance);
                    }
                    println!("# firings {} exhausted {}", tree.firings, tree.exhausted);
                }
            }
            Ok(if tree.exhausted { EXIT_UNKNOWN } else { EXIT_YES })
        }
        Command::Rewrite {
            rules,
            query,
            bound,
            data_relations,
            strict_lambda,
        } => {
            let sigma = load_program(&rules)?;
            let q = load_query(&query)?;
            let l = load_bound(&bound)?;
            let schema = data_schema(&sigma, &data_relations)?;
            let oracle = Oracle::from_rules(sigma);
            let psi = rewrite(&oracle, &q, &l, &schema, cli.budget, strict_lambda)
                .map_err(|e| internal(e))?;
            match cli.format {
                Format::Json => println!("{}", json!({ "sentence": psi.to_string() })),
                _ => println!("{psi}"),
            }
            Ok(EXIT_YES)
        }
        Command::VerifyRewriting {
            rules,
            query,
            bound,
            max_constants,
            data_relations,
            strict_lambda,
        } => {
            let sigma = load_program(&rules)?;
            let q = load_query(&query)?;
            let l = load_bound(&bound)?;
            let schema = data_schema(&sigma, &data_relations)?;
            let oracle = Oracle::from_rules(sigma);
            let psi = rewrite(&oracle, &q, &l, &schema, cli.budget, strict_lambda)
                .map_err(|e| internal(e))?;
            let report = if cli.parallel > 1 {
                parallel_verify(&psi, &oracle, &q, max_constants, &schema, cli.budget)?
            } else {
                verify_rewriting(&psi, &oracle, &q, max_constants, &schema, cli.budget)
                    .map_err(|e| internal(e))?
            };
            match cli.format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "sentence": psi.to_string(),
                        "databases": report.lines.len(),
                        "mismatches": report.mismatches,
                    })
                ),
                _ => print!("{}", report.render()),
            }
            Ok(if report.mismatches == 0 { EXIT_YES } else { EXIT_NO })
        }
        Command::CheckLocal {
            data,
            rules,
            query,
            bound,
        } => {
            let d = load_database(&data)?;
            let sigma = load_program(&rules)?;
            let q = load_query(&query)?;
            let l = load_bound(&bound)?;
            let oracle = Oracle::from_rules(sigma);
            let outcome = check_local(&oracle, &d, &q, &l, cli.budget).map_err(|e| internal(e))?;
            let (line, code) = match &outcome {
                LocalityOutcome::Witness(a) if a.is_empty() => {
                    ("witness: (empty)".to_string(), EXIT_YES)
                }
                LocalityOutcome::Witness(a) => (
                    format!("witness: {}", a.iter().cloned().collect::<Vec<_>>().join(" ")),
                    EXIT_YES,
                ),
                LocalityOutcome::NotFound => ("not-found".to_string(), EXIT_NO),
                LocalityOutcome::Unknown => ("unknown".to_string(), EXIT_UNKNOWN),
            };
            match cli.format {
                Format::Json => println!("{}", json!({ "outcome": line })),
                _ => println!("{line}"),
            }
            Ok(code)
        }
        Command::Umodels { data, queries, mode } => {
            let d = load_database(&data)?;
            let lambda = load_query_list(&queries)?;
            let mode = match mode {
                ModeArg::InclusionMinimal => HittingMode::InclusionMinimal,
                ModeArg::CardinalityMinimum => HittingMode::CardinalityMinimum,
            };
            let models = universal_model_set(&lambda, &d, mode).map_err(|e| internal(e))?;
            match cli.format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "models": models
                            .iter()
                            .map(|m| m.iter().map(|f| f.to_string()).collect::<Vec<_>>())
                            .collect::<Vec<_>>(),
                    })
                ),
                _ => print!("{}", serialize_bundle(&models)),
            }
            Ok(EXIT_YES)
        }
        Command::GenSucc {
            data_relations,
            query_relations,
        } => {
            let mut schema_d = Schema::new();
            parse_relation_list(&data_relations, SchemaPart::Data, &mut schema_d)?;
            let mut schema_q = Schema::new();
            parse_relation_list(&query_relations, SchemaPart::Query, &mut schema_q)?;
            let bundle = full_bundle(&schema_d, &schema_q).map_err(|e| usage(e.to_string()))?;
            print!("{}", serialize_program(&bundle.rules));
            Ok(EXIT_YES)
        }
        Command::Figure1 => {
            let (instance, chains) = figure1().map_err(|e| internal(e))?;
            match cli.format {
                Format::Dot => print!("{}", chains_dot(&instance)),
                Format::Json => println!(
                    "{}",
                    json!({
                        "chains": chains
                            .iter()
                            .map(|ch| json!({
                                "name": ch.name.to_string(),
                                "elements": ch.elements,
                            }))
                            .collect::<Vec<_>>(),
                    })
                ),
                Format::Text => {
                    for ch in &chains {
                        println!("{}: {}", ch.name, ch.elements.join(" < "));
                    }
                }
            }
            Ok(EXIT_YES)
        }
        Command::Diag {
            theories,
            steps,
            db_bound,
            data_relations,
        } => {
            let programs: Vec<Vec<Ded>> = theories
                .iter()
                .map(|p| load_program(p))
                .collect::<Result<_, _>>()?;
            let all: Vec<Ded> = programs.iter().flatten().cloned().collect();
            let schema = data_schema(&all, &data_relations)?;
            match run_procedure1(&programs, &schema, steps, db_bound, cli.budget) {
                Ok(prefix) => {
                    print!("{}", prefix.render());
                    Ok(EXIT_YES)
                }
                Err(e) => Err(internal(e)),
            }
        }
        Command::PoolClose {
            universe,
            pool,
            pairs,
            conj_cap,
        } => {
            let universe = parse_bundle(&read(&universe)?)
                .map_err(|e| parse_failure(e))?
                .into_iter()
                .map(|i| Database::new(i).map_err(|e| parse_failure(e)))
                .collect::<Result<Vec<_>, _>>()?;
            let pool = load_query_list(&pool)?;
            let mut start: BTreeSet<(usize, usize)> = BTreeSet::new();
            for line in read(&pairs)?
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            {
                let mut parts = line.split_whitespace();
                let parse_idx = |s: Option<&str>, max: usize| -> Result<usize, Failure> {
                    let n: usize = s
                        .ok_or_else(|| parse_failure(format!("bad pair line {line:?}")))?
                        .parse()
                        .map_err(|_| parse_failure(format!("bad pair line {line:?}")))?;
                    if n >= max {
                        return Err(parse_failure(format!("index {n} out of range")));
                    }
                    Ok(n)
                };
                let d = parse_idx(parts.next(), universe.len())?;
                let q = parse_idx(parts.next(), pool.len())?;
                start.insert((d, q));
            }
            let closed =
                close_ontology(&start, &universe, &pool, conj_cap).map_err(|e| internal(e))?;
            match cli.format {
                Format::Json => println!(
                    "{}",
                    json!({
                        "pairs": closed.iter().collect::<Vec<_>>(),
                        "queries": pool.iter().map(serialize_query).collect::<Vec<_>>(),
                    })
                ),
                _ => {
                    for (d, q) in &closed {
                        println!("{d} {q}");
                    }
                }
            }
            Ok(EXIT_YES)
        }
    }
}

/// Fan the rewriting check out over candidate databases; merge in
/// enumeration order so the report is byte-identical to the sequential one.
fn parallel_verify(
    psi: &omqa::hom::EpfoSentence,
    oracle: &Oracle,
    q: &Ucq,
    max_constants: usize,
    schema: &Schema,
    budget: usize,
) -> Result<VerifyReport, Failure> {
    let dbs = enumerate_databases(schema, &q.constants(), max_constants);
    let lines: Vec<VerifyLine> = dbs
        .par_iter()
        .map(|d| {
            let verdict = oracle.member(d, q, budget).map_err(|e| e.to_string())?;
            let holds = evaluate_epfo(psi, d);
            let mismatch = match verdict {
                Verdict::Yes => !holds,
                Verdict::No { .. } => holds,
                Verdict::Unknown => true,
            };
            Ok(VerifyLine {
                database: d.to_string(),
                oracle: verdict,
                sentence_holds: holds,
                mismatch,
            })
        })
        .collect::<Result<_, String>>()
        .map_err(internal)?;
    let mismatches = lines.iter().filter(|l| l.mismatch).count();
    Ok(VerifyReport { lines, mismatches })
}
