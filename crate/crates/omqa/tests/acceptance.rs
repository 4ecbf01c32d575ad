//! Acceptance gate: the ten headline criteria, one test and one printed
//! pass line each. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use std::collections::BTreeSet;
use std::time::Instant;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omqa::chase::{certain_answer, chase, is_model_of, Strategy, Verdict};
use omqa::core::{conj, query_size, BoundFunction, Database, Instance, Name, Schema, SchemaPart, Term, Ucq};
use omqa::diag::{check_prefix, path_query, phi_query, run_procedure1};
use omqa::hom::{evaluate_epfo, evaluate_ucq, find_homomorphism, ucq_contains};
use omqa::locality::{
    check_local, close_ontology, enumerate_databases, rewrite, verify_rewriting, LocalityOutcome,
    Oracle, TableOracle,
};
use omqa::succgen::{chains_for_order, expected_chain_sets, figure1};
use omqa::syntax::{parse_database, parse_program, parse_query};
use omqa::umodels::{certain_via_umodels, universal_model_set, HittingMode};

fn pass(n: usize, what: &str) {
    println!("PASS criterion {n}: {what}");
}

#[test]
fn criterion_01_three_constant_chain_golden() {
    let start = Instant::now();
    let (_, chains) = figure1().expect("chase saturates");
    let got: BTreeSet<Vec<Name>> = chains.iter().map(|c| c.elements.clone()).collect();
    let want: BTreeSet<Vec<Name>> = [
        vec!["c1"],
        vec!["c2"],
        vec!["c3"],
        vec!["c2", "c1"],
        vec!["c3", "c1"],
        vec!["c3", "c2"],
        vec!["c3", "c2", "c1"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    assert_eq!(chains.len(), 7);
    assert_eq!(got, want);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(1, "three ordered constants yield exactly the 7 expected chains");
}

#[test]
fn criterion_02_chain_count_law() {
    let start = Instant::now();
    let names = ["c1", "c2", "c3", "c4", "c5"];
    for n in 1..=5 {
        let order = &names[..n];
        let chains = chains_for_order(order).expect("chase saturates");
        assert_eq!(chains.len(), (1 << n) - 1, "at n = {n}");
        let got: BTreeSet<Vec<Name>> = chains.iter().map(|c| c.elements.clone()).collect();
        assert_eq!(got, expected_chain_sets(order), "at n = {n}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(2, "chain count is 2^n - 1 for n = 1..5, bijective with non-empty subsets");
}

fn sigma1() -> Vec<omqa::core::Ded> {
    parse_program("P(X) -> Q(X).").unwrap()
}

fn sigma2() -> Vec<omqa::core::Ded> {
    parse_program("P(X) -> Q(X) | S(X).\nS(X) -> Q(X).").unwrap()
}

fn schema_p() -> Schema {
    let mut s = Schema::new();
    s.declare("P", 1, SchemaPart::Data).unwrap();
    s
}

fn query_pool() -> Vec<Ucq> {
    [
        "exists X: Q(X)",
        "exists X: S(X)",
        "Q(a)",
        "S(a)",
        "exists X: Q(X), S(X)",
        "Q(a) | S(a)",
        "exists X: Q(X) | exists X: S(X)",
        "exists X,Y: Q(X), S(Y)",
        "Q(a), S(a)",
        "exists X: Q(X), S(a)",
    ]
    .iter()
    .map(|s| parse_query(s).unwrap())
    .collect()
}

#[test]
fn criterion_03_rewriting_round_trip() {
    let start = Instant::now();
    let l = BoundFunction::affine(1, 2).unwrap();
    let schema = schema_p();
    for rules in [sigma1(), sigma2()] {
        let oracle = Oracle::from_rules(rules);
        for q in query_pool() {
            let psi = rewrite(&oracle, &q, &l, &schema, 10_000, false).expect("rewrite resolves");
            let report =
                verify_rewriting(&psi, &oracle, &q, 4, &schema, 10_000).expect("verify resolves");
            assert_eq!(report.mismatches, 0, "query {q}: {}", report.render());
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(3, "rewriting matches the chase oracle on all databases with <= 4 constants");
}

/// Twelve ground queries over Q/1 and S/1 with constants a and b, closed
/// under implication and under conjunction up to combined size 2.
fn ground_pool() -> Vec<Ucq> {
    [
        "Q(a)",
        "S(a)",
        "Q(b)",
        "S(b)",
        "Q(a) | S(a)",
        "Q(b) | S(b)",
        "Q(a), S(a)",
        "Q(a), Q(b)",
        "Q(a), S(b)",
        "S(a), Q(b)",
        "S(a), S(b)",
        "Q(b), S(b)",
    ]
    .iter()
    .map(|s| parse_query(s).unwrap())
    .collect()
}

/// Consequence of ground UCQs: every choice of one disjunct per member
/// yields a fact set; all of them must satisfy q. Exact for ground queries
/// and independent of the hitting-set construction.
fn ground_consequence(lambda: &[Ucq], q: &Ucq) -> bool {
    let disjunct_facts: Vec<Vec<Instance>> = lambda
        .iter()
        .map(|u| u.disjuncts().iter().map(|cq| cq.canonical_db()).collect())
        .collect();
    if disjunct_facts.is_empty() {
        return lambda.is_empty() && minimal_model_satisfies(&[], q);
    }
    disjunct_facts
        .iter()
        .map(|m| m.iter())
        .multi_cartesian_product()
        .all(|choice| {
            let mut model = Instance::new();
            for part in choice {
                model = model.union(part);
            }
            evaluate_ucq(&model, q)
        })
}

fn minimal_model_satisfies(parts: &[Instance], q: &Ucq) -> bool {
    let mut model = Instance::new();
    for part in parts {
        model = model.union(part);
    }
    evaluate_ucq(&model, q)
}

#[test]
fn criterion_04_universal_model_equivalence() {
    let start = Instant::now();
    let pool = ground_pool();
    let d = parse_database("P(a). P(b).").unwrap();
    let mut checked = 0usize;
    for size in 0..=4usize {
        for lambda in pool.iter().cloned().combinations(size) {
            for mode in [HittingMode::InclusionMinimal, HittingMode::CardinalityMinimum] {
                let models = universal_model_set(&lambda, &d, mode).expect("nonempty disjuncts");
                for q in &pool {
                    let via_models = certain_via_umodels(&models, q);
                    let via_oracle = ground_consequence(&lambda, q);
                    assert_eq!(
                        via_models, via_oracle,
                        "mode {mode:?}, lambda {lambda:?}, q {q}"
                    );
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    pass(
        4,
        &format!("universal-model answering matches the consequence oracle ({checked} checks, both modes)"),
    );
}

/// Exhaustive homomorphism search: every function from the source terms to
/// the target terms, fixing `fixed` constants, optionally injective.
fn brute_force_hom(
    source: &Instance,
    target: &Instance,
    fixed: &BTreeSet<Name>,
    injective: bool,
) -> bool {
    let src: Vec<Term> = source.terms().into_iter().collect();
    let tgt: Vec<Term> = target.terms().into_iter().collect();
    if src.is_empty() {
        return true;
    }
    if tgt.is_empty() {
        return false;
    }
    let choices: Vec<Vec<&Term>> = src
        .iter()
        .map(|t| match t {
            Term::Const(c) if fixed.contains(c) => vec![t],
            _ => tgt.iter().collect(),
        })
        .collect();
    'maps: for assignment in choices.iter().map(|c| c.iter()).multi_cartesian_product() {
        if injective {
            let images: BTreeSet<&Term> = assignment.iter().map(|t| **t).collect();
            if images.len() != assignment.len() {
                continue;
            }
        }
        let map: std::collections::BTreeMap<&Term, &Term> =
            src.iter().zip(assignment.iter().map(|t| **t)).collect();
        for fact in source.iter() {
            let image =
                omqa::core::Atom::new(fact.symbol.clone(), fact.args.iter().map(|a| map[a].clone()).collect());
            if !target.contains(&image) {
                continue 'maps;
            }
        }
        return true;
    }
    false
}

#[test]
fn criterion_05_path_query_containment_table() {
    for m in 1..=6usize {
        for n in 1..=6usize {
            let expected = n <= m;
            assert_eq!(
                ucq_contains(&path_query(m), &path_query(n)),
                expected,
                "contains({m}, {n})"
            );
            // Independent check: containment is a homomorphism from the
            // canonical database of the right side into the left side.
            let left = path_query(m).disjuncts()[0].canonical_db();
            let right = path_query(n).disjuncts()[0].canonical_db();
            assert_eq!(
                brute_force_hom(&right, &left, &BTreeSet::new(), false),
                expected,
                "oracle({m}, {n})"
            );
        }
    }
    pass(5, "path-query containment equals (n <= m) for all m, n in 1..6, oracle-confirmed");
}

fn random_instance(rng: &mut ChaCha8Rng, max_constants: usize) -> Instance {
    let constants: Vec<String> = (0..rng.gen_range(1..=max_constants))
        .map(|i| format!("c{i}"))
        .collect();
    let n_facts = rng.gen_range(0..=4);
    let mut out = Instance::new();
    for _ in 0..n_facts {
        let fact = if rng.gen_bool(0.5) {
            omqa::core::atom(
                "P",
                &[Term::Const(constants[rng.gen_range(0..constants.len())].clone())],
            )
        } else {
            omqa::core::atom(
                "R",
                &[
                    Term::Const(constants[rng.gen_range(0..constants.len())].clone()),
                    Term::Const(constants[rng.gen_range(0..constants.len())].clone()),
                ],
            )
        };
        out.insert(fact).unwrap();
    }
    out
}

#[test]
fn criterion_06_homomorphism_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a06);
    for case in 0..1000 {
        let i = random_instance(&mut rng, 5);
        let j = random_instance(&mut rng, 5);
        let fixed: BTreeSet<Name> = i
            .adom()
            .into_iter()
            .filter(|_| rng.gen_bool(0.3))
            .collect();
        for injective in [false, true] {
            let found = find_homomorphism(&i, &j, &fixed, injective).is_some();
            let oracle = brute_force_hom(&i, &j, &fixed, injective);
            assert_eq!(found, oracle, "case {case}, injective {injective}\n{i}\n-->\n{j}");
        }
    }
    pass(6, "homomorphism search agrees with exhaustive enumeration on 1000 seeded pairs");
}

fn random_program(rng: &mut ChaCha8Rng) -> Vec<omqa::core::Ded> {
    let body_atoms = ["P(X)", "P(Y)", "R(X,Y)", "R(Y,X)", "R(X,X)"];
    let n_rules = rng.gen_range(1..=4);
    let mut text = String::new();
    for _ in 0..n_rules {
        let n_body = rng.gen_range(1..=2);
        let body: Vec<&str> = (0..n_body)
            .map(|_| body_atoms[rng.gen_range(0..body_atoms.len())])
            .collect();
        let body_vars: BTreeSet<char> = body
            .iter()
            .flat_map(|a| a.chars())
            .filter(|c| matches!(c, 'X' | 'Y'))
            .collect();
        let pick_var = |rng: &mut ChaCha8Rng| {
            let vars: Vec<&char> = body_vars.iter().collect();
            *vars[rng.gen_range(0..vars.len())]
        };
        let head = if rng.gen_bool(0.1) {
            "false".to_string()
        } else {
            let n_disj = rng.gen_range(1..=2);
            (0..n_disj)
                .map(|_| match rng.gen_range(0..4) {
                    0 => format!("Q({})", pick_var(rng)),
                    1 => {
                        let v = pick_var(rng);
                        format!("exists Z: R({v},Z)")
                    }
                    2 if body_vars.len() == 2 => "X = Y".to_string(),
                    _ => format!("P({})", pick_var(rng)),
                })
                .join(" | ")
        };
        text.push_str(&format!("{} -> {}.\n", body.join(", "), head));
    }
    parse_program(&text).expect("generated rules are well-formed")
}

#[test]
fn criterion_07_chase_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a07);
    let mut saturated_branches = 0usize;
    for case in 0..20 {
        let rules = random_program(&mut rng);
        let d = Database::new(random_instance(&mut rng, 3)).unwrap();
        let tree = chase(&d, &rules, 2_000, Strategy::Restricted).expect("schemas consistent");
        for branch in tree.saturated_consistent() {
            saturated_branches += 1;
            for (ri, rule) in rules.iter().enumerate() {
                assert!(
                    is_model_of(&branch.instance, rule),
                    "case {case}: branch {} violates rule {ri}",
                    branch.id
                );
            }
        }
    }
    assert!(saturated_branches > 0, "suite produced no saturated branches");
    pass(
        7,
        &format!("all {saturated_branches} saturated branches across 20 seeded programs satisfy every rule"),
    );
}

#[test]
fn criterion_08_closure_axiom_validation() {
    // Two table oracles built by closing seed pairs; both must validate.
    let universe = vec![
        Database::empty(),
        parse_database("Q(a).").unwrap(),
        parse_database("S(a).").unwrap(),
        parse_database("Q(a). S(a).").unwrap(),
        parse_database("Q(a). Q(b).").unwrap(),
    ];
    let pool: Vec<Ucq> = ["Q(a)", "S(a)", "Q(a) | S(a)", "Q(a), S(a)"]
        .iter()
        .map(|s| parse_query(s).unwrap())
        .collect();
    let seeds: Vec<BTreeSet<(usize, usize)>> = vec![
        [(1, 0)].into(),
        [(1, 0), (2, 1)].into(),
        [(3, 3)].into(),
    ];
    let mut validated = 0usize;
    for seed in &seeds {
        let closed = close_ontology(seed, &universe, &pool, 2).expect("pool closed under conj");
        let table = TableOracle {
            universe: universe.clone(),
            pool: pool.clone(),
            pairs: closed.clone(),
            conj_cap: 2,
        };
        table.validate().expect("closed table passes the axioms");
        validated += 1;
        // Corrupt each pair in turn. Removal breaks an axiom exactly when
        // some remaining pair still forces the removed one; re-closing the
        // remainder is the independent oracle for that.
        let mut rejected = 0usize;
        for &pair in &closed {
            let mut pairs = closed.clone();
            pairs.remove(&pair);
            let still_closed =
                close_ontology(&pairs, &universe, &pool, 2).expect("pool stays closed") == pairs;
            let bad = TableOracle {
                universe: universe.clone(),
                pool: pool.clone(),
                pairs,
                conj_cap: 2,
            };
            if still_closed {
                bad.validate().expect("independent pair may be absent");
            } else {
                assert!(bad.validate().is_err(), "removing {pair:?} went undetected");
                rejected += 1;
            }
        }
        assert!(rejected > 0, "corruption sweep never exercised a rejection");
        // A pair whose query constants are outside the database is rejected.
        let mut pairs = closed.clone();
        pairs.insert((0, 0));
        let bad = TableOracle {
            universe: universe.clone(),
            pool: pool.clone(),
            pairs,
            conj_cap: 2,
        };
        assert!(bad.validate().is_err());
    }
    pass(
        8,
        &format!("{validated} closed tables validate; every single-pair corruption is rejected"),
    );
}

#[test]
fn criterion_09_selection_procedure_and_cardinality_sentences() {
    let mut schema = Schema::new();
    schema.declare("E", 2, SchemaPart::Data).unwrap();
    schema.declare("R", 2, SchemaPart::Query).unwrap();
    // Two-theory example: both admit a one-constant witness at every step.
    let two = vec![
        parse_program("E(X,Y) -> R(X,Y).").unwrap(),
        parse_program("E(X,X) -> R(X,X).").unwrap(),
    ];
    let prefix = run_procedure1(&two, &schema, 2, 3, 5_000).expect("procedure completes");
    assert_eq!(prefix.n_values, vec![1, 1]);
    assert!(prefix.n_values.windows(2).all(|w| w[0] <= w[1]));
    assert!(check_prefix(&prefix, &two, &schema, 5_000).unwrap());

    // A longer prefix for the sentence checks.
    let four: Vec<Vec<omqa::core::Ded>> = (0..4)
        .map(|_| parse_program("E(X,Y) -> R(X,Y).").unwrap())
        .collect();
    let prefix = run_procedure1(&four, &schema, 4, 3, 5_000).expect("procedure completes");
    assert!(check_prefix(&prefix, &four, &schema, 5_000).unwrap());

    // Cardinality-sentence laws over the path-query pool, checked
    // semantically on databases with 0..=8 constants.
    let witness_dbs: Vec<Database> = (0..=8usize)
        .map(|k| {
            let mut i = Instance::new();
            for c in 0..k {
                i.insert(omqa::core::atom("P", &[Term::Const(format!("w{c}"))]))
                    .unwrap();
            }
            Database::new(i).unwrap()
        })
        .collect();
    let pool: Vec<Ucq> = (1..=4).map(path_query).collect();
    let mut checks = 0usize;
    for p in &pool {
        for p2 in &pool {
            let phi_p = phi_query(p, &prefix).unwrap();
            let phi_p2 = phi_query(p2, &prefix).unwrap();
            let both = conj(p, p2);
            let phi_both = phi_query(&both, &prefix).unwrap();
            for d in &witness_dbs {
                if ucq_contains(p, p2) {
                    // Entailment transfers to the cardinality sentences.
                    assert!(
                        !evaluate_epfo(&phi_p, d) || evaluate_epfo(&phi_p2, d),
                        "monotonicity fails on {p} |= {p2} at {} constants",
                        d.adom().len()
                    );
                }
                assert_eq!(
                    evaluate_epfo(&phi_both, d),
                    evaluate_epfo(&phi_p, d) && evaluate_epfo(&phi_p2, d),
                    "conjunction law fails on {p}, {p2} at {} constants",
                    d.adom().len()
                );
                checks += 1;
            }
        }
    }
    pass(
        9,
        &format!("two-theory run gives N = (1,1); sentence laws hold ({checks} evaluations)"),
    );
}

#[test]
fn criterion_10_locality_sanity() {
    let l = BoundFunction::affine(1, 2).unwrap();
    let schema = schema_p();
    let mut checked = 0usize;
    for rules in [sigma1(), sigma2()] {
        let oracle = Oracle::from_rules(rules);
        for q in query_pool() {
            for d in enumerate_databases(&schema, &q.constants(), 5) {
                let adom = d.adom();
                if !q.constants().iter().all(|c| adom.contains(c)) {
                    continue;
                }
                let verdict = oracle.member(&d, &q, 10_000).unwrap();
                let outcome = check_local(&oracle, &d, &q, &l, 10_000).unwrap();
                match verdict {
                    Verdict::No { .. } => {
                        assert_eq!(
                            outcome,
                            LocalityOutcome::Witness(BTreeSet::new()),
                            "negative member must have the empty witness ({q} on {d})"
                        );
                    }
                    Verdict::Yes => match outcome {
                        LocalityOutcome::Witness(a) => {
                            assert!(
                                a.len() <= l.eval(query_size(&q)),
                                "witness too large for {q} on {d}"
                            );
                            assert_eq!(
                                certain_answer(
                                    &d.restrict(&a),
                                    match &oracle {
                                        Oracle::Chase { rules, .. } => rules,
                                        _ => unreachable!(),
                                    },
                                    &q,
                                    10_000,
                                    Strategy::Restricted
                                )
                                .unwrap(),
                                Verdict::Yes,
                                "witness does not reproduce membership"
                            );
                        }
                        other => panic!("expected a witness for {q} on {d}, got {other:?}"),
                    },
                    Verdict::Unknown => panic!("oracle exhausted on {q} on {d}"),
                }
                checked += 1;
            }
        }
    }
    pass(
        10,
        &format!("witness discipline holds on {checked} database-query pairs across both rule suites"),
    );
}
