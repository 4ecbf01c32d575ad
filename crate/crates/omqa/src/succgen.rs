//! Generators for the successor-encoding DED rulesets: active-domain
//! projection and linear order, partial successor relations, the numeric
//! relations built on top of them, and the model-builder rules that copy
//! chosen query disjuncts. Plus chain extraction from chased instances.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::core::{
    atom, v, Atom, Ded, HeadAtom, HeadDisjunct, Instance, Name, Schema, SchemaPart, Term, Ucq,
};

/// Auxiliary relation names reserved by the generators.
pub const AUX_NAMES: &[&str] = &[
    "AD", "Less", "Link", "Next", "First", "Last", "Partial", "Zero", "DMax", "Succ", "LT", "TC",
    "RT", "Accept", "True", "Copy", "UCQ", "Union", "CQ", "QVar",
];

pub const HASQ_PREFIX: &str = "HasQ_";

#[derive(Debug, Error)]
pub enum SuccError {
    #[error("user schema declares reserved auxiliary relation {0}")]
    AuxCollision(Name),
    #[error("malformed chain: {0}")]
    MalformedChain(String),
}

fn check_no_collision(schema: &Schema) -> Result<(), SuccError> {
    for (name, _, _) in schema.relations() {
        if AUX_NAMES.contains(&name.as_str()) || name.starts_with(HASQ_PREFIX) {
            return Err(SuccError::AuxCollision(name.clone()));
        }
    }
    Ok(())
}

fn head(atoms: Vec<HeadAtom>) -> HeadDisjunct {
    HeadDisjunct { atoms }
}

fn rel(a: Atom) -> HeadAtom {
    HeadAtom::Rel(a)
}

fn tgd(body: Vec<Atom>, atoms: Vec<Atom>) -> Ded {
    Ded {
        body,
        heads: vec![head(atoms.into_iter().map(rel).collect())],
    }
}

/// The linear-order axioms over AD: totality (3-way disjunction),
/// transitivity, and irreflexivity via falsum.
pub fn order_axioms() -> Vec<Ded> {
    vec![
        Ded {
            body: vec![atom("AD", &[v("x")]), atom("AD", &[v("y")])],
            heads: vec![
                head(vec![rel(atom("Less", &[v("x"), v("y")]))]),
                head(vec![HeadAtom::Eq(v("x"), v("y"))]),
                head(vec![rel(atom("Less", &[v("y"), v("x")]))]),
            ],
        },
        tgd(
            vec![
                atom("Less", &[v("x"), v("y")]),
                atom("Less", &[v("y"), v("z")]),
            ],
            vec![atom("Less", &[v("x"), v("z")])],
        ),
        Ded {
            body: vec![atom("Less", &[v("x"), v("x")])],
            heads: vec![],
        },
    ]
}

/// AD-projection rules (one per D-relation argument position) followed by
/// the order axioms.
pub fn order_rules(schema_d: &Schema) -> Result<Vec<Ded>, SuccError> {
    check_no_collision(schema_d)?;
    let mut rules = Vec::new();
    for (name, arity) in schema_d.part_relations(SchemaPart::Data) {
        let args: Vec<Term> = (0..arity).map(|i| v(&format!("x{i}"))).collect();
        for i in 0..arity {
            rules.push(tgd(
                vec![Atom::new(name.clone(), args.clone())],
                vec![atom("AD", &[args[i].clone()])],
            ));
        }
    }
    rules.extend(order_axioms());
    Ok(rules)
}

/// Partial successor generation: singleton chains, open tails, and the two
/// downward-extension rules (closing with First or continuing Partial).
pub fn successor_rules() -> Vec<Ded> {
    vec![
        tgd(
            vec![atom("AD", &[v("x")])],
            vec![
                atom("Link", &[v("x"), v("v")]),
                atom("Last", &[v("v")]),
                atom("First", &[v("v")]),
            ],
        ),
        tgd(
            vec![atom("AD", &[v("x")])],
            vec![
                atom("Link", &[v("x"), v("v")]),
                atom("Last", &[v("v")]),
                atom("Partial", &[v("v")]),
            ],
        ),
        tgd(
            vec![
                atom("Less", &[v("x"), v("y")]),
                atom("Link", &[v("y"), v("v")]),
                atom("Partial", &[v("v")]),
            ],
            vec![
                atom("Link", &[v("x"), v("u")]),
                atom("Next", &[v("u"), v("v")]),
                atom("First", &[v("u")]),
            ],
        ),
        tgd(
            vec![
                atom("Less", &[v("x"), v("y")]),
                atom("Link", &[v("y"), v("v")]),
                atom("Partial", &[v("v")]),
            ],
            vec![
                atom("Link", &[v("x"), v("u")]),
                atom("Next", &[v("u"), v("v")]),
                atom("Partial", &[v("u")]),
            ],
        ),
    ]
}

/// Zero/DMax/Succ/LT over a chain, with the TC frontier rule extending the
/// successor relation past the database maximum. The TC rule's successor is
/// existential (the source states it with a stray quantifier name); the
/// unbalanced bracket in the DMax rule is resolved the obvious way.
pub fn numeric_rules() -> Vec<Ded> {
    vec![
        tgd(
            vec![atom("First", &[v("w")]), atom("Link", &[v("x"), v("w")])],
            vec![
                atom("Zero", &[v("w"), v("x")]),
                atom("RT", &[v("w"), v("w"), v("x")]),
            ],
        ),
        tgd(
            vec![
                atom("Next", &[v("u"), v("v")]),
                atom("RT", &[v("w"), v("u"), v("x")]),
                atom("Link", &[v("y"), v("v")]),
            ],
            vec![
                atom("Succ", &[v("w"), v("x"), v("y")]),
                atom("RT", &[v("w"), v("v"), v("y")]),
            ],
        ),
        tgd(
            vec![
                atom("Last", &[v("v")]),
                atom("RT", &[v("w"), v("v"), v("x")]),
            ],
            vec![
                atom("DMax", &[v("w"), v("x")]),
                atom("TC", &[v("w"), v("x")]),
            ],
        ),
        tgd(
            vec![atom("TC", &[v("v"), v("x")])],
            vec![
                atom("Succ", &[v("v"), v("x"), v("y")]),
                atom("TC", &[v("v"), v("y")]),
            ],
        ),
        tgd(
            vec![atom("Succ", &[v("v"), v("x"), v("y")])],
            vec![atom("LT", &[v("v"), v("x"), v("y")])],
        ),
        tgd(
            vec![
                atom("LT", &[v("v"), v("x"), v("y")]),
                atom("LT", &[v("v"), v("y"), v("z")]),
            ],
            vec![atom("LT", &[v("v"), v("x"), v("z")])],
        ),
    ]
}

/// Disjunct choice (Accept/True/Union) and query copying (Copy + one
/// instantiation rule per Q-relation).
pub fn model_builder_rules(schema_q: &Schema) -> Result<Vec<Ded>, SuccError> {
    check_no_collision(schema_q)?;
    let mut rules = vec![
        tgd(
            vec![atom("Accept", &[v("v"), v("x")])],
            vec![atom("True", &[v("v"), v("x")])],
        ),
        Ded {
            body: vec![
                atom("True", &[v("v"), v("x")]),
                atom("Union", &[v("v"), v("x"), v("y"), v("z")]),
            ],
            heads: vec![
                head(vec![rel(atom("True", &[v("v"), v("y")]))]),
                head(vec![rel(atom("True", &[v("v"), v("z")]))]),
            ],
        },
        tgd(
            vec![
                atom("CQ", &[v("v"), v("x")]),
                atom("QVar", &[v("v"), v("x"), v("y")]),
            ],
            vec![atom("Copy", &[v("v"), v("x"), v("y"), v("z")])],
        ),
        tgd(
            vec![atom("CQ", &[v("v"), v("x")]), atom("AD", &[v("y")])],
            vec![atom("Copy", &[v("v"), v("x"), v("y"), v("y")])],
        ),
    ];
    for (name, arity) in schema_q.part_relations(SchemaPart::Query) {
        let ys: Vec<Term> = (0..arity).map(|i| v(&format!("y{i}"))).collect();
        let zs: Vec<Term> = (0..arity).map(|i| v(&format!("z{i}"))).collect();
        let mut body = vec![
            atom("True", &[v("v"), v("x")]),
            atom("CQ", &[v("v"), v("x")]),
        ];
        let mut hasq_args = vec![v("v"), v("x")];
        hasq_args.extend(ys.iter().cloned());
        body.push(Atom::new(format!("{HASQ_PREFIX}{name}"), hasq_args));
        for i in 0..arity {
            body.push(atom("Copy", &[v("v"), v("x"), ys[i].clone(), zs[i].clone()]));
        }
        rules.push(tgd(body, vec![Atom::new(name.clone(), zs)]));
    }
    Ok(rules)
}

/// Everything the transformation emits, with the auxiliary schema declared.
pub struct RulesetBundle {
    pub rules: Vec<Ded>,
    pub auxiliary: Schema,
}

pub fn full_bundle(schema_d: &Schema, schema_q: &Schema) -> Result<RulesetBundle, SuccError> {
    let mut rules = order_rules(schema_d)?;
    rules.extend(successor_rules());
    rules.extend(numeric_rules());
    rules.extend(model_builder_rules(schema_q)?);
    let mut auxiliary = Schema::new();
    let arities = [
        ("AD", 1),
        ("Less", 2),
        ("Link", 2),
        ("Next", 2),
        ("First", 1),
        ("Last", 1),
        ("Partial", 1),
        ("Zero", 2),
        ("DMax", 2),
        ("Succ", 3),
        ("LT", 3),
        ("TC", 2),
        ("RT", 3),
        ("Accept", 2),
        ("True", 2),
        ("Copy", 4),
        ("UCQ", 2),
        ("Union", 4),
        ("CQ", 2),
        ("QVar", 3),
    ];
    for (name, arity) in arities {
        auxiliary
            .declare(name, arity, SchemaPart::Auxiliary)
            .expect("fresh auxiliary schema");
    }
    for (name, arity) in schema_q.part_relations(SchemaPart::Query) {
        auxiliary
            .declare(format!("{HASQ_PREFIX}{name}"), arity + 2, SchemaPart::Auxiliary)
            .expect("fresh auxiliary schema");
    }
    Ok(RulesetBundle { rules, auxiliary })
}

/// A complete partial successor relation: head alias carries First, tail
/// alias carries Last, elements ascend along Next.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Chain {
    /// The head alias, which names the relation.
    pub name: Term,
    /// Constant sequence from the First alias to the Last alias.
    pub elements: Vec<Name>,
}

/// Extract every complete chain from Link/Next/First/Last facts. Aliases
/// whose path never reaches a Last alias are dangling and skipped; an alias
/// with two Next-successors is a structural fault.
pub fn extract_chains(i: &Instance) -> Result<Vec<Chain>, SuccError> {
    let mut link: BTreeMap<Term, Name> = BTreeMap::new();
    let mut next: BTreeMap<Term, Vec<Term>> = BTreeMap::new();
    let mut firsts: BTreeSet<Term> = BTreeSet::new();
    let mut lasts: BTreeSet<Term> = BTreeSet::new();
    let mut alias_count = 0usize;
    for fact in i.iter() {
        match (fact.symbol.as_str(), fact.args.as_slice()) {
            ("Link", [c, a]) => {
                if let Term::Const(name) = c {
                    link.insert(a.clone(), name.clone());
                    alias_count += 1;
                }
            }
            ("Next", [u, w]) => next.entry(u.clone()).or_default().push(w.clone()),
            ("First", [a]) => {
                firsts.insert(a.clone());
            }
            ("Last", [a]) => {
                lasts.insert(a.clone());
            }
            _ => {}
        }
    }
    let mut chains = Vec::new();
    'heads: for start in &firsts {
        let mut elements = Vec::new();
        let mut current = start.clone();
        for _ in 0..=alias_count {
            let constant = link
                .get(&current)
                .ok_or_else(|| SuccError::MalformedChain(format!("alias {current} has no Link")))?;
            elements.push(constant.clone());
            if lasts.contains(&current) {
                chains.push(Chain {
                    name: start.clone(),
                    elements,
                });
                continue 'heads;
            }
            match next.get(&current).map(Vec::as_slice) {
                Some([succ]) => current = succ.clone(),
                Some(many) if many.len() > 1 => {
                    return Err(SuccError::MalformedChain(format!(
                        "alias {current} has {} Next-successors",
                        many.len()
                    )))
                }
                // Dangling: path ends without a Last alias.
                _ => continue 'heads,
            }
        }
        return Err(SuccError::MalformedChain(format!(
            "Next-cycle reachable from alias {start}"
        )));
    }
    chains.sort_by(|a, b| {
        (a.elements.len(), &a.elements, &a.name).cmp(&(b.elements.len(), &b.elements, &b.name))
    });
    Ok(chains)
}

/// Seed facts for a fixed total order: AD per constant plus the full Less
/// relation (constants listed smallest first).
pub fn ordered_seed(constants_ascending: &[&str]) -> Instance {
    let mut facts = Vec::new();
    for c in constants_ascending {
        facts.push(atom("AD", &[Term::Const(c.to_string())]));
    }
    for (i, small) in constants_ascending.iter().enumerate() {
        for large in &constants_ascending[i + 1..] {
            facts.push(atom(
                "Less",
                &[Term::Const(small.to_string()), Term::Const(large.to_string())],
            ));
        }
    }
    Instance::from_facts(facts).expect("ground seed")
}

/// Encode a boolean UCQ as Accept/Union/CQ/QVar/HasQ/AD facts under a named
/// order. Codes are small tagged constants, not Godel numbers; any
/// injective code works.
pub fn encode_query(order: &str, q: &Ucq) -> Instance {
    let o = Term::Const(order.to_string());
    let mut facts: Vec<Atom> = Vec::new();
    let cq_code = |i: usize| Term::Const(format!("qc{i}"));
    let n = q.disjuncts().len();
    // Union chain u0, u1, ...: each node splits off one CQ; the final node
    // is the last CQ itself.
    let node = |i: usize| -> Term {
        if i + 1 == n {
            cq_code(i)
        } else {
            Term::Const(format!("qu{i}"))
        }
    };
    facts.push(Atom::new("Accept", vec![o.clone(), node(0)]));
    for i in 0..n.saturating_sub(1) {
        facts.push(Atom::new(
            "Union",
            vec![o.clone(), node(i), cq_code(i), node(i + 1)],
        ));
    }
    for (i, d) in q.disjuncts().iter().enumerate() {
        facts.push(Atom::new("CQ", vec![o.clone(), cq_code(i)]));
        let var_code = |x: &Name| Term::Const(format!("qv{i}_{x}"));
        for x in d.vars() {
            facts.push(Atom::new(
                "QVar",
                vec![o.clone(), cq_code(i), var_code(&x)],
            ));
        }
        for c in d.constants() {
            facts.push(Atom::new("AD", vec![Term::Const(c)]));
        }
        for a in d.atoms() {
            let mut args = vec![o.clone(), cq_code(i)];
            for t in &a.args {
                match t {
                    Term::Var(x) => args.push(var_code(x)),
                    other => args.push(other.clone()),
                }
            }
            facts.push(Atom::new(format!("{HASQ_PREFIX}{}", a.symbol), args));
        }
    }
    Instance::from_facts(facts).expect("ground encoding")
}

/// The worked three-constant example: order c3 < c2 < c1, semi-oblivious
/// chase of the successor rules to saturation.
pub fn figure1() -> Result<(Instance, Vec<Chain>), SuccError> {
    let seed = ordered_seed(&["c3", "c2", "c1"]);
    let d = crate::core::Database::new(seed).expect("seed has no nulls");
    let tree = crate::chase::chase(&d, &successor_rules(), 10_000, crate::chase::Strategy::SemiOblivious)
        .expect("consistent schema");
    assert!(!tree.exhausted, "successor rules saturate on 3 constants");
    let branch = tree
        .branches
        .first()
        .expect("TGD chase has a single branch");
    let chains = extract_chains(&branch.instance)?;
    Ok((branch.instance.clone(), chains))
}

/// DOT rendering of the Link/Next/First/Last structure of an instance.
pub fn chains_dot(i: &Instance) -> String {
    let mut out = String::from("digraph chains {\n  rankdir=LR;\n");
    for fact in i.iter() {
        match (fact.symbol.as_str(), fact.args.as_slice()) {
            ("Link", [c, a]) => out.push_str(&format!(
                "  \"{a}\" [label=\"{a}\\n{c}\"];\n"
            )),
            ("Next", [u, w]) => out.push_str(&format!("  \"{u}\" -> \"{w}\";\n")),
            ("First", [a]) => out.push_str(&format!("  \"{a}\" [shape=diamond];\n")),
            ("Last", [a]) => out.push_str(&format!("  \"{a}\" [peripheries=2];\n")),
            _ => {}
        }
    }
    out.push_str("}\n");
    out
}

/// Reference oracle for the chain law: the expected chains of a fixed total
/// order are exactly the sorted non-empty subsets of the domain.
pub fn expected_chain_sets(constants_ascending: &[&str]) -> BTreeSet<Vec<Name>> {
    let n = constants_ascending.len();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let subset: Vec<Name> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| constants_ascending[i].to_string())
            .collect();
        out.insert(subset);
    }
    out
}

/// Chase a fixed total order on `n` constants and extract the chains.
pub fn chains_for_order(constants_ascending: &[&str]) -> Result<Vec<Chain>, SuccError> {
    let seed = ordered_seed(constants_ascending);
    let d = crate::core::Database::new(seed).expect("seed has no nulls");
    let tree = crate::chase::chase(
        &d,
        &successor_rules(),
        200_000,
        crate::chase::Strategy::SemiOblivious,
    )
    .expect("consistent schema");
    assert!(!tree.exhausted, "successor rules saturate on a finite order");
    extract_chains(&tree.branches[0].instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::{chase, Strategy};
    use crate::core::{c, Database};

    #[test]
    fn structural_counts() {
        assert_eq!(order_axioms().len(), 3);
        assert_eq!(successor_rules().len(), 4);
        for r in successor_rules() {
            assert_eq!(r.heads.len(), 1);
            assert_eq!(r.existentials(0).len(), 1);
        }
        assert_eq!(numeric_rules().len(), 6);
        let mut q = Schema::new();
        q.declare("Q", 1, SchemaPart::Query).unwrap();
        assert_eq!(model_builder_rules(&q).unwrap().len(), 5);
    }

    #[test]
    fn aux_collision_rejected() {
        let mut bad = Schema::new();
        bad.declare("Less", 2, SchemaPart::Data).unwrap();
        assert!(matches!(
            order_rules(&bad),
            Err(SuccError::AuxCollision(_))
        ));
    }

    #[test]
    fn order_rules_project_and_branch() {
        let mut d_schema = Schema::new();
        d_schema.declare("P", 1, SchemaPart::Data).unwrap();
        let rules = order_rules(&d_schema).unwrap();
        assert_eq!(rules.len(), 4); // 1 projection + 3 axioms
        let d = Database::new(
            Instance::from_facts([atom("P", &[c("a")]), atom("P", &[c("b")]), atom("P", &[c("e")])])
                .unwrap(),
        )
        .unwrap();
        let tree = chase(&d, &rules, 5_000, Strategy::Restricted).unwrap();
        assert!(!tree.exhausted);
        let consistent = tree.saturated_consistent().count();
        assert_eq!(consistent, 6, "3! linear orders");
    }

    #[test]
    fn single_constant_gives_single_chain() {
        let chains = chains_for_order(&["c1"]).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].elements, vec!["c1".to_string()]);
    }

    #[test]
    fn figure1_has_seven_chains() {
        let (_, chains) = figure1().unwrap();
        let sets: BTreeSet<Vec<Name>> =
            chains.iter().map(|ch| ch.elements.clone()).collect();
        assert_eq!(chains.len(), 7, "duplicate chains would collapse in the set");
        assert_eq!(sets, expected_chain_sets(&["c3", "c2", "c1"]));
        // Every chain ascends: c3 < c2 < c1, i.e. reverse lexicographic here.
        for ch in &chains {
            let order = ["c3", "c2", "c1"];
            let positions: Vec<usize> = ch
                .elements
                .iter()
                .map(|e| order.iter().position(|o| o == e).unwrap())
                .collect();
            assert!(positions.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn chain_count_law_small() {
        for n in 1..=4usize {
            let names: Vec<String> = (1..=n).map(|i| format!("k{i}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let chains = chains_for_order(&refs).unwrap();
            assert_eq!(chains.len(), (1 << n) - 1, "2^{n} - 1 chains");
            let sets: BTreeSet<Vec<Name>> =
                chains.iter().map(|ch| ch.elements.clone()).collect();
            assert_eq!(sets, expected_chain_sets(&refs));
        }
    }

    #[test]
    fn numeric_rules_on_a_two_chain() {
        // Hand-built complete chain: c1 < c2 with aliases a1 (First), a2 (Last).
        let seed = Instance::from_facts([
            atom("Link", &[c("c1"), c("a1")]),
            atom("Link", &[c("c2"), c("a2")]),
            atom("Next", &[c("a1"), c("a2")]),
            atom("First", &[c("a1")]),
            atom("Last", &[c("a2")]),
        ])
        .unwrap();
        let d = Database::new(seed).unwrap();
        // Budget 6: base, step, DMax, then three TC-frontier firings.
        let tree = chase(&d, &numeric_rules(), 6, Strategy::SemiOblivious).unwrap();
        assert!(tree.exhausted, "the TC frontier is unbounded");
        let i = &tree.branches[0].instance;
        assert!(i.contains(&atom("Zero", &[c("a1"), c("c1")])));
        assert!(i.contains(&atom("DMax", &[c("a1"), c("c2")])));
        assert!(i.contains(&atom("Succ", &[c("a1"), c("c1"), c("c2")])));
        let succ_count = i.iter().filter(|f| f.symbol == "Succ").count();
        assert_eq!(succ_count, 4, "one database pair plus three null successors");
        let nulls: BTreeSet<&Term> = i
            .iter()
            .flat_map(|f| f.args.iter())
            .filter(|t| t.is_null())
            .collect();
        assert_eq!(nulls.len(), 3);
    }

    #[test]
    fn lt_is_transitive_and_irreflexive_without_frontier() {
        let seed = Instance::from_facts([
            atom("Succ", &[c("o"), c("c1"), c("c2")]),
            atom("Succ", &[c("o"), c("c2"), c("c3")]),
        ])
        .unwrap();
        let d = Database::new(seed).unwrap();
        let lt_rules: Vec<Ded> = numeric_rules()[4..].to_vec();
        let tree = chase(&d, &lt_rules, 1_000, Strategy::Restricted).unwrap();
        assert!(!tree.exhausted);
        let i = &tree.branches[0].instance;
        assert!(i.contains(&atom("LT", &[c("o"), c("c1"), c("c3")])));
        assert!(!i.iter().any(|f| f.symbol == "LT" && f.args[1] == f.args[2]));
    }

    #[test]
    fn model_builder_splits_disjuncts() {
        let mut q_schema = Schema::new();
        q_schema.declare("Q", 1, SchemaPart::Query).unwrap();
        q_schema.declare("S", 1, SchemaPart::Query).unwrap();
        let rules = model_builder_rules(&q_schema).unwrap();
        let q = crate::syntax::parse_query("Q(a) | S(a)").unwrap();
        let seed = encode_query("o", &q);
        let d = Database::new(seed).unwrap();
        let tree = chase(&d, &rules, 1_000, Strategy::Restricted).unwrap();
        assert!(!tree.exhausted);
        let consistent: Vec<_> = tree.saturated_consistent().collect();
        assert_eq!(consistent.len(), 2);
        let with_q = consistent
            .iter()
            .filter(|b| b.instance.contains(&atom("Q", &[c("a")])))
            .count();
        let with_s = consistent
            .iter()
            .filter(|b| b.instance.contains(&atom("S", &[c("a")])))
            .count();
        assert_eq!((with_q, with_s), (1, 1));
    }

    #[test]
    fn model_builder_copies_variables_as_nulls() {
        let mut q_schema = Schema::new();
        q_schema.declare("Q", 1, SchemaPart::Query).unwrap();
        let rules = model_builder_rules(&q_schema).unwrap();
        let q = crate::syntax::parse_query("exists X: Q(X)").unwrap();
        let seed = encode_query("o", &q);
        let d = Database::new(seed).unwrap();
        let tree = chase(&d, &rules, 1_000, Strategy::Restricted).unwrap();
        let i = &tree.branches[0].instance;
        let q_facts: Vec<&Atom> = i.iter().filter(|f| f.symbol == "Q").collect();
        assert_eq!(q_facts.len(), 1);
        assert!(q_facts[0].args[0].is_null());
    }

    #[test]
    fn extract_chains_diagnostics() {
        assert!(extract_chains(&Instance::new()).unwrap().is_empty());
        let forked = Instance::from_facts([
            atom("Link", &[c("c1"), c("a1")]),
            atom("Link", &[c("c2"), c("a2")]),
            atom("Link", &[c("c3"), c("a3")]),
            atom("First", &[c("a1")]),
            atom("Last", &[c("a2")]),
            atom("Last", &[c("a3")]),
            atom("Next", &[c("a1"), c("a2")]),
            atom("Next", &[c("a1"), c("a3")]),
        ])
        .unwrap();
        assert!(matches!(
            extract_chains(&forked),
            Err(SuccError::MalformedChain(_))
        ));
    }
}
