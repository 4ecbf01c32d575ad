//! Bounded locality: witness search, the rewriting of a local ontology
//! into an existential positive sentence with inequalities (and its
//! exhaustive verification), the Condition-(1) admission test over a finite
//! query pool, and the three-rule ontology closure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use itertools::Itertools;
use thiserror::Error;

use crate::chase::{certain_answer, ChaseError, Strategy, Verdict};
use crate::core::{
    conj, query_size, Atom, BoundFunction, Database, Ded, Instance, Name, Schema, SchemaPart,
    Term, Ucq,
};
use crate::hom::{evaluate_epfo, find_homomorphism, ucq_contains, EpfoFormula, EpfoSentence};

#[derive(Debug, Error)]
pub enum LocalityError {
    #[error("query constant {0} does not occur in the database")]
    ConstantNotInDatabase(Name),
    #[error("table oracle violates the {axiom} closure: {witness}")]
    TableNotClosed { axiom: &'static str, witness: String },
    #[error("pool lacks a member equivalent to the conjunction of {left} and {right}")]
    PoolNotConjunctionClosed { left: String, right: String },
    #[error("rewriting aborted; oracle unresolved on: {0:?}")]
    RewriteAborted(Vec<String>),
    #[error("query not in the declared pool: {0}")]
    QueryNotInPool(String),
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

/// p and q hold in exactly the same instances.
pub fn ucq_equivalent(p: &Ucq, q: &Ucq) -> bool {
    ucq_contains(p, q) && ucq_contains(q, p)
}

/// An explicit finite ontology: pairs over a database universe and a query
/// pool. Anything outside the declared universe is unknown.
#[derive(Clone, Debug)]
pub struct TableOracle {
    pub universe: Vec<Database>,
    pub pool: Vec<Ucq>,
    pub pairs: BTreeSet<(usize, usize)>,
    /// Conjunctions with combined size above this cap are outside the
    /// declared pool and exempt from the conjunction closure.
    pub conj_cap: usize,
}

impl TableOracle {
    fn db_index(&self, d: &Database) -> Option<usize> {
        self.universe.iter().position(|u| u == d)
    }

    fn query_index(&self, q: &Ucq) -> Option<usize> {
        self.pool.iter().position(|p| ucq_equivalent(p, q))
    }

    /// Check the three ontology closures on the finite universe.
    pub fn validate(&self) -> Result<(), LocalityError> {
        for &(d, q) in &self.pairs {
            let adom = self.universe[d].adom();
            if self.pool[q].constants().iter().any(|c| !adom.contains(c)) {
                return Err(LocalityError::TableNotClosed {
                    axiom: "quasi-ontology (const(q) within adom(D))",
                    witness: format!("({}, {})", self.universe[d], self.pool[q]),
                });
            }
        }
        // Query implications.
        for &(d, i) in &self.pairs {
            for (j, p) in self.pool.iter().enumerate() {
                let applicable = p
                    .constants()
                    .iter()
                    .all(|c| self.universe[d].adom().contains(c));
                if applicable && ucq_contains(&self.pool[i], p) && !self.pairs.contains(&(d, j)) {
                    return Err(LocalityError::TableNotClosed {
                        axiom: "query implication",
                        witness: format!("{} entails {} on db {d}", self.pool[i], p),
                    });
                }
            }
        }
        // Query conjunctions, up to the declared cap.
        for &(d, i) in &self.pairs {
            for &(d2, j) in &self.pairs {
                if d != d2 {
                    continue;
                }
                let size = query_size(&self.pool[i]) + query_size(&self.pool[j]);
                if size > self.conj_cap {
                    continue;
                }
                let both = conj(&self.pool[i], &self.pool[j]);
                match self.pool.iter().position(|p| ucq_equivalent(p, &both)) {
                    None => {
                        return Err(LocalityError::PoolNotConjunctionClosed {
                            left: self.pool[i].to_string(),
                            right: self.pool[j].to_string(),
                        })
                    }
                    Some(k) if !self.pairs.contains(&(d, k)) => {
                        return Err(LocalityError::TableNotClosed {
                            axiom: "query conjunction",
                            witness: format!(
                                "{} and {} on db {d}",
                                self.pool[i], self.pool[j]
                            ),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        // Injective database homomorphisms.
        for &(d, i) in &self.pairs {
            let consts = self.pool[i].constants();
            for (d2, target) in self.universe.iter().enumerate() {
                let maps = find_homomorphism(
                    self.universe[d].instance(),
                    target.instance(),
                    &consts,
                    true,
                )
                .is_some();
                if maps && !self.pairs.contains(&(d2, i)) {
                    return Err(LocalityError::TableNotClosed {
                        axiom: "injective database homomorphism",
                        witness: format!("db {d} maps into db {d2} for {}", self.pool[i]),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Abstract membership test (D, q) with a three-valued verdict: backed
/// either by a budgeted chase over a DED program, or by a finite table.
#[derive(Clone, Debug)]
pub enum Oracle {
    Chase { rules: Vec<Ded>, strategy: Strategy },
    Table(TableOracle),
}

impl Oracle {
    pub fn from_rules(rules: Vec<Ded>) -> Self {
        Oracle::Chase {
            rules,
            strategy: Strategy::Restricted,
        }
    }

    /// Table oracles are validated against the closure axioms on load.
    pub fn from_table(table: TableOracle) -> Result<Self, LocalityError> {
        table.validate()?;
        Ok(Oracle::Table(table))
    }

    pub fn member(&self, d: &Database, q: &Ucq, budget: usize) -> Result<Verdict, LocalityError> {
        match self {
            Oracle::Chase { rules, strategy } => {
                Ok(certain_answer(d, rules, q, budget, *strategy)?)
            }
            Oracle::Table(t) => Ok(match (t.db_index(d), t.query_index(q)) {
                (Some(di), Some(qi)) => {
                    if t.pairs.contains(&(di, qi)) {
                        Verdict::Yes
                    } else {
                        Verdict::No { witness: di }
                    }
                }
                _ => Verdict::Unknown,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocalityOutcome {
    /// A set A with (D|_A, q) deciding membership identically to D.
    Witness(BTreeSet<Name>),
    /// Membership holds but no subset within the bound reproduces it.
    NotFound,
    Unknown,
}

/// All subsets of `pool` with at most `max` elements, smallest first,
/// lexicographic within a size.
fn subsets_ascending(pool: &BTreeSet<Name>, max: usize) -> Vec<BTreeSet<Name>> {
    let items: Vec<&Name> = pool.iter().collect();
    let mut out = Vec::new();
    for k in 0..=max.min(items.len()) {
        for combo in items.iter().combinations(k) {
            out.push(combo.into_iter().map(|n| (*n).clone()).collect());
        }
    }
    out
}

/// Locality witness search (smallest subset first). A negative membership
/// is witnessed by the empty set: closure under injective homomorphisms
/// forces (D|_A, q) out of the ontology for every A as well.
pub fn check_local(
    oracle: &Oracle,
    d: &Database,
    q: &Ucq,
    l: &BoundFunction,
    budget: usize,
) -> Result<LocalityOutcome, LocalityError> {
    let adom = d.adom();
    if let Some(c) = q.constants().iter().find(|c| !adom.contains(*c)) {
        return Err(LocalityError::ConstantNotInDatabase(c.clone()));
    }
    match oracle.member(d, q, budget)? {
        Verdict::Unknown => return Ok(LocalityOutcome::Unknown),
        Verdict::No { .. } => return Ok(LocalityOutcome::Witness(BTreeSet::new())),
        Verdict::Yes => {}
    }
    let bound = l.eval(query_size(q));
    let mut saw_unknown = false;
    for a in subsets_ascending(&adom, bound) {
        match oracle.member(&d.restrict(&a), q, budget)? {
            Verdict::Yes => return Ok(LocalityOutcome::Witness(a)),
            Verdict::Unknown => saw_unknown = true,
            Verdict::No { .. } => {}
        }
    }
    if saw_unknown {
        Ok(LocalityOutcome::Unknown)
    } else {
        Ok(LocalityOutcome::NotFound)
    }
}

/// The per-database sentence of the rewriting: facts with non-query
/// constants turned into existential variables, fresh variables pairwise
/// distinct and (unless `strict_lambda`) distinct from the query constants
/// occurring in the database.
pub fn canonical_sentence(
    d: &Database,
    q_constants: &BTreeSet<Name>,
    strict_lambda: bool,
) -> EpfoSentence {
    let adom = d.adom();
    let fresh: Vec<&Name> = adom.iter().filter(|c| !q_constants.contains(*c)).collect();
    let var_of: BTreeMap<&Name, Name> = fresh
        .iter()
        .enumerate()
        .map(|(i, c)| (*c, format!("x{i}")))
        .collect();
    let mut clauses: Vec<EpfoFormula> = d
        .iter()
        .map(|fact| {
            EpfoFormula::Atom(Atom::new(
                fact.symbol.clone(),
                fact.args
                    .iter()
                    .map(|t| match t {
                        Term::Const(c) => match var_of.get(c) {
                            Some(x) => Term::Var(x.clone()),
                            None => t.clone(),
                        },
                        other => other.clone(),
                    })
                    .collect(),
            ))
        })
        .collect();
    for (a, b) in var_of.values().tuple_combinations() {
        clauses.push(EpfoFormula::Neq(Term::Var(a.clone()), Term::Var(b.clone())));
    }
    if !strict_lambda {
        for x in var_of.values() {
            for c in adom.iter().filter(|c| q_constants.contains(*c)) {
                clauses.push(EpfoFormula::Neq(Term::Var(x.clone()), Term::Const(c.clone())));
            }
        }
    }
    EpfoSentence {
        vars: var_of.values().cloned().collect(),
        matrix: EpfoFormula::And(clauses),
    }
}

/// Enumerate D-schema databases with at most `max_constants` constants, up
/// to isomorphism fixing the constants in `fixed`. Other constants are
/// canonical fresh names f0, f1, ... Desk scale only: the fact universe is
/// capped.
pub fn enumerate_databases(
    schema_d: &Schema,
    fixed: &BTreeSet<Name>,
    max_constants: usize,
) -> Vec<Database> {
    let fresh: Vec<Name> = (0..max_constants).map(|i| format!("f{i}")).collect();
    let mut pool: Vec<Term> = fixed.iter().map(|c| Term::Const(c.clone())).collect();
    pool.extend(fresh.iter().map(|c| Term::Const(c.clone())));
    let mut universe: Vec<Atom> = Vec::new();
    for (name, arity) in schema_d.part_relations(SchemaPart::Data) {
        for args in (0..arity)
            .map(|_| pool.iter().cloned())
            .multi_cartesian_product()
        {
            universe.push(Atom::new(name.clone(), args));
        }
    }
    assert!(
        universe.len() <= 22,
        "database enumeration is desk scale; fact universe has {} atoms",
        universe.len()
    );
    let mut out = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for mask in 0u64..(1 << universe.len()) {
        let facts: Vec<Atom> = universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        let inst = Instance::from_facts(facts).expect("ground atoms");
        if inst.adom().len() > max_constants {
            continue;
        }
        let key = iso_key(&inst, &fresh);
        if seen.insert(key.clone()) {
            // Store the canonical representative itself.
            out.push(Database::new(canonical_relabel(&inst, &fresh)).expect("no nulls"));
        }
    }
    out.sort_by_key(|d| (d.len(), d.to_string()));
    out
}

/// Minimum serialization over permutations of the fresh constants present.
fn iso_key(i: &Instance, fresh: &[Name]) -> String {
    canonical_relabel(i, fresh).to_string()
}

fn canonical_relabel(i: &Instance, fresh: &[Name]) -> Instance {
    let present: Vec<&Name> = fresh.iter().filter(|c| i.adom().contains(*c)).collect();
    let k = present.len();
    present
        .iter()
        .permutations(k)
        .map(|perm| {
            let map: BTreeMap<&Name, &Name> = perm
                .iter()
                .enumerate()
                .map(|(idx, c)| (**c, &fresh[idx]))
                .collect();
            i.map_terms(|t| match t {
                Term::Const(c) => match map.get(c) {
                    Some(target) => Term::Const((*target).clone()),
                    None => t.clone(),
                },
                other => other.clone(),
            })
        })
        .min()
        .unwrap_or_else(|| i.clone())
}

/// Rewrite a query against an oracle: the disjunction of the canonical
/// sentences of every small database the oracle accepts. An accepted empty
/// database collapses the sentence to true (injective-homomorphism closure
/// then makes every database a member).
pub fn rewrite(
    oracle: &Oracle,
    q: &Ucq,
    l: &BoundFunction,
    schema_d: &Schema,
    budget: usize,
    strict_lambda: bool,
) -> Result<EpfoSentence, LocalityError> {
    let bound = l.eval(query_size(q));
    let q_consts = q.constants();
    let mut accepted: Vec<Database> = Vec::new();
    let mut unresolved: Vec<String> = Vec::new();
    for d in enumerate_databases(schema_d, &q_consts, bound) {
        match oracle.member(&d, q, budget)? {
            Verdict::Yes => accepted.push(d),
            Verdict::Unknown => unresolved.push(d.to_string()),
            Verdict::No { .. } => {}
        }
    }
    if !unresolved.is_empty() {
        return Err(LocalityError::RewriteAborted(unresolved));
    }
    if accepted.iter().any(|d| d.is_empty()) {
        return Ok(EpfoSentence {
            vars: vec![],
            matrix: EpfoFormula::And(vec![]),
        });
    }
    if accepted.is_empty() {
        return Ok(EpfoSentence::falsum());
    }
    // Merge: rename each disjunct's variables apart, pool the prefixes.
    let mut vars = Vec::new();
    let mut disjuncts = Vec::new();
    for (i, d) in accepted.iter().enumerate() {
        let psi = canonical_sentence(d, &q_consts, strict_lambda);
        let renamed = suffix_vars(&psi.matrix, &format!("_{i}"));
        vars.extend(psi.vars.iter().map(|x| format!("{x}_{i}")));
        disjuncts.push(renamed);
    }
    Ok(EpfoSentence {
        vars,
        matrix: EpfoFormula::Or(disjuncts),
    })
}

fn suffix_vars(f: &EpfoFormula, suffix: &str) -> EpfoFormula {
    let term = |t: &Term| match t {
        Term::Var(x) => Term::Var(format!("{x}{suffix}")),
        other => other.clone(),
    };
    match f {
        EpfoFormula::And(cs) => EpfoFormula::And(cs.iter().map(|c| suffix_vars(c, suffix)).collect()),
        EpfoFormula::Or(cs) => EpfoFormula::Or(cs.iter().map(|c| suffix_vars(c, suffix)).collect()),
        EpfoFormula::Atom(a) => EpfoFormula::Atom(Atom::new(
            a.symbol.clone(),
            a.args.iter().map(term).collect(),
        )),
        EpfoFormula::Neq(s, t) => EpfoFormula::Neq(term(s), term(t)),
    }
}

#[derive(Clone, Debug)]
pub struct VerifyLine {
    pub database: String,
    pub oracle: Verdict,
    pub sentence_holds: bool,
    pub mismatch: bool,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub lines: Vec<VerifyLine>,
    pub mismatches: usize,
}

impl VerifyReport {
    /// One line per database: serialized D, oracle verdict, sentence verdict.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                l.database.replace('\n', " "),
                l.oracle,
                l.sentence_holds,
                if l.mismatch { "MISMATCH" } else { "ok" }
            );
        }
        let _ = writeln!(out, "# mismatches: {}", self.mismatches);
        out
    }
}

/// Exhaustively compare a rewriting against the oracle on every database
/// with at most `max_constants` constants. Unknown oracle verdicts are
/// flagged as mismatches (they leave the rewriting unvalidated).
pub fn verify_rewriting(
    psi: &EpfoSentence,
    oracle: &Oracle,
    q: &Ucq,
    max_constants: usize,
    schema_d: &Schema,
    budget: usize,
) -> Result<VerifyReport, LocalityError> {
    let mut lines = Vec::new();
    let mut mismatches = 0;
    for d in enumerate_databases(schema_d, &q.constants(), max_constants) {
        let verdict = oracle.member(&d, q, budget)?;
        let holds = evaluate_epfo(psi, &d);
        let mismatch = match verdict {
            Verdict::Yes => !holds,
            Verdict::No { .. } => holds,
            Verdict::Unknown => true,
        };
        if mismatch {
            mismatches += 1;
        }
        lines.push(VerifyLine {
            database: d.to_string(),
            oracle: verdict,
            sentence_holds: holds,
            mismatch,
        });
    }
    Ok(VerifyReport { lines, mismatches })
}

/// The Condition-(1) admission test for q at D over a finite pool, with
/// the pr(q) recursion evaluated in ascending query order. The universal
/// quantification over all queries is restricted to the declared pool.
pub fn condition_holds(
    rules: &[Ded],
    d: &Database,
    q: &Ucq,
    pool: &[Ucq],
    l: &BoundFunction,
    budget: usize,
) -> Result<Verdict, LocalityError> {
    let mut ordered: Vec<&Ucq> = pool.iter().collect();
    ordered.sort_by(|a, b| {
        let key = |u: &Ucq| {
            let c = u.canonical();
            (query_size(&c), c.to_string())
        };
        key(a).cmp(&key(b))
    });
    let target = ordered
        .iter()
        .position(|p| ucq_equivalent(p, q))
        .ok_or_else(|| LocalityError::QueryNotInPool(q.to_string()))?;
    let mut admitted: Vec<Verdict> = Vec::new();
    for k in 0..=target {
        if admitted.iter().any(|v| *v == Verdict::Unknown) {
            // pr(q) is undetermined once any predecessor is.
            admitted.push(Verdict::Unknown);
            continue;
        }
        let qk = ordered[k];
        let mut pr_hat = qk.clone();
        let mut size_hat = query_size(qk);
        for (j, p) in ordered.iter().enumerate().take(k) {
            if admitted[j] == Verdict::Yes {
                pr_hat = conj(&pr_hat, p);
                // Conjunction size is the sum of operand sizes, measured
                // before distribution.
                size_hat += query_size(p);
            }
        }
        let mut verdict = Verdict::Yes;
        'pool: for p in pool {
            if query_size(p) > size_hat || !ucq_contains(&pr_hat, p) {
                continue;
            }
            let bound = l.eval(query_size(p));
            let mut saw_unknown = false;
            for a in subsets_ascending(&d.adom(), bound) {
                match certain_answer(&d.restrict(&a), rules, p, budget, Strategy::Restricted)? {
                    Verdict::Yes => continue 'pool,
                    Verdict::Unknown => saw_unknown = true,
                    Verdict::No { .. } => {}
                }
            }
            verdict = if saw_unknown {
                Verdict::Unknown
            } else {
                Verdict::No { witness: 0 }
            };
            break;
        }
        admitted.push(verdict);
    }
    Ok(admitted[target].clone())
}

/// Least superset of `pairs` closed under query conjunctions (within the
/// cap), query implications, and injective database homomorphisms, all
/// restricted to the finite universe.
pub fn close_ontology(
    pairs: &BTreeSet<(usize, usize)>,
    universe: &[Database],
    pool: &[Ucq],
    conj_cap: usize,
) -> Result<BTreeSet<(usize, usize)>, LocalityError> {
    let mut s = pairs.clone();
    loop {
        let mut additions: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(d, i) in &s {
            // Implications.
            for (j, p) in pool.iter().enumerate() {
                let applicable = p
                    .constants()
                    .iter()
                    .all(|c| universe[d].adom().contains(c));
                if applicable && ucq_contains(&pool[i], p) && !s.contains(&(d, j)) {
                    additions.insert((d, j));
                }
            }
            // Injective homomorphisms.
            let consts = pool[i].constants();
            for (d2, target) in universe.iter().enumerate() {
                if d2 != d
                    && !s.contains(&(d2, i))
                    && find_homomorphism(universe[d].instance(), target.instance(), &consts, true)
                        .is_some()
                {
                    additions.insert((d2, i));
                }
            }
            // Conjunctions.
            for &(d2, j) in &s {
                if d2 != d {
                    continue;
                }
                let size = query_size(&pool[i]) + query_size(&pool[j]);
                if size > conj_cap {
                    continue;
                }
                let both = conj(&pool[i], &pool[j]);
                match pool.iter().position(|p| ucq_equivalent(p, &both)) {
                    None => {
                        return Err(LocalityError::PoolNotConjunctionClosed {
                            left: pool[i].to_string(),
                            right: pool[j].to_string(),
                        })
                    }
                    Some(k) => {
                        if !s.contains(&(d, k)) {
                            additions.insert((d, k));
                        }
                    }
                }
            }
        }
        if additions.is_empty() {
            return Ok(s);
        }
        s.extend(additions);
    }
}
