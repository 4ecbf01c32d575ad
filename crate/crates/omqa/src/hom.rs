//! C-homomorphism search (plain and injective), UCQ evaluation and
//! containment, and evaluation of existential positive sentences with
//! inequalities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;

use crate::core::{Atom, Database, Instance, Name, Term, Ucq};

/// A witness homomorphism: total on the source terms, fixing C.
pub type Mapping = BTreeMap<Term, Term>;

/// Backtracking matcher for a list of patterns (atoms with variables)
/// against a target instance. Constants and nulls in patterns are literal;
/// variables bind to target terms. Deterministic: target facts are visited
/// in sorted order and the most-bound pattern is matched first.
struct Matcher<'a> {
    by_symbol: BTreeMap<&'a str, Vec<&'a Atom>>,
    injective: bool,
    limit: Option<usize>,
    results: Vec<BTreeMap<Name, Term>>,
}

impl<'a> Matcher<'a> {
    fn new(target: &'a Instance, injective: bool, limit: Option<usize>) -> Self {
        let mut by_symbol: BTreeMap<&str, Vec<&Atom>> = BTreeMap::new();
        for fact in target.iter() {
            by_symbol.entry(&fact.symbol).or_default().push(fact);
        }
        Matcher {
            by_symbol,
            injective,
            limit,
            results: Vec::new(),
        }
    }

    fn run(mut self, patterns: &'a [Atom], init: BTreeMap<Name, Term>) -> Vec<BTreeMap<Name, Term>> {
        let mut used: BTreeSet<Term> = BTreeSet::new();
        if self.injective {
            used.extend(init.values().cloned());
            // Pattern constants are fixed points; they count as taken.
            for p in patterns {
                for t in &p.args {
                    if !t.is_var() {
                        used.insert(t.clone());
                    }
                }
            }
        }
        let mut remaining: Vec<&Atom> = patterns.iter().collect();
        let mut assignment = init;
        self.search(&mut remaining, &mut assignment, &mut used);
        self.results
    }

    fn done(&self) -> bool {
        self.limit.is_some_and(|n| self.results.len() >= n)
    }

    fn search(
        &mut self,
        remaining: &mut Vec<&'a Atom>,
        assignment: &mut BTreeMap<Name, Term>,
        used: &mut BTreeSet<Term>,
    ) {
        if self.done() {
            return;
        }
        if remaining.is_empty() {
            self.results.push(assignment.clone());
            return;
        }
        // Most-constrained pattern first: maximize bound arguments.
        let pick = remaining
            .iter()
            .enumerate()
            .max_by_key(|(_, a)| {
                a.args
                    .iter()
                    .filter(|t| !t.is_var() || assignment.contains_key(t.name()))
                    .count()
            })
            .map(|(i, _)| i)
            .expect("non-empty");
        let pattern = remaining.remove(pick);
        let candidates: Vec<&Atom> = self
            .by_symbol
            .get(pattern.symbol.as_str())
            .map(|v| {
                v.iter()
                    .filter(|f| f.args.len() == pattern.args.len())
                    .copied()
                    .collect()
            })
            .unwrap_or_default();
        for fact in candidates {
            let mut bound: Vec<Name> = Vec::new();
            let mut ok = true;
            for (pt, ft) in pattern.args.iter().zip(&fact.args) {
                match pt {
                    Term::Var(x) => match assignment.get(x) {
                        Some(t) if t == ft => {}
                        Some(_) => {
                            ok = false;
                            break;
                        }
                        None => {
                            if self.injective && used.contains(ft) {
                                ok = false;
                                break;
                            }
                            assignment.insert(x.clone(), ft.clone());
                            if self.injective {
                                used.insert(ft.clone());
                            }
                            bound.push(x.clone());
                        }
                    },
                    literal => {
                        if literal != ft {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if ok {
                self.search(remaining, assignment, used);
            }
            for x in bound {
                if self.injective {
                    if let Some(t) = assignment.get(&x) {
                        used.remove(t);
                    }
                }
                assignment.remove(&x);
            }
            if self.done() {
                break;
            }
        }
        remaining.insert(pick, pattern);
    }
}

/// All assignments of the pattern variables into `target` satisfying every
/// pattern atom, extending `init`. Sorted for determinism.
pub fn match_all(
    patterns: &[Atom],
    target: &Instance,
    init: &BTreeMap<Name, Term>,
    injective: bool,
    limit: Option<usize>,
) -> Vec<BTreeMap<Name, Term>> {
    let mut results = Matcher::new(target, injective, limit).run(patterns, init.clone());
    results.sort();
    results.dedup();
    results
}

/// Search for a C-homomorphism from `i` to `j`: fact-preserving, fixing
/// every constant in `c`, injective on the terms of `i` when requested.
/// Backtracking is complete; absence is reported as `None`.
pub fn find_homomorphism(
    i: &Instance,
    j: &Instance,
    c: &BTreeSet<Name>,
    injective: bool,
) -> Option<Mapping> {
    // Non-C constants and nulls of the source may move: encode them as
    // variables with reserved names.
    let encode = |t: &Term| -> Term {
        match t {
            Term::Const(n) if c.contains(n) => t.clone(),
            Term::Const(n) => Term::Var(format!("\u{1}c:{n}")),
            Term::Null(n) => Term::Var(format!("\u{1}n:{n}")),
            Term::Var(_) => unreachable!("instances are ground"),
        }
    };
    let patterns: Vec<Atom> = i
        .iter()
        .map(|a| Atom::new(a.symbol.clone(), a.args.iter().map(encode).collect()))
        .collect();
    let found = match_all(&patterns, j, &BTreeMap::new(), injective, Some(1));
    let assignment = found.into_iter().next()?;
    let mut mapping = Mapping::new();
    for t in i.terms() {
        let image = match &t {
            Term::Const(n) if c.contains(n) => t.clone(),
            _ => assignment
                .get(encode(&t).name())
                .cloned()
                .unwrap_or_else(|| t.clone()),
        };
        mapping.insert(t, image);
    }
    Some(mapping)
}

/// Standard UCQ satisfaction: some disjunct has a const(p)-homomorphism
/// from its canonical database into `i`.
pub fn evaluate_ucq(i: &Instance, q: &Ucq) -> bool {
    q.disjuncts()
        .iter()
        .any(|d| !match_all(d.atoms(), i, &BTreeMap::new(), false, Some(1)).is_empty())
}

/// p |= q, decided disjunct-wise: for every disjunct of p, q holds in its
/// canonical database.
pub fn ucq_contains(p: &Ucq, q: &Ucq) -> bool {
    p.disjuncts()
        .iter()
        .all(|dp| evaluate_ucq(&dp.canonical_db(), q))
}

/// Quantifier-free part of an existential positive sentence with
/// inequalities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EpfoFormula {
    And(Vec<EpfoFormula>),
    Or(Vec<EpfoFormula>),
    Atom(Atom),
    Neq(Term, Term),
}

/// A sentence in the ∃⁺FO(≠) fragment: existential prefix over a positive
/// matrix of relational atoms and inequalities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpfoSentence {
    pub vars: Vec<Name>,
    pub matrix: EpfoFormula,
}

impl EpfoSentence {
    /// The canonically false sentence, exists x. not(x = x).
    pub fn falsum() -> Self {
        EpfoSentence {
            vars: vec!["x".to_string()],
            matrix: EpfoFormula::Neq(Term::Var("x".into()), Term::Var("x".into())),
        }
    }

    /// lambda_n: the active domain contains at least n elements.
    pub fn at_least(n: usize) -> Self {
        let vars: Vec<Name> = (1..=n).map(|i| format!("x{i}")).collect();
        let mut clauses = Vec::new();
        for (a, b) in vars.iter().tuple_combinations() {
            clauses.push(EpfoFormula::Neq(
                Term::Var(a.clone()),
                Term::Var(b.clone()),
            ));
        }
        EpfoSentence {
            vars,
            matrix: EpfoFormula::And(clauses),
        }
    }
}

impl fmt::Display for EpfoFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpfoFormula::And(cs) => {
                if cs.is_empty() {
                    write!(f, "true")
                } else {
                    write!(f, "({})", cs.iter().join(" & "))
                }
            }
            EpfoFormula::Or(cs) => {
                if cs.is_empty() {
                    write!(f, "false")
                } else {
                    write!(f, "({})", cs.iter().join(" v "))
                }
            }
            EpfoFormula::Atom(a) => a.fmt(f),
            EpfoFormula::Neq(s, t) => write!(f, "{s} != {t}"),
        }
    }
}

impl fmt::Display for EpfoSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.vars.is_empty() {
            write!(f, "exists {}: ", self.vars.iter().join(","))?;
        }
        self.matrix.fmt(f)
    }
}

fn eval_formula(formula: &EpfoFormula, d: &Database, env: &BTreeMap<Name, Name>) -> bool {
    match formula {
        EpfoFormula::And(cs) => cs.iter().all(|c| eval_formula(c, d, env)),
        EpfoFormula::Or(cs) => cs.iter().any(|c| eval_formula(c, d, env)),
        EpfoFormula::Atom(a) => {
            let mut args = Vec::with_capacity(a.args.len());
            for t in &a.args {
                match t {
                    Term::Const(n) => args.push(Term::Const(n.clone())),
                    Term::Var(x) => match env.get(x) {
                        Some(c) => args.push(Term::Const(c.clone())),
                        None => return false,
                    },
                    Term::Null(_) => return false,
                }
            }
            d.instance().contains(&Atom::new(a.symbol.clone(), args))
        }
        EpfoFormula::Neq(s, t) => {
            let resolve = |t: &Term| -> Option<Name> {
                match t {
                    Term::Const(n) => Some(n.clone()),
                    Term::Var(x) => env.get(x).cloned(),
                    Term::Null(_) => None,
                }
            };
            match (resolve(s), resolve(t)) {
                (Some(a), Some(b)) => a != b,
                _ => false,
            }
        }
    }
}

/// Active-domain evaluation of an ∃⁺FO(≠) sentence over a finite database.
pub fn evaluate_epfo(phi: &EpfoSentence, d: &Database) -> bool {
    let adom: Vec<Name> = d.adom().into_iter().collect();
    if phi.vars.is_empty() {
        return eval_formula(&phi.matrix, d, &BTreeMap::new());
    }
    if adom.is_empty() {
        return false;
    }
    let mut env = BTreeMap::new();
    assign_and_eval(phi, d, &adom, 0, &mut env)
}

fn assign_and_eval(
    phi: &EpfoSentence,
    d: &Database,
    adom: &[Name],
    idx: usize,
    env: &mut BTreeMap<Name, Name>,
) -> bool {
    if idx == phi.vars.len() {
        return eval_formula(&phi.matrix, d, env);
    }
    for c in adom {
        env.insert(phi.vars[idx].clone(), c.clone());
        if assign_and_eval(phi, d, adom, idx + 1, env) {
            env.remove(&phi.vars[idx]);
            return true;
        }
    }
    env.remove(&phi.vars[idx]);
    false
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force reference oracles, independent of the search path above.

    use super::*;

    /// Enumerate every function from the terms of `i` to the terms of `j`
    /// fixing C, and report whether any is a (injective) homomorphism.
    pub fn brute_force_hom_exists(
        i: &Instance,
        j: &Instance,
        c: &BTreeSet<Name>,
        injective: bool,
    ) -> bool {
        let src: Vec<Term> = i.terms().into_iter().collect();
        let dst: Vec<Term> = j.terms().into_iter().collect();
        if src.is_empty() {
            return true;
        }
        if dst.is_empty() {
            return false;
        }
        let n = src.len();
        let m = dst.len();
        let mut counter = vec![0usize; n];
        loop {
            let map: BTreeMap<&Term, &Term> =
                src.iter().enumerate().map(|(k, t)| (t, &dst[counter[k]])).collect();
            let fixes_c = src.iter().all(|t| match t {
                Term::Const(name) if c.contains(name) => map[t] == t,
                _ => true,
            });
            let inj_ok = !injective || {
                let images: BTreeSet<&&Term> = map.values().collect();
                images.len() == n
            };
            if fixes_c && inj_ok {
                let preserved = i.iter().all(|fact| {
                    let image = Atom::new(
                        fact.symbol.clone(),
                        fact.args.iter().map(|t| map[t].clone()).collect(),
                    );
                    j.contains(&image)
                });
                if preserved {
                    return true;
                }
            }
            // Advance the odometer.
            let mut k = 0;
            loop {
                if k == n {
                    return false;
                }
                counter[k] += 1;
                if counter[k] < m {
                    break;
                }
                counter[k] = 0;
                k += 1;
            }
        }
    }
}
