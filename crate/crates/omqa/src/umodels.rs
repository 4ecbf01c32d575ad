//! Universal model sets from hitting sets: each derivable UCQ contributes
//! the set of canonical databases of its disjuncts, a hitting set picks one
//! disjunct per query, and the picked databases are amalgamated sharing
//! only the constants of the input database.

use std::collections::BTreeSet;

use itertools::Itertools;
use thiserror::Error;

use crate::core::{Database, Instance, Name, Term, Ucq};
use crate::hom::evaluate_ucq;

#[derive(Debug, Error)]
pub enum UModelsError {
    #[error("a derivable query has no disjuncts; no hitting set exists")]
    EmptyDisjunctSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HittingMode {
    /// No proper subset is a hitting set.
    InclusionMinimal,
    /// Smallest possible cardinality.
    CardinalityMinimum,
}

/// The canonical databases of the disjuncts of q, deduplicated. The query
/// is canonicalized first so that renamed variants of a disjunct collapse.
pub fn disjunct_set(q: &Ucq) -> Vec<Instance> {
    let mut out: Vec<Instance> = Vec::new();
    for cq in q.canonical().disjuncts() {
        let db = cq.canonical_db();
        if !out.contains(&db) {
            out.push(db);
        }
    }
    out
}

/// One disjunct-set per derivable query.
pub fn gamma(lambda: &[Ucq]) -> Vec<Vec<Instance>> {
    lambda.iter().map(disjunct_set).collect()
}

fn hits(candidate: &[&Instance], family: &[Vec<Instance>]) -> bool {
    family
        .iter()
        .all(|member| member.iter().any(|e| candidate.contains(&e)))
}

/// All minimal hitting sets of the family, under either notion of minimal.
/// The empty family has the empty hitting set; an empty member admits none.
pub fn minimal_hitting_sets(
    family: &[Vec<Instance>],
    mode: HittingMode,
) -> Result<Vec<Vec<Instance>>, UModelsError> {
    if family.iter().any(|m| m.is_empty()) {
        return Err(UModelsError::EmptyDisjunctSet);
    }
    let mut elements: Vec<Instance> = Vec::new();
    for member in family {
        for e in member {
            if !elements.contains(e) {
                elements.push(e.clone());
            }
        }
    }
    let mut found: Vec<Vec<Instance>> = Vec::new();
    for k in 0..=elements.len() {
        if mode == HittingMode::CardinalityMinimum && !found.is_empty() {
            break;
        }
        for combo in elements.iter().combinations(k) {
            if !hits(&combo, family) {
                continue;
            }
            // Size-ascending enumeration: strict subsets were already seen,
            // so a superset of a found set is not inclusion-minimal.
            let minimal = !found
                .iter()
                .any(|f| f.iter().all(|e| combo.contains(&e)));
            if minimal {
                found.push(combo.into_iter().cloned().collect());
            }
        }
    }
    Ok(found)
}

/// Union of isomorphic copies sharing only the terms in `shared`: per
/// member, every null and every constant outside `shared` is renamed apart
/// with the member's position.
pub fn amalgamate(h: &[Instance], shared: &BTreeSet<Name>) -> Instance {
    let mut out = Instance::new();
    for (i, member) in h.iter().enumerate() {
        let copy = member.map_terms(|t| match t {
            Term::Null(n) => Term::Null(format!("{n}#{i}")),
            Term::Const(c) if !shared.contains(c) => Term::Null(format!("{c}#{i}")),
            other => other.clone(),
        });
        out = out.union(&copy);
    }
    out
}

/// The universal model set for the derivable queries `lambda` over D: one
/// amalgamated instance per minimal hitting set of the disjunct-set family.
pub fn universal_model_set(
    lambda: &[Ucq],
    d: &Database,
    mode: HittingMode,
) -> Result<Vec<Instance>, UModelsError> {
    let family = gamma(lambda);
    let shared = d.adom();
    let mut out: Vec<Instance> = minimal_hitting_sets(&family, mode)?
        .iter()
        .map(|h| amalgamate(h, &shared))
        .collect();
    out.sort();
    out.dedup();
    // Copies must not leak nulls across hitting-set members.
    debug_assert!(out.iter().all(|i| i
        .terms()
        .iter()
        .all(|t| !matches!(t, Term::Const(c) if !shared.contains(c)))));
    Ok(out)
}

/// q is a consequence of the derivable queries iff it holds in every
/// universal model.
pub fn certain_via_umodels(models: &[Instance], q: &Ucq) -> bool {
    models.iter().all(|m| evaluate_ucq(m, q))
}
