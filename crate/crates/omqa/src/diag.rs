//! Diagonal enumeration over a finite theory list: interleaved selection of
//! theories with small witness databases for path queries, and the derived
//! cardinality sentence attached to an arbitrary UCQ.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::chase::{certain_answer, ChaseError, Strategy, Verdict};
use crate::core::{atom, v, Cq, Ded, Name, Schema, Term, Ucq};
use crate::hom::{ucq_contains, EpfoSentence};
use crate::locality::enumerate_databases;

/// The chain query with n edges: exists x0..xn R(x0,x1), ..., R(x{n-1},xn).
pub fn path_query(n: usize) -> Ucq {
    assert!(n >= 1, "path queries start at one edge");
    let atoms = (0..n)
        .map(|i| atom("R", &[v(&format!("x{i}")), v(&format!("x{}", i + 1))]))
        .collect();
    Ucq::single(Cq::new(atoms).expect("nonempty"))
}

/// "The domain has at least n elements."
pub fn at_least_sentence(n: usize) -> EpfoSentence {
    EpfoSentence::at_least(n)
}

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("oracle unresolved at step i={i}, n={n}, theory slot {j}")]
    OracleUnknown { i: usize, n: usize, j: usize },
    #[error("database search bound exceeded at step i={i} (n reached {n})")]
    BoundExceeded { i: usize, n: usize },
    #[error("sequence prefix too short: step {needed} required")]
    PrefixTooShort { needed: usize },
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

#[derive(Clone, Debug)]
pub struct TraceRow {
    pub i: usize,
    pub n: usize,
    /// One-based slot into the surviving theory list at selection time.
    pub j: usize,
    /// Original index of the selected theory in the input list.
    pub theory: usize,
    pub bumped: bool,
}

#[derive(Clone, Debug)]
pub struct SequencePrefix {
    pub n_values: Vec<usize>,
    /// Original indices of the selected theories, in selection order.
    pub theory_indices: Vec<usize>,
    pub trace: Vec<TraceRow>,
    /// The theory list was emptied before the requested number of steps.
    pub exhausted: bool,
}

impl SequencePrefix {
    pub fn render(&self) -> String {
        let mut out = String::from("i\tn\tslot\ttheory\tbumped\n");
        for r in &self.trace {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.i, r.n, r.j, r.theory, r.bumped);
        }
        if self.exhausted {
            out.push_str("# theory list exhausted\n");
        }
        out
    }
}

fn theory_constants(rules: &[Ded]) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    let mut add = |t: &Term| {
        if let Term::Const(c) = t {
            out.insert(c.clone());
        }
    };
    for r in rules {
        for a in &r.body {
            a.args.iter().for_each(&mut add);
        }
        for h in &r.heads {
            for ha in &h.atoms {
                match ha {
                    crate::core::HeadAtom::Rel(a) => a.args.iter().for_each(&mut add),
                    crate::core::HeadAtom::Eq(s, t) => {
                        add(s);
                        add(t);
                    }
                }
            }
        }
    }
    out
}

/// Is there a database D with at most `bound` constants such that D with the
/// theory certainly entails q? Databases are enumerated up to isomorphism
/// fixing the constants of q and of the theory.
fn small_witness_exists(
    theory: &[Ded],
    q: &Ucq,
    bound: usize,
    schema_d: &Schema,
    budget: usize,
) -> Result<Option<bool>, ChaseError> {
    let mut fixed = q.constants();
    fixed.extend(theory_constants(theory));
    let mut saw_unknown = false;
    for d in enumerate_databases(schema_d, &fixed, bound) {
        match certain_answer(&d, theory, q, budget, Strategy::Restricted)? {
            Verdict::Yes => return Ok(Some(true)),
            Verdict::Unknown => saw_unknown = true,
            Verdict::No { .. } => {}
        }
    }
    Ok(if saw_unknown { None } else { Some(false) })
}

/// The double-loop selection procedure over a finite theory list. At step i,
/// candidate slots j = 1..min(n, remaining) are probed for a witness
/// database of q_i within n constants (select as is) or n+1 constants
/// (advance n, then select); the selected theory is removed from the list.
/// `db_search_bound` guards against the unbounded growth of n.
pub fn run_procedure1(
    theories: &[Vec<Ded>],
    schema_d: &Schema,
    steps: usize,
    db_search_bound: usize,
    budget: usize,
) -> Result<SequencePrefix, DiagError> {
    let mut surviving: Vec<usize> = (0..theories.len()).collect();
    let mut n = 1usize;
    let mut prefix = SequencePrefix {
        n_values: Vec::new(),
        theory_indices: Vec::new(),
        trace: Vec::new(),
        exhausted: false,
    };
    for i in 1..=steps {
        if surviving.is_empty() {
            prefix.exhausted = true;
            break;
        }
        let q = path_query(i);
        let selected = 'search: loop {
            if n > db_search_bound {
                return Err(DiagError::BoundExceeded { i, n });
            }
            for j in 1..=n.min(surviving.len()) {
                let theory = &theories[surviving[j - 1]];
                match small_witness_exists(theory, &q, n, schema_d, budget)? {
                    None => return Err(DiagError::OracleUnknown { i, n, j }),
                    Some(true) => break 'search (j, false),
                    Some(false) => {}
                }
                match small_witness_exists(theory, &q, n + 1, schema_d, budget)? {
                    None => return Err(DiagError::OracleUnknown { i, n, j }),
                    Some(true) => {
                        n += 1;
                        break 'search (j, true);
                    }
                    Some(false) => {}
                }
            }
            n += 1;
        };
        let (j, bumped) = selected;
        let orig = surviving.remove(j - 1);
        prefix.n_values.push(n);
        prefix.theory_indices.push(orig);
        prefix.trace.push(TraceRow {
            i,
            n,
            j,
            theory: orig,
            bumped,
        });
    }
    Ok(prefix)
}

/// Post-hoc validation of the generated prefix: n-values are monotone, and
/// each selected theory has a witness database of its path query within the
/// recorded bound.
pub fn check_prefix(
    prefix: &SequencePrefix,
    theories: &[Vec<Ded>],
    schema_d: &Schema,
    budget: usize,
) -> Result<bool, DiagError> {
    if prefix.n_values.windows(2).any(|w| w[0] > w[1]) {
        return Ok(false);
    }
    for (k, (&nk, &ti)) in prefix
        .n_values
        .iter()
        .zip(&prefix.theory_indices)
        .enumerate()
    {
        let q = path_query(k + 1);
        match small_witness_exists(&theories[ti], &q, nk, schema_d, budget)? {
            Some(true) => {}
            Some(false) => return Ok(false),
            None => {
                return Err(DiagError::OracleUnknown {
                    i: k + 1,
                    n: nk,
                    j: 0,
                })
            }
        }
    }
    Ok(true)
}

/// The cardinality sentence attached to q: at-least(N_m + 1) for the least
/// m with q_m entailing q, or the unsatisfiable sentence if no path query
/// entails q. A conjunctive query maps into some path iff it maps into the
/// path with as many edges as the query has atoms, so the search is capped
/// by the largest disjunct.
pub fn phi_query(q: &Ucq, prefix: &SequencePrefix) -> Result<EpfoSentence, DiagError> {
    let cap = q
        .disjuncts()
        .iter()
        .map(|d| d.atoms().len())
        .max()
        .unwrap_or(0);
    for m in 1..=cap {
        if ucq_contains(&path_query(m), q) {
            return match prefix.n_values.get(m - 1) {
                Some(&nm) => Ok(at_least_sentence(nm + 1)),
                None => Err(DiagError::PrefixTooShort { needed: m }),
            };
        }
    }
    Ok(EpfoSentence::falsum())
}
