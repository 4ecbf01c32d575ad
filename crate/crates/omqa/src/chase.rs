//! Branching (disjunctive) chase over DED programs, certain-answer
//! computation with a step budget, and model checking.
//!
//! A fired trigger with a k-disjunct head splits the branch k ways;
//! falsum heads and constant-constant equations fail a branch. Every
//! saturated non-failed branch is a model of the program, and a certain
//! answer holds iff every branch (failed ones vacuously) satisfies the
//! query at some stage.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::core::{Atom, Database, Ded, HeadAtom, Instance, Name, Schema, SchemaPart, Term, Ucq};
use crate::hom::{evaluate_ucq, match_all};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Fire a trigger only if no head disjunct is already satisfied.
    #[default]
    Restricted,
    /// Fire once per (rule, frontier assignment), satisfied or not.
    SemiOblivious,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchStatus {
    Open,
    Saturated,
    Failed,
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub rule: usize,
    pub disjunct: usize,
    pub assignment: BTreeMap<Name, Term>,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let assignment = self
            .assignment
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .join(",");
        write!(f, "{}\t{}\t{}", self.rule, self.disjunct, assignment)
    }
}

#[derive(Clone, Debug)]
pub struct ChaseBranch {
    pub id: usize,
    pub instance: Instance,
    pub status: BranchStatus,
    pub trace: Vec<TraceStep>,
    /// Set for certain-answer runs once the branch satisfies the query.
    pub satisfied: bool,
    fired: BTreeSet<(usize, Vec<Term>)>,
}

#[derive(Clone, Debug)]
pub struct ChaseTree {
    pub root: Database,
    pub branches: Vec<ChaseBranch>,
    pub firings: usize,
    /// True when the budget ran out with open branches left.
    pub exhausted: bool,
}

impl ChaseTree {
    pub fn saturated_consistent(&self) -> impl Iterator<Item = &ChaseBranch> {
        self.branches
            .iter()
            .filter(|b| b.status == BranchStatus::Saturated)
    }

    /// Line-oriented log: `branch-id rule-id disjunct-index assignment`.
    pub fn trace_log(&self) -> String {
        let mut out = String::new();
        for b in &self.branches {
            for step in &b.trace {
                out.push_str(&format!("{}\t{step}\n", b.id));
            }
        }
        out
    }

    /// DOT rendering of the final instances, one cluster per branch.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph chase {\n");
        for b in &self.branches {
            out.push_str(&format!("  subgraph cluster_{} {{\n", b.id));
            out.push_str(&format!(
                "    label=\"branch {} ({:?})\";\n",
                b.id, b.status
            ));
            for (k, fact) in b.instance.iter().enumerate() {
                out.push_str(&format!(
                    "    b{}_f{} [shape=box,label=\"{}\"];\n",
                    b.id, k, fact
                ));
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    /// Carries the id of a saturated branch falsifying the query.
    No { witness: usize },
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Yes => write!(f, "yes"),
            Verdict::No { witness } => write!(f, "no (branch {witness})"),
            Verdict::Unknown => write!(f, "unknown"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ChaseError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(#[from] crate::core::CoreError),
}

fn check_schemas(d: &Database, sigma: &[Ded]) -> Result<(), ChaseError> {
    let mut schema = Schema::new();
    for fact in d.iter() {
        schema.check_atom(fact, SchemaPart::Auxiliary)?;
    }
    for rule in sigma {
        for a in &rule.body {
            schema.check_atom(a, SchemaPart::Auxiliary)?;
        }
        for h in &rule.heads {
            for ha in &h.atoms {
                if let HeadAtom::Rel(a) = ha {
                    schema.check_atom(a, SchemaPart::Auxiliary)?;
                }
            }
        }
    }
    Ok(())
}

/// Does `assignment` extend to a match of head disjunct `disjunct` inside
/// `instance`? Existential variables may bind to any existing term;
/// equalities are checked as term identity.
fn disjunct_satisfied(
    instance: &Instance,
    rule: &Ded,
    disjunct: usize,
    assignment: &BTreeMap<Name, Term>,
) -> bool {
    let head = &rule.heads[disjunct];
    let rel_atoms: Vec<Atom> = head
        .atoms
        .iter()
        .filter_map(|a| match a {
            HeadAtom::Rel(a) => Some(a.clone()),
            HeadAtom::Eq(_, _) => None,
        })
        .collect();
    let frontier_init: BTreeMap<Name, Term> = assignment
        .iter()
        .filter(|(k, _)| rule.frontier().contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let extensions = match_all(&rel_atoms, instance, &frontier_init, false, None);
    'ext: for ext in extensions {
        for a in &head.atoms {
            if let HeadAtom::Eq(s, t) = a {
                let resolve = |t: &Term| -> Option<Term> {
                    match t {
                        Term::Var(x) => ext.get(x).or_else(|| frontier_init.get(x)).cloned(),
                        ground => Some(ground.clone()),
                    }
                };
                match (resolve(s), resolve(t)) {
                    (Some(a), Some(b)) if a == b => {}
                    // An unbound side could be chosen equal; treat as
                    // satisfiable only when one side is free.
                    (None, _) | (_, None) => {}
                    _ => continue 'ext,
                }
            }
        }
        return true;
    }
    false
}

/// True iff every body match of `rule` in `i` extends to some head
/// disjunct match in `i`.
pub fn is_model_of(i: &Instance, rule: &Ded) -> bool {
    let matches = match_all(&rule.body, i, &BTreeMap::new(), false, None);
    matches.iter().all(|m| {
        (0..rule.heads.len()).any(|k| disjunct_satisfied(i, rule, k, m))
    })
}

struct Engine<'a> {
    rules: &'a [Ded],
    strategy: Strategy,
    budget: usize,
    firings: usize,
    fresh: usize,
    next_id: usize,
    query: Option<&'a Ucq>,
}

enum StepOutcome {
    Fired(Vec<ChaseBranch>),
    Saturated,
}

impl<'a> Engine<'a> {
    fn fresh_null(&mut self) -> Term {
        let n = self.fresh;
        self.fresh += 1;
        Term::Null(format!("n{n}"))
    }

    /// Find the first applicable trigger in deterministic order: rules in
    /// program order, assignments in sorted order.
    fn find_trigger(&self, branch: &ChaseBranch) -> Option<(usize, BTreeMap<Name, Term>)> {
        for (ri, rule) in self.rules.iter().enumerate() {
            let matches = match_all(&rule.body, &branch.instance, &BTreeMap::new(), false, None);
            for m in matches {
                let frontier: Vec<Term> = rule
                    .frontier()
                    .iter()
                    .map(|x| m.get(x).cloned().expect("frontier vars occur in body"))
                    .collect();
                let applicable = match self.strategy {
                    Strategy::SemiOblivious => !branch.fired.contains(&(ri, frontier)),
                    Strategy::Restricted => !(0..rule.heads.len())
                        .any(|k| disjunct_satisfied(&branch.instance, rule, k, &m)),
                };
                if applicable {
                    return Some((ri, m));
                }
            }
        }
        None
    }

    fn apply(&mut self, branch: &ChaseBranch, ri: usize, m: &BTreeMap<Name, Term>) -> Vec<ChaseBranch> {
        let rule = &self.rules[ri];
        let frontier: Vec<Term> = rule
            .frontier()
            .iter()
            .map(|x| m[x].clone())
            .collect();
        if rule.is_falsum() {
            let mut child = branch.clone();
            child.id = self.alloc_id();
            child.fired.insert((ri, frontier));
            child.status = BranchStatus::Failed;
            child.trace.push(TraceStep {
                rule: ri,
                disjunct: 0,
                assignment: m.clone(),
            });
            return vec![child];
        }
        let mut children = Vec::new();
        for k in 0..rule.heads.len() {
            let mut child = branch.clone();
            child.id = self.alloc_id();
            child.fired.insert((ri, frontier.clone()));
            child.trace.push(TraceStep {
                rule: ri,
                disjunct: k,
                assignment: m.clone(),
            });
            let mut env: BTreeMap<Name, Term> = m.clone();
            for x in rule.existentials(k) {
                let null = self.fresh_null();
                env.insert(x, null);
            }
            let mut failed = false;
            for ha in &rule.heads[k].atoms {
                match ha {
                    HeadAtom::Rel(a) => {
                        let fact = Atom::new(
                            a.symbol.clone(),
                            a.args
                                .iter()
                                .map(|t| match t {
                                    Term::Var(x) => env[x].clone(),
                                    ground => ground.clone(),
                                })
                                .collect(),
                        );
                        child
                            .instance
                            .insert(fact)
                            .expect("substituted head atom is ground");
                    }
                    HeadAtom::Eq(s, t) => {
                        let resolve = |env: &BTreeMap<Name, Term>, t: &Term| -> Term {
                            match t {
                                Term::Var(x) => env[x].clone(),
                                ground => ground.clone(),
                            }
                        };
                        let (lhs, rhs) = (resolve(&env, s), resolve(&env, t));
                        if !merge(&mut child.instance, &mut env, lhs, rhs) {
                            failed = true;
                            break;
                        }
                    }
                }
            }
            if failed {
                child.status = BranchStatus::Failed;
            }
            children.push(child);
        }
        children
    }

    fn alloc_id(&mut self) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn step(&mut self, branch: &ChaseBranch) -> StepOutcome {
        match self.find_trigger(branch) {
            Some((ri, m)) => {
                self.firings += 1;
                StepOutcome::Fired(self.apply(branch, ri, &m))
            }
            None => StepOutcome::Saturated,
        }
    }
}

/// Equate two ground terms inside a branch. Distinct constants fail the
/// branch (unique-name reading); a null merges freely into the other term.
fn merge(
    instance: &mut Instance,
    env: &mut BTreeMap<Name, Term>,
    s: Term,
    t: Term,
) -> bool {
    if s == t {
        return true;
    }
    let (victim, survivor) = match (&s, &t) {
        (Term::Const(_), Term::Const(_)) => return false,
        (Term::Null(_), _) => (s, t),
        (_, Term::Null(_)) => (t, s),
        _ => unreachable!("ground terms are constants or nulls"),
    };
    *instance = instance.map_terms(|x| if *x == victim { survivor.clone() } else { x.clone() });
    for val in env.values_mut() {
        if *val == victim {
            *val = survivor.clone();
        }
    }
    true
}

/// Breadth-first fair expansion of the branching chase, up to `budget`
/// total firings.
pub fn chase(
    d: &Database,
    sigma: &[Ded],
    budget: usize,
    strategy: Strategy,
) -> Result<ChaseTree, ChaseError> {
    run(d, sigma, budget, strategy, None)
}

/// D ∪ Σ ⊨ q with a three-valued verdict: yes when every branch satisfies
/// q at some stage (failed branches vacuously), no when some saturated
/// branch falsifies q, unknown on budget exhaustion.
pub fn certain_answer(
    d: &Database,
    sigma: &[Ded],
    q: &Ucq,
    budget: usize,
    strategy: Strategy,
) -> Result<Verdict, ChaseError> {
    let tree = run(d, sigma, budget, strategy, Some(q))?;
    Ok(verdict_of(&tree))
}

pub fn verdict_of(tree: &ChaseTree) -> Verdict {
    for b in &tree.branches {
        if b.status == BranchStatus::Saturated && !b.satisfied {
            return Verdict::No { witness: b.id };
        }
    }
    if tree
        .branches
        .iter()
        .all(|b| b.satisfied || b.status == BranchStatus::Failed)
    {
        return Verdict::Yes;
    }
    Verdict::Unknown
}

fn run(
    d: &Database,
    sigma: &[Ded],
    budget: usize,
    strategy: Strategy,
    query: Option<&Ucq>,
) -> Result<ChaseTree, ChaseError> {
    check_schemas(d, sigma)?;
    let mut engine = Engine {
        rules: sigma,
        strategy,
        budget,
        firings: 0,
        fresh: 0,
        next_id: 1,
        query,
    };
    let mut root_branch = ChaseBranch {
        id: 0,
        instance: d.instance().clone(),
        status: BranchStatus::Open,
        trace: Vec::new(),
        satisfied: false,
        fired: BTreeSet::new(),
    };
    if let Some(q) = query {
        root_branch.satisfied = evaluate_ucq(&root_branch.instance, q);
    }
    let mut queue: VecDeque<ChaseBranch> = VecDeque::new();
    let mut done: Vec<ChaseBranch> = Vec::new();
    let mut exhausted = false;
    if root_branch.satisfied {
        done.push(root_branch);
    } else {
        queue.push_back(root_branch);
    }
    // Round-robin over branches keeps expansion fair: an entailed query is
    // reached on every branch at some finite budget.
    while let Some(branch) = queue.pop_front() {
        if engine.firings >= engine.budget {
            exhausted = true;
            done.push(branch);
            done.extend(queue.drain(..));
            break;
        }
        match engine.step(&branch) {
            StepOutcome::Saturated => {
                let mut b = branch;
                b.status = BranchStatus::Saturated;
                done.push(b);
            }
            StepOutcome::Fired(children) => {
                for mut child in children {
                    if child.status == BranchStatus::Failed {
                        done.push(child);
                        continue;
                    }
                    if let Some(q) = engine.query {
                        if !child.satisfied {
                            child.satisfied = evaluate_ucq(&child.instance, q);
                        }
                        if child.satisfied {
                            // Entailment needs nothing further from this branch.
                            done.push(child);
                            continue;
                        }
                    }
                    queue.push_back(child);
                }
            }
        }
    }
    let firings = engine.firings;
    let mut branches = done;
    branches.sort_by_key(|b| b.id);
    Ok(ChaseTree {
        root: d.clone(),
        branches,
        firings,
        exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{atom, c, v, Cq, HeadDisjunct, Instance};

    fn db(facts: &[Atom]) -> Database {
        Database::new(Instance::from_facts(facts.to_vec()).unwrap()).unwrap()
    }

    fn tgd(body: &[Atom], head: &[Atom]) -> Ded {
        Ded {
            body: body.to_vec(),
            heads: vec![HeadDisjunct {
                atoms: head.iter().cloned().map(HeadAtom::Rel).collect(),
            }],
        }
    }

    fn ucq1(atoms: &[Atom]) -> Ucq {
        Ucq::single(Cq::new(atoms.to_vec()).unwrap())
    }

    #[test]
    fn single_tgd_saturates() {
        let d = db(&[atom("P", &[c("a")])]);
        let sigma = vec![tgd(&[atom("P", &[v("x")])], &[atom("Q", &[v("x")])])];
        let tree = chase(&d, &sigma, 10, Strategy::Restricted).unwrap();
        assert_eq!(tree.branches.len(), 1);
        let b = &tree.branches[0];
        assert_eq!(b.status, BranchStatus::Saturated);
        assert!(b.instance.contains(&atom("Q", &[c("a")])));
        assert_eq!(tree.firings, 1);
    }

    #[test]
    fn falsum_fails_branch() {
        let d = db(&[atom("P", &[c("a")])]);
        let sigma = vec![Ded {
            body: vec![atom("P", &[v("x")])],
            heads: vec![],
        }];
        let tree = chase(&d, &sigma, 10, Strategy::Restricted).unwrap();
        assert_eq!(tree.branches.len(), 1);
        assert_eq!(tree.branches[0].status, BranchStatus::Failed);
    }

    #[test]
    fn linear_order_rules_give_two_branches_on_two_constants() {
        let d = db(&[atom("AD", &[c("c1")]), atom("AD", &[c("c2")])]);
        let sigma = crate::succgen::order_axioms();
        let tree = chase(&d, &sigma, 200, Strategy::Restricted).unwrap();
        let consistent: Vec<_> = tree.saturated_consistent().collect();
        assert_eq!(consistent.len(), 2, "the two linear orders");
        for b in &consistent {
            let fwd = b.instance.contains(&atom("Less", &[c("c1"), c("c2")]));
            let bwd = b.instance.contains(&atom("Less", &[c("c2"), c("c1")]));
            assert!(fwd ^ bwd);
        }
    }

    #[test]
    fn certain_answer_yes_no_disjunctive() {
        let d = db(&[atom("P", &[c("a")])]);
        let q_only = vec![tgd(&[atom("P", &[v("x")])], &[atom("Q", &[v("x")])])];
        let q = ucq1(&[atom("Q", &[v("x")])]);
        assert_eq!(
            certain_answer(&d, &q_only, &q, 100, Strategy::Restricted).unwrap(),
            Verdict::Yes
        );

        let split = vec![Ded {
            body: vec![atom("P", &[v("x")])],
            heads: vec![
                HeadDisjunct {
                    atoms: vec![HeadAtom::Rel(atom("Q", &[v("x")]))],
                },
                HeadDisjunct {
                    atoms: vec![HeadAtom::Rel(atom("S", &[v("x")]))],
                },
            ],
        }];
        assert!(matches!(
            certain_answer(&d, &split, &q, 100, Strategy::Restricted).unwrap(),
            Verdict::No { .. }
        ));
        let either = Ucq::new(vec![
            Cq::new(vec![atom("Q", &[v("x")])]).unwrap(),
            Cq::new(vec![atom("S", &[v("x")])]).unwrap(),
        ])
        .unwrap();
        assert_eq!(
            certain_answer(&d, &split, &either, 100, Strategy::Restricted).unwrap(),
            Verdict::Yes
        );
    }

    #[test]
    fn all_branches_failing_entails_everything() {
        // P(x),P(y),P(z) -> x=y | x=z | y=z: inconsistent on 3 distinct P's.
        let rule = Ded {
            body: vec![
                atom("P", &[v("x")]),
                atom("P", &[v("y")]),
                atom("P", &[v("z")]),
            ],
            heads: vec![
                HeadDisjunct {
                    atoms: vec![HeadAtom::Eq(v("x"), v("y"))],
                },
                HeadDisjunct {
                    atoms: vec![HeadAtom::Eq(v("x"), v("z"))],
                },
                HeadDisjunct {
                    atoms: vec![HeadAtom::Eq(v("y"), v("z"))],
                },
            ],
        };
        let d3 = db(&[
            atom("P", &[c("a")]),
            atom("P", &[c("b")]),
            atom("P", &[c("d")]),
        ]);
        let q = ucq1(&[atom("R", &[v("x"), v("y")])]);
        assert_eq!(
            certain_answer(&d3, &[rule.clone()], &q, 500, Strategy::Restricted).unwrap(),
            Verdict::Yes,
            "no model extends three distinct P constants, so entailment is vacuous"
        );
        let d2 = db(&[atom("P", &[c("a")]), atom("P", &[c("b")])]);
        assert!(matches!(
            certain_answer(&d2, &[rule], &q, 500, Strategy::Restricted).unwrap(),
            Verdict::No { .. }
        ));
    }

    #[test]
    fn is_model_of_checks() {
        let sym = tgd(
            &[atom("R", &[v("x"), v("y")])],
            &[atom("R", &[v("y"), v("x")])],
        );
        let one = Instance::from_facts([atom("R", &[c("a"), c("b")])]).unwrap();
        assert!(!is_model_of(&one, &sym));
        let both = Instance::from_facts([
            atom("R", &[c("a"), c("b")]),
            atom("R", &[c("b"), c("a")]),
        ])
        .unwrap();
        assert!(is_model_of(&both, &sym));
        assert!(is_model_of(&Instance::new(), &sym));
    }

    #[test]
    fn saturated_branches_model_the_program() {
        let d = db(&[atom("P", &[c("a")]), atom("E", &[c("a"), c("b")])]);
        let sigma = vec![
            Ded {
                body: vec![atom("P", &[v("x")])],
                heads: vec![
                    HeadDisjunct {
                        atoms: vec![HeadAtom::Rel(atom("Q", &[v("x")]))],
                    },
                    HeadDisjunct {
                        atoms: vec![HeadAtom::Rel(atom("S", &[v("x"), v("w")]))],
                    },
                ],
            },
            tgd(
                &[atom("E", &[v("x"), v("y")])],
                &[atom("E", &[v("y"), v("y")])],
            ),
        ];
        let tree = chase(&d, &sigma, 200, Strategy::Restricted).unwrap();
        for b in tree.saturated_consistent() {
            for rule in &sigma {
                assert!(is_model_of(&b.instance, rule), "branch {} breaks {rule}", b.id);
            }
        }
    }

    #[test]
    fn budget_exhaustion_reports_unknown() {
        // E(x,y) -> exists z E(y,z) diverges.
        let d = db(&[atom("E", &[c("a"), c("b")])]);
        let sigma = vec![tgd(
            &[atom("E", &[v("x"), v("y")])],
            &[atom("E", &[v("y"), v("z")])],
        )];
        let q = ucq1(&[atom("Q", &[v("x")])]);
        assert_eq!(
            certain_answer(&d, &sigma, &q, 5, Strategy::SemiOblivious).unwrap(),
            Verdict::Unknown
        );
    }

    #[test]
    fn tgd_chase_matches_direct_evaluation() {
        // Universal-model property for equality-free single-head programs.
        let d = db(&[atom("E", &[c("a"), c("b")]), atom("E", &[c("b"), c("d")])]);
        let sigma = vec![tgd(
            &[atom("E", &[v("x"), v("y")]), atom("E", &[v("y"), v("z")])],
            &[atom("E", &[v("x"), v("z")])],
        )];
        let tree = chase(&d, &sigma, 200, Strategy::Restricted).unwrap();
        assert_eq!(tree.branches.len(), 1);
        let model = &tree.branches[0].instance;
        let q = ucq1(&[atom("E", &[c("a"), c("d")])]);
        assert_eq!(
            certain_answer(&d, &sigma, &q, 200, Strategy::Restricted).unwrap(),
            if evaluate_ucq(model, &q) { Verdict::Yes } else { Verdict::No { witness: 0 } }
        );
    }
}
