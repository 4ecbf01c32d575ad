//! Terms, atoms, instances, queries, dependencies, the query size measure
//! and the strict linear order over queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

pub type Name = String;

/// Constants, variables and labelled nulls live in disjoint namespaces
/// by construction of the enum; names must be non-empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Name),
    Var(Name),
    /// Chase-invented values and frozen query variables. For satisfaction
    /// checks a null behaves like an anonymous constant.
    Null(Name),
}

impl Term {
    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }
    pub fn name(&self) -> &str {
        match self {
            Term::Const(n) | Term::Var(n) | Term::Null(n) => n,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(n) => write!(f, "{n}"),
            Term::Var(n) => write!(f, "{n}"),
            Term::Null(n) => write!(f, "_{n}"),
        }
    }
}

/// A relational atom. Equality atoms never occur here; they are confined
/// to DED heads (see [`HeadAtom`]).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub symbol: Name,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(symbol: impl Into<Name>, args: Vec<Term>) -> Self {
        Atom {
            symbol: symbol.into(),
            args,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn vars(&self) -> impl Iterator<Item = &Name> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(n) => Some(n),
            _ => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &Name> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(n) => Some(n),
            _ => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.symbol, self.args.iter().join(","))
    }
}

/// Which side of the (D-schema, Q-schema) split a relation belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SchemaPart {
    Data,
    Query,
    Auxiliary,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    relations: BTreeMap<Name, (usize, SchemaPart)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("relation {0} declared with arity {1}, used with arity {2}")]
    ArityMismatch(Name, usize, usize),
    #[error("relation arity must be at least 1: {0}")]
    ZeroArity(Name),
    #[error("relation {0} declared in both D-schema and Q-schema")]
    SchemaOverlap(Name),
    #[error("database fact contains a null: {0}")]
    NullInDatabase(String),
    #[error("instance fact contains a variable: {0}")]
    VariableInFact(String),
    #[error("conjunctive query must have at least one atom")]
    EmptyQuery,
    #[error("query contains a null term: {0}")]
    NullInQuery(String),
    #[error("bound function violates l(n) >= n at n = {0}")]
    BoundTooSmall(usize),
    #[error("bound function is not monotone at n = {0}")]
    BoundNotMonotone(usize),
    #[error("affine bound needs slope >= 1")]
    BoundBadSlope,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn declare(
        &mut self,
        name: impl Into<Name>,
        arity: usize,
        part: SchemaPart,
    ) -> Result<(), CoreError> {
        let name = name.into();
        if arity == 0 {
            return Err(CoreError::ZeroArity(name));
        }
        match self.relations.get(&name) {
            Some(&(a, p)) => {
                if a != arity {
                    return Err(CoreError::ArityMismatch(name, a, arity));
                }
                if p != part && part != SchemaPart::Auxiliary && p != SchemaPart::Auxiliary {
                    return Err(CoreError::SchemaOverlap(name));
                }
                Ok(())
            }
            None => {
                self.relations.insert(name, (arity, part));
                Ok(())
            }
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).map(|&(a, _)| a)
    }

    pub fn part(&self, name: &str) -> Option<SchemaPart> {
        self.relations.get(name).map(|&(_, p)| p)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&Name, usize, SchemaPart)> {
        self.relations.iter().map(|(n, &(a, p))| (n, a, p))
    }

    pub fn part_relations(&self, part: SchemaPart) -> Vec<(Name, usize)> {
        self.relations
            .iter()
            .filter(|(_, &(_, p))| p == part)
            .map(|(n, &(a, _))| (n.clone(), a))
            .collect()
    }

    /// Check an atom against the declared arities, declaring unknown
    /// relations on first use.
    pub fn check_atom(&mut self, atom: &Atom, part: SchemaPart) -> Result<(), CoreError> {
        self.declare(atom.symbol.clone(), atom.args.len(), part)
    }
}

/// A set of ground facts. Constants and labelled nulls are allowed;
/// variables are not.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Instance {
    facts: BTreeSet<Atom>,
}

impl Instance {
    pub fn new() -> Self {
        Instance::default()
    }

    pub fn from_facts(facts: impl IntoIterator<Item = Atom>) -> Result<Self, CoreError> {
        let mut inst = Instance::new();
        for f in facts {
            inst.insert(f)?;
        }
        Ok(inst)
    }

    pub fn insert(&mut self, fact: Atom) -> Result<(), CoreError> {
        if !fact.is_ground() {
            return Err(CoreError::VariableInFact(fact.to_string()));
        }
        self.facts.insert(fact);
        Ok(())
    }

    pub fn contains(&self, fact: &Atom) -> bool {
        self.facts.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter()
    }

    /// Active domain: exactly the constants occurring in facts.
    pub fn adom(&self) -> BTreeSet<Name> {
        self.facts
            .iter()
            .flat_map(|a| a.constants().cloned())
            .collect()
    }

    /// All terms occurring in facts (constants and nulls).
    pub fn terms(&self) -> BTreeSet<Term> {
        self.facts
            .iter()
            .flat_map(|a| a.args.iter().cloned())
            .collect()
    }

    /// I|_A: keep the facts whose constants all lie in A.
    pub fn restrict(&self, a: &BTreeSet<Name>) -> Instance {
        Instance {
            facts: self
                .facts
                .iter()
                .filter(|f| f.constants().all(|c| a.contains(c)))
                .cloned()
                .collect(),
        }
    }

    pub fn is_subset(&self, other: &Instance) -> bool {
        self.facts.is_subset(&other.facts)
    }

    pub fn union(&self, other: &Instance) -> Instance {
        Instance {
            facts: self.facts.union(&other.facts).cloned().collect(),
        }
    }

    /// Rewrite every term through `f`, collapsing duplicate facts.
    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Instance {
        Instance {
            facts: self
                .facts
                .iter()
                .map(|a| Atom::new(a.symbol.clone(), a.args.iter().map(&mut f).collect()))
                .collect(),
        }
    }
}

impl FromIterator<Atom> for Instance {
    fn from_iter<T: IntoIterator<Item = Atom>>(iter: T) -> Self {
        Instance {
            facts: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        Ok(())
    }
}

/// A finite, null-free instance.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Database(Instance);

impl Database {
    pub fn new(instance: Instance) -> Result<Self, CoreError> {
        for fact in instance.iter() {
            if fact.args.iter().any(|t| t.is_null()) {
                return Err(CoreError::NullInDatabase(fact.to_string()));
            }
        }
        Ok(Database(instance))
    }

    pub fn empty() -> Self {
        Database(Instance::new())
    }

    pub fn instance(&self) -> &Instance {
        &self.0
    }

    pub fn adom(&self) -> BTreeSet<Name> {
        self.0.adom()
    }

    pub fn restrict(&self, a: &BTreeSet<Name>) -> Database {
        Database(self.0.restrict(a))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A boolean conjunctive query: every variable is implicitly existential.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cq {
    atoms: Vec<Atom>,
}

impl Cq {
    pub fn new(atoms: Vec<Atom>) -> Result<Self, CoreError> {
        if atoms.is_empty() {
            return Err(CoreError::EmptyQuery);
        }
        for a in &atoms {
            if let Some(t) = a.args.iter().find(|t| t.is_null()) {
                return Err(CoreError::NullInQuery(t.to_string()));
            }
        }
        Ok(Cq { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        self.atoms.iter().flat_map(|a| a.vars().cloned()).collect()
    }

    pub fn constants(&self) -> BTreeSet<Name> {
        self.atoms
            .iter()
            .flat_map(|a| a.constants().cloned())
            .collect()
    }

    pub fn size(&self) -> usize {
        self.atoms.len()
    }

    /// The canonical database [q]: the atoms of the query with each
    /// variable frozen as a tagged null.
    pub fn canonical_db(&self) -> Instance {
        self.atoms
            .iter()
            .map(|a| {
                Atom::new(
                    a.symbol.clone(),
                    a.args
                        .iter()
                        .map(|t| match t {
                            Term::Var(v) => Term::Null(format!("?{v}")),
                            other => other.clone(),
                        })
                        .collect(),
                )
            })
            .collect()
    }

    /// Gaifman-graph acyclicity: vertices are the terms of the query,
    /// edges join distinct terms cooccurring in an atom.
    pub fn is_acyclic(&self) -> bool {
        let mut vertices: BTreeSet<&Term> = BTreeSet::new();
        let mut edges: BTreeSet<(&Term, &Term)> = BTreeSet::new();
        for atom in &self.atoms {
            for t in &atom.args {
                vertices.insert(t);
            }
            for (s, t) in atom.args.iter().tuple_combinations() {
                if s != t {
                    let (a, b) = if s < t { (s, t) } else { (t, s) };
                    edges.insert((a, b));
                }
            }
        }
        // Union-find forest check: a cycle shows up as an edge inside one set.
        let index: BTreeMap<&Term, usize> =
            vertices.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let mut parent: Vec<usize> = (0..vertices.len()).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for (s, t) in edges {
            let (rs, rt) = (find(&mut parent, index[s]), find(&mut parent, index[t]));
            if rs == rt {
                return false;
            }
            parent[rs] = rt;
        }
        true
    }

    /// Rename variables apart with the given suffix.
    pub fn rename_apart(&self, suffix: &str) -> Cq {
        Cq {
            atoms: self
                .atoms
                .iter()
                .map(|a| {
                    Atom::new(
                        a.symbol.clone(),
                        a.args
                            .iter()
                            .map(|t| match t {
                                Term::Var(v) => Term::Var(format!("{v}{suffix}")),
                                other => other.clone(),
                            })
                            .collect(),
                    )
                })
                .collect(),
        }
    }

    /// Canonical form: atoms sorted, variables renamed to v0, v1, ... in
    /// first-occurrence order. For small queries the minimum over atom
    /// permutations is taken, so alpha-variants share one canonical form;
    /// larger queries fall back to a deterministic single pass.
    pub fn canonical(&self) -> Cq {
        const PERM_CAP: usize = 7;
        if self.atoms.len() <= PERM_CAP {
            let best = self
                .atoms
                .iter()
                .permutations(self.atoms.len())
                .map(|perm| rename_first_occurrence(&perm))
                .min()
                .expect("query is non-empty");
            Cq { atoms: best }
        } else {
            let mut atoms: Vec<&Atom> = self.atoms.iter().collect();
            atoms.sort();
            let mut renamed = rename_first_occurrence(&atoms);
            renamed.sort();
            let refs: Vec<&Atom> = renamed.iter().collect();
            Cq {
                atoms: rename_first_occurrence(&refs),
            }
        }
    }
}

fn rename_first_occurrence(atoms: &[&Atom]) -> Vec<Atom> {
    let mut map: BTreeMap<Name, Name> = BTreeMap::new();
    atoms
        .iter()
        .map(|a| {
            Atom::new(
                a.symbol.clone(),
                a.args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => {
                            let next = format!("v{}", map.len());
                            Term::Var(map.entry(v.clone()).or_insert(next).clone())
                        }
                        other => other.clone(),
                    })
                    .collect(),
            )
        })
        .collect()
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars = self.vars();
        if !vars.is_empty() {
            write!(f, "exists {}: ", vars.iter().join(","))?;
        }
        write!(f, "{}", self.atoms.iter().join(", "))
    }
}

/// A boolean UCQ in disjunction-of-CQs normal form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ucq {
    disjuncts: Vec<Cq>,
}

impl Ucq {
    pub fn new(disjuncts: Vec<Cq>) -> Result<Self, CoreError> {
        if disjuncts.is_empty() {
            return Err(CoreError::EmptyQuery);
        }
        Ok(Ucq { disjuncts })
    }

    pub fn single(cq: Cq) -> Self {
        Ucq {
            disjuncts: vec![cq],
        }
    }

    pub fn disjuncts(&self) -> &[Cq] {
        &self.disjuncts
    }

    pub fn constants(&self) -> BTreeSet<Name> {
        self.disjuncts
            .iter()
            .flat_map(|d| d.constants())
            .collect()
    }

    /// Canonical form: each disjunct canonicalized, disjuncts sorted by
    /// (size, serialization). Duplicate disjuncts are kept, so the size
    /// measure is stable under canonicalization.
    pub fn canonical(&self) -> Ucq {
        let mut ds: Vec<Cq> = self.disjuncts.iter().map(|d| d.canonical()).collect();
        ds.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
        Ucq { disjuncts: ds }
    }

    pub fn canonical_key(&self) -> String {
        self.canonical().to_string()
    }
}

impl fmt::Display for Ucq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.disjuncts.iter().join(" | "))
    }
}

/// ||q||: total count of relational atom occurrences across disjuncts.
pub fn query_size(q: &Ucq) -> usize {
    q.disjuncts.iter().map(|d| d.size()).sum()
}

/// Conjunction of UCQs, normalized by distribution into
/// disjunction-of-CQs. Variables of the operands are renamed apart.
pub fn conj(p: &Ucq, q: &Ucq) -> Ucq {
    let mut out = Vec::new();
    for (i, dp) in p.disjuncts.iter().enumerate() {
        for (j, dq) in q.disjuncts.iter().enumerate() {
            let left = dp.rename_apart(&format!("'l{i}"));
            let right = dq.rename_apart(&format!("'r{j}"));
            let mut atoms = left.atoms;
            atoms.extend(right.atoms);
            out.push(Cq { atoms });
        }
    }
    Ucq { disjuncts: out }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryOrdering {
    Less,
    Equal,
    Greater,
}

/// Strict total order on canonical forms: primary key ||q||, tie-break by
/// lexicographic comparison of canonical serializations.
pub fn query_compare(p: &Ucq, q: &Ucq) -> QueryOrdering {
    let (cp, cq) = (p.canonical(), q.canonical());
    let key = (query_size(&cp), cp.to_string());
    let other = (query_size(&cq), cq.to_string());
    match key.cmp(&other) {
        std::cmp::Ordering::Less => QueryOrdering::Less,
        std::cmp::Ordering::Equal => QueryOrdering::Equal,
        std::cmp::Ordering::Greater => QueryOrdering::Greater,
    }
}

/// Atoms allowed in a DED head disjunct.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum HeadAtom {
    Rel(Atom),
    Eq(Term, Term),
}

impl fmt::Display for HeadAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadAtom::Rel(a) => a.fmt(f),
            HeadAtom::Eq(s, t) => write!(f, "{s} = {t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct HeadDisjunct {
    pub atoms: Vec<HeadAtom>,
}

impl HeadDisjunct {
    pub fn vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            match a {
                HeadAtom::Rel(a) => out.extend(a.vars().cloned()),
                HeadAtom::Eq(s, t) => {
                    for term in [s, t] {
                        if let Term::Var(v) = term {
                            out.insert(v.clone());
                        }
                    }
                }
            }
        }
        out
    }
}

/// A disjunctive embedded dependency. Zero head disjuncts encode falsum.
/// Head variables absent from the body are implicitly existential.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ded {
    pub body: Vec<Atom>,
    pub heads: Vec<HeadDisjunct>,
}

impl Ded {
    pub fn body_vars(&self) -> BTreeSet<Name> {
        self.body.iter().flat_map(|a| a.vars().cloned()).collect()
    }

    /// Frontier variables: head variables that occur in the body.
    pub fn frontier(&self) -> BTreeSet<Name> {
        let body = self.body_vars();
        self.heads
            .iter()
            .flat_map(|h| h.vars())
            .filter(|v| body.contains(v))
            .collect()
    }

    /// Existential variables of one head disjunct.
    pub fn existentials(&self, disjunct: usize) -> BTreeSet<Name> {
        let body = self.body_vars();
        self.heads[disjunct]
            .vars()
            .into_iter()
            .filter(|v| !body.contains(v))
            .collect()
    }

    pub fn is_falsum(&self) -> bool {
        self.heads.is_empty()
    }
}

impl fmt::Display for Ded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> ", self.body.iter().join(", "))?;
        if self.heads.is_empty() {
            write!(f, "false")?;
        } else {
            let rendered = self
                .heads
                .iter()
                .map(|h| h.atoms.iter().join(", "))
                .join(" | ");
            write!(f, "{rendered}")?;
        }
        write!(f, ".")
    }
}

/// A computable bound with l(n) >= n, restricted to monotone affine or
/// tabulated-with-affine-tail form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundFunction {
    table: Vec<usize>,
    slope: usize,
    offset: usize,
}

impl BoundFunction {
    pub fn affine(slope: usize, offset: usize) -> Result<Self, CoreError> {
        BoundFunction::with_table(Vec::new(), slope, offset)
    }

    pub fn identity() -> Self {
        BoundFunction {
            table: Vec::new(),
            slope: 1,
            offset: 0,
        }
    }

    pub fn with_table(table: Vec<usize>, slope: usize, offset: usize) -> Result<Self, CoreError> {
        if slope == 0 {
            return Err(CoreError::BoundBadSlope);
        }
        for (n, &v) in table.iter().enumerate() {
            if v < n {
                return Err(CoreError::BoundTooSmall(n));
            }
            if n > 0 && v < table[n - 1] {
                return Err(CoreError::BoundNotMonotone(n));
            }
        }
        let tail_start = slope * table.len() + offset;
        if let Some(&last) = table.last() {
            if tail_start < last {
                return Err(CoreError::BoundNotMonotone(table.len()));
            }
        }
        Ok(BoundFunction {
            table,
            slope,
            offset,
        })
    }

    pub fn eval(&self, n: usize) -> usize {
        match self.table.get(n) {
            Some(&v) => v,
            None => self.slope * n + self.offset,
        }
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn affine_part(&self) -> (usize, usize) {
        (self.slope, self.offset)
    }
}

impl fmt::Display for BoundFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.table.is_empty() {
            write!(f, "affine {} {}", self.slope, self.offset)
        } else {
            write!(
                f,
                "table {} ; affine {} {}",
                self.table.iter().join(" "),
                self.slope,
                self.offset
            )
        }
    }
}

// Convenience constructors used across the crate and in tests.
pub fn c(name: &str) -> Term {
    Term::Const(name.to_string())
}
pub fn v(name: &str) -> Term {
    Term::Var(name.to_string())
}
pub fn nl(name: &str) -> Term {
    Term::Null(name.to_string())
}
pub fn atom(symbol: &str, args: &[Term]) -> Atom {
    Atom::new(symbol, args.to_vec())
}
