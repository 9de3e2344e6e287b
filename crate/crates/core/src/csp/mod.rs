//! CSP data model: variables with ordered finite domains and a list of
//! alldifferent, disequality and table constraints.
//!
//! Declaration order is semantic. The solver searches variables and values in
//! exactly the order they appear here.

mod format;
mod generate;

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use format::{parse_instance, serialize_instance, ParseError};
pub use generate::{generate_instance, Family, GenerateError};

/// Index of a variable inside its [`CspInstance`].
pub type VarId = usize;

/// Errors raised while assembling a [`CspInstance`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("variable `{name}` lists value {value} twice")]
    DuplicateValue { name: String, value: i64 },
    #[error("constraint {index}: unknown variable `{name}`")]
    UnknownVariable { index: usize, name: String },
    #[error("constraint {index}: variable `{name}` appears twice in the scope")]
    RepeatedScopeVariable { index: usize, name: String },
    #[error("constraint {index}: {message}")]
    BadScope { index: usize, message: String },
    #[error("constraint {index}: tuple {tuple} has arity {found}, expected {expected}")]
    ArityMismatch {
        index: usize,
        tuple: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    /// Values in search order.
    pub domain: Vec<i64>,
    /// Introduced by decomposing an expression rather than declared by the modeller.
    pub auxiliary: bool,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: Vec<i64>) -> Self {
        Variable {
            name: name.into(),
            domain,
            auxiliary: false,
        }
    }

    pub fn aux(mut self) -> Self {
        self.auxiliary = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Allowed,
    Disallowed,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Allowed => "allowed",
            Polarity::Disallowed => "disallowed",
        }
    }
}

/// Extensional constraint. Tuples keep their declaration order; a hash index
/// backs the satisfaction test.
#[derive(Debug, Clone)]
pub struct Table {
    pub polarity: Polarity,
    pub tuples: Vec<Vec<i64>>,
    index: HashSet<Vec<i64>>,
}

impl Table {
    pub fn new(polarity: Polarity, tuples: Vec<Vec<i64>>) -> Self {
        let index = tuples.iter().cloned().collect();
        Table {
            polarity,
            tuples,
            index,
        }
    }

    pub fn contains(&self, tuple: &[i64]) -> bool {
        self.index.contains(tuple)
    }
}

impl PartialEq for Table {
    fn eq(&self, other: &Self) -> bool {
        self.polarity == other.polarity && self.tuples == other.tuples
    }
}

impl Eq for Table {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintKind {
    AllDifferent,
    Disequality,
    Table(Table),
}

impl ConstraintKind {
    /// Short tag used in reports and symmetry signatures.
    pub fn tag(&self) -> &'static str {
        match self {
            ConstraintKind::AllDifferent => "alldiff",
            ConstraintKind::Disequality => "diseq",
            ConstraintKind::Table(_) => "table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    /// Variable indices, in declaration order.
    pub scope: Vec<VarId>,
}

impl Constraint {
    pub fn all_different(scope: Vec<VarId>) -> Self {
        Constraint {
            kind: ConstraintKind::AllDifferent,
            scope,
        }
    }

    pub fn disequality(a: VarId, b: VarId) -> Self {
        Constraint {
            kind: ConstraintKind::Disequality,
            scope: vec![a, b],
        }
    }

    pub fn table(scope: Vec<VarId>, polarity: Polarity, tuples: Vec<Vec<i64>>) -> Self {
        Constraint {
            kind: ConstraintKind::Table(Table::new(polarity, tuples)),
            scope,
        }
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    /// Satisfaction test for a full assignment of the scope, given in scope order.
    pub fn is_satisfied(&self, values: &[i64]) -> bool {
        debug_assert_eq!(values.len(), self.scope.len());
        match &self.kind {
            ConstraintKind::AllDifferent => {
                let mut seen = HashSet::with_capacity(values.len());
                values.iter().all(|v| seen.insert(*v))
            }
            ConstraintKind::Disequality => values[0] != values[1],
            ConstraintKind::Table(t) => match t.polarity {
                Polarity::Allowed => t.contains(values),
                Polarity::Disallowed => !t.contains(values),
            },
        }
    }
}

/// A validated CSP instance. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspInstance {
    name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
}

impl CspInstance {
    pub fn new(
        name: impl Into<String>,
        variables: Vec<Variable>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, ModelError> {
        let mut names = HashSet::with_capacity(variables.len());
        for var in &variables {
            if !names.insert(var.name.as_str()) {
                return Err(ModelError::DuplicateVariable(var.name.clone()));
            }
            if var.domain.is_empty() {
                return Err(ModelError::EmptyDomain(var.name.clone()));
            }
            let mut seen = HashSet::with_capacity(var.domain.len());
            for &v in &var.domain {
                if !seen.insert(v) {
                    return Err(ModelError::DuplicateValue {
                        name: var.name.clone(),
                        value: v,
                    });
                }
            }
        }
        for (index, c) in constraints.iter().enumerate() {
            let mut seen = HashSet::with_capacity(c.scope.len());
            for &v in &c.scope {
                if v >= variables.len() {
                    return Err(ModelError::UnknownVariable {
                        index,
                        name: format!("#{v}"),
                    });
                }
                if !seen.insert(v) {
                    return Err(ModelError::RepeatedScopeVariable {
                        index,
                        name: variables[v].name.clone(),
                    });
                }
            }
            match &c.kind {
                ConstraintKind::AllDifferent if c.scope.len() < 2 => {
                    return Err(ModelError::BadScope {
                        index,
                        message: "alldiff needs at least two variables".into(),
                    })
                }
                ConstraintKind::Disequality if c.scope.len() != 2 => {
                    return Err(ModelError::BadScope {
                        index,
                        message: "diseq needs exactly two variables".into(),
                    })
                }
                ConstraintKind::Table(t) => {
                    if c.scope.is_empty() {
                        return Err(ModelError::BadScope {
                            index,
                            message: "table needs at least one variable".into(),
                        });
                    }
                    for (i, tuple) in t.tuples.iter().enumerate() {
                        if tuple.len() != c.scope.len() {
                            return Err(ModelError::ArityMismatch {
                                index,
                                tuple: i,
                                expected: c.scope.len(),
                                found: tuple.len(),
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(CspInstance {
            name: name.into(),
            variables,
            constraints,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Checks a complete assignment (one value per variable, declaration order).
    pub fn is_solution(&self, assignment: &[i64]) -> bool {
        if assignment.len() != self.variables.len() {
            return false;
        }
        let in_domains = self
            .variables
            .iter()
            .zip(assignment)
            .all(|(var, v)| var.domain.contains(v));
        in_domains
            && self.constraints.iter().all(|c| {
                let vals: Vec<i64> = c.scope.iter().map(|&x| assignment[x]).collect();
                c.is_satisfied(&vals)
            })
    }

    /// Counts solutions by plain enumeration. Only meant for tiny instances.
    pub fn count_solutions_brute_force(&self) -> u64 {
        let n = self.variables.len();
        let mut idx = vec![0usize; n];
        let mut count = 0;
        if n == 0 {
            return 1;
        }
        loop {
            let assignment: Vec<i64> = idx
                .iter()
                .enumerate()
                .map(|(i, &k)| self.variables[i].domain[k])
                .collect();
            if self.is_solution(&assignment) {
                count += 1;
            }
            let mut pos = n;
            loop {
                if pos == 0 {
                    return count;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.variables[pos].domain.len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    pub(crate) fn name_lookup(&self) -> HashMap<&str, VarId> {
        self.variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect()
    }
}

impl fmt::Display for CspInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_instance(self))
    }
}
