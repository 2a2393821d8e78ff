//! Finite-domain constraint satisfaction and optimisation.
//!
//! Constraints are opaque predicates over a declared scope of variables. The
//! search is plain depth-first backtracking: variables are assigned in
//! declaration order, values in ascending order, and each constraint is
//! checked as soon as the last variable of its scope has a value. Solutions
//! are therefore produced in lexicographic order.

use std::fmt;

use thiserror::Error;

pub type VarId = usize;
pub type Value = i64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("variable `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("constraint references undeclared variable {0}")]
    UnknownVariable(VarId),
    #[error("constraint has an empty scope")]
    EmptyScope,
}

type Predicate = Box<dyn Fn(&[Value]) -> bool + Send + Sync>;
type Objective = Box<dyn Fn(&[Value]) -> i64 + Send + Sync>;

struct Constraint {
    scope: Vec<VarId>,
    predicate: Predicate,
    /// Position in the search order at which the whole scope is assigned.
    ready_at: VarId,
}

/// A constraint satisfaction problem: variables, finite domains, constraints.
#[derive(Default)]
pub struct Csp {
    names: Vec<String>,
    domains: Vec<Vec<Value>>,
    constraints: Vec<Constraint>,
}

impl fmt::Debug for Csp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Csp")
            .field("variables", &self.names)
            .field("domains", &self.domains)
            .field("constraints", &self.constraints.len())
            .finish()
    }
}

impl Csp {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable; the domain is sorted and deduplicated.
    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        domain: impl IntoIterator<Item = Value>,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        let mut domain: Vec<Value> = domain.into_iter().collect();
        domain.sort_unstable();
        domain.dedup();
        if domain.is_empty() {
            return Err(ModelError::EmptyDomain(name));
        }
        self.names.push(name);
        self.domains.push(domain);
        Ok(self.domains.len() - 1)
    }

    /// Adds a predicate over `scope`; it receives the scope's values in scope order.
    pub fn add_constraint<F>(&mut self, scope: &[VarId], predicate: F) -> Result<(), ModelError>
    where
        F: Fn(&[Value]) -> bool + Send + Sync + 'static,
    {
        let ready_at = *scope.iter().max().ok_or(ModelError::EmptyScope)?;
        if ready_at >= self.domains.len() {
            return Err(ModelError::UnknownVariable(ready_at));
        }
        self.constraints.push(Constraint {
            scope: scope.to_vec(),
            predicate: Box::new(predicate),
            ready_at,
        });
        Ok(())
    }

    pub fn variable_count(&self) -> usize {
        self.domains.len()
    }

    pub fn name(&self, var: VarId) -> &str {
        &self.names[var]
    }

    pub fn domain(&self, var: VarId) -> &[Value] {
        &self.domains[var]
    }

    /// Direct evaluation of every constraint on a full assignment.
    pub fn is_satisfied_by(&self, assignment: &Assignment) -> bool {
        assignment.len() == self.domains.len()
            && assignment
                .values()
                .iter()
                .zip(&self.domains)
                .all(|(v, d)| d.binary_search(v).is_ok())
            && self
                .constraints
                .iter()
                .all(|c| self.check(c, assignment.values()))
    }

    fn check(&self, constraint: &Constraint, values: &[Value]) -> bool {
        let scoped: Vec<Value> = constraint.scope.iter().map(|&v| values[v]).collect();
        (constraint.predicate)(&scoped)
    }

    fn consistent_at(&self, depth: VarId, values: &[Value]) -> bool {
        self.constraints
            .iter()
            .filter(|c| c.ready_at == depth)
            .all(|c| self.check(c, values))
    }

    /// Visits solutions in lexicographic order until `visit` returns `false`.
    fn search<F: FnMut(&[Value]) -> bool>(&self, visit: &mut F) {
        let mut values = vec![0; self.domains.len()];
        self.descend(0, &mut values, visit);
    }

    fn descend<F: FnMut(&[Value]) -> bool>(
        &self,
        depth: usize,
        values: &mut Vec<Value>,
        visit: &mut F,
    ) -> bool {
        if depth == self.domains.len() {
            return visit(values);
        }
        for &value in &self.domains[depth] {
            values[depth] = value;
            if self.consistent_at(depth, values) && !self.descend(depth + 1, values, visit) {
                return false;
            }
        }
        true
    }
}

/// One value per variable, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<Value>);

impl Assignment {
    pub fn new(values: Vec<Value>) -> Self {
        Self(values)
    }

    pub fn get(&self, var: VarId) -> Value {
        self.0[var]
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A CSP with an integer objective to minimise.
pub struct Cop {
    pub csp: Csp,
    scope: Vec<VarId>,
    objective: Objective,
}

impl fmt::Debug for Cop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cop")
            .field("csp", &self.csp)
            .field("objective_scope", &self.scope)
            .finish()
    }
}

impl Cop {
    pub fn new<F>(csp: Csp, scope: &[VarId], objective: F) -> Result<Self, ModelError>
    where
        F: Fn(&[Value]) -> i64 + Send + Sync + 'static,
    {
        if let Some(&bad) = scope.iter().find(|&&v| v >= csp.variable_count()) {
            return Err(ModelError::UnknownVariable(bad));
        }
        Ok(Self {
            csp,
            scope: scope.to_vec(),
            objective: Box::new(objective),
        })
    }

    pub fn evaluate(&self, assignment: &Assignment) -> i64 {
        let scoped: Vec<Value> = self.scope.iter().map(|&v| assignment.get(v)).collect();
        (self.objective)(&scoped)
    }
}

/// First solution in lexicographic order, if any.
pub fn solve_satisfy(model: &Csp) -> Option<Assignment> {
    let mut found = None;
    model.search(&mut |values| {
        found = Some(Assignment::new(values.to_vec()));
        false
    });
    found
}

/// Every solution, in lexicographic order.
pub fn all_solutions(model: &Csp) -> Vec<Assignment> {
    let mut out = Vec::new();
    model.search(&mut |values| {
        out.push(Assignment::new(values.to_vec()));
        true
    });
    out
}

/// Minimising solution and its objective value.
///
/// The objective is opaque, so the whole solution set is visited; an
/// incumbent is replaced only by a strictly better solution, which makes the
/// lexicographically smallest optimum the result.
pub fn solve_minimize(model: &Cop) -> Option<(Assignment, i64)> {
    let mut best: Option<(Assignment, i64)> = None;
    let mut scoped = Vec::with_capacity(model.scope.len());
    model.csp.search(&mut |values| {
        scoped.clear();
        scoped.extend(model.scope.iter().map(|&v| values[v]));
        let z = (model.objective)(&scoped);
        if best.as_ref().is_none_or(|(_, incumbent)| z < *incumbent) {
            best = Some((Assignment::new(values.to_vec()), z));
        }
        true
    });
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn queens(n: usize) -> Csp {
        let mut csp = Csp::new();
        let vars: Vec<VarId> = (0..n)
            .map(|i| csp.add_variable(format!("q{i}"), 0..n as Value).unwrap())
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                let gap = (j - i) as Value;
                csp.add_constraint(&[vars[i], vars[j]], move |v| {
                    v[0] != v[1] && (v[0] - v[1]).abs() != gap
                })
                .unwrap();
            }
        }
        csp
    }

    /// Brute force over all n^n rows-per-column placements.
    fn queens_brute_force(n: usize) -> Vec<Vec<Value>> {
        let mut out = Vec::new();
        let total = n.pow(n as u32);
        for code in 0..total {
            let mut rows = Vec::with_capacity(n);
            let mut c = code;
            for _ in 0..n {
                rows.push((c % n) as Value);
                c /= n;
            }
            rows.reverse();
            let ok = (0..n).all(|i| {
                (i + 1..n).all(|j| {
                    rows[i] != rows[j] && (rows[i] - rows[j]).abs() != (j - i) as Value
                })
            });
            if ok {
                out.push(rows);
            }
        }
        out
    }

    #[test]
    fn satisfy_picks_lowest_value() {
        let mut csp = Csp::new();
        let x = csp.add_variable("x", [3, 1, 2]).unwrap();
        csp.add_constraint(&[x], |v| v[0] != 2).unwrap();
        assert_eq!(solve_satisfy(&csp), Some(Assignment::new(vec![1])));
        assert_eq!(
            all_solutions(&csp),
            vec![Assignment::new(vec![1]), Assignment::new(vec![3])]
        );
    }

    #[test]
    fn contradiction_has_no_solution() {
        let mut csp = Csp::new();
        let x = csp.add_variable("x", [1, 2]).unwrap();
        let y = csp.add_variable("y", [1, 2]).unwrap();
        csp.add_constraint(&[x, y], |v| v[0] == v[1] && v[0] != v[1])
            .unwrap();
        assert_eq!(solve_satisfy(&csp), None);
        assert!(all_solutions(&csp).is_empty());
    }

    #[test]
    fn unconstrained_enumerates_domain() {
        let mut csp = Csp::new();
        csp.add_variable("x", [1, 2]).unwrap();
        assert_eq!(all_solutions(&csp).len(), 2);
    }

    #[test]
    fn four_queens_matches_brute_force() {
        let csp = queens(4);
        let solutions = all_solutions(&csp);
        let expected = queens_brute_force(4);
        assert_eq!(expected.len(), 2);
        let got: Vec<Vec<Value>> = solutions.iter().map(|a| a.values().to_vec()).collect();
        assert_eq!(got, expected);
        let first = solve_satisfy(&csp).unwrap();
        assert!(csp.is_satisfied_by(&first));
        assert_eq!(first, solutions[0]);
    }

    #[test]
    fn six_queens_matches_brute_force() {
        let got: Vec<Vec<Value>> = all_solutions(&queens(6))
            .iter()
            .map(|a| a.values().to_vec())
            .collect();
        assert_eq!(got, queens_brute_force(6));
    }

    #[test]
    fn minimize_breaks_ties_low() {
        let mut csp = Csp::new();
        let x = csp.add_variable("x", 1..=10).unwrap();
        csp.add_constraint(&[x], |v| v[0] % 2 == 0).unwrap();
        let cop = Cop::new(csp, &[x], |v| (v[0] - 5).abs()).unwrap();
        let (best, z) = solve_minimize(&cop).unwrap();
        assert_eq!(best.get(x), 4);
        assert_eq!(z, 1);
    }

    #[test]
    fn constant_objective_returns_domain_minimum() {
        let mut csp = Csp::new();
        let x = csp.add_variable("x", [7, -3, 12]).unwrap();
        let cop = Cop::new(csp, &[x], |_| 0).unwrap();
        assert_eq!(solve_minimize(&cop), Some((Assignment::new(vec![-3]), 0)));
    }

    #[test]
    fn unsatisfiable_cop_is_absent() {
        let mut csp = Csp::new();
        let x = csp.add_variable("x", [1]).unwrap();
        csp.add_constraint(&[x], |_| false).unwrap();
        let cop = Cop::new(csp, &[x], |v| v[0]).unwrap();
        assert_eq!(solve_minimize(&cop), None);
    }

    #[test]
    fn model_errors() {
        let mut csp = Csp::new();
        assert_eq!(
            csp.add_variable("x", []).unwrap_err(),
            ModelError::EmptyDomain("x".into())
        );
        let x = csp.add_variable("x", [0]).unwrap();
        assert_eq!(
            csp.add_constraint(&[x, 4], |_| true).unwrap_err(),
            ModelError::UnknownVariable(4)
        );
        assert_eq!(
            csp.add_constraint(&[], |_| true).unwrap_err(),
            ModelError::EmptyScope
        );
        assert!(Cop::new(csp, &[3], |_| 0).is_err());
    }

    proptest! {
        /// Random pairwise "sum below" and "differ" constraints over small domains.
        #[test]
        fn solver_properties(
            sizes in prop::collection::vec(1i64..5, 1..5),
            rules in prop::collection::vec((0usize..5, 0usize..5, 0i64..8, any::<bool>()), 0..6),
            weights in prop::collection::vec(-3i64..4, 5),
        ) {
            let build = || {
                let mut csp = Csp::new();
                for (i, &s) in sizes.iter().enumerate() {
                    csp.add_variable(format!("v{i}"), 0..s).unwrap();
                }
                let n = sizes.len();
                for &(a, b, k, differ) in &rules {
                    let (a, b) = (a % n, b % n);
                    if differ {
                        csp.add_constraint(&[a, b], move |v| a == b || v[0] != v[1]).unwrap();
                    } else {
                        csp.add_constraint(&[a, b], move |v| v[0] + v[1] <= k).unwrap();
                    }
                }
                csp
            };
            let csp = build();
            let all = all_solutions(&csp);
            for s in &all {
                prop_assert!(csp.is_satisfied_by(s));
            }
            prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(solve_satisfy(&csp), all.first().cloned());

            let scope: Vec<VarId> = (0..sizes.len()).collect();
            let w = weights.clone();
            let objective = move |v: &[Value]| v.iter().zip(&w).map(|(x, c)| x * c).sum::<i64>();
            let cop = Cop::new(build(), &scope, objective).unwrap();
            let best = solve_minimize(&cop);
            match best {
                None => prop_assert!(all.is_empty()),
                Some((a, z)) => {
                    let min = all.iter().map(|s| cop.evaluate(s)).min().unwrap();
                    prop_assert_eq!(z, min);
                    let first_opt = all.iter().find(|s| cop.evaluate(s) == min).unwrap();
                    prop_assert_eq!(&a, first_opt);
                }
            }
        }
    }
}
