//! LP problem container: bounded variables, linear constraints, and a
//! minimization objective.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(pub(crate) usize);

impl VarId {
    /// Position of this variable in a solution vector.
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub op: Op,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub(crate) bounds: Vec<(f64, f64)>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) objective: Vec<(usize, f64)>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with bounds; use +-infinity for unbounded sides.
    pub fn add_var(&mut self, lo: f64, hi: f64) -> VarId {
        assert!(lo <= hi, "variable bounds crossed: [{lo}, {hi}]");
        self.bounds.push((lo, hi));
        VarId(self.bounds.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_constraint(&mut self, terms: Vec<(VarId, f64)>, op: Op, rhs: f64) {
        debug_assert!(terms.iter().all(|(v, _)| v.0 < self.bounds.len()));
        self.constraints.push(Constraint {
            terms: terms.into_iter().map(|(v, c)| (v.0, c)).collect(),
            op,
            rhs,
        });
    }

    /// Minimize the given linear form.
    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>) {
        self.objective = terms.into_iter().map(|(v, c)| (v.0, c)).collect();
    }

    /// Checks a point against every bound and constraint within `tol`.
    pub fn check_solution(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.bounds.len() {
            return false;
        }
        for (xi, &(lo, hi)) in x.iter().zip(&self.bounds) {
            if *xi < lo - tol || *xi > hi + tol {
                return false;
            }
        }
        self.constraints.iter().all(|c| {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * x[v]).sum();
            match c.op {
                Op::Le => lhs <= c.rhs + tol,
                Op::Ge => lhs >= c.rhs - tol,
                Op::Eq => (lhs - c.rhs).abs() <= tol,
            }
        })
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * x[v]).sum()
    }
}
