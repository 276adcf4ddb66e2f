//! Two-phase dense simplex over a standardized tableau.
//!
//! Pivot rule: Dantzig (most negative reduced cost, lowest column index on
//! ties) with a deterministic switch to Bland's rule after 10 * (m + n)
//! iterations to rule out cycling. Everything is deterministic, so repeated
//! solves of the same problem return identical vertices.

use super::problem::{Constraint, LpProblem, Op};
use crate::error::{Error, Result};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    TimeLimit,
}

const EPS: f64 = 1e-9;

/// How an original variable maps into the standardized nonnegative ones.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lo + z[i]
    Shifted { i: usize, lo: f64 },
    /// x = hi - z[i]
    Mirrored { i: usize, hi: f64 },
    /// x = z[p] - z[n]
    Split { p: usize, n: usize },
}

struct Standardized {
    maps: Vec<VarMap>,
    n: usize,
    rows: Vec<(Vec<f64>, f64)>, // dense equality rows over z, rhs >= 0
    cost: Vec<f64>,             // phase-2 cost over z
}

fn standardize(p: &LpProblem) -> Standardized {
    let mut maps = Vec::with_capacity(p.bounds.len());
    let mut n = 0usize;
    let mut extra_rows: Vec<Constraint> = Vec::new();
    for (vi, &(lo, hi)) in p.bounds.iter().enumerate() {
        if lo.is_finite() {
            maps.push(VarMap::Shifted { i: n, lo });
            n += 1;
            if hi.is_finite() {
                // x <= hi  ->  z <= hi - lo
                extra_rows.push(Constraint {
                    terms: vec![(vi, 1.0)],
                    op: Op::Le,
                    rhs: hi,
                });
            }
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored { i: n, hi });
            n += 1;
        } else {
            maps.push(VarMap::Split { p: n, n: n + 1 });
            n += 2;
        }
    }

    // substitute the variable maps into a dense row over z
    let sub = |terms: &[(usize, f64)], rhs: f64, n: usize, maps: &[VarMap]| {
        let mut row = vec![0.0; n];
        let mut b = rhs;
        for &(v, a) in terms {
            match maps[v] {
                VarMap::Shifted { i, lo } => {
                    row[i] += a;
                    b -= a * lo;
                }
                VarMap::Mirrored { i, hi } => {
                    row[i] -= a;
                    b -= a * hi;
                }
                VarMap::Split { p, n: neg } => {
                    row[p] += a;
                    row[neg] -= a;
                }
            }
        }
        (row, b)
    };

    let mut slack_count = 0;
    for c in p.constraints.iter().chain(&extra_rows) {
        if c.op != Op::Eq {
            slack_count += 1;
        }
    }
    let total = n + slack_count;
    let mut rows = Vec::with_capacity(p.constraints.len() + extra_rows.len());
    let mut slack_at = n;
    for c in p.constraints.iter().chain(&extra_rows) {
        let (mut row, mut b) = sub(&c.terms, c.rhs, n, &maps);
        row.resize(total, 0.0);
        match c.op {
            Op::Le => {
                row[slack_at] = 1.0;
                slack_at += 1;
            }
            Op::Ge => {
                row[slack_at] = -1.0;
                slack_at += 1;
            }
            Op::Eq => {}
        }
        if b < 0.0 {
            for x in row.iter_mut() {
                *x = -*x;
            }
            b = -b;
        }
        rows.push((row, b));
    }

    let mut cost = vec![0.0; total];
    for &(v, a) in &p.objective {
        match maps[v] {
            VarMap::Shifted { i, .. } => cost[i] += a,
            VarMap::Mirrored { i, .. } => cost[i] -= a,
            VarMap::Split { p, n: neg } => {
                cost[p] += a;
                cost[neg] -= a;
            }
        }
    }

    Standardized {
        maps,
        n: total,
        rows,
        cost,
    }
}

struct Tableau {
    m: usize,
    n: usize,           // structural + slack columns
    a: Vec<Vec<f64>>,   // m rows, width n + m (artificials) + 1 (rhs)
    basis: Vec<usize>,  // basic column per row
    deadline: Instant,
}

enum PivotResult {
    Optimal,
    Unbounded,
    TimeLimit,
}

impl Tableau {
    fn width(&self) -> usize {
        self.n + self.m + 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pv = self.a[row][col];
        let w = self.width();
        for j in 0..w {
            self.a[row][j] /= pv;
        }
        for r in 0..self.m {
            if r != row && self.a[r][col].abs() > 1e-300 {
                let factor = self.a[r][col];
                for j in 0..w {
                    self.a[r][j] -= factor * self.a[row][j];
                }
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations on the given cost row (reduced costs kept in
    /// `z`). Only columns < `ncols` are eligible to enter.
    fn iterate(&mut self, z: &mut Vec<f64>, ncols: usize) -> PivotResult {
        let max_dantzig = 10 * (self.m + self.n);
        let mut iters = 0usize;
        loop {
            if iters % 64 == 0 && Instant::now() > self.deadline {
                return PivotResult::TimeLimit;
            }
            let bland = iters > max_dantzig;
            let mut enter: Option<usize> = None;
            if bland {
                for (j, &zj) in z.iter().enumerate().take(ncols) {
                    if zj < -EPS {
                        enter = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = -EPS;
                for (j, &zj) in z.iter().enumerate().take(ncols) {
                    if zj < best {
                        best = zj;
                        enter = Some(j);
                    }
                }
            }
            let Some(col) = enter else {
                return PivotResult::Optimal;
            };
            // ratio test; ties resolved toward the lowest basic column
            let rhs = self.width() - 1;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let arc = self.a[r][col];
                if arc > EPS {
                    let ratio = self.a[r][rhs] / arc;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - EPS
                                || (ratio < lratio + EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return PivotResult::Unbounded;
            };
            // update reduced costs alongside the tableau
            let zc = z[col];
            self.pivot(row, col);
            let w = self.width();
            for j in 0..w - 1 {
                z[j] -= zc * self.a[row][j];
            }
            iters += 1;
        }
    }
}

/// Solves the problem with the given wall-clock budget.
pub fn solve(p: &LpProblem, time_limit: Duration) -> Result<LpOutcome> {
    if p.bounds.is_empty() {
        return Err(Error::Solver("LP has no variables".into()));
    }
    let std_form = standardize(p);
    let m = std_form.rows.len();
    let n = std_form.n;
    let deadline = Instant::now() + time_limit;

    // tableau with one artificial per row
    let width = n + m + 1;
    let mut a = Vec::with_capacity(m);
    for (r, (row, b)) in std_form.rows.iter().enumerate() {
        let mut full = vec![0.0; width];
        full[..row.len()].copy_from_slice(row);
        full[n + r] = 1.0;
        full[width - 1] = *b;
        a.push(full);
    }
    let basis: Vec<usize> = (0..m).map(|r| n + r).collect();
    let mut t = Tableau {
        m,
        n,
        a,
        basis,
        deadline,
    };

    // phase 1: minimize the sum of artificials
    let mut z1 = vec![0.0; width - 1];
    for r in 0..m {
        for (j, zj) in z1.iter_mut().enumerate() {
            *zj -= t.a[r][j];
        }
    }
    for zj in z1.iter_mut().skip(n) {
        *zj = 0.0;
    }
    match t.iterate(&mut z1, n) {
        PivotResult::TimeLimit => return Ok(LpOutcome::TimeLimit),
        PivotResult::Unbounded => return Ok(LpOutcome::Infeasible),
        PivotResult::Optimal => {}
    }
    let rhs = width - 1;
    let residual: f64 = (0..m)
        .filter(|&r| t.basis[r] >= n)
        .map(|r| t.a[r][rhs])
        .sum();
    if residual > 1e-7 {
        return Ok(LpOutcome::Infeasible);
    }
    // drive any zero-level artificials out of the basis
    for r in 0..m {
        if t.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t.a[r][j].abs() > EPS) {
                t.pivot(r, col);
            }
        }
    }

    // phase 2 reduced costs: c - c_B B^-1 A over the current tableau
    let mut z2 = std_form.cost.clone();
    z2.resize(width - 1, 0.0);
    for zj in z2.iter_mut().skip(n) {
        *zj = f64::INFINITY; // artificials may never re-enter
    }
    for r in 0..m {
        let b = t.basis[r];
        if b < n {
            let cb = std_form.cost[b];
            if cb != 0.0 {
                for j in 0..n {
                    z2[j] -= cb * t.a[r][j];
                }
            }
        }
    }
    for zj in z2.iter_mut().take(n) {
        if zj.abs() < 1e-12 {
            *zj = 0.0;
        }
    }
    match t.iterate(&mut z2, n) {
        PivotResult::TimeLimit => return Ok(LpOutcome::TimeLimit),
        PivotResult::Unbounded => return Ok(LpOutcome::Unbounded),
        PivotResult::Optimal => {}
    }

    // read out z and map back to the original variables
    let mut zvals = vec![0.0; n];
    for r in 0..m {
        if t.basis[r] < n {
            zvals[t.basis[r]] = t.a[r][rhs];
        }
    }
    let x: Vec<f64> = std_form
        .maps
        .iter()
        .map(|mapping| match *mapping {
            VarMap::Shifted { i, lo } => lo + zvals[i],
            VarMap::Mirrored { i, hi } => hi - zvals[i],
            VarMap::Split { p, n } => zvals[p] - zvals[n],
        })
        .collect();
    let objective = p.objective_value(&x);
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::problem::{LpProblem, Op};
    use crate::rng::Rng;

    fn solve_now(p: &LpProblem) -> LpOutcome {
        solve(p, Duration::from_secs(10)).unwrap()
    }

    #[test]
    fn minimal_bounded_problem() {
        // minimize x subject to x >= 1, x in [0, 5]
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, 5.0);
        p.add_constraint(vec![(x, 1.0)], Op::Ge, 1.0);
        p.set_objective(vec![(x, 1.0)]);
        match solve_now(&p) {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 1.0).abs() < 1e-9);
                assert!((objective - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradictory_constraints_infeasible() {
        let mut p = LpProblem::new();
        let x = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
        p.add_constraint(vec![(x, 1.0)], Op::Ge, 1.0);
        p.add_constraint(vec![(x, 1.0)], Op::Le, 0.0);
        p.set_objective(vec![(x, 1.0)]);
        assert_eq!(solve_now(&p), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut p = LpProblem::new();
        let x = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
        p.set_objective(vec![(x, 1.0)]);
        assert_eq!(solve_now(&p), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_and_free_variables() {
        // minimize |x| via d: x free, x = -3; min d subject to x <= d, -x <= d
        let mut p = LpProblem::new();
        let x = p.add_var(f64::NEG_INFINITY, f64::INFINITY);
        let d = p.add_var(0.0, f64::INFINITY);
        p.add_constraint(vec![(x, 1.0)], Op::Eq, -3.0);
        p.add_constraint(vec![(x, 1.0), (d, -1.0)], Op::Le, 0.0);
        p.add_constraint(vec![(x, -1.0), (d, -1.0)], Op::Le, 0.0);
        p.set_objective(vec![(d, 1.0)]);
        match solve_now(&p) {
            LpOutcome::Optimal { x, .. } => {
                assert!((x[0] + 3.0).abs() < 1e-9);
                assert!((x[1] - 3.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_two_variable_maximum() {
        // maximize 3a + 5b s.t. a <= 4, 2b <= 12, 3a + 2b <= 18 -> (2, 6), 36
        let mut p = LpProblem::new();
        let a = p.add_var(0.0, f64::INFINITY);
        let b = p.add_var(0.0, f64::INFINITY);
        p.add_constraint(vec![(a, 1.0)], Op::Le, 4.0);
        p.add_constraint(vec![(b, 2.0)], Op::Le, 12.0);
        p.add_constraint(vec![(a, 3.0), (b, 2.0)], Op::Le, 18.0);
        p.set_objective(vec![(a, -3.0), (b, -5.0)]);
        match solve_now(&p) {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 2.0).abs() < 1e-9);
                assert!((x[1] - 6.0).abs() < 1e-9);
                assert!((objective + 36.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_problems_feasible_solutions_verify() {
        let mut rng = Rng::new(99);
        let mut solved = 0;
        for _ in 0..50 {
            let mut p = LpProblem::new();
            let nv = 3 + rng.below(4);
            let vars: Vec<_> = (0..nv).map(|_| p.add_var(-5.0, 5.0)).collect();
            for _ in 0..(2 + rng.below(5)) {
                let terms: Vec<_> = vars
                    .iter()
                    .map(|&v| (v, rng.range(-2.0, 2.0)))
                    .collect();
                let op = match rng.below(3) {
                    0 => Op::Le,
                    1 => Op::Ge,
                    _ => Op::Eq,
                };
                p.add_constraint(terms, op, rng.range(-3.0, 3.0));
            }
            p.set_objective(vars.iter().map(|&v| (v, rng.range(-1.0, 1.0))).collect());
            if let LpOutcome::Optimal { x, .. } = solve_now(&p) {
                assert!(p.check_solution(&x, 1e-6), "optimal point violates constraints");
                solved += 1;
            }
        }
        assert!(solved > 10, "only {solved}/50 random problems were feasible");
    }

    #[test]
    fn deterministic_vertices() {
        let mut p = LpProblem::new();
        let a = p.add_var(0.0, 10.0);
        let b = p.add_var(0.0, 10.0);
        p.add_constraint(vec![(a, 1.0), (b, 1.0)], Op::Ge, 5.0);
        p.set_objective(vec![(a, 1.0), (b, 1.0)]);
        let r1 = solve_now(&p);
        let r2 = solve_now(&p);
        assert_eq!(r1, r2);
    }
}
