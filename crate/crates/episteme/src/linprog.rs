//! Exact linear programming over rationals.
//!
//! A small dense two-phase simplex with Bland's rule: no floating point, no
//! tolerances, every pivot in full-precision rational arithmetic. Problems
//! at this crate's scale have a handful of variables and rows, so clarity
//! and exactness win over sparse-matrix engineering. Infeasibility comes
//! with a checkable multiplier certificate, and optimal solutions are
//! re-substituted into every row before being returned.

use num_traits::{One, Signed, Zero};

use crate::model::Rational;

/// Direction of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One constraint: `coeffs · x REL rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// A linear program in the variables' natural form: maximize `objective · x`
/// subject to the rows, with each variable either nonnegative (default) or
/// free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    rows: Vec<Row>,
    objective: Vec<Rational>,
    free: Vec<bool>,
}

/// Result of maximizing a [`LinearProgram`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<Rational>,
        value: Rational,
    },
    /// No feasible point. The multipliers certify it: one per row, with
    /// `y ≥ 0` on `Le` rows and `y ≤ 0` on `Ge` rows; the aggregated row
    /// `Σ y_i·row_i` has nonnegative coefficients on nonnegative variables,
    /// zero on free ones, yet a negative right-hand side.
    Infeasible {
        multipliers: Vec<Rational>,
    },
    Unbounded,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            rows: Vec::new(),
            objective: vec![Rational::zero(); num_vars],
            free: vec![false; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Lifts the sign restriction on variable `j`.
    pub fn mark_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    pub fn set_objective(&mut self, coeffs: Vec<Rational>) {
        assert_eq!(coeffs.len(), self.num_vars, "one coefficient per variable");
        self.objective = coeffs;
    }

    pub fn constrain(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) {
        assert_eq!(coeffs.len(), self.num_vars, "one coefficient per variable");
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Runs the two-phase simplex. Deterministic: Bland's rule picks the
    /// lowest eligible column and row, so equal inputs give equal bases.
    pub fn maximize(&self) -> LpOutcome {
        let mut tableau = Tableau::build(self);
        if let Some(multipliers) = tableau.phase_one() {
            return LpOutcome::Infeasible { multipliers };
        }
        if !tableau.phase_two() {
            return LpOutcome::Unbounded;
        }
        let x = tableau.solution();
        let value = dot(&self.objective, &x);
        self.assert_feasible(&x);
        LpOutcome::Optimal { x, value }
    }

    /// Exact re-substitution of a claimed solution into every row.
    fn assert_feasible(&self, x: &[Rational]) {
        for (j, v) in x.iter().enumerate() {
            assert!(
                self.free[j] || !v.is_negative(),
                "solution violates nonnegativity"
            );
        }
        for row in &self.rows {
            let lhs = dot(&row.coeffs, x);
            let ok = match row.relation {
                Relation::Le => lhs <= row.rhs,
                Relation::Eq => lhs == row.rhs,
                Relation::Ge => lhs >= row.rhs,
            };
            assert!(ok, "solution violates a constraint row");
        }
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .fold(Rational::zero(), |acc, v| acc + v)
}

/// Dense simplex tableau in standard equality form `A x = b, x ≥ 0, b ≥ 0`.
///
/// Columns: each nonnegative variable contributes one column, each free
/// variable a difference pair, each inequality a slack, and each row one
/// artificial starting in the basis.
struct Tableau {
    /// `m × (ncols + 1)` rows; the extra last entry is the right-hand side.
    rows: Vec<Vec<Rational>>,
    /// Reduced-cost row and current objective value.
    z: Vec<Rational>,
    zval: Rational,
    basis: Vec<usize>,
    ncols: usize,
    artif_start: usize,
    /// Per original variable: column index, and the negative-part column
    /// for free variables.
    var_cols: Vec<(usize, Option<usize>)>,
    /// Sign applied to each original row to normalize `b ≥ 0`.
    row_signs: Vec<Rational>,
    /// Phase-two objective over the columns.
    cost: Vec<Rational>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let m = lp.rows.len();
        let mut var_cols = Vec::with_capacity(lp.num_vars);
        let mut ncols = 0;
        for j in 0..lp.num_vars {
            let pos = ncols;
            ncols += 1;
            let neg = lp.free[j].then(|| {
                ncols += 1;
                ncols - 1
            });
            var_cols.push((pos, neg));
        }
        let slack_start = ncols;
        ncols += lp
            .rows
            .iter()
            .filter(|r| r.relation != Relation::Eq)
            .count();
        let artif_start = ncols;
        ncols += m;

        let mut rows = Vec::with_capacity(m);
        let mut row_signs = Vec::with_capacity(m);
        let mut slack = slack_start;
        for (i, row) in lp.rows.iter().enumerate() {
            let sign = if row.rhs.is_negative() {
                -Rational::one()
            } else {
                Rational::one()
            };
            let mut r = vec![Rational::zero(); ncols + 1];
            for (j, coeff) in row.coeffs.iter().enumerate() {
                let v = coeff * &sign;
                let (pos, neg) = var_cols[j];
                r[pos] = v.clone();
                if let Some(neg) = neg {
                    r[neg] = -v;
                }
            }
            match row.relation {
                Relation::Le => {
                    r[slack] = sign.clone();
                    slack += 1;
                }
                Relation::Ge => {
                    r[slack] = -sign.clone();
                    slack += 1;
                }
                Relation::Eq => {}
            }
            r[artif_start + i] = Rational::one();
            r[ncols] = &row.rhs * &sign;
            rows.push(r);
            row_signs.push(sign);
        }

        let mut cost = vec![Rational::zero(); ncols];
        for (j, c) in lp.objective.iter().enumerate() {
            let (pos, neg) = var_cols[j];
            cost[pos] = c.clone();
            if let Some(neg) = neg {
                cost[neg] = -c.clone();
            }
        }

        Tableau {
            rows,
            z: vec![Rational::zero(); ncols],
            zval: Rational::zero(),
            basis: (artif_start..artif_start + m).collect(),
            ncols,
            artif_start,
            var_cols,
            row_signs,
            cost,
        }
    }

    /// Prices the given column costs against the current basis.
    fn reset_objective(&mut self, cost: &[Rational]) {
        self.z = cost.to_vec();
        self.zval = Rational::zero();
        for (r, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            let cb = cost[b].clone();
            for j in 0..self.ncols {
                let adj = &cb * &self.rows[r][j];
                self.z[j] -= adj;
            }
            self.zval += &cb * &self.rows[r][self.ncols];
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &piv;
        }
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for j in 0..=self.ncols {
                let adj = &f * &self.rows[r][j];
                self.rows[i][j] -= adj;
            }
        }
        if !self.z[c].is_zero() {
            let f = self.z[c].clone();
            for j in 0..self.ncols {
                let adj = &f * &self.rows[r][j];
                self.z[j] -= adj;
            }
            self.zval += &f * &self.rows[r][self.ncols];
        }
        self.basis[r] = c;
    }

    /// Bland iteration until no reduced cost is positive. Returns false on
    /// an unbounded ray. `allowed` filters the entering columns.
    fn run(&mut self, allowed: impl Fn(usize) -> bool) -> bool {
        loop {
            let entering = (0..self.ncols)
                .find(|&j| allowed(j) && !self.basis.contains(&j) && self.z[j].is_positive());
            let Some(c) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.ncols] / &row[c];
                let better = match &leaving {
                    None => true,
                    Some((best, r)) => {
                        ratio < *r || (ratio == *r && self.basis[i] < self.basis[*best])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            let Some((r, _)) = leaving else {
                return false;
            };
            self.pivot(r, c);
        }
    }

    /// Drives the artificial variables to zero. Returns the infeasibility
    /// multipliers when it cannot.
    fn phase_one(&mut self) -> Option<Vec<Rational>> {
        let mut phase_cost = vec![Rational::zero(); self.ncols];
        for cost in phase_cost.iter_mut().skip(self.artif_start) {
            *cost = -Rational::one();
        }
        self.reset_objective(&phase_cost);
        let finished = self.run(|_| true);
        assert!(finished, "phase one is bounded above by zero");
        if self.zval.is_negative() {
            // Dual prices off the artificial columns: y_i = −1 − z_i. They
            // aggregate the standardized rows into 0 ≤ Σy·(Ax) = Σy·b < 0,
            // and the row signs translate that back to the original rows.
            let y: Vec<Rational> = (0..self.rows.len())
                .map(|i| {
                    (-Rational::one() - &self.z[self.artif_start + i]) * &self.row_signs[i]
                })
                .collect();
            return Some(y);
        }
        // Pivot any degenerate artificial out of the basis; a row with no
        // structural coefficient left is redundant and can be dropped.
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] < self.artif_start {
                r += 1;
                continue;
            }
            match (0..self.artif_start).find(|&j| !self.rows[r][j].is_zero()) {
                Some(c) => self.pivot(r, c),
                None => {
                    self.rows.remove(r);
                    self.basis.remove(r);
                }
            }
        }
        None
    }

    /// Maximizes the true objective from the feasible basis. Returns false
    /// when the objective is unbounded above.
    fn phase_two(&mut self) -> bool {
        let cost = self.cost.clone();
        self.reset_objective(&cost);
        let artif_start = self.artif_start;
        self.run(|j| j < artif_start)
    }

    fn solution(&self) -> Vec<Rational> {
        let mut std = vec![Rational::zero(); self.ncols];
        for (r, &b) in self.basis.iter().enumerate() {
            std[b] = self.rows[r][self.ncols].clone();
        }
        self.var_cols
            .iter()
            .map(|&(pos, neg)| match neg {
                Some(neg) => &std[pos] - &std[neg],
                None => std[pos].clone(),
            })
            .collect()
    }
}
