//! Small dense linear programs: two-phase primal simplex with Bland's rule.
//!
//! The ball-fit problems have at most a few dozen rows and seven-ish
//! variables, so a dense tableau is plenty. Bland's pivoting rule makes the
//! solver deterministic and cycle-free, which matters more here than speed:
//! the fit must produce byte-identical output across runs.
//!
//! Variables are free (unbounded both ways); sign-constrained variables must
//! be expressed through explicit rows. Internally each variable is split as
//! x = x⁺ − x⁻.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `minimize objective·x subject to a_ub·x ≤ b_ub and a_eq·x = b_eq`.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point (meaningful only when status is `Optimal`).
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub objective: f64,
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

/// Solves a small dense LP. Infeasibility and unboundedness are reported in
/// the status; `Err` is reserved for malformed input (dimension mismatch).
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let n = p.objective.len();
    if p.a_ub.len() != p.b_ub.len() || p.a_eq.len() != p.b_eq.len() {
        return Err(Error::invalid("LP row/rhs count mismatch"));
    }
    for row in p.a_ub.iter().chain(p.a_eq.iter()) {
        if row.len() != n {
            return Err(Error::invalid("LP row length does not match objective"));
        }
    }

    let m_ub = p.a_ub.len();
    let m = m_ub + p.a_eq.len();
    // Columns: 2n split variables, then m_ub slacks, then artificials.
    let split = 2 * n;
    let ncols_core = split + m_ub;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for (i, a) in p.a_ub.iter().enumerate() {
        let mut row = vec![0.0; ncols_core];
        for (j, &v) in a.iter().enumerate() {
            row[2 * j] = v;
            row[2 * j + 1] = -v;
        }
        row[split + i] = 1.0;
        rows.push(row);
        rhs.push(p.b_ub[i]);
    }
    for (a, &b) in p.a_eq.iter().zip(p.b_eq.iter()) {
        let mut row = vec![0.0; ncols_core];
        for (j, &v) in a.iter().enumerate() {
            row[2 * j] = v;
            row[2 * j + 1] = -v;
        }
        rows.push(row);
        rhs.push(b);
    }

    // Normalize to nonnegative rhs.
    for i in 0..m {
        if rhs[i] < 0.0 {
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
            rhs[i] = -rhs[i];
        }
    }

    // Choose an initial basis: slack columns where they survived the sign
    // normalization with +1, artificials elsewhere.
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut ncols = ncols_core;
    let mut artificial_cols: Vec<usize> = Vec::new();
    for i in 0..m {
        let slack_col = if i < m_ub { Some(split + i) } else { None };
        match slack_col {
            Some(c) if rows[i][c] > 0.5 => basis.push(c),
            _ => {
                let c = ncols;
                ncols += 1;
                artificial_cols.push(c);
                for (r, row) in rows.iter_mut().enumerate() {
                    row.push(if r == i { 1.0 } else { 0.0 });
                }
                basis.push(c);
            }
        }
    }

    let mut t = Tableau {
        rows,
        rhs,
        basis,
        ncols,
    };

    // Phase 1: minimize the sum of artificials.
    if !artificial_cols.is_empty() {
        let mut cost = vec![0.0; t.ncols];
        for &c in &artificial_cols {
            cost[c] = 1.0;
        }
        let mut cost_rhs = 0.0;
        t.reduce_cost(&mut cost, &mut cost_rhs);
        if t.iterate(&mut cost, &mut cost_rhs).is_none() {
            // Phase 1 is bounded below by zero; a reported unbounded ray is a
            // numerical artifact, which we conservatively call infeasible.
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                objective: f64::NAN,
            });
        }
        if -cost_rhs > FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                objective: f64::NAN,
            });
        }
        t.drive_out_artificials(ncols_core);
        t.truncate_columns(ncols_core);
    }

    // Phase 2: the real objective over the split variables.
    let mut cost = vec![0.0; t.ncols];
    for (j, &c) in p.objective.iter().enumerate() {
        cost[2 * j] = c;
        cost[2 * j + 1] = -c;
    }
    let mut cost_rhs = 0.0;
    t.reduce_cost(&mut cost, &mut cost_rhs);
    if t.iterate(&mut cost, &mut cost_rhs).is_none() {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; n],
            objective: f64::NEG_INFINITY,
        });
    }

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < 2 * n {
            let j = b / 2;
            if b % 2 == 0 {
                x[j] += t.rhs[r];
            } else {
                x[j] -= t.rhs[r];
            }
        }
    }
    let objective = p
        .objective
        .iter()
        .zip(x.iter())
        .map(|(c, v)| c * v)
        .sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    /// Subtracts basic rows from the cost vector so reduced costs of basic
    /// columns are zero.
    fn reduce_cost(&self, cost: &mut [f64], cost_rhs: &mut f64) {
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (cv, rv) in cost.iter_mut().zip(&self.rows[r]) {
                    *cv -= cb * rv;
                }
                *cost_rhs -= cb * self.rhs[r];
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize, cost: &mut [f64], cost_rhs: &mut f64) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        self.rhs[r] /= piv;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for j in 0..self.ncols {
                    let d = self.rows[r][j];
                    self.rows[i][j] -= f * d;
                }
                self.rhs[i] -= f * self.rhs[r];
            }
        }
        let f = cost[c];
        if f != 0.0 {
            for (cv, rv) in cost.iter_mut().zip(&self.rows[r]) {
                *cv -= f * rv;
            }
            *cost_rhs -= f * self.rhs[r];
        }
        self.basis[r] = c;
    }

    /// Bland-rule simplex loop. Returns `None` when an unbounded ray is
    /// detected, `Some(())` at an optimal basis.
    fn iterate(&mut self, cost: &mut [f64], cost_rhs: &mut f64) -> Option<()> {
        loop {
            // Entering: lowest-index column with negative reduced cost.
            let Some(c) = (0..self.ncols).find(|&c| cost[c] < -PIVOT_TOL) else {
                return Some(());
            };
            // Leaving: minimum ratio; ties broken by smallest basic index
            // (Bland's rule, precludes cycling).
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let coeff = self.rows[r][c];
                if coeff > PIVOT_TOL {
                    let ratio = self.rhs[r] / coeff;
                    match best {
                        None => best = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || ((ratio - bratio).abs() <= 1e-12
                                    && self.basis[r] < self.basis[br])
                            {
                                best = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let (r, _) = best?;
            self.pivot(r, c, cost, cost_rhs);
        }
    }

    /// Pivots artificial variables out of the basis; rows that cannot pivot
    /// are redundant (0 = 0) and dropped.
    fn drive_out_artificials(&mut self, core_cols: usize) {
        let mut dead_rows: Vec<usize> = Vec::new();
        for r in 0..self.rows.len() {
            if self.basis[r] >= core_cols {
                let col = (0..core_cols).find(|&c| self.rows[r][c].abs() > PIVOT_TOL);
                match col {
                    Some(c) => {
                        // Local pivot without a cost row.
                        let piv = self.rows[r][c];
                        for v in self.rows[r].iter_mut() {
                            *v /= piv;
                        }
                        self.rhs[r] /= piv;
                        for i in 0..self.rows.len() {
                            if i != r {
                                let f = self.rows[i][c];
                                if f != 0.0 {
                                    for j in 0..self.ncols {
                                        let d = self.rows[r][j];
                                        self.rows[i][j] -= f * d;
                                    }
                                    self.rhs[i] -= f * self.rhs[r];
                                }
                            }
                        }
                        self.basis[r] = c;
                    }
                    None => dead_rows.push(r),
                }
            }
        }
        for &r in dead_rows.iter().rev() {
            self.rows.remove(r);
            self.rhs.remove(r);
            self.basis.remove(r);
        }
    }

    fn truncate_columns(&mut self, keep: usize) {
        for row in self.rows.iter_mut() {
            row.truncate(keep);
        }
        self.ncols = keep;
    }
}
