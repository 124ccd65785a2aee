//! Dense two-phase simplex for the small linear programs in this crate.
//!
//! Maximizes `c.x` subject to rows `a.x {<=,=,>=} b` and `x >= 0`, with
//! Bland's anti-cycling pivot rule and a fixed pivot tolerance. Returns an
//! optimal basic solution together with the row multipliers (duals), which
//! the power-control step uses to recover a primal solution from a dual
//! formulation.

pub const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint row, in insertion order, with signs such
    /// that `objective == sum(duals[i] * rhs[i])` when all variables have zero
    /// reduced cost slack (strong duality).
    pub duals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn maximize(num_vars: usize, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), num_vars);
        LinearProgram {
            num_vars,
            objective,
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn solve(&self) -> LpOutcome {
        Simplex::new(self).run()
    }
}

struct Simplex {
    n: usize,
    m: usize,
    ncols: usize,
    /// tableau[i] has ncols coefficient entries plus the rhs at the end.
    tableau: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Column of the initial identity entry for each row (slack, surplus or
    /// artificial), used for dual recovery.
    identity_col: Vec<usize>,
    identity_sign: Vec<f64>,
    row_scale: Vec<f64>,
    row_flipped: Vec<bool>,
    artificial_start: usize,
    objective: Vec<f64>,
    obj_scale: f64,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Simplex {
        let n = lp.num_vars;
        let m = lp.rows.len();

        // Normalize rows: nonnegative rhs, unit max coefficient.
        let mut coeffs = Vec::with_capacity(m);
        let mut rels = Vec::with_capacity(m);
        let mut rhss = Vec::with_capacity(m);
        let mut row_scale = Vec::with_capacity(m);
        let mut row_flipped = Vec::with_capacity(m);
        for row in &lp.rows {
            let mut c = row.coeffs.clone();
            let mut b = row.rhs;
            let mut rel = row.rel;
            let flip = b < 0.0;
            if flip {
                for v in &mut c {
                    *v = -*v;
                }
                b = -b;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            let scale = c
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
                .max(b.abs());
            let scale = if scale > 0.0 { scale } else { 1.0 };
            for v in &mut c {
                *v /= scale;
            }
            b /= scale;
            coeffs.push(c);
            rels.push(rel);
            rhss.push(b);
            row_scale.push(scale);
            row_flipped.push(flip);
        }

        let obj_scale = lp
            .objective
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1e-300);
        let objective: Vec<f64> = lp.objective.iter().map(|v| v / obj_scale).collect();

        let n_slack = rels
            .iter()
            .filter(|r| matches!(r, Relation::Le | Relation::Ge))
            .count();
        let n_art = rels
            .iter()
            .filter(|r| matches!(r, Relation::Ge | Relation::Eq))
            .count();
        let artificial_start = n + n_slack;
        let ncols = n + n_slack + n_art;

        let mut tableau = vec![vec![0.0; ncols + 1]; m];
        let mut basis = vec![0usize; m];
        let mut identity_col = vec![0usize; m];
        let mut identity_sign = vec![1.0; m];
        let mut slack_idx = n;
        let mut art_idx = artificial_start;
        for i in 0..m {
            tableau[i][..n].copy_from_slice(&coeffs[i]);
            tableau[i][ncols] = rhss[i];
            match rels[i] {
                Relation::Le => {
                    tableau[i][slack_idx] = 1.0;
                    basis[i] = slack_idx;
                    identity_col[i] = slack_idx;
                    identity_sign[i] = 1.0;
                    slack_idx += 1;
                }
                Relation::Ge => {
                    tableau[i][slack_idx] = -1.0;
                    identity_col[i] = slack_idx;
                    identity_sign[i] = -1.0;
                    slack_idx += 1;
                    tableau[i][art_idx] = 1.0;
                    basis[i] = art_idx;
                    art_idx += 1;
                }
                Relation::Eq => {
                    tableau[i][art_idx] = 1.0;
                    basis[i] = art_idx;
                    identity_col[i] = art_idx;
                    identity_sign[i] = 1.0;
                    art_idx += 1;
                }
            }
        }

        Simplex {
            n,
            m,
            ncols,
            tableau,
            basis,
            identity_col,
            identity_sign,
            row_scale,
            row_flipped,
            artificial_start,
            objective,
            obj_scale,
        }
    }

    fn pivot(&mut self, row: usize, col: usize, cost: &mut [f64]) {
        let factor = self.tableau[row][col];
        for v in &mut self.tableau[row] {
            *v /= factor;
        }
        for i in 0..self.m {
            if i != row {
                let f = self.tableau[i][col];
                if f != 0.0 {
                    for j in 0..=self.ncols {
                        self.tableau[i][j] -= f * self.tableau[row][j];
                    }
                }
            }
        }
        let f = cost[col];
        if f != 0.0 {
            for j in 0..=self.ncols {
                cost[j] -= f * self.tableau[row][j];
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering = lowest-index column with positive reduced
    /// cost; leaving = min-ratio row, ties broken by lowest basis index.
    fn optimize(&mut self, cost: &mut [f64], allow_artificial: bool) -> Result<(), ()> {
        let limit = if allow_artificial {
            self.ncols
        } else {
            self.artificial_start
        };
        loop {
            let mut entering = None;
            for j in 0..limit {
                if cost[j] > PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(e) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.tableau[i][e];
                if a > PIVOT_TOL {
                    let ratio = self.tableau[i][self.ncols] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_TOL
                                || (ratio < lr + PIVOT_TOL && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(()); // unbounded in direction e
            };
            self.pivot(r, e, cost);
        }
    }

    fn reduced_costs(&self, raw: &[f64]) -> Vec<f64> {
        let mut cost = vec![0.0; self.ncols + 1];
        cost[..raw.len()].copy_from_slice(raw);
        for i in 0..self.m {
            let cb = if self.basis[i] < raw.len() {
                raw[self.basis[i]]
            } else {
                0.0
            };
            if cb != 0.0 {
                for j in 0..=self.ncols {
                    cost[j] -= cb * self.tableau[i][j];
                }
            }
        }
        cost
    }

    fn run(mut self) -> LpOutcome {
        // Phase 1: maximize -sum(artificials).
        if self.artificial_start < self.ncols {
            let mut raw = vec![0.0; self.ncols];
            for j in self.artificial_start..self.ncols {
                raw[j] = -1.0;
            }
            let mut cost = self.reduced_costs(&raw);
            if self.optimize(&mut cost, true).is_err() {
                // Phase 1 objective is bounded by 0; cannot be unbounded.
                return LpOutcome::Infeasible;
            }
            let infeasibility: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.artificial_start)
                .map(|i| self.tableau[i][self.ncols])
                .sum();
            if infeasibility > 1e-7 {
                return LpOutcome::Infeasible;
            }
            // Drive remaining artificials out of the basis where possible.
            for i in 0..self.m {
                if self.basis[i] >= self.artificial_start {
                    let mut cost_dummy = vec![0.0; self.ncols + 1];
                    if let Some(col) =
                        (0..self.artificial_start).find(|&j| self.tableau[i][j].abs() > PIVOT_TOL)
                    {
                        self.pivot(i, col, &mut cost_dummy);
                    }
                }
            }
        }

        // Phase 2.
        let raw = self.objective.clone();
        let mut cost = self.reduced_costs(&raw);
        if self.optimize(&mut cost, false).is_err() {
            return LpOutcome::Unbounded;
        }

        let mut x = vec![0.0; self.n];
        for i in 0..self.m {
            if self.basis[i] < self.n {
                x[self.basis[i]] = self.tableau[i][self.ncols].max(0.0);
            }
        }
        let objective: f64 = x
            .iter()
            .zip(&self.objective)
            .map(|(xi, ci)| xi * ci * self.obj_scale)
            .sum();

        // Duals from the reduced costs of each row's initial identity column.
        let mut duals = vec![0.0; self.m];
        for i in 0..self.m {
            let rc = cost[self.identity_col[i]];
            let mut y = -rc * self.identity_sign[i];
            y *= self.obj_scale / self.row_scale[i];
            if self.row_flipped[i] {
                y = -y;
            }
            duals[i] = y;
        }

        LpOutcome::Optimal(LpSolution { x, objective, duals })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simple_box_lp() {
        // max 3x + 2y s.t. x + y <= 4, x <= 2
        let mut lp = LinearProgram::maximize(2, vec![3.0, 2.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Le, 4.0);
        lp.add_row(vec![1.0, 0.0], Relation::Le, 2.0);
        let sol = lp.solve().optimal().unwrap();
        assert_relative_eq!(sol.objective, 10.0, max_relative = 1e-9);
        assert_relative_eq!(sol.x[0], 2.0, max_relative = 1e-9);
        assert_relative_eq!(sol.x[1], 2.0, max_relative = 1e-9);
        // Strong duality: y . b == objective.
        let dual_obj = sol.duals[0] * 4.0 + sol.duals[1] * 2.0;
        assert_relative_eq!(dual_obj, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + y s.t. x + y = 3, x >= 1, y <= 1.5
        let mut lp = LinearProgram::maximize(2, vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Relation::Eq, 3.0);
        lp.add_row(vec![1.0, 0.0], Relation::Ge, 1.0);
        lp.add_row(vec![0.0, 1.0], Relation::Le, 1.5);
        let sol = lp.solve().optimal().unwrap();
        assert_relative_eq!(sol.objective, 3.0, max_relative = 1e-9);
        let dual_obj = sol.duals[0] * 3.0 + sol.duals[1] * 1.0 + sol.duals[2] * 1.5;
        assert_relative_eq!(dual_obj, 3.0, max_relative = 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::maximize(1, vec![1.0]);
        lp.add_row(vec![1.0], Relation::Le, 1.0);
        lp.add_row(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), LpOutcome::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::maximize(2, vec![1.0, 0.0]);
        lp.add_row(vec![0.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), LpOutcome::Unbounded));
    }

    #[test]
    fn negative_rhs_row_is_normalized() {
        // max -x s.t. -x <= -2  (i.e. x >= 2)
        let mut lp = LinearProgram::maximize(1, vec![-1.0]);
        lp.add_row(vec![-1.0], Relation::Le, -2.0);
        let sol = lp.solve().optimal().unwrap();
        assert_relative_eq!(sol.x[0], 2.0, max_relative = 1e-9);
        let dual_obj = sol.duals[0] * -2.0;
        assert_relative_eq!(dual_obj, -2.0, max_relative = 1e-9);
    }

    #[test]
    fn badly_scaled_rows_are_handled() {
        // Same LP as simple_box_lp but with rows scaled by 1e-8.
        let mut lp = LinearProgram::maximize(2, vec![3.0, 2.0]);
        lp.add_row(vec![1e-8, 1e-8], Relation::Le, 4e-8);
        lp.add_row(vec![1e-8, 0.0], Relation::Le, 2e-8);
        let sol = lp.solve().optimal().unwrap();
        assert_relative_eq!(sol.objective, 10.0, max_relative = 1e-8);
        let dual_obj = sol.duals[0] * 4e-8 + sol.duals[1] * 2e-8;
        assert_relative_eq!(dual_obj, 10.0, max_relative = 1e-8);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // Classic degenerate vertex; Bland's rule must terminate.
        let mut lp = LinearProgram::maximize(3, vec![0.75, -150.0, 0.02]);
        lp.add_row(vec![0.25, -60.0, -0.04], Relation::Le, 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02], Relation::Le, 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0], Relation::Le, 1.0);
        let sol = lp.solve().optimal().unwrap();
        assert!(sol.objective.is_finite());
    }
}
