//! Dense two-phase primal simplex for the small linear programs that show up
//! in wrench-set support queries (a handful of rows, up to a few thousand
//! columns).
//!
//! Problems are stated as
//!
//! ```text
//! maximize    cᵀx
//! subject to  A_eq x  = b_eq
//!             A_le x <= b_le
//!             x >= 0
//! ```

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("constraint row has {found} coefficients, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    equalities: Vec<(Vec<f64>, f64)>,
    upper_bounds: Vec<(Vec<f64>, f64)>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn equality(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.equalities.push((coeffs, rhs));
        self
    }

    pub fn at_most(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.upper_bounds.push((coeffs, rhs));
        self
    }

    pub fn at_least(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        let negated = coeffs.into_iter().map(|c| -c).collect();
        self.upper_bounds.push((negated, -rhs));
        self
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.num_vars();
        for (row, _) in self.equalities.iter().chain(&self.upper_bounds) {
            if row.len() != n {
                return Err(LpError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Tableau::build(self).run(&self.objective)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColumnRole {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row holds reduced
    /// costs, the last column the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    roles: Vec<ColumnRole>,
    n_structural: usize,
    pivot_eps: f64,
    cost_eps: f64,
    feas_eps: f64,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let n_slack = lp.upper_bounds.len();
        let rows = lp.equalities.len() + n_slack;

        // Every row is sign-normalized to a non-negative rhs. Rows that then
        // lack an obvious +1 basic column get an artificial.
        struct RowSpec<'a> {
            coeffs: &'a [f64],
            rhs: f64,
            slack: Option<usize>,
        }
        let mut specs: Vec<RowSpec> = Vec::with_capacity(rows);
        for (c, b) in &lp.equalities {
            specs.push(RowSpec {
                coeffs: c,
                rhs: *b,
                slack: None,
            });
        }
        for (k, (c, b)) in lp.upper_bounds.iter().enumerate() {
            specs.push(RowSpec {
                coeffs: c,
                rhs: *b,
                slack: Some(k),
            });
        }
        let needs_artificial: Vec<bool> = specs
            .iter()
            .map(|s| s.slack.is_none() || s.rhs < 0.0)
            .collect();
        let n_art = needs_artificial.iter().filter(|&&a| a).count();
        let cols = n + n_slack + n_art;
        let stride = cols + 1;
        let mut data = vec![0.0; (rows + 1) * stride];
        let mut roles = vec![ColumnRole::Structural; n];
        roles.extend(std::iter::repeat_n(ColumnRole::Slack, n_slack));
        roles.extend(std::iter::repeat_n(ColumnRole::Artificial, n_art));
        let mut basis = vec![0; rows];

        let mut scale: f64 = 0.0;
        let mut rhs_scale: f64 = 1.0;
        let mut art = n + n_slack;
        for (r, spec) in specs.iter().enumerate() {
            let sign = if spec.rhs < 0.0 { -1.0 } else { 1.0 };
            let row = &mut data[r * stride..(r + 1) * stride];
            for (j, &a) in spec.coeffs.iter().enumerate() {
                row[j] = sign * a;
                scale = scale.max(a.abs());
            }
            if let Some(k) = spec.slack {
                row[n + k] = sign;
            }
            row[cols] = sign * spec.rhs;
            rhs_scale = rhs_scale.max(spec.rhs.abs());
            if needs_artificial[r] {
                row[art] = 1.0;
                basis[r] = art;
                art += 1;
            } else {
                basis[r] = n + spec.slack.expect("slack row");
            }
        }
        let cost_scale = lp
            .objective
            .iter()
            .fold(1.0_f64, |acc, c| acc.max(c.abs()));
        let scale = scale.max(1.0);
        Self {
            rows,
            cols,
            data,
            basis,
            roles,
            n_structural: n,
            pivot_eps: 1e-11 * scale,
            cost_eps: 1e-11 * cost_scale * scale,
            feas_eps: 1e-9 * rhs_scale * scale,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn objective_row(&self) -> usize {
        self.rows
    }

    /// Loads reduced costs `c_j - c_Bᵀ B⁻¹ a_j` for the given cost vector.
    fn load_costs(&mut self, costs: &[f64]) {
        let stride = self.cols + 1;
        let obj = self.objective_row();
        for j in 0..=self.cols {
            let mut v = if j < self.cols { costs[j] } else { 0.0 };
            for r in 0..self.rows {
                let cb = costs[self.basis[r]];
                if cb != 0.0 {
                    v -= cb * self.data[r * stride + j];
                }
            }
            self.data[obj * stride + j] = v;
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.cols + 1;
        let inv = 1.0 / self.data[pr * stride + pc];
        for v in &mut self.data[pr * stride..(pr + 1) * stride] {
            *v *= inv;
        }
        let (before, rest) = self.data.split_at_mut(pr * stride);
        let (pivot_row, after) = rest.split_at_mut(stride);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(stride).for_each(eliminate);
        after.chunks_mut(stride).for_each(eliminate);
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations on the loaded cost row. Columns for which
    /// `allowed` is false never enter the basis.
    fn iterate(&mut self, allowed: &dyn Fn(usize) -> bool) -> Result<(), LpError> {
        let max_iter = 50 * (self.rows + self.cols) + 1000;
        let obj = self.objective_row();
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run > 50;
            let mut entering = None;
            let mut best = self.cost_eps;
            for j in 0..self.cols {
                if !allowed(j) {
                    continue;
                }
                let d = self.at(obj, j);
                if d > best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > self.pivot_eps {
                    let ratio = self.rhs(r).max(0.0) / a;
                    match leaving {
                        None => leaving = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                leaving = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((pr, ratio)) = leaving else {
                return Err(LpError::Unbounded);
            };
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
        }
        Err(LpError::IterationLimit(max_iter))
    }

    fn run(mut self, objective: &[f64]) -> Result<LpSolution, LpError> {
        let has_artificials = self.roles.contains(&ColumnRole::Artificial);
        if has_artificials {
            let phase_one: Vec<f64> = self
                .roles
                .iter()
                .map(|r| if *r == ColumnRole::Artificial { -1.0 } else { 0.0 })
                .collect();
            self.load_costs(&phase_one);
            self.iterate(&|_| true)?;
            let residual: f64 = (0..self.rows)
                .filter(|&r| self.roles[self.basis[r]] == ColumnRole::Artificial)
                .map(|r| self.rhs(r).abs())
                .sum();
            if residual > self.feas_eps {
                return Err(LpError::Infeasible(residual));
            }
            // Drive zero-level artificials out of the basis where possible;
            // rows where that fails are redundant and stay inert.
            for r in 0..self.rows {
                if self.roles[self.basis[r]] != ColumnRole::Artificial {
                    continue;
                }
                let candidate = (0..self.cols)
                    .filter(|&j| self.roles[j] != ColumnRole::Artificial)
                    .max_by(|&a, &b| self.at(r, a).abs().total_cmp(&self.at(r, b).abs()));
                if let Some(j) = candidate {
                    if self.at(r, j).abs() > 1e-9 {
                        self.pivot(r, j);
                    }
                }
            }
        }

        let mut costs = vec![0.0; self.cols];
        costs[..self.n_structural].copy_from_slice(objective);
        self.load_costs(&costs);
        let roles = self.roles.clone();
        self.iterate(&|j| roles[j] != ColumnRole::Artificial)?;

        let mut x = vec![0.0; self.n_structural];
        for r in 0..self.rows {
            let b = self.basis[r];
            if b < self.n_structural {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        let value = x.iter().zip(objective).map(|(a, c)| a * c).sum();
        Ok(LpSolution { x, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: enumerate every basis of the standard-form problem
    /// (equalities plus slacked inequalities) and keep the best feasible
    /// basic solution.
    fn brute_force(lp: &LinearProgram) -> Option<f64> {
        let n = lp.num_vars();
        let n_slack = lp.upper_bounds.len();
        let m = lp.equalities.len() + n_slack;
        let cols = n + n_slack;
        let mut a = vec![vec![0.0; cols]; m];
        let mut b = vec![0.0; m];
        for (r, (c, rhs)) in lp.equalities.iter().enumerate() {
            a[r][..n].copy_from_slice(c);
            b[r] = *rhs;
        }
        for (k, (c, rhs)) in lp.upper_bounds.iter().enumerate() {
            let r = lp.equalities.len() + k;
            a[r][..n].copy_from_slice(c);
            a[r][n + k] = 1.0;
            b[r] = *rhs;
        }
        let mut best: Option<f64> = None;
        let mut subset = vec![0usize; m];
        fn next(subset: &mut [usize], cols: usize) -> bool {
            let m = subset.len();
            for i in (0..m).rev() {
                if subset[i] < cols - m + i {
                    subset[i] += 1;
                    for j in i + 1..m {
                        subset[j] = subset[j - 1] + 1;
                    }
                    return true;
                }
            }
            false
        }
        for (i, s) in subset.iter_mut().enumerate() {
            *s = i;
        }
        loop {
            let mat = nalgebra::DMatrix::from_fn(m, m, |r, c| a[r][subset[c]]);
            if let Some(inv) = mat.clone().try_inverse() {
                let xb = inv * nalgebra::DVector::from_column_slice(&b);
                if xb.iter().all(|&v| v >= -1e-9) {
                    let mut x = vec![0.0; cols];
                    for (k, &c) in subset.iter().enumerate() {
                        x[c] = xb[k];
                    }
                    let val: f64 = (0..n).map(|j| lp.objective[j] * x[j]).sum();
                    best = Some(best.map_or(val, |bv: f64| bv.max(val)));
                }
            }
            if !next(&mut subset, cols) {
                break;
            }
        }
        best
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.at_most(vec![1.0, 0.0], 4.0)
            .at_most(vec![0.0, 2.0], 12.0)
            .at_most(vec![3.0, 2.0], 18.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_lower_bound_rows() {
        // max x + y, x + y + z = 10, x >= 2, y <= 3
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0, 0.0]);
        lp.equality(vec![1.0, 1.0, 1.0], 10.0)
            .at_least(vec![1.0, 0.0, 0.0], 2.0)
            .at_most(vec![0.0, 1.0, 0.0], 3.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.at_most(vec![1.0], 1.0).at_least(vec![1.0], 2.0);
        assert!(matches!(lp.solve(), Err(LpError::Infeasible(_))));

        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.at_most(vec![0.0, 1.0], 1.0);
        assert_eq!(lp.solve(), Err(LpError::Unbounded));
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        lp.equality(vec![1.0, 1.0], 1.0)
            .equality(vec![2.0, 2.0], 2.0)
            .at_most(vec![0.0, 1.0], 0.25);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 1.25).abs() < 1e-12);
    }

    #[test]
    fn degenerate_zero_rhs_equalities() {
        // Shape of a zero-moment support query: origin is feasible.
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0, -1.0, 0.5]);
        lp.equality(vec![1.0, -1.0, 0.0, 0.0], 0.0)
            .equality(vec![0.0, 1.0, -1.0, 1.0], 0.0)
            .at_most(vec![1.0, 1.0, 1.0, 1.0], 1.0);
        let sol = lp.solve().unwrap();
        let oracle = brute_force(&lp).unwrap();
        assert!((sol.value - oracle).abs() < 1e-12, "{} vs {}", sol.value, oracle);
    }

    #[test]
    fn dimension_mismatch() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.at_most(vec![1.0], 1.0);
        assert!(matches!(lp.solve(), Err(LpError::DimensionMismatch { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            /// Bounded random programs agree with basis enumeration.
            #[test]
            fn matches_basis_enumeration(
                c in prop::collection::vec(-3.0..3.0f64, 4),
                rows in prop::collection::vec((prop::collection::vec(-2.0..2.0f64, 4), -1.0..3.0f64), 1..3),
                eq in prop::collection::vec((prop::collection::vec(-2.0..2.0f64, 4), -1.0..1.0f64), 0..2),
            ) {
                let mut lp = LinearProgram::maximize(c);
                // box keeps the program bounded
                lp.at_most(vec![1.0, 1.0, 1.0, 1.0], 5.0);
                for (a, b) in rows { lp.at_most(a, b); }
                for (a, b) in eq { lp.equality(a, b); }
                let oracle = brute_force(&lp);
                match (lp.solve(), oracle) {
                    (Ok(sol), Some(best)) => prop_assert!((sol.value - best).abs() < 1e-7 * (1.0 + best.abs()),
                        "simplex {} vs oracle {}", sol.value, best),
                    (Err(LpError::Infeasible(_)), None) => {}
                    (got, want) => prop_assert!(false, "simplex {:?} vs oracle {:?}", got, want),
                }
            }
        }
    }
}
