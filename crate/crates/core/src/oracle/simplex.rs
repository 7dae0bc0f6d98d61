//! Dense two-phase simplex for `max c^T x` subject to `A x = b`, `x >= 0`.
//!
//! Entering and leaving variables follow Bland's rule (lowest eligible index),
//! which rules out cycling on degenerate vertices. Reduced costs are recomputed
//! from the tableau at every pivot; the instances solved here have at most a
//! few hundred columns.

use crate::error::{Error, Result};
use crate::tolerances::{LP_INFEASIBLE_MASS, SIMPLEX_PIVOT};

const MAX_PIVOTS: usize = 200_000;

/// Equality-form linear program.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Objective to maximize.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible { artificial_mass: f64 },
    Unbounded,
}

struct Tableau {
    /// Row-major `m x (n_total + 1)`; the last column is the right-hand side.
    data: Vec<f64>,
    width: usize,
    basis: Vec<usize>,
    active: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<()> {
        let w = self.width;
        let p = self.at(row, col);
        if p.abs() < SIMPLEX_PIVOT * 1e-3 {
            return Err(Error::Numerical(format!(
                "degenerate pivot {p:e} at row {row}, column {col}"
            )));
        }
        for j in 0..w {
            self.data[row * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.data[row * w..(row + 1) * w].to_vec();
        for i in 0..self.basis.len() {
            if i == row || !self.active[i] {
                continue;
            }
            let f = self.data[i * w + col];
            if f != 0.0 {
                for (x, &pr) in self.data[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                self.data[i * w + col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(Error::Numerical(format!(
                "simplex exceeded {MAX_PIVOTS} pivots"
            )));
        }
        Ok(())
    }

    /// Maximizes `cost^T x` over columns `< allowed`. Returns `false` when the
    /// problem is unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool> {
        let m = self.basis.len();
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j];
                for i in 0..m {
                    if self.active[i] {
                        reduced -= cost[self.basis[i]] * self.at(i, j);
                    }
                }
                if reduced > SIMPLEX_PIVOT {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return Ok(true) };

            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..m {
                if !self.active[i] {
                    continue;
                }
                let a = self.at(i, col);
                if a > SIMPLEX_PIVOT {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || ((ratio - br).abs() <= 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(false);
            };
            self.pivot(row, col)?;
        }
    }
}

/// Solves `lp` by phase one on artificial variables followed by phase two on
/// the original objective.
pub fn solve(lp: &StandardLp) -> Result<LpOutcome> {
    let m = lp.rows.len();
    let n = lp.objective.len();
    if lp.rhs.len() != m || lp.rows.iter().any(|r| r.len() != n) {
        return Err(Error::Domain("inconsistent LP dimensions".into()));
    }
    let width = n + m + 1;
    let mut data = vec![0.0; m * width];
    for (i, (row, &b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (j, &a) in row.iter().enumerate() {
            data[i * width + j] = sign * a;
        }
        data[i * width + n + i] = 1.0;
        data[i * width + width - 1] = sign * b;
    }
    let mut t = Tableau {
        data,
        width,
        basis: (n..n + m).collect(),
        active: vec![true; m],
        pivots: 0,
    };

    let mut phase_one = vec![0.0; n + m];
    phase_one[n..].fill(-1.0);
    t.optimize(&phase_one, n + m)?;
    let artificial_mass: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs(i)).sum();
    if artificial_mass > LP_INFEASIBLE_MASS {
        return Ok(LpOutcome::Infeasible { artificial_mass });
    }

    // Drive zero-level artificials out of the basis; rows with no usable
    // original column are redundant and dropped.
    for i in 0..m {
        if t.basis[i] < n {
            continue;
        }
        match (0..n).find(|&j| !t.basis.contains(&j) && t.at(i, j).abs() > SIMPLEX_PIVOT) {
            Some(j) => t.pivot(i, j)?,
            None => t.active[i] = false,
        }
    }

    let mut phase_two = lp.objective.clone();
    phase_two.extend(std::iter::repeat_n(0.0, m));
    if !t.optimize(&phase_two, n)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.active[i] && t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(outcome: LpOutcome) -> (Vec<f64>, f64) {
        match outcome {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn small_textbook_lp() {
        // max 3x + 5y  s.t. x + s1 = 4, 2y + s2 = 12, 3x + 2y + s3 = 18
        let lp = StandardLp {
            rows: vec![
                vec![1.0, 0.0, 1.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0, 1.0, 0.0],
                vec![3.0, 2.0, 0.0, 0.0, 1.0],
            ],
            rhs: vec![4.0, 12.0, 18.0],
            objective: vec![3.0, 5.0, 0.0, 0.0, 0.0],
        };
        let (x, obj) = optimal(solve(&lp).unwrap());
        assert!((obj - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x + y = 1 and x + y = 2
        let lp = StandardLp {
            rows: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            rhs: vec![1.0, 2.0],
            objective: vec![1.0, 0.0],
        };
        assert!(matches!(solve(&lp).unwrap(), LpOutcome::Infeasible { .. }));
    }

    #[test]
    fn detects_unbounded() {
        // x - y = 1, maximize x
        let lp = StandardLp {
            rows: vec![vec![1.0, -1.0]],
            rhs: vec![1.0],
            objective: vec![1.0, 0.0],
        };
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        // -x - y = -2 twice; max x  => x = 2
        let lp = StandardLp {
            rows: vec![vec![-1.0, -1.0], vec![-1.0, -1.0]],
            rhs: vec![-2.0, -2.0],
            objective: vec![1.0, 0.0],
        };
        let (x, obj) = optimal(solve(&lp).unwrap());
        assert!((obj - 2.0).abs() < 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // Beale's cycling example in equality form; Bland's rule terminates.
        let lp = StandardLp {
            rows: vec![
                vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
                vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            ],
            rhs: vec![0.0, 0.0, 1.0],
            objective: vec![0.75, -150.0, 0.02, -6.0, 0.0, 0.0, 0.0],
        };
        let (_, obj) = optimal(solve(&lp).unwrap());
        assert!((obj - 0.05).abs() < 1e-9);
    }
}
