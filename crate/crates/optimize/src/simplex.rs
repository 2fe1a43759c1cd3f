//! Dense two-phase simplex with Bland's rule, for small relaxations.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Maximize `objective · x` subject to `rows`, `x >= 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lp {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize, obj: &mut [f64]) {
        let p = self.t[r][j];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f.abs() > 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = obj[j];
        if f.abs() > 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = j;
    }

    /// Reduced-cost row for maximizing `c`; the last entry is the value.
    fn objective_row(&self, c: &[f64]) -> Vec<f64> {
        let mut obj: Vec<f64> = (0..=self.cols)
            .map(|j| if j < self.cols { -c[j] } else { 0.0 })
            .collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if c[b] != 0.0 {
                for (v, tv) in obj.iter_mut().zip(&self.t[i]) {
                    *v += c[b] * tv;
                }
            }
        }
        obj
    }

    /// Runs to optimality over columns below `allowed`. False if unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> bool {
        let rhs = self.cols;
        loop {
            let Some(j) = (0..allowed).find(|&j| obj[j] < -EPS) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][j];
                if a > EPS {
                    let ratio = self.t[i][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - EPS
                                || (ratio <= best + EPS && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return false;
            };
            self.pivot(r, j, obj);
        }
    }
}

pub fn solve_lp(lp: &Lp) -> LpResult {
    let n = lp.num_vars;
    let m = lp.rows.len();
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = lp
        .rows
        .iter()
        .map(|r| {
            let mut dense = vec![0.0; n];
            for &(j, a) in &r.coeffs {
                dense[j] += a;
            }
            (dense, r.sense, r.rhs)
        })
        .collect();
    for (dense, sense, rhs) in &mut rows {
        if *rhs < 0.0 {
            dense.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let slacks = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + slacks + artificials;
    let mut tab = Tableau {
        t: vec![vec![0.0; cols + 1]; m],
        basis: vec![0; m],
        cols,
    };
    let (mut s, mut a) = (n, n + slacks);
    for (i, (dense, sense, rhs)) in rows.iter().enumerate() {
        tab.t[i][..n].copy_from_slice(dense);
        tab.t[i][cols] = *rhs;
        match sense {
            Sense::Le => {
                tab.t[i][s] = 1.0;
                tab.basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                tab.t[i][s] = -1.0;
                s += 1;
                tab.t[i][a] = 1.0;
                tab.basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                tab.t[i][a] = 1.0;
                tab.basis[i] = a;
                a += 1;
            }
        }
    }
    let first_art = n + slacks;
    if artificials > 0 {
        let c1: Vec<f64> = (0..cols)
            .map(|j| if j >= first_art { -1.0 } else { 0.0 })
            .collect();
        let mut obj = tab.objective_row(&c1);
        tab.optimize(&mut obj, cols);
        if obj[cols] < -1e-7 {
            return LpResult::Infeasible;
        }
        let mut i = 0;
        while i < tab.t.len() {
            if tab.basis[i] >= first_art {
                match (0..first_art).find(|&j| tab.t[i][j].abs() > 1e-7) {
                    Some(j) => tab.pivot(i, j, &mut obj),
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    let mut c2 = vec![0.0; cols];
    c2[..n].copy_from_slice(&lp.objective[..n]);
    let mut obj = tab.objective_row(&c2);
    if !tab.optimize(&mut obj, first_art) {
        return LpResult::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[i][cols];
        }
    }
    LpResult::Optimal {
        value: obj[cols],
        x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> LpRow {
        LpRow {
            coeffs: coeffs.to_vec(),
            sense,
            rhs,
        }
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = Lp {
            num_vars: 2,
            objective: vec![3.0, 5.0],
            rows: vec![
                row(&[(0, 1.0)], Sense::Le, 4.0),
                row(&[(1, 2.0)], Sense::Le, 12.0),
                row(&[(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
            ],
        };
        match solve_lp(&lp) {
            LpResult::Optimal { value, x } => {
                assert!((value - 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equalities_and_lower_bounds() {
        // max -x - y, x + y = 3, x >= 1 -> value -3
        let lp = Lp {
            num_vars: 2,
            objective: vec![-1.0, -1.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 3.0),
                row(&[(0, 1.0)], Sense::Ge, 1.0),
            ],
        };
        assert!(matches!(solve_lp(&lp), LpResult::Optimal { value, .. } if (value + 3.0).abs() < 1e-9));
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let infeasible = Lp {
            num_vars: 1,
            objective: vec![1.0],
            rows: vec![row(&[(0, 1.0)], Sense::Le, -1.0)],
        };
        assert_eq!(solve_lp(&infeasible), LpResult::Infeasible);
        let unbounded = Lp {
            num_vars: 1,
            objective: vec![1.0],
            rows: vec![],
        };
        assert_eq!(solve_lp(&unbounded), LpResult::Unbounded);
    }
}
