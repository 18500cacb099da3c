//! Dense two-phase tableau simplex for `min cᵀx  s.t.  A x ≤ b`, with each
//! variable either nonnegative or free.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: Array2<f64>,
    pub b_ub: Vec<f64>,
    /// `0.0` (nonnegative) or `f64::NEG_INFINITY` (free) per variable.
    pub var_lower_bounds: Vec<f64>,
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.b_ub.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, nv) = self.a_ub.dim();
        if nv != self.c.len() || m != self.b_ub.len() || self.var_lower_bounds.len() != nv {
            return Err(Error::Shape(format!(
                "LP with {} costs, {}x{} constraints, {} bounds and {} lower bounds",
                self.c.len(),
                m,
                nv,
                self.b_ub.len(),
                self.var_lower_bounds.len()
            )));
        }
        let finite = self.c.iter().chain(self.b_ub.iter()).chain(self.a_ub.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Shape("LP has non-finite entries".into()));
        }
        if self.var_lower_bounds.iter().any(|&l| l != 0.0 && l != f64::NEG_INFINITY) {
            return Err(Error::Shape("lower bounds must be 0 or -inf".into()));
        }
        Ok(())
    }

    /// Largest violation of `A x ≤ b` and of the lower bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (i, row) in self.a_ub.rows().into_iter().enumerate() {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max(lhs - self.b_ub[i]);
        }
        for (v, l) in x.iter().zip(&self.var_lower_bounds) {
            worst = worst.max(l - v);
        }
        worst
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pricing {
    /// Lowest-index improving column, lowest-index leaving variable on ratio ties.
    #[default]
    Bland,
    /// Most negative reduced cost, falling back to Bland's rule after a run
    /// of degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    pub tol: f64,
    pub max_pivots: usize,
    pub pricing: Pricing,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_pivots: 200_000, pricing: Pricing::Bland }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    width: usize,
    /// `rows + 1` rows of `width + 1` entries; the last row holds reduced
    /// costs and the last column the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
    n_struct: usize,
    pivots: usize,
}

const DEGENERATE_RUN: usize = 50;

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.width + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width)
    }

    fn obj(&self, j: usize) -> f64 {
        self.at(self.rows, j)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width + 1;
        let piv = self.t[pr * w + pc];
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        prow[pc] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (r, p) in row.iter_mut().zip(prow.iter()) {
                    *r -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn entering(&self, allowed: usize, tol: f64, bland: bool) -> Option<usize> {
        if bland {
            (0..allowed).find(|&j| self.obj(j) < -tol)
        } else {
            let mut best = None;
            let mut best_val = -tol;
            for j in 0..allowed {
                let v = self.obj(j);
                if v < best_val {
                    best_val = v;
                    best = Some(j);
                }
            }
            best
        }
    }

    fn leaving(&self, pc: usize, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, pc);
            if a > tol {
                let ratio = self.rhs(i) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= tol * br.abs().max(1.0);
                        if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    /// Pivots until the reduced costs of the first `allowed` columns are all
    /// above `-tol`.
    fn optimize(&mut self, allowed: usize, opts: &SimplexOptions) -> Result<()> {
        let mut degenerate = 0;
        loop {
            let bland = opts.pricing == Pricing::Bland || degenerate >= DEGENERATE_RUN;
            let Some(pc) = self.entering(allowed, opts.tol, bland) else {
                return Ok(());
            };
            let Some(pr) = self.leaving(pc, opts.tol) else {
                return Err(Error::Unbounded);
            };
            if self.pivots >= opts.max_pivots {
                return Err(Error::PivotLimit(opts.max_pivots));
            }
            if self.rhs(pr).abs() <= opts.tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solves the LP with the two-phase method. The returned vertex satisfies
/// every constraint to `opts.tol` (scaled by the data) and has nonnegative
/// reduced costs, which certifies optimality.
pub fn simplex_solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    let (m, nv) = lp.a_ub.dim();

    // Structural columns: one per variable, plus a mirrored copy for free ones.
    let mut map: Vec<(usize, f64)> = (0..nv).map(|j| (j, 1.0)).collect();
    for j in 0..nv {
        if lp.var_lower_bounds[j] == f64::NEG_INFINITY {
            map.push((j, -1.0));
        }
    }
    let n_struct = map.len();
    let art_rows: Vec<usize> = (0..m).filter(|&i| lp.b_ub[i] < 0.0).collect();
    let n_art = art_rows.len();
    let width = n_struct + m + n_art;
    let w = width + 1;
    let mut t = vec![0.0; (m + 1) * w];
    let mut basis = vec![0; m];
    let mut art_k = 0;
    for i in 0..m {
        let neg = lp.b_ub[i] < 0.0;
        let sgn = if neg { -1.0 } else { 1.0 };
        let row = &mut t[i * w..(i + 1) * w];
        for (k, &(j, s)) in map.iter().enumerate() {
            row[k] = sgn * s * lp.a_ub[[i, j]];
        }
        row[n_struct + i] = sgn;
        row[width] = sgn * lp.b_ub[i];
        if neg {
            row[n_struct + m + art_k] = 1.0;
            basis[i] = n_struct + m + art_k;
            art_k += 1;
        } else {
            basis[i] = n_struct + i;
        }
    }
    let mut tab = Tableau { rows: m, width, t, basis, n_struct, pivots: 0 };

    let scale = lp.b_ub.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    if n_art > 0 {
        // Phase 1: minimize the sum of artificials.
        for &i in &art_rows {
            for j in 0..w {
                let v = tab.t[i * w + j];
                tab.t[m * w + j] -= v;
            }
        }
        for k in 0..n_art {
            tab.t[m * w + n_struct + m + k] = 0.0;
        }
        tab.optimize(width, opts)?;
        let infeas = -tab.rhs(m);
        if infeas > 100.0 * opts.tol * scale {
            return Err(Error::Infeasible);
        }
        // Drive zero-level artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] >= n_struct + m {
                let pc = (0..n_struct + m)
                    .filter(|&j| tab.at(i, j).abs() > opts.tol)
                    .max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()));
                if let Some(pc) = pc {
                    tab.pivot(i, pc);
                }
            }
        }
    }

    // Phase 2 reduced costs.
    let mut cost = vec![0.0; width];
    for (k, &(j, s)) in map.iter().enumerate() {
        cost[k] = s * lp.c[j];
    }
    for j in 0..w {
        tab.t[m * w + j] = if j < width { cost[j] } else { 0.0 };
    }
    for i in 0..m {
        let cb = cost[tab.basis[i]];
        if cb != 0.0 {
            for j in 0..w {
                let v = tab.t[i * w + j];
                tab.t[m * w + j] -= cb * v;
            }
        }
    }
    tab.optimize(n_struct + m, opts)?;

    let mut xs = vec![0.0; tab.n_struct];
    for i in 0..m {
        if tab.basis[i] < tab.n_struct {
            xs[tab.basis[i]] = tab.rhs(i);
        }
    }
    let mut x = vec![0.0; nv];
    for (k, &(j, s)) in map.iter().enumerate() {
        x[j] += s * xs[k];
    }
    let objective = lp.objective(&x);
    Ok(LpSolution { x, objective, pivots: tab.pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_lower_bound() {
        // min x  s.t.  -x <= -3
        let lp = LinearProgram {
            c: vec![1.0],
            a_ub: array![[-1.0]],
            b_ub: vec![-3.0],
            var_lower_bounds: vec![0.0],
        };
        let s = simplex_solve(&lp, &SimplexOptions::default()).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_two_variable() {
        let lp = LinearProgram {
            c: vec![-1.0, -1.0],
            a_ub: array![[1.0, 1.0]],
            b_ub: vec![1.0],
            var_lower_bounds: vec![0.0, 0.0],
        };
        let s = simplex_solve(&lp, &SimplexOptions::default()).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_variable() {
        // min x  s.t.  x >= -2 written as -x <= 2, x free
        let lp = LinearProgram {
            c: vec![1.0],
            a_ub: array![[-1.0]],
            b_ub: vec![2.0],
            var_lower_bounds: vec![f64::NEG_INFINITY],
        };
        let s = simplex_solve(&lp, &SimplexOptions::default()).unwrap();
        assert!((s.x[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let infeasible = LinearProgram {
            c: vec![1.0],
            a_ub: array![[1.0], [-1.0]],
            b_ub: vec![1.0, -2.0],
            var_lower_bounds: vec![0.0],
        };
        assert!(matches!(
            simplex_solve(&infeasible, &SimplexOptions::default()),
            Err(Error::Infeasible)
        ));
        let unbounded = LinearProgram {
            c: vec![-1.0],
            a_ub: array![[-1.0]],
            b_ub: vec![0.0],
            var_lower_bounds: vec![0.0],
        };
        assert!(matches!(
            simplex_solve(&unbounded, &SimplexOptions::default()),
            Err(Error::Unbounded)
        ));
    }

    #[test]
    fn pivot_cap() {
        let lp = LinearProgram {
            c: vec![-1.0, -1.0],
            a_ub: array![[1.0, 0.0], [0.0, 1.0]],
            b_ub: vec![1.0, 1.0],
            var_lower_bounds: vec![0.0, 0.0],
        };
        let opts = SimplexOptions { max_pivots: 1, ..Default::default() };
        assert!(matches!(simplex_solve(&lp, &opts), Err(Error::PivotLimit(1))));
    }

    #[test]
    fn rejects_bad_shapes() {
        let lp = LinearProgram {
            c: vec![1.0, 2.0],
            a_ub: array![[1.0]],
            b_ub: vec![1.0],
            var_lower_bounds: vec![0.0, 0.0],
        };
        assert!(matches!(simplex_solve(&lp, &SimplexOptions::default()), Err(Error::Shape(_))));
    }
}
