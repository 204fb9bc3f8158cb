//! Left-looking sparse LU (Gilbert–Peierls) with threshold partial pivoting.
//!
//! Column `k` of the factors is obtained from a sparse triangular solve with
//! the columns of `L` computed so far; the nonzero pattern of the solution is
//! found by a depth-first search in the graph of `L` before any arithmetic.
//! Rows are pivoted; columns follow the fill-reducing ordering. When the
//! diagonal entry is within a threshold of the largest candidate it is
//! preferred, which keeps the symmetric ordering mostly intact.
//!
//! Saddle-point matrices have diagonal entries that are small but nonzero
//! after partial elimination. A strict threshold pivots away from them and
//! the row exchanges cascade into heavy fill, so the default is relaxed and
//! [`super::solve_with`] falls back to [`STRICT_PIVOT_THRESHOLD`] when
//! iterative refinement fails.

use super::{Ordering, SparseMatrix};
use crate::error::{Error, Result};

/// Relative size a diagonal pivot must reach to be preferred over the
/// largest entry of its column.
pub const PIVOT_THRESHOLD: f64 = 1e-6;

/// Classical threshold used when the relaxed factorisation is inaccurate.
pub const STRICT_PIVOT_THRESHOLD: f64 = 0.1;

/// Pivots smaller than this times the column maximum count as zero.
const SINGULAR_TOL: f64 = 1e-14;

/// `P A Q = L U` with unit lower triangular `L`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    // L by columns, unit diagonal stored first, rows in pivoted numbering
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    // U by columns, diagonal stored last
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
    /// `pinv[i]` = step at which original row `i` was pivotal.
    pinv: Vec<usize>,
    /// `q[k]` = original column eliminated at step `k`.
    q: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &SparseMatrix, ordering: Ordering) -> Result<LuFactors> {
        Self::factor_with_threshold(a, ordering, PIVOT_THRESHOLD)
    }

    /// As [`LuFactors::factor`] with a custom diagonal preference threshold.
    pub fn factor_with_threshold(a: &SparseMatrix, ordering: Ordering, threshold: f64) -> Result<LuFactors> {
        let n = a.dim();
        let q = ordering.compute(a);
        // column access to A
        let at = a.transpose();
        let (ap, ai, ax) = (at.row_ptr(), at.col_idx(), at.values());

        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];
        let cap = 4 * a.nnz() + n;
        let mut lp = Vec::with_capacity(n + 1);
        let mut li: Vec<usize> = Vec::with_capacity(cap);
        let mut lx: Vec<f64> = Vec::with_capacity(cap);
        let mut up = Vec::with_capacity(n + 1);
        let mut ui: Vec<usize> = Vec::with_capacity(cap);
        let mut ux: Vec<f64> = Vec::with_capacity(cap);

        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut mark = vec![NONE; n];
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];
            let (start, end) = (ap[col], ap[col + 1]);

            // reach: topological order of the pattern of L \ A(:, col), stored in xi[top..n]
            let mut top = n;
            for &i0 in &ai[start..end] {
                if mark[i0] == k {
                    continue;
                }
                mark[i0] = k;
                stack.push((i0, 0));
                while let Some(&mut (j, ref mut pos)) = stack.last_mut() {
                    let jj = pinv[j];
                    let mut pushed = false;
                    if jj != NONE {
                        let (cs, ce) = (lp[jj] + 1, lp[jj + 1]);
                        while cs + *pos < ce {
                            let i = li[cs + *pos];
                            *pos += 1;
                            if mark[i] != k {
                                mark[i] = k;
                                stack.push((i, 0));
                                pushed = true;
                                break;
                            }
                        }
                    }
                    if !pushed {
                        stack.pop();
                        top -= 1;
                        xi[top] = j;
                    }
                }
            }

            // numeric triangular solve
            let mut colmax = 0.0f64;
            for p in start..end {
                x[ai[p]] = ax[p];
                colmax = colmax.max(ax[p].abs());
            }
            for &j in &xi[top..n] {
                let jj = pinv[j];
                if jj == NONE {
                    continue;
                }
                let xj = x[j];
                if xj != 0.0 {
                    for p in lp[jj] + 1..lp[jj + 1] {
                        x[li[p]] -= lx[p] * xj;
                    }
                }
            }

            // pivot selection
            let mut ipiv = NONE;
            let mut best = -1.0;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let v = x[i].abs();
                    if v > best {
                        best = v;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == NONE || !(best > SINGULAR_TOL * colmax) || !best.is_finite() {
                return Err(Error::SingularMatrix { pivot: k });
            }
            if pinv[col] == NONE && x[col].abs() >= threshold * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for i in li.iter_mut() {
            *i = pinv[*i];
        }
        Ok(LuFactors {
            n,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
            pinv,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U` together.
    pub fn fill(&self) -> usize {
        self.lx.len() + self.ux.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut y = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let d = self.up[j + 1] - 1;
            y[j] /= self.ux[d];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..d {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &c) in self.q.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }
}
