//! Sparse LU factorization with Markowitz-style ordering.
//!
//! At every step the active column with the fewest nonzeros is chosen; among
//! its rows whose entry is within a factor `PIVOT_THRESHOLD` of the column
//! maximum, the shortest row becomes the pivot. Rows are kept as sorted
//! `(col, value)` lists and updated in place, so fill-in is created only
//! where elimination actually produces it.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::SolveError;
use crate::sparse::CsrMatrix;

const PIVOT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone)]
struct Step {
    row: usize,
    col: usize,
    pivot: f64,
    /// Remaining entries of the pivot row (columns eliminated later).
    upper: Vec<(usize, f64)>,
    /// `(row, multiplier)` for every row updated by this step.
    lower: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    steps: Vec<Step>,
}

fn entry(row: &[(usize, f64)], col: usize) -> Option<f64> {
    row.binary_search_by_key(&col, |&(c, _)| c)
        .ok()
        .map(|k| row[k].1)
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, SolveError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|r| a.row(r).collect()).collect();
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &(c, _) in row {
                col_rows[c].push(r);
            }
        }
        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut row_done = vec![false; n];
        let mut col_done = vec![false; n];
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> = col_count
            .iter()
            .enumerate()
            .map(|(c, &k)| Reverse((k, c)))
            .collect();
        let mut steps = Vec::with_capacity(n);
        let mut scratch: Vec<(usize, f64)> = Vec::new();

        for _ in 0..n {
            let col = loop {
                match heap.pop() {
                    Some(Reverse((k, c))) if !col_done[c] && col_count[c] == k => break c,
                    Some(_) => continue,
                    None => return Err(SolveError::Singular { step: steps.len() }),
                }
            };

            let candidates: Vec<(usize, f64)> = col_rows[col]
                .iter()
                .filter(|&&r| !row_done[r])
                .filter_map(|&r| entry(&rows[r], col).map(|v| (r, v)))
                .collect();
            let max_abs = candidates.iter().map(|&(_, v)| v.abs()).fold(0.0, f64::max);
            if !(max_abs > 1e-300) {
                return Err(SolveError::Singular { step: steps.len() });
            }
            let (prow, pivot) = candidates
                .iter()
                .filter(|&&(_, v)| v.abs() >= PIVOT_THRESHOLD * max_abs)
                .min_by_key(|&&(r, _)| (rows[r].len(), r))
                .copied()
                .expect("the column maximum always qualifies");

            let upper: Vec<(usize, f64)> = std::mem::take(&mut rows[prow])
                .into_iter()
                .filter(|&(c, _)| c != col)
                .collect();
            row_done[prow] = true;
            col_done[col] = true;
            for &(c, _) in &upper {
                col_count[c] -= 1;
                heap.push(Reverse((col_count[c], c)));
            }

            let mut lower = Vec::with_capacity(candidates.len().saturating_sub(1));
            for &(r, v) in &candidates {
                if r == prow {
                    continue;
                }
                let l = v / pivot;
                lower.push((r, l));
                scratch.clear();
                let old = std::mem::take(&mut rows[r]);
                let (mut i, mut j) = (0, 0);
                while i < old.len() || j < upper.len() {
                    let ci = old.get(i).map_or(usize::MAX, |e| e.0);
                    let cj = upper.get(j).map_or(usize::MAX, |e| e.0);
                    if ci == col {
                        i += 1;
                    } else if ci < cj {
                        scratch.push(old[i]);
                        i += 1;
                    } else if cj < ci {
                        scratch.push((cj, -l * upper[j].1));
                        col_rows[cj].push(r);
                        col_count[cj] += 1;
                        heap.push(Reverse((col_count[cj], cj)));
                        j += 1;
                    } else {
                        scratch.push((ci, old[i].1 - l * upper[j].1));
                        i += 1;
                        j += 1;
                    }
                }
                rows[r] = scratch.clone();
            }

            steps.push(Step {
                row: prow,
                col,
                pivot,
                upper,
                lower,
            });
        }
        Ok(Self { n, steps })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        for s in &self.steps {
            let br = y[s.row];
            if br != 0.0 {
                for &(r, l) in &s.lower {
                    y[r] -= l * br;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for s in self.steps.iter().rev() {
            let acc: f64 = s.upper.iter().map(|&(c, u)| u * x[c]).sum();
            x[s.col] = (y[s.row] - acc) / s.pivot;
        }
        x
    }

    /// Stored entries of L and U, a measure of fill-in.
    pub fn factor_nnz(&self) -> usize {
        self.steps
            .iter()
            .map(|s| 1 + s.upper.len() + s.lower.len())
            .sum()
    }
}
