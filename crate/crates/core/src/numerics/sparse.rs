use ndarray::{Array2, ArrayView2};

use crate::error::{shape_err, Result};

/// Constant compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets. Entries keep their input
    /// order within a row; duplicates are summed by the products.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut offsets = vec![0usize; rows + 1];
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(shape_err(
                    "csr",
                    format!("entry ({r}, {c}) outside {rows}x{cols}"),
                ));
            }
            offsets[r + 1] += 1;
        }
        for r in 0..rows {
            offsets[r + 1] += offsets[r];
        }
        let mut cursor = offsets.clone();
        let mut indices = vec![0; triplets.len()];
        let mut values = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            indices[cursor[r]] = c;
            values[cursor[r]] = v;
            cursor[r] += 1;
        }
        Ok(Self {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `self * x`.
    pub fn matmul(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.cols {
            return Err(shape_err(
                "spmm",
                format!(
                    "{}x{} times {}x{}",
                    self.rows,
                    self.cols,
                    x.nrows(),
                    x.ncols()
                ),
            ));
        }
        let d = x.ncols();
        let mut out = Array2::<f64>::zeros((self.rows, d));
        for (r, mut out_row) in out.rows_mut().into_iter().enumerate() {
            let o = out_row.as_slice_mut().expect("fresh array is contiguous");
            for (c, v) in self.row(r) {
                for (acc, &xv) in o.iter_mut().zip(x.row(c).iter()) {
                    *acc += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * y`.
    pub fn t_matmul(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        if y.nrows() != self.rows {
            return Err(shape_err(
                "spmm_t",
                format!(
                    "({}x{})^T times {}x{}",
                    self.rows,
                    self.cols,
                    y.nrows(),
                    y.ncols()
                ),
            ));
        }
        let d = y.ncols();
        let mut out = Array2::<f64>::zeros((self.cols, d));
        for r in 0..self.rows {
            let yr = y.row(r);
            for (c, v) in self.row(r) {
                let mut out_row = out.row_mut(c);
                for (acc, &yv) in out_row.iter_mut().zip(yr.iter()) {
                    *acc += v * yv;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[[r, c]] += v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn products_match_dense() {
        let s = Csr::from_triplets(3, 2, &[(0, 1, 2.0), (2, 0, -1.0), (2, 1, 0.5), (0, 1, 1.0)])
            .unwrap();
        let dense = s.to_dense();
        assert_eq!(dense, array![[0.0, 3.0], [0.0, 0.0], [-1.0, 0.5]]);
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert_eq!(s.matmul(x.view()).unwrap(), dense.dot(&x));
        let y = array![[1.0], [2.0], [3.0]];
        assert_eq!(s.t_matmul(y.view()).unwrap(), dense.t().dot(&y));
        assert!(s.matmul(y.view()).is_err());
        assert!(Csr::from_triplets(1, 1, &[(1, 0, 1.0)]).is_err());
    }
}
