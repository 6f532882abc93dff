use faer::sparse::{SparseColMat, Triplet};

/// Compressed sparse row matrix, square.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// max |A_ij - A_ji| / max |A_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max(v.abs());
                d = d.max((v - self.get(j, i)).abs());
            }
        }
        if m == 0.0 {
            0.0
        } else {
            d / m
        }
    }

    /// Principal submatrix on the rows and columns where `keep` is set,
    /// returned with the local numbering map.
    pub fn principal(&self, keep: &[bool]) -> (CsrMatrix, Vec<usize>) {
        let mut local = vec![usize::MAX; self.n];
        let mut count = 0;
        for i in 0..self.n {
            if keep[i] {
                local[i] = count;
                count += 1;
            }
        }
        let mut t = Vec::new();
        for i in 0..self.n {
            if !keep[i] {
                continue;
            }
            for (j, v) in self.row(i) {
                if keep[j] {
                    t.push((local[i], local[j], v));
                }
            }
        }
        (CsrMatrix::from_triplets(count, t), local)
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).expect("valid triplets")
    }

    /// Lower-triangular part in faer format (for symmetric factorizations).
    pub fn lower_to_faer(&self) -> SparseColMat<usize, f64> {
        let mut t = Vec::with_capacity(self.nnz() / 2 + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j <= i {
                    t.push(Triplet::new(i, j, v));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).expect("valid triplets")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, 2.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![6.0, 2.0]);
        assert_eq!(a.symmetry_defect(), 0.0);
    }

    #[test]
    fn principal_submatrix() {
        let a = CsrMatrix::from_triplets(3, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 5.0)]);
        let (b, local) = a.principal(&[true, false, true]);
        assert_eq!(b.n, 2);
        assert_eq!(b.get(0, 1), 5.0);
        assert_eq!(local[2], 1);
    }
}
