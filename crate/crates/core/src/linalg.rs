/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// `y = Mᵀ x` (x has `rows` entries, y has `cols`).
    pub fn t_mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yk, wk) in y.iter_mut().zip(self.row(i)) {
                *yk += xi * wk;
            }
        }
        y
    }

    /// `x = M y` (y has `cols` entries, x has `rows`).
    pub fn mul(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.cols);
        (0..self.rows).map(|i| crate::util::dot(self.row(i), y)).collect()
    }

    /// `M += scale · x yᵀ`.
    pub fn add_outer(&mut self, x: &[f64], y: &[f64], scale: f64) {
        for (i, &xi) in x.iter().enumerate() {
            let s = xi * scale;
            if s == 0.0 {
                continue;
            }
            for (m, yk) in self.row_mut(i).iter_mut().zip(y) {
                *m += s * yk;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_products() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(m.t_mul(&[1.0, 0.0, 1.0]), vec![6.0, 8.0]);
        assert_eq!(m.mul(&[1.0, 1.0]), vec![3.0, 7.0, 11.0]);
        let mut z = Matrix::zeros(2, 2);
        z.add_outer(&[1.0, 2.0], &[3.0, 4.0], 0.5);
        assert_eq!(z.data, vec![1.5, 2.0, 3.0, 4.0]);
    }
}
