//! Maximum-weight one-to-one assignment.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

/// Kuhn–Munkres on a rectangular weight matrix. Returns, for each row, the
/// column it is matched to (rows beyond the column count stay unmatched).
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let mut out = vec![None; rows];
    if rows == 0 || cols == 0 {
        return out;
    }
    // Solve the min-cost problem with n <= m, transposing if needed.
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        if transpose {
            -weights[j][i]
        } else {
            -weights[i][j]
        }
    };

    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    for j in 1..=m {
        if p[j] == 0 {
            continue;
        }
        let (r, c) = (p[j] - 1, j - 1);
        if transpose {
            out[c] = Some(r);
        } else {
            out[r] = Some(c);
        }
    }
    out
}

/// Exact total weight of an assignment.
pub fn assignment_value(weights: &[Vec<BigRational>], assignment: &[Option<usize>]) -> BigRational {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| weights[r][c].clone()))
        .fold(BigRational::zero(), |acc, w| acc + w)
}

/// Best assignment by trying every injective row-to-column map. Only for
/// small matrices.
pub fn exhaustive_assignment(weights: &[Vec<BigRational>]) -> (BigRational, Vec<Option<usize>>) {
    fn go(
        weights: &[Vec<BigRational>],
        row: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        value: BigRational,
        best: &mut (BigRational, Vec<Option<usize>>),
    ) {
        if row == weights.len() {
            if value > best.0 {
                *best = (value, current.clone());
            }
            return;
        }
        current[row] = None;
        go(weights, row + 1, used, current, value.clone(), best);
        for c in 0..used.len() {
            if used[c] {
                continue;
            }
            used[c] = true;
            current[row] = Some(c);
            go(weights, row + 1, used, current, value.clone() + &weights[row][c], best);
            used[c] = false;
        }
        current[row] = None;
    }
    let cols = weights.first().map_or(0, Vec::len);
    let mut best = (BigRational::zero(), vec![None; weights.len()]);
    let mut current = vec![None; weights.len()];
    go(weights, 0, &mut vec![false; cols], &mut current, BigRational::zero(), &mut best);
    best
}

pub(crate) fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
