use crate::error::{Result, TrackError};

/// Minimum-cost assignment over a dense cost matrix, returning min(m, n)
/// (row, col) pairs of optimal total cost. Disallowed pairs should be
/// pre-masked with a large finite sentinel, not infinity.
///
/// Implementation is the O(n^3) potentials-and-augmenting-paths form of the
/// Hungarian algorithm. Ties between equally cheap assignments resolve by the
/// search order; only total-cost optimality is promised.
pub fn assignment(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let m = cost.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let n = cost[0].len();
    if cost.iter().any(|row| row.len() != n) {
        return Err(TrackError::usage("assignment: ragged cost matrix"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(TrackError::usage("assignment: non-finite cost"));
    }

    // The solver wants rows <= cols; transpose wide-side-first inputs.
    if m > n {
        let transposed: Vec<Vec<f64>> =
            (0..n).map(|j| (0..m).map(|i| cost[i][j]).collect()).collect();
        let mut pairs = assignment(&transposed)?;
        for p in &mut pairs {
            *p = (p.1, p.0);
        }
        pairs.sort_unstable();
        return Ok(pairs);
    }

    // 1-indexed arrays with a virtual 0 row/column, the textbook layout.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=m {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| matched_row[j] != 0)
        .map(|j| (matched_row[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_matches_itself() {
        assert_eq!(assignment(&[vec![3.0]]).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn dominant_diagonal_is_chosen() {
        let cost = vec![vec![1.0, 10.0], vec![10.0, 1.0]];
        assert_eq!(assignment(&cost).unwrap(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn empty_matrices_match_nothing() {
        assert!(assignment(&[]).unwrap().is_empty());
        let zero_cols: Vec<Vec<f64>> = vec![vec![], vec![]];
        assert!(assignment(&zero_cols).unwrap().is_empty());
    }

    #[test]
    fn wide_and_tall_matrices_assign_the_short_side() {
        let wide = vec![vec![5.0, 1.0, 9.0]];
        assert_eq!(assignment(&wide).unwrap(), vec![(0, 1)]);

        let tall = vec![vec![5.0], vec![1.0], vec![9.0]];
        assert_eq!(assignment(&tall).unwrap(), vec![(1, 0)]);
    }

    #[test]
    fn ragged_or_non_finite_input_is_rejected() {
        assert!(assignment(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(assignment(&[vec![f64::INFINITY]]).is_err());
    }
}
