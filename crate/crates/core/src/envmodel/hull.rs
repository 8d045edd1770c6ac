//! Exact interior-of-hull test for a finite set of drift vectors.
//!
//! `0` lies in the interior of `conv(S)` iff `S` spans `R^d` and some strictly
//! positive combination of `S` vanishes. Writing the coefficients as `1 + μ`
//! turns the second condition into the standard-form feasibility problem
//! `Σ μ_j s_j = −Σ s_j`, `μ ≥ 0`, decided here by a phase-one simplex.

const PIVOT_EPS: f64 = 1e-12;

pub(super) fn rank(vectors: &[Vec<f64>], dim: usize) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors.to_vec();
    let mut rank = 0;
    for col in 0..dim {
        let Some(pivot) = (rank..rows.len())
            .filter(|&i| rows[i][col].abs() > PIVOT_EPS)
            .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()))
        else {
            continue;
        };
        rows.swap(rank, pivot);
        for i in 0..rows.len() {
            if i != rank {
                let f = rows[i][col] / rows[rank][col];
                for k in col..dim {
                    rows[i][k] -= f * rows[rank][k];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Strictly positive convex weights `λ` with `Σ λ_j s_j = 0`, if any exist.
pub(super) fn strictly_positive_balance(vectors: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = vectors.len();
    if m == 0 {
        return None;
    }
    let d = vectors[0].len();
    let cols = m + d;
    let mut tab = vec![vec![0.0; cols + 1]; d];
    for (i, row) in tab.iter_mut().enumerate() {
        let mut rhs = 0.0;
        for j in 0..m {
            row[j] = vectors[j][i];
            rhs -= vectors[j][i];
        }
        if rhs < 0.0 {
            row[..m].iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        row[m + i] = 1.0;
        row[cols] = rhs;
    }
    let mut basis: Vec<usize> = (m..cols).collect();
    let cost = |j: usize| if j >= m { 1.0 } else { 0.0 };

    // Bland's rule: smallest improving column, smallest leaving basis index on ties.
    for _ in 0..10_000 {
        let entering = (0..cols).find(|&j| {
            !basis.contains(&j) && {
                let reduced: f64 =
                    cost(j) - (0..d).map(|i| cost(basis[i]) * tab[i][j]).sum::<f64>();
                reduced < -PIVOT_EPS
            }
        });
        let Some(e) = entering else { break };
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..d {
            if tab[i][e] > PIVOT_EPS {
                let ratio = tab[i][cols] / tab[i][e];
                let better = match leaving {
                    None => true,
                    Some((l, best)) => {
                        ratio < best - PIVOT_EPS || (ratio <= best + PIVOT_EPS && basis[i] < basis[l])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let (l, _) = leaving?;
        let piv = tab[l][e];
        tab[l].iter_mut().for_each(|v| *v /= piv);
        for i in 0..d {
            if i != l {
                let f = tab[i][e];
                if f != 0.0 {
                    for k in 0..=cols {
                        tab[i][k] -= f * tab[l][k];
                    }
                }
            }
        }
        basis[l] = e;
    }

    let infeasibility: f64 = (0..d).filter(|&i| basis[i] >= m).map(|i| tab[i][cols]).sum();
    if infeasibility > 1e-10 {
        return None;
    }
    let mut lambda = vec![1.0; m];
    for i in 0..d {
        if basis[i] < m {
            lambda[basis[i]] += tab[i][cols].max(0.0);
        }
    }
    let total: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|v| *v /= total);
    let residual = (0..d)
        .map(|i| (0..m).map(|j| lambda[j] * vectors[j][i]).sum::<f64>().abs())
        .fold(0.0, f64::max);
    (residual <= 1e-9).then_some(lambda)
}
