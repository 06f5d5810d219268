use nalgebra::{DMatrix, SymmetricEigen};

/// Top-two principal component scores of `rows` (mean-centred).
///
/// Each component's sign is fixed so that its largest-magnitude loading is
/// positive. Components beyond the data's rank come out as zeros.
pub fn pca_2d(rows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return vec![[0.0, 0.0]; n];
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);

    // Loadings as columns of a d x 2 matrix.
    let mut loadings = DMatrix::<f64>::zeros(d, 2);
    if d <= n {
        let cov = x.transpose() * &x;
        let eig = SymmetricEigen::new(cov);
        for (slot, idx) in top_two(eig.eigenvalues.as_slice()).into_iter().enumerate() {
            if let Some(i) = idx {
                loadings.set_column(slot, &eig.eigenvectors.column(i));
            }
        }
    } else {
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        for (slot, idx) in top_two(eig.eigenvalues.as_slice()).into_iter().enumerate() {
            if let Some(i) = idx {
                let v = x.transpose() * eig.eigenvectors.column(i);
                let norm = v.norm();
                if norm > 0.0 {
                    loadings.set_column(slot, &(v / norm));
                }
            }
        }
    }
    for mut col in loadings.column_iter_mut() {
        let (mut best, mut best_abs) = (0.0, -1.0);
        for &v in col.iter() {
            if v.abs() > best_abs + 1e-12 {
                best = v;
                best_abs = v.abs();
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
    let scores = &x * loadings;
    (0..n).map(|i| [scores[(i, 0)], scores[(i, 1)]]).collect()
}

/// Indices of the two largest eigenvalues that are meaningfully positive.
fn top_two(values: &[f64]) -> [Option<usize>; 2] {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i] > scale * 1e-12).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    [order.first().copied(), order.get(1).copied()]
}
