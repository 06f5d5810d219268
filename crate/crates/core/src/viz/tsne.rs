//! Exact t-SNE (no Barnes-Hut approximation).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pca::pca_2d;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl TsneParams {
    pub fn new(perplexity: f64, seed: u64) -> Self {
        Self {
            perplexity,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed,
        }
    }
}

fn sq_dists(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Conditional affinities for one row with the entropy matched to
/// `ln(perplexity)` by bisection on the precision.
fn row_affinities(dists: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
    let mut p = vec![0.0; dists.len()];
    for _ in 0..200 {
        let mut sum = 0.0;
        for (j, &d) in dists.iter().enumerate() {
            p[j] = if j == i { 0.0 } else { (-d * beta).exp() };
            sum += p[j];
        }
        if sum == 0.0 {
            // precision too high; every neighbour underflowed
            hi = beta;
            beta = (lo + hi) / 2.0;
            continue;
        }
        let mut h = 0.0;
        for (j, pj) in p.iter_mut().enumerate() {
            *pj /= sum;
            if j != i && *pj > 0.0 {
                h -= *pj * pj.ln();
            }
        }
        let diff = h - target;
        if diff.abs() < 1e-10 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { (beta + hi) / 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    p
}

/// Symmetrised joint affinities `P`.
fn joint_affinities(rows: &[Vec<f64>], perplexity: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = sq_dists(rows);
    let cond: Vec<Vec<f64>> = (0..n).map(|i| row_affinities(&d[i], i, perplexity)).collect();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i][j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    p
}

fn initial_layout(rows: &[Vec<f64>], seed: u64) -> Vec<[f64; 2]> {
    let mut y = pca_2d(rows);
    let n = y.len() as f64;
    let mean = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let sd = (y.iter().map(|p| (p[0] - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 && sd.is_finite() {
        for p in &mut y {
            p[0] = p[0] / sd * 1e-4;
            p[1] = p[1] / sd * 1e-4;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1e-4).unwrap();
        for p in &mut y {
            p[0] = normal.sample(&mut rng);
            p[1] = normal.sample(&mut rng);
        }
    }
    y
}

/// Runs t-SNE on `rows`; the caller validates the perplexity.
pub fn tsne(rows: &[Vec<f64>], params: &TsneParams) -> Vec<[f64; 2]> {
    let n = rows.len();
    let p = joint_affinities(rows, params.perplexity);
    let mut y = initial_layout(rows, params.seed);
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let learning_rate = (n as f64 / params.exaggeration / 4.0).max(50.0);
    let mut num = vec![vec![0.0; n]; n];

    for iter in 0..params.iterations {
        let exaggerating = iter < params.exaggeration_iters;
        let exag = if exaggerating { params.exaggeration } else { 1.0 };
        let momentum = if exaggerating { 0.5 } else { 0.8 };

        let mut z = 0.0;
        for i in 0..n {
            for j in 0..i {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i][j] = v;
                num[j][i] = v;
                z += 2.0 * v;
            }
        }
        let z = z.max(f64::MIN_POSITIVE);

        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i][j] / z;
                let mult = (exag * p[i][j] - q) * num[i][j];
                grad[0] += 4.0 * mult * (y[i][0] - y[j][0]);
                grad[1] += 4.0 * mult * (y[i][1] - y[j][1]);
            }
            for c in 0..2 {
                let same_sign = (grad[c] > 0.0) == (update[i][c] > 0.0);
                gains[i][c] = if same_sign { gains[i][c] * 0.8 } else { gains[i][c] + 0.2 };
                gains[i][c] = gains[i][c].max(0.01);
                update[i][c] = momentum * update[i][c] - learning_rate * gains[i][c] * grad[c];
            }
        }
        for (yi, ui) in y.iter_mut().zip(&update) {
            yi[0] += ui[0];
            yi[1] += ui[1];
        }
        let cx = y.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        let cy = y.iter().map(|p| p[1]).sum::<f64>() / n as f64;
        for yi in &mut y {
            yi[0] -= cx;
            yi[1] -= cy;
        }
    }
    y
}
