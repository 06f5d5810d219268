//! Independent reference implementations and fixtures for integration tests.
//!
//! The oracles here are deliberately naive loops written from the formulas,
//! sharing no code with the library.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ragcov::embed::EmbeddingMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| (0..dim).map(|_| normal.sample(rng)).collect()).collect()
}

/// Entries uniform in (0, 1]; every pairwise cosine similarity is positive.
pub fn positive_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| 1.0 - rng.gen::<f64>()).collect()).collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(rows.to_vec()).unwrap()
}

/// Random assignment of `n` points to `k` clusters with none empty.
pub fn random_assignment(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut a: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        a.swap(i, j);
    }
    a
}

pub fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    1.0 - uv / (uu.sqrt() * vv.sqrt())
}

pub fn naive_pairwise(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for x in a {
        let mut row = Vec::new();
        for y in b {
            row.push(naive_cosine(x, y));
        }
        out.push(row);
    }
    out
}

pub fn naive_row_min(d: &[Vec<f64>]) -> Vec<f64> {
    d.iter()
        .map(|row| {
            let mut m = f64::INFINITY;
            for &v in row {
                if v < m {
                    m = v;
                }
            }
            m
        })
        .collect()
}

pub fn naive_centroids(rows: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = rows[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in rows.iter().zip(assignment) {
        let norm: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        for j in 0..dim {
            sums[c][j] += r[j] / norm;
        }
        counts[c] += 1;
    }
    for c in 0..k {
        for j in 0..dim {
            sums[c][j] /= counts[c] as f64;
        }
    }
    sums
}

/// `Q_k = {q : dist(q, c_k) < t}` for every cluster.
pub fn naive_covering_sets(q_to_c: &[Vec<f64>], k: usize, t: f64) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); k];
    for (q, row) in q_to_c.iter().enumerate() {
        for c in 0..k {
            if row[c] < t {
                sets[c].push(q);
            }
        }
    }
    sets
}

/// Per-cluster `1 - multidist(C_k, Q_k)` (0 for uncovered clusters) and the
/// share-weighted total.
pub fn naive_multi(
    chunk_to_q: &[Vec<f64>],
    q_to_c: &[Vec<f64>],
    assignment: &[usize],
    k: usize,
    t: f64,
) -> (f64, Vec<f64>) {
    let n = assignment.len();
    let sets = naive_covering_sets(q_to_c, k, t);
    let mut per = vec![0.0; k];
    let mut total = 0.0;
    for c in 0..k {
        if sets[c].is_empty() {
            continue;
        }
        let mut sum = 0.0;
        let mut size = 0usize;
        for i in 0..n {
            if assignment[i] != c {
                continue;
            }
            let mut m = f64::INFINITY;
            for &q in &sets[c] {
                m = m.min(chunk_to_q[i][q]);
            }
            sum += m;
            size += 1;
        }
        per[c] = 1.0 - sum / size as f64;
        total += size as f64 / n as f64 * per[c];
    }
    (total, per)
}

/// Indices of the `k` smallest entries of `d`, skipping `skip`, ties to the
/// lower index.
fn k_nearest(d: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).filter(|&i| Some(i) != skip).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Novelty-mode local outlier factor of each question against the documents.
///
/// k-distance(o) = distance from document o to its k-th nearest other
/// document; reach(p, o) = max(k-distance(o), d(p, o));
/// lrd(p) = 1 / mean over the k nearest documents o of reach(p, o);
/// LOF(q) = mean lrd(o) over q's k nearest documents, divided by lrd(q).
pub fn reference_lof(questions: &[Vec<f64>], docs: &[Vec<f64>], k: usize) -> Vec<f64> {
    let dd = naive_pairwise(docs, docs);
    let n = docs.len();
    let mut kdist = vec![0.0; n];
    let mut neigh = Vec::new();
    for o in 0..n {
        let nn = k_nearest(&dd[o], k, Some(o));
        kdist[o] = dd[o][nn[k - 1]];
        neigh.push(nn);
    }
    let mut lrd = vec![0.0; n];
    for o in 0..n {
        let mut s = 0.0;
        for &p in &neigh[o] {
            s += f64::max(kdist[p], dd[o][p]);
        }
        lrd[o] = 1.0 / (s / k as f64);
    }
    let dq = naive_pairwise(questions, docs);
    dq.iter()
        .map(|row| {
            let nn = k_nearest(row, k, None);
            let mut reach = 0.0;
            let mut lrd_sum = 0.0;
            for &o in &nn {
                reach += f64::max(kdist[o], row[o]);
                lrd_sum += lrd[o];
            }
            let lrd_q = 1.0 / (reach / k as f64);
            (lrd_sum / k as f64) / lrd_q
        })
        .collect()
}

/// Mean silhouette coefficient with Euclidean distance.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..points.len() {
            if i != j {
                sums[labels[j]] += dist(points[i], points[j]);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        let a = if counts[own] == 0 { 0.0 } else { sums[own] / counts[own] as f64 };
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += if counts[own] == 0 { 0.0 } else { (b - a) / a.max(b) };
    }
    total / points.len() as f64
}

/// Windows of `size` words stepping by `size - overlap`, as word-index
/// ranges (inclusive).
pub fn sliding_windows(n_words: usize, size: usize, overlap: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + size).min(n_words) - 1;
        out.push((start, end));
        if end + 1 >= n_words {
            break;
        }
        start += size - overlap;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub path: String,
    pub authorization: Option<String>,
    pub body: serde_json::Value,
}

/// A tiny HTTP/1.1 server on localhost. `respond(request_number, request)`
/// returns the status and JSON body for each request.
pub struct MockServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
}

impl MockServer {
    pub fn start<F>(respond: F) -> Self
    where
        F: Fn(usize, &Recorded) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let requests: Arc<Mutex<Vec<Recorded>>> = Arc::default();
        let log = Arc::clone(&requests);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
                    continue;
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
                let mut length = 0usize;
                let mut authorization = None;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    let (name, value) = line.split_once(':').unwrap_or((line, ""));
                    match name.to_ascii_lowercase().as_str() {
                        "content-length" => length = value.trim().parse().unwrap(),
                        "authorization" => authorization = Some(value.trim().to_string()),
                        _ => {}
                    }
                }
                let mut body = vec![0u8; length];
                reader.read_exact(&mut body).unwrap();
                let rec = Recorded {
                    path,
                    authorization,
                    body: serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null),
                };
                let number = {
                    let mut log = log.lock().unwrap();
                    log.push(rec.clone());
                    log.len() - 1
                };
                let (status, payload) = respond(number, &rec);
                let response = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                let _ = stream.write_all(response.as_bytes());
                let _ = stream.flush();
            }
        });
        Self {
            base_url: format!("http://{addr}"),
            requests,
        }
    }

    pub fn count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

/// An embeddings-API reply with a deterministic vector per input text.
pub fn embedding_reply(body: &serde_json::Value, dim: usize) -> String {
    let inputs = body["input"].as_array().cloned().unwrap_or_default();
    let data: Vec<serde_json::Value> = inputs
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let t = text.as_str().unwrap_or("");
            let v: Vec<f64> = (0..dim).map(|j| ((t.len() + 1) * (j + 1)) as f64 % 7.0 + 1.0).collect();
            serde_json::json!({"index": i, "embedding": v})
        })
        .collect();
    serde_json::json!({"data": data}).to_string()
}
