//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use anchorscore::corpus::{EmbeddedToken, TokenSequence};
use anchorscore::merge::{WordSequence, WordUnit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Multilingual WordPiece output for the Russian fixture sentence.
pub const MULTILINGUAL_PIECES: [&str; 31] = [
    "В",
    "##дру",
    "##г",
    "что",
    "-",
    "то",
    "вы",
    "##пал",
    "##о",
    "от",
    "##ту",
    "##да",
    "[UNK]",
    "большой",
    ",",
    "не",
    "##ров",
    "##но",
    "сл",
    "##ожен",
    "##ный",
    "к",
    "##ус",
    "##ок",
    "кор",
    "##ичне",
    "##вой",
    "бу",
    "##ма",
    "##ги",
    ".",
];

/// Monolingual Russian WordPiece output for the same sentence.
pub const MONOLINGUAL_PIECES: [&str; 17] = [
    "Вдруг",
    "что",
    "-",
    "то",
    "выпало",
    "оттуда",
    "—",
    "большой",
    ",",
    "неров",
    "##но",
    "сложен",
    "##ный",
    "кусок",
    "коричневой",
    "бумаги",
    ".",
];

pub const FIXTURE_SENTENCE: &str =
    "Вдруг что-то выпало оттуда — большой, неровно сложенный кусок коричневой бумаги.";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn token_sequence(
    sentence_id: &str,
    system_id: &str,
    lang: &str,
    pieces: &[&str],
    d: usize,
    seed: u64,
) -> TokenSequence {
    let mut r = rng(seed);
    TokenSequence {
        sentence_id: sentence_id.into(),
        lang: lang.into(),
        system_id: system_id.into(),
        text: pieces.join(" "),
        tokens: pieces
            .iter()
            .map(|p| EmbeddedToken::new(*p, random_vector(&mut r, d)))
            .collect(),
    }
}

pub fn word_sequence(system_id: &str, vectors: Vec<Vec<f64>>) -> WordSequence {
    WordSequence {
        sentence_id: "s".into(),
        lang: "x".into(),
        system_id: system_id.into(),
        text: String::new(),
        words: vectors
            .into_iter()
            .enumerate()
            .map(|(i, vector)| WordUnit {
                text: format!("w{i}"),
                vector,
                piece_span: i..i + 1,
            })
            .collect(),
    }
}

/// Brute-force BERTScore: build the full cosine matrix, then take row and
/// column maxima with explicit loops. Returns (P, R, F1).
pub fn brute_force_bertscore(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> (f64, f64, f64) {
    let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut matrix = vec![vec![0.0; reference.len()]; candidate.len()];
    for (i, c) in candidate.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            let dot: f64 = c.iter().zip(r).map(|(a, b)| a * b).sum();
            let denom = norm(c) * norm(r);
            matrix[i][j] = if denom == 0.0 { 0.0 } else { dot / denom };
        }
    }
    let mut precision = 0.0;
    for row in &matrix {
        let mut best = f64::NEG_INFINITY;
        for &x in row {
            if x > best {
                best = x;
            }
        }
        precision += best;
    }
    precision /= candidate.len() as f64;
    let mut recall = 0.0;
    for j in 0..reference.len() {
        let mut best = f64::NEG_INFINITY;
        for row in &matrix {
            if row[j] > best {
                best = row[j];
            }
        }
        recall += best;
    }
    recall /= reference.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Pearson correlation from raw sums: (nΣxy − ΣxΣy) / sqrt((nΣx² − (Σx)²)(nΣy² − (Σy)²)).
pub fn brute_force_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx.abs() < 1e-12 || vy.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx * vy).sqrt())
}

/// Kendall τ-b from the sign matrix over all ordered pairs i ≠ j.
pub fn brute_force_kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let sign = |a: f64, b: f64| {
        if a > b {
            1.0
        } else if a < b {
            -1.0
        } else {
            0.0
        }
    };
    let (mut num, mut dx, mut dy) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i == j {
                continue;
            }
            let a = sign(x[i], x[j]);
            let b = sign(y[i], y[j]);
            num += a * b;
            dx += a * a;
            dy += b * b;
        }
    }
    if dx == 0.0 || dy == 0.0 {
        return None;
    }
    Some(num / (dx * dy).sqrt())
}

/// Average ranks by counting: rank = 1 + #smaller + (#equal − 1) / 2.
pub fn brute_force_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let smaller = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Heap's algorithm.
pub fn permutations(n: usize) -> Vec<Vec<f64>> {
    fn heap(k: usize, a: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k - 1 {
            heap(k - 1, a, out);
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
        heap(k - 1, a, out);
    }
    let mut a: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// ‖ΩA − B‖_F with Ω given as rows and A, B as column lists.
pub fn frobenius_residual(omega: &[Vec<f64>], a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (col_a, col_b) in a.iter().zip(b) {
        for (row, target) in omega.iter().zip(col_b) {
            let mapped: f64 = row.iter().zip(col_a).map(|(x, y)| x * y).sum();
            total += (mapped - target).powi(2);
        }
    }
    total.sqrt()
}

pub fn matvec(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Random orthogonal matrix (as rows) by Gram-Schmidt on Gaussian-ish rows.
pub fn gram_schmidt_orthogonal(rng: &mut impl Rng, d: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v = random_vector(rng, d);
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows
}
