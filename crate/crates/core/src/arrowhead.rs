//! Eigen-decomposition of symmetric arrowhead matrices
//! `[[alpha, z^T], [z, diag(d)]]` in O(n^2).
//!
//! Roots of the secular equation are bracketed by interlacing and refined by
//! bisection in coordinates shifted to the nearest pole. The off-diagonal
//! vector is then recomputed from the computed spectrum, which makes the
//! eigenvectors numerically orthogonal.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ArrowheadEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns; row 0 is the arrow tip.
    pub vectors: DMatrix<f64>,
}

struct Root {
    pole: usize,
    mu: f64,
}

/// `d` must be strictly increasing.
pub fn arrowhead_eigen(alpha: f64, z: &[f64], d: &[f64]) -> Result<ArrowheadEigen> {
    let n = d.len();
    if z.len() != n {
        return Err(Error::validation("arrowhead: z and d lengths differ"));
    }
    if d.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation("arrowhead: diagonal must be strictly increasing"));
    }
    if !alpha.is_finite() || z.iter().chain(d).any(|v| !v.is_finite()) {
        return Err(Error::validation("arrowhead: non-finite entry"));
    }

    let scale = d
        .iter()
        .map(|v| v.abs())
        .chain(std::iter::once(alpha.abs()))
        .fold(0.0, f64::max)
        + z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let (active, deflated): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| z[k].abs() > tiny);
    let da: Vec<f64> = active.iter().map(|&k| d[k]).collect();
    let za: Vec<f64> = active.iter().map(|&k| z[k]).collect();
    let (lam, vecs) = solve_nondeflated(alpha, &za, &da);

    let mut pairs: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(n + 1);
    for (j, l) in lam.into_iter().enumerate() {
        let mut col = Vec::with_capacity(active.len() + 1);
        col.push((0, vecs[j][0]));
        for (a, &k) in active.iter().enumerate() {
            col.push((k + 1, vecs[j][a + 1]));
        }
        pairs.push((l, col));
    }
    for &k in &deflated {
        pairs.push((d[k], vec![(k + 1, 1.0)]));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut vectors = DMatrix::zeros(n + 1, n + 1);
    let mut values = Vec::with_capacity(n + 1);
    for (j, (l, col)) in pairs.into_iter().enumerate() {
        values.push(l);
        for (row, v) in col {
            vectors[(row, j)] = v;
        }
    }
    Ok(ArrowheadEigen { values, vectors })
}

fn solve_nondeflated(alpha: f64, z: &[f64], d: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = d.len();
    if n == 0 {
        return (vec![alpha], vec![vec![1.0]]);
    }
    let znorm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lower = alpha.min(d[0]) - znorm - 1.0;
    let upper = alpha.max(d[n - 1]) + znorm + 1.0;

    let roots: Vec<Root> = (0..=n).map(|i| find_root(alpha, z, d, i, lower, upper)).collect();
    let diff = |k: usize, r: &Root| -> f64 { r.mu - (d[k] - d[r.pole]) };

    // Recomputed off-diagonal entries consistent with the computed spectrum.
    let zhat: Vec<f64> = (0..n)
        .map(|i| {
            let mut p = diff(i, &roots[i]).abs() * diff(i, &roots[i + 1]).abs();
            for j in 0..i {
                p *= diff(i, &roots[j]).abs() / (d[i] - d[j]).abs();
            }
            for j in i + 1..n {
                p *= diff(i, &roots[j + 1]).abs() / (d[i] - d[j]).abs();
            }
            p.sqrt().copysign(z[i])
        })
        .collect();

    let values: Vec<f64> = roots.iter().map(|r| d[r.pole] + r.mu).collect();
    let vectors = roots
        .iter()
        .map(|r| {
            let mut v = Vec::with_capacity(n + 1);
            v.push(1.0);
            v.extend(zhat.iter().enumerate().map(|(k, z)| z / diff(k, r)));
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            v
        })
        .collect();
    (values, vectors)
}

/// Root `i` lies in `(d[i-1], d[i])`, with the outer intervals closed off by
/// `lower` and `upper`.
fn find_root(alpha: f64, z: &[f64], d: &[f64], i: usize, lower: f64, upper: f64) -> Root {
    let n = d.len();
    let secular = |pole: usize, mu: f64| -> f64 {
        let s = d[pole];
        let mut f = (alpha - s) - mu;
        for k in 0..n {
            f += z[k] * z[k] / (mu - (d[k] - s));
        }
        f
    };
    let pole = if i == 0 {
        0
    } else if i == n {
        n - 1
    } else {
        let mid = 0.5 * (d[i] - d[i - 1]);
        if secular(i - 1, mid) > 0.0 {
            i
        } else {
            i - 1
        }
    };
    let s = d[pole];
    let (mut lo, mut hi) = match (i == 0, i == n) {
        (true, true) => unreachable!(),
        (true, false) => (lower - s, 0.0),
        (false, true) => (0.0, upper - s),
        _ if pole == i => (0.5 * (d[i - 1] - s), 0.0),
        _ => (0.0, 0.5 * (d[i] - s)),
    };
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = secular(pole, mid);
        if f == 0.0 {
            return Root { pole, mu: mid };
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = if lo == 0.0 {
        hi
    } else if hi == 0.0 {
        lo
    } else {
        0.5 * (lo + hi)
    };
    Root { pole, mu }
}
