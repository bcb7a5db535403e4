//! Non-negative least squares, `min ‖Ax − b‖₂` subject to `x ≥ 0`
//! (Lawson–Hanson active-set method).

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `‖Ax − b‖₂`.
    pub residual: f64,
    pub iterations: usize,
}

fn least_squares_on(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> DVector<f64> {
    let sub = DMatrix::from_fn(a.nrows(), passive.len(), |r, c| a[(r, passive[c])]);
    let svd = sub.svd(true, true);
    svd.solve(b, 1e-13).expect("SVD computed with both factors")
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    let n = a.ncols();
    let max_iter = 30 * n.max(1);
    let tol = 1e-13 * a.amax().max(1.0) * b.amax().max(1.0);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let mut iterations = 0;

    loop {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        if iterations >= max_iter {
            break;
        }
        passive[j] = true;

        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z_sub = least_squares_on(a, b, &idx);
            if z_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = z_sub[k];
                }
                break;
            }
            // step toward z until the first passive variable hits zero
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if z_sub[k] <= 0.0 {
                    let denom = x[i] - z_sub[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z_sub[k] - x[i]);
            }
            for &i in &idx {
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if iterations >= max_iter {
                break;
            }
        }
    }

    let residual = (a * &x - b).norm();
    NnlsSolution {
        x,
        residual,
        iterations,
    }
}
