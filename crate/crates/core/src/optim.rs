//! Local minimizers: Nelder–Mead simplex and Levenberg–Marquardt least squares.

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the spread of simplex values drops below this.
    pub ftol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            ftol: 1e-13,
            initial_step: 0.25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl NelderMead {
    /// Standard reflection/expansion/contraction/shrink with coefficients
    /// (1, 2, 1/2, 1/2). Deterministic for a given `x0`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            simplex.push(x);
        }
        let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();

        while evals < self.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            if (values[n] - values[0]).abs() <= self.ftol * (1.0 + values[0].abs()) {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let reflected = along(1.0);
            let fr = eval(&reflected, &mut evals);
            if fr < values[0] {
                let expanded = along(2.0);
                let fe = eval(&expanded, &mut evals);
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
            } else {
                let (contracted, fc) = if fr < values[n] {
                    let x = along(0.5);
                    let v = eval(&x, &mut evals);
                    (x, v)
                } else {
                    let x = along(-0.5);
                    let v = eval(&x, &mut evals);
                    (x, v)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = contracted;
                    values[n] = fc;
                } else {
                    let best = simplex[0].clone();
                    for i in 1..=n {
                        for j in 0..n {
                            simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                        }
                        values[i] = eval(&simplex[i], &mut evals);
                    }
                }
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("non-empty simplex");
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            evals,
        }
    }
}

/// Damped Gauss–Newton for `min ‖r(x)‖²` with a forward-difference Jacobian.
#[derive(Clone, Copy, Debug)]
pub struct LevenbergMarquardt {
    pub max_iter: usize,
    /// Stop once `‖r‖` falls below this.
    pub tol: f64,
    pub step: f64,
}

impl Default for LevenbergMarquardt {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-14,
            step: 1e-7,
        }
    }
}

impl LevenbergMarquardt {
    /// Returns the final point and `‖r‖` there.
    pub fn minimize<F: Fn(&[f64]) -> Vec<f64>>(&self, r: F, x0: &[f64]) -> (Vec<f64>, f64) {
        use nalgebra::{DMatrix, DVector};
        let n = x0.len();
        let mut x = x0.to_vec();
        let mut res = DVector::from_vec(r(&x));
        let mut cost = res.norm();
        let mut lambda = 1e-3;
        for _ in 0..self.max_iter {
            if cost < self.tol {
                break;
            }
            let m = res.len();
            let mut jac = DMatrix::<f64>::zeros(m, n);
            for j in 0..n {
                let h = self.step * x[j].abs().max(1.0);
                let mut xp = x.clone();
                xp[j] += h;
                let rp = DVector::from_vec(r(&xp));
                jac.set_column(j, &((rp - &res) / h));
            }
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * &res;
            let mut improved = false;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for k in 0..n {
                    a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
                }
                let Some(delta) = a.cholesky().map(|c| c.solve(&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(xi, d)| xi - d).collect();
                let rt = DVector::from_vec(r(&trial));
                let ct = rt.norm();
                if ct < cost {
                    x = trial;
                    res = rt;
                    cost = ct;
                    lambda = (lambda * 0.3).max(1e-15);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        (x, cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let nm = NelderMead {
            max_evals: 20_000,
            ftol: 1e-16,
            initial_step: 0.5,
        };
        let m = nm.minimize(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-5, "{:?}", m);
        assert!((m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn quadratic_in_many_dimensions() {
        let nm = NelderMead {
            max_evals: 50_000,
            ..Default::default()
        };
        let target: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let m = nm.minimize(
            |x| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum(),
            &[0.0; 8],
        );
        assert!(m.value < 1e-8);
    }

    #[test]
    fn least_squares_zero_residual() {
        let lm = LevenbergMarquardt::default();
        let (x, cost) = lm.minimize(|x| vec![x[0] * x[0] - 2.0, x[0] * x[1] - 1.0, x[1] - 0.5f64.sqrt()], &[1.0, 1.0]);
        assert!(cost < 1e-12, "{cost}");
        assert!((x[0] - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn nan_is_treated_as_worst() {
        let m = NelderMead::default().minimize(|x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) }, &[0.5]);
        assert!((m.x[0] - 1.0).abs() < 1e-5);
    }
}
