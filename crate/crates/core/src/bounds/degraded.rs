//! Stochastic degradation test: does `P_{Y_s'|X} = P_{Y_s|X} W` hold for
//! some row-stochastic `W`, for every state `s`?

use crate::simplex;
use crate::source_model::CompoundSource;

const MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationCheck {
    pub degraded: bool,
    /// Largest max-norm residual `|P_{Y_s|X} W_s - P_{Y_s'|X}|` over states.
    pub residual: f64,
    /// The fitted `W_s` (`|Y| x |Y|`, row-stochastic), one per state.
    pub channels: Vec<Vec<Vec<f64>>>,
}

fn matmul(a: &[Vec<f64>], w: &[f64], ny: usize) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..ny)
                .map(|c| row.iter().enumerate().map(|(k, v)| v * w[k * ny + c]).sum())
                .collect()
        })
        .collect()
}

fn max_residual(a: &[Vec<f64>], b: &[Vec<f64>], w: &[f64], ny: usize) -> f64 {
    matmul(a, w, ny)
        .iter()
        .zip(b)
        .flat_map(|(r, t)| r.iter().zip(t).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Simplex-constrained least squares `min |A W - B|_F^2` by accelerated
/// projected gradient, rows of `W` projected onto the simplex.
fn fit(a: &[Vec<f64>], b: &[Vec<f64>], ny: usize, tol: f64) -> (Vec<f64>, f64) {
    // Lipschitz constant of the gradient: spectral norm of A^T A, bounded by its Frobenius norm.
    let mut ata = vec![0.0; ny * ny];
    for row in a {
        for i in 0..ny {
            for j in 0..ny {
                ata[i * ny + j] += row[i] * row[j];
            }
        }
    }
    let lipschitz = ata.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);

    let mut w = vec![0.0; ny * ny];
    for i in 0..ny {
        w[i * ny + i] = 1.0;
    }
    let mut momentum = w.clone();
    let mut t = 1.0_f64;
    let mut best = (w.clone(), max_residual(a, b, &w, ny));
    for _ in 0..MAX_ITERS {
        let fitted = matmul(a, &momentum, ny);
        // Gradient A^T (A W - B).
        let mut grad = vec![0.0; ny * ny];
        for (row, (f, target)) in a.iter().zip(fitted.iter().zip(b)) {
            for i in 0..ny {
                for c in 0..ny {
                    grad[i * ny + c] += row[i] * (f[c] - target[c]);
                }
            }
        }
        let mut next: Vec<f64> = momentum
            .iter()
            .zip(&grad)
            .map(|(m, g)| m - g / lipschitz)
            .collect();
        for r in next.chunks_mut(ny) {
            simplex::project(r);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = next
            .iter()
            .zip(&w)
            .map(|(n, o)| n + (t - 1.0) / t_next * (n - o))
            .collect();
        w = next;
        t = t_next;
        let res = max_residual(a, b, &w, ny);
        if res < best.1 {
            best = (w.clone(), res);
        }
        if best.1 <= tol * 1e-3 {
            break;
        }
    }
    best
}

/// Certifies `X - Y_s - Y_s'` for every `s` by fitting each `W_s`.
/// Only X-symbols with positive mass constrain the fit.
pub fn verify_degraded(src: &CompoundSource, s_prime: usize, tol: f64) -> DegradationCheck {
    let ny = src.y_alphabet().len();
    let px = src.x_marginal();
    let support = px.support();
    let conditional = |s: usize| -> Vec<Vec<f64>> {
        let rows = src.joint(s).row_conditionals();
        support.iter().map(|&x| rows[x].clone()).collect()
    };
    let target = conditional(s_prime);
    let mut residual = 0.0_f64;
    let mut channels = Vec::with_capacity(src.n_states());
    for s in 0..src.n_states() {
        let (w, res) = if s == s_prime {
            let mut id = vec![0.0; ny * ny];
            for i in 0..ny {
                id[i * ny + i] = 1.0;
            }
            (id, 0.0)
        } else {
            fit(&conditional(s), &target, ny, tol)
        };
        residual = residual.max(res);
        channels.push(w.chunks(ny).map(<[f64]>::to_vec).collect());
    }
    DegradationCheck {
        degraded: residual <= tol,
        residual,
        channels,
    }
}
