//! The max-`I(U;X)` program over stacked rows of `P_{U|X}`.
//!
//! A channel is a row-major `|X| x |U|` slice. All information quantities
//! are in bits; gradients are analytic and checked against finite
//! differences in the tests.

use crate::source_model::CompoundSource;

/// Floor inside logarithms so that gradients at the simplex boundary stay finite.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone)]
pub(crate) struct Program {
    pub px: Vec<f64>,
    /// Per state, `P_{X,Y_s}` row-major.
    pub joints: Vec<Vec<f64>>,
    pub py: Vec<Vec<f64>>,
    pub nx: usize,
    pub ny: usize,
    pub k: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Eval {
    pub i_ux: f64,
    pub min_i_uy: f64,
    /// First state attaining the minimum.
    pub active: usize,
}

impl Eval {
    /// `I(U;X) - min_s I(U;Y_s) - R`; feasible iff `<= 0`.
    pub fn violation(&self, rate: f64) -> f64 {
        self.i_ux - self.min_i_uy - rate
    }
}

#[inline]
fn log2_ratio(a: f64, b: f64) -> f64 {
    (a.max(LOG_FLOOR) / b.max(LOG_FLOOR)).log2()
}

impl Program {
    pub fn new(src: &CompoundSource, states: &[usize], k: usize, rate: f64) -> Self {
        let nx = src.x_alphabet().len();
        let ny = src.y_alphabet().len();
        let joints: Vec<Vec<f64>> = states
            .iter()
            .map(|&s| src.joint(s).mass().to_vec())
            .collect();
        let py = states
            .iter()
            .map(|&s| src.joint(s).col_marginal_probs())
            .collect();
        Program {
            px: src.x_marginal().probs().to_vec(),
            joints,
            py,
            nx,
            ny,
            k,
            rate,
        }
    }

    pub fn n_states(&self) -> usize {
        self.joints.len()
    }

    pub fn u_marginal(&self, w: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.k];
        for x in 0..self.nx {
            for u in 0..self.k {
                q[u] += self.px[x] * w[x * self.k + u];
            }
        }
        q
    }

    fn u_y_joint(&self, w: &[f64], s: usize) -> Vec<f64> {
        let (k, ny) = (self.k, self.ny);
        let mut r = vec![0.0; k * ny];
        let joint = &self.joints[s];
        for x in 0..self.nx {
            for u in 0..k {
                let wu = w[x * k + u];
                if wu == 0.0 {
                    continue;
                }
                for y in 0..ny {
                    r[u * ny + y] += wu * joint[x * ny + y];
                }
            }
        }
        r
    }

    pub fn i_ux(&self, w: &[f64], q: &[f64]) -> f64 {
        let mut acc = 0.0;
        for x in 0..self.nx {
            for u in 0..self.k {
                let m = self.px[x] * w[x * self.k + u];
                if m > 0.0 {
                    acc += m * (w[x * self.k + u] / q[u]).log2();
                }
            }
        }
        acc.max(0.0)
    }

    pub fn i_uy(&self, w: &[f64], q: &[f64], s: usize) -> f64 {
        let r = self.u_y_joint(w, s);
        let py = &self.py[s];
        let mut acc = 0.0;
        for u in 0..self.k {
            for y in 0..self.ny {
                let m = r[u * self.ny + y];
                if m > 0.0 {
                    acc += m * (m / (q[u] * py[y])).log2();
                }
            }
        }
        acc.max(0.0)
    }

    pub fn evaluate(&self, w: &[f64]) -> Eval {
        let q = self.u_marginal(w);
        let i_ux = self.i_ux(w, &q);
        let mut min_i_uy = f64::INFINITY;
        let mut active = 0;
        for s in 0..self.n_states() {
            let v = self.i_uy(w, &q, s);
            if v < min_i_uy {
                min_i_uy = v;
                active = s;
            }
        }
        Eval {
            i_ux,
            min_i_uy,
            active,
        }
    }

    /// Exact-penalty objective `I(U;X) - lambda * max(0, violation)`.
    pub fn penalized(&self, eval: &Eval, lambda: f64) -> f64 {
        eval.i_ux - lambda * eval.violation(self.rate).max(0.0)
    }

    /// `d I(U;X) / d W(u|x) = P_X(x) log2(W(u|x) / P_U(u))`.
    pub fn grad_i_ux(&self, w: &[f64], q: &[f64], out: &mut [f64]) {
        for x in 0..self.nx {
            for u in 0..self.k {
                let i = x * self.k + u;
                out[i] = if q[u] > 0.0 {
                    self.px[x] * log2_ratio(w[i], q[u])
                } else {
                    0.0
                };
            }
        }
    }

    /// `d I(U;Y_s) / d W(u|x) = sum_y P(x,y) log2(P_{U,Y}(u,y) / P_U(u)) + row constant`.
    pub fn grad_i_uy(&self, w: &[f64], q: &[f64], s: usize, out: &mut [f64]) {
        let r = self.u_y_joint(w, s);
        let joint = &self.joints[s];
        for x in 0..self.nx {
            for u in 0..self.k {
                let mut g = 0.0;
                if q[u] > 0.0 {
                    for y in 0..self.ny {
                        let p = joint[x * self.ny + y];
                        if p > 0.0 {
                            g += p * log2_ratio(r[u * self.ny + y], q[u]);
                        }
                    }
                }
                out[x * self.k + u] = g;
            }
        }
    }

    /// Gradient (or the active-branch subgradient) of [`Program::penalized`].
    pub fn grad_penalized(&self, w: &[f64], eval: &Eval, lambda: f64, out: &mut [f64]) {
        let q = self.u_marginal(w);
        self.grad_i_ux(w, &q, out);
        if eval.violation(self.rate) > 0.0 {
            let mut gy = vec![0.0; out.len()];
            self.grad_i_uy(w, &q, eval.active, &mut gy);
            for (o, g) in out.iter_mut().zip(&gy) {
                *o = (1.0 - lambda) * *o + lambda * g;
            }
        }
    }
}
