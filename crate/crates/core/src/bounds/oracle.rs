//! Exhaustive search over channels whose rows lie on a simplex grid.
//!
//! Deliberately goes through [`induce_joints`] and [`mutual_information`]
//! rather than the solver's specialized evaluation, so the two routes
//! share nothing beyond the source itself.

use thiserror::Error;

use crate::source_model::{induce_joints, mutual_information, AuxChannel, CompoundSource};

pub const DEFAULT_GRID_CAP: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid has {points} channels, cap is {cap}")]
    TooLarge { points: u64, cap: u64 },
    #[error("resolution and |U| must be positive")]
    Empty,
}

/// All compositions of `resolution` into `k` parts, as probability rows.
fn grid_rows(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(k, left - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, resolution, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|c| {
            c.into_iter()
                .map(|v| v as f64 / resolution as f64)
                .collect()
        })
        .collect()
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Best feasible `I(U;X)` over the grid for the given states' constraint.
fn grid_max(src: &CompoundSource, states: &[usize], rate: f64, rows: &[Vec<f64>]) -> f64 {
    let sub = src.restrict(states).expect("non-empty state list");
    let nx = src.x_alphabet().len();
    let mut idx = vec![0usize; nx];
    let mut best = 0.0_f64;
    loop {
        let channel = AuxChannel::from_rows(idx.iter().map(|&i| rows[i].clone()).collect())
            .expect("grid rows are valid pmfs");
        let ind = induce_joints(&channel, &sub).expect("matching alphabets");
        let i_ux = mutual_information(&ind.ux);
        let min_i_uy = ind
            .states
            .iter()
            .map(|s| mutual_information(&s.uy))
            .fold(f64::INFINITY, f64::min);
        if i_ux - min_i_uy <= rate && i_ux > best {
            best = i_ux;
        }
        // Odometer over the rows.
        let mut pos = 0;
        loop {
            if pos == nx {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < rows.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Lower: the grid maximum of the compound program. Upper: the minimum over
/// states of the grid maxima of the single-state programs. Either way the
/// result never exceeds the true optimum at this `|U|`.
pub fn grid_oracle(
    src: &CompoundSource,
    rate: f64,
    resolution: usize,
    which: Which,
    u_cardinality: usize,
    cap: u64,
) -> Result<f64, GridError> {
    if resolution == 0 || u_cardinality == 0 {
        return Err(GridError::Empty);
    }
    let per_row = binomial(
        (resolution + u_cardinality - 1) as u64,
        (u_cardinality - 1) as u64,
    );
    let points = (0..src.x_alphabet().len()).fold(1u64, |acc, _| acc.saturating_mul(per_row));
    if points > cap {
        return Err(GridError::TooLarge { points, cap });
    }
    let rows = grid_rows(u_cardinality, resolution);
    Ok(match which {
        Which::Lower => {
            let all: Vec<usize> = (0..src.n_states()).collect();
            grid_max(src, &all, rate, &rows)
        }
        Which::Upper => (0..src.n_states())
            .map(|s| grid_max(src, &[s], rate, &rows))
            .fold(f64::INFINITY, f64::min),
    })
}
