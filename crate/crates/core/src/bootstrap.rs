//! Multiplier-bootstrap engine shared by the λ rules, the sup-score test,
//! joint confidence bands and treatment standard errors.

use nalgebra::{DMatrix, DVectorView};
use rayon::prelude::*;

use crate::simkit::{fill_multipliers, MultiplierKind, RngStream};

const CHUNK: usize = 128;

/// For each draw `b`, computes `f(Mᵀ g⁽ᵇ⁾)` where `g⁽ᵇ⁾` holds `n`
/// multipliers taken from `stream.substream(b)`.
///
/// Results do not depend on the thread count.
pub fn multiplier_projections<F>(m: &DMatrix<f64>, num_draws: usize, kind: MultiplierKind, stream: RngStream, f: F) -> Vec<f64>
where
    F: Fn(DVectorView<'_, f64>) -> f64 + Sync,
{
    let n = m.nrows();
    let mt = m.transpose();
    let chunks: Vec<usize> = (0..num_draws).step_by(CHUNK).collect();
    chunks
        .par_iter()
        .flat_map_iter(|&start| {
            let width = CHUNK.min(num_draws - start);
            let mut g = DMatrix::zeros(n, width);
            for (k, mut col) in g.column_iter_mut().enumerate() {
                let mut rng = stream.substream((start + k) as u64).rng();
                fill_multipliers(kind, &mut rng, col.as_mut_slice());
            }
            let proj = &mt * g;
            (0..width).map(|k| f(proj.column(k))).collect::<Vec<_>>()
        })
        .collect()
}

/// `max_j |Σ_i m_ij g_i|` for each draw.
pub fn sup_norm_draws(m: &DMatrix<f64>, num_draws: usize, kind: MultiplierKind, stream: RngStream) -> Vec<f64> {
    multiplier_projections(m, num_draws, kind, stream, |v| v.amax())
}
