//! Seeded, platform-independent input generators.
//!
//! Every row of a sparse matrix draws from its own ChaCha8 stream
//! (`seed`, stream = row index), so rows can be generated in any order or in
//! parallel and the matrix is bit-identical either way.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::formats::{measure_rows, CsrMatrix, DenseMatrix, SellpackStats};

/// Per-row nonzero sampler: `Binomial(n_cols, density)` nonzeros per row,
/// positions uniform without replacement, values uniform in (0, 1].
#[derive(Debug, Clone)]
pub struct RowSampler {
    n_cols: usize,
    seed: u64,
    count: Binomial,
}

impl RowSampler {
    pub fn new(n_cols: usize, density: f64, seed: u64) -> Result<Self> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "density must lie in (0, 1], got {density}"
            )));
        }
        let count = Binomial::new(n_cols as u64, density)
            .map_err(|e| Error::InvalidConfig(format!("density {density}: {e}")))?;
        Ok(Self {
            n_cols,
            seed,
            count,
        })
    }

    fn rng(&self, row: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(row as u64);
        rng
    }

    fn positions(&self, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let k = self.count.sample(rng) as usize;
        let mut cols: Vec<u32> = if k == self.n_cols {
            (0..self.n_cols as u32).collect()
        } else {
            index::sample(rng, self.n_cols, k)
                .into_iter()
                .map(|c| c as u32)
                .collect()
        };
        cols.sort_unstable();
        cols
    }

    /// Sorted column indices of `row`.
    pub fn row_cols(&self, row: usize) -> Vec<u32> {
        self.positions(&mut self.rng(row))
    }

    /// Sorted column indices and values of `row`.
    pub fn row(&self, row: usize) -> (Vec<u32>, Vec<f32>) {
        let mut rng = self.rng(row);
        let cols = self.positions(&mut rng);
        let vals = cols.iter().map(|_| unit_open_closed(&mut rng)).collect();
        (cols, vals)
    }
}

/// Uniform in (0, 1].
fn unit_open_closed(rng: &mut impl Rng) -> f32 {
    1.0 - rng.random::<f32>()
}

pub fn random_sparse(n: usize, density: f64, seed: u64) -> Result<CsrMatrix> {
    random_sparse_with(n, density, seed, Exec::default())
}

pub fn random_sparse_with(n: usize, density: f64, seed: u64, exec: Exec) -> Result<CsrMatrix> {
    let sampler = RowSampler::new(n, density, seed)?;
    let rows = exec.map_range(n, |r| {
        let (c, v) = sampler.row(r);
        c.into_iter().zip(v).collect::<Vec<_>>()
    });
    CsrMatrix::from_sorted_rows(n, rows)
}

/// SELLPACK pair counts of `random_sparse(n, density, seed)` without ever
/// holding the matrix in memory.
pub fn measure_random(
    n: usize,
    density: f64,
    seed: u64,
    max_y_chunk: usize,
    max_v_per_pe: usize,
    exec: Exec,
) -> Result<SellpackStats> {
    let sampler = RowSampler::new(n, density, seed)?;
    measure_rows(n, n, max_y_chunk, max_v_per_pe, exec, |r| sampler.row_cols(r))
}

/// Dense matrix with entries uniform in (0, 1].
pub fn random_dense(n_rows: usize, n_cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n_rows * n_cols)
        .map(|_| unit_open_closed(&mut rng))
        .collect();
    DenseMatrix::from_vec(n_rows, n_cols, data).expect("length matches shape")
}

/// Dense matrix with entries uniform in [-1, 1).
pub fn random_dense_signed(n_rows: usize, n_cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n_rows * n_cols)
        .map(|_| rng.random::<f32>() * 2.0 - 1.0)
        .collect();
    DenseMatrix::from_vec(n_rows, n_cols, data).expect("length matches shape")
}
