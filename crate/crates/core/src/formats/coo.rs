use serde::{Deserialize, Serialize};

use super::{CsrMatrix, KernelConfig, NULL_WORD};
use crate::error::{Error, Result};

/// Nonzeros of one `local_height x local_width` tile of A, local-indexed and
/// padded with NULL entries up to `max_nonzeros`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooTile {
    pub row_idx: Vec<u32>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f32>,
    /// Real (non-NULL) entries; they occupy the first `len` slots.
    pub len: usize,
}

impl CooTile {
    pub fn capacity(&self) -> usize {
        self.row_idx.len()
    }

    pub fn is_null_slot(&self, k: usize) -> bool {
        self.row_idx[k] == NULL_WORD
    }

    /// Real entries as `(local_row, local_col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f32)> + '_ {
        (0..self.len).map(|k| (self.row_idx[k], self.col_idx[k], self.values[k]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooTileSet {
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub local_height: usize,
    pub local_width: usize,
    pub max_nonzeros: usize,
    /// Row-major over the tile grid.
    pub tiles: Vec<CooTile>,
}

impl CooTileSet {
    pub fn tile(&self, r: usize, c: usize) -> &CooTile {
        &self.tiles[r * self.tile_cols + c]
    }

    pub fn nnz(&self) -> usize {
        self.tiles.iter().map(|t| t.len).sum()
    }

    /// All real entries mapped back to global `(row, col, value)`.
    pub fn global_entries(&self) -> Vec<(usize, usize, f32)> {
        let mut out = Vec::with_capacity(self.nnz());
        for tr in 0..self.tile_rows {
            for tc in 0..self.tile_cols {
                for (i, j, v) in self.tile(tr, tc).entries() {
                    out.push((
                        tr * self.local_height + i as usize,
                        tc * self.local_width + j as usize,
                        v,
                    ));
                }
            }
        }
        out
    }
}

/// Splits A into the SDDMM worker tiles.
pub fn coo_tiles(a: &CsrMatrix, cfg: &KernelConfig) -> Result<CooTileSet> {
    cfg.validate_sddmm()?;
    if a.n_rows() != cfg.n || a.n_cols() != cfg.n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, config n = {}",
            a.n_rows(),
            a.n_cols(),
            cfg.n
        )));
    }
    let (lh, lw, mnz) = (cfg.local_height, cfg.local_width, cfg.max_nonzeros);
    let tile_rows = cfg.n / lh;
    let tile_cols = cfg.n / lw;

    let mut counts = vec![0usize; tile_rows * tile_cols];
    for (i, j, _) in a.iter() {
        counts[(i / lh) * tile_cols + j / lw] += 1;
    }
    if let Some((t, &nnz)) = counts.iter().enumerate().find(|(_, &c)| c > mnz) {
        return Err(Error::TileOverflow {
            tile_row: t / tile_cols,
            tile_col: t % tile_cols,
            nnz,
            capacity: mnz,
        });
    }

    let null_value = f32::from_bits(NULL_WORD);
    let mut tiles: Vec<CooTile> = counts
        .iter()
        .map(|_| CooTile {
            row_idx: Vec::with_capacity(mnz),
            col_idx: Vec::with_capacity(mnz),
            values: Vec::with_capacity(mnz),
            len: 0,
        })
        .collect();
    for (i, j, v) in a.iter() {
        let t = &mut tiles[(i / lh) * tile_cols + j / lw];
        t.row_idx.push((i % lh) as u32);
        t.col_idx.push((j % lw) as u32);
        t.values.push(v);
        t.len += 1;
    }
    for t in &mut tiles {
        t.row_idx.resize(mnz, NULL_WORD);
        t.col_idx.resize(mnz, NULL_WORD);
        t.values.resize(mnz, null_value);
    }
    Ok(CooTileSet {
        tile_rows,
        tile_cols,
        local_height: lh,
        local_width: lw,
        max_nonzeros: mnz,
        tiles,
    })
}
