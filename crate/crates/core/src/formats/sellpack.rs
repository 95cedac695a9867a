//! Chunked per-worker-row streaming encoding of a sparse matrix.
//!
//! Rows of A are grouped into chunks of `max_y_chunk`. Inside a chunk there is
//! one stream per column window of width `max_v_per_pe`; stream `i` carries, in
//! row order, the `(column, value)` pairs whose column falls in window `i`.
//! After each source row a termination is due; consecutive terminations are
//! coalesced into one `(END_ROW, run_length)` pair. All streams of a chunk are
//! right-padded with `(NULL, NULL)` to the chunk's longest stream.

use serde::{Deserialize, Serialize};

use super::{CsrMatrix, KernelConfig, END_ROW, NULL_WORD};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// One streamed `(index, value)` pair, both raw 32-bit words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub index: u32,
    pub value: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairKind {
    Nonzero { col: u32, value: f32 },
    EndRow { run: u32 },
    Null,
}

impl Pair {
    pub const NULL: Pair = Pair {
        index: NULL_WORD,
        value: NULL_WORD,
    };

    pub fn nonzero(col: u32, value: f32) -> Self {
        Pair {
            index: col,
            value: value.to_bits(),
        }
    }

    pub fn end_row(run: u32) -> Self {
        Pair {
            index: END_ROW,
            value: run,
        }
    }

    pub fn kind(self) -> PairKind {
        match self.index {
            NULL_WORD => PairKind::Null,
            END_ROW => PairKind::EndRow { run: self.value },
            col => PairKind::Nonzero {
                col,
                value: f32::from_bits(self.value),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellpackChunk {
    /// Source rows covered by this chunk.
    pub rows: usize,
    /// Common padded pair length of every stream in the chunk.
    pub stream_len: usize,
    /// `streams * stream_len` pairs, stream-major.
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellpackImage {
    pub n_rows: usize,
    pub n_cols: usize,
    pub max_y_chunk: usize,
    pub max_v_per_pe: usize,
    /// Streams per chunk (= column windows).
    pub streams: usize,
    pub chunks: Vec<SellpackChunk>,
}

impl SellpackImage {
    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn stream(&self, chunk: usize, stream: usize) -> &[Pair] {
        let c = &self.chunks[chunk];
        &c.pairs[stream * c.stream_len..(stream + 1) * c.stream_len]
    }

    pub fn stream_len(&self, chunk: usize) -> usize {
        self.chunks[chunk].stream_len
    }

    pub fn stats(&self) -> SellpackStats {
        sellpack_stream_stats(self)
    }
}

/// Pair counts of an encoded (or counted) image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SellpackStats {
    pub total_pairs: u64,
    pub nnz_pairs: u64,
    pub endrow_pairs: u64,
    pub null_pairs: u64,
}

impl SellpackStats {
    /// Streamed bytes: two 32-bit words per pair.
    pub fn bytes(&self) -> u64 {
        self.total_pairs * 8
    }

    /// Total pairs per stored nonzero; infinite for an empty matrix.
    pub fn ratio(&self) -> f64 {
        self.total_pairs as f64 / self.nnz_pairs as f64
    }

    fn merge(self, o: SellpackStats) -> SellpackStats {
        SellpackStats {
            total_pairs: self.total_pairs + o.total_pairs,
            nnz_pairs: self.nnz_pairs + o.nnz_pairs,
            endrow_pairs: self.endrow_pairs + o.endrow_pairs,
            null_pairs: self.null_pairs + o.null_pairs,
        }
    }
}

fn check_geometry(n_rows: usize, cfg: &KernelConfig) -> Result<()> {
    cfg.validate_chunking()?;
    if n_rows != cfg.n {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {n_rows} rows, config n = {}",
            cfg.n
        )));
    }
    Ok(())
}

pub fn sellpack_encode(a: &CsrMatrix, cfg: &KernelConfig) -> Result<SellpackImage> {
    sellpack_encode_with(a, cfg, Exec::default())
}

pub fn sellpack_encode_with(a: &CsrMatrix, cfg: &KernelConfig, exec: Exec) -> Result<SellpackImage> {
    check_geometry(a.n_rows(), cfg)?;
    let myc = cfg.max_y_chunk;
    let mvpp = cfg.max_v_per_pe;
    let streams = a.n_cols().div_ceil(mvpp);
    let chunk_count = a.n_rows().div_ceil(myc);
    let chunks = exec.map_range(chunk_count, |k| {
        let start = k * myc;
        let rows = myc.min(a.n_rows() - start);
        encode_chunk(a, start, rows, mvpp, streams)
    });
    Ok(SellpackImage {
        n_rows: a.n_rows(),
        n_cols: a.n_cols(),
        max_y_chunk: myc,
        max_v_per_pe: mvpp,
        streams,
        chunks,
    })
}

fn encode_chunk(
    a: &CsrMatrix,
    start: usize,
    rows: usize,
    mvpp: usize,
    streams: usize,
) -> SellpackChunk {
    let mut out: Vec<Vec<Pair>> = vec![Vec::new(); streams];
    // Rows of this chunk whose termination has already been emitted, per stream.
    let mut terminated = vec![0u32; streams];
    for r in 0..rows {
        let (cols, vals) = a.row(start + r);
        for (&c, &v) in cols.iter().zip(vals) {
            let s = c as usize / mvpp;
            let r = r as u32;
            if terminated[s] < r {
                out[s].push(Pair::end_row(r - terminated[s]));
                terminated[s] = r;
            }
            out[s].push(Pair::nonzero(c, v));
        }
    }
    for (s, stream) in out.iter_mut().enumerate() {
        stream.push(Pair::end_row(rows as u32 - terminated[s]));
    }
    let stream_len = out.iter().map(Vec::len).max().unwrap_or(0);
    let mut pairs = Vec::with_capacity(stream_len * streams);
    for stream in out {
        let pad = stream_len - stream.len();
        pairs.extend(stream);
        pairs.extend(std::iter::repeat_n(Pair::NULL, pad));
    }
    SellpackChunk {
        rows,
        stream_len,
        pairs,
    }
}

/// Inverse of [`sellpack_encode`]; rejects streams whose terminations do not
/// add up to the chunk's row count.
pub fn sellpack_decode(img: &SellpackImage, cfg: &KernelConfig) -> Result<CsrMatrix> {
    if img.n_rows == 0 && img.chunks.is_empty() {
        return Ok(CsrMatrix::zeros(0, img.n_cols));
    }
    check_geometry(img.n_rows, cfg)?;
    if img.max_y_chunk != cfg.max_y_chunk || img.max_v_per_pe != cfg.max_v_per_pe {
        return Err(Error::Corruption(format!(
            "image built with myc={} mvpp={}, config has myc={} mvpp={}",
            img.max_y_chunk, img.max_v_per_pe, cfg.max_y_chunk, cfg.max_v_per_pe
        )));
    }
    if img.chunks.len() != img.n_rows.div_ceil(img.max_y_chunk) {
        return Err(Error::Corruption(format!(
            "{} chunks for {} rows",
            img.chunks.len(),
            img.n_rows
        )));
    }
    let mut rows: Vec<Vec<(u32, f32)>> = vec![Vec::new(); img.n_rows];
    let mut base = 0usize;
    for (k, chunk) in img.chunks.iter().enumerate() {
        let expected_rows = img.max_y_chunk.min(img.n_rows - base);
        if chunk.rows != expected_rows {
            return Err(Error::Corruption(format!(
                "chunk {k} claims {} rows, expected {expected_rows}",
                chunk.rows
            )));
        }
        if chunk.pairs.len() != chunk.stream_len * img.streams {
            return Err(Error::Corruption(format!(
                "chunk {k} holds {} pairs, expected {} streams x {}",
                chunk.pairs.len(),
                img.streams,
                chunk.stream_len
            )));
        }
        for s in 0..img.streams {
            let lo = (s * img.max_v_per_pe) as u64;
            let hi = lo + img.max_v_per_pe as u64;
            let mut row = 0usize;
            let mut padding = false;
            for (p, pair) in img.stream(k, s).iter().enumerate() {
                match pair.kind() {
                    PairKind::Null => padding = true,
                    _ if padding => {
                        return Err(Error::Corruption(format!(
                            "chunk {k} stream {s}: data after NULL padding at pair {p}"
                        )))
                    }
                    PairKind::EndRow { run } => row += run as usize,
                    PairKind::Nonzero { col, value } => {
                        if (col as u64) < lo || (col as u64) >= hi {
                            return Err(Error::Corruption(format!(
                                "chunk {k} stream {s}: column {col} outside window [{lo}, {hi})"
                            )));
                        }
                        if row >= chunk.rows {
                            return Err(Error::Corruption(format!(
                                "chunk {k} stream {s}: nonzero after the last row"
                            )));
                        }
                        rows[base + row].push((col, value));
                    }
                }
            }
            if row != chunk.rows {
                return Err(Error::Corruption(format!(
                    "chunk {k} stream {s}: terminations sum to {row}, expected {}",
                    chunk.rows
                )));
            }
        }
        base += chunk.rows;
    }
    // Streams are visited in window order, so each row is already sorted.
    CsrMatrix::from_sorted_rows(img.n_cols, rows)
        .map_err(|e| Error::Corruption(format!("decoded rows are not valid CSR: {e}")))
}

pub fn sellpack_stream_stats(img: &SellpackImage) -> SellpackStats {
    let mut st = SellpackStats::default();
    for chunk in &img.chunks {
        st.total_pairs += chunk.pairs.len() as u64;
        for p in &chunk.pairs {
            match p.kind() {
                PairKind::Nonzero { .. } => st.nnz_pairs += 1,
                PairKind::EndRow { .. } => st.endrow_pairs += 1,
                PairKind::Null => st.null_pairs += 1,
            }
        }
    }
    st
}

/// Counts the pairs [`sellpack_encode`] would emit without building the
/// image. `row_cols(r)` yields the sorted column indices of row `r`.
pub fn measure_rows<F>(
    n_rows: usize,
    n_cols: usize,
    max_y_chunk: usize,
    max_v_per_pe: usize,
    exec: Exec,
    row_cols: F,
) -> Result<SellpackStats>
where
    F: Fn(usize) -> Vec<u32> + Sync + Send,
{
    if !max_y_chunk.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(max_y_chunk));
    }
    if max_v_per_pe == 0 {
        return Err(Error::InvalidConfig("max_v_per_pe must be positive".into()));
    }
    let streams = n_cols.div_ceil(max_v_per_pe);
    let chunk_count = n_rows.div_ceil(max_y_chunk);
    let per_chunk = exec.map_range(chunk_count, |k| {
        let start = k * max_y_chunk;
        let rows = max_y_chunk.min(n_rows - start);
        let mut nnz = vec![0u64; streams];
        // Distinct nonzero rows per stream, and whether local row 0 was one.
        let mut distinct = vec![0u64; streams];
        let mut last_row = vec![u32::MAX; streams];
        let mut row0 = vec![false; streams];
        for r in 0..rows {
            for c in row_cols(start + r) {
                let s = c as usize / max_v_per_pe;
                nnz[s] += 1;
                if last_row[s] != r as u32 {
                    last_row[s] = r as u32;
                    distinct[s] += 1;
                    if r == 0 {
                        row0[s] = true;
                    }
                }
            }
        }
        let mut st = SellpackStats::default();
        let mut stream_len = 0u64;
        for s in 0..streams {
            // An END_ROW precedes every nonzero row except local row 0, plus the final one.
            let ends = distinct[s] - row0[s] as u64 + 1;
            st.nnz_pairs += nnz[s];
            st.endrow_pairs += ends;
            stream_len = stream_len.max(nnz[s] + ends);
        }
        st.total_pairs = stream_len * streams as u64;
        st.null_pairs = st.total_pairs - st.nnz_pairs - st.endrow_pairs;
        st
    });
    Ok(per_chunk
        .into_iter()
        .fold(SellpackStats::default(), SellpackStats::merge))
}

/// Pair counts for `a` without materialising the image. Matrices wider than
/// `MAX_ROWS` columns are measured as the column panels the SpMM driver
/// would stream separately.
pub fn sellpack_measure(a: &CsrMatrix, cfg: &KernelConfig, exec: Exec) -> Result<SellpackStats> {
    check_geometry(a.n_rows(), cfg)?;
    measure_rows(
        a.n_rows(),
        a.n_cols(),
        cfg.max_y_chunk,
        cfg.max_v_per_pe,
        exec,
        |r| a.row(r).0.to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, myc: usize, mvpp: usize) -> KernelConfig {
        KernelConfig::spmm(n, 4, myc, mvpp)
    }

    #[test]
    fn all_zero_matrix_one_pair_per_stream() {
        let a = CsrMatrix::zeros(8, 8);
        let img = sellpack_encode(&a, &cfg(8, 4, 4)).unwrap();
        assert_eq!(img.chunk_count(), 2);
        assert_eq!(img.streams, 2);
        for k in 0..2 {
            assert_eq!(img.stream_len(k), 1);
            for s in 0..2 {
                assert_eq!(img.stream(k, s), &[Pair::end_row(4)]);
            }
        }
        let st = img.stats();
        assert_eq!(st.nnz_pairs, 0);
        assert_eq!(st.total_pairs, 4);
    }

    #[test]
    fn identity_streams_match_hand_encoding() {
        let a = CsrMatrix::identity(4);
        let img = sellpack_encode(&a, &cfg(4, 4, 2)).unwrap();
        let s0 = [
            Pair::nonzero(0, 1.0),
            Pair::end_row(1),
            Pair::nonzero(1, 1.0),
            Pair::end_row(3),
        ];
        let s1 = [
            Pair::end_row(2),
            Pair::nonzero(2, 1.0),
            Pair::end_row(1),
            Pair::nonzero(3, 1.0),
            Pair::end_row(1),
        ];
        assert_eq!(img.stream_len(0), 5);
        assert_eq!(&img.stream(0, 0)[..4], &s0);
        assert_eq!(img.stream(0, 0)[4], Pair::NULL);
        assert_eq!(img.stream(0, 1), &s1);
        assert_eq!(sellpack_decode(&img, &cfg(4, 4, 2)).unwrap(), a);
    }

    #[test]
    fn partial_last_chunk_terminates_residual_rows() {
        let a = CsrMatrix::zeros(10, 10);
        let img = sellpack_encode(&a, &cfg(10, 4, 8)).unwrap();
        assert_eq!(img.chunk_count(), 3);
        assert_eq!(img.chunks[2].rows, 2);
        assert_eq!(img.stream(2, 1), &[Pair::end_row(2)]);
        assert_eq!(sellpack_decode(&img, &cfg(10, 4, 8)).unwrap(), a);
    }

    #[test]
    fn empty_image_decodes_to_empty_csr() {
        let a = CsrMatrix::zeros(0, 0);
        let img = sellpack_encode(&a, &cfg(0, 4, 4)).unwrap();
        assert!(img.chunks.is_empty());
        let back = sellpack_decode(&img, &cfg(0, 4, 4)).unwrap();
        assert_eq!(back.n_rows(), 0);
        assert_eq!(back.nnz(), 0);
    }

    #[test]
    fn short_run_is_corruption() {
        let a = CsrMatrix::identity(4);
        let c = cfg(4, 4, 2);
        let mut img = sellpack_encode(&a, &c).unwrap();
        // Last END_ROW of stream 1 carries run 1; make the stream sum to myc - 1.
        let len = img.stream_len(0);
        img.chunks[0].pairs[2 * len - 1] = Pair::end_row(0);
        assert!(matches!(sellpack_decode(&img, &c), Err(Error::Corruption(_))));
    }

    #[test]
    fn data_after_padding_is_corruption() {
        let a = CsrMatrix::identity(4);
        let c = cfg(4, 4, 2);
        let mut img = sellpack_encode(&a, &c).unwrap();
        img.chunks[0].pairs.swap(3, 4);
        assert!(sellpack_decode(&img, &c).is_err());
    }

    #[test]
    fn rejects_non_power_of_two_chunk() {
        let a = CsrMatrix::identity(6);
        assert_eq!(
            sellpack_encode(&a, &cfg(6, 6, 2)).unwrap_err(),
            Error::NotPowerOfTwo(6)
        );
    }

    #[test]
    fn measure_matches_materialised_stats() {
        let a = CsrMatrix::from_triplets(
            9,
            9,
            &[(0, 0, 1.0), (0, 5, 1.0), (2, 1, 1.0), (2, 2, 1.0), (5, 8, 1.0), (8, 0, 1.0)],
        )
        .unwrap();
        for (myc, mvpp) in [(1, 1), (2, 3), (4, 4), (8, 2), (16, 9)] {
            let c = cfg(9, myc, mvpp);
            let img = sellpack_encode(&a, &c).unwrap();
            let counted = sellpack_measure(&a, &c, Exec::Sequential).unwrap();
            assert_eq!(img.stats(), counted, "myc={myc} mvpp={mvpp}");
        }
    }
}
