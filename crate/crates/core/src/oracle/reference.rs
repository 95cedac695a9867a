use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::formats::{CsrMatrix, DenseMatrix};

/// `Y = A H` with f32 accumulation in ascending column order per row.
pub fn spmm_ref(a: &CsrMatrix, h: &DenseMatrix) -> Result<DenseMatrix> {
    spmm_ref_with(a, h, Exec::default())
}

pub fn spmm_ref_with(a: &CsrMatrix, h: &DenseMatrix, exec: Exec) -> Result<DenseMatrix> {
    if a.n_cols() != h.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, H is {}x{}",
            a.n_rows(),
            a.n_cols(),
            h.n_rows(),
            h.n_cols()
        )));
    }
    let d = h.n_cols();
    let mut y = DenseMatrix::zeros(a.n_rows(), d);
    if d == 0 {
        return Ok(y);
    }
    exec.for_each_chunk_mut(y.data_mut(), d, |i, out| {
        let (cols, vals) = a.row(i);
        for (&k, &v) in cols.iter().zip(vals) {
            for (o, &x) in out.iter_mut().zip(h.row(k as usize)) {
                *o += v * x;
            }
        }
    });
    Ok(y)
}

/// `Y = A ⊙ (B C)` evaluated only at A's stored entries; the output shares
/// A's pattern.
pub fn sddmm_ref(a: &CsrMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<CsrMatrix> {
    let n = a.n_rows();
    if b.n_rows() != n || c.n_cols() != a.n_cols() || b.n_cols() != c.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}, C is {}x{}",
            a.n_rows(),
            a.n_cols(),
            b.n_rows(),
            b.n_cols(),
            c.n_rows(),
            c.n_cols()
        )));
    }
    let d = b.n_cols();
    let ct = c.transpose();
    let values = a
        .iter()
        .map(|(i, j, v)| {
            let mut acc = 0.0f32;
            for (&x, &y) in b.row(i).iter().zip(ct.row(j)).take(d) {
                acc += x * y;
            }
            v * acc
        })
        .collect();
    a.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{random_dense, random_sparse};

    #[test]
    fn identity_returns_h() {
        let h = random_dense(4, 3, 1);
        assert_eq!(spmm_ref(&CsrMatrix::identity(4), &h).unwrap(), h);
    }

    #[test]
    fn zero_a_gives_zero() {
        let h = random_dense(5, 2, 1);
        let y = spmm_ref(&CsrMatrix::zeros(5, 5), &h).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_checks() {
        let h = random_dense(4, 3, 1);
        assert!(spmm_ref(&CsrMatrix::identity(5), &h).is_err());
        let b = random_dense(4, 2, 1);
        let c = random_dense(3, 4, 1);
        assert!(sddmm_ref(&CsrMatrix::identity(4), &b, &c).is_err());
    }

    #[test]
    fn sddmm_unit_mask_samples_product() {
        let a = random_sparse(32, 0.2, 4).unwrap().with_uniform_values(1.0);
        let b = random_dense(32, 2, 5);
        let c = random_dense(2, 32, 6);
        let y = sddmm_ref(&a, &b, &c).unwrap();
        assert!(y.same_pattern(&a));
        for (i, j, v) in y.iter() {
            let want = b.get(i, 0) * c.get(0, j) + b.get(i, 1) * c.get(1, j);
            assert_eq!(v, want);
        }
    }

    #[test]
    fn sddmm_empty_pattern() {
        let y = sddmm_ref(
            &CsrMatrix::zeros(8, 8),
            &random_dense(8, 1, 1),
            &random_dense(1, 8, 2),
        )
        .unwrap();
        assert_eq!(y.nnz(), 0);
    }
}
