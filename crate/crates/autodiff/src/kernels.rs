//! Dense numeric kernels shared by the tape and by plain (untaped)
//! forward evaluation. Keeping a single implementation guarantees that a
//! network evaluated outside a tape produces bit-identical values.

/// `c = a · b` for row-major `a: n×k`, `b: k×m`.
pub fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    matmul_acc(a, b, &mut c, n, k, m);
    c
}

/// `c += a · b` for row-major `a: n×k`, `b: k×m`, `c: n×m`.
pub fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], n: usize, k: usize, m: usize) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(c.len(), n * m);
    if n == 0 || m == 0 || k == 0 {
        return;
    }
    // SAFETY: the slices cover exactly the strided extents passed to dgemm.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            m as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// `da += dc · bᵀ` for `dc: n×m`, `b: k×m`, `da: n×k`.
pub fn matmul_grad_lhs(dc: &[f64], b: &[f64], da: &mut [f64], n: usize, k: usize, m: usize) {
    if n == 0 || m == 0 || k == 0 {
        return;
    }
    // SAFETY: bᵀ is addressed with row stride 1 and column stride m.
    unsafe {
        matrixmultiply::dgemm(
            n,
            m,
            k,
            1.0,
            dc.as_ptr(),
            m as isize,
            1,
            b.as_ptr(),
            1,
            m as isize,
            1.0,
            da.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}

/// `db += aᵀ · dc` for `a: n×k`, `dc: n×m`.
pub fn matmul_grad_rhs(a: &[f64], dc: &[f64], db: &mut [f64], n: usize, k: usize, m: usize) {
    if n == 0 || m == 0 || k == 0 {
        return;
    }
    // SAFETY: aᵀ is addressed with row stride 1 and column stride k.
    unsafe {
        matrixmultiply::dgemm(
            k,
            n,
            m,
            1.0,
            a.as_ptr(),
            1,
            k as isize,
            dc.as_ptr(),
            m as isize,
            1,
            1.0,
            db.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// Adds a length-`cols` row vector to every row of `x` in place.
pub fn add_row(x: &mut [f64], row: &[f64]) {
    let cols = row.len();
    for chunk in x.chunks_exact_mut(cols) {
        for (v, b) in chunk.iter_mut().zip(row) {
            *v += b;
        }
    }
}

/// Weighted grouped gather.
///
/// For output row `i` and group `g`, the `F` output columns
/// `g*F .. (g+1)*F` hold `Σ_k w[(i*G+g)*K+k] · table[index[(i*G+g)*K+k]]`
/// where `F` is the table width.
pub fn gather(
    table: &[f64],
    width: usize,
    index: &[u32],
    weights: &[f64],
    groups: usize,
    per_group: usize,
) -> Vec<f64> {
    let stride = groups * per_group;
    let rows = index.len() / stride;
    let mut out = vec![0.0; rows * groups * width];
    for (slot, (idx_group, w_group)) in index
        .chunks_exact(per_group)
        .zip(weights.chunks_exact(per_group))
        .enumerate()
    {
        let dst = &mut out[slot * width..(slot + 1) * width];
        for (&idx, &w) in idx_group.iter().zip(w_group) {
            let src = &table[idx as usize * width..(idx as usize + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Adjoint of [`gather`] with respect to the table. Lookups hitting the
/// same row accumulate.
pub fn gather_grad(
    d_out: &[f64],
    width: usize,
    index: &[u32],
    weights: &[f64],
    per_group: usize,
    d_table: &mut [f64],
) {
    for (slot, (idx_group, w_group)) in index
        .chunks_exact(per_group)
        .zip(weights.chunks_exact(per_group))
        .enumerate()
    {
        let src = &d_out[slot * width..(slot + 1) * width];
        for (&idx, &w) in idx_group.iter().zip(w_group) {
            let dst = &mut d_table[idx as usize * width..(idx as usize + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Concatenates two row-major matrices with equal row counts along columns.
pub fn concat_cols(a: &[f64], ca: usize, b: &[f64], cb: usize, rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * (ca + cb));
    for r in 0..rows {
        out.extend_from_slice(&a[r * ca..(r + 1) * ca]);
        out.extend_from_slice(&b[r * cb..(r + 1) * cb]);
    }
    out
}
