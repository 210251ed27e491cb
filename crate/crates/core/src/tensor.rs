//! Dense third-order tensors, mode-n algebra and tensor subspace learning.
//!
//! Storage is column-major with the first index fastest:
//! `t[i, j, k] = data[i + d1 * (j + d2 * k)]`. Mode-n unfoldings place the
//! mode-n fibers in columns, with the lower-numbered free index varying
//! fastest along the columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            data: vec![0.0; d1 * d2 * d3],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::Parameter(format!(
                "tensor of dims {dims:?} needs {} entries, got {}",
                dims.0 * dims.1 * dims.2,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tensor entries must be finite".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    /// A `d1 x d2 x 1` tensor holding one matrix slice.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            dims: (m.nrows(), m.ncols(), 1),
            data: m.as_slice().to_vec(),
        }
    }

    /// Stacks equally sized `d1 x d2` matrices along mode 3.
    pub fn stack(slices: &[Matrix]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Parameter("cannot stack zero slices".into()))?;
        let (d1, d2) = first.shape();
        let mut data = Vec::with_capacity(d1 * d2 * slices.len());
        for s in slices {
            if s.shape() != (d1, d2) {
                return Err(Error::Parameter(format!(
                    "slice shape {:?} differs from {:?}",
                    s.shape(),
                    (d1, d2)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self {
            dims: (d1, d2, slices.len()),
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[i + self.dims.0 * (j + self.dims.1 * k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[i + self.dims.0 * (j + self.dims.1 * k)] = v;
    }

    /// Frontal slice `k` as a `d1 x d2` matrix.
    pub fn slice(&self, k: usize) -> Matrix {
        let n = self.dims.0 * self.dims.1;
        Matrix::from_column_slice(self.dims.0, self.dims.1, &self.data[k * n..(k + 1) * n])
    }

    pub fn concat_mode3(&self, other: &Tensor3) -> Result<Tensor3> {
        if (self.dims.0, self.dims.1) != (other.dims.0, other.dims.1) {
            return Err(Error::Parameter(format!(
                "cannot concatenate {:?} and {:?} along mode 3",
                self.dims, other.dims
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Tensor3 {
            dims: (self.dims.0, self.dims.1, self.dims.2 + other.dims.2),
            data,
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Average of the frontal slices, as a `d1 x d2 x 1` tensor.
    pub fn mode3_mean(&self) -> Tensor3 {
        let n = self.dims.0 * self.dims.1;
        let mut mean = vec![0.0; n];
        for k in 0..self.dims.2 {
            for (m, v) in mean.iter_mut().zip(&self.data[k * n..(k + 1) * n]) {
                *m += v;
            }
        }
        let inv = 1.0 / self.dims.2 as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        Tensor3 {
            dims: (self.dims.0, self.dims.1, 1),
            data: mean,
        }
    }

    /// Subtracts a `d1 x d2 x 1` tensor from every frontal slice.
    pub fn sub_slice(&self, mean: &Tensor3) -> Result<Tensor3> {
        if mean.dims != (self.dims.0, self.dims.1, 1) {
            return Err(Error::Parameter(format!(
                "mean dims {:?} incompatible with {:?}",
                mean.dims, self.dims
            )));
        }
        let n = self.dims.0 * self.dims.1;
        let data = self
            .data
            .chunks(n)
            .flat_map(|s| s.iter().zip(&mean.data).map(|(a, b)| a - b))
            .collect();
        Ok(Tensor3 {
            dims: self.dims,
            data,
        })
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if !(1..=3).contains(&mode) {
        return Err(Error::Parameter(format!("tensor mode must be 1, 2 or 3, got {mode}")));
    }
    Ok(())
}

fn mode_extent(dims: (usize, usize, usize), mode: usize) -> usize {
    match mode {
        1 => dims.0,
        2 => dims.1,
        _ => dims.2,
    }
}

pub fn unfold(t: &Tensor3, mode: usize) -> Result<Matrix> {
    check_mode(mode)?;
    let (d1, d2, d3) = t.dims;
    Ok(match mode {
        1 => Matrix::from_column_slice(d1, d2 * d3, &t.data),
        2 => Matrix::from_fn(d2, d1 * d3, |j, c| t.get(c % d1, j, c / d1)),
        _ => Matrix::from_row_slice(d3, d1 * d2, &t.data),
    })
}

/// Inverse of [`unfold`] for a tensor of the given dims.
pub fn fold(m: &Matrix, mode: usize, dims: (usize, usize, usize)) -> Result<Tensor3> {
    check_mode(mode)?;
    let (d1, d2, d3) = dims;
    let expected = match mode {
        1 => (d1, d2 * d3),
        2 => (d2, d1 * d3),
        _ => (d3, d1 * d2),
    };
    if m.shape() != expected {
        return Err(Error::Parameter(format!(
            "matrix {:?} cannot fold to {dims:?} along mode {mode}",
            m.shape()
        )));
    }
    Ok(match mode {
        1 => Tensor3 {
            dims,
            data: m.as_slice().to_vec(),
        },
        2 => Tensor3::from_fn(dims, |i, j, k| m[(j, i + d1 * k)]),
        _ => Tensor3::from_fn(dims, |i, j, k| m[(k, i + d1 * j)]),
    })
}

/// `t x_mode m`: replaces every mode-`mode` fiber `f` by `m f`.
pub fn mode_product(t: &Tensor3, m: &Matrix, mode: usize) -> Result<Tensor3> {
    check_mode(mode)?;
    let extent = mode_extent(t.dims, mode);
    if m.ncols() != extent {
        return Err(Error::Parameter(format!(
            "mode-{mode} product needs {extent} columns, matrix has {}",
            m.ncols()
        )));
    }
    let mut dims = t.dims;
    match mode {
        1 => dims.0 = m.nrows(),
        2 => dims.1 = m.nrows(),
        _ => dims.2 = m.nrows(),
    }
    fold(&(m * unfold(t, mode)?), mode, dims)
}

/// Mean tensor plus per-mode orthonormal bases of the centered data.
///
/// `u1`/`u2` are left singular vectors of the mode-1/mode-2 unfoldings and
/// `v3` right singular vectors of the mode-3 unfolding (one row per sample),
/// i.e. a basis for the vectorized slices.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceModel {
    pub mean: Tensor3,
    pub u1: Matrix,
    pub u2: Matrix,
    pub v3: Matrix,
    pub sv1: DVector<f64>,
    pub sv2: DVector<f64>,
    pub sv3: DVector<f64>,
    pub n_obs: usize,
    /// Effective (forgetting-discounted) sample mass behind `mean`.
    pub weight: f64,
    pub ranks: (usize, usize, usize),
}

impl SubspaceModel {
    /// A model with a known mean and no learned directions yet. The first
    /// incremental update replaces the mean entirely.
    pub fn prior(mean: Tensor3, ranks: (usize, usize, usize)) -> Result<Self> {
        let (d1, d2, d3) = mean.dims;
        if d3 != 1 {
            return Err(Error::Parameter("prior mean must have a single slice".into()));
        }
        check_ranks((d1, d2, usize::MAX), ranks, d1 * d2)?;
        Ok(Self {
            mean,
            u1: Matrix::zeros(d1, 0),
            u2: Matrix::zeros(d2, 0),
            v3: Matrix::zeros(d1 * d2, 0),
            sv1: DVector::zeros(0),
            sv2: DVector::zeros(0),
            sv3: DVector::zeros(0),
            n_obs: 0,
            weight: 0.0,
            ranks,
        })
    }

    pub fn slice_dims(&self) -> (usize, usize) {
        (self.mean.dims.0, self.mean.dims.1)
    }
}

fn check_ranks(dims: (usize, usize, usize), ranks: (usize, usize, usize), vec_len: usize) -> Result<()> {
    let (r1, r2, r3) = ranks;
    if r1 == 0 || r2 == 0 || r3 == 0 {
        return Err(Error::Parameter(format!("ranks must be positive, got {ranks:?}")));
    }
    if r1 > dims.0 || r2 > dims.1 || r3 > dims.2 || r3 > vec_len {
        return Err(Error::Parameter(format!(
            "ranks {ranks:?} exceed tensor dims {dims:?}"
        )));
    }
    Ok(())
}

/// Thin SVD of `m` with singular values sorted in decreasing order.
fn sorted_svd(m: Matrix) -> (Matrix, DVector<f64>, Matrix) {
    // nalgebra's default SVD tolerance can stop early on rank-deficient
    // inputs and return factors that do not recompose `m`; tighten it and
    // check the reconstruction.
    let scale = m.amax().max(1.0);
    let mut svd = None;
    for eps in [f64::EPSILON, 1e-14, 1e-12] {
        let Some(cand) = m.clone().try_svd(true, true, eps, 0) else {
            continue;
        };
        let err = cand.clone().recompose().map(|r| (r - &m).amax()).unwrap_or(f64::INFINITY);
        let ok = err <= 1e-10 * scale;
        svd = Some(cand);
        if ok {
            break;
        }
    }
    let svd = svd.unwrap_or_else(|| m.svd(true, true));
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let u = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = Matrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    let s = DVector::from_iterator(order.len(), order.iter().map(|&i| s[i]));
    (u, s, v)
}

/// Extends an orthonormal `basis` to `r` columns with coordinate directions.
fn complete_basis(basis: Matrix, r: usize) -> Matrix {
    let m = basis.nrows();
    let mut cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < r && e < m {
        let mut v = DVector::zeros(m);
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for c in &cols {
                let p = c.dot(&v);
                v.axpy(-p, c, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            cols.push(v / n);
        }
    }
    Matrix::from_columns(&cols)
}

/// Top-`r` left singular vectors, padded with orthonormal completions (and
/// zero singular values) when `m` has fewer than `r` of them.
fn top_left(m: Matrix, r: usize) -> (Matrix, DVector<f64>) {
    let rows = m.nrows();
    let (u, s, _) = sorted_svd(m);
    let keep = r.min(u.ncols());
    let u = complete_basis(u.columns(0, keep).into_owned(), r.min(rows));
    let mut sv = DVector::zeros(u.ncols());
    sv.rows_mut(0, keep).copy_from(&s.rows(0, keep));
    (u, sv)
}

/// Truncated HOSVD of the mode-3-centered tensor.
pub fn hosvd(t: &Tensor3, ranks: (usize, usize, usize)) -> Result<SubspaceModel> {
    let (d1, d2, d3) = t.dims;
    check_ranks(t.dims, ranks, d1 * d2)?;
    let mean = t.mode3_mean();
    let centered = t.sub_slice(&mean)?;
    let (u1, sv1) = top_left(unfold(&centered, 1)?, ranks.0);
    let (u2, sv2) = top_left(unfold(&centered, 2)?, ranks.1);
    // right singular vectors of the mode-3 unfolding = left ones of its transpose
    let (v3, sv3) = top_left(unfold(&centered, 3)?.transpose(), ranks.2);
    Ok(SubspaceModel {
        mean,
        u1,
        u2,
        v3,
        sv1,
        sv2,
        sv3,
        n_obs: d3,
        weight: d3 as f64,
        ranks,
    })
}

/// Sequential Karhunen-Loeve step for one mode: augment the scaled retained
/// basis with new columns, re-orthogonalize by QR and take the SVD of the
/// small triangular core.
fn skl_step(
    basis: &Matrix,
    sv: &DVector<f64>,
    new_cols: &Matrix,
    forgetting: f64,
    rank: usize,
) -> (Matrix, DVector<f64>) {
    let m = basis.nrows();
    let r0 = basis.ncols();
    let q = r0 + new_cols.ncols();
    if q == 0 {
        return (basis.clone(), sv.clone());
    }
    let mut aug = Matrix::zeros(m, q);
    for c in 0..r0 {
        aug.column_mut(c).copy_from(&(basis.column(c) * (forgetting * sv[c])));
    }
    aug.columns_mut(r0, new_cols.ncols()).copy_from(new_cols);
    let qr = aug.qr();
    let (q_mat, r_mat) = (qr.q(), qr.r());
    let (ur, s, _) = sorted_svd(r_mat);
    let keep = rank.min(s.len());
    let u = &q_mat * ur.columns(0, keep);
    (u, s.rows(0, keep).into_owned())
}

/// Absorbs a batch of slices into the model with forgetting factor `forgetting`.
pub fn incremental_update(model: &SubspaceModel, batch: &Tensor3, forgetting: f64) -> Result<SubspaceModel> {
    let (d1, d2) = model.slice_dims();
    let (b1, b2, m) = batch.dims;
    if (b1, b2) != (d1, d2) || m == 0 {
        return Err(Error::Parameter(format!(
            "batch dims {:?} incompatible with model slices {d1}x{d2}",
            batch.dims
        )));
    }
    if !(forgetting > 0.0 && forgetting <= 1.0) {
        return Err(Error::Parameter(format!(
            "forgetting factor must lie in (0, 1], got {forgetting}"
        )));
    }
    let n = forgetting * model.weight;
    let mf = m as f64;
    let batch_mean = batch.mode3_mean();
    let centered = batch.sub_slice(&batch_mean)?;

    let mean_data: Vec<f64> = model
        .mean
        .data
        .iter()
        .zip(&batch_mean.data)
        .map(|(a, b)| if n > 0.0 { (n * a + mf * b) / (n + mf) } else { *b })
        .collect();
    let mean = Tensor3 {
        dims: (d1, d2, 1),
        data: mean_data,
    };

    // mean-shift correction; vanishes for an empty prior
    let corr_w = (n * mf / (n + mf)).sqrt();
    let correction = (corr_w > 0.0).then(|| {
        Matrix::from_iterator(
            d1,
            d2,
            model
                .mean
                .data
                .iter()
                .zip(&batch_mean.data)
                .map(|(a, b)| corr_w * (a - b)),
        )
    });

    let with_correction = |cols: Matrix, extra: Option<Matrix>| match extra {
        Some(e) => {
            let mut out = Matrix::zeros(cols.nrows(), cols.ncols() + e.ncols());
            out.columns_mut(0, cols.ncols()).copy_from(&cols);
            out.columns_mut(cols.ncols(), e.ncols()).copy_from(&e);
            out
        }
        None => cols,
    };

    let cols1 = with_correction(unfold(&centered, 1)?, correction.clone());
    let cols2 = with_correction(unfold(&centered, 2)?, correction.as_ref().map(|c| c.transpose()));
    let cols3 = with_correction(
        unfold(&centered, 3)?.transpose(),
        correction.map(|c| Matrix::from_column_slice(d1 * d2, 1, c.as_slice())),
    );

    let (u1, sv1) = skl_step(&model.u1, &model.sv1, &cols1, forgetting, model.ranks.0);
    let (u2, sv2) = skl_step(&model.u2, &model.sv2, &cols2, forgetting, model.ranks.1);
    let (v3, sv3) = skl_step(&model.v3, &model.sv3, &cols3, forgetting, model.ranks.2);

    Ok(SubspaceModel {
        mean,
        u1,
        u2,
        v3,
        sv1,
        sv2,
        sv3,
        n_obs: model.n_obs + m,
        weight: n + mf,
        ranks: model.ranks,
    })
}
