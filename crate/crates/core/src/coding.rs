//! Dictionary learning and sparse coding of superpixel features.
//!
//! The dictionary is a `B x z` matrix whose unit-norm columns (atoms) are
//! k-means centroids of first-frame feature vectors. Each feature vector is
//! encoded by solving `min_h |a - D h|^2 + lambda |h|_1` with cyclic
//! coordinate descent, and the codes of a candidate's superpixels form one
//! `z x s` slice of the pooling tensor.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cues::{features_for_pixels, flatten, FeatureVector};
use crate::error::{Error, Result};
use crate::media::{extract_template, ImageRgb, Patch};
use crate::motion::AffineState;
use crate::snic::{segment, LabelMap};
use crate::tensor::Matrix;

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    atoms: Matrix,
    gram: Matrix,
}

impl Dictionary {
    /// Wraps a `B x z` matrix whose columns already have unit norm.
    pub fn from_atoms(atoms: Matrix) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(Error::Parameter("dictionary needs at least one nonempty atom".into()));
        }
        for (j, c) in atoms.column_iter().enumerate() {
            if (c.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!("atom {j} has norm {}", c.norm())));
            }
        }
        let gram = atoms.transpose() * &atoms;
        Ok(Self { atoms, gram })
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// Number of atoms `z`.
    pub fn size(&self) -> usize {
        self.atoms.ncols()
    }

    /// Feature length `B`.
    pub fn feature_len(&self) -> usize {
        self.atoms.nrows()
    }

    /// Little-endian f64, one atom per row (`z x B`, row-major).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.atoms.len() * 8);
        for atom in self.atoms.column_iter() {
            for v in atom.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], feature_len: usize) -> Result<Self> {
        if feature_len == 0 || !bytes.len().is_multiple_of(8 * feature_len) {
            return Err(Error::InvalidInput(format!(
                "{} bytes do not hold whole atoms of length {feature_len}",
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let z = values.len() / feature_len;
        Self::from_atoms(Matrix::from_column_slice(feature_len, z, &values))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_binary(path: impl AsRef<Path>, feature_len: usize) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, feature_len)
    }

    /// Whitespace-separated text, one atom per line.
    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for atom in self.atoms.column_iter() {
            let line: Vec<String> = atom.iter().map(|v| format!("{v:?}")).collect();
            writeln!(f, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("{}:{}: {e}", path.display(), n + 1)))?;
            rows.push(row);
        }
        let b = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != b) {
            return Err(Error::InvalidInput(format!("{}: ragged dictionary rows", path.display())));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_atoms(Matrix::from_column_slice(b, flat.len() / b.max(1), &flat))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode(pub Vec<f64>);

/// `z x s` codes of one candidate, column `j` for superpixel slot `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeSlice(pub Matrix);

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations; centroids are normalized
/// into atoms.
pub fn learn_dictionary(samples: &[FeatureVector], z: usize, rng_seed: u64) -> Result<Dictionary> {
    if z == 0 {
        return Err(Error::Parameter("dictionary size must be positive".into()));
    }
    if samples.len() < z {
        return Err(Error::Parameter(format!(
            "need at least {z} samples to learn {z} atoms, got {}",
            samples.len()
        )));
    }
    let dim = samples[0].0.len();
    if dim == 0 || samples.iter().any(|s| s.0.len() != dim) {
        return Err(Error::Parameter("samples must share a nonzero length".into()));
    }
    if samples.iter().flat_map(|s| &s.0).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    let data: Vec<&[f64]> = samples.iter().map(|s| s.0.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(z);
    centers.push(data[rng.gen_range(0..data.len())].to_vec());
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < z {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("positive mass");
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.gen_range(0..data.len())
        };
        let c = data[idx].to_vec();
        for (d, x) in d2.iter_mut().zip(&data) {
            *d = d.min(sq_dist(x, &c));
        }
        centers.push(c);
    }

    let mut assign = vec![0usize; data.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let nearest: Vec<(usize, f64)> = data
            .par_iter()
            .map(|x| {
                let mut best = (0, f64::INFINITY);
                for (j, c) in centers.iter().enumerate() {
                    let d = sq_dist(x, c);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                best
            })
            .collect();
        for (a, n) in assign.iter_mut().zip(&nearest) {
            *a = n.0;
        }

        let mut sums = vec![vec![0.0; dim]; z];
        let mut counts = vec![0usize; z];
        for (x, &a) in data.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x.iter()) {
                *s += v;
            }
        }
        let mut taken = vec![false; data.len()];
        let mut movement: f64 = 0.0;
        for j in 0..z {
            let new = if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                sums[j].iter().map(|s| s * inv).collect::<Vec<_>>()
            } else {
                // reseed to the sample farthest from its current centroid
                let far = nearest
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("at least z samples");
                taken[far] = true;
                data[far].to_vec()
            };
            movement = movement.max(sq_dist(&new, &centers[j]).sqrt());
            centers[j] = new;
        }
        if movement < KMEANS_TOL {
            break;
        }
    }

    let mut atoms = Matrix::zeros(dim, z);
    for (j, c) in centers.iter().enumerate() {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidInput(format!("centroid {j} is the zero vector")));
        }
        for (i, v) in c.iter().enumerate() {
            atoms[(i, j)] = v / norm;
        }
    }
    Dictionary::from_atoms(atoms)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LassoOptions {
    pub max_sweeps: usize,
    /// Stop once the largest coordinate change in a sweep falls below this.
    pub tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 1000,
            tol: 1e-8,
        }
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on the Gram form of the LASSO, starting from
/// zero.
///
/// `gram = D^T D`, `dta = D^T a`. When `trace` is given, the objective after
/// every sweep is pushed onto it (`a_sq = |a|^2` is only used there).
pub fn lasso_gram(
    gram: &Matrix,
    dta: &[f64],
    a_sq: f64,
    lambda: f64,
    opts: LassoOptions,
    trace: Option<&mut Vec<f64>>,
) -> Vec<f64> {
    lasso_gram_from(gram, dta, a_sq, lambda, opts, vec![0.0; dta.len()], trace)
}

/// Coordinate descent from a given starting point.
pub fn lasso_gram_from(
    gram: &Matrix,
    dta: &[f64],
    a_sq: f64,
    lambda: f64,
    opts: LassoOptions,
    start: Vec<f64>,
    mut trace: Option<&mut Vec<f64>>,
) -> Vec<f64> {
    let z = dta.len();
    let g = gram.as_slice();
    let half = 0.5 * lambda;
    let mut h = start;
    let mut gh = vec![0.0; z];
    for (k, &hk) in h.iter().enumerate() {
        if hk != 0.0 {
            for (acc, col) in gh.iter_mut().zip(&g[k * z..(k + 1) * z]) {
                *acc += hk * col;
            }
        }
    }
    for _ in 0..opts.max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..z {
            let gjj = g[j * z + j];
            let new = if gjj > 0.0 {
                soft_threshold(dta[j] - gh[j] + gjj * h[j], half) / gjj
            } else {
                0.0
            };
            let delta = new - h[j];
            if delta != 0.0 {
                h[j] = new;
                for (acc, col) in gh.iter_mut().zip(&g[j * z..(j + 1) * z]) {
                    *acc += delta * col;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(gram_objective(gram, dta, a_sq, lambda, &h));
        }
        if max_delta < opts.tol {
            break;
        }
    }
    h
}

/// Lower Cholesky factor of `G[A, A]` that grows one row at a time.
struct ActiveCholesky {
    l: Vec<f64>,
    stride: usize,
    k: usize,
}

impl ActiveCholesky {
    fn new(capacity: usize) -> Self {
        Self {
            l: vec![0.0; capacity * capacity],
            stride: capacity,
            k: 0,
        }
    }

    /// Appends a coordinate given its Gram entries against the current
    /// active set (`b`) and itself (`c`); fails if the block loses
    /// positive definiteness.
    fn push(&mut self, b: &[f64], c: f64) -> bool {
        let (n, k) = (self.stride, self.k);
        let mut d2 = c;
        for i in 0..k {
            let row = &self.l[i * n..i * n + i];
            let y = (b[i] - row.iter().zip(&self.l[k * n..k * n + i]).map(|(a, b)| a * b).sum::<f64>())
                / self.l[i * n + i];
            self.l[k * n + i] = y;
            d2 -= y * y;
        }
        if d2.is_nan() || d2 <= 1e-12 * c.abs().max(1.0) {
            return false;
        }
        self.l[k * n + k] = d2.sqrt();
        self.k += 1;
        true
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, k) = (self.stride, self.k);
        let mut y = vec![0.0; k];
        for i in 0..k {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (rhs[i] - s) / self.l[i * n + i];
        }
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| self.l[j * n + i] * y[j]).sum();
            y[i] = (y[i] - s) / self.l[i * n + i];
        }
        y
    }

    /// Drops coordinate `r` and restores triangularity with Givens rotations.
    fn remove(&mut self, r: usize) {
        let (n, k) = (self.stride, self.k);
        for i in r..k - 1 {
            let (dst, src) = self.l.split_at_mut((i + 1) * n);
            dst[i * n..i * n + i + 2].copy_from_slice(&src[..i + 2]);
        }
        let k = k - 1;
        for c in r..k {
            let a = self.l[c * n + c];
            let b = self.l[c * n + c + 1];
            let rr = a.hypot(b);
            let (cs, sn) = (a / rr, b / rr);
            for i in c..k {
                let x = self.l[i * n + c];
                let y = self.l[i * n + c + 1];
                self.l[i * n + c] = cs * x + sn * y;
                self.l[i * n + c + 1] = -sn * x + cs * y;
            }
        }
        for i in 0..k {
            self.l[i * n + k] = 0.0;
        }
        self.k = k;
    }

    fn rebuild(gram: &Matrix, active: &[usize], capacity: usize) -> Option<Self> {
        let mut c = Self::new(capacity);
        let mut b = Vec::with_capacity(active.len());
        for (r, &j) in active.iter().enumerate() {
            b.clear();
            b.extend(active[..r].iter().map(|&k| gram[(k, j)]));
            if !c.push(&b, gram[(j, j)]) {
                return None;
            }
        }
        Some(c)
    }
}

/// Exact LASSO solution by following the regularization path from the
/// largest correlation down to `lambda` (the LARS variant that drops
/// coordinates crossing zero). Returns `None` if the active Gram block
/// becomes numerically singular.
pub fn lasso_homotopy(gram: &Matrix, dta: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let z = dta.len();
    let g = gram.as_slice();
    let target = 0.5 * lambda;
    let mut h = vec![0.0; z];
    let mut corr = dta.to_vec();
    let (first, mu0) = corr
        .iter()
        .enumerate()
        .map(|(j, c)| (j, c.abs()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut mu = mu0;
    if mu <= target {
        return Some(h);
    }
    let mut active = vec![first];
    let mut signs = vec![corr[first].signum()];
    let mut chol = ActiveCholesky::rebuild(gram, &active, z)?;
    let mut in_active = vec![false; z];
    in_active[first] = true;
    let mut last_dropped = None;
    let mut u = vec![0.0; z];
    let mut b = Vec::with_capacity(z);

    for _ in 0..8 * z.max(1) {
        let w = chol.solve(&signs);
        if !w.iter().all(|v| v.is_finite()) {
            return None;
        }
        // u = G[:, A] w, accumulated over contiguous columns (G is symmetric)
        u.iter_mut().for_each(|v| *v = 0.0);
        for (&k, wk) in active.iter().zip(&w) {
            for (acc, gk) in u.iter_mut().zip(&g[k * z..(k + 1) * z]) {
                *acc += wk * gk;
            }
        }

        let mut gamma = mu - target;
        let mut event = None;
        for j in (0..z).filter(|&j| !in_active[j] && Some(j) != last_dropped) {
            for (num, den) in [(mu - corr[j], 1.0 - u[j]), (mu + corr[j], 1.0 + u[j])] {
                if den > 1e-12 {
                    let g = num / den;
                    if g > 0.0 && g < gamma {
                        gamma = g;
                        event = Some((true, j));
                    }
                }
            }
        }
        for (r, &k) in active.iter().enumerate() {
            if w[r] != 0.0 {
                let g = -h[k] / w[r];
                if g > 0.0 && g < gamma {
                    gamma = g;
                    event = Some((false, r));
                }
            }
        }

        for (r, &k) in active.iter().enumerate() {
            h[k] += gamma * w[r];
        }
        for (c, uj) in corr.iter_mut().zip(&u) {
            *c -= gamma * uj;
        }
        mu -= gamma;

        match event {
            None => return Some(h),
            Some((true, j)) => {
                let col = &g[j * z..(j + 1) * z];
                b.clear();
                b.extend(active.iter().map(|&k| col[k]));
                if !chol.push(&b, col[j]) {
                    return None;
                }
                active.push(j);
                signs.push(corr[j].signum());
                in_active[j] = true;
                last_dropped = None;
            }
            Some((false, r)) => {
                let k = active[r];
                h[k] = 0.0;
                if active.len() == 1 {
                    return None;
                }
                active.remove(r);
                signs.remove(r);
                in_active[k] = false;
                last_dropped = Some(k);
                chol.remove(r);
            }
        }
    }
    None
}

fn gram_objective(gram: &Matrix, dta: &[f64], a_sq: f64, lambda: f64, h: &[f64]) -> f64 {
    let z = h.len();
    let mut quad = 0.0;
    for j in 0..z {
        let row: f64 = (0..z).map(|k| gram[(j, k)] * h[k]).sum();
        quad += h[j] * row;
    }
    let lin: f64 = dta.iter().zip(h).map(|(c, x)| c * x).sum();
    a_sq - 2.0 * lin + quad + lambda * h.iter().map(|x| x.abs()).sum::<f64>()
}

/// `|a - D h|^2 + lambda |h|_1`.
pub fn lasso_objective(d: &Matrix, a: &[f64], h: &[f64], lambda: f64) -> f64 {
    let r = nalgebra::DVector::from_column_slice(a) - d * nalgebra::DVector::from_column_slice(h);
    r.norm_squared() + lambda * h.iter().map(|x| x.abs()).sum::<f64>()
}

/// Largest violation of the LASSO subgradient optimality conditions.
pub fn lasso_kkt_residual(d: &Matrix, a: &[f64], h: &[f64], lambda: f64) -> f64 {
    let r = d * nalgebra::DVector::from_column_slice(h) - nalgebra::DVector::from_column_slice(a);
    let grad = 2.0 * d.transpose() * r;
    grad.iter()
        .zip(h)
        .map(|(&g, &x)| {
            if x > 0.0 {
                (g + lambda).abs()
            } else if x < 0.0 {
                (g - lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// LASSO for an arbitrary design matrix `d` (`B x z`).
pub fn lasso(d: &Matrix, a: &[f64], lambda: f64, opts: LassoOptions) -> Result<Vec<f64>> {
    if d.nrows() != a.len() {
        return Err(Error::Parameter(format!(
            "design has {} rows, target has {}",
            d.nrows(),
            a.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    if a.iter().chain(d.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite LASSO input".into()));
    }
    let gram = d.transpose() * d;
    let dta: Vec<f64> = (d.transpose() * nalgebra::DVector::from_column_slice(a)).iter().copied().collect();
    Ok(solve_gram(&gram, &dta, lambda, opts))
}

/// Path solution refined by coordinate descent until no coordinate moves
/// by more than `opts.tol`; plain descent from zero if the path breaks down.
fn solve_gram(gram: &Matrix, dta: &[f64], lambda: f64, opts: LassoOptions) -> Vec<f64> {
    let start = lasso_homotopy(gram, dta, lambda).unwrap_or_else(|| vec![0.0; dta.len()]);
    lasso_gram_from(gram, dta, 0.0, lambda, opts, start, None)
}

pub fn sparse_encode(a: &FeatureVector, dict: &Dictionary, lambda: f64) -> Result<SparseCode> {
    sparse_encode_with(a, dict, lambda, LassoOptions::default())
}

pub fn sparse_encode_with(a: &FeatureVector, dict: &Dictionary, lambda: f64, opts: LassoOptions) -> Result<SparseCode> {
    if a.0.len() != dict.feature_len() {
        return Err(Error::Parameter(format!(
            "feature length {} does not match dictionary atoms of length {}",
            a.0.len(),
            dict.feature_len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    if a.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature vector has non-finite entries".into()));
    }
    let dta: Vec<f64> = dict
        .atoms
        .column_iter()
        .map(|c| c.iter().zip(&a.0).map(|(x, y)| x * y).sum())
        .collect();
    Ok(SparseCode(solve_gram(&dict.gram, &dta, lambda, opts)))
}

/// Encodes every superpixel of a segmented patch into a `z x s` slice.
pub fn pool_candidate(
    patch: &Patch,
    labels: &LabelMap,
    dict: &Dictionary,
    lambda: f64,
    n_bins: usize,
) -> Result<CodeSlice> {
    let z = dict.size();
    let mut out = Matrix::zeros(z, labels.k);
    for (slot, pixels) in labels.regions().iter().enumerate() {
        let fm = features_for_pixels(patch, pixels, n_bins).map_err(|e| match e {
            Error::DegenerateRegion(_) => Error::DegenerateRegion(slot),
            e => e,
        })?;
        let code = sparse_encode(&flatten(&fm), dict, lambda)?;
        out.column_mut(slot).copy_from_slice(&code.0);
    }
    Ok(CodeSlice(out))
}

/// Everything needed to turn a frame and a state into a code slice.
#[derive(Clone, Debug)]
pub struct PoolingContext {
    pub template: (usize, usize),
    pub superpixels: usize,
    pub compactness: f64,
    pub n_bins: usize,
    pub lambda: f64,
    pub dictionary: Arc<Dictionary>,
}

impl PoolingContext {
    pub fn segment_at(&self, frame: &ImageRgb, state: &AffineState) -> Result<(Patch, LabelMap)> {
        let patch = extract_template(frame, state, self.template.0, self.template.1)?;
        let labels = segment(&patch, self.superpixels, self.compactness)?;
        Ok((patch, labels))
    }

    pub fn pool_state(&self, frame: &ImageRgb, state: &AffineState) -> Result<CodeSlice> {
        let (patch, labels) = self.segment_at(frame, state)?;
        pool_candidate(&patch, &labels, &self.dictionary, self.lambda, self.n_bins)
    }
}

/// Flattened features of every superpixel of the template at `state`.
pub fn template_features(
    frame: &ImageRgb,
    state: &AffineState,
    template: (usize, usize),
    superpixels: usize,
    compactness: f64,
    n_bins: usize,
) -> Result<Vec<FeatureVector>> {
    let patch = extract_template(frame, state, template.0, template.1)?;
    let labels = segment(&patch, superpixels, compactness)?;
    labels
        .regions()
        .iter()
        .map(|pix| features_for_pixels(&patch, pix, n_bins).map(|fm| flatten(&fm)))
        .collect()
}
