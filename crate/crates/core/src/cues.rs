//! Per-superpixel multi-cue histograms.
//!
//! Each superpixel is described by eight normalized histograms, one per cue
//! in the order H, S, I, R, G, B, x, y. Spatial cues are pixel coordinates
//! normalized by the patch extent so candidates at different frame
//! positions stay comparable.

use crate::error::{Error, Result};
use crate::media::Patch;
use crate::snic::LabelMap;

pub const NUM_CUES: usize = 8;

/// Normalized histogram: bin `i` holds `c / r`, the fraction of the region's
/// values falling in it.
#[derive(Clone, Debug, PartialEq)]
pub struct HistVec(pub Vec<f64>);

/// Eight cue histograms of one superpixel, columns ordered H, S, I, R, G, B, x, y.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<HistVec>,
    pub n_bins: usize,
}

/// Column-major flattening of a [`FeatureMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

#[inline]
pub fn bin_index(v: f64, n_bins: usize) -> usize {
    // [i/n, (i+1)/n) with the last bin closed at 1; v*n can round across an
    // edge, so settle against the edges themselves.
    let n = n_bins as f64;
    let mut i = ((v * n).floor().max(0.0) as usize).min(n_bins - 1);
    if i > 0 && v < i as f64 / n {
        i -= 1;
    } else if i + 1 < n_bins && v >= (i + 1) as f64 / n {
        i += 1;
    }
    i
}

pub fn channel_histogram(values: &[f64], n_bins: usize) -> Result<HistVec> {
    if n_bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::DegenerateRegion(0));
    }
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        counts[bin_index(v, n_bins)] += 1;
    }
    let r = values.len() as f64;
    Ok(HistVec(counts.into_iter().map(|c| c as f64 / r).collect()))
}

/// Feature matrix from a precomputed pixel list of one region.
pub(crate) fn features_for_pixels(patch: &Patch, pixels: &[usize], n_bins: usize) -> Result<FeatureMatrix> {
    if n_bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    if pixels.is_empty() {
        return Err(Error::DegenerateRegion(0));
    }
    let width = patch.rgb.width();
    let height = patch.rgb.height();
    let sx = if width > 1 { 1.0 / (width - 1) as f64 } else { 0.0 };
    let sy = if height > 1 { 1.0 / (height - 1) as f64 } else { 0.0 };
    let rgb = patch.rgb.pixels();
    let hsi = patch.hsi.pixels();

    let mut counts = vec![[0usize; NUM_CUES]; n_bins];
    for &p in pixels {
        let h = hsi[p];
        let c = rgb[p];
        let cues = [
            h[0],
            h[1],
            h[2],
            c[0],
            c[1],
            c[2],
            (p % width) as f64 * sx,
            (p / width) as f64 * sy,
        ];
        for (m, v) in cues.into_iter().enumerate() {
            counts[bin_index(v, n_bins)][m] += 1;
        }
    }
    let r = pixels.len() as f64;
    let columns = (0..NUM_CUES)
        .map(|m| HistVec(counts.iter().map(|row| row[m] as f64 / r).collect()))
        .collect();
    Ok(FeatureMatrix { columns, n_bins })
}

pub fn superpixel_features(
    patch: &Patch,
    labels: &LabelMap,
    region_id: usize,
    n_bins: usize,
) -> Result<FeatureMatrix> {
    if region_id >= labels.k {
        return Err(Error::Parameter(format!(
            "region {region_id} out of range for {} superpixels",
            labels.k
        )));
    }
    if labels.width != patch.rgb.width() || labels.height != patch.rgb.height() {
        return Err(Error::Parameter("label map and patch sizes differ".into()));
    }
    let pixels = labels.region_pixels(region_id);
    features_for_pixels(patch, &pixels, n_bins).map_err(|e| match e {
        Error::DegenerateRegion(_) => Error::DegenerateRegion(region_id),
        e => e,
    })
}

pub fn flatten(fm: &FeatureMatrix) -> FeatureVector {
    FeatureVector(fm.columns.iter().flat_map(|c| c.0.iter().copied()).collect())
}

pub fn unflatten(fv: &FeatureVector, n_bins: usize) -> Result<FeatureMatrix> {
    if n_bins == 0 || fv.0.len() != n_bins * NUM_CUES {
        return Err(Error::Parameter(format!(
            "feature vector of length {} does not split into {NUM_CUES} columns of {n_bins}",
            fv.0.len()
        )));
    }
    Ok(FeatureMatrix {
        columns: fv.0.chunks(n_bins).map(|c| HistVec(c.to_vec())).collect(),
        n_bins,
    })
}
