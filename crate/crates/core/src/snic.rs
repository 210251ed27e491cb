//! Simple Non-Iterative Clustering (SNIC) superpixels.
//!
//! Seeds are laid on a regular grid and regions grow from a single priority
//! queue keyed by the joint color/spatial distance to the (online) region
//! centroid. Every pixel is labeled exactly once, so each region is
//! 4-connected and the label count always equals the seed count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::media::Patch;

/// Per-pixel superpixel assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
    pub k: usize,
    pub centroids: Vec<Centroid>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Centroid {
    pub x: f64,
    pub y: f64,
    pub color: [f64; 3],
    pub size: usize,
}

impl LabelMap {
    #[inline]
    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    /// Raster-order pixel indices of one region.
    pub fn region_pixels(&self, region: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == region).then_some(i))
            .collect()
    }

    /// Pixel indices of every region, in one pass.
    pub fn regions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Writes labels as a 16-bit grayscale PNG.
    pub fn save_labels_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> = image::ImageBuffer::from_raw(
            self.width as u32,
            self.height as u32,
            self.labels.iter().map(|&l| l.min(u16::MAX as usize) as u16).collect(),
        )
        .expect("label buffer matches dimensions");
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Writes the patch with region boundaries painted red.
    pub fn save_boundary_overlay(&self, patch: &Patch, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = patch.rgb.to_rgb8();
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.label(x, y);
                let edge = (x + 1 < self.width && self.label(x + 1, y) != l)
                    || (y + 1 < self.height && self.label(x, y + 1) != l);
                if edge {
                    let i = 3 * (y * self.width + x);
                    bytes[i..i + 3].copy_from_slice(&[255, 0, 0]);
                }
            }
        }
        image::save_buffer(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Seed positions on a regular grid, exactly `k` of them, in raster order.
///
/// Rows are chosen to keep cells roughly square; the first `k % rows` rows
/// carry one extra seed.
pub fn seed_grid(width: usize, height: usize, k: usize) -> Vec<(usize, usize)> {
    let ideal = (k as f64 * height as f64 / width as f64).sqrt().round() as usize;
    let min_rows = k.div_ceil(width);
    let rows = ideal.clamp(1, k.min(height)).max(min_rows);
    let base = k / rows;
    let extra = k % rows;
    let mut seeds = Vec::with_capacity(k);
    for r in 0..rows {
        let cols = base + usize::from(r < extra);
        let y = ((r as f64 + 0.5) * height as f64 / rows as f64).floor() as usize;
        for c in 0..cols {
            let x = ((c as f64 + 0.5) * width as f64 / cols as f64).floor() as usize;
            seeds.push((x.min(width - 1), y.min(height - 1)));
        }
    }
    seeds
}

#[derive(Debug)]
struct QueueItem {
    dist: f64,
    order: u64,
    pixel: usize,
    label: usize,
}

impl PartialEq for QueueItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueItem {}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueItem {
    // BinaryHeap is a max-heap: invert so the smallest distance, then the
    // earliest insertion, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.order.cmp(&self.order))
    }
}

#[derive(Clone, Copy, Default)]
struct Accum {
    sx: f64,
    sy: f64,
    sc: [f64; 3],
    n: usize,
}

impl Accum {
    fn add(&mut self, x: f64, y: f64, c: [f64; 3]) {
        self.sx += x;
        self.sy += y;
        for (s, v) in self.sc.iter_mut().zip(c) {
            *s += v;
        }
        self.n += 1;
    }
}

/// Segments the patch into exactly `k` 4-connected superpixels.
///
/// Distances use the patch RGB values:
/// `d^2 = |c - c_k|^2 + (compactness / step)^2 |p - p_k|^2` with
/// `step = sqrt(area / k)`.
pub fn segment(patch: &Patch, k: usize, compactness: f64) -> Result<LabelMap> {
    let width = patch.rgb.width();
    let height = patch.rgb.height();
    let n = width * height;
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "superpixel count {k} must lie in [1, {n}] for a {width}x{height} patch"
        )));
    }
    if !compactness.is_finite() || compactness < 0.0 {
        return Err(Error::Parameter(format!(
            "compactness must be finite and nonnegative, got {compactness}"
        )));
    }
    let colors = patch.rgb.pixels();
    let step = (n as f64 / k as f64).sqrt();
    let spatial_w = (compactness / step).powi(2);

    const UNLABELED: usize = usize::MAX;
    let mut labels = vec![UNLABELED; n];
    let mut acc = vec![Accum::default(); k];
    let mut heap = BinaryHeap::with_capacity(4 * n);
    let mut order = 0u64;

    for (label, (x, y)) in seed_grid(width, height, k).into_iter().enumerate() {
        heap.push(QueueItem {
            dist: 0.0,
            order,
            pixel: y * width + x,
            label,
        });
        order += 1;
    }

    while let Some(item) = heap.pop() {
        if labels[item.pixel] != UNLABELED {
            continue;
        }
        labels[item.pixel] = item.label;
        let (px, py) = (item.pixel % width, item.pixel / width);
        acc[item.label].add(px as f64, py as f64, colors[item.pixel]);

        let a = acc[item.label];
        let inv = 1.0 / a.n as f64;
        let (cx, cy) = (a.sx * inv, a.sy * inv);
        let cc = [a.sc[0] * inv, a.sc[1] * inv, a.sc[2] * inv];

        let mut push = |nx: usize, ny: usize| {
            let idx = ny * width + nx;
            if labels[idx] != UNLABELED {
                return;
            }
            let c = colors[idx];
            let dc = (c[0] - cc[0]).powi(2) + (c[1] - cc[1]).powi(2) + (c[2] - cc[2]).powi(2);
            let ds = (nx as f64 - cx).powi(2) + (ny as f64 - cy).powi(2);
            heap.push(QueueItem {
                dist: (dc + spatial_w * ds).sqrt(),
                order,
                pixel: idx,
                label: item.label,
            });
            order += 1;
        };
        if px > 0 {
            push(px - 1, py);
        }
        if px + 1 < width {
            push(px + 1, py);
        }
        if py > 0 {
            push(px, py - 1);
        }
        if py + 1 < height {
            push(px, py + 1);
        }
    }

    // Seeds hold distance zero and the lowest insertion order, so every seed
    // claims its own pixel before any growth happens and no region is empty.
    debug_assert!(labels.iter().all(|&l| l != UNLABELED));
    debug_assert!(acc.iter().all(|a| a.n > 0));

    let mut exact = vec![Accum::default(); k];
    for (i, &l) in labels.iter().enumerate() {
        exact[l].add((i % width) as f64, (i / width) as f64, colors[i]);
    }
    let centroids = exact
        .iter()
        .map(|a| {
            let inv = 1.0 / a.n as f64;
            Centroid {
                x: a.sx * inv,
                y: a.sy * inv,
                color: a.sc.map(|c| c * inv),
                size: a.n,
            }
        })
        .collect();

    Ok(LabelMap {
        width,
        height,
        labels,
        k,
        centroids,
    })
}
