//! Image containers, HSI conversion and affine template sampling.

use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::motion::AffineState;

/// An RGB image with channels normalized to `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

/// An HSI image; hue is an angle normalized to `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageHsi {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

/// A template sampled from a frame under an affine state.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub rgb: ImageRgb,
    pub hsi: ImageHsi,
    pub source_state: AffineState,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "expected {} pixels for a {width}x{height} image, got {}",
                width * height,
                data.len()
            )));
        }
        if data
            .iter()
            .flatten()
            .any(|c| !(0.0..=1.0).contains(c))
        {
            return Err(Error::InvalidInput(
                "channel values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Builds an image from interleaved 8-bit RGB bytes.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::InvalidInput(format!(
                "expected {} bytes for a {width}x{height} RGB image, got {}",
                width * height * 3,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(3)
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at a continuous pixel position; positions outside the
    /// image are clamped onto the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        if fx == 0.0 && fy == 0.0 {
            return self.get(x0, y0);
        }
        let p00 = self.get(x0, y0);
        let p10 = self.get(x1, y0);
        let p01 = self.get(x0, y1);
        let p11 = self.get(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] * (1.0 - fx) + p10[c] * fx;
            let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
            out[c] = (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0);
        }
        out
    }

    /// Quantizes back to interleaved 8-bit RGB.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|p| p.map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8))
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer(
            path,
            &self.to_rgb8(),
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

impl ImageHsi {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }
}

/// Loads an 8-bit raster (PNG, JPEG) and normalizes it to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let rgb = img.to_rgb8();
    ImageRgb::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
}

/// HSI conversion of one normalized RGB triple.
///
/// Black pixels get zero saturation and achromatic pixels zero hue.
pub fn pixel_to_hsi([r, g, b]: [f64; 3]) -> [f64; 3] {
    let i = (r + g + b) / 3.0;
    if i <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let s = (1.0 - r.min(g).min(b) / i).clamp(0.0, 1.0);
    if s <= 0.0 {
        return [0.0, 0.0, i];
    }
    let num = 0.5 * ((r - g) + (r - b));
    let den = ((r - g) * (r - g) + (r - b) * (g - b)).sqrt();
    if den <= 0.0 {
        return [0.0, s, i];
    }
    let theta = (num / den).clamp(-1.0, 1.0).acos();
    let angle = if b > g { TAU - theta } else { theta };
    let mut h = angle / TAU;
    if h >= 1.0 {
        h = 0.0;
    }
    [h, s, i]
}

pub fn rgb_to_hsi(img: &ImageRgb) -> ImageHsi {
    ImageHsi {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&p| pixel_to_hsi(p)).collect(),
    }
}

/// Samples an `out_w x out_h` template from `frame` under `state`.
///
/// Template pixel `(u, v)` maps to `(x, y) + A (u - cu, v - cv)` where
/// `(cu, cv)` is the template center and `A` the state's linear part, so
/// the identity state at an integer-aligned center reproduces the frame.
pub fn extract_template(
    frame: &ImageRgb,
    state: &AffineState,
    out_w: usize,
    out_h: usize,
) -> Result<Patch> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Parameter(format!(
            "template size must be positive, got {out_w}x{out_h}"
        )));
    }
    state.validate()?;
    let [[a, b], [c, d]] = state.linear_map();
    let cu = (out_w as f64 - 1.0) / 2.0;
    let cv = (out_h as f64 - 1.0) / 2.0;
    let mut data = Vec::with_capacity(out_w * out_h);
    for v in 0..out_h {
        let dv = v as f64 - cv;
        for u in 0..out_w {
            let du = u as f64 - cu;
            let fx = state.x + a * du + b * dv;
            let fy = state.y + c * du + d * dv;
            data.push(frame.sample_bilinear(fx, fy));
        }
    }
    let rgb = ImageRgb {
        width: out_w,
        height: out_h,
        data,
    };
    let hsi = rgb_to_hsi(&rgb);
    Ok(Patch {
        rgb,
        hsi,
        source_state: *state,
    })
}
