//! Sequence ingestion, one-pass evaluation and precision/success curves.
//!
//! Sequences follow the OTB layout: an `img/` directory of numbered frames
//! and a `groundtruth_rect.txt` with one `x,y,w,h` row per frame (comma,
//! tab or space separated). Box coordinates are taken as given; a box
//! `(x, y, w, h)` covers pixels `x ..= x + w - 1`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{load_image, ImageRgb};
use crate::tracker::{self, Diagnostics, TrackerConfig};

pub const GROUND_TRUTH_FILE: &str = "groundtruth_rect.txt";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + (self.w - 1.0) / 2.0, self.y + (self.h - 1.0) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }
}

/// Intersection over union of the two rectangles `[x, x + w) x [y, y + h)`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.w * a.h + b.w * b.h - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    pub auc: f64,
}

impl EvalCurve {
    /// Value at the threshold closest to `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self
            .thresholds
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.values[i]
    }

    fn from_values(thresholds: Vec<f64>, values: Vec<f64>) -> Self {
        let auc = values.iter().sum::<f64>() / values.len() as f64;
        Self { thresholds, values, auc }
    }
}

/// 51 overlap thresholds `0, 0.02, ..., 1`.
pub fn success_thresholds() -> Vec<f64> {
    (0..=50).map(|i| f64::from(i) / 50.0).collect()
}

pub fn precision_thresholds() -> Vec<f64> {
    (0..=50).map(f64::from).collect()
}

/// Fraction of frames with overlap strictly above each threshold; AUC is
/// the mean of the sampled values.
pub fn success_curve(ious: &[f64]) -> EvalCurve {
    let n = ious.len().max(1) as f64;
    let thresholds = success_thresholds();
    let values = thresholds
        .iter()
        .map(|&t| ious.iter().filter(|&&v| v > t).count() as f64 / n)
        .collect();
    EvalCurve::from_values(thresholds, values)
}

/// Fraction of frames with center error at most each threshold.
pub fn precision_curve(errors: &[f64]) -> EvalCurve {
    let n = errors.len().max(1) as f64;
    let thresholds = precision_thresholds();
    let values = thresholds
        .iter()
        .map(|&t| errors.iter().filter(|&&v| v <= t).count() as f64 / n)
        .collect();
    EvalCurve::from_values(thresholds, values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub ground_truth: Vec<BoundingBox>,
}

fn frame_number(p: &Path) -> Option<u64> {
    p.file_stem()?.to_str()?.parse().ok()
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<BoundingBox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let vals: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Ingest(format!("ground truth line {}: {e}: {line:?}", i + 1)))?;
            match vals[..] {
                [x, y, w, h] => Ok(BoundingBox { x, y, w, h }),
                _ => Err(Error::Ingest(format!(
                    "ground truth line {} has {} fields, expected 4: {line:?}",
                    i + 1,
                    vals.len()
                ))),
            }
        })
        .collect()
}

pub fn load_sequence(dir: impl AsRef<Path>) -> Result<Sequence> {
    let dir = dir.as_ref();
    let img_dir = dir.join("img");
    let entries = std::fs::read_dir(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&img_dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("jpg" | "jpeg" | "png")) {
            frames.push(path);
        }
    }
    if frames.iter().any(|p| frame_number(p).is_none()) {
        return Err(Error::Ingest(format!("{}: frame names must be numbers", img_dir.display())));
    }
    frames.sort_by_key(|p| frame_number(p));

    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let text = std::fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let ground_truth =
        parse_ground_truth(&text).map_err(|e| Error::Ingest(format!("{}: {e}", gt_path.display())))?;
    if frames.len() != ground_truth.len() {
        return Err(Error::Ingest(format!(
            "{}: {} frames but {} ground-truth rows",
            dir.display(),
            frames.len(),
            ground_truth.len()
        )));
    }
    if frames.len() < 2 {
        return Err(Error::Ingest(format!("{}: need at least 2 frames", dir.display())));
    }
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("sequence")
        .to_string();
    Ok(Sequence {
        name,
        frames,
        ground_truth,
    })
}

/// Outcome of a one-pass run. `diagnostics[i]` belongs to frame `i + 1`.
#[derive(Clone, Debug)]
pub struct OpeResult {
    pub name: String,
    pub boxes: Vec<BoundingBox>,
    pub ious: Vec<f64>,
    pub center_errors: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    pub runtime_per_frame: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub frames: usize,
    pub mean_iou: f64,
    pub auc: f64,
    pub precision_at_20: f64,
    pub runtime_per_frame: f64,
    pub accepted_frames: usize,
    pub positive_updates: usize,
}

impl OpeResult {
    pub fn success(&self) -> EvalCurve {
        success_curve(&self.ious)
    }

    pub fn precision(&self) -> EvalCurve {
        precision_curve(&self.center_errors)
    }

    pub fn mean_iou(&self) -> f64 {
        self.ious.iter().sum::<f64>() / self.ious.len() as f64
    }

    pub fn summary(&self) -> Summary {
        Summary {
            name: self.name.clone(),
            frames: self.boxes.len(),
            mean_iou: self.mean_iou(),
            auc: self.success().auc,
            precision_at_20: self.precision().value_at(20.0),
            runtime_per_frame: self.runtime_per_frame,
            accepted_frames: self.diagnostics.iter().filter(|d| d.accepted).count(),
            positive_updates: self.diagnostics.iter().filter(|d| d.positive_updated).count(),
        }
    }

    /// One row per frame: `index,x,y,w,h,iou,cle`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,x,y,w,h,iou,cle\n");
        for (i, b) in self.boxes.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                i + 1,
                b.x,
                b.y,
                b.w,
                b.h,
                self.ious[i],
                self.center_errors[i]
            );
        }
        s
    }

    /// Writes `results.csv`, `diagnostics.jsonl` and `summary.json`.
    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<()> {
        let out = out_dir.as_ref();
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let write = |name: &str, body: String| {
            let p = out.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        write(RESULTS_FILE, self.to_csv())?;
        let diag: String = self
            .diagnostics
            .iter()
            .map(|d| serde_json::to_string(d).expect("diagnostics serialize") + "\n")
            .collect();
        write("diagnostics.jsonl", diag)?;
        write(
            SUMMARY_FILE,
            serde_json::to_string_pretty(&self.summary()).expect("summary serializes") + "\n",
        )
    }
}

/// Initializes on the first ground-truth box and tracks every later frame
/// once, without restarts.
pub fn run_ope_with(
    config: &TrackerConfig,
    name: &str,
    ground_truth: &[BoundingBox],
    mut frame: impl FnMut(usize) -> Result<ImageRgb>,
    mut on_frame: impl FnMut(usize, &ImageRgb, &BoundingBox) -> Result<()>,
) -> Result<OpeResult> {
    if ground_truth.len() < 2 {
        return Err(Error::Ingest(format!("{name}: need at least 2 frames")));
    }
    let start = Instant::now();
    let first = frame(0)?;
    let mut state = tracker::init(&first, &ground_truth[0], config)?;
    on_frame(0, &first, &ground_truth[0])?;
    let mut boxes = vec![ground_truth[0]];
    let mut diagnostics = Vec::with_capacity(ground_truth.len() - 1);
    for i in 1..ground_truth.len() {
        let img = frame(i)?;
        let (next, b, d) = tracker::step(&state, &img)?;
        on_frame(i, &img, &b)?;
        state = next;
        boxes.push(b);
        diagnostics.push(d);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ious = boxes.iter().zip(ground_truth).map(|(b, g)| iou(b, g)).collect();
    let center_errors = boxes.iter().zip(ground_truth).map(|(b, g)| center_error(b, g)).collect();
    Ok(OpeResult {
        name: name.to_string(),
        boxes,
        ious,
        center_errors,
        diagnostics,
        runtime_per_frame: elapsed / ground_truth.len() as f64,
    })
}

/// One-pass evaluation over a loaded sequence; with `overlay_dir`, every
/// frame is also written there as a PNG with the prediction (red) and the
/// ground truth (green).
pub fn run_ope(config: &TrackerConfig, seq: &Sequence, overlay_dir: Option<&Path>) -> Result<OpeResult> {
    if let Some(d) = overlay_dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    run_ope_with(
        config,
        &seq.name,
        &seq.ground_truth,
        |i| load_image(&seq.frames[i]),
        |i, img, b| match overlay_dir {
            Some(d) => draw_overlay(img, b, &seq.ground_truth[i]).save_png(d.join(format!("{:04}.png", i + 1))),
            None => Ok(()),
        },
    )
}

pub fn run_ope_frames(
    config: &TrackerConfig,
    name: &str,
    frames: &[ImageRgb],
    ground_truth: &[BoundingBox],
) -> Result<OpeResult> {
    if frames.len() != ground_truth.len() {
        return Err(Error::Ingest(format!(
            "{name}: {} frames but {} ground-truth boxes",
            frames.len(),
            ground_truth.len()
        )));
    }
    run_ope_with(config, name, ground_truth, |i| Ok(frames[i].clone()), |_, _, _| Ok(()))
}

fn draw_rect(data: &mut [[f64; 3]], w: usize, h: usize, b: &BoundingBox, color: [f64; 3]) {
    let x0 = b.x.round() as i64;
    let y0 = b.y.round() as i64;
    let x1 = (b.x + b.w - 1.0).round() as i64;
    let y1 = (b.y + b.h - 1.0).round() as i64;
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            data[y as usize * w + x as usize] = color;
        }
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

pub fn draw_overlay(frame: &ImageRgb, predicted: &BoundingBox, truth: &BoundingBox) -> ImageRgb {
    let (w, h) = (frame.width(), frame.height());
    let mut data = frame.pixels().to_vec();
    draw_rect(&mut data, w, h, truth, [0.0, 1.0, 0.0]);
    draw_rect(&mut data, w, h, predicted, [1.0, 0.0, 0.0]);
    ImageRgb::new(w, h, data).expect("same dimensions")
}

/// Per-frame rows read back from a results CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub index: usize,
    pub bbox: BoundingBox,
    pub iou: f64,
    pub cle: f64,
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "index,x,y,w,h,iou,cle" => {}
        _ => return Err(Error::Ingest(format!("{}: missing results header", path.display()))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || Error::Ingest(format!("{}: malformed row {}: {l:?}", path.display(), i + 2));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            let v: Vec<f64> = f[1..].iter().map(|t| t.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
            Ok(ResultRow {
                index: f[0].trim().parse().map_err(|_| bad())?,
                bbox: BoundingBox::new(v[0], v[1], v[2], v[3]),
                iou: v[4],
                cle: v[5],
            })
        })
        .collect()
}

/// Result directories under `root`: `root` itself if it holds a results
/// file, otherwise each immediate subdirectory that does, sorted by name.
pub fn find_result_dirs(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    if root.join(RESULTS_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let p = entry.map_err(|e| Error::io(root, e))?.path();
        if p.join(RESULTS_FILE).is_file() {
            dirs.push(p);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Ingest(format!("{}: no {RESULTS_FILE} found", root.display())));
    }
    Ok(dirs)
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub sequences: Vec<SequenceScore>,
    /// Curves averaged over sequences.
    pub success: EvalCurve,
    pub precision: EvalCurve,
    pub auc: f64,
    pub precision_at_20: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceScore {
    pub name: String,
    pub frames: usize,
    pub auc: f64,
    pub precision_at_20: f64,
    #[serde(skip)]
    pub success: EvalCurve,
    #[serde(skip)]
    pub precision: EvalCurve,
}

fn mean_curve(curves: &[&EvalCurve]) -> EvalCurve {
    let n = curves.len() as f64;
    let thresholds = curves[0].thresholds.clone();
    let values = (0..thresholds.len())
        .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / n)
        .collect();
    EvalCurve::from_values(thresholds, values)
}

pub fn evaluate_results(root: impl AsRef<Path>) -> Result<EvalReport> {
    let mut sequences = Vec::new();
    for dir in find_result_dirs(root)? {
        let rows = read_results_csv(dir.join(RESULTS_FILE))?;
        if rows.is_empty() {
            return Err(Error::Ingest(format!("{}: results are empty", dir.display())));
        }
        let ious: Vec<f64> = rows.iter().map(|r| r.iou).collect();
        let cles: Vec<f64> = rows.iter().map(|r| r.cle).collect();
        let success = success_curve(&ious);
        let precision = precision_curve(&cles);
        sequences.push(SequenceScore {
            name: dir.file_name().and_then(|n| n.to_str()).unwrap_or("results").to_string(),
            frames: rows.len(),
            auc: success.auc,
            precision_at_20: precision.value_at(20.0),
            success,
            precision,
        });
    }
    let success = mean_curve(&sequences.iter().map(|s| &s.success).collect::<Vec<_>>());
    let precision = mean_curve(&sequences.iter().map(|s| &s.precision).collect::<Vec<_>>());
    Ok(EvalReport {
        auc: success.auc,
        precision_at_20: precision.value_at(20.0),
        sequences,
        success,
        precision,
    })
}

impl EvalReport {
    fn curve_csv(&self, pick: impl Fn(&SequenceScore) -> &EvalCurve, overall: &EvalCurve) -> String {
        let mut s = String::from("threshold");
        for q in &self.sequences {
            let _ = write!(s, ",{}", q.name);
        }
        s.push_str(",mean\n");
        for (i, t) in overall.thresholds.iter().enumerate() {
            let _ = write!(s, "{t:.2}");
            for q in &self.sequences {
                let _ = write!(s, ",{:.6}", pick(q).values[i]);
            }
            let _ = writeln!(s, ",{:.6}", overall.values[i]);
        }
        s
    }

    /// Writes `success.csv`, `precision.csv` and `summary.json`.
    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<()> {
        let out = out_dir.as_ref();
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let files = [
            ("success.csv", self.curve_csv(|q| &q.success, &self.success)),
            ("precision.csv", self.curve_csv(|q| &q.precision, &self.precision)),
            (
                SUMMARY_FILE,
                serde_json::to_string_pretty(&serde_json::json!({
                    "auc": self.auc,
                    "precision_at_20": self.precision_at_20,
                    "sequences": self.sequences,
                }))
                .expect("report serializes")
                    + "\n",
            ),
        ];
        for (name, body) in files {
            let p = out.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Generated test sequence: a textured square moving over a cluttered
/// background of random color blocks.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub size: usize,
    /// Top-left corner in the first frame.
    pub start: (usize, usize),
    /// Integer displacement per frame.
    pub velocity: (i64, i64),
    /// From this frame on the square has the second size, same center.
    pub resize: Option<(usize, usize)>,
    pub block: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 200,
            height: 120,
            frames: 60,
            size: 20,
            start: (20, 50),
            velocity: (2, 0),
            resize: None,
            block: 8,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    /// Same motion, but the square grows by 30% at frame 30.
    pub fn with_scale_change() -> Self {
        Self {
            resize: Some((30, 26)),
            ..Self::default()
        }
    }
}

fn target_texture(u: f64, v: f64) -> [f64; 3] {
    // 4x4 checker of two saturated colors with a diagonal ramp
    let cell = ((u * 4.0).floor() as i64 + (v * 4.0).floor() as i64) % 2;
    let ramp = 0.25 * (u + v);
    if cell == 0 {
        [0.95, 0.15 + ramp, 0.1]
    } else {
        [0.1, 0.2 + ramp, 0.9]
    }
}

pub fn synthetic_sequence(spec: &SyntheticSpec) -> Result<(Vec<ImageRgb>, Vec<BoundingBox>)> {
    if spec.frames < 2 || spec.size == 0 || spec.block == 0 {
        return Err(Error::Parameter("synthetic sequence needs 2+ frames and positive sizes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bw = spec.width.div_ceil(spec.block);
    let bh = spec.height.div_ceil(spec.block);
    let blocks: Vec<[f64; 3]> = (0..bw * bh).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let background = |x: usize, y: usize| blocks[(y / spec.block) * bw + x / spec.block];

    let mut frames = Vec::with_capacity(spec.frames);
    let mut gt = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let x = spec.start.0 as i64 + spec.velocity.0 * t as i64;
        let y = spec.start.1 as i64 + spec.velocity.1 * t as i64;
        let (size, x, y) = match spec.resize {
            Some((from, new)) if t >= from => {
                let shift = (new as i64 - spec.size as i64) / 2;
                (new, x - shift, y - shift)
            }
            _ => (spec.size, x, y),
        };
        if x < 0 || y < 0 || x as usize + size > spec.width || y as usize + size > spec.height {
            return Err(Error::Parameter(format!("target leaves the frame at frame {t}")));
        }
        let (x, y) = (x as usize, y as usize);
        let img = ImageRgb::from_fn(spec.width, spec.height, |px, py| {
            if (x..x + size).contains(&px) && (y..y + size).contains(&py) {
                target_texture((px - x) as f64 / size as f64, (py - y) as f64 / size as f64)
            } else {
                background(px, py)
            }
        })?;
        frames.push(img);
        gt.push(BoundingBox::new(x as f64, y as f64, size as f64, size as f64));
    }
    Ok((frames, gt))
}

/// Writes frames and ground truth in the OTB directory layout.
pub fn write_otb(dir: impl AsRef<Path>, frames: &[ImageRgb], ground_truth: &[BoundingBox]) -> Result<()> {
    let dir = dir.as_ref();
    let img = dir.join("img");
    std::fs::create_dir_all(&img).map_err(|e| Error::io(&img, e))?;
    for (i, f) in frames.iter().enumerate() {
        f.save_png(img.join(format!("{:04}.png", i + 1)))?;
    }
    let text: String = ground_truth
        .iter()
        .map(|b| format!("{},{},{},{}\n", b.x, b.y, b.w, b.h))
        .collect();
    let p = dir.join(GROUND_TRUTH_FILE);
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
}
