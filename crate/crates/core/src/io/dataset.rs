//! 16×16 character images: a seeded synthetic glyph set and loaders for user images.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{atomic_write, IoError};

pub const SIDE: usize = 16;
pub const PIXELS: usize = SIDE * SIDE;
pub const CLASSES: usize = 26;

/// Flattened row-major images in `[0, 1]` with class labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

// 5×7 capitals, one string per row.
const FONT: [[&str; 7]; CLASSES] = [
    [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
    [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
    ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."],
    ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
    ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
    [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"],
    ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
    ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
    ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
    ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
    ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
    ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"],
    [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
    [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
    ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
    [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
    ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
    ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
    ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."],
    ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
    ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."],
    ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
];

/// Jitter and noise applied to each synthetic glyph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlyphNoise {
    /// Maximum translation in pixels along each axis.
    pub max_shift: i32,
    /// Standard deviation of additive Gaussian pixel noise.
    pub pixel_sigma: f64,
    /// Probability that a stroke cell is dropped.
    pub dropout: f64,
    /// Stroke intensity is drawn from `[min_ink, 1]`.
    pub min_ink: f64,
}

impl Default for GlyphNoise {
    fn default() -> Self {
        Self {
            max_shift: 1,
            pixel_sigma: 0.15,
            dropout: 0.1,
            min_ink: 0.6,
        }
    }
}

fn render(class: usize, rng: &mut ChaCha8Rng, noise: &GlyphNoise) -> Vec<f64> {
    let mut img = vec![0.0; PIXELS];
    let dx = rng.random_range(-noise.max_shift..=noise.max_shift);
    let dy = rng.random_range(-noise.max_shift..=noise.max_shift);
    // Each font cell becomes a 2×2 block; the 10×14 glyph sits at (3, 1) before the shift.
    for (r, row) in FONT[class].iter().enumerate() {
        for (c, ch) in row.bytes().enumerate() {
            if ch != b'#' {
                continue;
            }
            for (by, bx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                if rng.random::<f64>() < noise.dropout {
                    continue;
                }
                let x = 3 + 2 * c as i32 + bx + dx;
                let y = 1 + 2 * r as i32 + by + dy;
                if (0..SIDE as i32).contains(&x) && (0..SIDE as i32).contains(&y) {
                    img[y as usize * SIDE + x as usize] = rng.random_range(noise.min_ink..=1.0);
                }
            }
        }
    }
    if noise.pixel_sigma > 0.0 {
        let n = Normal::new(0.0, noise.pixel_sigma).expect("finite sigma");
        for p in img.iter_mut() {
            *p = (*p + n.sample(rng)).clamp(0.0, 1.0);
        }
    }
    img
}

/// `n_per_class` images of each letter, classes interleaved, deterministic in `seed`.
pub fn gen_synthetic_dataset(seed: u64, n_per_class: usize, noise: &GlyphNoise) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::default();
    for _ in 0..n_per_class {
        for class in 0..CLASSES {
            ds.images.push(render(class, &mut rng, noise));
            ds.labels.push(class);
        }
    }
    ds
}

/// Writes `img_NNNN.csv` (one row of 256 values) per image and `labels.csv`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    let mut written = Vec::with_capacity(ds.len() + 1);
    let mut labels = String::from("file,label\n");
    for (k, (img, label)) in ds.images.iter().zip(&ds.labels).enumerate() {
        let name = format!("img_{k:04}.csv");
        let line: Vec<String> = img.iter().map(|v| format!("{v:.6}")).collect();
        let path = dir.join(&name);
        atomic_write(&path, format!("{}\n", line.join(",")).as_bytes())?;
        written.push(path);
        labels.push_str(&format!("{name},{label}\n"));
    }
    let path = dir.join("labels.csv");
    atomic_write(&path, labels.as_bytes())?;
    written.push(path);
    Ok(written)
}

fn parse_csv_image(text: &str, path: &Path) -> Result<(usize, usize, Vec<f64>), IoError> {
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::format(path, e.to_string()))?;
        rows.push(row);
    }
    if rows.len() == 1 && rows[0].len() == PIXELS {
        return Ok((SIDE, SIDE, rows.remove(0)));
    }
    let w = rows.first().map_or(0, Vec::len);
    if w == 0 || rows.iter().any(|r| r.len() != w) {
        return Err(IoError::format(path, "ragged or empty image".into()));
    }
    let h = rows.len();
    Ok((w, h, rows.concat()))
}

fn read_image(path: &Path) -> Result<Vec<f64>, IoError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let (w, h, px) = match ext.as_str() {
        "csv" => {
            let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
            parse_csv_image(&text, path)?
        }
        "pgm" | "pnm" => {
            let img = image::open(path)
                .map_err(|e| IoError::format(path, e.to_string()))?
                .to_luma16();
            let (w, h) = img.dimensions();
            let px = img.pixels().map(|p| p.0[0] as f64 / u16::MAX as f64).collect();
            (w as usize, h as usize, px)
        }
        _ => return Err(IoError::format(path, format!("unsupported extension {ext:?}"))),
    };
    if px.iter().any(|v| !v.is_finite()) {
        return Err(IoError::format(path, "non-finite pixel".into()));
    }
    let hi = px.iter().copied().fold(0.0, f64::max);
    // Values above 1 are taken as 8-bit grey levels.
    let scale = if hi > 1.0 { 255.0 } else { 1.0 };
    let px: Vec<f64> = px.iter().map(|v| (v / scale).clamp(0.0, 1.0)).collect();
    resample(&px, w, h).map_err(|m| IoError::format(path, m))
}

/// Area-averaging resample of a `w × h` image to 16×16.
pub fn resample(px: &[f64], w: usize, h: usize) -> Result<Vec<f64>, String> {
    if w < SIDE || h < SIDE || px.len() != w * h {
        return Err(format!("{w}x{h} image cannot be area-averaged to {SIDE}x{SIDE}"));
    }
    let mut out = vec![0.0; PIXELS];
    let (sx, sy) = (w as f64 / SIDE as f64, h as f64 / SIDE as f64);
    for oy in 0..SIDE {
        for ox in 0..SIDE {
            let (x0, x1) = (ox as f64 * sx, (ox + 1) as f64 * sx);
            let (y0, y1) = (oy as f64 * sy, (oy + 1) as f64 * sy);
            let mut acc = 0.0;
            for y in (y0.floor() as usize)..(y1.ceil() as usize).min(h) {
                let wy = (y1.min((y + 1) as f64) - y0.max(y as f64)).max(0.0);
                for x in (x0.floor() as usize)..(x1.ceil() as usize).min(w) {
                    let wx = (x1.min((x + 1) as f64) - x0.max(x as f64)).max(0.0);
                    acc += wx * wy * px[y * w + x];
                }
            }
            out[oy * SIDE + ox] = acc / (sx * sy);
        }
    }
    Ok(out)
}

/// Loads images from class subdirectories (`<dir>/<class>/*.{pgm,csv}`, classes in sorted
/// name order), or from flat files listed in `<dir>/labels.csv`.
pub fn ingest_images(dir: &Path) -> Result<Dataset, IoError> {
    let mut ds = Dataset::default();
    let labels = dir.join("labels.csv");
    if labels.is_file() {
        let mut rd = csv::Reader::from_path(&labels).map_err(|e| IoError::format(&labels, e.to_string()))?;
        for rec in rd.records() {
            let rec = rec.map_err(|e| IoError::format(&labels, e.to_string()))?;
            let (Some(name), Some(label)) = (rec.get(0), rec.get(1)) else {
                return Err(IoError::format(&labels, "expected file,label".into()));
            };
            let label: usize = label
                .trim()
                .parse()
                .map_err(|_| IoError::format(&labels, format!("label {label:?}")))?;
            ds.images.push(read_image(&dir.join(name.trim()))?);
            ds.labels.push(label);
        }
        return Ok(ds);
    }
    let mut classes: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| IoError::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    classes.sort();
    if classes.is_empty() {
        return Err(IoError::format(dir, "no labels.csv and no class subdirectories".into()));
    }
    for (label, cdir) in classes.iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(cdir)
            .map_err(|e| IoError::file(cdir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            ds.images.push(read_image(&f)?);
            ds.labels.push(label);
        }
    }
    Ok(ds)
}
