use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ProjectionMethod {
    Pca,
    Tsne { seed: u64, perplexity: f64, iterations: usize },
}

impl Default for ProjectionMethod {
    fn default() -> Self {
        ProjectionMethod::Pca
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub labels: Vec<String>,
    pub coords: Vec<[f64; 2]>,
}

/// Reduces labelled embeddings to two dimensions.
pub fn project2d(points: &[(String, Vec<f32>)], method: ProjectionMethod) -> Result<Projection> {
    if points.len() < 3 {
        return Err(Error::config(format!("projection needs at least 3 points, got {}", points.len())));
    }
    let dim = points[0].1.len();
    if dim == 0 || points.iter().any(|(_, v)| v.len() != dim) {
        return Err(Error::shape("embeddings must share a non-zero dimension"));
    }
    let x = DMatrix::from_fn(points.len(), dim, |i, j| f64::from(points[i].1[j]));
    let coords = match method {
        ProjectionMethod::Pca => pca(&x),
        ProjectionMethod::Tsne {
            seed,
            perplexity,
            iterations,
        } => {
            // Identical embeddings share one t-SNE point.
            let mut unique: Vec<usize> = Vec::new();
            let mut slot = Vec::with_capacity(points.len());
            for (i, (_, v)) in points.iter().enumerate() {
                match unique.iter().position(|&u| points[u].1 == *v) {
                    Some(k) => slot.push(k),
                    None => {
                        slot.push(unique.len());
                        unique.push(i);
                    }
                }
            }
            if unique.len() < 3 {
                pca(&x)
            } else {
                let ux = DMatrix::from_fn(unique.len(), dim, |i, j| x[(unique[i], j)]);
                let coords = tsne(&ux, seed, perplexity, iterations);
                slot.into_iter().map(|k| coords[k]).collect()
            }
        }
    };
    Ok(Projection {
        labels: points.iter().map(|(l, _)| l.clone()).collect(),
        coords,
    })
}

/// Top two principal components; each axis is signed so its largest
/// absolute coordinate is positive.
fn pca(x: &DMatrix<f64>) -> Vec<[f64; 2]> {
    let n = x.nrows();
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let svd = c.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut coords = vec![[0.0; 2]; n];
    for (axis, &k) in order.iter().take(2).enumerate() {
        let s = svd.singular_values[k];
        let col: Vec<f64> = (0..n).map(|i| u[(i, k)] * s).collect();
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in col.into_iter().enumerate() {
            coords[i][axis] = sign * v;
        }
    }
    coords
}

/// Exact t-SNE with a fixed seed.
fn tsne(x: &DMatrix<f64>, seed: u64, perplexity: f64, iterations: usize) -> Vec<[f64; 2]> {
    let n = x.nrows();
    let perplexity = perplexity.clamp(1.0, ((n - 1) as f64 / 3.0).max(1.0));
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d2[i * n + j] = (x.row(i) - x.row(j)).norm_squared();
        }
    }
    // Conditional affinities by bisection on the precision of each row.
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
        for _ in 0..64 {
            let mut sum = 0.0;
            let mut h = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                let w = (-beta * d2[i * n + j]).exp();
                p[i * n + j] = w;
                sum += w;
                h += beta * d2[i * n + j] * w;
            }
            if sum == 0.0 {
                hi = beta;
                beta = (lo + hi) / 2.0;
                continue;
            }
            let entropy = sum.ln() + h / sum;
            for j in 0..n {
                p[i * n + j] /= sum;
            }
            if (entropy - target).abs() < 1e-5 {
                break;
            }
            if entropy > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
    }
    let mut pj = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            pj[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut num = vec![0.0; n * n];
    for it in 0..iterations {
        let exaggeration = if it < 100 { 4.0 } else { 1.0 };
        let momentum = if it < 250 { 0.5 } else { 0.8 };
        let mut z = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let dy = [y[i][0] - y[j][0], y[i][1] - y[j][1]];
                    num[i * n + j] = 1.0 / (1.0 + dy[0] * dy[0] + dy[1] * dy[1]);
                    z += num[i * n + j];
                }
            }
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in (0..n).filter(|&j| j != i) {
                let q = (num[i * n + j] / z).max(1e-12);
                let f = 4.0 * (exaggeration * pj[i * n + j] - q) * num[i * n + j];
                g[0] += f * (y[i][0] - y[j][0]);
                g[1] += f * (y[i][1] - y[j][1]);
            }
            for a in 0..2 {
                velocity[i][a] = momentum * velocity[i][a] - 200.0 * g[a];
            }
        }
        for i in 0..n {
            for a in 0..2 {
                y[i][a] += velocity[i][a];
            }
        }
    }
    y
}

const PALETTE: [[u8; 3]; 12] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [0, 0, 0],
    [255, 215, 0],
];

impl Projection {
    /// Largest side of the bounding box.
    pub fn extent(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.coords {
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,x,y\n");
        for (l, c) in self.labels.iter().zip(&self.coords) {
            let _ = writeln!(out, "{l},{:.9},{:.9}", c[0], c[1]);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    /// Scatter plot with one colour per label.
    pub fn render(&self, size: u32) -> RgbImage {
        let mut img = RgbImage::from_pixel(size, size, Rgb([255, 255, 255]));
        let colors: BTreeMap<&str, usize> = {
            let mut names: Vec<&str> = self.labels.iter().map(String::as_str).collect();
            names.sort_unstable();
            names.dedup();
            names.into_iter().enumerate().map(|(i, n)| (n, i)).collect()
        };
        let mut lo = [f64::INFINITY; 2];
        for c in &self.coords {
            lo[0] = lo[0].min(c[0]);
            lo[1] = lo[1].min(c[1]);
        }
        let extent = self.extent().max(1e-12);
        let margin = f64::from(size) * 0.08;
        let span = f64::from(size) - 2.0 * margin;
        let radius = 5i64;
        for (l, c) in self.labels.iter().zip(&self.coords) {
            let px = (margin + (c[0] - lo[0]) / extent * span).round() as i64;
            let py = (f64::from(size) - margin - (c[1] - lo[1]) / extent * span).round() as i64;
            let color = Rgb(PALETTE[colors[l.as_str()] % PALETTE.len()]);
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    let (x, y) = (px + dx, py + dy);
                    if dx * dx + dy * dy <= radius * radius && x >= 0 && y >= 0 && x < size as i64 && y < size as i64 {
                        img.put_pixel(x as u32, y as u32, color);
                    }
                }
            }
        }
        img
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.render(512)
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))
    }
}
