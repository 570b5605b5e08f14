//! Deterministic synthetic grey-scale scenes.
//!
//! Tests, examples and the desk-scale experiments need natural-looking images
//! without shipping photographs. A scene is a smooth background with a
//! decaying spectrum, some overlapping flat objects with soft edges, and a
//! faint fine-grained texture, all mapped into `[0, 255]`.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::GrayImage;

const WAVES: usize = 24;
const SHAPES: usize = 7;
const TEXTURE_WAVES: usize = 12;
const GRAIN_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

// Box-Muller
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Shape of a generated scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    /// Peak amplitude of the background field, grey units.
    pub background: f64,
    /// Grey-level contrast of the flat objects.
    pub objects: f64,
    /// Amplitude of the high-frequency texture.
    pub texture: f64,
    /// Width of object edges in pixels.
    pub edge_width: f64,
    /// Standard deviation of independent per-pixel grain.
    pub grain: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            background: 55.0,
            objects: 60.0,
            texture: 4.0,
            edge_width: 1.5,
            grain: 0.0,
        }
    }
}

impl SceneParams {
    /// Strong fine-grained texture, so that patch codes carry a broad
    /// spread of nonzero coefficients alongside the flat regions.
    pub fn textured() -> Self {
        Self {
            texture: 160.0,
            ..Self::default()
        }
    }
}

enum Shape {
    Disk { r0: f64, c0: f64, radius: f64 },
    Rect { r0: f64, c0: f64, half_h: f64, half_w: f64, angle: f64 },
}

impl Shape {
    /// Signed distance in pixels, negative inside.
    fn distance(&self, r: f64, c: f64) -> f64 {
        match *self {
            Shape::Disk { r0, c0, radius } => ((r - r0).powi(2) + (c - c0).powi(2)).sqrt() - radius,
            Shape::Rect { r0, c0, half_h, half_w, angle } => {
                let (s, co) = angle.sin_cos();
                let (dr, dc) = (r - r0, c - c0);
                let u = (co * dr + s * dc).abs() - half_h;
                let v = (-s * dr + co * dc).abs() - half_w;
                let outside = (u.max(0.0).powi(2) + v.max(0.0).powi(2)).sqrt();
                outside + u.max(v).min(0.0)
            }
        }
    }
}

struct Wave {
    amp: f64,
    fr: f64,
    fc: f64,
    phase: f64,
}

fn waves(rng: &mut ChaCha8Rng, count: usize, min_cycles: f64, max_cycles: f64, height: f64, width: f64) -> Vec<Wave> {
    (0..count)
        .map(|_| {
            let cycles = min_cycles * (max_cycles / min_cycles).powf(rng.random::<f64>());
            let theta = rng.random_range(0.0..PI);
            let scale = height.max(width);
            Wave {
                // 1/f falloff
                amp: min_cycles / cycles,
                fr: 2.0 * PI * cycles * theta.cos() / scale,
                fc: 2.0 * PI * cycles * theta.sin() / scale,
                phase: rng.random_range(0.0..2.0 * PI),
            }
        })
        .collect()
}

fn sum_waves(ws: &[Wave], r: f64, c: f64) -> f64 {
    ws.iter().map(|w| w.amp * (w.fr * r + w.fc * c + w.phase).cos()).sum()
}

/// A `height x width` scene drawn from `seed` with [`SceneParams::default`].
pub fn scene(height: usize, width: usize, seed: u64) -> Result<GrayImage> {
    scene_with(height, width, seed, SceneParams::default())
}

pub fn scene_with(height: usize, width: usize, seed: u64, params: SceneParams) -> Result<GrayImage> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("scene dimensions must be positive"));
    }
    if !(params.edge_width > 0.0) {
        return Err(Error::invalid("edge width must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hf, wf) = (height as f64, width as f64);

    let background = waves(&mut rng, WAVES, 0.5, 6.0, hf, wf);
    let bg_norm: f64 = background.iter().map(|w| w.amp).sum::<f64>().max(f64::MIN_POSITIVE);
    let texture = waves(&mut rng, TEXTURE_WAVES, hf.max(wf) / 6.0, hf.max(wf) / 2.5, hf, wf);
    let tx_norm: f64 = texture.iter().map(|w| w.amp).sum::<f64>().max(f64::MIN_POSITIVE);

    let min_side = hf.min(wf);
    let shapes: Vec<(Shape, f64)> = (0..SHAPES)
        .map(|_| {
            let r0 = rng.random_range(0.0..hf);
            let c0 = rng.random_range(0.0..wf);
            let size = rng.random_range(0.08..0.3) * min_side;
            let shape = if rng.random::<bool>() {
                Shape::Disk { r0, c0, radius: size }
            } else {
                Shape::Rect {
                    r0,
                    c0,
                    half_h: size,
                    half_w: size * rng.random_range(0.4..1.6),
                    angle: rng.random_range(0.0..PI),
                }
            };
            (shape, rng.random_range(-1.0..1.0))
        })
        .collect();
    let base = rng.random_range(105.0..150.0);

    let pixels = Array2::from_shape_fn((height, width), |(r, c)| {
        let (r, c) = (r as f64, c as f64);
        let mut v = base + params.background * sum_waves(&background, r, c) / bg_norm;
        // later objects occlude earlier ones
        for (shape, level) in &shapes {
            let inside = 0.5 * (1.0 - (shape.distance(r, c) / params.edge_width).tanh());
            let target = base + params.objects * level;
            v += inside * (target - v);
        }
        v += params.texture * sum_waves(&texture, r, c) / tx_norm;
        v
    });
    let mut grain_rng = ChaCha8Rng::seed_from_u64(seed ^ GRAIN_STREAM);
    let pixels = pixels.mapv(|v| (v + params.grain * standard_normal(&mut grain_rng)).clamp(0.0, 255.0));
    GrayImage::new(pixels)
}

/// `count` scenes with consecutive seeds starting at `seed`.
pub fn scenes(count: usize, height: usize, width: usize, seed: u64) -> Result<Vec<GrayImage>> {
    (0..count).map(|i| scene(height, width, seed.wrapping_add(i as u64))).collect()
}
