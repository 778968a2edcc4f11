//! Geometric and morphological line-image augmentation.

use rand::Rng;

use crate::error::{Error, Result};

use super::LineImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Morphology {
    None,
    Erode(usize),
    Dilate(usize),
}

/// One concrete augmentation. The affine part maps about the image centre:
/// scale, then shear (`x += shear * y`), then rotation, then translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub rotation_deg: f64,
    pub shear: f64,
    pub translate_x: f64,
    pub translate_y: f64,
    pub scale_x: f64,
    pub scale_y: f64,
    pub morphology: Morphology,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            rotation_deg: 0.0,
            shear: 0.0,
            translate_x: 0.0,
            translate_y: 0.0,
            scale_x: 1.0,
            scale_y: 1.0,
            morphology: Morphology::None,
        }
    }
}

/// Admissible magnitudes; sampling draws uniformly inside them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentRanges {
    pub max_rotation_deg: f64,
    pub max_shear: f64,
    pub max_translate: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    pub max_radius: usize,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        AugmentRanges {
            max_rotation_deg: 3.0,
            max_shear: 0.3,
            max_translate: 5.0,
            min_scale: 0.9,
            max_scale: 1.1,
            max_radius: 1,
        }
    }
}

impl AugmentRanges {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentParams {
        let sym = |rng: &mut R, m: f64| if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        let scale = |rng: &mut R| {
            if self.max_scale > self.min_scale {
                rng.gen_range(self.min_scale..=self.max_scale)
            } else {
                self.min_scale
            }
        };
        let radius = rng.gen_range(0..=self.max_radius);
        let morphology = match (radius, rng.gen_range(0..3)) {
            (0, _) | (_, 0) => Morphology::None,
            (r, 1) => Morphology::Erode(r),
            (r, _) => Morphology::Dilate(r),
        };
        AugmentParams {
            rotation_deg: sym(rng, self.max_rotation_deg),
            shear: sym(rng, self.max_shear),
            translate_x: sym(rng, self.max_translate),
            translate_y: sym(rng, self.max_translate),
            scale_x: scale(rng),
            scale_y: scale(rng),
            morphology,
        }
    }

    pub fn check(&self, p: &AugmentParams) -> Result<()> {
        let radius = match p.morphology {
            Morphology::None => 0,
            Morphology::Erode(r) | Morphology::Dilate(r) => r,
        };
        let eps = 1e-12;
        let ok = p.rotation_deg.abs() <= self.max_rotation_deg + eps
            && p.shear.abs() <= self.max_shear + eps
            && p.translate_x.abs() <= self.max_translate + eps
            && p.translate_y.abs() <= self.max_translate + eps
            && (self.min_scale - eps..=self.max_scale + eps).contains(&p.scale_x)
            && (self.min_scale - eps..=self.max_scale + eps).contains(&p.scale_y)
            && radius <= self.max_radius;
        if !ok {
            return Err(Error::Config(format!("augmentation parameters out of range: {p:?}")));
        }
        Ok(())
    }
}

/// Apply `p` to a preprocessed image (background zero). The output keeps the
/// input size; uncovered regions are background.
pub fn augment(img: &LineImage, p: &AugmentParams, ranges: &AugmentRanges) -> Result<LineImage> {
    ranges.check(p)?;
    let mut out = affine(img, p)?;
    out = match p.morphology {
        Morphology::None => out,
        Morphology::Erode(r) => morph(&out, r, f32::min, f32::INFINITY)?,
        Morphology::Dilate(r) => morph(&out, r, f32::max, f32::NEG_INFINITY)?,
    };
    Ok(out)
}

fn affine(img: &LineImage, p: &AugmentParams) -> Result<LineImage> {
    let identity = p.rotation_deg == 0.0
        && p.shear == 0.0
        && p.scale_x == 1.0
        && p.scale_y == 1.0
        && p.translate_x == 0.0
        && p.translate_y == 0.0;
    if identity {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = p.rotation_deg.to_radians().sin_cos();
    // forward linear map M = R * Sh * S
    let m = [
        [c * p.scale_x, (c * p.shear - s) * p.scale_y],
        [s * p.scale_x, (s * p.shear + c) * p.scale_y],
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
    let sample = |x: f64, y: f64| -> f32 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = ((x - x0) as f32, (y - y0) as f32);
        let px = |xi: f64, yi: f64| -> f32 {
            if xi < 0.0 || yi < 0.0 || xi >= w as f64 || yi >= h as f64 {
                0.0
            } else {
                img.get(xi as usize, yi as usize)
            }
        };
        let top = px(x0, y0) * (1.0 - fx) + px(x0 + 1.0, y0) * fx;
        let bot = px(x0, y0 + 1.0) * (1.0 - fx) + px(x0 + 1.0, y0 + 1.0) * fx;
        top * (1.0 - fy) + bot * fy
    };
    let mut out = LineImage::filled(w, h, 0.0)?;
    for x in 0..w {
        for y in 0..h {
            let dx = x as f64 - cx - p.translate_x;
            let dy = y as f64 - cy - p.translate_y;
            let sx = inv[0][0] * dx + inv[0][1] * dy + cx;
            let sy = inv[1][0] * dx + inv[1][1] * dy + cy;
            out.set(x, y, sample(sx, sy));
        }
    }
    Ok(out)
}

/// Square structuring element of the given radius; out-of-image neighbours
/// are ignored.
fn morph(img: &LineImage, radius: usize, op: fn(f32, f32) -> f32, init: f32) -> Result<LineImage> {
    if radius == 0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let mut out = LineImage::filled(w, h, 0.0)?;
    for x in 0..w {
        for y in 0..h {
            let mut acc = init;
            for nx in x.saturating_sub(radius)..=(x + radius).min(w - 1) {
                for ny in y.saturating_sub(radius)..=(y + radius).min(h - 1) {
                    acc = op(acc, img.get(nx, ny));
                }
            }
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn noisy(w: usize, h: usize, seed: u64) -> LineImage {
        let mut rng = stream(seed, Stream::Test, 0);
        LineImage::new(w, h, (0..w * h).map(|_| rng.gen::<f32>()).collect()).unwrap()
    }

    #[test]
    fn identity_is_bit_identical() {
        let ranges = AugmentRanges::default();
        for seed in 0..5 {
            let img = noisy(23 + seed as usize, 16, seed);
            assert_eq!(augment(&img, &AugmentParams::default(), &ranges).unwrap(), img);
        }
    }

    #[test]
    fn translation_inverse_pair() {
        let ranges = AugmentRanges::default();
        let img = noisy(40, 20, 7);
        let there = AugmentParams { translate_x: 5.0, ..Default::default() };
        let back = AugmentParams { translate_x: -5.0, ..Default::default() };
        let round = augment(&augment(&img, &there, &ranges).unwrap(), &back, &ranges).unwrap();
        for x in 5..35 {
            for y in 0..20 {
                assert_eq!(round.get(x, y), img.get(x, y));
            }
        }
    }

    #[test]
    fn dilation_of_single_pixel_is_square() {
        let mut img = LineImage::filled(9, 9, 0.0).unwrap();
        img.set(4, 4, 1.0);
        let p = AugmentParams { morphology: Morphology::Dilate(1), ..Default::default() };
        let out = augment(&img, &p, &AugmentRanges::default()).unwrap();
        for x in 0..9 {
            for y in 0..9 {
                let expected = if (3..=5).contains(&x) && (3..=5).contains(&y) { 1.0 } else { 0.0 };
                assert_eq!(out.get(x, y), expected, "({x},{y})");
            }
        }
        let eroded = augment(&out, &AugmentParams { morphology: Morphology::Erode(1), ..Default::default() }, &AugmentRanges::default()).unwrap();
        assert_eq!(eroded, img);
    }

    #[test]
    fn out_of_range_rejected() {
        let img = noisy(10, 10, 1);
        let p = AugmentParams { rotation_deg: 10.0, ..Default::default() };
        assert!(augment(&img, &p, &AugmentRanges::default()).is_err());
        let p = AugmentParams { morphology: Morphology::Dilate(2), ..Default::default() };
        assert!(augment(&img, &p, &AugmentRanges::default()).is_err());
    }

    #[test]
    fn sampled_params_are_in_range_and_keep_size() {
        let ranges = AugmentRanges::default();
        let mut rng = stream(2, Stream::Augment, 0);
        let img = noisy(50, 32, 3);
        for _ in 0..50 {
            let p = ranges.sample(&mut rng);
            let out = augment(&img, &p, &ranges).unwrap();
            assert_eq!((out.width(), out.height()), (50, 32));
            assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
