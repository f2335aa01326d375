use log::warn;

use super::color::{color_stats, ColorStats, MIN_STATS_PIXELS};
use crate::asset_io::{Mask, TextureImage};
use crate::error::{Error, Result};

/// 1-D taps of the 5×5 Gaussian (σ = 1); normalization happens per pixel.
pub const BLUR_TAPS: [f64; 5] = [
    0.135_335_283_236_612_7, // exp(-2)
    0.606_530_659_712_633_4, // exp(-1/2)
    1.0,
    0.606_530_659_712_633_4,
    0.135_335_283_236_612_7,
];

/// Masked color statistics of each pyramid level, finest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidFeatures {
    pub levels: Vec<ColorStats>,
}

/// One pyramid level with what the backward pass needs.
#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
    pub mask: Vec<bool>,
}

/// Masked, normalized blur: each output is the kernel-weighted mean of the
/// masked inputs in its window. Returns the blurred image and the per-pixel
/// normalizer (zero where no masked input is in reach; the output there is 0).
pub(crate) fn masked_blur(pixels: &[[f64; 3]], mask: &[bool], w: usize, h: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    // weighted values in channels 0..3, weight in channel 3
    let src: Vec<[f64; 4]> = pixels
        .iter()
        .zip(mask)
        .map(|(p, &m)| if m { [p[0], p[1], p[2], 1.0] } else { [0.0; 4] })
        .collect();
    let summed = separable(&src, w, h);
    let mut out = Vec::with_capacity(w * h);
    let mut norm = Vec::with_capacity(w * h);
    for s in summed {
        if s[3] > 0.0 {
            out.push([s[0] / s[3], s[1] / s[3], s[2] / s[3]]);
        } else {
            out.push([0.0; 3]);
        }
        norm.push(s[3]);
    }
    (out, norm)
}

/// Adjoint of [`masked_blur`] for fixed mask: maps a gradient on the blurred
/// image to a gradient on the input pixels.
pub(crate) fn masked_blur_adjoint(grad: &[[f64; 3]], norm: &[f64], mask: &[bool], w: usize, h: usize) -> Vec<[f64; 3]> {
    let scaled: Vec<[f64; 4]> = grad
        .iter()
        .zip(norm)
        .map(|(g, &n)| if n > 0.0 { [g[0] / n, g[1] / n, g[2] / n, 0.0] } else { [0.0; 4] })
        .collect();
    // the kernel is symmetric, so its transpose is itself
    separable(&scaled, w, h)
        .into_iter()
        .zip(mask)
        .map(|(s, &m)| if m { [s[0], s[1], s[2]] } else { [0.0; 3] })
        .collect()
}

fn separable(src: &[[f64; 4]], w: usize, h: usize) -> Vec<[f64; 4]> {
    let mut tmp = vec![[0.0; 4]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 4];
            for (t, k) in BLUR_TAPS.iter().enumerate() {
                let sx = x as isize + t as isize - 2;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                let s = src[y * w + sx as usize];
                for c in 0..4 {
                    acc[c] += k * s[c];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![[0.0; 4]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 4];
            for (t, k) in BLUR_TAPS.iter().enumerate() {
                let sy = y as isize + t as isize - 2;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                let s = tmp[sy as usize * w + x];
                for c in 0..4 {
                    acc[c] += k * s[c];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Stride-2 subsampling of a blurred level; a coarse pixel is masked when at
/// least half of its 2×2 source block is.
pub(crate) fn downsample(blurred: &[[f64; 3]], mask: &[bool], w: usize, h: usize) -> Level {
    let (cw, ch) = (w / 2, h / 2);
    let mut pixels = Vec::with_capacity(cw * ch);
    let mut out_mask = Vec::with_capacity(cw * ch);
    for y in 0..ch {
        for x in 0..cw {
            pixels.push(blurred[2 * y * w + 2 * x]);
            let covered = [(0, 0), (1, 0), (0, 1), (1, 1)]
                .iter()
                .filter(|(dx, dy)| mask[(2 * y + dy) * w + 2 * x + dx])
                .count();
            out_mask.push(2 * covered >= 4);
        }
    }
    Level {
        width: cw,
        height: ch,
        pixels,
        mask: out_mask,
    }
}

/// Levels `0..levels` (level 0 is the input itself), stopping early when a
/// level would have fewer than [`MIN_STATS_PIXELS`] masked pixels. The
/// second value holds the blur normalizer of each level that has a successor.
pub(crate) fn build_levels(image: &TextureImage, mask: &Mask, levels: usize) -> Result<(Vec<Level>, Vec<Vec<f64>>)> {
    if levels == 0 {
        return Err(Error::invalid("pyramid needs at least one level"));
    }
    if (image.width, image.height) != (mask.width, mask.height) {
        return Err(Error::invalid("pyramid image and mask sizes differ"));
    }
    let mut out = vec![Level {
        width: image.width,
        height: image.height,
        pixels: image.pixels.clone(),
        mask: mask.bits.clone(),
    }];
    let mut norms = Vec::new();
    while out.len() < levels {
        let prev = out.last().expect("level 0 exists");
        let (blurred, norm) = masked_blur(&prev.pixels, &prev.mask, prev.width, prev.height);
        let next = downsample(&blurred, &prev.mask, prev.width, prev.height);
        let count = next.mask.iter().filter(|&&m| m).count();
        if count < MIN_STATS_PIXELS {
            warn!(
                "pyramid truncated to {} of {levels} levels: mask too small at level {}",
                out.len(),
                out.len()
            );
            break;
        }
        norms.push(norm);
        out.push(next);
    }
    Ok((out, norms))
}

/// Masked color statistics per level: level 0 is the input, each further
/// level is the masked 5×5 Gaussian blur of the previous one subsampled by 2.
pub fn pyramid_features(rgb: &TextureImage, mask: &Mask, levels: usize) -> Result<PyramidFeatures> {
    let (lv, _) = build_levels(rgb, mask, levels)?;
    let levels = lv
        .iter()
        .map(|l| color_stats(&l.pixels, &l.mask))
        .collect::<Result<Vec<_>>>()?;
    Ok(PyramidFeatures { levels })
}
