//! Synthetic instances, image patches and data partitioning.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; Gaussian
//! draws use the ziggurat sampler of `rand_distr::StandardNormal`.

use ndarray::{s, Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Generated factorization `S = D*X* + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub data: Array2<f64>,
    pub dictionary: Array2<f64>,
    pub codes: Array2<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

/// Unit-norm Gaussian atoms, codes with `round(sparsity·K)` (at least one)
/// Gaussian nonzeros per column at uniformly drawn rows, additive Gaussian
/// noise of standard deviation `noise_sigma`. Draw order: atoms, codes,
/// noise.
pub fn synth_instance(
    dim: usize,
    atoms: usize,
    columns: usize,
    sparsity: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SynthInstance> {
    if dim == 0 || atoms == 0 || columns == 0 {
        return Err(Error::InvalidParameter("synthetic dimensions must be positive".into()));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::InvalidParameter(format!("sparsity {sparsity} outside (0, 1]")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level {noise_sigma} must be ≥ 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = gaussian(&mut rng, dim, atoms);
    for mut col in d.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let nnz = ((sparsity * atoms as f64).round() as usize).clamp(1, atoms);
    let mut x = Array2::zeros((atoms, columns));
    for n in 0..columns {
        for k in sample(&mut rng, atoms, nnz).into_iter() {
            x[[k, n]] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut data = d.dot(&x);
    if noise_sigma > 0.0 {
        data.scaled_add(noise_sigma, &gaussian(&mut rng, dim, columns));
    }
    Ok(SynthInstance {
        data,
        dictionary: d,
        codes: x,
    })
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma` to `image`.
pub fn add_noise(image: &Array2<f64>, sigma: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = image.dim();
    image + &(gaussian(&mut rng, h, w) * sigma)
}

/// Piecewise-constant test image in `[0, 1]`: a background level plus
/// overlapping axis-aligned rectangles, with the brightest region at 1.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> Result<Array2<f64>> {
    if height < 4 || width < 4 {
        return Err(Error::InvalidParameter("synthetic image must be at least 4×4".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Array2::from_elem((height, width), 0.2);
    let rects = 6;
    for k in 0..rects {
        let r0 = rng.random_range(0..height - 2);
        let c0 = rng.random_range(0..width - 2);
        let r1 = rng.random_range(r0 + 2..=height);
        let c1 = rng.random_range(c0 + 2..=width);
        let level = if k == rects - 1 { 1.0 } else { rng.random_range(0.0..0.9) };
        img.slice_mut(s![r0..r1, c0..c1]).fill(level);
    }
    Ok(img)
}

/// Sliding `s×s` windows of `image` as columns: positions in row-major
/// order, each window vectorized column by column.
pub fn extract_patches(image: &Array2<f64>, s: usize) -> Result<Array2<f64>> {
    let (h, w) = image.dim();
    if s == 0 || s > h || s > w {
        return Err(Error::InvalidParameter(format!("patch side {s} does not fit a {h}×{w} image")));
    }
    let (nr, nc) = (h - s + 1, w - s + 1);
    let mut out = Array2::zeros((s * s, nr * nc));
    for r in 0..nr {
        for c in 0..nc {
            let n = r * nc + c;
            for dc in 0..s {
                for dr in 0..s {
                    out[[dc * s + dr, n]] = image[[r + dr, c + dc]];
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`extract_patches`]: each pixel is the average of every
/// window value covering it.
pub fn reconstruct_from_patches(patches: &Array2<f64>, height: usize, width: usize, s: usize) -> Result<Array2<f64>> {
    if s == 0 || s > height || s > width {
        return Err(Error::InvalidParameter(format!("patch side {s} does not fit a {height}×{width} image")));
    }
    let (nr, nc) = (height - s + 1, width - s + 1);
    if patches.dim() != (s * s, nr * nc) {
        return Err(Error::Shape(format!(
            "patch matrix {:?}, expected {:?}",
            patches.dim(),
            (s * s, nr * nc)
        )));
    }
    let mut sum = Array2::<f64>::zeros((height, width));
    let mut count = Array2::<f64>::zeros((height, width));
    for r in 0..nr {
        for c in 0..nc {
            let n = r * nc + c;
            for dc in 0..s {
                for dr in 0..s {
                    sum[[r + dr, c + dc]] += patches[[dc * s + dr, n]];
                    count[[r + dr, c + dc]] += 1.0;
                }
            }
        }
    }
    Ok(sum / count)
}

/// Splits the columns of `data` into `agents` contiguous blocks of equal
/// width `⌈N/I⌉`, padding with zero columns at the end when needed.
pub fn partition_data(data: &Array2<f64>, agents: usize) -> Result<Vec<Array2<f64>>> {
    if agents == 0 {
        return Err(Error::InvalidParameter("need at least one agent".into()));
    }
    let (m, n) = data.dim();
    let width = n.div_ceil(agents);
    let mut padded = Array2::zeros((m, width * agents));
    padded.slice_mut(s![.., ..n]).assign(data);
    Ok(padded
        .axis_chunks_iter(Axis(1), width)
        .map(|c| c.to_owned())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::concatenate;
    use proptest::prelude::*;

    #[test]
    fn patch_counts() {
        let img = Array2::from_shape_fn((10, 10), |(r, c)| (r * 10 + c) as f64);
        let p = extract_patches(&img, 8).unwrap();
        assert_eq!(p.dim(), (64, 9));
        // second position is shifted one column right
        assert_eq!(p[[0, 1]], img[[0, 1]]);
        // column-major inside the window
        assert_eq!(p[[1, 0]], img[[1, 0]]);
        assert_eq!(p[[8, 0]], img[[0, 1]]);
        assert!(extract_patches(&img, 11).is_err());
    }

    #[test]
    fn large_image_patch_count() {
        let img = Array2::zeros((512, 512));
        assert_eq!(extract_patches(&img, 8).unwrap().ncols(), 255_025);
    }

    #[test]
    fn constant_image_gives_identical_columns() {
        let p = extract_patches(&Array2::from_elem((12, 9), 0.7), 4).unwrap();
        assert!(p.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn reconstruction_inverts_extraction() {
        let img = synthetic_image(16, 20, 3).unwrap();
        let p = extract_patches(&img, 5).unwrap();
        let back = reconstruct_from_patches(&p, 16, 20, 5).unwrap();
        assert!(crate::linalg::max_abs_diff(&img, &back) < 1e-14);
    }

    #[test]
    fn partition_examples() {
        let data = Array2::from_shape_fn((2, 10), |(r, c)| (r * 10 + c + 1) as f64);
        let parts = partition_data(&data, 4).unwrap();
        assert_eq!(parts.len(), 4);
        assert!(parts.iter().all(|p| p.ncols() == 3));
        assert!(parts[3].column(2).iter().all(|&v| v == 0.0));
        assert!(parts[3].column(1).iter().all(|&v| v == 0.0));
        let parts = partition_data(&Array2::ones((2, 12)), 4).unwrap();
        assert!(parts.iter().all(|p| p.ncols() == 3));
        let parts = partition_data(&Array2::zeros((64, 255_150)), 150).unwrap();
        assert!(parts.iter().all(|p| p.ncols() == 1701));
    }

    proptest! {
        #[test]
        fn partition_round_trips(m in 1usize..4, n in 1usize..40, agents in 1usize..9) {
            let data = Array2::from_shape_fn((m, n), |(r, c)| (r * 100 + c) as f64 + 0.5);
            let parts = partition_data(&data, agents).unwrap();
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            let joined = concatenate(Axis(1), &views).unwrap();
            prop_assert_eq!(joined.slice(s![.., ..n]).to_owned(), data);
            prop_assert!(joined.slice(s![.., n..]).iter().all(|&v| v == 0.0));
        }

        #[test]
        fn patch_count_formula(h in 1usize..30, w in 1usize..30, s in 1usize..10) {
            let img = Array2::zeros((h, w));
            match extract_patches(&img, s) {
                Ok(p) => prop_assert_eq!(p.dim(), (s * s, (h - s + 1) * (w - s + 1))),
                Err(_) => prop_assert!(s > h || s > w),
            }
        }
    }

    #[test]
    fn synth_noise_free_is_exact_product() {
        let inst = synth_instance(5, 4, 30, 1.0, 0.0, 9).unwrap();
        assert_eq!(inst.data, inst.dictionary.dot(&inst.codes));
        for col in inst.dictionary.columns() {
            assert!((col.dot(&col) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_is_deterministic_and_sparse() {
        let a = synth_instance(6, 10, 50, 0.3, 0.1, 4).unwrap();
        assert_eq!(a, synth_instance(6, 10, 50, 0.3, 0.1, 4).unwrap());
        for col in a.codes.columns() {
            assert_eq!(col.iter().filter(|&&v| v != 0.0).count(), 3);
        }
    }

    #[test]
    fn synth_noise_level() {
        let sigma = 0.3;
        let inst = synth_instance(20, 8, 1000, 0.25, sigma, 5).unwrap();
        let resid = &inst.data - &inst.dictionary.dot(&inst.codes);
        let n = resid.len() as f64;
        let mean = resid.sum() / n;
        let std = (resid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - sigma).abs() < 0.05 * sigma, "std {std}");
    }

    #[test]
    fn synth_rejects_bad_parameters() {
        assert!(synth_instance(0, 1, 1, 0.5, 0.0, 0).is_err());
        assert!(synth_instance(1, 1, 1, 0.0, 0.0, 0).is_err());
        assert!(synth_instance(1, 1, 1, 1.5, 0.0, 0).is_err());
    }

    #[test]
    fn synthetic_image_range() {
        let img = synthetic_image(64, 64, 1).unwrap();
        assert!(img.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(img.iter().cloned().fold(0.0, f64::max), 1.0);
        assert_eq!(img, synthetic_image(64, 64, 1).unwrap());
    }
}
