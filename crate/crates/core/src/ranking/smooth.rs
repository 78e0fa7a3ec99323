use super::RankingError;
use crate::model::WeightSeries;

/// Unit-mass Gaussian taps centred on the middle one. An even
/// `kernel_size` rounds down to the next odd tap count so the kernel stays
/// symmetric.
pub fn gaussian_kernel(sigma: f64, kernel_size: usize) -> Result<Vec<f64>, RankingError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(RankingError::BadSigma(sigma));
    }
    if kernel_size == 0 {
        return Err(RankingError::BadKernel);
    }
    let radius = (kernel_size - 1) / 2;
    let taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mass: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / mass).collect())
}

/// Convolves with a truncated Gaussian. Near the edges only in-range taps
/// are used and renormalized, so no padding values are invented. Output is
/// clamped to `[0, 1]`.
pub fn gaussian_smooth(
    w: &[f64],
    sigma: f64,
    kernel_size: usize,
) -> Result<WeightSeries, RankingError> {
    let kernel = gaussian_kernel(sigma, kernel_size)?;
    let radius = kernel.len() / 2;
    let n = w.len();
    // summing offsets from w[i] keeps a constant run exactly constant
    let out = (0..n).map(|i| {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n.saturating_sub(1));
        let (mut acc, mut mass) = (0.0, 0.0);
        for (j, &v) in w.iter().enumerate().take(hi + 1).skip(lo) {
            let k = kernel[j + radius - i];
            acc += k * (v - w[i]);
            mass += k;
        }
        w[i] + acc / mass
    });
    Ok(WeightSeries::clamped(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_mass_and_shape() {
        for (sigma, size) in [(5.0, 200), (2.5, 40), (10.0, 7), (1.0, 1), (3.0, 8)] {
            let k = gaussian_kernel(sigma, size).unwrap();
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(k.len() % 2, 1);
            let r = k.len() / 2;
            for i in 0..r {
                assert!((k[i] - k[k.len() - 1 - i]).abs() < 1e-15);
                assert!(k[i] <= k[i + 1]);
            }
        }
        assert_eq!(gaussian_kernel(5.0, 8).unwrap().len(), 7);
        assert!(gaussian_kernel(0.0, 5).is_err());
        assert!(gaussian_kernel(f64::NAN, 5).is_err());
        assert!(gaussian_kernel(1.0, 0).is_err());
    }

    #[test]
    fn constant_preserved() {
        for c in [0.0, 0.37, 1.0] {
            let s = gaussian_smooth(&[c; 50], 5.0, 50).unwrap();
            assert!(s.values().iter().all(|&v| v == c || (v - c).abs() < 1e-15));
        }
    }

    #[test]
    fn size_one_is_identity() {
        let w = [0.1, 0.9, 0.4];
        assert_eq!(gaussian_smooth(&w, 5.0, 1).unwrap().values(), &w);
    }
}
