//! Power-of-two FFT and helpers for trigonometric series.
//!
//! Collocation grids are always chosen as powers of two, so a radix-2
//! transform is all we need; `dft_naive` is the reference used in tests.

use crate::real::Real;
use crate::Complex;

/// Smallest power of two >= `n`.
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// In-place radix-2 FFT. Forward uses kernel `e^{-2πi km/M}`, inverse
/// `e^{+2πi km/M}`; neither is scaled by `1/M`.
pub fn fft_in_place<F: Real>(buf: &mut [Complex<F>], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { F::one() } else { -F::one() };
    let mut len = 2;
    while len <= n {
        let ang = sign * F::tau() / F::of(len as f64);
        let wlen = Complex::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex::new(F::one(), F::zero());
            for k in 0..len / 2 {
                let u = buf[i + k];
                let v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w = w * wlen;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// O(M²) discrete Fourier transform, any length (test oracle).
pub fn dft_naive<F: Real>(input: &[Complex<F>], inverse: bool) -> Vec<Complex<F>> {
    let n = input.len();
    let sign = if inverse { F::one() } else { -F::one() };
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(F::zero(), F::zero());
            for (m, &x) in input.iter().enumerate() {
                let ang = sign * F::tau() * F::of((k * m % n) as f64) / F::of(n as f64);
                acc = acc + x * Complex::new(ang.cos(), ang.sin());
            }
            acc
        })
        .collect()
}

/// Fourier coefficients `c_k`, k = 0..=n_coeffs, of real samples taken at
/// `θ_m = 2πm/M`: `c_k = (1/M) Σ_m x_m e^{-ikθ_m}`. `M` must be a power of
/// two and `n_coeffs < M/2`.
pub fn coeffs_from_samples<F: Real>(samples: &[F], n_coeffs: usize) -> Vec<Complex<F>> {
    let m = samples.len();
    assert!(n_coeffs < m / 2);
    let mut buf: Vec<Complex<F>> = samples
        .iter()
        .map(|&x| Complex::new(x, F::zero()))
        .collect();
    fft_in_place(&mut buf, false);
    let scale = F::one() / F::of(m as f64);
    buf.truncate(n_coeffs + 1);
    buf.iter().map(|&z| z * scale).collect()
}

/// Evaluate the real series `x(θ_m) = c_0 + Σ_{k=1..} 2 Re(c_k e^{ikθ_m})` on
/// the uniform grid `θ_m = 2πm/M` via an inverse FFT.
pub fn samples_from_coeffs<F: Real>(coeffs: &[Complex<F>], m: usize) -> Vec<F> {
    assert!(m.is_power_of_two());
    assert!(coeffs.len() <= m / 2, "grid too coarse for the series");
    let mut buf = vec![Complex::new(F::zero(), F::zero()); m];
    buf[0] = Complex::new(coeffs[0].re, F::zero());
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        buf[k] = c;
        buf[m - k] = c.conj();
    }
    fft_in_place(&mut buf, true);
    buf.iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_naive_dft() {
        let input: Vec<Complex<f64>> = (0..64)
            .map(|i| {
                let t = i as f64;
                Complex::new((0.3 * t).sin() + 0.1 * t, (0.7 * t).cos())
            })
            .collect();
        let mut fast = input.clone();
        fft_in_place(&mut fast, false);
        let slow = dft_naive(&input, false);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9);
        }
        // round trip
        fft_in_place(&mut fast, true);
        for (a, b) in fast.iter().zip(&input) {
            assert!((a / Complex::new(64.0, 0.0) - b).norm() < 1e-12);
        }
    }

    #[test]
    fn coeffs_round_trip() {
        // x(θ) = 1 + 2cos(θ) - 0.5 sin(3θ)
        let coeffs = vec![
            Complex::new(1.0, 0.0),
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.25),
        ];
        let samples = samples_from_coeffs(&coeffs, 16);
        for (m, &s) in samples.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * m as f64 / 16.0;
            let expect = 1.0 + 2.0 * th.cos() - 0.5 * (3.0 * th).sin();
            assert!((s - expect).abs() < 1e-12);
        }
        let back = coeffs_from_samples(&samples, 3);
        for (a, b) in back.iter().zip(&coeffs) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn series_round_trip(res in proptest::collection::vec(-1.0f64..1.0, 5), ims in proptest::collection::vec(-1.0f64..1.0, 5)) {
            let mut coeffs: Vec<Complex<f64>> = res.iter().zip(&ims).map(|(&r, &i)| Complex::new(r, i)).collect();
            coeffs[0].im = 0.0;
            let samples = samples_from_coeffs(&coeffs, 32);
            let back = coeffs_from_samples(&samples, 4);
            for (a, b) in back.iter().zip(&coeffs) {
                proptest::prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
