//! Centered, unitary 2D FFTs.
//!
//! `fft2c(x) = fftshift(fft2(ifftshift(x))) / sqrt(n)` and its inverse. The
//! zero frequency of an `n`-point axis sits at index `n / 2`.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// Forward centered unitary transform.
pub fn fft2c(data: &Array2<Complex64>) -> Array2<Complex64> {
    transform(data, FftDirection::Forward)
}

/// Inverse centered unitary transform.
pub fn ifft2c(data: &Array2<Complex64>) -> Array2<Complex64> {
    transform(data, FftDirection::Inverse)
}

fn transform(data: &Array2<Complex64>, direction: FftDirection) -> Array2<Complex64> {
    let (rows, cols) = data.dim();
    let mut work = ifftshift(data);
    let mut planner = FftPlanner::<f64>::new();

    let row_fft = planner.plan_fft(cols, direction);
    for mut row in work.axis_iter_mut(Axis(0)) {
        // rows of a standard-layout array are contiguous
        row_fft.process(row.as_slice_mut().expect("contiguous row"));
    }

    let col_fft = planner.plan_fft(rows, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for (r, v) in column.iter_mut().enumerate() {
            *v = work[[r, c]];
        }
        col_fft.process(&mut column);
        for (r, v) in column.iter().enumerate() {
            work[[r, c]] = *v;
        }
    }

    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    work.mapv_inplace(|v| v * scale);
    fftshift(&work)
}

/// Moves index `j` to `(j + n/2) mod n` on both axes.
pub fn fftshift<T: Clone>(data: &Array2<T>) -> Array2<T> {
    let (rows, cols) = data.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        data[[(r + rows - rows / 2) % rows, (c + cols - cols / 2) % cols]].clone()
    })
}

/// Inverse of [`fftshift`].
pub fn ifftshift<T: Clone>(data: &Array2<T>) -> Array2<T> {
    let (rows, cols) = data.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        data[[(r + rows / 2) % rows, (c + cols / 2) % cols]].clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifts_match_matlab_convention() {
        let even = Array2::from_shape_vec((1, 4), vec![0, 1, 2, 3]).unwrap();
        assert_eq!(fftshift(&even).into_raw_vec_and_offset().0, vec![2, 3, 0, 1]);
        let odd = Array2::from_shape_vec((1, 5), vec![0, 1, 2, 3, 4]).unwrap();
        assert_eq!(fftshift(&odd).into_raw_vec_and_offset().0, vec![3, 4, 0, 1, 2]);
        assert_eq!(ifftshift(&fftshift(&odd)), odd);
    }

    #[test]
    fn dc_lands_at_center() {
        let data = Array2::from_elem((5, 6), Complex64::new(1.0, 0.0));
        let spec = fft2c(&data);
        assert!((spec[[2, 3]].re - (30f64).sqrt()).abs() < 1e-12);
        let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        assert!((total - 30.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip() {
        let data = Array2::from_shape_fn((7, 4), |(r, c)| Complex64::new(r as f64, (c * c) as f64));
        let back = ifft2c(&fft2c(&data));
        for (a, b) in data.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
