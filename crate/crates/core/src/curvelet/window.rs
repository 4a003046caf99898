//! Smooth Meyer-type transition windows shared by the radial and angular
//! partitions.

use ndarray::Array2;

/// Returns `(rising, falling)` for a coordinate `x`. Both are flat outside
/// `(0, 1)` and satisfy `rising² + falling² = 1` everywhere.
pub fn transition(x: f64) -> (f64, f64) {
    let x = if x.abs() < f64::EPSILON { 0.0 } else { x };
    let falling = if x <= 0.0 {
        1.0
    } else if x < 1.0 {
        (1.0 - 1.0 / (1.0 - (1.0 - 1.0 / x).exp())).exp()
    } else {
        0.0
    };
    let rising = if x >= 1.0 {
        1.0
    } else if x > 0.0 {
        (1.0 - 1.0 / (1.0 - (1.0 - 1.0 / (1.0 - x)).exp())).exp()
    } else {
        0.0
    };
    let norm = (rising * rising + falling * falling).sqrt();
    (rising / norm, falling / norm)
}

/// One-dimensional lowpass profile of length `2*floor(2m) + 1`: a flat top
/// of width `2*floor(m) + 1` with smooth shoulders.
fn lowpass_profile(m: f64) -> Vec<f64> {
    let outer = (2.0 * m).floor() as i64;
    let inner = m.floor() as i64;
    let taper = outer - inner - 1;
    let coords: Vec<f64> = if taper > 0 {
        (0..=taper).map(|k| k as f64 / taper as f64).collect()
    } else {
        vec![0.0]
    };
    let (rising, falling): (Vec<f64>, Vec<f64>) = coords.iter().map(|&x| transition(x)).unzip();
    let mut profile = rising;
    profile.extend(std::iter::repeat_n(1.0, (2 * inner + 1) as usize));
    profile.extend(falling);
    debug_assert_eq!(profile.len() as i64, 2 * outer + 1);
    profile
}

/// Separable lowpass and the complementary hipass `sqrt(1 - lowpass²)` on a
/// `(2*floor(2*m1)+1) x (2*floor(2*m2)+1)` grid.
pub fn radial_pair(m1: f64, m2: f64) -> (Array2<f64>, Array2<f64>) {
    let p1 = lowpass_profile(m1);
    let p2 = lowpass_profile(m2);
    let low = Array2::from_shape_fn((p1.len(), p2.len()), |(r, c)| p1[r] * p2[c]);
    let high = low.mapv(|v| (1.0 - v * v).max(0.0).sqrt());
    (low, high)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_is_power_complementary() {
        for k in -10..=30 {
            let x = k as f64 / 20.0;
            let (l, r) = transition(x);
            assert!((l * l + r * r - 1.0).abs() < 1e-14, "x = {x}");
        }
        assert_eq!(transition(-0.5), (0.0, 1.0));
        assert_eq!(transition(1.5), (1.0, 0.0));
        let (l, r) = transition(0.5);
        assert!((l - r).abs() < 1e-15);
    }

    #[test]
    fn profile_lengths() {
        assert_eq!(lowpass_profile(512.0 / 6.0).len(), 341);
        assert_eq!(lowpass_profile(16.0 / 3.0).len(), 21);
        let p = lowpass_profile(42.0 + 2.0 / 3.0);
        assert_eq!(p.len(), 171);
        assert_eq!(p[85], 1.0);
        assert_eq!(p[0], 0.0);
    }
}
