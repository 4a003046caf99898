use curvemark::attacks::{apply_attack, AttackKind, AttackSpec};
use curvemark::cli::PackedMask;
use curvemark::features::{decode_features, encode_features};
use curvemark::imaging::{encode_pgm, parse_pgm};
use curvemark::{
    fdct_forward, load_image, normalize, save_image, ssim, Decision, FeatureMatrix, Geometry, GrayImage,
};
use ndarray::Array2;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(lo..hi, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn image(n: usize) -> impl Strategy<Value = GrayImage> {
    matrix(n, n, 0.0, 1.0).prop_map(|m| GrayImage::new(m).unwrap())
}

fn attack_kind() -> impl Strategy<Value = AttackKind> {
    prop_oneof![
        Just(AttackKind::None),
        (1u8..=100).prop_map(|quality| AttackKind::Jpeg { quality }),
        (-0.1f64..0.1, 0.0f64..0.01).prop_map(|(mean, variance)| AttackKind::GaussianNoise { mean, variance }),
        (0.0f64..0.5).prop_map(|density| AttackKind::SaltPepper { density }),
        (0.0f64..0.01).prop_map(|variance| AttackKind::Speckle { variance }),
        (1usize..4).prop_map(|h| AttackKind::Median { side: 2 * h + 1 }),
        (1usize..4).prop_map(|h| AttackKind::Mean { side: 2 * h + 1 }),
        (1usize..4, 0.1f64..2.0).prop_map(|(h, sigma)| AttackKind::GaussianLpf { side: 2 * h + 1, sigma }),
        Just(AttackKind::HistEq),
        Just(AttackKind::Crop { rect: None }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ssim_is_symmetric_and_bounded(a in matrix(12, 12, 0.0, 1.0), b in matrix(12, 12, 0.0, 1.0), w in 2usize..9) {
        let ab = ssim(&a, &b, w).unwrap();
        let ba = ssim(&b, &a, w).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert_eq!(ssim(&a, &a, w).unwrap(), 1.0);
    }

    #[test]
    fn npy_save_load_is_exact(img in image(9)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.npy");
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        prop_assert_eq!(back.pixels(), img.pixels());
        save_image(&back, dir.path().join("y.npy")).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("y.npy")).unwrap());
    }

    #[test]
    fn pgm_round_trip_is_idempotent(img in image(7)) {
        let once = parse_pgm(&encode_pgm(&img)).unwrap();
        let quantized = img.quantized();
        prop_assert_eq!(once.pixels(), quantized.pixels());
        prop_assert_eq!(encode_pgm(&once), encode_pgm(&img));
    }

    #[test]
    fn feature_file_round_trip(m in matrix(5, 8, -1.0, 1.0), scale in 0.1f64..100.0) {
        let f = FeatureMatrix::with_scale(m, scale).unwrap();
        prop_assert_eq!(decode_features(&encode_features(&f)).unwrap(), f);
    }

    #[test]
    fn normalize_is_idempotent(m in matrix(6, 10, -50.0, 50.0)) {
        let once = normalize(&FeatureMatrix::new(m).unwrap()).unwrap();
        prop_assert!(once.max_abs() <= 1.0);
        prop_assert_eq!(normalize(&once).unwrap(), once);
    }

    #[test]
    fn spec_display_parses_back(kind in attack_kind(), seed in 0u64..1000) {
        let spec = AttackSpec::new(kind).with_seed(if kind.is_stochastic() { seed } else { 0 });
        let text = spec.to_string();
        let back: AttackSpec = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn attacks_are_reproducible_and_in_range(img in image(16), kind in attack_kind(), seed in 0u64..1000) {
        let spec = AttackSpec::new(kind).with_seed(seed);
        let a = apply_attack(&img, &spec).unwrap();
        let b = apply_attack(&img, &spec).unwrap();
        prop_assert_eq!(a.pixels(), b.pixels());
        prop_assert!(a.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(a.dim(), img.dim());
    }

    #[test]
    fn decision_is_monotone(s in -1.0f64..1.0, t in -1.0f64..1.0, tau in 0.0f64..1.0) {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        if Decision::from_score(lo, tau) == Decision::Authenticate {
            prop_assert_eq!(Decision::from_score(hi, tau), Decision::Authenticate);
        }
        prop_assert_eq!(Decision::from_score(tau, tau), Decision::Unauthenticate);
    }

    #[test]
    fn packed_masks_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..200), cols in 1usize..20) {
        let rows = bits.len() / cols;
        prop_assume!(rows > 0);
        let mask = Array2::from_shape_vec((rows, cols), bits[..rows * cols].to_vec()).unwrap();
        prop_assert_eq!(PackedMask::pack(&mask).unpack().unwrap(), mask);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn forward_transform_is_linear(x in matrix(64, 64, -1.0, 1.0), y in matrix(64, 64, -1.0, 1.0), a in -3.0f64..3.0) {
        let g = Geometry::with_defaults(64, 64).unwrap();
        let combo = &x * a + &y;
        let px = fdct_forward(&x, g).unwrap();
        let py = fdct_forward(&y, g).unwrap();
        let pc = fdct_forward(&combo, g).unwrap();
        for ((cx, cy), cc) in px.cells().iter().flatten().zip(py.cells().iter().flatten()).zip(pc.cells().iter().flatten()) {
            for ((u, v), w) in cx.iter().zip(cy).zip(cc) {
                prop_assert!((u * a + v - w).norm() < 1e-10);
            }
        }
    }
}
