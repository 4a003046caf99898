mod common;

use std::collections::VecDeque;

use curvemark::{detect_edges, psnr, EdgeMap, GrayImage, IsefParams, Watermarker};
use ndarray::Array2;

/// Connected components of cells equal to `value`.
fn components(bits: &Array2<u8>, value: u8, eight: bool) -> usize {
    let (h, w) = bits.dim();
    let mut seen = Array2::from_elem((h, w), false);
    let mut count = 0;
    for start in bits.indexed_iter().filter(|(_, &v)| v == value).map(|(p, _)| p) {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some((r, c)) = queue.pop_front() {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let p = (nr as usize, nc as usize);
                    if bits[p] == value && !seen[p] {
                        seen[p] = true;
                        queue.push_back(p);
                    }
                }
            }
        }
    }
    count
}

#[test]
fn nested_rectangles_give_two_closed_contours() {
    let img = GrayImage::from_fn(96, 96, |(r, c)| {
        let inside = |m: usize| (m..96 - m).contains(&r) && (m..96 - m).contains(&c);
        if inside(36) {
            0.8
        } else if inside(16) {
            0.5
        } else {
            0.2
        }
    })
    .unwrap();
    let edges: EdgeMap = detect_edges(&img, &IsefParams::default()).unwrap();
    assert_eq!(components(edges.bits(), 1, true), 2);
    // two closed curves split the background into three regions
    assert_eq!(components(edges.bits(), 0, false), 3);
}

#[test]
fn embedding_residual_scales_with_gain() {
    let host = common::natural_host(512, 31);
    let wm = Watermarker::for_dims(512, 512).unwrap();
    let bundle = common::default_bundle(7, 0.01);
    let (m1, r1) = wm.embed(&host, &bundle).unwrap();
    let (m2, _) = wm.embed(&host, &bundle.with_gain(0.02).unwrap()).unwrap();
    assert_eq!(r1.clamped_pixels, 0);
    let d1 = m1.pixels() - host.pixels();
    let d2 = m2.pixels() - host.pixels();
    let worst = d2.iter().zip(&d1).map(|(a, b)| (a - 2.0 * b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
    assert!(psnr(&host, &m1).unwrap() > psnr(&host, &m2).unwrap());
}

#[test]
fn extraction_without_a_mark_is_zero() {
    let host = common::natural_host(512, 32);
    let wm = Watermarker::for_dims(512, 512).unwrap();
    let (_, record) = wm.embed(&host, &common::default_bundle(8, 0.01)).unwrap();
    for f in wm.extract(&host, &host, &record).unwrap() {
        assert!(f.values().iter().all(|&v| v == 0.0));
    }
}
