//! Statistical checks of the patch samplers.

use std::collections::HashSet;

use gsp_count::synth::{sample_object_centered_patch, sample_random_patch, AnnotatedImage, Dot, LabelRule};
use gsp_count::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of integer corners `x0 in 0..=len-size` with `x0 <= c < x0 + size`.
fn covering_corners(c: f64, len: usize, size: usize) -> usize {
    let hi = (c.floor() as i64).min((len - size) as i64);
    let lo = (c.floor() as i64 - size as i64 + 1).max(0);
    (hi - lo + 1).max(0) as usize
}

#[test]
fn random_patch_mean_count_matches_inclusion_probability() {
    let (w, h, size) = (90, 70, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dots: Vec<Dot> = (0..10)
        .map(|_| Dot { x: rng.random_range(0.0..w as f64), y: rng.random_range(0.0..h as f64) })
        .collect();
    let positions = ((w - size + 1) * (h - size + 1)) as f64;
    let expected: f64 = dots
        .iter()
        .map(|d| (covering_corners(d.x, w, size) * covering_corners(d.y, h, size)) as f64 / positions)
        .sum();
    let img = AnnotatedImage::new("mc", Tensor::zeros(&[1, h, w]), dots, None).unwrap();

    let n = 1000;
    let counts: Vec<f64> = (0..n)
        .map(|_| sample_random_patch(&img, size, LabelRule::Dots, &mut rng).unwrap().count as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean}, expected {expected}, se {se}");
}

#[test]
fn full_size_patch_is_the_whole_image() {
    let dots = vec![Dot { x: 1.5, y: 2.5 }, Dot { x: 19.0, y: 10.0 }];
    let img = AnnotatedImage::new("f", Tensor::full(&[1, 20, 20], 0.5), dots, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = sample_random_patch(&img, 20, LabelRule::Dots, &mut rng).unwrap();
    assert_eq!((p.rect, p.count), (img.full_rect(), 2));
    assert_eq!(&p.pixels, img.pixels());
    let empty = AnnotatedImage::new("e", Tensor::zeros(&[1, 20, 20]), vec![], None).unwrap();
    for _ in 0..50 {
        assert_eq!(sample_random_patch(&empty, 7, LabelRule::Dots, &mut rng).unwrap().count, 0);
    }
}

#[test]
fn object_centered_draws_visit_every_dot() {
    // Dots on a 30 px grid with 8 px patches: each patch contains exactly the dot it was centered on.
    let dots: Vec<Dot> = (0..4)
        .flat_map(|i| (0..3).map(move |j| Dot { x: 15.0 + 30.0 * i as f64, y: 15.0 + 30.0 * j as f64 }))
        .collect();
    let n = dots.len();
    let img = AnnotatedImage::new("cc", Tensor::zeros(&[1, 90, 120]), dots.clone(), None).unwrap();
    let draws = (10.0 * n as f64 * (n as f64).ln()).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = HashSet::new();
    for _ in 0..draws {
        let p = sample_object_centered_patch(&img, 8, LabelRule::Dots, &mut rng).unwrap();
        assert_eq!(p.count, 1);
        let hit: Vec<usize> = (0..n).filter(|&i| p.rect.contains_point(dots[i].x, dots[i].y)).collect();
        assert_eq!(hit.len(), 1);
        seen.insert(hit[0]);
    }
    assert_eq!(seen.len(), n, "{draws} draws");
}

#[test]
fn samplers_are_deterministic_given_rng_state() {
    let dots: Vec<Dot> = (0..6).map(|i| Dot { x: 5.0 + 9.0 * i as f64, y: 20.0 }).collect();
    let img = AnnotatedImage::new("d", Tensor::zeros(&[1, 40, 60]), dots, None).unwrap();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    sample_random_patch(&img, 16, LabelRule::Dots, &mut rng).unwrap().rect
                } else {
                    sample_object_centered_patch(&img, 16, LabelRule::Dots, &mut rng).unwrap().rect
                }
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}
