#![allow(dead_code)]

use std::path::PathBuf;

use hiereval::fixtures::{NoiseConfig, SceneConfig, Span};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/v1")
}

/// A random scene small enough for the dense oracle, with random noise.
pub fn random_small_config(seed: u64) -> SceneConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let word_h = rng.gen_range(6..=12);
    SceneConfig {
        seed,
        image_count: rng.gen_range(1..=3),
        width: rng.gen_range(96..=256),
        height: rng.gen_range(96..=256),
        paragraphs_per_image: Span::new(1, rng.gen_range(2..=8)),
        lines_per_paragraph: Span::new(1, rng.gen_range(1..=5)),
        words_per_line: Span::new(1, rng.gen_range(1..=6)),
        word_width: Span::new(6, rng.gen_range(8..=20)),
        word_height: Span::new(word_h, word_h + rng.gen_range(0..=4)),
        max_rotation_deg: rng.gen_range(0.0..=6.0),
        illegible_fraction: rng.gen_range(0.0..=0.4),
        noise: NoiseConfig {
            jitter_px: rng.gen_range(0.0..=3.0),
            drop_prob: rng.gen_range(0.0..=0.3),
            spurious_prob: rng.gen_range(0.0..=0.3),
            merge_line_prob: rng.gen_range(0.0..=0.5),
            case_flip_prob: rng.gen_range(0.0..=0.3),
        },
    }
}

pub fn noiseless(seed: u64, images: usize) -> SceneConfig {
    SceneConfig {
        seed,
        image_count: images,
        ..SceneConfig::default()
    }
}
