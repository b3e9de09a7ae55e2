//! Generates a small synthetic counting dataset, writes it to disk, reloads
//! it and prints the statistics table and a few patch samples.
//!
//! cargo run --example synth_dataset [-- OUT_DIR]

use gsp_count::dataset::{dataset_stats, format_stats_table, generate_dataset, load_dataset, write_dataset, DatasetPlan, Split};
use gsp_count::synth::{sample_object_centered_patch, sample_random_patch, LabelRule, SceneSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gsp_count::Result<()> {
    let scene = SceneSpec {
        height: 96,
        width: 96,
        count_min: 3,
        count_max: 12,
        ..SceneSpec::default()
    };
    let plan = DatasetPlan {
        train: 8,
        test: 4,
        test_sizes: vec![96, 160],
        ..DatasetPlan::default()
    };
    let ds = generate_dataset(&scene, &plan, 7)?;

    let tmp;
    let root = match std::env::args().nth(1) {
        Some(dir) => std::path::PathBuf::from(dir),
        None => {
            tmp = std::env::temp_dir().join("gsp_synth_example");
            tmp.clone()
        }
    };
    let files = write_dataset(&ds, &root)?;
    println!("wrote {} files under {}", files.len(), root.display());

    let reloaded = load_dataset(&root)?;
    print!("{}", format_stats_table("synthetic", &dataset_stats(&reloaded)));

    let image = reloaded.load_split(Split::Train)?.remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let r = sample_random_patch(&image, 48, LabelRule::Dots, &mut rng)?;
        let c = sample_object_centered_patch(&image, 48, LabelRule::Dots, &mut rng)?;
        println!("random patch {} -> {} objects; centered patch {} -> {} objects", r.rect, r.count, c.rect, c.count);
    }
    Ok(())
}
