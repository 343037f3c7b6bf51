//! Scenes are TOML files of constant-density boxes and spheres. This loads
//! one, renders ground-truth views around it and writes them as PNG.
//!
//! cargo run --release --example scene_file -- [scene.toml]

use evnerf::io::write_png;
use evnerf::scene::{generate_views, CameraRing, SceneSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/tabletop.toml").into());
    let scene = SceneSpec::load(&path)?;
    println!("{} primitives, background {:?}", scene.primitives.len(), scene.background);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let views = generate_views(&scene, &CameraRing::full(96, 96), 4, &mut rng)?;
    std::fs::create_dir_all("out/scene_file")?;
    for (k, v) in views.views.iter().enumerate() {
        let covered = v.foreground.iter().filter(|&&f| f).count();
        println!("view {k}: {covered} foreground pixels");
        write_png(&v.clean, format!("out/scene_file/view{k}.png"))?;
    }
    Ok(())
}
