//! Regenerates the bundled synthetic fixtures under data/.
//!
//! Run from the repository root:
//! ```bash
//! cargo run -p cpclust --example make_fixtures
//! ```

use cpclust::dataset::save_csv;
use cpclust::synth::{two_blobs, two_moons};

fn main() {
    let blobs = two_blobs(30, 1.0, 0.04, cpclust::DEFAULT_SEED);
    save_csv(&blobs, std::path::Path::new("data/blobs.csv")).expect("write data/blobs.csv");
    let moons = two_moons(100, 0.06, cpclust::DEFAULT_SEED);
    save_csv(&moons, std::path::Path::new("data/moons.csv")).expect("write data/moons.csv");
    println!("wrote data/blobs.csv ({} points)", blobs.n());
    println!("wrote data/moons.csv ({} points)", moons.n());
}
