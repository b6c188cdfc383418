//! Enroll identities in the face index and search it.
//!
//! ```sh
//! cargo run --example face_search
//! ```

use infergate::catalog::{stock_registry, FACE_BACKEND};
use infergate::registry::splitmix64;

/// Synthetic "photo" whose byte histogram is characteristic of `seed`.
fn portrait(seed: u64, len: usize) -> Vec<u8> {
    let spread = 40 + seed * 20;
    (0..len as u64)
        .map(|i| (seed * 17 + splitmix64(i) % spread) as u8)
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = stock_registry();
    for (person, seed) in [("ada", 3), ("grace", 5), ("linus", 7), ("barbara", 11)] {
        registry.enroll_face(FACE_BACKEND, person, &portrait(seed, 4096))?;
    }

    // A cropped shot of grace: similar pixel statistics, fewer pixels.
    let query = portrait(5, 3000);
    let result = registry.search_face(FACE_BACKEND, &query, 3)?;
    println!("top 3 of {} enrolled ({:.3} ms):", registry.face_index(FACE_BACKEND)?.len(), result.elapsed);
    for m in &result.matches {
        println!("  {:<8} cosine {:.4}", m.person_id, m.similarity);
    }
    Ok(())
}
