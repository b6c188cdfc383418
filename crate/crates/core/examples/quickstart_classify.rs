//! Classify and score an input directly through the registry.
//!
//! ```sh
//! cargo run --example quickstart_classify -- path/to/image.jpg
//! ```

use infergate::catalog::stock_registry;
use infergate::registry::ServiceOutput;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path)?,
        None => b"a sunflower in a field".to_vec(),
    };
    let registry = stock_registry();

    for service in registry.services() {
        println!("{:<18} {:<4} {}", service.route, service.method.as_str(), service.description);
    }
    println!();

    let top = registry.classify("plant", &image, 3)?;
    println!("cv/plant top-3 ({:.3} ms):", top.elapsed);
    for label in &top.top_k {
        println!("  {:<12} {:.4}", label.label, label.confidence);
    }

    let beauty = registry.score("fbp", &image)?;
    println!("cv/fbp score: {:.4}", beauty.score);

    // `invoke` runs whatever service is mounted at a route.
    if let ServiceOutput::Regression(r) = registry.invoke("dm/zhihuliveeval", b"12345")? {
        println!("dm/zhihuliveeval id=12345: {:.4}", r.score);
    }
    Ok(())
}
