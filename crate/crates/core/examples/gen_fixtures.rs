//! Regenerates the shipped weather-service fixture files.
//!
//! `cargo run -p sensedeploy-core --example gen_fixtures -- crates/core/fixtures/owm`

use std::path::PathBuf;

use sensedeploy_core::repository::owm_fixture_lines;
use sensedeploy_core::Region;

fn main() -> std::io::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "fixtures/owm".into()),
    );
    std::fs::create_dir_all(&out)?;
    for (slug, region, count, seed, first_id) in [
        ("europe", Region::europe(), 5184, 2015, 2_000_000),
        (
            "north-america",
            Region::north_america(),
            2862,
            2015,
            3_000_000,
        ),
    ] {
        let mut text = owm_fixture_lines(&region, count, seed, first_id).join("\n");
        text.push('\n');
        std::fs::write(out.join(format!("{slug}.owm.ndjson")), text)?;
        println!("{slug}: {count} records");
    }
    Ok(())
}
