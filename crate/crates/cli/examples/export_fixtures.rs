//! Regenerates the committed audit fixtures:
//! `cargo run -p calib-atlas-cli --example export_fixtures -- crates/cli/fixtures`.

fn main() -> anyhow::Result<()> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "crates/cli/fixtures".into());
    calib_atlas_cli::fixtures::write_fixtures(std::path::Path::new(&root))?;
    println!("fixtures written to {root}");
    Ok(())
}
