//! Regenerates the named fixture files: `cargo run -p datlen-core --example write_fixtures -- fixtures`.

use std::path::PathBuf;

use datlen_core::{fixtures, write_lattice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, lattice) in [
        ("l-det.json", fixtures::l_det()),
        ("l-fork.json", fixtures::l_fork()),
    ] {
        std::fs::write(dir.join(name), write_lattice(&lattice)?)?;
    }
    Ok(())
}
