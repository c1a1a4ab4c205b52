//! Writes a colored scatter plot of an embedding to `clusters.svg` in the temp directory.

use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::phate::{phate_embed, PhateConfig};
use manifold::plot::{write_svg, PlotSpec};

fn main() -> manifold::error::Result<()> {
    let clusters = generate(&SyntheticSpec::new(Generator::GaussianClusters, 300, 7))?;
    let run = phate_embed(&clusters.dataset.embeddings, &PhateConfig { seed: 7, ..Default::default() })?;
    let spec = PlotSpec { title: Some("PHATE".into()), ..Default::default() };
    let path = std::env::temp_dir().join("clusters.svg");
    write_svg(&path, &run.embedding, clusters.dataset.labels(), &spec)?;
    println!("{}", path.display());
    Ok(())
}
