//! Scores two embeddings of the same clusters and prints the comparison table.

use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::geodesic::classical_mds;
use manifold::neighbors::{pairwise_distances, Metric};
use manifold::quality::{summary_table, QualityReport};
use manifold::tsne::{tsne, TsneConfig};

fn main() -> manifold::error::Result<()> {
    let clusters = generate(&SyntheticSpec::new(Generator::GaussianClusters, 300, 7))?;
    let x = &clusters.dataset.embeddings;
    let labels = clusters.dataset.labels();
    let mds = classical_mds(&pairwise_distances(x, Metric::Euclidean)?, 2)?;
    let tsne = tsne(x, &TsneConfig { seed: 7, ..Default::default() })?.embedding;
    let reports = [
        QualityReport::compute("classical_mds", x, &mds, labels, "label", 10)?,
        QualityReport::compute("tsne", x, &tsne, labels, "label", 10)?,
    ];
    print!("{}", reports[1].to_text());
    println!();
    print!("{}", summary_table(&reports));
    Ok(())
}
