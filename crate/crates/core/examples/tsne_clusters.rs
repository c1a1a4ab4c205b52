//! t-SNE on three gaussian clusters: loss trace checkpoints and neighborhood purity.

use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::quality::knn_label_agreement;
use manifold::tsne::{tsne, TsneConfig};

fn main() -> manifold::error::Result<()> {
    let clusters = generate(&SyntheticSpec::new(Generator::GaussianClusters, 300, 7))?;
    let cfg = TsneConfig { seed: 7, ..Default::default() };
    let run = tsne(&clusters.dataset.embeddings, &cfg)?;
    for it in [0, 50, cfg.exaggeration_iters, 500, cfg.max_iter] {
        println!("KL at iteration {it:>4}: {:.4}", run.kl[it]);
    }
    let agreement = knn_label_agreement(&run.embedding, clusters.dataset.labels(), 10)?;
    println!("10-NN label agreement: {agreement:.3}");
    Ok(())
}
