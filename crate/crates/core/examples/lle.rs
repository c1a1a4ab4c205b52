//! Locally Linear Embedding of a straight line in 3-D recovers the order of the points.

use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::neighbors::{knn_graph, pairwise_distances, Metric};
use manifold::quality::rank_correlation;
use manifold::spectral::{lle, lle_weights, reconstruction_error, DEFAULT_LLE_REG};

fn main() -> manifold::error::Result<()> {
    let line = generate(&SyntheticSpec::new(Generator::Line1d, 50, 1))?;
    let x = &line.dataset.embeddings;
    let weights = lle_weights(x, &knn_graph(&pairwise_distances(x, Metric::Euclidean)?, 5)?, DEFAULT_LLE_REG)?;
    println!("reconstruction error: {:.3e}", reconstruction_error(x, &weights));
    let y = lle(x, 5, 1, DEFAULT_LLE_REG)?;
    println!("rank correlation with position: {:.4}", rank_correlation(&y.column(0), line.ground_truth.values()));
    Ok(())
}
