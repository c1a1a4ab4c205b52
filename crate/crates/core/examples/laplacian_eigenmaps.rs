//! Laplacian Eigenmaps on a kNN-sparsified gaussian kernel, with the spectrum it came from.

use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::neighbors::{gaussian_affinity, knn_graph, pairwise_distances, Metric};
use manifold::quality::trustworthiness;
use manifold::spectral::laplacian_eigenmaps_detailed;

fn main() -> manifold::error::Result<()> {
    let roll = generate(&SyntheticSpec::new(Generator::SwissRoll, 800, 3))?;
    let x = &roll.dataset.embeddings;
    let d = pairwise_distances(x, Metric::Euclidean)?;
    let graph = knn_graph(&d, 12)?;
    let w = gaussian_affinity(&d, 2.0, Some(&graph))?;
    let s = laplacian_eigenmaps_detailed(&w, 2)?;
    println!("trivial eigenvalue: {:.2e}", s.trivial_eigenvalue);
    println!("kept eigenvalues:   {:?}", s.eigenvalues);
    println!("trustworthiness:    {:.4}", trustworthiness(x, &s.embedding, 12)?);
    Ok(())
}
