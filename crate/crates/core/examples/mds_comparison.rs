//! Classical MDS against SMACOF on the same distances: exact recovery of planar points, and
//! stress on a curved surface where no planar layout is exact.

use manifold::dataset::EmbeddingMatrix;
use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::geodesic::{classical_mds, normalized_stress, smacof_mds};
use manifold::linalg::{procrustes_error, to_matrix};
use manifold::neighbors::{pairwise_distances, Metric};
use manifold::rng::Rng;

fn main() -> manifold::error::Result<()> {
    let mut rng = Rng::new(1);
    let flat = EmbeddingMatrix::from_row_major(2, (0..100).map(|_| rng.normal()).collect())?;
    let d = pairwise_distances(&flat, Metric::Euclidean)?;
    let y = classical_mds(&d, 2)?;
    println!("planar points, procrustes error: {:.2e}", procrustes_error(&to_matrix(&flat), &to_matrix(&y))?);

    let roll = generate(&SyntheticSpec::new(Generator::SwissRoll, 300, 2))?;
    let d = pairwise_distances(&roll.dataset.embeddings, Metric::Euclidean)?;
    let cmds = classical_mds(&d, 2)?;
    let smacof = smacof_mds(&d, 2, 300, 1e-6, 2)?;
    println!("swiss roll, classical MDS stress: {:.4}", normalized_stress(&d, cmds.coords(), 2));
    println!(
        "swiss roll, SMACOF stress:        {:.4} after {} iterations",
        normalized_stress(&d, smacof.embedding.coords(), 2),
        smacof.iterations
    );
    Ok(())
}
