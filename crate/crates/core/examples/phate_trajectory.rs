//! PHATE on a noiseless curve: the selected diffusion time and how well the leading axis
//! follows arc length.

use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::linalg::principal_scores;
use manifold::phate::{phate_embed, PhateConfig};
use manifold::quality::rank_correlation;

fn main() -> manifold::error::Result<()> {
    let curve = generate(&SyntheticSpec::new(Generator::Trajectory, 50, 3))?;
    let run = phate_embed(&curve.dataset.embeddings, &PhateConfig { seed: 3, ..Default::default() })?;
    println!("t = {} (entropy {:.3} -> {:.3})", run.t, run.entropy[0], run.entropy[run.entropy.len() - 1]);
    println!("final stress: {:.4e}", run.stress.last().copied().unwrap_or(f64::NAN));
    let rho = rank_correlation(&principal_scores(&run.embedding), curve.ground_truth.values());
    println!("rank correlation with arc length: {rho:.4}");
    Ok(())
}
