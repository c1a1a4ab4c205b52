//! Unrolls a swiss roll with ISOMAP and scores the result against the true sheet coordinates.

use manifold::fixtures::{generate, Generator, SyntheticSpec};
use manifold::geodesic::isomap;
use manifold::quality::{continuity, trustworthiness};

fn main() -> manifold::error::Result<()> {
    let roll = generate(&SyntheticSpec::new(Generator::SwissRoll, 1000, 7))?;
    let y = isomap(&roll.dataset.embeddings, 10, 2)?;
    println!("trustworthiness vs (t, h): {:.4}", trustworthiness(&roll.ground_truth, &y, 12)?);
    println!("continuity vs (t, h):      {:.4}", continuity(&roll.ground_truth, &y, 12)?);
    println!("trustworthiness vs 3-D:    {:.4}", trustworthiness(&roll.dataset.embeddings, &y, 12)?);
    Ok(())
}
