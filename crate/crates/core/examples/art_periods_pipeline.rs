//! Runs the pipeline on the bundled artwork annotations with stand-in feature vectors.
//!
//! Real features would come from a neural network; here each period gets its own random
//! center so the merge and evaluation steps have structure to find. Output goes to the
//! temp directory.

use std::collections::BTreeMap;
use std::path::Path;

use manifold::cli::{
    cmd_pipeline, Algorithm, Hyperparameters, MergeConfig, PipelineConfig, PipelineInput, StageConfig,
};
use manifold::dataset::{load_annotations, write_embeddings, EmbeddingMatrix, MatrixFormat};
use manifold::rng::Rng;

const DIM: usize = 16;

fn main() -> manifold::error::Result<()> {
    let annotations = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/annotations.csv");
    let table = load_annotations(&annotations)?;
    let periods = table.require_column("period")?;

    let mut rng = Rng::new(42);
    let mut centers: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut values = Vec::with_capacity(table.len() * DIM);
    for period in periods {
        let c = centers.entry(period).or_insert_with(|| (0..DIM).map(|_| 3.0 * rng.normal()).collect());
        values.extend(c.iter().map(|v| v + rng.normal()));
    }
    let features = EmbeddingMatrix::new(table.ids().to_vec(), DIM, values)?;

    let out = std::env::temp_dir().join("art_periods");
    std::fs::create_dir_all(&out).map_err(|e| manifold::error::Error::io(&out, e))?;
    let features_path = out.join("features.csv");
    write_embeddings(&features_path, &features, MatrixFormat::Csv)?;

    let cfg = PipelineConfig {
        seed: 42,
        input: PipelineInput { embeddings: Some(features_path), annotations: Some(annotations), synthetic: None },
        label_column: "period".into(),
        out_dir: out.clone(),
        eval_k: 10,
        merge: Some(MergeConfig {
            column: "period".into(),
            mapping: BTreeMap::from([
                ("Early Renaissance".into(), "Renaissance".into()),
                ("Northern Renaissance".into(), "Renaissance".into()),
            ]),
        }),
        stages: vec![StageConfig {
            algorithm: Algorithm::Smacof,
            hyper: Hyperparameters { iters: Some(50), ..Default::default() },
        }],
    };
    let done = cmd_pipeline(&cfg)?;
    print!("{}", std::fs::read_to_string(&done.summary).expect("summary was just written"));
    Ok(())
}
