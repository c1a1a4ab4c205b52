//! Loads the bundled artwork annotations, prints the period histogram, then merges the
//! two Renaissance schools into one category.

use std::collections::BTreeMap;
use std::path::Path;

use manifold::dataset::{load_annotations, merge_categories};

fn main() -> manifold::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/annotations.csv");
    let table = load_annotations(&path)?;
    println!("{} artworks", table.len());
    for (period, count) in table.histogram("period")? {
        println!("  {period:<22}{count}");
    }

    let mapping = BTreeMap::from([
        ("Early Renaissance".to_string(), "Renaissance".to_string()),
        ("Northern Renaissance".to_string(), "Renaissance".to_string()),
    ]);
    let merged = merge_categories(&table, "period", &mapping)?;
    println!("after merge:");
    for (period, count) in merged.histogram("period")? {
        println!("  {period:<22}{count}");
    }
    Ok(())
}
