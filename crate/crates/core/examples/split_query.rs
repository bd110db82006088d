//! Data-driven operationalization: recover a planted accuracy drop.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smart_audit::dataset::{Column, Dataset};
use smart_audit::splitter::{optimal_categorical_split, optimal_split_query, SplitConstraints};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 2000;
    let age: Vec<f64> = (0..n).map(|_| rng.random_range(18..=90) as f64).collect();
    let region: Vec<&str> = (0..n).map(|_| ["north", "south", "east", "west"][rng.random_range(0..4)]).collect();
    // worse on the old, and a little worse in the east
    let correct: Vec<u8> = (0..n)
        .map(|i| {
            let p = if age[i] >= 72.0 { 0.5 } else { 0.95 } - if region[i] == "east" { 0.1 } else { 0.0 };
            rng.random_bool(p) as u8
        })
        .collect();
    let ds = Dataset::new(
        "planted",
        vec![Column::numeric("age", age), Column::categorical("region", &region)],
        None,
    )?;

    for depth in 1..=3 {
        let cons = SplitConstraints {
            min_group_size: 50,
            max_group_size: Some(1500),
            max_depth: depth,
        };
        let found = optimal_split_query(&ds, &correct, &["age", "region"], &cons)?;
        println!("depth {depth}: {}  gap {:.3}  size {}", found.predicate, found.gap, found.group_size);
    }
    let cat = optimal_categorical_split(&ds, &correct, "region", &SplitConstraints::default(), 2)?;
    println!("regions: {}  gap {:.3}", cat.predicate, cat.gap);
    Ok(())
}
