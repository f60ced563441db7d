// Built-up vectors and every aggregation scheme for two agents.
//
// ```bash
// cargo run --example reward_aggregation
// ```

use dremarl::aggregation::{build_up, AggregationScheme, PolicyWeights};

pub fn run_example() -> dremarl::Result<Vec<(AggregationScheme, f64, f64)>> {
    // Estimated branch rewards, executed actions and observed rewards.
    let estimates = [vec![0.0, 1.0, 2.0], vec![2.0, 2.0, 5.0]];
    let actions = [2, 0];
    let observed = [4.0, -1.0];
    let m = estimates
        .iter()
        .zip(actions.iter().zip(observed))
        .map(|(r_hat, (&k, r))| build_up(r_hat, k, r))
        .collect::<dremarl::Result<Vec<_>>>()?;
    println!("built-up: {m:?}");

    let weights = PolicyWeights::new(vec![0.2, 0.3, 0.5])?;
    let mut rows = Vec::new();
    for scheme in AggregationScheme::ALL {
        let (mixed, lumped) = scheme.rewards(&m, 0, &weights, observed[0])?;
        println!("{scheme:<9} agent 0: mixed {mixed:+.3}  lumped {lumped:+.3}");
        rows.push((scheme, mixed, lumped));
    }
    Ok(rows)
}

fn main() -> dremarl::Result<()> {
    run_example().map(|_| ())
}
