// Builds a small network on the tape and compares its gradients with
// central differences.
//
// ```bash
// cargo run --example autodiff_gradcheck
// ```

use dremarl::checks::max_gradient_error;
use dremarl::nn::{Graph, Mlp, MlpSpec, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> dremarl::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mlp = Mlp::new(MlpSpec::new(3, 2).with_hidden(vec![8, 8]), "net.")?;
    let mut store = ParamStore::new();
    mlp.init(&mut store, &mut rng)?;
    let x = Tensor::from_rows(&[vec![0.2, -0.4, 0.9], vec![-1.0, 0.5, 0.1]])?;

    let worst = max_gradient_error(&store, 1e-5, |g: &mut Graph, s| {
        let input = g.input(x.clone())?;
        let out = mlp.forward(g, s, input)?;
        let sq = g.square(out)?;
        g.mean(sq)
    })?;
    println!("{} parameters, max relative error {worst:.2e}", store.num_scalars());
    Ok(worst)
}

fn main() -> dremarl::Result<()> {
    run_example().map(|_| ())
}
