// Plays one cooperative-navigation episode with a hand-written policy and
// dumps the trajectory as JSON lines.
//
// ```bash
// cargo run --example particle_rollout -- /tmp/cn3.jsonl
// ```

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dremarl::env::{write_trajectory, Scenario, World};

/// Accelerate along the larger axis of the offset to landmark `i`.
fn toward_own_landmark(world: &World, i: usize) -> usize {
    let p = world.agents()[i].pos;
    let l = world.landmarks()[i % world.landmarks().len()];
    let (dx, dy) = (l[0] - p[0], l[1] - p[1]);
    match (dx.abs() > dy.abs(), dx > 0.0, dy > 0.0) {
        (true, true, _) => 1,
        (true, false, _) => 2,
        (false, _, true) => 3,
        (false, _, false) => 4,
    }
}

pub fn run_example(out: &Path) -> dremarl::Result<f64> {
    let (mut world, _) = World::reset(Scenario::Cn, 3, 42)?;
    let mut steps = Vec::new();
    let mut total = 0.0;
    while !world.is_done() {
        let actions: Vec<usize> = (0..world.num_agents())
            .map(|i| toward_own_landmark(&world, i))
            .collect();
        let result = world.step(&actions)?;
        total += result.team_reward;
        steps.push(world.snapshot(&actions, &result));
    }
    let file = File::create(out).map_err(|e| dremarl::Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    write_trajectory(BufWriter::new(file), &steps)?;
    println!("{} steps, team return {total:.2}, written to {}", steps.len(), out.display());
    Ok(total)
}

fn main() -> dremarl::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("cn3_trajectory.jsonl"), PathBuf::from);
    run_example(&out).map(|_| ())
}
