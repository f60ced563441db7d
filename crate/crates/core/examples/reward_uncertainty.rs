// Empirical mean and spread of the three reward settings.
//
// ```bash
// cargo run --release --example reward_uncertainty
// ```

use dremarl::uncertainty::{RewardSetting, RewardSettingKind};

pub fn run_example(draws: usize) -> dremarl::Result<Vec<(RewardSettingKind, usize, f64, f64)>> {
    let r = -1.5;
    let mut rows = Vec::new();
    for kind in [RewardSettingKind::Dete, RewardSettingKind::Dist, RewardSettingKind::AcDist] {
        let mut setting = RewardSetting::new(kind, 5, 3);
        for k in [0, 4] {
            let xs = (0..draws)
                .map(|_| setting.perturb(r, k))
                .collect::<dremarl::Result<Vec<f64>>>()?;
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            println!("{kind:<8} action {k}: mean {mean:+.4}  sd {sd:.4}");
            rows.push((kind, k, mean, sd));
        }
    }
    Ok(rows)
}

fn main() -> dremarl::Result<()> {
    run_example(200_000).map(|_| ())
}
