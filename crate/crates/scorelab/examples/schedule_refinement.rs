//! Compare the exact channel's distance to a Gaussian target under a
//! uniform schedule against a schedule with the same maximum step but a
//! geometrically refined tail, where the score varies fastest. Prints the
//! per-horizon W2 and the fitted T-rate for both.

use scorelab::sampler::{exact_channel, SamplerRun};
use scorelab::scores::ScoreModel;
use scorelab::spectral::{GaussianMeasure, ModelSpace, RngStream, Schedule};
use scorelab::targets::TargetModel;
use scorelab::util::ols_slope;
use scorelab::{metrics, Result};

/// Uniform spacing at `tau` away from the terminal point, with steps
/// shrinking proportionally to the remaining time over the final stretch
/// (floored so the count stays finite). The maximum step stays `tau`.
fn tail_refined(t_final: f64, tau: f64, tail_floor: f64) -> Result<Schedule> {
    let mut points = vec![0.0];
    loop {
        let t = *points.last().unwrap();
        let remaining = t_final - t;
        if remaining <= tail_floor {
            break;
        }
        let step = tau.min(0.5 * remaining).max(tail_floor);
        points.push(t + step);
    }
    if *points.last().unwrap() < t_final {
        points.push(t_final);
    }
    Schedule::from_points(t_final, 0.0, points)
}

fn main() -> Result<()> {
    let space = ModelSpace::new(vec![1.0], vec![0.5])?;
    let target = TargetModel::gaussian(vec![2.0], vec![0.5])?;
    let target_law = GaussianMeasure::new(vec![2.0], vec![0.5])?;
    let tau = 0.005;

    for (name, refined) in [("uniform", false), ("tail-refined", true)] {
        let mut ts = Vec::new();
        let mut logs = Vec::new();
        println!("{name} schedule (max step {tau}):");
        for t_final in [2.0, 4.0, 6.0, 8.0] {
            let schedule = if refined {
                tail_refined(t_final, tau, 1e-8)?
            } else {
                Schedule::uniform(t_final, 0.0, (t_final / tau).round() as usize)?
            };
            let run = SamplerRun::new(
                schedule.clone(),
                ScoreModel::exact(target.clone(), space.clone()),
                1,
                RngStream::new(0),
            )?;
            let law = exact_channel(&run)?;
            let w2 = metrics::w2_bures(&law, &target_law)?.value;
            println!(
                "  T={t_final}: W2 = {w2:.6e}  (N = {}, tau = {:.4})",
                schedule.n_steps(),
                schedule.tau()
            );
            ts.push(t_final);
            logs.push(w2.ln());
        }
        let (slope, ci) = ols_slope(&ts, &logs);
        println!("  fitted log W2 vs T slope: {slope:.4} (+- {ci:.4})\n");
    }
    Ok(())
}
