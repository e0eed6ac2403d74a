//! Sampling a linear-Gaussian posterior with the exact conditional score:
//! the posterior is Gaussian in closed form, so the ensemble's moment fit
//! can be compared exactly, along with the Bayesian-variant bound.

use scorelab::bounds;
use scorelab::harness::experiments::bayes_demo;
use scorelab::metrics::w2_bures;
use scorelab::spectral::{ModelSpace, RngStream};
use scorelab::targets::{LinearGaussianPosterior, TailConfig, TargetModel};
use scorelab::Result;

fn main() -> Result<()> {
    let space = ModelSpace::new(vec![1.0, 0.5], vec![1.0, 0.5])?;
    let post = LinearGaussianPosterior::new(
        vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        vec![0.5, 0.5],
        vec![1.0, -1.0],
        &space,
    )?;
    let gaussian = post.posterior();
    println!(
        "posterior: mean ({:+.4}, {:+.4}), var ({:.4}, {:.4})",
        gaussian.mean[0], gaussian.mean[1], gaussian.var[0], gaussian.var[1]
    );
    let target = TargetModel::LinearGaussianPosterior(post);
    let report = bounds::constants(&target, &space, &TailConfig::default())?;
    println!(
        "measured k3 ingredient: {:.3} => K3 = {:.3e}",
        report.k3_factor.unwrap(),
        report.k3.unwrap()
    );

    let result = bayes_demo(&target, &space, &report, 10.0, 0.01, 4096, &RngStream::new(9))?;
    let row = &result.rows[0];
    println!(
        "\nsampled 4096 paths at T = 10, tau = 0.01: W2(fit, posterior) = {:.5}",
        row.w2
    );
    println!(
        "Bayesian bound K3 (e^-2T (M2 + TrC) + TrC tau^2) = {:.3e}, margin {:.3e}",
        row.bound_w2sq, row.margin_w2sq
    );

    // prior vs posterior distance for context
    let prior = space.base_measure();
    println!(
        "for scale: W2(prior, posterior) = {:.4}",
        w2_bures(&prior, &gaussian)?.value
    );
    Ok(())
}
