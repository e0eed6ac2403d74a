//! Exact scores, the modified score, and its exponentially decaying
//! Lipschitz profile measured on a probe grid.

use scorelab::bounds;
use scorelab::probe::ProbeGrid;
use scorelab::scores::{jacobian_fd, lipschitz_profile, fd_default_step, ModifiedScore, ScoreModel};
use scorelab::spectral::ModelSpace;
use scorelab::targets::{GaussianMixture, TailConfig, TargetModel};
use scorelab::Result;

fn main() -> Result<()> {
    let space = ModelSpace::isotropic(1, 1.0, 1.0)?;
    let target = TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
    let model = ScoreModel::exact(target.clone(), space.clone());

    // score vs a central difference of the marginal log density
    let (t, x) = (0.5, 0.3);
    let s = model.score(t, &[x])?[0];
    let marginal = target.forward_marginal(&space, t)?;
    let h = 1e-5;
    let fd = (marginal.log_density(&[x + h]) - marginal.log_density(&[x - h])) / (2.0 * h);
    println!("s({t}, {x}) = {s:.8}  (finite difference {fd:.8})");

    // the modified score and its FD Jacobian
    let ms = ModifiedScore::new(model, space.clone());
    let stilde = ms.eval(t, &[x])?[0];
    let jac = jacobian_fd(&ms, t, &[x], fd_default_step())?[0];
    println!("s~({t}, {x}) = {stilde:.8}, d/dx s~ = {jac:.8}");

    // decay profile against the bounds from the measured h-constants
    let report = bounds::constants(&target, &space, &TailConfig::default())?;
    println!(
        "\nmeasured tail constants: sup|grad h| = {:.4}, sup|hess h| = {:.4} => L0 = {:.2}, L1 = {:.2}",
        report.sup_grad_c, report.sup_hess_c, report.l0, report.l1
    );
    let grid = ProbeGrid::from_config(&target.default_probe_box(&space));
    println!("{:<8}{:<16}{:<16}{:<16}{}", "t", "sup||grad s~||", "L0 e^-t", "sup|s~|", "L1 e^-t/2");
    for p in lipschitz_profile(&ms, &[0.25, 0.5, 1.0, 2.0, 4.0], &grid)? {
        println!(
            "{:<8}{:<16.6e}{:<16.6e}{:<16.6e}{:.6e}",
            p.t,
            p.sup_grad,
            report.l0 * (-p.t).exp(),
            p.sup_value,
            report.l1 * (-0.5 * p.t).exp()
        );
    }
    Ok(())
}
