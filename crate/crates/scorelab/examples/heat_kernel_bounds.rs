//! The heat-kernel route to score regularity: quadrature evaluation of the
//! transformed potential qbar, the gradient/Hessian monotonicity report,
//! and the kernel identities B(t) and f(t).

use scorelab::heat_kernel::{vhj_bound_check, OuKernels, VhjState};
use scorelab::probe::ProbeGrid;
use scorelab::spectral::ModelSpace;
use scorelab::targets::{GaussianMixture, TailConfig, TargetModel};
use scorelab::Result;

fn main() -> Result<()> {
    let space = ModelSpace::new(vec![1.0], vec![0.5])?;
    let kernels = OuKernels::new(&space);
    println!("kernel identities (a = 0.5, c = 1):");
    println!("{:<8}{:<18}{:<18}{:<18}{}", "t", "B closed", "B quadrature", "f quadrature", "f closed");
    for &t in &[0.5, 1.0, 2.0, 5.0] {
        println!(
            "{t:<8}{:<18.12}{:<18.12}{:<18.12}{:.12}",
            kernels.b_closed(t, 0),
            kernels.b_quadrature(t, 0),
            kernels.f_quadrature(t),
            kernels.f_closed(t)
        );
    }
    println!("K constant sup_t ||e^(t/2) K(t)|| = {}", kernels.k_constant());

    // gradient/Hessian suprema of qbar stay controlled by the t = 0 data
    let space = ModelSpace::isotropic(1, 1.0, 1.0)?;
    let target = TargetModel::GaussianMixture(GaussianMixture::symmetric_pair_1d(1.0, 0.25));
    let h = target.tail_decomposition(&space, &TailConfig::default())?;
    let state = VhjState::new(h, &space, VhjState::DEFAULT_ORDER)?;
    let grid = ProbeGrid::from_config(&target.default_probe_box(&space));
    let report = vhj_bound_check(&state, &[0.25, 0.5, 1.0, 2.0], &grid)?;
    println!("\nqbar suprema vs the t = 0 constants (bimodal mixture):");
    print!("{}", report.to_csv_string());
    println!(
        "all margins >= -1e-6: {}",
        report.all_margins_at_least(-1e-6)
    );
    Ok(())
}
