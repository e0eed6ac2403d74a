//! The constants calculator and the complexity planner: every bound
//! constant with its provenance, the W2 bound at chosen knobs, and planned
//! step budgets under the analytic constants (astronomically conservative)
//! and refitted empirical coefficients.

use scorelab::bounds::{
    self, plan_complexity, plan_complexity_empirical, BoundVariant, PlanConfig, PlanMode,
};
use scorelab::harness::experiments::refit_empirical_coefficients;
use scorelab::spectral::{ModelSpace, RngStream};
use scorelab::targets::{TailConfig, TargetModel};
use scorelab::Result;

fn main() -> Result<()> {
    let space = ModelSpace::new(vec![1.0], vec![0.5])?;
    let target = TargetModel::gaussian(vec![2.0], vec![0.5])?;
    let report = bounds::constants(&target, &space, &TailConfig::default())?;
    print!("{}", report.to_text_table());

    let (t_final, tau, eps) = (8.0, 0.01, 0.05);
    let rhs = bounds::w2_bound(&report, t_final, tau, eps, BoundVariant::Standard);
    match rhs {
        Ok(v) => println!("\nW2^2 bound at (T={t_final}, tau={tau}, eps={eps}): {v:.4e}"),
        Err(e) => println!("\nbound refused: {e}"),
    }
    let cap = bounds::tau_cap(&report);
    println!("small-step hypothesis cap: tau <= {cap:.4}");

    let eps0 = 0.1;
    println!("\nanalytic-constant plan at eps0 = {eps0}:");
    let plan = plan_complexity(&report, eps0, PlanMode::Standard, &PlanConfig::default())?;
    print!("{}", plan.to_text_table());

    println!("\nempirical-coefficient plan at eps0 = {eps0}:");
    let coeffs = refit_empirical_coefficients(&target, &space, &report, &RngStream::new(3))?;
    println!(
        "refit: c_bias = {:.3e}, c_eps = {:.3e}, c_tau = {:.3e}",
        coeffs.c_bias, coeffs.c_eps, coeffs.c_tau
    );
    let plan = plan_complexity_empirical(
        &coeffs,
        report.m2,
        report.trace_c,
        eps0,
        cap,
        &PlanConfig::default(),
    )?;
    print!("{}", plan.to_text_table());

    println!("\nbounded-support planning (R = 2) with the delta substitution:");
    for eps0 in [0.5, 0.25] {
        let plan = plan_complexity(
            &report,
            eps0,
            PlanMode::BoundedSupportP0 { r: 2.0, dim: 1 },
            &PlanConfig::default(),
        )?;
        println!(
            "eps0 = {eps0}: delta = {:.3e}, log N = {:.3e} (dominant term {:.3e})",
            plan.delta, plan.log_n, plan.log_n_dominant
        );
    }
    println!("(log N scales like R^2 M0^2 / eps0^4: halving eps0 multiplies it by ~16)");
    Ok(())
}
