//! Levinson solutions `V±(t) ≈ e± t^{μ±}` of the low-frequency Fuchs system.

use fuchswave::asymptotic::{levinson_solve, FuchsSystem, LevinsonOptions};
use fuchswave::coeffs::CoefficientModel;
use fuchswave::modal::{ModalSystem, SystemForm};
use fuchswave::zones::ZoneConfig;

fn main() -> fuchswave::error::Result<()> {
    let zone = ZoneConfig::new(0.1);
    let xi = 1e-4;
    let sys = ModalSystem::new(CoefficientModel::pure(3.0, 0.0), zone, xi, SystemForm::Fuchs);
    let fuchs = FuchsSystem::from_modal(&sys)?;
    let theta = zone.theta(xi);
    println!("mu- = {}, mu+ = {}, zone boundary at t = {theta}", fuchs.mu_minus, fuchs.mu_plus);
    for k in 0..2 {
        let sol = levinson_solve(&fuchs.system, k, 1.0, 2.0 * (1.0 + theta), LevinsonOptions::default())?;
        println!("solution {k}: {} Picard iterations, rate {:.2e} (bound {:.2e})", sol.iterations, sol.observed_rate(), sol.contraction_bound);
        for frac in [0.01, 0.1, 0.5, 1.0] {
            let tau = 1.0 + frac * theta;
            println!("  t = {:>8.1}: |V t^-mu - e| = {:.3e}", tau - 1.0, sol.residual(tau));
        }
        println!("  ODE residual {:.1e}", sol.ode_residual(&fuchs.system));
    }
    Ok(())
}
