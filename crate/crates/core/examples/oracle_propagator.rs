//! The brute-force modal propagator: cocycle property, Liouville determinant
//! and the three equivalent first-order forms.

use fuchswave::coeffs::CoefficientModel;
use fuchswave::modal::{expected_determinant, ModalSystem, SystemForm};
use fuchswave::zones::ZoneConfig;

fn main() -> fuchswave::error::Result<()> {
    let model = CoefficientModel::example_bounded();
    let zone = ZoneConfig::default();
    for (xi, form) in [(1e-3, SystemForm::Dissipative), (1e-3, SystemForm::Fuchs), (3.0, SystemForm::Hyperbolic)] {
        let sys = ModalSystem::new(model.clone(), zone, xi, form);
        let e = sys.integrate_fundamental(0.0, 50.0, 1e-12)?;
        let det = e.entries.determinant().norm();
        println!(
            "{form:?} xi = {xi}: |E(50, 0)| = {:.6e}, |det| = {det:.6e} (Liouville {:.6e}), cocycle defect {:.1e}",
            e.norm(),
            expected_determinant(&sys, 0.0, 50.0),
            sys.check_cocycle(0.0, 20.0, 50.0, 1e-12)?
        );
    }
    Ok(())
}
