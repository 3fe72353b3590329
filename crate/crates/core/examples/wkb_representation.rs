//! Two steps of the hyperbolic-zone diagonalization: the representation of
//! the fundamental solution, its agreement with the oracle, and symbol audits.

use fuchswave::coeffs::CoefficientModel;
use fuchswave::diagonalize::{assemble_representation, audit_stage, build_stage, zone_for_stage, AuditGrid, RepresentationOptions};
use fuchswave::modal::{ModalSystem, SystemForm};
use fuchswave::zones::ZoneConfig;

fn main() -> fuchswave::error::Result<()> {
    let model = CoefficientModel::example_bounded();
    let stage = build_stage(&model, 2, ZoneConfig::default())?;
    let zone = zone_for_stage(&stage);
    println!("N_2 invertible for (1+t)|xi| >= {:.4}", stage.n_k_inverse_ok_from);
    let stage = build_stage(&model, 2, zone)?;
    for (s, t, xi) in [(1.0, 30.0, 1.5), (5.0, 200.0, 0.5), (0.0, 80.0, 4.0)] {
        let (e, q) = assemble_representation(&stage, s, t, xi, RepresentationOptions::default())?;
        let oracle = ModalSystem::new(model.clone(), zone, xi, SystemForm::Hyperbolic).integrate_fundamental(s, t, 1e-12)?;
        let rel = (e.entries - oracle.entries).norm() / oracle.entries.norm();
        println!(
            "s = {s}, t = {t}, xi = {xi}: relative error {rel:.2e}, |det Q| = {:.4} >= {:.4} ({:?})",
            q.value.determinant().norm(),
            q.det_lower_bound(),
            q.path
        );
    }
    for audit in audit_stage(&stage, &AuditGrid::default())? {
        println!("{:>6} order {:?}: constant {:.3e} (inner half {:.3e})", audit.name, audit.order, audit.worst_constant, audit.inner_constant);
    }
    Ok(())
}
