//! One Hartman–Wintner step on the zero-frequency Fuchs system of a
//! logarithmically perturbed model, where the remainder is only `L^σ`.

use fuchswave::asymptotic::{hartman_wintner, FuchsSystem, HWOptions};
use fuchswave::coeffs::CoefficientModel;
use fuchswave::modal::{ModalSystem, SystemForm};
use fuchswave::zones::ZoneConfig;

fn main() -> fuchswave::error::Result<()> {
    let model = CoefficientModel::log_perturbation(3.0, 0.5, 0.01, 0.01, 1.0).with_sigma(1.5);
    let sys = ModalSystem::new(model, ZoneConfig::default(), 0.0, SystemForm::Fuchs);
    let fuchs = FuchsSystem::from_modal(&sys)?;
    let (hw, transformed) = hartman_wintner(&fuchs.system, 1.5, 1.0, 1e8, HWOptions::default())?;
    println!("valid from tau = {}, truncation bound {:.2e}", hw.valid_from, hw.truncation_bound);
    for tau in [1e1, 1e2, 1e3, 1e4, 1e6] {
        println!(
            "tau = {tau:>9.0e}: |N| = {:.3e}, |R| = {:.3e}, |R1| = {:.3e}, identity defect {:.1e}",
            fuchswave::linalg::dop_norm(&hw.n_at(tau)),
            fuchswave::linalg::dop_norm(&fuchs.system.remainder(tau)),
            fuchswave::linalg::dop_norm(&transformed.remainder(tau)),
            hw.identity_residual(&fuchs.system, tau)
        );
    }
    let (a, b) = (1e2, 1e4);
    println!(
        "int |R1| dt/t = {:.3e} against int |R|^1.5 dt/t = {:.3e} over [{a}, {b}]",
        hw.remainder_integral(a, b, 1.0),
        fuchs.system.remainder_integral(a, b, 1.5)
    );
    Ok(())
}
