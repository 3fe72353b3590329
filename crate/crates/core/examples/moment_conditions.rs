//! Data with enough vanishing moments decays at the hyperbolic rate instead
//! of the slower low-frequency one.

use fuchswave::coeffs::CoefficientModel;
use fuchswave::estimates::moment_experiment;
use fuchswave::zones::ZoneConfig;

fn main() -> fuchswave::error::Result<()> {
    let model = CoefficientModel::pure(4.0, 0.0);
    let m = moment_experiment(&model, ZoneConfig::default(), 1, 0.1, 1e-10)?;
    println!("kappa = {}, smallest admissible [kappa'] = {}", m.data.kappa, m.data.kappa_prime);
    println!("generic data: exponent {:.4} (predicted {:?})", m.generic.exponent, m.generic.predicted);
    println!("moment data:  exponent {:.4} (predicted {:?})", m.moment.exponent, m.moment.predicted);
    Ok(())
}
