//! Energy decay of low-frequency data and the sharp `λ(t)`-weighted limit of
//! high-frequency data.

use fuchswave::coeffs::CoefficientModel;
use fuchswave::estimates::{energy_trace, fit_decay, log_times, predicted_energy_exponent, sharpness_limit, DataProfile, NormKind, RadialGrid};
use fuchswave::zones::ZoneConfig;

fn main() -> fuchswave::error::Result<()> {
    let zone = ZoneConfig::default();
    let grid = RadialGrid::standard(3)?;
    let times = log_times(1.0, 1e4, 41);
    for (b0, m0) in [(1.0, 1.0), (4.0, 0.0)] {
        let model = CoefficientModel::pure(b0, m0);
        let data = DataProfile::low_band(0.5);
        let trace = energy_trace(&model, zone, &data, &grid, &times, 1e-10)?;
        let fit = fit_decay(&times, &trace.micro_sup, (1e2, 1e4), Some(predicted_energy_exponent(&model, 0.0, 3, NormKind::Sup)?))?;
        println!("({b0}, {m0}) low-band data: sup |U| ~ t^{:.4}, predicted {:.4}", fit.exponent, fit.predicted.unwrap());
    }
    let model = CoefficientModel::example_bounded();
    let r = sharpness_limit(&model, zone, &DataProfile::ring(2.5, 1.0), &grid, 1e4, 1e-10)?;
    println!("example model, data in |xi| > N: lambda^2 (|grad u|^2 + |u_t|^2) -> {:.5}, variation {:.2e} over the last decade", r.limit, r.variation);
    Ok(())
}
