//! The FFT solver on a periodic box against the radial frequency quadrature.

use fuchswave::coeffs::CoefficientModel;
use fuchswave::estimates::{energy_trace, DataProfile, RadialGrid};
use fuchswave::solver::config::BoxGrid;
use fuchswave::solver::simulate_box;
use fuchswave::zones::ZoneConfig;

fn main() -> fuchswave::error::Result<()> {
    let model = CoefficientModel::pure(2.0, 0.75);
    let zone = ZoneConfig::default();
    let data = DataProfile::ring(1.0, 0.5);
    let times = [0.0, 1.0, 10.0, 50.0, 100.0];
    let grid = BoxGrid { dim: 1, points_per_dim: 4096, box_length: 2000.0 };
    let boxed = simulate_box(&model, zone, &data, &grid, &times, 1e-10, false)?;
    let radial = energy_trace(&model, zone, &data, &RadialGrid::log(1, 1e-4, 4.0, 256)?, &times, 1e-10)?;
    println!("FFT round trip error {:.1e}, {} shells evolved", boxed.roundtrip_error, boxed.active_shells);
    for (i, t) in times.iter().enumerate() {
        println!("t = {t:>5}: box {:.6e}, radial {:.6e}", boxed.values[i], radial.values[i]);
    }
    for w in &boxed.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
