//! `λ(t)u` approaches a free wave: the scattering residuals at doubling times.

use fuchswave::coeffs::CoefficientModel;
use fuchswave::estimates::{scattering_residual, DataProfile, RadialGrid};

fn main() -> fuchswave::error::Result<()> {
    let grid = RadialGrid::standard(3)?;
    let data = DataProfile::ring(0.6, 0.5);
    let r = scattering_residual(&CoefficientModel::example_bounded(), &data, &grid, 1e4, 1e-3)?;
    for ((t, a), b) in r.times.iter().zip(&r.residual_dt).zip(&r.residual_grad) {
        println!("t = {t:>7}: |lambda u_t - v_t| = {a:.3e}, |lambda grad u - grad v| = {b:.3e}");
    }
    println!("decreasing to 10% of the start: {}", r.pass);
    Ok(())
}
