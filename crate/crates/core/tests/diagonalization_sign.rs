//! The first diagonalizer must enter as `I + N⁽¹⁾`. With the opposite sign the
//! operator identity keeps an `O(1/(1+t))` remainder instead of the
//! `O(|ξ|⁻¹(1+t)⁻²)` one.

use fuchswave::coeffs::CoefficientModel;
use fuchswave::diagonalize::{build_stage, preliminary_transform};
use fuchswave::linalg::{c, op_norm, M2, I};
use fuchswave::zones::ZoneConfig;

fn defect(sign: f64, t: f64, xi: f64) -> f64 {
    let model = CoefficientModel::example_bounded();
    let stage = build_stage(&model, 1, ZoneConfig::default()).unwrap();
    let n = |s: f64| M2::identity() + stage.eval(s, xi).unwrap().n_parts[0] * c(sign);
    let h = 1e-3 * (1.0 + t);
    let dn = (n(t - 2.0 * h) - n(t + 2.0 * h) + (n(t + h) - n(t - h)) * c(8.0)) / c(12.0 * h);
    let v = stage.eval(t, xi).unwrap();
    let p = preliminary_transform(&model, xi, t).unwrap();
    let nt = n(t);
    let lhs = dn * (-I) - (p.d * nt - nt * p.d) - (p.b + p.c) * nt + nt * v.f_parts[0];
    op_norm(&lhs)
}

#[test]
fn chosen_sign_cancels_the_first_order() {
    let xi = 1.0;
    for t in [10.0, 100.0, 1000.0] {
        let ours = defect(1.0, t, xi) * (1.0 + t);
        let flipped = defect(-1.0, t, xi) * (1.0 + t);
        assert!(ours < 0.5 / (1.0 + t).sqrt(), "t = {t}: scaled defect {ours}");
        assert!(flipped > 0.5, "t = {t}: flipped sign scaled defect {flipped}");
    }
}
