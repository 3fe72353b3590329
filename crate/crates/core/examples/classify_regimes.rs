//! Characteristic roots, regime and hypothesis checks for a few `(b₀, m₀)`.

use fuchswave::coeffs::{classify_regime, CoefficientModel};
use fuchswave::zones::ZoneLabel;

fn main() -> fuchswave::error::Result<()> {
    let cells = [(1.0, 1.0), (1.0, 0.01), (2.0, 0.75), (2.0, 2.0), (3.0, 0.0), (4.0, 0.0), (2.0, 0.25), (0.0, 5.0)];
    println!("{:>5} {:>5}  {:>22} {:>22}  {:<18} {:>8} {:>8}", "b0", "m0", "mu+", "mu-", "regime", "diss", "hyp");
    for (b0, m0) in cells {
        let c = classify_regime(b0, m0);
        let model = CoefficientModel::pure(b0, m0);
        println!(
            "{b0:>5} {m0:>5}  {:>22} {:>22}  {:<18} {:>8.3} {:>8.3}",
            format!("{:.4}{:+.4}i", c.mu_plus.re, c.mu_plus.im),
            format!("{:.4}{:+.4}i", c.mu_minus.re, c.mu_minus.im),
            c.case.as_str(),
            model.predicted_decay(ZoneLabel::Diss)?,
            model.predicted_decay(ZoneLabel::HypLarge)?,
        );
    }

    let model = CoefficientModel::example_bounded();
    let report = model.check_hypotheses(1e6, 200)?;
    println!("\nbounded perturbation b0 = 2, m0 = 3/4 up to t = 1e6:");
    println!("  symbol bounds hold: {}, integrable deviation: {}", report.hyp1_pass, report.hyp2_pass);
    println!("  sup (1+t)^(k+1)|d^k b| = {:?}", report.hyp1_b.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    Ok(())
}
