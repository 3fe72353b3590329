//! Which zone each `(t, |ξ|)` falls in, the smooth cutoffs and the micro-energy weight.

use fuchswave::zones::ZoneConfig;

fn main() {
    let zone = ZoneConfig::new(1.0);
    let xis = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0];
    let times = [0.0, 1.0, 10.0, 100.0, 1e3];
    print!("{:>8}", "t \\ xi");
    for xi in xis {
        print!("{xi:>11}");
    }
    println!();
    for t in times {
        print!("{t:>8}");
        for xi in xis {
            print!("{:>11}", zone.classify(t, xi).as_str());
        }
        println!();
    }
    println!("\nzone boundary theta(xi) = N/xi - 1:");
    for xi in [1e-4, 1e-3, 0.1, 0.5] {
        println!("  xi = {xi:<6} theta = {}", zone.theta(xi));
    }
    println!("\ncutoffs and weight at xi = 0.01 across the boundary t = 99:");
    for t in [40.0, 99.0, 150.0, 199.0, 250.0] {
        let (d, hs, hl) = zone.cutoffs(t, 0.01);
        println!("  t = {t:>5}: phi = ({d:.4}, {hs:.4}, {hl:.4}), h = {:.5}", zone.micro_weight(t, 0.01));
    }
}
