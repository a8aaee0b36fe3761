//! Desk-scale power comparison across the full effect grid.

use permbet::harness::{parse_config, run_simulation, SimulateConfig};

#[test]
fn betting_power_tracks_besag_clifford() {
    let text = r#"{
        "experiment": "two_sample",
        "m": 500,
        "n": 1000,
        "mu": [0.0, 0.25, 0.5, 0.75, 1.0],
        "T": 1000,
        "alpha": 0.05,
        "seed": 21,
        "strategies": [
            {"kind": "besag_clifford", "h": 50, "label": "bc"},
            {"kind": "binomial", "rounding": true, "label": "binomial"},
            {"kind": "mixture_uniform", "rounding": true, "label": "mixture"},
            {"kind": "binomial", "label": "binomial_plain"},
            {"kind": "mixture_uniform", "label": "mixture_plain"}
        ]
    }"#;
    let (cfg, _) = parse_config::<SimulateConfig>(text).unwrap();
    let table = run_simulation(&cfg, None).unwrap();
    let null_cap = 0.05 + 3.0 * (0.05f64 / 500.0).sqrt();
    for &mu in &cfg.mu {
        let row = |l: &str| table.row(l, Some(mu)).unwrap();
        let bc = row("bc");
        for l in ["binomial", "mixture"] {
            let d = (row(l).power - bc.power).abs();
            assert!(d <= 0.04, "mu={mu} {l}: power {} vs BC {}", row(l).power, bc.power);
        }
        if mu == 0.0 {
            for r in table.rows.iter().filter(|r| r.mu == Some(0.0)) {
                assert!(r.power <= null_cap, "{}: null reject {}", r.label, r.power);
            }
        }
        if mu == 1.0 {
            for l in ["binomial", "mixture"] {
                assert!(row(l).mean_stop < 0.25 * 1000.0, "{l}: {}", row(l).mean_stop);
            }
            assert!(bc.mean_stop >= 0.95 * 1000.0, "BC mean stop {}", bc.mean_stop);
        }
    }
}
