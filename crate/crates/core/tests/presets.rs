use lagshift::config::{figure_presets, Case, InitialKind, Solver, FIGURES, PRESETS};
use lagshift::Bump;

fn quad(h: f64, center: f64) -> Bump {
    Bump::QuadraticPlus { h, center }
}

fn quart(h: f64, center: f64) -> Bump {
    Bump::QuarticPlus { h, center }
}

// Caption parameters, one row per preset: name, epsilon, (c or c1, c2), delta.
struct Row {
    name: &'static str,
    eps: f64,
    c1: f64,
    c2: Option<f64>,
    delta: f64,
}

const ROWS: &[Row] = &[
    Row { name: "fig1", eps: 0.1, c1: 1.0, c2: None, delta: -0.5 },
    Row { name: "fig2_eps", eps: 0.1, c1: 1.0, c2: None, delta: -0.5 },
    Row { name: "fig2_limit", eps: 0.1, c1: 1.0, c2: None, delta: -0.5 },
    Row { name: "fig3_c2_2.5", eps: 0.1, c1: -1.0, c2: Some(2.5), delta: -0.5 },
    Row { name: "fig3_c2_1", eps: 0.1, c1: -1.0, c2: Some(1.0), delta: -0.5 },
    Row { name: "fig4_z12", eps: 0.1, c1: -1.0, c2: Some(2.5), delta: -0.5 },
    Row { name: "fig4_z8", eps: 0.1, c1: -1.0, c2: Some(2.5), delta: -0.5 },
    Row { name: "fig4_z4", eps: 0.1, c1: -1.0, c2: Some(2.5), delta: -0.5 },
    Row { name: "fig4_z0", eps: 0.1, c1: -1.0, c2: Some(2.5), delta: -0.5 },
    Row { name: "fig5", eps: 0.05, c1: -1.2, c2: Some(1.2), delta: -0.5 },
];

#[test]
fn every_preset_matches_the_caption_table() {
    let all: Vec<_> = FIGURES.iter().flat_map(|f| figure_presets(f).unwrap()).collect();
    assert_eq!(all.len(), ROWS.len());
    assert_eq!(PRESETS.len(), ROWS.len());
    for row in ROWS {
        let cfg = all.iter().find(|c| c.name == row.name).unwrap_or_else(|| panic!("{}", row.name));
        assert_eq!(cfg.shift.epsilon, row.eps, "{}", row.name);
        match row.c2 {
            None => {
                assert_eq!(cfg.case, Case::SingleSpeed, "{}", row.name);
                assert_eq!(cfg.shift.c, Some(row.c1), "{}", row.name);
                // single-speed presets carry -delta as a constant offset
                assert_eq!(cfg.landscape.offset, Some(-row.delta), "{}", row.name);
            }
            Some(c2) => {
                assert_eq!(cfg.case, Case::TwoSpeed, "{}", row.name);
                assert_eq!(cfg.shift.c1, Some(row.c1), "{}", row.name);
                assert_eq!(cfg.shift.c2, Some(c2), "{}", row.name);
                assert_eq!(cfg.landscape.delta, Some(row.delta), "{}", row.name);
            }
        }
    }
}

#[test]
fn fig1_and_fig2_share_the_quartic_quadratic_landscape() {
    for name in ["fig1", "fig2_eps", "fig2_limit"] {
        let cfg = PRESETS.iter().find(|p| p.file.starts_with(name)).unwrap();
        let cfg = lagshift::ExperimentConfig::from_toml(cfg.text).unwrap();
        assert_eq!(cfg.landscape.terms, vec![quart(2.5, 35.0), quad(2.5, 40.0)], "{name}");
        let init = cfg.initial.unwrap();
        assert_eq!((init.amp, init.center, init.width), (0.1, 37.5, 10.0_f64.powi(2)), "{name}");
    }
    let fig1 = &figure_presets("fig1").unwrap()[0];
    assert_eq!(fig1.solver, Solver::Fd);
    assert_eq!(fig1.initial.as_ref().unwrap().kind, InitialKind::Gaussian);
    let fig2 = figure_presets("fig2").unwrap();
    let solvers: Vec<_> = fig2.iter().map(|c| c.solver).collect();
    assert_eq!(solvers, vec![Solver::HjEps, Solver::HjLimit]);
    for c in &fig2 {
        assert_eq!(c.output.snapshot_times, vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(c.initial.as_ref().unwrap().kind, InitialKind::LogQuadratic);
    }
}

#[test]
fn two_peak_presets_place_the_peaks() {
    let fig3 = figure_presets("fig3").unwrap();
    for c in &fig3 {
        assert_eq!(c.landscape.peak1, Some(quad(1.75, 32.0)), "{}", c.name);
        assert_eq!(c.landscape.peak2, Some(quad(2.5, 48.0)), "{}", c.name);
    }
    for c in figure_presets("fig4").unwrap() {
        let z: f64 = c.name.trim_start_matches("fig4_z").parse().unwrap();
        assert_eq!(c.landscape.peak1, Some(quad(1.75, 28.0 + z)), "{}", c.name);
        assert_eq!(c.landscape.peak2, Some(quad(2.5, 52.0 - z)), "{}", c.name);
    }
    let fig5 = &figure_presets("fig5").unwrap()[0];
    assert_eq!(fig5.landscape.peak1, Some(quad(1.75, 40.0)));
    assert_eq!(fig5.landscape.peak2, Some(quad(2.5, 40.0)));
}
