use qlink::atmosphere::{AtmosphereProfile, LinkGeometry};
use qlink::ensemble::{run_ensembles, GridSettings};

fn encircled(geom: &LinkGeometry, ra: f64) -> f64 {
    let w = geom.beam_radius_at(geom.path_length());
    1.0 - (-2.0 * ra * ra / (w * w)).exp()
}

fn check(n: usize, tol: f64) {
    let geom = LinkGeometry::reference(0.0, 0.5).unwrap();
    let calm = AtmosphereProfile::reference().unwrap().scaled(0.0).unwrap();
    let radii = [0.15, 0.3, 0.5];
    let grid = GridSettings { size: n, receiver_window: None };
    let ens = run_ensembles(&geom, &calm, grid, 1, 1, &radii).unwrap();
    for (e, ra) in ens.iter().zip(radii) {
        let expect = encircled(&geom, ra);
        let got = e.etas()[0];
        println!("n={n} ra={ra} eta={got:.6e} oracle={expect:.6e} rel={:.2e}", got / expect - 1.0);
        assert!((got / expect - 1.0).abs() < tol);
    }
}

#[test]
fn vacuum_matches_encircled_power_512() {
    check(512, 0.02);
}

#[test]
fn vacuum_matches_encircled_power_1024() {
    check(1024, 0.01);
}
