use swarm_density::crossval::cross_validate;
use swarm_density::oracle::FluxScheme;
use swarm_density::runner::prepare;
use swarm_density::scenario::Scenario;

const BIMODAL: &str = "name = bimodal\ndesired.kind = mixture\n\
                       desired.components = 0.3 0.3 0.1 1; 0.7 0.7 0.1 1\n\
                       bandwidth.h = 0.05\ncontrol.D = 5\nsim.N = 2000\nsim.dt = 5e-5\n";

#[test]
fn particles_track_the_grid_solution() {
    for seed in 0..3 {
        let mut s = Scenario::parse(BIMODAL, None).unwrap();
        s.seed = seed;
        let p = prepare(&s).unwrap();
        let sim = p.simulation(&s).unwrap();
        let cv = cross_validate(&sim, &p.desired, &p.config, FluxScheme::Upwind, 10_000).unwrap();
        assert!(cv.error_end <= cv.error_start / std::f64::consts::E);
        assert!(cv.rel_l1 < 0.15, "seed {seed}: {cv:?}");
    }
}

#[test]
fn rendered_manifest_is_a_fixed_point() {
    let s = Scenario::parse(BIMODAL, None).unwrap();
    let text = s.render().unwrap();
    let back = Scenario::parse(&text, None).unwrap();
    // Defaults that depend on other keys are written out resolved.
    assert_eq!(s.f_floor, None);
    assert_eq!(back.f_floor, Some(0.01));
    assert_eq!(
        Scenario {
            f_floor: None,
            ..back.clone()
        },
        s
    );
    assert_eq!(back.render().unwrap(), text);
}
