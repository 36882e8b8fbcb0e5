use std::time::Instant;

use semismooth::problems::{lower_level_graph_sampler, lower_level_mapping_wrong, negative_controls, registry};
use semismooth::sampling::Sampler;
use semismooth::verify::{
    clarke_containment, scd_ss_ratio, scd_ss_ratio_with, singleton_fraction, ss_ratio, ClarkeOptions,
    RatioOptions, SingletonOptions,
};

#[test]
fn certified_points_pass() {
    for p in registry() {
        for x in &p.certified_points {
            let prof = ss_ratio(&p.function, &p.derivative, x, &RatioOptions::default()).unwrap();
            assert!(prof.pass, "{} at {x:?}: {prof:?}", p.name);
        }
    }
}

#[test]
fn negative_controls_fail() {
    for c in negative_controls() {
        let prof = ss_ratio(&c.function, &c.derivative, &c.point, &RatioOptions::default()).unwrap();
        assert!(!prof.pass, "{}", c.name);
        assert!(prof.final_ratio() >= 0.1, "{}: {prof:?}", c.name);
    }
}

#[test]
fn clarke_containment_on_random_points() {
    for p in registry() {
        let f = p.scalar_function().unwrap();
        let mut s = Sampler::new(p.dim, 11);
        let mut pts = p.certified_points.clone();
        pts.extend((0..20).map(|_| s.next_in_box(&p.verify_box.0, &p.verify_box.1)));
        for x in pts {
            let rep = clarke_containment(&f, &p.derivative, &x, &ClarkeOptions::default()).unwrap();
            assert!(rep.contained, "{} at {x:?}: {rep:?}", p.name);
        }
    }
}

#[test]
fn singleton_almost_everywhere() {
    for p in registry() {
        let t = Instant::now();
        let frac = singleton_fraction(&p.derivative, &p.verify_box.0, &p.verify_box.1, 2000, &SingletonOptions::default()).unwrap();
        println!("{}: {frac} in {:?}", p.name, t.elapsed());
        assert!(frac >= 0.999, "{}: {frac}", p.name);
    }
}

#[test]
fn lower_level_scd_ratio() {
    let p = registry().into_iter().find(|p| p.name == "paper_lower_level").unwrap();
    let scd = p.scd.unwrap();
    for z in &scd.certified_graph_points {
        let prof = scd_ss_ratio(&scd.mapping, z, scd.graph_sampler.as_ref(), &RatioOptions::default()).unwrap();
        assert!(prof.pass, "{z:?}: {prof:?}");
    }
    let wrong = lower_level_mapping_wrong();
    let prof = scd_ss_ratio_with(
        &[0.0, 0.0, 0.0],
        &lower_level_graph_sampler,
        &RatioOptions::default(),
        |x, y, z| wrong.sc_eval(x, y, z),
        1,
        1,
    )
    .unwrap();
    assert!(prof.final_ratio() >= 0.5, "{prof:?}");
}
