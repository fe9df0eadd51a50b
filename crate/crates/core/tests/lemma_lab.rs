mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trilab::exact::{cycle_size_resolved, cycle_two_point};
use trilab::lemma_lab::{localization_radius, overlap, proof_pipeline, verify_lemma, Verdict};
use trilab::VertexVector;

#[test]
fn random_witnesses_on_torus() {
    let g = common::graph("torus:2,8");
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let v = rng.gen_range(0..64);
        let f = VertexVector::from_vec(
            (0..64).map(|x| rng.gen_range(-1.0..1.0) * 0.5f64.powi(g.distance(v, x) as i32)).collect(),
        )
        .unwrap();
        let w = localization_radius(&g, &f, v, 0.01).unwrap();
        assert!(w.check(&g, &f));
        assert!(w.tail_norm < 0.01 / (3.0 * f.norm()));
    }
}

#[test]
fn far_translations_separate_support() {
    let g = common::graph("cycle:200");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let v = rng.gen_range(0..200);
        let decay: f64 = rng.gen_range(0.2..0.8);
        let f = VertexVector::from_vec(
            (0..200).map(|x| decay.powi(g.distance(v, x) as i32) * rng.gen_range(0.5..1.5)).collect(),
        )
        .unwrap();
        let delta = rng.gen_range(0.001..0.5) * f.dot(&f);
        let r = verify_lemma(&g, &f, v, delta).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        assert!(r.separated && r.distance_chain && r.local_overlap_zero && r.split_bound);
        let witness = localization_radius(&g, &f, v, delta).unwrap();
        for w in g.outside_ball(v, witness.radius) {
            let phi = g.translation_to(v, w);
            assert_eq!(overlap(&witness.f_loc, &phi), 0.0);
        }
    }
}

#[test]
fn pipeline_on_cycle() {
    let g = common::graph("cycle:40");
    let b = cycle_two_point(40, 0.3f64).unwrap();
    let fam = cycle_size_resolved(40, 0.3f64).unwrap();
    let r = proof_pipeline(&g, &b, &fam, 0, 0.1).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    assert!(r.n_cut >= 1 && r.tail_after_cut < 0.05);
    assert!(r.worst_q.unwrap() <= 0.1);
    let r2 = proof_pipeline(&g, &b, &fam, 0, 0.1).unwrap();
    assert_eq!(r, r2);
}
