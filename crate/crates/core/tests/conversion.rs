use lrcc_core::bounds::{self, Symbols};
use lrcc_core::conversion::{
    build_merge_pair, classify_nodes, default_reencode_procedure, execute, merge_optimal_procedure,
    random_message, NodeRole,
};
use lrcc_core::entropy::{
    check_codeword_independence, check_coordinator, check_download_constraint, download_entropies,
};
use lrcc_core::{Field, MergeSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(
    ki: usize,
    gi: usize,
    r: usize,
    delta: usize,
    lambda: usize,
    gf: usize,
    alpha: usize,
) -> MergeSpec {
    MergeSpec::new(ki, gi, r, delta, lambda, gf, alpha).unwrap()
}

#[test]
fn figure_three_with_sub_packetization() {
    let s = spec(9, 3, 3, 1, 2, 3, 2);
    let field = Field::gf256();
    let pair = build_merge_pair(&s, &field, 1).unwrap();
    let roles = classify_nodes(&pair, &s).unwrap();
    assert_eq!(
        (
            roles.count(NodeRole::New),
            roles.count(NodeRole::Retired),
            roles.count(NodeRole::Unchanged)
        ),
        (3, 6, 24)
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let merge = merge_optimal_procedure(&pair, &s).unwrap();
    let default = default_reencode_procedure(&pair, &s).unwrap();
    for _ in 0..10 {
        let m = random_message(&s, &field, &mut rng);
        let (a, ra) = execute(&merge, &pair, &m).unwrap();
        let (b, rb) = execute(&default, &pair, &m).unwrap();
        assert_eq!(a, b);
        assert_eq!((ra.gamma_r, rb.gamma_r), (12, 36));
        assert_eq!((ra.gamma_w, ra.gap), (6, Symbols::int(0)));
    }
    assert!(check_coordinator(&pair, &merge.plan).unwrap().passed());
    assert!(check_codeword_independence(&pair).unwrap().passed());
}

#[test]
fn re_encode_reads_every_information_node() {
    let s = spec(9, 3, 3, 1, 2, 2, 1);
    let pair = build_merge_pair(&s, &Field::gf256(), 0).unwrap();
    let proc = default_reencode_procedure(&pair, &s).unwrap();
    assert_eq!(proc.plan.gamma_r(), 18);
    assert!(proc.plan.beta().iter().all(|&b| b == 1));
    assert!(proc
        .plan
        .sigma()
        .iter()
        .chain(&proc.plan.deltas())
        .all(|&x| x == 0));
}

#[test]
fn download_entropies_for_small_spec() {
    let s = spec(4, 2, 2, 1, 2, 2, 1);
    let pair = build_merge_pair(&s, &Field::gf256(), 0).unwrap();
    let merge = merge_optimal_procedure(&pair, &s).unwrap();
    let e = download_entropies(&pair, &merge.plan).unwrap();
    assert_eq!(e.u_blocks, vec![2, 2]);
    assert_eq!(bounds::lemma5_lhs(&e, &s).unwrap(), Symbols::int(4));
    let default = default_reencode_procedure(&pair, &s).unwrap();
    let c = check_download_constraint(&pair, &default.plan).unwrap();
    assert_eq!(
        (c.lhs, c.rhs, c.holds),
        (Symbols::int(4), Symbols::int(4), true)
    );
}

#[test]
fn gap_report_flags_optimal() {
    let s = spec(8, 4, 4, 1, 2, 3, 1);
    let r = bounds::gap_report(&s, Symbols::int(6)).unwrap();
    assert_eq!(r.optimal, Some(true));
    let r = bounds::gap_report(&s, Symbols::int(16)).unwrap();
    assert_eq!(r.gap, Some(Symbols::int(10)));
    assert!(bounds::gap_report(&s, Symbols::int(5)).is_err());
}
