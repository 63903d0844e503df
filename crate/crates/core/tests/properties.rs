use lrcc_core::bounds::{self, BoundCase};
use lrcc_core::entropy::{EntropyOracle, LinearView};
use lrcc_core::galois::MatrixRecord;
use lrcc_core::lrc::construct_pyramid;
use lrcc_core::{Element, Field, FieldMatrix, FieldSpec, LrcParams, MergeSpec, NodeIndex};
use proptest::prelude::*;

fn field_for(w: u32) -> Field {
    match w {
        4 => Field::gf16(),
        8 => Field::gf256(),
        _ => Field::new(FieldSpec::gf65536()),
    }
}

fn matrix(rows: usize, cols: usize, q: u32) -> impl Strategy<Value = FieldMatrix> {
    prop::collection::vec(0..q, rows * cols).prop_map(move |v| {
        FieldMatrix::new(rows, cols, v.into_iter().map(|x| x as Element).collect()).unwrap()
    })
}

fn small_matrix(q: u32) -> impl Strategy<Value = FieldMatrix> {
    (1usize..6, 1usize..6).prop_flat_map(move |(r, c)| matrix(r, c, q))
}

fn merge_spec() -> impl Strategy<Value = MergeSpec> {
    (
        1usize..=12,
        0usize..=6,
        2usize..=4,
        0usize..=6,
        1usize..=3,
        1usize..=3,
        any::<prop::sample::Index>(),
    )
        .prop_map(|(ki, gi, lambda, gf, delta, alpha, pick)| {
            let divisors: Vec<usize> = (1..=ki).filter(|d| ki % d == 0).collect();
            let r = divisors[pick.index(divisors.len())];
            MergeSpec::new(ki, gi, r, delta, lambda, gf, alpha).unwrap()
        })
}

proptest! {
    #[test]
    fn field_axioms(w in prop::sample::select(vec![4u32, 8, 16]), a: u16, b: u16, c: u16) {
        let f = field_for(w);
        let m = (f.q() - 1) as u16;
        let (a, b, c) = (a & m, b & m, c & m);
        prop_assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }

    #[test]
    fn rank_properties(a in small_matrix(256), b in small_matrix(256)) {
        let f = Field::gf256();
        let ra = a.rank(&f);
        prop_assert_eq!(ra, a.transpose().rank(&f));
        prop_assert!(ra <= a.rows().min(a.cols()));
        if a.cols() == b.cols() {
            let s = FieldMatrix::vstack(&[&a, &b], a.cols()).unwrap();
            let rs = s.rank(&f);
            prop_assert!(rs >= ra.max(b.rank(&f)));
            prop_assert!(rs <= ra + b.rank(&f));
        }
    }

    #[test]
    fn solve_and_kernel(a in small_matrix(16), x in prop::collection::vec(0u16..16, 6)) {
        let f = Field::gf16();
        let x = FieldMatrix::new(a.cols(), 1, x[..a.cols()].to_vec()).unwrap();
        let b = a.mul(&x, &f).unwrap();
        let y = a.solve(&b, &f).unwrap();
        prop_assert_eq!(a.mul(&y, &f).unwrap(), b);
        let k = a.kernel(&f);
        prop_assert_eq!(k.cols(), a.cols() - a.rank(&f));
        prop_assert!(a.mul(&k, &f).unwrap().is_zero());
    }

    #[test]
    fn matrix_record_round_trip(m in small_matrix(65536)) {
        let spec = FieldSpec::gf65536();
        let rec = MatrixRecord::encode(&m, spec);
        let json = serde_json::to_string(&rec).unwrap();
        let back: MatrixRecord = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.decode().unwrap(), (spec, m));
    }

    #[test]
    fn entropy_is_monotone_and_submodular(
        views in prop::collection::vec((1usize..3).prop_flat_map(|r| matrix(r, 5, 16)), 1..6),
        split in any::<prop::sample::Index>(),
    ) {
        let oracle = EntropyOracle::new(Field::gf16(), 5, 1);
        let views: Vec<LinearView> = views.into_iter().map(|m| LinearView::new("v", m)).collect();
        let refs: Vec<&LinearView> = views.iter().collect();
        let cut = split.index(refs.len() + 1);
        // A = refs[..cut+1], B = refs[cut..], overlapping in at most one view
        let a = &refs[..(cut + 1).min(refs.len())];
        let b = &refs[cut.min(refs.len() - 1)..];
        let both: Vec<&LinearView> = a.iter().filter(|v| b.iter().any(|w| std::ptr::eq(**v, *w))).copied().collect();
        let h = |s: &[&LinearView]| oracle.entropy(s).unwrap();
        let rows: usize = refs.iter().map(|v| v.matrix.rows()).sum();
        prop_assert!(h(a) <= h(&refs));
        prop_assert!(h(&refs) <= rows.min(5));
        prop_assert!(h(&refs) + h(&both) <= h(a) + h(b));
    }

    #[test]
    fn bound_cases_partition(s in merge_spec()) {
        let (gi, gf, r) = (s.g_initial, s.g_final, s.r);
        let guards = [
            gi.min(gf) > r,
            gi >= gf && r >= gf,
            gi < gf && gf <= r,
        ];
        let case = bounds::bound_case(&s);
        let expected = match guards.iter().position(|&g| g) {
            Some(0) => BoundCase::MinGAboveR,
            Some(1) => BoundCase::GfLeGiAndR,
            Some(2) => BoundCase::GiLtGfLeR,
            _ => BoundCase::Otherwise,
        };
        prop_assert_eq!(case, expected);
        prop_assert_eq!(guards.iter().filter(|&&g| g).count() <= 1, true);
    }

    #[test]
    fn cost_dominates_bound(s in merge_spec()) {
        let bound = bounds::lower_bound(&s).unwrap();
        let cost = bounds::construction_cost(&s).unwrap();
        prop_assert!(cost >= bound, "{s}: {cost} < {bound}");
        if s.delta == 1 && s.g_final <= s.r {
            prop_assert_eq!(cost, bound);
        }
    }

    #[test]
    fn scaling_alpha_scales_bound(s in merge_spec(), factor in 1usize..4) {
        let scaled = MergeSpec { alpha: s.alpha * factor, ..s };
        let b = bounds::lower_bound(&s).unwrap();
        prop_assert_eq!(bounds::lower_bound(&scaled).unwrap(), b * bounds::Symbols::from(factor));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decode_round_trip(
        shape in prop::sample::select(vec![(4, 2, 2, 1), (6, 1, 3, 2), (4, 0, 2, 2), (6, 2, 2, 1)]),
        seed: u64,
        msg in prop::collection::vec(0u16..256, 6),
        erase in prop::collection::vec(any::<prop::sample::Index>(), 0..5),
    ) {
        let (k, g, r, delta) = shape;
        let p = LrcParams::new(k, g, r, delta, 1).unwrap();
        let code = construct_pyramid(p, &Field::gf256(), seed).unwrap();
        let msg = &msg[..k];
        let cw = code.encode(msg).unwrap();
        let mut erased: Vec<NodeIndex> = erase.iter().map(|i| p.node(i.index(p.n()))).collect();
        erased.sort();
        erased.dedup();
        erased.truncate(g + delta);
        prop_assert_eq!(code.decode_erasures(&cw, &erased).unwrap(), msg.to_vec());
    }
}
