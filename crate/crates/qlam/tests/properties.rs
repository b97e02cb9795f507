//! Randomized invariants across the modules, driven by seeded
//! generators so failures replay deterministically.

use proptest::prelude::*;
use qlam::gen::{ground_term, higher_order_term, random_type};
use qlam::mll::{negate, translate_type};
use qlam::oracle::{normalize_term, SuperposedTerm, WeightedTerm};
use qlam::quantum::{permute, GateLibrary, Permutation, Register};
use qlam::syntax::{alpha_eq, parse_term, pretty};
use qlam::typing::{noccs, poccs};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

proptest! {
    #[test]
    fn alpha_eq_is_reflexive_and_respects_pretty(seed: u64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let t = higher_order_term(&mut rng, 4, 4, 2);
        prop_assert!(alpha_eq(&t, &t));
        let reparsed = parse_term(&pretty(&t)).unwrap();
        prop_assert!(alpha_eq(&t, &reparsed));
        prop_assert_eq!(t.bit_labels(), reparsed.bit_labels());
    }

    #[test]
    fn poccs_noccs_partition_bit_leaves(seed: u64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ty = random_type(&mut rng, 4);
        let pos = poccs(&ty);
        let neg = noccs(&ty);
        prop_assert_eq!(pos.len() + neg.len(), ty.bit_leaves());
        for p in &pos {
            prop_assert!(!neg.contains(p));
        }
    }

    #[test]
    fn mll_translation_matches_polarities(seed: u64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let ty = random_type(&mut rng, 4);
        let f = translate_type(&ty);
        let (p, n) = f.atom_counts();
        prop_assert_eq!(p, poccs(&ty).len());
        prop_assert_eq!(n, noccs(&ty).len());
        prop_assert_eq!(negate(&negate(&f)), f);
    }

    #[test]
    fn permutation_round_trips_registers(seed: u64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=5usize);
        let mut map: Vec<usize> = (1..=n).collect();
        for i in (1..n).rev() {
            map.swap(i, rng.gen_range(0..=i));
        }
        let sigma = Permutation::new(map).unwrap();
        let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let q = Register::basis(&bits);
        let there = permute(&sigma, &q).unwrap();
        let back = permute(&sigma.inverse(), &there).unwrap();
        prop_assert!(back.max_deviation(&q) == 0.0);
        let composed = permute(&sigma.inverse().compose(&sigma), &q).unwrap();
        prop_assert!(composed.max_deviation(&q) == 0.0);
    }

    #[test]
    fn normalization_is_branch_order_independent(seed: u64) {
        let lib = GateLibrary::builtin();
        let mut rng = StdRng::seed_from_u64(seed);
        let a = ground_term(&mut rng, 3, 3);
        let b = ground_term(&mut rng, 3, 3);
        let amp = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let fwd = SuperposedTerm::from_branches(vec![
            WeightedTerm { amp, term: a.clone() },
            WeightedTerm { amp, term: b.clone() },
        ]);
        let rev = SuperposedTerm::from_branches(vec![
            WeightedTerm { amp, term: b },
            WeightedTerm { amp, term: a },
        ]);
        let nf_fwd = qlam::oracle::normalize(&fwd, &lib).unwrap();
        let nf_rev = qlam::oracle::normalize(&rev, &lib).unwrap();
        prop_assert_eq!(nf_fwd.to_json(), nf_rev.to_json());
    }

    #[test]
    fn normal_forms_are_normal(seed: u64) {
        let lib = GateLibrary::builtin();
        let mut rng = StdRng::seed_from_u64(seed);
        let t = ground_term(&mut rng, 4, 4);
        let nf = normalize_term(&t, &lib).unwrap();
        let again = qlam::oracle::normalize(&nf, &lib).unwrap();
        prop_assert_eq!(nf, again);
    }
}
