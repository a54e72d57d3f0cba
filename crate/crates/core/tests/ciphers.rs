use neurodiff::present::{self, PresentKey80};
use neurodiff::simeck::{self, SimeckKey128};
use neurodiff::{CipherKind, RoundReduced};
use proptest::prelude::*;

proptest! {
    #[test]
    fn present_round_trips(p in any::<u64>(), k in any::<u128>(), r in 1usize..=31) {
        let key = PresentKey80::new(k & CipherKind::Present.key_mask());
        let c = present::present_encrypt(p, key, r).unwrap();
        prop_assert_eq!(present::present_decrypt(c, key, r).unwrap(), p);
    }

    #[test]
    fn simeck_round_trips(p in any::<u64>(), k in any::<u128>(), r in 1usize..=44) {
        let key = SimeckKey128::from_u128(k);
        let c = simeck::simeck_encrypt(p, key, r).unwrap();
        prop_assert_eq!(simeck::simeck_decrypt(c, key, r).unwrap(), p);
    }

    #[test]
    fn present_layers_invert(x in any::<u64>()) {
        prop_assert_eq!(present::sbox_layer_inv(present::sbox_layer(x)), x);
        prop_assert_eq!(present::p_layer_inv(present::p_layer(x)), x);
        prop_assert_eq!(present::p_layer(x).count_ones(), x.count_ones());
    }

    #[test]
    fn round_reduced_matches_direct_calls(p in any::<u64>(), k in any::<u128>(), r in 1usize..=6) {
        let pres = RoundReduced::new(CipherKind::Present, r).unwrap();
        let km = k & CipherKind::Present.key_mask();
        prop_assert_eq!(pres.encrypt(p, km), present::present_encrypt(p, PresentKey80::new(km), r).unwrap());
        let sim = RoundReduced::new(CipherKind::Simeck, r).unwrap();
        prop_assert_eq!(sim.encrypt(p, k), simeck::simeck_encrypt(p, SimeckKey128::from_u128(k), r).unwrap());
        let keyed = sim.schedule(k);
        prop_assert_eq!(keyed.decrypt(keyed.encrypt(p)), p);
    }

    #[test]
    fn encryption_is_deterministic_per_key(p in any::<u64>(), k in any::<u128>()) {
        let c = RoundReduced::new(CipherKind::Simeck, 5).unwrap();
        prop_assert_eq!(c.encrypt(p, k), c.encrypt(p, k));
    }
}

#[test]
fn round_bounds() {
    assert!(RoundReduced::new(CipherKind::Present, 0).is_err());
    assert!(RoundReduced::new(CipherKind::Present, 32).is_err());
    assert!(RoundReduced::new(CipherKind::Simeck, 45).is_err());
    assert!(RoundReduced::new(CipherKind::Identity, 1).is_err());
    assert_eq!(RoundReduced::identity().encrypt(42, 7), 42);
    assert_eq!("PRESENT".parse::<CipherKind>().unwrap(), CipherKind::Present);
    assert!("aes".parse::<CipherKind>().is_err());
}
