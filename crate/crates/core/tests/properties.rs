use num_traits::Zero;
use proptest::prelude::*;

use qgtype_core::classifier::{classify, t_test, type_three_test, ClassifierParams};
use qgtype_core::eigen::{EigenvalueList, Entry, Weight};
use qgtype_core::haar::{CompactOpenSet, MeasureKind, UnitSubgroup};
use qgtype_core::matched_pair::verify_identities;
use qgtype_core::padic::{PadicNumber, PrecisionContext};
use qgtype_core::rational::{self, Rational};
use qgtype_core::rules::{ListRule, SizeRule};
use qgtype_core::series::{decide, Atom, PrimeSeries};
use qgtype_core::spec::ItpfiSpec;
use qgtype_core::subset::{GrowthClass, PrimeSubset};

fn ctx() -> PrecisionContext {
    PrecisionContext::new(16).unwrap()
}

fn small_prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5, 7, 11])
}

fn rational_in(range: i64) -> impl Strategy<Value = Rational> {
    (-range..=range, 1..=range).prop_map(|(n, d)| rational::rat(n, d))
}

fn padic(p: u64) -> impl Strategy<Value = PadicNumber> {
    rational_in(400).prop_map(move |x| PadicNumber::from_ratio(&x, p, ctx()).unwrap())
}

fn padic_triple() -> impl Strategy<Value = (PadicNumber, PadicNumber, PadicNumber)> {
    small_prime().prop_flat_map(|p| (padic(p), padic(p), padic(p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn padic_field_axioms((a, b, c) in padic_triple()) {
        prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
        let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert!(a.sub(&a).unwrap().is_zero());
        if !a.is_zero() {
            let one = PadicNumber::one(a.prime(), ctx());
            prop_assert_eq!(a.mul(&a.inv().unwrap()).unwrap(), one);
        }
    }

    #[test]
    fn padic_norm_laws(p in small_prime(), x in rational_in(500), y in rational_in(500)) {
        let a = PadicNumber::from_ratio(&x, p, ctx()).unwrap();
        let b = PadicNumber::from_ratio(&y, p, ctx()).unwrap();
        prop_assert_eq!(a.mul(&b).unwrap().norm(), a.norm() * b.norm());
        let s = a.add(&b).unwrap();
        let max = if a.norm() > b.norm() { a.norm() } else { b.norm() };
        // exact for rationals well inside the precision window
        prop_assert!(s.is_zero() || s.norm() <= max);
        prop_assert_eq!(PadicNumber::from_ratio(&(&x + &y), p, ctx()).unwrap(), s);
    }

    #[test]
    fn padic_text_round_trip(p in small_prime(), x in rational_in(1000)) {
        let a = PadicNumber::from_ratio(&x, p, ctx()).unwrap();
        let back: PadicNumber = a.to_string().parse().unwrap();
        prop_assert_eq!(back.to_string(), a.to_string());
    }

    #[test]
    fn measure_additive_and_invariant(p in small_prime(), c1 in 0i64..50, c2 in 0i64..50, k in 1i64..4, t in -20i64..20) {
        let b1 = CompactOpenSet::ball(p, &rational::int(c1), k).unwrap();
        let b2 = CompactOpenSet::ball(p, &rational::int(c2), k).unwrap();
        let union = b1.union(&b2);
        let add = |s: &CompactOpenSet| s.measure(MeasureKind::Add).unwrap();
        let inter = b1.intersect(&b2);
        prop_assert_eq!(add(&union) + add(&inter), add(&b1) + add(&b2));
        prop_assert_eq!(add(&union.translate(&rational::int(t)).unwrap()), add(&union));
        // multiplicative measure is invariant under units
        let u = CompactOpenSet::ball(p, &rational::int(1), k).unwrap();
        let unit = rational::int(if p == 2 { 3 } else { p as i64 - 1 });
        let scaled = u.scale(&unit).unwrap();
        prop_assert_eq!(scaled.measure(MeasureKind::Mult).unwrap(), u.measure(MeasureKind::Mult).unwrap());
    }

    #[test]
    fn coset_counts_match_measure(p in small_prime(), n in 0u32..4) {
        // orbits of 1 + pZ_p on p^n Z_p* number p - 1
        let z = CompactOpenSet::integers(p).unwrap();
        prop_assert_eq!(z.coset_count(n, UnitSubgroup::OnePlus(1)).unwrap(), p - 1);
        prop_assert_eq!(z.coset_count(n, UnitSubgroup::Units).unwrap(), 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cocycle_laws_hold(p in small_prime(), seed in any::<u64>()) {
        let r = verify_identities(p, 8, seed, ctx()).unwrap();
        prop_assert!(r.all_passed(), "{:?}", r);
    }
}

fn finite_list() -> impl Strategy<Value = EigenvalueList> {
    prop::collection::vec((1i64..20, 1u64..4), 1..4).prop_map(|raw| {
        let total: i64 = raw.iter().map(|&(w, m)| w * m as i64).sum();
        EigenvalueList::finite(raw.into_iter().map(|(w, m)| Entry::new(Weight::rat(w, total), m)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_commutative_associative(a in finite_list(), b in finite_list(), c in finite_list()) {
        let ab = a.tensor(&b).unwrap();
        prop_assert_eq!(&ab, &b.tensor(&a).unwrap());
        prop_assert_eq!(ab.tensor(&c).unwrap(), a.tensor(&b.tensor(&c).unwrap()).unwrap());
        prop_assert_eq!(ab.mass(), Weight::one());
        prop_assert_eq!(a.tensor(&EigenvalueList::point_mass()).unwrap(), a);
    }

    #[test]
    fn tensor_with_tail_keeps_mass(p in small_prime(), a in finite_list()) {
        let t = ListRule::corner_units().list_at(p).unwrap().tensor(&a).unwrap();
        prop_assert_eq!(t.mass(), Weight::one());
    }

    #[test]
    fn series_soundness(atoms in prop::collection::vec((1i64..5, 1i64..8, 1i64..4, 0u64..2), 1..4)) {
        // coeff * p^{-s} (1 - 1/p)^{-k} shifted by a
        let built: Vec<Atom> = atoms
            .iter()
            .map(|&(c, s2, k, shift)| {
                let mut a = Atom::power(rational::int(c), rational::rat(s2 + 2, 2));
                if k > 1 {
                    a = a.with_factor(rational::int(1), -(k as i32 - 1));
                }
                a.with_shift(shift)
            })
            .collect();
        for index in [PrimeSubset::all_primes(), PrimeSubset::growth(GrowthClass::Polynomial { degree: 2 }).unwrap()] {
            let series = PrimeSeries::new(built.clone(), index);
            let v = decide(&series).unwrap();
            prop_assert!(v.converges(), "{}", v);
            if let qgtype_core::series::Verdict::Converges { upper_bound, .. } = &v {
                let (partial, _) = series.partial_sum(10_000);
                prop_assert!(partial <= rational::to_f64(upper_bound));
            }
        }
    }

    #[test]
    fn series_monotone(s in 1i64..6) {
        let base = PrimeSeries::single(Atom::power(rational::int(1), rational::int(1)), PrimeSubset::all_primes());
        let extra = PrimeSeries::single(Atom::power(rational::int(1), rational::rat(s, 2)), PrimeSubset::all_primes());
        prop_assert!(decide(&base).unwrap().diverges());
        prop_assert!(decide(&base.plus(&extra)).unwrap().diverges());
    }
}

fn builtin_rule() -> impl Strategy<Value = ListRule> {
    prop_oneof![
        Just(ListRule::corner_units()),
        Just(ListRule::corner_ls()),
        (1i64..=10).prop_map(|n| ListRule::boca(rational::rat(n, 10))),
        (1i64..10).prop_map(|n| ListRule::Powers { lambda: rational::rat(n, 10) }),
        (2u64..6).prop_map(|k| ListRule::Uniform(SizeRule::Const(k))),
    ]
}

fn builtin_subset() -> impl Strategy<Value = PrimeSubset> {
    prop_oneof![
        Just(PrimeSubset::all_primes()),
        Just(PrimeSubset::growth(GrowthClass::Polynomial { degree: 2 }).unwrap()),
        Just(PrimeSubset::growth(GrowthClass::Lacunary).unwrap()),
        Just("ap:1:4".parse().unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn c_robustness(rule in builtin_rule(), subset in builtin_subset(), c_num in 1i64..=16) {
        let spec = ItpfiSpec::new(subset, rule);
        let c = rational::rat(c_num, 4);
        let base = type_three_test(&spec, &ClassifierParams::default()).unwrap();
        let other = type_three_test(&spec, &ClassifierParams { c, ..Default::default() }).unwrap();
        prop_assert_eq!(base.converges(), other.converges());
        prop_assert_eq!(base.diverges(), other.diverges());
    }

    #[test]
    fn t_zero_converges(rule in builtin_rule(), subset in builtin_subset()) {
        prop_assert!(t_test(&ItpfiSpec::new(subset, rule), 0.0).unwrap().converges());
    }

    #[test]
    fn point_mass_factors_do_not_change_type(rule in builtin_rule(), subset in builtin_subset()) {
        let params = ClassifierParams { truncation: Some(qgtype_core::spec::Truncation { primes: 64, levels: 16 }), ..Default::default() };
        let spec = ItpfiSpec::new(subset.clone(), rule.clone());
        let padded = ItpfiSpec::new(subset, ListRule::Tensor(vec![ListRule::PointMass, rule]));
        let a = classify(&spec, &params).unwrap().factor;
        let b = classify(&padded, &params).unwrap().factor;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn explicit_order_irrelevant(mut primes in prop::sample::subsequence(vec![2u64, 3, 5, 7, 11, 13, 17, 19], 1..8)) {
        let spec = |v: Vec<u64>| ItpfiSpec::new(PrimeSubset::explicit(v).unwrap(), ListRule::Powers { lambda: rational::rat(1, 3) });
        let a = classify(&spec(primes.clone()), &ClassifierParams::default()).unwrap().factor;
        primes.reverse();
        let b = classify(&spec(primes), &ClassifierParams::default()).unwrap().factor;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn subset_members_increasing(subset in builtin_subset()) {
        let v = subset.primes(200);
        prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(v.iter().all(|&p| qgtype_core::padic::is_prime(p)));
    }
}

#[test]
fn zero_rational_is_zero_padic() {
    let z = PadicNumber::from_ratio(&Rational::zero(), 5, ctx()).unwrap();
    assert!(z.is_zero());
    assert_eq!(z.to_string(), "p=5 v=inf digits=");
}
