//! The ax+b group over finitely supported adeles and its matched pair
//! `G1 = {(g, 0)}`, `G2 = {(s, (1 - s)/p)}`.
//!
//! With `gs = alpha_g(s) beta_s(g)` the actions are, prime by prime,
//!
//! ```text
//! alpha_g(s) = g(s - 1) + 1
//! beta_s(g)  = g s / (g(s - 1) + 1)
//! ```
//!
//! `alpha` is a left action of G1 on G2. `beta` composes as
//! `beta_{st} = beta_t o beta_s`, i.e. it is a right action of G2 on G1; the
//! tests check exactly this orientation.
//!
//! Components not listed in a family take the tail value: 1 for unit
//! families and G2 elements, `(1, 0)` for ax+b elements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::padic::{PadicError, PadicNumber, PrecisionContext};
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchedPairError {
    #[error("singular pair at p={0}: g(s - 1) + 1 = 0")]
    SingularPair(u64),
    #[error("element lies in the null complement at p={0}: b_p = 1/p")]
    NullSetElement(u64),
    #[error("zero component at p={0}")]
    ZeroComponent(u64),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error("cannot parse adelic element: {0}")]
    Parse(String),
}

type Result<T> = std::result::Result<T, MatchedPairError>;

/// One component of an adelic element: an exact rational when possible,
/// otherwise a truncated p-adic number.
#[derive(Debug, Clone)]
pub enum Component {
    Exact(Rational),
    Padic(PadicNumber),
}

impl Component {
    pub fn int(n: i64) -> Self {
        Component::Exact(rational::int(n))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Component::Exact(r) => r.is_zero(),
            Component::Padic(x) => x.is_zero(),
        }
    }

    pub fn valuation(&self, p: u64) -> Option<i64> {
        match self {
            Component::Exact(r) => rational::valuation(r, p),
            Component::Padic(x) => x.valuation(),
        }
    }

    fn padic(&self, p: u64, ctx: PrecisionContext) -> Result<PadicNumber> {
        match self {
            Component::Exact(r) => Ok(PadicNumber::from_ratio(r, p, ctx)?),
            Component::Padic(x) => Ok(x.clone()),
        }
    }

    fn lift2(
        &self,
        other: &Self,
        p: u64,
        ctx: PrecisionContext,
        exact: impl Fn(&Rational, &Rational) -> Option<Rational>,
        padic: impl Fn(&PadicNumber, &PadicNumber) -> std::result::Result<PadicNumber, PadicError>,
    ) -> Result<Self> {
        if let (Component::Exact(a), Component::Exact(b)) = (self, other) {
            return exact(a, b).map(Component::Exact).ok_or(MatchedPairError::ZeroComponent(p));
        }
        Ok(Component::Padic(padic(&self.padic(p, ctx)?, &other.padic(p, ctx)?)?))
    }

    fn add(&self, o: &Self, p: u64, ctx: PrecisionContext) -> Result<Self> {
        self.lift2(o, p, ctx, |a, b| Some(a + b), |a, b| a.add(b))
    }

    fn sub(&self, o: &Self, p: u64, ctx: PrecisionContext) -> Result<Self> {
        self.lift2(o, p, ctx, |a, b| Some(a - b), |a, b| a.sub(b))
    }

    fn mul(&self, o: &Self, p: u64, ctx: PrecisionContext) -> Result<Self> {
        self.lift2(o, p, ctx, |a, b| Some(a * b), |a, b| a.mul(b))
    }

    fn div(&self, o: &Self, p: u64, ctx: PrecisionContext) -> Result<Self> {
        if o.is_zero() {
            return Err(MatchedPairError::ZeroComponent(p));
        }
        self.lift2(o, p, ctx, |a, b| Some(a / b), |a, b| a.div(b))
    }

    /// Equality at the shared precision (exactly, for two rationals).
    pub fn eq_at(&self, o: &Self, p: u64, ctx: PrecisionContext) -> bool {
        match (self, o) {
            (Component::Exact(a), Component::Exact(b)) => a == b,
            _ => match (self.padic(p, ctx), o.padic(p, ctx)) {
                (Ok(a), Ok(b)) => a == b,
                _ => false,
            },
        }
    }

    fn to_text(&self) -> String {
        match self {
            Component::Exact(r) => rational::format_rational(r),
            Component::Padic(x) => x.to_string(),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        if s.contains("p=") {
            Ok(Component::Padic(s.parse()?))
        } else {
            rational::parse_rational(s)
                .map(Component::Exact)
                .ok_or_else(|| MatchedPairError::Parse(s.to_string()))
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A finitely supported family `(x_p)` with x_p = 1 off the support. Used for
/// G1 (unit tails) and, via [`G2Element`], for G2.
#[derive(Debug, Clone, Default)]
pub struct UnitFamily(pub BTreeMap<u64, Component>);

/// `((s_p), ((1 - s_p)/p))` with s_p = 1 off the support.
#[derive(Debug, Clone, Default)]
pub struct G2Element(pub BTreeMap<u64, Component>);

/// `((a_p), (b_p))` with `(a_p, b_p) = (1, 0)` off the support.
#[derive(Debug, Clone, Default)]
pub struct AxbElement(pub BTreeMap<u64, (Component, Component)>);

fn one() -> Component {
    Component::int(1)
}

fn get(map: &BTreeMap<u64, Component>, p: u64) -> Component {
    map.get(&p).cloned().unwrap_or_else(one)
}

fn support<'a>(a: impl Iterator<Item = &'a u64>, b: impl Iterator<Item = &'a u64>) -> BTreeSet<u64> {
    a.chain(b).copied().collect()
}

impl UnitFamily {
    pub fn single(p: u64, x: Component) -> Self {
        Self(BTreeMap::from([(p, x)]))
    }

    pub fn mul(&self, o: &Self, ctx: PrecisionContext) -> Result<Self> {
        let mut out = BTreeMap::new();
        for p in support(self.0.keys(), o.0.keys()) {
            out.insert(p, get(&self.0, p).mul(&get(&o.0, p), p, ctx)?);
        }
        Ok(Self(out))
    }

    pub fn inv(&self, ctx: PrecisionContext) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (&p, x) in &self.0 {
            out.insert(p, one().div(x, p, ctx)?);
        }
        Ok(Self(out))
    }

    pub fn eq_at(&self, o: &Self, ctx: PrecisionContext) -> bool {
        support(self.0.keys(), o.0.keys())
            .into_iter()
            .all(|p| get(&self.0, p).eq_at(&get(&o.0, p), p, ctx))
    }

    pub fn as_axb(&self) -> AxbElement {
        AxbElement(self.0.iter().map(|(&p, g)| (p, (g.clone(), Component::int(0)))).collect())
    }
}

impl G2Element {
    pub fn single(p: u64, s: Component) -> Self {
        Self(BTreeMap::from([(p, s)]))
    }

    pub fn mul(&self, o: &Self, ctx: PrecisionContext) -> Result<Self> {
        Ok(Self(UnitFamily(self.0.clone()).mul(&UnitFamily(o.0.clone()), ctx)?.0))
    }

    pub fn eq_at(&self, o: &Self, ctx: PrecisionContext) -> bool {
        UnitFamily(self.0.clone()).eq_at(&UnitFamily(o.0.clone()), ctx)
    }

    pub fn as_axb(&self, ctx: PrecisionContext) -> Result<AxbElement> {
        let mut out = BTreeMap::new();
        for (&p, s) in &self.0 {
            if s.is_zero() {
                return Err(MatchedPairError::ZeroComponent(p));
            }
            let b = one().sub(s, p, ctx)?.div(&Component::int(p as i64), p, ctx)?;
            out.insert(p, (s.clone(), b));
        }
        Ok(AxbElement(out))
    }
}

impl AxbElement {
    fn component(&self, p: u64) -> (Component, Component) {
        self.0.get(&p).cloned().unwrap_or_else(|| (one(), Component::int(0)))
    }

    /// `(a, b)(a', b') = (a a', a b' + b)`
    pub fn compose(&self, o: &Self, ctx: PrecisionContext) -> Result<Self> {
        let mut out = BTreeMap::new();
        for p in support(self.0.keys(), o.0.keys()) {
            let (a, b) = self.component(p);
            let (a2, b2) = o.component(p);
            let aa = a.mul(&a2, p, ctx)?;
            let bb = a.mul(&b2, p, ctx)?.add(&b, p, ctx)?;
            out.insert(p, (aa, bb));
        }
        Ok(Self(out))
    }

    pub fn eq_at(&self, o: &Self, ctx: PrecisionContext) -> bool {
        support(self.0.keys(), o.0.keys()).into_iter().all(|p| {
            let (a, b) = self.component(p);
            let (a2, b2) = o.component(p);
            a.eq_at(&a2, p, ctx) && b.eq_at(&b2, p, ctx)
        })
    }

    pub fn to_json(&self) -> Json {
        let mut primes = Map::new();
        for (p, (a, b)) in &self.0 {
            primes.insert(p.to_string(), json!({"a": a.to_text(), "b": b.to_text()}));
        }
        json!({"primes": primes, "tail": "integral"})
    }

    pub fn from_json(v: &Json) -> Result<Self> {
        let bad = |m: &str| MatchedPairError::Parse(m.to_string());
        let primes = v.get("primes").and_then(Json::as_object).ok_or_else(|| bad("missing primes"))?;
        match v.get("tail").and_then(Json::as_str) {
            None | Some("integral") => {}
            Some(other) => return Err(bad(&format!("unsupported tail {other}"))),
        }
        let mut out = BTreeMap::new();
        for (key, entry) in primes {
            let p: u64 = key.parse().map_err(|_| bad(key))?;
            if !crate::padic::is_prime(p) {
                return Err(PadicError::NotPrime(p).into());
            }
            let field = |name: &str| -> Result<Component> {
                let s = entry.get(name).and_then(Json::as_str).ok_or_else(|| bad(name))?;
                Component::parse(s)
            };
            let a = field("a")?;
            if a.is_zero() {
                return Err(MatchedPairError::ZeroComponent(p));
            }
            out.insert(p, (a, field("b")?));
        }
        Ok(Self(out))
    }
}

/// `alpha_g(s) = g(s - 1) + 1`, componentwise.
pub fn alpha(g: &UnitFamily, s: &G2Element, ctx: PrecisionContext) -> Result<G2Element> {
    let mut out = BTreeMap::new();
    for p in support(g.0.keys(), s.0.keys()) {
        let d = denominator(&get(&g.0, p), &get(&s.0, p), p, ctx)?;
        out.insert(p, d);
    }
    Ok(G2Element(out))
}

/// `beta_s(g) = g s / (g(s - 1) + 1)`, componentwise.
pub fn beta(s: &G2Element, g: &UnitFamily, ctx: PrecisionContext) -> Result<UnitFamily> {
    let mut out = BTreeMap::new();
    for p in support(g.0.keys(), s.0.keys()) {
        let (gp, sp) = (get(&g.0, p), get(&s.0, p));
        let d = denominator(&gp, &sp, p, ctx)?;
        out.insert(p, gp.mul(&sp, p, ctx)?.div(&d, p, ctx)?);
    }
    Ok(UnitFamily(out))
}

fn denominator(g: &Component, s: &Component, p: u64, ctx: PrecisionContext) -> Result<Component> {
    let d = g.mul(&s.sub(&one(), p, ctx)?, p, ctx)?.add(&one(), p, ctx)?;
    if d.is_zero() {
        Err(MatchedPairError::SingularPair(p))
    } else {
        Ok(d)
    }
}

/// Checks `(g, 0) s = alpha_g(s) beta_s(g)` in the ax+b group.
pub fn reconstruct_check(g: &UnitFamily, s: &G2Element, ctx: PrecisionContext) -> Result<bool> {
    let lhs = g.as_axb().compose(&s.as_axb(ctx)?, ctx)?;
    let rhs = alpha(g, s, ctx)?.as_axb(ctx)?.compose(&beta(s, g, ctx)?.as_axb(), ctx)?;
    Ok(lhs.eq_at(&rhs, ctx))
}

/// Splits `x = s h` with `s` in G2 and `h` in G1: `s_p = 1 - p b_p`,
/// `h_p = a_p / s_p`.
pub fn factorize(x: &AxbElement, ctx: PrecisionContext) -> Result<(G2Element, UnitFamily)> {
    let mut s_out = BTreeMap::new();
    let mut h_out = BTreeMap::new();
    for (&p, (a, b)) in &x.0 {
        let pb = Component::int(p as i64).mul(b, p, ctx)?;
        let s = one().sub(&pb, p, ctx)?;
        if s.is_zero() {
            return Err(MatchedPairError::NullSetElement(p));
        }
        h_out.insert(p, a.div(&s, p, ctx)?);
        s_out.insert(p, s);
    }
    Ok((G2Element(s_out), UnitFamily(h_out)))
}

/// Inverse of [`factorize`].
pub fn reconstruct(s: &G2Element, h: &UnitFamily, ctx: PrecisionContext) -> Result<AxbElement> {
    s.as_axb(ctx)?.compose(&h.as_axb(), ctx)
}

/// `delta(x) = prod_p 1/|x_p|_p`.
pub fn delta(x: &UnitFamily) -> Result<Rational> {
    let mut out = rational::int(1);
    for (&p, c) in &x.0 {
        let v = c.valuation(p).ok_or(MatchedPairError::ZeroComponent(p))?;
        out *= rational::prime_pow(p, v);
    }
    Ok(out)
}

/// `u(g, 0) = (g^{-1}, (1 - g^{-1})/p)`: the G1 element g viewed as the G2
/// element g^{-1}.
pub fn selfdual_u(g: &UnitFamily, ctx: PrecisionContext) -> Result<G2Element> {
    Ok(G2Element(g.inv(ctx)?.0))
}

/// Checks `u(beta_s(g)) = alpha_{u^{-1}(s)}(u(g))`.
pub fn selfdual_check(s: &G2Element, g: &UnitFamily, ctx: PrecisionContext) -> Result<bool> {
    let lhs = selfdual_u(&beta(s, g, ctx)?, ctx)?;
    let u_inv_s = UnitFamily(s.0.clone()).inv(ctx)?;
    let rhs = alpha(&u_inv_s, &selfdual_u(g, ctx)?, ctx)?;
    Ok(lhs.eq_at(&rhs, ctx))
}

/// A random p-adic number `p^v u` with `u` a unit of full precision.
fn random_padic(rng: &mut ChaCha8Rng, p: u64, v: i64, ctx: PrecisionContext) -> Result<Component> {
    let mut digits = vec![rng.gen_range(1..p)];
    digits.extend((1..ctx.digits()).map(|_| rng.gen_range(0..p)));
    Ok(Component::Padic(PadicNumber::from_digits(p, v, &digits)?))
}

/// Outcome of a randomized identity check at one prime.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct VerifyReport {
    pub prime: u64,
    pub samples: usize,
    pub singular: usize,
    pub reconstruct_failures: usize,
    pub cocycle_failures: usize,
    pub action_failures: usize,
    pub factorize_failures: usize,
    pub selfdual_failures: usize,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.reconstruct_failures
            + self.cocycle_failures
            + self.action_failures
            + self.factorize_failures
            + self.selfdual_failures
            == 0
    }
}

struct Sample {
    g: UnitFamily,
    h: UnitFamily,
    s: G2Element,
    t: G2Element,
    x: AxbElement,
}

fn draw(rng: &mut ChaCha8Rng, p: u64, ctx: PrecisionContext) -> Result<Sample> {
    let unit = |rng: &mut ChaCha8Rng| random_padic(rng, p, 0, ctx);
    let g = UnitFamily::single(p, unit(rng)?);
    let h = UnitFamily::single(p, unit(rng)?);
    let vs = rng.gen_range(-2..=2);
    let vt = rng.gen_range(-2..=2);
    let s = G2Element::single(p, random_padic(rng, p, vs, ctx)?);
    let t = G2Element::single(p, random_padic(rng, p, vt, ctx)?);
    let va = rng.gen_range(-2..=2);
    let vb = rng.gen_range(-2..=2);
    let a = random_padic(rng, p, va, ctx)?;
    let b = random_padic(rng, p, vb, ctx)?;
    let x = AxbElement(BTreeMap::from([(p, (a, b))]));
    Ok(Sample { g, h, s, t, x })
}

fn check_sample(sm: &Sample, ctx: PrecisionContext, report: &mut VerifyReport) -> Result<()> {
    let Sample { g, h, s, t, x } = sm;
    let rec = reconstruct_check(g, s, ctx)?;
    // alpha(g, st) = alpha(g, s) alpha(beta(s, g), t)
    let st = s.mul(t, ctx)?;
    let c1 = alpha(g, &st, ctx)?.eq_at(&alpha(g, s, ctx)?.mul(&alpha(&beta(s, g, ctx)?, t, ctx)?, ctx)?, ctx);
    // beta(st, g) = beta(t, beta(s, g))
    let c2 = beta(&st, g, ctx)?.eq_at(&beta(t, &beta(s, g, ctx)?, ctx)?, ctx);
    // beta(s, gh) = beta(alpha(h, s), g) beta(s, h)
    let gh = g.mul(h, ctx)?;
    let c3 = beta(s, &gh, ctx)?.eq_at(&beta(&alpha(h, s, ctx)?, g, ctx)?.mul(&beta(s, h, ctx)?, ctx)?, ctx);
    let act = alpha(&gh, s, ctx)?.eq_at(&alpha(g, &alpha(h, s, ctx)?, ctx)?, ctx);
    let (fs, fh) = factorize(x, ctx)?;
    let back = reconstruct(&fs, &fh, ctx)?;
    let (fs2, fh2) = factorize(&back, ctx)?;
    let fact = back.eq_at(x, ctx) && fs2.eq_at(&fs, ctx) && fh2.eq_at(&fh, ctx);
    let dual = selfdual_check(s, g, ctx)?;
    report.reconstruct_failures += usize::from(!rec);
    report.cocycle_failures += usize::from(!(c1 && c2 && c3));
    report.action_failures += usize::from(!act);
    report.factorize_failures += usize::from(!fact);
    report.selfdual_failures += usize::from(!dual);
    Ok(())
}

/// Runs every matched-pair identity on `samples` random tuples at prime `p`.
/// Singular or null-set draws are counted and skipped.
pub fn verify_identities(p: u64, samples: usize, seed: u64, ctx: PrecisionContext) -> Result<VerifyReport> {
    if !crate::padic::is_prime(p) {
        return Err(PadicError::NotPrime(p).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut report = VerifyReport { prime: p, samples, ..Default::default() };
    for _ in 0..samples {
        let sm = draw(&mut rng, p, ctx)?;
        match check_sample(&sm, ctx, &mut report) {
            Ok(()) => {}
            Err(MatchedPairError::SingularPair(_)) | Err(MatchedPairError::NullSetElement(_)) => report.singular += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Additive measure of `{b_p = 1/p}` inside one fiber. The slice is a single
/// point, contained in balls of measure p^{-k} for every k.
pub fn null_slice_measure(_p: u64) -> Rational {
    Rational::zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn ex(n: i64, d: i64) -> Component {
        Component::Exact(rat(n, d))
    }

    #[test]
    fn worked_example_at_three() {
        let g = UnitFamily::single(3, ex(2, 1));
        let s = G2Element::single(3, ex(4, 1));
        let a = alpha(&g, &s, ctx()).unwrap();
        assert!(a.eq_at(&G2Element::single(3, ex(7, 1)), ctx()));
        let b = beta(&s, &g, ctx()).unwrap();
        assert!(b.eq_at(&UnitFamily::single(3, ex(8, 7)), ctx()));
        // (2,0)(4,-1) = (8,-2)
        let prod = g.as_axb().compose(&s.as_axb(ctx()).unwrap(), ctx()).unwrap();
        let expected = AxbElement(BTreeMap::from([(3, (ex(8, 1), ex(-2, 1)))]));
        assert!(prod.eq_at(&expected, ctx()));
        assert!(reconstruct_check(&g, &s, ctx()).unwrap());
        let (fs, fh) = factorize(&expected, ctx()).unwrap();
        assert!(fs.eq_at(&G2Element::single(3, ex(7, 1)), ctx()));
        assert!(fh.eq_at(&UnitFamily::single(3, ex(8, 7)), ctx()));
        assert!(selfdual_check(&s, &g, ctx()).unwrap());
    }

    #[test]
    fn trivial_actions() {
        let g = UnitFamily::single(5, ex(3, 1));
        let s = G2Element::single(5, ex(6, 1));
        assert!(alpha(&UnitFamily::default(), &s, ctx()).unwrap().eq_at(&s, ctx()));
        assert!(alpha(&g, &G2Element::default(), ctx()).unwrap().eq_at(&G2Element::default(), ctx()));
        assert!(beta(&G2Element::default(), &g, ctx()).unwrap().eq_at(&g, ctx()));
        assert!(beta(&s, &UnitFamily::default(), ctx()).unwrap().eq_at(&UnitFamily::default(), ctx()));
    }

    #[test]
    fn singular_and_null_elements() {
        // g(s-1)+1 = 0 for g = 2, s = 1/2
        let g = UnitFamily::single(3, ex(2, 1));
        let s = G2Element::single(3, ex(1, 2));
        assert_eq!(alpha(&g, &s, ctx()).unwrap_err(), MatchedPairError::SingularPair(3));
        let x = AxbElement(BTreeMap::from([(5, (ex(2, 1), ex(1, 5)))]));
        assert_eq!(factorize(&x, ctx()).unwrap_err(), MatchedPairError::NullSetElement(5));
        let (fs, fh) = factorize(&AxbElement::default(), ctx()).unwrap();
        assert!(fs.0.is_empty() && fh.0.is_empty());
    }

    #[test]
    fn delta_values() {
        assert_eq!(delta(&UnitFamily::single(3, ex(2, 1))).unwrap(), int(1));
        assert_eq!(delta(&UnitFamily::single(2, ex(2, 1))).unwrap(), int(2));
        assert_eq!(delta(&UnitFamily::single(7, ex(1, 7))).unwrap(), rat(1, 7));
    }

    #[test]
    fn json_round_trip() {
        let x = AxbElement(BTreeMap::from([(3, (ex(8, 1), ex(-2, 1)))]));
        let j = x.to_json();
        assert_eq!(j, serde_json::json!({"primes": {"3": {"a": "8", "b": "-2"}}, "tail": "integral"}));
        assert!(AxbElement::from_json(&j).unwrap().eq_at(&x, ctx()));
    }

    #[test]
    fn random_identities_small_batch() {
        for p in [2, 3, 5] {
            let r = verify_identities(p, 200, 7, ctx()).unwrap();
            assert!(r.all_passed(), "{r:?}");
        }
    }

    #[test]
    fn null_slice_is_null() {
        assert_eq!(null_slice_measure(2), int(0));
    }
}
