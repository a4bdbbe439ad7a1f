//! Exact arithmetic over the ramified places R (primes dividing the modulus c).
//!
//! Everything here is exact: moduli are factored integers, elements of
//! F_R^x / O_R^x are prime-to-exponent maps, and additive-character phases are
//! accumulated as rationals mod 1 before a single transcendental evaluation.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Exact rational workhorse. Numerators and denominators stay far below
/// i128 range for every modulus this crate targets (c <= ~10^4, rank <= 6).
pub type Rat = Ratio<i128>;

pub fn rat(n: i128, d: i128) -> Rat {
    Rat::new(n, d)
}

/// A positive integer modulus c together with its full factorization.
/// The set R of ramified primes is exactly the set of primes dividing c.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Modulus {
    c: u64,
    factors: BTreeMap<u64, u32>,
}

impl Modulus {
    pub fn new(c: u64) -> Result<Self> {
        if c == 0 {
            return Err(Error::domain("modulus must be positive"));
        }
        let factors = factorize(c);
        let check: u64 = factors
            .iter()
            .map(|(&p, &e)| p.pow(e))
            .product::<u64>()
            .max(1);
        debug_assert_eq!(check, c);
        Ok(Modulus { c, factors })
    }

    pub fn value(&self) -> u64 {
        self.c
    }

    pub fn is_one(&self) -> bool {
        self.c == 1
    }

    /// Ramified primes, sorted ascending.
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.keys().copied()
    }

    pub fn exponent(&self, p: u64) -> u32 {
        self.factors.get(&p).copied().unwrap_or(0)
    }

    pub fn factorization(&self) -> &BTreeMap<u64, u32> {
        &self.factors
    }

    /// True if every prime factor of `n` divides c.
    pub fn supports(&self, n: u64) -> bool {
        let mut n = n;
        for (&p, _) in &self.factors {
            while n % p == 0 {
                n /= p;
            }
        }
        n == 1
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.c)
    }
}

pub fn factorize(mut n: u64) -> BTreeMap<u64, u32> {
    let mut out = BTreeMap::new();
    let mut p = 2u64;
    while p * p <= n {
        while n % p == 0 {
            *out.entry(p).or_insert(0) += 1;
            n /= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        *out.entry(n).or_insert(0) += 1;
    }
    out
}

pub fn euler_phi(d: u64) -> u64 {
    let mut phi = 1u64;
    for (&p, &e) in &factorize(d) {
        phi *= p.pow(e) - p.pow(e - 1);
    }
    phi
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut p = 2;
    while p * p <= n {
        if sieve[p] {
            let mut q = p * p;
            while q <= n {
                sieve[q] = false;
                q += p;
            }
        }
        p += 1;
    }
    sieve
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| if b { Some(i as u64) } else { None })
        .collect()
}

/// An element of F_R^x / O_R^x, stored as a prime -> exponent map over the
/// ramified primes. Unit parts are quotiented out by construction; two
/// classes are equal iff their exponent maps are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RClass {
    exps: BTreeMap<u64, i32>,
}

impl RClass {
    pub fn one() -> Self {
        RClass::default()
    }

    pub fn from_exponents(exps: impl IntoIterator<Item = (u64, i32)>) -> Self {
        let mut map = BTreeMap::new();
        for (p, f) in exps {
            if f != 0 {
                map.insert(p, f);
            }
        }
        RClass { exps: map }
    }

    pub fn exponent(&self, p: u64) -> i32 {
        self.exps.get(&p).copied().unwrap_or(0)
    }

    pub fn exponents(&self) -> &BTreeMap<u64, i32> {
        &self.exps
    }

    pub fn is_one(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn mul(&self, other: &RClass) -> RClass {
        let mut map = self.exps.clone();
        for (&p, &f) in &other.exps {
            let e = map.entry(p).or_insert(0);
            *e += f;
            if *e == 0 {
                map.remove(&p);
            }
        }
        RClass { exps: map }
    }

    pub fn inv(&self) -> RClass {
        RClass {
            exps: self.exps.iter().map(|(&p, &f)| (p, -f)).collect(),
        }
    }

    /// The canonical positive rational representative prod p^{f_p}.
    pub fn value(&self) -> Rat {
        let mut v = Rat::from_integer(1);
        for (&p, &f) in &self.exps {
            v *= pow_rat(p, f);
        }
        v
    }

    /// |x|_p = p^{-f_p}.
    pub fn abs_at(&self, p: u64) -> Rat {
        pow_rat(p, -self.exponent(p))
    }

    /// |x|_R = prod_{p in R} |x|_p.
    pub fn abs_r(&self) -> Rat {
        let mut v = Rat::from_integer(1);
        for (&p, &f) in &self.exps {
            v *= pow_rat(p, -f);
        }
        v
    }

    /// For classes with all exponents <= 0: the denominator d = prod p^{-f_p},
    /// so the additive coset t O_R^x / O_R lies in (1/d)Z/Z.
    pub fn coset_denominator(&self) -> Result<u64> {
        let mut d: u64 = 1;
        for (&p, &f) in &self.exps {
            if f > 0 {
                return Err(Error::domain(format!(
                    "class has positive exponent {f} at p={p}; not a (1/d)Z/Z coset"
                )));
            }
            d = d
                .checked_mul(p.checked_pow((-f) as u32).ok_or_else(|| {
                    Error::domain("coset denominator overflow")
                })?)
                .ok_or_else(|| Error::domain("coset denominator overflow"))?;
        }
        Ok(d)
    }
}

impl fmt::Display for RClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exps.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .exps
            .iter()
            .map(|(p, e)| format!("{p}^{e}"))
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

fn pow_rat(p: u64, f: i32) -> Rat {
    let p = p as i128;
    if f >= 0 {
        Rat::from_integer(p.pow(f as u32))
    } else {
        Rat::new(1, p.pow((-f) as u32))
    }
}

/// A representative w/d of a class in t O_R^x / O_R, with gcd(w, d) = 1 and
/// 1 <= w <= d. The degenerate coset (d = 1) is represented by 1/1, the unit
/// class, so that multiplicative inverses stay meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitCosetRep {
    pub w: u64,
    pub d: u64,
}

impl UnitCosetRep {
    pub fn new(w: u64, d: u64) -> Result<Self> {
        if d == 0 || w == 0 {
            return Err(Error::domain(format!("bad coset representative {w}/{d}")));
        }
        if (w as i128).gcd(&(d as i128)) != 1 {
            return Err(Error::domain(format!("{w}/{d} is not a unit coset")));
        }
        Ok(UnitCosetRep { w, d })
    }

    pub fn value(&self) -> Rat {
        rat(self.w as i128, self.d as i128)
    }

    /// Exact rational inverse d/w of the representative.
    pub fn inv_value(&self) -> Rat {
        rat(self.d as i128, self.w as i128)
    }
}

impl fmt::Display for UnitCosetRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.w, self.d)
    }
}

/// zeta = a/c with gcd(a, c) = 1, carried as exact data. |zeta|_p = p^{e_p}
/// exactly for the primes of R, and |zeta|_p <= 1 elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZetaParam {
    a: i64,
    modulus: Modulus,
}

impl ZetaParam {
    pub fn new(a: i64, modulus: Modulus) -> Result<Self> {
        if a == 0 {
            return Err(Error::domain("zeta numerator must be nonzero"));
        }
        if (a as i128).gcd(&(modulus.value() as i128)) != 1 {
            return Err(Error::domain(format!(
                "gcd(a, c) must be 1; got a={a}, c={}",
                modulus.value()
            )));
        }
        Ok(ZetaParam { a, modulus })
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn value(&self) -> Rat {
        rat(self.a as i128, self.modulus.value() as i128)
    }

    pub fn inv_value(&self) -> Rat {
        rat(self.modulus.value() as i128, self.a as i128)
    }

    pub fn abs_at(&self, p: u64) -> Rat {
        pow_rat(p, self.modulus.exponent(p) as i32)
    }

    /// |zeta|_R = prod p^{e_p} = c.
    pub fn abs_r(&self) -> u64 {
        self.modulus.value()
    }
}

/// Modular inverse: u with u*w == 1 (mod d), 1 <= u <= d.
pub fn invert_mod(w: i128, d: i128) -> Result<i128> {
    if d <= 0 {
        return Err(Error::domain("invert_mod: modulus must be positive"));
    }
    if d == 1 {
        return Ok(1);
    }
    let (mut r0, mut r1) = (d, w.rem_euclid(d));
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return Err(Error::domain(format!(
            "invert_mod: gcd({w}, {d}) = {r0} != 1 (non-unit in a Kloosterman denominator)"
        )));
    }
    Ok(s0.rem_euclid(d))
}

/// The p-part of the fractional expansion of x: a rational u/p^k in [0, 1)
/// congruent to x modulo Z_p. Zero when v_p(x) >= 0.
pub fn frac_at(x: Rat, p: u64) -> Rat {
    let p = p as i128;
    let mut k = 0u32;
    let mut den = *x.denom();
    while den % p == 0 {
        den /= p;
        k += 1;
    }
    if k == 0 {
        return Rat::zero();
    }
    let pk = p.pow(k);
    // x = num / (den * p^k); p-adic frac = (num * den^{-1} mod p^k) / p^k.
    let inv_den = invert_mod(den.rem_euclid(pk), pk).expect("den coprime to p");
    let r = (x.numer().rem_euclid(pk) * inv_den).rem_euclid(pk);
    Rat::new(r, pk)
}

/// Sum over ramified primes of the p-adic fractional parts, reduced mod 1.
/// For x whose denominator is supported on R this is x mod 1 exactly; primes
/// outside R in the denominator are simply invisible to the R-character.
pub fn r_part(x: Rat, m: &Modulus) -> Rat {
    let mut acc = Rat::zero();
    for p in m.primes() {
        acc += frac_at(x, p);
    }
    acc -= acc.floor();
    acc
}

/// e^{2 pi i theta} with theta an exact rational reduced mod 1 first.
pub fn unit_phase(theta: Rat) -> Complex64 {
    let t = theta - theta.floor();
    let tf = (*t.numer() as f64) / (*t.denom() as f64);
    let (s, c) = (2.0 * std::f64::consts::PI * tf).sin_cos();
    Complex64::new(c, s)
}

/// The finite-place additive character psi_R(x) = prod_{p | c} e^{2 pi i {x}_p}.
///
/// Strict contract: the denominator of x in lowest terms must be supported on
/// R. A prime factor outside R signals the caller passed a value outside the
/// F_R / O_R semantics and is rejected.
pub fn psi_r(x: Rat, m: &Modulus) -> Result<Complex64> {
    let den = *x.denom();
    let mut rest = den.unsigned_abs() as u64;
    for p in m.primes() {
        while rest % p == 0 {
            rest /= p;
        }
    }
    if rest != 1 {
        return Err(Error::domain(format!(
            "psi_R argument {x} has denominator prime(s) outside R (c={})",
            m.value()
        )));
    }
    Ok(unit_phase(r_part(x, m)))
}

/// psi_R extended to arbitrary rationals by projecting onto the R-supported
/// part: unit denominators away from R contribute nothing to the character.
/// This is the evaluation the hyper-Kloosterman machinery needs, where exact
/// representative inverses like d/w introduce harmless unit denominators.
pub fn psi_r_projected(x: Rat, m: &Modulus) -> Complex64 {
    unit_phase(r_part(x, m))
}

/// All phi(d) representatives of the unit cosets inside t O_R^x / O_R for a
/// class t with nonpositive exponents, i.e. the classes w/d with w in (Z/d)^x.
pub fn enumerate_unit_coset(t: &RClass) -> Result<Vec<UnitCosetRep>> {
    let d = t.coset_denominator()?;
    if d == 1 {
        return Ok(vec![UnitCosetRep { w: 1, d: 1 }]);
    }
    let mut out = Vec::with_capacity(euler_phi(d) as usize);
    for w in 1..=d {
        if (w as i128).gcd(&(d as i128)) == 1 {
            out.push(UnitCosetRep { w, d });
        }
    }
    Ok(out)
}

/// Coset representatives lifted so the numerator is a unit at every prime of
/// R, not just at the primes dividing d. Elements of t O_R^x genuinely have
/// R-unit numerators; a minimal residue like 3/4 with R = {2, 3} is not in
/// the coset, and its exact inverse would leak a spurious phase at p = 3.
pub fn enumerate_unit_coset_lifted(t: &RClass, m: &Modulus) -> Result<Vec<UnitCosetRep>> {
    let reps = enumerate_unit_coset(t)?;
    let c = m.value() as i128;
    Ok(reps
        .into_iter()
        .map(|r| {
            let mut w = r.w as i128;
            while w.gcd(&c) != 1 {
                w += r.d as i128;
            }
            UnitCosetRep {
                w: w as u64,
                d: r.d,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn modulus_factorization() {
        let m = Modulus::new(360).unwrap();
        assert_eq!(m.exponent(2), 3);
        assert_eq!(m.exponent(3), 2);
        assert_eq!(m.exponent(5), 1);
        assert_eq!(m.primes().count(), 3);
        assert!(Modulus::new(1).unwrap().is_one());
        assert!(Modulus::new(0).is_err());
    }

    #[test]
    fn psi_examples() {
        let m = Modulus::new(10).unwrap();
        assert!(close(psi_r(Rat::zero(), &m).unwrap(), Complex64::new(1.0, 0.0), 1e-15));
        assert!(close(psi_r(rat(1, 2), &m).unwrap(), Complex64::new(-1.0, 0.0), 1e-15));
        // psi(3/5) * psi(2/5) = 1 and |psi(3/5)| = 1.
        let a = psi_r(rat(3, 5), &m).unwrap();
        let b = psi_r(rat(2, 5), &m).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-15);
        assert!(close(a * b, Complex64::one(), 1e-14));
        // Periodicity: psi(x + n) = psi(x).
        assert!(close(
            psi_r(rat(3, 5) + Rat::from_integer(7), &m).unwrap(),
            a,
            1e-14
        ));
    }

    #[test]
    fn psi_rejects_foreign_denominator() {
        let m = Modulus::new(4).unwrap();
        assert!(psi_r(rat(1, 3), &m).is_err());
        // The projected version ignores the unit-away-from-R denominator.
        assert!(close(psi_r_projected(rat(1, 3), &m), Complex64::one(), 1e-15));
    }

    #[test]
    fn psi_homomorphism() {
        let m = Modulus::new(12).unwrap();
        let xs = [rat(1, 4), rat(5, 12), rat(7, 3), rat(11, 8), rat(-5, 6)];
        for &x in &xs {
            for &y in &xs {
                let lhs = psi_r(x + y, &m).unwrap();
                let rhs = psi_r(x, &m).unwrap() * psi_r(y, &m).unwrap();
                assert!(close(lhs, rhs, 1e-14), "x={x} y={y}");
            }
        }
    }

    #[test]
    fn full_group_orthogonality() {
        // Sum over x in (1/d)Z/Z of psi(x) = d * [d == 1].
        let m = Modulus::new(60).unwrap();
        for d in [1u64, 2, 4, 5, 6, 12, 30, 60] {
            let mut s = Complex64::zero();
            for k in 0..d {
                s += psi_r(rat(k as i128, d as i128), &m).unwrap();
            }
            let expect = if d == 1 { 1.0 } else { 0.0 };
            assert!((s - Complex64::new(expect, 0.0)).norm() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn ramanujan_sum_at_primes() {
        let m = Modulus::new(2 * 3 * 5 * 7).unwrap();
        for p in m.primes().collect::<Vec<_>>() {
            let mut s = Complex64::zero();
            for w in 1..p {
                s += psi_r(rat(w as i128, p as i128), &m).unwrap();
            }
            assert!((s - Complex64::new(-1.0, 0.0)).norm() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn frac_at_examples() {
        // 1/6 = 1/2 * 1/3: {1/6}_2 = 1/2 (since 1/6 = 3^{-1}/2, 3^{-1} mod 2 = 1).
        assert_eq!(frac_at(rat(1, 6), 2), rat(1, 2));
        // {1/6}_3: 2^{-1} mod 3 = 2, so 2/3.
        assert_eq!(frac_at(rat(1, 6), 3), rat(2, 3));
        // Sum of fractional parts = 1/2 + 2/3 = 7/6 == 1/6 mod 1.
        let m = Modulus::new(6).unwrap();
        assert_eq!(r_part(rat(1, 6), &m), rat(1, 6));
        assert_eq!(frac_at(rat(5, 3), 2), Rat::zero());
        assert_eq!(frac_at(rat(-1, 3), 3), rat(2, 3));
    }

    #[test]
    fn invert_mod_examples() {
        assert_eq!(invert_mod(1, 7).unwrap(), 1);
        assert_eq!(invert_mod(3, 7).unwrap(), 5);
        assert!(invert_mod(2, 4).is_err());
        for d in 2..60i128 {
            for w in 1..d {
                if w.gcd(&d) == 1 {
                    let u = invert_mod(w, d).unwrap();
                    assert_eq!((u * w).rem_euclid(d), 1);
                    assert!(1 <= u && u <= d);
                }
            }
        }
    }

    #[test]
    fn unit_coset_sizes() {
        let t1 = RClass::one();
        assert_eq!(enumerate_unit_coset(&t1).unwrap().len(), 1);

        let t4 = RClass::from_exponents([(2u64, -2i32)]);
        let reps = enumerate_unit_coset(&t4).unwrap();
        assert_eq!(reps.len(), 2);
        let vals: Vec<Rat> = reps.iter().map(|r| r.value()).collect();
        assert!(vals.contains(&rat(1, 4)) && vals.contains(&rat(3, 4)));

        let t12 = RClass::from_exponents([(2u64, -2i32), (3u64, -1i32)]);
        let reps = enumerate_unit_coset(&t12).unwrap();
        assert_eq!(reps.len(), 4);
        let mut seen = std::collections::HashSet::new();
        for r in &reps {
            let f = r.value() - r.value().floor();
            assert!(seen.insert(f), "duplicate coset rep mod 1");
        }
    }

    #[test]
    fn coset_partition_counts() {
        // Disjoint union over d | c of the unit cosets covers (1/c)Z/Z:
        // sum_{d | c} phi(d) = c.
        for c in [1u64, 2, 6, 12, 36, 200] {
            let mut total = 0u64;
            for d in 1..=c {
                if c % d == 0 {
                    total += euler_phi(d);
                }
            }
            assert_eq!(total, c);
        }
    }

    #[test]
    fn rclass_algebra() {
        let a = RClass::from_exponents([(2u64, -1i32), (3, 2)]);
        let b = RClass::from_exponents([(2u64, 1i32), (5, -1)]);
        let ab = a.mul(&b);
        assert_eq!(ab.exponent(2), 0);
        assert_eq!(ab.exponent(3), 2);
        assert_eq!(ab.exponent(5), -1);
        assert_eq!(ab.value(), rat(9, 5));
        assert_eq!(a.mul(&a.inv()), RClass::one());
        assert_eq!(a.abs_at(2), rat(2, 1));
        assert_eq!(a.abs_r(), rat(2, 9));
    }

    #[test]
    fn zeta_param_basics() {
        let z = ZetaParam::new(3, Modulus::new(10).unwrap()).unwrap();
        assert_eq!(z.value(), rat(3, 10));
        assert_eq!(z.abs_at(2), rat(2, 1));
        assert_eq!(z.abs_at(5), rat(5, 1));
        assert_eq!(z.abs_at(3), rat(1, 1));
        assert_eq!(z.abs_r(), 10);
        assert!(ZetaParam::new(2, Modulus::new(10).unwrap()).is_err());
    }
}
