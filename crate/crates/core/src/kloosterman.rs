//! Hyper-Kloosterman sums over residue rings and the Kloosterman integral's
//! torus expansion.
//!
//! The reference evaluator is the literal nested sum
//!   Kl_N(x, t) = sum_{v_{N-1}} ... sum_{v_2} psi(v_{N-1}+...+v_2)
//!                psi(sign * x * v_2^{-1} ... v_{N-1}^{-1})
//! over unit-coset representatives v_i = w_i/d_i, with every phase collected
//! as an exact rational mod 1 and a single complex exponential per term.
//! A CRT-factorized path over the primes of the modulus is provided as an
//! accelerated route; it applies exactly when the sum is independent of the
//! choice of coset representatives, which the evaluator checks.

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{
    enumerate_unit_coset_lifted, euler_phi, invert_mod, r_part, rat, unit_phase, Modulus, Rat,
    UnitCosetRep, ZetaParam,
};
use crate::error::{Error, Result};
use crate::torus::{complete_chain, enumerate_chains, CompletedTorus, TorusChain};

/// Parity convention for the twisted character's sign (-1)^n: the rank itself
/// or the opposite parity. Both are selectable; the convention search fixes
/// the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignExponent {
    /// (-1)^N where N is the rank of the sum.
    RankN,
    /// (-1)^{N+1}, the opposite parity.
    RankNPlus1,
}

impl SignExponent {
    pub fn sign(self, rank: usize) -> i8 {
        let e = match self {
            SignExponent::RankN => rank,
            SignExponent::RankNPlus1 => rank + 1,
        };
        if e % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// Result of a hyper-Kloosterman evaluation.
#[derive(Debug, Clone, Copy)]
pub struct KlSum {
    pub value: Complex64,
    /// Number of summed terms; always prod_i phi(d_i).
    pub term_count: u64,
    /// True when the value is independent of the choice of coset
    /// representatives (the supported regime for CRT factorization).
    pub rep_stable: bool,
}

fn v_p(x: Rat, p: u64) -> i32 {
    let p = p as i128;
    let mut n = *x.numer();
    let mut d = *x.denom();
    let mut v = 0i32;
    while n != 0 && n % p == 0 {
        n /= p;
        v += 1;
    }
    while d % p == 0 {
        d /= p;
        v -= 1;
    }
    v
}

/// Representative stability: for every ramified prime p and every summation
/// slot i, v_p(x) + sum_j a_j + a_i >= 0, where a_j = v_p(d_j).
fn rep_stability(x: Rat, denominators: &[u64], modulus: &Modulus) -> bool {
    for p in modulus.primes() {
        let vx = v_p(x, p);
        let a: Vec<i32> = denominators
            .iter()
            .map(|&d| {
                let mut d = d;
                let mut k = 0i32;
                while d % p == 0 {
                    d /= p;
                    k += 1;
                }
                k
            })
            .collect();
        let total: i32 = a.iter().sum();
        if let Some(&amin) = a.iter().min() {
            if vx + total + amin < 0 {
                return false;
            }
        }
    }
    true
}

/// Direct evaluation of the hyper-Kloosterman sum of dimension rank - 1.
///
/// `x` is the twisted argument (a gamma–zeta combination); its denominator
/// must be supported on the chain's modulus. For rank 2 the chain is empty
/// and the sum is the single term psi(sign * x).
pub fn hyper_kl(
    rank: usize,
    x: Rat,
    chain: &TorusChain,
    sign_exponent: SignExponent,
    budget: u64,
) -> Result<KlSum> {
    let modulus = chain.modulus();
    if !modulus.supports(x.denom().unsigned_abs() as u64) {
        return Err(Error::domain(format!(
            "Kloosterman argument {x} has denominator outside R (c={})",
            modulus.value()
        )));
    }
    hyper_kl_projected(rank, x, chain, sign_exponent, budget)
}

/// Same nested sum with the strict denominator-support check relaxed: primes
/// outside R in the denominator of `x` are unit factors invisible to psi_R.
/// The proof-chain evaluators need this because exact representative
/// inverses like d/w introduce such unit denominators.
pub fn hyper_kl_projected(
    rank: usize,
    x: Rat,
    chain: &TorusChain,
    sign_exponent: SignExponent,
    budget: u64,
) -> Result<KlSum> {
    if chain.rank() != rank {
        return Err(Error::domain(format!(
            "chain rank {} does not match sum rank {rank}",
            chain.rank()
        )));
    }
    let modulus = chain.modulus();
    let cosets: Vec<Vec<UnitCosetRep>> = chain
        .entries()
        .iter()
        .map(|t| enumerate_unit_coset_lifted(t, modulus))
        .collect::<Result<_>>()?;
    let denominators: Vec<u64> = chain
        .entries()
        .iter()
        .map(|t| t.coset_denominator())
        .collect::<Result<_>>()?;
    let term_count: u64 = denominators.iter().map(|&d| euler_phi(d)).product();
    if term_count > budget {
        return Err(Error::Budget {
            needed: term_count,
            budget,
        });
    }
    let sign = sign_exponent.sign(rank) as i128;
    let stable = rep_stability(x, &denominators, modulus);

    if cosets.is_empty() {
        let theta = r_part(Rat::from_integer(sign) * x, modulus);
        return Ok(KlSum {
            value: unit_phase(theta),
            term_count: 1,
            rep_stable: true,
        });
    }

    let mut total = Complex64::zero();
    let mut idx = vec![0usize; cosets.len()];
    loop {
        // Sum of representatives and product of exact inverses.
        let mut vsum = Rat::zero();
        let mut inv_prod = Rat::one();
        for (slot, reps) in cosets.iter().enumerate() {
            let r = reps[idx[slot]];
            vsum += r.value();
            inv_prod *= r.inv_value();
        }
        let theta = r_part(vsum, modulus) + r_part(Rat::from_integer(sign) * x * inv_prod, modulus);
        total += unit_phase(theta);

        let mut k = 0;
        loop {
            if k == cosets.len() {
                return Ok(KlSum {
                    value: total,
                    term_count,
                    rep_stable: stable,
                });
            }
            idx[k] += 1;
            if idx[k] < cosets[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// CRT-factorized evaluation: the sum factors over the primes of the modulus
/// into local sums. Exact only in the representative-stable regime; unstable
/// inputs are rejected.
pub fn hyper_kl_crt(
    rank: usize,
    x: Rat,
    chain: &TorusChain,
    sign_exponent: SignExponent,
    budget: u64,
) -> Result<KlSum> {
    if chain.rank() != rank {
        return Err(Error::domain("chain rank mismatch"));
    }
    let modulus = chain.modulus();
    let denominators: Vec<u64> = chain
        .entries()
        .iter()
        .map(|t| t.coset_denominator())
        .collect::<Result<_>>()?;
    if !rep_stability(x, &denominators, modulus) {
        return Err(Error::unsupported(
            "CRT path requires a representative-stable argument",
        ));
    }
    let sign = sign_exponent.sign(rank) as i128;
    let n_slots = chain.entries().len();
    let mut value = Complex64::one();
    let mut term_count = 1u64;

    if n_slots == 0 {
        let theta = r_part(Rat::from_integer(sign) * x, modulus);
        return Ok(KlSum {
            value: unit_phase(theta),
            term_count: 1,
            rep_stable: true,
        });
    }

    for p in modulus.primes() {
        // Local coset data at p: slot i contributes (Z/p^{a_i})^x.
        let a: Vec<u32> = (0..n_slots)
            .map(|i| chain.valuation(i, p).max(0) as u32)
            .collect();
        let local_terms: u64 = a.iter().map(|&ai| euler_phi((p as u64).pow(ai))).product();
        term_count = term_count.saturating_mul(local_terms);
        if term_count > budget {
            return Err(Error::Budget {
                needed: term_count,
                budget,
            });
        }
        // sign * x * prod_i d_i, whose p-part sets the needed precision; the
        // local unit numerators w_i contribute via their inverses mod p^m.
        let mut scaled = Rat::from_integer(sign) * x;
        for &d in &denominators {
            scaled *= Rat::from_integer(d as i128);
        }
        let m = (-v_p(scaled, p)).max(0) as u32;
        let pm = (p as i128).pow(m);
        // Unit part of `scaled` mod p^m: scaled = p^{v} * u with u a p-unit.
        let base_unit = if m == 0 {
            0
        } else {
            let v = v_p(scaled, p);
            debug_assert!(v == -(m as i32));
            let num = *scaled.numer();
            let den = *scaled.denom();
            // Remove p powers (all in the denominator here).
            let mut den_p = den;
            while den_p % (p as i128) == 0 {
                den_p /= p as i128;
            }
            let inv_den = invert_mod(den_p.rem_euclid(pm), pm)?;
            (num.rem_euclid(pm) * inv_den).rem_euclid(pm)
        };
        // Also the cross-prime parts of each d_i are units mod p^m and their
        // inverses scale the local coset numerators inside psi(v_i).
        let mut local = Complex64::zero();
        let mut idx: Vec<i128> = vec![1; n_slots];
        // Enumerate tuples of local units w_i in (Z/p^{a_i})^x; slots with
        // a_i = 0 are pinned to 1.
        loop {
            // Valid tuple check and term evaluation.
            let mut ok = true;
            for (i, &ai) in a.iter().enumerate() {
                if ai > 0 && (idx[i] % p as i128) == 0 {
                    ok = false;
                    break;
                }
            }
            if ok {
                // psi_p(sum_i v_i): the local coset of w_i/d_i at p has
                // numerator w_i * inv(d_i / p^{a_i}) mod p^{a_i}.
                let mut theta = Rat::zero();
                for (i, &ai) in a.iter().enumerate() {
                    if ai > 0 {
                        let pai = (p as i128).pow(ai);
                        let cross = (denominators[i] as i128) / pai;
                        let inv_cross = invert_mod(cross.rem_euclid(pai), pai)?;
                        let wi = (idx[i] * inv_cross).rem_euclid(pai);
                        theta += Rat::new(wi, pai);
                    }
                }
                // psi_p(sign * x * prod v_i^{-1}) = e(base_unit * prod w_i^{-1} / p^m).
                if m > 0 {
                    let mut u = base_unit;
                    for (i, &ai) in a.iter().enumerate() {
                        if ai > 0 {
                            let inv_wi = invert_mod(idx[i].rem_euclid(pm), pm)?;
                            u = (u * inv_wi).rem_euclid(pm);
                        } else {
                            // d_i is prime to p; its full inverse is folded in
                            // via `scaled` already (d_i included there), and
                            // the canonical unit representative w_i = 1.
                        }
                    }
                    theta += Rat::new(u, pm);
                }
                local += unit_phase(theta);
            }
            // Odometer over local numerators.
            let mut k = 0;
            loop {
                if k == n_slots {
                    value *= local;
                    // Break out to next prime.
                    break;
                }
                if a[k] == 0 {
                    k += 1;
                    continue;
                }
                idx[k] += 1;
                if idx[k] < (p as i128).pow(a[k]) {
                    break;
                }
                idx[k] = 1;
                k += 1;
            }
            if k == n_slots {
                break;
            }
        }
    }
    Ok(KlSum {
        value,
        term_count,
        rep_stable: true,
    })
}

/// Classical Kloosterman sum S(a, b; m) by direct summation.
/// The value is real (w <-> m - w pairs conjugate terms).
pub fn classical_kl(a: i64, b: i64, m: u64) -> Complex64 {
    if m == 0 {
        return Complex64::zero();
    }
    let mi = m as i128;
    let mut s = Complex64::zero();
    for w in 1..=mi {
        if let Ok(winv) = invert_mod(w, mi) {
            let theta = rat(
                ((a as i128) * w + (b as i128) * winv).rem_euclid(mi),
                mi,
            );
            s += unit_phase(theta);
        }
    }
    debug_assert!(m <= 2 || s.im.abs() < 1e-9, "S(a,b;m) must be real");
    s
}

/// The Kloosterman integral expanded along the maximal torus:
///   K(gamma, zeta) = |zeta|^{N-2} sum_{t in T_zeta/T_o}
///                    W(diag(gamma,1,..,1) a(t)) Kl_N(gamma zeta^{-1}, t).
/// `whittaker` evaluates the (contragredient) Whittaker factor at the
/// completed diagonal scaled by gamma in the first slot. The |zeta|^{N-2}
/// prefactor is optional because the assembled dual-side display drops it.
pub fn kloosterman_integral(
    gamma: Rat,
    zeta: &ZetaParam,
    rank: usize,
    whittaker: &dyn Fn(&CompletedTorus, Rat) -> Result<Complex64>,
    sign_exponent: SignExponent,
    include_zeta_power: bool,
    budget: u64,
) -> Result<Complex64> {
    let chains = enumerate_chains(rank, zeta)?;
    let x = gamma * zeta.inv_value();
    let mut total = Complex64::zero();
    for chain in &chains {
        let w = whittaker(&complete_chain(chain, zeta), gamma)?;
        if w.norm() == 0.0 {
            continue;
        }
        let kl = hyper_kl_projected(rank, x, chain, sign_exponent, budget)?;
        total += w * kl.value;
    }
    if include_zeta_power {
        let scale = (zeta.abs_r() as f64).powi(rank as i32 - 2);
        total *= scale;
    }
    Ok(total)
}
