//! Torus cosets T_zeta / T_o as divisor chains.
//!
//! A coset of the rank-N torus is stored by its free coordinates
//! (t_2, ..., t_{N-1}): per ramified prime p a weakly increasing tuple of
//! valuations 0 <= g_2 <= ... <= g_{N-1} <= e_p, realized as RClass entries
//! with exponents f = -g (so 1 <= |t_2|_p <= ... <= |t_{N-1}|_p <= |zeta|_p).
//! Completion appends t_N with |t_N| = |zeta| and solves t_1 from
//! |t_1 ... t_N| = 1, which lands exactly on the dominant support of the
//! unramified Whittaker function.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arith::{Modulus, RClass, Rat, ZetaParam};
use crate::error::{Error, Result};

/// A coset of T_zeta/T_o for GL(rank): the tuple of free chain entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TorusChain {
    rank: usize,
    entries: Vec<RClass>,
    modulus: Modulus,
}

impl TorusChain {
    pub fn new(rank: usize, entries: Vec<RClass>, modulus: Modulus) -> Result<Self> {
        if rank < 2 {
            return Err(Error::domain("torus rank must be >= 2"));
        }
        if entries.len() != rank - 2 {
            return Err(Error::domain(format!(
                "rank {rank} chain needs {} entries, got {}",
                rank - 2,
                entries.len()
            )));
        }
        Ok(TorusChain {
            rank,
            entries,
            modulus,
        })
    }

    pub fn empty(rank: usize, modulus: Modulus) -> Result<Self> {
        TorusChain::new(rank, vec![RClass::one(); rank.saturating_sub(2)], modulus)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entries(&self) -> &[RClass] {
        &self.entries
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// Valuation g_i = -f_p(t_i) >= 0 of entry i at prime p.
    pub fn valuation(&self, i: usize, p: u64) -> i32 {
        -self.entries[i].exponent(p)
    }

    /// Stable text key for report tables, e.g. "2:0,1|3:1,1".
    pub fn key(&self) -> String {
        if self.entries.is_empty() {
            return "()".to_string();
        }
        let mut parts = Vec::new();
        for p in self.modulus.primes() {
            let gs: Vec<String> = (0..self.entries.len())
                .map(|i| self.valuation(i, p).to_string())
                .collect();
            parts.push(format!("{p}:{}", gs.join(",")));
        }
        parts.join("|")
    }
}

/// The completed diagonal a(t) = (t_1, ..., t_N).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletedTorus {
    diag: Vec<RClass>,
}

impl CompletedTorus {
    pub fn diag(&self) -> &[RClass] {
        &self.diag
    }

    pub fn rank(&self) -> usize {
        self.diag.len()
    }
}

/// Per-prime upper bounds for chain valuations. For T_zeta the bound at p is
/// e_p; the engine also enumerates chains bounded by |zeta_breve| which can
/// be smaller (and is zero at primes where the twisted zeta is integral).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainBounds(pub BTreeMap<u64, u32>);

impl ChainBounds {
    pub fn from_zeta(zeta: &ZetaParam) -> Self {
        ChainBounds(zeta.modulus().factorization().clone())
    }

    /// Bounds max(v_p(denominator of x), 0) for an arbitrary rational zeta
    /// value, restricted to the primes of R.
    pub fn from_rat(x: Rat, modulus: &Modulus) -> Self {
        let mut map = BTreeMap::new();
        for p in modulus.primes() {
            let mut den = *x.denom();
            let mut k = 0u32;
            while den % (p as i128) == 0 {
                den /= p as i128;
                k += 1;
            }
            if k > 0 {
                map.insert(p, k);
            }
        }
        ChainBounds(map)
    }
}

/// All chains of the given rank with weakly increasing per-prime valuations
/// bounded by `bounds`. The count is prod_p C(b_p + rank - 2, rank - 2).
pub fn enumerate_chains_bounded(
    rank: usize,
    bounds: &ChainBounds,
    modulus: &Modulus,
) -> Result<Vec<TorusChain>> {
    if rank < 2 {
        return Err(Error::domain("torus rank must be >= 2"));
    }
    let len = rank - 2;
    if len == 0 {
        return Ok(vec![TorusChain::new(rank, Vec::new(), modulus.clone())?]);
    }
    // Per-prime weakly increasing tuples, then a cartesian product.
    let mut per_prime: Vec<(u64, Vec<Vec<u32>>)> = Vec::new();
    for (&p, &b) in &bounds.0 {
        per_prime.push((p, increasing_tuples(len, b)));
    }
    let mut chains = Vec::new();
    let mut idx = vec![0usize; per_prime.len()];
    loop {
        let mut entries = vec![RClass::one(); len];
        for (slot, (p, tuples)) in per_prime.iter().enumerate() {
            let tuple = &tuples[idx[slot]];
            for (i, &g) in tuple.iter().enumerate() {
                if g > 0 {
                    entries[i] = entries[i].mul(&RClass::from_exponents([(*p, -(g as i32))]));
                }
            }
        }
        chains.push(TorusChain::new(rank, entries, modulus.clone())?);
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == per_prime.len() {
                return Ok(chains);
            }
            idx[k] += 1;
            if idx[k] < per_prime[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// All chains for T_zeta/T_o at the given rank.
pub fn enumerate_chains(rank: usize, zeta: &ZetaParam) -> Result<Vec<TorusChain>> {
    enumerate_chains_bounded(rank, &ChainBounds::from_zeta(zeta), zeta.modulus())
}

/// Weakly increasing tuples of the given length with values in [0, bound].
fn increasing_tuples(len: usize, bound: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; len];
    loop {
        out.push(cur.clone());
        // Increment rightmost position that can grow, then reset the tail
        // to the new value to keep monotonicity.
        let mut i = len;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < bound {
                cur[i] += 1;
                for j in i + 1..len {
                    cur[j] = cur[i];
                }
                break;
            }
        }
    }
}

/// prod_p C(b_p + rank - 2, rank - 2), the chain count.
pub fn chain_count_formula(rank: usize, bounds: &ChainBounds) -> u128 {
    let r = (rank - 2) as u128;
    bounds
        .0
        .values()
        .map(|&b| binomial(b as u128 + r, r))
        .product()
}

pub fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut num = 1u128;
    for i in 0..k {
        num = num * (n - i) / (i + 1);
    }
    num
}

/// Complete a chain to the full diagonal: t_N gets exponent -e_p (so
/// |t_N| = |zeta|) and t_1 makes the exponent sum vanish per prime.
pub fn complete_chain(chain: &TorusChain, zeta: &ZetaParam) -> CompletedTorus {
    complete_chain_with_bounds(chain, &ChainBounds::from_zeta(zeta))
}

/// Same completion against arbitrary per-prime bounds (|t_N|_p = p^{b_p}).
pub fn complete_chain_with_bounds(chain: &TorusChain, bounds: &ChainBounds) -> CompletedTorus {
    let mut t_n = RClass::one();
    for (&p, &b) in &bounds.0 {
        if b > 0 {
            t_n = t_n.mul(&RClass::from_exponents([(p, -(b as i32))]));
        }
    }
    let mut prod = t_n.clone();
    for e in chain.entries() {
        prod = prod.mul(e);
    }
    let t_1 = prod.inv();
    let mut diag = Vec::with_capacity(chain.rank());
    diag.push(t_1);
    diag.extend(chain.entries().iter().cloned());
    diag.push(t_n);
    CompletedTorus { diag }
}

/// Which block of free coordinates goes to the T^L factor in s = s1 s2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitIndexing {
    /// s1 takes the low-index block (t_2..t_{L-1}), s2 the high block.
    LowBlockS1,
    /// s1 takes the high-index block, s2 the low block.
    HighBlockS1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCoset {
    pub s1: TorusChain,
    pub s2: TorusChain,
    pub indexing: SplitIndexing,
}

/// Decompose a rank-N chain into s1 (rank L) and s2 (rank M), N + 2 = L + M.
/// s2 always carries exactly M - 2 entries.
pub fn split_coset(
    chain: &TorusChain,
    l_rank: usize,
    m_rank: usize,
    indexing: SplitIndexing,
) -> Result<SplitCoset> {
    let n = chain.rank();
    if l_rank < 2 || m_rank < 2 || l_rank + m_rank != n + 2 {
        return Err(Error::domain(format!(
            "incompatible split: N={n}, L={l_rank}, M={m_rank}"
        )));
    }
    let l_len = l_rank - 2;
    let (s1_entries, s2_entries): (Vec<RClass>, Vec<RClass>) = match indexing {
        SplitIndexing::LowBlockS1 => (
            chain.entries()[..l_len].to_vec(),
            chain.entries()[l_len..].to_vec(),
        ),
        SplitIndexing::HighBlockS1 => (
            chain.entries()[n - 2 - l_len..].to_vec(),
            chain.entries()[..n - 2 - l_len].to_vec(),
        ),
    };
    Ok(SplitCoset {
        s1: TorusChain::new(l_rank, s1_entries, chain.modulus().clone())?,
        s2: TorusChain::new(m_rank, s2_entries, chain.modulus().clone())?,
        indexing,
    })
}

/// Reassemble the parent chain from a split.
pub fn recombine(split: &SplitCoset) -> Result<TorusChain> {
    let n = split.s1.rank() + split.s2.rank() - 2;
    let mut entries = Vec::with_capacity(n - 2);
    match split.indexing {
        SplitIndexing::LowBlockS1 => {
            entries.extend(split.s1.entries().iter().cloned());
            entries.extend(split.s2.entries().iter().cloned());
        }
        SplitIndexing::HighBlockS1 => {
            entries.extend(split.s2.entries().iter().cloned());
            entries.extend(split.s1.entries().iter().cloned());
        }
    }
    TorusChain::new(n, entries, split.s1.modulus().clone())
}

/// The collapse constant of the balanced formula, implemented verbatim as the
/// cardinality of T^M_zeta / T^M_o. As written it does not depend on s; the
/// engine separately measures the empirical constant per s and reports both.
pub fn balanced_constant(zeta: &ZetaParam, _s: &TorusChain, m_rank: usize) -> Result<u128> {
    if m_rank < 2 {
        return Err(Error::domain("M rank must be >= 2"));
    }
    Ok(chain_count_formula(m_rank, &ChainBounds::from_zeta(zeta)))
}

/// prod over the chain's entries of |t_i|_R; 1 for the empty chain.
pub fn det_chain(chain: &TorusChain) -> Rat {
    let mut v = Rat::from_integer(1);
    for e in chain.entries() {
        v *= e.abs_r();
    }
    v
}
