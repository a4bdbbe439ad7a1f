//! Coefficient providers: unramified Whittaker values via Schur polynomials
//! in the Satake parameters, classical Fourier-coefficient sources (divisor
//! function, Ramanujan tau, sym^2 of the weight-12 form), and the
//! normalization bridge between the two,
//!   prod_p W_p(Delta_m) = prod_i |m_i|^{-i(N-i)/2} A(m_1, ..., m_{N-1}).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::arith::{factorize, Rat};
use crate::error::{Error, Result};

/// Satake parameters (alpha_1, ..., alpha_N) of an unramified local
/// representation at one prime.
#[derive(Debug, Clone, PartialEq)]
pub struct SatakeParams(pub Vec<Complex64>);

impl SatakeParams {
    pub fn rank(&self) -> usize {
        self.0.len()
    }

    /// Dual parameters alpha_i -> alpha_i^{-1}.
    pub fn dual(&self) -> SatakeParams {
        SatakeParams(self.0.iter().map(|a| a.inv()).collect())
    }

    /// |prod alpha_i|, which is 1 for a unitary central character.
    pub fn central_modulus(&self) -> f64 {
        self.0.iter().fold(Complex64::one(), |a, b| a * b).norm()
    }
}

/// Complete homogeneous symmetric polynomial h_k(alphas) by the stable
/// one-variable-at-a-time recursion.
pub fn complete_homogeneous(k: i64, alphas: &[Complex64]) -> Complex64 {
    if k < 0 {
        return Complex64::zero();
    }
    let k = k as usize;
    // h[j] = h_j of the variables seen so far.
    let mut h = vec![Complex64::zero(); k + 1];
    h[0] = Complex64::one();
    for &a in alphas {
        for j in 1..=k {
            let prev = h[j - 1];
            h[j] += a * prev;
        }
    }
    h[k]
}

/// Schur polynomial s_lambda(alphas) for a weakly decreasing integer tuple,
/// by Jacobi-Trudi, with the Laurent shift handled via the central character:
/// s_{lambda + c.1} = (prod alpha)^c s_lambda.
pub fn schur(lambda: &[i64], alphas: &[Complex64]) -> Complex64 {
    let n = alphas.len();
    assert_eq!(lambda.len(), n, "partition length must match variable count");
    for w in lambda.windows(2) {
        if w[0] < w[1] {
            return Complex64::zero();
        }
    }
    let shift = lambda[n - 1];
    let mu: Vec<i64> = lambda.iter().map(|&l| l - shift).collect();
    let central = alphas.iter().fold(Complex64::one(), |a, &b| a * b);
    let mut mat = vec![Complex64::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            mat[i * n + j] = complete_homogeneous(mu[i] - i as i64 + j as i64, alphas);
        }
    }
    det(&mut mat, n) * central.powi(shift as i32)
}

fn det(mat: &mut [Complex64], n: usize) -> Complex64 {
    let mut sign = Complex64::one();
    for col in 0..n {
        // Partial pivot.
        let mut piv = col;
        for r in col + 1..n {
            if mat[r * n + col].norm() > mat[piv * n + col].norm() {
                piv = r;
            }
        }
        if mat[piv * n + col].norm() == 0.0 {
            return Complex64::zero();
        }
        if piv != col {
            for j in 0..n {
                mat.swap(col * n + j, piv * n + j);
            }
            sign = -sign;
        }
        let d = mat[col * n + col];
        for r in col + 1..n {
            let f = mat[r * n + col] / d;
            for j in col..n {
                let v = mat[col * n + j];
                mat[r * n + j] -= f * v;
            }
        }
    }
    let mut out = sign;
    for i in 0..n {
        out *= mat[i * n + i];
    }
    out
}

/// Unramified Whittaker value at diag(p^{lambda_1}, ..., p^{lambda_N}):
/// delta^{1/2}-normalized Schur value, zero off the dominant cone.
pub fn cs_whittaker(p: u64, alphas: &SatakeParams, lambda: &[i64]) -> Complex64 {
    let n = alphas.rank();
    assert_eq!(lambda.len(), n);
    for w in lambda.windows(2) {
        if w[0] < w[1] {
            return Complex64::zero();
        }
    }
    // delta^{1/2}(p^lambda) = p^{-(1/2) sum_i lambda_i (N + 1 - 2i)}, i from 1.
    let mut expo = 0.0f64;
    for (i, &l) in lambda.iter().enumerate() {
        expo += l as f64 * (n as f64 + 1.0 - 2.0 * (i as f64 + 1.0));
    }
    let scale = (p as f64).powf(-expo / 2.0);
    schur(lambda, &alphas.0) * scale
}

/// The (FC) normalization factor prod_i |m_i|^{-i(n-i)/2}; `n_value`
/// overrides the rank in the exponent for testing the printed lowercase-n
/// reading (it coincides with the rank by default).
pub fn fc_factor(m: &[u64], rank: usize, n_value: Option<usize>) -> f64 {
    let n = n_value.unwrap_or(rank) as f64;
    let mut f = 1.0f64;
    for (i, &mi) in m.iter().enumerate() {
        let i1 = (i + 1) as f64;
        f *= (mi as f64).powf(-i1 * (n - i1) / 2.0);
    }
    f
}

/// prod_p W_p(Delta_m) from a Fourier coefficient: fc_normalize(A at m).
pub fn fc_normalize(m: &[u64], coefficient: Complex64, rank: usize) -> Complex64 {
    coefficient * fc_factor(m, rank, None)
}

/// Inverse of fc_normalize: recover A from the Whittaker product.
pub fn fc_denormalize(m: &[u64], whittaker_product: Complex64, rank: usize) -> Complex64 {
    whittaker_product / fc_factor(m, rank, None)
}

/// The diagonal lambda-vector at p encoded by a Fourier index
/// (m_1, ..., m_{N-1}): lambda_j = sum_{i >= j} v_p(m_i), lambda_N = 0.
pub fn fourier_index_lambda(m: &[u64], p: u64) -> Vec<i64> {
    let rank = m.len() + 1;
    let mut lambda = vec![0i64; rank];
    for j in 0..rank - 1 {
        let mut s = 0i64;
        for (i, &mi) in m.iter().enumerate() {
            if i >= j {
                let mut v = 0i64;
                let mut x = mi;
                while x % p == 0 {
                    x /= p;
                    v += 1;
                }
                s += v;
            }
        }
        lambda[j] = s;
    }
    lambda
}

/// Abstract source of Fourier/Whittaker data for an unramified pi.
pub trait CoefficientProvider: Send + Sync {
    fn rank(&self) -> usize;
    fn name(&self) -> &str;

    /// Satake parameters at p.
    fn satake(&self, p: u64) -> Result<SatakeParams>;

    fn is_self_dual(&self) -> bool {
        true
    }

    /// True for the Eisenstein-type source whose twisted Dirichlet series has
    /// a pole producing a main term on the dual side.
    fn has_divisor_pole(&self) -> bool {
        false
    }

    /// Hecke-normalized Fourier coefficient A(m_1, ..., m_{N-1}), assembled
    /// multiplicatively from Schur values of the Satake parameters.
    fn fourier(&self, m: &[u64]) -> Result<Complex64> {
        if m.len() + 1 != self.rank() {
            return Err(Error::domain(format!(
                "fourier index length {} for rank {}",
                m.len(),
                self.rank()
            )));
        }
        if m.iter().any(|&x| x == 0) {
            return Err(Error::domain("fourier index entries must be >= 1"));
        }
        let mut primes: Vec<u64> = Vec::new();
        for &mi in m {
            for (p, _) in factorize(mi) {
                if !primes.contains(&p) {
                    primes.push(p);
                }
            }
        }
        let mut out = Complex64::one();
        for p in primes {
            let lambda = fourier_index_lambda(m, p);
            out *= schur(&lambda, &self.satake(p)?.0);
        }
        Ok(out)
    }
}

/// Local Whittaker value for a provider (or its contragredient) at a given
/// lambda-vector.
pub fn provider_whittaker(
    provider: &dyn CoefficientProvider,
    p: u64,
    lambda: &[i64],
    dual: bool,
) -> Result<Complex64> {
    let s = provider.satake(p)?;
    let s = if dual { s.dual() } else { s };
    Ok(cs_whittaker(p, &s, lambda))
}

/// Product of local Whittaker values over all primes where the diagonal of
/// exact rationals is non-unital. Entries are F^x values; the value vanishes
/// unless every local valuation vector is dominant.
pub fn finite_whittaker(
    provider: &dyn CoefficientProvider,
    diag: &[Rat],
    dual: bool,
) -> Result<Complex64> {
    if diag.len() != provider.rank() {
        return Err(Error::domain("diagonal length must equal the rank"));
    }
    let mut primes: Vec<u64> = Vec::new();
    for x in diag {
        for part in [x.numer().unsigned_abs(), x.denom().unsigned_abs()] {
            for (p, _) in factorize(part as u64) {
                if !primes.contains(&p) {
                    primes.push(p);
                }
            }
        }
    }
    primes.sort_unstable();
    let mut out = Complex64::one();
    for p in primes {
        let lambda: Vec<i64> = diag.iter().map(|x| v_p_rat(*x, p)).collect();
        let w = provider_whittaker(provider, p, &lambda, dual)?;
        if w == Complex64::zero() {
            return Ok(Complex64::zero());
        }
        out *= w;
    }
    Ok(out)
}

fn v_p_rat(x: Rat, p: u64) -> i64 {
    let p = p as i128;
    let mut v = 0i64;
    let mut n = *x.numer();
    let mut d = *x.denom();
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

/// Number-of-divisors function.
pub fn divisor_coeffs(n: u64) -> u64 {
    factorize(n).values().map(|&e| e as u64 + 1).product()
}

/// Exact Ramanujan tau table: tau(n) for 1 <= n <= n_max, from the
/// q-expansion of Delta = q prod_m (1 - q^m)^24 in integer arithmetic.
pub struct TauTable {
    tau: Vec<i128>,
}

impl TauTable {
    pub fn new(n_max: usize) -> TauTable {
        let e = euler_series(n_max);
        let e24 = pow_series(&e, 24, n_max);
        let mut tau = vec![0i128; n_max + 1];
        for n in 1..=n_max {
            tau[n] = e24[n - 1];
        }
        TauTable { tau }
    }

    pub fn cutoff(&self) -> u64 {
        (self.tau.len() - 1) as u64
    }

    pub fn get(&self, n: u64) -> Result<i128> {
        self.tau
            .get(n as usize)
            .copied()
            .filter(|_| n >= 1)
            .ok_or_else(|| Error::unsupported(format!("tau cutoff exceeded at n={n}")))
    }
}

/// prod_{m>=1} (1 - q^m) truncated to n_max coefficients, via the pentagonal
/// number theorem.
fn euler_series(n_max: usize) -> Vec<i128> {
    let mut e = vec![0i128; n_max];
    if n_max == 0 {
        return e;
    }
    e[0] = 1;
    let mut k = 1i64;
    loop {
        let g1 = k * (3 * k - 1) / 2;
        let g2 = k * (3 * k + 1) / 2;
        if g1 as usize >= n_max && g2 as usize >= n_max {
            break;
        }
        let sign = if k % 2 == 0 { 1i128 } else { -1i128 };
        for g in [g1, g2] {
            if (g as usize) < n_max {
                e[g as usize] += sign;
            }
        }
        k += 1;
    }
    e
}

fn mul_series(a: &[i128], b: &[i128], n_max: usize) -> Vec<i128> {
    let mut out = vec![0i128; n_max];
    for (i, &ai) in a.iter().enumerate().take(n_max) {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n_max - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn pow_series(base: &[i128], mut exp: u32, n_max: usize) -> Vec<i128> {
    let mut acc = vec![0i128; n_max];
    acc[0] = 1;
    let mut b = base.to_vec();
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_series(&acc, &b, n_max);
        }
        exp >>= 1;
        if exp > 0 {
            b = mul_series(&b, &b, n_max);
        }
    }
    acc
}

/// Jacobi route for cross-checking Delta: eta^3 = sum_k (-1)^k (2k+1)
/// q^{k(k+1)/2}, and Delta = q (eta^3)^8.
pub fn tau_table_jacobi(n_max: usize) -> Vec<i128> {
    let mut eta3 = vec![0i128; n_max];
    let mut k = 0i64;
    loop {
        let g = k * (k + 1) / 2;
        if g as usize >= n_max {
            break;
        }
        let sign = if k % 2 == 0 { 1i128 } else { -1i128 };
        eta3[g as usize] += sign * (2 * k + 1) as i128;
        k += 1;
    }
    let e24 = pow_series(&eta3, 8, n_max);
    let mut tau = vec![0i128; n_max + 1];
    for n in 1..=n_max {
        tau[n] = e24[n - 1];
    }
    tau
}

/// GL(2) divisor-function source: pi = 1 boxplus 1, Satake (1, 1),
/// A(n) = d(n). Its twisted Dirichlet series has a double pole at s = 1.
pub struct DivisorProvider;

impl CoefficientProvider for DivisorProvider {
    fn rank(&self) -> usize {
        2
    }
    fn name(&self) -> &str {
        "divisor"
    }
    fn satake(&self, _p: u64) -> Result<SatakeParams> {
        Ok(SatakeParams(vec![Complex64::one(), Complex64::one()]))
    }
    fn has_divisor_pole(&self) -> bool {
        true
    }
}

/// GL(2) holomorphic weight-12 source: A(n) = tau(n) / n^{11/2}.
pub struct DeltaProvider {
    tau: TauTable,
}

impl DeltaProvider {
    pub fn new(cutoff: usize) -> DeltaProvider {
        DeltaProvider {
            tau: TauTable::new(cutoff),
        }
    }

    pub fn tau(&self) -> &TauTable {
        &self.tau
    }

    pub fn normalized_tau(&self, p: u64) -> Result<f64> {
        let t = self.tau.get(p)? as f64;
        Ok(t / (p as f64).powf(5.5))
    }
}

impl CoefficientProvider for DeltaProvider {
    fn rank(&self) -> usize {
        2
    }
    fn name(&self) -> &str {
        "delta"
    }
    fn satake(&self, p: u64) -> Result<SatakeParams> {
        let t = self.normalized_tau(p)?;
        // alpha + conj(alpha) = t, alpha * conj(alpha) = 1; |t| < 2 (Deligne).
        let disc = (4.0 - t * t).max(0.0).sqrt();
        let alpha = Complex64::new(t / 2.0, disc / 2.0);
        Ok(SatakeParams(vec![alpha, alpha.conj()]))
    }
}

/// Satake parameters of sym^2 pi_p from the two of pi_p: squares and the
/// cross term (alpha^2, 1, beta^2).
pub fn sym2_satake(two: &SatakeParams) -> Result<SatakeParams> {
    if two.rank() != 2 {
        return Err(Error::domain("sym2_satake needs a rank-2 input"));
    }
    let a = two.0[0];
    let b = two.0[1];
    Ok(SatakeParams(vec![a * a, a * b, b * b]))
}

/// GL(3) sym^2 of the weight-12 form.
pub struct Sym2DeltaProvider {
    delta: DeltaProvider,
}

impl Sym2DeltaProvider {
    pub fn new(cutoff: usize) -> Sym2DeltaProvider {
        Sym2DeltaProvider {
            delta: DeltaProvider::new(cutoff),
        }
    }
}

impl CoefficientProvider for Sym2DeltaProvider {
    fn rank(&self) -> usize {
        3
    }
    fn name(&self) -> &str {
        "sym2-delta"
    }
    fn satake(&self, p: u64) -> Result<SatakeParams> {
        sym2_satake(&self.delta.satake(p)?)
    }
}

/// Report from the Hecke-relation self-test.
#[derive(Debug, Clone)]
pub struct HeckeReport {
    pub max_defect: f64,
    pub checks: usize,
}

/// Multiplicativity on coprime indices plus the rank-appropriate
/// prime-power recursions, as numeric defects.
pub fn hecke_verify(provider: &dyn CoefficientProvider, prime_bound: u64) -> Result<HeckeReport> {
    let mut max_defect = 0.0f64;
    let mut checks = 0usize;
    let primes = crate::arith::primes_up_to(prime_bound);
    match provider.rank() {
        2 => {
            // Coprime multiplicativity over a modest index box.
            for m in 1..=50u64 {
                for n in 1..=50u64 {
                    if num_integer::gcd(m, n) == 1 {
                        let a = provider.fourier(&[m * n])?;
                        let b = provider.fourier(&[m])? * provider.fourier(&[n])?;
                        max_defect = max_defect.max((a - b).norm());
                        checks += 1;
                    }
                }
            }
            // lambda(p) lambda(p^k) = lambda(p^{k+1}) + lambda(p^{k-1}).
            for &p in &primes {
                for k in 1..=4u32 {
                    let lp = provider.fourier(&[p])?;
                    let lk = provider.fourier(&[p.pow(k)])?;
                    let lk1 = provider.fourier(&[p.pow(k + 1)])?;
                    let lkm = provider.fourier(&[p.pow(k - 1)])?;
                    max_defect = max_defect.max((lp * lk - lk1 - lkm).norm());
                    checks += 1;
                }
            }
        }
        3 => {
            // A(p,1)^2 = A(p^2,1) + A(1,p) at each prime.
            for &p in &primes {
                let a = provider.fourier(&[p, 1])?;
                let b = provider.fourier(&[p * p, 1])?;
                let c = provider.fourier(&[1, p])?;
                max_defect = max_defect.max((a * a - b - c).norm());
                checks += 1;
            }
            // Coprime multiplicativity on two-part indices.
            for (m1, m2) in [(2u64, 3u64), (4, 9), (2, 25), (8, 3), (9, 25)] {
                let joint = provider.fourier(&[m1 * m2, 1])?;
                let split = provider.fourier(&[m1, 1])? * provider.fourier(&[m2, 1])?;
                max_defect = max_defect.max((joint - split).norm());
                checks += 1;
            }
        }
        r => {
            return Err(Error::unsupported(format!(
                "hecke_verify not implemented for rank {r}"
            )))
        }
    }
    Ok(HeckeReport { max_defect, checks })
}

/// A cached Fourier-coefficient table with exact-string values, CSV-backed.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    pub source: String,
    pub version: String,
    entries: BTreeMap<Vec<u64>, (String, String)>,
}

pub const FOURIER_TABLE_VERSION: &str = "1";

impl FourierTable {
    pub fn new(source: &str) -> FourierTable {
        FourierTable {
            source: source.to_string(),
            version: FOURIER_TABLE_VERSION.to_string(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert_exact(&mut self, index: Vec<u64>, re: String, im: String) {
        self.entries.insert(index, (re, im));
    }

    pub fn insert(&mut self, index: Vec<u64>, value: Complex64) {
        self.entries
            .insert(index, (format!("{:?}", value.re), format!("{:?}", value.im)));
    }

    pub fn get(&self, index: &[u64]) -> Option<Complex64> {
        self.entries.get(index).map(|(re, im)| {
            Complex64::new(re.parse().unwrap_or(0.0), im.parse().unwrap_or(0.0))
        })
    }

    pub fn get_exact(&self, index: &[u64]) -> Option<&(String, String)> {
        self.entries.get(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Seeded standard-complex-Gaussian table on a rectangular index box;
    /// the same seed always reproduces the same table.
    pub fn random_box(rank: usize, side: u64, seed: u64) -> FourierTable {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut table = FourierTable::new("random-seeded");
        let dims = rank - 1;
        let mut index = vec![1u64; dims];
        loop {
            let re = gaussian(&mut rng);
            let im = gaussian(&mut rng);
            table.insert(index.clone(), Complex64::new(re, im));
            let mut k = 0;
            loop {
                if k == dims {
                    return table;
                }
                index[k] += 1;
                if index[k] <= side {
                    break;
                }
                index[k] = 1;
                k += 1;
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index_tuple,re,im,source,version\n");
        for (idx, (re, im)) in &self.entries {
            let key: Vec<String> = idx.iter().map(u64::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                key.join(";"),
                re,
                im,
                self.source,
                self.version
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<FourierTable> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty fourier table".into()))?;
        if header.trim() != "index_tuple,re,im,source,version" {
            return Err(Error::Parse(format!("bad fourier table header: {header}")));
        }
        let mut table = FourierTable::new("");
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Parse(format!("bad fourier table row: {line}")));
            }
            let index: Vec<u64> = cols[0]
                .split(';')
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad index {s}"))))
                .collect::<Result<_>>()?;
            table.insert_exact(index, cols[1].to_string(), cols[2].to_string());
            table.source = cols[3].to_string();
            table.version = cols[4].to_string();
        }
        Ok(table)
    }
}

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{primes_up_to, rat};

    #[test]
    fn schur_basics() {
        let a = vec![Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0)];
        // s_{(1,0)} = e_1 = 5, s_{(1,1)} = e_2 = 6, s_{(2,0)} = h_2 - e_2? no:
        // s_{(2,0)} = h_2 = 4 + 6 + 9 = 19.
        assert!((schur(&[1, 0], &a) - Complex64::new(5.0, 0.0)).norm() < 1e-12);
        assert!((schur(&[1, 1], &a) - Complex64::new(6.0, 0.0)).norm() < 1e-12);
        assert!((schur(&[2, 0], &a) - Complex64::new(19.0, 0.0)).norm() < 1e-12);
        // Laurent shift: s_{(0,-1)} = (ab)^{-1} s_{(1,0)}.
        assert!((schur(&[0, -1], &a) - Complex64::new(5.0 / 6.0, 0.0)).norm() < 1e-12);
        // Non-dominant tuples vanish.
        assert_eq!(schur(&[0, 1], &a), Complex64::zero());
    }

    #[test]
    fn schur_symmetry_under_permutation() {
        let a = vec![
            Complex64::new(0.3, 0.7),
            Complex64::new(-1.2, 0.1),
            Complex64::new(0.9, -0.4),
        ];
        let mut b = a.clone();
        b.swap(0, 2);
        for lam in [[3i64, 1, 0], [2, 2, 0], [4, 2, 1]] {
            let x = schur(&lam, &a);
            let y = schur(&lam, &b);
            assert!((x - y).norm() < 1e-10 * x.norm().max(1.0));
        }
    }

    #[test]
    fn cs_whittaker_normalization() {
        // lambda = 0 gives 1 for any Satake data.
        let s = SatakeParams(vec![Complex64::new(0.6, 0.8), Complex64::new(0.6, -0.8)]);
        assert!((cs_whittaker(7, &s, &[0, 0]) - Complex64::one()).norm() < 1e-14);
        // GL(2), lambda = (1, 0): p^{-1/2} (alpha + beta).
        let v = cs_whittaker(7, &s, &[1, 0]);
        let expect = Complex64::new(1.2 / (7.0f64).sqrt(), 0.0);
        assert!((v - expect).norm() < 1e-14);
        // Non-dominant vanishes.
        assert_eq!(cs_whittaker(7, &s, &[0, 1]), Complex64::zero());
    }

    #[test]
    fn divisor_provider_counts_divisors() {
        let d = DivisorProvider;
        for n in 1..=200u64 {
            let a = d.fourier(&[n]).unwrap();
            assert!(
                (a - Complex64::new(divisor_coeffs(n) as f64, 0.0)).norm() < 1e-9,
                "n={n}"
            );
        }
        assert_eq!(divisor_coeffs(12), 6);
    }

    #[test]
    fn tau_table_values() {
        let t = TauTable::new(1000);
        assert_eq!(t.get(1).unwrap(), 1);
        assert_eq!(t.get(2).unwrap(), -24);
        assert_eq!(t.get(3).unwrap(), 252);
        assert_eq!(t.get(4).unwrap(), -1472);
        assert_eq!(t.get(5).unwrap(), 4830);
        assert_eq!(t.get(6).unwrap(), -6048);
        assert_eq!(t.get(7).unwrap(), -16744);
        // Multiplicativity and the p-power recursion, exactly in integers.
        assert_eq!(t.get(6).unwrap(), t.get(2).unwrap() * t.get(3).unwrap());
        let p: i128 = 2;
        assert_eq!(
            t.get(4).unwrap(),
            t.get(2).unwrap().pow(2) - p.pow(11)
        );
        assert!(t.get(2000).is_err());
    }

    #[test]
    fn tau_two_routes_agree() {
        let a = TauTable::new(500);
        let b = tau_table_jacobi(500);
        for n in 1..=500u64 {
            assert_eq!(a.get(n).unwrap(), b[n as usize], "n={n}");
        }
    }

    #[test]
    fn deligne_bound_screen() {
        let t = TauTable::new(211);
        for p in primes_up_to(200) {
            let tau = t.get(p).unwrap() as f64;
            assert!(
                tau.abs() <= 2.0 * (p as f64).powf(5.5) + 1e-6,
                "Deligne bound fails at {p}"
            );
        }
    }

    #[test]
    fn delta_hecke_relations() {
        let d = DeltaProvider::new(3000);
        let report = hecke_verify(&d, 50).unwrap();
        assert!(report.max_defect < 1e-10, "defect {}", report.max_defect);
        assert!(report.checks > 100);
    }

    #[test]
    fn divisor_hecke_relations() {
        let report = hecke_verify(&DivisorProvider, 50).unwrap();
        assert!(report.max_defect < 1e-10);
    }

    #[test]
    fn sym2_hecke_relations() {
        let s = Sym2DeltaProvider::new(3000);
        let report = hecke_verify(&s, 80).unwrap();
        assert!(report.max_defect < 1e-9, "defect {}", report.max_defect);
        // A(p,1) = lambda(p)^2 - 1 for sym^2 of a GL(2) form.
        let d = DeltaProvider::new(100);
        for p in [2u64, 3, 5, 7, 11] {
            let lp = d.fourier(&[p]).unwrap().re;
            let ap = s.fourier(&[p, 1]).unwrap();
            assert!(
                (ap - Complex64::new(lp * lp - 1.0, 0.0)).norm() < 1e-10,
                "p={p}"
            );
        }
    }

    #[test]
    fn fc_roundtrip_and_consistency() {
        // Roundtrip on random entries.
        let table = FourierTable::random_box(3, 5, 7);
        let mut n = 0;
        for m1 in 1..=5u64 {
            for m2 in 1..=5u64 {
                let a = table.get(&[m1, m2]).unwrap();
                let w = fc_normalize(&[m1, m2], a, 3);
                let back = fc_denormalize(&[m1, m2], w, 3);
                assert!((a - back).norm() < 1e-12 * a.norm().max(1.0));
                n += 1;
            }
        }
        assert_eq!(n, 25);
        // All-ones index: factor 1, A(1,...,1) = A.
        assert_eq!(fc_factor(&[1, 1], 3, None), 1.0);
        // GL(2), m = p: factor p^{-1/2} per the 1*(2-1)/2 exponent.
        assert!((fc_factor(&[9], 2, None) - (9.0f64).powf(-0.5)).abs() < 1e-15);

        // Whittaker-product consistency: prod_p W_p(Delta_m) from the Satake
        // data equals the normalized Fourier coefficient.
        let d = DeltaProvider::new(200);
        for m in [2u64, 6, 12, 45] {
            let a = d.fourier(&[m]).unwrap();
            let lhs = fc_normalize(&[m], a, 2);
            let mut rhs = Complex64::one();
            for (p, _) in factorize(m) {
                let lambda = fourier_index_lambda(&[m], p);
                rhs *= cs_whittaker(p, &d.satake(p).unwrap(), &lambda);
            }
            assert!((lhs - rhs).norm() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn contragredient_duality() {
        let d = DeltaProvider::new(100);
        let s2 = Sym2DeltaProvider::new(100);
        for p in [2u64, 5, 13] {
            for lam in [[2i64, 0], [3, 1]] {
                let via_dual = provider_whittaker(&d, p, &lam, true).unwrap();
                let direct = cs_whittaker(p, &d.satake(p).unwrap().dual(), &lam);
                assert!((via_dual - direct).norm() < 1e-12);
            }
            for lam in [[2i64, 1, 0], [3, 0, 0]] {
                let via_dual = provider_whittaker(&s2, p, &lam, true).unwrap();
                let direct = cs_whittaker(p, &s2.satake(p).unwrap().dual(), &lam);
                assert!((via_dual - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn finite_whittaker_on_diagonals() {
        let d = DeltaProvider::new(100);
        // diag(n, 1): n^{-1/2} lambda(n).
        for n in [2u64, 9, 10] {
            let v = finite_whittaker(&d, &[rat(n as i128, 1), rat(1, 1)], false).unwrap();
            let expect = d.fourier(&[n]).unwrap() * (n as f64).powf(-0.5);
            assert!((v - expect).norm() < 1e-12, "n={n}");
        }
        // Non-dominant somewhere: zero.
        let z = finite_whittaker(&d, &[rat(1, 2), rat(1, 1)], false).unwrap();
        assert_eq!(z, Complex64::zero());
    }

    #[test]
    fn random_table_reproducible() {
        let a = FourierTable::random_box(2, 16, 42);
        let b = FourierTable::random_box(2, 16, 42);
        assert_eq!(a, b);
        let c = FourierTable::random_box(2, 16, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn fourier_table_csv_roundtrip() {
        let mut t = FourierTable::new("tau");
        let tau = TauTable::new(30);
        for n in 1..=30u64 {
            t.insert_exact(vec![n], tau.get(n).unwrap().to_string(), "0".into());
        }
        let csv = t.to_csv();
        assert!(csv.starts_with("index_tuple,re,im,source,version\n"));
        // Exact integer strings survive.
        assert!(csv.contains("6,-6048,0,tau,1"));
        let back = FourierTable::from_csv(&csv).unwrap();
        assert_eq!(back.get_exact(&[6]).unwrap().0, "-6048");
        assert_eq!(back.source, "tau");
        assert_eq!(t, back);
    }

    #[test]
    fn satake_unitarity() {
        let d = DeltaProvider::new(100);
        let s2 = Sym2DeltaProvider::new(100);
        for p in [2u64, 3, 5, 7, 11, 13] {
            assert!((d.satake(p).unwrap().central_modulus() - 1.0).abs() < 1e-12);
            assert!((s2.satake(p).unwrap().central_modulus() - 1.0).abs() < 1e-12);
        }
    }
}
