//! The archimedean transform: smooth compactly supported test weights, gamma
//! factors gamma(1 - s, pi x chi, psi) assembled from Gamma_R data, and the
//! dual weight computed by numerical inverse Mellin integration along a
//! vertical contour, with decay certification.
//!
//! Conventions. Mellin transforms are multiplicative: M[f](z) = int f(y) y^z
//! dy/y over (0, infinity). With z = s - (N-1)/2 the defining relation for
//! the dual weight of a positively supported test weight reads, per parity
//! component eta in {0, 1} of the unitary character,
//!   M_eta[dual](z) = (-1)^{eta (N-1)} gamma_eta(1 - s) M[w](2 - N - z),
//! where M_eta[f](z) = M[f(y) + (-1)^eta f(-y)](z). Both components are
//! inverted on the line Re z = sigma and recombined into the two half-lines.

use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::error::{Error, Result};
use crate::quad::tanh_sinh;

const PI: f64 = std::f64::consts::PI;

/// Smooth bump on (0, infinity): exp(1 - 1/(1 - u^2)) with u = ln(y/x0)/h,
/// supported exactly on [x0 e^{-h}, x0 e^{h}] with peak value 1 at x0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestWeight {
    pub x0: f64,
    pub h: f64,
}

impl TestWeight {
    pub fn new(x0: f64, h: f64) -> Result<TestWeight> {
        if !(x0 > 0.0 && h > 0.0) {
            return Err(Error::domain("test weight needs x0 > 0 and h > 0"));
        }
        Ok(TestWeight { x0, h })
    }

    pub fn eval(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let u = (y / self.x0).ln() / self.h;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x0 * (-self.h).exp(), self.x0 * self.h.exp())
    }

    /// Multiplicative Mellin transform, adaptive quadrature.
    pub fn mellin(&self, z: Complex64) -> Result<Complex64> {
        let (value, _err) = tanh_sinh(
            |u| {
                let w = (1.0 - 1.0 / (1.0 - u * u)).exp();
                let v = self.x0.ln() + self.h * u;
                (z * v).exp() * w * self.h
            },
            -1.0,
            1.0,
            1e-13,
        )?;
        Ok(value)
    }

    /// Mellin values at z = a + i t_k for a shared real part and many
    /// ordinates, via a single midpoint discretization of the log-support.
    /// The bump vanishes to all orders at the endpoints, so the midpoint sum
    /// converges spectrally once the oscillation is resolved.
    pub fn mellin_line(&self, a: f64, ts: &[f64]) -> Vec<Complex64> {
        let t_max = ts.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
        let n = 768 + (4.0 * self.h * t_max / PI).ceil() as usize;
        let du = 2.0 / n as f64;
        // Precompute nodes: physical log-position and real factor.
        let mut pos = Vec::with_capacity(n);
        let mut fac = Vec::with_capacity(n);
        for j in 0..n {
            let u = -1.0 + (j as f64 + 0.5) * du;
            let w = (1.0 - 1.0 / (1.0 - u * u)).exp();
            let v = self.x0.ln() + self.h * u;
            pos.push(v);
            fac.push(w * (a * v).exp() * self.h * du);
        }
        ts.par_iter()
            .map(|&t| {
                let mut acc = Complex64::zero();
                // Incremental rotation along the uniform grid, refreshed
                // periodically to curb drift.
                let step = Complex64::from_polar(1.0, t * self.h * du);
                let mut rot = Complex64::from_polar(1.0, t * pos[0]);
                for j in 0..n {
                    if j % 512 == 0 {
                        rot = Complex64::from_polar(1.0, t * pos[j]);
                    }
                    acc += fac[j] * rot;
                    rot *= step;
                }
                acc
            })
            .collect()
    }

    pub fn hash_key(&self) -> u64 {
        crate::cache::fnv64(format!("weight:{:?}:{:?}", self.x0, self.h).as_bytes())
    }
}

/// Anything with a positive compactly supported profile and a Mellin
/// transform; the dual-weight machinery is linear in this input.
pub trait MellinWeight: Sync {
    fn eval(&self, y: f64) -> f64;
    fn support(&self) -> (f64, f64);
    fn mellin(&self, z: Complex64) -> Result<Complex64>;
    fn mellin_line(&self, a: f64, ts: &[f64]) -> Vec<Complex64>;
    fn hash_key(&self) -> u64;
}

impl MellinWeight for TestWeight {
    fn eval(&self, y: f64) -> f64 {
        TestWeight::eval(self, y)
    }
    fn support(&self) -> (f64, f64) {
        TestWeight::support(self)
    }
    fn mellin(&self, z: Complex64) -> Result<Complex64> {
        TestWeight::mellin(self, z)
    }
    fn mellin_line(&self, a: f64, ts: &[f64]) -> Vec<Complex64> {
        TestWeight::mellin_line(self, a, ts)
    }
    fn hash_key(&self) -> u64 {
        TestWeight::hash_key(self)
    }
}

/// A finite linear combination of bumps.
#[derive(Debug, Clone)]
pub struct WeightSum(pub Vec<(f64, TestWeight)>);

impl MellinWeight for WeightSum {
    fn eval(&self, y: f64) -> f64 {
        self.0.iter().map(|(c, w)| c * w.eval(y)).sum()
    }
    fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (_, w) in &self.0 {
            let (a, b) = w.support();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }
    fn mellin(&self, z: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::zero();
        for (c, w) in &self.0 {
            acc += *c * w.mellin(z)?;
        }
        Ok(acc)
    }
    fn mellin_line(&self, a: f64, ts: &[f64]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::zero(); ts.len()];
        for (c, w) in &self.0 {
            for (k, v) in w.mellin_line(a, ts).into_iter().enumerate() {
                acc[k] += *c * v;
            }
        }
        acc
    }
    fn hash_key(&self) -> u64 {
        let mut s = String::from("sum");
        for (c, w) in &self.0 {
            s.push_str(&format!(":{c:?}@{:016x}", w.hash_key()));
        }
        crate::cache::fnv64(s.as_bytes())
    }
}

/// Parity component of a unitary character of R^x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn index(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

/// Sign convention for the archimedean additive character psi(x) = e^{±2πix}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiSign {
    Plus,
    Minus,
}

impl PsiSign {
    fn unit(self) -> f64 {
        match self {
            PsiSign::Plus => 1.0,
            PsiSign::Minus => -1.0,
        }
    }
}

/// Archimedean data defining gamma(1 - s, pi x sgn^eta, psi): per parity the
/// Gamma_R shifts and the epsilon factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaData {
    pub rank: usize,
    pub shifts: [Vec<f64>; 2],
    pub eps: [Complex64; 2],
    pub name: String,
}

impl GammaData {
    /// Riemann zeta: L_infinity(s) = Gamma_R(s); the sgn twist shifts the
    /// line to Gamma_R(s + 1) and multiplies epsilon by -i psi-sign.
    pub fn riemann_zeta(psi: PsiSign) -> GammaData {
        GammaData {
            rank: 1,
            shifts: [vec![0.0], vec![1.0]],
            eps: [
                Complex64::one(),
                Complex64::new(0.0, -psi.unit()),
            ],
            name: "zeta".into(),
        }
    }

    /// The Eisenstein GL(2) source (divisor function): zeta^2 data.
    /// Both psi signs give eps_odd = (-i psi)^2 = -1.
    pub fn divisor_gl2(_psi: PsiSign) -> GammaData {
        GammaData {
            rank: 2,
            shifts: [vec![0.0, 0.0], vec![1.0, 1.0]],
            eps: [Complex64::one(), -Complex64::one()],
            name: "divisor".into(),
        }
    }

    /// Holomorphic weight-k discrete series: Gamma_C(s + (k-1)/2), parity
    /// blind, eps = (i psi-sign)^k.
    pub fn holomorphic_gl2(k: u32, psi: PsiSign) -> GammaData {
        let shifts = vec![(k as f64 - 1.0) / 2.0, (k as f64 + 1.0) / 2.0];
        let i_pow = match (k as i64 * psi.unit() as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        GammaData {
            rank: 2,
            shifts: [shifts.clone(), shifts],
            eps: [i_pow, i_pow],
            name: format!("holomorphic-k{k}"),
        }
    }

    /// sym^2 of the weight-12 form: Gamma_R(s + 1) Gamma_C(s + 11), root
    /// number +1; the odd twist moves the Gamma_R(s + 1) line to Gamma_R(s)
    /// and scales epsilon by the inverse sgn-epsilon (i psi-sign).
    pub fn sym2_delta(psi: PsiSign) -> GammaData {
        GammaData {
            rank: 3,
            shifts: [vec![1.0, 11.0, 12.0], vec![0.0, 11.0, 12.0]],
            eps: [
                Complex64::one(),
                Complex64::new(0.0, psi.unit()),
            ],
            name: "sym2-delta".into(),
        }
    }

    /// Real parts (in s) of the poles of gamma(1 - s) for a parity: the
    /// numerator Gamma_R(s + m) poles at s = -m - 2k.
    pub fn pole_reals(&self, parity: Parity, depth: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for &m in &self.shifts[parity.index()] {
            for k in 0..depth {
                out.push(-m - 2.0 * k as f64);
            }
        }
        out
    }
}

/// Complex log-Gamma, Lanczos approximation with reflection.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if z.re < 0.5 {
        // Reflection: ln Gamma(z) = ln pi - ln sin(pi z) - ln Gamma(1 - z).
        return Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma(Complex64::one() - z);
    }
    let zm = z - Complex64::one();
    let mut x = Complex64::new(COEF[0], 0.0);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        x += c / (zm + Complex64::new(i as f64, 0.0));
    }
    let t = zm + Complex64::new(G + 0.5, 0.0);
    0.5 * (2.0 * PI).ln() + (zm + Complex64::new(0.5, 0.0)) * t.ln() - t + x.ln()
}

/// ln sin(pi z) without overflow for large |Im z|: peel off the dominant
/// exponential. Branch constants are irrelevant downstream (only exp of
/// log-Gamma sums is used).
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() < 8.0 {
        return (PI * z).sin().ln();
    }
    let i = Complex64::new(0.0, 1.0);
    if z.im > 0.0 {
        // sin(pi z) = -e^{-i pi z} (1 - e^{2 pi i z}) / (2i)
        -i * PI * z + (Complex64::one() - (2.0 * PI * i * z).exp()).ln()
            + Complex64::new(-(2.0f64.ln()), PI / 2.0)
    } else {
        i * PI * z + (Complex64::one() - (-2.0 * PI * i * z).exp()).ln()
            + Complex64::new(-(2.0f64.ln()), -PI / 2.0)
    }
}

/// ln Gamma_R(z) = -(z/2) ln pi + ln Gamma(z/2).
fn ln_gamma_r(z: Complex64) -> Complex64 {
    -(z / 2.0) * PI.ln() + ln_gamma(z / 2.0)
}

/// gamma_eta(1 - s) = eps_eta prod_i Gamma_R(s + m_i) / Gamma_R(1 - s + m_i)
/// for self-dual data.
pub fn gamma_factor(s: Complex64, g: &GammaData, parity: Parity) -> Result<Complex64> {
    let shifts = &g.shifts[parity.index()];
    // Pole guard: Gamma_R(s + m) poles where (s + m) is a nonpositive even
    // integer.
    for &m in shifts {
        let w = s + m;
        if w.im.abs() < 1e-8 {
            let half = w.re / 2.0;
            if half <= 1e-8 && (half - half.round()).abs() < 1e-8 {
                return Err(Error::precision(format!(
                    "gamma factor pole proximity at s = {s}, shift {m}"
                )));
            }
        }
    }
    let mut ln = Complex64::zero();
    for &m in shifts {
        ln += ln_gamma_r(s + m) - ln_gamma_r(Complex64::one() - s + m);
    }
    Ok(g.eps[parity.index()] * ln.exp())
}

/// Configuration for the dual-weight contour integration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualWeightConfig {
    /// Contour real part in the z-variable (Re s = sigma_z + (N-1)/2).
    pub sigma_z: f64,
    /// Ordinate step.
    pub dt: f64,
    /// Hard cap on the truncation height.
    pub t_cap: f64,
    /// Relative magnitude at which the contour is truncated.
    pub tail_rel: f64,
    /// Geometric sample grid for |y|.
    pub y_min: f64,
    pub y_max: f64,
    pub grid_n: usize,
}

impl DualWeightConfig {
    pub fn for_range(y_min: f64, y_max: f64) -> DualWeightConfig {
        let span = (y_max / y_min).ln().abs().max(1.0);
        DualWeightConfig {
            sigma_z: 1.0,
            dt: PI / (4.0 * (span + y_max.ln().abs() + 8.0)),
            t_cap: 40_000.0,
            tail_rel: 1e-13,
            y_min,
            y_max,
            grid_n: 2048,
        }
    }
}

/// The sampled-and-interpolated dual weight with its contour data and decay
/// certificate. Values on both half-lines: eval(y) for y > 0 reads the
/// positive branch, y < 0 the negative branch.
#[derive(Debug, Clone)]
pub struct DualWeight {
    pub rank: usize,
    pub sigma_z: f64,
    pub dt: f64,
    pub t_count: usize,
    /// E_eta samples at z = sigma_z + i t_k, t_k = (k - (count-1)/2) dt.
    e_even: Vec<Complex64>,
    e_odd: Vec<Complex64>,
    pub ln_y_min: f64,
    pub ln_y_step: f64,
    pub vals_pos: Vec<Complex64>,
    pub vals_neg: Vec<Complex64>,
    /// Fitted constants C_A with |dual(y)| <= C_A |y|^{-A}, A = 1, 2, 3,
    /// verified at the sampled tail points beyond `tail_start`.
    pub decay_c: [f64; 3],
    pub tail_start: f64,
    /// Bound on the neglected contour tail (per unit y^{-sigma}).
    pub contour_tail: f64,
    pub weight_hash: u64,
    pub gamma_hash: u64,
}

impl DualWeight {
    fn t_at(&self, k: usize) -> f64 {
        (k as f64 - (self.t_count as f64 - 1.0) / 2.0) * self.dt
    }

    /// Exact evaluation from the stored contour samples (trapezoid on the
    /// truncated line). `y` is signed and nonzero.
    pub fn eval_exact(&self, y: f64) -> Complex64 {
        let ay = y.abs();
        let lny = ay.ln();
        let mut f_even = Complex64::zero();
        let mut f_odd = Complex64::zero();
        let t0 = self.t_at(0);
        let step = Complex64::from_polar(1.0, -self.dt * lny);
        let mut rot = Complex64::from_polar(1.0, -t0 * lny);
        for k in 0..self.t_count {
            if k % 512 == 0 {
                rot = Complex64::from_polar(1.0, -self.t_at(k) * lny);
            }
            f_even += self.e_even[k] * rot;
            f_odd += self.e_odd[k] * rot;
            rot *= step;
        }
        let scale = self.dt / (2.0 * PI) * ay.powf(-self.sigma_z);
        f_even *= scale;
        f_odd *= scale;
        if y > 0.0 {
            0.5 * (f_even + f_odd)
        } else {
            0.5 * (f_even - f_odd)
        }
    }

    fn grid_len(&self) -> usize {
        self.vals_pos.len()
    }

    /// Interpolated evaluation on the sampled grid (cubic in ln |y|);
    /// beyond the grid the decay certificate extrapolates by zero with the
    /// certified bound available from `tail_bound`.
    pub fn eval(&self, y: f64) -> Complex64 {
        let ay = y.abs();
        let branch = if y > 0.0 {
            &self.vals_pos
        } else {
            &self.vals_neg
        };
        let pos = (ay.ln() - self.ln_y_min) / self.ln_y_step;
        if pos < 0.0 || pos > (self.grid_len() - 1) as f64 {
            return Complex64::zero();
        }
        let i = (pos.floor() as usize).clamp(1, self.grid_len() - 3);
        let u = pos - i as f64;
        // Catmull-Rom through the four surrounding samples.
        let (p0, p1, p2, p3) = (branch[i - 1], branch[i], branch[i + 1], branch[i + 2]);
        0.5 * ((2.0 * p1)
            + (-p0 + p2) * u
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u)
    }

    /// Certified bound |dual(y)| <= C_3 |y|^{-3} for |y| >= tail_start.
    pub fn tail_bound(&self, y_abs: f64) -> f64 {
        self.decay_c[2] * y_abs.powi(-3)
    }

    /// Mellin transforms of the parity component over the sampled window
    /// [y_min, y_max], evaluated at many ordinates with one shared set of
    /// quadrature nodes. Fixed-level tanh-sinh in the log variable resolves
    /// the dual weight's oscillation; the window truncation is covered by
    /// the decay certificate on the right and the gamma-pole vanishing rate
    /// on the left.
    pub fn mellin_back_batch(&self, zs: &[Complex64], parity: Parity) -> Vec<Complex64> {
        let ln_a = self.ln_y_min;
        let ln_b = self.ln_y_min + self.ln_y_step * (self.grid_len() - 1) as f64;
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        // The dual weight is band-limited in ln y to the contour height, so
        // Gauss-Legendre panels sized against that band are spectrally
        // accurate.
        let band = self.significant_height().max(8.0);
        let panels = ((band * (ln_b - ln_a)) / 50.0).ceil() as usize + 8;
        let per = 64usize;
        let (gx, gw) = crate::quad::gauss_legendre(per);
        let width = (ln_b - ln_a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * per);
        for p in 0..panels {
            let c = ln_a + (p as f64 + 0.5) * width;
            for j in 0..per {
                nodes.push((c + 0.5 * width * gx[j], 0.5 * width * gw[j]));
            }
        }
        let fvals: Vec<Complex64> = nodes
            .par_iter()
            .map(|&(lv, wgt)| {
                let y = lv.exp();
                (self.eval_exact(y) + sign * self.eval_exact(-y)) * wgt
            })
            .collect();
        zs.iter()
            .map(|&z| {
                let mut acc = Complex64::zero();
                for (k, &(lv, _)) in nodes.iter().enumerate() {
                    acc += fvals[k] * (z * lv).exp();
                }
                acc
            })
            .collect()
    }

    /// Largest ordinate carrying non-negligible contour mass.
    pub fn significant_height(&self) -> f64 {
        let peak = self
            .e_even
            .iter()
            .chain(self.e_odd.iter())
            .fold(0.0f64, |m, v| m.max(v.norm()));
        let mut t_sig = 0.0f64;
        for k in 0..self.t_count {
            let v = self.e_even[k].norm().max(self.e_odd[k].norm());
            if v > 1e-11 * peak {
                t_sig = t_sig.max(self.t_at(k).abs());
            }
        }
        t_sig
    }

    pub fn mellin_back(&self, z: Complex64, parity: Parity) -> Result<Complex64> {
        Ok(self.mellin_back_batch(&[z], parity)[0])
    }

    /// Max relative defect of the defining relation at `n` probe ordinates.
    pub fn defining_relation_probe(
        &self,
        w: &dyn MellinWeight,
        g: &GammaData,
        n: usize,
    ) -> Result<f64> {
        let zs: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(self.sigma_z, -3.0 + 6.0 * (j as f64 + 0.5) / n as f64))
            .collect();
        let mut worst = 0.0f64;
        for parity in [Parity::Even, Parity::Odd] {
            let lhs = self.mellin_back_batch(&zs, parity);
            // Scale defects by the typical magnitude across the probes so a
            // single near-zero sample cannot blow up the ratio.
            let mut scale = 0.0f64;
            let mut rhs = Vec::with_capacity(n);
            for &z in &zs {
                let r = defining_rhs(z, w, g, parity)?;
                scale = scale.max(r.norm());
                rhs.push(r);
            }
            for k in 0..n {
                worst = worst.max((lhs[k] - rhs[k]).norm() / scale.max(1e-300));
            }
        }
        Ok(worst)
    }
}

/// The right-hand side of the defining relation in the z-variable:
/// (-1)^{eta (N-1)} gamma_eta(1-s)|_{s = z + (N-1)/2} M[w](2 - N - z).
pub fn defining_rhs(
    z: Complex64,
    w: &dyn MellinWeight,
    g: &GammaData,
    parity: Parity,
) -> Result<Complex64> {
    let n = g.rank as f64;
    let s = z + (n - 1.0) / 2.0;
    let sign = if parity == Parity::Odd && (g.rank - 1) % 2 == 1 {
        -1.0
    } else {
        1.0
    };
    Ok(sign * gamma_factor(s, g, parity)? * w.mellin(Complex64::new(2.0 - n, 0.0) - z)?)
}

/// Construct the dual weight by inverse Mellin integration on Re z =
/// sigma_z, adaptively truncated, and sample it on a geometric grid.
pub fn dual_weight(w: &dyn MellinWeight, g: &GammaData, cfg: &DualWeightConfig) -> Result<DualWeight> {
    let n_f = g.rank as f64;
    // Contour placement: refuse if within 0.1 of a gamma pole.
    for parity in [Parity::Even, Parity::Odd] {
        for pole_s in g.pole_reals(parity, 4) {
            let pole_z = pole_s - (n_f - 1.0) / 2.0;
            if (cfg.sigma_z - pole_z).abs() < 0.1 {
                return Err(Error::precision(format!(
                    "contour Re z = {} too close to pole at {}",
                    cfg.sigma_z, pole_z
                )));
            }
        }
    }
    // Grow the contour in blocks until the integrand magnitude falls below
    // tail_rel relative to its peak, or until the decay stalls on the
    // roundoff floor of the Mellin-line evaluation (the gamma ratio grows
    // polynomially and amplifies that floor, so waiting longer only
    // accumulates noise).
    let block = 4096usize;
    let mut half_ts: Vec<f64> = Vec::new(); // t >= 0 ordinates
    let mut e_even_half: Vec<Complex64> = Vec::new();
    let mut e_odd_half: Vec<Complex64> = Vec::new();
    let mut peak = 0.0f64;
    let mut t_next = 0.0f64;
    let mut min_block = f64::INFINITY;
    let mut min_end = 0usize;
    let contour_tail;
    loop {
        if t_next > cfg.t_cap {
            return Err(Error::precision(format!(
                "contour truncation not reached below t_cap = {}; raise t_cap",
                cfg.t_cap
            )));
        }
        let ts: Vec<f64> = (0..block).map(|k| t_next + k as f64 * cfg.dt).collect();
        let mvals = w.mellin_line(
            2.0 - n_f - cfg.sigma_z,
            &ts.iter().map(|&t| -t).collect::<Vec<_>>(),
        );
        let mut block_max = 0.0f64;
        for (k, &t) in ts.iter().enumerate() {
            let z = Complex64::new(cfg.sigma_z, t);
            let s = z + (n_f - 1.0) / 2.0;
            let m = mvals[k];
            let ge = gamma_factor(s, g, Parity::Even)? * m;
            let go = gamma_factor(s, g, Parity::Odd)?
                * m
                * if (g.rank - 1) % 2 == 1 { -1.0 } else { 1.0 };
            e_even_half.push(ge);
            e_odd_half.push(go);
            block_max = block_max.max(ge.norm()).max(go.norm());
            half_ts.push(t);
        }
        peak = peak.max(block_max);
        t_next += block as f64 * cfg.dt;
        if block_max < min_block {
            min_block = block_max;
            min_end = half_ts.len();
        }
        if t_next >= 30.0 && block_max < cfg.tail_rel * peak {
            contour_tail = block_max * cfg.dt * block as f64;
            break;
        }
        // The gamma ratio amplifies the roundoff floor of the Mellin line;
        // once the envelope turns around at a negligible level, keep the
        // contour up to its minimum and drop the noise-dominated rest.
        if min_block < 1e-7 * peak && block_max > 3.0 * min_block {
            half_ts.truncate(min_end);
            e_even_half.truncate(min_end);
            e_odd_half.truncate(min_end);
            contour_tail = min_block * cfg.dt * block as f64;
            break;
        }
    }
    // Mirror to the full line: E_eta(conj z). For real shifts the gamma
    // ratio satisfies G(conj z) = conj G(z) up to the constant eps phase:
    // gamma = eps * exp(L(z)) with L(conj z) = conj L(z), so
    // E(sigma - it) = eps^2 / |eps|^2 * conj(E(sigma + it)) when eps is a
    // phase. Evaluate directly instead of assuming: cheapest is to reuse the
    // ratio part. We store full-line samples explicitly.
    let count = 2 * half_ts.len() - 1;
    let mut e_even = vec![Complex64::zero(); count];
    let mut e_odd = vec![Complex64::zero(); count];
    let mid = half_ts.len() - 1;
    for k in 0..half_ts.len() {
        e_even[mid + k] = e_even_half[k];
        e_odd[mid + k] = e_odd_half[k];
        if k > 0 {
            // E(sigma - it) = eps * conj(E(sigma + it) / eps): the exp part
            // conjugates, the constant eps does not.
            let ee = g.eps[0];
            let eo = g.eps[1]
                * if (g.rank - 1) % 2 == 1 {
                    -Complex64::one()
                } else {
                    Complex64::one()
                };
            e_even[mid - k] = ee * (e_even_half[k] / ee).conj();
            e_odd[mid - k] = eo * (e_odd_half[k] / eo).conj();
        }
    }
    let mut dw = DualWeight {
        rank: g.rank,
        sigma_z: cfg.sigma_z,
        dt: cfg.dt,
        t_count: count,
        e_even,
        e_odd,
        ln_y_min: cfg.y_min.ln(),
        ln_y_step: (cfg.y_max / cfg.y_min).ln() / (cfg.grid_n - 1) as f64,
        vals_pos: Vec::new(),
        vals_neg: Vec::new(),
        decay_c: [0.0; 3],
        tail_start: 0.0,
        contour_tail,
        weight_hash: w.hash_key(),
        gamma_hash: crate::cache::fnv64(format!("{g:?}").as_bytes()),
    };
    // Sample the grid.
    let lny: Vec<f64> = (0..cfg.grid_n)
        .map(|i| dw.ln_y_min + i as f64 * dw.ln_y_step)
        .collect();
    let pairs: Vec<(Complex64, Complex64)> = lny
        .par_iter()
        .map(|&lv| {
            let y = lv.exp();
            (dw.eval_exact(y), dw.eval_exact(-y))
        })
        .collect();
    dw.vals_pos = pairs.iter().map(|p| p.0).collect();
    dw.vals_neg = pairs.iter().map(|p| p.1).collect();
    // Decay certificate over the trailing quarter of the grid.
    let start = 3 * cfg.grid_n / 4;
    dw.tail_start = lny[start].exp();
    for (ai, a) in [1i32, 2, 3].iter().enumerate() {
        let mut c = 0.0f64;
        for i in start..cfg.grid_n {
            let y = lny[i].exp();
            let v = dw.vals_pos[i].norm().max(dw.vals_neg[i].norm());
            c = c.max(v * y.powi(*a));
        }
        dw.decay_c[ai] = c;
    }
    Ok(dw)
}

/// Classical holomorphic Hankel kernel transform (the J_{k-1} anchor):
/// 2 pi i^k int w(x) sqrt(y/x) J_{k-1}(4 pi sqrt(x y)) dx.
pub fn hankel_j_kernel(w: &dyn MellinWeight, k: u32, y: f64) -> Result<Complex64> {
    let (a, b) = w.support();
    let (v, _e) = tanh_sinh(
        |x| {
            let j = bessel::jn_integral(k - 1, 4.0 * PI * (x * y).sqrt());
            Complex64::new(w.eval(x) * (y / x).sqrt() * j, 0.0)
        },
        a,
        b,
        1e-11,
    )?;
    let i_pow_k = match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    Ok(2.0 * PI * i_pow_k * v)
}

/// Divisor-kernel references: 4 int w(x) sqrt(y/x) K_0(4 pi sqrt(xy)) dx and
/// -2 pi int w(x) sqrt(y/x) Y_0(4 pi sqrt(xy)) dx.
pub fn divisor_k_kernel(w: &dyn MellinWeight, y: f64) -> Result<f64> {
    let (a, b) = w.support();
    let (v, _e) = tanh_sinh(
        |x| {
            Complex64::new(
                w.eval(x) * (y / x).sqrt() * bessel::k0(4.0 * PI * (x * y).sqrt()),
                0.0,
            )
        },
        a,
        b,
        1e-11,
    )?;
    Ok(4.0 * v.re)
}

pub fn divisor_y_kernel(w: &dyn MellinWeight, y: f64) -> Result<f64> {
    let (a, b) = w.support();
    let (v, _e) = tanh_sinh(
        |x| {
            Complex64::new(
                w.eval(x) * (y / x).sqrt() * bessel::y0(4.0 * PI * (x * y).sqrt()),
                0.0,
            )
        },
        a,
        b,
        1e-11,
    )?;
    Ok(-2.0 * PI * v.re)
}
