//! Approximate-functional-equation probe: validates archimedean GammaData
//! against a coefficient sequence by evaluating the completed L-function
//! through two smoothed sums whose split point X is arbitrary. A wrong
//! gamma factor makes the assembled value drift with X; the reported defect
//! is that drift.

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::hankel::{ln_gamma, GammaData};

const PI: f64 = std::f64::consts::PI;

/// Simple pole data of the completed L-function: (location s0, residue).
#[derive(Debug, Clone, Copy)]
pub struct PolePair {
    pub at: f64,
    pub residue: f64,
}

/// Coefficients and analytic data for one probe run. Coefficients are the
/// Dirichlet-series a_n of the finite part; self-dual data only.
pub struct ProbeData<'a> {
    pub coefficients: &'a [f64],
    pub gamma: &'a GammaData,
    pub epsilon: Complex64,
    pub poles: Vec<PolePair>,
}

fn gamma_infinity(g: &GammaData, u: Complex64) -> Complex64 {
    let mut ln = Complex64::zero();
    for &m in &g.shifts[0] {
        let z = u + m;
        ln += -(z / 2.0) * PI.ln() + ln_gamma(z / 2.0);
    }
    ln.exp()
}

/// V_s(y) = (1/2 pi i) int_(a) gamma_inf(s+z) e^{z^2} y^{-z} dz / z, the
/// incomplete-Mellin cutoff weight. The line Re z = a is placed near the
/// saddle a ~ (ln y)/2 so the e^{z^2} growth never fights y^{-a}
/// destructively; lines are cached per integer abscissa.
struct CutoffKernel<'a> {
    g: &'a GammaData,
    s: Complex64,
    lines: std::cell::RefCell<std::collections::BTreeMap<i32, Vec<(Complex64, Complex64)>>>,
}

impl<'a> CutoffKernel<'a> {
    fn new(g: &'a GammaData, s: Complex64) -> CutoffKernel<'a> {
        CutoffKernel {
            g,
            s,
            lines: std::cell::RefCell::new(std::collections::BTreeMap::new()),
        }
    }

    fn line(&self, a: i32) -> Vec<(Complex64, Complex64)> {
        if let Some(v) = self.lines.borrow().get(&a) {
            return v.clone();
        }
        let dt = 0.02f64;
        let t_max = 9.0f64 + a.abs() as f64;
        let n = (2.0 * t_max / dt) as usize + 1;
        let mut nodes = Vec::with_capacity(n);
        for k in 0..n {
            let t = -t_max + k as f64 * dt;
            let z = Complex64::new(a as f64, t);
            let w = gamma_infinity(self.g, self.s + z) * (z * z).exp() / z
                * Complex64::new(dt / (2.0 * PI), 0.0);
            nodes.push((z, w));
        }
        self.lines.borrow_mut().insert(a, nodes.clone());
        nodes
    }

    fn eval(&self, y: f64) -> Complex64 {
        let lny = y.ln();
        let a = ((lny / 2.0).round() as i32).clamp(2, 14);
        let mut acc = Complex64::zero();
        for &(z, w) in &self.line(a) {
            acc += w * (-z * lny).exp();
        }
        acc
    }
}

/// Lambda(s) assembled from the split-X smoothed sums:
///   Lambda(s) = sum_n a_n n^{-s} V_s(n/X)
///             + eps * sum_n a_n n^{-(1-s)} V_{1-s}(n X)
///             - sum_poles r G(s0 - s) X^{s0 - s} / (s0 - s).
pub fn lambda_smoothed(data: &ProbeData<'_>, s: Complex64, x_split: f64) -> Result<Complex64> {
    if data.coefficients.len() < 16 {
        return Err(Error::unsupported("need more coefficients for the probe"));
    }
    let v1 = CutoffKernel::new(data.gamma, s);
    let v2 = CutoffKernel::new(data.gamma, Complex64::new(1.0, 0.0) - s);
    let mut total = Complex64::zero();
    for (i, &a) in data.coefficients.iter().enumerate() {
        let n = (i + 1) as f64;
        if a == 0.0 {
            continue;
        }
        let direct = v1.eval(n / x_split);
        let reflected = v2.eval(n * x_split);
        total += a * (-s * n.ln()).exp() * direct;
        total += data.epsilon * a * (-(Complex64::new(1.0, 0.0) - s) * n.ln()).exp() * reflected;
    }
    for p in &data.poles {
        let z0 = Complex64::new(p.at, 0.0) - s;
        total -= p.residue * (z0 * z0).exp() * Complex64::new(x_split, 0.0).powc(z0) / z0;
    }
    Ok(total)
}

/// Relative drift of the assembled Lambda across two split points; the
/// functional-equation defect of the gamma data.
pub fn functional_equation_probe(data: &ProbeData<'_>, points: &[Complex64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &s in points {
        let a = lambda_smoothed(data, s, 0.8)?;
        let b = lambda_smoothed(data, s, 1.25)?;
        let scale = (a.norm() + b.norm()).max(1e-14) / 2.0;
        worst = worst.max((a - b).norm() / scale);
    }
    Ok(worst)
}

/// zeta(s) by Euler-Maclaurin, an oracle fully independent of the probe
/// machinery, for validating the zeta-data probe.
pub fn zeta_euler_maclaurin(s: Complex64) -> Complex64 {
    let n = 40usize;
    let mut sum = Complex64::zero();
    for k in 1..n {
        sum += (-s * (k as f64).ln()).exp();
    }
    let nf = n as f64;
    let n_pow = |e: Complex64| (e * nf.ln()).exp();
    sum += n_pow(Complex64::new(1.0, 0.0) - s) / (s - 1.0);
    sum += 0.5 * n_pow(-s);
    // Bernoulli corrections: sum_j B_{2j}/(2j)! * s(s+1)...(s+2j-2) * N^{-s-2j+1}.
    let bern2j = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let mut poch = Complex64::new(1.0, 0.0);
    let mut factors = 0usize;
    let mut fact = 1.0f64;
    for (j, &b) in bern2j.iter().enumerate() {
        let jj = j + 1;
        fact *= (2 * jj - 1) as f64 * (2 * jj) as f64;
        while factors < 2 * jj - 1 {
            poch *= s + Complex64::new(factors as f64, 0.0);
            factors += 1;
        }
        sum += b / fact * poch * n_pow(-s - Complex64::new((2 * jj - 1) as f64, 0.0));
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::PsiSign;

    #[test]
    fn zeta_probe_matches_euler_maclaurin() {
        let g = GammaData::riemann_zeta(PsiSign::Minus);
        let ones = vec![1.0f64; 4000];
        let data = ProbeData {
            coefficients: &ones,
            gamma: &g,
            epsilon: Complex64::new(1.0, 0.0),
            poles: vec![
                PolePair { at: 1.0, residue: 1.0 },
                PolePair { at: 0.0, residue: -1.0 },
            ],
        };
        let s = Complex64::new(0.5, 3.0);
        let lam = lambda_smoothed(&data, s, 1.0).unwrap();
        // Compare against pi^{-s/2} Gamma(s/2) zeta(s) from the independent
        // Euler-Maclaurin evaluation.
        let zeta = zeta_euler_maclaurin(s);
        let completed = (-(s / 2.0) * PI.ln() + ln_gamma(s / 2.0)).exp() * zeta;
        assert!(
            (lam - completed).norm() / completed.norm() < 5e-8,
            "{lam} vs {completed}"
        );
        let defect = functional_equation_probe(&data, &[s]).unwrap();
        assert!(defect <= 1e-6, "zeta probe defect {defect:.3e}");
    }

    #[test]
    fn wrong_shift_is_detected() {
        // Negative control: shifting the gamma line by +1 must blow the
        // defect well past 1e-1.
        let mut g = GammaData::riemann_zeta(PsiSign::Minus);
        g.shifts[0] = vec![1.0];
        let ones = vec![1.0f64; 4000];
        let data = ProbeData {
            coefficients: &ones,
            gamma: &g,
            epsilon: Complex64::new(1.0, 0.0),
            poles: vec![
                PolePair { at: 1.0, residue: 1.0 },
                PolePair { at: 0.0, residue: -1.0 },
            ],
        };
        let defect = functional_equation_probe(&data, &[Complex64::new(0.5, 3.0)]).unwrap();
        assert!(defect > 1e-1, "negative control defect only {defect:.3e}");
    }

    #[test]
    fn euler_maclaurin_sanity() {
        // zeta(2) = pi^2/6 and a known critical-line modulus.
        let z2 = zeta_euler_maclaurin(Complex64::new(2.0, 0.0));
        assert!((z2.re - PI * PI / 6.0).abs() < 1e-10 && z2.im.abs() < 1e-12);
        let z = zeta_euler_maclaurin(Complex64::new(0.5, 14.134725141734694));
        // First zero of zeta: the modulus is tiny there.
        assert!(z.norm() < 1e-6, "|zeta(1/2 + i t1)| = {}", z.norm());
    }
}
