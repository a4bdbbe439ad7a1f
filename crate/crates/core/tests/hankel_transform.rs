//! Dual-weight transform validation: the defining relation as a self-test,
//! contour-shift independence, decay certification, linearity, and the
//! classical Bessel-kernel anchors for the holomorphic and divisor data.

use num_complex::Complex64;
use voronoi_core::hankel::{
    divisor_k_kernel, divisor_y_kernel, dual_weight, hankel_j_kernel, DualWeightConfig, GammaData,
    MellinWeight, PsiSign, TestWeight, WeightSum,
};

fn weight() -> TestWeight {
    TestWeight::new(40.0, 1.2).unwrap()
}

#[test]
fn holomorphic_dual_weight_matches_j_kernel() {
    let w = weight();
    let g = GammaData::holomorphic_gl2(12, PsiSign::Minus);
    let cfg = DualWeightConfig::for_range(1e-4, 20.0);
    let dw = dual_weight(&w, &g, &cfg).unwrap();

    // Discrete-series data is one-sided: the dual terms ride on the
    // opposite-sign characters, so the positive branch vanishes and the
    // negative branch carries the classical kernel.
    for y in [0.01f64, 0.3, 2.0] {
        let neg = dw.eval_exact(-y);
        let pos = dw.eval_exact(y);
        assert!(
            pos.norm() < 1e-9 * neg.norm().max(1e-6),
            "positive branch should vanish: {pos} vs {neg}"
        );
    }

    // GL(2) weight-k anchor: dual(-y) = 2 pi i^k int w(x) sqrt(y/x)
    // J_{k-1}(4 pi sqrt(xy)) dx, relative 1e-6.
    for y in [0.02f64, 0.11, 0.47, 1.3, 3.1] {
        let lhs = dw.eval_exact(-y);
        let rhs = hankel_j_kernel(&w, 12, y).unwrap();
        let rel = (lhs - rhs).norm() / rhs.norm();
        assert!(
            rel <= 1e-6,
            "J-kernel mismatch at y={y}: {lhs} vs {rhs} (rel {rel:.2e})"
        );
    }
}

#[test]
fn defining_relation_probe_is_tight() {
    // The probe integrates the dual weight back over its sampled window, so
    // the window must extend far enough that the slowly decaying kernel
    // tail is below the probe tolerance.
    let w = weight();
    let g = GammaData::holomorphic_gl2(12, PsiSign::Minus);
    let cfg = DualWeightConfig::for_range(1e-4, 400.0);
    let dw = dual_weight(&w, &g, &cfg).unwrap();
    let defect = dw.defining_relation_probe(&w, &g, 10).unwrap();
    assert!(defect <= 1e-7, "defining relation defect {defect:.3e}");
}

#[test]
fn contour_shift_independence() {
    let w = weight();
    let g = GammaData::holomorphic_gl2(12, PsiSign::Minus);
    let base = DualWeightConfig::for_range(1e-3, 10.0);
    let mut up = base.clone();
    up.sigma_z += 0.25;
    let mut down = base.clone();
    down.sigma_z -= 0.25;
    let a = dual_weight(&w, &g, &base).unwrap();
    let b = dual_weight(&w, &g, &up).unwrap();
    let c = dual_weight(&w, &g, &down).unwrap();
    for y in [0.01f64, 0.2, 1.7, 6.0] {
        let va = a.eval_exact(y);
        let vb = b.eval_exact(y);
        let vc = c.eval_exact(y);
        let scale = va.norm().max(1e-9);
        assert!(
            (va - vb).norm() / scale <= 1e-7,
            "shift +0.25 changed dual at y={y}: {va} vs {vb}"
        );
        assert!(
            (va - vc).norm() / scale <= 1e-7,
            "shift -0.25 changed dual at y={y}: {va} vs {vc}"
        );
    }
}

#[test]
fn divisor_dual_weight_matches_bessel_k_and_y() {
    let w = weight();
    let g = GammaData::divisor_gl2(PsiSign::Minus);
    let cfg = DualWeightConfig::for_range(1e-4, 20.0);
    let dw = dual_weight(&w, &g, &cfg).unwrap();
    for y in [0.05f64, 0.31, 1.2] {
        let pos = dw.eval_exact(y);
        let neg = dw.eval_exact(-y);
        let k_ref = divisor_k_kernel(&w, y).unwrap();
        let y_ref = divisor_y_kernel(&w, y).unwrap();
        let scale = k_ref.abs().max(y_ref.abs()).max(1e-9);
        assert!(
            pos.im.abs() < 1e-8 * scale && neg.im.abs() < 1e-8 * scale,
            "divisor dual weight must be real: {pos} / {neg}"
        );
        let got = [pos.re, neg.re];
        let want = [k_ref, y_ref];
        assert!(
            (got[0] - want[0]).abs() <= 2e-6 * scale && (got[1] - want[1]).abs() <= 2e-6 * scale,
            "divisor kernels at y={y}: got ({}, {}), want (K: {}, Y: {})",
            got[0],
            got[1],
            want[0],
            want[1]
        );
    }
}

#[test]
fn linearity_pointwise() {
    let w1 = TestWeight::new(30.0, 1.0).unwrap();
    let w2 = TestWeight::new(80.0, 0.8).unwrap();
    let sum = WeightSum(vec![(1.0, w1), (2.5, w2)]);
    let g = GammaData::holomorphic_gl2(12, PsiSign::Minus);
    let cfg = DualWeightConfig::for_range(1e-4, 12.0);
    let a = dual_weight(&w1, &g, &cfg).unwrap();
    let b = dual_weight(&w2, &g, &cfg).unwrap();
    let s = dual_weight(&sum, &g, &cfg).unwrap();
    for y in [0.01f64, 0.4, 2.2, 8.0] {
        let lhs = s.eval_exact(y);
        let rhs = a.eval_exact(y) + 2.5 * b.eval_exact(y);
        assert!(
            (lhs - rhs).norm() <= 1e-8 * rhs.norm().max(1e-6),
            "linearity fails at y={y}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn decay_certificate_holds_on_samples() {
    let w = weight();
    let g = GammaData::holomorphic_gl2(12, PsiSign::Minus);
    let cfg = DualWeightConfig::for_range(1e-4, 20.0);
    let dw = dual_weight(&w, &g, &cfg).unwrap();
    // |dual(y)| * y^3 bounded by the fitted constant on the certified range;
    // the negative branch carries the kernel here.
    let mut y = dw.tail_start;
    while y < 20.0 {
        let v = dw.eval_exact(y).norm().max(dw.eval_exact(-y).norm());
        assert!(
            v <= dw.decay_c[2] * y.powi(-3) * (1.0 + 1e-9) + 1e-300,
            "certificate violated at y={y}"
        );
        y *= 1.37;
    }
    // The kernel tail is genuinely decaying, if slowly (Gevrey in sqrt y).
    assert!(dw.eval_exact(-18.0).norm() < 1e-4 * dw.eval_exact(-0.05).norm());
}

#[test]
fn interpolation_matches_exact_on_refinement() {
    let w = weight();
    let g = GammaData::holomorphic_gl2(12, PsiSign::Minus);
    let mut cfg = DualWeightConfig::for_range(1e-3, 4.0);
    cfg.grid_n = 4096;
    let dw = dual_weight(&w, &g, &cfg).unwrap();
    // Probe at midpoints of the grid in the region where the dual weight is
    // not negligibly small.
    let mut worst: f64 = 0.0;
    let peak = dw.eval_exact(0.05).norm();
    for i in (40..4000).step_by(97) {
        let lny = dw.ln_y_min + (i as f64 + 0.5) * dw.ln_y_step;
        let y = lny.exp();
        let exact = dw.eval_exact(y);
        if exact.norm() < 1e-7 * peak {
            continue;
        }
        let interp = dw.eval(y);
        worst = worst.max((interp - exact).norm() / exact.norm());
    }
    assert!(worst <= 1e-8, "interpolation error {worst:.3e}");
}

#[test]
fn mellin_back_complex_argument_sanity() {
    // The numeric Mellin of the dual weight agrees with the defining RHS off
    // the construction ordinates (fresh t values, both parities), which is
    // the defining_relation_probe at a finer tolerance for one point.
    // The polar (divisor) data vanishes only like y^{1/2} log y at the
    // origin, so the probe window must reach deep on the left.
    let w = weight();
    let g = GammaData::divisor_gl2(PsiSign::Minus);
    let cfg = DualWeightConfig::for_range(1e-9, 400.0);
    let dw = dual_weight(&w, &g, &cfg).unwrap();
    let z = Complex64::new(cfg.sigma_z, 0.77);
    for parity in [
        voronoi_core::hankel::Parity::Even,
        voronoi_core::hankel::Parity::Odd,
    ] {
        let lhs = dw.mellin_back(z, parity).unwrap();
        let rhs = voronoi_core::hankel::defining_rhs(z, &w, &g, parity).unwrap();
        assert!(
            (lhs - rhs).norm() <= 1e-6 * rhs.norm().max(1e-10),
            "{parity:?}: {lhs} vs {rhs}"
        );
    }
}
