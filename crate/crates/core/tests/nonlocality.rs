//! Bell tests against truncated Fock-space oracles and independent closed forms.

use std::f64::consts::{PI, SQRT_2};

use cvlab::nonlocality::*;
use cvlab::states::*;
use cvlab::{Mat, Vector};
use libm::lgamma;
use num_complex::Complex64;
use rayon::prelude::*;

fn lfact(n: usize) -> f64 {
    lgamma(n as f64 + 1.0)
}

/// ln √((p+q)!/(p!q!))
fn lbinom_half(p: usize, q: usize) -> f64 {
    0.5 * (lfact(p + q) - lfact(p) - lfact(q))
}

/// Pseudospin operators on a cutoff-d space: σ_x swaps 2k ↔ 2k+1, σ_z = +1 on odd, −1 on even.
fn sigma_x(d: usize) -> Mat {
    let mut m = Mat::zeros(d, d);
    for k in (0..d - 1).step_by(2) {
        m[(k, k + 1)] = 1.0;
        m[(k + 1, k)] = 1.0;
    }
    m
}

fn sigma_z(d: usize) -> Mat {
    Mat::from_diagonal(&Vector::from_fn(d, |n, _| if n % 2 == 1 { 1.0 } else { -1.0 }))
}

fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 + a - x);
    if n == 0 {
        return l0;
    }
    for k in 1..n {
        let k = k as f64;
        let l2 = ((2.0 * k + 1.0 + a - x) * l1 - (k + a) * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// ⟨m|D(β)|n⟩ for real β.
fn displacement(d: usize, beta: f64) -> Mat {
    let x = beta * beta;
    Mat::from_fn(d, d, |m, n| {
        let (hi, lo) = (m.max(n), m.min(n));
        let k = hi - lo;
        let pow = if k == 0 {
            1.0
        } else if beta == 0.0 {
            return 0.0;
        } else {
            let sign = if (beta < 0.0) != (m < n) && k % 2 == 1 { -1.0 } else { 1.0 };
            sign * (0.5 * (lfact(lo) - lfact(hi)) + k as f64 * beta.abs().ln()).exp()
        };
        pow * (-0.5 * x).exp() * laguerre(lo, k as f64, x)
    })
}

/// D(α)ΠD†(α) = D(2α)Π for real α.
fn displaced_parity(d: usize, alpha: f64) -> Mat {
    let mut m = displacement(d, 2.0 * alpha);
    for n in (1..d).step_by(2) {
        m.column_mut(n).neg_mut();
    }
    m
}

/// ⟨ψ|A ⊗ B|ψ⟩ for real amplitudes c[m][n].
fn expect2(c: &Mat, a: &Mat, b: &Mat) -> f64 {
    (a * c * b.transpose()).component_mul(c).sum()
}

/// Twin beam Σ√(1−λ²)λⁿ|nn⟩ through two beam splitters of transmissivity τ, conditioned on
/// clicks of ideal on/off detectors at both reflected ports: one branch per click pair (k₁, k₂).
fn ips_fock_branches(lambda: f64, tau: f64, d: usize) -> Vec<Mat> {
    let mut out = Vec::new();
    for k1 in 1..d {
        for k2 in 1..d {
            let mut phi = Mat::zeros(d, d);
            for n in k1.max(k2)..d {
                let l = 0.5 * (1.0 - lambda * lambda).ln()
                    + n as f64 * lambda.ln()
                    + 0.5 * (lfact(n) - lfact(k1) - lfact(n - k1))
                    + 0.5 * (lfact(n) - lfact(k2) - lfact(n - k2))
                    + 0.5 * (2 * n - k1 - k2) as f64 * tau.ln()
                    + 0.5 * (k1 + k2) as f64 * (1.0 - tau).ln();
                phi[(n - k1, n - k2)] = l.exp();
            }
            out.push(phi);
        }
    }
    out
}

#[test]
fn ips_wigner_matches_fock_model() {
    let (lambda, tau, d) = (0.5, 0.85, 40);
    let branches = ips_fock_branches(lambda, tau, d);
    let p11: f64 = branches.iter().map(|b| b.norm_squared()).sum();
    let w = ips_wigner(lambda, tau).unwrap();
    let precise = IpsPrecise::new(lambda, tau).unwrap();
    assert!((p11 - w.normalization).abs() < 1e-12, "{p11} vs {}", w.normalization);
    assert!((p11 - precise.p11()).abs() < 1e-12);
    for (a1, a2) in [(0.0, 0.0), (0.3, -0.2), (-0.45, 0.1), (0.2, 0.6)] {
        let (pa, pb) = (displaced_parity(d, a1), displaced_parity(d, a2));
        let fock: f64 = branches.par_iter().map(|b| expect2(b, &pa, &pb)).sum::<f64>() / p11;
        let alphas = [Complex64::new(a1, 0.0), Complex64::new(a2, 0.0)];
        let mix = dp_correlation(&w, &alphas).unwrap();
        let dd = dp_correlation(&precise, &alphas).unwrap();
        assert!((fock - mix).abs() < 1e-10, "({a1}, {a2}): fock {fock} mixture {mix}");
        assert!((fock - dd).abs() < 1e-10, "({a1}, {a2}): fock {fock} precise {dd}");
    }
}

#[test]
fn ips_precise_reaches_the_single_subtraction_limit() {
    // τ → 1 leaves a·b applied to the twin beam: Σ λᵏ(k+1)|kk⟩
    let (r, d): (f64, usize) = (1.5, 260);
    let lambda = r.tanh();
    let c: Vec<f64> = (0..d).map(|k| k as f64 * lambda.ln() + ((k + 1) as f64).ln()).map(f64::exp).collect();
    let norm: f64 = c.iter().map(|x| x * x).sum();
    let precise = IpsPrecise::new(lambda, 1.0 - 1e-9).unwrap();
    for j in [1e-3, 4e-3, 1.2e-2] {
        let s = DpParameterization::Bw.setting(j).unwrap();
        let e = |a: f64, b: f64| {
            let (pa, pb) = (displaced_parity(d, a), displaced_parity(d, b));
            let mut acc = 0.0;
            for k in 0..d {
                for l in 0..d {
                    acc += c[k] * c[l] * pa[(k, l)] * pb[(k, l)];
                }
            }
            acc / norm
        };
        let (a, b) = (&s.alpha, &s.alpha_p);
        let fock = e(a[0].re, a[1].re) + e(a[0].re, b[1].re) + e(b[0].re, a[1].re) - e(b[0].re, b[1].re);
        let dd = bell2_dp(&precise, &s).unwrap();
        assert!((fock - dd).abs() < 1e-6, "J = {j}: fock {fock} precise {dd}");
    }
}

#[test]
fn ips_precise_agrees_with_f64_mixture_away_from_unity() {
    for (lambda, tau) in [(0.3, 0.5), (0.6, 0.9), (0.8, 0.99)] {
        let w = ips_wigner(lambda, tau).unwrap();
        let p = IpsPrecise::new(lambda, tau).unwrap();
        // the f64 mixture loses digits to the cancellation among its signed weights
        let cond: f64 = w.components.iter().map(|c| c.weight.abs()).sum();
        for x in [[0.0; 4], [0.3, -0.1, 0.2, 0.5], [1.0, 0.4, -0.7, 0.2]] {
            let v = Vector::from_row_slice(&x);
            let (a, b) = (w.wigner(&v).unwrap(), WignerFunction::wigner(&p, &v).unwrap());
            assert!((a - b).abs() < 1e-14 * cond * a.abs().max(1.0), "{a} vs {b} (cond {cond})");
        }
    }
}

#[test]
fn twin_beam_dp_matches_fock_and_closed_form() {
    let (r, d): (f64, usize) = (0.6, 80);
    let lambda = r.tanh();
    let c = Mat::from_fn(d, d, |m, n| if m == n { lambda.powi(m as i32) / r.cosh() } else { 0.0 });
    let w = GaussianMixture::try_from(&build(&StateFamilySpec::Twb { r }).unwrap()).unwrap();
    for (a1, a2) in [(0.1, -0.3), (0.5, 0.5), (-0.2, 0.0)] {
        let fock = expect2(&c, &displaced_parity(d, a1), &displaced_parity(d, a2));
        let g = dp_correlation(&w, &[Complex64::new(a1, 0.0), Complex64::new(a2, 0.0)]).unwrap();
        assert!((fock - g).abs() < 1e-12, "{fock} vs {g}");
    }
    for j in [1e-3, 0.05, 0.3] {
        let a = bell2_dp_twb(r, j, DpParameterization::Bw).unwrap();
        assert!((a - bell2_dp_twb_closed(r, j)).abs() < 1e-12);
    }
}

#[test]
fn three_mode_dp_closed_forms() {
    for r in [0.3, 1.0, 2.0] {
        let w = GaussianMixture::try_from(&v3_quarter_turn(r).unwrap()).unwrap();
        for j in [1e-3, 0.02, 0.2] {
            let s = DpParameterization::ThreeMode.setting(j).unwrap();
            let b = bell3_dp(&w, &s).unwrap();
            assert!((b - bell3_dp_v3_closed(r, j)).abs() < 1e-11, "r = {r}, J = {j}");
        }
    }
    for n in [0.5, 3.0, 40.0] {
        let w = GaussianMixture::try_from(&t_state_for_dp(n, PI, PI).unwrap()).unwrap();
        for j in [1e-3, 0.02, 0.2] {
            let s = DpParameterization::ThreeModeT.setting(j).unwrap();
            let b = bell3_dp(&w, &s).unwrap();
            assert!((b - bell3_dp_t_closed(n, j)).abs() < 1e-10, "N = {n}, J = {j}");
        }
    }
}

/// |T⟩ (φ₂ = φ₃ = 0) amplitude on |p+q, p, q⟩.
fn t_amp(p: usize, q: usize, a: f64, b: f64, n1: f64) -> f64 {
    (-0.5 * (1.0 + n1).ln() + 0.5 * p as f64 * a.ln() + 0.5 * q as f64 * b.ln() + lbinom_half(p, q)).exp()
}

/// TWBA branches: for each photon number q ≥ 1 at the third mode, the (unnormalized) two-mode
/// amplitude Σ_p t(p, q)|p+q, p⟩ and its click probability 1 − (1−η)^q.
fn twba_fock(n2: f64, n3: f64, eta: f64, d: usize) -> Vec<(f64, Mat)> {
    let n1 = n2 + n3;
    let (a, b) = (n2 / (1.0 + n1), n3 / (1.0 + n1));
    (1..d)
        .map(|q| {
            let mut c = Mat::zeros(d, d);
            for p in 0..d - q {
                c[(p + q, p)] = t_amp(p, q, a, b, n1);
            }
            (1.0 - (1.0 - eta).powi(q as i32), c)
        })
        .collect()
}

#[test]
fn twba_matches_fock_model() {
    let d = 90;
    for (n2, n3, eta) in [(1.0, 0.3, 1.0), (0.8, 0.5, 0.7), (2.0, 0.1, 0.8)] {
        let branches = twba_fock(n2, n3, eta, d);
        let (sx, sz) = (sigma_x(d), sigma_z(d));
        let p1: f64 = branches.iter().map(|(w, c)| w * c.norm_squared()).sum();
        let avg = |a: &Mat, b: &Mat| branches.iter().map(|(w, c)| w * expect2(c, a, b)).sum::<f64>() / p1;
        assert!((p1 - twba_click_probability(n3, eta)).abs() < 1e-12);
        let ps = ps_correlation(&PsState::Twba { n2, n3, eta }).unwrap();
        assert!((avg(&sx, &sx) - ps.transverse).abs() < 1e-10, "{} vs {}", avg(&sx, &sx), ps.transverse);
        assert!((avg(&sz, &sz) - ps.parity).abs() < 1e-10, "{} vs {}", avg(&sz, &sz), ps.parity);

        let w = twba_wigner(n2 + n3, n2, n3, eta).unwrap();
        assert!((w.normalization - p1).abs() < 1e-12);
        for (a1, a2) in [(0.1, -0.3), (0.4, 0.2)] {
            let fock = avg(&displaced_parity(d, a1), &displaced_parity(d, a2));
            let g = dp_correlation(&w, &[Complex64::new(a1, 0.0), Complex64::new(a2, 0.0)]).unwrap();
            assert!((fock - g).abs() < 1e-10, "{fock} vs {g}");
        }
    }
}

#[test]
fn twba_wigner_is_normalized() {
    let w = twba_wigner(0.7, 0.5, 0.2, 0.8).unwrap();
    let (half, n) = (9.0, 36);
    let h = 2.0 * half / n as f64;
    let total: f64 = (0..=n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..=n {
                for k in 0..=n {
                    for l in 0..=n {
                        let x = Vector::from_vec([i, j, k, l].iter().map(|&m| -half + h * m as f64).collect());
                        s += w.wigner(&x).unwrap();
                    }
                }
            }
            s
        })
        .sum::<f64>()
        * h.powi(4);
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn ecs_matches_fock_model() {
    let d = 70;
    for gamma in [0.3, 1.0, 1.7] {
        // (|γ⟩|−γ⟩ − |−γ⟩|γ⟩) ∝ Σ γ^{m+n}((−1)ⁿ − (−1)^m)/√(m!n!) |mn⟩
        let mut c = Mat::from_fn(d, d, |m, n| {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 } - if m % 2 == 0 { 1.0 } else { -1.0 };
            s * ((m + n) as f64 * f64::ln(gamma) - 0.5 * (lfact(m) + lfact(n))).exp()
        });
        c /= c.norm();
        let ps = ps_correlation(&PsState::Ecs { gamma }).unwrap();
        let (sx, sz) = (sigma_x(d), sigma_z(d));
        assert!((expect2(&c, &sz, &sz) - ps.parity).abs() < 1e-12);
        assert!((expect2(&c, &sx, &sx) - ps.transverse).abs() < 1e-12, "γ = {gamma}");
        assert!(ps.transverse.abs() <= 1.0);
    }
}

#[test]
fn t_state_pseudospin_matches_fock_model() {
    let (n2, n3) = (1.0, 0.5);
    let n1 = n2 + n3;
    let (a, b) = (n2 / (1.0 + n1), n3 / (1.0 + n1));
    let cut = 140;
    let amp = |p: usize, q: usize| if p + q < cut { t_amp(p, q, a, b, n1) } else { 0.0 };
    // three-mode convention s_z = (−1)ⁿ, so that ⟨s_z ⊗ s_z ⊗ s_z⟩ = 1 on |T⟩
    let sz = |n: usize| if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut c = [0.0; 3];
    let (mut norm, mut zzz) = (0.0, 0.0);
    for p in 0..cut {
        for q in 0..cut - p {
            let t = amp(p, q);
            norm += t * t;
            let m = p + q;
            zzz += t * t * sz(m) * sz(p) * sz(q);
            // σ_z on mode 1, σ_x on modes 2 and 3
            if (p ^ 1) + (q ^ 1) == m {
                c[0] += amp(p ^ 1, q ^ 1) * t * sz(m);
            }
            // σ_z on mode 2: mode 1 and mode 3 flip together
            if (m ^ 1) == p + (q ^ 1) {
                c[1] += amp(p, q ^ 1) * t * sz(p);
            }
            if (m ^ 1) == (p ^ 1) + q {
                c[2] += amp(p ^ 1, q) * t * sz(q);
            }
        }
    }
    assert!((norm - 1.0).abs() < 1e-12 && (zzz - 1.0).abs() < 1e-12);
    let got = t_state_ps_coefficients(n2, n3).unwrap();
    for k in 0..3 {
        assert!((got[k] - c[k]).abs() < 1e-10, "c{}: {} vs {}", k + 1, got[k], c[k]);
    }
}

#[test]
fn sign_of_quadrature_closed_forms() {
    for r in [0.2, 0.42, 1.0] {
        let g = gkm_three_mode(&v3_quarter_turn(r).unwrap()).unwrap();
        for v in g {
            assert!((v - v3_gkm_closed(r)).abs() < 1e-12, "{v} vs {}", v3_gkm_closed(r));
        }
    }
    for n in [0.5, 2.0, 30.0] {
        let g = gkm_three_mode(&t_state_for_dp(n, PI, PI).unwrap()).unwrap();
        let cl = t_gkm_closed(n);
        for k in 0..3 {
            assert!((g[k] - cl[k]).abs() < 1e-12, "N = {n}: {g:?} vs {cl:?}");
        }
    }
    for r in [0.3, 1.1] {
        let w = GaussianMixture::try_from(&build(&StateFamilySpec::Twb { r }).unwrap()).unwrap();
        let g = gkm_correlation(&w).unwrap();
        let f = ps_correlation_factor(&PsState::TwbPrime { r }).unwrap();
        assert!((g.transverse - f).abs() < 1e-12 && (g.parity - 1.0).abs() < 1e-12);
    }
    for (lambda, tau) in [(0.5, 0.9), (0.3, 0.6)] {
        let g = gkm_correlation(&ips_wigner(lambda, tau).unwrap()).unwrap();
        let cl = ips_ps_closed(lambda, tau).unwrap();
        assert!((g.parity - cl.parity).abs() < 1e-12 && (g.transverse - cl.transverse).abs() < 1e-12);
    }
}

#[test]
fn pseudospin_twin_beam_saturates() {
    let c = ps_correlation(&PsState::Twb { r: 0.7 }).unwrap();
    assert!((c.bell() - 2.0 * (1.0 + (1.4f64).tanh().powi(2)).sqrt()).abs() < 1e-12);
    assert!(bell2_ps(1.0).unwrap() == 2.0 * SQRT_2);
    assert!(bell2_ps(1.5).is_err());
    // optimal θ₂ = arctan f
    let f = (1.4f64).tanh();
    assert!((c.combination(f.atan()) - c.bell()).abs() < 1e-12);
}

#[test]
fn three_mode_ps_maximizer_is_a_local_maximum() {
    let ps = ThreeModePs { c: t_state_ps_coefficients(3.0, 2.0).unwrap(), phi: [0.0, PI, PI] };
    let (best, x) = ps.maximize();
    assert!((ps.combination(&x).abs() - best).abs() < 1e-12);
    for i in 0..6 {
        for h in [-1e-3, 1e-3] {
            let mut y = x;
            y[i] += h;
            assert!(ps.combination(&y).abs() <= best + 1e-12);
        }
    }
    assert!(best <= 4.0);
}

#[test]
fn homodyne_twin_beam_orthant_law() {
    let r: f64 = 0.8;
    let w = GaussianMixture::try_from(&build(&StateFamilySpec::Twb { r }).unwrap()).unwrap();
    for (theta, phi, eta) in [(0.0f64, 0.0f64, 1.0f64), (0.3, -1.0, 0.9), (1.2, 0.4, 0.75)] {
        let rho = (2.0 * r).sinh() * (theta + phi).cos() / ((2.0 * r).cosh() + (1.0 - eta) / eta);
        let e = homodyne_correlation(&w, theta, phi, eta).unwrap();
        assert!((e - 2.0 / PI * rho.asin()).abs() < 1e-12);
    }
}

#[test]
fn homodyne_monte_carlo_is_reproducible_and_consistent() {
    let w = ips_wigner(0.6, 0.9).unwrap();
    let a = homodyne_correlation_mc(&w, 0.3, 1.1, 0.9, 200_000, 7).unwrap();
    let b = homodyne_correlation_mc(&w, 0.3, 1.1, 0.9, 200_000, 7).unwrap();
    assert_eq!(a, b);
    let e = homodyne_correlation(&w, 0.3, 1.1, 0.9).unwrap();
    assert!((a.0 - e).abs() < 4.0 * a.1, "{a:?} vs {e}");
    assert!(homodyne_correlation_mc(&w, 0.3, 1.1, 0.9, 1, 7).is_err());
}

#[test]
fn dp_rejects_bad_input() {
    let w = GaussianMixture::try_from(&build(&StateFamilySpec::Twb { r: 0.5 }).unwrap()).unwrap();
    assert!(dp_correlation(&w, &[Complex64::new(0.0, 0.0)]).is_err());
    assert!(DpParameterization::Bw.setting(-1.0).is_err());
    assert!(bell2_dp_twb(0.5, 0.1, DpParameterization::ThreeMode).is_err());
    assert!(ips_wigner(0.5, 1.0).is_err());
    assert!(twba_wigner(1.0, 1.0, 0.0, 1.0).is_err());
    assert!(log_grid(0.0, 1.0, 5).is_err());
}

#[test]
fn bell_results_csv_and_best() {
    let rows = vec![
        BellResult::new(BellTest::Dp2, "twb", vec![("j".into(), 0.1)], 2.1),
        BellResult::new(BellTest::Dp2, "twb", vec![("j".into(), 0.2)], -2.3),
        BellResult::new(BellTest::Dp2, "twb", vec![], 1.0),
    ];
    let best = BellResult::best(&rows).unwrap();
    assert_eq!(best.value, -2.3);
    assert!(best.violation && best.within_quantum_bound(0.0));
    assert_eq!(BellTest::Dp3.quantum_bound(), 4.0);
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "test,state,param1,bell_value,violation");
    assert_eq!(lines[1], "DP2,twb,0.1,2.1,true");
    assert_eq!(lines[3], "DP2,twb,,1,false");
}

#[test]
fn family_sweep_covers_the_grid() {
    let (best, rows) = bell_dp_family_sweep(
        |r| GaussianMixture::try_from(&build(&StateFamilySpec::Twb { r })?),
        "twb",
        DpParameterization::Bw,
        &[0.5, 1.0],
        &[0.01, 0.02, 0.03],
    )
    .unwrap();
    assert_eq!(rows.len(), 6);
    let direct = rows.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
    assert_eq!(best.value.abs(), direct);
}
