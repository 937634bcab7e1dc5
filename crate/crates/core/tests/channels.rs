//! Noisy channels: Fock-space master equation oracle and closed-form dynamics.

use std::f64::consts::PI;

use cvlab::channels::*;
use cvlab::random::random_state;
use cvlab::separability::{min_pt_symplectic_eig, Bipartition};
use cvlab::states::*;
use cvlab::Mat;
use libm::lgamma;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type CM = DMatrix<Complex64>;

fn annihilation(d: usize) -> CM {
    CM::from_fn(d, d, |i, j| if j == i + 1 { Complex64::new((j as f64).sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) })
}

/// ρ̇ = (Γ/2){(N+1)L[a] + N L[a†] − M* D[a] − M D[a†]}ρ with
/// L[O]ρ = 2OρO† − O†Oρ − ρO†O and D[O]ρ = 2OρO − OOρ − ρOO.
fn master_rhs(rho: &CM, a: &CM, gamma: f64, n: f64, m: Complex64) -> CM {
    let ad = a.adjoint();
    let lind = |o: &CM, od: &CM| o * rho * od * Complex64::new(2.0, 0.0) - od * o * rho - rho * od * o;
    let dis = |o: &CM| o * rho * o * Complex64::new(2.0, 0.0) - o * o * rho - rho * o * o;
    (lind(a, &ad) * Complex64::new(n + 1.0, 0.0) + lind(&ad, a) * Complex64::new(n, 0.0)
        - dis(a) * m.conj()
        - dis(&ad) * m)
        * Complex64::new(0.5 * gamma, 0.0)
}

fn integrate(mut rho: CM, a: &CM, gamma: f64, n: f64, m: Complex64, t: f64, steps: usize) -> CM {
    let h = Complex64::new(t / steps as f64, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let sixth = Complex64::new(1.0 / 6.0, 0.0);
    for _ in 0..steps {
        let k1 = master_rhs(&rho, a, gamma, n, m);
        let k2 = master_rhs(&(&rho + &k1 * h * half), a, gamma, n, m);
        let k3 = master_rhs(&(&rho + &k2 * h * half), a, gamma, n, m);
        let k4 = master_rhs(&(&rho + &k3 * h), a, gamma, n, m);
        rho += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * h * sixth;
    }
    rho
}

/// Mean and covariance of q = (a + a†)/√2, p = (a − a†)/(i√2).
fn phase_space_moments(rho: &CM, a: &CM) -> ([f64; 2], Mat) {
    let ad = a.adjoint();
    let s = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
    let q = (a + &ad) * s;
    let p = (a - &ad) * (s / Complex64::new(0.0, 1.0));
    let ev = |o: &CM| (rho * o).trace().re;
    let (mq, mp) = (ev(&q), ev(&p));
    let qp = (&q * &p + &p * &q) * Complex64::new(0.5, 0.0);
    let cov = Mat::from_row_slice(
        2,
        2,
        &[ev(&(&q * &q)) - mq * mq, ev(&qp) - mq * mp, ev(&qp) - mq * mp, ev(&(&p * &p)) - mp * mp],
    );
    ([mq, mp], cov)
}

fn pure(psi: &[Complex64]) -> CM {
    let v = DMatrix::from_column_slice(psi.len(), 1, psi);
    &v * v.adjoint()
}

#[test]
fn evolve_matches_master_equation() {
    let d = 28;
    let a = annihilation(d);
    let (gamma, n, m) = (0.8, 0.3, Complex64::from_polar(0.35, 0.9));
    let ch = ModeChannel::new(gamma, n, m).unwrap();
    // squeezed vacuum, r = 0.3, ξ-phase 0.5 (library angle equals the ξ phase)
    let (r, phi): (f64, f64) = (0.3, 0.5);
    let mut psi = vec![Complex64::new(0.0, 0.0); d];
    for k in 0..d / 2 {
        let l = 0.5 * lgamma(2.0 * k as f64 + 1.0) - lgamma(k as f64 + 1.0) - k as f64 * 2f64.ln()
            + k as f64 * r.tanh().ln()
            - 0.5 * r.cosh().ln();
        psi[2 * k] = Complex64::from_polar(l.exp(), k as f64 * phi);
    }
    // coherent amplitude α = 0.6 − 0.3i
    let alpha = Complex64::new(0.6, -0.3);
    let coh: Vec<Complex64> =
        (0..d).map(|k| alpha.powu(k as u32) * (-0.5 * alpha.norm_sqr() - 0.5 * lgamma(k as f64 + 1.0)).exp()).collect();
    let inputs = [
        (pure(&psi), build(&StateFamilySpec::SqueezedVacuum { r, phi }).unwrap()),
        (pure(&coh), build(&StateFamilySpec::Coherent { alpha: vec![(alpha.re, alpha.im)] }).unwrap()),
    ];
    for (rho0, g0) in inputs {
        let (m0, c0) = phase_space_moments(&rho0, &a);
        assert!((c0 - &g0.cov).amax() < 1e-12 && (m0[0] - g0.mean[0]).abs() < 1e-12);
        let t = 1.3;
        let rho = integrate(rho0, &a, gamma, n, m, t, 520);
        let (mt, ct) = phase_space_moments(&rho, &a);
        let g = evolve(&g0, &ChannelSpec::uniform(1, ch), t).unwrap();
        assert!((ct - &g.cov).amax() < 1e-8, "{} vs {}", phase_space_moments(&rho, &a).1, g.cov);
        assert!((mt[0] - g.mean[0]).abs() < 1e-8 && (mt[1] - g.mean[1]).abs() < 1e-8);
    }
}

#[test]
fn evolution_is_a_semigroup_with_the_right_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let s = random_state(&mut rng, 2, 1.0, 1.0, 1.0);
    let spec = ChannelSpec {
        modes: vec![
            ModeChannel::new(0.5, 0.4, Complex64::new(0.2, -0.3)).unwrap(),
            BathPhysicalParams { n_th: 0.2, n_s: 0.4 }.channel(1.5),
        ],
    };
    let one = evolve(&evolve(&s, &spec, 0.7).unwrap(), &spec, 1.1).unwrap();
    let two = evolve(&s, &spec, 1.8).unwrap();
    assert!((one.cov - &two.cov).amax() < 1e-12 && (one.mean - &two.mean).amax() < 1e-12);
    let late = evolve(&s, &spec, 80.0).unwrap();
    assert!((late.cov - asymptotic_covariance(&spec).unwrap()).amax() < 1e-12);
    assert!(late.mean.amax() < 1e-8);
    assert_eq!(evolve(&s, &spec, 0.0).unwrap(), s);
    assert!(evolve(&s, &spec, -1.0).is_err());
    assert!(evolve(&s, &ChannelSpec::uniform(3, ModeChannel::thermal(1.0, 0.0)), 1.0).is_err());
}

#[test]
fn squeezed_bath_is_a_squeezed_thermal_state() {
    for (n_th, n_s) in [(0.0, 0.3), (0.5, 0.0), (1.2, 0.7)] {
        let ch = BathPhysicalParams { n_th, n_s }.channel(1.0);
        ch.validate().unwrap();
        let r = n_s.sqrt().asinh();
        let st = build(&StateFamilySpec::DisplacedSqueezedThermal { alpha: (0.0, 0.0), r, phi: 0.0, n: n_th }).unwrap();
        assert!((ch.asymptotic_block() - &st.cov).amax() < 1e-12, "{n_th} {n_s}");
        let mu = purity(&GaussianState::centered(ch.asymptotic_block()).unwrap());
        assert!((ch.asymptotic_purity() - mu).abs() < 1e-12);
        assert!((mu - 1.0 / (2.0 * n_th + 1.0)).abs() < 1e-12);
    }
    assert!(ModeChannel::new(1.0, 0.5, Complex64::new(1.0, 0.0)).is_err());
    assert!(ModeChannel::new(-1.0, 0.5, Complex64::new(0.0, 0.0)).is_err());
}

#[test]
fn noisy_twin_beam_entries() {
    let (r, n_th, n_s, gamma, t): (f64, f64, f64, f64, f64) = (0.7, 0.3, 0.2, 1.0, 0.4);
    let bath = BathPhysicalParams { n_th, n_s };
    let (n, m) = bath.to_nm();
    let s =
        evolve(&build(&StateFamilySpec::Twb { r }).unwrap(), &ChannelSpec::uniform(2, bath.channel(gamma)), t).unwrap();
    // vacuum-¼ units: variances of (q₁ ± q₂)/√2 and (p₁ ± p₂)/√2
    let sig = twb_noisy_sigmas(r, gamma * t, n, m);
    let var = |u: [f64; 4]| {
        let v = nalgebra::DVector::from_row_slice(&u);
        0.5 * v.dot(&(&s.cov * &v)) / 2.0
    };
    // order: q₁+q₂, p₁+p₂, q₁−q₂, p₁−p₂
    let dirs = [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0], [1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]];
    for (u, x) in dirs.into_iter().zip(sig) {
        assert!((var(u) - x).abs() < 1e-12, "{u:?}: {} vs {x}", var(u));
    }
}

#[test]
fn separability_time_special_cases() {
    let p = Bipartition::first_vs_rest(2);
    for (r, n_th) in [(0.3, 0.1), (1.0, 1.0), (2.0, 0.05)] {
        let a = twb_separability_time(r, 2.0, n_th, 0.0).unwrap().time().unwrap();
        let b = twb_separability_time_thermal(r, 2.0, n_th).time().unwrap();
        assert!((a - b).abs() < 1e-13 * b);
        let s = evolve(
            &build(&StateFamilySpec::Twb { r }).unwrap(),
            &ChannelSpec::uniform(2, ModeChannel::thermal(2.0, n_th)),
            a,
        )
        .unwrap();
        assert!((min_pt_symplectic_eig(&s, &[1]).unwrap() - 0.5).abs() < 1e-12);
    }
    // zero temperature: a pure loss channel never separates the twin beam
    assert_eq!(twb_separability_time(1.0, 1.0, 0.0, 0.0).unwrap(), SeparationTime::NeverSeparable);
    let twb = build(&StateFamilySpec::Twb { r: 1.0 }).unwrap();
    let loss = ChannelSpec::uniform(2, ModeChannel::thermal(1.0, 0.0));
    assert_eq!(separability_time_numeric(&twb, &loss, &p, 50.0).unwrap(), None);
    // a squeezed vacuum bath with e^{−2r}(1 + 2n_s) > 1 does separate it
    let t = twb_separability_time(0.2, 1.0, 0.0, 0.5).unwrap().time().unwrap();
    let spec = ChannelSpec::uniform(2, BathPhysicalParams { n_th: 0.0, n_s: 0.5 }.channel(1.0));
    let num = separability_time_numeric(&build(&StateFamilySpec::Twb { r: 0.2 }).unwrap(), &spec, &p, 50.0).unwrap();
    assert!((num.unwrap() - t).abs() < 1e-9 * t);
    assert!(twb_separability_time(1.0, 0.0, 0.1, 0.0).is_err());
}

#[test]
fn purity_and_depth_dynamics() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..50 {
        let n: f64 = rng.random_range(0.0..1.5);
        let ch = ModeChannel::new(
            rng.random_range(0.2..2.0),
            n,
            Complex64::from_polar((n * (n + 1.0)).sqrt() * rng.random_range(0.0..1.0), rng.random_range(-PI..PI)),
        )
        .unwrap();
        let input = SqueezedInput {
            mu0: rng.random_range(0.1..=1.0),
            r0: rng.random_range(0.0..1.2),
            angle: rng.random_range(0.0..2.0 * PI),
        };
        let t = rng.random_range(0.0..2.0);
        let evolved = evolve(&input.state().unwrap(), &ChannelSpec::uniform(1, ch), t).unwrap();
        let depth = nonclassical_depth_evolution(&input, &ch, t).unwrap();
        assert!((depth - nonclassical_depth(&evolved)).abs() < 1e-10, "{depth} vs {}", nonclassical_depth(&evolved));
        let h = 1e-5;
        let fd =
            (purity_evolution(&input, &ch, t + h).unwrap() - purity_evolution(&input, &ch, t + 2.0 * h).unwrap()) / -h;
        let rate = purity_rate(&input, &ch, t + 1.5 * h).unwrap();
        assert!((fd - rate).abs() < 1e-4 * rate.abs().max(1.0));
    }
}

#[test]
fn additive_noise_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let s = random_state(&mut rng, 2, 1.0, 1.0, 1.0);
    let delta =
        Mat::from_row_slice(4, 4, &[0.4, 0.1, 0.0, 0.0, 0.1, 0.3, 0.0, 0.05, 0.0, 0.0, 0.2, 0.0, 0.0, 0.05, 0.0, 0.5]);
    let out = gaussian_noise_map(&s, &delta).unwrap();
    assert!((out.cov - &s.cov - &delta * 0.5).amax() < 1e-15);
    let gain = mean_photon_number(&gaussian_noise_map(&s, &delta).unwrap()) - mean_photon_number(&s);
    assert!((gain - noise_photon_increase(&delta)).abs() < 1e-12);
    assert!(gaussian_noise_map(&s, &(-&delta)).is_err());
}
