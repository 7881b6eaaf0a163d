//! Slower kernel-norm estimate checks: the refined derivative-input
//! certificate, short-time prefactors, and the low/high-frequency
//! building-block estimates.

use rollstab::decay::log_times;
use rollstab::params::RollParams;
use rollstab::semigroup::{
    certify_exponential, certify_exponential_part, certify_lowfreq_central, certify_refined,
    exponential_short_time_factor, Part,
};

fn params() -> RollParams {
    RollParams::new(0.3, 1.0, 0.5)
}

#[test]
fn refined_derivative_input_rate() {
    // S_c(t) applied to first-component data controlled by its derivative:
    // exponent -(m+1)/2 with m = 0.
    let times = log_times(4.0, 400.0, 24);
    let cert = certify_refined(&params(), 1, 0, &times, 0.1).unwrap();
    assert!(
        cert.pass,
        "{}: fitted {} target {}",
        cert.id, cert.fitted, cert.target
    );
    assert!((cert.fitted + 0.5).abs() < 0.1);
}

#[test]
fn exponential_part_with_derivative_short_time() {
    // n + m = 1: the damped part blows up no faster than t^{-1/2} as t -> 0.
    let p = params();
    let times = vec![0.01, 0.02, 0.05, 0.1];
    let factors = exponential_short_time_factor(&p, Part::Exponential, 1, 0, &times).unwrap();
    let ref_factor = factors.last().unwrap().1;
    for &(t, f) in &factors {
        assert!(
            f < 12.0 * ref_factor.max(0.1),
            "opnorm * sqrt(t) = {f} at t = {t} not bounded"
        );
    }
}

#[test]
fn exponential_rate_bounded_by_damped_branch() {
    // gamma = 0, q = 0: the damped branch sits at -2 at k = 0, and the
    // cutoff complement decays no faster than its slowest mode, so the
    // fitted rate is positive and below 2 plus grid tolerance.
    let p = RollParams::new(0.0, 1.0, 0.0);
    let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let cert = certify_exponential(&p, 0, 0, &times).unwrap();
    assert!(cert.pass);
    assert!(
        cert.fitted > 0.0 && cert.fitted <= 2.0 + 0.1,
        "rate {}",
        cert.fitted
    );
}

#[test]
fn lowfreq_central_block_rates() {
    let p = params();
    let times = log_times(4.0, 400.0, 24);
    // n = 0: bounded, no decay.
    let cert = certify_lowfreq_central(&p, 0, None, &times, 0.1).unwrap();
    assert!(cert.pass, "fitted {}", cert.fitted);
    // n = 1, p = 1: exponent -1 (+- 0.15), peak-type norm with the
    // transient-start window.
    let dense = log_times(4.0, 400.0, 48);
    let cert = certify_lowfreq_central(&p, 1, Some(1.0), &dense, 0.15).unwrap();
    assert!(
        cert.pass,
        "{}: fitted {} target {}",
        cert.id, cert.fitted, cert.target
    );
}

#[test]
fn lowfreq_damped_block_decays_exponentially() {
    let p = params();
    let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let cert = certify_exponential_part(&p, Part::DampedInner, 0, 0, &times).unwrap();
    assert!(cert.pass && cert.fitted > 0.5, "rate {}", cert.fitted);
}

#[test]
fn highfreq_block_exponential_and_short_time() {
    let p = params();
    let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
    let cert = certify_exponential_part(&p, Part::HighFrequency, 0, 0, &times).unwrap();
    assert!(cert.pass && cert.fitted > 0.0, "rate {}", cert.fitted);

    // n = 1 as t -> 0+: opnorm * sqrt(t) bounded over [1e-4, 1e-2].
    let small: Vec<f64> = vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
    let factors = exponential_short_time_factor(&p, Part::HighFrequency, 1, 0, &small).unwrap();
    let fmax = factors.iter().fold(0.0f64, |a, &(_, f)| a.max(f));
    let fmin = factors.iter().fold(f64::INFINITY, |a, &(_, f)| a.min(f));
    assert!(
        fmax.is_finite() && fmax < 10.0 * fmin,
        "short-time factor not bounded: [{fmin}, {fmax}]"
    );

    // gamma = 0, q = 0: the rescaled symbol at infinity is diag(-1,-1,-D),
    // and the fitted rate must not exceed the slowest damping present.
    let p0 = RollParams::new(0.0, 1.0, 0.0);
    let cert = certify_exponential_part(&p0, Part::HighFrequency, 0, 0, &times).unwrap();
    assert!(cert.pass);
    assert!(
        cert.fitted <= 2.0 * p0.one_minus_q2() + 0.1,
        "rate {}",
        cert.fitted
    );
}

#[test]
fn first_component_weighting_decays_one_power_faster() {
    // Data in the first component picks up an extra (1+t)^{-1}: the
    // damped-branch projection reproduces e1 at k = 0, so the diffusive
    // filter annihilates it to O(k^2).
    use rollstab::decay::log_times;
    use rollstab::semigroup::{certify_diffusive, KernelColumn};
    let times = log_times(4.0, 400.0, 24);
    let cert = certify_diffusive(&params(), 0, 0, None, KernelColumn::First, &times, 0.15).unwrap();
    assert!(
        cert.pass,
        "{}: fitted {} target {}",
        cert.id, cert.fitted, cert.target
    );
    assert!((cert.fitted + 1.0).abs() < 0.15);
}
