//! Grid computations against the FFT-free oracles on a reduced hierarchy
//! (tau_s : tau_g : tau_FP = 1 : 10 : 100).

use std::sync::Arc;

use etsim::backends::{apply_filter_arm1, standard_backend, BackendResult, FilteredJoint};
use etsim::cavity::{airy_response, lorentzian_response, SpectralFilter};
use etsim::oracle::{
    l1_against, source_difference, source_marginal, survival_frequency_domain, GaussianLorentzian,
};
use etsim::source::{
    difference_time_density, joint_temporal_amplitude, marginal_density, source_grid, Arm,
    SourceParams,
};

fn params() -> SourceParams {
    SourceParams::new(1.0, 10.0, 1.0).unwrap()
}

fn filtered(filter: &SpectralFilter) -> Arc<FilteredJoint> {
    let p = params();
    let g = source_grid(&p, 6.0, 0.25).unwrap();
    let amp = Arc::new(joint_temporal_amplitude(&p, &g, &g).unwrap());
    Arc::new(apply_filter_arm1(amp, filter).unwrap())
}

fn standard(kappa: f64) -> (GaussianLorentzian, Arc<FilteredJoint>, BackendResult) {
    let f = lorentzian_response(kappa, 0.0).unwrap();
    let fj = filtered(&f);
    let std = standard_backend(&fj).unwrap();
    (GaussianLorentzian::new(&params(), &f).unwrap(), fj, std)
}

#[test]
fn pre_filter_marginals_are_closed_form() {
    let p = params();
    let g = source_grid(&p, 6.0, 0.25).unwrap();
    let amp = joint_temporal_amplitude(&p, &g, &g).unwrap();
    let m1 = marginal_density(&amp, Arm::One).unwrap();
    let d = difference_time_density(&amp).unwrap();
    assert!(l1_against(&m1, 1, |t| source_marginal(&p, t)).unwrap() < 1e-6);
    assert!(l1_against(&d, 1, |u| source_difference(&p, u)).unwrap() < 1e-6);
    assert!((d.rms() - 1.0).abs() < 1e-6);
}

#[test]
fn coincidence_marginals_match_quadrature() {
    let (o, fj, std) = standard(0.01);
    assert!((fj.survival() - o.survival()).abs() < 1e-6 * o.survival().max(1e-3));
    assert!(l1_against(&std.p1, 4, |t| o.p1(t)).unwrap() < 1e-3);
    assert!(l1_against(&std.p2, 1, |t| o.p2(t)).unwrap() < 1e-3);
    assert!(l1_against(&std.difference, 4, |u| o.difference(u)).unwrap() < 1e-3);
    assert!((std.p1.rms() / o.p1_rms() - 1.0).abs() < 1e-4);
    assert!((std.p2.rms() / o.p2_rms() - 1.0).abs() < 1e-6);
    assert!((std.difference.rms() / o.difference_rms() - 1.0).abs() < 1e-4);
}

#[test]
fn difference_spread_grows_from_tau_s_to_tau_fp() {
    let (o, _, std) = standard(0.01);
    // pre-filter spread is tau_s = 1; post-filter it approaches 1/kappa
    assert!(std.difference.rms() > 50.0);
    assert!((std.difference.rms() / o.difference_rms() - 1.0).abs() < 0.10);
}

#[test]
fn survival_matches_frequency_domain_for_airy_filter() {
    let f = airy_response(0.97, 4.0, 0.3).unwrap();
    let fj = filtered(&f);
    let freq = survival_frequency_domain(&params(), &f);
    assert!(
        (fj.survival() - freq).abs() < 1e-6,
        "{} vs {freq}",
        fj.survival()
    );
}

#[test]
fn survival_matches_frequency_domain_off_resonance() {
    let f = lorentzian_response(0.05, 0.4).unwrap();
    let fj = filtered(&f);
    let freq = survival_frequency_domain(&params(), &f);
    assert!((fj.survival() - freq).abs() < 1e-6);
}
