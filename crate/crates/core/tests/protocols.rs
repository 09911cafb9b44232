use std::f64::consts::PI;
use std::num::NonZeroUsize;

use nmcool::hilbert::*;
use nmcool::liouvillian::*;
use nmcool::magnonics::EffectiveParams;
use nmcool::protocols::*;
use nmcool::units::*;
use proptest::prelude::*;

fn steady_n0(p: &EffectiveParams, space: FockSpace) -> f64 {
    steady_state(&build_generator(p, space).unwrap())
        .unwrap()
        .population(Mode::Magnon)
}

// lossless swaps keep ρ rank deficient, so its zero eigenvalues sit right at
// the integration error
fn tight() -> CoolingOptions {
    let mut o = CoolingOptions::default();
    o.control.rtol = 1e-10;
    o.control.atol = 1e-12;
    o
}

fn cycles(n: usize) -> NonZeroUsize {
    NonZeroUsize::new(n).unwrap()
}

#[test]
fn closed_forms_at_the_baseline() {
    let (k0, kh) = (khz(0.1), mhz(1.0));
    assert!((weak_coupling_steady(1.0, khz(10.0), k0, kh).unwrap() - 0.2).abs() < 1e-12);
    assert!((weak_coupling_steady(1.0, khz(30.0), k0, kh).unwrap() - 1.0 / 37.0).abs() < 1e-12);
    assert!((backheating_floor(1.0, k0, kh).unwrap() - 1e-4).abs() < 1e-16);
    assert!(weak_coupling_steady(-1.0, khz(10.0), k0, kh).is_err());
}

#[test]
fn uncoupled_magnon_stays_thermal() {
    let space = FockSpace::new(12, 4).unwrap();
    let p = EffectiveParams::new(0.0, khz(0.1), mhz(1.0), 1.0);
    let out = run_cooling(&p, space, 10.0 / khz(0.1)).unwrap();
    assert!(out.trajectory.n_magnon.iter().all(|n| (n - 1.0).abs() < 0.01));
    assert!(out.swap_frequency.is_none() && out.envelope_rate.is_none());
}

#[test]
fn single_point_sweep_equals_steady_state() {
    let space = FockSpace::new(10, 6).unwrap();
    let base = EffectiveParams::new(khz(10.0), khz(0.1), mhz(1.0), 1.0);
    let axis = SweepAxis::new(SweepParam::GH, vec![khz(20.0)]).unwrap();
    let pts = sweep_steady(&base, space, &[axis], &SweepOptions::default()).unwrap();
    assert_eq!(pts.len(), 1);
    let mut p = base;
    p.g_h = khz(20.0);
    assert_eq!(*pts[0].n0.as_ref().unwrap(), steady_n0(&p, space));
    assert_eq!(pts[0].params, p);
}

#[test]
fn sweep_order_and_thread_count() {
    let space = FockSpace::new(8, 4).unwrap();
    let base = EffectiveParams::new(khz(10.0), khz(0.1), mhz(1.0), 1.0);
    let axes = [
        SweepAxis::new(SweepParam::Kappa0, vec![khz(0.1), khz(1.0)]).unwrap(),
        SweepAxis::new(SweepParam::KappaH, logspace(mhz(0.1), mhz(10.0), 3).unwrap()).unwrap(),
    ];
    let one = sweep_steady(&base, space, &axes, &SweepOptions { jobs: Some(cycles(1)) }).unwrap();
    let four = sweep_steady(&base, space, &axes, &SweepOptions { jobs: Some(cycles(4)) }).unwrap();
    assert_eq!(one.len(), 6);
    assert_eq!(one[1].coords, vec![khz(0.1), one[1].coords[1]]);
    assert_eq!(one[3].coords[0], khz(1.0));
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.coords, b.coords);
        assert_eq!(a.n0.as_ref().unwrap(), b.n0.as_ref().unwrap());
    }
}

#[test]
fn failed_points_keep_their_error() {
    let space = FockSpace::new(4, 4).unwrap();
    let base = EffectiveParams::new(0.0, khz(0.1), mhz(1.0), 1.0);
    let axis = SweepAxis::new(SweepParam::Kappa0, vec![0.0, khz(0.1)]).unwrap();
    let pts = sweep_steady(&base, space, &[axis], &SweepOptions::default()).unwrap();
    assert!(pts[0].n0.is_err());
    assert!(pts[1].n0.is_ok());
}

// loss map at G_h = 10 kHz
#[test]
fn loss_map_follows_closed_form_in_weak_coupling() {
    let space = FockSpace::new(12, 6).unwrap();
    let g = khz(10.0);
    let base = EffectiveParams::new(g, khz(0.1), mhz(1.0), 1.0);
    let k0 = [0.01, 0.1, 1.0, 10.0].map(khz).to_vec();
    let kh = [0.01, 0.1, 1.0, 10.0].map(mhz).to_vec();
    let axes = [
        SweepAxis::new(SweepParam::Kappa0, k0).unwrap(),
        SweepAxis::new(SweepParam::KappaH, kh).unwrap(),
    ];
    let pts = sweep_steady(&base, space, &axes, &SweepOptions::default()).unwrap();
    let mut bad = Vec::new();
    for p in &pts {
        let n = *p.n0.as_ref().unwrap();
        let cf = p.closed_form.unwrap();
        let weak = g <= p.params.kappa_h / 10.0 * (1.0 + 1e-12);
        if weak && (n / cf - 1.0).abs() >= 0.02 {
            bad.push((p.coords.clone(), n, cf));
        }
    }
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn loss_map_is_monotone_in_magnon_loss() {
    let space = FockSpace::new(12, 6).unwrap();
    let base = EffectiveParams::new(khz(10.0), khz(0.1), mhz(1.0), 1.0);
    let k0 = logspace(khz(0.01), khz(10.0), 5).unwrap();
    let kh = logspace(mhz(0.01), mhz(10.0), 3).unwrap();
    let axes = [
        SweepAxis::new(SweepParam::KappaH, kh).unwrap(),
        SweepAxis::new(SweepParam::Kappa0, k0).unwrap(),
    ];
    let pts = sweep_steady(&base, space, &axes, &SweepOptions::default()).unwrap();
    for row in pts.chunks(5) {
        for w in row.windows(2) {
            assert!(w[1].n0.as_ref().unwrap() > w[0].n0.as_ref().unwrap());
            assert!(w[1].closed_form.unwrap() > w[0].closed_form.unwrap());
        }
    }
}

#[test]
fn pump_strength_lowers_the_steady_population() {
    let space = FockSpace::new(12, 6).unwrap();
    let base = EffectiveParams::new(khz(10.0), khz(0.1), mhz(1.0), 1.0);
    let axis = SweepAxis::new(SweepParam::GH, logspace(khz(1.0), khz(300.0), 6).unwrap()).unwrap();
    let pts = sweep_steady(&base, space, &[axis], &SweepOptions::default()).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].n0.as_ref().unwrap() < w[0].n0.as_ref().unwrap());
    }
}

#[test]
fn one_q_switch_cycle_is_a_partial_swap() {
    // lossless magnon, no loss while holding, a hard dump; the swap leaves
    // magnon-photon correlations that shift n₀ by O(G/κ_high) during the dump
    let space = FockSpace::new(12, 12).unwrap();
    let g = mhz(1.0);
    let p = EffectiveParams::new(g, 0.0, 0.0, 1.0);
    let hold = 0.3 / g;
    let high = 1e4 * g;
    let sch = QSwitchSchedule::new(0.0, high, hold, 5.0 / high, cycles(1)).unwrap();
    let out = run_q_switched_with(&p, space, &sch, &tight()).unwrap();
    let n_start = DensityMatrix::thermal(space, 1.0, 0.0).unwrap().population(Mode::Magnon);
    let want = n_start * (g * hold).cos().powi(2);
    assert!((out.n0_steady / want - 1.0).abs() < 1e-3, "{} vs {want}", out.n0_steady);
    let photon = *out.trajectory.n_photon.last().unwrap();
    let left = n_start * (g * hold).sin().powi(2) * (-5.0f64).exp();
    assert!((photon / left - 1.0).abs() < 0.05, "{photon} vs {left}");
}

#[test]
fn half_swap_empties_the_magnon() {
    let space = FockSpace::new(12, 12).unwrap();
    let g = mhz(1.0);
    let p = EffectiveParams::new(g, 0.0, 0.0, 1.0);
    let sch = QSwitchSchedule::with_defaults(g, 0.0, 1e4 * g, cycles(1)).unwrap();
    assert!((sch.hold_time() - PI / (2.0 * g)).abs() < 1e-20);
    let out = run_q_switched_with(&p, space, &sch, &tight()).unwrap();
    assert!(out.n0_steady < 1e-6);
}

#[test]
fn schedule_boundaries() {
    let sch = QSwitchSchedule::new(1.0, 10.0, 2.0, 0.5, cycles(3)).unwrap();
    assert_eq!(sch.boundaries(), vec![0.0, 2.0, 2.5, 4.5, 5.0, 7.0, 7.5]);
    assert_eq!(sch.total_time(), 7.5);
    let r = sch.rate_schedule().unwrap();
    assert_eq!(r.rate_at(1.0), 1.0);
    assert_eq!(r.rate_at(2.2), 10.0);
    assert_eq!(r.rate_at(4.6), 10.0);
    assert!(QSwitchSchedule::new(10.0, 1.0, 2.0, 0.5, cycles(3)).is_err());
}

// continuous reference at the cavity's own loss rate, which the schedule
// uses while holding
#[test]
fn q_switching_beats_continuous_cooling_at_the_base_rate() {
    let space = FockSpace::new(12, 12).unwrap();
    let kh = mhz(1.0);
    for m in [1.0, 3.0] {
        let p = EffectiveParams::new(m * kh, khz(0.1), kh, 1.0);
        let sch = QSwitchSchedule::with_defaults(m * kh, kh, 100.0 * kh, cycles(20)).unwrap();
        let q = run_q_switched(&p, space, &sch).unwrap().n0_steady;
        assert!(q <= steady_n0(&p, space), "G = {m} κ_h");
    }
}

// continuous reference at the schedule's peak loss rate
#[test]
fn q_switching_beats_continuous_cooling_at_the_peak_rate() {
    let space = FockSpace::new(12, 12).unwrap();
    let peak = mhz(100.0);
    for m in [1.0, 3.0] {
        let g = m * peak;
        let sch = QSwitchSchedule::with_defaults(g, mhz(1.0), peak, cycles(20)).unwrap();
        let p = EffectiveParams::new(g, khz(0.1), peak, 1.0);
        let q = run_q_switched(&p, space, &sch).unwrap().n0_steady;
        let c = steady_n0(&p, space);
        assert!(q <= c, "G = {m} κ_peak: {q:e} vs {c:e}");
    }
}

#[test]
fn spectral_peak_of_a_damped_cosine() {
    let w = 2.0 * PI * 1.7e6;
    let t: Vec<f64> = (0..2001).map(|k| k as f64 * 2.5e-9).collect();
    let y: Vec<f64> = t.iter().map(|t| (-2e5 * t).exp() * (w * t).cos()).collect();
    let f = dominant_frequency(&t, &y).unwrap();
    assert!((f / w - 1.0).abs() < 5e-3, "{f} vs {w}");
    assert!(dominant_frequency(&t[..3], &y[..3]).is_none());
}

#[test]
fn envelope_of_a_decaying_swap() {
    let (w, rate, floor) = (2.0 * PI * 2e6, 3e6, 1e-4);
    let t: Vec<f64> = (0..4001).map(|k| k as f64 * 1e-9).collect();
    let n0: Vec<f64> = t
        .iter()
        .map(|t| floor + (-rate * t).exp() * (0.5 * w * t).cos().powi(2))
        .collect();
    let total: Vec<f64> = t.iter().map(|t| 2.0 * floor + (-rate * t).exp()).collect();
    let fit = envelope_fit(&t, &n0, &total).unwrap();
    assert!((fit / rate - 1.0).abs() < 0.05, "{fit} vs {rate}");
}

#[test]
fn grids() {
    assert_eq!(uniform_grid(1.0, 5).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert!(uniform_grid(0.0, 5).is_err());
    assert!(uniform_grid(1.0, 1).is_err());
    let v = logspace(2.0, 2e4, 5).unwrap();
    assert_eq!((v[0], v[4]), (2.0, 2e4));
    assert!((v[2] / 200.0 - 1.0).abs() < 1e-14);
}

proptest! {
    #[test]
    fn closed_form_monotonicity(
        g in 0.0f64..1e6,
        dg in 1.0f64..1e5,
        k0 in 1.0f64..1e4,
        dk in 1.0f64..1e3,
        kh in 1e3f64..1e8,
    ) {
        let base = weak_coupling_steady(1.0, g, k0, kh).unwrap();
        prop_assert!(weak_coupling_steady(1.0, g + dg, k0, kh).unwrap() < base);
        prop_assert!(weak_coupling_steady(1.0, g, k0 + dk, kh).unwrap() > base);
        prop_assert!(base <= 1.0);
    }
}
