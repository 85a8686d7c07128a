use std::f64::consts::PI;

use psdim_core::pressure::*;
use psdim_core::sum::*;
use psdim_core::transfer::*;
use psdim_core::tree::*;
use psdim_core::*;

#[test]
fn neumaier_recovers_cancelled_terms() {
    let xs = [1.0, 1e100, 1.0, -1e100];
    let naive: f64 = xs.iter().sum();
    assert_eq!(naive, 0.0);
    assert_eq!(compensated_sum(xs), 2.0);
}

#[test]
fn harmonic_tail_matches_reference() {
    // sum_{k=1}^{1e6} 1/k^2 = pi^2/6 - psi'(1e6+1); trigamma ~ 1/n - 1/(2n^2)
    let n = 1_000_000u64;
    let s = compensated_sum((1..=n).rev().map(|k| 1.0 / (k as f64 * k as f64)));
    let nf = n as f64;
    let tail = 1.0 / nf - 1.0 / (2.0 * nf * nf) + 1.0 / (6.0 * nf.powi(3));
    let exact = std::f64::consts::PI.powi(2) / 6.0 - tail;
    assert!((s - exact).abs() < 1e-15);
}

#[test]
fn log_sum_exp_is_stable() {
    let v = log_sum_exp(&[1000.0, 1000.0]);
    assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
}

#[test]
fn fit_recovers_line() {
    let xs: Vec<f64> = (0..10).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
    let (a, b, r2) = linear_fit(&xs, &ys);
    assert!((a - 3.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
}

#[test]
fn first_level_is_transfer_one() {
    let f = MapSpec::tangent(C::new(0.5, 0.0)).unwrap();
    let pol = TruncationPolicy::default();
    let w = SpherePoint::new(0.3, 0.2);
    let mut tr = BackwardTree::new(&f, 0.9, vec![Node { z: w, weight: 1.0 }], &pol, TreeParams::default())
        .unwrap();
    let s = tr.step().unwrap();
    let e = transfer_one(&f, 0.9, w, &pol).unwrap();
    assert!((s.log_growth - e.midpoint().ln()).abs() < 1e-12);
    let sum: f64 = tr.nodes().iter().map(|n| n.weight).sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn reduction_is_thread_count_independent() {
    let f = MapSpec::tangent(C::new(0.0, std::f64::consts::PI)).unwrap();
    let pol = TruncationPolicy::with_k_max(10);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let root = vec![Node { z: SpherePoint::new(0.3, 0.2), weight: 1.0 }];
            let mut tr = BackwardTree::new(&f, 1.5, root, &pol, TreeParams::default()).unwrap();
            let mut g = Vec::new();
            for _ in 0..3 {
                g.push(tr.step().unwrap().log_growth);
            }
            (g, tr.nodes().to_vec())
        })
    };
    let (a, na) = run(1);
    let (b, nb) = run(3);
    assert_eq!(a, b);
    assert_eq!(na, nb);
}

#[test]
fn depth_one_is_log_transfer() {
    let f = MapSpec::tangent(C::new(0.5, 0.0)).unwrap();
    let pol = TruncationPolicy::default();
    let b = SpherePoint::new(2.0, 0.0);
    let p = pressure_estimate(&f, 0.8, b, 1, &pol, &TreeParams::default()).unwrap();
    let e = transfer_one(&f, 0.8, b, &pol).unwrap();
    assert!((p.per_depth[0] - e.midpoint().ln()).abs() < 1e-12);
}

#[test]
fn aitken_recovers_geometric_limit() {
    let d: Vec<f64> = (0..8).map(|n| 0.3 + 0.5 * 0.4f64.powi(n)).collect();
    let (v, e, m) = extrapolate(&d);
    assert_eq!(m, Extrapolation::Aitken);
    assert!((v - 0.3).abs() < 1e-12 && e >= 0.0);
}

#[test]
fn slow_sequences_get_wide_bars() {
    let d: Vec<f64> = (1..10).map(|n| -0.03 / n as f64).collect();
    let (v, e, _) = extrapolate(&d);
    assert!(v - e <= 0.0 && 0.0 <= v + e);
}

fn tan(l: C) -> MapSpec {
    MapSpec::tangent(l).unwrap()
}

#[test]
fn coth_identity() {
    // Σ_k (1 + k^2 π^2)^{-1} = coth 1
    let f = tan(C::new(1.0, 0.0));
    let e = transfer_one(&f, 1.0, SpherePoint::new(0.0, 0.0), &TruncationPolicy::with_k_max(10_000))
        .unwrap();
    let coth1 = 1.0 / 1f64.tanh();
    assert!(e.contains(coth1), "{e:?}");
    assert!(e.high() - e.low() < 1e-6);
}

#[test]
fn below_threshold_rejected() {
    let f = tan(C::new(1.0, 0.0));
    let r = transfer_one(&f, 0.5, SpherePoint::new(0.0, 0.0), &TruncationPolicy::default());
    assert_eq!(r.unwrap_err(), Error::BelowBorelThreshold(0.5));
}

#[test]
fn large_t_dominated_by_central_branch() {
    let f = tan(C::new(1.0, 0.0));
    let w = SpherePoint::new(0.3, 0.1);
    let e = transfer_one(&f, 40.0, w, &TruncationPolicy::default()).unwrap();
    let s = f.preimages(w, &TruncationPolicy::default()).unwrap();
    let top = s.branches[0].sigma_deriv.powf(-40.0);
    assert!((e.midpoint() - top).abs() < 1e-12 * top);
}

#[test]
fn bracket_contains_refined_value() {
    let f = tan(C::new(0.0, PI));
    for (t, w) in [(0.55, SpherePoint::new(0.2, 0.3)), (1.3, SpherePoint::Infinity), (0.8, SpherePoint::new(-2.0, 5.0))] {
        let a = transfer_one(&f, t, w, &TruncationPolicy::with_k_max(50)).unwrap();
        let b = transfer_one(&f, t, w, &TruncationPolicy::with_k_max(100)).unwrap();
        assert!(a.low() <= b.low() * (1.0 + 1e-12) && b.high() <= a.high() * (1.0 + 1e-12));
    }
}

#[test]
fn grid_is_spread_out() {
    let g = sphere_grid(200);
    assert_eq!(g.len(), 200);
    let mut min = 1.0f64;
    for i in 0..g.len() {
        for j in 0..i {
            min = min.min(chordal_dist(g[i], g[j]));
        }
    }
    assert!(min > 0.02);
}

#[test]
fn distortion_depth_zero_is_one() {
    let f = tan(C::new(0.0, PI));
    let r = distortion_probe(&f, SpherePoint::new(0.6, 0.8), 0.05, 0, 10, 1).unwrap();
    assert_eq!(r.k, 1.0);
}

#[test]
fn distortion_shrinks_with_delta() {
    let f = tan(C::new(0.0, PI));
    let w = SpherePoint::new(0.6, 0.8);
    let big = distortion_probe(&f, w, 0.05, 4, 100, 7).unwrap().k;
    let small = distortion_probe(&f, w, 1e-4, 4, 100, 7).unwrap().k;
    assert!(small < big && small < 1.01, "{small} {big}");
}

#[test]
fn borel_threshold_of_the_order_one_family() {
    let f = MapSpec::tangent(C::new(1.0, 0.0)).unwrap();
    let w = SpherePoint::new(0.3, 0.0);
    let pol = TruncationPolicy::default();
    for t in [0.4, 0.5] {
        assert_eq!(transfer_one(&f, t, w, &pol).unwrap_err(), Error::BelowBorelThreshold(t));
    }
    for t in [0.51, 0.6, 1.0] {
        let e = transfer_one(&f, t, w, &pol).unwrap();
        assert!(e.high().is_finite() && e.low() > 0.0, "t={t}: {e:?}");
    }
}

#[test]
fn operator_is_uniformly_bounded_on_the_sphere() {
    let f = MapSpec::tangent(C::new(0.0, PI)).unwrap();
    let r = uniform_bound_scan(&f, 0.75, &sphere_grid(200), &TruncationPolicy::default()).unwrap();
    assert!(r.sup.is_finite() && !r.unbounded);
    assert!(r.sup / r.median <= 3.0, "sup/median {}", r.sup / r.median);
    assert!(uniform_bound_scan(&f, 0.4, &sphere_grid(10), &TruncationPolicy::default()).is_err());
}

#[test]
fn pressure_decreases_in_the_exponent() {
    let grid = [0.6, 0.8, 1.0, 1.2, 1.5, 1.8, 2.0];
    for l in [C::new(0.5, 0.0), C::new(0.0, PI)] {
        let f = MapSpec::tangent(l).unwrap();
        let base = psdim_core::bowen::choose_base(&f);
        let c = pressure_curve(&f, &grid, base, 8, &TruncationPolicy::default(), &TreeParams::default()).unwrap();
        assert!(c.is_decreasing(), "{l}: {:?}", c.estimates.iter().map(|e| e.extrapolated).collect::<Vec<_>>());
    }
}
