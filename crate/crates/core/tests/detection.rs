use tailsep::distributions::stream_rng;
use tailsep::tail_detect::{detect_with_scan, ideal_case_sample, mc_experiment, Detection};
use tailsep::{
    builtin_table, detect, to_losses, ParentDistribution, ParentKind, ScanOptions, SeriesTransform,
};

fn ideal(kind: ParentKind, n: usize) -> Detection {
    let x = ideal_case_sample(&ParentDistribution::reference(kind), n).unwrap();
    detect_with_scan(&x, &builtin_table(), &ScanOptions::default()).unwrap()
}

#[test]
fn ideal_gpd_statistic_vanishes_toward_the_full_sample() {
    let d = ideal(ParentKind::Gpd, 2000);
    let au2 = |k: usize| d.rows[k - 2].au2;
    assert!(au2(2000) < au2(1000) && au2(1000) < au2(200), "{} {} {}", au2(2000), au2(1000), au2(200));
    assert!(au2(2000) < 1e-3);
    assert!(d.model.k_star >= 1990);
}

#[test]
fn ideal_exponential_behaves_like_gpd() {
    let d = ideal(ParentKind::Exponential, 2000);
    assert!(d.model.k_star >= 1990, "k* = {}", d.model.k_star);
    assert!(d.model.params.xi.abs() < 0.02);
}

#[test]
fn ideal_light_tails_select_a_small_fraction() {
    let normal = ideal(ParentKind::Normal, 10_000);
    assert!(normal.model.tail_fraction() < 0.2);
    let small = ideal(ParentKind::Normal, 500);
    assert!(normal.model.tail_fraction() <= small.model.tail_fraction());
    assert!(ideal(ParentKind::Lognormal, 10_000).model.tail_fraction() < 0.2);
}

#[test]
fn random_lognormal_model_has_all_report_fields() {
    let parent = ParentDistribution::reference(ParentKind::Lognormal);
    let x = parent.sample(&mut stream_rng(31, 0), 200);
    let m = detect(&x, &builtin_table(), &ScanOptions::default()).unwrap();
    assert!(m.k_star >= 2 && m.k_star <= 200);
    assert!(m.params.xi.is_finite() && m.params.sigma > 0.0);
    for g in [m.gof.w2, m.gof.a2, m.gof.au2] {
        assert!(g.value.is_finite() && g.value >= 0.0);
        assert!((0.0..=1.0).contains(&g.p_value.value()));
    }
    let expected_u = {
        let mut z = x.clone();
        z.sort_by(f64::total_cmp);
        z[200 - m.k_star]
    };
    assert_eq!(m.u, expected_u);
}

#[test]
fn selection_is_location_scale_invariant() {
    let parent = ParentDistribution::reference(ParentKind::Lognormal);
    let table = builtin_table();
    for seed in 0..5 {
        let x = parent.sample(&mut stream_rng(41, seed), 300);
        let (c, d) = (3.7, -12.0);
        let y: Vec<f64> = x.iter().map(|v| c * v + d).collect();
        let a = detect(&x, &table, &ScanOptions::default()).unwrap();
        let b = detect(&y, &table, &ScanOptions::default()).unwrap();
        assert_eq!(a.k_star, b.k_star, "seed {seed}");
        assert!((b.u - (c * a.u + d)).abs() < 1e-6 * b.u.abs().max(1.0));
        assert!((b.params.sigma - c * a.params.sigma).abs() < 1e-6 * b.params.sigma);
        assert!((b.params.xi - a.params.xi).abs() < 1e-6);
    }
}

#[test]
fn lower_tail_is_detected_through_negation() {
    // y has its heavy tail on the left; negation moves it to the right.
    let parent = ParentDistribution::reference(ParentKind::Gev);
    let x = parent.sample(&mut stream_rng(51, 0), 400);
    let y: Vec<f64> = x.iter().map(|v| -v).collect();
    let table = builtin_table();
    let on_x = detect(&x, &table, &ScanOptions::default()).unwrap();
    let on_losses = detect(&to_losses(&y, SeriesTransform::Negate).unwrap(), &table, &ScanOptions::default())
        .unwrap();
    assert_eq!(on_losses.k_star, on_x.k_star);
    assert_eq!(on_losses.params, on_x.params);
    // In the coordinates of y the threshold is the mirror image.
    let mut lower = y.clone();
    lower.sort_by(f64::total_cmp);
    assert_eq!(lower[on_x.k_star - 1], -on_x.u);
}

#[test]
fn normal_experiment_has_an_interior_minimum() {
    let normal = mc_experiment(&ParentDistribution::reference(ParentKind::Normal), 100, 2000, 5).unwrap();
    let argmin = normal.mean_curve_argmin;
    assert!(argmin > 5 && argmin < 95, "normal mean-curve argmin {argmin}");
    let width = |k: usize| {
        let p = normal.curve.iter().find(|p| p.k == k).unwrap();
        p.upper - p.lower
    };
    assert!(width(5) > width(40), "band {} vs {}", width(5), width(40));
    assert!(normal.curve.iter().all(|p| p.lower <= p.upper));
}

fn gpd_experiment() -> tailsep::tail_detect::McExperiment {
    mc_experiment(&ParentDistribution::reference(ParentKind::Gpd), 100, 2000, 5).unwrap()
}

#[test]
fn gpd_experiment_mean_curve_is_flat_beyond_small_tails() {
    let e = gpd_experiment();
    let means: Vec<f64> = e.curve.iter().filter(|p| p.k >= 30).map(|p| p.mean).collect();
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((hi - lo) / lo < 0.03, "mean AU2 spans {lo}..{hi} for k >= 30");
    assert!(e.curve[0].mean > hi, "small tails are worse");
}

#[test]
fn gpd_experiment_minimum_lies_at_the_edge() {
    let e = gpd_experiment();
    assert!(e.mean_curve_argmin >= 96, "gpd mean-curve argmin {}", e.mean_curve_argmin);
}
