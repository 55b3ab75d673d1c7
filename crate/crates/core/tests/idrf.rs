use wiener_lab::idrf::*;

const PAIRS: [(f64, f64); 6] = [(0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (0.5, 2.0), (1.0, 2.0), (2.0, 2.0)];

#[test]
fn lower_never_exceeds_upper() {
    let mut checked = 0;
    for (f, rs) in PAIRS {
        for n in [3, 10, 50, 100, 1000] {
            let lo = lower_bound_dn(f, rs, n).unwrap();
            let hi = upper_bound_dn(f, rs, n).unwrap();
            assert!(lo.value <= hi.value + 1e-12, "f={f} rs={rs} n={n}: {} > {}", lo.value, hi.value);
            checked += 1;
        }
    }
    assert!(checked >= 30);
}

#[test]
fn bounds_converge_to_the_limit() {
    for (f, rs) in PAIRS {
        let lim = idrf_limit(f, rs).unwrap();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for n in [100, 1000, 10_000] {
            let lo = (lower_bound_dn(f, rs, n).unwrap().value - lim).abs() / lim;
            let hi = (upper_bound_dn(f, rs, n).unwrap().value - lim).abs() / lim;
            assert!(lo < prev.0 && hi < prev.1, "not decreasing at f={f} rs={rs} n={n}");
            prev = (lo, hi);
        }
        assert!(prev.0 < 0.01 && prev.1 < 0.01);
    }
}

#[test]
fn complementary_slackness_holds() {
    for (f, rs) in PAIRS {
        for n in [5, 200] {
            for sol in [lower_bound_dn(f, rs, n).unwrap(), upper_bound_dn(f, rs, n).unwrap()] {
                let z = z_of(&sol.distortions, &sol.allocation).unwrap();
                assert!((z - 2.0 * rs).abs() < 1e-9, "{:?} z={z}", sol.kind);
            }
        }
    }
}

#[test]
fn multiplier_approaches_its_limit() {
    let t = IntervalAllocation::uniform(1.0, 10_000).unwrap();
    let sol = solve_lambda(&t, 1.0).unwrap();
    let x = sol.lambda_log_e();
    assert!((x / (4.0 / 9.0) - 1.0).abs() < 0.01, "{x}");
    assert!((lambda_log_e_limit(1.0, 1.0).unwrap() - 4.0 / 9.0).abs() < 1e-15);
}

#[test]
fn multiplier_bound_from_feasibility() {
    for f in [0.5, 1.0, 3.0] {
        for n in [3, 7, 40, 500] {
            let ub = upper_bound_dn(f, 1.0, n).unwrap();
            let nf = n as f64;
            assert!(ub.lambda_log_e() <= nf * nf / (2.0 * f * f * (nf + 1.0) * (nf + 1.0)));
        }
    }
}

#[test]
fn value_decreases_with_rate_per_sample() {
    for n in [10, 1000] {
        let v: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&rs| lower_bound_dn(1.0, rs, n).unwrap().value).collect();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
        let u: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&rs| upper_bound_dn(1.0, rs, n).unwrap().value).collect();
        assert!(u[0] > u[1] && u[1] > u[2], "{u:?}");
    }
}

#[test]
fn limit_at_unit_frequency() {
    let lo = lower_bound_dn(1.0, 1.0, 10_000).unwrap();
    let hi = upper_bound_dn(1.0, 1.0, 10_000).unwrap();
    for v in [lo.value, hi.value] {
        assert!((v / (5.0 / 6.0) - 1.0).abs() < 0.01);
    }
}

/// Relaxed inner optimum for a given interval vector.
fn relaxed_value(t: &IntervalAllocation, f: f64, rs: f64) -> f64 {
    let sol = solve_lambda(t, rs).unwrap();
    dn_objective(t, &sol.distortions, f).unwrap()
}

#[test]
fn equal_interior_intervals_are_not_beaten_by_transfers() {
    let (f, rs, n) = (1.0, 1.0, 12);
    let base = IntervalAllocation::with_ends(f, n, 0.6, 0.6).unwrap();
    let v0 = relaxed_value(&base, f, rs);
    for (i, j) in [(1, 2), (3, 9), (5, 6), (2, 11)] {
        for eps in [1e-3, 1e-2, 0.1, 0.4] {
            let mut t = base.intervals().to_vec();
            t[i] += eps;
            t[j] -= eps;
            let v = relaxed_value(&IntervalAllocation::new(t).unwrap(), f, rs);
            assert!(v >= v0 - 1e-12, "transfer {eps} between {i},{j}: {v} < {v0}");
        }
    }
}

#[test]
fn relaxed_bound_below_feasible_point() {
    for (f, rs) in PAIRS {
        for n in [4, 30, 300] {
            let ub = upper_bound_dn(f, rs, n).unwrap();
            let direct = dn_objective(&ub.allocation, &ub.distortions, f).unwrap();
            assert!(ub.distortions.chain_violation(&ub.allocation, 0.0).is_none());
            assert!(lower_bound_dn(f, rs, n).unwrap().value <= direct + 1e-12);
        }
    }
}

#[test]
fn asymmetric_search_is_no_worse() {
    for n in [10, 100] {
        let sym = lower_bound_dn_with(1.0, 1.0, n, EndSearch::Symmetric).unwrap();
        let asym = lower_bound_dn_with(1.0, 1.0, n, EndSearch::Asymmetric).unwrap();
        assert!(asym.value <= sym.value * (1.0 + 1e-9), "{} vs {}", asym.value, sym.value);
        assert!((asym.allocation.frequency() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn one_bit_per_sample_is_optimal() {
    for r in [2.0, 4.0, 8.0] {
        for which in [Tradeoff::Odfrf, Tradeoff::Idfrf] {
            let o = minimize_over_f_rs(r, which).unwrap();
            assert_eq!((o.f, o.rs), (r, 1));
            assert!(tradeoff_value(which, r / 2.0, 2).unwrap() > o.value);
        }
    }
}
