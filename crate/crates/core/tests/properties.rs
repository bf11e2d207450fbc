//! Randomized invariants of the sampling, propagation, statistics and file
//! formats.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;

use qtrack::detectors::{DetectorLattice, LatticeGeometry};
use qtrack::evolution::{no_jump_step, select_event, ClickEvent, Event, StateSummary, Trajectory};
use qtrack::grid::Grid;
use qtrack::io::{format_clicks, parse_clicks};
use qtrack::rng::trajectory_seed;
use qtrack::stats::{bessel_i0, bin_clicks, energy_pdf_initial, ols, ClickRecord};
use qtrack::wavefunction::{coherent_state, PhasePoint};
use qtrack::SimConfig;

fn trajectory(index: u64, clicks: Vec<ClickEvent>) -> Trajectory {
    Trajectory {
        index,
        seed: trajectory_seed(1, index),
        clicks,
        final_state: StateSummary {
            mean_x: 0.0,
            mean_p: 0.0,
            mean_energy: 0.5,
        },
        exit_time: None,
        expected_clicks: 0.0,
    }
}

fn click_strategy() -> impl Strategy<Value = ClickRecord> {
    (0u64..8, 0.0..50.0f64, -20i64..20, -20i64..20).prop_map(|(traj_index, t, j, k)| ClickRecord {
        traj_index,
        t,
        j,
        k,
        x: j as f64 * 2.16,
        p: k as f64 * 2.16,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn selected_detector_brackets_the_draw(
        probs in prop::collection::vec(0.0..0.05f64, 1..24),
        r in 0.0..1.0f64,
    ) {
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cum.push(acc);
        }
        match select_event(r, &probs) {
            Event::Jump(i) => {
                let lower = if i == 0 { 0.0 } else { cum[i - 1] };
                prop_assert!(lower <= r && r < cum[i]);
            }
            Event::NoJump => prop_assert!(r >= acc),
        }
    }

    #[test]
    fn config_survives_canonical_round_trip(
        gamma in 0.01..5.0f64,
        d in 0.5..6.0f64,
        dt in 0.001..0.01f64,
        t_end in 1.0..300.0f64,
        n_traj in 1usize..5000,
        seed in any::<u64>(),
        j0 in -5i64..15,
    ) {
        let cfg = SimConfig {
            gamma,
            d_x: d,
            d_p: d,
            dt,
            t_end,
            n_traj,
            master_seed: seed,
            j0: Some(j0),
            ..SimConfig::default()
        };
        let back = SimConfig::parse(&cfg.canonical()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn binning_ignores_record_order(
        clicks in prop::collection::vec(click_strategy(), 1..200),
        seed in any::<u64>(),
    ) {
        let mut shuffled = clicks.clone();
        // Fisher–Yates with a fixed LCG keeps the permutation reproducible.
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = bin_clicks(&clicks, 0.1).unwrap();
        let b = bin_clicks(&shuffled, 0.1).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.bins.iter().map(|b| b.count).sum::<usize>(), clicks.len());
        prop_assert_eq!(a.total_clicks, clicks.len());
        for bin in &a.bins {
            prop_assert_eq!(bin.count == 0, bin.moments.is_none());
        }
    }

    #[test]
    fn ols_recovers_exact_lines(
        a in -100.0..100.0f64,
        b in -10.0..10.0f64,
        n in 3usize..60,
        t0 in -5.0..5.0f64,
    ) {
        let t: Vec<f64> = (0..n).map(|i| t0 + 0.37 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| a + b * t).collect();
        let fit = ols(&t, &y).unwrap();
        let scale = 1.0 + a.abs() + b.abs();
        prop_assert!((fit.slope - b).abs() < 1e-9 * scale);
        prop_assert!((fit.intercept - a).abs() < 1e-9 * scale);
    }

    #[test]
    fn rotations_compose_and_keep_energy(
        x in -30.0..30.0f64,
        p in -30.0..30.0f64,
        a in -10.0..10.0f64,
        b in -10.0..10.0f64,
    ) {
        let z = PhasePoint::new(x, p);
        let ab = z.rotated(a).rotated(b);
        let direct = z.rotated(a + b);
        prop_assert!(ab.distance(&direct) < 1e-9 * (1.0 + z.energy()));
        prop_assert!((z.rotated(a).energy() - z.energy()).abs() < 1e-9 * (1.0 + z.energy()));
    }

    #[test]
    fn initial_energy_density_is_nonnegative(e in 0.0..2000.0f64, e0 in 0.0..500.0f64) {
        let f = energy_pdf_initial(e, e0);
        prop_assert!(f.is_finite() && f >= 0.0);
    }

    #[test]
    fn bessel_i0_dominates_its_leading_terms(z in 0.0..200.0f64) {
        let lower = 1.0 + z * z / 4.0 + z.powi(4) / 64.0;
        prop_assert!(bessel_i0(z) >= lower * (1.0 - 1e-14));
        prop_assert!(bessel_i0(z + 0.01) > bessel_i0(z));
    }

    #[test]
    fn clicks_file_round_trips(
        rows in prop::collection::vec(
            prop::collection::vec((any::<f64>(), -50i64..50, -50i64..50, any::<f64>(), any::<f64>()), 0..10),
            1..5,
        ),
    ) {
        let trajs: Vec<Trajectory> = rows
            .iter()
            .enumerate()
            .map(|(i, cs)| {
                let clicks = cs
                    .iter()
                    .map(|&(t, j, k, x, p)| ClickEvent { t: finite(t), j, k, x: finite(x), p: finite(p) })
                    .collect();
                trajectory(i as u64, clicks)
            })
            .collect();
        let (hash, back) = parse_clicks(&format_clicks("abc123", &trajs)).unwrap();
        prop_assert_eq!(hash, "abc123");
        let expected: Vec<ClickRecord> = trajs
            .iter()
            .flat_map(|tr| {
                tr.clicks.iter().map(move |c| ClickRecord {
                    traj_index: tr.index,
                    t: c.t,
                    j: c.j,
                    k: c.k,
                    x: c.x,
                    p: c.p,
                })
            })
            .collect();
        prop_assert_eq!(back, expected);
    }

    #[test]
    fn trajectory_seeds_are_distinct(m in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        prop_assert_ne!(trajectory_seed(m, a), trajectory_seed(m, b));
        prop_assert_ne!(trajectory_seed(m, a), trajectory_seed(m.wrapping_add(1), a));
    }
}

fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coherent_overlap_matches_gaussian_law(
        xa in -8.0..8.0f64, pa in -8.0..8.0f64,
        xb in -8.0..8.0f64, pb in -8.0..8.0f64,
    ) {
        let grid = Grid::new(-20.0, 20.0, 1024).unwrap();
        let a = coherent_state(PhasePoint::new(xa, pa), FRAC_1_SQRT_2, &grid).unwrap();
        let b = coherent_state(PhasePoint::new(xb, pb), FRAC_1_SQRT_2, &grid).unwrap();
        let numeric = a.inner(&b).norm_sqr();
        let analytic = (-((xa - xb).powi(2) + (pa - pb).powi(2)) / 2.0).exp();
        prop_assert!((numeric - analytic).abs() < 1e-9, "{numeric} vs {analytic}");
    }

    #[test]
    fn no_jump_step_contracts_then_normalizes(
        x in -3.0..3.0f64,
        p in -3.0..3.0f64,
        gamma in 0.1..3.0f64,
    ) {
        let grid = Grid::new(-16.0, 16.0, 256).unwrap();
        let geom = LatticeGeometry::new(1.5, 1.5, FRAC_1_SQRT_2, gamma, (-3, 3), (-3, 3)).unwrap();
        let lattice = DetectorLattice::sample(geom, &grid).unwrap();
        let psi = coherent_state(PhasePoint::new(x, p), FRAC_1_SQRT_2, &grid).unwrap();
        let dt = 0.005;
        let step = no_jump_step(&psi, &lattice, dt).unwrap();

        prop_assert!((step.state.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!(step.pre_norm <= 1.0 + 1e-12);
        let weight: f64 = step.overlaps.values().iter().map(Complex64::norm_sqr).sum();
        prop_assert!((step.total_jump_prob - gamma * dt * weight).abs() < 1e-15);
        // To first order the norm loss is the jump probability.
        let loss = 1.0 - step.pre_norm * step.pre_norm;
        prop_assert!((loss - step.total_jump_prob).abs() < 2.0 * step.total_jump_prob.powi(2) + 1e-12);
    }
}

#[test]
fn free_rotation_is_periodic() {
    let z = PhasePoint::new(3.0, -1.0);
    assert!(z.rotated(2.0 * PI).distance(&z) < 1e-12);
}
