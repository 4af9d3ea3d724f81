use std::collections::BTreeMap;

use proptest::prelude::*;

use fusion_pollination::control::{
    apply_proposals, classify, extract_features, propose_patches, Classifier, CoverageLabel, PlacementPolicy,
    RegionFeatures, SoftmaxModel,
};
use fusion_pollination::foraging::{simulate_day, ColonyParams};
use fusion_pollination::landscape::{
    derive_patches, detection_probability, parse_map, tile_regions, CellGrid, CellKind, PatchParams,
};
use fusion_pollination::metrics::pii;
use fusion_pollination::scouting::{merge_reports, run_scouting, ScoutParams, ScoutReport};
use fusion_pollination::weather::{foraging_hours, DayWeather, EnvControl, HoursCap};

/// Random small map with a hive at a random cell.
fn arb_map() -> impl Strategy<Value = String> {
    (4usize..12, 4usize..12)
        .prop_flat_map(|(w, h)| {
            (
                Just((w, h)),
                proptest::collection::vec(prop_oneof![6 => Just('.'), 3 => Just('Y'), 1 => Just('#')], w * h),
                0..w * h,
            )
        })
        .prop_map(|((w, _h), mut cells, hive)| {
            cells[hive] = 'H';
            cells
                .chunks(w)
                .map(|r| r.iter().collect::<String>())
                .collect::<Vec<_>>()
                .join("\n")
        })
}

fn grid(text: &str) -> CellGrid {
    parse_map(text).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_text_round_trips(text in arb_map()) {
        let g = grid(&text);
        let again = grid(&g.to_map_string());
        prop_assert_eq!(g, again);
    }

    #[test]
    fn patch_invariants(text in arb_map()) {
        let g = grid(&text);
        let patches = derive_patches(&g, &PatchParams::default());
        let mut seen = vec![false; g.len()];
        for (i, p) in patches.iter().enumerate() {
            prop_assert_eq!(p.id, i);
            prop_assert_eq!(p.area, p.cell_members.len() as f64 * g.cell_size() * g.cell_size());
            prop_assert!((0.0..=1.0).contains(&p.detection_probability));
            prop_assert!(p.distance_from_hive >= 0.0);
            for &m in &p.cell_members {
                prop_assert!(!seen[m]);
                seen[m] = true;
                prop_assert_eq!(g.kind(m), CellKind::Crop);
            }
        }
        prop_assert_eq!(seen.iter().filter(|s| **s).count(), g.count(CellKind::Crop));
    }

    #[test]
    fn detection_probability_is_monotone(kappa in 0.001f64..2.0, a in 0usize..500, b in 0usize..500) {
        let (pa, pb) = (detection_probability(kappa, a), detection_probability(kappa, b));
        if a < b {
            prop_assert!(pa <= pb);
        }
        prop_assert!((0.0..=1.0).contains(&pa));
        prop_assert_eq!(detection_probability(kappa, 0), 0.0);
    }

    #[test]
    fn tiling_covers_every_cell_once(text in arb_map(), rows in 1usize..5, cols in 1usize..5) {
        let g = grid(&text);
        prop_assume!(rows <= g.height() && cols <= g.width());
        let t = tile_regions(&g, rows, cols).unwrap();
        prop_assert_eq!(t.region_count(), rows * cols);
        let by_region = t.cells_by_region();
        prop_assert_eq!(by_region.iter().map(Vec::len).sum::<usize>(), g.len());
        for (r, cells) in by_region.iter().enumerate() {
            prop_assert!(!cells.is_empty());
            for &c in cells {
                prop_assert_eq!(t.region_of(c), r);
            }
        }
    }

    #[test]
    fn foraging_hours_gate_and_cap(
        temp in -10.0f64..40.0,
        sun in 0.0f64..24.0,
        uplift in 0.0f64..4.0,
        extra in 0.0f64..4.0,
    ) {
        let dw = DayWeather { day: 150, max_temp: temp, sunshine_hours: sun };
        let cap = HoursCap::default();
        let h = foraging_hours(&dw, None, cap.base);
        prop_assert!((0.0..=cap.base).contains(&h));
        prop_assert_eq!(h > 0.0, temp >= 15.0 && sun > 0.0);
        let ctrl = EnvControl { temp_uplift: uplift, extra_light_hours: extra, active_window: (1, 365) };
        let hc = foraging_hours(&dw, Some(&ctrl), cap.for_day(150, Some(&ctrl)));
        prop_assert!(hc >= h);
        prop_assert!(hc <= cap.max);
        let noop = EnvControl { temp_uplift: 0.0, extra_light_hours: 0.0, active_window: (1, 365) };
        prop_assert_eq!(foraging_hours(&dw, Some(&noop), cap.for_day(150, Some(&noop))), h);
    }

    #[test]
    fn day_record_conserves_visits(
        n_patches in 1usize..12,
        temp in 10.0f64..30.0,
        sun in 0.0f64..14.0,
        workers in 0u64..20_000,
        per_trip in 1u64..4,
        seed in any::<u64>(),
    ) {
        let g = grid(&format!("H{}\n", "Y.".repeat(n_patches)));
        let patches = derive_patches(&g, &PatchParams::default());
        let colony = ColonyParams { initial_workers: workers, patches_per_trip: per_trip, ..ColonyParams::default() };
        let dw = DayWeather { day: 100, max_temp: temp, sunshine_hours: sun };
        let rec = simulate_day(&patches, &dw, None, &colony, seed, 100);
        prop_assert_eq!(rec.visits_per_patch.values().sum::<u64>(), rec.completed_trips * per_trip);
        prop_assert!(rec.foraging_period >= 0.0);
        prop_assert_eq!(simulate_day(&patches, &dw, None, &colony, seed, 100), rec);
    }

    #[test]
    fn pii_is_affine_and_symmetric(a in -100.0f64..100.0, b in -100.0f64..100.0, w in 0.0f64..=1.0) {
        let w2 = 1.0 - w;
        let v = pii(a, b, w, w2).unwrap();
        prop_assert_eq!(v, w * a + w2 * b);
        prop_assert_eq!(pii(b, a, w2, w).unwrap(), v);
        let x = pii(a, a, w, w2).unwrap();
        prop_assert!((x - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0));
    }

    #[test]
    fn threshold_labels_are_monotone(c1 in 0.0f64..=1.0, c2 in 0.0f64..=1.0) {
        let rule = Classifier::default();
        let f = |c| RegionFeatures { region: 0, visit_density: 0.0, coverage_fraction: c, distance_to_hive: 0.0 };
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(classify(&rule, &f(lo)) <= classify(&rule, &f(hi)));
    }

    #[test]
    fn softmax_ignores_constant_score_shift(
        w in proptest::array::uniform3(proptest::array::uniform3(-3.0f64..3.0)),
        b in proptest::array::uniform3(-3.0f64..3.0),
        shift in -50.0f64..50.0,
        x in proptest::array::uniform3(0.0f64..10.0),
    ) {
        let m = SoftmaxModel { weights: w, bias: b, mean: [0.0; 3], scale: [1.0; 3] };
        let shifted = SoftmaxModel { bias: [b[0] + shift, b[1] + shift, b[2] + shift], ..m.clone() };
        let f = RegionFeatures { region: 0, visit_density: x[0], coverage_fraction: x[1] / 10.0, distance_to_hive: x[2] };
        let (s0, s1) = (m.scores(&f.vector()), shifted.scores(&f.vector()));
        // Only compare when the shift does not create a near tie through rounding.
        let gap = |s: [f64; 3]| {
            let mut v = s.to_vec();
            v.sort_by(f64::total_cmp);
            v[2] - v[1]
        };
        prop_assume!(gap(s0) > 1e-9 && gap(s1) > 1e-9);
        prop_assert_eq!(classify(&Classifier::Softmax(m), &f), classify(&Classifier::Softmax(shifted), &f));
    }

    #[test]
    fn proposals_are_legal_and_deterministic(text in arb_map(), k in 0usize..6, low_mask in any::<u16>()) {
        let mut g = grid(&text);
        prop_assume!(g.width() >= 2 && g.height() >= 2);
        let t = tile_regions(&g, 2, 2).unwrap();
        let features = extract_features(&ScoutReport::empty(&g, 0), &t, &g).unwrap();
        let labels: BTreeMap<usize, CoverageLabel> = features
            .iter()
            .map(|f| (f.region, if low_mask >> f.region & 1 == 1 { CoverageLabel::Low } else { CoverageLabel::Normal }))
            .collect();
        let policy = PlacementPolicy::default();
        let first = propose_patches(&labels, &features, &t, &g, k, &policy);
        prop_assert!(first.len() <= k);
        prop_assert_eq!(&first, &propose_patches(&labels, &features, &t, &g, k, &policy));
        for p in &first {
            prop_assert_eq!(g.kind(p.cell), CellKind::Empty);
            prop_assert!((0.0..=1.0).contains(&p.detection_probability));
        }
        apply_proposals(&mut g, &first);
        for p in propose_patches(&labels, &features, &t, &g, k, &policy) {
            prop_assert_eq!(g.kind(p.cell), CellKind::Empty);
        }
    }
}

fn scout_params(n: usize, steps_per_hour: usize) -> ScoutParams {
    ScoutParams {
        n_scouts: n,
        steps_per_hour,
        ..ScoutParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scouting_is_deterministic_and_obstacle_safe(text in arb_map(), seed in any::<u64>(), hours in 0.0f64..3.0) {
        let g = grid(&text);
        let patches = derive_patches(&g, &PatchParams::default());
        let params = ScoutParams { record_trajectories: true, ..scout_params(6, 30) };
        let a = run_scouting(&g, &patches, &params, hours, seed);
        prop_assert_eq!(&a, &run_scouting(&g, &patches, &params, hours, seed));
        for (i, k) in g.cells().iter().enumerate() {
            if *k == CellKind::Obstacle {
                prop_assert_eq!(a.coverage[i], 0);
            }
        }
        prop_assert!((0.0..=1.0).contains(&a.covered_area_fraction));
        prop_assert!((0.0..=1.0).contains(&a.detected_patch_fraction));
        prop_assert!(a.detected_patch_ids.iter().all(|id| *id < patches.len()));

        // Every detected patch had a scout position within the sensing radius.
        let paths = a.trajectories.as_ref().unwrap();
        let cs = g.cell_size();
        for id in &a.detected_patch_ids {
            let near = paths.iter().flatten().any(|&(x, y)| {
                let (c, r) = ((x / cs).floor(), (y / cs).floor());
                patches[*id].cell_members.iter().any(|&m| {
                    let (mc, mr) = g.coords(m);
                    (mc as f64 - c).powi(2) + (mr as f64 - r).powi(2) <= params.detection_radius.powi(2)
                })
            });
            prop_assert!(near, "patch {} detected without a nearby scout", id);
        }
    }

    #[test]
    fn more_hours_never_shrink_coverage(text in arb_map(), seed in any::<u64>(), h1 in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let g = grid(&text);
        let patches = derive_patches(&g, &PatchParams::default());
        let params = scout_params(5, 30);
        let short = run_scouting(&g, &patches, &params, h1, seed);
        let long = run_scouting(&g, &patches, &params, h1 + extra, seed);
        prop_assert!(long.covered_area_fraction >= short.covered_area_fraction);
        prop_assert!(long.detected_patch_ids.is_superset(&short.detected_patch_ids));
    }

    #[test]
    fn merge_is_union(text in arb_map(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let g = grid(&text);
        let patches = derive_patches(&g, &PatchParams::default());
        let params = scout_params(4, 20);
        let a = run_scouting(&g, &patches, &params, 1.0, s1);
        let b = run_scouting(&g, &patches, &params, 1.0, s2);
        let m = merge_reports(&a, &b).unwrap();
        prop_assert!(m.covered_area_fraction >= a.covered_area_fraction.max(b.covered_area_fraction));
        let union: std::collections::BTreeSet<usize> = a.detected_patch_ids.union(&b.detected_patch_ids).copied().collect();
        prop_assert_eq!(&m.detected_patch_ids, &union);
        for i in 0..g.len() {
            prop_assert_eq!(m.coverage[i], a.coverage[i] + b.coverage[i]);
        }
        prop_assert_eq!(merge_reports(&a, &ScoutReport::empty(&g, patches.len())).unwrap(), a);
    }
}
