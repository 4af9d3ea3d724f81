use std::time::Instant;

use fusion_pollination::control::Classifier;
use fusion_pollination::foraging::{run_season, ColonyParams, SeasonSetup};
use fusion_pollination::landscape::{derive_patches, parse_map, PatchParams, DESK_MAP};
use fusion_pollination::rng::{derive_seed, TAG_WEATHER};
use fusion_pollination::scouting::ScoutParams;
use fusion_pollination::supervisor::{run_fi_loop, FiInputs, UserConfig};
use fusion_pollination::weather::{synth_weather, ClimateProfile};

/// Mean desk coverage over seeds for scout settings taken from the
/// environment (`STEPS`, `SIGMA`, `RANGE`, `SEEDS`). Pass `fi` to run the
/// supervisor loop as well.
fn main() {
    let fi = std::env::args().any(|a| a == "fi");
    let grid = parse_map(DESK_MAP).unwrap();
    let pp = PatchParams::default();
    let patches = derive_patches(&grid, &pp);
    let colony = ColonyParams::default();
    let env = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let d = ScoutParams::default();
    let scout = ScoutParams {
        steps_per_hour: env("STEPS", d.steps_per_hour as f64) as usize,
        turn_sigma: env("SIGMA", d.turn_sigma),
        max_range: env("RANGE", d.max_range),
        ..d.clone()
    };
    let nseeds = env("SEEDS", 10.0) as u64;
    let (mut sc, mut sd) = (0.0, 0.0);
    for seed in 1..=nseeds {
        let t = Instant::now();
        let weather = synth_weather(derive_seed(seed, TAG_WEATHER), &ClimateProfile::default());
        let setup = SeasonSetup {
            grid: &grid,
            patches: &patches,
            weather: &weather,
            colony: &colony,
            scout: &scout,
            cadence: 7,
        };
        let s = run_season(&setup, None, seed);
        sc += s.totals.covered_area_fraction;
        sd += s.detected_fraction();
        print!(
            "seed {seed}: cov {:.3} det {:.3} visits {} ({:?})",
            s.totals.covered_area_fraction,
            s.detected_fraction(),
            s.totals.total_visits,
            t.elapsed()
        );
        if fi {
            let t = Instant::now();
            let inputs = FiInputs {
                grid: &grid,
                patch_params: &pp,
                weather: &weather,
                colony: &colony,
                scout: &scout,
                cadence: 7,
            };
            let o = run_fi_loop(&inputs, &Classifier::default(), &UserConfig::default(), seed).unwrap();
            print!(
                " | fi cov {:.3} det {:.3} visits {} patches {} iters {} loss {} -> {} ctrl ({}, {}) ({:?})",
                o.fi.totals.covered_area_fraction,
                o.fi.detected_fraction(),
                o.fi.totals.total_visits,
                o.plan.placed_patches.len(),
                o.plan.iterations_used,
                o.trace.rows[0].loss,
                o.plan.final_loss,
                o.plan.env_control.temp_uplift,
                o.plan.env_control.extra_light_hours,
                t.elapsed()
            );
        }
        println!();
    }
    println!("mean cov {:.3} det {:.3}", sc / nseeds as f64, sd / nseeds as f64);
}
