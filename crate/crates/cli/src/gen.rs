//! The `gen` subcommand: procedurally generate maze scenarios and save
//! them as ordinary scenario JSON files, ready for `run` or `sweep`.

use std::path::Path;

use dualnav_core::export::write_atomic;
use dualnav_core::scenario_gen::{generate, GenSpec};
use dualnav_core::world::scenario_to_json;

use crate::CliError;

pub struct GenParams {
    pub seed: u64,
    pub count: u32,
    pub size: Option<usize>,
    pub rooms: Option<usize>,
    pub width: Option<usize>,
    pub junctions: Option<usize>,
    pub min_geodesic: Option<f64>,
    pub resolution: Option<f64>,
}

impl GenParams {
    fn spec_for(&self, seed: u64) -> GenSpec {
        let d = GenSpec::default();
        GenSpec {
            seed,
            size: self.size.unwrap_or(d.size),
            room_count: self.rooms.unwrap_or(d.room_count),
            corridor_width: self.width.unwrap_or(d.corridor_width),
            junction_target: self.junctions.unwrap_or(d.junction_target),
            min_geodesic_m: self.min_geodesic.unwrap_or(d.min_geodesic_m),
            resolution_m: self.resolution.unwrap_or(d.resolution_m),
        }
    }
}

/// Seeds probed per requested maze before generation gives up. Individual
/// seeds can fail legitimately (the carver cannot always hit the junction
/// target), so the command scans upward instead of failing on one seed.
const ATTEMPTS_PER_MAZE: u64 = 1000;

pub fn execute(params: &GenParams, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let mut seed = params.seed;
    let budget = ATTEMPTS_PER_MAZE * u64::from(params.count.max(1));
    let mut attempts = 0u64;
    let mut made_count = 0u32;
    let mut last_err = None;
    while made_count < params.count {
        if attempts >= budget {
            return Err(last_err.expect("attempt budget only spends on failures"));
        }
        attempts += 1;
        let spec = params.spec_for(seed);
        seed = seed.wrapping_add(1);
        match generate(&spec) {
            Ok(made) => {
                let path = out.join(format!("{}.json", made.name));
                write_atomic(&path, scenario_to_json(&made.spec).as_bytes())?;
                println!("{} -> {}", made.name, path.display());
                made_count += 1;
            }
            Err(err) => last_err = Some(err.into()),
        }
    }
    Ok(())
}
