//! The `run` subcommand: execute every scenario/seed pair, then write the
//! metrics tables, one trajectory log per episode, and one SVG rendering
//! per episode. Everything except `timings.csv` is byte-stable across
//! reruns of the same inputs.

use std::path::Path;

use dualnav_core::export::{episode_svg, write_atomic};
use dualnav_core::metrics::{
    aggregate, episode_metrics, render_metrics_csv, render_metrics_json, render_timings_csv,
};
use dualnav_core::scheduler::{run_suite, Parallelism};
use dualnav_core::trajectory::{log_from_episode, render_jsonl};
use dualnav_core::world::EpisodeSpec;

use crate::config::Effective;
use crate::CliError;

pub fn execute(
    episodes: &[(String, EpisodeSpec)],
    eff: &Effective,
    out: &Path,
    parallelism: Parallelism,
) -> Result<(), CliError> {
    let provider = eff.provider();
    let econfig = eff.episode_config();
    let entries = run_suite(episodes, &provider, &econfig, &eff.seeds, parallelism)?;

    let logs_dir = out.join("logs");
    let svg_dir = out.join("svg");
    std::fs::create_dir_all(&logs_dir)?;
    std::fs::create_dir_all(&svg_dir)?;

    let mut records = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        // Suite order is episodes x seeds, so the spec is recoverable by
        // index even if two scenario files share a cleaned-up stem.
        let spec = &episodes[i / eff.seeds.len()].1;
        records.push(episode_metrics(&entry.scenario, entry.seed, spec, &entry.result)?);

        let log = log_from_episode(&entry.scenario, spec, entry.seed, &econfig, &entry.result);
        let stem = format!("{}_seed{}", entry.scenario, entry.seed);
        write_atomic(&logs_dir.join(format!("{stem}.jsonl")), render_jsonl(&log).as_bytes())?;
        let svg = episode_svg(&log)?;
        write_atomic(&svg_dir.join(format!("{stem}.svg")), svg.as_bytes())?;
    }

    let report = aggregate(&records)?;
    write_atomic(&out.join("metrics.csv"), render_metrics_csv(&records, &report).as_bytes())?;
    write_atomic(&out.join("metrics.json"), render_metrics_json(&records, &report)?.as_bytes())?;
    write_atomic(&out.join("timings.csv"), render_timings_csv(&records).as_bytes())?;

    println!(
        "episodes {}  NE {:.3} m  SR {:.3}  OS {:.3}  SPL {:.3}  nDTW {:.3}  steps {:.1}  AT {:.4} s",
        report.n_episodes,
        report.ne_m,
        report.sr,
        report.os,
        report.spl,
        report.ndtw,
        report.steps,
        report.at_s
    );
    println!("wrote {}", out.display());
    Ok(())
}
