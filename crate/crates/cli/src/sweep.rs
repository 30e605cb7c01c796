//! The `sweep` subcommand: the same scenario set under a fast-only row, a
//! slow-only row, and one dual row per requested cadence ratio. The table
//! lands on stdout; `sweep.csv` holds the same numbers plus wall-clock.

use std::path::Path;

use dualnav_core::export::write_atomic;
use dualnav_core::metrics::{aggregate, episode_metrics, MetricsReport};
use dualnav_core::policy::{ScriptedSuiteProvider, SlowKind};
use dualnav_core::scheduler::{run_suite, Parallelism};
use dualnav_core::world::EpisodeSpec;

use crate::config::{Effective, ModeChoice, PolicyChoice};
use crate::CliError;

struct Row {
    label: String,
    slow: SlowKind,
    mode: ModeChoice,
    ratio: u32,
}

fn rows(eff: &Effective, ratios: &[u32]) -> Vec<Row> {
    let mut rows = vec![
        Row {
            label: "fast_only".into(),
            slow: SlowKind::None,
            mode: ModeChoice::FastOnly,
            ratio: eff.ratio,
        },
        Row {
            label: "slow_only".into(),
            slow: eff.slow_kind(),
            mode: ModeChoice::SlowOnly,
            ratio: eff.ratio,
        },
    ];
    for &ratio in ratios {
        rows.push(Row {
            label: format!("dual_k{ratio}"),
            slow: eff.slow_kind(),
            mode: ModeChoice::Dual,
            ratio,
        });
    }
    rows
}

pub fn execute(
    episodes: &[(String, EpisodeSpec)],
    eff: &Effective,
    ratios: &[u32],
    out: &Path,
    parallelism: Parallelism,
) -> Result<Vec<(String, MetricsReport)>, CliError> {
    if eff.policy == PolicyChoice::Scripted {
        return Err(CliError::Config(crate::config::ConfigError::Invalid(
            "a sweep compares planner rows; pass --policy oracle or --policy remote".into(),
        )));
    }
    let mut reports = Vec::new();
    for row in rows(eff, ratios) {
        let row_eff = Effective { mode: row.mode, ratio: row.ratio, ..eff.clone() };
        let econfig = row_eff.episode_config();
        let provider =
            ScriptedSuiteProvider { fast_cfg: eff.provider().fast_cfg, slow: row.slow };
        let entries = run_suite(episodes, &provider, &econfig, &eff.seeds, parallelism)?;
        let mut records = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            let spec = &episodes[i / eff.seeds.len()].1;
            records.push(episode_metrics(&entry.scenario, entry.seed, spec, &entry.result)?);
        }
        reports.push((row.label, aggregate(&records)?));
    }

    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("sweep.csv"), csv(&reports).as_bytes())?;
    print!("{}", table(&reports));
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(reports)
}

fn table(reports: &[(String, MetricsReport)]) -> String {
    let mut s = format!(
        "{:<12} {:>4} {:>8} {:>7} {:>7} {:>7} {:>7} {:>9}\n",
        "row", "n", "NE_m", "SR", "OS", "SPL", "nDTW", "AT_s"
    );
    for (label, r) in reports {
        s.push_str(&format!(
            "{:<12} {:>4} {:>8.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>9.4}\n",
            label, r.n_episodes, r.ne_m, r.sr, r.os, r.spl, r.ndtw, r.at_s
        ));
    }
    s
}

fn csv(reports: &[(String, MetricsReport)]) -> String {
    let mut s = String::from("row,n_episodes,ne_m,sr,os,spl,ndtw,steps,at_s\n");
    for (label, r) in reports {
        s.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            label, r.n_episodes, r.ne_m, r.sr, r.os, r.spl, r.ndtw, r.steps, r.at_s
        ));
    }
    s
}
