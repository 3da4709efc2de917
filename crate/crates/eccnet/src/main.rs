use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use eccnet::dump::{dump_trial, write_json};
use eccnet::harness::{run_experiment, worker_count, AttentionDump, RunConfig, Saliency};
use eccnet::output::emit_outputs;
use eccnet::reference::{check_reference, read_reference, REFERENCE_FILE};
use eccnet::verify::{self, Check};
use eccnet::weights::load_bundle;
use eccnet_core::attention::BlendScheme;
use eccnet_core::backbone::{estimate_rf_profile, BackboneConfig};
use eccnet_core::search::Searcher;
use eccnet_core::stimuli::{generate, Condition, Experiment};

const REFERENCE_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "eccnet", version, about = "Eccentricity-dependent visual search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate stimuli as PGM files plus a JSON manifest.
    Gen {
        #[arg(long)]
        experiment: u8,
        /// Condition letter or name; both conditions if omitted.
        #[arg(long)]
        condition: Option<String>,
        #[arg(long)]
        trials_per_condition: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write results, summary, scanpaths and a plot.
    Run {
        #[arg(long)]
        experiment: u8,
        #[arg(long)]
        condition: Option<String>,
        #[arg(long, value_enum, default_value_t = SearcherArg::Eccnet)]
        searcher: SearcherArg,
        /// Uniform pooling instead of eccentricity-dependent pooling.
        #[arg(long)]
        no_ecc: bool,
        /// Top-down modulation from the last tapped layer only.
        #[arg(long)]
        single_layer_topdown: bool,
        /// 1, 2, 3 or `grouped`; no saliency if omitted.
        #[arg(long)]
        saliency_scheme: Option<String>,
        #[arg(long)]
        trials_per_condition: Option<usize>,
        #[arg(long)]
        max_fixations: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Weight bundle directory (manifest.json + weights.bin).
        #[arg(long, env = "ECCNET_WEIGHTS")]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Dump attention maps of trials with index below N.
        #[arg(long, value_name = "N")]
        dump_attention: Option<usize>,
    },
    /// Measure receptive-field sizes of a pooling layer.
    RfProfile {
        #[arg(long)]
        layer: u8,
        #[arg(long, default_value_t = 1200)]
        image_px: usize,
    },
    /// Run the built-in numeric fixtures; with weights, also their reference activations.
    Verify {
        #[arg(long, env = "ECCNET_WEIGHTS")]
        weights: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SearcherArg {
    Eccnet,
    Chance,
    Pixelmatch,
}

impl From<SearcherArg> for Searcher {
    fn from(s: SearcherArg) -> Self {
        match s {
            SearcherArg::Eccnet => Searcher::EccNet,
            SearcherArg::Chance => Searcher::Chance,
            SearcherArg::Pixelmatch => Searcher::PixelMatch,
        }
    }
}

fn parse_saliency(s: Option<&str>) -> anyhow::Result<Saliency> {
    Ok(match s {
        None => Saliency::Off,
        Some("grouped") => Saliency::Grouped,
        Some(id) => Saliency::Fixed(BlendScheme::from_id(
            id.parse().with_context(|| format!("saliency scheme {id:?}"))?,
        )?),
    })
}

fn conditions(exp: Experiment, arg: Option<&str>) -> anyhow::Result<Vec<Condition>> {
    Ok(match arg {
        Some(s) => vec![Condition::parse(exp, s)?],
        None => exp.conditions().to_vec(),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Gen {
            experiment,
            condition,
            trials_per_condition,
            seed,
            out,
        } => {
            let exp = Experiment::from_number(experiment)?;
            let mut plan = exp.plan();
            if let Some(n) = trials_per_condition {
                plan = plan.with_trials(n);
            }
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut records = Vec::new();
            for cond in conditions(exp, condition.as_deref())? {
                for t in plan.trials(cond, seed) {
                    let spec = generate(cond, t.set_size, t.seed)?;
                    let stem = eccnet::harness::trial_id(&t);
                    records.push(dump_trial(&out, &stem, &spec)?);
                }
            }
            write_json(&out.join("manifest.json"), &records)?;
            println!("wrote {} trials to {}", records.len(), out.display());
        }
        Command::Run {
            experiment,
            condition,
            searcher,
            no_ecc,
            single_layer_topdown,
            saliency_scheme,
            trials_per_condition,
            max_fixations,
            seed,
            weights,
            out,
            dump_attention,
        } => {
            let exp = Experiment::from_number(experiment)?;
            let mut cfg = RunConfig::new(exp, searcher.into());
            cfg.conditions = conditions(exp, condition.as_deref())?;
            cfg.options.no_ecc = no_ecc;
            cfg.options.single_layer = single_layer_topdown;
            cfg.options.max_fixations = max_fixations;
            cfg.saliency = parse_saliency(saliency_scheme.as_deref())?;
            cfg.trials_per_condition = trials_per_condition;
            cfg.master_seed = seed;
            let loaded = match (&weights, cfg.searcher) {
                (Some(dir), Searcher::EccNet) => {
                    Some(load_bundle(dir).with_context(|| format!("loading {}", dir.display()))?)
                }
                (None, Searcher::EccNet) => bail!("--searcher eccnet needs --weights <bundle dir> or ECCNET_WEIGHTS"),
                _ => None,
            };
            let dump = dump_attention.map(|trials| AttentionDump {
                dir: out.join("attention"),
                trials,
            });
            if let Some(d) = &dump {
                std::fs::create_dir_all(&d.dir).with_context(|| format!("creating {}", d.dir.display()))?;
            }
            let report = run_experiment(&cfg, loaded.as_ref(), worker_count()?, dump.as_ref())?;
            emit_outputs(&report, &out)?;
            for c in &report.conditions {
                let rts: Vec<String> = c
                    .set_sizes
                    .iter()
                    .map(|s| {
                        format!(
                            "{}:{}",
                            s.set_size,
                            s.mean_rt_ms.map_or("-".into(), |m| format!("{m:.0}"))
                        )
                    })
                    .collect();
                println!(
                    "{} ({}) slope {} ms/item, RT {}",
                    c.condition,
                    if c.hard { "hard" } else { "easy" },
                    c.slope_ms_per_item.map_or("-".into(), |s| format!("{s:.1}")),
                    rts.join(" ")
                );
            }
            println!(
                "asymmetry index {}",
                report.asymmetry_index.map_or("-".into(), |a| format!("{a:.3}"))
            );
        }
        Command::RfProfile { layer, image_px } => {
            let pts = estimate_rf_profile(&BackboneConfig::default(), layer, image_px)?;
            println!("distance_px,rf_px,eccentricity_dva,rf_dva");
            for p in pts {
                println!(
                    "{},{},{:.4},{:.4}",
                    p.distance_px, p.rf_px, p.eccentricity_dva, p.rf_dva
                );
            }
        }
        Command::Verify { weights } => {
            let mut checks = verify::run_all();
            if let Some(dir) = weights {
                checks.push(reference_check(&dir));
            }
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn reference_check(dir: &std::path::Path) -> Check {
    let result = (|| {
        let w = load_bundle(dir)?;
        let r = read_reference(&dir.join(REFERENCE_FILE))?;
        check_reference(&w.backbone, &r).map(|c| (c, w.blob_sha256))
    })();
    match result {
        Ok((c, sha)) => Check {
            name: "reference",
            passed: c.layer17_max_rel <= REFERENCE_TOLERANCE,
            detail: format!(
                "layer 17 max rel error {:.2e}, preprocessing max abs {:.2e}, blob sha256 {sha}",
                c.layer17_max_rel, c.preprocess_max_abs
            ),
        },
        Err(e) => Check {
            name: "reference",
            passed: false,
            detail: format!("{e:#}"),
        },
    }
}
