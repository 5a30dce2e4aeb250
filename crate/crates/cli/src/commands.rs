use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use handcontact::config::RunConfig;
use handcontact::contact::{contact_maps, ContactMap, MeshSide};
use handcontact::dataset::{make_dataset, Dataset};
use handcontact::experiment::{evaluate_refinement, refine_dataset, roundtrip_dataset, RoundtripOutcome};
use handcontact::io::{load_mesh, save_mesh};
use handcontact::loss::{Objective, Targets};
use handcontact::metrics::{evaluate_batch, BatchReport, EvalCase};
use handcontact::optim::{loss_trace_csv, optimize as run_optimizer};
use handcontact::rng::rng_for;
use handcontact::synthetic::{synthetic_hand, synthetic_hand_with_shape};
use handcontact::target::{extract_features, resolve_targets, TargetSource};
use handcontact::{HandModel, HandParams, TriMesh};
use rand::seq::index::sample;
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{EvaluateArgs, ExportHandArgs, FeaturesArgs, OptimizeArgs, OutputArgs, PerturbArgs, RoundtripArgs, RunArgs};

/// Problems with the invocation itself; these exit with status 2.
#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("output directory {} is not empty; pass --force to overwrite", .0.display())]
    OutputExists(PathBuf),
    #[error("invalid --targets {0:?}: expected file:OBJECT_MAP[,HAND_MAP], reference:PARAMS or object-only:OBJECT_MAP")]
    BadTargets(String),
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(UsageError::MissingInput(path.to_path_buf()).into())
    }
}

fn prepare_output(output: &OutputArgs) -> Result<PathBuf> {
    let dir = &output.out;
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if occupied && !output.force {
            return Err(UsageError::OutputExists(dir.clone()).into());
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.clone())
}

/// Config from `--config` (or defaults) with `--seed` applied to every stream.
fn load_config(run: &RunArgs) -> Result<(RunConfig, u64)> {
    let mut config = match &run.config {
        Some(path) => {
            require(path)?;
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    let seed = run.seed.unwrap_or(config.optim.seed);
    config.optim.seed = seed;
    config.perturb.seed = seed;
    Ok((config, seed))
}

fn load_model(run: &RunArgs, manifest: &mut RunManifest) -> Result<HandModel> {
    match &run.hand_model {
        Some(path) => {
            require(path)?;
            manifest.input("hand_model", path);
            Ok(HandModel::load(path)?)
        }
        None => Ok(synthetic_hand()),
    }
}

fn parse_targets(raw: &str) -> Result<TargetSource> {
    let bad = || UsageError::BadTargets(raw.to_string());
    let (kind, rest) = raw.split_once(':').ok_or_else(bad)?;
    if rest.is_empty() {
        return Err(bad().into());
    }
    let source = match kind {
        "file" => {
            let mut parts = rest.splitn(2, ',');
            let object = PathBuf::from(parts.next().ok_or_else(bad)?);
            let hand = parts.next().map(PathBuf::from);
            require(&object)?;
            if let Some(h) = &hand {
                require(h)?;
            }
            TargetSource::GroundTruthFile { object, hand }
        }
        "reference" => {
            let path = Path::new(rest);
            require(path)?;
            TargetSource::FromReferencePose(HandParams::load(path)?)
        }
        "object-only" => {
            let path = Path::new(rest);
            require(path)?;
            TargetSource::ObjectOnly(ContactMap::load_for(path, MeshSide::Object)?)
        }
        _ => return Err(bad().into()),
    };
    Ok(source)
}

fn write_text(dir: &Path, name: &str, text: &str, manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    manifest.output(name);
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, manifest: &mut RunManifest) -> Result<()> {
    write_text(dir, name, &serde_json::to_string_pretty(value)?, manifest)
}

fn save_maps(dir: &Path, stage: &str, object: &TriMesh, hand: &TriMesh, run: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let state = contact_maps(object, hand, &run.capsule)?;
    for (side, map) in [("object", &state.object), ("hand", &state.hand)] {
        let name = format!("contact_{stage}_{side}.json");
        map.save(&dir.join(&name))?;
        manifest.output(&name);
    }
    Ok(())
}

/// A seeded subset of the object vertices with the matching target values.
fn subsample_object(object: &TriMesh, targets: &Targets, n: usize, seed: u64) -> Result<(TriMesh, Targets)> {
    let mut indices = if n >= object.len() {
        (0..object.len()).collect()
    } else {
        sample(&mut rng_for(seed, &[0x6f62_6a70]), object.len(), n).into_vec()
    };
    indices.sort_unstable();
    let values = indices.iter().map(|&i| targets.object.values[i]).collect();
    Ok((
        object.vertex_subset(&indices)?,
        Targets {
            object: ContactMap::new(MeshSide::Object, values)?,
            hand: targets.hand.clone(),
        },
    ))
}

#[derive(Serialize)]
struct OptimizeSummary {
    initial: handcontact::loss::LossTerms,
    final_terms: handcontact::loss::LossTerms,
    restart_index: usize,
    restart_losses: Vec<f64>,
}

pub fn optimize(args: &OptimizeArgs) -> Result<()> {
    let (mut config, seed) = load_config(&args.run)?;
    if let Some(n) = args.restarts {
        config.optim.n_restart = n;
    }
    config.validate()?;
    require(&args.object)?;
    require(&args.init)?;
    let source = parse_targets(&args.targets)?;
    let mut manifest = RunManifest::new("optimize", seed, config);
    let model = load_model(&args.run, &mut manifest)?;
    manifest.input("object", &args.object);
    manifest.input("init", &args.init);
    let dir = prepare_output(&args.output)?;

    let object = load_mesh(&args.object, args.scale)?;
    let init = HandParams::load(&args.init)?;
    let targets = resolve_targets(&source, &object, &model, &config.capsule)?;
    let (fit_object, fit_targets) = match args.object_points {
        Some(n) => subsample_object(&object, &targets, n, seed)?,
        None => (object.clone(), targets),
    };
    let objective = Objective::new(&model, &fit_object, &fit_targets, config.capsule, config.loss)?;
    let initial = objective.evaluate(&init)?.terms;
    let result = manifest.timed("optimize", || run_optimizer(&objective, &init, &config.optim))?;
    log::info!("loss {:.6} -> {:.6} (restart {})", initial.total, result.final_loss, result.restart_index);

    result.params.save(&dir.join("refined_params.json"))?;
    manifest.output("refined_params.json");
    let before = model.pose(&init)?;
    let after = model.pose(&result.params)?;
    save_mesh(&after.mesh, &dir.join("refined_hand.obj"), args.scale)?;
    manifest.output("refined_hand.obj");
    write_text(&dir, "loss_trace.csv", &loss_trace_csv(&result.loss_trace), &mut manifest)?;
    save_maps(&dir, "before", &object, &before.mesh, &config, &mut manifest)?;
    save_maps(&dir, "after", &object, &after.mesh, &config, &mut manifest)?;
    let summary = OptimizeSummary {
        initial,
        final_terms: result.final_terms,
        restart_index: result.restart_index,
        restart_losses: result.restart_losses,
    };
    write_json(&dir, "loss.json", &summary, &mut manifest)?;
    manifest.write(&dir)?;
    println!("{:.6} -> {:.6}", initial.total, result.final_loss);
    Ok(())
}

pub fn perturb(args: &PerturbArgs) -> Result<()> {
    let (config, seed) = load_config(&args.run)?;
    let mut manifest = RunManifest::new("perturb", seed, config);
    let model = load_model(&args.run, &mut manifest)?;
    let dataset = match (&args.dataset, args.grasps) {
        (Some(source), _) => {
            require(&source.join("manifest.json"))?;
            manifest.input("dataset", source);
            let prepared = prepare_output(&args.output)?;
            let existing = Dataset::load(source)?;
            let mut seen = std::collections::BTreeSet::new();
            let pairs: Vec<(TriMesh, HandParams)> = existing
                .samples
                .iter()
                .filter(|s| seen.insert(s.grasp))
                .map(|s| (existing.objects[s.object].clone(), s.true_params.clone()))
                .collect();
            let dataset = manifest.timed("perturb", || make_dataset(&model, &pairs, &config.perturb, &config.capsule))?;
            dataset.save(&prepared)?;
            dataset
        }
        (None, Some(n)) => {
            let prepared = prepare_output(&args.output)?;
            let dataset = manifest.timed("synthesize", || roundtrip_dataset(&model, n, &config, seed))?;
            dataset.save(&prepared)?;
            dataset
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    manifest.output("manifest.json");
    manifest.write(&args.output.out)?;
    println!("{} samples written to {}", dataset.samples.len(), args.output.out.display());
    Ok(())
}

fn write_report(dir: &Path, report: &BatchReport, manifest: &mut RunManifest) -> Result<()> {
    write_text(dir, "metrics.csv", &report.to_csv(), manifest)?;
    write_text(dir, "report.md", &report.to_markdown(), manifest)?;
    write_text(dir, "report.json", &report.to_json(), manifest)?;
    Ok(())
}

fn refined_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("sample_{index:04}.json"))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (config, seed) = load_config(&args.run)?;
    config.validate()?;
    let mut manifest = RunManifest::new("evaluate", seed, config);
    let model = load_model(&args.run, &mut manifest)?;
    let report = if let (Some(dataset_dir), Some(refined_dir)) = (&args.dataset, &args.refined) {
        require(&dataset_dir.join("manifest.json"))?;
        require(refined_dir)?;
        manifest.input("dataset", dataset_dir);
        manifest.input("refined", refined_dir);
        let dataset = Dataset::load(dataset_dir)?;
        let refined = (0..dataset.samples.len())
            .map(|k| {
                let path = refined_path(refined_dir, k);
                require(&path)?;
                Ok(HandParams::load(&path)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let cases: Vec<EvalCase> = dataset
            .samples
            .iter()
            .zip(&refined)
            .map(|(s, r)| EvalCase {
                object: &dataset.objects[s.object],
                truth: &s.true_params,
                truth_contact: &s.target_object_contact,
                before: Some(&s.perturbed_params),
                after: r,
            })
            .collect();
        manifest.timed("evaluate", || evaluate_batch(&model, &cases, &config.metrics))?
    } else {
        let (Some(object_path), Some(truth_path), Some(pred_path)) = (&args.object, &args.truth, &args.pred) else {
            unreachable!("clap requires --object with --truth and --pred");
        };
        for (role, path) in [("object", object_path), ("truth", truth_path), ("pred", pred_path)] {
            require(path)?;
            manifest.input(role, path);
        }
        let object = load_mesh(object_path, args.scale)?;
        let truth = HandParams::load(truth_path)?;
        let pred = HandParams::load(pred_path)?;
        let before = match &args.before {
            Some(path) => {
                require(path)?;
                manifest.input("before", path);
                Some(HandParams::load(path)?)
            }
            None => None,
        };
        let truth_contact = match &args.truth_contact {
            Some(path) => {
                require(path)?;
                manifest.input("truth_contact", path);
                ContactMap::load_for(path, MeshSide::Object)?
            }
            None => contact_maps(&object, &model.pose(&truth)?.mesh, &config.capsule)?.object,
        };
        let case = EvalCase {
            object: &object,
            truth: &truth,
            truth_contact: &truth_contact,
            before: before.as_ref(),
            after: &pred,
        };
        manifest.timed("evaluate", || evaluate_batch(&model, &[case], &config.metrics))?
    };
    let dir = prepare_output(&args.output)?;
    write_report(&dir, &report, &mut manifest)?;
    manifest.write(&dir)?;
    print!("{}", report.to_markdown());
    Ok(())
}

pub fn features(args: &FeaturesArgs) -> Result<()> {
    let (config, seed) = load_config(&args.run)?;
    require(&args.object)?;
    require(&args.init)?;
    let mut manifest = RunManifest::new("features", seed, config);
    let model = load_model(&args.run, &mut manifest)?;
    manifest.input("object", &args.object);
    manifest.input("init", &args.init);
    let dir = prepare_output(&args.output)?;
    let object = load_mesh(&args.object, args.scale)?;
    let hand = model.pose(&HandParams::load(&args.init)?)?.mesh;
    let features = manifest.timed("features", || extract_features(&object, &hand, args.samples, seed))?;
    write_text(&dir, "features.csv", &features.to_csv(), &mut manifest)?;
    write_text(&dir, "features.json", &features.to_json(), &mut manifest)?;
    manifest.write(&dir)?;
    println!("{} points written to {}", features.points.len(), dir.display());
    Ok(())
}

pub fn roundtrip(args: &RoundtripArgs) -> Result<()> {
    let (mut config, seed) = load_config(&args.run)?;
    if let Some(n) = args.restarts {
        config.optim.n_restart = n;
    }
    config.validate()?;
    let mut manifest = RunManifest::new("roundtrip", seed, config);
    let model = load_model(&args.run, &mut manifest)?;
    let dir = prepare_output(&args.output)?;

    let dataset = manifest.timed("synthesize", || roundtrip_dataset(&model, args.grasps, &config, seed))?;
    let results = manifest.timed("optimize", || refine_dataset(&model, &dataset, &config, seed))?;
    let report = manifest.timed("evaluate", || evaluate_refinement(&model, &dataset, &results, &config))?;

    dataset.save(&dir.join("dataset"))?;
    manifest.output("dataset");
    let refined_dir = dir.join("refined");
    std::fs::create_dir_all(&refined_dir).with_context(|| format!("creating {}", refined_dir.display()))?;
    for (k, r) in results.iter().enumerate() {
        r.params.save(&refined_path(&refined_dir, k))?;
    }
    manifest.output("refined");
    let outcome = RoundtripOutcome {
        dataset,
        results,
        report,
    };
    write_report(&dir, &outcome.report, &mut manifest)?;
    write_text(&dir, "losses.csv", &outcome.losses_csv(), &mut manifest)?;
    write_json(&dir, "summary.json", &outcome.summary(), &mut manifest)?;
    manifest.write(&dir)?;
    print!("{}", outcome.report.to_markdown());
    Ok(())
}

pub fn export_hand(args: &ExportHandArgs) -> Result<()> {
    let model = if args.with_shape {
        synthetic_hand_with_shape()
    } else {
        synthetic_hand()
    };
    let mut manifest = RunManifest::new("export-hand", 0, RunConfig::default());
    let dir = prepare_output(&args.output)?;
    model.save(&dir.join("hand_model.json"))?;
    manifest.output("hand_model.json");
    let rest = model.zero_params();
    rest.save(&dir.join("rest_params.json"))?;
    manifest.output("rest_params.json");
    save_mesh(&model.pose(&rest)?.mesh, &dir.join("rest_hand.obj"), 1.0)?;
    manifest.output("rest_hand.obj");
    manifest.write(&dir)?;
    println!("hand model written to {}", dir.display());
    Ok(())
}
