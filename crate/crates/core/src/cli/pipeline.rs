// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    check_golden, dataset_path, default_menu, evaluate_class, log, predict_all, predictions_jsonl, read_text,
    text_path, use_color, valid_or_err, write_atomic, CliError, PipelineArgs,
};
use crate::design::{design_id, generate_design, parse_design, serialize_design, validate_design, GeneratorFile};
use crate::eval::{compare_models_with_models, render_text, split_dataset, ClassSplit, Table1Report};
use crate::features::{build_dataset, read_dataset, write_dataset, DatasetClass, DatasetHeader, DatasetRow};
use crate::ml::{ModelKind, Target, TrainedModel};
use crate::solver::{analyze, GoldenFile};

pub const MANIFEST_FORMAT: &str = "fastpi-manifest";

/// One replayable command: running `fastpi` with `argv` from the run
/// directory rewrites `outputs` byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestStep {
    pub step: String,
    pub argv: Vec<String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// The model behind one (window class, target) prediction. `constant` is
/// set when the training labels were single-class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub window_class: DatasetClass,
    pub target: Target,
    pub kind: ModelKind,
    pub constant: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub seed: u64,
    pub split_seed: u64,
    pub training_seeds: Vec<u64>,
    pub test_fraction: f64,
    pub config_sha256: String,
    pub design_id: String,
    pub steps: Vec<ManifestStep>,
    pub selected: Vec<Selection>,
    /// SHA-256 of every artifact, keyed by path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

struct Run {
    dir: PathBuf,
    steps: Vec<ManifestStep>,
    artifacts: BTreeMap<String, String>,
}

impl Run {
    fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.dir.join(rel), contents)?;
        self.artifacts.insert(rel.to_string(), sha256_hex(contents));
        Ok(())
    }

    fn step(&mut self, name: &str, argv: &[&str], inputs: &[&str], outputs: &[&str]) {
        let digests = |paths: &[&str]| -> BTreeMap<String, String> {
            paths.iter().map(|p| (p.to_string(), self.artifacts[*p].clone())).collect()
        };
        let (inputs, outputs) = (digests(inputs), digests(outputs));
        let mut full = vec!["fastpi".to_string()];
        full.extend(argv.iter().map(|s| s.to_string()));
        log(format_args!("{name}: {}", outputs.keys().cloned().collect::<Vec<_>>().join(", ")));
        self.steps.push(ManifestStep { step: name.to_string(), argv: full, inputs, outputs });
    }
}

fn rel(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}

fn reparse_dataset(text: &str) -> Result<(DatasetHeader, Vec<DatasetRow>), CliError> {
    Ok(read_dataset(text)?)
}

pub(super) fn cmd_pipeline(a: &PipelineArgs) -> Result<(), CliError> {
    let cfg = super::load_generator_config(a.config.as_deref())?;
    let seed = a.seed;
    let seed_s = seed.to_string();
    let fraction_s = a.test_fraction.to_string();
    let mut run = Run { dir: a.output.clone(), steps: Vec::new(), artifacts: BTreeMap::new() };

    let mut config_text = serde_json::to_string_pretty(&GeneratorFile { schema_version: "1".into(), generator: cfg.clone() })
        .expect("config serializes");
    config_text.push('\n');
    run.write("config.json", &config_text)?;
    let config_sha256 = run.artifacts["config.json"].clone();

    let design = generate_design(&cfg, seed)?;
    valid_or_err(validate_design(&design))?;
    run.write("design.json", &serialize_design(&design))?;
    run.step("generate", &["generate", "--config", "config.json", "--seed", &seed_s, "-o", "design.json"], &["config.json"], &["design.json"]);
    // downstream steps read what a replay would read
    let design = parse_design(&read_text(&run.dir.join("design.json"))?)?;

    let golden = analyze(&design)?.golden(&design, false);
    run.write("golden.json", &golden.to_json())?;
    run.step("solve", &["solve", "design.json", "-o", "golden.json"], &["design.json"], &["golden.json"]);
    let golden = GoldenFile::parse(&read_text(&run.dir.join("golden.json"))?)?;
    check_golden(&design, &golden)?;

    let sets = build_dataset(&design, &golden.violations())?;
    let mut data = Vec::new();
    let data_paths: Vec<String> = DatasetClass::ALL.iter().map(|&c| rel(&dataset_path(Path::new("data"), c))).collect();
    for (class, path) in DatasetClass::ALL.into_iter().zip(&data_paths) {
        let (header, rows) = sets.get(class);
        let text = write_dataset(header, rows);
        run.write(path, &text)?;
        data.push(reparse_dataset(&text)?);
    }
    let data_refs: Vec<&str> = data_paths.iter().map(String::as_str).collect();
    run.step("extract", &["extract", "design.json", "golden.json", "-o", "data"], &["design.json", "golden.json"], &data_refs);

    let mut splits_owned = Vec::new();
    for (class, ((header, rows), path)) in DatasetClass::ALL.into_iter().zip(data.iter().zip(&data_paths)) {
        let (train_rows, test_rows) = split_dataset(rows, a.test_fraction, seed)?;
        let (train_path, test_path) = (format!("split/{class}.train.jsonl"), format!("split/{class}.test.jsonl"));
        let (train_text, test_text) = (write_dataset(header, &train_rows), write_dataset(header, &test_rows));
        run.write(&train_path, &train_text)?;
        run.write(&test_path, &test_text)?;
        run.step(
            "split",
            &["split", path, "--test-fraction", &fraction_s, "--seed", &seed_s, "--train", &train_path, "--test", &test_path],
            &[path],
            &[&train_path, &test_path],
        );
        splits_owned.push((class, reparse_dataset(&train_text)?, reparse_dataset(&test_text)?, train_path, test_path));
    }
    let splits: Vec<ClassSplit> = splits_owned
        .iter()
        .map(|(c, tr, te, _, _)| ClassSplit { window_class: *c, train: &tr.1, test: &te.1 })
        .collect();

    let (comparison, models) = compare_models_with_models(&splits, &default_menu(), &[seed])?;
    run.write("comparison.json", &comparison.to_json())?;
    run.step(
        "compare",
        &["compare", "data", "--seeds", &seed_s, "--split-seed", &seed_s, "--test-fraction", &fraction_s, "-o", "comparison.json"],
        &data_refs,
        &["comparison.json"],
    );

    let mut selected = Vec::new();
    let mut classes = Vec::new();
    let mut eval_argv: Vec<String> = vec!["evaluate".into()];
    let mut eval_inputs: Vec<String> = Vec::new();
    for (class, train_set, test_set, train_path, test_path) in &splits_owned {
        let cmp = comparison.class(*class).expect("compared every class");
        // ranked by pooled F1; an all-degenerate class keeps menu order
        let kind = cmp.ranking[0].kind;
        let mut chosen: Vec<TrainedModel> = Vec::new();
        let mut model_paths = Vec::new();
        let mut constants = Vec::new();
        for target in Target::ALL {
            let trained = models
                .iter()
                .find(|(s, _)| s.window_class == *class && s.kind == kind && s.target == target && s.seed == seed)
                .and_then(|(_, m)| m.clone());
            match trained {
                Some(m) => {
                    let path = format!("models/{class}-{target}.json");
                    run.write(&path, &m.save())?;
                    run.step(
                        "train",
                        &[
                            "train", train_path, "--kind", kind.as_str(), "--target", target.as_str(), "--seed", &seed_s, "-o",
                            &path,
                        ],
                        &[train_path],
                        &[&path],
                    );
                    selected.push(Selection { window_class: *class, target, kind, constant: None });
                    chosen.push(m);
                    model_paths.push(path);
                }
                None => {
                    let label = train_set.1.first().map_or(0, |r| target.label(r));
                    selected.push(Selection { window_class: *class, target, kind, constant: Some(label) });
                    constants.push((target, label));
                }
            }
        }
        let preds = predict_all(&chosen, &constants, kind, &test_set.1)?;
        let pred_path = format!("predictions/{class}.jsonl");
        run.write(&pred_path, &predictions_jsonl(&preds))?;
        let mut argv: Vec<String> = vec!["predict".into()];
        argv.extend(model_paths.iter().cloned());
        for (t, l) in &constants {
            argv.push("--constant".into());
            argv.push(format!("{t}={l}"));
        }
        if !constants.is_empty() {
            argv.push("--constant-kind".into());
            argv.push(kind.to_string());
        }
        argv.extend([test_path.clone(), "-o".into(), pred_path.clone()]);
        let argv_refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        let mut inputs: Vec<&str> = model_paths.iter().map(String::as_str).collect();
        inputs.push(test_path);
        run.step("predict", &argv_refs, &inputs, &[&pred_path]);

        classes.push(evaluate_class(&preds, &test_set.0, &test_set.1)?);
        eval_argv.extend([pred_path.clone(), test_path.clone()]);
        eval_inputs.extend([pred_path, test_path.clone()]);
    }
    let report = Table1Report::new(classes);
    run.write("report.json", &report.to_json())?;
    let txt = rel(&text_path(Path::new("report.json")));
    run.write(&txt, &render_text(&report, false))?;
    eval_argv.extend(["-o".into(), "report.json".into(), "--text".into()]);
    let argv_refs: Vec<&str> = eval_argv.iter().map(String::as_str).collect();
    let input_refs: Vec<&str> = eval_inputs.iter().map(String::as_str).collect();
    run.step("evaluate", &argv_refs, &input_refs, &["report.json", &txt]);
    print!("{}", render_text(&report, use_color()));

    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        split_seed: seed,
        training_seeds: vec![seed],
        test_fraction: a.test_fraction,
        config_sha256,
        design_id: design_id(&design),
        steps: run.steps,
        selected,
        artifacts: run.artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&a.output.join("manifest.json"), &text)?;
    log(format_args!("wrote {}", a.output.join("manifest.json").display()));
    Ok(())
}
