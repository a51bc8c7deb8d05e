use std::fs;
use std::path::{Path, PathBuf};

use moldline::dataset::{load_dataset, Dataset};
use moldline::descriptors::{build_feature_matrix, read_features_csv, write_features_csv, FeatureMatrix};
use moldline::featsel::{correlation_matrix, count_correlated, rfe, write_correlation_csv, write_rfe_curve_csv};
use moldline::preprocess::{ColumnScaler, Standardizer};
use moldline::regress::{score, Scores};
use moldline::synth::write_synth;
use moldline::train::{
    all_kinds, compare_all, is_neural_kind, ranking_table, write_scores_csv, write_train_log, Regime, ScoreRow, TrainConfig,
    TrainData, TrainReport, TrainedModel,
};
use moldline::{Error, Result};
use serde_json::json;

use crate::{Cli, Command, EvalArgs, ExtractArgs, Global, ReportArgs, SelectArgs, SynthArgs, TrainArgs};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Synth(a) => synth(&cfg, a),
        Command::Extract(a) => extract(&cfg, a),
        Command::Select(a) => select(&cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::Report(a) => report(a),
    }
}

fn load_config(g: &Global) -> Result<TrainConfig> {
    let mut cfg = match &g.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    Ok(cfg)
}

fn parse_regime(s: &str) -> Result<Regime> {
    serde_json::from_value(json!(s))
        .map_err(|_| Error::BadConfig(format!("unknown regime {s:?}; expected signals, thermo or both")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::BadConfig(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::BadConfig(format!("cannot write {}: {e}", path.display())))
}

/// Descriptors for the dataset's records, in dataset order: read from
/// `path` when given, otherwise extracted with the configured settings.
fn features_for(ds: &Dataset, path: Option<&Path>, cfg: &TrainConfig) -> Result<FeatureMatrix> {
    let Some(path) = path else {
        return build_feature_matrix(&ds.records, &cfg.extract);
    };
    let fm = read_features_csv(path)?;
    let idx = ds
        .records
        .iter()
        .map(|r| {
            fm.cycle_ids.iter().position(|id| *id == r.cycle_id).ok_or_else(|| Error::MalformedRecord {
                cycle_id: r.cycle_id.clone(),
                reason: format!("no row in {}", path.display()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fm.select_rows(&idx))
}

fn synth(cfg: &TrainConfig, a: SynthArgs) -> Result<()> {
    let mut sc = cfg.synth.clone();
    if let Some(n) = a.n {
        sc.n_cycles = n;
    }
    if let Some(v) = a.noise {
        sc.noise_level = v;
    }
    if let Some(t) = a.n_test {
        sc.n_test = t;
    }
    let (m, _) = write_synth(&a.out, &sc, cfg.seed)?;
    println!(
        "{}",
        json!({"out": a.out, "n_cycles": m.records.len(), "n_train": m.n_train, "n_test": m.n_test, "seed": cfg.seed})
    );
    Ok(())
}

fn extract(cfg: &TrainConfig, a: ExtractArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let fm = build_feature_matrix(&ds.records, &cfg.extract)?;
    write_features_csv(&a.out, &fm, Some(&cfg.extract))?;
    println!(
        "{}",
        json!({"rows": fm.values.rows(), "columns": fm.values.cols(), "imputed": fm.imputed(), "manifest_hash": fm.manifest.hash()})
    );
    Ok(())
}

fn select(cfg: &TrainConfig, a: SelectArgs) -> Result<()> {
    let ds = load_dataset(&a.labels)?;
    let fm = features_for(&ds, Some(&a.features), cfg)?;
    let regime = parse_regime(&a.regime)?;
    let sub = fm.select_columns(&regime.columns(&fm.manifest));
    let names = sub.manifest.names();
    let train = ds.split()?.train;
    let labels = ds.labels()?;
    let ytr: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
    let xtr = sub.values.select_rows(&train);
    let z = ColumnScaler::fit(&xtr)?.apply(&xtr)?;
    let out = rfe(&z, &names, &Standardizer::fit(&ytr)?.apply(&ytr)?, a.cv.unwrap_or(cfg.select.cv_folds), cfg.seed)?;
    let cm = correlation_matrix(&xtr, &names)?;
    create_dir(&a.out)?;
    write_rfe_curve_csv(&a.out.join("rfe_curve.csv"), &out)?;
    write_correlation_csv(&a.out.join("correlation.csv"), &cm)?;
    let mut list = out.selected_names.join("\n");
    list.push('\n');
    write_text(&a.out.join("selected.txt"), &list)?;
    println!(
        "{}",
        json!({
            "regime": regime.name(),
            "candidates": names.len(),
            "selected": out.selected.len(),
            "cv_r2": out.best_r2,
            "highly_correlated": count_correlated(&cm, cfg.select.correlation_threshold),
        })
    );
    Ok(())
}

fn train(mut cfg: TrainConfig, a: TrainArgs) -> Result<()> {
    if a.model == "all" {
        if let Some(r) = &a.regime {
            if r != "all" {
                cfg.regimes = vec![parse_regime(r)?];
            }
        }
    } else if !all_kinds().contains(&a.model) {
        return Err(Error::UnknownModel { kind: a.model.clone(), valid: all_kinds() });
    } else if is_neural_kind(&a.model) {
        cfg.models.clear();
        cfg.neural_models = vec![a.model.clone()];
    } else {
        cfg.models = vec![a.model.clone()];
        cfg.neural_models.clear();
        cfg.regimes = match a.regime.as_deref() {
            None => vec![Regime::Both],
            Some("all") => cfg.regimes.clone(),
            Some(r) => vec![parse_regime(r)?],
        };
    }
    if let Some(n) = a.iterations {
        for k in cfg.neural_models.clone() {
            cfg.neural.iterations.insert(k, n);
        }
    }
    if let Some(k) = a.cv {
        cfg.cv_folds = k;
    }
    if a.no_tune {
        cfg.tune = false;
    }
    cfg.validate()?;

    let ds = load_dataset(&a.data)?;
    let features = if cfg.models.is_empty() { None } else { Some(features_for(&ds, a.features.as_deref(), &cfg)?) };
    let data = TrainData {
        features,
        labels: ds.labels()?,
        split: ds.split()?,
        split_seed: ds.manifest.split_seed,
        records: if cfg.neural_models.is_empty() { None } else { Some(ds.records) },
    };
    let cmp = compare_all(&data, &cfg)?;
    for w in &cmp.warnings {
        eprintln!("{}", json!({"warning": w}));
    }
    create_dir(&a.out)?;
    let single = cmp.reports.len() == 1;
    for (rep, model) in cmp.reports.iter().zip(&cmp.models) {
        let dir = if single { a.out.clone() } else { a.out.join(format!("{}-{}", rep.kind, rep.regime)) };
        create_dir(&dir)?;
        model.save(&dir.join("model.json"))?;
        rep.save(&dir.join("report.json"))?;
        if !rep.trajectory.is_empty() {
            write_train_log(&dir.join("train_log.csv"), &rep.trajectory)?;
        }
    }
    let rows: Vec<ScoreRow> = cmp.reports.iter().map(TrainReport::score_row).collect();
    write_scores_csv(&a.out.join("scores.csv"), &rows)?;
    let table = ranking_table(&cmp.reports);
    write_text(&a.out.join("ranking.txt"), &table)?;
    write_text(&a.out.join("config.json"), &cfg.to_json())?;
    print!("{table}");
    Ok(())
}

fn eval(cfg: &TrainConfig, a: EvalArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let labels = ds.labels()?;
    let split = ds.split()?;
    let rows: Vec<usize> = match a.rows.as_str() {
        "test" => split.test.clone(),
        "train" => split.train.clone(),
        "all" => (0..labels.len()).collect(),
        other => return Err(Error::BadConfig(format!("--rows must be test, train or all, got {other:?}"))),
    };
    let truth: Vec<f64> = rows.iter().map(|&i| labels[i]).collect();
    let (name, regime, n_features, scores) = match (&a.model, &a.predictions) {
        (Some(path), _) => match TrainedModel::load(path)? {
            TrainedModel::Descriptor(m) => {
                let fm = features_for(&ds, a.features.as_deref(), cfg)?;
                if fm.manifest.hash() != m.manifest_hash {
                    return Err(Error::BadConfig("descriptor manifest differs from the one the model was trained on".into()));
                }
                let pred = m.predict_z(&fm.select_rows(&rows))?;
                let s = score(&pred, &m.stats.target.apply(&truth)?)?;
                (m.regressor.spec.kind().to_string(), m.regime.clone(), m.stats.selected.len(), s)
            }
            TrainedModel::Neural(mut m) => {
                let recs: Vec<_> = rows.iter().map(|&i| &ds.records[i]).collect();
                let pred = m.predict_z(&recs)?;
                let s = score(&pred, &m.target.apply(&truth)?)?;
                let regime = if m.kind.starts_with("lstm") { "raw_signals" } else { "images" };
                (m.kind.clone(), regime.to_string(), 0, s)
            }
        },
        (None, Some(path)) => {
            let pred = read_predictions(path, &ds, &rows)?;
            let ytr: Vec<f64> = split.train.iter().map(|&i| labels[i]).collect();
            let target = Standardizer::fit(&ytr)?;
            ("predictions".to_string(), "-".to_string(), 0, score(&target.apply(&pred)?, &target.apply(&truth)?)?)
        }
        (None, None) => return Err(Error::BadConfig("eval needs --model or --predictions".into())),
    };
    let Scores { mse, r2 } = scores;
    if let Some(out) = &a.out {
        write_scores_csv(
            out,
            &[ScoreRow { model: name.clone(), regime: regime.clone(), n_features, mse, r2, seconds: 0.0, seed: cfg.seed }],
        )?;
    }
    println!("{}", json!({"model": name, "regime": regime, "rows": a.rows, "n": rows.len(), "mse": mse, "r2": r2}));
    Ok(())
}

/// `cycle_id,width_mm` rows; every requested cycle must be present.
fn read_predictions(path: &Path, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))?;
    let mut by_id = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let v: f64 = rec
            .get(1)
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::MalformedRecord { cycle_id: id.clone(), reason: "bad prediction".into() })?;
        by_id.insert(id, v);
    }
    rows.iter()
        .map(|&i| {
            let id = &ds.records[i].cycle_id;
            by_id.get(id).copied().ok_or_else(|| Error::MalformedRecord { cycle_id: id.clone(), reason: "no prediction".into() })
        })
        .collect()
}

fn find_reports(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::BadConfig(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_reports(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "report.json") {
            out.push(p);
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let mut paths = Vec::new();
    find_reports(&a.runs, &mut paths)?;
    let mut reports = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| Error::BadConfig(format!("cannot read {}: {e}", p.display())))?;
        reports.push(serde_json::from_str::<TrainReport>(&text)?);
    }
    if reports.is_empty() {
        eprintln!("{}", json!({"warning": format!("no report.json under {}", a.runs.display())}));
    }
    reports.sort_by(|x, y| y.r2.total_cmp(&x.r2));
    let out = a.out.unwrap_or_else(|| a.runs.join("scores.csv"));
    let rows: Vec<ScoreRow> = reports.iter().map(TrainReport::score_row).collect();
    write_scores_csv(&out, &rows)?;
    let table = ranking_table(&reports);
    write_text(&out.with_file_name("ranking.txt"), &table)?;
    print!("{table}");
    Ok(())
}
