use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::config::{ExperimentConfig, Method};
use super::report::{emit_csv, fmt_f64, per_image_csv, summary_csv, CellKey, CellResult, ImageResult};
use super::timebudget::{reference_t_d, TimeBudget, REFERENCE_T_P};
use crate::data::{load_dir, make_splits, save_csdc, synthesize_set, ChargeStabilityDiagram};
use crate::diffusion::{
    build_schedule, load_checkpoint_for, reconstruct, save_checkpoint, train, DenoiserParameters, TrainEvent,
    TrainingHistory,
};
use crate::masking::apply_mask;
use crate::metrics::{evaluate, frangi_ridges, overlay_to_field, ridge_overlay};
use crate::{rng, Error, Field, Result};

/// Train, validation and test images of one run.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<ChargeStabilityDiagram>,
    pub val: Vec<ChargeStabilityDiagram>,
    pub test: Vec<ChargeStabilityDiagram>,
}

impl Dataset {
    /// Fails with [`Error::TestLeak`] if a test id is also a train or
    /// validation id.
    pub fn check_no_leak(&self) -> Result<()> {
        let test: HashSet<&str> = self.test.iter().map(|c| c.id.as_str()).collect();
        match self.train.iter().chain(&self.val).find(|c| test.contains(c.id.as_str())) {
            Some(c) => Err(Error::TestLeak(c.id.clone())),
            None => Ok(()),
        }
    }
}

/// Builds the synthetic sets, or loads and splits a CSD1 directory.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let d = &config.data;
    let data = match &d.dir {
        None => {
            let set = |n, prefix| -> Result<Vec<ChargeStabilityDiagram>> {
                Ok(synthesize_set(&d.synthetic, n, config.seed, prefix)?
                    .into_iter()
                    .map(|s| s.csd)
                    .collect())
            };
            Dataset {
                train: set(d.n_train, "train")?,
                val: set(d.n_val, "val")?,
                test: set(d.n_test, "test")?,
            }
        }
        Some(dir) => {
            let all = load_dir(dir)?;
            let ids: Vec<String> = all.iter().map(|c| c.id.clone()).collect();
            let split = make_splits(&ids, config.seed, d.n_test)?;
            let pick = |want: &[String]| -> Vec<ChargeStabilityDiagram> {
                want.iter()
                    .filter_map(|id| all.iter().find(|c| &c.id == id).cloned())
                    .collect()
            };
            Dataset {
                train: pick(&split.train_ids),
                val: pick(&split.val_ids),
                test: pick(&split.test_ids),
            }
        }
    };
    data.check_no_leak()?;
    Ok(data)
}

fn fields(set: &[ChargeStabilityDiagram]) -> Vec<Field> {
    set.iter().map(ChargeStabilityDiagram::to_field).collect()
}

pub fn loss_csv(history: &TrainingHistory) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for (k, loss) in history.train_loss.iter().enumerate() {
        let epoch = k + 1;
        let val = history
            .val_loss
            .iter()
            .find(|(e, _)| *e == epoch)
            .map(|(_, v)| fmt_f64(*v))
            .unwrap_or_default();
        let _ = writeln!(out, "{epoch},{},{val}", fmt_f64(*loss));
    }
    out
}

/// Loads the checkpoint for `steps`, training (and saving) it first if it is
/// missing and training is enabled. Returns the history when it trained.
pub fn ensure_checkpoint(
    config: &ExperimentConfig,
    data: &Dataset,
    steps: usize,
    log: &mut dyn FnMut(&str),
) -> Result<(DenoiserParameters<f32>, Option<TrainingHistory>)> {
    let path = config.checkpoint_path(steps);
    let want = config.unet(steps);
    if path.exists() {
        let params = load_checkpoint_for(&path, steps)?;
        if params.config() != &want {
            return Err(Error::CheckpointMismatch(format!(
                "{} holds {:?}, config asks for {want:?}",
                path.display(),
                params.config()
            )));
        }
        log(&format!("loaded {}", path.display()));
        return Ok((params, None));
    }
    if !config.train.enabled {
        return Err(Error::MissingCheckpoint(path));
    }
    data.check_no_leak()?;
    log(&format!(
        "training T={steps} on {} images for {} epochs",
        data.train.len(),
        config.train.epochs
    ));
    let dir = config.checkpoint_dir();
    let (params, history) = train(
        want,
        &fields(&data.train),
        &fields(&data.val),
        config.training_masks(),
        &config.train_config(),
        |event| {
            match event {
                TrainEvent::Epoch {
                    epoch,
                    train_loss,
                    val_loss,
                } => {
                    let val = val_loss.map(|v| format!(" val {v:.6}")).unwrap_or_default();
                    log(&format!("T={steps} epoch {epoch}: train {train_loss:.6}{val}"));
                }
                TrainEvent::Checkpoint { epoch, params } => {
                    save_checkpoint(params, &dir.join(format!("unet-T{steps}-e{epoch:03}.qddm")))?;
                }
            }
            Ok(())
        },
    )?;
    save_checkpoint(&params, &path)?;
    emit_csv(&loss_csv(&history), &config.output_dir.join(format!("loss-T{steps}.csv")))?;
    Ok((params, Some(history)))
}

/// Every evaluated cell plus the training histories produced on the way.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
    pub histories: Vec<(usize, TrainingHistory)>,
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, mask: crate::masking::MaskSpec, steps: Option<usize>) -> Option<&CellResult> {
        let key = CellKey { method, mask, steps };
        self.cells.iter().find(|c| c.key == key)
    }
}

/// Cells in run order: diffusion per steps and mask, then each baseline per
/// mask.
pub fn cell_keys(config: &ExperimentConfig) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &method in &config.methods {
        for &mask in &config.masks {
            if method == Method::Diffusion {
                for &s in &config.steps {
                    keys.push(CellKey {
                        method,
                        mask,
                        steps: Some(s),
                    });
                }
            } else {
                keys.push(CellKey {
                    method,
                    mask,
                    steps: None,
                });
            }
        }
    }
    keys
}

fn save_image(path: &Path, like: &ChargeStabilityDiagram, id: &str, field: &Field) -> Result<()> {
    let csd = ChargeStabilityDiagram::from_field(id, field, like.v1_range, like.v2_range)?;
    save_csdc(&csd, path)
}

fn run_cell(
    config: &ExperimentConfig,
    key: CellKey,
    test: &[ChargeStabilityDiagram],
    model: Option<&DenoiserParameters<f32>>,
) -> Result<CellResult> {
    let label = key.label();
    let mut images = Vec::with_capacity(test.len());
    for (idx, csd) in test.iter().enumerate() {
        let truth = csd.to_field();
        let (h, w) = truth.dim();
        let mask = key.mask.build(h, w)?;
        let y = apply_mask(&truth, &mask)?;
        let start = Instant::now();
        let outcome: Result<(Field, bool)> = match (key.method.baseline(), model) {
            (Some(b), _) => b.run(&y, &mask),
            (None, Some(m)) => {
                let schedule = build_schedule(m.config().steps)?;
                let mut r = rng::indexed_stream(config.seed, rng::STREAM_SAMPLE, idx as u64);
                reconstruct(m, &y, &mask, &schedule, &mut r, config.sampling.replace_known).map(|f| (f, false))
            }
            (None, None) => Err(Error::MissingCheckpoint(config.checkpoint_path(key.steps.unwrap_or(0)))),
        };
        let seconds = start.elapsed().as_secs_f64();
        let result = match outcome {
            Ok((pred, degraded)) => {
                let report = evaluate(&pred, &truth, &config.metrics)?;
                if config.save_images {
                    let dir = config.output_dir.join("reconstructions").join(&label);
                    save_image(&dir.join(format!("{}.csd1", csd.id)), csd, &csd.id, &pred)?;
                    let overlay = ridge_overlay(&frangi_ridges(&pred), &frangi_ridges(&truth), config.metrics.f1_tolerance)?;
                    let dir = config.output_dir.join("overlays").join(&label);
                    let tagged = format!("{}.frangi", csd.id);
                    save_image(&dir.join(format!("{tagged}.csd1")), csd, &tagged, &overlay_to_field(&overlay))?;
                }
                ImageResult {
                    id: csd.id.clone(),
                    report: Some(report),
                    error: None,
                    degraded,
                    seconds,
                }
            }
            Err(e @ (Error::Degenerate(_) | Error::NonFinite(_))) => ImageResult {
                id: csd.id.clone(),
                report: None,
                error: Some(e.to_string()),
                degraded: false,
                seconds,
            },
            Err(e) => return Err(e),
        };
        images.push(result);
    }
    Ok(CellResult { key, images })
}

/// Reference time budgets per cell: mean measured pixels at the reference
/// `t_p`, plus the reference inference time for diffusion cells.
pub fn timebudget_csv(cells: &[CellResult], test: &[ChargeStabilityDiagram]) -> Result<String> {
    let mut out = String::from("method,mask,steps,n_p,t_p,t_d,total\n");
    for cell in cells {
        let n_p = match test.first() {
            Some(c) => cell.key.mask.build(c.height(), c.width())?.n_measured(),
            None => 0,
        };
        let t_d = cell.key.steps.map(reference_t_d).unwrap_or(0.0);
        let b = TimeBudget::new(n_p, REFERENCE_T_P, t_d)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            cell.key.method,
            cell.key.mask,
            cell.key.steps.map(|s| s.to_string()).unwrap_or_default(),
            b.n_p,
            fmt_f64(b.t_p),
            fmt_f64(b.t_d),
            fmt_f64(b.total)
        );
    }
    Ok(out)
}

/// Host wall-clock inference times; not reproducible across runs.
pub fn timing_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("method,mask,steps,t_d_measured_mean\n");
    for cell in cells {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            cell.key.method,
            cell.key.mask,
            cell.key.steps.map(|s| s.to_string()).unwrap_or_default(),
            fmt_f64(cell.mean_seconds())
        );
    }
    out
}

/// Runs every (method, mask, steps) cell on the test set and writes
/// `summary.csv`, `per_image.csv`, `timebudget.csv` and `timing.csv` under
/// the output directory.
pub fn run_experiment(config: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<ExperimentReport> {
    config.validate()?;
    let data = load_dataset(config)?;
    log(&format!(
        "data: {} train, {} val, {} test",
        data.train.len(),
        data.val.len(),
        data.test.len()
    ));
    let mut models = Vec::new();
    let mut histories = Vec::new();
    if config.uses_diffusion() {
        for &s in &config.steps {
            let (params, history) = ensure_checkpoint(config, &data, s, log)?;
            if let Some(h) = history {
                histories.push((s, h));
            }
            models.push((s, params));
        }
    }
    let mut cells = Vec::new();
    for key in cell_keys(config) {
        let model = key.steps.and_then(|s| models.iter().find(|(t, _)| *t == s).map(|(_, p)| p));
        let cell = run_cell(config, key, &data.test, model)?;
        let psnr = cell.mean("psnr").map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        let iou = cell.mean("iou_ridge").map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        log(&format!("{}: psnr {psnr} ridge-iou {iou}", key.label()));
        cells.push(cell);
    }
    let out = &config.output_dir;
    emit_csv(&summary_csv(&cells), &out.join("summary.csv"))?;
    emit_csv(&per_image_csv(&cells), &out.join("per_image.csv"))?;
    emit_csv(&timebudget_csv(&cells, &data.test)?, &out.join("timebudget.csv"))?;
    emit_csv(&timing_csv(&cells), &out.join("timing.csv"))?;
    Ok(ExperimentReport { cells, histories })
}
