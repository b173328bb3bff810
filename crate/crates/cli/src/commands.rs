//! Subcommand implementations. Each one writes its outputs under the output
//! directory and finishes with `<command>.metadata.json`, or
//! `plot_<input stem>.metadata.json` for plots.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plasmo::attribution::{explain_surrogate, explanations_csv, summary_csv, FeatureGroups};
use plasmo::dataset::{
    map_file_name, read_records, records_path, run_sweep, SweepPlan, MAPS_DIR, RECORDS_FILE,
};
use plasmo::fdtd::{build_simulation, linspace, SimConfig};
use plasmo::format::sci9;
use plasmo::materials::{Metal, StackSpec};
use plasmo::surrogate::{
    load_map_samples, load_model, save_model, train_cnn, train_mlp, Architecture, CnnArchitecture,
    MlpArchitecture, RawInput, Surrogate, TrainConfig, TrainReport,
};
use plasmo::{dataset::Engine, tmm};

use crate::config::section;
use crate::meta::{entry, FileEntry, Outputs, RunMetadata};
use crate::plot;
use crate::{CliError, Command, Context, EngineArg, PlotKind, TargetArg};

/// Wavelength range used by `tmm` when no list is given.
const TMM_BAND_NM: [f64; 2] = [300.0, 1500.0];

pub fn dispatch(command: Command, ctx: &Context) -> Result<(), CliError> {
    let name = command.name();
    // plot runs write next to each other, so each input gets its own record
    let record = match &command {
        Command::Plot { input, .. } => format!("plot_{}", stem(input)),
        _ => name.to_string(),
    };
    let mut out = Outputs::new(&ctx.out)?;
    let mut inputs = Vec::new();
    let mut notes = Vec::new();
    match command {
        Command::Simulate {
            stack,
            wavelengths_nm,
            count,
        } => simulate(
            ctx,
            &mut out,
            &mut notes,
            stack.material,
            stack.thickness_nm,
            wavelengths_nm,
            count as usize,
        )?,
        Command::Tmm {
            stack,
            wavelengths_nm,
            count,
        } => tmm_spectrum(
            &mut out,
            stack.material,
            stack.thickness_nm,
            wavelengths_nm,
            count as usize,
        )?,
        Command::Sweep {
            engine,
            materials,
            thicknesses_nm,
            wavelengths_nm,
        } => sweep(
            ctx,
            &mut out,
            &mut notes,
            engine,
            materials,
            thicknesses_nm,
            wavelengths_nm,
        )?,
        Command::TrainMlp { data, max_epochs } => {
            train_mlp_cmd(ctx, &mut out, &mut inputs, &data, max_epochs)?
        }
        Command::TrainCnn { data, max_epochs } => {
            train_cnn_cmd(ctx, &mut out, &mut inputs, &data, max_epochs)?
        }
        Command::Predict {
            model,
            stack,
            wavelengths_nm,
        } => predict(
            &mut out,
            &mut inputs,
            &model,
            stack.material,
            stack.thickness_nm,
            &wavelengths_nm,
        )?,
        Command::Explain {
            model,
            data,
            instances,
            target,
        } => explain(
            ctx,
            &mut out,
            &mut inputs,
            &model,
            &data,
            instances as usize,
            target,
        )?,
        Command::Plot {
            kind,
            input,
            column,
        } => plot_cmd(&mut out, &mut inputs, kind, &input, column.as_deref())?,
    }
    let metadata = RunMetadata {
        tool: "plasmo",
        version: env!("CARGO_PKG_VERSION"),
        command: name.to_string(),
        args: ctx.cli_args.clone(),
        seed: ctx.seed,
        workers: ctx.workers,
        profile: ctx.profile.name().to_string(),
        config: match &ctx.config_path {
            Some(p) => Some(entry(p, p.display().to_string())?),
            None => None,
        },
        inputs,
        outputs: out.entries()?,
        notes,
    };
    let json = serde_json::to_string_pretty(&metadata).map_err(plasmo::Error::from)? + "\n";
    let file = format!("{record}.metadata.json");
    std::fs::write(ctx.out.join(&file), json)
        .map_err(|e| crate::meta::io_error(&ctx.out.join(&file), e))?;
    Ok(())
}

fn usage(e: plasmo::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn input_entry(path: &Path) -> Result<FileEntry, CliError> {
    entry(path, path.display().to_string())
}

fn simulate(
    ctx: &Context,
    out: &mut Outputs,
    notes: &mut Vec<String>,
    metal: Metal,
    thickness_nm: f64,
    wavelengths_nm: Vec<f64>,
    count: usize,
) -> Result<(), CliError> {
    let stack = StackSpec::plasmonic(metal, thickness_nm).map_err(usage)?;
    let mut config: SimConfig = section(
        ctx.profile.config(Vec::new()),
        ctx.config.fdtd.as_ref(),
        "fdtd",
    )?;
    if !wavelengths_nm.is_empty() {
        config.monitor_wavelengths_nm = wavelengths_nm;
    } else if config.monitor_wavelengths_nm.is_empty() {
        config.monitor_wavelengths_nm = ctx.profile.wavelengths(count);
    }
    config.validate().map_err(usage)?;
    let mut sim = build_simulation(&stack, &config)?;
    let (spectrum, maps) = sim.run()?;
    out.write("spectrum.csv", spectrum.to_csv())?;
    for map in &maps {
        out.write(
            &map_file_name(metal, thickness_nm, map.wavelength_nm),
            map.to_csv(),
        )?;
    }
    let run = sim.metadata();
    out.write(
        "run.json",
        serde_json::to_string_pretty(&run).map_err(plasmo::Error::from)? + "\n",
    )?;
    notes.extend(run.warnings.iter().cloned());
    if !spectrum.decayed {
        notes.push("fields had not decayed when the step limit was reached".into());
    }
    println!(
        "{} {} nm: {} wavelengths, {} steps, peak absorbed power {:.4}",
        metal.symbol(),
        thickness_nm,
        spectrum.points.len(),
        spectrum.steps,
        spectrum
            .points
            .iter()
            .map(|p| p.absorbed_power)
            .fold(f64::NEG_INFINITY, f64::max)
    );
    Ok(())
}

fn tmm_spectrum(
    out: &mut Outputs,
    metal: Metal,
    thickness_nm: f64,
    wavelengths_nm: Vec<f64>,
    count: usize,
) -> Result<(), CliError> {
    let stack = StackSpec::plasmonic(metal, thickness_nm).map_err(usage)?;
    let wavelengths = if wavelengths_nm.is_empty() {
        linspace(TMM_BAND_NM[0], TMM_BAND_NM[1], count)
    } else {
        wavelengths_nm
    };
    let points = tmm::spectrum(&stack, &wavelengths)?;
    out.write("tmm_spectrum.csv", tmm::spectrum_csv(&points))?;
    let a: Vec<f64> = points.iter().map(|p| p.absorptance).collect();
    match tmm::peak_wavelength(&wavelengths, &a) {
        Some(peak) => println!(
            "{} {} nm: absorptance peak at {peak:.1} nm",
            metal.symbol(),
            thickness_nm
        ),
        None => println!(
            "{} {} nm: no interior absorptance peak",
            metal.symbol(),
            thickness_nm
        ),
    }
    Ok(())
}

fn sweep(
    ctx: &Context,
    out: &mut Outputs,
    notes: &mut Vec<String>,
    engine: Option<EngineArg>,
    materials: Vec<Metal>,
    thicknesses_nm: Vec<f64>,
    wavelengths_nm: Vec<f64>,
) -> Result<(), CliError> {
    let mut plan: SweepPlan = section(SweepPlan::default(), ctx.config.sweep.as_ref(), "sweep")?;
    if let Some(e) = engine {
        plan.engine = match e {
            EngineArg::Fdtd => Engine::Fdtd,
            EngineArg::Tmm => Engine::Tmm,
        };
    }
    if !materials.is_empty() {
        plan.materials = materials;
    }
    if !thicknesses_nm.is_empty() {
        plan.thicknesses_nm = thicknesses_nm;
    }
    if !wavelengths_nm.is_empty() {
        plan.wavelengths_nm = wavelengths_nm;
    }
    plan.profile = ctx.profile;
    plan.seed = ctx.seed;
    plan.validate().map_err(usage)?;
    let manifest = run_sweep(&plan, &out.dir, ctx.workers)?;
    out.record(RECORDS_FILE);
    let mut maps: Vec<String> = manifest_maps(&out.dir)?;
    maps.sort();
    for m in &maps {
        out.record(m);
    }
    notes.push("manifest.json is not hashed: it records wall time and engine invocations".into());
    for case in manifest
        .cases
        .iter()
        .filter(|c| c.error.is_some() || !c.warnings.is_empty())
    {
        let label = format!("{} {} nm", case.material.symbol(), case.thickness_nm);
        if let Some(err) = &case.error {
            notes.push(format!("{label}: failed: {err}"));
        }
        notes.extend(case.warnings.iter().map(|w| format!("{label}: {w}")));
    }
    println!(
        "{} records ({} maps) from {} cases, {} engine runs, {:.1} s",
        manifest.record_count,
        manifest.map_count,
        manifest.cases.len(),
        manifest.engine_invocations,
        manifest.wall_time_s
    );
    Ok(())
}

/// Map files referenced by the records of a sweep directory.
fn manifest_maps(dir: &Path) -> Result<Vec<String>, CliError> {
    let records = read_records(&records_path(dir))?;
    Ok(records
        .into_iter()
        .filter_map(|r| r.map_path)
        .filter(|p| p.starts_with(MAPS_DIR))
        .collect())
}

fn train_config(
    ctx: &Context,
    base: TrainConfig,
    name: &str,
    max_epochs: Option<u64>,
) -> Result<TrainConfig, CliError> {
    let patch = if name == "train_mlp" {
        ctx.config.train_mlp.as_ref()
    } else {
        ctx.config.train_cnn.as_ref()
    };
    let mut cfg: TrainConfig = section(base, patch, name)?;
    cfg.seed = ctx.seed;
    if let Some(n) = max_epochs {
        cfg.max_epochs = n as usize;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn write_training(
    out: &mut Outputs,
    prefix: &str,
    model: &Surrogate,
    report: &TrainReport,
) -> Result<(), CliError> {
    let path = out.dir.join(format!("{prefix}.model"));
    save_model(model, &path)?;
    out.record(&format!("{prefix}.model"));
    out.write(&format!("{prefix}_training.csv"), report.to_csv())?;
    out.write(
        &format!("{prefix}_report.json"),
        serde_json::to_string_pretty(report).map_err(plasmo::Error::from)? + "\n",
    )?;
    Ok(())
}

fn train_mlp_cmd(
    ctx: &Context,
    out: &mut Outputs,
    inputs: &mut Vec<FileEntry>,
    data: &Path,
    max_epochs: Option<u64>,
) -> Result<(), CliError> {
    let arch: MlpArchitecture =
        section(MlpArchitecture::default(), ctx.config.mlp.as_ref(), "mlp")?;
    Architecture::Mlp(arch.clone()).validate().map_err(usage)?;
    let cfg = train_config(ctx, TrainConfig::mlp(), "train_mlp", max_epochs)?;
    let records_file = records_path(data);
    let records = read_records(&records_file)?;
    inputs.push(input_entry(&records_file)?);
    let (model, report) = train_mlp(&records, arch, &cfg)?;
    write_training(out, "mlp", &model, &report)?;
    let test = report
        .test
        .as_ref()
        .expect("training evaluates the test split");
    println!(
        "stopped at epoch {} (best {}); test MAE absorbed_power {:.5}, absorbed_flux {:.5}",
        report.stopped_epoch, report.best_epoch, test.mae[0], test.mae[1]
    );
    Ok(())
}

fn train_cnn_cmd(
    ctx: &Context,
    out: &mut Outputs,
    inputs: &mut Vec<FileEntry>,
    data: &Path,
    max_epochs: Option<u64>,
) -> Result<(), CliError> {
    let arch: CnnArchitecture =
        section(CnnArchitecture::default(), ctx.config.cnn.as_ref(), "cnn")?;
    Architecture::Cnn(arch.clone()).validate().map_err(usage)?;
    let cfg = train_config(ctx, TrainConfig::cnn(), "train_cnn", max_epochs)?;
    let records_file = records_path(data);
    let records = read_records(&records_file)?;
    inputs.push(input_entry(&records_file)?);
    for m in manifest_maps(data)? {
        inputs.push(entry(&data.join(&m), m)?);
    }
    let samples = load_map_samples(data, &records, arch.output_grid())?;
    let (model, report) = train_cnn(&samples, arch, &cfg)?;
    write_training(out, "cnn", &model, &report)?;
    let test = report
        .test
        .as_ref()
        .expect("training evaluates the test split");
    println!(
        "{} maps; stopped at epoch {} (best {}); test map MAE {:.5}",
        samples.len(),
        report.stopped_epoch,
        report.best_epoch,
        test.overall_mae
    );
    Ok(())
}

fn predict(
    out: &mut Outputs,
    inputs: &mut Vec<FileEntry>,
    model_path: &Path,
    metal: Metal,
    thickness_nm: f64,
    wavelengths_nm: &[f64],
) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    inputs.push(input_entry(model_path)?);
    let raw: Vec<RawInput> = wavelengths_nm
        .iter()
        .map(|&w| RawInput {
            material: metal,
            thickness_nm,
            wavelength_nm: w,
        })
        .collect();
    let y = model.predict(&raw)?;
    let width = model.outputs();
    match &model.architecture {
        Architecture::Mlp(_) => {
            let mut csv = String::from("material,thickness_nm,wavelength_nm");
            for name in &model.target_names {
                csv.push(',');
                csv.push_str(name);
            }
            csv.push('\n');
            for (r, row) in raw.iter().zip(y.chunks(width)) {
                csv.push_str(&format!(
                    "{},{},{}",
                    metal.symbol(),
                    sci9(r.thickness_nm),
                    sci9(r.wavelength_nm)
                ));
                for v in row {
                    csv.push_str(&format!(",{}", sci9(*v)));
                }
                csv.push('\n');
            }
            out.write("predictions.csv", &csv)?;
            print!("{csv}");
        }
        Architecture::Cnn(arch) => {
            let [grid_w, _] = arch.output_grid();
            let mut index = String::from("material,thickness_nm,wavelength_nm,map_path\n");
            for (r, map) in raw.iter().zip(y.chunks(width)) {
                let rel = format!(
                    "predicted_{}",
                    map_file_name(metal, thickness_nm, r.wavelength_nm)
                );
                let body: String = map
                    .chunks(grid_w)
                    .map(|row| row.iter().map(|v| sci9(*v)).collect::<Vec<_>>().join(",") + "\n")
                    .collect();
                out.write(&rel, body)?;
                index.push_str(&format!(
                    "{},{},{},{rel}\n",
                    metal.symbol(),
                    sci9(thickness_nm),
                    sci9(r.wavelength_nm)
                ));
            }
            out.write("predictions.csv", &index)?;
            println!(
                "{} predicted maps written under {}",
                raw.len(),
                out.dir.display()
            );
        }
    }
    Ok(())
}

fn explain(
    ctx: &Context,
    out: &mut Outputs,
    inputs: &mut Vec<FileEntry>,
    model_path: &Path,
    data: &Path,
    instances: usize,
    target: TargetArg,
) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    inputs.push(input_entry(model_path)?);
    if !matches!(model.architecture, Architecture::Mlp(_)) {
        return Err(CliError::Usage(
            "--model: explain needs an MLP model".into(),
        ));
    }
    let output = match target {
        TargetArg::AbsorbedPower => 0,
        TargetArg::AbsorbedFlux => 1,
    };
    let records_file = records_path(data);
    let records = read_records(&records_file)?;
    inputs.push(input_entry(&records_file)?);
    let importance = explain_surrogate(&model, &records, output, instances, ctx.seed)?;
    out.write(
        "explanations.csv",
        explanations_csv(&importance.explanations, &FeatureGroups::design()),
    )?;
    out.write("summary.csv", summary_csv(&importance))?;
    println!(
        "{} instances of {}; ranking: {}",
        importance.explanations.len(),
        model.target_names[output],
        importance
            .ranking
            .iter()
            .map(|&g| format!(
                "{} ({:.4})",
                importance.groups[g], importance.mean_abs_phi[g]
            ))
            .collect::<Vec<_>>()
            .join(" > ")
    );
    Ok(())
}

/// Header plus data rows, each with its 1-based line number.
struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read(path: &Path, has_headers: bool) -> Result<Self, CliError> {
        let parse_err = |line: usize, message: String| plasmo::Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_headers)
            .flexible(true)
            .from_path(path)
            .map_err(|e| parse_err(1, e.to_string()))?;
        let headers = if has_headers {
            reader
                .headers()
                .map_err(|e| parse_err(1, e.to_string()))?
                .iter()
                .map(|h| h.trim().to_string())
                .collect()
        } else {
            Vec::new()
        };
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            rows.push((line, record.iter().map(|f| f.trim().to_string()).collect()));
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize, CliError> {
        self.column(name).ok_or_else(|| {
            plasmo::Error::Parse {
                path: self.path.clone(),
                line: 1,
                message: format!("missing column '{name}'"),
            }
            .into()
        })
    }

    fn number(&self, line: usize, row: &[String], col: usize) -> Result<f64, CliError> {
        let text = row.get(col).ok_or_else(|| plasmo::Error::Parse {
            path: self.path.clone(),
            line,
            message: format!("expected at least {} fields, found {}", col + 1, row.len()),
        })?;
        text.parse::<f64>().map_err(|_| {
            plasmo::Error::Parse {
                path: self.path.clone(),
                line,
                message: format!("field {} ('{text}') is not a number", col + 1),
            }
            .into()
        })
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "plot".into(), |s| s.to_string_lossy().into_owned())
}

fn plot_cmd(
    out: &mut Outputs,
    inputs: &mut Vec<FileEntry>,
    kind: PlotKind,
    input: &Path,
    column: Option<&str>,
) -> Result<(), CliError> {
    if !input.exists() {
        return Err(CliError::Usage(format!(
            "--input {}: no such file",
            input.display()
        )));
    }
    inputs.push(input_entry(input)?);
    let name = stem(input);
    match kind {
        PlotKind::Spectrum => {
            let table = Table::read(input, true)?;
            let svg = plot::line_svg(&spectrum_plot(&table, column, &name)?)?;
            out.write(&format!("{name}_spectrum.svg"), svg)?;
        }
        PlotKind::Map => {
            let table = Table::read(input, false)?;
            let width = table.rows.first().map_or(0, |(_, r)| r.len());
            let mut values = Vec::new();
            for (line, row) in &table.rows {
                if row.len() != width {
                    return Err(plasmo::Error::Parse {
                        path: input.to_path_buf(),
                        line: *line,
                        message: format!("row has {} values, first row has {width}", row.len()),
                    }
                    .into());
                }
                for c in 0..width {
                    values.push(table.number(*line, row, c)?);
                }
            }
            if values.is_empty() {
                return Err(plasmo::Error::InvalidArgument(format!(
                    "{}: empty map",
                    input.display()
                ))
                .into());
            }
            let height = table.rows.len();
            let (bytes, lo, hi) = plot::pgm(width, height, &values)?;
            let sidecar = plot::pgm_sidecar(input, width, height, lo, hi);
            out.write(&format!("{name}.pgm"), bytes)?;
            out.write(&format!("{name}.pgm.txt"), sidecar)?;
        }
        PlotKind::Losscurve => {
            let table = Table::read(input, true)?;
            let (e, t, v) = (
                table.require("epoch")?,
                table.require("train_loss")?,
                table.require("val_loss")?,
            );
            let mut train = Vec::new();
            let mut val = Vec::new();
            for (line, row) in &table.rows {
                let epoch = table.number(*line, row, e)?;
                train.push((epoch, table.number(*line, row, t)?));
                val.push((epoch, table.number(*line, row, v)?));
            }
            let log_y = train.iter().chain(&val).all(|p| p.1 > 0.0);
            let svg = plot::line_svg(&plot::LinePlot {
                title: format!("{name}: loss"),
                x_label: "epoch".into(),
                y_label: if log_y {
                    "MSE (scaled units, log)".into()
                } else {
                    "MSE (scaled units)".into()
                },
                series: vec![
                    plot::Series {
                        label: "train".into(),
                        points: train,
                    },
                    plot::Series {
                        label: "validation".into(),
                        points: val,
                    },
                ],
                log_y,
            })?;
            out.write(&format!("{name}_losscurve.svg"), svg)?;
        }
        PlotKind::ShapSummary => {
            let table = Table::read(input, true)?;
            let svg = if let Some(m) = table.column("mean_abs_phi") {
                let g = table.require("group")?;
                let mut bars = Vec::new();
                for (line, row) in &table.rows {
                    bars.push((
                        row.get(g).cloned().unwrap_or_default(),
                        table.number(*line, row, m)?,
                    ));
                }
                plot::importance_svg(&format!("{name}: mean |SHAP value|"), &bars)?
            } else {
                let phi: Vec<(usize, String)> = table
                    .headers
                    .iter()
                    .enumerate()
                    .filter_map(|(k, h)| h.strip_prefix("phi_").map(|g| (k, g.to_string())))
                    .collect();
                if phi.is_empty() {
                    return Err(plasmo::Error::Parse {
                        path: input.to_path_buf(),
                        line: 1,
                        message: "expected a mean_abs_phi column or phi_<group> columns".into(),
                    }
                    .into());
                }
                let mut groups: Vec<(String, Vec<f64>)> =
                    phi.iter().map(|(_, g)| (g.clone(), Vec::new())).collect();
                for (line, row) in &table.rows {
                    for (slot, (k, _)) in groups.iter_mut().zip(&phi) {
                        slot.1.push(table.number(*line, row, *k)?);
                    }
                }
                let mean =
                    |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64;
                groups.sort_by(|a, b| mean(&b.1).total_cmp(&mean(&a.1)));
                plot::strip_svg(&format!("{name}: SHAP values"), &groups)?
            };
            out.write(&format!("{name}_shap.svg"), svg)?;
        }
    }
    Ok(())
}

/// Series from records.csv (one per material and thickness) or from a
/// single-stack spectrum CSV.
fn spectrum_plot(
    table: &Table,
    column: Option<&str>,
    name: &str,
) -> Result<plot::LinePlot, CliError> {
    let w = table.require("wavelength_nm")?;
    let y_name = match column {
        Some(c) => c.to_string(),
        None if table.column("absorbed_power").is_some() => "absorbed_power".into(),
        None => "A".into(),
    };
    let y = table.require(&y_name)?;
    let grouped = table.column("material").zip(table.column("thickness_nm"));
    let valid = table.column("valid");
    let mut series: BTreeMap<(String, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for (line, row) in &table.rows {
        if valid.is_some_and(|v| row.get(v).is_some_and(|s| s == "false")) {
            continue;
        }
        let key = match grouped {
            Some((m, t)) => (
                row.get(m).cloned().unwrap_or_default(),
                table.number(*line, row, t)?.to_bits(),
            ),
            None => (name.to_string(), 0),
        };
        series
            .entry(key)
            .or_default()
            .push((table.number(*line, row, w)?, table.number(*line, row, y)?));
    }
    let series = series
        .into_iter()
        .map(|((m, t), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let label = if grouped.is_some() {
                format!("{m} {} nm", f64::from_bits(t))
            } else {
                m
            };
            plot::Series { label, points }
        })
        .collect();
    Ok(plot::LinePlot {
        title: format!("{name}: {y_name}"),
        x_label: "wavelength (nm)".into(),
        y_label: y_name,
        series,
        log_y: false,
    })
}
