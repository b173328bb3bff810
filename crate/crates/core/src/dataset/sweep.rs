//! Sweep execution with a worker pool, a single collector and a per-case
//! content-addressed cache.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::preprocess::{ScalerParams, ONE_HOT_ORDER};
use super::{write_records, SampleRecord};
use crate::error::{Error, Result};
use crate::fdtd::{build_simulation, linspace, Profile, SimConfig};
use crate::materials::{Metal, StackSpec};
use crate::tmm;

pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MAPS_DIR: &str = "maps";
const CASES_DIR: &str = "cases";

const THICKNESS_RANGE_NM: [f64; 2] = [5.0, 60.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Fdtd,
    Tmm,
}

impl Engine {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fdtd" => Ok(Engine::Fdtd),
            "tmm" => Ok(Engine::Tmm),
            _ => Err(Error::InvalidArgument(format!(
                "unknown engine `{s}` (expected fdtd or tmm)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Fdtd => "fdtd",
            Engine::Tmm => "tmm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub materials: Vec<Metal>,
    pub thicknesses_nm: Vec<f64>,
    pub wavelengths_nm: Vec<f64>,
    pub engine: Engine,
    pub profile: Profile,
    pub seed: u64,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            materials: Metal::ALL.to_vec(),
            thicknesses_nm: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            wavelengths_nm: linspace(300.0, 1500.0, 25),
            engine: Engine::Tmm,
            profile: Profile::Desk,
            seed: 42,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Sweep(m.to_string()));
        if self.materials.is_empty()
            || self.thicknesses_nm.is_empty()
            || self.wavelengths_nm.is_empty()
        {
            return err("materials, thicknesses and wavelengths must all be non-empty");
        }
        let [lo, hi] = THICKNESS_RANGE_NM;
        if let Some(t) = self
            .thicknesses_nm
            .iter()
            .find(|t| !(**t >= lo && **t <= hi))
        {
            return Err(Error::Sweep(format!(
                "thickness {t} nm outside [{lo}, {hi}] nm"
            )));
        }
        if let Some(w) = self
            .wavelengths_nm
            .iter()
            .find(|w| !(**w > 0.0 && w.is_finite()))
        {
            return Err(Error::Sweep(format!("wavelength {w} nm must be positive")));
        }
        let mut seen = Vec::new();
        for &m in &self.materials {
            if seen.contains(&m) {
                return Err(Error::Sweep(format!("material {m} listed twice")));
            }
            seen.push(m);
        }
        for (name, list) in [
            ("thickness", &self.thicknesses_nm),
            ("wavelength", &self.wavelengths_nm),
        ] {
            let mut sorted = list.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Sweep(format!("duplicate {name} in plan")));
            }
        }
        Ok(())
    }

    /// Cases in plan order: materials outer, thicknesses inner.
    pub fn cases(&self) -> Vec<(Metal, f64)> {
        self.materials
            .iter()
            .flat_map(|&m| self.thicknesses_nm.iter().map(move |&t| (m, t)))
            .collect()
    }

    /// FDTD configuration for this plan. The source band is widened to cover
    /// every requested wavelength.
    pub fn fdtd_config(&self) -> SimConfig {
        let mut cfg = self.profile.config(self.wavelengths_nm.clone());
        let lo = self
            .wavelengths_nm
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .wavelengths_nm
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        cfg.source_band_nm = [cfg.source_band_nm[0].min(lo), cfg.source_band_nm[1].max(hi)];
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub material: Metal,
    pub thickness_nm: f64,
    pub hash: String,
    pub cached: bool,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub plan: SweepPlan,
    pub engine: Engine,
    pub profile: Profile,
    pub fdtd_config: Option<SimConfig>,
    pub wall_time_s: f64,
    pub engine_invocations: usize,
    pub record_count: usize,
    pub map_count: usize,
    pub cases: Vec<CaseSummary>,
    pub one_hot_order: Vec<Metal>,
    pub seed: u64,
    /// Population statistics over valid records, keyed by column name.
    /// Columns with zero spread are omitted.
    pub scalers: BTreeMap<String, ScalerParams>,
}

impl SweepManifest {
    pub fn warnings(&self) -> impl Iterator<Item = &String> {
        self.cases.iter().flat_map(|c| c.warnings.iter())
    }
}

pub fn read_manifest(dir: &Path) -> Result<SweepManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// What one case produced; also the on-disk cache entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CaseOutcome {
    material: Metal,
    thickness_nm: f64,
    records: Vec<SampleRecord>,
    warnings: Vec<String>,
}

/// Everything one case produces: records sorted by wavelength, warnings and
/// map files as (path relative to the sweep directory, CSV contents).
#[derive(Debug, Clone, Default)]
pub struct CaseOutput {
    pub records: Vec<SampleRecord>,
    pub warnings: Vec<String>,
    pub maps: Vec<(String, String)>,
}

/// Result of running one case, sent to the collector.
struct CaseMessage {
    index: usize,
    hash: String,
    result: Result<CaseOutput>,
}

fn case_hash(plan: &SweepPlan, stack: &StackSpec, config: Option<&SimConfig>) -> Result<String> {
    let key = serde_json::json!({
        "engine": plan.engine,
        "profile": plan.profile,
        "config": config,
        "stack": stack,
        "wavelengths_nm": plan.wavelengths_nm,
    });
    let digest = Sha256::digest(serde_json::to_vec(&key)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Relative path of the absorption map for one (material, thickness, wavelength).
pub fn map_file_name(metal: Metal, thickness_nm: f64, wavelength_nm: f64) -> String {
    format!(
        "{MAPS_DIR}/{}_{}nm_{}nm.csv",
        metal.key(),
        fmt_num(thickness_nm),
        fmt_num(wavelength_nm)
    )
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.replace('.', "p")
}

/// Runs the plan's engine on the plasmonic stack with `metal` at
/// `thickness_nm`.
pub fn run_case(plan: &SweepPlan, metal: Metal, thickness_nm: f64) -> Result<CaseOutput> {
    let stack = &StackSpec::plasmonic(metal, thickness_nm)?;
    let config = (plan.engine == Engine::Fdtd).then(|| plan.fdtd_config());
    let config = config.as_ref();
    let mut records = Vec::with_capacity(plan.wavelengths_nm.len());
    let mut maps = Vec::new();
    let mut warnings = Vec::new();
    let metal_layer = stack
        .layer_index(metal.key())
        .expect("plasmonic stack has a metal layer");
    match (plan.engine, config) {
        (Engine::Tmm, _) => {
            for &w in &plan.wavelengths_nm {
                let p = tmm::rta(stack, w)?;
                records.push(SampleRecord {
                    material: metal,
                    thickness_nm,
                    wavelength_nm: w,
                    absorbed_power: p.absorptance,
                    absorbed_flux: p.per_layer_absorptance[metal_layer],
                    map_path: None,
                    valid: true,
                    imputed: false,
                });
            }
        }
        (Engine::Fdtd, Some(cfg)) => {
            let mut sim = build_simulation(stack, cfg)?;
            let (spectrum, field_maps) = sim.run()?;
            warnings = spectrum.warnings.clone();
            if !spectrum.decayed {
                warnings.push("fields had not decayed when the step limit was reached".into());
            }
            for map in field_maps {
                let w = map.wavelength_nm;
                let point = spectrum
                    .points
                    .iter()
                    .find(|p| p.wavelength_nm == w)
                    .expect("one spectral point per map");
                let path = map_file_name(metal, thickness_nm, w);
                let valid = point.absorbed_power.is_finite() && point.absorbed_flux.is_finite();
                records.push(SampleRecord {
                    material: metal,
                    thickness_nm,
                    wavelength_nm: w,
                    absorbed_power: point.absorbed_power,
                    absorbed_flux: point.absorbed_flux,
                    map_path: Some(path.clone()),
                    valid,
                    imputed: false,
                });
                maps.push((path, map.to_csv()));
            }
        }
        (Engine::Fdtd, None) => unreachable!("fdtd plans always carry a config"),
    }
    records.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
    Ok(CaseOutput {
        records,
        warnings,
        maps,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_cached(path: &Path, dir: &Path) -> Option<CaseOutcome> {
    let outcome: CaseOutcome = serde_json::from_str(&std::fs::read_to_string(path).ok()?).ok()?;
    // a cache entry is only usable while every map it references still exists
    let maps_present = outcome
        .records
        .iter()
        .filter_map(|r| r.map_path.as_ref())
        .all(|p| dir.join(p).is_file());
    maps_present.then_some(outcome)
}

/// Executes every (material, thickness) case of `plan` on `workers` threads
/// and writes records.csv, maps/ and manifest.json under `out_dir`. Cases
/// whose content hash already has a cache entry are not rerun.
pub fn run_sweep(plan: &SweepPlan, out_dir: &Path, workers: usize) -> Result<SweepManifest> {
    run_sweep_with(plan, out_dir, workers, run_case)
}

/// [`run_sweep`] with a caller-supplied case runner in place of the engines.
pub fn run_sweep_with<F>(
    plan: &SweepPlan,
    out_dir: &Path,
    workers: usize,
    runner: F,
) -> Result<SweepManifest>
where
    F: Fn(&SweepPlan, Metal, f64) -> Result<CaseOutput> + Sync,
{
    plan.validate()?;
    if workers == 0 {
        return Err(Error::InvalidArgument(
            "worker count must be at least 1".into(),
        ));
    }
    let start = Instant::now();
    let cases_dir = out_dir.join(CASES_DIR);
    create_dir(&cases_dir)?;
    if plan.engine == Engine::Fdtd {
        create_dir(&out_dir.join(MAPS_DIR))?;
    }
    let config = (plan.engine == Engine::Fdtd).then(|| plan.fdtd_config());
    if let Some(cfg) = &config {
        cfg.validate()?;
    }

    let cases = plan.cases();
    let mut hashes = Vec::with_capacity(cases.len());
    for &(m, t) in &cases {
        hashes.push(case_hash(
            plan,
            &StackSpec::plasmonic(m, t)?,
            config.as_ref(),
        )?);
    }

    let mut outcomes: Vec<Option<CaseOutcome>> = vec![None; cases.len()];
    let mut summaries: Vec<Option<CaseSummary>> = vec![None; cases.len()];
    let mut pending = Vec::new();
    for (k, hash) in hashes.iter().enumerate() {
        match load_cached(&cases_dir.join(format!("{hash}.json")), out_dir) {
            Some(outcome) => {
                summaries[k] = Some(CaseSummary {
                    material: cases[k].0,
                    thickness_nm: cases[k].1,
                    hash: hash.clone(),
                    cached: true,
                    warnings: outcome.warnings.clone(),
                    error: None,
                });
                outcomes[k] = Some(outcome);
            }
            None => pending.push(k),
        }
    }
    let invocations = pending.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Sweep(format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<CaseMessage>();
    std::thread::scope(|scope| -> Result<()> {
        let producer = scope.spawn(|| {
            pool.install(|| {
                use rayon::prelude::*;
                pending.par_iter().for_each_with(tx, |tx, &k| {
                    let (m, t) = cases[k];
                    let result = runner(plan, m, t);
                    // the collector outlives every worker
                    let _ = tx.send(CaseMessage {
                        index: k,
                        hash: hashes[k].clone(),
                        result,
                    });
                });
            })
        });
        // single collector: every file write happens on this thread
        for msg in rx {
            let (m, t) = cases[msg.index];
            match msg.result {
                Ok(output) => {
                    for (rel, csv) in &output.maps {
                        write_file(&out_dir.join(rel), csv)?;
                    }
                    let outcome = CaseOutcome {
                        material: m,
                        thickness_nm: t,
                        records: output.records,
                        warnings: output.warnings,
                    };
                    let entry = cases_dir.join(format!("{}.json", msg.hash));
                    write_file(&entry, serde_json::to_string(&outcome)?)?;
                    summaries[msg.index] = Some(CaseSummary {
                        material: m,
                        thickness_nm: t,
                        hash: msg.hash,
                        cached: false,
                        warnings: outcome.warnings.clone(),
                        error: None,
                    });
                    outcomes[msg.index] = Some(outcome);
                }
                Err(e) => {
                    summaries[msg.index] = Some(CaseSummary {
                        material: m,
                        thickness_nm: t,
                        hash: msg.hash,
                        cached: false,
                        warnings: Vec::new(),
                        error: Some(e.to_string()),
                    });
                }
            }
        }
        producer
            .join()
            .map_err(|_| Error::Sweep("a sweep worker panicked".into()))?;
        Ok(())
    })?;

    let mut records = Vec::with_capacity(cases.len() * plan.wavelengths_nm.len());
    let mut wavelengths = plan.wavelengths_nm.clone();
    wavelengths.sort_by(f64::total_cmp);
    for (k, &(m, t)) in cases.iter().enumerate() {
        match &outcomes[k] {
            Some(o) => records.extend(o.records.iter().cloned()),
            None => records.extend(wavelengths.iter().map(|&w| SampleRecord::invalid(m, t, w))),
        }
    }
    if outcomes.iter().all(Option::is_none) {
        let first = summaries
            .iter()
            .flatten()
            .find_map(|s| s.error.clone())
            .unwrap_or_default();
        return Err(Error::Sweep(format!(
            "all {} cases failed; first error: {first}",
            cases.len()
        )));
    }
    write_records(&out_dir.join(RECORDS_FILE), &records)?;

    let valid: Vec<&SampleRecord> = records.iter().filter(|r| r.is_valid()).collect();
    let mut scalers = BTreeMap::new();
    let columns: [(&str, fn(&SampleRecord) -> f64); 4] = [
        ("thickness_nm", |r| r.thickness_nm),
        ("wavelength_nm", |r| r.wavelength_nm),
        ("absorbed_power", |r| r.absorbed_power),
        ("absorbed_flux", |r| r.absorbed_flux),
    ];
    for (name, get) in columns {
        let values: Vec<f64> = valid.iter().map(|r| get(r)).collect();
        if let Ok(p) = ScalerParams::fit(name, &values) {
            scalers.insert(name.to_string(), p);
        }
    }

    let manifest = SweepManifest {
        plan: plan.clone(),
        engine: plan.engine,
        profile: plan.profile,
        fdtd_config: config,
        wall_time_s: start.elapsed().as_secs_f64(),
        engine_invocations: invocations,
        record_count: records.len(),
        map_count: records.iter().filter(|r| r.map_path.is_some()).count(),
        cases: summaries
            .into_iter()
            .map(|s| s.expect("every case summarized"))
            .collect(),
        one_hot_order: ONE_HOT_ORDER.to_vec(),
        seed: plan.seed,
        scalers,
    };
    write_file(
        &out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Path of the records file inside a sweep directory.
pub fn records_path(dir: &Path) -> PathBuf {
    dir.join(RECORDS_FILE)
}
