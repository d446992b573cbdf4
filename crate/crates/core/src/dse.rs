//! Design-space exploration: sweep planning and execution over parameter
//! axes, slowdown normalization, parameter classification, and the
//! improved-setup presets with their comparison report.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::arch::{
    area_cost, preset, read_config_file, AreaWeights, GpuConfig, ParamAxis, Platform, KB,
};
use crate::error::DseError;
use crate::sim::{simulate_with, SimOptions, DEFAULT_CYCLE_CAP};
use crate::workload::{read_kernel_file, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// One axis at a time, every other axis at its base value.
    Single,
    /// Cartesian product of all axes.
    Cross,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub param: ParamAxis,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: GpuConfig,
    pub axes: Vec<AxisSpec>,
    pub workloads: Vec<KernelSpec>,
    pub mode: SweepMode,
}

/// The grids the single-parameter figures use by default. Grids are data:
/// plans may list any values that pass validation.
pub fn default_grid(axis: ParamAxis) -> Vec<u64> {
    match axis {
        ParamAxis::L1Size => vec![16 * KB, 32 * KB, 48 * KB, 96 * KB, 192 * KB],
        ParamAxis::L1Assoc => vec![1, 2, 4, 8],
        ParamAxis::L2Size => vec![128 * KB, 256 * KB, 512 * KB, 1024 * KB, 2048 * KB],
        ParamAxis::L2Assoc => vec![1, 2, 4, 8],
        ParamAxis::CoresPerSmb => vec![8, 16, 32, 64, 128],
        ParamAxis::Regfile => vec![16384, 32768, 65536, 131072, 262144],
        ParamAxis::Shmem => vec![16 * KB, 32 * KB, 64 * KB, 128 * KB, 256 * KB],
        ParamAxis::WarpSchedulers => vec![1, 2, 4, 8, 16],
        ParamAxis::SmbPerSm => vec![1, 2, 4],
        ParamAxis::SmsPerCluster => vec![1, 2, 4, 8],
        ParamAxis::NumSms => vec![1, 2, 4, 8, 16],
    }
}

/// A single-mode plan over every axis at its default grid.
pub fn default_single_plan(base: GpuConfig, workloads: Vec<KernelSpec>) -> SweepPlan {
    SweepPlan {
        base,
        axes: ParamAxis::ALL
            .iter()
            .map(|&param| AxisSpec {
                param,
                values: default_grid(param),
            })
            .collect(),
        workloads,
        mode: SweepMode::Single,
    }
}

/// One sweep point: the overrides applied on top of the base config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointKey {
    pub overrides: Vec<(ParamAxis, u64)>,
}

impl PointKey {
    pub fn baseline() -> Self {
        PointKey { overrides: vec![] }
    }

    pub fn is_baseline(&self) -> bool {
        self.overrides.is_empty()
    }

    /// `baseline` or `axis=value[,axis=value...]`.
    pub fn id(&self) -> String {
        if self.overrides.is_empty() {
            return "baseline".into();
        }
        self.overrides
            .iter()
            .map(|(a, v)| format!("{a}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn axis_desc(&self) -> String {
        if self.overrides.is_empty() {
            return "baseline".into();
        }
        self.overrides
            .iter()
            .map(|(a, _)| a.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn value_desc(&self) -> String {
        if self.overrides.is_empty() {
            return "0".into();
        }
        self.overrides
            .iter()
            .map(|(_, v)| v.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn values(&self) -> Vec<u64> {
        self.overrides.iter().map(|&(_, v)| v).collect()
    }
}

impl fmt::Display for PointKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// One (point, workload) cell. A pair that cannot run is flagged with the
/// error text instead of failing the whole sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub cycles: Option<u64>,
    pub slowdown: Option<f64>,
    pub flagged: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub point: PointKey,
    /// Keyed by workload label.
    pub cells: BTreeMap<String, SweepCell>,
    pub geomean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub base_label: String,
    pub mode: SweepMode,
    pub workloads: Vec<String>,
    pub baseline_cycles: BTreeMap<String, u64>,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    /// (value, geomean) curve of the single-axis points for `param`,
    /// ascending; points whose geomean is undefined are skipped.
    pub fn axis_curve(&self, param: ParamAxis) -> Vec<(u64, f64)> {
        let mut curve: Vec<(u64, f64)> = self
            .entries
            .iter()
            .filter(|e| {
                e.point.overrides.len() == 1 && e.point.overrides[0].0 == param
            })
            .filter_map(|e| e.geomean.map(|g| (e.point.overrides[0].1, g)))
            .collect();
        curve.sort_by_key(|&(v, _)| v);
        curve
    }
}

/// Geometric mean; exactly 1.0 for an all-ones row.
pub fn geomean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let sum: f64 = values.iter().map(|v| v.ln()).sum();
    Some((sum / values.len() as f64).exp())
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub jobs: usize,
    pub cycle_cap: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            jobs: 1,
            cycle_cap: DEFAULT_CYCLE_CAP,
        }
    }
}

fn expand_points(plan: &SweepPlan) -> Result<Vec<(PointKey, GpuConfig)>, DseError> {
    let violations = plan.base.validate();
    if !violations.is_empty() {
        return Err(DseError::Plan(format!(
            "base config is invalid:\n{}",
            crate::error::format_violations(&violations)
        )));
    }
    for axis in &plan.axes {
        let mut sorted = axis.values.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != axis.values {
            return Err(DseError::Plan(format!(
                "values for axis `{}` must be unique and sorted ascending",
                axis.param
            )));
        }
    }
    let mut points = vec![(PointKey::baseline(), plan.base.clone())];
    match plan.mode {
        SweepMode::Single => {
            for axis in &plan.axes {
                for &value in &axis.values {
                    let config = plan.base.apply_override(axis.param, value)?;
                    points.push((
                        PointKey {
                            overrides: vec![(axis.param, value)],
                        },
                        config,
                    ));
                }
            }
        }
        SweepMode::Cross => {
            if !plan.axes.is_empty() {
                let mut combos: Vec<Vec<(ParamAxis, u64)>> = vec![vec![]];
                for axis in &plan.axes {
                    let mut next = Vec::with_capacity(combos.len() * axis.values.len());
                    for combo in &combos {
                        for &value in &axis.values {
                            let mut c = combo.clone();
                            c.push((axis.param, value));
                            next.push(c);
                        }
                    }
                    combos = next;
                }
                for overrides in combos {
                    let mut config = plan.base.clone();
                    for &(param, value) in &overrides {
                        config = config.apply_override(param, value)?;
                    }
                    points.push((PointKey { overrides }, config));
                }
            }
        }
    }
    Ok(points)
}

/// Run every (point, workload) pair and normalize against the base
/// point. The outcome is independent of `jobs` and of evaluation order.
pub fn run_sweep(plan: &SweepPlan, opts: &SweepOptions) -> Result<SweepResult, DseError> {
    for w in &plan.workloads {
        let violations = w.validate();
        if !violations.is_empty() {
            return Err(DseError::Plan(format!(
                "workload `{}` is invalid:\n{}",
                w.label,
                crate::error::format_violations(&violations)
            )));
        }
    }
    let labels: Vec<String> = plan.workloads.iter().map(|w| w.label.clone()).collect();
    {
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(DseError::Plan("workload labels must be unique".into()));
        }
    }
    let points = expand_points(plan)?;

    let jobs_list: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..plan.workloads.len()).map(move |w| (p, w)))
        .collect();
    let outcomes: Vec<Result<u64, String>> = run_jobs(&jobs_list, opts, |&(p, w)| {
        let sim_opts = SimOptions {
            cycle_cap: opts.cycle_cap,
            ..Default::default()
        };
        simulate_with(&points[p].1, &plan.workloads[w], sim_opts)
            .map(|r| r.total_cycles)
            .map_err(|e| e.to_string())
    });

    let per_workload = plan.workloads.len();
    let baseline_outcomes = &outcomes[0..per_workload];
    let mut baseline_cycles = BTreeMap::new();
    for (w, outcome) in baseline_outcomes.iter().enumerate() {
        if let Ok(cycles) = outcome {
            baseline_cycles.insert(labels[w].clone(), *cycles);
        }
    }

    let mut entries = Vec::with_capacity(points.len());
    for (p, (key, _)) in points.iter().enumerate() {
        let mut cells = BTreeMap::new();
        let mut ratios = Vec::new();
        for (w, label) in labels.iter().enumerate() {
            let cell = match (&outcomes[p * per_workload + w], baseline_outcomes[w].as_ref()) {
                (Ok(cycles), Ok(base)) => {
                    let ratio = *cycles as f64 / *base as f64;
                    ratios.push(ratio);
                    SweepCell {
                        cycles: Some(*cycles),
                        slowdown: Some(ratio),
                        flagged: None,
                    }
                }
                (Ok(cycles), Err(_)) => SweepCell {
                    cycles: Some(*cycles),
                    slowdown: None,
                    flagged: Some("baseline failed for this workload".into()),
                },
                (Err(e), _) => SweepCell {
                    cycles: None,
                    slowdown: None,
                    flagged: Some(e.clone()),
                },
            };
            cells.insert(label.clone(), cell);
        }
        entries.push(SweepEntry {
            point: key.clone(),
            cells,
            geomean: geomean(&ratios),
        });
    }

    Ok(SweepResult {
        base_label: plan.base.label.clone(),
        mode: plan.mode,
        workloads: labels,
        baseline_cycles,
        entries,
    })
}

/// Fan a job list over up to `jobs` worker threads; results come back in
/// job order regardless of scheduling.
fn run_jobs<J, T, F>(jobs_list: &[J], opts: &SweepOptions, run: F) -> Vec<T>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> T + Sync,
{
    let workers = opts.jobs.max(1).min(jobs_list.len().max(1));
    if workers <= 1 {
        return jobs_list.iter().map(|j| run(j)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..jobs_list.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs_list.len() {
                    break;
                }
                let out = run(&jobs_list[i]);
                *slots[i].lock().expect("job slot") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("job slot").expect("job ran"))
        .collect()
}

/// Parameter category: saturating resources stop paying off beyond a
/// limit; software-limited ones only pay off after regranularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamCategory {
    Saturating,
    SoftwareLimited,
}

impl ParamCategory {
    pub fn number(&self) -> u8 {
        match self {
            ParamCategory::Saturating => 1,
            ParamCategory::SoftwareLimited => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamClassification {
    pub param: ParamAxis,
    pub category: ParamCategory,
    pub limit: Option<u64>,
}

/// Axes whose benefit depends on grid/block granularity rather than the
/// sweep alone: SMB count, SMs per cluster, total SMs.
pub fn default_software_axes() -> BTreeSet<ParamAxis> {
    [ParamAxis::SmbPerSm, ParamAxis::SmsPerCluster, ParamAxis::NumSms]
        .into_iter()
        .collect()
}

/// Classify one parameter from its single-axis sweep curve. Category-1
/// parameters get the smallest swept value beyond which no larger value
/// improves the geomean by `epsilon` or more (relative change).
pub fn classify(
    result: &SweepResult,
    param: ParamAxis,
    epsilon: f64,
    sw_axes: &BTreeSet<ParamAxis>,
) -> Result<ParamClassification, DseError> {
    if sw_axes.contains(&param) {
        return Ok(ParamClassification {
            param,
            category: ParamCategory::SoftwareLimited,
            limit: None,
        });
    }
    let curve = result.axis_curve(param);
    if curve.len() < 3 {
        return Err(DseError::MissingSweep {
            axis: param.to_string(),
            found: curve.len(),
        });
    }
    let limit = curve
        .iter()
        .enumerate()
        .find_map(|(i, &(value, g))| {
            let saturated = curve[i + 1..]
                .iter()
                .all(|&(_, later)| (g - later) / g < epsilon);
            saturated.then_some(value)
        })
        .unwrap_or(curve.last().expect("nonempty").0);
    Ok(ParamClassification {
        param,
        category: ParamCategory::Saturating,
        limit: Some(limit),
    })
}

/// Classification table over every axis present in the sweep.
pub fn classify_all(
    result: &SweepResult,
    epsilon: f64,
    sw_axes: &BTreeSet<ParamAxis>,
) -> Result<Vec<ParamClassification>, DseError> {
    let mut axes: Vec<ParamAxis> = ParamAxis::ALL
        .iter()
        .copied()
        .filter(|&a| sw_axes.contains(&a) || !result.axis_curve(a).is_empty())
        .collect();
    axes.dedup();
    axes.iter()
        .map(|&a| classify(result, a, epsilon, sw_axes))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupName {
    ReducedDie,
    IncreasedPerfA,
    IncreasedPerfB,
}

impl SetupName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetupName::ReducedDie => "reduced_die",
            SetupName::IncreasedPerfA => "increased_perf_a",
            SetupName::IncreasedPerfB => "increased_perf_b",
        }
    }
}

impl fmt::Display for SetupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovedSetup {
    pub name: SetupName,
    pub platform: Platform,
    pub config: GpuConfig,
}

/// The three proposed configurations per platform: shrink the die at
/// equal performance, or spend the shared L2 on more SMs and L1.
pub fn improved_setups(platform: Platform) -> Vec<ImprovedSetup> {
    let base = preset(platform);
    let build = |name: SetupName, edit: &dyn Fn(&mut GpuConfig)| {
        let mut config = base.clone();
        edit(&mut config);
        config.label = format!("{platform}-{name}");
        debug_assert!(config.validate().is_empty());
        ImprovedSetup {
            name,
            platform,
            config,
        }
    };
    match platform {
        Platform::Tx2 => vec![
            build(SetupName::ReducedDie, &|c| {
                c.sm.warp_schedulers = 2;
                c.sm.regfile_regs = 32768;
                c.sm.shmem_bytes = 16 * KB;
            }),
            build(SetupName::IncreasedPerfA, &|c| {
                c.num_sms = 4;
                c.sm.l1.size_bytes = 96 * KB;
                c.l2.size_bytes = 256 * KB;
            }),
            build(SetupName::IncreasedPerfB, &|c| {
                c.num_sms = 4;
                c.sm.l1.size_bytes = 96 * KB;
                c.l2.size_bytes = 128 * KB;
            }),
        ],
        Platform::Xavier => vec![
            build(SetupName::ReducedDie, &|c| {
                c.sm.warp_schedulers = 2;
                c.sm.regfile_regs = 32768;
            }),
            build(SetupName::IncreasedPerfA, &|c| {
                c.num_sms = 16;
                c.sm.l1.size_bytes = 256 * KB;
                c.l2.size_bytes = 256 * KB;
            }),
            build(SetupName::IncreasedPerfB, &|c| {
                c.num_sms = 16;
                c.sm.l1.size_bytes = 256 * KB;
                c.l2.size_bytes = 128 * KB;
            }),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupRow {
    pub setup: String,
    pub cells: BTreeMap<String, SweepCell>,
    pub geomean: Option<f64>,
    pub area_units: f64,
    pub area_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupComparison {
    pub platform: Platform,
    pub workloads: Vec<String>,
    pub rows: Vec<SetupRow>,
}

/// Baseline plus the three setups, each run over every workload;
/// normalized execution time and the area delta under `weights`.
pub fn compare_setups(
    platform: Platform,
    workloads: &[KernelSpec],
    weights: &AreaWeights,
    opts: &SweepOptions,
) -> Result<SetupComparison, DseError> {
    if workloads.is_empty() {
        return Err(DseError::Plan("setups comparison needs workloads".into()));
    }
    let base = preset(platform);
    let mut configs = vec![("baseline".to_string(), base.clone())];
    configs.extend(
        improved_setups(platform)
            .into_iter()
            .map(|s| (s.name.to_string(), s.config)),
    );
    let base_area = area_cost(&base, weights)?.total_units;

    let jobs_list: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..workloads.len()).map(move |w| (c, w)))
        .collect();
    let outcomes: Vec<Result<u64, String>> = run_jobs(&jobs_list, opts, |&(c, w)| {
        let sim_opts = SimOptions {
            cycle_cap: opts.cycle_cap,
            ..Default::default()
        };
        simulate_with(&configs[c].1, &workloads[w], sim_opts)
            .map(|r| r.total_cycles)
            .map_err(|e| e.to_string())
    });

    let per_workload = workloads.len();
    let mut rows = Vec::with_capacity(configs.len());
    for (c, (name, config)) in configs.iter().enumerate() {
        let mut cells = BTreeMap::new();
        let mut ratios = Vec::new();
        for (w, workload) in workloads.iter().enumerate() {
            let cell = match (&outcomes[c * per_workload + w], &outcomes[w]) {
                (Ok(cycles), Ok(baseline)) => {
                    let ratio = *cycles as f64 / *baseline as f64;
                    ratios.push(ratio);
                    SweepCell {
                        cycles: Some(*cycles),
                        slowdown: Some(ratio),
                        flagged: None,
                    }
                }
                (Ok(cycles), Err(_)) => SweepCell {
                    cycles: Some(*cycles),
                    slowdown: None,
                    flagged: Some("baseline failed for this workload".into()),
                },
                (Err(e), _) => SweepCell {
                    cycles: None,
                    slowdown: None,
                    flagged: Some(e.clone()),
                },
            };
            cells.insert(workload.label.clone(), cell);
        }
        let area = area_cost(config, weights)?.total_units;
        rows.push(SetupRow {
            setup: name.clone(),
            cells,
            geomean: geomean(&ratios),
            area_units: area,
            area_delta: area - base_area,
        });
    }
    Ok(SetupComparison {
        platform,
        workloads: workloads.iter().map(|w| w.label.clone()).collect(),
        rows,
    })
}

/// On-disk sweep plan: a base preset name or config path, the axes, the
/// workload files, and the mode. Relative paths resolve against the plan
/// file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanFile {
    pub base: String,
    pub mode: SweepMode,
    pub workloads: Vec<String>,
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
}

pub fn load_plan(path: &Path) -> Result<SweepPlan, DseError> {
    let text = std::fs::read_to_string(path).map_err(|source| DseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: PlanFile = toml::from_str(&text).map_err(|e| DseError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let base = match file.base.parse::<Platform>() {
        Ok(platform) => preset(platform),
        Err(_) => read_config_file(&dir.join(&file.base))?,
    };
    let workloads = file
        .workloads
        .iter()
        .map(|w| read_kernel_file(&dir.join(w)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepPlan {
        base,
        axes: file.axes,
        workloads,
        mode: file.mode,
    })
}
