//! GPU machine description: SM topology, cache geometries, DRAM, clocks.
//!
//! Holds the built-in `tx2` and `xavier` presets, parameter-override
//! mechanics used by the sweep engine, and a parametric area-cost score.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Violation};

pub const KB: u64 = 1024;
pub const MB: u64 = 1024 * KB;

/// One level of a set-associative cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheGeometry {
    pub size_bytes: u64,
    pub associativity: u32,
    pub line_bytes: u64,
    /// Latency in GPU cycles added by a hit at this level (on top of
    /// the levels in front of it).
    pub hit_latency: u64,
}

impl CacheGeometry {
    pub fn set_count(&self) -> u64 {
        self.size_bytes / (self.associativity as u64 * self.line_bytes)
    }

    fn check(&self, prefix: &str, out: &mut Vec<Violation>) {
        if self.associativity < 1 {
            out.push(Violation::new(
                format!("{prefix}.associativity"),
                "must be >= 1",
            ));
            return;
        }
        if self.line_bytes == 0 || !self.line_bytes.is_power_of_two() {
            out.push(Violation::new(
                format!("{prefix}.line_bytes"),
                format!("{} is not a power of two", self.line_bytes),
            ));
            return;
        }
        let per_set = self.associativity as u64 * self.line_bytes;
        if self.size_bytes % per_set != 0 || self.size_bytes / per_set == 0 {
            out.push(Violation::new(
                format!("{prefix}.size_bytes"),
                format!(
                    "{} does not split into an integral set count >= 1 \
                     ({} ways x {} B lines)",
                    self.size_bytes, self.associativity, self.line_bytes
                ),
            ));
        }
    }
}

/// Per-SM resources. An SM is divided into `smb_per_sm` blocks of CUDA
/// cores; warps are 32 threads wide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmConfig {
    pub smb_per_sm: u32,
    pub cores_per_smb: u32,
    pub warp_schedulers: u32,
    /// 32-bit shader registers in the SM register file.
    pub regfile_regs: u64,
    pub shmem_bytes: u64,
    pub max_threads: u32,
    pub max_blocks: u32,
    pub max_warps: u32,
    pub l1: CacheGeometry,
}

impl SmConfig {
    fn check(&self, out: &mut Vec<Violation>) {
        for (field, value) in [
            ("sm.smb_per_sm", self.smb_per_sm as u64),
            ("sm.cores_per_smb", self.cores_per_smb as u64),
            ("sm.warp_schedulers", self.warp_schedulers as u64),
            ("sm.regfile_regs", self.regfile_regs),
            ("sm.max_threads", self.max_threads as u64),
            ("sm.max_blocks", self.max_blocks as u64),
            ("sm.max_warps", self.max_warps as u64),
        ] {
            if value < 1 {
                out.push(Violation::new(field, "must be >= 1"));
            }
        }
        if self.max_threads / 32 > self.max_warps {
            out.push(Violation::new(
                "sm.max_threads",
                format!(
                    "{} threads need {} warps but max_warps is {}",
                    self.max_threads,
                    self.max_threads / 32,
                    self.max_warps
                ),
            ));
        }
        if self.warp_schedulers > self.smb_per_sm * 4 {
            out.push(Violation::new(
                "sm.warp_schedulers",
                format!(
                    "{} exceeds sanity bound of 4 per SMB ({} SMBs)",
                    self.warp_schedulers, self.smb_per_sm
                ),
            ));
        }
        self.l1.check("sm.l1", out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DramConfig {
    pub bandwidth_bytes_per_cycle: f64,
    /// Cycles added by a DRAM access on top of an L2 miss.
    pub latency_cycles: u64,
    pub l2_banks: u32,
}

impl DramConfig {
    fn check(&self, out: &mut Vec<Violation>) {
        if !(self.bandwidth_bytes_per_cycle > 0.0) || !self.bandwidth_bytes_per_cycle.is_finite() {
            out.push(Violation::new(
                "dram.bandwidth_bytes_per_cycle",
                "must be > 0",
            ));
        }
        if self.latency_cycles < 1 {
            out.push(Violation::new("dram.latency_cycles", "must be >= 1"));
        }
        if self.l2_banks < 1 || !self.l2_banks.is_power_of_two() {
            out.push(Violation::new(
                "dram.l2_banks",
                format!("{} is not a power of two >= 1", self.l2_banks),
            ));
        }
    }
}

/// Full machine description; the state vector of the design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuConfig {
    pub num_sms: u32,
    pub sms_per_cluster: u32,
    pub sm: SmConfig,
    pub l2: CacheGeometry,
    pub dram: DramConfig,
    pub clock_ghz: f64,
    pub label: String,
}

impl GpuConfig {
    /// Every violated invariant, with field paths. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.num_sms < 1 {
            out.push(Violation::new("num_sms", "must be >= 1"));
        }
        if self.sms_per_cluster < 1 {
            out.push(Violation::new("sms_per_cluster", "must be >= 1"));
        } else if self.num_sms % self.sms_per_cluster != 0 {
            out.push(Violation::new(
                "num_sms",
                format!(
                    "{} is not divisible by sms_per_cluster = {}",
                    self.num_sms, self.sms_per_cluster
                ),
            ));
        }
        self.sm.check(&mut out);
        self.l2.check("l2", &mut out);
        self.dram.check(&mut out);
        if self.l2.line_bytes != self.sm.l1.line_bytes {
            out.push(Violation::new(
                "l2.line_bytes",
                format!(
                    "{} differs from sm.l1.line_bytes = {} (single line size through hierarchy)",
                    self.l2.line_bytes, self.sm.l1.line_bytes
                ),
            ));
        }
        if !(self.clock_ghz > 0.0) || !self.clock_ghz.is_finite() {
            out.push(Violation::new("clock_ghz", "must be > 0"));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn total_cuda_cores(&self) -> u64 {
        self.num_sms as u64 * self.sm.smb_per_sm as u64 * self.sm.cores_per_smb as u64
    }

    pub fn clusters(&self) -> u32 {
        self.num_sms / self.sms_per_cluster
    }

    /// Returns a copy differing only in `axis` (and the label suffix).
    /// The result is re-validated; a value that breaks an invariant is
    /// rejected with the violation list.
    ///
    /// `sms_per_cluster` is the one coupled axis: it keeps the cluster
    /// count fixed and scales `num_sms` with it, since both axes grow
    /// the total SM count and the divisibility invariant must hold.
    pub fn apply_override(&self, axis: ParamAxis, value: u64) -> Result<GpuConfig, ConfigError> {
        let mut cfg = self.clone();
        let reject = |violations| ConfigError::OverrideRejected {
            axis: axis.to_string(),
            value,
            violations,
        };
        let as_u32 = |field: &str| -> Result<u32, ConfigError> {
            u32::try_from(value).map_err(|_| {
                reject(vec![Violation::new(
                    field,
                    format!("{value} exceeds the supported range"),
                )])
            })
        };
        match axis {
            ParamAxis::L1Size => cfg.sm.l1.size_bytes = value,
            ParamAxis::L1Assoc => cfg.sm.l1.associativity = as_u32("sm.l1.associativity")?,
            ParamAxis::L2Size => cfg.l2.size_bytes = value,
            ParamAxis::L2Assoc => cfg.l2.associativity = as_u32("l2.associativity")?,
            ParamAxis::CoresPerSmb => cfg.sm.cores_per_smb = as_u32("sm.cores_per_smb")?,
            ParamAxis::Regfile => cfg.sm.regfile_regs = value,
            ParamAxis::Shmem => cfg.sm.shmem_bytes = value,
            ParamAxis::WarpSchedulers => cfg.sm.warp_schedulers = as_u32("sm.warp_schedulers")?,
            ParamAxis::SmbPerSm => cfg.sm.smb_per_sm = as_u32("sm.smb_per_sm")?,
            ParamAxis::SmsPerCluster => {
                let clusters = self.clusters().max(1);
                cfg.sms_per_cluster = as_u32("sms_per_cluster")?;
                cfg.num_sms = clusters
                    .checked_mul(cfg.sms_per_cluster)
                    .ok_or_else(|| {
                        reject(vec![Violation::new("num_sms", "overflow scaling clusters")])
                    })?;
            }
            ParamAxis::NumSms => cfg.num_sms = as_u32("num_sms")?,
        }
        cfg.label = override_label(&self.label, axis, value);
        let violations = cfg.validate();
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(reject(violations))
        }
    }
}

/// Labels carry override history as sorted `+axis=value` suffixes so that
/// re-applying an override is idempotent and order never matters.
fn override_label(label: &str, axis: ParamAxis, value: u64) -> String {
    let mut parts = label.split('+');
    let base = parts.next().unwrap_or("");
    let mut overrides: BTreeMap<&str, String> = parts
        .filter_map(|p| p.split_once('='))
        .map(|(a, v)| (a, v.to_string()))
        .collect();
    let axis_name = axis.as_str();
    overrides.insert(axis_name, value.to_string());
    let mut s = base.to_string();
    for (a, v) in overrides {
        s.push('+');
        s.push_str(a);
        s.push('=');
        s.push_str(&v);
    }
    s
}

/// The eleven single-parameter sweep axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamAxis {
    L1Size,
    L1Assoc,
    L2Size,
    L2Assoc,
    CoresPerSmb,
    Regfile,
    Shmem,
    WarpSchedulers,
    SmbPerSm,
    SmsPerCluster,
    NumSms,
}

impl ParamAxis {
    pub const ALL: [ParamAxis; 11] = [
        ParamAxis::L1Size,
        ParamAxis::L1Assoc,
        ParamAxis::L2Size,
        ParamAxis::L2Assoc,
        ParamAxis::CoresPerSmb,
        ParamAxis::Regfile,
        ParamAxis::Shmem,
        ParamAxis::WarpSchedulers,
        ParamAxis::SmbPerSm,
        ParamAxis::SmsPerCluster,
        ParamAxis::NumSms,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamAxis::L1Size => "l1_size",
            ParamAxis::L1Assoc => "l1_assoc",
            ParamAxis::L2Size => "l2_size",
            ParamAxis::L2Assoc => "l2_assoc",
            ParamAxis::CoresPerSmb => "cores_per_smb",
            ParamAxis::Regfile => "regfile",
            ParamAxis::Shmem => "shmem",
            ParamAxis::WarpSchedulers => "warp_schedulers",
            ParamAxis::SmbPerSm => "smb_per_sm",
            ParamAxis::SmsPerCluster => "sms_per_cluster",
            ParamAxis::NumSms => "num_sms",
        }
    }
}

impl fmt::Display for ParamAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamAxis::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ConfigError::Parse {
                path: "<param>".into(),
                message: format!("unknown parameter axis `{s}`"),
            })
    }
}

/// The two modeled platforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Tx2,
    Xavier,
}

impl Platform {
    pub fn as_str(&self) -> &'static str {
        match self {
            Platform::Tx2 => "tx2",
            Platform::Xavier => "xavier",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tx2" => Ok(Platform::Tx2),
            "xavier" => Ok(Platform::Xavier),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

// Hit latencies are not public for these parts; 28 / +120 / +220 cycles are
// typical Pascal-class figures. They shift absolute cycle counts only.
const L1_HIT_LATENCY: u64 = 28;
const L2_HIT_LATENCY: u64 = 120;
const DRAM_LATENCY: u64 = 220;
const LINE_BYTES: u64 = 64;

/// Baseline machine description for the named platform.
pub fn preset(platform: Platform) -> GpuConfig {
    match platform {
        // Pascal-class: 256 CUDA cores as 2 SMs x 4 SMBs x 32 cores,
        // 48KB 4-way L1, 512KB 4-way shared L2, 59.7 GB/s at 1.1 GHz.
        Platform::Tx2 => GpuConfig {
            num_sms: 2,
            sms_per_cluster: 1,
            sm: SmConfig {
                smb_per_sm: 4,
                cores_per_smb: 32,
                warp_schedulers: 4,
                regfile_regs: 65536,
                shmem_bytes: 64 * KB,
                max_threads: 2048,
                max_blocks: 32,
                max_warps: 64,
                l1: CacheGeometry {
                    size_bytes: 48 * KB,
                    associativity: 4,
                    line_bytes: LINE_BYTES,
                    hit_latency: L1_HIT_LATENCY,
                },
            },
            l2: CacheGeometry {
                size_bytes: 512 * KB,
                associativity: 4,
                line_bytes: LINE_BYTES,
                hit_latency: L2_HIT_LATENCY,
            },
            dram: DramConfig {
                bandwidth_bytes_per_cycle: 59.7 / 1.1,
                latency_cycles: DRAM_LATENCY,
                l2_banks: 16,
            },
            clock_ghz: 1.1,
            label: "tx2".into(),
        },
        // Volta-class: 512 CUDA cores as 8 SMs x 4 SMBs x 16 cores,
        // 64KB 4-way L1, 512KB 4-way shared L2, 137 GB/s at 1.37 GHz.
        // Shared memory size is not published for this part; carried
        // from the Pascal baseline (64KB) and freely overridable.
        Platform::Xavier => GpuConfig {
            num_sms: 8,
            sms_per_cluster: 1,
            sm: SmConfig {
                smb_per_sm: 4,
                cores_per_smb: 16,
                warp_schedulers: 4,
                regfile_regs: 65536,
                shmem_bytes: 64 * KB,
                max_threads: 2048,
                max_blocks: 32,
                max_warps: 64,
                l1: CacheGeometry {
                    size_bytes: 64 * KB,
                    associativity: 4,
                    line_bytes: LINE_BYTES,
                    hit_latency: L1_HIT_LATENCY,
                },
            },
            l2: CacheGeometry {
                size_bytes: 512 * KB,
                associativity: 4,
                line_bytes: LINE_BYTES,
                hit_latency: L2_HIT_LATENCY,
            },
            dram: DramConfig {
                bandwidth_bytes_per_cycle: 137.0 / 1.37,
                latency_cycles: DRAM_LATENCY,
                l2_banks: 16,
            },
            clock_ghz: 1.37,
            label: "xavier".into(),
        },
    }
}

/// Preset lookup by name; unknown names are a configuration error.
pub fn preset_by_name(name: &str) -> Result<GpuConfig, ConfigError> {
    Ok(preset(name.parse::<Platform>()?))
}

/// Area-score coefficients. Defaults treat one byte of SRAM as one unit;
/// cores, schedulers and the fixed per-SM overhead get flat stand-in
/// scores. Overridable via a weights file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AreaWeights {
    pub per_cuda_core: f64,
    pub per_regfile_byte: f64,
    pub per_shmem_byte: f64,
    pub per_l1_byte: f64,
    pub per_l2_byte: f64,
    pub per_scheduler: f64,
    pub per_sm_fixed: f64,
}

impl Default for AreaWeights {
    fn default() -> Self {
        AreaWeights {
            per_cuda_core: 256.0,
            per_regfile_byte: 1.0,
            per_shmem_byte: 1.0,
            per_l1_byte: 1.0,
            per_l2_byte: 1.0,
            per_scheduler: 512.0,
            per_sm_fixed: 4096.0,
        }
    }
}

impl AreaWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, w) in [
            ("per_cuda_core", self.per_cuda_core),
            ("per_regfile_byte", self.per_regfile_byte),
            ("per_shmem_byte", self.per_shmem_byte),
            ("per_l1_byte", self.per_l1_byte),
            ("per_l2_byte", self.per_l2_byte),
            ("per_scheduler", self.per_scheduler),
            ("per_sm_fixed", self.per_sm_fixed),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(ConfigError::NegativeWeight(name.to_string()));
            }
        }
        Ok(())
    }
}

/// Dimensionless area score, split by component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaCost {
    pub total_units: f64,
    pub per_component: BTreeMap<String, f64>,
}

/// Linear area score: per-SM components multiply by `num_sms`; the shared
/// L2 is counted once. Registers are 4 bytes each.
pub fn area_cost(config: &GpuConfig, weights: &AreaWeights) -> Result<AreaCost, ConfigError> {
    weights.validate()?;
    let sms = config.num_sms as f64;
    let sm = &config.sm;
    let mut per_component = BTreeMap::new();
    per_component.insert(
        "cuda_cores".to_string(),
        config.total_cuda_cores() as f64 * weights.per_cuda_core,
    );
    per_component.insert(
        "regfile".to_string(),
        sms * (sm.regfile_regs * 4) as f64 * weights.per_regfile_byte,
    );
    per_component.insert(
        "shmem".to_string(),
        sms * sm.shmem_bytes as f64 * weights.per_shmem_byte,
    );
    per_component.insert(
        "l1".to_string(),
        sms * sm.l1.size_bytes as f64 * weights.per_l1_byte,
    );
    per_component.insert(
        "l2".to_string(),
        config.l2.size_bytes as f64 * weights.per_l2_byte,
    );
    per_component.insert(
        "schedulers".to_string(),
        sms * sm.warp_schedulers as f64 * weights.per_scheduler,
    );
    per_component.insert("sm_fixed".to_string(), sms * weights.per_sm_fixed);
    let total_units = per_component.values().sum();
    Ok(AreaCost {
        total_units,
        per_component,
    })
}

pub fn config_to_toml(config: &GpuConfig) -> String {
    toml::to_string_pretty(config).expect("GpuConfig serializes")
}

pub fn config_from_toml(text: &str) -> Result<GpuConfig, ConfigError> {
    let cfg: GpuConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: "<config>".into(),
        message: e.to_string(),
    })?;
    let violations = cfg.validate();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

pub fn read_config_file(path: &Path) -> Result<GpuConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    config_from_toml(&text).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

pub fn write_config_file(path: &Path, config: &GpuConfig) -> Result<(), ConfigError> {
    std::fs::write(path, config_to_toml(config)).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn weights_from_toml(text: &str) -> Result<AreaWeights, ConfigError> {
    let w: AreaWeights = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: "<weights>".into(),
        message: e.to_string(),
    })?;
    w.validate()?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tx2_preset_matches_published_numbers() {
        let cfg = preset(Platform::Tx2);
        assert_eq!(cfg.num_sms, 2);
        assert_eq!(cfg.total_cuda_cores(), 256);
        assert_eq!(cfg.sm.l1.size_bytes, 49152);
        assert_eq!(cfg.l2.size_bytes, 524288);
        assert_eq!(cfg.sm.regfile_regs, 65536);
        assert_eq!(cfg.clock_ghz, 1.1);
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn xavier_preset_matches_published_numbers() {
        let cfg = preset(Platform::Xavier);
        assert_eq!(cfg.num_sms, 8);
        assert_eq!(cfg.total_cuda_cores(), 512);
        assert_eq!(cfg.sm.cores_per_smb, 16);
        assert_eq!(cfg.sm.l1.size_bytes, 65536);
        assert_eq!(cfg.clock_ghz, 1.37);
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn presets_are_stable_constants() {
        assert_eq!(preset(Platform::Tx2), preset(Platform::Tx2));
        assert_eq!(
            config_to_toml(&preset(Platform::Xavier)),
            config_to_toml(&preset(Platform::Xavier))
        );
        assert!(preset_by_name("volta").is_err());
    }

    #[test]
    fn odd_associativity_with_integral_sets_is_fine() {
        // 48KB / (3 ways * 64B) = 256 sets, integral.
        let mut cfg = preset(Platform::Tx2);
        cfg.sm.l1.associativity = 3;
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn cluster_divisibility_is_checked() {
        let mut cfg = preset(Platform::Tx2);
        cfg.num_sms = 3;
        cfg.sms_per_cluster = 2;
        let violations = cfg.validate();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "num_sms");
    }

    #[test]
    fn override_l2_size_touches_one_field() {
        let base = preset(Platform::Tx2);
        let v = base.apply_override(ParamAxis::L2Size, 256 * KB).unwrap();
        assert_eq!(v.l2.size_bytes, 262144);
        let mut expected = base.clone();
        expected.l2.size_bytes = 262144;
        expected.label = "tx2+l2_size=262144".into();
        assert_eq!(v, expected);
    }

    #[test]
    fn override_num_sms_scales_cores() {
        let v = preset(Platform::Tx2)
            .apply_override(ParamAxis::NumSms, 4)
            .unwrap();
        assert_eq!(v.total_cuda_cores(), 512);
    }

    #[test]
    fn override_rejects_non_integral_sets() {
        // 49152 / (5 * 64) = 153.6 sets.
        let err = preset(Platform::Tx2)
            .apply_override(ParamAxis::L1Assoc, 5)
            .unwrap_err();
        match err {
            ConfigError::OverrideRejected { violations, .. } => {
                assert!(violations.iter().any(|v| v.field == "sm.l1.size_bytes"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn override_is_idempotent() {
        let base = preset(Platform::Tx2);
        let once = base.apply_override(ParamAxis::L1Size, 96 * KB).unwrap();
        let twice = once.apply_override(ParamAxis::L1Size, 96 * KB).unwrap();
        assert_eq!(once, twice);
        let cluster_once = base.apply_override(ParamAxis::SmsPerCluster, 4).unwrap();
        let cluster_twice = cluster_once
            .apply_override(ParamAxis::SmsPerCluster, 4)
            .unwrap();
        assert_eq!(cluster_once, cluster_twice);
        assert_eq!(cluster_once.num_sms, 8);
    }

    #[test]
    fn distinct_overrides_commute() {
        let base = preset(Platform::Tx2);
        let ab = base
            .apply_override(ParamAxis::L1Size, 96 * KB)
            .unwrap()
            .apply_override(ParamAxis::WarpSchedulers, 2)
            .unwrap();
        let ba = base
            .apply_override(ParamAxis::WarpSchedulers, 2)
            .unwrap()
            .apply_override(ParamAxis::L1Size, 96 * KB)
            .unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn area_cost_examples() {
        let tx2 = preset(Platform::Tx2);
        let zero = AreaWeights {
            per_cuda_core: 0.0,
            per_regfile_byte: 0.0,
            per_shmem_byte: 0.0,
            per_l1_byte: 0.0,
            per_l2_byte: 0.0,
            per_scheduler: 0.0,
            per_sm_fixed: 0.0,
        };
        assert_eq!(area_cost(&tx2, &zero).unwrap().total_units, 0.0);

        // L2 is shared: counted once, not per SM.
        let l2_only = AreaWeights {
            per_l2_byte: 1.0,
            ..zero.clone()
        };
        assert_eq!(area_cost(&tx2, &l2_only).unwrap().total_units, 524288.0);

        // Cache-bytes-only comparison of the baseline against a variant
        // with 4 SMs, 96KB L1 and 256KB L2.
        let cache_bytes = AreaWeights {
            per_l1_byte: 1.0,
            per_l2_byte: 1.0,
            ..zero
        };
        assert_eq!(
            area_cost(&tx2, &cache_bytes).unwrap().total_units,
            622592.0
        );
        let variant = tx2
            .apply_override(ParamAxis::NumSms, 4)
            .unwrap()
            .apply_override(ParamAxis::L1Size, 96 * KB)
            .unwrap()
            .apply_override(ParamAxis::L2Size, 256 * KB)
            .unwrap();
        assert_eq!(
            area_cost(&variant, &cache_bytes).unwrap().total_units,
            655360.0
        );
    }

    #[test]
    fn area_cost_is_linear_in_weights() {
        let tx2 = preset(Platform::Tx2);
        let w = AreaWeights::default();
        let doubled = AreaWeights {
            per_cuda_core: w.per_cuda_core * 2.0,
            per_regfile_byte: w.per_regfile_byte * 2.0,
            per_shmem_byte: w.per_shmem_byte * 2.0,
            per_l1_byte: w.per_l1_byte * 2.0,
            per_l2_byte: w.per_l2_byte * 2.0,
            per_scheduler: w.per_scheduler * 2.0,
            per_sm_fixed: w.per_sm_fixed * 2.0,
        };
        let base = area_cost(&tx2, &w).unwrap();
        let twice = area_cost(&tx2, &doubled).unwrap();
        assert_eq!(twice.total_units, base.total_units * 2.0);
        assert_eq!(
            base.total_units,
            base.per_component.values().sum::<f64>()
        );
    }

    #[test]
    fn negative_weight_is_rejected() {
        let w = AreaWeights {
            per_l1_byte: -1.0,
            ..AreaWeights::default()
        };
        assert!(area_cost(&preset(Platform::Tx2), &w).is_err());
    }

    #[test]
    fn config_toml_round_trips() {
        let cfg = preset(Platform::Xavier);
        let text = config_to_toml(&cfg);
        assert_eq!(config_from_toml(&text).unwrap(), cfg);
    }
}
