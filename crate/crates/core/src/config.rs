//! Machine parameters and the `key = value` configuration format.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineConfig {
    /// Lanes per cluster.
    pub lanes: usize,
    pub clusters: usize,
    /// Bits per vector register.
    pub vlen: usize,
    pub fpu_latency: u64,
    pub glsu_cuts: u32,
    pub reqi_cuts: u32,
    pub ring_cuts: u32,
    pub mem_latency: u64,
    pub mem_width_bytes: usize,
    pub scalar_latency: u64,
    pub scalar_mem_latency: u64,
    /// Cycles from issuing a vector instruction to its acknowledgment
    /// without REQI cuts.
    pub ack_delay: u64,
    /// Vector instructions that may be in flight before the scalar core stalls.
    pub queue_depth: usize,
    pub sldu_latency: u64,
}

/// Keys accepted by [`MachineConfig::set`], in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "lanes",
    "clusters",
    "vlen",
    "fpu_latency",
    "glsu.cuts",
    "reqi.cuts",
    "ring.cuts",
    "mem.latency",
    "mem.width_bytes",
    "scalar.latency",
    "scalar.mem_latency",
    "reqi.ack_delay",
    "queue_depth",
    "sldu.latency",
];

impl MachineConfig {
    /// Default machine with `lanes` x `clusters` lanes: 1024 bits of vector
    /// register per lane and a memory bus of 64 bits per lane.
    pub fn new(lanes: usize, clusters: usize) -> Self {
        MachineConfig {
            lanes,
            clusters,
            vlen: 1024 * lanes * clusters,
            fpu_latency: 4,
            glsu_cuts: 0,
            reqi_cuts: 0,
            ring_cuts: 0,
            mem_latency: 20,
            mem_width_bytes: 8 * lanes * clusters,
            scalar_latency: 1,
            scalar_mem_latency: 5,
            ack_delay: 3,
            queue_depth: 8,
            sldu_latency: 1,
        }
    }

    pub fn total_lanes(&self) -> usize {
        self.lanes * self.clusters
    }

    /// Element groups (one 64-bit word per lane) in one vector register.
    pub fn groups_per_register(&self) -> usize {
        self.vlen / (64 * self.total_lanes())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.lanes == 0 || !self.lanes.is_power_of_two() {
            return bad(format!("lanes = {} must be a power of two", self.lanes));
        }
        if self.clusters == 0 || !self.clusters.is_power_of_two() {
            return bad(format!("clusters = {} must be a power of two", self.clusters));
        }
        if !self.vlen.is_power_of_two() || self.vlen > 65536 {
            return bad(format!("vlen = {} must be a power of two no larger than 65536", self.vlen));
        }
        if self.vlen % (64 * self.total_lanes()) != 0 {
            return bad(format!("vlen = {} must hold a whole number of 64-bit words per lane", self.vlen));
        }
        if self.mem_width_bytes != 8 * self.total_lanes() {
            return bad(format!(
                "mem.width_bytes = {} must equal 8 bytes per lane ({})",
                self.mem_width_bytes,
                8 * self.total_lanes()
            ));
        }
        if self.fpu_latency == 0 || self.ack_delay == 0 || self.queue_depth == 0 || self.sldu_latency == 0 {
            return bad("latencies and queue depth must be positive".into());
        }
        Ok(())
    }

    /// Set one key. Changing `lanes` or `clusters` does not rescale
    /// `vlen` or the memory width; use [`MachineConfig::new`] for that.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue { key: key.into(), value: value.into() };
        let int = || value.trim().parse::<u64>().map_err(|_| bad());
        match key {
            "lanes" => self.lanes = int()? as usize,
            "clusters" => self.clusters = int()? as usize,
            "vlen" => self.vlen = int()? as usize,
            "fpu_latency" => self.fpu_latency = int()?,
            "glsu.cuts" => self.glsu_cuts = u32::try_from(int()?).map_err(|_| bad())?,
            "reqi.cuts" => self.reqi_cuts = u32::try_from(int()?).map_err(|_| bad())?,
            "ring.cuts" => self.ring_cuts = u32::try_from(int()?).map_err(|_| bad())?,
            "mem.latency" => self.mem_latency = int()?,
            "mem.width_bytes" => self.mem_width_bytes = int()? as usize,
            "scalar.latency" => self.scalar_latency = int()?,
            "scalar.mem_latency" => self.scalar_mem_latency = int()?,
            "reqi.ack_delay" => self.ack_delay = int()?,
            "queue_depth" => self.queue_depth = int()? as usize,
            "sldu.latency" => self.sldu_latency = int()?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Parse a configuration file. `lanes` and `clusters` are applied first
    /// so that unspecified sizes follow the defaults for that shape.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: n + 1, message: "expected `key = value`".into() })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut shape = MachineConfig::new(4, 1);
        for (k, v) in &pairs {
            if k == "lanes" || k == "clusters" {
                shape.set(k, v)?;
            }
        }
        let mut cfg = MachineConfig::new(shape.lanes, shape.clusters);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig::new(4, 2)
    }
}

impl fmt::Display for MachineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values = [
            self.lanes.to_string(),
            self.clusters.to_string(),
            self.vlen.to_string(),
            self.fpu_latency.to_string(),
            self.glsu_cuts.to_string(),
            self.reqi_cuts.to_string(),
            self.ring_cuts.to_string(),
            self.mem_latency.to_string(),
            self.mem_width_bytes.to_string(),
            self.scalar_latency.to_string(),
            self.scalar_mem_latency.to_string(),
            self.ack_delay.to_string(),
            self.queue_depth.to_string(),
            self.sldu_latency.to_string(),
        ];
        for (k, v) in CONFIG_KEYS.iter().zip(values) {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
