//! Architectural limits of the virtual accelerator.

use serde::Serialize;

use crate::AccelError;

/// Hardware limits. Every field is configuration; experiments may override
/// any of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccelLimits {
    pub max_factor_degree: usize,
    pub max_variable_degree: usize,
    pub max_domain: usize,
    pub table_cache_bytes: usize,
    pub io_bits_per_second: f64,
    /// Virtual clock used to turn bandwidth into bits per cycle.
    pub clock_hz: f64,
    /// Operand buffer holding the incoming messages of one factor update.
    pub message_buffer_bytes: usize,
}

impl Default for AccelLimits {
    fn default() -> Self {
        Self {
            max_factor_degree: 16,
            max_variable_degree: 256,
            max_domain: 4096,
            table_cache_bytes: 256 * 1024,
            io_bits_per_second: 18e9,
            clock_hz: 1e9,
            message_buffer_bytes: 16 * 4096 * crate::compile::VALUE_BYTES,
        }
    }
}

impl AccelLimits {
    pub fn bits_per_cycle(&self) -> f64 {
        self.io_bits_per_second / self.clock_hz
    }

    /// Cycles to move `bytes` over the I/O path.
    pub fn io_cycles(&self, bytes: usize) -> u64 {
        if bytes == 0 {
            return 0;
        }
        ((bytes * 8) as f64 / self.bits_per_cycle()).ceil() as u64
    }

    /// Applies comma-separated `key=value` overrides such as
    /// `cache=512KB,domain=8192`. Sizes accept `KB`/`MB` suffixes (powers of
    /// 1024); `io` accepts `Gb/s`-style values in bits per second or a plain
    /// number.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self, AccelError> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| AccelError::InvalidLimits(format!("expected key=value, got `{item}`")))?;
            let value = value.trim();
            match key.trim() {
                "cache" => self.table_cache_bytes = parse_bytes(value)?,
                "message-buffer" => self.message_buffer_bytes = parse_bytes(value)?,
                "factor-degree" => self.max_factor_degree = parse_count(value)?,
                "variable-degree" => self.max_variable_degree = parse_count(value)?,
                "domain" => self.max_domain = parse_count(value)?,
                "io" => self.io_bits_per_second = parse_rate(value)?,
                "clock" => self.clock_hz = parse_rate(value)?,
                other => return Err(AccelError::InvalidLimits(format!("unknown limit `{other}`"))),
            }
        }
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<(), AccelError> {
        let bad = |what: &str| Err(AccelError::InvalidLimits(format!("{what} must be positive")));
        if self.table_cache_bytes == 0 {
            return bad("cache");
        }
        if self.message_buffer_bytes == 0 {
            return bad("message buffer");
        }
        if !(self.io_bits_per_second > 0.0 && self.io_bits_per_second.is_finite()) {
            return bad("io rate");
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return bad("clock");
        }
        Ok(())
    }
}

fn parse_count(v: &str) -> Result<usize, AccelError> {
    v.parse().map_err(|_| AccelError::InvalidLimits(format!("not a count: `{v}`")))
}

fn parse_bytes(v: &str) -> Result<usize, AccelError> {
    let upper = v.to_ascii_uppercase();
    let (digits, scale) = if let Some(d) = upper.strip_suffix("KB") {
        (d, 1024)
    } else if let Some(d) = upper.strip_suffix("MB") {
        (d, 1024 * 1024)
    } else if let Some(d) = upper.strip_suffix('B') {
        (d, 1)
    } else {
        (upper.as_str(), 1)
    };
    let n: usize = digits
        .trim()
        .parse()
        .map_err(|_| AccelError::InvalidLimits(format!("not a size: `{v}`")))?;
    Ok(n * scale)
}

fn parse_rate(v: &str) -> Result<f64, AccelError> {
    let lower = v.to_ascii_lowercase();
    let stripped = lower.trim_end_matches("b/s").trim_end_matches("hz");
    let (digits, scale) = match stripped.chars().last() {
        Some('g') => (&stripped[..stripped.len() - 1], 1e9),
        Some('m') => (&stripped[..stripped.len() - 1], 1e6),
        Some('k') => (&stripped[..stripped.len() - 1], 1e3),
        _ => (stripped, 1.0),
    };
    let x: f64 = digits
        .trim()
        .parse()
        .map_err(|_| AccelError::InvalidLimits(format!("not a rate: `{v}`")))?;
    Ok(x * scale)
}
