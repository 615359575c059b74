//! High-degree vertex estimation by thresholding the discrete second
//! derivative of the infection curve.
//!
//! For each trace and vertex `v` the statistic
//!
//! ```text
//! deg_hat(v) = (I[T(v), T(v) + delta] - I[T(v) - delta, T(v)]) / delta
//! ```
//!
//! estimates `lambda * deg(v)` minus twice the number of neighbors already
//! infected. A vertex is reported when the statistic reaches `tau` in every
//! one of the `K` traces. Both windows are closed, so `v`'s own infection
//! cancels.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::CascadeTrace;
use crate::trace_io::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub delta: f64,
    pub tau: f64,
    pub k: usize,
}

impl EstimatorConfig {
    pub fn new(delta: f64, tau: f64, k: usize) -> Result<Self> {
        let cfg = Self { delta, tau, k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        Ok(())
    }

    /// Same window and threshold with a different trace count.
    pub fn with_k(self, k: usize) -> Self {
        Self { k, ..self }
    }
}

/// Logarithm used in the threshold `tau = n^alpha / log n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

/// Smallest integer strictly greater than `x`, treating values within
/// rounding error of an integer as that integer.
fn strictly_greater_int(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize + 1
    } else {
        x.floor() as usize + 1
    }
}

/// `delta = n^-(alpha - 1/4)`, `tau = n^alpha / log n` and the smallest
/// `K > 1 / (alpha - 3/4)`. Requires `3/4 < alpha < 1`.
pub fn default_params(n: usize, alpha: f64, log_base: LogBase) -> Result<EstimatorConfig> {
    if !(alpha > 0.75 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} is outside (3/4, 1); the threshold estimator is only \
             guaranteed to recover high-degree vertices of degree n^alpha with alpha > 3/4"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let nf = n as f64;
    let log_n = match log_base {
        LogBase::Natural => nf.ln(),
        LogBase::Two => nf.log2(),
    };
    EstimatorConfig::new(
        nf.powf(-(alpha - 0.25)),
        nf.powf(alpha) / log_n,
        strictly_greater_int(1.0 / (alpha - 0.75)),
    )
}

/// Discrete second derivative of the infection curve at `T(v)`.
pub fn deg_hat(trace: &CascadeTrace, v: usize, delta: f64) -> Result<f64> {
    if v >= trace.vertex_count() {
        return Err(Error::VertexNotInTrace(v));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(second_difference(trace, trace.time(v), delta))
}

#[inline]
fn second_difference(trace: &CascadeTrace, t: f64, delta: f64) -> f64 {
    let after = trace.count_closed(t, t + delta) as f64;
    let before = trace.count_closed(t - delta, t) as f64;
    (after - before) / delta
}

#[inline]
fn first_difference(trace: &CascadeTrace, t: f64, delta: f64) -> f64 {
    trace.count_closed(t, t + delta) as f64 / delta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeEstimate {
    pub vertex: usize,
    pub per_trace: Vec<f64>,
    pub passed_all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighDegEstimate {
    /// Vertices passing the threshold in every trace, ascending.
    pub vertices: Vec<usize>,
    /// One row per vertex.
    pub table: Vec<DegreeEstimate>,
}

/// Returns the vertices whose `deg_hat` reaches `tau` in every trace.
///
/// Needs neither the graph, the rate nor the number of high-degree vertices.
pub fn estimate_highdeg(
    traces: &[CascadeTrace],
    config: &EstimatorConfig,
) -> Result<HighDegEstimate> {
    config.validate()?;
    if traces.len() != config.k {
        return Err(Error::InvalidParameter(format!(
            "configured for K = {} traces, got {}",
            config.k,
            traces.len()
        )));
    }
    let n = traces[0].vertex_count();
    for (index, t) in traces.iter().enumerate() {
        if t.vertex_count() != n {
            return Err(Error::TraceMismatch {
                index,
                expected: n,
                found: t.vertex_count(),
            });
        }
    }
    let table: Vec<DegreeEstimate> = (0..n)
        .into_par_iter()
        .map(|v| {
            let per_trace: Vec<f64> = traces
                .iter()
                .map(|t| second_difference(t, t.time(v), config.delta))
                .collect();
            let passed_all = per_trace.iter().all(|&x| x >= config.tau);
            DegreeEstimate {
                vertex: v,
                per_trace,
                passed_all,
            }
        })
        .collect();
    let vertices = table
        .iter()
        .filter(|e| e.passed_all)
        .map(|e| e.vertex)
        .collect();
    Ok(HighDegEstimate { vertices, table })
}

/// One row of the derivative series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativePoint {
    pub time: f64,
    pub first: f64,
    pub second: f64,
}

/// First and second discrete derivatives of the infection curve on the
/// grid `0, step, 2*step, ..` up to the last infection.
pub fn derivative_series(
    trace: &CascadeTrace,
    delta: f64,
    step: f64,
) -> Result<Vec<DerivativePoint>> {
    if !(delta > 0.0) || !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta and grid step must be positive, got {delta} and {step}"
        )));
    }
    let t_max = trace.total_time();
    let mut last = (t_max / step).floor() as usize;
    while (last + 1) as f64 * step <= t_max {
        last += 1;
    }
    while last > 0 && last as f64 * step > t_max {
        last -= 1;
    }
    let rows = last + 1;
    Ok((0..rows)
        .into_par_iter()
        .map(|k| {
            let time = k as f64 * step;
            DerivativePoint {
                time,
                first: first_difference(trace, time, delta),
                second: second_difference(trace, time, delta),
            }
        })
        .collect())
}

pub const DERIVATIVE_HEADER: &str = "time,first_derivative,second_derivative";

pub fn write_derivative_csv(series: &[DerivativePoint], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{DERIVATIVE_HEADER}")?;
    for p in series {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(p.time),
            fmt_f64(p.first),
            fmt_f64(p.second)
        )?;
    }
    Ok(())
}
