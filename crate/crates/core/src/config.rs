//! Run configuration with the algorithm constants and the simplified
//! electrical model coefficients.

/// Tunable constants for the hardening strategies and metric models.
///
/// Defaults follow the contest-style setup: 20-site vulnerable-region
/// threshold, 3 consecutive stuck rounds before pushes, 0.05% of nets
/// rerouted per round, and 2x widening.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Minimum contiguous empty sites that make a region vulnerable.
    pub vr_threshold: u32,
    /// Consecutive non-improving rounds before switching to pushes.
    pub stuck_max: u32,
    /// Fraction of total nets rerouted per hardening round.
    pub nets_per_rd_frac: f64,
    /// Width multiplier applied to widened nets.
    pub widen_mult: f64,
    /// Clock period in ns.
    pub clock_period_ns: f64,
    /// Switching activity factor for dynamic power.
    pub activity: f64,
    /// Non-improving rounds tolerated in exposure hardening before revert.
    pub patience: u32,
    /// Hard cap on placement-hardening iterations.
    pub max_ti_iters: u32,
    /// Supply voltage in V (dynamic power model).
    pub voltage: f64,
    /// Wire capacitance in fF per µm (dynamic power model).
    pub wire_cap_ff_per_um: f64,
    /// Wire delay in ns per µm (lumped linear delay model).
    pub wire_delay_ns_per_um: f64,
    /// Demotion ceiling override; derived from the stack height when unset.
    pub m_top: Option<u8>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            vr_threshold: 20,
            stuck_max: 3,
            nets_per_rd_frac: 0.0005,
            widen_mult: 2.0,
            clock_period_ns: 2.0,
            activity: 0.2,
            patience: 3,
            max_ti_iters: 1000,
            voltage: 1.1,
            wire_cap_ff_per_um: 0.2,
            wire_delay_ns_per_um: 0.00025,
            m_top: None,
        }
    }
}

impl RunConfig {
    /// Nets rerouted per round: `max(1, ceil(frac * total))` so small
    /// designs still make progress.
    pub fn nets_per_round(&self, total_nets: usize) -> usize {
        let x = self.nets_per_rd_frac * total_nets as f64;
        let mut k = x as usize;
        if (k as f64) < x {
            k += 1;
        }
        k.max(1)
    }
}
