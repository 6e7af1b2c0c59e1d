use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::node::Tick;
use crate::validity::ProcessId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub gst: Tick,
    pub delta: Tick,
    pub seed: u64,
}

impl NetworkParams {
    pub fn new(gst: Tick, delta: Tick, seed: u64) -> Self {
        assert!(delta >= 1, "delta must be at least one tick");
        NetworkParams { gst, delta, seed }
    }

    /// Latest admissible delivery time of a message sent at `send`.
    pub fn deadline(&self, send: Tick) -> Tick {
        send.max(self.gst) + self.delta
    }
}

/// Delivery-delay policy. Every message takes at least one tick and arrives by
/// `max(send, gst) + delta`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    /// One tick, always.
    Immediate,
    /// Exactly `delta`, always.
    #[default]
    Synchronous,
    /// Worst case: every message arrives at its deadline.
    MaxDelay,
    /// Uniform in `[1, deadline - send]`, seeded by the scenario seed.
    Random,
    /// Before GST, messages inside a group take one tick and messages across groups are
    /// held until the deadline. After GST, `delta`.
    Partition { groups: Vec<Vec<ProcessId>> },
}

impl Schedule {
    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Immediate => "immediate",
            Schedule::Synchronous => "synchronous",
            Schedule::MaxDelay => "max_delay",
            Schedule::Random => "random",
            Schedule::Partition { .. } => "partition",
        }
    }

    pub fn deliver_at(
        &self,
        net: &NetworkParams,
        send: Tick,
        from: ProcessId,
        to: ProcessId,
        rng: &mut ChaCha8Rng,
    ) -> Tick {
        let deadline = net.deadline(send);
        let t = match self {
            Schedule::Immediate => send + 1,
            Schedule::Synchronous => send + net.delta,
            Schedule::MaxDelay => deadline,
            Schedule::Random => send + rng.gen_range(1..=deadline - send),
            Schedule::Partition { groups } => {
                if send >= net.gst {
                    send + net.delta
                } else {
                    let group = |p| groups.iter().position(|g| g.contains(&p));
                    match (group(from), group(to)) {
                        (Some(a), Some(b)) if a == b => send + 1,
                        _ => deadline,
                    }
                }
            }
        };
        t.clamp(send + 1, deadline)
    }
}
