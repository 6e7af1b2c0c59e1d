use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use crate::simnet::{Message, Step, Tick, WordCost};
use crate::validity::ProcessId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbftMsg {
    /// Binary-value broadcast of an estimate.
    Est { round: u64, bit: u8 },
    /// Estimates the sender has seen justified, as a bitmask.
    Aux { round: u64, bits: u8 },
    Coord { round: u64, bit: u8 },
}

impl Message for DbftMsg {
    fn tag(&self) -> &'static str {
        match self {
            DbftMsg::Est { .. } => "BV_VAL",
            DbftMsg::Aux { .. } => "AUX",
            DbftMsg::Coord { .. } => "COORD",
        }
    }

    fn cost(&self) -> WordCost {
        WordCost::values(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DbftTimer(pub u64);

pub type DbftStep = Step<DbftMsg, DbftTimer, u8>;

#[derive(Default)]
struct Round {
    est_from: [BTreeSet<ProcessId>; 2],
    est_sent: [bool; 2],
    bin_values: u8,
    coord: Option<u8>,
    coord_sent: bool,
    aux_from: BTreeMap<ProcessId, u8>,
    aux_sent: bool,
    timer_expired: bool,
}

/// Signature-free randomization-free binary consensus for partial synchrony.
///
/// Each round runs a binary-value broadcast (relay an estimate once `t + 1` processes sent
/// it, accept it once `2t + 1` did), a coordinator hint from `P((r - 1) mod n + 1)`, and an
/// AUX exchange. A process whose `n - t` AUX sets all agree on `{v}` adopts `v` and decides
/// it when `v = r mod 2`; otherwise it adopts `r mod 2`. Deciders keep going for two more
/// rounds, enough for every correct process to decide, then stop.
pub struct Dbft {
    n: usize,
    t: usize,
    me: ProcessId,
    delta: Tick,
    started: bool,
    round: u64,
    est: u8,
    rounds: BTreeMap<u64, Round>,
    decided: Option<(u8, u64)>,
    finished: bool,
}

fn mask(bit: u8) -> u8 {
    1 << bit
}

impl Dbft {
    pub fn new(me: ProcessId, n: usize, t: usize, delta: Tick) -> Self {
        Dbft {
            n,
            t,
            me,
            delta,
            started: false,
            round: 0,
            est: 0,
            rounds: BTreeMap::new(),
            decided: None,
            finished: false,
        }
    }

    pub fn decided(&self) -> Option<u8> {
        self.decided.map(|(b, _)| b)
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Stopped participating.
    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn has_proposed(&self) -> bool {
        self.started
    }

    fn coordinator(&self, r: u64) -> ProcessId {
        ProcessId(((r - 1) % self.n as u64) as u32 + 1)
    }

    pub fn propose(&mut self, bit: u8) -> DbftStep {
        let mut s = Step::new();
        if self.started {
            return s;
        }
        self.started = true;
        self.est = bit.min(1);
        self.enter_round(1, &mut s);
        s
    }

    fn enter_round(&mut self, r: u64, s: &mut DbftStep) {
        self.round = r;
        self.rounds.retain(|k, _| *k + 2 >= r);
        s.timer((3 + r).saturating_mul(self.delta), DbftTimer(r));
        self.send_est(r, self.est, s);
        self.check(r, s);
    }

    fn send_est(&mut self, r: u64, bit: u8, s: &mut DbftStep) {
        let st = self.rounds.entry(r).or_default();
        if !st.est_sent[bit as usize] {
            st.est_sent[bit as usize] = true;
            s.broadcast(DbftMsg::Est { round: r, bit });
        }
    }

    pub fn on_timer(&mut self, DbftTimer(r): DbftTimer) -> DbftStep {
        let mut s = Step::new();
        if self.finished || r != self.round {
            return s;
        }
        self.rounds.entry(r).or_default().timer_expired = true;
        self.check(r, &mut s);
        s
    }

    pub fn handle(&mut self, from: ProcessId, msg: DbftMsg) -> DbftStep {
        let mut s = Step::new();
        let round = match msg {
            DbftMsg::Est { round, .. } | DbftMsg::Aux { round, .. } | DbftMsg::Coord { round, .. } => round,
        };
        if self.finished || round == 0 || round + 2 < self.round {
            return s;
        }
        let r = match msg {
            DbftMsg::Est { round, bit } if bit <= 1 => {
                self.rounds.entry(round).or_default().est_from[bit as usize].insert(from);
                round
            }
            DbftMsg::Aux { round, bits } if bits != 0 && bits <= 3 => {
                self.rounds.entry(round).or_default().aux_from.entry(from).or_insert(bits);
                round
            }
            DbftMsg::Coord { round, bit } if bit <= 1 && from == self.coordinator(round) => {
                let st = self.rounds.entry(round).or_default();
                st.coord.get_or_insert(bit);
                round
            }
            _ => return s,
        };
        if self.started {
            self.check(r, &mut s);
        }
        s
    }

    /// Re-evaluates every rule of round `r` against the tallies received so far.
    fn check(&mut self, r: u64, s: &mut DbftStep) {
        let (t, quorum) = (self.t, self.n - self.t);
        for bit in 0..2u8 {
            let count = self.rounds.entry(r).or_default().est_from[bit as usize].len();
            if count > t {
                self.send_est(r, bit, s);
            }
            if count > 2 * t {
                self.rounds.get_mut(&r).expect("round").bin_values |= mask(bit);
            }
        }
        if r != self.round {
            return;
        }
        let coordinator = self.coordinator(r);
        let me = self.me;
        let st = self.rounds.get_mut(&r).expect("round");
        if st.bin_values == 0 {
            return;
        }
        if coordinator == me && !st.coord_sent {
            st.coord_sent = true;
            let bit = if st.bin_values & mask(self.est) != 0 { self.est } else { st.bin_values.trailing_zeros() as u8 };
            s.broadcast(DbftMsg::Coord { round: r, bit });
        }
        let hint = st.coord.filter(|b| st.bin_values & mask(*b) != 0);
        if !st.aux_sent && (hint.is_some() || st.timer_expired) {
            st.aux_sent = true;
            let bits = hint.map(mask).unwrap_or(st.bin_values);
            s.broadcast(DbftMsg::Aux { round: r, bits });
        }
        if !st.aux_sent {
            return;
        }
        let mut union = 0u8;
        let mut supporters = 0;
        for bits in st.aux_from.values() {
            if bits & !st.bin_values == 0 {
                union |= bits;
                supporters += 1;
            }
        }
        if supporters < quorum {
            return;
        }
        let parity = (r % 2) as u8;
        if union == 1 || union == 2 {
            let v = union.trailing_zeros() as u8;
            self.est = v;
            if v == parity && self.decided.is_none() {
                self.decided = Some((v, r));
                s.note("binary_decide", json!({ "bit": v, "round": r }));
                s.output(v);
            }
        } else {
            self.est = parity;
        }
        if let Some((_, rd)) = self.decided {
            if r >= rd + 2 {
                self.finished = true;
                return;
            }
        }
        self.enter_round(r + 1, s);
    }
}
