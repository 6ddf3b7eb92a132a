//! Event-driven single-server queue under earliest-deadline-first with
//! preempt-resume.
//!
//! Priorities are absolute deadlines, so the relative order of present
//! customers never changes between events; a preemption can only happen when
//! a customer arrives. Completions are processed before arrivals that fall on
//! the same instant, and equal deadlines are served in arrival order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clock::{Instant, KahanSum};
use crate::dist::{ArrivalLaw, LeadTimeLaw, ServiceLaw};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, StreamTag};

/// Order in which waiting customers are served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    /// Earliest deadline first, preempt-resume.
    #[default]
    Edf,
    /// First in, first out. Only used to cross-check discipline-independent
    /// quantities.
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Customer {
    /// 1-based arrival index.
    pub id: u64,
    pub arrival_time: f64,
    pub service_req: f64,
    pub remaining: f64,
    pub deadline: f64,
}

impl Customer {
    pub fn lead_time(&self, clock: f64) -> f64 {
        self.deadline - clock
    }
}

#[derive(Debug, Clone, Copy)]
struct Priority {
    key: f64,
    id: u64,
}

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Priority {}
impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.id.cmp(&other.id))
    }
}

/// Live state of one queueing system.
#[derive(Debug, Clone)]
pub struct SimState {
    discipline: Discipline,
    clock: Instant,
    in_service: Option<Customer>,
    waiting: BTreeMap<Priority, Customer>,
    waiting_work: KahanSum,
    frontier_deadline: f64,
    idleness: KahanSum,
    arrivals: u64,
    work_arrived: KahanSum,
    arrival_log: Option<Vec<(f64, f64)>>,
    events: u64,
    completions: u64,
    workload_area: KahanSum,
}

impl SimState {
    /// An empty system at time zero. `initial_frontier` is `√n·y*`.
    pub fn new(initial_frontier: f64, discipline: Discipline, retain_arrival_log: bool) -> Self {
        SimState {
            discipline,
            clock: Instant::ZERO,
            in_service: None,
            waiting: BTreeMap::new(),
            waiting_work: KahanSum::default(),
            frontier_deadline: initial_frontier,
            idleness: KahanSum::default(),
            arrivals: 0,
            work_arrived: KahanSum::default(),
            arrival_log: retain_arrival_log.then(Vec::new),
            events: 0,
            completions: 0,
            workload_area: KahanSum::default(),
        }
    }

    fn priority(&self, c: &Customer) -> Priority {
        let key = match self.discipline {
            Discipline::Edf => c.deadline,
            Discipline::Fifo => c.arrival_time,
        };
        Priority { key, id: c.id }
    }

    pub fn clock(&self) -> f64 {
        self.clock.as_f64()
    }

    pub fn instant(&self) -> Instant {
        self.clock
    }

    pub fn in_service(&self) -> Option<&Customer> {
        self.in_service.as_ref()
    }

    /// Present customers in service order (in-service first).
    pub fn customers(&self) -> impl Iterator<Item = &Customer> {
        self.in_service.iter().chain(self.waiting.values())
    }

    pub fn queue_len(&self) -> usize {
        self.waiting.len() + usize::from(self.in_service.is_some())
    }

    /// Unfinished work `W`.
    pub fn workload(&self) -> f64 {
        self.in_service.map_or(0.0, |c| c.remaining) + self.waiting_work.value()
    }

    /// Cumulative idleness `I`.
    pub fn idleness(&self) -> f64 {
        self.idleness.value()
    }

    /// Number of arrivals `A`.
    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    /// Work arrived so far, `V(A(t))`.
    pub fn work_arrived(&self) -> f64 {
        self.work_arrived.value()
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn completions(&self) -> u64 {
        self.completions
    }

    /// `∫_0^t W(s) ds`.
    pub fn workload_area(&self) -> f64 {
        self.workload_area.value()
    }

    /// Largest deadline ever taken into service, floored by `√n·y*`.
    pub fn frontier_deadline(&self) -> f64 {
        self.frontier_deadline
    }

    /// Frontier `F(t) = D_F - t`.
    pub fn frontier(&self) -> f64 {
        self.frontier_deadline - self.clock()
    }

    /// Lead time of the customer in service, or `F(t)` when empty.
    pub fn current_lead(&self) -> f64 {
        match self.in_service {
            Some(c) => c.deadline - self.clock(),
            None => self.frontier(),
        }
    }

    /// `W - (V - (t - I))`; zero up to rounding at every epoch.
    pub fn conservation_gap(&self) -> f64 {
        let busy = self.clock.since(self.idleness.as_instant());
        self.workload()
            - self
                .work_arrived
                .as_instant()
                .since(Instant::from_f64(busy))
    }

    /// Instant at which the customer in service would finish.
    pub fn next_completion(&self) -> Instant {
        match self.in_service {
            Some(c) => self.clock.add(c.remaining),
            None => Instant::INFINITY,
        }
    }

    /// Let time run to `t`, which must not pass the next completion.
    pub fn advance_to(&mut self, t: Instant) {
        let dt = t.since(self.clock);
        if dt <= 0.0 {
            return;
        }
        match self.in_service.as_mut() {
            Some(c) => {
                let w = c.remaining + self.waiting_work.value();
                let served = dt.min(c.remaining);
                self.workload_area.add(w * dt - 0.5 * served * served);
                c.remaining = (c.remaining - dt).max(0.0);
            }
            None => self.idleness.add(dt),
        }
        self.clock = t;
    }

    fn start_service(&mut self, c: Customer) {
        if c.deadline > self.frontier_deadline {
            self.frontier_deadline = c.deadline;
        }
        self.in_service = Some(c);
    }

    /// Finish the customer in service and start the next one.
    pub fn complete(&mut self) -> Option<Customer> {
        let done = self.in_service.take()?;
        self.completions += 1;
        self.events += 1;
        if let Some((_, next)) = self.waiting.pop_first() {
            self.waiting_work.add(-next.remaining);
            self.start_service(next);
        }
        if self.waiting.is_empty() {
            self.waiting_work = KahanSum::default();
        }
        Some(done)
    }

    /// A customer arrives now with the given service requirement and
    /// absolute deadline.
    pub fn arrive(&mut self, service_req: f64, deadline: f64) -> u64 {
        self.arrivals += 1;
        self.events += 1;
        self.work_arrived.add(service_req);
        if let Some(log) = self.arrival_log.as_mut() {
            log.push((deadline, service_req));
        }
        let c = Customer {
            id: self.arrivals,
            arrival_time: self.clock(),
            service_req,
            remaining: service_req,
            deadline,
        };
        match self.in_service {
            None => self.start_service(c),
            Some(cur) if self.priority(&c) < self.priority(&cur) => {
                self.waiting_work.add(cur.remaining);
                self.waiting.insert(self.priority(&cur), cur);
                self.start_service(c);
            }
            Some(_) => {
                self.waiting_work.add(c.remaining);
                self.waiting.insert(self.priority(&c), c);
            }
        }
        c.id
    }

    /// Complete everything due up to and including `t`, then move the clock
    /// to `t`.
    pub fn run_until(&mut self, t: Instant) {
        while self.next_completion() <= t {
            let tc = self.next_completion();
            self.advance_to(tc);
            self.complete();
        }
        self.advance_to(t);
    }

    /// Freeze the current lead-time profile.
    pub fn snapshot(&self) -> Snapshot {
        let time = self.clock();
        let mut present: Vec<Customer> = self.customers().copied().collect();
        present.sort_by(|a, b| a.deadline.total_cmp(&b.deadline).then(a.id.cmp(&b.id)));
        let mut atoms: Vec<ProfileAtom> = Vec::with_capacity(present.len());
        for c in present {
            match atoms.last_mut() {
                Some(a) if a.deadline == c.deadline => {
                    a.work += c.remaining;
                    a.count += 1;
                    a.untouched &= c.remaining == c.service_req;
                }
                _ => atoms.push(ProfileAtom {
                    deadline: c.deadline,
                    work: c.remaining,
                    count: 1,
                    untouched: c.remaining == c.service_req,
                }),
            }
        }
        let arrival_atoms = self.arrival_log.as_ref().map(|log| {
            let mut v: Vec<(f64, f64)> = log.clone();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        });
        Snapshot::new(
            time,
            atoms,
            self.frontier_deadline,
            self.in_service.map(|c| c.deadline),
            self.workload(),
            self.queue_len(),
            self.idleness(),
            self.arrivals,
            self.work_arrived(),
            arrival_atoms,
        )
    }
}

/// Customers sharing one deadline at a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileAtom {
    pub deadline: f64,
    /// Remaining work of these customers.
    pub work: f64,
    pub count: usize,
    /// True when none of these customers has received service yet.
    pub untouched: bool,
}

/// The lead-time profile of the queue at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// Sorted by deadline.
    pub atoms: Vec<ProfileAtom>,
    pub frontier: f64,
    pub current_lead: f64,
    pub workload: f64,
    pub queue_len: usize,
    pub idleness: f64,
    pub frontier_deadline: f64,
    pub current_deadline: Option<f64>,
    pub arrivals: u64,
    pub work_arrived: f64,
    /// `(deadline, service_req)` of every arrival so far, sorted by deadline.
    pub arrival_atoms: Option<Vec<(f64, f64)>>,
    #[serde(skip)]
    work_suffix: Vec<f64>,
    #[serde(skip)]
    arrival_suffix: Vec<f64>,
}

fn suffix_sums(values: impl DoubleEndedIterator<Item = f64> + ExactSizeIterator) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    let mut acc = KahanSum::default();
    for (i, v) in values.enumerate().rev() {
        acc.add(v);
        out[i] = acc.value();
    }
    out
}

impl Snapshot {
    #[allow(clippy::too_many_arguments)]
    fn new(
        time: f64,
        atoms: Vec<ProfileAtom>,
        frontier_deadline: f64,
        current_deadline: Option<f64>,
        workload: f64,
        queue_len: usize,
        idleness: f64,
        arrivals: u64,
        work_arrived: f64,
        arrival_atoms: Option<Vec<(f64, f64)>>,
    ) -> Self {
        let work_suffix = suffix_sums(atoms.iter().map(|a| a.work));
        let arrival_suffix = arrival_atoms
            .as_ref()
            .map(|v| suffix_sums(v.iter().map(|a| a.1)))
            .unwrap_or_default();
        let frontier = frontier_deadline - time;
        Snapshot {
            time,
            atoms,
            frontier,
            current_lead: current_deadline.map_or(frontier, |d| d - time),
            workload,
            queue_len,
            idleness,
            frontier_deadline,
            current_deadline,
            arrivals,
            work_arrived,
            arrival_atoms,
            work_suffix,
            arrival_suffix,
        }
    }

    /// Rebuild the derived lookup tables after deserialization.
    pub fn reindex(mut self) -> Self {
        self.work_suffix = suffix_sums(self.atoms.iter().map(|a| a.work));
        self.arrival_suffix = self
            .arrival_atoms
            .as_ref()
            .map(|v| suffix_sums(v.iter().map(|a| a.1)))
            .unwrap_or_default();
        self
    }

    fn cut(&self, y: f64) -> usize {
        let t = self.time;
        self.atoms.partition_point(|a| a.deadline - t <= y)
    }

    /// Work with lead time strictly above `y`: `𝒲(t)(y, ∞)`.
    pub fn workload_above(&self, y: f64) -> f64 {
        self.work_suffix[self.cut(y)]
    }

    /// Work with lead time `<= 0`: `𝒲(t)(-∞, 0]`.
    pub fn late_work(&self) -> f64 {
        self.atoms[..self.cut(0.0)]
            .iter()
            .fold(0.0, |acc, a| acc + a.work)
    }

    /// Work whose deadlines lie in the closed interval `[lo, hi]`.
    pub fn work_in_deadlines(&self, lo: f64, hi: f64) -> f64 {
        let a = self.atoms.partition_point(|a| a.deadline < lo);
        let b = self.atoms.partition_point(|a| a.deadline <= hi);
        if b <= a {
            0.0
        } else {
            self.work_suffix[a] - self.work_suffix[b]
        }
    }

    /// Total service requirement of all arrivals (departed or not) with lead
    /// time strictly above `y`: `𝒱(t)(y, ∞)`.
    pub fn arrival_work_above(&self, y: f64) -> Result<f64> {
        let log = self
            .arrival_atoms
            .as_ref()
            .ok_or_else(|| Error::Unavailable("arrival log was not retained".into()))?;
        let t = self.time;
        let k = log.partition_point(|a| a.0 - t <= y);
        Ok(self.arrival_suffix[k])
    }

    /// Write the profile as CSV rows `time,deadline,remaining,count`.
    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "time,deadline,remaining,count")?;
        }
        for a in &self.atoms {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{}",
                self.time, a.deadline, a.work, a.count
            )?;
        }
        Ok(())
    }
}

/// One simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub arrival: ArrivalLaw,
    pub service: ServiceLaw,
    pub lead_time: LeadTimeLaw,
    /// Scaling index; lead times are `√n` times draws from `G`.
    pub n: f64,
    pub horizon: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub retain_arrival_log: bool,
    #[serde(default)]
    pub discipline: Discipline,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.arrival.validate()?;
        self.service.validate()?;
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(invalid(
                "simulation config",
                format!("n must be >= 1, got {}", self.n),
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid(
                "simulation config",
                format!("horizon must be > 0, got {}", self.horizon),
            ));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.horizon).contains(&t))
        {
            return Err(invalid(
                "simulation config",
                format!("snapshot time {t} outside [0, horizon]"),
            ));
        }
        Ok(())
    }

    pub fn sqrt_n(&self) -> f64 {
        self.n.sqrt()
    }
}

/// Final state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub clock: f64,
    pub workload: f64,
    pub queue_len: usize,
    pub idleness: f64,
    pub arrivals: u64,
    pub work_arrived: f64,
    pub events: u64,
    pub completions: u64,
    pub mean_workload: f64,
    pub frontier: f64,
    pub current_lead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    /// In ascending time order.
    pub snapshots: Vec<Snapshot>,
    pub summary: Summary,
}

/// Run replication 0 of `config`.
pub fn run_sim(config: &SimConfig) -> Result<SimOutput> {
    run_replication(config, 0, |_| {})
}

/// Run one replication; `observer` sees the state after every event.
pub fn run_replication(
    config: &SimConfig,
    replication: u64,
    mut observer: impl FnMut(&SimState),
) -> Result<SimOutput> {
    config.validate()?;
    let sqrt_n = config.sqrt_n();
    let mut interarrivals = stream(config.base_seed, replication, StreamTag::Interarrival);
    let mut services = stream(config.base_seed, replication, StreamTag::Service);
    let mut leads = stream(config.base_seed, replication, StreamTag::LeadTime);

    let mut snap_times = config.snapshot_times.clone();
    snap_times.sort_by(f64::total_cmp);
    let horizon = Instant::from_f64(config.horizon);

    let mut state = SimState::new(
        sqrt_n * config.lead_time.y_star(),
        config.discipline,
        config.retain_arrival_log,
    );
    let mut snapshots = Vec::with_capacity(snap_times.len());
    let mut next_snap = 0;
    let mut next_arrival = Instant::ZERO.add(config.arrival.sample(&mut interarrivals));

    loop {
        let t_comp = state.next_completion();
        let t_event = t_comp.min(next_arrival);
        while next_snap < snap_times.len() && Instant::from_f64(snap_times[next_snap]) < t_event {
            state.advance_to(Instant::from_f64(snap_times[next_snap]));
            snapshots.push(state.snapshot());
            next_snap += 1;
        }
        if t_event > horizon {
            state.advance_to(horizon);
            break;
        }
        state.advance_to(t_event);
        if t_comp <= next_arrival {
            state.complete();
        } else {
            let v = config.service.sample(&mut services);
            let lead = sqrt_n * config.lead_time.sample(&mut leads);
            state.arrive(v, state.clock() + lead);
            next_arrival = next_arrival.add(config.arrival.sample(&mut interarrivals));
        }
        observer(&state);
    }

    let summary = Summary {
        clock: state.clock(),
        workload: state.workload(),
        queue_len: state.queue_len(),
        idleness: state.idleness(),
        arrivals: state.arrivals(),
        work_arrived: state.work_arrived(),
        events: state.events(),
        completions: state.completions(),
        mean_workload: state.workload_area() / config.horizon,
        frontier: state.frontier(),
        current_lead: state.current_lead(),
    };
    Ok(SimOutput { snapshots, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A arrives at 0 (service 5, deadline 10); B arrives at 1 (service 1,
    /// deadline 3).
    fn two_customer_trace() -> SimState {
        let mut s = SimState::new(0.0, Discipline::Edf, true);
        s.arrive(5.0, 10.0);
        s.run_until(Instant::from_f64(1.0));
        s.arrive(1.0, 3.0);
        s
    }

    #[test]
    fn preempt_resume_trace() {
        let mut s = two_customer_trace();
        assert_eq!(s.in_service().unwrap().id, 2);
        s.run_until(Instant::from_f64(1.5));
        let snap = s.snapshot();
        assert!((snap.workload - 4.5).abs() < 1e-12);
        assert_eq!(snap.queue_len, 2);
        assert!((snap.current_lead - 1.5).abs() < 1e-12);
        assert!((snap.frontier - 8.5).abs() < 1e-12);
        assert!((snap.workload_above(2.0) - 4.0).abs() < 1e-12);
        assert!((snap.arrival_work_above(0.0).unwrap() - 6.0).abs() < 1e-12);

        // B completes at 2, A at 6
        assert!((s.next_completion().as_f64() - 2.0).abs() < 1e-12);
        s.run_until(Instant::from_f64(2.0));
        assert_eq!(s.in_service().unwrap().id, 1);
        assert!((s.next_completion().as_f64() - 6.0).abs() < 1e-12);
        s.run_until(Instant::from_f64(6.0));
        assert_eq!(s.queue_len(), 0);
        assert!(s.conservation_gap().abs() < 1e-12);
        let snap = s.snapshot();
        assert!((snap.arrival_work_above(-100.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn frontier_tracks_served_deadlines() {
        let mut s = SimState::new(30.0, Discipline::Edf, false);
        s.run_until(Instant::from_f64(4.0));
        assert_eq!(s.frontier(), 26.0);
        assert_eq!(s.current_lead(), 26.0);
        s.run_until(Instant::from_f64(10.0));
        s.arrive(2.0, 40.0);
        assert_eq!(s.frontier(), 30.0);
        assert!(s.current_lead() <= s.frontier());
    }

    #[test]
    fn late_customer_lead_is_negative() {
        let mut s = SimState::new(0.0, Discipline::Edf, false);
        s.arrive(10.0, 3.0);
        s.run_until(Instant::from_f64(5.0));
        assert_eq!(s.current_lead(), -2.0);
        let snap = s.snapshot();
        assert_eq!(snap.late_work(), 5.0);
        assert!((snap.late_work() + snap.workload_above(0.0) - snap.workload).abs() < 1e-12);
    }

    #[test]
    fn equal_deadlines_are_fifo() {
        let mut s = SimState::new(0.0, Discipline::Edf, false);
        s.arrive(1.0, 5.0);
        s.arrive(1.0, 5.0);
        s.arrive(1.0, 5.0);
        let order: Vec<u64> = s.customers().map(|c| c.id).collect();
        assert_eq!(order, vec![1, 2, 3]);
    }

    #[test]
    fn profile_queries_on_empty_snapshot() {
        let s = SimState::new(1.0, Discipline::Edf, false);
        let snap = s.snapshot();
        assert_eq!(snap.workload_above(f64::NEG_INFINITY), 0.0);
        assert_eq!(snap.late_work(), 0.0);
        assert!(matches!(
            snap.arrival_work_above(0.0),
            Err(Error::Unavailable(_))
        ));
    }

    #[test]
    fn no_arrivals_before_horizon() {
        let cfg = SimConfig {
            arrival: ArrivalLaw::None,
            service: ServiceLaw::EXPONENTIAL_UNIT,
            lead_time: LeadTimeLaw::constant(30.0).unwrap(),
            n: 1.0,
            horizon: 5.0,
            base_seed: 0,
            snapshot_times: vec![4.0],
            retain_arrival_log: false,
            discipline: Discipline::Edf,
        };
        let out = run_sim(&cfg).unwrap();
        let snap = &out.snapshots[0];
        assert_eq!(snap.workload, 0.0);
        assert_eq!(snap.queue_len, 0);
        assert_eq!(snap.frontier, 26.0);
        assert_eq!(out.summary.idleness, 5.0);
    }

    #[test]
    fn snapshot_at_event_time_includes_event() {
        let cfg = SimConfig {
            arrival: ArrivalLaw::Deterministic { interval: 1.0 },
            service: ServiceLaw::Deterministic { value: 0.5 },
            lead_time: LeadTimeLaw::constant(2.0).unwrap(),
            n: 1.0,
            horizon: 3.0,
            base_seed: 0,
            snapshot_times: vec![2.0, 0.5],
            retain_arrival_log: true,
            discipline: Discipline::Edf,
        };
        let out = run_sim(&cfg).unwrap();
        assert_eq!(out.snapshots[0].time, 0.5);
        assert_eq!(out.snapshots[0].queue_len, 0);
        assert_eq!(out.snapshots[1].arrivals, 2);
        assert_eq!(out.snapshots[1].workload, 0.5);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = SimConfig {
            arrival: ArrivalLaw::Exponential { rate: 1.0 },
            service: ServiceLaw::EXPONENTIAL_UNIT,
            lead_time: LeadTimeLaw::constant(1.0).unwrap(),
            n: 0.5,
            horizon: 1.0,
            base_seed: 0,
            snapshot_times: vec![],
            retain_arrival_log: false,
            discipline: Discipline::Edf,
        };
        assert!(cfg.validate().is_err());
        cfg.n = 1.0;
        cfg.snapshot_times = vec![2.0];
        assert!(cfg.validate().is_err());
        cfg.snapshot_times = vec![];
        cfg.horizon = 0.0;
        assert!(cfg.validate().is_err());
    }
}
