use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    solve_riemann_pl, Domain, Front, FrontTrackingSolution, StepFunction, Wave, TIME_TOL,
};
use crate::error::{Error, Result};
use crate::flux::PiecewiseLinearFlux;

/// Fronts closer than this (relative to the domain length) at a common time
/// are treated as one interaction point.
const POSITION_TOL: f64 = 1e-12;
const MAX_EVENTS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // Declaration order is processing order among simultaneous events.
    Collision { left: usize, right: usize },
    Exit { front: usize },
    Boundary { index: usize },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.cmp(&self.kind))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Link {
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
}

struct Engine<'a> {
    flux: &'a PiecewiseLinearFlux,
    domain: Domain,
    horizon: f64,
    position_tol: f64,
    fronts: Vec<Front>,
    links: Vec<Link>,
    head: Option<usize>,
    queue: BinaryHeap<Event>,
    now: f64,
    event_times: Vec<f64>,
    interactions: Vec<(f64, f64)>,
    left_states: Vec<(f64, i64)>,
    inflow: Option<&'a StepFunction>,
    boundary_times: Vec<f64>,
}

/// Entropy solution of the Cauchy problem with piecewise-affine flux `f` and
/// lattice-valued initial datum, up to time `horizon`.
pub fn evolve(
    init: &StepFunction,
    f: &PiecewiseLinearFlux,
    horizon: f64,
) -> Result<FrontTrackingSolution> {
    check_common(init, f, horizon)?;
    let scale = {
        let bp = init.breakpoints();
        match (bp.first(), bp.last()) {
            (Some(a), Some(b)) => (b - a).abs().max(1.0),
            _ => 1.0,
        }
    };
    let mut engine = Engine::new(f, Domain::Line, horizon, scale, None);
    engine.left_states.push((0.0, init.indices()[0]));
    engine.seed_initial_jumps(init)?;
    engine.run()?;
    Ok(engine.finish(init.clone()))
}

/// Entropy solution of the initial-boundary value problem on `[alpha, beta]`
/// with inflow datum `inflow` (a step function of time) imposed at `alpha`.
///
/// Only the monotone regime is supported: every segment of `f` on the range
/// of the data must have a nonnegative slope. Boundary Riemann problems are
/// solved as Cauchy problems and restricted to `x > alpha`; fronts leave
/// silently through `beta`.
pub fn solve_ibvp_ft(
    init: &StepFunction,
    inflow: &StepFunction,
    f: &PiecewiseLinearFlux,
    alpha: f64,
    beta: f64,
    horizon: f64,
) -> Result<FrontTrackingSolution> {
    if !(alpha < beta) {
        return Err(Error::Domain(format!("empty interval [{alpha}, {beta}]")));
    }
    if inflow.level() != f.level() {
        return Err(Error::Domain("inflow lattice level differs from flux level".into()));
    }
    let init = init.restrict(alpha, beta);
    check_common(&init, f, horizon)?;
    let inflow_window = inflow.restrict(0.0, horizon);
    let (a0, a1) = init.index_range();
    let (b0, b1) = inflow_window.index_range();
    let (lo, hi) = (a0.min(b0), a1.max(b1));
    if !(f.contains_index(lo) && f.contains_index(hi)) {
        return Err(Error::Domain("inflow values outside the tabulated flux range".into()));
    }
    if hi > lo && f.min_slope(lo, hi) < 0.0 {
        return Err(Error::UnsupportedRegime(format!(
            "flux has a negative slope on the data range [{}, {}]",
            f.lattice_point(lo),
            f.lattice_point(hi)
        )));
    }
    let mut engine = Engine::new(
        f,
        Domain::Interval { alpha, beta },
        horizon,
        beta - alpha,
        Some(inflow),
    );
    engine.boundary_times = std::iter::once(0.0)
        .chain(
            inflow
                .breakpoints()
                .iter()
                .copied()
                .filter(|&t| t > 0.0 && t < horizon),
        )
        .collect();
    // state at alpha+ before the first boundary fan
    engine.left_states.push((0.0, init.indices()[0]));
    engine.seed_initial_jumps(&init)?;
    for index in 0..engine.boundary_times.len() {
        engine.queue.push(Event {
            time: engine.boundary_times[index],
            kind: EventKind::Boundary { index },
        });
    }
    engine.run()?;
    let mut solution = engine.finish(init);
    solution.inflow = Some(inflow.clone());
    Ok(solution)
}

fn check_common(init: &StepFunction, f: &PiecewiseLinearFlux, horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    if init.level() != f.level() {
        return Err(Error::Domain(format!(
            "datum lattice level {} differs from flux level {}",
            init.level(),
            f.level()
        )));
    }
    let (lo, hi) = init.index_range();
    if !(f.contains_index(lo) && f.contains_index(hi)) {
        return Err(Error::Domain("datum values outside the tabulated flux range".into()));
    }
    Ok(())
}

impl<'a> Engine<'a> {
    fn new(
        flux: &'a PiecewiseLinearFlux,
        domain: Domain,
        horizon: f64,
        scale: f64,
        inflow: Option<&'a StepFunction>,
    ) -> Self {
        Self {
            flux,
            domain,
            horizon,
            position_tol: POSITION_TOL * scale.max(1.0),
            fronts: Vec::new(),
            links: Vec::new(),
            head: None,
            queue: BinaryHeap::new(),
            now: 0.0,
            event_times: Vec::new(),
            interactions: Vec::new(),
            left_states: Vec::new(),
            inflow,
            boundary_times: Vec::new(),
        }
    }

    fn seed_initial_jumps(&mut self, init: &StepFunction) -> Result<()> {
        let values = init.indices();
        let mut tail: Option<usize> = None;
        let mut created = Vec::new();
        for (k, &x) in init.breakpoints().iter().enumerate() {
            self.interactions.push((0.0, x));
            let fan = solve_riemann_pl(values[k], values[k + 1], self.flux);
            for wave in fan {
                let id = self.push_front(0.0, x, wave);
                self.links[id].prev = tail;
                match tail {
                    Some(t) => self.links[t].next = Some(id),
                    None => self.head = Some(id),
                }
                tail = Some(id);
                created.push(id);
            }
        }
        for &id in &created {
            if let Some(next) = self.links[id].next {
                self.schedule_collision(id, next)?;
            }
            self.schedule_exit(id);
        }
        Ok(())
    }

    fn push_front(&mut self, t: f64, x: f64, wave: Wave) -> usize {
        self.fronts.push(Front {
            birth_time: t,
            birth_position: x,
            speed: wave.speed,
            left: wave.left,
            right: wave.right,
            death_time: f64::INFINITY,
        });
        self.links.push(Link {
            prev: None,
            next: None,
            alive: true,
        });
        self.fronts.len() - 1
    }

    fn position(&self, id: usize, t: f64) -> f64 {
        self.fronts[id].position(t)
    }

    fn schedule_collision(&mut self, left: usize, right: usize) -> Result<()> {
        let (sl, sr) = (self.fronts[left].speed, self.fronts[right].speed);
        let gap = self.position(right, self.now) - self.position(left, self.now);
        if gap < -self.position_tol {
            return Err(Error::Internal(format!(
                "fronts {left} and {right} out of order by {gap} at t = {}",
                self.now
            )));
        }
        if sl <= sr {
            return Ok(());
        }
        let time = self.now + gap.max(0.0) / (sl - sr);
        if time <= self.horizon {
            self.queue.push(Event {
                time,
                kind: EventKind::Collision { left, right },
            });
        }
        Ok(())
    }

    fn schedule_exit(&mut self, id: usize) {
        if let Domain::Interval { beta, .. } = self.domain {
            let front = &self.fronts[id];
            if front.speed > 0.0 {
                let time = front.birth_time + (beta - front.birth_position) / front.speed;
                if time <= self.horizon {
                    self.queue.push(Event {
                        time: time.max(self.now),
                        kind: EventKind::Exit { front: id },
                    });
                }
            }
        }
    }

    fn is_valid(&self, event: &Event) -> bool {
        match event.kind {
            EventKind::Collision { left, right } => {
                self.links[left].alive
                    && self.links[right].alive
                    && self.links[left].next == Some(right)
            }
            EventKind::Exit { front } => self.links[front].alive,
            EventKind::Boundary { .. } => true,
        }
    }

    fn run(&mut self) -> Result<()> {
        let mut processed = 0usize;
        while let Some(event) = self.queue.pop() {
            if !self.is_valid(&event) {
                continue;
            }
            if event.time > self.horizon {
                break;
            }
            if event.time < self.now - TIME_TOL {
                return Err(Error::Internal(format!(
                    "event queue went back in time: {} < {}",
                    event.time, self.now
                )));
            }
            self.now = self.now.max(event.time);
            let mut batch = vec![event];
            while let Some(peek) = self.queue.peek() {
                if peek.time > self.now + TIME_TOL {
                    break;
                }
                let e = self.queue.pop().unwrap();
                if self.is_valid(&e) {
                    batch.push(e);
                }
            }
            processed += batch.len();
            if processed > MAX_EVENTS {
                return Err(Error::Internal("front-tracking event budget exhausted".into()));
            }
            self.event_times.push(self.now);
            self.process_batch(batch)?;
        }
        Ok(())
    }

    fn process_batch(&mut self, batch: Vec<Event>) -> Result<()> {
        let t = self.now;
        let mut pairs: Vec<usize> = Vec::new();
        let mut boundary: Vec<usize> = Vec::new();
        for event in &batch {
            match event.kind {
                EventKind::Collision { left, .. } => pairs.push(left),
                EventKind::Exit { front } => {
                    if self.links[front].alive {
                        self.kill(front, t);
                        self.unlink(front);
                    }
                }
                EventKind::Boundary { index } => boundary.push(index),
            }
        }
        pairs.sort_by(|&a, &b| self.position(a, t).total_cmp(&self.position(b, t)));
        for left in pairs {
            let Some(right) = self.links[left].next else { continue };
            if !(self.links[left].alive && self.links[right].alive) {
                continue;
            }
            let gap = self.position(right, t) - self.position(left, t);
            if gap > self.position_tol {
                continue;
            }
            self.resolve_cluster(left, right)?;
        }
        for index in boundary {
            self.boundary_fan(index)?;
        }
        Ok(())
    }

    /// Replaces every front meeting at the collision point of `(a, b)` by the
    /// Riemann fan of the outer states.
    fn resolve_cluster(&mut self, a: usize, b: usize) -> Result<()> {
        let t = self.now;
        let x = self.position(a, t);
        let mut first = a;
        while let Some(p) = self.links[first].prev {
            if (self.position(p, t) - x).abs() <= self.position_tol {
                first = p;
            } else {
                break;
            }
        }
        let mut last = b;
        while let Some(n) = self.links[last].next {
            if (self.position(n, t) - x).abs() <= self.position_tol {
                last = n;
            } else {
                break;
            }
        }
        let u_l = self.fronts[first].left;
        let u_r = self.fronts[last].right;
        let before = self.links[first].prev;
        let after = self.links[last].next;
        let mut id = Some(first);
        while let Some(cur) = id {
            let next = self.links[cur].next;
            self.kill(cur, t);
            if cur == last {
                break;
            }
            id = next;
        }
        self.interactions.push((t, x));
        let exits = matches!(self.domain, Domain::Interval { beta, .. } if x >= beta - self.position_tol);
        let fan = if exits {
            Vec::new()
        } else {
            solve_riemann_pl(u_l, u_r, self.flux)
        };
        let new_ids: Vec<usize> = fan.into_iter().map(|w| self.push_front(t, x, w)).collect();
        self.splice(before, &new_ids, after)?;
        Ok(())
    }

    /// Links `ids` between `before` and `after` and schedules the new
    /// neighbour interactions.
    fn splice(&mut self, before: Option<usize>, ids: &[usize], after: Option<usize>) -> Result<()> {
        let mut prev = before;
        for &id in ids {
            self.links[id].prev = prev;
            match prev {
                Some(p) => self.links[p].next = Some(id),
                None => self.head = Some(id),
            }
            prev = Some(id);
        }
        match prev {
            Some(p) => self.links[p].next = after,
            None => self.head = after,
        }
        if let Some(a) = after {
            self.links[a].prev = prev;
        }
        if let (Some(p), Some(first)) = (before, ids.first().copied().or(after)) {
            self.schedule_collision(p, first)?;
        }
        if let (Some(last), Some(a)) = (ids.last().copied(), after) {
            self.schedule_collision(last, a)?;
        }
        for &id in ids {
            self.schedule_exit(id);
        }
        Ok(())
    }

    fn kill(&mut self, id: usize, t: f64) {
        self.links[id].alive = false;
        self.fronts[id].death_time = t;
    }

    fn unlink(&mut self, id: usize) {
        let Link { prev, next, .. } = self.links[id];
        match prev {
            Some(p) => self.links[p].next = next,
            None => self.head = next,
        }
        if let Some(n) = next {
            self.links[n].prev = prev;
        }
    }

    fn boundary_fan(&mut self, index: usize) -> Result<()> {
        let Domain::Interval { alpha, .. } = self.domain else {
            return Ok(());
        };
        let t = self.boundary_times[index];
        let inflow = self.inflow.expect("boundary events only exist with inflow data");
        let u_b = inflow.index_at(t);
        let trace = self.left_states.last().map(|s| s.1).unwrap_or(u_b);
        let fan = solve_riemann_pl(u_b, trace, self.flux);
        // Restriction to x > alpha: waves that do not enter are discarded.
        let entering: Vec<Wave> = fan.into_iter().filter(|w| w.speed > 0.0).collect();
        let new_trace = entering.first().map(|w| w.left).unwrap_or(trace);
        self.left_states.push((t, new_trace));
        if entering.is_empty() {
            return Ok(());
        }
        self.interactions.push((t, alpha));
        let ids: Vec<usize> = entering
            .into_iter()
            .map(|w| self.push_front(t, alpha, w))
            .collect();
        let after = self.head;
        self.splice(None, &ids, after)
    }

    fn finish(self, initial: StepFunction) -> FrontTrackingSolution {
        FrontTrackingSolution {
            flux: self.flux.clone(),
            domain: self.domain,
            horizon: self.horizon,
            initial,
            fronts: self.fronts,
            event_times: self.event_times,
            left_states: self.left_states,
            interactions: self.interactions,
            inflow: None,
        }
    }
}
