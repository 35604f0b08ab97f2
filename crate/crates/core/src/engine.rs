//! Synchronous tick loop, anchor commands and full runs.

use std::collections::VecDeque;
use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bonding::{BondGraph, TickView};
use crate::geom::{Bounds, Vec2};
use crate::metrics::{self, MetricsFrame};
use crate::potentials::LocalEnergy;
use crate::rng;
use crate::sampler::{sample_velocity, SamplerConfig};
use crate::scenario::Scenario;
use crate::world::{init_world, InitError, RobotState, WorldState};

/// Euler step of the holonomic motion model, clamped to the world.
#[inline]
pub fn integrate(pose: Vec2, velocity: Vec2, dt: f64, bounds: &Bounds) -> Vec2 {
    bounds.clamp(pose + velocity * dt)
}

/// Next velocity of every robot, all computed against the same tick view.
/// Anchors get zero.
pub fn sample_all(view: &TickView<'_>, scenario: &Scenario, cfg: &SamplerConfig) -> Vec<Vec2> {
    let world = view.world;
    world
        .robots
        .iter()
        .map(|r| next_velocity(view, scenario, cfg, r))
        .collect()
}

fn next_velocity(view: &TickView<'_>, scenario: &Scenario, cfg: &SamplerConfig, r: &RobotState) -> Vec2 {
    if r.is_anchor {
        return Vec2::ZERO;
    }
    let local = LocalEnergy::new(view, r.id, scenario);
    let mut stream = rng::robot_stream(view.world.master_seed, r.id, view.world.tick);
    sample_velocity(r.velocity, |v| local.energy(v), cfg, &mut stream).velocity
}

/// Applies sampled velocities and advances poses and the tick counter.
pub fn advance(world: &WorldState, velocities: &[Vec2], dt: f64) -> WorldState {
    let mut next = world.clone();
    for (r, &v) in next.robots.iter_mut().zip(velocities) {
        if r.is_anchor {
            r.velocity = Vec2::ZERO;
            continue;
        }
        r.velocity = v;
        r.pose = integrate(r.pose, v, dt, &world.bounds);
    }
    next.tick += 1;
    next
}

/// One synchronous tick.
pub fn step(world: &WorldState, scenario: &Scenario) -> WorldState {
    let cfg = scenario.sampler.resolve(scenario.v_max);
    let view = TickView::build(world, scenario);
    let velocities = sample_all(&view, scenario, &cfg);
    advance(world, &velocities, scenario.dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandKind {
    MoveAnchor { id: usize, x: f64, y: f64 },
    AddAnchor { species: String, x: f64, y: f64 },
    RemoveAnchor { id: usize },
    Pause,
    Resume,
    Reset { seed: u64 },
    SetTickRate { hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    #[serde(flatten)]
    pub kind: CommandKind,
    /// Tick at which the command takes effect (before that tick's step).
    #[serde(default)]
    pub issue_tick: u64,
}

impl Command {
    pub fn new(kind: CommandKind, issue_tick: u64) -> Self {
        Self { kind, issue_tick }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CommandError {
    #[error("no such anchor: {0}")]
    NoSuchAnchor(usize),
    #[error("robot {0} is not an anchor")]
    NotAnAnchor(usize),
    #[error("coordinates ({0}, {1}) outside bounds")]
    OutOfBounds(f64, f64),
    #[error("unknown species {0}")]
    UnknownSpecies(String),
    #[error("tick rate must be > 0")]
    BadTickRate,
    #[error(transparent)]
    Init(#[from] InitError),
}

fn check_anchor(world: &WorldState, id: usize) -> Result<(), CommandError> {
    match world.robots.get(id) {
        None => Err(CommandError::NoSuchAnchor(id)),
        Some(r) if !r.is_anchor => Err(CommandError::NotAnAnchor(id)),
        Some(_) => Ok(()),
    }
}

fn check_pose(world: &WorldState, x: f64, y: f64) -> Result<Vec2, CommandError> {
    let p = Vec2::new(x, y);
    if x.is_finite() && y.is_finite() && world.bounds.contains(p) {
        Ok(p)
    } else {
        Err(CommandError::OutOfBounds(x, y))
    }
}

/// Validates a command against the current world without applying it.
pub fn validate_command(world: &WorldState, scenario: &Scenario, cmd: &CommandKind) -> Result<(), CommandError> {
    match cmd {
        CommandKind::MoveAnchor { id, x, y } => {
            check_anchor(world, *id)?;
            check_pose(world, *x, *y).map(|_| ())
        }
        CommandKind::AddAnchor { species, x, y } => {
            scenario
                .species_index(species)
                .ok_or_else(|| CommandError::UnknownSpecies(species.clone()))?;
            check_pose(world, *x, *y).map(|_| ())
        }
        CommandKind::RemoveAnchor { id } => check_anchor(world, *id),
        CommandKind::SetTickRate { hz } if !(hz.is_finite() && *hz > 0.0) => Err(CommandError::BadTickRate),
        _ => Ok(()),
    }
}

/// World-level effect of a command. Pause, resume and tick-rate changes
/// leave the world untouched; they are handled by [`Simulation`].
///
/// Removing an anchor shifts the ids of every later robot down by one.
pub fn apply_command(world: &WorldState, scenario: &Scenario, cmd: &CommandKind) -> Result<WorldState, CommandError> {
    validate_command(world, scenario, cmd)?;
    let mut next = world.clone();
    match cmd {
        CommandKind::MoveAnchor { id, x, y } => {
            next.robots[*id].pose = Vec2::new(*x, *y);
        }
        CommandKind::AddAnchor { species, x, y } => {
            let species = scenario.species_index(species).expect("validated");
            let id = next.robots.len();
            next.robots.push(RobotState {
                id,
                species,
                pose: Vec2::new(*x, *y),
                velocity: Vec2::ZERO,
                is_anchor: true,
            });
        }
        CommandKind::RemoveAnchor { id } => {
            next.robots.remove(*id);
            next.renumber();
        }
        CommandKind::Reset { seed } => {
            next = init_world(scenario, *seed)?;
        }
        CommandKind::Pause | CommandKind::Resume | CommandKind::SetTickRate { .. } => {}
    }
    Ok(next)
}

/// A running simulation with a command queue, used by both headless runs and
/// the live service.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    sampler: SamplerConfig,
    world: WorldState,
    paused: bool,
    tick_rate_hz: f64,
    queue: VecDeque<CommandKind>,
}

impl Simulation {
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self, InitError> {
        let world = init_world(&scenario, seed)?;
        Ok(Self::from_world(scenario, world))
    }

    pub fn from_world(scenario: Scenario, world: WorldState) -> Self {
        let sampler = scenario.sampler.resolve(scenario.v_max);
        Self {
            scenario,
            sampler,
            world,
            paused: false,
            tick_rate_hz: 30.0,
            queue: VecDeque::new(),
        }
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn tick_rate_hz(&self) -> f64 {
        self.tick_rate_hz
    }

    pub fn set_tick_rate(&mut self, hz: f64) {
        self.tick_rate_hz = hz;
    }

    /// Queues a command for the next tick boundary.
    pub fn enqueue(&mut self, cmd: CommandKind) {
        self.queue.push_back(cmd);
    }

    /// Applies every queued command in order. Invalid commands are dropped
    /// and their errors returned.
    pub fn apply_pending(&mut self) -> Vec<(CommandKind, CommandError)> {
        let mut errors = Vec::new();
        while let Some(cmd) = self.queue.pop_front() {
            if let Err(e) = self.apply(&cmd) {
                errors.push((cmd, e));
            }
        }
        errors
    }

    /// Applies one command immediately.
    pub fn apply(&mut self, cmd: &CommandKind) -> Result<(), CommandError> {
        match cmd {
            CommandKind::Pause => self.paused = true,
            CommandKind::Resume => self.paused = false,
            CommandKind::SetTickRate { hz } => {
                validate_command(&self.world, &self.scenario, cmd)?;
                self.tick_rate_hz = *hz;
            }
            _ => self.world = apply_command(&self.world, &self.scenario, cmd)?,
        }
        Ok(())
    }

    /// Builds the view of the current tick.
    pub fn view(&self) -> TickView<'_> {
        TickView::build(&self.world, &self.scenario)
    }

    pub fn graph(&self) -> BondGraph {
        self.view().graph(self.scenario.bond_threshold())
    }

    pub fn metrics(&self) -> MetricsFrame {
        MetricsFrame::compute(&self.world, &self.graph(), &self.scenario)
    }

    /// Advances one tick regardless of the pause flag.
    pub fn step(&mut self) {
        let view = TickView::build(&self.world, &self.scenario);
        let velocities = sample_all(&view, &self.scenario, &self.sampler);
        self.world = advance(&self.world, &velocities, self.scenario.dt);
    }

    /// Applies queued commands, then steps unless paused. Returns whether a
    /// step happened.
    pub fn poll(&mut self) -> bool {
        for (cmd, err) in self.apply_pending() {
            log::warn!("dropped command {cmd:?}: {err}");
        }
        if self.paused {
            false
        } else {
            self.step();
            true
        }
    }
}

/// Receives run output as it is produced.
pub trait RunSink {
    fn on_metrics(&mut self, _frame: &MetricsFrame) -> io::Result<()> {
        Ok(())
    }

    fn on_state(&mut self, _world: &WorldState, _graph: &BondGraph, _scenario: &Scenario) -> io::Result<()> {
        Ok(())
    }
}

/// Streams metrics rows as CSV.
pub struct CsvMetricsSink<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> CsvMetricsSink<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            header_written: false,
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RunSink for CsvMetricsSink<W> {
    fn on_metrics(&mut self, frame: &MetricsFrame) -> io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", metrics::METRICS_HEADER)?;
            self.header_written = true;
        }
        writeln!(self.out, "{}", frame.csv_row())?;
        self.out.flush()
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryRecord {
    pub tick: u64,
    pub id: usize,
    pub species: String,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub bonded: Vec<usize>,
}

/// Newline-delimited JSON trajectory, one record per robot per emitted tick.
pub struct TrajectorySink<W: Write> {
    out: W,
}

impl<W: Write> TrajectorySink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RunSink for TrajectorySink<W> {
    fn on_state(&mut self, world: &WorldState, graph: &BondGraph, scenario: &Scenario) -> io::Result<()> {
        for r in &world.robots {
            let rec = TrajectoryRecord {
                tick: world.tick,
                id: r.id,
                species: scenario.species[r.species].name.clone(),
                x: r.pose.x,
                y: r.pose.y,
                vx: r.velocity.x,
                vy: r.velocity.y,
                bonded: graph.adjacency[r.id].clone(),
            };
            serde_json::to_writer(&mut self.out, &rec)?;
            self.out.write_all(b"\n")?;
        }
        self.out.flush()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics_series: Vec<MetricsFrame>,
    pub final_state: WorldState,
    pub wall_time: f64,
    pub seed: u64,
    /// Set when a sink failed; the series then covers the ticks before the failure.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario's tick count.
    pub ticks: Option<u64>,
    /// Commands applied in list order, each once the world reaches its `issue_tick`.
    pub commands: Vec<Command>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("command at tick {tick} rejected: {source}")]
    Command {
        tick: u64,
        #[source]
        source: CommandError,
    },
}

/// Runs a scenario headlessly. Emits a metrics frame at tick 0 and every
/// `metrics_stride` ticks afterwards.
pub fn run(
    scenario: &Scenario,
    seed: u64,
    options: &RunOptions,
    sinks: &mut [&mut dyn RunSink],
) -> Result<RunResult, RunError> {
    let started = Instant::now();
    let ticks = options.ticks.unwrap_or(scenario.ticks);
    let stride = scenario.metrics_stride.max(1);
    let mut sim = Simulation::new(scenario.clone(), seed)?;
    let commands = &options.commands;
    let mut next_cmd = 0;
    let mut series = Vec::with_capacity((ticks / stride + 1) as usize);
    let mut aborted = None;

    for step_index in 0..=ticks {
        // Commands are matched against the world tick so a logged session
        // that includes a reset replays in its original order.
        while next_cmd < commands.len() && commands[next_cmd].issue_tick <= sim.world.tick {
            let tick = sim.world.tick;
            sim.apply(&commands[next_cmd].kind).map_err(|source| RunError::Command { tick, source })?;
            next_cmd += 1;
        }
        let view = sim.view();
        let t = sim.world.tick;
        if t % stride == 0 {
            let graph = view.graph(scenario.bond_threshold());
            let frame = MetricsFrame::compute(&sim.world, &graph, scenario);
            let mut failed = None;
            for sink in sinks.iter_mut() {
                let r = sink
                    .on_metrics(&frame)
                    .and_then(|_| sink.on_state(&sim.world, &graph, scenario));
                if let Err(e) = r {
                    failed = Some(e.to_string());
                    break;
                }
            }
            series.push(frame);
            if let Some(e) = failed {
                aborted = Some(format!("sink failed at tick {t}: {e}"));
                break;
            }
        }
        if step_index == ticks {
            break;
        }
        // Pausing only matters for wall-clock pacing; headless runs keep stepping.
        let velocities = sample_all(&view, scenario, &sim.sampler);
        drop(view);
        sim.world = advance(&sim.world, &velocities, scenario.dt);
    }

    Ok(RunResult {
        metrics_series: series,
        final_state: sim.world,
        wall_time: started.elapsed().as_secs_f64(),
        seed,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets;

    #[test]
    fn euler_step_and_clamp() {
        let b = Bounds::new(10.0, 10.0);
        let p = integrate(Vec2::new(1.0, 1.0), Vec2::new(0.5, 0.0), 0.1, &b);
        assert!((p.x - 1.05).abs() < 1e-15 && p.y == 1.0);
        assert_eq!(integrate(Vec2::new(3.0, 4.0), Vec2::ZERO, 0.1, &b), Vec2::new(3.0, 4.0));
        assert_eq!(integrate(Vec2::new(10.0, 4.0), Vec2::new(1.0, 0.0), 0.1, &b).x, 10.0);
    }

    #[test]
    fn anchors_only_world_is_static() {
        let mut s = presets::bridge();
        for v in s.population.values_mut() {
            *v = 0;
        }
        let w = init_world(&s, 1).unwrap();
        let next = step(&w, &s);
        assert_eq!(next.tick, w.tick + 1);
        assert_eq!(next.robots, w.robots);
    }

    #[test]
    fn step_is_deterministic() {
        let s = presets::water();
        let w = init_world(&s, 11).unwrap();
        let a = step(&step(&w, &s), &s);
        let b = step(&step(&w, &s), &s);
        assert_eq!(a, b);
    }

    #[test]
    fn remove_unknown_anchor() {
        let s = presets::bridge();
        let w = init_world(&s, 1).unwrap();
        let err = apply_command(&w, &s, &CommandKind::RemoveAnchor { id: 999 }).unwrap_err();
        assert!(err.to_string().contains("no such anchor"));
        let err = apply_command(&w, &s, &CommandKind::MoveAnchor { id: 0, x: 1.0, y: 1.0 }).unwrap_err();
        assert_eq!(err, CommandError::NotAnAnchor(0));
    }

    #[test]
    fn pause_holds_the_tick() {
        let mut s = presets::water();
        s.population.insert("H".into(), 4);
        s.population.insert("O".into(), 2);
        let mut sim = Simulation::new(s, 3).unwrap();
        sim.enqueue(CommandKind::Pause);
        for _ in 0..5 {
            assert!(!sim.poll());
        }
        assert_eq!(sim.world().tick, 0);
        sim.enqueue(CommandKind::Resume);
        assert!(sim.poll());
        assert_eq!(sim.world().tick, 1);
    }

    #[test]
    fn zero_ticks_gives_initial_frame() {
        let s = presets::water();
        let r = run(&s, 1, &RunOptions { ticks: Some(0), ..Default::default() }, &mut []).unwrap();
        assert_eq!(r.metrics_series.len(), 1);
        assert_eq!(r.metrics_series[0].tick, 0);
        assert_eq!(r.final_state.tick, 0);
    }

    #[test]
    fn command_serde_shape() {
        let c: Command = serde_json::from_str(r#"{"kind":"move_anchor","id":3,"x":1.0,"y":2.0}"#).unwrap();
        assert_eq!(c.kind, CommandKind::MoveAnchor { id: 3, x: 1.0, y: 2.0 });
        assert_eq!(c.issue_tick, 0);
        let back: Command = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
