use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::transcript::{fingerprint, unrecorded_fingerprint, TranscriptEntry, FINGERPRINT_MAX_QUBITS};
use crate::error::{DqcError, Result};
use crate::qstate::{Angle, Gate, PauliString, PureState, QubitLabel, MAX_QUBITS, ZERO_PROB};

/// Classical values plus ownership transfer of qubit registers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub tag: String,
    pub classical: Vec<i64>,
    pub qubits: Vec<QubitLabel>,
}

impl Message {
    pub fn classical(tag: &str, values: Vec<i64>) -> Message {
        Message { tag: tag.to_string(), classical: values, qubits: vec![] }
    }

    pub fn quantum(tag: &str, qubits: Vec<QubitLabel>) -> Message {
        Message { tag: tag.to_string(), classical: vec![], qubits }
    }

    pub fn with_qubits(mut self, qubits: Vec<QubitLabel>) -> Message {
        self.qubits = qubits;
        self
    }

    pub fn with_values(mut self, values: Vec<i64>) -> Message {
        self.classical = values;
        self
    }

    /// The `i`-th classical value, or an error naming the tag.
    pub fn value(&self, i: usize) -> Result<i64> {
        self.classical
            .get(i)
            .copied()
            .ok_or_else(|| DqcError::MalformedMessage(format!("`{}` has no field {i}", self.tag)))
    }

    pub fn expect_tag(self, tag: &str) -> Result<Message> {
        if self.tag == tag {
            Ok(self)
        } else {
            Err(DqcError::MalformedMessage(format!("expected `{tag}`, got `{}`", self.tag)))
        }
    }
}

/// A party program. All state lives in the world, so machines are shared
/// freely between branches.
pub trait Machine: Send + Sync {
    fn name(&self) -> &str;
    /// Ports this machine receives on.
    fn listens(&self) -> Vec<String>;
    /// Ports this machine sends on.
    fn emits(&self) -> Vec<String>;
    /// Advance by one step; `Ok(false)` means nothing to do yet and must
    /// leave the world untouched.
    fn step(&self, cx: &mut Cx<'_>) -> Result<bool>;
}

/// Per-machine classical memory and register names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Memory {
    pub values: BTreeMap<String, Vec<i64>>,
    pub regs: BTreeMap<String, Vec<QubitLabel>>,
}

/// One branch of a composed system.
#[derive(Clone, Debug)]
pub struct World {
    pub prob: f64,
    pub state: PureState,
    pub memory: BTreeMap<String, Memory>,
    pub inbox: BTreeMap<String, VecDeque<Message>>,
    /// Messages delivered on ports nobody listens to.
    pub outputs: BTreeMap<String, Vec<Message>>,
    pub transcript: Option<Vec<TranscriptEntry>>,
    pub round: usize,
    sampler: Option<Sampler>,
}

#[derive(Clone, Debug)]
struct Sampler {
    seed: u64,
    streams: BTreeMap<String, ChaCha8Rng>,
}

/// Stream for `party`, seeded from the hash of the run seed and party name.
pub fn party_rng(seed: u64, party: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(party.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

impl Sampler {
    fn stream(&mut self, party: &str) -> &mut ChaCha8Rng {
        let seed = self.seed;
        self.streams.entry(party.to_string()).or_insert_with(|| party_rng(seed, party))
    }
}

impl Default for World {
    fn default() -> Self {
        World::new()
    }
}

impl World {
    pub fn new() -> World {
        World {
            prob: 1.0,
            state: PureState::scalar(),
            memory: BTreeMap::new(),
            inbox: BTreeMap::new(),
            outputs: BTreeMap::new(),
            transcript: None,
            round: 0,
            sampler: None,
        }
    }

    /// Switch to single-path sampling driven by per-party streams.
    pub fn sampling(mut self, seed: u64) -> World {
        self.sampler = Some(Sampler { seed, streams: BTreeMap::new() });
        self
    }

    pub fn recording(mut self) -> World {
        self.transcript = Some(Vec::new());
        self
    }

    pub fn is_sampling(&self) -> bool {
        self.sampler.is_some()
    }

    /// Add qubits owned by the environment (inputs, references).
    pub fn add_state(&mut self, s: &PureState) -> Result<()> {
        self.state = self.state.tensor(s)?;
        Ok(())
    }

    /// Queue `msg` on `port` before the run starts.
    pub fn inject(&mut self, port: &str, msg: Message) {
        self.inbox.entry(port.to_string()).or_default().push_back(msg);
    }

    pub fn memory_of(&self, machine: &str) -> Option<&Memory> {
        self.memory.get(machine)
    }
}

/// Step context handed to [`Machine::step`].
pub struct Cx<'a> {
    world: &'a mut World,
    machine: &'a str,
    emits: &'a [String],
    script: &'a [usize],
    trace: Vec<(usize, usize)>,
    dead: bool,
}

impl<'a> Cx<'a> {
    pub fn machine(&self) -> &str {
        self.machine
    }

    pub fn has(&self, port: &str) -> bool {
        self.world.inbox.get(port).is_some_and(|q| !q.is_empty())
    }

    pub fn peek(&self, port: &str) -> Option<&Message> {
        self.world.inbox.get(port).and_then(|q| q.front())
    }

    pub fn recv(&mut self, port: &str) -> Result<Message> {
        self.world
            .inbox
            .get_mut(port)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| DqcError::OrderViolation(format!("{} read empty port `{port}`", self.machine)))
    }

    pub fn send(&mut self, port: &str, msg: Message) -> Result<()> {
        if !self.emits.iter().any(|p| p == port) {
            return Err(DqcError::MalformedChannel(format!("{} does not emit on `{port}`", self.machine)));
        }
        for q in &msg.qubits {
            if !self.world.state.contains(q) {
                return Err(DqcError::UnknownLabel(q.0.clone()));
            }
        }
        if let Some(t) = self.world.transcript.as_mut() {
            let fp = match msg.qubits.len() {
                0 => None,
                n if n > FINGERPRINT_MAX_QUBITS => Some(unrecorded_fingerprint(n)),
                _ => Some(fingerprint(&self.world.state.reduced(&msg.qubits)?)),
            };
            t.push(TranscriptEntry::new(self.world.round, self.machine, port, &msg, fp));
        }
        self.world.inbox.entry(port.to_string()).or_default().push_back(msg);
        Ok(())
    }

    fn mem(&mut self) -> &mut Memory {
        self.world.memory.entry(self.machine.to_string()).or_default()
    }

    pub fn get(&self, key: &str) -> Option<i64> {
        self.world.memory.get(self.machine)?.values.get(key)?.first().copied()
    }

    pub fn get_or(&self, key: &str, default: i64) -> i64 {
        self.get(key).unwrap_or(default)
    }

    pub fn set(&mut self, key: &str, v: i64) {
        self.mem().values.insert(key.to_string(), vec![v]);
    }

    pub fn get_list(&self, key: &str) -> Vec<i64> {
        self.world.memory.get(self.machine).and_then(|m| m.values.get(key)).cloned().unwrap_or_default()
    }

    pub fn set_list(&mut self, key: &str, v: Vec<i64>) {
        self.mem().values.insert(key.to_string(), v);
    }

    pub fn push(&mut self, key: &str, v: i64) {
        self.mem().values.entry(key.to_string()).or_default().push(v);
    }

    pub fn reg(&self, key: &str) -> Vec<QubitLabel> {
        self.world.memory.get(self.machine).and_then(|m| m.regs.get(key)).cloned().unwrap_or_default()
    }

    pub fn set_reg(&mut self, key: &str, labels: Vec<QubitLabel>) {
        self.mem().regs.insert(key.to_string(), labels);
    }

    /// Program counter helpers.
    pub fn pc(&self) -> i64 {
        self.get_or("pc", 0)
    }

    pub fn set_pc(&mut self, pc: i64) {
        self.set("pc", pc);
    }

    fn pick(&mut self, arity: usize, weights: Option<&[f64]>) -> usize {
        if let Some(s) = self.world.sampler.as_mut() {
            return match weights {
                None => s.stream(self.machine).gen_range(0..arity),
                Some(w) => {
                    let u: f64 = s.stream("quantum").gen();
                    let mut acc = 0.0;
                    for (i, p) in w.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            return i;
                        }
                    }
                    w.iter().rposition(|&p| p > ZERO_PROB).unwrap_or(0)
                }
            };
        }
        let v = self.script.get(self.trace.len()).copied().unwrap_or(0);
        self.trace.push((arity, v));
        v
    }

    /// Uniform choice in `0..n` by this party.
    pub fn choose(&mut self, n: usize) -> usize {
        let v = self.pick(n, None);
        if !self.is_sampling() {
            self.world.prob /= n as f64;
        }
        v
    }

    pub fn coin(&mut self) -> u8 {
        self.choose(2) as u8
    }

    /// Uniform angle from `{ℓπ/8 | 0 ≤ ℓ < 8}`.
    pub fn angle_a(&mut self) -> Angle {
        Angle::new(self.choose(8) as i64)
    }

    /// Uniform angle from all sixteen multiples of `π/8`.
    pub fn angle_any(&mut self) -> Angle {
        Angle::new(self.choose(16) as i64)
    }

    pub fn is_sampling(&self) -> bool {
        self.world.sampler.is_some()
    }

    /// Fresh label in this machine's namespace.
    pub fn label(&self, name: &str) -> QubitLabel {
        QubitLabel::new(format!("{}.{name}", self.machine))
    }

    pub fn prepare(&mut self, s: &PureState) -> Result<()> {
        let n = self.world.state.num_qubits() + s.num_qubits();
        if n > MAX_QUBITS {
            return Err(DqcError::SizeCap(n, MAX_QUBITS));
        }
        self.world.state = self.world.state.tensor(s)?;
        Ok(())
    }

    pub fn gate(&mut self, g: Gate, targets: &[QubitLabel]) -> Result<()> {
        self.world.state.apply_gate_mut(g, targets)
    }

    pub fn pauli(&mut self, p: &PauliString) -> Result<()> {
        self.world.state.apply_pauli_mut(p)
    }

    pub fn has_qubit(&self, l: &QubitLabel) -> bool {
        self.world.state.contains(l)
    }

    fn take_branch(&mut self, branches: Vec<crate::qstate::Branch>) -> u8 {
        let w: Vec<f64> = branches.iter().map(|b| b.probability).collect();
        let i = self.pick(branches.len(), Some(&w));
        let mut bs = branches;
        let chosen = bs.swap_remove(i);
        if !self.is_sampling() {
            self.world.prob *= chosen.probability;
        }
        match chosen.state {
            Some(s) => self.world.state = s,
            None => {
                self.dead = true;
                if let Some(s) = bs.into_iter().find_map(|b| b.state) {
                    self.world.state = s;
                }
            }
        }
        chosen.outcome
    }

    /// Measure in `{|±^δ⟩}` and consume the qubit; 1 means `|−^δ⟩`.
    pub fn measure_xy(&mut self, l: &QubitLabel, delta: Angle) -> Result<u8> {
        let b = self.world.state.measure_xy(l, delta)?;
        Ok(self.take_branch(b))
    }

    pub fn measure_z(&mut self, l: &QubitLabel) -> Result<u8> {
        let b = self.world.state.measure_z(l)?;
        Ok(self.take_branch(b))
    }

    /// Trace out a qubit (realised as a forgotten Z measurement).
    pub fn discard(&mut self, l: &QubitLabel) -> Result<()> {
        self.measure_z(l).map(|_| ())
    }

    /// Apply one of the Kraus operators `ops` on `targets`, branching over them.
    pub fn apply_kraus(&mut self, ops: &[DMatrix<Complex64>], targets: &[QubitLabel]) -> Result<usize> {
        let mut outs = Vec::with_capacity(ops.len());
        for k in ops {
            let mut s = self.world.state.clone();
            let flat: Vec<Complex64> =
                (0..k.nrows()).flat_map(|r| (0..k.ncols()).map(move |c| (r, c))).map(|rc| k[rc]).collect();
            s.apply_matrix_mut(&flat, targets)?;
            outs.push(s);
        }
        let w: Vec<f64> = outs.iter().map(|s| s.norm_sqr()).collect();
        let i = self.pick(ops.len(), Some(&w));
        let p = w[i];
        if !self.is_sampling() {
            self.world.prob *= p;
        }
        if p <= ZERO_PROB {
            self.dead = true;
        } else {
            let s = std::mem::replace(&mut outs[i], PureState::scalar());
            let labels = s.labels().to_vec();
            let scale = 1.0 / p.sqrt();
            let amps = s.amplitudes().iter().map(|a| a * scale).collect();
            self.world.state = PureState::from_amplitudes(labels, amps)?;
        }
        Ok(i)
    }

    /// Direct read access to the global state, for ideal resources.
    pub fn state(&self) -> &PureState {
        &self.world.state
    }
}

/// A set of machines wired together by port names.
#[derive(Clone, Default)]
pub struct System {
    machines: Vec<Arc<dyn Machine>>,
}

/// Direction of an open port, seen from outside the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Input,
    Output,
}

/// An open port of a composed system.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interface {
    pub party: String,
    pub port: String,
    pub direction: Direction,
}

const MAX_STEPS: usize = 100_000;

enum Advance {
    Terminal(World),
    Forked(Vec<World>),
}

impl System {
    pub fn new(machines: Vec<Arc<dyn Machine>>) -> Result<System> {
        let s = System { machines };
        s.check_bindings()?;
        Ok(s)
    }

    pub fn single(m: impl Machine + 'static) -> System {
        System::new(vec![Arc::new(m)]).expect("one machine binds each port once")
    }

    /// Union of the parts; every port is listened and emitted at most once.
    pub fn compose(parts: Vec<System>) -> Result<System> {
        System::new(parts.into_iter().flat_map(|p| p.machines).collect())
    }

    pub fn with(self, m: impl Machine + 'static) -> Result<System> {
        let mut ms = self.machines;
        ms.push(Arc::new(m));
        System::new(ms)
    }

    pub fn machines(&self) -> &[Arc<dyn Machine>] {
        &self.machines
    }

    fn check_bindings(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        let mut listened = BTreeSet::new();
        let mut emitted = BTreeSet::new();
        for m in &self.machines {
            if !names.insert(m.name().to_string()) {
                return Err(DqcError::DoubleBinding(format!("machine name {}", m.name())));
            }
            for p in m.listens() {
                if !listened.insert(p.clone()) {
                    return Err(DqcError::DoubleBinding(p));
                }
            }
            for p in m.emits() {
                if !emitted.insert(p.clone()) {
                    return Err(DqcError::DoubleBinding(p));
                }
            }
        }
        Ok(())
    }

    fn ports(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let l = self.machines.iter().flat_map(|m| m.listens()).collect();
        let e = self.machines.iter().flat_map(|m| m.emits()).collect();
        (l, e)
    }

    pub fn open_inputs(&self) -> BTreeSet<String> {
        let (l, e) = self.ports();
        l.difference(&e).cloned().collect()
    }

    pub fn open_outputs(&self) -> BTreeSet<String> {
        let (l, e) = self.ports();
        e.difference(&l).cloned().collect()
    }

    pub fn interfaces(&self) -> Vec<Interface> {
        let ins = self.open_inputs();
        let outs = self.open_outputs();
        let mut v = Vec::new();
        for m in &self.machines {
            for p in m.listens().into_iter().filter(|p| ins.contains(p)) {
                v.push(Interface { party: m.name().into(), port: p, direction: Direction::Input });
            }
            for p in m.emits().into_iter().filter(|p| outs.contains(p)) {
                v.push(Interface { party: m.name().into(), port: p, direction: Direction::Output });
            }
        }
        v.sort();
        v
    }

    fn run_step(m: &dyn Machine, w: &mut World, script: &[usize]) -> Result<(bool, Vec<(usize, usize)>, bool)> {
        let emits = m.emits();
        let name = m.name().to_string();
        let mut cx = Cx { world: w, machine: &name, emits: &emits, script, trace: Vec::new(), dead: false };
        let progressed = m.step(&mut cx)?;
        let (trace, dead) = (cx.trace, cx.dead);
        if progressed {
            w.round += 1;
        }
        Ok((progressed, trace, dead))
    }

    /// Move messages on unlistened ports into `outputs`.
    fn settle(&self, w: &mut World) {
        let outs = self.open_outputs();
        for p in outs {
            if let Some(q) = w.inbox.remove(&p) {
                w.outputs.entry(p).or_default().extend(q);
            }
        }
    }

    fn advance(&self, w: World) -> Result<Advance> {
        for m in &self.machines {
            let mut trial = w.clone();
            let (progressed, trace, dead) = System::run_step(m.as_ref(), &mut trial, &[])?;
            if !progressed {
                continue;
            }
            let mut out = Vec::new();
            let mut pending = Vec::new();
            let push_alts = |trace: &[(usize, usize)], from: usize, pending: &mut Vec<Vec<usize>>| {
                for i in from..trace.len() {
                    let prefix: Vec<usize> = trace[..i].iter().map(|t| t.1).collect();
                    for alt in 1..trace[i].0 {
                        let mut s = prefix.clone();
                        s.push(alt);
                        pending.push(s);
                    }
                }
            };
            push_alts(&trace, 0, &mut pending);
            if !dead && trial.prob > 0.0 {
                self.settle(&mut trial);
                out.push(trial);
            }
            while let Some(script) = pending.pop() {
                let mut w2 = w.clone();
                let (p, trace, dead) = System::run_step(m.as_ref(), &mut w2, &script)?;
                if !p {
                    return Err(DqcError::OrderViolation(format!("{} is not replayable", m.name())));
                }
                push_alts(&trace, script.len(), &mut pending);
                if !dead && w2.prob > 0.0 {
                    self.settle(&mut w2);
                    out.push(w2);
                }
            }
            return Ok(Advance::Forked(out));
        }
        Ok(Advance::Terminal(w))
    }

    /// All terminal branches with their probabilities.
    pub fn enumerate(&self, init: World) -> Result<Vec<World>> {
        if init.is_sampling() {
            return Err(DqcError::Precondition("enumerate needs a non-sampling world".into()));
        }
        let mut init = init;
        self.settle(&mut init);
        let mut done = Vec::new();
        let mut stack = vec![init];
        while let Some(w) = stack.pop() {
            if w.round > MAX_STEPS {
                return Err(DqcError::OrderViolation("step budget exhausted".into()));
            }
            match self.advance(w)? {
                Advance::Terminal(w) => done.push(w),
                Advance::Forked(ws) => stack.extend(ws),
            }
        }
        Ok(done)
    }

    /// One sampled path; requires a world built with [`World::sampling`].
    pub fn sample(&self, init: World) -> Result<World> {
        if !init.is_sampling() {
            return Err(DqcError::Precondition("sample needs a sampling world".into()));
        }
        let mut w = init;
        self.settle(&mut w);
        for _ in 0..MAX_STEPS {
            let mut progressed = false;
            for m in &self.machines {
                let mut trial = w.clone();
                let (p, _, _) = System::run_step(m.as_ref(), &mut trial, &[])?;
                if p {
                    self.settle(&mut trial);
                    w = trial;
                    progressed = true;
                    break;
                }
            }
            if !progressed {
                return Ok(w);
            }
        }
        Err(DqcError::OrderViolation("step budget exhausted".into()))
    }
}
