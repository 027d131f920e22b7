use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{charge, FailureSchedule, HarvestModel, NvmImage, Pipeline, RuntimeError, Task, TaskOutput};
use crate::energy::{
    total_energy, CapSlot, Capacitor, CostReport, EnergyBreakdown, McuProfile, SizingPlan, DEFAULT_LEAK_PW_PER_UF,
};
use crate::nvm::{InjectionPolicy, QlCatalog, QlId, SegmentCatalog, CONTROL_BUFFER};
use crate::rng::RunStream;

/// When the runtime waits for the capacitor to refill.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChargePolicy {
    /// Top the assigned capacitor up to `v_on` before every attempt.
    #[default]
    BeforeEachAttempt,
    /// Keep running until the capacitor browns out, then recharge and retry.
    OnBrownOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSettings {
    pub injection: InjectionPolicy,
    pub charge: ChargePolicy,
    pub failures: FailureSchedule,
    pub leak_pw_per_uf: f64,
}

impl Default for RuntimeSettings {
    fn default() -> Self {
        Self {
            injection: InjectionPolicy::default(),
            charge: ChargePolicy::default(),
            failures: FailureSchedule::default(),
            leak_pw_per_uf: DEFAULT_LEAK_PW_PER_UF,
        }
    }
}

/// Everything a run needs to know about the hardware it executes on.
#[derive(Debug, Clone, Copy)]
pub struct Platform<'a> {
    pub mcu: &'a McuProfile,
    pub qls: &'a QlCatalog,
    pub segments: &'a SegmentCatalog,
    pub plan: &'a SizingPlan,
    pub harvest: &'a HarvestModel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub id: String,
    pub attempts: u64,
    pub completions: u64,
    pub cycles: u64,
    pub bits_committed: u64,
    pub corrupted_bits: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub tasks: Vec<TaskTrace>,
    pub failures: u64,
    pub recharges: u64,
    pub recharge_time_s: f64,
    pub sim_time_s: f64,
    /// Energy drained by all attempts, aborted ones included.
    pub energy: EnergyBreakdown,
    /// Work of completed attempts.
    pub cost: CostReport,
    pub corrupted_bits: u64,
}

/// Per-task and total cost of an error-free run with unlimited energy.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenRun {
    pub image: NvmImage,
    pub cost: CostReport,
    pub per_task: Vec<(String, CostReport)>,
}

impl GoldenRun {
    /// Worst single-attempt energy of every task with all writes at Q0.
    pub fn per_task_energy_pj(&self, mcu: &McuProfile, qls: &QlCatalog) -> Result<BTreeMap<String, f64>, RuntimeError> {
        let q0 = qls.get(QlId::Q0);
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        for (id, cost) in &self.per_task {
            let e = total_energy(cost, mcu, q0)?.e_total_pj;
            let slot = out.entry(id.clone()).or_insert(0.0);
            *slot = slot.max(e);
        }
        Ok(out)
    }
}

fn compute_cost(task: &Task, out: &TaskOutput, mcu: &McuProfile) -> CostReport {
    let factor = mcu.isa_cycle_factor(task.workload);
    CostReport::compute((out.base_cycles as f64 * factor).round() as u64)
}

fn read_inputs<'i>(task: &Task, image: &'i NvmImage) -> Result<Vec<&'i [u8]>, RuntimeError> {
    task.inputs.iter().map(|name| image.read(name)).collect()
}

/// Runs `pipeline` error-free with unlimited energy.
pub fn golden_run(pipeline: &Pipeline, initial: &NvmImage, mcu: &McuProfile) -> Result<GoldenRun, RuntimeError> {
    let mut image = initial.clone();
    let mut per_task = Vec::with_capacity(pipeline.tasks.len());
    let exact = crate::nvm::MemorySegment::new("golden", QlId::Q0, true)?;
    let q0 = *QlCatalog::default().get(QlId::Q0);
    // Protected commits never draw from the generator.
    let mut no_rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    for (index, task) in pipeline.tasks.iter().enumerate() {
        let out = task.execute(&read_inputs(task, &image)?)?;
        let mut cost = compute_cost(task, &out, mcu);
        for (name, data) in task.outputs.iter().zip(out.buffers) {
            cost += CostReport::persist(data.len() as u64 * 8, mcu.access_width_bits);
            image.commit(name, data, &exact, &q0, &InjectionPolicy::default(), &mut no_rng)?;
        }
        let progress = (index as u32 + 1).to_le_bytes().to_vec();
        image.commit(CONTROL_BUFFER, progress, &exact, &q0, &InjectionPolicy::default(), &mut no_rng)?;
        per_task.push((task.id.clone(), cost));
    }
    let cost = per_task.iter().map(|(_, c)| *c).sum();
    Ok(GoldenRun { image, cost, per_task })
}

/// Intermittent executor. One instance owns one run's capacitors, clock and random stream
/// and may execute several pipelines back to back.
#[derive(Debug)]
pub struct Runtime<'a> {
    platform: Platform<'a>,
    settings: &'a RuntimeSettings,
    stream: RunStream,
    caps: [Capacitor; 3],
    now_us: f64,
    next_failure: usize,
    write_index: u64,
    trace: ExecutionTrace,
}

impl<'a> Runtime<'a> {
    pub fn new(platform: Platform<'a>, settings: &'a RuntimeSettings, stream: RunStream) -> Self {
        let caps = platform.plan.capacitors(settings.leak_pw_per_uf);
        Self {
            platform,
            settings,
            stream,
            caps,
            now_us: 0.0,
            next_failure: 0,
            write_index: 0,
            trace: ExecutionTrace::default(),
        }
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    pub fn into_trace(mut self) -> ExecutionTrace {
        self.trace.sim_time_s = self.now_us * 1e-6;
        self.trace
    }

    /// Executes every task of `pipeline` to completion against `image`.
    pub fn run(&mut self, pipeline: &Pipeline, image: &mut NvmImage) -> Result<(), RuntimeError> {
        if self.trace.tasks.len() < pipeline.tasks.len() {
            self.trace.tasks.resize_with(pipeline.tasks.len(), TaskTrace::default);
        }
        for (i, task) in pipeline.tasks.iter().enumerate() {
            self.trace.tasks[i].id.clone_from(&task.id);
            self.run_task(i, task, image)?;
        }
        Ok(())
    }

    fn recharge(&mut self, slot: CapSlot) -> Result<(), RuntimeError> {
        let cap = &mut self.caps[slot.index()];
        if cap.deficit_pj() <= 0.0 {
            return Ok(());
        }
        let t = charge(cap, self.platform.harvest, self.now_us)?;
        self.now_us += t * 1e6;
        self.trace.recharges += 1;
        self.trace.recharge_time_s += t;
        Ok(())
    }

    /// Next scripted failure not before `now_us`.
    fn pending_failure(&mut self) -> Option<f64> {
        let times = self.settings.failures.times_us();
        while self.next_failure < times.len() && times[self.next_failure] < self.now_us {
            self.next_failure += 1;
        }
        times.get(self.next_failure).copied()
    }

    fn run_task(&mut self, index: usize, task: &Task, image: &mut NvmImage) -> Result<(), RuntimeError> {
        let Platform {
            mcu,
            qls,
            segments,
            plan,
            ..
        } = self.platform;
        let slot = plan.assignments.get(&task.id).copied().unwrap_or(CapSlot::Large);
        loop {
            if self.settings.charge == ChargePolicy::BeforeEachAttempt {
                self.recharge(slot)?;
            }
            let out = task.execute(&read_inputs(task, image)?)?;
            let mut cost = compute_cost(task, &out, mcu);
            let mut energy = total_energy(&cost, mcu, qls.get(QlId::Q0))?;
            let mut levels = Vec::with_capacity(task.outputs.len());
            for (name, data) in task.outputs.iter().zip(&out.buffers) {
                let seg = segments.lookup(name)?;
                let ql = *qls.get(if seg.protected { QlId::Q0 } else { seg.ql });
                let persist = CostReport::persist(data.len() as u64 * 8, mcu.access_width_bits);
                energy += total_energy(&persist, mcu, &ql)?;
                cost += persist;
                levels.push((seg.clone(), ql));
            }
            let usable = self.caps[slot.index()].usable_energy_pj();
            if energy.e_total_pj > usable {
                return Err(RuntimeError::NonTerminating {
                    task: task.id.clone(),
                    need_pj: energy.e_total_pj,
                    usable_pj: usable,
                });
            }
            let duration_us = (cost.cycles as f64 + mcu.cycles_per_mem_access * cost.mem_accesses as f64) / mcu.clock_mhz;

            let mut abort: Option<f64> = None;
            if let Some(t_fail) = self.pending_failure() {
                if t_fail < self.now_us + duration_us {
                    abort = Some((t_fail - self.now_us) / duration_us);
                    self.next_failure += 1;
                }
            }
            let available = self.caps[slot.index()].available_pj();
            if energy.e_total_pj > available {
                let f = available / energy.e_total_pj;
                abort = Some(abort.map_or(f, |a| a.min(f)));
            }

            let tt = &mut self.trace.tasks[index];
            tt.attempts += 1;
            if let Some(frac) = abort {
                let spent = energy.scaled(frac);
                self.trace.energy += spent;
                self.trace.failures += 1;
                self.now_us += frac * duration_us;
                self.caps[slot.index()].set_empty();
                self.recharge(slot)?;
                continue;
            }

            self.trace.energy += energy;
            self.trace.cost += cost;
            self.caps[slot.index()].drain(energy.e_total_pj);
            self.now_us += duration_us;
            tt.completions += 1;
            tt.cycles += cost.cycles;
            tt.bits_committed += cost.bits_written;
            let policy = self.settings.injection;
            for ((name, data), (seg, ql)) in task.outputs.iter().zip(out.buffers).zip(levels) {
                let mut rng = self.stream.for_write(self.write_index);
                self.write_index += 1;
                let n = image.commit(name, data, &seg, &ql, &policy, &mut rng)?;
                self.trace.tasks[index].corrupted_bits += n;
                self.trace.corrupted_bits += n;
            }
            let ctl = segments.lookup(CONTROL_BUFFER)?;
            let progress = (index as u32 + 1).to_le_bytes().to_vec();
            let mut rng = self.stream.for_write(self.write_index);
            self.write_index += 1;
            image.commit(CONTROL_BUFFER, progress, ctl, qls.get(QlId::Q0), &policy, &mut rng)?;
            return Ok(());
        }
    }
}

/// Runs one pipeline from `initial` and returns the final NVM image and its trace.
pub fn run_pipeline(
    pipeline: &Pipeline,
    initial: &NvmImage,
    platform: Platform<'_>,
    settings: &RuntimeSettings,
    stream: RunStream,
) -> Result<(NvmImage, ExecutionTrace), RuntimeError> {
    let mut image = initial.clone();
    let mut rt = Runtime::new(platform, settings, stream);
    rt.run(pipeline, &mut image)?;
    Ok((image, rt.into_trace()))
}
