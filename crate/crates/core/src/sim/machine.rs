use serde::Serialize;

use super::btb::Btb;
use super::cache::Cache;
use super::memory::Memory;
use super::program::{AluOp, BranchCond, Decoded, Op, Program};
use super::ras::Ras;
use super::{MachineConfig, SimError};
use crate::asm::{
    data_image, layout_with, AddressMap, AsmUnit, Csr, IsaProfile, LayoutOptions, Register,
};

/// Bytes below `stack_top` reserved for the stack.
pub const STACK_BYTES: u64 = 1 << 20;

/// `ra` at entry; returning here from the entry function exits with `a0`.
pub const EXIT_ADDR: u64 = 0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Status {
    Running,
    Exited { code: i64 },
    Fault { pc: u64, reason: String },
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepEvent {
    /// An instruction took architectural effect.
    Retired,
    /// An instruction ran inside a speculation window.
    Speculated,
    /// The window closed and state rolled back.
    Squashed,
    Halted,
}

/// One closed speculation window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpecEvent {
    /// The mispredicted branch.
    pub pc: u64,
    pub predicted: u64,
    pub resolved: u64,
    pub window_used: u32,
    /// Cache lines filled by speculative loads.
    pub cache_fills: u32,
}

#[derive(Clone, Debug)]
struct SpecContext {
    checkpoint: [u64; 32],
    site: u64,
    predicted: u64,
    resolved: u64,
    remaining: u32,
    used: u32,
    fills: u32,
}

/// Summary of a run, serializable as the `--trace` output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub steps: u64,
    pub cycles: u64,
    pub spec_events: Vec<SpecEvent>,
    pub exit_code: Option<i64>,
    pub status: Status,
}

#[derive(Clone, Debug)]
pub struct Machine {
    cfg: MachineConfig,
    program: Program,
    pub regs: [u64; 32],
    pub pc: u64,
    pub mem: Memory,
    pub cycles: u64,
    steps: u64,
    retired: u64,
    cache: Cache,
    btb: Btb,
    ras: Ras,
    spec: Option<SpecContext>,
    status: Status,
    events: Vec<SpecEvent>,
    data: (u64, u64),
    relocs: Vec<(u64, u8)>,
}

fn sext32(v: u64) -> u64 {
    v as u32 as i32 as i64 as u64
}

/// Lays out `unit` with the configured bases and loads it.
pub fn load_unit(
    unit: &AsmUnit,
    isa: IsaProfile,
    cfg: &MachineConfig,
) -> Result<Machine, SimError> {
    let opts = LayoutOptions {
        base_text: cfg.base_text,
        base_data: cfg.base_data,
    };
    let map = layout_with(unit, isa, opts)?;
    load(unit, &map, cfg)
}

pub fn load(unit: &AsmUnit, map: &AddressMap, cfg: &MachineConfig) -> Result<Machine, SimError> {
    cfg.validate()?;
    let program = Program::decode(unit, map)?;
    let image = data_image(unit, map)?;
    let regions = [
        ("text", map.base_text, map.text_end),
        ("data", map.base_data, map.data_end),
        (
            "stack",
            cfg.stack_top.saturating_sub(STACK_BYTES),
            cfg.stack_top,
        ),
    ];
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if a.1 < a.2 && b.1 < b.2 && a.1 < b.2 && b.1 < a.2 {
                return Err(SimError::Overlap(a.0, b.0));
            }
        }
    }
    let mut mem = Memory::new();
    mem.write_bytes(image.base, &image.bytes);
    let mut regs = [0; 32];
    regs[Register::SP.index()] = cfg.stack_top;
    regs[Register::RA.index()] = EXIT_ADDR;
    Ok(Machine {
        pc: program.entry,
        program,
        regs,
        mem,
        cycles: 0,
        steps: 0,
        retired: 0,
        cache: Cache::new(cfg),
        btb: Btb::new(cfg),
        ras: Ras::new(cfg.ras_depth),
        spec: None,
        status: Status::Running,
        events: Vec::new(),
        data: (map.base_data, map.data_end),
        relocs: image.relocs,
        cfg: cfg.clone(),
    })
}

enum Next {
    Fallthrough,
    Jump(u64),
    /// Mispredicted: run `predicted` speculatively, then resume at `resolved`.
    Mispredict {
        predicted: u64,
        resolved: u64,
    },
    Halt(Status),
    Squash,
}

impl Machine {
    pub fn config(&self) -> &MachineConfig {
        &self.cfg
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn is_halted(&self) -> bool {
        self.status != Status::Running
    }

    pub fn exit_code(&self) -> Option<i64> {
        match self.status {
            Status::Exited { code } => Some(code),
            _ => None,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn spec_events(&self) -> &[SpecEvent] {
        &self.events
    }

    pub fn is_speculating(&self) -> bool {
        self.spec.is_some()
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn btb(&self) -> &Btb {
        &self.btb
    }

    pub fn ras(&self) -> &Ras {
        &self.ras
    }

    pub fn reg(&self, r: Register) -> u64 {
        self.regs[r.index()]
    }

    /// Data section contents with symbol-initialized words zeroed, so that
    /// programs differing only in code layout compare equal.
    pub fn data_snapshot(&self) -> Vec<u8> {
        let (base, end) = self.data;
        let mut bytes = self.mem.read_bytes(base, (end - base) as usize);
        for &(addr, width) in &self.relocs {
            let off = (addr - base) as usize;
            bytes[off..off + usize::from(width)].fill(0);
        }
        bytes
    }

    pub fn trace(&self) -> Trace {
        Trace {
            steps: self.steps,
            cycles: self.cycles,
            spec_events: self.events.clone(),
            exit_code: self.exit_code(),
            status: self.status.clone(),
        }
    }

    /// Steps until halt or until `max_steps` have been taken in total.
    pub fn run(&mut self) -> Trace {
        while !self.is_halted() {
            if self.steps >= self.cfg.max_steps {
                self.status = Status::Timeout;
                break;
            }
            self.step();
        }
        self.trace()
    }

    pub fn step(&mut self) -> StepEvent {
        if self.is_halted() {
            return StepEvent::Halted;
        }
        self.steps += 1;
        if self.spec.is_some() {
            return self.spec_step();
        }
        if self.pc == EXIT_ADDR {
            self.status = Status::Exited {
                code: self.reg(Register::A0) as i64,
            };
            return StepEvent::Halted;
        }
        let Some(d) = self.program.fetch(self.pc) else {
            self.status = Status::Fault {
                pc: self.pc,
                reason: "fetch from an address holding no instruction".into(),
            };
            return StepEvent::Halted;
        };
        self.retired += 1;
        match self.execute(d, false) {
            Next::Fallthrough => self.pc += u64::from(d.size),
            Next::Jump(t) => self.pc = t,
            Next::Mispredict {
                predicted,
                resolved,
            } => {
                self.spec = Some(SpecContext {
                    checkpoint: self.regs,
                    site: self.pc,
                    predicted,
                    resolved,
                    remaining: self.cfg.spec_window,
                    used: 0,
                    fills: 0,
                });
                self.pc = predicted;
            }
            Next::Halt(s) => {
                self.status = s;
                return StepEvent::Halted;
            }
            Next::Squash => unreachable!("architectural execution never squashes"),
        }
        StepEvent::Retired
    }

    fn spec_step(&mut self) -> StepEvent {
        let ctx = self.spec.as_ref().expect("speculating");
        if ctx.remaining == 0 {
            return self.squash();
        }
        let Some(d) = self.program.fetch(self.pc) else {
            return self.squash();
        };
        match self.execute(d, true) {
            Next::Fallthrough => self.pc += u64::from(d.size),
            Next::Jump(t) => self.pc = t,
            Next::Squash | Next::Halt(_) => return self.squash(),
            Next::Mispredict { .. } => unreachable!("no prediction while speculating"),
        }
        let ctx = self.spec.as_mut().expect("speculating");
        ctx.remaining -= 1;
        ctx.used += 1;
        StepEvent::Speculated
    }

    fn squash(&mut self) -> StepEvent {
        let ctx = self.spec.take().expect("speculating");
        self.regs = ctx.checkpoint;
        self.pc = ctx.resolved;
        self.events.push(SpecEvent {
            pc: ctx.site,
            predicted: ctx.predicted,
            resolved: ctx.resolved,
            window_used: ctx.used,
            cache_fills: ctx.fills,
        });
        StepEvent::Squashed
    }

    fn set(&mut self, rd: Register, v: u64) {
        if rd != Register::ZERO {
            self.regs[rd.index()] = v;
        }
    }

    fn memory_access(&mut self, addr: u64, speculative: bool) {
        let a = self.cache.access(addr);
        self.cycles += a.latency;
        if speculative && !a.hit {
            if let Some(ctx) = self.spec.as_mut() {
                ctx.fills += 1;
            }
        }
    }

    fn predict(&self, predicted: Option<u64>, resolved: u64) -> Next {
        match predicted {
            Some(p) if p != resolved && self.cfg.speculation => Next::Mispredict {
                predicted: p,
                resolved,
            },
            _ => Next::Jump(resolved),
        }
    }

    fn execute(&mut self, d: Decoded, speculative: bool) -> Next {
        let r = |m: &Machine, reg: Register| m.regs[reg.index()];
        let link = self.pc + u64::from(d.size);
        if speculative && d.op.is_serializing() {
            return Next::Squash;
        }
        self.cycles += 1;
        match d.op {
            Op::Alu { op, rd, rs1, rs2 } => {
                let v = alu(op, r(self, rs1), r(self, rs2));
                self.set(rd, v);
            }
            Op::AluImm { op, rd, rs1, imm } => {
                let v = alu(op, r(self, rs1), imm as u64);
                self.set(rd, v);
            }
            Op::Lui { rd, value } => self.set(rd, value),
            Op::Load {
                rd,
                base,
                offset,
                width,
                signed,
            } => {
                let addr = r(self, base).wrapping_add(offset as u64);
                self.memory_access(addr, speculative);
                let raw = self.mem.read(addr, width);
                let v = if signed && width < 8 {
                    let shift = 64 - 8 * u32::from(width);
                    (((raw << shift) as i64) >> shift) as u64
                } else {
                    raw
                };
                self.set(rd, v);
            }
            Op::Store {
                src,
                base,
                offset,
                width,
            } => {
                if !speculative {
                    let addr = r(self, base).wrapping_add(offset as u64);
                    self.memory_access(addr, false);
                    self.mem.write(addr, width, r(self, src));
                }
            }
            Op::Branch {
                cond,
                rs1,
                rs2,
                target,
            } => {
                let (a, b) = (r(self, rs1), r(self, rs2));
                let taken = match cond {
                    BranchCond::Eq => a == b,
                    BranchCond::Ne => a != b,
                    BranchCond::Lt => (a as i64) < (b as i64),
                    BranchCond::Ge => (a as i64) >= (b as i64),
                    BranchCond::Ltu => a < b,
                    BranchCond::Geu => a >= b,
                };
                if taken {
                    return Next::Jump(target);
                }
            }
            Op::Jal { rd, target } => {
                if is_link(rd) && !speculative {
                    self.ras.push(link);
                }
                self.set(rd, link);
                return Next::Jump(target);
            }
            Op::Jalr { rd, rs, imm } => {
                let resolved = r(self, rs).wrapping_add(imm as u64) & !1;
                self.set(rd, link);
                if speculative {
                    return Next::Jump(resolved);
                }
                let pc = self.pc;
                let pops = is_link(rs) && !(is_link(rd) && rd == rs);
                let predicted = if pops {
                    self.ras.pop()
                } else {
                    let p = self.btb.lookup(pc);
                    self.btb.update(pc, resolved);
                    p
                };
                if is_link(rd) {
                    self.ras.push(link);
                }
                return self.predict(predicted, resolved);
            }
            Op::Ecall => {
                return if r(self, Register::A7) == 93 {
                    Next::Halt(Status::Exited {
                        code: r(self, Register::A0) as i64,
                    })
                } else {
                    Next::Halt(Status::Fault {
                        pc: self.pc,
                        reason: format!("unsupported ecall {}", r(self, Register::A7)),
                    })
                };
            }
            Op::ReadCsr { rd, csr } => {
                // the counter is sampled before this instruction's own cycle
                let v = match csr {
                    Csr::Cycle | Csr::Time => self.cycles - 1,
                    Csr::Instret => self.retired - 1,
                };
                self.set(rd, v);
            }
        }
        Next::Fallthrough
    }
}

/// Return-address hint registers: `ra` and `t0`.
fn is_link(r: Register) -> bool {
    r == Register::RA || r == Register::T0
}

fn alu(op: AluOp, a: u64, b: u64) -> u64 {
    match op {
        AluOp::Add => a.wrapping_add(b),
        AluOp::Sub => a.wrapping_sub(b),
        AluOp::And => a & b,
        AluOp::Or => a | b,
        AluOp::Xor => a ^ b,
        AluOp::Sll => a << (b & 63),
        AluOp::Srl => a >> (b & 63),
        AluOp::Sra => ((a as i64) >> (b & 63)) as u64,
        AluOp::Slt => u64::from((a as i64) < (b as i64)),
        AluOp::Sltu => u64::from(a < b),
        AluOp::Mul => a.wrapping_mul(b),
        AluOp::Addw => sext32(a.wrapping_add(b)),
        AluOp::Subw => sext32(a.wrapping_sub(b)),
    }
}
