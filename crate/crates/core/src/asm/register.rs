use std::fmt;
use std::str::FromStr;

/// An integer register `x0..x31`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Register(u8);

const ABI_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "fp", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

impl Register {
    pub const ZERO: Register = Register(0);
    pub const RA: Register = Register(1);
    pub const SP: Register = Register(2);
    pub const GP: Register = Register(3);
    pub const TP: Register = Register(4);
    pub const T0: Register = Register(5);
    pub const T1: Register = Register(6);
    pub const T2: Register = Register(7);
    pub const FP: Register = Register(8);
    pub const S1: Register = Register(9);
    pub const A0: Register = Register(10);
    pub const A1: Register = Register(11);
    pub const A5: Register = Register(15);
    pub const A7: Register = Register(17);

    pub fn new(index: u8) -> Option<Self> {
        (index < 32).then_some(Register(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn abi_name(self) -> &'static str {
        ABI_NAMES[self.0 as usize]
    }

    /// Accepts `xN`, the ABI names, and the `s0` alias of `fp`.
    pub fn parse(name: &str) -> Option<Self> {
        if name == "s0" {
            return Some(Register::FP);
        }
        if let Some(pos) = ABI_NAMES.iter().position(|n| *n == name) {
            return Some(Register(pos as u8));
        }
        let digits = name.strip_prefix('x')?;
        if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
            return None;
        }
        digits.parse::<u8>().ok().and_then(Register::new)
    }

    /// a0..a7
    pub fn is_argument(self) -> bool {
        (10..=17).contains(&self.0)
    }

    /// Registers addressable by the 3-bit fields of the compressed encodings (x8..x15).
    pub fn is_rvc_short(self) -> bool {
        (8..=15).contains(&self.0)
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abi_name())
    }
}

impl FromStr for Register {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Register::parse(s).ok_or_else(|| format!("unknown register `{s}`"))
    }
}
