//! Address assignment for text and data, and materialization of data bytes.

use std::collections::BTreeMap;

use super::error::AsmError;
use super::instr::{is_identifier, parse_int};
use super::size::{instr_size, IsaProfile};
use super::unit::{AsmUnit, Directive, Item, Section};

pub const DEFAULT_TEXT_BASE: u64 = 0x1_0000;
pub const DEFAULT_DATA_BASE: u64 = 0x2_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayoutOptions {
    pub base_text: u64,
    pub base_data: u64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            base_text: DEFAULT_TEXT_BASE,
            base_data: DEFAULT_DATA_BASE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddressMap {
    pub isa: IsaProfile,
    pub base_text: u64,
    pub base_data: u64,
    /// End of text (exclusive).
    pub text_end: u64,
    /// End of data (exclusive).
    pub data_end: u64,
    /// Item index of each instruction to its address.
    pub instr_addr: BTreeMap<usize, u64>,
    pub symbol_addr: BTreeMap<String, u64>,
}

impl AddressMap {
    pub fn symbol(&self, name: &str) -> Option<u64> {
        self.symbol_addr.get(name).copied()
    }

    pub fn text_size(&self) -> u64 {
        self.text_end - self.base_text
    }
}

pub fn layout(unit: &AsmUnit, isa: IsaProfile) -> Result<AddressMap, AsmError> {
    layout_with(unit, isa, LayoutOptions::default())
}

pub fn layout_with(
    unit: &AsmUnit,
    isa: IsaProfile,
    opts: LayoutOptions,
) -> Result<AddressMap, AsmError> {
    check_symbols(unit)?;
    let sections = unit.sections();
    let mut text = opts.base_text;
    let mut data = opts.base_data;
    let mut instr_addr = BTreeMap::new();
    let mut symbol_addr = BTreeMap::new();
    for (idx, item) in unit.items().iter().enumerate() {
        let section = sections[idx];
        match item {
            Item::Label(l) => {
                let at = if section == Section::Text { text } else { data };
                symbol_addr.insert(l.name.clone(), at);
            }
            Item::Instruction(i) => {
                if section != Section::Text {
                    return Err(AsmError::Directive {
                        directive: i.to_string(),
                        msg: "instruction outside a text section".into(),
                    });
                }
                instr_addr.insert(idx, text);
                text += u64::from(instr_size(i, isa));
            }
            Item::Directive(d) => {
                let Some(dd) = DataDirective::parse(d)? else {
                    continue;
                };
                match (section, dd) {
                    (Section::Text, DataDirective::Align(_)) => {}
                    (Section::Text, _) => {
                        return Err(AsmError::Directive {
                            directive: d.name.clone(),
                            msg: "data directive in a text section".into(),
                        })
                    }
                    (Section::Data, dd) => data = dd.advance(data),
                }
            }
        }
    }
    Ok(AddressMap {
        isa,
        base_text: opts.base_text,
        base_data: opts.base_data,
        text_end: text,
        data_end: data,
        instr_addr,
        symbol_addr,
    })
}

/// Every referenced symbol must be defined or declared external.
fn check_symbols(unit: &AsmUnit) -> Result<(), AsmError> {
    let externs = unit.externs();
    let known = |s: &str| unit.symbols().contains_key(s) || externs.contains(s);
    for item in unit.items() {
        match item {
            Item::Instruction(i) => {
                if let Some(s) = i
                    .operands
                    .iter()
                    .filter_map(|o| o.referenced_symbol())
                    .find(|s| !known(s))
                {
                    return Err(AsmError::UnresolvedSymbol(s.to_string()));
                }
            }
            Item::Directive(d) => {
                if let Some(DataDirective::Values { values, .. }) = DataDirective::parse(d)? {
                    for v in values {
                        if let DataValue::Symbol(s) = v {
                            if !known(&s) {
                                return Err(AsmError::UnresolvedSymbol(s));
                            }
                        }
                    }
                }
            }
            Item::Label(_) => {}
        }
    }
    Ok(())
}

/// Initial contents of the data section.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataImage {
    pub base: u64,
    pub bytes: Vec<u8>,
    /// Words initialized from symbol addresses: `(address, width)`.
    pub relocs: Vec<(u64, u8)>,
}

impl DataImage {
    /// True when `addr` lies inside a symbol-initialized word.
    pub fn is_relocated(&self, addr: u64) -> bool {
        self.relocs
            .iter()
            .any(|&(a, w)| addr >= a && addr < a + u64::from(w))
    }
}

pub fn data_image(unit: &AsmUnit, map: &AddressMap) -> Result<DataImage, AsmError> {
    let sections = unit.sections();
    let mut bytes = Vec::new();
    let mut relocs = Vec::new();
    let base = map.base_data;
    for (idx, item) in unit.items().iter().enumerate() {
        let Item::Directive(d) = item else { continue };
        if sections[idx] != Section::Data {
            continue;
        }
        let Some(dd) = DataDirective::parse(d)? else {
            continue;
        };
        let at = base + bytes.len() as u64;
        match dd {
            DataDirective::Values { width, values } => {
                for (k, v) in values.into_iter().enumerate() {
                    let value = match v {
                        DataValue::Int(n) => n,
                        DataValue::Symbol(s) => {
                            relocs.push((at + (k as u64) * u64::from(width), width));
                            map.symbol(&s).ok_or(AsmError::UnresolvedSymbol(s))? as i64
                        }
                    };
                    bytes.extend_from_slice(&value.to_le_bytes()[..usize::from(width)]);
                }
            }
            DataDirective::Fill { count, value } => {
                bytes.extend(std::iter::repeat_n(value, count as usize))
            }
            DataDirective::Bytes(b) => bytes.extend(b),
            DataDirective::Align(a) => {
                let end = align_up(at, a);
                bytes.resize(bytes.len() + (end - at) as usize, 0);
            }
        }
    }
    Ok(DataImage {
        base,
        bytes,
        relocs,
    })
}

fn align_up(v: u64, a: u64) -> u64 {
    v.div_ceil(a) * a
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum DataValue {
    Int(i64),
    Symbol(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum DataDirective {
    Values { width: u8, values: Vec<DataValue> },
    Fill { count: u64, value: u8 },
    Bytes(Vec<u8>),
    Align(u64),
}

impl DataDirective {
    fn advance(&self, at: u64) -> u64 {
        match self {
            DataDirective::Values { width, values } => at + u64::from(*width) * values.len() as u64,
            DataDirective::Fill { count, .. } => at + count,
            DataDirective::Bytes(b) => at + b.len() as u64,
            DataDirective::Align(a) => align_up(at, *a),
        }
    }

    /// `None` for directives that occupy no space.
    pub(crate) fn parse(d: &Directive) -> Result<Option<DataDirective>, AsmError> {
        let bad = |msg: &str| AsmError::Directive {
            directive: format!("{} {}", d.name, d.args),
            msg: msg.to_string(),
        };
        let width = match d.name.as_str() {
            ".byte" => Some(1),
            ".half" | ".2byte" | ".short" => Some(2),
            ".word" | ".4byte" | ".long" => Some(4),
            ".dword" | ".8byte" | ".quad" => Some(8),
            _ => None,
        };
        if let Some(width) = width {
            let values = d
                .arg_list()
                .iter()
                .map(|a| {
                    if let Some(v) = parse_int(a) {
                        Ok(DataValue::Int(v))
                    } else if is_identifier(a) {
                        Ok(DataValue::Symbol(a.clone()))
                    } else {
                        Err(bad(&format!("bad value `{a}`")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            if width < 8 && values.iter().any(|v| matches!(v, DataValue::Symbol(_))) {
                return Err(bad("symbol values need a 64-bit slot"));
            }
            return Ok(Some(DataDirective::Values { width, values }));
        }
        let int_arg = |i: usize| -> Result<Option<i64>, AsmError> {
            match d.arg_list().get(i) {
                None => Ok(None),
                Some(a) => parse_int(a)
                    .map(Some)
                    .ok_or_else(|| bad("expected an integer")),
            }
        };
        let dd = match d.name.as_str() {
            ".zero" | ".space" | ".skip" => {
                let count = int_arg(0)?.ok_or_else(|| bad("missing size"))?;
                if count < 0 {
                    return Err(bad("negative size"));
                }
                let value = int_arg(1)?.unwrap_or(0) as u8;
                DataDirective::Fill {
                    count: count as u64,
                    value,
                }
            }
            ".ascii" | ".asciz" | ".string" => {
                let mut out = Vec::new();
                for a in d.arg_list() {
                    out.extend(parse_string(&a).ok_or_else(|| bad("malformed string"))?);
                    if d.name != ".ascii" {
                        out.push(0);
                    }
                }
                DataDirective::Bytes(out)
            }
            ".align" | ".p2align" => {
                let p = int_arg(0)?.ok_or_else(|| bad("missing alignment"))?;
                if !(0..=16).contains(&p) {
                    return Err(bad("alignment exponent out of range"));
                }
                DataDirective::Align(1 << p)
            }
            ".balign" => {
                let a = int_arg(0)?.ok_or_else(|| bad("missing alignment"))?;
                if a <= 0 || (a & (a - 1)) != 0 {
                    return Err(bad("alignment must be a power of two"));
                }
                DataDirective::Align(a as u64)
            }
            _ => return Ok(None),
        };
        Ok(Some(dd))
    }
}

fn parse_string(s: &str) -> Option<Vec<u8>> {
    let inner = s.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = Vec::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0u8; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        match chars.next()? {
            'n' => out.push(b'\n'),
            't' => out.push(b'\t'),
            'r' => out.push(b'\r'),
            '0' => out.push(0),
            '\\' => out.push(b'\\'),
            '"' => out.push(b'"'),
            'x' => {
                let hex: String = chars.by_ref().take(2).collect();
                out.push(u8::from_str_radix(&hex, 16).ok()?);
            }
            _ => return None,
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_unit;

    #[test]
    fn two_wide_instructions() {
        let u = parse_unit("add a0, a1, a2\nsub a0, a1, a2\n").unwrap();
        let m = layout(&u, IsaProfile::Rv64g).unwrap();
        let addrs: Vec<u64> = m.instr_addr.values().copied().collect();
        assert_eq!(addrs, vec![DEFAULT_TEXT_BASE, DEFAULT_TEXT_BASE + 4]);
    }

    #[test]
    fn prologue_offsets_per_isa() {
        let u = parse_unit("f:\naddi sp, sp, -16\nsd ra, 8(sp)\nsd fp, 0(sp)\n").unwrap();
        for (isa, expect) in [
            (IsaProfile::Rv64gc, [0, 2, 4]),
            (IsaProfile::Rv64g, [0, 4, 8]),
        ] {
            let m = layout(&u, isa).unwrap();
            let f = m.symbol("f").unwrap();
            let offs: Vec<u64> = m.instr_addr.values().map(|a| a - f).collect();
            assert_eq!(offs, expect);
        }
    }

    #[test]
    fn data_bytes_and_symbols() {
        let u = parse_unit(
            ".text\nmain: ret\n.data\nb: .byte 66\n.align 3\nw: .dword main, 5\ns: .asciz \"BOOM!\"\n",
        )
        .unwrap();
        let m = layout(&u, IsaProfile::Rv64gc).unwrap();
        assert_eq!(m.symbol("b"), Some(DEFAULT_DATA_BASE));
        assert_eq!(m.symbol("w"), Some(DEFAULT_DATA_BASE + 8));
        assert_eq!(m.symbol("s"), Some(DEFAULT_DATA_BASE + 24));
        let img = data_image(&u, &m).unwrap();
        assert_eq!(img.bytes[0], 66);
        assert_eq!(&img.bytes[8..16], &DEFAULT_TEXT_BASE.to_le_bytes());
        assert_eq!(&img.bytes[24..30], b"BOOM!\0");
        assert!(img.is_relocated(DEFAULT_DATA_BASE + 8));
        assert!(!img.is_relocated(DEFAULT_DATA_BASE + 16));
        assert_eq!(m.data_end, DEFAULT_DATA_BASE + 30);
    }

    #[test]
    fn unresolved_symbol_is_an_error() {
        let u = parse_unit("main: call missing\n").unwrap();
        assert_eq!(
            layout(&u, IsaProfile::Rv64gc),
            Err(AsmError::UnresolvedSymbol("missing".into()))
        );
        let u = parse_unit(".extern missing\nmain: call missing\n").unwrap();
        assert!(layout(&u, IsaProfile::Rv64gc).is_ok());
    }

    #[test]
    fn data_in_text_rejected() {
        let u = parse_unit(".text\n.byte 1\n").unwrap();
        assert!(matches!(
            layout(&u, IsaProfile::Rv64gc),
            Err(AsmError::Directive { .. })
        ));
    }

    #[test]
    fn string_escapes() {
        assert_eq!(parse_string(r#""a\n\x41\"""#), Some(b"a\nA\"".to_vec()));
        assert_eq!(parse_string("noquotes"), None);
    }
}
