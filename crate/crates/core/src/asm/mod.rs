//! Assembly representation: parsing, printing, pseudo expansion, the RV64G /
//! RV64GC size model, and address layout.

mod error;
mod instr;
mod layout;
mod parse;
mod print;
mod register;
mod size;
mod unit;

pub use error::AsmError;
pub use instr::{
    expand_pseudo, hi20, lo12, parse_instruction, Csr, InstrParseError, Instruction, Mnemonic,
    Operand, Origin, SourceLoc,
};
pub use layout::{
    data_image, layout, layout_with, AddressMap, DataImage, LayoutOptions, DEFAULT_DATA_BASE,
    DEFAULT_TEXT_BASE,
};
pub use parse::{parse_unit, MARKER};
pub use print::print_unit;
pub use register::Register;
pub use size::{instr_size, IsaProfile};
pub use unit::{AsmUnit, Directive, Function, Item, Label, Section};
