use std::collections::{BTreeMap, BTreeSet};

use super::error::AsmError;
use super::instr::{expand_pseudo, Instruction, Mnemonic, Operand, Origin};
use super::register::Register;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Label {
    pub name: String,
    pub origin: Origin,
}

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Label {
            name: name.into(),
            origin: Origin::Original,
        }
    }

    pub fn synthesized(name: impl Into<String>) -> Self {
        Label {
            name: name.into(),
            origin: Origin::Synthesized,
        }
    }
}

/// A directive carried through verbatim: `.name args`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Directive {
    /// Including the leading dot.
    pub name: String,
    pub args: String,
}

impl Directive {
    pub fn new(name: impl Into<String>, args: impl Into<String>) -> Self {
        Directive {
            name: name.into(),
            args: args.into().trim().to_string(),
        }
    }

    /// Comma-separated arguments, respecting double-quoted strings.
    pub fn arg_list(&self) -> Vec<String> {
        split_args(&self.args)
    }

    /// Section this directive switches to, if it is a section directive.
    pub fn section_switch(&self) -> Option<Section> {
        match self.name.as_str() {
            ".text" => Some(Section::Text),
            ".data" | ".rodata" | ".bss" | ".sdata" | ".sbss" => Some(Section::Data),
            ".section" => {
                let first = self.arg_list().into_iter().next().unwrap_or_default();
                Some(if first.starts_with(".text") {
                    Section::Text
                } else {
                    Section::Data
                })
            }
            _ => None,
        }
    }
}

pub(crate) fn split_args(args: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    let mut escaped = false;
    for c in args.chars() {
        if in_str {
            cur.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                cur.push(c);
            }
            ',' => out.push(std::mem::take(&mut cur).trim().to_string()),
            _ => cur.push(c),
        }
    }
    let last = cur.trim().to_string();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Section {
    Text,
    Data,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Label(Label),
    Directive(Directive),
    Instruction(Instruction),
}

impl Item {
    pub fn as_instruction(&self) -> Option<&Instruction> {
        match self {
            Item::Instruction(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Item::Label(l) => Some(&l.name),
            _ => None,
        }
    }
}

impl From<Instruction> for Item {
    fn from(i: Instruction) -> Self {
        Item::Instruction(i)
    }
}

impl From<Label> for Item {
    fn from(l: Label) -> Self {
        Item::Label(l)
    }
}

/// A function's span of items: the label at `start` up to (excluding) `end`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// One translation unit.
#[derive(Clone, Debug)]
pub struct AsmUnit {
    items: Vec<Item>,
    symbols: BTreeMap<String, usize>,
    functions: Vec<Function>,
}

/// Structural equality: same items in the same order.
impl PartialEq for AsmUnit {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl Eq for AsmUnit {}

impl AsmUnit {
    pub fn new(items: Vec<Item>) -> Result<Self, AsmError> {
        let mut symbols = BTreeMap::new();
        for (idx, item) in items.iter().enumerate() {
            if let Item::Label(l) = item {
                if symbols.insert(l.name.clone(), idx).is_some() {
                    return Err(AsmError::DuplicateLabel {
                        line: 0,
                        label: l.name.clone(),
                    });
                }
            }
        }
        let functions = find_functions(&items);
        Ok(AsmUnit {
            items,
            symbols,
            functions,
        })
    }

    pub fn empty() -> Self {
        AsmUnit {
            items: Vec::new(),
            symbols: BTreeMap::new(),
            functions: Vec::new(),
        }
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Item> {
        self.items
    }

    pub fn symbols(&self) -> &BTreeMap<String, usize> {
        &self.symbols
    }

    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn instructions(&self) -> impl Iterator<Item = (usize, &Instruction)> {
        self.items
            .iter()
            .enumerate()
            .filter_map(|(i, it)| it.as_instruction().map(|ins| (i, ins)))
    }

    /// Section of every item, in item order. Units start in `.text`.
    pub fn sections(&self) -> Vec<Section> {
        item_sections(&self.items)
    }

    /// Names declared with `.extern`, `.global`/`.globl` but not defined here.
    pub fn externs(&self) -> BTreeSet<String> {
        self.items
            .iter()
            .filter_map(|it| match it {
                Item::Directive(d)
                    if matches!(d.name.as_str(), ".extern" | ".global" | ".globl") =>
                {
                    Some(d.arg_list())
                }
                _ => None,
            })
            .flatten()
            .filter(|n| !self.symbols.contains_key(n))
            .collect()
    }

    /// Symbols whose address is materialized as a value by original code
    /// (`la`, `%hi`/`%lo`, or a data word), as opposed to only being jumped
    /// or branched to.
    pub fn address_taken(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for item in &self.items {
            match item {
                Item::Instruction(i) if !i.is_synthesized() => {
                    for op in &i.operands {
                        match op {
                            Operand::Hi(s) | Operand::Lo(s) => {
                                out.insert(s.clone());
                            }
                            Operand::Symbol(s) if i.mnemonic == Mnemonic::La => {
                                out.insert(s.clone());
                            }
                            _ => {}
                        }
                    }
                }
                Item::Directive(d)
                    if matches!(
                        d.name.as_str(),
                        ".dword" | ".8byte" | ".quad" | ".word" | ".4byte"
                    ) =>
                {
                    out.extend(
                        d.arg_list()
                            .into_iter()
                            .filter(|a| super::instr::is_identifier(a)),
                    );
                }
                _ => {}
            }
        }
        out
    }

    /// Returns a unit with every instruction in canonical form.
    pub fn expanded(&self) -> AsmUnit {
        let items = self
            .items
            .iter()
            .flat_map(|it| match it {
                Item::Instruction(i) => expand_pseudo(i)
                    .into_iter()
                    .map(Item::Instruction)
                    .collect(),
                other => vec![other.clone()],
            })
            .collect();
        AsmUnit::new(items).expect("expansion introduces no labels")
    }
}

pub(crate) fn item_sections(items: &[Item]) -> Vec<Section> {
    let mut cur = Section::Text;
    items
        .iter()
        .map(|it| {
            if let Item::Directive(d) = it {
                if let Some(s) = d.section_switch() {
                    cur = s;
                }
            }
            cur
        })
        .collect()
}

/// A text label starts a function when it is marked `.type name, @function`,
/// is the target of an original direct call, or is `main`. A function runs
/// until the next function label or the end of its text run.
fn find_functions(items: &[Item]) -> Vec<Function> {
    let mut starts_by_name: BTreeSet<String> = BTreeSet::new();
    starts_by_name.insert("main".into());
    for item in items {
        match item {
            Item::Directive(d) if d.name == ".type" => {
                let args = d.arg_list();
                if args.len() == 2 && matches!(args[1].as_str(), "@function" | "%function") {
                    starts_by_name.insert(args[0].clone());
                }
            }
            Item::Instruction(i) if !i.is_synthesized() => {
                for c in expand_pseudo(i) {
                    if c.mnemonic == Mnemonic::Jal && c.reg(0) == Some(Register::RA) {
                        if let Some(Operand::Symbol(s)) = c.operands.get(1) {
                            starts_by_name.insert(s.clone());
                        }
                    }
                }
            }
            _ => {}
        }
    }
    let sections = item_sections(items);
    let mut functions: Vec<Function> = Vec::new();
    let close = |functions: &mut Vec<Function>, at: usize| {
        if let Some(f) = functions.last_mut() {
            if f.end == usize::MAX {
                f.end = at;
            }
        }
    };
    for (idx, item) in items.iter().enumerate() {
        let in_text = sections[idx] == Section::Text;
        match item {
            Item::Label(l) if in_text && starts_by_name.contains(&l.name) => {
                close(&mut functions, idx);
                functions.push(Function {
                    name: l.name.clone(),
                    start: idx,
                    end: usize::MAX,
                });
            }
            _ if !in_text => close(&mut functions, idx),
            _ => {}
        }
    }
    close(&mut functions, items.len());
    functions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_unit;

    #[test]
    fn duplicate_labels_rejected() {
        let items = vec![Item::Label(Label::new("a")), Item::Label(Label::new("a"))];
        assert!(matches!(
            AsmUnit::new(items),
            Err(AsmError::DuplicateLabel { .. })
        ));
    }

    #[test]
    fn functions_from_type_calls_and_main() {
        let u = parse_unit(
            "
            .text
            .type helper, @function
        helper:
            ret
        main:
            call leaf
        loop:
            j loop
        leaf:
            ret
            .data
        tbl:
            .dword helper
        ",
        )
        .unwrap();
        let names: Vec<_> = u.functions().iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, vec!["helper", "main", "leaf"]);
        let main = u.function("main").unwrap();
        assert_eq!(u.items()[main.end].as_label(), Some("leaf"));
        let leaf = u.function("leaf").unwrap();
        assert!(matches!(u.items()[leaf.end], Item::Directive(_)));
        assert!(u.address_taken().contains("helper"));
    }

    #[test]
    fn split_args_respects_strings() {
        assert_eq!(split_args(r#""a,b", 3"#), vec![r#""a,b""#, "3"]);
        assert_eq!(split_args(""), Vec::<String>::new());
        assert_eq!(split_args("1, 2,3"), vec!["1", "2", "3"]);
    }

    #[test]
    fn externs_are_undefined_declarations() {
        let u = parse_unit(".globl main\n.extern puts\nmain:\n call puts\n").unwrap();
        assert_eq!(u.externs().into_iter().collect::<Vec<_>>(), vec!["puts"]);
    }
}
