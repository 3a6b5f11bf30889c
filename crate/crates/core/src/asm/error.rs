use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("line {line}: unknown mnemonic `{mnemonic}`")]
    UnknownMnemonic { line: usize, mnemonic: String },

    #[error("line {line}: {msg}")]
    Operands { line: usize, msg: String },

    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { line: usize, label: String },

    #[error("unresolved symbol `{0}`")]
    UnresolvedSymbol(String),

    #[error("bad directive `{directive}`: {msg}")]
    Directive { directive: String, msg: String },
}
