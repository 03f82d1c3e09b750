//! Instruction set, program container and the `.gp5` binary encoding.
//!
//! Operand conventions (`a`, `b`, `c` are u32, `len` is u16):
//!
//! | op  | a               | b                         | c                  | len        |
//! |-----|-----------------|---------------------------|--------------------|------------|
//! | LDT | table id        | first entry               | end entry          | block slot |
//! | LDM | edge or var id  | source ([`MsgSource`])    | operand slot       | domain     |
//! | TIP | edge or var id  | block slot / operand count| flags (`TIP_*`)    | domain     |
//! | NRM | edge or var id  | 0 message, 1 belief       | 0                  | domain     |
//! | STM | edge or var id  | target ([`MsgTarget`])    | 0                  | domain     |
//! | HIO | 0 in, 1 out     | bytes                     | payload (`HIO_*`)  | 0          |

use serde_json::{json, Value};

use fgraph::Semiring;

use crate::AccelError;

pub const MAGIC: &[u8; 5] = b"GP5V1";
pub const HEADER_BYTES: usize = 32;
pub const RECORD_BYTES: usize = 16;

/// TIP resets the accumulator before adding its terms.
pub const TIP_FIRST: u32 = 1;
/// TIP multiplies operand messages pointwise (variable-side update).
pub const TIP_VARIABLE: u32 = 2;
/// TIP operand `a` is a variable id and the result is a belief.
pub const TIP_BELIEF: u32 = 4;

pub const HIO_INPUTS: u32 = 0;
pub const HIO_TABLES: u32 = 1;
pub const HIO_BELIEFS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Opcode {
    Ldt = 1,
    Ldm = 2,
    Tip = 3,
    Nrm = 4,
    Stm = 5,
    Hio = 6,
}

impl Opcode {
    pub const ALL: [Opcode; 6] = [Opcode::Ldt, Opcode::Ldm, Opcode::Tip, Opcode::Nrm, Opcode::Stm, Opcode::Hio];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Ldt => "LDT",
            Opcode::Ldm => "LDM",
            Opcode::Tip => "TIP",
            Opcode::Nrm => "NRM",
            Opcode::Stm => "STM",
            Opcode::Hio => "HIO",
        }
    }

    pub fn is_io(self) -> bool {
        matches!(self, Opcode::Ldt | Opcode::Ldm | Opcode::Stm | Opcode::Hio)
    }

    fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|op| *op as u8 == b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum MsgSource {
    ToFactor = 0,
    ToVariable = 1,
    Input = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum MsgTarget {
    ToFactor = 0,
    ToVariable = 1,
    Belief = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instruction {
    pub op: Opcode,
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub len: u16,
}

impl Instruction {
    pub fn new(op: Opcode, a: u32, b: u32, c: u32, len: u16) -> Self {
        Self { op, a, b, c, len }
    }

    pub fn encode(&self) -> [u8; RECORD_BYTES] {
        let mut r = [0u8; RECORD_BYTES];
        r[0] = self.op as u8;
        r[2..6].copy_from_slice(&self.a.to_le_bytes());
        r[6..10].copy_from_slice(&self.b.to_le_bytes());
        r[10..14].copy_from_slice(&self.c.to_le_bytes());
        r[14..16].copy_from_slice(&self.len.to_le_bytes());
        r
    }

    pub fn decode(r: &[u8]) -> Result<Self, AccelError> {
        let op = Opcode::from_byte(r[0]).ok_or_else(|| AccelError::Format(format!("unknown opcode {:#04x}", r[0])))?;
        let word = |i: usize| u32::from_le_bytes(r[i..i + 4].try_into().expect("4 bytes"));
        Ok(Self {
            op,
            a: word(2),
            b: word(6),
            c: word(10),
            len: u16::from_le_bytes([r[14], r[15]]),
        })
    }

    pub fn to_json(&self) -> Value {
        json!([self.op.mnemonic(), self.a, self.b, self.c, self.len])
    }
}

/// A compiled program. The prologue runs once, the body once per pass (the
/// host repeats it until the largest message change drops below `epsilon`,
/// at most `iterations` times, or exactly once when `repeats` is false),
/// then the epilogue reads out beliefs. The table cache is flushed at the
/// start of every pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub semiring: Semiring,
    pub repeats: bool,
    pub iterations: u32,
    pub epsilon: f64,
    pub prologue: Vec<Instruction>,
    pub body: Vec<Instruction>,
    pub epilogue: Vec<Instruction>,
}

fn semiring_code(s: Semiring) -> u8 {
    match s {
        Semiring::SumProduct => 0,
        Semiring::MinSum => 1,
        Semiring::MaxProduct => 2,
    }
}

impl Program {
    pub fn is_empty(&self) -> bool {
        self.prologue.is_empty() && self.body.is_empty() && self.epilogue.is_empty()
    }

    pub fn instruction_count(&self) -> usize {
        self.prologue.len() + self.body.len() + self.epilogue.len()
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.prologue.iter().chain(&self.body).chain(&self.epilogue)
    }

    /// Little-endian `.gp5` image: a 32-byte header followed by one 16-byte
    /// record per instruction.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + RECORD_BYTES * self.instruction_count());
        out.extend_from_slice(MAGIC);
        out.push(semiring_code(self.semiring));
        out.push(self.repeats as u8);
        out.push(0);
        for n in [self.prologue.len(), self.body.len(), self.epilogue.len()] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.iterations.to_le_bytes());
        out.extend_from_slice(&self.epsilon.to_bits().to_le_bytes());
        for i in self.instructions() {
            out.extend_from_slice(&i.encode());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, AccelError> {
        if bytes.len() < HEADER_BYTES || &bytes[..5] != MAGIC {
            return Err(AccelError::Format("missing GP5V1 header".into()));
        }
        let semiring = match bytes[5] {
            0 => Semiring::SumProduct,
            1 => Semiring::MinSum,
            2 => Semiring::MaxProduct,
            other => return Err(AccelError::Format(format!("unknown semiring code {other}"))),
        };
        let repeats = match bytes[6] {
            0 => false,
            1 => true,
            other => return Err(AccelError::Format(format!("bad repeat flag {other}"))),
        };
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (np, nb, ne) = (word(8), word(12), word(16));
        let iterations = word(20) as u32;
        let epsilon = f64::from_bits(u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes")));
        let body = &bytes[HEADER_BYTES..];
        let count = np + nb + ne;
        if body.len() != count * RECORD_BYTES {
            return Err(AccelError::Format(format!(
                "header announces {count} instructions but {} bytes follow",
                body.len()
            )));
        }
        let mut all = body
            .chunks_exact(RECORD_BYTES)
            .map(Instruction::decode)
            .collect::<Result<Vec<_>, _>>()?;
        let epilogue = all.split_off(np + nb);
        let body = all.split_off(np);
        Ok(Self { semiring, repeats, iterations, epsilon, prologue: all, body, epilogue })
    }

    /// JSON disassembly, one `[mnemonic, a, b, c, len]` array per instruction.
    pub fn disassemble(&self) -> Value {
        let list = |v: &[Instruction]| v.iter().map(Instruction::to_json).collect::<Vec<_>>();
        json!({
            "format": "GP5V1",
            "semiring": self.semiring.name(),
            "repeats": self.repeats,
            "iterations": self.iterations,
            "epsilon": self.epsilon,
            "prologue": list(&self.prologue),
            "body": list(&self.body),
            "epilogue": list(&self.epilogue),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let i = Instruction::new(Opcode::Tip, 7, u32::MAX, 3, 4096);
        let r = i.encode();
        assert_eq!(r.len(), 16);
        assert_eq!(r[1], 0);
        assert_eq!(Instruction::decode(&r).unwrap(), i);
    }

    #[test]
    fn program_round_trip_and_errors() {
        let p = Program {
            semiring: Semiring::MinSum,
            repeats: true,
            iterations: 12,
            epsilon: 1e-9,
            prologue: vec![Instruction::new(Opcode::Hio, 0, 64, HIO_INPUTS, 0)],
            body: vec![Instruction::new(Opcode::Ldm, 1, 2, 0, 2), Instruction::new(Opcode::Stm, 1, 0, 0, 2)],
            epilogue: vec![],
        };
        let bytes = p.encode();
        assert_eq!(bytes.len(), HEADER_BYTES + 3 * RECORD_BYTES);
        assert_eq!(Program::decode(&bytes).unwrap(), p);
        assert!(Program::decode(&bytes[..40]).is_err());
        let mut bad = bytes.clone();
        bad[HEADER_BYTES] = 0x7f;
        assert!(Program::decode(&bad).is_err());
        assert!(Program::decode(b"nope").is_err());
    }
}
