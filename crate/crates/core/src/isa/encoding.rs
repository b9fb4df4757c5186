use crate::error::IsaError;

/// Major opcode of MXDOTP (custom space, `1110111`).
pub const OPCODE: u32 = 0b111_0111;

/// Decoded MXDOTP fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct MxdotpInstruction {
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub rs3: u8,
    /// Scale-pair selector, 0..=3.
    pub sl: u8,
}

impl MxdotpInstruction {
    pub fn new(rd: u8, rs1: u8, rs2: u8, rs3: u8, sl: u8) -> Result<Self, IsaError> {
        let inst = MxdotpInstruction {
            rd,
            rs1,
            rs2,
            rs3,
            sl,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), IsaError> {
        for (field, value, bits) in [
            ("rd", self.rd, 5),
            ("rs1", self.rs1, 5),
            ("rs2", self.rs2, 5),
            ("rs3", self.rs3, 5),
            ("sl", self.sl, 2),
        ] {
            if u32::from(value) >> bits != 0 {
                return Err(IsaError::FieldOutOfRange {
                    field,
                    value: value.into(),
                    bits,
                });
            }
        }
        Ok(())
    }
}

pub fn encode_instruction(inst: &MxdotpInstruction) -> Result<u32, IsaError> {
    inst.validate()?;
    Ok(u32::from(inst.rs3) << 27
        | u32::from(inst.sl) << 25
        | u32::from(inst.rs2) << 20
        | u32::from(inst.rs1) << 15
        | u32::from(inst.rd) << 7
        | OPCODE)
}

/// Inverse of [`encode_instruction`]. Rejects foreign opcodes and a nonzero
/// `funct3` field.
pub fn decode_instruction(word: u32) -> Result<MxdotpInstruction, IsaError> {
    if word & 0x7F != OPCODE || (word >> 12) & 0x7 != 0 {
        return Err(IsaError::NotMxdotp(word));
    }
    let field = |shift: u32, bits: u32| ((word >> shift) & ((1 << bits) - 1)) as u8;
    Ok(MxdotpInstruction {
        rd: field(7, 5),
        rs1: field(15, 5),
        rs2: field(20, 5),
        rs3: field(27, 5),
        sl: field(25, 2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let w = encode_instruction(&MxdotpInstruction::new(10, 0, 1, 2, 0).unwrap()).unwrap();
        assert_eq!(w & 0x7F, 0b111_0111);
        assert_eq!(w, 2 << 27 | 1 << 20 | 10 << 7 | 0x77);
        assert_eq!(
            encode_instruction(&MxdotpInstruction::default()).unwrap(),
            0x77
        );
        let sl3 = MxdotpInstruction {
            sl: 3,
            ..Default::default()
        };
        assert_eq!(encode_instruction(&sl3).unwrap(), 1 << 26 | 1 << 25 | 0x77);
        assert_eq!(
            decode_instruction(0x77).unwrap(),
            MxdotpInstruction::default()
        );
        assert_eq!(
            decode_instruction(0b011_0011),
            Err(IsaError::NotMxdotp(0x33))
        );
        assert!(decode_instruction(0x77 | 1 << 12).is_err());
    }

    #[test]
    fn out_of_range_fields() {
        assert_eq!(
            MxdotpInstruction::new(32, 0, 0, 0, 0),
            Err(IsaError::FieldOutOfRange {
                field: "rd",
                value: 32,
                bits: 5
            })
        );
        assert!(MxdotpInstruction::new(0, 0, 0, 0, 4).is_err());
    }
}
