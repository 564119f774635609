//! CRC-16 with polynomial 0x8005, zero initial value, no reflection.

const POLY: u16 = 0x8005;

const TABLE: [u16; 256] = build_table();

const fn build_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ POLY
            } else {
                crc << 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// Continues a running CRC over `bytes`.
pub fn crc16_update(crc: u16, bytes: &[u8]) -> u16 {
    bytes.iter().fold(crc, |crc, &b| {
        let idx = ((crc >> 8) as u8 ^ b) as usize;
        (crc << 8) ^ TABLE[idx]
    })
}

pub fn crc16(bytes: &[u8]) -> u16 {
    crc16_update(0, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Shift-register reference: feeds the message bit by bit, MSB first,
    /// followed by 16 zero bits, and takes the remainder.
    fn crc_bitwise(bytes: &[u8]) -> u16 {
        let mut reg: u32 = 0;
        let bits = bytes
            .iter()
            .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
            .chain(std::iter::repeat_n(0u8, 16));
        for bit in bits {
            reg = (reg << 1) | bit as u32;
            if reg & 0x1_0000 != 0 {
                reg ^= 0x1_8005;
            }
        }
        reg as u16
    }

    #[test]
    fn check_value() {
        // CRC-16/UMTS (a.k.a. BUYPASS) check value
        assert_eq!(crc16(b"123456789"), 0xFEE8);
        assert_eq!(crc_bitwise(b"123456789"), 0xFEE8);
    }

    #[test]
    fn ping_frame_crc() {
        let body = [0xFF, 0xFF, 0xFD, 0x00, 0x01, 0x03, 0x00, 0x01];
        assert_eq!(crc_bitwise(&body), 0x4E19);
        assert_eq!(crc16(&body), 0x4E19);
    }

    #[test]
    fn incremental_matches_oneshot() {
        let data: Vec<u8> = (0..=255).collect();
        let (a, b) = data.split_at(77);
        assert_eq!(crc16_update(crc16(a), b), crc16(&data));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn table_agrees_with_bitwise(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            prop_assert_eq!(crc16(&bytes), crc_bitwise(&bytes));
        }
    }
}
