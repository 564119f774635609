use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    ReadOnly,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Register {
    CurrentLimit,
    TorqueEnable,
    GoalPosition,
    PresentCurrent,
    PresentPosition,
    PresentTemperature,
}

impl Register {
    pub const ALL: [Register; 6] = [
        Register::CurrentLimit,
        Register::TorqueEnable,
        Register::GoalPosition,
        Register::PresentCurrent,
        Register::PresentPosition,
        Register::PresentTemperature,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterInfo {
    pub register: Register,
    pub address: u16,
    pub width: u8,
    pub access: Access,
}

impl RegisterInfo {
    pub fn end(&self) -> u16 {
        self.address + self.width as u16
    }
}

/// Control-table layout. The default follows the XL330 family; other
/// firmware can supply its own table from a TOML file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMap {
    by_address: BTreeMap<u16, RegisterInfo>,
}

#[derive(Deserialize)]
struct RawMap {
    register: Vec<RegisterInfo>,
}

impl Default for RegisterMap {
    fn default() -> Self {
        use Access::*;
        use Register::*;
        let rows = [
            (CurrentLimit, 38, 2, ReadWrite),
            (TorqueEnable, 64, 1, ReadWrite),
            (GoalPosition, 116, 4, ReadWrite),
            (PresentCurrent, 126, 2, ReadOnly),
            (PresentPosition, 132, 4, ReadOnly),
            (PresentTemperature, 146, 1, ReadOnly),
        ];
        let infos = rows.map(|(register, address, width, access)| RegisterInfo {
            register,
            address,
            width,
            access,
        });
        RegisterMap::new(infos.to_vec()).expect("built-in register map is valid")
    }
}

impl RegisterMap {
    pub fn new(infos: Vec<RegisterInfo>) -> Result<Self, BusError> {
        let mut by_address = BTreeMap::new();
        for info in infos {
            if ![1, 2, 4].contains(&info.width) {
                return Err(BusError::RegisterMap(format!(
                    "{:?} has width {}",
                    info.register, info.width
                )));
            }
            by_address.insert(info.address, info);
        }
        let map = RegisterMap { by_address };
        let mut prev: Option<&RegisterInfo> = None;
        for info in map.by_address.values() {
            if let Some(p) = prev {
                if p.end() > info.address {
                    return Err(BusError::RegisterMap(format!(
                        "{:?} overlaps {:?}",
                        p.register, info.register
                    )));
                }
            }
            prev = Some(info);
        }
        for r in Register::ALL {
            let n = map.by_address.values().filter(|i| i.register == r).count();
            if n != 1 {
                return Err(BusError::RegisterMap(format!("{r:?} defined {n} times")));
            }
        }
        Ok(map)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, BusError> {
        let raw: RawMap = toml::from_str(text).map_err(|e| BusError::RegisterMap(e.to_string()))?;
        RegisterMap::new(raw.register)
    }

    pub fn info(&self, r: Register) -> RegisterInfo {
        *self
            .by_address
            .values()
            .find(|i| i.register == r)
            .expect("every register is present")
    }

    pub fn at(&self, address: u16) -> Option<&RegisterInfo> {
        self.by_address.get(&address)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RegisterInfo> {
        self.by_address.values()
    }

    /// Registers fully inside `[address, address + len)`. Fails if the
    /// range starts or ends inside a register or covers no register.
    pub fn span(&self, address: u16, len: u16) -> Option<Vec<RegisterInfo>> {
        let end = address.checked_add(len)?;
        let inside: Vec<_> = self
            .by_address
            .values()
            .filter(|i| i.end() > address && i.address < end)
            .copied()
            .collect();
        let clean = inside.iter().all(|i| i.address >= address && i.end() <= end);
        (clean && !inside.is_empty()).then_some(inside)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let m = RegisterMap::default();
        assert_eq!(m.info(Register::GoalPosition).address, 116);
        assert_eq!(m.info(Register::PresentPosition).width, 4);
        assert_eq!(m.at(64).unwrap().register, Register::TorqueEnable);
        assert!(m.at(65).is_none());
    }

    #[test]
    fn span_rules() {
        let m = RegisterMap::default();
        let s = m.span(126, 10).unwrap();
        assert_eq!(s.len(), 2);
        assert!(m.span(127, 4).is_none());
        assert!(m.span(200, 4).is_none());
        // gaps between registers are allowed
        assert_eq!(m.span(126, 21).unwrap().len(), 3);
    }

    #[test]
    fn overlap_and_width_rejected() {
        let mut infos: Vec<_> = RegisterMap::default().iter().copied().collect();
        infos[0].width = 3;
        assert!(RegisterMap::new(infos).is_err());
        let mut infos: Vec<_> = RegisterMap::default().iter().copied().collect();
        infos[1].address = 39;
        assert!(RegisterMap::new(infos).is_err());
    }

    #[test]
    fn loads_from_toml() {
        let text = r#"
            [[register]]
            register = "CurrentLimit"
            address = 10
            width = 2
            access = "read_write"
            [[register]]
            register = "TorqueEnable"
            address = 12
            width = 1
            access = "read_write"
            [[register]]
            register = "GoalPosition"
            address = 16
            width = 4
            access = "read_write"
            [[register]]
            register = "PresentCurrent"
            address = 20
            width = 2
            access = "read_only"
            [[register]]
            register = "PresentPosition"
            address = 24
            width = 4
            access = "read_only"
            [[register]]
            register = "PresentTemperature"
            address = 28
            width = 1
            access = "read_only"
        "#;
        let m = RegisterMap::from_toml_str(text).unwrap();
        assert_eq!(m.info(Register::PresentPosition).address, 24);
        assert!(RegisterMap::from_toml_str("register = []").is_err());
    }
}
