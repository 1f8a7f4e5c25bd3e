use serde::{Deserialize, Serialize};

/// The two formation spacecraft. The detector spacecraft (DSC) is the chief
/// of the relative state; the optics spacecraft (OSC) is the deputy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpacecraftId {
    Dsc,
    Osc,
}

impl SpacecraftId {
    pub fn other(self) -> Self {
        match self {
            SpacecraftId::Dsc => SpacecraftId::Osc,
            SpacecraftId::Osc => SpacecraftId::Dsc,
        }
    }

    pub fn index(self) -> usize {
        match self {
            SpacecraftId::Dsc => 0,
            SpacecraftId::Osc => 1,
        }
    }
}

impl std::fmt::Display for SpacecraftId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpacecraftId::Dsc => write!(f, "DSC"),
            SpacecraftId::Osc => write!(f, "OSC"),
        }
    }
}
