use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use super::StructureError;
use crate::indexing::IndexPoint;

/// An element of a staged universe.
///
/// For the numeric builtin universes the id is the number itself; for
/// explicit universes it indexes a [`Symbols`] table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Element(pub u32);

/// Interned element names of explicit universes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Symbols {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Symbols {
    pub fn intern(&mut self, name: &str) -> Element {
        if let Some(&id) = self.ids.get(name) {
            return Element(id);
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        Element(id)
    }

    pub fn get(&self, name: &str) -> Option<Element> {
        self.ids.get(name).map(|&id| Element(id))
    }

    pub fn name(&self, e: Element) -> Option<&str> {
        self.names.get(e.0 as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum BuiltinUniverse {
    /// Stage `i` is `{0, ..., i-1}`.
    Naturals,
    /// Stage `j` is `{0, 2, ..., 2j-2}`.
    Evens,
    /// Stage `i` holds the von Neumann ordinals `0, ..., i-1`, written as numbers.
    VonNeumann,
}

impl BuiltinUniverse {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "naturals" => Some(Self::Naturals),
            "evens" => Some(Self::Evens),
            "vonNeumann" | "von_neumann" | "vonneumann" => Some(Self::VonNeumann),
            _ => None,
        }
    }

    fn first_stage(self, e: Element) -> Option<IndexPoint> {
        match self {
            Self::Naturals | Self::VonNeumann => e.0.checked_add(1),
            Self::Evens if e.0.is_multiple_of(2) => Some(e.0 / 2 + 1),
            Self::Evens => None,
        }
    }

    fn nth(self, n: u32) -> Element {
        match self {
            Self::Naturals | Self::VonNeumann => Element(n),
            Self::Evens => Element(2 * n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UniverseKind {
    Builtin(BuiltinUniverse),
    Explicit(Arc<Symbols>),
}

/// A cumulative family of nonempty finite stages `1..=headroom`.
///
/// Every stage is a prefix of the headroom stage ordered by first appearance,
/// so stages are stored as lengths into a single element list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagedUniverse {
    kind: UniverseKind,
    order: Vec<Element>,
    sizes: Vec<usize>,
    first: HashMap<Element, IndexPoint>,
    headroom: IndexPoint,
    listed: usize,
}

impl StagedUniverse {
    pub fn builtin(kind: BuiltinUniverse, headroom: IndexPoint) -> Result<Self, StructureError> {
        if headroom < 1 {
            return Err(StructureError::Schema("headroom must be at least 1".into()));
        }
        let order: Vec<Element> = (0..headroom).map(|n| kind.nth(n)).collect();
        Ok(StagedUniverse {
            kind: UniverseKind::Builtin(kind),
            order,
            sizes: (1..=headroom as usize).collect(),
            first: HashMap::new(),
            headroom,
            listed: headroom as usize,
        })
    }

    /// Explicit stages; stages past the listed ones repeat the last one.
    pub fn explicit(
        stages: &[Vec<String>],
        headroom: IndexPoint,
        symbols: Arc<Symbols>,
    ) -> Result<Self, StructureError> {
        if stages.is_empty() {
            return Err(StructureError::Schema(
                "explicit universe needs at least one stage".into(),
            ));
        }
        if headroom < 1 {
            return Err(StructureError::Schema("headroom must be at least 1".into()));
        }
        let mut order: Vec<Element> = Vec::new();
        let mut first = HashMap::new();
        let mut stage_sizes = Vec::with_capacity(stages.len());
        for (k, stage) in stages.iter().enumerate() {
            let index = k as IndexPoint + 1;
            if stage.is_empty() {
                return Err(StructureError::Schema(format!("stage {index} is empty")));
            }
            let mut members = Vec::with_capacity(stage.len());
            for name in stage {
                let e = symbols.get(name).ok_or_else(|| {
                    StructureError::Schema(format!("element `{name}` missing from symbol table"))
                })?;
                members.push(e);
            }
            for e in &order {
                if !members.contains(e) {
                    return Err(StructureError::Schema(format!(
                        "stages must be cumulative: `{}` is in stage {} but not in stage {index}",
                        symbols.name(*e).unwrap_or("?"),
                        first[e]
                    )));
                }
            }
            for e in members {
                if let std::collections::hash_map::Entry::Vacant(v) = first.entry(e) {
                    v.insert(index);
                    order.push(e);
                }
            }
            stage_sizes.push(order.len());
        }
        let last = *stage_sizes.last().unwrap();
        let sizes = (1..=headroom as usize)
            .map(|i| stage_sizes.get(i - 1).copied().unwrap_or(last))
            .collect();
        // Elements first listed beyond the headroom are unreachable.
        let limit = stage_sizes[(headroom as usize).min(stage_sizes.len()) - 1];
        order.truncate(limit);
        first.retain(|_, i| *i <= headroom);
        Ok(StagedUniverse {
            kind: UniverseKind::Explicit(symbols),
            order,
            sizes,
            first,
            headroom,
            listed: stages.len(),
        })
    }

    pub fn kind(&self) -> &UniverseKind {
        &self.kind
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, UniverseKind::Builtin(_))
    }

    pub fn headroom(&self) -> IndexPoint {
        self.headroom
    }

    /// Number of explicitly listed stages (the headroom for builtins).
    pub fn listed_stages(&self) -> usize {
        self.listed
    }

    pub fn stage(&self, i: IndexPoint) -> Result<&[Element], StructureError> {
        if i == 0 {
            return Err(StructureError::Range("stage indices start at 1".into()));
        }
        if i > self.headroom {
            return Err(StructureError::HeadroomExceeded {
                requested: i,
                headroom: self.headroom,
            });
        }
        Ok(&self.order[..self.sizes[i as usize - 1]])
    }

    /// The headroom stage.
    pub fn top(&self) -> &[Element] {
        &self.order
    }

    /// Least stage containing `e`, if `e` appears up to the headroom.
    pub fn first_stage(&self, e: Element) -> Option<IndexPoint> {
        match &self.kind {
            UniverseKind::Builtin(b) => b.first_stage(e).filter(|&i| i <= self.headroom),
            UniverseKind::Explicit(_) => self.first.get(&e).copied(),
        }
    }

    pub fn contains(&self, i: IndexPoint, e: Element) -> bool {
        self.first_stage(e).is_some_and(|f| f <= i)
    }

    /// Least stage equal to the headroom stage, for eventually constant
    /// explicit universes. Builtin universes never saturate.
    pub fn saturation(&self) -> Option<IndexPoint> {
        match self.kind {
            UniverseKind::Builtin(_) => None,
            UniverseKind::Explicit(_) => {
                let top = *self.sizes.last().unwrap();
                self.sizes
                    .iter()
                    .position(|&s| s == top)
                    .map(|p| p as IndexPoint + 1)
            }
        }
    }

    pub fn label(&self, e: Element) -> String {
        match &self.kind {
            UniverseKind::Builtin(_) => e.0.to_string(),
            UniverseKind::Explicit(sym) => sym
                .name(e)
                .map_or_else(|| format!("#{}", e.0), str::to_string),
        }
    }

    /// The element named `label`, if it lies in the headroom stage.
    pub fn lookup(&self, label: &str) -> Option<Element> {
        let e = match &self.kind {
            UniverseKind::Builtin(_) => Element(label.trim().parse().ok()?),
            UniverseKind::Explicit(sym) => sym.get(label)?,
        };
        self.first_stage(e).map(|_| e)
    }

    pub fn lookup_or_range(&self, label: &str) -> Result<Element, StructureError> {
        self.lookup(label).ok_or_else(|| {
            StructureError::Range(format!(
                "`{label}` is not in the headroom stage {}",
                self.headroom
            ))
        })
    }
}
