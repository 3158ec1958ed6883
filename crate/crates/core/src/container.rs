//! Generative containers: a prompt header over a fixed 2x2 grid of
//! variations, grounded by at most one example.

use serde::{Deserialize, Serialize};

use crate::adapters::Fnv1a;
use crate::asset::AssetId;
use crate::document::{ElementId, ImageBody, Payload};
use crate::error::{Error, Result};
use crate::fragment::{Fragment, FragmentType};
use crate::geometry::Rect;
use crate::request::{GenerationControls, GenerationRequest, OpKind, CONTENT_PRESERVING, STYLE_PRESERVING};
use crate::scheduler::{DebounceClass, JobId};
use crate::workspace::{ElementInit, JobSpec, Work, Workspace};

pub const GRID_CELLS: usize = 4;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Grounding {
    #[default]
    None,
    Asset(AssetId),
    Fragment(Fragment),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[default]
    Images,
    Fragments,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Cell {
    #[default]
    Empty,
    Image(AssetId),
    Fragment(Fragment),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerState {
    #[serde(default)]
    pub prompt: String,
    #[serde(default)]
    pub grounding: Grounding,
    pub cells: Vec<Cell>,
    #[serde(default)]
    pub cell_kind: CellKind,
    /// Seed of the latest grid; cell `i` uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    /// Number of grids requested so far.
    #[serde(default)]
    pub rolls: u64,
}

impl ContainerState {
    pub fn new(prompt: &str) -> Self {
        ContainerState {
            prompt: prompt.trim().to_string(),
            grounding: Grounding::None,
            cells: vec![Cell::Empty; GRID_CELLS],
            cell_kind: CellKind::Images,
            seed: 0,
            rolls: 0,
        }
    }

    pub fn asset_refs(&self) -> Vec<&AssetId> {
        let grounding = match &self.grounding {
            Grounding::Asset(a) => Some(a),
            _ => None,
        };
        grounding
            .into_iter()
            .chain(self.cells.iter().filter_map(|c| match c {
                Cell::Image(a) => Some(a),
                _ => None,
            }))
            .collect()
    }

    pub fn check(&self) -> Result<()> {
        if self.cells.len() != GRID_CELLS {
            return Err(Error::CorruptPayload(format!("container has {} cells", self.cells.len())));
        }
        let fits = |c: &Cell| {
            matches!(
                (c, self.cell_kind),
                (Cell::Empty, _) | (Cell::Image(_), CellKind::Images) | (Cell::Fragment(_), CellKind::Fragments)
            )
        };
        if !self.cells.iter().all(fits) {
            return Err(Error::CorruptPayload("container cells disagree with cell_kind".into()));
        }
        Ok(())
    }

    pub fn is_filled(&self) -> bool {
        self.cells.iter().all(|c| *c != Cell::Empty)
    }
}

impl Workspace {
    /// Replaces the grounding and clears the grid.
    pub fn ground_container(&mut self, id: &ElementId, source: Grounding) -> Result<()> {
        self.container(id)?;
        match &source {
            Grounding::Asset(a) if !self.doc().has_asset(a) => {
                return Err(Error::UnresolvableSource(format!("unknown asset {a}")));
            }
            Grounding::Text(t) if t.trim().is_empty() => {
                return Err(Error::UnresolvableSource("empty grounding text".into()));
            }
            _ => {}
        }
        let kind = match source {
            Grounding::Fragment(_) => CellKind::Fragments,
            _ => CellKind::Images,
        };
        self.cancel_jobs(id);
        self.doc_mut().update_payload(id, |p| {
            if let Payload::Container(c) = p {
                c.grounding = source;
                c.cell_kind = kind;
                c.cells = vec![Cell::Empty; GRID_CELLS];
            }
            Ok(())
        })
    }

    /// Text the grid derives its variants from when grounded on an example.
    fn grounding_text(&self, grounding: &Grounding) -> Result<Option<String>> {
        Ok(match grounding {
            Grounding::None | Grounding::Fragment(_) => None,
            Grounding::Text(t) => Some(t.clone()),
            Grounding::Asset(a) => {
                let asset = self.doc().asset(a).map_err(|_| Error::UnresolvableSource(a.to_string()))?;
                match asset.provenance.as_ref().map(|p| p.prompt.clone()) {
                    Some(p) if !p.trim().is_empty() => Some(p),
                    _ => Some(self.adapters().language.describe(asset, None).map_err(Error::from_adapter)?),
                }
            }
        })
    }

    /// Requests a new grid of four variations under a fresh seed.
    pub fn generate_variations(&mut self, id: &ElementId) -> Result<JobId> {
        let state = self.container(id)?.clone();
        if state.prompt.trim().is_empty() && state.grounding == Grounding::None {
            return Err(Error::EmptyContainer(id.clone()));
        }
        let rolls = state.rolls + 1;
        let seed = Fnv1a::default().u64(self.config().base_seed).str(id.as_str()).u64(rolls).finish();
        let spec = match &state.grounding {
            Grounding::Fragment(f) => JobSpec::new(
                Work::Variations { fragment: f.clone(), context: state.prompt.clone(), count: GRID_CELLS },
                "container",
            ),
            grounding => {
                let text = self.grounding_text(grounding)?;
                let set = self
                    .adapters()
                    .language
                    .derive_variant_prompts(&state.prompt, text.as_deref(), GRID_CELLS)
                    .map_err(Error::from_adapter)?;
                let weights = if set.dimension == FragmentType::style() { CONTENT_PRESERVING } else { STYLE_PRESERVING };
                let requests = set
                    .prompts
                    .iter()
                    .enumerate()
                    .map(|(i, prompt)| {
                        let (op, refs) = match grounding {
                            Grounding::Asset(a) => (OpKind::Img2img, vec![a.clone()]),
                            _ => (OpKind::Txt2img, Vec::new()),
                        };
                        GenerationRequest {
                            prompt: prompt.clone(),
                            reference_assets: refs,
                            mask: None,
                            controls: GenerationControls::weighted(op, weights),
                            seed: seed.wrapping_add(i as u64),
                        }
                    })
                    .collect();
                JobSpec::new(Work::Requests(requests), "container")
            }
        };
        self.doc_mut().update_payload(id, |p| {
            if let Payload::Container(c) = p {
                c.seed = seed;
                c.rolls = rolls;
            }
            Ok(())
        })?;
        self.submit(id, DebounceClass::Immediate, spec)
    }

    /// Places a copy of a filled cell on the canvas.
    pub fn adopt_cell(&mut self, id: &ElementId, index: usize, rect: Rect) -> Result<ElementId> {
        let state = self.container(id)?;
        let cell = state.cells.get(index).cloned().ok_or(Error::BadIndex(index))?;
        match cell {
            Cell::Empty => Err(Error::EmptyCell(index)),
            Cell::Fragment(f) => self.create_element(rect, ElementInit::FragmentCard(f)),
            Cell::Image(asset) => {
                let prov = self.doc().asset(&asset)?.provenance.clone();
                let (prompt, seed) = prov.map(|p| (p.prompt, p.seed)).unwrap_or_default();
                let new = self.create_element(rect, ElementInit::Image { prompt: String::new(), seed: Some(seed), asset: Some(asset) })?;
                self.doc_mut().update_payload(&new, |p| {
                    if let Payload::Image(ImageBody { prompt: ip, .. }) = p {
                        *ip = prompt;
                    }
                    Ok(())
                })?;
                Ok(new)
            }
        }
    }
}
