//! Content-addressed raster assets and the provenance that produced them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fragment::{normalize_text, Fragment};
use crate::geometry::Rect;
use crate::request::GenerationControls;

/// Hex SHA-256 over the raster bytes followed by the canonical scene JSON.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssetId(String);

impl AssetId {
    pub fn compute(raster: &[u8], scene: Option<&SceneSpec>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(raster);
        hasher.update(canonical_scene_bytes(scene));
        let digest = hasher.finalize();
        AssetId(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.len() == 64 && text.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
            Ok(AssetId(text.to_string()))
        } else {
            Err(Error::UnknownAsset(text.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn canonical_scene_bytes(scene: Option<&SceneSpec>) -> Vec<u8> {
    let value = serde_json::to_value(scene).expect("scene serializes");
    serde_json::to_vec(&value).expect("json value serializes")
}

/// One object of a mock scene: a labelled normalized region with tag sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    pub region: Rect,
    #[serde(default)]
    pub style_tags: Vec<String>,
    #[serde(default)]
    pub tone_tags: Vec<String>,
    #[serde(default)]
    pub color_tags: Vec<String>,
}

impl SceneObject {
    pub fn new(label: &str, region: Rect) -> Self {
        SceneObject {
            label: normalize_text(label),
            region,
            style_tags: Vec::new(),
            tone_tags: Vec::new(),
            color_tags: Vec::new(),
        }
    }

    pub fn tags_mut(&mut self, ftype: &str) -> Option<&mut Vec<String>> {
        match ftype {
            "style" => Some(&mut self.style_tags),
            "tone" => Some(&mut self.tone_tags),
            "color" => Some(&mut self.color_tags),
            _ => None,
        }
    }

    pub fn tags(&self, ftype: &str) -> &[String] {
        match ftype {
            "style" => &self.style_tags,
            "tone" => &self.tone_tags,
            "color" => &self.color_tags,
            _ => &[],
        }
    }

    /// The object's label and tags as fragments.
    pub fn fragments(&self) -> Vec<Fragment> {
        let mut out = Vec::new();
        if let Ok(f) = Fragment::new("content", &self.label) {
            out.push(f);
        }
        for t in ["style", "tone", "color"] {
            out.extend(self.tags(t).iter().filter_map(|v| Fragment::new(t, v).ok()));
        }
        out
    }
}

/// Deterministic stand-in for image content, carried by mock assets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, obj) in self.objects.iter().enumerate() {
            if obj.label.trim().is_empty() {
                return Err(Error::MalformedPayload(format!("scene object {i} has an empty label")));
            }
            if !obj.region.is_normalized() {
                return Err(Error::MalformedPayload(format!("scene object {i} region leaves the unit square")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt: String,
    #[serde(default)]
    pub fragments: Vec<Fragment>,
    #[serde(default)]
    pub parents: Vec<AssetId>,
    pub seed: u64,
    pub controls: GenerationControls,
    pub adapter_id: String,
    /// Milliseconds on the session clock.
    pub created_at: u64,
}

/// Shared, immutable RGBA bytes.
pub type Raster = Arc<Vec<u8>>;

/// RGBA raster plus optional mock scene and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAsset {
    pub id: AssetId,
    pub width: u32,
    pub height: u32,
    #[serde(with = "raster_b64")]
    pub raster: Raster,
    #[serde(default)]
    pub scene: Option<SceneSpec>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

/// Everything about an asset except its pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub id: AssetId,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub scene: Option<SceneSpec>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

impl ImageAsset {
    pub fn new(width: u32, height: u32, raster: Vec<u8>, scene: Option<SceneSpec>) -> Result<Self> {
        if raster.len() != width as usize * height as usize * 4 {
            return Err(Error::MalformedPayload(format!(
                "raster holds {} bytes, expected {width}x{height}x4",
                raster.len()
            )));
        }
        if let Some(s) = &scene {
            s.validate()?;
        }
        let id = AssetId::compute(&raster, scene.as_ref());
        Ok(ImageAsset { id, width, height, raster: Arc::new(raster), scene, provenance: None })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn meta(&self) -> AssetMeta {
        AssetMeta {
            id: self.id.clone(),
            width: self.width,
            height: self.height,
            scene: self.scene.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Reassembles an asset, checking that the bytes still hash to its id.
    pub fn from_meta(meta: AssetMeta, raster: Raster) -> Result<Self> {
        let asset = ImageAsset {
            id: meta.id,
            width: meta.width,
            height: meta.height,
            raster,
            scene: meta.scene,
            provenance: meta.provenance,
        };
        asset.verify()?;
        Ok(asset)
    }

    pub fn verify(&self) -> Result<()> {
        if self.raster.len() != self.width as usize * self.height as usize * 4 {
            return Err(Error::CorruptPayload(format!("asset {} raster size mismatch", self.id)));
        }
        if AssetId::compute(&self.raster, self.scene.as_ref()) != self.id {
            return Err(Error::CorruptPayload(format!("asset {} does not match its content hash", self.id)));
        }
        Ok(())
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [self.raster[i], self.raster[i + 1], self.raster[i + 2], self.raster[i + 3]]
    }

    /// Lossless PNG encoding of the raster.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_png(self.width, self.height, &self.raster)
    }
}

pub fn encode_png(width: u32, height: u32, rgba: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::ImageEncoder::write_image(
        image::codecs::png::PngEncoder::new(&mut out),
        rgba,
        width,
        height,
        image::ExtendedColorType::Rgba8,
    )
    .map_err(|e| Error::CorruptPayload(format!("png encode: {e}")))?;
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>)> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::CorruptPayload(format!("png decode: {e}")))?
        .to_rgba8();
    Ok((img.width(), img.height(), img.into_raw()))
}

mod raster_b64 {
    use std::sync::Arc;

    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(raster: &Arc<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(raster.as_slice()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Arc<Vec<u8>>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map(Arc::new).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_depends_on_raster_and_scene() {
        let scene = SceneSpec { objects: vec![SceneObject::new("heron", Rect::new(0.0, 0.0, 1.0, 1.0).unwrap())] };
        let a = ImageAsset::new(1, 1, vec![1, 2, 3, 4], None).unwrap();
        let b = ImageAsset::new(1, 1, vec![1, 2, 3, 4], Some(scene)).unwrap();
        let c = ImageAsset::new(1, 1, vec![1, 2, 3, 5], None).unwrap();
        assert_ne!(a.id, b.id);
        assert_ne!(a.id, c.id);
        assert_eq!(a.id, ImageAsset::new(1, 1, vec![1, 2, 3, 4], None).unwrap().id);
    }

    #[test]
    fn rejects_wrong_raster_length() {
        assert!(ImageAsset::new(2, 2, vec![0; 15], None).is_err());
    }

    #[test]
    fn tampered_raster_fails_verification() {
        let a = ImageAsset::new(1, 1, vec![9, 9, 9, 255], None).unwrap();
        let err = ImageAsset::from_meta(a.meta(), Arc::new(vec![0, 0, 0, 255])).unwrap_err();
        assert_eq!(err.code(), "corrupt-payload");
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let raster: Vec<u8> = (0..3 * 2 * 4).map(|i| (i * 37 % 256) as u8).collect();
        let png = encode_png(3, 2, &raster).unwrap();
        assert_eq!(decode_png(&png).unwrap(), (3, 2, raster));
    }
}
