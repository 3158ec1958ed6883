//! HTTP-backed adapters: a chat-completions language model and a
//! stable-diffusion-webui compatible image server with ControlNet and
//! Segment Anything extensions.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::adapters::{AdapterError, AdapterResult, Adapters, ImageAdapter, LanguageAdapter, VariantSet};
use crate::asset::{decode_png, encode_png, ImageAsset};
use crate::brush::BrushMode;
use crate::config::RemoteConfig;
use crate::fragment::{Fragment, FragmentEdit, FragmentOrigin, FragmentType};
use crate::geometry::{Mask, Rect};
use crate::request::{GenerationRequest, OpKind};

/// System prompts, one per language operation.
pub mod prompts {
    pub const VERSION: &str = "v1";
    pub const DECOMPOSE: &str = include_str!("../../prompts/v1/decompose.txt");
    pub const VARY: &str = include_str!("../../prompts/v1/vary.txt");
    pub const SUGGEST: &str = include_str!("../../prompts/v1/suggest.txt");
    pub const COMPOSE: &str = include_str!("../../prompts/v1/compose.txt");
    pub const DESCRIBE: &str = include_str!("../../prompts/v1/describe.txt");
    pub const MERGE: &str = include_str!("../../prompts/v1/merge.txt");
    pub const EXTRACT: &str = include_str!("../../prompts/v1/extract.txt");
    pub const DERIVE: &str = include_str!("../../prompts/v1/derive.txt");
    pub const CRAFT: &str = include_str!("../../prompts/v1/craft.txt");
    pub const GENERATE_SET: &str = include_str!("../../prompts/v1/generate_set.txt");
}

fn client(timeout_ms: u64) -> AdapterResult<Client> {
    Client::builder()
        .timeout(Duration::from_millis(timeout_ms))
        .build()
        .map_err(|e| AdapterError::Network(e.to_string()))
}

/// Posts JSON and maps transport and status failures onto adapter errors.
fn post(client: &Client, url: &str, token: Option<&str>, body: &Value) -> AdapterResult<Value> {
    let mut req = client.post(url).json(body);
    if let Some(t) = token {
        req = req.bearer_auth(t);
    }
    let resp = req.send().map_err(|e| AdapterError::Network(e.to_string()))?;
    let status = resp.status();
    let text = resp.text().map_err(|e| AdapterError::Network(e.to_string()))?;
    let snippet: String = text.chars().take(200).collect();
    match status {
        s if s.is_success() => {}
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => return Err(AdapterError::Auth(format!("{status}: {snippet}"))),
        StatusCode::TOO_MANY_REQUESTS => return Err(AdapterError::RateLimit(format!("{status}: {snippet}"))),
        _ => return Err(AdapterError::Network(format!("{status}: {snippet}"))),
    }
    serde_json::from_str(&text).map_err(|e| AdapterError::MalformedResponse(format!("{e}: {snippet}")))
}

fn malformed(what: impl std::fmt::Display) -> AdapterError {
    AdapterError::MalformedResponse(what.to_string())
}

fn png_data_uri(asset: &ImageAsset) -> AdapterResult<String> {
    Ok(format!("data:image/png;base64,{}", B64.encode(asset.to_png().map_err(malformed)?)))
}

fn mask_png(mask: &Mask) -> AdapterResult<Vec<u8>> {
    let (w, h) = mask.dims();
    let mut rgba = Vec::with_capacity(w as usize * h as usize * 4);
    for y in 0..h {
        for x in 0..w {
            let v = if mask.get(x, y) { 255 } else { 0 };
            rgba.extend_from_slice(&[v, v, v, 255]);
        }
    }
    encode_png(w, h, &rgba).map_err(malformed)
}

/// Strips a Markdown code fence some models wrap their JSON in.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

#[derive(Deserialize)]
struct RawFragment {
    #[serde(alias = "ftype")]
    r#type: String,
    value: String,
}

fn parse_fragments(value: &Value, origin: FragmentOrigin) -> AdapterResult<Vec<Fragment>> {
    let list = value.get("fragments").unwrap_or(value);
    let raw: Vec<Value> = serde_json::from_value(list.clone()).map_err(|e| malformed(format!("fragments: {e}")))?;
    let mut out: Vec<Fragment> = Vec::new();
    for item in raw {
        let (t, v) = match item {
            Value::Array(pair) if pair.len() == 2 => (
                pair[0].as_str().unwrap_or_default().to_string(),
                pair[1].as_str().unwrap_or_default().to_string(),
            ),
            other => {
                let r: RawFragment = serde_json::from_value(other).map_err(|e| malformed(format!("fragment: {e}")))?;
                (r.r#type, r.value)
            }
        };
        let f = Fragment::with_origin(&t, &v, origin).map_err(malformed)?;
        if !out.iter().any(|o| o.same_as(&f)) {
            out.push(f);
        }
    }
    Ok(out)
}

fn parse_prompt(value: &Value) -> AdapterResult<String> {
    match value {
        Value::String(s) => Ok(s.trim().to_string()),
        v => v
            .get("prompt")
            .and_then(Value::as_str)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| malformed("missing `prompt`")),
    }
}

fn mode_name(mode: BrushMode) -> &'static str {
    match mode {
        BrushMode::Style => "style",
        BrushMode::Content => "content",
    }
}

/// Chat-completions language adapter.
#[derive(Debug, Clone)]
pub struct RemoteLanguage {
    client: Client,
    url: String,
    model: String,
    token: Option<String>,
}

impl RemoteLanguage {
    pub fn new(config: &RemoteConfig, token: Option<String>) -> AdapterResult<Self> {
        Ok(RemoteLanguage {
            client: client(config.timeout_ms)?,
            url: config.language_url.clone(),
            model: config.language_model.clone(),
            token,
        })
    }

    /// One system + user exchange; the reply is parsed as JSON, or kept as a
    /// string when it is not JSON.
    fn ask(&self, system: &str, user: Value) -> AdapterResult<Value> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let resp = post(&self.client, &self.url, self.token.as_deref(), &body)?;
        let content = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("missing choices[0].message.content"))?;
        let text = unfence(content);
        Ok(serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string())))
    }

    fn ask_text(&self, system: &str, payload: Value) -> AdapterResult<Value> {
        self.ask(system, Value::String(payload.to_string()))
    }

    fn ask_with_images(&self, system: &str, payload: Value, images: &[String]) -> AdapterResult<Value> {
        let mut parts = vec![json!({"type": "text", "text": payload.to_string()})];
        parts.extend(images.iter().map(|uri| json!({"type": "image_url", "image_url": {"url": uri}})));
        self.ask(system, Value::Array(parts))
    }
}

impl LanguageAdapter for RemoteLanguage {
    fn id(&self) -> &str {
        "remote-language"
    }

    fn decompose(&self, prompt: &str) -> AdapterResult<Vec<Fragment>> {
        if prompt.trim().is_empty() {
            return Err(AdapterError::InvalidRequest("empty prompt".into()));
        }
        let v = self.ask_text(prompts::DECOMPOSE, json!({ "prompt": prompt }))?;
        let mut out = parse_fragments(&v, FragmentOrigin::Decomposed)?;
        out.sort_by(|a, b| a.ftype.cmp(&b.ftype));
        Ok(out)
    }

    fn vary_values(&self, fragment: &Fragment, context: &str, k: usize) -> AdapterResult<Vec<Fragment>> {
        let v = self.ask_text(
            prompts::VARY,
            json!({"fragment": {"type": fragment.ftype.as_str(), "value": fragment.value}, "prompt": context, "k": k}),
        )?;
        let out: Vec<Fragment> = parse_fragments(&v, FragmentOrigin::Suggested)?
            .into_iter()
            .filter(|f| f.ftype == fragment.ftype && f.value != fragment.value)
            .take(k)
            .collect();
        if out.len() < k {
            return Err(AdapterError::InsufficientVariety { wanted: k, available: out.len() });
        }
        Ok(out)
    }

    fn suggest_types(&self, prompt: &str, existing: &[Fragment]) -> AdapterResult<Vec<Fragment>> {
        let existing_json: Vec<Value> =
            existing.iter().map(|f| json!({"type": f.ftype.as_str(), "value": f.value})).collect();
        let v = self.ask_text(prompts::SUGGEST, json!({"prompt": prompt, "existing": existing_json}))?;
        let mut out: Vec<Fragment> = Vec::new();
        for f in parse_fragments(&v, FragmentOrigin::Suggested)? {
            if !existing.iter().chain(out.iter()).any(|e| e.ftype == f.ftype) {
                out.push(f);
            }
        }
        out.sort_by(|a, b| a.ftype.cmp(&b.ftype));
        Ok(out)
    }

    fn compose(&self, base: &str, edits: &[FragmentEdit]) -> AdapterResult<String> {
        let v = self.ask_text(prompts::COMPOSE, json!({"prompt": base, "edits": edits}))?;
        parse_prompt(&v)
    }

    fn describe(&self, asset: &ImageAsset, mask: Option<&Mask>) -> AdapterResult<String> {
        let mut images = vec![png_data_uri(asset)?];
        if let Some(m) = mask {
            images.push(format!("data:image/png;base64,{}", B64.encode(mask_png(m)?)));
        }
        let v = self.ask_with_images(prompts::DESCRIBE, json!({"masked": mask.is_some()}), &images)?;
        parse_prompt(&v)
    }

    fn merge(&self, prompts_in: &[String]) -> AdapterResult<String> {
        let v = self.ask_text(prompts::MERGE, json!({ "prompts": prompts_in }))?;
        parse_prompt(&v)
    }

    fn extract(&self, asset: &ImageAsset, region: Option<&Rect>, mode: BrushMode) -> AdapterResult<String> {
        let payload = json!({"mode": mode_name(mode), "region": region});
        let v = self.ask_with_images(prompts::EXTRACT, payload, &[png_data_uri(asset)?])?;
        parse_prompt(&v)
    }

    fn derive_variant_prompts(&self, prompt: &str, grounding: Option<&str>, count: usize) -> AdapterResult<VariantSet> {
        let v = self.ask_text(prompts::DERIVE, json!({"prompt": prompt, "grounding": grounding, "count": count}))?;
        let dimension = v
            .get("dimension")
            .and_then(Value::as_str)
            .map(FragmentType::new)
            .transpose()
            .map_err(malformed)?
            .unwrap_or_else(FragmentType::content);
        let mut prompts_out: Vec<String> = Vec::new();
        for p in v.get("prompts").and_then(Value::as_array).ok_or_else(|| malformed("missing `prompts`"))? {
            let p = p.as_str().ok_or_else(|| malformed("prompt is not a string"))?.trim().to_string();
            if !p.is_empty() && !prompts_out.contains(&p) {
                prompts_out.push(p);
            }
        }
        if prompts_out.len() < count {
            return Err(AdapterError::InsufficientVariety { wanted: count, available: prompts_out.len() });
        }
        prompts_out.truncate(count);
        Ok(VariantSet { dimension, prompts: prompts_out })
    }

    fn craft_inpaint_prompt(
        &self,
        source_prompt: &str,
        segment_description: &str,
        brush_prompt: &str,
        mode: BrushMode,
    ) -> AdapterResult<String> {
        let v = self.ask_text(
            prompts::CRAFT,
            json!({
                "image_prompt": source_prompt,
                "region": segment_description,
                "brush": brush_prompt,
                "mode": mode_name(mode),
            }),
        )?;
        parse_prompt(&v)
    }

    fn generate_set(&self, prompt: &str, k: usize) -> AdapterResult<Vec<Fragment>> {
        let v = self.ask_text(prompts::GENERATE_SET, json!({"task": prompt, "k": k}))?;
        let all = parse_fragments(&v, FragmentOrigin::Suggested)?;
        let Some(first) = all.first().map(|f| f.ftype.clone()) else {
            return Err(AdapterError::InsufficientVariety { wanted: k, available: 0 });
        };
        let out: Vec<Fragment> = all.into_iter().filter(|f| f.ftype == first).take(k).collect();
        if out.len() < k {
            return Err(AdapterError::InsufficientVariety { wanted: k, available: out.len() });
        }
        Ok(out)
    }
}

/// ControlNet units the two control knobs are spread over.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlModels {
    pub depth: (String, String),
    pub canny: (String, String),
    pub reference: String,
}

impl Default for ControlModels {
    fn default() -> Self {
        ControlModels {
            depth: ("depth_midas".into(), "control_v11f1p_sd15_depth".into()),
            canny: ("canny".into(), "control_v11p_sd15_canny".into()),
            reference: "reference_only".into(),
        }
    }
}

/// stable-diffusion-webui client.
#[derive(Debug, Clone)]
pub struct RemoteImage {
    client: Client,
    url: String,
    segment_url: String,
    width: u32,
    height: u32,
    controls: ControlModels,
}

/// `(prompt:w)` weighting for emphasis above 1.
pub fn weighted_prompt(prompt: &str, weight: f64) -> String {
    if weight > 1.0 {
        format!("({}:{})", prompt.trim(), (weight * 100.0).round() / 100.0)
    } else {
        prompt.trim().to_string()
    }
}

impl RemoteImage {
    pub fn new(config: &RemoteConfig, default_size: u32) -> AdapterResult<Self> {
        Ok(RemoteImage {
            client: client(config.timeout_ms)?,
            url: config.image_url.trim_end_matches('/').to_string(),
            segment_url: config.segment_url.trim_end_matches('/').to_string(),
            width: default_size,
            height: default_size,
            controls: ControlModels::default(),
        })
    }

    /// The request body for `/sdapi/v1/{txt2img,img2img}`.
    pub fn body(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<Value> {
        let c = &request.controls;
        let (width, height) = references.first().map(ImageAsset::dims).unwrap_or((self.width, self.height));
        let mut body = json!({
            "prompt": weighted_prompt(&request.prompt, c.emphasis_weight),
            "seed": request.seed as i64 & i64::from(u32::MAX),
            "width": width,
            "height": height,
            "cfg_scale": c.guidance,
            "steps": 30,
        });
        if let Some(reference) = references.first() {
            let image = B64.encode(reference.to_png().map_err(malformed)?);
            let unit = |module: &str, model: Option<&str>, weight: f64| {
                json!({"enabled": true, "module": module, "model": model.unwrap_or("None"), "weight": weight, "image": image})
            };
            let units = vec![
                unit(&self.controls.depth.0, Some(&self.controls.depth.1), c.content_weight),
                unit(&self.controls.canny.0, Some(&self.controls.canny.1), c.content_weight),
                unit(&self.controls.reference, None, c.style_weight),
            ];
            body["init_images"] = json!([image]);
            body["denoising_strength"] = json!(c.denoise_strength);
            body["alwayson_scripts"] = json!({"controlnet": {"args": units}});
        }
        if let Some(mask) = &request.mask {
            body["mask"] = json!(B64.encode(mask_png(mask)?));
            body["inpainting_fill"] = json!(1);
            body["inpaint_full_res"] = json!(false);
            body["mask_blur"] = json!(0);
        }
        Ok(body)
    }

    fn run(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<ImageAsset> {
        let endpoint = if references.is_empty() { "txt2img" } else { "img2img" };
        let body = self.body(request, references)?;
        let resp = post(&self.client, &format!("{}/sdapi/v1/{endpoint}", self.url), None, &body)?;
        let first = resp
            .pointer("/images/0")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("missing images[0]"))?;
        let png = B64.decode(first.trim()).map_err(|e| malformed(format!("image base64: {e}")))?;
        let (w, h, raster) = decode_png(&png).map_err(malformed)?;
        let (tw, th) = references.first().map(ImageAsset::dims).unwrap_or((self.width, self.height));
        let raster = if (w, h) == (tw, th) {
            raster
        } else {
            let img = image::RgbaImage::from_raw(w, h, raster).ok_or_else(|| malformed("raster size"))?;
            image::imageops::resize(&img, tw, th, image::imageops::FilterType::Triangle).into_raw()
        };
        let raster = match (&request.mask, references.first()) {
            // keep pixels outside the mask exactly as they were
            (Some(mask), Some(base)) => {
                let mut out = base.raster.as_ref().clone();
                for (x, y) in mask.iter_set() {
                    let i = (y as usize * tw as usize + x as usize) * 4;
                    out[i..i + 4].copy_from_slice(&raster[i..i + 4]);
                }
                out
            }
            _ => raster,
        };
        ImageAsset::new(tw, th, raster, None).map_err(malformed)
    }
}

impl ImageAdapter for RemoteImage {
    fn id(&self) -> &str {
        "remote-image"
    }

    fn generate(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<ImageAsset> {
        match request.controls.op_kind {
            OpKind::Txt2img => self.run(request, &[]),
            OpKind::Img2img if !references.is_empty() => self.run(request, references),
            other => Err(AdapterError::InvalidRequest(format!("{other:?} is not a generate operation"))),
        }
    }

    fn inpaint(&self, request: &GenerationRequest, references: &[ImageAsset]) -> AdapterResult<ImageAsset> {
        let (Some(mask), Some(base)) = (&request.mask, references.first()) else {
            return Err(AdapterError::InvalidRequest("inpaint needs a mask and a reference".into()));
        };
        if mask.dims() != base.dims() {
            return Err(AdapterError::MaskMismatch);
        }
        self.run(request, references)
    }

    fn segment(&self, asset: &ImageAsset, points: &[(f64, f64)]) -> AdapterResult<Mask> {
        let body = json!({
            "input_image": B64.encode(asset.to_png().map_err(malformed)?),
            "sam_positive_points": points.iter().map(|(x, y)| [x, y]).collect::<Vec<_>>(),
            "sam_negative_points": [],
            "dino_enabled": false,
        });
        let resp = post(&self.client, &format!("{}/sam/sam-predict", self.segment_url), None, &body)?;
        let first = resp
            .pointer("/masks/0")
            .and_then(Value::as_str)
            .ok_or(AdapterError::SegmentationEmpty)?;
        let png = B64.decode(first.trim()).map_err(|e| malformed(format!("mask base64: {e}")))?;
        let (w, h, rgba) = decode_png(&png).map_err(malformed)?;
        if (w, h) != asset.dims() {
            return Err(AdapterError::MaskMismatch);
        }
        let mut mask = Mask::new(w, h);
        for (i, px) in rgba.chunks_exact(4).enumerate() {
            if px[0] > 127 && px[3] > 0 {
                mask.set(i as u32 % w, i as u32 / w, true);
            }
        }
        if mask.is_empty() {
            return Err(AdapterError::SegmentationEmpty);
        }
        Ok(mask)
    }
}

impl Adapters {
    /// Remote adapters; the language token is read from the environment
    /// variable named in the config.
    pub fn remote(config: &RemoteConfig, default_size: u32) -> AdapterResult<Self> {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        Ok(Adapters {
            language: std::sync::Arc::new(RemoteLanguage::new(config, token)?),
            image: std::sync::Arc::new(RemoteImage::new(config, default_size)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serves one canned response per connection and hands back each request body.
    fn fake_server(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<Value>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let _ = tx.send(serde_json::from_slice(&buf).unwrap_or(Value::Null));
                let mut stream = reader.into_inner();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (url, rx)
    }

    fn config(url: &str) -> RemoteConfig {
        RemoteConfig {
            language_url: format!("{url}/v1/chat/completions"),
            image_url: url.to_string(),
            segment_url: url.to_string(),
            timeout_ms: 5_000,
            ..RemoteConfig::default()
        }
    }

    fn chat(content: &str) -> String {
        json!({"id": "x", "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}], "usage": {}})
            .to_string()
    }

    #[test]
    fn decompose_parses_fenced_json() {
        let reply = chat("```json\n{\"fragments\": [{\"type\": \"style\", \"value\": \"Illustration\"}, {\"type\": \"content\", \"value\": \"castle\"}]}\n```");
        let (url, rx) = fake_server(vec![(200, reply)]);
        let lang = RemoteLanguage::new(&config(&url), Some("t0k".into())).unwrap();
        let got = lang.decompose("an illustration of a castle").unwrap();
        assert_eq!(got, vec![Fragment::new("content", "castle").unwrap(), Fragment::new("style", "illustration").unwrap()]);
        let sent = rx.recv().unwrap();
        assert_eq!(sent["messages"][0]["content"], prompts::DECOMPOSE);
        assert_eq!(sent["model"], "gpt-4o");
    }

    #[test]
    fn status_codes_map_to_errors() {
        let (url, _rx) = fake_server(vec![
            (401, "{}".into()),
            (429, "{}".into()),
            (500, "{}".into()),
            (200, "not json".into()),
            (200, chat("{\"nope\": 1}")),
        ]);
        let lang = RemoteLanguage::new(&config(&url), None).unwrap();
        assert!(matches!(lang.merge(&["a".into()]), Err(AdapterError::Auth(_))));
        assert!(matches!(lang.merge(&["a".into()]), Err(AdapterError::RateLimit(_))));
        assert!(matches!(lang.merge(&["a".into()]), Err(AdapterError::Network(_))));
        assert!(matches!(lang.merge(&["a".into()]), Err(AdapterError::MalformedResponse(_))));
        assert!(matches!(lang.merge(&["a".into()]), Err(AdapterError::MalformedResponse(_))));
    }

    #[test]
    fn unreachable_endpoint_is_a_network_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let image = RemoteImage::new(&config(&url), 64).unwrap();
        let err = image.generate(&GenerationRequest::txt2img("castle", 1), &[]).unwrap_err();
        assert!(matches!(err, AdapterError::Network(_)), "{err:?}");
    }

    #[test]
    fn txt2img_returns_requested_dims() {
        let png = encode_png(16, 16, &[200; 16 * 16 * 4]).unwrap();
        let (url, rx) = fake_server(vec![(200, json!({"images": [B64.encode(png)], "info": "{}"}).to_string())]);
        let image = RemoteImage::new(&config(&url), 32).unwrap();
        let asset = image.generate(&GenerationRequest::txt2img("castle", 5), &[]).unwrap();
        assert_eq!(asset.dims(), (32, 32));
        let sent = rx.recv().unwrap();
        assert_eq!((sent["width"].as_u64(), sent["seed"].as_u64()), (Some(32), Some(5)));
    }

    #[test]
    fn inpaint_keeps_pixels_outside_the_mask() {
        let base = ImageAsset::new(4, 4, (0..64).collect(), None).unwrap();
        let mut mask = Mask::new(4, 4);
        mask.set(1, 1, true);
        let png = encode_png(4, 4, &[255; 64]).unwrap();
        let (url, rx) = fake_server(vec![(200, json!({"images": [B64.encode(png)]}).to_string())]);
        let image = RemoteImage::new(&config(&url), 64).unwrap();
        let request = GenerationRequest {
            prompt: "watercolor".into(),
            reference_assets: vec![base.id.clone()],
            mask: Some(mask),
            controls: crate::request::GenerationControls::weighted(OpKind::Inpaint, crate::request::STYLE_PRESERVING)
                .with_emphasis(1.25)
                .unwrap(),
            seed: 3,
        };
        let out = image.inpaint(&request, std::slice::from_ref(&base)).unwrap();
        assert_eq!(out.pixel(1, 1), [255; 4]);
        assert_eq!(out.pixel(0, 0), base.pixel(0, 0));
        assert_eq!(out.pixel(3, 3), base.pixel(3, 3));
        let sent = rx.recv().unwrap();
        assert_eq!(sent["prompt"], "(watercolor:1.25)");
        let units = sent["alwayson_scripts"]["controlnet"]["args"].as_array().unwrap();
        assert_eq!(units[2]["weight"], 0.8);
        assert_eq!(units[0]["weight"], 0.3);
        assert!(sent["mask"].is_string());
    }

    #[test]
    fn segmentation_mask_matches_asset_dims() {
        let asset = ImageAsset::new(4, 2, vec![0; 32], None).unwrap();
        let mut rgba = vec![0u8; 32];
        rgba[4..8].copy_from_slice(&[255, 255, 255, 255]);
        let png = encode_png(4, 2, &rgba).unwrap();
        let (url, _rx) = fake_server(vec![(200, json!({"masks": [B64.encode(png)], "msg": "ok"}).to_string())]);
        let image = RemoteImage::new(&config(&url), 64).unwrap();
        let mask = image.segment(&asset, &[(1.0, 0.0)]).unwrap();
        assert_eq!(mask.dims(), (4, 2));
        assert_eq!(mask.iter_set().collect::<Vec<_>>(), [(1, 0)]);
    }

    #[test]
    fn derive_rejects_short_sets() {
        let (url, _rx) = fake_server(vec![(200, chat("{\"dimension\": \"content\", \"prompts\": [\"owl\", \"owl\", \"heron\"]}"))]);
        let lang = RemoteLanguage::new(&config(&url), None).unwrap();
        assert!(matches!(
            lang.derive_variant_prompts("birds", None, 4),
            Err(AdapterError::InsufficientVariety { wanted: 4, available: 2 })
        ));
    }
}
