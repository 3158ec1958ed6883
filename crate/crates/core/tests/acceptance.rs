//! One line per acceptance criterion, with case counts and time limits.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use canvas_instruments::adapters::mock::{render_scene, MockLanguage};
use canvas_instruments::brush::resample_stroke;
use canvas_instruments::document::{load_document, save_document, asset_dir_for};
use canvas_instruments::lexicon::Lexicon;
use canvas_instruments::session::{replay, script::run_script};
use canvas_instruments::*;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunConfig, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Check = std::result::Result<String, String>;

struct Criterion {
    name: &'static str,
    limit_ms: u128,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { name: "fragment format", limit_ms: 1_000, run: fragment_format },
        Criterion { name: "idle rule", limit_ms: 5_000, run: idle_rule },
        Criterion { name: "container grid", limit_ms: 10_000, run: container_grid },
        Criterion { name: "segmentation oracle", limit_ms: 10_000, run: segmentation_oracle },
        Criterion { name: "inpaint locality", limit_ms: 20_000, run: inpaint_locality },
        Criterion { name: "fragment round-trip", limit_ms: 20_000, run: fragment_round_trip },
        Criterion { name: "staleness safety", limit_ms: 10_000, run: staleness_safety },
        Criterion { name: "determinism and replay", limit_ms: 10_000, run: determinism_and_replay },
        Criterion { name: "serialization", limit_ms: 10_000, run: serialization },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let ms = start.elapsed().as_millis();
        let (ok, detail) = match result {
            Ok(d) if ms < c.limit_ms => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:<24} {:>6} ms (limit {} ms)  {}", if ok { "PASS" } else { "FAIL" }, c.name, ms, c.limit_ms, detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn property<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> std::result::Result<(), TestCaseError>) -> Check {
    let config = RunConfig { cases, failure_persistence: None, max_shrink_iters: 64, ..RunConfig::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map(|()| format!("{cases} cases")).map_err(|e| e.to_string())
}

fn workspace(size: u32) -> (Workspace, VirtualClock) {
    let clock = VirtualClock::new();
    let config = Config { image_size: size, max_inflight: 16, ..Config::default() };
    (Workspace::with_mock(config, Arc::new(clock.clone())), clock)
}

fn settle(ws: &mut Workspace, clock: &VirtualClock) {
    ws.run_due_inline();
    while let Some(due) = ws.next_due() {
        clock.advance_to(due);
        ws.run_due_inline();
    }
}

fn rect(x: f64, y: f64, w: f64, h: f64) -> Rect {
    Rect::new(x, y, w, h).unwrap()
}

fn image_asset(ws: &Workspace, id: &ElementId) -> Option<AssetId> {
    match &ws.doc().get(id)?.payload {
        Payload::Image(b) => b.asset.clone(),
        _ => None,
    }
}

fn lexicon() -> &'static Lexicon {
    static LEX: std::sync::OnceLock<Lexicon> = std::sync::OnceLock::new();
    LEX.get_or_init(Lexicon::builtin)
}

fn values(ftype: &str) -> Vec<String> {
    lexicon().values(&FragmentType::new(ftype).unwrap()).to_vec()
}

fn pick(ftype: &'static str) -> impl Strategy<Value = Fragment> {
    let vals = values(ftype);
    (0..vals.len()).prop_map(move |i| Fragment::new(ftype, &vals[i]).unwrap())
}

/// Random scene objects with regions inside the unit square.
fn scene_strategy(max_objects: usize) -> impl Strategy<Value = SceneSpec> {
    let labels = values("content");
    let styles = values("style");
    let object = (0..labels.len(), 0.0..0.9f64, 0.0..0.9f64, 0.02..1.0f64, 0.02..1.0f64, proptest::option::of(0..styles.len()))
        .prop_map(move |(l, x, y, fw, fh, s)| {
            let w = (fw * (1.0 - x)).max(0.01);
            let h = (fh * (1.0 - y)).max(0.01);
            let mut obj = SceneObject::new(&labels[l], Rect::new(x, y, w, h).unwrap());
            if let Some(s) = s {
                obj.style_tags.push(styles[s].clone());
            }
            obj
        });
    proptest::collection::vec(object, 1..=max_objects).prop_map(|objects| SceneSpec { objects })
}

fn scene_asset(scene: &SceneSpec, size: u32, seed: u64) -> ImageAsset {
    ImageAsset::new(size, size, render_scene(scene, seed, size, size), Some(scene.clone())).unwrap()
}

// Brute-force pixel membership: a pixel belongs to a region when its center does.
fn covers(region: &Rect, px: u32, py: u32, size: u32) -> bool {
    let cx = (px as f64 + 0.5) / size as f64;
    let cy = (py as f64 + 0.5) / size as f64;
    cx >= region.x && cx < region.x + region.w && cy >= region.y && cy < region.y + region.h
}

/// Chosen object index: most stroke points, then smaller area, then lower index.
fn oracle_segment(scene: &SceneSpec, size: u32, points: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<(usize, u64, usize)> = None;
    for (i, obj) in scene.objects.iter().enumerate() {
        let mut area = 0u64;
        for py in 0..size {
            for px in 0..size {
                if covers(&obj.region, px, py, size) {
                    area += 1;
                }
            }
        }
        let hits = points
            .iter()
            .filter(|(x, y)| {
                let px = (x.floor().max(0.0) as u32).min(size - 1);
                let py = (y.floor().max(0.0) as u32).min(size - 1);
                covers(&obj.region, px, py, size)
            })
            .count();
        if hits == 0 {
            continue;
        }
        let replace = match best {
            None => true,
            Some((h, a, _)) => hits > h || (hits == h && area < a),
        };
        if replace {
            best = Some((hits, area, i));
        }
    }
    best.map(|(_, _, i)| i)
}

fn fragment_format() -> Check {
    let (ws, _) = workspace(32);
    let got: BTreeSet<(String, String)> = ws
        .decompose_prompt("an enchanting illustration of a castle")
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|f| (f.ftype.as_str().to_string(), f.value))
        .collect();
    let want: BTreeSet<(String, String)> = [("tone", "enchanting"), ("content", "castle"), ("style", "illustration")]
        .into_iter()
        .map(|(t, v)| (t.to_string(), v.to_string()))
        .collect();
    if got == want {
        Ok("1 case".into())
    } else {
        Err(format!("got {got:?}"))
    }
}

#[derive(Debug, Clone)]
enum Edit {
    MoveLens(u8, u8),
    ResizeLens(u8),
    LensPrompt(usize),
    MoveImage(u8),
}

fn idle_rule() -> Check {
    let edit = prop_oneof![
        (0..20u8, 0..20u8).prop_map(|(x, y)| Edit::MoveLens(x, y)),
        (0..20u8).prop_map(Edit::ResizeLens),
        (0..10usize).prop_map(Edit::LensPrompt),
        (0..10u8).prop_map(Edit::MoveImage),
    ];
    let burst = proptest::collection::vec((0..2000u64, edit), 1..12);
    let tones = values("tone");
    property(1000, burst, |burst| {
        let (mut ws, clock) = workspace(16);
        let scene = SceneSpec { objects: vec![SceneObject::new("castle", rect(0.25, 0.25, 0.5, 0.5))] };
        let asset = ws.import_asset(scene_asset(&scene, 16, 1)).unwrap();
        let img = ws
            .create_element(rect(0.0, 0.0, 100.0, 100.0), ElementInit::Image { prompt: "castle".into(), seed: Some(1), asset: Some(asset) })
            .unwrap();
        let lens = ws.create_element(rect(20.0, 20.0, 40.0, 40.0), ElementInit::Lens { prompt: "at night".into() }).unwrap();
        settle(&mut ws, &clock);
        let mut fired = 0;
        for (gap, edit) in burst {
            clock.advance(gap);
            fired += ws.fire_due().len();
            match edit {
                Edit::MoveLens(x, y) => {
                    let r = ws.doc().element(&lens).unwrap().rect;
                    let next = rect(10.0 + x as f64, 10.0 + y as f64, r.w, r.h);
                    let next = if next == r { next.translated(1.0, 0.0) } else { next };
                    prop_assert!(ws.update_geometry(&lens, next).unwrap());
                }
                Edit::ResizeLens(s) => {
                    let r = ws.doc().element(&lens).unwrap().rect;
                    let w = 30.0 + s as f64;
                    let w = if w == r.w { w + 1.0 } else { w };
                    prop_assert!(ws.update_geometry(&lens, rect(r.x, r.y, w, w)).unwrap());
                }
                Edit::LensPrompt(i) => {
                    ws.set_prompt(&lens, &tones[i]).unwrap();
                }
                Edit::MoveImage(dx) => {
                    let r = ws.doc().element(&img).unwrap().rect;
                    let x = dx as f64;
                    let x = if x == r.x { x + 0.5 } else { x };
                    prop_assert!(ws.update_geometry(&img, rect(x, 0.0, 100.0, 100.0)).unwrap());
                }
            }
        }
        prop_assert_eq!(fired, 0, "fired inside the burst");
        let last = ws.now();
        clock.advance(1999);
        prop_assert!(ws.fire_due().is_empty(), "fired before the idle window closed");
        clock.advance(1);
        let jobs = ws.fire_due();
        prop_assert_eq!(jobs.len(), 1);
        prop_assert_eq!(&jobs[0].target, &lens);
        prop_assert_eq!(ws.now(), last + 2000);
        let outcome = jobs[0].work.run(ws.adapters());
        let report = ws.apply(jobs[0].job, outcome);
        prop_assert!(matches!(report.status, ReportStatus::Applied { .. }), "{:?}", report.status);
        clock.advance(10_000);
        prop_assert!(ws.fire_due().is_empty());
        prop_assert!(ws.is_idle());
        Ok(())
    })
}

#[derive(Debug, Clone)]
enum Ground {
    None,
    Text(Vec<Fragment>),
    Asset(Vec<Fragment>),
    Fragment(Fragment),
}

fn prompt_fragments() -> impl Strategy<Value = Vec<Fragment>> {
    (
        proptest::option::of(pick("content")),
        proptest::option::of(pick("style")),
        proptest::option::of(pick("tone")),
        proptest::option::of(pick("color")),
    )
        .prop_map(|(a, b, c, d)| [a, b, c, d].into_iter().flatten().collect())
}

fn render(fragments: &[Fragment]) -> String {
    MockLanguage::new(Arc::new(lexicon().clone())).render(fragments)
}

fn container_grid() -> Check {
    let dimension = proptest::option::of(prop_oneof![
        Just("in different styles"),
        Just("different color moods"),
        Just("varied tones"),
        Just("different types of bird"),
        Just("several compositions"),
    ]);
    let ground = prop_oneof![
        Just(Ground::None),
        prompt_fragments().prop_map(Ground::Text),
        prompt_fragments().prop_map(Ground::Asset),
        pick("style").prop_map(Ground::Fragment),
    ];
    property(500, (prompt_fragments(), dimension, ground), |(frags, dim, ground)| {
        let (mut ws, clock) = workspace(16);
        let mut prompt = render(&frags);
        if let Some(d) = dim {
            prompt = format!("{prompt} {d}").trim().to_string();
        }
        if prompt.is_empty() {
            prompt = "something new".into();
        }
        let c = ws.create_element(rect(0.0, 0.0, 200.0, 200.0), ElementInit::Container { prompt: prompt.clone() }).unwrap();
        let grounding = match &ground {
            Ground::None => Grounding::None,
            Ground::Text(f) if !f.is_empty() => Grounding::Text(render(f)),
            Ground::Text(_) => Grounding::None,
            Ground::Asset(f) => {
                let p = if f.is_empty() { "castle".to_string() } else { render(f) };
                let img = ws
                    .create_element(rect(300.0, 0.0, 50.0, 50.0), ElementInit::Image { prompt: p, seed: Some(3), asset: None })
                    .unwrap();
                settle(&mut ws, &clock);
                Grounding::Asset(image_asset(&ws, &img).unwrap())
            }
            Ground::Fragment(f) => Grounding::Fragment(f.clone()),
        };
        let fragment_grid = matches!(grounding, Grounding::Fragment(_));
        ws.ground_container(&c, grounding).unwrap();
        ws.generate_variations(&c).map_err(|e| TestCaseError::fail(format!("{prompt}: {e}")))?;
        settle(&mut ws, &clock);
        let Payload::Container(state) = &ws.doc().element(&c).unwrap().payload else { unreachable!() };
        prop_assert_eq!(state.cells.len(), 4);
        if fragment_grid {
            let mut seen = BTreeSet::new();
            for cell in &state.cells {
                let Cell::Fragment(f) = cell else { return Err(TestCaseError::fail(format!("{cell:?}"))) };
                seen.insert(f.value.clone());
            }
            prop_assert_eq!(seen.len(), 4);
        } else {
            let mut prompts = BTreeSet::new();
            let mut ids = BTreeSet::new();
            for cell in &state.cells {
                let Cell::Image(id) = cell else { return Err(TestCaseError::fail(format!("{prompt}: {cell:?}"))) };
                let asset = ws.doc().asset(id).unwrap();
                prompts.insert(asset.provenance.as_ref().unwrap().prompt.clone());
                ids.insert(id.clone());
            }
            prop_assert_eq!(prompts.len(), 4, "derived prompts for `{}` repeat", prompt);
            prop_assert_eq!(ids.len(), 4);
        }
        Ok(())
    })
}

fn segmentation_oracle() -> Check {
    let case = (scene_strategy(6), 8..80u32, proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..32));
    property(1000, case, |(scene, size, unit_points)| {
        let asset = scene_asset(&scene, size, 5);
        let points: Vec<(f64, f64)> = unit_points.iter().map(|(x, y)| (x * size as f64, y * size as f64)).collect();
        let adapters = Adapters::mock(size);
        let got = adapters.image.segment(&asset, &points);
        match oracle_segment(&scene, size, &points) {
            None => prop_assert!(matches!(got, Err(AdapterError::SegmentationEmpty)), "{:?}", got),
            Some(i) => {
                let mask = got.map_err(|e| TestCaseError::fail(e.to_string()))?;
                for py in 0..size {
                    for px in 0..size {
                        prop_assert_eq!(mask.get(px, py), covers(&scene.objects[i].region, px, py, size), "pixel {},{}", px, py);
                    }
                }
            }
        }
        Ok(())
    })
}

fn inpaint_locality() -> Check {
    let brush = prop_oneof![pick("style").prop_map(|f| (f.value, BrushMode::Style)), pick("content").prop_map(|f| (f.value, BrushMode::Content))];
    let case = (scene_strategy(4), 16..64u32, any::<prop::sample::Index>(), proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..6), brush);
    property(500, case, |(scene, size, which, offsets, (brush_prompt, mode))| {
        let (mut ws, clock) = workspace(size);
        let base = scene_asset(&scene, size, 9);
        let asset = ws.import_asset(base.clone()).unwrap();
        let prompt = render(&scene.objects.iter().flat_map(|o| o.fragments()).collect::<Vec<_>>());
        let img = ws
            .create_element(rect(0.0, 0.0, 100.0, 100.0), ElementInit::Image { prompt, seed: Some(2), asset: Some(asset) })
            .unwrap();
        let b = ws.create_element(rect(200.0, 0.0, 10.0, 10.0), ElementInit::Brush { prompt: brush_prompt, mode }).unwrap();
        // points inside one object's pixels
        let region = scene.objects[which.index(scene.objects.len())].region;
        let pixels: Vec<(u32, u32)> =
            (0..size).flat_map(|y| (0..size).map(move |x| (x, y))).filter(|&(x, y)| covers(&region, x, y, size)).collect();
        prop_assume!(!pixels.is_empty());
        let points: Vec<(f64, f64)> = offsets
            .iter()
            .map(|(fx, _)| {
                let (x, y) = pixels[((fx * pixels.len() as f64) as usize).min(pixels.len() - 1)];
                (x as f64 + 0.5, y as f64 + 0.5)
            })
            .collect();
        let stroke = Stroke::new(points);
        let samples = match resample_stroke(&stroke, (size, size)) {
            Ok(s) => s,
            Err(_) => {
                prop_assert_eq!(ws.apply_brush(&b, &img, &stroke).unwrap_err().code(), "degenerate-stroke");
                return Ok(());
            }
        };
        let chosen = oracle_segment(&scene, size, &samples).expect("points lie inside an object");
        ws.apply_brush(&b, &img, &stroke).map_err(|e| TestCaseError::fail(e.to_string()))?;
        settle(&mut ws, &clock);
        let after = ws.doc().asset(&image_asset(&ws, &img).unwrap()).unwrap().clone();
        prop_assert_eq!(after.dims(), base.dims());
        let mask_region = scene.objects[chosen].region;
        for obj in &scene.objects {
            let touches = (0..size).any(|y| (0..size).any(|x| covers(&obj.region, x, y, size) && covers(&mask_region, x, y, size)));
            if touches {
                continue;
            }
            for y in 0..size {
                for x in 0..size {
                    if covers(&obj.region, x, y, size) {
                        prop_assert_eq!(after.pixel(x, y), base.pixel(x, y), "{} changed at {},{}", obj.label, x, y);
                    }
                }
            }
        }
        for y in 0..size {
            for x in 0..size {
                if !covers(&mask_region, x, y, size) {
                    prop_assert_eq!(after.pixel(x, y), base.pixel(x, y));
                }
            }
        }
        Ok(())
    })
}

fn fragment_round_trip() -> Check {
    let case = (prompt_fragments(), any::<prop::sample::Index>(), any::<u64>());
    property(500, case, |(frags, which, seed)| {
        prop_assume!(frags.len() >= 2);
        let prompt = render(&frags);
        let (mut ws, clock) = workspace(16);
        let img = ws
            .create_element(rect(0.0, 0.0, 64.0, 64.0), ElementInit::Image { prompt: prompt.clone(), seed: Some(seed), asset: None })
            .unwrap();
        settle(&mut ws, &clock);
        let original = ws.doc().asset(&image_asset(&ws, &img).unwrap()).unwrap().clone();
        let row = ws.reveal_fragments(&img).unwrap();
        let f = row.fragments[which.index(row.fragments.len())].clone();
        ws.apply_fragment_edit(&img, FragmentEdit::remove(f.clone())).map_err(|e| TestCaseError::fail(format!("{prompt}: {e}")))?;
        settle(&mut ws, &clock);
        let removed = image_asset(&ws, &img).unwrap();
        ws.apply_fragment_edit(&img, FragmentEdit::add(f)).unwrap();
        settle(&mut ws, &clock);
        let back = ws.doc().asset(&image_asset(&ws, &img).unwrap()).unwrap().clone();
        // scenes without a content object have nothing to render tags on
        if frags.iter().any(|f| f.ftype.as_str() == "content") {
            prop_assert!(removed != original.id, "removal did not change `{}`", prompt);
        }
        prop_assert_eq!(&back.id, &original.id);
        prop_assert!(back.raster == original.raster);
        Ok(())
    })
}

#[derive(Debug, Clone)]
enum Step {
    Prompt(usize, usize),
    Fire,
    Complete(usize),
    Advance(u64),
}

fn staleness_safety() -> Check {
    let step = prop_oneof![
        3 => (0..3usize, 0..12usize).prop_map(|(t, p)| Step::Prompt(t, p)),
        2 => Just(Step::Fire),
        3 => any::<usize>().prop_map(Step::Complete),
        1 => (0..50u64).prop_map(Step::Advance),
    ];
    let contents = values("content");
    property(200, proptest::collection::vec(step, 10..60), |steps| {
        let (mut ws, clock) = workspace(8);
        let targets: Vec<ElementId> = (0..3)
            .map(|i| {
                ws.create_element(rect(i as f64 * 100.0, 0.0, 50.0, 50.0), ElementInit::Image { prompt: String::new(), seed: Some(i), asset: None })
                    .unwrap()
            })
            .collect();
        let mut latest: BTreeMap<ElementId, JobId> = BTreeMap::new();
        let mut pool: Vec<(JobId, ElementId, Outcome)> = Vec::new();
        let mut counters: BTreeMap<ElementId, u64> = BTreeMap::new();
        let mut drain = steps.into_iter().map(Some).chain(std::iter::repeat_n(None, 200));
        loop {
            let step = match drain.next() {
                Some(Some(s)) => s,
                Some(None) if !pool.is_empty() || !ws.is_idle() => {
                    if pool.is_empty() { Step::Fire } else { Step::Complete(0) }
                }
                _ => break,
            };
            match step {
                Step::Prompt(t, p) => {
                    let job = ws.set_prompt(&targets[t], &contents[p]).unwrap().unwrap();
                    latest.insert(targets[t].clone(), job);
                }
                Step::Fire => {
                    for f in ws.fire_due() {
                        let outcome = f.work.run(ws.adapters());
                        pool.push((f.job, f.target, outcome));
                    }
                }
                Step::Advance(ms) => {
                    clock.advance(ms);
                }
                Step::Complete(i) => {
                    if pool.is_empty() {
                        continue;
                    }
                    let (job, target, outcome) = pool.remove(i % pool.len());
                    let produced = match &outcome {
                        Outcome::Assets(a) => a[0].id.clone(),
                        other => return Err(TestCaseError::fail(format!("{other:?}"))),
                    };
                    let report = ws.apply(job, outcome);
                    let fresh = latest.get(&target) == Some(&job);
                    match report.status {
                        ReportStatus::Applied { .. } => {
                            prop_assert!(fresh, "stale job {:?} applied", job);
                            prop_assert_eq!(image_asset(&ws, &target), Some(produced));
                        }
                        ReportStatus::Discarded { .. } => prop_assert!(!fresh, "latest job {:?} discarded", job),
                        ReportStatus::Failed { code, .. } => return Err(TestCaseError::fail(code)),
                    }
                    let now = ws.doc().counter(&target);
                    let before = counters.insert(target.clone(), now).unwrap_or(0);
                    prop_assert!(now >= before, "counter of {} went back from {} to {}", target, before, now);
                }
            }
        }
        prop_assert!(pool.is_empty() && ws.is_idle());
        for t in &targets {
            if let Some(job) = latest.get(t) {
                let expected = ws.doc().counter(t);
                prop_assert_eq!(ws.scheduler().last_applied(t), expected, "latest job {:?} of {} never applied", job, t);
            }
        }
        Ok(())
    })
}

fn scripts_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts")
}

fn determinism_and_replay() -> Check {
    for name in ["explore.json", "steer.json"] {
        let path = scripts_dir().join(name);
        let a = run_script(&path).map_err(|e| format!("{name}: {e}"))?;
        let b = run_script(&path).map_err(|e| format!("{name}: {e}"))?;
        if a.to_bytes() != b.to_bytes() {
            return Err(format!("{name}: transcripts differ"));
        }
        let doc = a.document().map_err(|e| e.to_string())?;
        let rebuilt = replay(&a.events, &doc).map_err(|e| e.to_string())?;
        if rebuilt.serialize() != doc.serialize() {
            return Err(format!("{name}: replay differs from the final document"));
        }
    }
    Ok("2 scripts".into())
}

#[derive(Debug, Clone)]
enum Build {
    Image(Vec<Fragment>, u64),
    Imported(SceneSpec),
    Card(Fragment),
    Lens(usize),
    Container(Vec<Fragment>),
    Brush(usize),
    Palette,
    Snapshot(prop::sample::Index),
    Move(prop::sample::Index, f64, f64),
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for e in entries.flatten() {
            out.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap());
        }
    }
    out
}

fn serialization() -> Check {
    let build = prop_oneof![
        prompt_fragments().prop_flat_map(|f| (Just(f), any::<u64>())).prop_map(|(f, s)| Build::Image(f, s)),
        scene_strategy(3).prop_map(Build::Imported),
        pick("color").prop_map(Build::Card),
        (0..10usize).prop_map(Build::Lens),
        prompt_fragments().prop_map(Build::Container),
        (0..10usize).prop_map(Build::Brush),
        Just(Build::Palette),
        any::<prop::sample::Index>().prop_map(Build::Snapshot),
        (any::<prop::sample::Index>(), -1e4..1e4f64, -1e4..1e4f64).prop_map(|(i, x, y)| Build::Move(i, x, y)),
    ];
    let tones = values("tone");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let counter = std::cell::Cell::new(0u32);
    property(200, proptest::collection::vec(build, 0..12), |ops| {
        let (mut ws, clock) = workspace(8);
        let mut ids: Vec<ElementId> = Vec::new();
        for (i, op) in ops.into_iter().enumerate() {
            let r = rect(i as f64 * 37.25, (i % 3) as f64 * 0.1, 20.0 + i as f64 / 3.0, 20.0);
            let created = match op {
                Build::Image(f, seed) => {
                    let prompt = if f.is_empty() { "castle".into() } else { render(&f) };
                    ws.create_element(r, ElementInit::Image { prompt, seed: Some(seed), asset: None })
                }
                Build::Imported(scene) => {
                    let asset = ws.import_asset(scene_asset(&scene, 8, i as u64)).unwrap();
                    ws.create_element(r, ElementInit::Image { prompt: String::new(), seed: None, asset: Some(asset) })
                }
                Build::Card(f) => ws.create_element(r, ElementInit::FragmentCard(f)),
                Build::Lens(t) => ws.create_element(r, ElementInit::Lens { prompt: tones[t].clone() }),
                Build::Container(f) => ws.create_element(r, ElementInit::Container { prompt: render(&f) }),
                Build::Brush(t) => ws.create_element(r, ElementInit::Brush { prompt: tones[t].clone(), mode: BrushMode::Style }),
                Build::Palette => {
                    let p = ws.create_element(r, ElementInit::Palette { title: format!("set {i}") });
                    if let (Ok(p), Some(first)) = (&p, ids.first()) {
                        let _ = ws.add_to_palette(p, first);
                    }
                    p
                }
                Build::Snapshot(which) => {
                    if !ids.is_empty() {
                        ws.snapshot(&ids[which.index(ids.len())]).unwrap();
                    }
                    continue;
                }
                Build::Move(which, x, y) => {
                    if !ids.is_empty() {
                        let id = ids[which.index(ids.len())].clone();
                        let w = ws.doc().element(&id).unwrap().rect.w;
                        ws.update_geometry(&id, rect(x, y, w, 10.0)).unwrap();
                    }
                    continue;
                }
            };
            ids.push(created.map_err(|e| TestCaseError::fail(e.to_string()))?);
            settle(&mut ws, &clock);
        }
        settle(&mut ws, &clock);
        let n = counter.get();
        counter.set(n + 1);
        let first = dir.path().join(format!("a{n}.json"));
        let second = dir.path().join(format!("b{n}.json"));
        save_document(ws.doc(), &first).unwrap();
        let loaded = load_document(&first).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(&loaded == ws.doc(), "loaded document differs");
        save_document(&loaded, &second).unwrap();
        prop_assert!(std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap(), "document bytes differ");
        prop_assert!(files(&asset_dir_for(&first)) == files(&asset_dir_for(&second)), "asset files differ");
        Ok(())
    })
}
