use canvas_instruments::session::{replay, script::run_script};
use canvas_instruments::{CanvasDocument, ElementKind, EventKind, OpKind, Payload, Transcript};
use std::path::PathBuf;

fn script(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts").join(name)
}

fn count(doc: &CanvasDocument, kind: ElementKind) -> usize {
    doc.elements().filter(|e| e.kind() == kind).count()
}

fn run(name: &str) -> (Transcript, CanvasDocument) {
    let t = run_script(&script(name)).unwrap();
    assert!(t.events.iter().all(|e| e.kind != EventKind::Error), "{name} emitted an error");
    let doc = t.document().unwrap();
    (t, doc)
}

#[test]
fn exploring_with_containers_and_lenses() {
    let (t, doc) = run("explore.json");
    assert!(count(&doc, ElementKind::Container) >= 2);
    assert!(count(&doc, ElementKind::Lens) >= 2);
    for el in doc.elements() {
        match &el.payload {
            Payload::Lens(l) => assert!(l.last_result.is_some(), "lens {} has no result", el.id),
            Payload::Container(c) => assert!(c.is_filled(), "container {} is not filled", el.id),
            _ => {}
        }
    }
    assert_eq!(replay(&t.events, &doc).unwrap().serialize(), doc.serialize());
}

#[test]
fn steering_the_castle_to_watercolor() {
    let (t, doc) = run("steer.json");
    let castle = doc.get(&"e1".into()).unwrap();
    let Payload::Image(body) = &castle.payload else { panic!() };
    let asset = doc.asset(body.asset.as_ref().unwrap()).unwrap();
    let scene = asset.scene.as_ref().unwrap();
    let obj = scene.objects.iter().find(|o| o.label == "castle").unwrap();
    assert!(obj.style_tags.iter().any(|s| s == "watercolor"), "{:?}", obj.style_tags);
    let provenance = asset.provenance.as_ref().unwrap();
    assert_eq!(provenance.controls.op_kind, OpKind::Inpaint);
    assert!(provenance.prompt.contains("watercolor"));
    assert_eq!(replay(&t.events, &doc).unwrap().serialize(), doc.serialize());
}
