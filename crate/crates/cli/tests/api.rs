//! Annotation API over HTTP, driven in-process through the router.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use reactlens::annotate::AnnotationService;
use reactlens::corpus::fixture::generate_fixture;
use reactlens::corpus::{clean, read_annotations};
use reactlens::{Annotation, MediaKind, PostRecord};
use reactlens_cli::server::router;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Env {
    _dir: tempfile::TempDir,
    media: PathBuf,
    store: PathBuf,
    posts: Vec<PostRecord>,
}

/// `n` cleaned fixture posts with media on disk and an empty store.
fn env(n: usize) -> Env {
    let dir = tempfile::tempdir().unwrap();
    let media = dir.path().join("media");
    let fx = generate_fixture(5, 60).unwrap();
    fx.write_media(&media).unwrap();
    let (mut posts, _) = clean(&fx.posts, &media);
    posts.truncate(n);
    Env {
        store: dir.path().join("annotations.jsonl"),
        media,
        posts,
        _dir: dir,
    }
}

fn service(e: &Env) -> AnnotationService {
    let texts: HashMap<String, String> = e
        .posts
        .iter()
        .map(|p| (p.post_id.clone(), format!("enriched {}", p.post_id)))
        .collect();
    AnnotationService::open(e.posts.clone(), texts, &e.media, &e.store).unwrap()
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn post_json(app: &Router, body: &Value) -> (StatusCode, Value) {
    post_raw(app, body.to_string()).await
}

async fn post_raw(app: &Router, body: String) -> (StatusCode, Value) {
    let req = Request::post("/annotations")
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap();
    let (s, b) = call(app, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn label(post: &str, image: u8, caption: u8, who: &str, at: i64) -> Value {
    json!({"post_id": post, "image_class": image, "caption_class": caption, "annotator_id": who, "labeled_at": at})
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

/// Independent scan of the store: last record per (post, annotator), then
/// the latest per post with ties to the greatest annotator id.
fn scan(store: &Path, ids: &HashSet<String>) -> (usize, BTreeMap<u8, usize>, BTreeMap<u8, usize>) {
    let body = std::fs::read_to_string(store).unwrap_or_default();
    let mut last: HashMap<(String, String), Annotation> = HashMap::new();
    for line in body.lines().filter(|l| !l.trim().is_empty()) {
        let a: Annotation = serde_json::from_str(line).unwrap();
        last.insert((a.post_id.clone(), a.annotator_id.clone()), a);
    }
    let mut per_post: HashMap<String, Annotation> = HashMap::new();
    for a in last.into_values() {
        let newer = per_post
            .get(&a.post_id)
            .is_none_or(|c| (a.labeled_at, &a.annotator_id) > (c.labeled_at, &c.annotator_id));
        if newer {
            per_post.insert(a.post_id.clone(), a);
        }
    }
    let mut image: BTreeMap<u8, usize> = (1..=5).map(|c| (c, 0)).collect();
    let mut caption = image.clone();
    let mut labeled = 0;
    for a in per_post.values().filter(|a| ids.contains(&a.post_id)) {
        labeled += 1;
        *image.get_mut(&a.image_class.code()).unwrap() += 1;
        *caption.get_mut(&a.caption_class.code()).unwrap() += 1;
    }
    (labeled, image, caption)
}

async fn assert_progress_matches_store(app: &Router, e: &Env) {
    let ids: HashSet<String> = e.posts.iter().map(|p| p.post_id.clone()).collect();
    let (labeled, image, caption) = scan(&e.store, &ids);
    let (s, p) = get_json(app, "/progress").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(p["labeled"], labeled);
    assert_eq!(p["total"], e.posts.len());
    for (code, n) in image {
        assert_eq!(p["image_class_counts"][code.to_string()], n);
    }
    for (code, n) in caption {
        assert_eq!(p["caption_class_counts"][code.to_string()], n);
    }
}

#[tokio::test]
async fn fresh_corpus_progress_then_one_label() {
    let e = env(10);
    assert_eq!(e.posts.len(), 10);
    let app = router(service(&e));
    let (_, p) = get_json(&app, "/progress").await;
    assert_eq!((p["labeled"].as_u64(), p["total"].as_u64()), (Some(0), Some(10)));

    let id = e.posts[3].post_id.clone();
    let (s, stored) = post_json(&app, &label(&id, 2, 3, "ana", 100)).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(stored, label(&id, 2, 3, "ana", 100));
    let (_, p) = get_json(&app, "/progress").await;
    assert_eq!((p["labeled"].as_u64(), p["total"].as_u64()), (Some(1), Some(10)));
    assert_progress_matches_store(&app, &e).await;
}

#[tokio::test]
async fn second_post_for_same_annotator_wins() {
    let e = env(10);
    let app = router(service(&e));
    let id = e.posts[0].post_id.clone();
    post_json(&app, &label(&id, 1, 1, "ana", 100)).await;
    post_json(&app, &label(&id, 4, 2, "ana", 90)).await;
    let raw = read_annotations(&e.store).unwrap();
    assert_eq!(raw.len(), 2, "store is append-only");
    let effective = reactlens::corpus::effective_annotations(&raw);
    assert_eq!(effective.len(), 1);
    assert_eq!((effective[0].image_class.code(), effective[0].caption_class.code()), (4, 2));
    let (_, p) = get_json(&app, "/progress").await;
    assert_eq!(p["labeled"], 1);
    assert_eq!(p["image_class_counts"]["4"], 1);
    assert_eq!(p["image_class_counts"]["1"], 0);
    assert_progress_matches_store(&app, &e).await;
}

#[tokio::test]
async fn invalid_labels_leave_the_store_unchanged() {
    let e = env(10);
    let app = router(service(&e));
    let id = e.posts[0].post_id.clone();
    post_json(&app, &label(&id, 3, 3, "ana", 1)).await;
    let before = std::fs::read(&e.store).unwrap();

    let cases = [
        (label(&id, 9, 3, "ana", 2), StatusCode::UNPROCESSABLE_ENTITY, "invalid_class"),
        (label(&id, 3, 0, "ana", 2), StatusCode::UNPROCESSABLE_ENTITY, "invalid_class"),
        (json!({"post_id": id, "image_class": "2", "caption_class": 1, "annotator_id": "ana"}), StatusCode::UNPROCESSABLE_ENTITY, "invalid_class"),
        (json!({"post_id": id, "image_class": 2.5, "caption_class": 1, "annotator_id": "ana"}), StatusCode::UNPROCESSABLE_ENTITY, "invalid_class"),
        (json!({"post_id": id, "image_class": 2, "annotator_id": "ana"}), StatusCode::UNPROCESSABLE_ENTITY, "missing_field"),
        (json!({"post_id": id, "image_class": 2, "caption_class": 1}), StatusCode::UNPROCESSABLE_ENTITY, "missing_field"),
        (label("no-such-post", 1, 1, "ana", 2), StatusCode::NOT_FOUND, "unknown_post"),
    ];
    for (body, status, code) in cases {
        let (s, v) = post_json(&app, &body).await;
        assert_eq!((s, error_code(&v)), (status, code), "{body}");
        assert!(v["error"]["message"].is_string());
    }
    let (s, v) = post_raw(&app, "{not json".into()).await;
    assert_eq!((s, error_code(&v)), (StatusCode::BAD_REQUEST, "malformed_request"));
    assert_eq!(std::fs::read(&e.store).unwrap(), before);
}

#[tokio::test]
async fn queue_order_and_per_annotator_skips() {
    let e = env(6);
    let app = router(service(&e));
    let mut order = e.posts.clone();
    order.sort_by(|a, b| a.created_at().cmp(&b.created_at()).then_with(|| a.post_id.cmp(&b.post_id)));

    let (s, v) = get_json(&app, "/tasks/next?annotator=ana").await;
    assert_eq!(s, StatusCode::OK);
    let first = &v["task"];
    assert_eq!(first["post_id"], order[0].post_id.as_str());
    assert_eq!(first["final_text"], format!("enriched {}", order[0].post_id));
    assert!(first["existing"].is_null());

    post_json(&app, &label(&order[0].post_id, 1, 2, "bo", 5)).await;
    let (_, v) = get_json(&app, "/tasks/next?annotator=ana").await;
    assert_eq!(v["task"]["post_id"], order[0].post_id.as_str(), "bo's label does not skip ana's queue");
    assert_eq!(v["task"]["existing"]["annotator_id"], "bo");

    let mut served = Vec::new();
    loop {
        let (_, v) = get_json(&app, "/tasks/next?annotator=ana").await;
        if v["task"].is_null() {
            break;
        }
        let id = v["task"]["post_id"].as_str().unwrap().to_string();
        assert!(!served.contains(&id), "served {id} twice");
        post_json(&app, &label(&id, 2, 2, "ana", 10)).await;
        served.push(id);
    }
    let want: Vec<String> = order.iter().map(|p| p.post_id.clone()).collect();
    assert_eq!(served, want);

    let (s, v) = get_json(&app, "/tasks/next").await;
    assert_eq!((s, error_code(&v)), (StatusCode::UNPROCESSABLE_ENTITY, "missing_annotator"));
}

#[tokio::test]
async fn media_bytes_and_video_first_frame() {
    let e = env(40);
    let app = router(service(&e));
    let with_kind = |k: MediaKind| e.posts.iter().find(|p| p.media_kind == Some(k) && p.media_path.is_some()).unwrap();
    for kind in [MediaKind::Image, MediaKind::Video] {
        let post = with_kind(kind);
        let (s, bytes) = call(&app, Request::get(format!("/media/{}", post.post_id)).body(Body::empty()).unwrap()).await;
        assert_eq!(s, StatusCode::OK);
        let img = image::load_from_memory(&bytes).unwrap();
        let want = reactlens::media::load_media(&e.media.join(post.media_path.as_ref().unwrap()), kind).unwrap();
        assert_eq!(img.to_rgb8(), want, "{kind:?}");
    }
    let (s, v) = get_json(&app, "/media/nope").await;
    assert_eq!((s, error_code(&v)), (StatusCode::NOT_FOUND, "unknown_post"));
    let (s, v) = get_json(&app, "/nowhere").await;
    assert_eq!((s, error_code(&v)), (StatusCode::NOT_FOUND, "no_route"));
}

#[tokio::test]
async fn restart_loses_nothing() {
    let e = env(10);
    {
        let app = router(service(&e));
        for (i, p) in e.posts.iter().take(4).enumerate() {
            post_json(&app, &label(&p.post_id, 1 + i as u8, 5 - i as u8, "ana", i as i64)).await;
        }
    }
    let app = router(service(&e));
    let (_, p) = get_json(&app, "/progress").await;
    assert_eq!(p["labeled"], 4);
    assert_progress_matches_store(&app, &e).await;
    let (_, v) = get_json(&app, "/tasks/next?annotator=ana").await;
    let served = v["task"]["post_id"].as_str().unwrap();
    assert!(!e.posts[..4].iter().any(|p| p.post_id == served));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writes_are_serialized() {
    let e = env(20);
    let app = router(service(&e));
    let mut handles = Vec::new();
    for (i, p) in e.posts.iter().enumerate() {
        for who in ["ana", "bo", "cy"] {
            let app = app.clone();
            let body = label(&p.post_id, 1 + (i % 5) as u8, 1 + ((i + 1) % 5) as u8, who, i as i64);
            handles.push(tokio::spawn(async move { post_json(&app, &body).await.0 }));
        }
    }
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::CREATED);
    }
    let raw = read_annotations(&e.store).unwrap();
    assert_eq!(raw.len(), 60);
    let body = std::fs::read_to_string(&e.store).unwrap();
    assert_eq!(body.lines().count(), 60, "no interleaved partial lines");
    assert_progress_matches_store(&app, &e).await;
    let (_, p) = get_json(&app, "/progress").await;
    assert_eq!(p["labeled"], 20);
}
