use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use termreg_core::clock::ManualClock;
use termreg_core::ingest::{FetchError, Fetcher};
use termreg_core::registry::RegistryConfig;
use termreg_core::Registry;
use termreg_server::api::{router, AppState, MUTATING_ROUTES};
use tower::ServiceExt;

struct NoFetch;

impl Fetcher for NoFetch {
    fn fetch(&self, url: &str, _: Duration) -> Result<Vec<u8>, FetchError> {
        Err(FetchError(format!("offline: {url}")))
    }
}

struct App {
    router: Router,
    clock: Arc<ManualClock>,
    registry: Arc<Registry>,
}

struct Reply {
    status: StatusCode,
    content_type: String,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }

    fn text(&self) -> String {
        String::from_utf8(self.bytes.clone()).unwrap()
    }

    fn code(&self) -> String {
        self.json()["error"]["code"].as_str().unwrap_or_default().to_string()
    }
}

impl App {
    fn new() -> Self {
        let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2026, 1, 5, 9, 0, 0).unwrap()));
        let registry = Arc::new(Registry::new(RegistryConfig::default(), clock.clone()).unwrap());
        let router = router(AppState::new(registry.clone(), Arc::new(NoFetch)));
        Self {
            router,
            clock,
            registry,
        }
    }

    async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let content_type = resp
            .headers()
            .get(header::CONTENT_TYPE)
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply {
            status,
            content_type,
            bytes,
        }
    }

    async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        self.send(req.body(body).unwrap()).await
    }

    async fn get(&self, uri: &str) -> Reply {
        self.call(Method::GET, uri, None, None).await
    }

    /// Registers `handle` (as admin `admin` unless bootstrapping) and logs in.
    async fn user(&self, handle: &str, admin: Option<&str>) -> (u64, String) {
        let r = self
            .call(
                Method::POST,
                "/users",
                admin,
                Some(json!({ "handle": handle, "secret": format!("{handle}-secret-1") })),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let id = r.json()["id"].as_u64().unwrap();
        let r = self
            .call(
                Method::POST,
                "/auth",
                None,
                Some(json!({ "handle": handle, "secret": format!("{handle}-secret-1") })),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text());
        (id, r.json()["token"].as_str().unwrap().to_string())
    }

    async fn propose(&self, token: &str, label: &str) -> String {
        let r = self
            .call(
                Method::POST,
                "/terms",
                Some(token),
                Some(json!({ "label": label, "definition": format!("Definition of {label}.") })),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        r.json()["ark"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn every_mutating_route_requires_a_valid_token() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let ark = app.propose(&admin, "Creator").await;
    for (method, template) in MUTATING_ROUTES {
        let uri = template.replace("{id}", "1").replace("{ark}", &ark);
        let method: Method = method.parse().unwrap();
        let body = Some(json!({}));
        let r = app.call(method.clone(), &uri, None, body.clone()).await;
        assert_eq!(
            r.status,
            StatusCode::UNAUTHORIZED,
            "{method} {uri} without token: {}",
            r.text()
        );
        assert_eq!(r.code(), "authentication_failed", "{method} {uri}");
        let r = app.call(method.clone(), &uri, Some("forged-token"), body).await;
        assert_eq!(
            r.status,
            StatusCode::UNAUTHORIZED,
            "{method} {uri} with forged token: {}",
            r.text()
        );
    }
    // nothing was changed by the rejected requests
    assert_eq!(app.registry.user_count(), 1);
}

#[tokio::test]
async fn every_mutating_route_is_routed() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let ark = app.propose(&admin, "Creator").await;
    for (method, template) in MUTATING_ROUTES {
        let uri = template.replace("{id}", "1").replace("{ark}", &ark);
        let r = app
            .call(method.parse().unwrap(), &uri, Some(&admin), Some(json!({})))
            .await;
        assert!(!r.text().contains("no such endpoint"), "{method} {uri}: {}", r.text());
        assert_ne!(r.status, StatusCode::METHOD_NOT_ALLOWED, "{method} {uri}");
    }
}

#[tokio::test]
async fn expired_tokens_are_distinguished() {
    let app = App::new();
    let (_, token) = app.user("ana", None).await;
    assert_eq!(
        app.call(Method::GET, "/notifications", Some(&token), None).await.status,
        StatusCode::OK
    );
    app.clock.advance(chrono::Duration::hours(13));
    let r = app.call(Method::GET, "/notifications", Some(&token), None).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert_eq!(r.code(), "token_expired");
    let r = app
        .call(
            Method::POST,
            "/auth",
            None,
            Some(json!({ "handle": "ana", "secret": "wrong" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert_eq!(r.code(), "authentication_failed");
}

#[tokio::test]
async fn accounts_after_the_first_need_an_administrator() {
    let app = App::new();
    let (admin_id, admin) = app.user("admin", None).await;
    let r = app
        .call(Method::POST, "/users", None, Some(json!({ "handle": "eve" })))
        .await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    let (_, bo) = app.user("bo", Some(&admin)).await;
    let r = app
        .call(Method::POST, "/users", Some(&bo), Some(json!({ "handle": "eve" })))
        .await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    assert_eq!(r.code(), "permission_denied");
    let r = app.get(&format!("/users/{admin_id}")).await;
    assert_eq!(r.json()["handle"], "admin");
    assert!(r.json().get("secret_hash").is_none());
    assert_eq!(app.get("/users/bo").await.json()["handle"], "bo");
    assert_eq!(app.get("/users/nobody").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn votes_and_follows_are_idempotent() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let (bo_id, bo) = app.user("bo", Some(&admin)).await;
    let ark = app.propose(&admin, "Creator").await;
    for _ in 0..3 {
        let r = app
            .call(
                Method::POST,
                &format!("/terms/{ark}/vote"),
                Some(&bo),
                Some(json!({ "direction": "up" })),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    }
    let detail = app.get(&format!("/terms/{ark}")).await.json();
    assert_eq!(detail["up_votes"], 1);
    assert_eq!(detail["down_votes"], 0);
    assert!(detail["ark_url"].as_str().unwrap().ends_with(&ark));

    let r = app
        .call(
            Method::POST,
            &format!("/terms/{ark}/vote"),
            Some(&admin),
            Some(json!({ "direction": "up" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::FORBIDDEN, "self-votes are refused");

    let first = app
        .call(Method::POST, &format!("/users/{bo_id}/follow"), Some(&admin), None)
        .await;
    let second = app
        .call(Method::POST, &format!("/users/{bo_id}/follow"), Some(&admin), None)
        .await;
    assert_eq!(first.json()["changed"], true);
    assert_eq!(second.json()["changed"], false);
    assert_eq!(
        app.get(&format!("/users/{bo_id}")).await.json()["followers"]
            .as_array()
            .unwrap()
            .len(),
        1
    );

    let t1 = app
        .call(Method::POST, &format!("/terms/{ark}/track"), Some(&bo), None)
        .await;
    let t2 = app
        .call(Method::POST, &format!("/terms/{ark}/track"), Some(&bo), None)
        .await;
    assert_eq!(
        (t1.json()["changed"].clone(), t2.json()["changed"].clone()),
        (json!(true), json!(false))
    );
}

#[tokio::test]
async fn terms_comments_and_browse() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let creator = app.propose(&admin, "Creator").await;
    let title = app.propose(&admin, "Title").await;

    let r = app
        .call(
            Method::POST,
            "/terms",
            Some(&admin),
            Some(json!({ "label": "creator", "definition": "Again." })),
        )
        .await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let r = app
        .call(
            Method::POST,
            &format!("/terms/{creator}/comments"),
            Some(&admin),
            Some(json!({ "body": "see also #authorship" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let list = app.get(&format!("/terms/{creator}/comments")).await.json();
    assert_eq!(list.as_array().unwrap().len(), 1);
    let tags = app.get("/tags/suggest?prefix=auth").await.json();
    assert_eq!(tags["suggestions"][0]["tag"], "authorship");

    let r = app
        .call(
            Method::POST,
            &format!("/terms/{creator}/triples"),
            Some(&admin),
            Some(json!({ "predicate": "http://www.w3.org/2004/02/skos/core#related", "object": { "term": title } })),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    assert_eq!(r.json()["added"], true);

    let r = app
        .call(
            Method::PUT,
            &format!("/terms/{creator}"),
            Some(&admin),
            Some(json!({ "definition": "An entity primarily responsible for making the resource.", "change_note": "clarify" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    assert_eq!(r.json()["version"], 2);

    let page = app.get("/terms?size=1").await.json();
    assert_eq!(page["total"], 2);
    assert_eq!(page["items"].as_array().unwrap().len(), 1);
    let page = app.get("/terms?status=vernacular").await.json();
    assert_eq!(page["total"], 2);
    // a filter value that names nothing is an empty result, not an error
    let r = app.get("/terms?status=bogus").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["total"], 0);
    assert_eq!(app.get("/terms?collection=none").await.json()["total"], 0);

    assert_eq!(app.get("/terms/ark:/99999/y2zzzzz").await.status, StatusCode::NOT_FOUND);
    let r = app.get("/no/such/endpoint").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.code(), "not_found");
}

#[tokio::test]
async fn malformed_bodies_use_the_error_shape() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let req = Request::builder()
        .method(Method::POST)
        .uri("/terms")
        .header(header::AUTHORIZATION, format!("Bearer {admin}"))
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let r = app.send(req).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(r.json()["error"]["message"].is_string());
    let r = app
        .call(
            Method::POST,
            "/terms",
            Some(&admin),
            Some(json!({ "label": "", "definition": "x" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.code(), "validation_failed");
}

const SCHEMA_TTL: &str = "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
@prefix ex: <http://example.org/v#> .\n\
ex:title rdfs:label \"Title\" ; rdfs:comment \"A name given to the resource.\" .\n\
ex:creator rdfs:label \"Creator\" ; rdfs:comment \"An entity responsible for making the resource.\" .\n";

async fn import(app: &App, token: &str, query: &str, body: &str) -> Reply {
    let req = Request::builder()
        .method(Method::POST)
        .uri(format!("/import?{query}"))
        .header(header::AUTHORIZATION, format!("Bearer {token}"))
        .body(Body::from(body.to_string()))
        .unwrap();
    app.send(req).await
}

#[tokio::test]
async fn import_and_export_over_http() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let r = import(&app, &admin, "format=turtle", SCHEMA_TTL).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    assert_eq!(r.json()["created"].as_array().unwrap().len(), 2);

    let again = import(&app, &admin, "format=turtle", SCHEMA_TTL).await;
    assert_eq!(again.json()["created"].as_array().unwrap().len(), 0);

    let r = import(
        &app,
        &admin,
        "format=turtle",
        "@prefix ex: <http://e/> .\nex:a ex:b \"unterminated .\n",
    )
    .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{}", r.text());
    assert_eq!(r.code(), "parse_error");
    assert!(r.json()["error"]["line"].as_u64().unwrap() >= 2);
    assert!(r.json()["error"]["column"].is_u64());

    let r = import(&app, &admin, "format=pdf", SCHEMA_TTL).await;
    assert_eq!(r.status, StatusCode::UNSUPPORTED_MEDIA_TYPE);

    for (format, media) in [
        ("json", "application/json"),
        ("xml", "application/xml"),
        ("rdf", "application/rdf+xml"),
        ("skos", "text/turtle"),
    ] {
        let r = app.get(&format!("/export?format={format}")).await;
        assert_eq!(r.status, StatusCode::OK, "{format}");
        assert_eq!(r.content_type, media);
        assert!(r.text().contains("Creator"), "{format}: {}", r.text());
        // an empty selection is still a well-formed document
        let r = app.get(&format!("/export?format={format}&collection=none")).await;
        assert_eq!(r.status, StatusCode::OK);
        assert!(!r.text().contains("Creator"));
    }
    let r = app.get("/export?format=csv").await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    // re-importing an export creates nothing
    let doc = app.get("/export?format=rdf").await.text();
    let r = import(&app, &admin, "format=rdfxml", &doc).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    assert_eq!(r.json()["created"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn ark_resolver_and_inflections() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let ark = app.propose(&admin, "Creator").await;
    assert_eq!(ark, "ark:/99999/y20001m");

    let r = app.get(&format!("/{ark}")).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["type"], "record");

    let hyphenated = format!("/{}-{}", &ark[..14], &ark[14..]);
    let r = app.get(&hyphenated).await;
    assert_eq!(r.status, StatusCode::OK, "{hyphenated}: {}", r.text());
    assert_eq!(r.json()["ark"], ark);

    let a = app.get(&format!("/{ark}?")).await;
    let b = app.get(&format!("/{ark}?")).await;
    assert_eq!(a.json()["type"], "statement");
    assert_eq!(a.bytes, b.bytes, "statement is deterministic");

    let r = app.get(&format!("/{ark}??")).await;
    assert_eq!(r.json()["type"], "statement_with_versions");
    let meta = &r.json()["version_metadata"];
    assert!(meta.get("dcterms:created").is_some(), "{meta}");
    assert!(meta.get("owl:deprecated").is_none());

    let req = Request::builder()
        .uri(format!("/{ark}??"))
        .header(header::ACCEPT, "text/plain")
        .body(Body::empty())
        .unwrap();
    let r = app.send(req).await;
    assert!(r.content_type.starts_with("text/plain"));
    assert!(r.text().contains("dcterms:created: "), "{}", r.text());

    let r = app.get(&format!("/{ark}?version=1")).await;
    assert_eq!(r.json()["type"], "version");
    assert_eq!(
        app.get(&format!("/{ark}?version=9")).await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(app.get("/ark:/99999/y2zzzzz").await.status, StatusCode::NOT_FOUND);
    assert_eq!(app.get("/ark:/12345/y20001m").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn surveys_notifications_and_sweep() {
    let app = App::new();
    let (_, admin) = app.user("admin", None).await;
    let (bo_id, bo) = app.user("bo", Some(&admin)).await;
    let ark = app.propose(&admin, "Creator").await;

    let r = app
        .call(
            Method::POST,
            "/surveys",
            Some(&admin),
            Some(json!({ "terms": [ark], "questions": ["Is this clear?"], "audience": "link_token" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let survey = r.json();
    let id = survey["id"].as_u64().unwrap();
    let token = survey["token"].as_str().unwrap().to_string();

    let path = format!("/surveys/{id}/responses");
    let r = app
        .call(Method::POST, &path, None, Some(json!({ "term": ark, "rating": 4 })))
        .await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    let r = app
        .call(
            Method::POST,
            &path,
            None,
            Some(json!({ "term": ark, "rating": 4, "token": token, "name": "guest" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let r = app
        .call(
            Method::POST,
            &path,
            Some(&bo),
            Some(json!({ "term": ark, "rating": 2, "token": token })),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());

    let r = app
        .call(Method::GET, &format!("/surveys/{id}/results"), Some(&admin), None)
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    let r = app
        .call(Method::GET, &format!("/surveys/{id}/results"), Some(&bo), None)
        .await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    let r = app
        .call(Method::POST, &format!("/surveys/{id}/close"), Some(&admin), None)
        .await;
    assert_eq!(r.status, StatusCode::OK);

    // bo follows admin's term and hears about the comment
    app.call(Method::POST, &format!("/terms/{ark}/track"), Some(&bo), None)
        .await;
    app.call(
        Method::POST,
        &format!("/terms/{ark}/comments"),
        Some(&admin),
        Some(json!({ "body": "updated" })),
    )
    .await;
    let feed = app.call(Method::GET, "/notifications", Some(&bo), None).await;
    assert_eq!(feed.status, StatusCode::OK);
    assert!(!feed.json().as_array().unwrap().is_empty(), "{}", feed.text());
    let d = app.call(Method::POST, "/notifications/digest", Some(&bo), None).await;
    assert_eq!(d.json()["digest"]["recipient"], bo_id);

    let r = app.call(Method::POST, "/sweep", Some(&bo), None).await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    let r = app.call(Method::POST, "/sweep", Some(&admin), None).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text());
    assert!(r.json()["events_processed"].is_u64());
}

#[tokio::test]
async fn mutations_are_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2026, 1, 5, 9, 0, 0).unwrap()));
    let config = RegistryConfig {
        store_path: Some(store.clone()),
        ..RegistryConfig::default()
    };
    let app = App {
        registry: Arc::new(Registry::open(config.clone(), clock.clone()).unwrap()),
        router: Router::new(),
        clock: clock.clone(),
    };
    let app = App {
        router: router(AppState::new(app.registry.clone(), Arc::new(NoFetch))),
        ..app
    };
    let (_, admin) = app.user("admin", None).await;
    let ark = app.propose(&admin, "Creator").await;
    let reopened = Registry::open(config, clock).unwrap();
    assert_eq!(reopened.user_count(), 1);
    assert!(reopened.term_id_by_ark(&ark).is_ok());
}
