//! HTTP surface. Every handler runs its registry call on the blocking pool;
//! mutating handlers persist the store before answering.

mod error;
mod handlers;

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Request, State};
use axum::handler::Handler;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use termreg_core::ids::UserId;
use termreg_core::ingest::Fetcher;
use termreg_core::Registry;

pub use error::{status_of, ApiError, ApiResult};

/// Largest accepted request body (imports).
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub fetcher: Arc<dyn Fetcher>,
}

impl AppState {
    pub fn new(registry: Arc<Registry>, fetcher: Arc<dyn Fetcher>) -> Self {
        Self { registry, fetcher }
    }

    /// Runs a read-only registry call off the async executor.
    pub async fn read<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&Registry) -> termreg_core::Result<T> + Send + 'static,
    {
        let reg = self.registry.clone();
        tokio::task::spawn_blocking(move || f(&reg))
            .await
            .map_err(|e| ApiError::from(termreg_core::Error::Storage(format!("worker failed: {e}"))))?
            .map_err(ApiError::from)
    }

    /// Like [`AppState::read`], then saves the store.
    pub async fn write<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&Registry) -> termreg_core::Result<T> + Send + 'static,
    {
        self.read(move |reg| {
            let out = f(reg)?;
            reg.save()?;
            Ok(out)
        })
        .await
    }
}

fn bearer(parts: &Parts) -> Option<Result<&str, ApiError>> {
    let header = parts.headers.get(AUTHORIZATION)?;
    let token = header
        .to_str()
        .ok()
        .and_then(|h| h.strip_prefix("Bearer ").or_else(|| h.strip_prefix("bearer ")))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ApiError::unauthenticated("Authorization header must be `Bearer <token>`"));
    Some(token)
}

/// The user behind a valid bearer token. Rejects missing, unknown and
/// expired tokens.
pub struct Auth(pub UserId);

impl FromRequestParts<AppState> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = bearer(parts).ok_or_else(|| ApiError::unauthenticated("a bearer token is required"))??;
        Ok(Auth(state.registry.validate_token(token)?))
    }
}

/// Like [`Auth`] but also admits requests without an Authorization header.
/// A header that is present must still be valid.
pub struct MaybeAuth(pub Option<UserId>);

impl FromRequestParts<AppState> for MaybeAuth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        match bearer(parts) {
            None => Ok(MaybeAuth(None)),
            Some(token) => Ok(MaybeAuth(Some(state.registry.validate_token(token?)?))),
        }
    }
}

/// JSON body whose rejections use the common error shape.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match axum::Json::<T>::from_request(req, state).await {
            Ok(axum::Json(v)) => Ok(Body(v)),
            Err(e @ JsonRejection::MissingJsonContentType(_)) => Err(ApiError::new(
                axum::http::StatusCode::UNSUPPORTED_MEDIA_TYPE,
                "unsupported_format",
                e.body_text(),
            )),
            Err(e) => Err(ApiError::bad_request(e.body_text())),
        }
    }
}

/// Query string whose rejections use the common error shape.
pub struct Query<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for Query<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Query(q.0))
            .map_err(|e: QueryRejection| ApiError::bad_request(e.body_text()))
    }
}

/// Action segments that may follow an ARK under `/terms/`.
const TERM_ACTIONS: [&str; 5] = ["/vote", "/comments", "/track", "/triples", "/lexemes"];

fn term_action(path: &str) -> Option<&'static str> {
    TERM_ACTIONS.iter().copied().find(|a| path.ends_with(a))
}

/// The ARK of a `/terms/{ark}[/action]` request, percent-decoded.
pub struct TermArk(pub String);

impl<S: Send + Sync> FromRequestParts<S> for TermArk {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        let path = parts.uri.path();
        let rest = path.strip_prefix("/terms/").unwrap_or(path);
        let rest = term_action(rest).map_or(rest, |a| &rest[..rest.len() - a.len()]);
        let ark = percent_encoding::percent_decode_str(rest)
            .decode_utf8()
            .map_err(|_| ApiError::bad_request("term path is not valid UTF-8"))?;
        Ok(TermArk(ark.into_owned()))
    }
}

async fn term_get(State(s): State<AppState>, req: Request) -> Response {
    match term_action(req.uri().path()) {
        None => handlers::term_detail.call(req, s).await,
        Some("/comments") => handlers::comments.call(req, s).await,
        Some("/lexemes") => handlers::lexemes.call(req, s).await,
        Some(_) => method_not_allowed(),
    }
}

async fn term_put(State(s): State<AppState>, req: Request) -> Response {
    match term_action(req.uri().path()) {
        None => handlers::revise.call(req, s).await,
        Some(_) => method_not_allowed(),
    }
}

async fn term_post(State(s): State<AppState>, req: Request) -> Response {
    match term_action(req.uri().path()) {
        Some("/vote") => handlers::vote.call(req, s).await,
        Some("/comments") => handlers::comment.call(req, s).await,
        Some("/track") => handlers::track.call(req, s).await,
        Some("/triples") => handlers::add_triple.call(req, s).await,
        _ => method_not_allowed(),
    }
}

fn method_not_allowed() -> Response {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed here",
    )
    .into_response()
}

pub fn router(state: AppState) -> Router {
    use handlers::*;
    Router::new()
        .route("/health", get(health))
        .route("/auth", post(authenticate))
        .route("/users", post(register))
        .route("/users/{id}", get(profile).put(update_profile))
        .route("/users/{id}/follow", post(follow))
        .route("/terms", get(browse).post(propose))
        // ARKs contain slashes, so every per-term route shares one pattern
        .route("/terms/{*rest}", get(term_get).put(term_put).post(term_post))
        .route("/moderators", post(assign_moderator))
        .route("/export", get(export))
        .route("/import", post(import))
        .route("/surveys", post(create_survey))
        .route("/surveys/{id}/responses", post(respond_survey))
        .route("/surveys/{id}/results", get(survey_results))
        .route("/surveys/{id}/close", post(close_survey))
        .route("/notifications", get(notifications))
        .route("/notifications/digest", post(digest))
        .route("/tags/suggest", get(suggest_tags))
        .route("/sweep", post(sweep))
        .route("/ark:/{naan}/{*name}", get(resolve_ark))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Every route that changes state, as `(method, path template)`. Used by the
/// authorization sweep in the tests and listed in the README.
pub const MUTATING_ROUTES: &[(&str, &str)] = &[
    ("POST", "/users"),
    ("PUT", "/users/{id}"),
    ("POST", "/users/{id}/follow"),
    ("POST", "/terms"),
    ("PUT", "/terms/{ark}"),
    ("POST", "/terms/{ark}/vote"),
    ("POST", "/terms/{ark}/comments"),
    ("POST", "/terms/{ark}/track"),
    ("POST", "/terms/{ark}/triples"),
    ("POST", "/moderators"),
    ("POST", "/import"),
    ("POST", "/surveys"),
    ("POST", "/surveys/{id}/responses"),
    ("POST", "/surveys/{id}/close"),
    ("POST", "/notifications/digest"),
    ("POST", "/sweep"),
];
