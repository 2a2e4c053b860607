use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::header::{ACCEPT, CONTENT_TYPE};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use termreg_core::clock::Timestamp;
use termreg_core::ids::{SchemaId, SurveyId, TermId, UserId};
use termreg_core::ingest::Format;
use termreg_core::model::{Direction, Literal, Object, Predicate, Status, TermGroup, Triple, XSD_STRING};
use termreg_core::registry::{
    Audience, BrowseFilter, BrowsePage, ExportFormat, ExportRequest, Inflection, InflectionBody, NewTerm, NewUser,
    Page, ProfileUpdate, Respondent, Revision,
};
use termreg_core::{Error, Registry};

use super::{ApiError, ApiResult, AppState, Auth, Body, MaybeAuth, Query, TermArk};

fn parse_id<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, Error> {
    raw.parse().map_err(|_| Error::NotFound(format!("{what} `{raw}`")))
}

/// Term named by a path or body value: a full ARK, a blade-name under our
/// NAAN, or a resolver URL containing the ARK.
fn term_id(reg: &Registry, raw: &str) -> Result<TermId, Error> {
    let raw = raw.find("ark:").map_or(raw, |i| &raw[i..]);
    reg.term_id_by_ark(raw)
}

/// A user id (`7` or `user:7`) or a handle.
fn user_id(reg: &Registry, raw: &str) -> Result<UserId, Error> {
    match raw.parse::<UserId>() {
        Ok(id) => reg.user(id).map(|u| u.id),
        Err(_) => reg.user_by_handle(raw).map(|u| u.id),
    }
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

pub async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

#[derive(Deserialize)]
pub struct Credentials {
    handle: String,
    secret: String,
}

pub async fn authenticate(State(s): State<AppState>, Body(c): Body<Credentials>) -> ApiResult<Json<Value>> {
    let (token, session) = s.read(move |reg| reg.authenticate(&c.handle, &c.secret)).await?;
    Ok(Json(
        json!({ "token": token, "user": session.user, "expires_at": session.expires_at }),
    ))
}

/// Open while the registry has no users (the first account becomes an
/// administrator); afterwards an administrator's token is required.
pub async fn register(
    State(s): State<AppState>,
    MaybeAuth(caller): MaybeAuth,
    Body(mut new): Body<NewUser>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let profile = s
        .write(move |reg| {
            if reg.user_count() == 0 {
                new.is_admin = true;
            } else {
                let caller = caller.ok_or(Error::Authentication)?;
                if !reg.user(caller)?.is_admin {
                    return Err(Error::Permission("only administrators create accounts".into()));
                }
            }
            let user = reg.register_user(new)?;
            reg.profile(user.id)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(json!(profile))))
}

pub async fn profile(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let p = s.read(move |reg| reg.profile(user_id(reg, &id)?)).await?;
    Ok(Json(json!(p)))
}

pub async fn update_profile(
    State(s): State<AppState>,
    Auth(caller): Auth,
    Path(id): Path<String>,
    Body(update): Body<ProfileUpdate>,
) -> ApiResult<Json<Value>> {
    let p = s
        .write(move |reg| {
            let target = user_id(reg, &id)?;
            if target != caller && !reg.user(caller)?.is_admin {
                return Err(Error::Permission("profiles are edited by their owner".into()));
            }
            reg.update_profile(target, update)?;
            reg.profile(target)
        })
        .await?;
    Ok(Json(json!(p)))
}

pub async fn follow(State(s): State<AppState>, Auth(caller): Auth, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let (target, changed) = s
        .write(move |reg| {
            let target = user_id(reg, &id)?;
            Ok((target, reg.follow_user(caller, target)?))
        })
        .await?;
    Ok(Json(
        json!({ "follower": caller, "followee": target, "changed": changed }),
    ))
}

#[derive(Deserialize, Default)]
pub struct BrowseQuery {
    collection: Option<String>,
    schema: Option<String>,
    subject: Option<String>,
    status: Option<String>,
    tag: Option<String>,
    contributor: Option<String>,
    page: Option<usize>,
    size: Option<usize>,
    format: Option<String>,
    include_versions: Option<bool>,
}

impl BrowseQuery {
    /// The filter, or `None` when a value names nothing that can exist, in
    /// which case the result is empty rather than an error.
    fn filter(&self) -> Option<BrowseFilter> {
        fn parsed<T: std::str::FromStr>(v: &Option<String>) -> Option<Option<T>> {
            match v.as_deref().map(str::trim).filter(|v| !v.is_empty()) {
                None => Some(None),
                Some(raw) => raw.parse().ok().map(Some),
            }
        }
        let nonempty = |v: &Option<String>| v.clone().filter(|v| !v.trim().is_empty());
        Some(BrowseFilter {
            collection: nonempty(&self.collection),
            schema: parsed::<SchemaId>(&self.schema)?,
            subject: nonempty(&self.subject),
            status: parsed::<Status>(&self.status)?,
            tag: nonempty(&self.tag),
            contributor: parsed::<UserId>(&self.contributor)?,
        })
    }
}

pub async fn browse(State(s): State<AppState>, Query(q): Query<BrowseQuery>) -> ApiResult<Json<BrowsePage>> {
    let page = Page::new(q.page.unwrap_or(1), q.size.unwrap_or(Page::default().size));
    let filter = q.filter();
    let result = s
        .read(move |reg| match filter {
            Some(f) => reg.browse(&f, page),
            None => reg.browse(&BrowseFilter::default(), page).map(|p| BrowsePage {
                total: 0,
                items: Vec::new(),
                ..p
            }),
        })
        .await?;
    Ok(Json(result))
}

pub async fn propose(
    State(s): State<AppState>,
    Auth(user): Auth,
    Body(new): Body<NewTerm>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let (term, iri) = s
        .write(move |reg| {
            let t = reg.propose_term(user, new)?;
            let iri = reg.ark_url(&t.ark);
            Ok((t, iri))
        })
        .await?;
    let mut body = json!(term);
    body["ark_url"] = json!(iri);
    Ok((StatusCode::CREATED, Json(body)))
}

pub async fn term_detail(State(s): State<AppState>, TermArk(ark): TermArk) -> ApiResult<Json<Value>> {
    // viewing records an interaction and may schedule an audit, so persist
    let (detail, iri) = s
        .write(move |reg| {
            let d = reg.term_detail(term_id(reg, &ark)?)?;
            let iri = reg.ark_url(&d.term.ark);
            Ok((d, iri))
        })
        .await?;
    let mut body = json!(detail);
    body["ark_url"] = json!(iri);
    Ok(Json(body))
}

pub async fn revise(
    State(s): State<AppState>,
    Auth(user): Auth,
    TermArk(ark): TermArk,
    Body(rev): Body<Revision>,
) -> ApiResult<Json<Value>> {
    let version = s
        .write(move |reg| reg.revise_term(user, term_id(reg, &ark)?, rev))
        .await?;
    Ok(Json(json!(version)))
}

#[derive(Deserialize)]
pub struct VoteBody {
    direction: Direction,
}

pub async fn vote(
    State(s): State<AppState>,
    Auth(user): Auth,
    TermArk(ark): TermArk,
    Body(v): Body<VoteBody>,
) -> ApiResult<Json<Value>> {
    let vote = s
        .write(move |reg| reg.record_vote(user, term_id(reg, &ark)?, v.direction))
        .await?;
    Ok(Json(json!(vote)))
}

#[derive(Deserialize)]
pub struct CommentBody {
    body: String,
    #[serde(default)]
    review_request: bool,
}

pub async fn comment(
    State(s): State<AppState>,
    Auth(user): Auth,
    TermArk(ark): TermArk,
    Body(c): Body<CommentBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let comment = s
        .write(move |reg| reg.add_comment(user, term_id(reg, &ark)?, &c.body, c.review_request))
        .await?;
    Ok((StatusCode::CREATED, Json(json!(comment))))
}

pub async fn comments(State(s): State<AppState>, TermArk(ark): TermArk) -> ApiResult<Json<Value>> {
    let list = s.read(move |reg| Ok(reg.comments(term_id(reg, &ark)?))).await?;
    Ok(Json(json!(list)))
}

pub async fn track(State(s): State<AppState>, Auth(user): Auth, TermArk(ark): TermArk) -> ApiResult<Json<Value>> {
    let (term, changed) = s
        .write(move |reg| {
            let t = term_id(reg, &ark)?;
            Ok((t, reg.track_term(user, t)?))
        })
        .await?;
    Ok(Json(json!({ "term": term, "changed": changed })))
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectBody {
    Term(String),
    Iri(String),
    Literal {
        value: String,
        #[serde(default)]
        datatype: Option<String>,
        #[serde(default)]
        language: Option<String>,
    },
}

#[derive(Deserialize)]
pub struct TripleBody {
    /// A term ARK or an absolute IRI.
    predicate: String,
    object: ObjectBody,
}

pub async fn add_triple(
    State(s): State<AppState>,
    Auth(user): Auth,
    TermArk(ark): TermArk,
    Body(t): Body<TripleBody>,
) -> ApiResult<Json<Value>> {
    let (triple, added) = s
        .write(move |reg| {
            let subject = term_id(reg, &ark)?;
            let predicate = if t.predicate.contains("ark:") {
                Predicate::Term(term_id(reg, &t.predicate)?)
            } else {
                Predicate::Iri(t.predicate)
            };
            let object = match t.object {
                ObjectBody::Term(a) => Object::Term(term_id(reg, &a)?),
                ObjectBody::Iri(i) => Object::Literal(Literal::any_uri(i)),
                ObjectBody::Literal {
                    value,
                    datatype,
                    language,
                } => Object::Literal(Literal {
                    value,
                    datatype: datatype.unwrap_or_else(|| XSD_STRING.to_string()),
                    language,
                }),
            };
            let triple = Triple {
                subject,
                predicate,
                object,
            };
            let added = reg.add_triple(user, triple.clone())?;
            Ok((triple, added))
        })
        .await?;
    Ok(Json(json!({ "triple": triple, "added": added })))
}

pub async fn lexemes(State(s): State<AppState>, TermArk(ark): TermArk) -> ApiResult<Json<Value>> {
    let set = s.read(move |reg| reg.lexemes(term_id(reg, &ark)?)).await?;
    Ok(Json(json!({ "lexemes": set })))
}

#[derive(Deserialize)]
pub struct ModeratorBody {
    moderator: String,
    group: TermGroup,
}

pub async fn assign_moderator(
    State(s): State<AppState>,
    Auth(user): Auth,
    Body(m): Body<ModeratorBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let a = s
        .write(move |reg| {
            let moderator = user_id(reg, &m.moderator)?;
            reg.assign_moderator(user, moderator, m.group)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(json!(a))))
}

pub async fn export(State(s): State<AppState>, Query(q): Query<BrowseQuery>) -> ApiResult<Response> {
    let format: ExportFormat = q
        .format
        .as_deref()
        .ok_or_else(|| Error::Validation("`format` is required (json, xml, rdf or skos)".into()))?
        .parse()?;
    let filter = q.filter();
    let include_versions = q.include_versions.unwrap_or(false);
    let doc = s
        .read(move |reg| {
            let filter = filter.unwrap_or_else(|| BrowseFilter {
                // nothing can match
                status: None,
                contributor: Some(UserId(0)),
                ..BrowseFilter::default()
            });
            reg.export(&ExportRequest {
                format,
                filter,
                include_versions,
            })
        })
        .await?;
    Ok(([(CONTENT_TYPE, format.media_type())], doc).into_response())
}

#[derive(Deserialize)]
pub struct ImportQuery {
    format: String,
    /// `schema` (default) or `records`.
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    source_url: Option<String>,
    #[serde(default)]
    schema: Option<String>,
    #[serde(default)]
    collection: Option<String>,
}

pub async fn import(
    State(s): State<AppState>,
    Auth(user): Auth,
    Query(q): Query<ImportQuery>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let format: Format = q.format.parse()?;
    let out = s
        .write(move |reg| match q.kind.as_deref().unwrap_or("schema") {
            "schema" => Ok(json!(reg.import_schema(
                user,
                &body,
                format,
                q.source_url.as_deref()
            )?)),
            "records" => {
                let schema = q
                    .schema
                    .as_deref()
                    .ok_or_else(|| Error::Validation("`schema` is required".into()))?;
                let collection = q
                    .collection
                    .as_deref()
                    .ok_or_else(|| Error::Validation("`collection` is required".into()))?;
                let schema = parse_id::<SchemaId>(schema, "schema").or_else(|_| {
                    reg.schemas()
                        .into_iter()
                        .find(|s| s.ark == schema || s.ark.ends_with(&format!("/{schema}")))
                        .map(|s| s.id)
                        .ok_or_else(|| Error::NotFound(format!("schema `{schema}`")))
                })?;
                Ok(json!(reg.import_records(user, &body, format, schema, collection)?))
            }
            other => Err(Error::Validation(format!("unknown import kind `{other}`"))),
        })
        .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

#[derive(Deserialize)]
pub struct SurveyBody {
    terms: Vec<String>,
    #[serde(default)]
    questions: Vec<String>,
    audience: Audience,
    #[serde(default)]
    closes_at: Option<Timestamp>,
}

pub async fn create_survey(
    State(s): State<AppState>,
    Auth(user): Auth,
    Body(b): Body<SurveyBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let survey = s
        .write(move |reg| {
            let terms = b.terms.iter().map(|a| term_id(reg, a)).collect::<Result<Vec<_>, _>>()?;
            reg.create_survey(user, terms, b.questions, b.audience, b.closes_at)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(json!(survey))))
}

#[derive(Deserialize)]
pub struct ResponseBody {
    term: String,
    rating: u8,
    #[serde(default)]
    comment: String,
    /// Survey link token, for link surveys.
    #[serde(default)]
    token: Option<String>,
    /// Name recorded for token-bearers without an account.
    #[serde(default)]
    name: Option<String>,
}

/// Accepts a session token, or for link surveys the survey token alone.
pub async fn respond_survey(
    State(s): State<AppState>,
    MaybeAuth(caller): MaybeAuth,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let parsed = serde_json::from_slice::<ResponseBody>(&body);
    let b = match (caller, parsed) {
        (None, Ok(b)) if b.token.as_deref().is_some_and(|t| !t.is_empty()) => b,
        (None, _) => return Err(ApiError::unauthenticated("a bearer token or survey token is required")),
        (Some(_), Ok(b)) => b,
        (Some(_), Err(e)) => return Err(ApiError::bad_request(e.to_string())),
    };
    let resp = s
        .write(move |reg| {
            let survey = parse_id::<SurveyId>(&id, "survey")?;
            let respondent = match caller {
                Some(id) => Respondent::User { id },
                None => Respondent::Token {
                    name: b
                        .name
                        .filter(|n| !n.trim().is_empty())
                        .unwrap_or_else(|| "anonymous".into()),
                },
            };
            let term = term_id(reg, &b.term)?;
            reg.respond_survey(survey, respondent, b.token.as_deref(), term, b.rating, &b.comment)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(json!(resp))))
}

pub async fn survey_results(
    State(s): State<AppState>,
    Auth(user): Auth,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let r = s
        .read(move |reg| reg.survey_results(user, parse_id(&id, "survey")?))
        .await?;
    Ok(Json(json!(r)))
}

pub async fn close_survey(
    State(s): State<AppState>,
    Auth(user): Auth,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    s.write(move |reg| reg.close_survey(user, parse_id(&id, "survey")?))
        .await?;
    Ok(Json(json!({ "closed": true })))
}

pub async fn notifications(State(s): State<AppState>, Auth(user): Auth) -> ApiResult<Json<Value>> {
    let feed = s.read(move |reg| reg.notifications_feed(user)).await?;
    Ok(Json(json!(feed)))
}

pub async fn digest(State(s): State<AppState>, Auth(user): Auth) -> ApiResult<Json<Value>> {
    let d = s.write(move |reg| reg.generate_digest(user)).await?;
    Ok(Json(json!({ "digest": d, "document": d.render() })))
}

#[derive(Deserialize)]
pub struct SuggestQuery {
    #[serde(default)]
    prefix: String,
    #[serde(default)]
    limit: Option<usize>,
}

pub async fn suggest_tags(State(s): State<AppState>, Query(q): Query<SuggestQuery>) -> ApiResult<Json<Value>> {
    let limit = q.limit.unwrap_or(10).min(100);
    let tags = s.read(move |reg| Ok(reg.suggest_tags(&q.prefix, limit))).await?;
    let tags: Vec<Value> = tags
        .into_iter()
        .map(|(tag, count)| json!({ "tag": tag, "count": count }))
        .collect();
    Ok(Json(json!({ "suggestions": tags })))
}

/// Audits every source and rescores everything. Administrators only.
pub async fn sweep(State(s): State<AppState>, Auth(user): Auth) -> ApiResult<Json<Value>> {
    let fetcher = s.fetcher.clone();
    let report = s
        .write(move |reg| {
            if !reg.user(user)?.is_admin {
                return Err(Error::Permission("only administrators start sweeps".into()));
            }
            reg.run_sweep(fetcher.as_ref())
        })
        .await?;
    Ok(Json(json!(report)))
}

/// Human-readable rendering of a resolver answer.
fn inflection_text(body: &InflectionBody) -> String {
    let statement = |st: &termreg_core::ark::PersistenceStatement| {
        let mut out = format!("{}\n{}\n", st.ark, st.statement_text);
        if let Some(s) = st.status {
            out.push_str(&format!("status: {s}\n"));
        }
        if let Some(v) = st.current_version {
            out.push_str(&format!("version: {v}\n"));
        }
        out
    };
    let meta = |out: &mut String, m: &termreg_core::ark::VersionMetadata| {
        for (k, v) in m.entries() {
            out.push_str(&format!("{k}: {v}\n"));
        }
    };
    match body {
        InflectionBody::Statement { statement: st } => statement(st),
        InflectionBody::StatementWithVersions {
            statement: st,
            version_metadata,
        } => {
            let mut out = statement(st);
            if let Some(m) = version_metadata {
                meta(&mut out, m);
            }
            out
        }
        InflectionBody::Version {
            version,
            version_metadata,
        } => {
            let mut out = format!(
                "version {}: {}\n{}\n",
                version.version, version.label, version.definition
            );
            meta(&mut out, version_metadata);
            out
        }
        InflectionBody::Record { .. } => serde_json::to_string_pretty(body).unwrap_or_default(),
    }
}

/// Resolver. No query returns the record; `?` the persistence statement;
/// `??` the statement plus version metadata; `?version=N` one version.
/// `Accept: text/plain` selects the human-readable form.
pub async fn resolve_ark(
    State(s): State<AppState>,
    Path((naan, name)): Path<(String, String)>,
    RawQuery(query): RawQuery,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let inflection = Inflection::from_query(query.as_deref())?;
    let ark = format!("ark:/{naan}/{name}");
    let body = s.read(move |reg| reg.inflect(&ark, inflection)).await?;
    let wants_text = headers
        .get(ACCEPT)
        .and_then(|a| a.to_str().ok())
        .is_some_and(|a| a.contains("text/plain") && !a.contains("application/json"));
    Ok(if wants_text {
        ([(CONTENT_TYPE, "text/plain; charset=utf-8")], inflection_text(&body)).into_response()
    } else {
        Json(body).into_response()
    })
}
