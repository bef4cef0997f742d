use std::collections::{BTreeMap, HashMap};
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gridnet::datasets::{
    dataset_load, make_digit_dataset, make_random_dataset, rebalance_classes,
    replace_class_with_random, Dataset, DatasetSummary, GlyphSet, VariantSpec,
    DEFAULT_RANDOM_DENSITY, NOT_A_DIGIT,
};
use gridnet::network::{model_load, model_save};
use gridnet::training::{
    evaluate, predict as predict_class, split, train, EpochRecord, EvalReport, Hyperparams,
    Prediction, SeedPlan, SplitDataset, DEFAULT_SPLIT_FRACTION,
};
use gridnet::viz::{
    activations_to_heatmap, prediction_caption, render_diagram, DiagramSpec, HeatmapData,
};
use gridnet::{Network, NetworkConfig, PixelGrid};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::mpsc;
use tokio_stream::wrappers::ReceiverStream;

use crate::error::{parse_body, parse_value, ApiError};
use crate::state::{default_class_names, lock, AppState, SessionStatus, SharedSession};

type ApiResult<T> = Result<T, ApiError>;

/// All `/api` routes over `state`.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/models", post(create_model).get(list_models))
        .route("/api/models/import", post(import_model))
        .route("/api/models/{id}", get(get_model))
        .route("/api/models/{id}/train", post(train_model))
        .route("/api/models/{id}/predict", post(predict))
        .route("/api/models/{id}/diagram", get(diagram))
        .route("/api/models/{id}/history", get(history))
        .route("/api/models/{id}/export", get(export))
        .route("/api/datasets", post(create_dataset).get(list_datasets))
        .route("/api/datasets/{id}", get(get_dataset))
        .route("/api/datasets/{id}/surgery", post(surgery))
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

pub(crate) async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed on this route",
    )
}

#[derive(Debug, Serialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub status: SessionStatus,
    pub config: NetworkConfig,
    pub class_names: Vec<String>,
    pub epochs_trained: usize,
}

fn model_info(session: &SharedSession) -> ModelInfo {
    let s = lock(session);
    ModelInfo {
        model_id: s.id.clone(),
        status: s.status,
        config: s.config.clone(),
        class_names: s.class_names.clone(),
        epochs_trained: s.history.len(),
    }
}

#[derive(Debug, Serialize)]
struct Created {
    model_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateModel {
    #[serde(default)]
    config: NetworkConfig,
    class_names: Option<Vec<String>>,
}

fn check_class_names(names: Option<Vec<String>>, outputs: usize) -> ApiResult<Vec<String>> {
    match names {
        None => Ok(default_class_names(outputs)),
        Some(names) if names.len() == outputs => Ok(names),
        Some(names) => Err(ApiError::bad_request(format!(
            "{} class names for a network with {outputs} outputs",
            names.len()
        ))
        .with_field("class_names")),
    }
}

async fn create_model(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateModel = parse_body(&body)?;
    let net = Network::new(req.config).map_err(|e| ApiError::from_lib(e, "config"))?;
    let names = check_class_names(req.class_names, net.output_units())?;
    let model_id = state.insert_model(net, names)?;
    Ok((StatusCode::CREATED, Json(Created { model_id })).into_response())
}

/// Accepts either a bare model document or `{"model": <document>, "class_names": [...]}`.
async fn import_model(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let value: Value = parse_body(&body)?;
    let (doc, names, prefix) = match value {
        Value::Object(mut map) if map.contains_key("model") => {
            let names =
                match map.remove("class_names") {
                    None | Some(Value::Null) => None,
                    Some(v) => Some(serde_json::from_value::<Vec<String>>(v).map_err(|e| {
                        ApiError::bad_request(e.to_string()).with_field("class_names")
                    })?),
                };
            (map.remove("model").unwrap_or(Value::Null), names, "model")
        }
        other => (other, None, ""),
    };
    let net = model_load(&doc.to_string()).map_err(|e| ApiError::from_lib(e, prefix))?;
    let names = check_class_names(names, net.output_units())?;
    let model_id = state.insert_model(net, names)?;
    Ok((StatusCode::CREATED, Json(Created { model_id })).into_response())
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelInfo>> {
    Json(state.models().iter().map(model_info).collect())
}

async fn get_model(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<ModelInfo>> {
    Ok(Json(model_info(&state.model(&id)?)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HyperparamsBody {
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    shuffle_seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    dataset_id: String,
    fraction: Option<f64>,
    split_seed: Option<u64>,
    #[serde(default)]
    hyperparams: HyperparamsBody,
}

/// Final event of a training stream.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainSummary {
    pub model_id: String,
    pub dataset_id: String,
    pub fraction: f64,
    pub split_seed: u64,
    pub hyperparams: Hyperparams,
    pub epochs: usize,
    pub final_epoch: EpochRecord,
    pub train_eval: EvalReport,
    pub validation_eval: EvalReport,
}

struct TrainJob {
    state: AppState,
    session: SharedSession,
    network: Network,
    split: SplitDataset,
    hp: Hyperparams,
    summary_head: (String, String, u64),
}

/// Starts training and streams `epoch` events followed by one `summary`
/// (or `error`) event. Seeds default to those derived from the model's
/// config seed, the same derivation the command-line `train` uses.
async fn train_model(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: TrainRequest = parse_body(&body)?;
    let session = state.model(&id)?;
    let ds = state.dataset(&req.dataset_id)?;

    let job = {
        let mut s = lock(&session);
        let outputs = s.network()?.output_units();
        if ds.classes().len() != outputs {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "class_mismatch",
                format!(
                    "dataset {:?} has {} classes but the model has {outputs} outputs",
                    req.dataset_id,
                    ds.classes().len()
                ),
            )
            .with_field("dataset_id"));
        }
        let plan = SeedPlan::from_seed(s.config.seed);
        let defaults = Hyperparams::default();
        let hp = Hyperparams {
            learning_rate: req
                .hyperparams
                .learning_rate
                .unwrap_or(defaults.learning_rate),
            epochs: req.hyperparams.epochs.unwrap_or(defaults.epochs),
            batch_size: req.hyperparams.batch_size.unwrap_or(defaults.batch_size),
            shuffle_seed: req.hyperparams.shuffle_seed.unwrap_or(plan.shuffle),
        };
        hp.validate()
            .map_err(|e| ApiError::from_lib(e, "hyperparams"))?;
        let fraction = req.fraction.unwrap_or(DEFAULT_SPLIT_FRACTION);
        let split_seed = req.split_seed.unwrap_or(plan.split);
        let parts = split(&ds, fraction, split_seed)
            .map_err(|e| ApiError::from_lib(e, "").with_field("fraction"))?;
        if parts.train.is_empty() {
            return Err(
                ApiError::bad_request("the training partition is empty").with_field("fraction")
            );
        }
        let network = s.begin_training()?;
        s.class_names = ds.classes().to_vec();
        TrainJob {
            state: state.clone(),
            session: session.clone(),
            network,
            split: parts,
            hp,
            summary_head: (id, req.dataset_id, split_seed),
        }
    };

    let (tx, rx) = mpsc::channel::<Result<Event, Infallible>>(64);
    tokio::task::spawn_blocking(move || run_training(job, tx));
    Ok(Sse::new(ReceiverStream::new(rx))
        .keep_alive(KeepAlive::default())
        .into_response())
}

fn json_event(name: &str, data: &impl Serialize) -> Event {
    Event::default()
        .event(name)
        .json_data(data)
        .expect("event payload serializes")
}

fn run_training(job: TrainJob, tx: mpsc::Sender<Result<Event, Infallible>>) {
    let TrainJob {
        state,
        session,
        mut network,
        split,
        hp,
        summary_head: (model_id, dataset_id, split_seed),
    } = job;

    let mut observer = |record: &EpochRecord| {
        lock(&session).record_epoch(*record);
        // A disconnected client does not stop training.
        let _ = tx.blocking_send(Ok(json_event("epoch", record)));
    };
    let outcome = train(&mut network, &split, &hp, Some(&mut observer)).and_then(|history| {
        Ok(TrainSummary {
            model_id,
            dataset_id,
            fraction: split.fraction,
            split_seed,
            hyperparams: hp,
            epochs: history.len(),
            final_epoch: *history.last().expect("epochs > 0"),
            train_eval: evaluate(&network, &split.train)?,
            validation_eval: evaluate(&network, &split.validation)?,
        })
    });

    {
        let mut s = lock(&session);
        s.finish_training(network);
        if let Err(e) = state.persist_session(&s) {
            eprintln!("failed to persist {}: {}", s.id, e.message);
        }
    }
    let event = match outcome {
        Ok(summary) => json_event("summary", &summary),
        Err(e) => json_event("error", &ApiError::from_lib(e, "")),
    };
    let _ = tx.blocking_send(Ok(event));
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    pixels: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictResponse {
    pub prediction: Prediction,
    pub activations: HeatmapData,
    pub probabilities: Vec<f64>,
}

fn parse_grid(pixels: &[f64], field: &str) -> ApiResult<PixelGrid> {
    PixelGrid::new(pixels).map_err(|e| ApiError::from_lib(e, "").with_field(field))
}

async fn predict(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<PredictResponse>> {
    let req: PredictRequest = parse_body(&body)?;
    let session = state.model(&id)?;
    let s = lock(&session);
    let net = s.network()?;
    let grid = parse_grid(&req.pixels, "pixels")?;
    let prediction =
        predict_class(net, &grid, &s.class_names).map_err(|e| ApiError::from_lib(e, ""))?;
    let activations = activations_to_heatmap(&net.forward(&grid));
    Ok(Json(PredictResponse {
        probabilities: prediction.probabilities.clone(),
        prediction,
        activations,
    }))
}

fn parse_csv(text: &str, field: &str) -> ApiResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                ApiError::bad_request(format!("{t:?} is not a number")).with_field(field)
            })
        })
        .collect()
}

/// Activation diagram for `?dataset_pixels=` (alias `pixels`), a comma
/// separated list of 36 values. Without it the input is all zeros.
async fn diagram(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(query) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let grid = match query
        .get("dataset_pixels")
        .map(|v| ("dataset_pixels", v))
        .or_else(|| query.get("pixels").map(|v| ("pixels", v)))
    {
        Some((field, csv)) => parse_grid(&parse_csv(csv, field)?, field)?,
        None => PixelGrid::zeros(),
    };
    let session = state.model(&id)?;
    let s = lock(&session);
    let net = s.network()?;
    let prediction =
        predict_class(net, &grid, &s.class_names).map_err(|e| ApiError::from_lib(e, ""))?;
    let caption = prediction_caption("input", &prediction);
    let svg = render_diagram(&net.forward(&grid), &DiagramSpec::default(), Some(&caption))
        .map_err(|e| ApiError::from_lib(e, ""))?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

/// Epochs completed so far; readable during training.
async fn history(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<EpochRecord>>> {
    let session = state.model(&id)?;
    let snapshot = lock(&session).history.epochs.clone();
    Ok(Json(snapshot))
}

async fn export(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let session = state.model(&id)?;
    let doc = model_save(lock(&session).network()?);
    Ok(([(header::CONTENT_TYPE, "application/json")], doc).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DigitsRequest {
    #[allow(dead_code)]
    kind: String,
    per_class: Option<usize>,
    flip_prob: Option<f64>,
    shift_max: Option<usize>,
    #[serde(default)]
    seed: u64,
}

/// A single-class set of random images.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomRequest {
    #[allow(dead_code)]
    kind: String,
    per_class: Option<usize>,
    density: Option<f64>,
    #[serde(default)]
    seed: u64,
    name: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRequest {
    #[allow(dead_code)]
    kind: String,
    document: Value,
}

/// Reads the discriminator `tag` of a request object.
fn tag_of<'a>(value: &'a Value, tag: &str, allowed: &[&str]) -> ApiResult<&'a str> {
    let found = value.get(tag).and_then(Value::as_str);
    match found {
        Some(t) if allowed.contains(&t) => Ok(t),
        _ => Err(
            ApiError::bad_request(format!("{tag} must be one of: {}", allowed.join(", ")))
                .with_field(tag),
        ),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetCreated {
    pub dataset_id: String,
    pub summary: DatasetSummary,
}

fn build_dataset(req: Value) -> ApiResult<Dataset> {
    match tag_of(&req, "kind", &["digits", "random", "document"])? {
        "digits" => {
            let r: DigitsRequest = parse_value(req)?;
            let d = VariantSpec::default();
            let spec = VariantSpec {
                per_class: r.per_class.unwrap_or(d.per_class),
                flip_prob: r.flip_prob.unwrap_or(d.flip_prob),
                shift_max: r.shift_max.unwrap_or(d.shift_max),
                seed: r.seed,
            };
            make_digit_dataset(&GlyphSet::standard(), &spec).map_err(|e| ApiError::from_lib(e, ""))
        }
        "random" => {
            let r: RandomRequest = parse_value(req)?;
            let n = r.per_class.unwrap_or(VariantSpec::default().per_class);
            let class = r.name.as_deref().unwrap_or(NOT_A_DIGIT);
            make_random_dataset(
                n,
                r.density.unwrap_or(DEFAULT_RANDOM_DENSITY),
                r.seed,
                class,
            )
            .map_err(|e| ApiError::from_lib(e, ""))
        }
        _ => {
            let r: DocumentRequest = parse_value(req)?;
            dataset_load(&r.document.to_string()).map_err(|e| ApiError::from_lib(e, "document"))
        }
    }
}

fn created(state: &AppState, ds: Dataset) -> ApiResult<Response> {
    let summary = ds.summary();
    let dataset_id = state.insert_dataset(ds)?;
    Ok((
        StatusCode::CREATED,
        Json(DatasetCreated {
            dataset_id,
            summary,
        }),
    )
        .into_response())
}

async fn create_dataset(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: Value = parse_body(&body)?;
    created(&state, build_dataset(req)?)
}

#[derive(Debug, Serialize)]
struct ExampleView<'a> {
    pixels: &'a PixelGrid,
    class_index: usize,
}

#[derive(Debug, Serialize)]
struct DatasetView<'a> {
    dataset_id: &'a str,
    summary: DatasetSummary,
    examples: Vec<ExampleView<'a>>,
}

async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetCreated>> {
    Json(
        state
            .datasets()
            .into_iter()
            .map(|(dataset_id, ds)| DatasetCreated {
                dataset_id,
                summary: ds.summary(),
            })
            .collect(),
    )
}

async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let ds = state.dataset(&id)?;
    let view = DatasetView {
        dataset_id: &id,
        summary: ds.summary(),
        examples: ds
            .examples()
            .iter()
            .map(|e| ExampleView {
                pixels: &e.image,
                class_index: e.class_index,
            })
            .collect(),
    };
    Ok(Json(view).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplaceClassRequest {
    #[allow(dead_code)]
    op: String,
    class_index: usize,
    new_name: Option<String>,
    density: Option<f64>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RebalanceRequest {
    #[allow(dead_code)]
    op: String,
    proportions: BTreeMap<usize, f64>,
    #[serde(default)]
    seed: u64,
}

/// Applies a surgery and registers the result under a new id; the source is never modified.
async fn surgery(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: Value = parse_body(&body)?;
    let ds: Arc<Dataset> = state.dataset(&id)?;
    let out = match tag_of(&req, "op", &["replace_class", "rebalance"])? {
        "replace_class" => {
            let r: ReplaceClassRequest = parse_value(req)?;
            replace_class_with_random(
                &ds,
                r.class_index,
                r.new_name.as_deref().unwrap_or(NOT_A_DIGIT),
                r.density.unwrap_or(DEFAULT_RANDOM_DENSITY),
                r.seed,
            )
        }
        _ => {
            let r: RebalanceRequest = parse_value(req)?;
            rebalance_classes(&ds, &r.proportions, r.seed)
        }
    }
    .map_err(|e| ApiError::from_lib(e, ""))?;
    created(&state, out)
}
