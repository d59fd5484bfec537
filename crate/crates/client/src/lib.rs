//! Thin async client for the token pruning service.

use serde::de::DeserializeOwned;
use serde::Serialize;
use tokprune_core::api::{
    CalibrateRequest, CalibrateResponse, ErrorBody, ForwardResponse, FrameRequest, FrameResponse, PenaltyRequest,
    PenaltyResponse, PruneVizResponse, RunRequest, ScheduleResponse, SessionRequest, SessionResponse, VerifyRequest,
    VerifyResponse,
};
use tokprune_core::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server returned {status}: {message}")]
    Api { status: u16, message: String },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(ClientError::Api { status: status.as_u16(), message })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        Self::decode(resp).await
    }

    pub async fn health(&self) -> Result<bool> {
        let resp = self.http.get(format!("{}/health", self.base)).send().await?;
        Ok(resp.status().is_success())
    }

    pub async fn schedule(&self, req: &RunRequest) -> Result<ScheduleResponse> {
        self.post("/v1/schedule", req).await
    }

    pub async fn forward(&self, req: &RunRequest) -> Result<ForwardResponse> {
        self.post("/v1/forward", req).await
    }

    pub async fn prune_viz(&self, req: &RunRequest) -> Result<PruneVizResponse> {
        self.post("/v1/prune-viz", req).await
    }

    pub async fn calibrate(&self, req: &CalibrateRequest) -> Result<CalibrateResponse> {
        self.post("/v1/calibrate", req).await
    }

    pub async fn verify(&self, req: &VerifyRequest) -> Result<VerifyResponse> {
        self.post("/v1/verify", req).await
    }

    pub async fn penalty(&self, score_map: Matrix) -> Result<Matrix> {
        let r: PenaltyResponse = self.post("/v1/penalty", &PenaltyRequest { score_map }).await?;
        Ok(r.score_map)
    }

    pub async fn create_session(&self, req: &SessionRequest) -> Result<SessionResponse> {
        self.post("/v1/sessions", req).await
    }

    pub async fn frame(&self, session: &str, frame_index: u64, confidence: f64) -> Result<FrameResponse> {
        self.post(&format!("/v1/sessions/{session}/frames"), &FrameRequest { frame_index, confidence }).await
    }

    pub async fn close_session(&self, session: &str) -> Result<()> {
        let resp = self.http.delete(format!("{}/v1/sessions/{session}", self.base)).send().await?;
        if resp.status().is_success() {
            Ok(())
        } else {
            let status = resp.status().as_u16();
            Err(ClientError::Api { status, message: resp.text().await.unwrap_or_default() })
        }
    }
}
