#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use adlsim_core::gateway::{
    mock_generate, BackendKind, ChatBackend, ChatRequest, ChatResponse, Gateway, GatewayError, DEFAULT_MODEL_ID,
};
use adlsim_core::scenario::*;
use adlsim_core::session::{Engine, EngineConfig, SteppingClock};
use adlsim_core::store::Store;
use async_trait::async_trait;
use chrono::{Duration, TimeZone, Utc};

/// Replays queued replies in order, then falls back to the mock generator.
#[derive(Default)]
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<Result<String, GatewayError>>>,
    pub requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn push(&self, reply: Result<&str, GatewayError>) {
        self.replies.lock().unwrap().push_back(reply.map(str::to_owned));
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.requests.lock().unwrap().push(req.clone());
        let next = self.replies.lock().unwrap().pop_front();
        let text = match next {
            Some(r) => r?,
            None => mock_generate(req),
        };
        Ok(ChatResponse { text, latency_ms: 0, backend: BackendKind::Mock, attempt_count: 1 })
    }
}

pub fn scenario(stage: DementiaStage, adl: AdlKind) -> ScenarioConfig {
    ScenarioConfig {
        stage,
        care_setting: CareSetting::known(CareSettingKind::OwnHome),
        setting_duration: SettingDuration::OverOneYear,
        adl: if adl == AdlKind::Other { Adl::other("watering plants") } else { Adl::known(adl) },
        challenges: None,
    }
}

pub fn engine_with(backend: Arc<dyn ChatBackend>, store: Arc<dyn Store>, max_turns: u32, seed: u64) -> Engine {
    Engine::builder(Gateway::new(backend, DEFAULT_MODEL_ID), store)
        .config(EngineConfig { max_turns, ..EngineConfig::default() })
        .clock(Arc::new(SteppingClock::new(Utc.timestamp_opt(1_700_000_000, 0).unwrap(), Duration::seconds(1))))
        .id_seed(seed)
        .build()
        .unwrap()
}

pub mod driver;
pub mod prompts;
pub mod fixtures;
