use std::process::Command;
use std::sync::Arc;

use adlsim_core::export::{ExportFormat, CSV_COLUMNS};
use adlsim_core::gateway::Gateway;
use adlsim_core::scenario::{Adl, AdlKind, CareSetting, CareSettingKind, DementiaStage, ScenarioConfig, SettingDuration};
use adlsim_core::session::{CaregiverInput, Engine, EngineConfig};
use adlsim_core::store::JsonlStore;
use tempfile::TempDir;

fn adlsim(dir: &TempDir, args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_adlsim"))
        .arg("--data-dir")
        .arg(dir.path())
        .args(args)
        .env_remove("ADLSIM_API_KEY")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

async fn seed_log(dir: &TempDir) -> String {
    let store = Arc::new(JsonlStore::open(dir.path()).unwrap());
    let engine = Engine::builder(Gateway::mock(), store)
        .config(EngineConfig { max_turns: 3, ..EngineConfig::default() })
        .build()
        .unwrap();
    let id = engine.create_session().await.unwrap();
    let scenario = ScenarioConfig {
        stage: DementiaStage::Early,
        care_setting: CareSetting::known(CareSettingKind::Hospital),
        setting_duration: SettingDuration::UnderOneMonth,
        adl: Adl::known(AdlKind::Dressing),
        challenges: None,
    };
    engine.start_simulation(&id, scenario).await.unwrap();
    for _ in 0..3 {
        engine.submit_rating(&id, 4, None).await.unwrap();
        engine.submit_caregiver(&id, CaregiverInput::FreeText { text: "Arms up, please.".into() }).await.unwrap();
    }
    id.to_string()
}

#[tokio::test]
async fn report_export_and_annotate_commands() {
    let dir = TempDir::new().unwrap();
    let id = seed_log(&dir).await;

    let (ok, out, err) = adlsim(&dir, &["report"]);
    assert!(ok, "{err}");
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["totals"]["patient_turns"], 3);

    let (ok, out, _) = adlsim(&dir, &["report", "--format", "text"]);
    assert!(ok);
    assert!(out.contains("Realism by ADL x stage"));

    let (ok, out, err) = adlsim(&dir, &["export", &id, "1", "--format", "csv"]);
    assert!(ok, "{err}");
    assert!(out.starts_with(&CSV_COLUMNS.join(",")));
    assert_eq!(out.lines().count(), 4);

    let file = dir.path().join(format!("{id}_1.{}", ExportFormat::Txt.extension()));
    let (ok, _, err) = adlsim(&dir, &["export", &id, "1", "--out", file.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert_eq!(std::fs::read_to_string(&file).unwrap().lines().filter(|l| l.contains(" CAREGIVER: ")).count(), 3);

    let (ok, out, err) = adlsim(&dir, &["annotate", &id, "1", "2", "overcompliance", "stage_mismatch"]);
    assert!(ok, "{err}");
    assert!(out.contains("[stage_mismatch, overcompliance]"), "{out}");
    let (_, out, _) = adlsim(&dir, &["report"]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["failure_modes"]["commented_turns"], 1);

    let (ok, _, err) = adlsim(&dir, &["annotate", &id, "1", "2", "bogus"]);
    assert!(!ok);
    assert!(err.contains("unknown failure code"));
    let (ok, _, err) = adlsim(&dir, &["export", &id, "7"]);
    assert!(!ok);
    assert!(err.contains("no simulation 7"), "{err}");
}
