use std::path::PathBuf;

use depscreen_core::backend::{BackendConfig, ExternalEncoder};
use depscreen_core::dataset::SplitTag;
use depscreen_core::synthetic::separable;
use depscreen_core::trainer::{train_one, TrialConfig};
use depscreen_core::{Encoder, TokenBudgetPlan, Tokenizer};

fn command() -> Vec<String> {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/external_encoder.py");
    vec!["python3".into(), script.display().to_string()]
}

#[test]
fn speaks_the_protocol() {
    let enc = ExternalEncoder::spawn(&command()).unwrap();
    assert_eq!(enc.dim(), 4);
    assert_eq!(enc.tokenize("ab cde f").unwrap().as_slice(), &[2, 3, 1]);
    assert_eq!(enc.encode(&[2, 4]).unwrap(), vec![0.2, 3.0, 2.0, 1.0]);
    assert!(!enc.is_trainable());
}

#[test]
fn trains_a_head_through_the_adapter() {
    let backend = BackendConfig::External { command: command(), n_special: 2 }.build().unwrap();
    assert_eq!(backend.n_special(), 2);
    let train = separable([6, 6, 6], 1, SplitTag::Train);
    let dev = separable([3, 3, 3], 2, SplitTag::Dev);
    let cfg = TrialConfig {
        learning_rate: 0.01,
        warmup_steps: 0,
        max_epochs: 2,
        truncation: TokenBudgetPlan::new(32, 2, 0.5).unwrap(),
        ..TrialConfig::default()
    };
    let r = train_one(&cfg, &train, &dev, backend.as_ref()).unwrap();
    assert_eq!(r.predictions.len(), dev.len());
}

#[test]
fn missing_program_is_an_error() {
    assert!(ExternalEncoder::spawn(&["/nonexistent/encoder".to_string()]).is_err());
}
