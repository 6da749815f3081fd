use std::net::{IpAddr, Ipv4Addr};

use shuttlelab_core::pipeline::{analyze, AnalyzeOptions};
use shuttlelab_core::synth::{generate, SynthConfig};
use shuttlelab_core::MatchBundle;
use shuttlelab_service::{bind, load_bundles, ServeConfig, ServiceError, BUNDLE_FILE};

fn unfitted(seed: u64) -> MatchBundle {
    let m = generate(&SynthConfig {
        seed,
        rallies: 2,
        ..Default::default()
    })
    .unwrap();
    let opts = AnalyzeOptions {
        fit: false,
        ..Default::default()
    };
    analyze(&m.raw().unwrap(), &opts).unwrap()
}

fn config(dir: &std::path::Path, port: u16) -> ServeConfig {
    ServeConfig {
        data_dir: dir.to_path_buf(),
        video_dir: None,
        static_dir: None,
        bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
        port,
    }
}

#[test]
fn loads_flat_and_nested_bundles() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.json"), unfitted(1).to_json().unwrap()).unwrap();
    std::fs::create_dir(dir.path().join("two")).unwrap();
    std::fs::write(
        dir.path().join("two").join(BUNDLE_FILE),
        unfitted(2).to_json().unwrap(),
    )
    .unwrap();
    let ids: Vec<String> = load_bundles(dir.path())
        .unwrap()
        .into_iter()
        .map(|b| b.match_id)
        .collect();
    assert_eq!(ids, ["synth-1", "synth-2"]);
}

#[test]
fn load_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_bundles(dir.path()),
        Err(ServiceError::NoBundles(_))
    ));
    assert!(matches!(
        load_bundles(&dir.path().join("absent")),
        Err(ServiceError::MissingDataDir(_))
    ));

    std::fs::write(dir.path().join("a.json"), unfitted(1).to_json().unwrap()).unwrap();
    std::fs::write(dir.path().join("b.json"), unfitted(1).to_json().unwrap()).unwrap();
    assert!(matches!(
        load_bundles(dir.path()),
        Err(ServiceError::DuplicateMatch(_))
    ));

    std::fs::write(dir.path().join("b.json"), "{not json").unwrap();
    assert!(matches!(
        load_bundles(dir.path()),
        Err(ServiceError::UnreadableBundle { .. })
    ));
}

#[tokio::test]
async fn busy_port_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.json"), unfitted(1).to_json().unwrap()).unwrap();
    let (addr, server) = bind(&config(dir.path(), 0)).await.unwrap();
    let handle = tokio::spawn(server);
    let err = bind(&config(dir.path(), addr.port())).await.err().unwrap();
    assert!(matches!(err, ServiceError::Bind { .. }), "{err}");
    handle.abort();
}
