use std::path::PathBuf;

use eccnet::reference::{check_reference, read_reference, REFERENCE_FILE};
use eccnet::weights::load_bundle;
use eccnet_core::backbone::{ChannelOrder, PoolMode};

fn bundle() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/torch_narrow")
}

#[test]
fn layer17_matches_torch() {
    let w = load_bundle(&bundle()).unwrap();
    assert_eq!(w.manifest.preprocessing.channel_order, ChannelOrder::Bgr);
    assert_eq!(w.manifest.entries.len(), 26);
    let r = read_reference(&bundle().join(REFERENCE_FILE)).unwrap();
    assert_eq!(r.pooling, PoolMode::Uniform);
    assert_eq!(r.layer17.shape, [24, 4, 3]);
    let c = check_reference(&w.backbone, &r).unwrap();
    assert!(c.preprocess_max_abs <= 1e-5, "{c:?}");
    assert!(c.layer17_max_rel <= 1e-4, "{c:?}");
}

#[test]
fn blob_digest_is_stable() {
    let a = load_bundle(&bundle()).unwrap();
    let b = load_bundle(&bundle()).unwrap();
    assert_eq!(a.blob_sha256, b.blob_sha256);
    assert_eq!(a.blob_sha256.len(), 64);
}
