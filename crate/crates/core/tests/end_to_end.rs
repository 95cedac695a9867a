use wafersim::formats::mtx::{load_matrix_market, save_matrix_market};
use wafersim::formats::KernelConfig;
use wafersim::harness::{run_sweep, KernelKind, RunRecord, SweepSpec};
use wafersim::oracle::{compare, random_dense, random_sparse, spmm_ref};
use wafersim::spmm::{spmm, RunOptions, Variant};
use wafersim::{Error, Exec};

#[test]
fn matrix_market_file_through_spmm() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    let a = random_sparse(300, 0.02, 11).unwrap();
    save_matrix_market(&a, &path).unwrap();
    let back = load_matrix_market(&path).unwrap();
    assert_eq!(back, a);
    let h = random_dense(300, 16, 12);
    let cfg = KernelConfig::spmm(300, 16, 128, 64).with_mcpp(4);
    let want = spmm_ref(&a, &h).unwrap();
    for v in Variant::ALL {
        let (y, r) = spmm(v, &back, &h, &cfg).unwrap();
        assert!(compare(&y, &want, 1e-4, 1e-6).unwrap().pass, "{v}");
        assert_eq!(r.d2h_words, 300 * 16);
    }
}

#[test]
fn memory_budget_rejects_large_chunk() {
    let a = random_sparse(64, 0.1, 1).unwrap();
    let h = random_dense(64, 4, 2);
    let cfg = KernelConfig::spmm(64, 4, 16384, 64);
    assert!(matches!(spmm(Variant::V2, &a, &h, &cfg), Err(Error::MemoryBudget { .. })));
}

#[test]
fn records_serialize_and_repeat_draws_new_instances() {
    let spec = SweepSpec {
        kernels: vec![KernelKind::Spmm],
        n: vec![96],
        density: vec![0.05],
        d: vec![4],
        myc: vec![32],
        mvpp: vec![16],
        variants: vec![Variant::V3],
        repeat: 3,
        verify: true,
        ..Default::default()
    };
    let recs = run_sweep(&spec, RunOptions::default(), Exec::Parallel).unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r.oracle_pass == Some(true)));
    assert_ne!(recs[0].checksum, recs[1].checksum);
    for r in &recs {
        let text = serde_json::to_string(r).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["variant", "n", "d", "density", "myc", "mvpp", "mcpp", "h2d_words", "d2h_words", "fmacs", "oracle_pass"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(serde_json::from_str::<RunRecord>(&text).unwrap(), *r);
    }
}
