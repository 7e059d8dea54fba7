use std::ffi::{CStr, CString};
use std::ptr;

use paircd_ffi::*;

// X0 -> X1 -> X2 with every fifth X1 missing
fn chain(n: usize) -> Vec<f64> {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut noise = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v = Vec::with_capacity(3 * n);
    for i in 0..n {
        let x0 = 2.0 * noise();
        let x1 = x0 + noise();
        let x2 = x1 + noise();
        v.extend([x0, if i % 5 == 0 { f64::NAN } else { x1 }, x2]);
    }
    v
}

fn dataset(n: usize) -> *mut PaircdDataset {
    let values = chain(n);
    let mut ds = ptr::null_mut();
    let st = unsafe { paircd_dataset_from_values(values.as_ptr(), n, 3, &mut ds) };
    assert_eq!(st, PaircdStatus::Ok);
    ds
}

#[test]
fn dataset_counts() {
    let ds = dataset(100);
    unsafe {
        assert_eq!(paircd_dataset_n_rows(ds), 100);
        assert_eq!(paircd_dataset_n_cols(ds), 3);
        assert_eq!(paircd_dataset_missing_count(ds), 20);
        paircd_dataset_free(ds);
    }
}

#[test]
fn ci_test_is_deterministic() {
    let ds = dataset(200);
    let mut cache = ptr::null_mut();
    unsafe {
        assert_eq!(paircd_cache_build(ds, 3, 7, &mut cache), PaircdStatus::Ok);
        assert_eq!(paircd_cache_m(cache), 3);
        let mut cfg = paircd_ci_config_default(1);
        cfg.n_trees = 20;
        cfg.seed = 11;
        let cond = [1usize];
        let mut a = std::mem::zeroed::<PaircdCiResult>();
        let mut b = std::mem::zeroed::<PaircdCiResult>();
        assert_eq!(paircd_ci_test(cache, 0, 2, cond.as_ptr(), 1, &cfg, &mut a), PaircdStatus::Ok);
        assert_eq!(paircd_ci_test(cache, 0, 2, cond.as_ptr(), 1, &cfg, &mut b), PaircdStatus::Ok);
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        assert!((0.0..=1.0).contains(&a.p_value));
        assert_eq!(a.reject, a.p_value < cfg.alpha);

        // z == y is a contract violation
        let st = paircd_ci_test(cache, 0, 0, ptr::null(), 0, &cfg, &mut a);
        assert_ne!(st, PaircdStatus::Ok);
        assert!(!paircd_last_error().is_null());

        paircd_cache_free(cache);
        paircd_dataset_free(ds);
    }
}

#[test]
fn discover_chain_with_fisher_z() {
    let ds = dataset(500);
    let method = CString::new("fz_rubin").unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(paircd_discover(ds, method.as_ptr(), 0.01, 5, ptr::null(), &mut g), PaircdStatus::Ok);
        assert_eq!(paircd_graph_n_nodes(g), 3);
        assert_eq!(paircd_graph_n_edges(g), 2);
        assert_eq!(paircd_graph_edge(g, 0, 1), PaircdEdge::Undirected);
        assert_eq!(paircd_graph_edge(g, 1, 2), PaircdEdge::Undirected);
        assert_eq!(paircd_graph_edge(g, 0, 2), PaircdEdge::None);

        let mut json = ptr::null_mut();
        assert_eq!(paircd_graph_to_json(g, &mut json), PaircdStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        paircd_string_free(json);
        assert!(text.contains("X1"), "{text}");

        paircd_graph_free(g);
        paircd_dataset_free(ds);
    }
}

#[test]
fn unknown_method_is_rejected() {
    let ds = dataset(50);
    let method = CString::new("kci").unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        let st = paircd_discover(ds, method.as_ptr(), 0.05, 2, ptr::null(), &mut g);
        assert_eq!(st, PaircdStatus::InvalidArg);
        assert!(g.is_null());
        paircd_dataset_free(ds);
    }
}
