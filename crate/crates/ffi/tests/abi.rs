use std::ffi::{CStr, CString};
use std::ptr;

use selectivbench_ffi::*;

fn last_error() -> String {
    let p = sb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny_grammar() -> *mut SbGrammar {
    let mut g = ptr::null_mut();
    let s = unsafe { sb_grammar_build(4, 2, 0.1, 0.1, 7, &mut g) };
    assert_eq!(s, SbStatus::Ok, "{}", last_error());
    g
}

#[test]
fn grammar_round_trip() {
    let g = tiny_grammar();
    unsafe {
        assert_eq!(sb_grammar_vocab_size(g), 5);
        assert_eq!(sb_grammar_latent_count(g), 8);
        let mut ok = false;
        assert_eq!(sb_grammar_validate(g, &mut ok), SbStatus::Ok);
        assert!(ok);
        let mut h = f64::NAN;
        assert_eq!(sb_grammar_topological_entropy(g, &mut h), SbStatus::Ok);
        assert!(h.is_finite() && h >= 0.0);

        let mut json = ptr::null_mut();
        assert_eq!(sb_grammar_to_json(g, &mut json), SbStatus::Ok);
        let mut g2 = ptr::null_mut();
        assert_eq!(sb_grammar_from_json(json, &mut g2), SbStatus::Ok);
        let mut json2 = ptr::null_mut();
        assert_eq!(sb_grammar_to_json(g2, &mut json2), SbStatus::Ok);
        assert_eq!(CStr::from_ptr(json), CStr::from_ptr(json2));
        sb_string_free(json);
        sb_string_free(json2);
        sb_grammar_free(g2);
        sb_grammar_free(g);
    }
}

#[test]
fn generated_data_certifies() {
    let g = tiny_grammar();
    unsafe {
        let mut cfg = sb_task_config_default();
        cfg.t_min = 2;
        cfg.t_max = 20;
        cfg.num_sequences = 30;
        let mut d = ptr::null_mut();
        assert_eq!(sb_dataset_generate(g, &cfg, &mut d), SbStatus::Ok, "{}", last_error());
        assert_eq!(sb_dataset_sequence_count(d), 30);
        assert!(sb_dataset_token_count(d) >= 30);
        let mut r = SbOracleResult::default();
        assert_eq!(sb_oracle_eval(g, d, &mut r), SbStatus::Ok);
        assert!(r.certified);
        assert_eq!(r.mismatches, 0);
        assert_eq!(r.accuracy_all, 1.0);
        sb_dataset_free(d);
        sb_grammar_free(g);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(sb_grammar_build(4, 2, 0.1, 0.1, 7, ptr::null_mut()), SbStatus::NullPointer);
        assert!(last_error().contains("out"));
        assert_eq!(sb_grammar_build(0, 2, 0.1, 0.1, 7, &mut g), SbStatus::InvalidConfig);
        assert!(g.is_null());

        let bad = CString::new("{not json").unwrap();
        assert_eq!(sb_grammar_from_json(bad.as_ptr(), &mut g), SbStatus::Format);

        let grammar = tiny_grammar();
        let mut cfg = sb_task_config_default();
        cfg.split = 9;
        let mut d = ptr::null_mut();
        assert_eq!(sb_dataset_generate(grammar, &cfg, &mut d), SbStatus::InvalidArgument);
        assert!(d.is_null());
        sb_grammar_free(grammar);

        // null handles are inert
        sb_grammar_free(ptr::null_mut());
        sb_dataset_free(ptr::null_mut());
        sb_string_free(ptr::null_mut());
        assert_eq!(sb_grammar_vocab_size(ptr::null()), 0);
    }
}

#[test]
fn parameter_counts() {
    let call = |name: &str, f: unsafe extern "C" fn(*const i8, usize, usize, usize, usize, usize, *mut u64) -> SbStatus, ds: usize| {
        let name = CString::new(name).unwrap();
        let mut out = 0u64;
        let s = unsafe { f(name.as_ptr(), 1296, 16, ds, 4, 2, &mut out) };
        (s, out)
    };
    assert_eq!(call("deltanet", sb_gate_params, 64), (SbStatus::Ok, 1_700_352));
    assert_eq!(call("mamba2", sb_gate_params, 128), (SbStatus::Ok, 41_472));
    assert_eq!(call("gated-deltaproduct", sb_gate_params, 64), (SbStatus::Ok, 6_801_408));
    assert_eq!(call("linear-attention", sb_state_size, 64), (SbStatus::Ok, 104_976));
    assert_eq!(call("gla", sb_state_size, 64), (SbStatus::Ok, 52_488));
    assert_eq!(call("softmax-attention", sb_state_size, 64).0, SbStatus::InvalidArgument);
    assert_eq!(call("lstm", sb_gate_params, 64).0, SbStatus::InvalidConfig);
    assert!(last_error().contains("lstm"));
}

#[test]
fn header_lists_every_entry_point() {
    let header = include_str!("../include/selectivbench.h");
    for name in [
        "sb_last_error_message",
        "sb_grammar_build",
        "sb_grammar_from_json",
        "sb_grammar_to_json",
        "sb_grammar_free",
        "sb_dataset_generate",
        "sb_oracle_eval",
        "sb_gate_params",
        "sb_state_size",
        "SB_STATUS_PANIC",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
