//! Drives the C surface the way a foreign caller would: handles, status
//! codes, and the last-error channel.

use std::ffi::{CStr, CString};

use anie_ffi::*;

#[test]
fn version_is_non_empty() {
    let v = unsafe { CStr::from_ptr(anie_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn simulate_fit_query_roundtrip() {
    let events = anie_simulate_dsbm(20, 8.0, 2.0, 0.5, 0.75, 7);
    assert!(!events.is_null());
    unsafe {
        assert_eq!(anie_events_n_nodes(events), 20);
        assert!(anie_events_len(events) > 0);

        let model = anie_fit(events, 4, 2, 0.05, 1);
        assert!(!model.is_null(), "fit failed");
        assert_eq!(anie_model_rank(model), 2);
        assert_eq!(anie_model_n_nodes(model), 20);

        let mut value = f64::NAN;
        let status = anie_model_intensity(model, 0, 1, 0.25, &mut value);
        assert_eq!(status, AnieStatus::Ok);
        assert!(value.is_finite());

        // Out-of-domain time reports usage and leaves a message.
        let status = anie_model_intensity(model, 0, 1, 1.5, &mut value);
        assert_eq!(status, AnieStatus::Usage);
        let msg = anie_last_error_message();
        assert!(!msg.is_null());
        anie_string_free(msg);

        let mut sv = [0.0f64; 16];
        let mut written = 0usize;
        let status = anie_model_singular_values(model, sv.as_mut_ptr(), sv.len(), &mut written);
        assert_eq!(status, AnieStatus::Ok);
        assert!(written >= 2);
        assert!(sv[0] >= sv[1]);

        let mut scores = [0.0f64; 8];
        let status =
            anie_model_anomaly_scores(model, 3, 1, scores.as_mut_ptr(), scores.len(), &mut written);
        assert_eq!(status, AnieStatus::Ok);
        assert_eq!(written, 8);
        assert!(scores.iter().all(|&s| s >= 0.0));

        anie_model_free(model);
        anie_events_free(events);
    }
}

#[test]
fn arrays_round_trip_and_validation() {
    let us = [0u32, 1, 2];
    let vs = [1u32, 2, 0];
    let ts = [0.1f64, 0.5, 0.9];
    let events =
        unsafe { anie_events_from_arrays(3, 1.0, us.as_ptr(), vs.as_ptr(), ts.as_ptr(), 3, 1) };
    assert!(!events.is_null());
    unsafe {
        assert_eq!(anie_events_len(events), 3);
        anie_events_free(events);
    }

    // Node id outside range: constructor fails, error message available.
    let bad_us = [9u32];
    let bad =
        unsafe { anie_events_from_arrays(3, 1.0, bad_us.as_ptr(), vs.as_ptr(), ts.as_ptr(), 1, 1) };
    assert!(bad.is_null());
    let msg = anie_last_error_message();
    assert!(!msg.is_null());
    let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap().to_string();
    assert!(text.contains("node id"), "unexpected message: {text}");
    unsafe { anie_string_free(msg) };
}

#[test]
fn csv_load_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.csv");
    std::fs::write(&path, "u,v,t\n0,1,0.5\n1,0,0.75\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let events = unsafe { anie_events_load_csv(c_path.as_ptr()) };
    assert!(!events.is_null());
    unsafe {
        assert_eq!(anie_events_len(events), 2);
        anie_events_free(events);
    }

    let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
    let bad = unsafe { anie_events_load_csv(missing.as_ptr()) };
    assert!(bad.is_null());
}

#[test]
fn save_and_load_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let events = anie_simulate_er_blocks(10, 1.0, 0.0, 3);
    assert!(!events.is_null());
    unsafe {
        let model = anie_fit(events, 3, 1, 0.1, 0);
        assert!(!model.is_null());
        let c_dir = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(anie_model_save(model, c_dir.as_ptr()), AnieStatus::Ok);

        let reloaded = anie_model_load(c_dir.as_ptr());
        assert!(!reloaded.is_null());
        let mut a = 0.0;
        let mut b = 0.0;
        assert_eq!(
            anie_model_intensity(model, 2, 3, 0.4, &mut a),
            AnieStatus::Ok
        );
        assert_eq!(
            anie_model_intensity(reloaded, 2, 3, 0.4, &mut b),
            AnieStatus::Ok
        );
        assert!((a - b).abs() < 1e-12);

        anie_model_free(reloaded);
        anie_model_free(model);
        anie_events_free(events);
    }
}

#[test]
fn null_handles_are_rejected_not_crashed() {
    unsafe {
        assert_eq!(anie_events_len(std::ptr::null()), 0);
        assert_eq!(anie_model_rank(std::ptr::null()), 0);
        let mut out = 0.0;
        assert_eq!(
            anie_model_intensity(std::ptr::null(), 0, 0, 0.5, &mut out),
            AnieStatus::Usage
        );
        let model = anie_fit(std::ptr::null(), 3, 1, 0.05, 0);
        assert!(model.is_null());
        anie_model_free(std::ptr::null_mut());
        anie_events_free(std::ptr::null_mut());
        anie_string_free(std::ptr::null_mut());
    }
}

#[test]
fn invalid_parameters_map_to_status() {
    let events = anie_simulate_dsbm(8, 8.0, 2.0, 0.5, 0.75, 0);
    assert!(!events.is_null());
    unsafe {
        // rank 0 is a usage error
        let m = anie_fit(events, 2, 0, 0.05, 0);
        assert!(m.is_null());
        // alpha out of range
        let m = anie_fit(events, 2, 1, 2.0, 0);
        assert!(m.is_null());
        anie_events_free(events);
    }
    // odd node count for the DSBM
    let bad = anie_simulate_dsbm(7, 8.0, 2.0, 0.5, 0.75, 0);
    assert!(bad.is_null());
}
