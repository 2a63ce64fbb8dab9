use std::ffi::{CStr, CString};
use std::ptr;

use chebyqst_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cq_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn sin_samples(n: usize) -> Vec<f64> {
    let name = CString::new("sin_pi_x").unwrap();
    let mut buf = vec![0.0; 1 << n];
    let st = unsafe { cq_sample_builtin(name.as_ptr(), n, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, CqStatus::Ok);
    buf
}

#[test]
fn exact_run_round_trip() {
    let samples = sin_samples(6);
    unsafe {
        let cfg = cq_config_new([6usize].as_ptr(), 1, CqMode::Exact);
        assert!(!cfg.is_null());
        assert_eq!(cq_config_set_order(cfg, 3), CqStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(
            cq_run(cfg, samples.as_ptr(), ptr::null(), samples.len(), &mut res),
            CqStatus::Ok
        );
        assert_eq!(cq_result_stop_order(res), 3);
        assert!(cq_result_converged(res));
        assert_eq!(cq_result_num_coefficients(res), 4);
        assert!((cq_result_fidelity(res) - 0.9774).abs() < 0.01);
        assert_eq!(cq_result_total_shots(res), 0);

        let mut c = CqCoefficient::default();
        assert_eq!(cq_result_coefficient(res, 1, &mut c), CqStatus::Ok);
        assert_eq!(c.total_degree, 1);
        assert!(c.re.abs() > 0.5 && c.im.abs() < 1e-12);
        assert_eq!(cq_result_coefficient(res, 4, &mut c), CqStatus::OutOfRange);

        let mut idx = [0usize; 2];
        assert_eq!(cq_result_index(res, 3, idx.as_mut_ptr(), 2), 1);
        assert_eq!(idx[0], 3);

        let mut sums = [0.0; 8];
        assert_eq!(cq_result_partial_sums(res, sums.as_mut_ptr(), sums.len()), 4);
        assert!(sums[..4].windows(2).all(|w| w[1] >= w[0]));

        let (mut re, mut im) = (vec![0.0; 64], vec![0.0; 64]);
        assert_eq!(
            cq_result_reconstruction(res, re.as_mut_ptr(), im.as_mut_ptr(), 64),
            CqStatus::Ok
        );
        assert_eq!(
            cq_result_reconstruction(res, re.as_mut_ptr(), im.as_mut_ptr(), 63),
            CqStatus::InvalidArgument
        );

        let json = cq_result_to_json(res);
        assert!(!json.is_null());
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        cq_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["stop_order"], 3);

        cq_result_free(res);
        cq_config_free(cfg);
    }
}

#[test]
fn sampled_runs_are_seeded() {
    let samples = sin_samples(5);
    let run = |seed: u64| unsafe {
        let cfg = cq_config_new([5usize].as_ptr(), 1, CqMode::Faithful);
        cq_config_set_threshold(cfg, 0.9);
        cq_config_set_shots(cfg, 200);
        cq_config_set_seed(cfg, seed);
        let mut res = ptr::null_mut();
        assert_eq!(
            cq_run(cfg, samples.as_ptr(), ptr::null(), samples.len(), &mut res),
            CqStatus::Ok
        );
        let json = cq_result_to_json(res);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        assert_eq!(cq_result_total_shots(res), 400 * cq_result_num_coefficients(res) as u64);
        cq_string_free(json);
        cq_result_free(res);
        cq_config_free(cfg);
        text
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}

#[test]
fn errors_map_to_status_codes() {
    let samples = sin_samples(4);
    unsafe {
        let cfg = cq_config_new([4usize].as_ptr(), 1, CqMode::Ideal);
        cq_config_set_threshold(cfg, 1.5);
        let mut res = ptr::null_mut();
        assert_eq!(
            cq_run(cfg, samples.as_ptr(), ptr::null(), samples.len(), &mut res),
            CqStatus::InvalidConfig
        );
        assert!(last_error().contains("threshold"));
        cq_config_set_order(cfg, 2);
        assert_eq!(
            cq_run(cfg, samples.as_ptr(), ptr::null(), 8, &mut res),
            CqStatus::DataError
        );
        let zeros = [0.0; 16];
        assert_eq!(
            cq_run(cfg, zeros.as_ptr(), ptr::null(), 16, &mut res),
            CqStatus::DataError
        );
        assert_eq!(
            cq_run(ptr::null(), samples.as_ptr(), ptr::null(), 16, &mut res),
            CqStatus::NullPointer
        );
        assert!(res.is_null());
        cq_config_free(cfg);

        assert!(cq_config_new(ptr::null(), 1, CqMode::Exact).is_null());
        let bad = CString::new("nope").unwrap();
        let mut buf = [0.0; 4];
        assert_eq!(
            cq_sample_builtin(bad.as_ptr(), 2, buf.as_mut_ptr(), 4),
            CqStatus::InvalidArgument
        );
        cq_result_free(ptr::null_mut());
        cq_config_free(ptr::null_mut());
        cq_string_free(ptr::null_mut());
    }
}

#[test]
fn complex_two_dimensional_input() {
    let (re, im): (Vec<f64>, Vec<f64>) = (0..64)
        .map(|k| ((k as f64 * 0.3).cos(), (k as f64 * 0.1).sin()))
        .unzip();
    unsafe {
        let cfg = cq_config_new([3usize, 3].as_ptr(), 2, CqMode::Exact);
        cq_config_set_order(cfg, 14);
        let mut res = ptr::null_mut();
        assert_eq!(cq_run(cfg, re.as_ptr(), im.as_ptr(), 64, &mut res), CqStatus::Ok);
        assert_eq!(cq_result_num_coefficients(res), 64);
        assert!((cq_result_fidelity(res) - 1.0).abs() < 1e-12);
        let mut idx = [0usize; 2];
        assert_eq!(cq_result_index(res, 2, idx.as_mut_ptr(), 2), 2);
        assert_eq!(idx, [1, 0]);
        assert_eq!(cq_result_index(res, 2, idx.as_mut_ptr(), 1), 0);
        cq_result_free(res);
        cq_config_free(cfg);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/chebyqst.h")).unwrap();
    for name in [
        "cq_config_new",
        "cq_run",
        "cq_result_free",
        "cq_last_error",
        "typedef struct CqResult CqResult",
        "CQ_STATUS_OK",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
