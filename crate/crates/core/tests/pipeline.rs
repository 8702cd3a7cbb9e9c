use kdv_flex::io::{load_checkpoint, save_checkpoint};
use kdv_flex::lp::LpFilter;
use kdv_flex::norms::sobolev_norm;
use kdv_flex::scheme::{iterate, iterate_each, SchemeError, SchemeParams};
use kdv_flex::slabs::SlabProfile;
use kdv_flex::verify::{certify_stage, relaxed_residual, single_shell};

#[test]
fn first_stage_end_to_end() {
    let params = SchemeParams::default();
    let states = iterate(&params, 1).unwrap();
    let (q0, q1) = (&states[0], &states[1]);

    assert_eq!((q1.lambda, q1.sigma), (8, 640));
    assert!(q1.e_norm <= 0.5 * q0.e_norm);
    assert!(q1.certificates.iter().all(|c| c.pass), "{:?}", q1.certificates.last().unwrap().first_failure());
    assert_eq!(q1.u.max_coeff_diff(&q0.u.add(&q1.increments[0])), 0.0);
    assert!(single_shell(&q1.increments[0]).is_some());
    let res = sobolev_norm(&relaxed_residual(&q1.u, &q1.e), -3.0);
    assert!(res < 1e-8 * q1.e_norm.max(1.0), "{res}");

    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), q0).unwrap();
    let path = save_checkpoint(dir.path(), q1).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.u.max_coeff_diff(&q1.u), 0.0);
    assert_eq!(back.e.max_coeff_diff(&q1.e), 0.0);
    assert_eq!(back.certificates, q1.certificates);
    assert!(back.certificates.iter().all(|c| c.recheck()));

    let (filter, profile) = (LpFilter::build(), SlabProfile::default());
    let prev = load_checkpoint(&dir.path().join("q0")).unwrap();
    let again = certify_stage(Some(&prev), &back, &params, &filter, &profile).unwrap();
    assert_eq!(&again, back.certificates.last().unwrap());
}

#[test]
fn streaming_iteration_matches_batch() {
    let params = SchemeParams::default();
    let mut seen = Vec::new();
    let last = iterate_each(&params, 1, |s| {
        seen.push((s.q, s.e_norm));
        Ok::<(), SchemeError>(())
    })
    .unwrap();
    let batch = iterate(&params, 1).unwrap();
    assert_eq!(seen, batch.iter().map(|s| (s.q, s.e_norm)).collect::<Vec<_>>());
    assert_eq!(last.u.max_coeff_diff(&batch[1].u), 0.0);
}

#[test]
fn capped_search_is_exhausted() {
    let params = SchemeParams { lambda_max: 64, ..SchemeParams::default() };
    match iterate(&params, 2) {
        Err(SchemeError::Exhausted { lambda_max: 64, .. }) => {}
        other => panic!("expected exhaustion, got {:?}", other.map(|s| s.len())),
    }
}

#[test]
fn nonpositive_amplitude_is_rejected() {
    let params = SchemeParams { amplitude: 0.0, ..SchemeParams::default() };
    assert!(matches!(iterate(&params, 0), Err(SchemeError::InvalidParams(_))));
}
