//! Exercises the C surface end to end from Rust: handle lifecycle,
//! the status contract, report plausibility, and point evaluation.

use std::ffi::CStr;
use std::os::raw::c_char;
use std::ptr;

use cauchy_mfem_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { cauchy_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0, "no failure message recorded");
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_semver_string() {
    let v = unsafe { CStr::from_ptr(cauchy_version()) }.to_str().unwrap();
    assert_eq!(v.split('.').count(), 3, "{v}");
}

#[test]
fn solve_report_and_eval_round_trip() {
    unsafe {
        let mut problem: *mut CauchyProblem = ptr::null_mut();
        let status = cauchy_problem_new(CauchyCase::Hadamard1, 1, &mut problem);
        assert_eq!(status, CauchyStatus::Ok);
        assert!(!problem.is_null());

        let mut solution: *mut CauchySolution = ptr::null_mut();
        let status = cauchy_solve(
            problem,
            1,
            CauchyVariant::WellBalanced,
            1e-4,
            8,
            3,
            &mut solution,
        );
        assert_eq!(status, CauchyStatus::Ok);

        let mut report = std::mem::zeroed::<CauchyReport>();
        assert_eq!(cauchy_solution_report(solution, &mut report), CauchyStatus::Ok);
        assert!(report.h > 0.0);
        assert!(report.dof_scalar > 0 && report.dof_flux > 0 && report.dof_multiplier > 0);
        assert!(report.rel_l2_global.is_finite() && report.rel_l2_global > 0.0);
        assert!(report.rel_l2_global < 0.5, "coarse clean run off the rails");
        assert_eq!(report.outer_iterations, 1);
        assert!(report.max_conservation_residual < 1e-8);

        // The reconstruction approaches the exact mode near the data
        // boundary; a pointwise probe must sit within a mesh-sized
        // band of it.
        let (x, y) = (1.1, 0.2);
        let mut u = f64::NAN;
        let mut px = f64::NAN;
        let mut py = f64::NAN;
        assert_eq!(
            cauchy_solution_eval(solution, x, y, &mut u, &mut px, &mut py),
            CauchyStatus::Ok
        );
        let exact = x.sin() * y.sinh();
        assert!((u - exact).abs() < 0.1, "u({x}, {y}) = {u} vs {exact}");
        assert!(px.is_finite() && py.is_finite());

        // Null output slots skip their value.
        assert_eq!(
            cauchy_solution_eval(solution, x, y, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            CauchyStatus::Ok
        );

        // Outside the domain: runtime error, outputs untouched.
        let mut untouched = 7.5;
        let status = cauchy_solution_eval(solution, -5.0, 0.5, &mut untouched, ptr::null_mut(), ptr::null_mut());
        assert_eq!(status, CauchyStatus::Runtime);
        assert_eq!(untouched, 7.5);
        assert!(!last_error().is_empty());

        cauchy_solution_free(solution);
        cauchy_problem_free(problem);
    }
}

#[test]
fn noise_moves_the_report() {
    unsafe {
        let mut problem: *mut CauchyProblem = ptr::null_mut();
        assert_eq!(
            cauchy_problem_new(CauchyCase::Hadamard1, 1, &mut problem),
            CauchyStatus::Ok
        );
        let solve = |p: *mut CauchyProblem| {
            let mut s: *mut CauchySolution = ptr::null_mut();
            assert_eq!(
                cauchy_solve(p, 1, CauchyVariant::InfSup, 1e-4, 8, 3, &mut s),
                CauchyStatus::Ok
            );
            let mut report = std::mem::zeroed::<CauchyReport>();
            assert_eq!(cauchy_solution_report(s, &mut report), CauchyStatus::Ok);
            cauchy_solution_free(s);
            report.rel_l2_global
        };
        let clean = solve(problem);
        assert_eq!(cauchy_problem_set_noise(problem, 0.3, 7), CauchyStatus::Ok);
        let noisy = solve(problem);
        assert!(noisy > clean, "{noisy} vs {clean}");
        // Same seed and amplitude: bitwise repeatable.
        assert_eq!(noisy, solve(problem));
        // Turning the noise back off restores the clean answer.
        assert_eq!(cauchy_problem_set_noise(problem, 0.0, 7), CauchyStatus::Ok);
        assert_eq!(clean, solve(problem));
        cauchy_problem_free(problem);
    }
}

#[test]
fn failures_follow_the_status_contract() {
    unsafe {
        // Null out-pointers are rejected before anything runs.
        assert_eq!(
            cauchy_problem_new(CauchyCase::Hadamard1, 1, ptr::null_mut()),
            CauchyStatus::NullPointer
        );
        let mut solution: *mut CauchySolution = ptr::null_mut();
        assert_eq!(
            cauchy_solve(ptr::null(), 1, CauchyVariant::InfSup, 1e-4, 4, 2, &mut solution),
            CauchyStatus::NullPointer
        );
        let mut report = std::mem::zeroed::<CauchyReport>();
        assert_eq!(
            cauchy_solution_report(ptr::null(), &mut report),
            CauchyStatus::NullPointer
        );

        // Mode number zero is a configuration error with a message.
        let mut problem: *mut CauchyProblem = ptr::null_mut();
        assert_eq!(
            cauchy_problem_new(CauchyCase::Hadamard2, 0, &mut problem),
            CauchyStatus::Config
        );
        assert!(last_error().contains("mode number"), "{}", last_error());

        // So are a bad amplitude, order, variant pairing, and grid.
        assert_eq!(
            cauchy_problem_new(CauchyCase::Hadamard1, 1, &mut problem),
            CauchyStatus::Ok
        );
        assert_eq!(
            cauchy_problem_set_noise(problem, -0.5, 1),
            CauchyStatus::Config
        );
        assert_eq!(
            cauchy_solve(problem, 3, CauchyVariant::WellBalanced, 1e-4, 4, 2, &mut solution),
            CauchyStatus::Config
        );
        assert_eq!(
            cauchy_solve(problem, 2, CauchyVariant::InfSup, 1e-4, 4, 2, &mut solution),
            CauchyStatus::Config
        );
        assert_eq!(
            cauchy_solve(problem, 1, CauchyVariant::InfSup, 1e-4, 0, 2, &mut solution),
            CauchyStatus::Config
        );
        assert!(solution.is_null(), "failed solves must not hand out a handle");

        // Frees ignore null.
        cauchy_problem_free(ptr::null_mut());
        cauchy_solution_free(ptr::null_mut());
        cauchy_problem_free(problem);
    }
}

#[test]
fn truncated_error_messages_stay_nul_terminated() {
    unsafe {
        let mut problem: *mut CauchyProblem = ptr::null_mut();
        assert_eq!(
            cauchy_problem_new(CauchyCase::Hadamard1, 0, &mut problem),
            CauchyStatus::Config
        );
        let full = cauchy_last_error(ptr::null_mut(), 0);
        assert!(full > 4);
        let mut tiny = [0 as c_char; 5];
        let reported = cauchy_last_error(tiny.as_mut_ptr(), tiny.len());
        assert_eq!(reported, full, "length reports the whole message");
        assert_eq!(tiny[4], 0, "buffer is NUL-terminated at the cap");
        let text = CStr::from_ptr(tiny.as_ptr()).to_str().unwrap();
        assert_eq!(text.len(), 4);
    }
}
