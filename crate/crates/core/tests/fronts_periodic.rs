use kpp_core::coefficients::{Interpolation, PeriodicField, ReactionModel};
use kpp_core::floquet::{lambda_roots, minimal_speed};
use kpp_core::fronts::{compute_front, periodicity_residual, tail_fit, FrontOptions};

fn cosine_medium() -> ReactionModel {
    ReactionModel::logistic(
        PeriodicField::from_fourier(1.0, &[1.0, 0.5], &[], 64, Interpolation::Cubic).unwrap(),
        PeriodicField::constant(1.0, 1.0, 64).unwrap(),
    )
    .unwrap()
}

#[test]
fn minimal_speed_fronts_satisfy_the_wave_identity() {
    for model in [
        ReactionModel::homogeneous_logistic(1.0, 1.0, 1.0).unwrap(),
        cosine_medium(),
    ] {
        let disp = minimal_speed(&model.periodic_linearization(256).unwrap(), 1e-8).unwrap();
        let t0 = std::time::Instant::now();
        let f = compute_front(&model, disp.c_star, &disp, &FrontOptions::default(), 400.0).unwrap();
        let r = periodicity_residual(&f, &model, 0.25).unwrap();
        eprintln!(
            "c* = {}: run {} s, residual {r:e}, measured speed {}",
            disp.c_star,
            t0.elapsed().as_secs_f64(),
            f.measured_speed
        );
        assert!(f.is_minimal);
        assert!(r <= 1e-3 * f.sup_p(), "residual {r}");
        assert!((f.eval(0.0, 0.0) - f.level()).abs() <= 1e-15);
        // the discrete front moves at the Floquet speed up to the Bramson lag
        assert!((f.measured_speed - disp.c_star).abs() < 0.01 * disp.c_star);
    }
}

#[test]
fn tail_rates_match_the_smaller_root() {
    let model = cosine_medium();
    let disp = minimal_speed(&model.periodic_linearization(256).unwrap(), 1e-8).unwrap();
    for dc in [0.2, 0.5, 1.0] {
        let c = disp.c_star + dc;
        let (lambda_c, _) = lambda_roots(&disp, c).unwrap();
        let f = compute_front(&model, c, &disp, &FrontOptions::default(), 300.0).unwrap();
        let fit = tail_fit(&f, f.default_tail_window().unwrap()).unwrap();
        assert!(
            (fit.lambda_fit - lambda_c).abs() < 0.02 * lambda_c,
            "c = {c}: {} vs {lambda_c}",
            fit.lambda_fit
        );
        assert!(
            fit.rms_log_residual <= 1e-2,
            "fit residual {}",
            fit.rms_log_residual
        );
        assert!(fit.b_c > 0.0);
    }
}
