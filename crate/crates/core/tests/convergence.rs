mod common;

use nmrf_core::ensemble::{propagate, Model};
use nmrf_core::kernels::{sample_kernel, KernelSpec};
use nmrf_core::oracles::{decay_amplitude, lindblad_baseline, LindbladSystem};
use nmrf_core::DensityMatrix;

/// `max_t |P_Δt(t) − P_ref(t)|` on the coarse grid, for a fixed memory window.
fn decay_error(spec: &KernelSpec, window: f64, coarse: usize, fine: usize, t_end: f64) -> f64 {
    let run = |m: usize| {
        let dt = window / (m - 1) as f64;
        let n = (t_end / dt).round() as usize;
        decay_amplitude(&sample_kernel(spec, dt, m).unwrap(), n).populations()
    };
    let (p, r) = (run(coarse), run(fine));
    let stride = (fine - 1) / (coarse - 1);
    p.iter().enumerate().map(|(k, x)| (x - r[k * stride]).abs()).fold(0.0, f64::max)
}

#[test]
fn amplitude_recursion_is_first_order_in_step() {
    // Mean halving ratio over a four-rung ladder; single rungs can sit in a
    // pre-asymptotic crossing where two error terms of opposite sign cancel.
    let ladder = [11usize, 21, 41, 81];
    for delta in [10.0, 0.0, -10.0] {
        let spec = KernelSpec::bandgap_with_rate(1.0, 300.0, delta);
        let errs: Vec<f64> = ladder.iter().map(|&m| decay_error(&spec, 0.2, m, 2561, 4.0)).collect();
        let ratio = (errs[0] / errs[ladder.len() - 1]).powf(1.0 / (ladder.len() - 1) as f64);
        assert!((1.5..2.5).contains(&ratio), "δ={delta}: {errs:?} mean ratio {ratio}");
    }
}

#[test]
fn flat_kernel_amplitude_is_first_order() {
    let err = |dt: f64| {
        let n = (4.0 / dt).round() as usize;
        let amp = decay_amplitude(&sample_kernel(&KernelSpec::Flat { gamma: 1.0 }, dt, 1).unwrap(), n);
        amp.times()
            .iter()
            .zip(amp.populations())
            .map(|(t, p)| (p - (-t).exp()).abs())
            .fold(0.0, f64::max)
    };
    let errs = [err(0.04), err(0.02), err(0.01)];
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.5..2.5).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn smooth_kernel_converges_at_least_first_order() {
    // The cavity memory is smooth at the origin, so the half weight on F₀
    // cancels the leading error and the recursion gains an order.
    let spec = KernelSpec::Cavity { gamma: 1.0, detuning: 4.0, kappa2: 8.0 };
    let errs: Vec<f64> = [11, 21, 41].iter().map(|&m| decay_error(&spec, 10.0 / 14.0, m, 641, 4.0)).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 1.5, "{errs:?}");
    }
}

#[test]
fn ensemble_approaches_cavity_master_equation() {
    let spec = KernelSpec::Cavity { gamma: 1.0, detuning: 4.0, kappa2: 8.0 };
    let sys = LindbladSystem::matched(&spec, 4.0, 8).unwrap();
    let window = 10.0 / 14.0;
    let mut last = f64::INFINITY;
    for m in [3usize, 5, 9] {
        let dt = window / (m - 1) as f64;
        let model = Model { kernel: spec, rabi: 4.0, dt, slots: m };
        let n = model.steps_for(4.0).unwrap();
        let traj = propagate(&DensityMatrix::excited(), &model.operator().unwrap(), n, 1);
        let base = lindblad_baseline(&sys, &DensityMatrix::excited(), dt, n).unwrap().excited_populations();
        let pe: Vec<f64> = traj.states().iter().map(|r| r.get(0, 0).re).collect();
        let dev = common::max_deviation(&pe, &base);
        assert!(dev < last, "M={m}: {dev} after {last}");
        last = dev;
    }
    assert!(last < 0.02, "{last}");
}
