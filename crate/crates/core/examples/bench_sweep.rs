use tonelli::builtins::trig_field;
use tonelli::dynamics::LagrangianSpec;
use tonelli::geometry::{ClosedOneForm, MetricField, ScalarField};
use tonelli::weakkam::{build_kernel, estimate_critical_value, dp_action, Grid, ValueFunction};
use std::time::Instant;

fn main() {
    let spec = LagrangianSpec::<f64>::new(
        MetricField::flat(2),
        ScalarField::zero(),
        ClosedOneForm::constant(nalgebra::DVector::from_row_slice(&[0.3, 0.4])),
        0.0,
    );
    let grid = Grid::new(2, 64);
    let t0 = Instant::now();
    let kernel = build_kernel(&spec, &grid, 0.05, 3, 4).unwrap();
    println!("kernel build: {:?}", t0.elapsed());
    let u = ValueFunction::zeros(grid.clone());
    let t0 = Instant::now();
    let mut v = u.clone();
    for _ in 0..100 { v = kernel.lax_minus(&v); }
    println!("100 sweeps: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let _ = dp_action(&kernel, 0, 800);
    println!("dp 800 steps: {:?}", t0.elapsed());

    let mech = LagrangianSpec::<f64>::new(
        MetricField::flat(2),
        trig_field(2, 0.05, 0, 1, true),
        ClosedOneForm::zero(2),
        0.0,
    );
    let kernel2 = build_kernel(&mech, &grid, 0.05, 3, 4).unwrap();
    let t0 = Instant::now();
    let (est, _) = estimate_critical_value(&kernel2, 1e-9, 6000, None);
    println!("mech solve: {:?} iters={} converged={} c={}", t0.elapsed(), est.iterations, est.converged, est.c);
}
