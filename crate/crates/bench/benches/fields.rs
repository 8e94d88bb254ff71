use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ncde_bench::{model_config, series, sine_dataset};
use ncde_core::fields::{jacobian_field_truncated, matrix_field, Linearization};
use ncde_core::rng::set_seed;
use ncde_core::{
    CubicPath, FieldDims, FieldKind, InterpolationKind, JacobianFieldParams, MatrixFieldParams, Model, SurrogateConfig,
    Tape, Tensor,
};

fn field_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("field_eval");
    for &(u, v, d) in &[(2usize, 16usize, 32usize), (4, 32, 128)] {
        let dims = FieldDims::new(u, v, d);
        let mut rng = set_seed(0);
        let mp = MatrixFieldParams::init(dims, &mut rng);
        let jp = JacobianFieldParams::init(dims, &mut rng);
        let h = Tensor::full(&[v], 0.1);
        let x = Tensor::full(&[u], 0.2);
        let xdot = Tensor::full(&[u], 0.3);
        let cfg = SurrogateConfig::default();
        group.bench_function(BenchmarkId::new("matrix", format!("{u}x{v}x{d}")), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let p = mp.map(|t| tape.constant(t.clone()));
                let (hv, dv) = (tape.constant(h.clone()), tape.constant(xdot.clone()));
                black_box(matrix_field(&mut tape, &p, hv, dv).unwrap());
            })
        });
        group.bench_function(BenchmarkId::new("jacobian", format!("{u}x{v}x{d}")), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let p = jp.map(|t| tape.constant(t.clone()));
                let (hv, xv, dv) = (
                    tape.constant(h.clone()),
                    tape.constant(x.clone()),
                    tape.constant(xdot.clone()),
                );
                black_box(jacobian_field_truncated(&mut tape, &p, hv, xv, dv, &cfg).unwrap());
            })
        });
        group.bench_function(BenchmarkId::new("jvp_h", format!("{u}x{v}x{d}")), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let p = jp.map(|t| tape.constant(t.clone()));
                let (hv, xv) = (tape.constant(h.clone()), tape.constant(x.clone()));
                let lin = Linearization::new(&mut tape, &p, xv, hv, &cfg).unwrap();
                black_box(lin.jvp_h(&mut tape, &p, hv).unwrap());
            })
        });
    }
    group.finish();
}

fn spline_fit(c: &mut Criterion) {
    let s = series(200, 4);
    for kind in [InterpolationKind::NaturalCubic, InterpolationKind::Hermite] {
        c.bench_function(&format!("spline_fit/{kind:?}"), |b| {
            b.iter(|| black_box(CubicPath::fit(&s, kind).unwrap()))
        });
    }
}

fn training_step(c: &mut Criterion) {
    let ds = sine_dataset(32, 50);
    for field in [FieldKind::Matrix, FieldKind::JacobianTruncated] {
        let model = Model::new(model_config(field, ds.channels, 16, 32)).unwrap();
        let path = model.fit_path(&ds.samples[0]).unwrap();
        let label = ds.samples[0].label.unwrap();
        c.bench_function(&format!("loss_and_grad/{}", field.name()), |b| {
            b.iter(|| black_box(model.loss_and_grad(&path, label).unwrap()))
        });
    }
}

criterion_group!(benches, field_eval, spline_fit, training_step);
criterion_main!(benches);
