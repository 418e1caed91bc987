//! Hot-path benchmarks. Build once with the default `parallel` feature and
//! once with `--no-default-features` to compare the rayon and sequential
//! paths; the mode is part of every benchmark id.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use camlens_core::srnet::{conv2d_forward, image_to_tensor, Conv2d, SrModel};
use camlens_core::synth::test_texture;
use camlens_core::{
    degrade_gaussian, gaussian_blur, resize_bicubic, GaussianParams, ScaleFactor,
};

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

fn bench_resize(c: &mut Criterion) {
    let hr = test_texture(512, 3, 1);
    c.bench_function(&format!("resize_bicubic_512_to_176/{MODE}"), |b| {
        b.iter(|| resize_bicubic(black_box(&hr), 176, 176).unwrap())
    });
    let lr = resize_bicubic(&hr, 176, 176).unwrap();
    c.bench_function(&format!("resize_bicubic_176_to_512/{MODE}"), |b| {
        b.iter(|| resize_bicubic(black_box(&lr), 512, 512).unwrap())
    });
}

fn bench_blur(c: &mut Criterion) {
    let img = test_texture(512, 3, 2);
    let params = GaussianParams::new(7, 1.55).unwrap();
    c.bench_function(&format!("gaussian_blur_512_k7/{MODE}"), |b| {
        b.iter(|| gaussian_blur(black_box(&img), params))
    });
}

fn bench_degrade(c: &mut Criterion) {
    let img = test_texture(512, 3, 3);
    let params = GaussianParams::new(5, 2.65).unwrap();
    let scale = ScaleFactor::new(2.9).unwrap();
    c.bench_function(&format!("degrade_gaussian_512_x2.9/{MODE}"), |b| {
        b.iter(|| degrade_gaussian(black_box(&img), params, scale).unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let a = test_texture(420, 3, 4);
    let b_img = test_texture(420, 3, 5);
    c.bench_function(&format!("psnr_420/{MODE}"), |b| {
        b.iter(|| camlens_core::metrics::psnr(black_box(&a), black_box(&b_img), 1.0).unwrap())
    });
    c.bench_function(&format!("ssim_420/{MODE}"), |b| {
        b.iter(|| camlens_core::metrics::ssim(black_box(&a), black_box(&b_img)).unwrap())
    });
}

fn bench_conv(c: &mut Criterion) {
    let img = test_texture(96, 3, 6);
    let input = image_to_tensor(&img);
    let mut layer = Conv2d::zeros(3, 32);
    for (i, w) in layer.weights.iter_mut().enumerate() {
        *w = ((i % 13) as f64 - 6.0) * 0.01;
    }
    c.bench_function(&format!("conv2d_3to32_96px/{MODE}"), |b| {
        b.iter(|| conv2d_forward(black_box(&input), &layer).unwrap())
    });

    let model = SrModel::init(3, 8, 32, true, 7).unwrap();
    c.bench_function(&format!("model_forward_d8_f32_96px/{MODE}"), |b| {
        b.iter(|| model.forward(black_box(&input)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_resize, bench_blur, bench_degrade, bench_metrics, bench_conv
}
criterion_main!(benches);
