use criterion::{black_box, criterion_group, criterion_main, Criterion};
use shiftlab::classify::{classify, ClassifyOptions, Frames};
use shiftlab::scenarios::{self, ScenarioConfig};
use shiftlab::shadow::{bm_ladders_from_weights, shadowing_verdict, ShadowSolver};
use shiftlab::{IndexRange, SeqPoint, Vector};

fn frames(c: &mut Criterion) {
    let sc = scenarios::build(&ScenarioConfig::named("anosov")).unwrap();
    c.bench_function("anosov frames on [-600, 600]", |b| {
        b.iter(|| {
            Frames::compute(
                &sc.sequence,
                &sc.candidates[0],
                black_box(IndexRange::symmetric(600)),
            )
            .unwrap()
        })
    });
}

fn ladders(c: &mut Criterion) {
    let (n_max, k_max) = (64usize, 512usize);
    let half = (n_max + k_max + 1) as i64;
    let weights: Vec<f64> = (-half..=half)
        .map(|n| 1.5 + 0.5 * ((n as f64) * 0.37).sin())
        .collect();
    c.bench_function("ladders n_max 64 k_max 512", |b| {
        b.iter(|| bm_ladders_from_weights(-half, black_box(&weights), n_max, k_max).unwrap())
    });
}

fn solver(c: &mut Criterion) {
    let sc = scenarios::build(&ScenarioConfig::named("eigen_orthogonal")).unwrap();
    let s = &sc.sequence;
    let verdict = classify(s, &sc.candidates, &ClassifyOptions::default()).unwrap();
    let cert = shadowing_verdict(s, &verdict, 64, 512).unwrap();
    let steps = 16;
    let support = IndexRange::symmetric(16);
    let solver = ShadowSolver::new(
        s,
        &verdict,
        &cert,
        IndexRange::symmetric(16 + steps as i64 + 1),
    )
    .unwrap();
    let defects: Vec<SeqPoint> = (0..steps)
        .map(|t| {
            let mut z = SeqPoint::zeros(support, 2, 2.0);
            for n in support.iter() {
                let a = (n * 7 + t as i64 * 3) as f64;
                z.set(n, Vector::from_slice(&[a.sin(), a.cos()]).unwrap());
            }
            z
        })
        .collect();
    c.bench_function("shadow solve 33 sites x 16 steps", |b| {
        b.iter(|| solver.solve(black_box(&defects)).unwrap())
    });
}

criterion_group!(benches, frames, ladders, solver);
criterion_main!(benches);
