//! Parallel vs sequential throughput on the data-parallel hot paths:
//! per-page matched-IoU, LCS evidence scoring, and MaxSim ranking.
//!
//! Requires the `parallel` feature (default), which lets one binary compare
//! `par::map` (rayon) against `par::map_seq` on identical inputs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use semchunk::geometry::BBox;
use semchunk::layout::{BoxCategory, LayoutBox};
use semchunk::match_eval::matched_iou;
use semchunk::par;
use semchunk::retrieval::lcs::lcs_len;
use semchunk::retrieval::maxsim::{maxsim_score, MultiVec};

/// Small deterministic generator so benches need no rand dependency wiring.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0
    }

    fn uniform(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn synth_pages(n_pages: usize, boxes_per_page: usize) -> Vec<(Vec<LayoutBox>, Vec<LayoutBox>)> {
    let mut rng = Lcg(42);
    (0..n_pages)
        .map(|_| {
            let gts: Vec<LayoutBox> = (0..boxes_per_page)
                .map(|_| {
                    let x0 = rng.uniform() * 900.0;
                    let y0 = rng.uniform() * 900.0;
                    let w = 20.0 + rng.uniform() * 80.0;
                    let h = 20.0 + rng.uniform() * 80.0;
                    LayoutBox::ground_truth(
                        BBox::new(x0, y0, x0 + w, y0 + h).unwrap(),
                        BoxCategory::SemanticBox,
                    )
                })
                .collect();
            // jittered copies of the ground truth act as predictions
            let preds: Vec<LayoutBox> = gts
                .iter()
                .map(|g| {
                    let dx = rng.uniform() * 10.0;
                    let dy = rng.uniform() * 10.0;
                    LayoutBox::new(
                        BBox::new(
                            g.bbox.x0 + dx,
                            g.bbox.y0 + dy,
                            g.bbox.x1 + dx,
                            g.bbox.y1 + dy,
                        )
                        .unwrap(),
                        g.category,
                        0.9,
                    )
                    .unwrap()
                })
                .collect();
            (preds, gts)
        })
        .collect()
}

fn bench_matched_iou(c: &mut Criterion) {
    let mut group = c.benchmark_group("matched_iou_corpus");
    for &n_pages in &[64usize, 256] {
        let pages = synth_pages(n_pages, 12);
        group.bench_with_input(BenchmarkId::new("seq", n_pages), &pages, |b, pages| {
            b.iter(|| {
                let scores = par::map_seq(pages, |(p, g)| matched_iou(p, g, false).score);
                black_box(scores.iter().sum::<f64>())
            })
        });
        group.bench_with_input(BenchmarkId::new("rayon", n_pages), &pages, |b, pages| {
            b.iter(|| {
                let scores = par::map(pages, |(p, g)| matched_iou(p, g, false).score);
                black_box(scores.iter().sum::<f64>())
            })
        });
    }
    group.finish();
}

fn synth_strings(n: usize, len: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
    let mut rng = Lcg(7);
    (0..n)
        .map(|_| {
            let a: Vec<u8> = (0..len).map(|_| (rng.next() % 26) as u8).collect();
            let b: Vec<u8> = (0..len * 4).map(|_| (rng.next() % 26) as u8).collect();
            (a, b)
        })
        .collect()
}

fn bench_lcs(c: &mut Criterion) {
    let mut group = c.benchmark_group("lcs_batch");
    let pairs = synth_strings(256, 160);
    group.bench_function("seq", |b| {
        b.iter(|| {
            let lens = par::map_seq(&pairs, |(a, s)| lcs_len(a, s));
            black_box(lens.iter().sum::<usize>())
        })
    });
    group.bench_function("rayon", |b| {
        b.iter(|| {
            let lens = par::map(&pairs, |(a, s)| lcs_len(a, s));
            black_box(lens.iter().sum::<usize>())
        })
    });
    group.finish();
}

fn synth_embeddings(n_docs: usize, vectors: usize, dim: usize) -> (MultiVec, Vec<MultiVec>) {
    let mut rng = Lcg(11);
    let mut mk = |id: String| {
        let vecs: Vec<Vec<f32>> = (0..vectors)
            .map(|_| (0..dim).map(|_| rng.uniform() as f32).collect())
            .collect();
        MultiVec::new(id, vecs).unwrap()
    };
    let query = mk("query".to_string());
    let docs: Vec<MultiVec> = (0..n_docs).map(|i| mk(format!("d{i}"))).collect();
    (query, docs)
}

fn bench_maxsim(c: &mut Criterion) {
    let mut group = c.benchmark_group("maxsim_ranking");
    let (query, docs) = synth_embeddings(512, 16, 64);
    group.bench_function("seq", |b| {
        b.iter(|| {
            let scores = par::map_seq(&docs, |d| maxsim_score(&query, d).unwrap());
            black_box(scores.iter().sum::<f64>())
        })
    });
    group.bench_function("rayon", |b| {
        b.iter(|| {
            let scores = par::map(&docs, |d| maxsim_score(&query, d).unwrap());
            black_box(scores.iter().sum::<f64>())
        })
    });
    group.finish();
}

criterion_group!(benches, bench_matched_iou, bench_lcs, bench_maxsim);
criterion_main!(benches);
