use std::hint::black_box;
use std::sync::Arc;

use craft_bench::{frame_stream, mid_pose, profile, sweep_frames};
use craft_core::bus::{decode_frame, encode_frame, MotorParams, StreamParser, VirtualBus};
use craft_core::hand::{forward_kinematics, rolling_joint_transform};
use craft_core::retarget::{keypoints_to_angles, retarget};
use craft_core::teleop::{Pipeline, PipelineConfig};
use craft_core::tendon::{joint_to_motor, motor_to_joint};
use craft_core::HandSpec;
use criterion::{criterion_group, criterion_main, Criterion, Throughput};

fn kinematics(c: &mut Criterion) {
    let spec = HandSpec::default();
    let q = mid_pose(&spec);
    c.bench_function("rolling_joint_transform", |b| {
        b.iter(|| rolling_joint_transform(black_box(1.2), black_box(0.006)))
    });
    c.bench_function("forward_kinematics", |b| b.iter(|| forward_kinematics(&spec, black_box(&q))));
    let spools = joint_to_motor(&spec, &q).unwrap();
    c.bench_function("joint_to_motor", |b| b.iter(|| joint_to_motor(&spec, black_box(&q))));
    c.bench_function("motor_to_joint", |b| b.iter(|| motor_to_joint(&spec, black_box(&spools))));
}

fn retargeting(c: &mut Criterion) {
    let spec = HandSpec::default();
    let frames = sweep_frames();
    let p = profile(&spec, &frames);
    let frame = &frames[frames.len() / 3];
    c.bench_function("keypoints_to_angles", |b| b.iter(|| keypoints_to_angles(black_box(frame))));
    let op = keypoints_to_angles(frame).unwrap();
    c.bench_function("retarget", |b| b.iter(|| retarget(&p, black_box(&op))));
}

fn codec(c: &mut Criterion) {
    let stream = frame_stream(1 << 20);
    let frame = decode_frame(&stream[..stream.iter().skip(4).position(|&x| x == 0xFF).unwrap() + 4]).unwrap();
    let bytes = encode_frame(&frame).unwrap();
    c.bench_function("encode_sync_write", |b| b.iter(|| encode_frame(black_box(&frame))));
    c.bench_function("decode_sync_write", |b| b.iter(|| decode_frame(black_box(&bytes))));
    let mut g = c.benchmark_group("stream_parser");
    g.throughput(Throughput::Bytes(stream.len() as u64));
    g.sample_size(20);
    g.bench_function("1MiB", |b| {
        b.iter(|| {
            let mut p = StreamParser::new();
            let mut out = Vec::new();
            for chunk in stream.chunks(4096) {
                p.feed_into(chunk, &mut out);
            }
            out.len()
        })
    });
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let spec = Arc::new(HandSpec::default());
    let frames = sweep_frames();
    let prof = profile(&spec, &frames);
    let bus = VirtualBus::for_hand(MotorParams::default());
    let mut p = Pipeline::new(spec, prof, bus, PipelineConfig::default()).unwrap();
    let mut k = 0usize;
    c.bench_function("pipeline_tick", |b| {
        b.iter(|| {
            let f = &frames[k % frames.len()];
            let out = p.step(k as f64 / 30.0, Some(f));
            p.client_mut().transport_mut().advance(1.0 / 30.0);
            k += 1;
            out.command.is_some()
        })
    });
}

criterion_group!(benches, kinematics, retargeting, codec, pipeline);
criterion_main!(benches);
