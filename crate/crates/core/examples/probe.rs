//! Exploration harness: forms a spiral, engages the comoving frame, and
//! prints the frame-velocity trace plus throughput numbers.
//!
//! cargo run --release -p rotor-core --example probe -- beta=0.58 warmup=2000 steps=20000

use rotor_core::solver::locate_tip;
use rotor_core::{make_numerics, ModelParams, PinningSpec, SimState};
use std::time::Instant;

fn main() {
    let mut beta = 0.58;
    let mut warmup: u64 = 2000;
    let mut steps: u64 = 20000;
    let mut every: u64 = 500;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("args are key=value");
        match k {
            "beta" => beta = v.parse().unwrap(),
            "warmup" => warmup = v.parse().unwrap(),
            "steps" => steps = v.parse().unwrap(),
            "every" => every = v.parse().unwrap(),
            other => panic!("unknown arg {other}"),
        }
    }

    let model = ModelParams::with_defaults(beta);
    let numerics = make_numerics(30.0, 150, 0.1).unwrap();
    let pin = PinningSpec::centered(numerics.n);
    let mut s = SimState::fresh_spiral(model, numerics, pin).unwrap();
    println!("# beta={beta} dx={} dt={}", numerics.dx, numerics.dt);

    let t0 = Instant::now();
    for k in 0..warmup {
        s.step().unwrap();
        if k % every == 0 {
            match locate_tip(&s.fields, pin.u_star, pin.v_star) {
                Some((ti, tj)) => println!("warmup {k}: tip at ({ti:.2}, {tj:.2})"),
                None => println!("warmup {k}: no tip"),
            }
        }
    }
    let warmup_secs = t0.elapsed().as_secs_f64();
    if warmup > 0 {
        println!(
            "# warmup {} steps in {:.2}s = {:.0} steps/s",
            warmup,
            warmup_secs,
            warmup as f64 / warmup_secs
        );
    }

    match s.engage_frame() {
        Ok(()) => println!("# engaged, tip residual {:?}", s.pin_residual()),
        Err(e) => {
            println!("# engage failed: {e}");
            return;
        }
    }

    s.reset_record();
    let t1 = Instant::now();
    let mut worst_residual = 0.0f64;
    for k in 0..steps {
        if let Err(e) = s.step() {
            println!("step {k}: error {e}");
            return;
        }
        let (r1, r2) = s.pin_residual();
        worst_residual = worst_residual.max(r1).max(r2);
        if (k + 1) % every == 0 {
            let rec = &s.record;
            let len = rec.len();
            let from = len.saturating_sub(every as usize);
            let w = &rec.cx()[from..];
            let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let f = s.frame;
            println!(
                "step {}: cx={:+.4} cy={:+.4} om={:+.4} | cx range over last block [{:+.5}, {:+.5}] spread {:.3e}",
                k + 1, f.cx, f.cy, f.omega, lo, hi, hi - lo
            );
        }
    }
    let secs = t1.elapsed().as_secs_f64();
    println!(
        "# engaged {} steps in {:.2}s = {:.0} steps/s, worst pin residual {:.3e}",
        steps,
        secs,
        steps as f64 / secs,
        worst_residual
    );
    match rotor_core::detect_period(&s.record) {
        Some(period) => {
            let p = (period / s.record.dt()).round() as usize;
            println!("# detected period {period:.4} ({p} samples)");
            let rec = &s.record;
            let arc = |from: usize, to: usize| {
                let mut total = 0.0;
                for k in from..to {
                    let d = [
                        rec.cx()[k + 1] - rec.cx()[k],
                        rec.cy()[k + 1] - rec.cy()[k],
                        rec.omega()[k + 1] - rec.omega()[k],
                    ];
                    total += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                }
                total
            };
            let len = rec.len();
            let m = (len / p).min(8).max(1);
            for blk in 0..m {
                let start = len - 1 - (m - blk) * p;
                println!("#   q over period starting at {start}: {:.6}", arc(start, start + p));
            }
        }
        None => println!("# no period detected (constant or aperiodic)"),
    }
    let cls = rotor_core::classify(&s.record, 1e-4);
    println!("# classification: {cls}");
    if let Ok(p) = std::env::var("PROBE_CSV") {
        s.record.write_csv(std::path::Path::new(&p)).unwrap();
        println!("# wrote record to {p}");
    }
}
