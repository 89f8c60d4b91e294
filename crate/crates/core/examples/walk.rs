//! Continuation-walk probe: settle a spiral deep in the rigid regime, then
//! raise beta in small steps, printing the velocity-oscillation amplitude
//! kicked up by each parameter step and how far it decays within the leg.
//!
//! Run with key=value args: settle_beta, settle_steps, to_beta, dbeta,
//! per_steps, seed_out (optional snapshot path written after settling).

use rotor_core::snapshot::write_snapshot;
use rotor_core::{classify, make_numerics, ModelParams, PinningSpec, SimState};

fn arg(args: &[String], key: &str, default: f64) -> f64 {
    args.iter()
        .find_map(|a| a.strip_prefix(&format!("{key}=")).map(|v| v.parse().unwrap()))
        .unwrap_or(default)
}

fn arg_str(args: &[String], key: &str) -> Option<String> {
    args.iter().find_map(|a| a.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn spread(xs: &[f64]) -> f64 {
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    hi - lo
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let settle_beta = arg(&args, "settle_beta", 0.570);
    let settle_steps = arg(&args, "settle_steps", 700_000.0) as u64;
    let to_beta = arg(&args, "to_beta", 0.590);
    let dbeta = arg(&args, "dbeta", 0.001);
    let per_steps = arg(&args, "per_steps", 50_000.0) as u64;
    let period_steps = arg(&args, "period_steps", 7_100.0) as usize;

    let model = ModelParams::with_defaults(settle_beta);
    let nm = make_numerics(30.0, 150, 0.1).unwrap();
    let mut s = SimState::fresh_spiral(model, nm, PinningSpec::centered(150)).unwrap();
    let t = std::time::Instant::now();
    s.run(2000).unwrap();
    s.engage_frame().unwrap();
    s.run(settle_steps).unwrap();
    let cx = s.record.cx();
    let tail = &cx[cx.len() - 2 * period_steps..];
    println!(
        "# settled at beta={settle_beta} after {settle_steps} steps: tail spread {:.3e}, class {} ({:.0}s)",
        spread(tail),
        classify(&s.record, 1e-4),
        t.elapsed().as_secs_f64()
    );
    if let Some(path) = arg_str(&args, "seed_out") {
        write_snapshot(&s, &path).unwrap();
        println!("# wrote {path}");
    }

    let mut beta = settle_beta;
    while beta < to_beta - 1e-12 {
        beta = (beta + dbeta).min(to_beta);
        s.model.beta = beta;
        s.reset_record();
        s.run(per_steps).unwrap();
        let cx = s.record.cx();
        let head = &cx[..(2 * period_steps).min(cx.len())];
        let tail = &cx[cx.len().saturating_sub(2 * period_steps)..];
        let class = classify(&s.record, 1e-4);
        println!(
            "beta={beta:.4}: kick spread {:.3e} -> tail spread {:.3e} over {per_steps} steps, class {}",
            spread(head),
            spread(tail),
            class
        );
    }
    if let Some(path) = arg_str(&args, "final_out") {
        write_snapshot(&s, &path).unwrap();
        println!("# wrote {path}");
    }
    println!("# total {:.0}s", t.elapsed().as_secs_f64());
}
