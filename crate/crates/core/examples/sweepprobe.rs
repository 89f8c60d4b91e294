//! Continuation-sweep probe: settle or load a seed, run one sweep, print
//! one line per record as it lands.
//!
//! Args (key=value): beta_start beta_end dbeta out_dir
//!   seed=fresh|PATH  settle_cap=N  tol=X  cap=N  [min_periods=N]

use std::io::Write as _;
use std::path::PathBuf;

use rotor_core::runner::{run_to_classification, RunPolicy};
use rotor_core::snapshot::{read_snapshot, write_snapshot};
use rotor_core::solver::{PinningSpec, SimState};
use rotor_core::sweep::{run_sweep, SeedState, SweepRecord, SweepSink, SweepSpec};
use rotor_core::{make_numerics, ModelParams};

struct PrintSink {
    dir: PathBuf,
}

impl SweepSink for PrintSink {
    fn persist(
        &mut self,
        index: usize,
        r: &SweepRecord,
        state: &SimState,
    ) -> rotor_core::error::Result<Option<PathBuf>> {
        let path = self.dir.join(format!("rec_{index:03}.txt"));
        write_snapshot(state, &path)?;
        println!(
            "leg {index:3}  beta={:.4}  {:<10}  q_s={:<12.4e}  T={:<8.4}  n={}  steps={}",
            r.beta,
            r.classification.to_string(),
            r.q_s,
            r.period.unwrap_or(f64::NAN),
            r.n_periods,
            r.steps_run,
        );
        std::io::stdout().flush().ok();
        Ok(Some(path))
    }
}

fn main() {
    let mut beta_start = 0.590;
    let mut beta_end = 0.615;
    let mut dbeta = 0.001;
    let mut out_dir = PathBuf::from("/tmp/sweepprobe");
    let mut seed = String::from("fresh");
    let mut settle_cap: u64 = 2_000_000;
    let mut tol = 1e-3;
    let mut cap: u64 = 400_000;
    let mut min_periods: usize = 5;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("args are key=value");
        match k {
            "beta_start" => beta_start = v.parse().unwrap(),
            "beta_end" => beta_end = v.parse().unwrap(),
            "dbeta" => dbeta = v.parse().unwrap(),
            "out_dir" => out_dir = PathBuf::from(v),
            "seed" => seed = v.to_string(),
            "settle_cap" => settle_cap = v.parse().unwrap(),
            "tol" => tol = v.parse().unwrap(),
            "cap" => cap = v.parse().unwrap(),
            "min_periods" => min_periods = v.parse().unwrap(),
            other => panic!("unknown arg {other}"),
        }
    }
    std::fs::create_dir_all(&out_dir).unwrap();
    let nm = make_numerics(30.0, 150, 0.1).unwrap();
    let diff = [[1.0, 0.0], [0.0, 0.0]];
    let policy = RunPolicy { tol, max_steps: cap, min_periods, ..RunPolicy::default() };

    let t0 = std::time::Instant::now();
    let seed_path = if seed == "fresh" {
        let model = ModelParams::new(beta_start, 0.5, 0.2, diff).unwrap();
        let mut s = SimState::fresh_spiral(model, nm, PinningSpec::centered(nm.n)).unwrap();
        s.engage_frame().unwrap();
        let settle = RunPolicy { max_steps: settle_cap, ..policy };
        let out = run_to_classification(&mut s, &settle).unwrap();
        println!(
            "# settle at beta={beta_start}: {} q_s={:.4e} T={:?} steps={} ({:.0}s)",
            out.classification,
            out.q_s,
            out.period,
            out.steps_run,
            t0.elapsed().as_secs_f64()
        );
        std::io::stdout().flush().ok();
        let p = out_dir.join("seed.txt");
        write_snapshot(&s, &p).unwrap();
        p
    } else {
        let p = PathBuf::from(&seed);
        let s = read_snapshot(&p, diff).unwrap();
        println!("# seed from {seed}: beta={} step={}", s.model.beta, s.step_index);
        p
    };

    let spec = SweepSpec {
        beta_start,
        beta_end,
        dbeta,
        gamma: 0.5,
        epsilon: 0.2,
        diff,
        numerics: nm,
        pin: PinningSpec::centered(nm.n),
        policy,
        seed: SeedState::Snapshot(seed_path),
    };
    let result = run_sweep(&spec, &mut PrintSink { dir: out_dir.clone() }).unwrap();
    println!("# bifurcation points: {:?}", result.bifurcation_points);
    result.write_csv(out_dir.join("sweep.csv")).unwrap();
    println!("# PROBE-DONE {:.0}s", t0.elapsed().as_secs_f64());
}
