//! Lossless on-disk state format.
//!
//! A snapshot is a plain-text file: a fixed sequence of `key=value` header
//! lines followed by one `i j u1 u2` line per grid point. Floats are printed
//! with 17 significant digits, which round-trips every finite `f64` exactly,
//! so a written state parses back bitwise identical.
//!
//! Two things are deliberately not stored. The diffusion matrix and the pin
//! placement are supplied by the caller on load (they are experiment
//! configuration, not evolving state, and the pin sits at the grid centre in
//! every experiment this crate runs). The velocity record is also dropped:
//! a loaded state starts recording afresh, and the orientation latch of an
//! engaged state is assumed to be past its transient.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};
use crate::grid::{make_numerics, FieldPair};
use crate::kinetics::ModelParams;
use crate::solver::{FrameState, PinningSpec, SimState};

pub const FORMAT_VERSION: u64 = 1;

const HEADER_KEYS: [&str; 18] = [
    "format_version",
    "L",
    "N",
    "ts",
    "dt",
    "beta",
    "gamma",
    "epsilon",
    "u_star",
    "v_star",
    "theta",
    "RX",
    "RY",
    "cx",
    "cy",
    "omega",
    "step_index",
    "advection_engaged",
];

/// Renders the state in snapshot format. Fails on non-finite fields so a
/// blown-up state cannot poison a continuation chain on disk.
pub fn serialize(state: &SimState) -> Result<String> {
    let n = state.numerics.n;
    let finite = |xs: &[f64]| xs.iter().all(|v| v.is_finite());
    if !finite(state.fields.u1.data()) || !finite(state.fields.u2.data()) {
        return Err(SimError::BlowUp { step: state.step_index });
    }

    let mut out = String::with_capacity(60 * (n + 1) * (n + 1) + 512);
    let f = &state.frame;
    writeln!(out, "format_version={FORMAT_VERSION}").unwrap();
    writeln!(out, "L={:.16e}", state.numerics.box_size).unwrap();
    writeln!(out, "N={n}").unwrap();
    writeln!(out, "ts={:.16e}", state.numerics.ts).unwrap();
    writeln!(out, "dt={:.16e}", state.numerics.dt).unwrap();
    writeln!(out, "beta={:.16e}", state.model.beta).unwrap();
    writeln!(out, "gamma={:.16e}", state.model.gamma).unwrap();
    writeln!(out, "epsilon={:.16e}", state.model.epsilon).unwrap();
    writeln!(out, "u_star={:.16e}", state.pin.u_star).unwrap();
    writeln!(out, "v_star={:.16e}", state.pin.v_star).unwrap();
    writeln!(out, "theta={:.16e}", f.theta).unwrap();
    writeln!(out, "RX={:.16e}", f.rx).unwrap();
    writeln!(out, "RY={:.16e}", f.ry).unwrap();
    writeln!(out, "cx={:.16e}", f.cx).unwrap();
    writeln!(out, "cy={:.16e}", f.cy).unwrap();
    writeln!(out, "omega={:.16e}", f.omega).unwrap();
    writeln!(out, "step_index={}", state.step_index).unwrap();
    writeln!(out, "advection_engaged={}", u8::from(state.advection_engaged)).unwrap();
    for i in 0..=n {
        for j in 0..=n {
            writeln!(
                out,
                "{i} {j} {:.16e} {:.16e}",
                state.fields.u1.at(i, j),
                state.fields.u2.at(i, j)
            )
            .unwrap();
        }
    }
    Ok(out)
}

pub fn write_snapshot(state: &SimState, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), serialize(state)?)?;
    Ok(())
}

/// SHA-256 of the serialized state, as lowercase hex. Sweeps use this to
/// assert that each record really continued from its predecessor's final
/// state.
pub fn state_hash(state: &SimState) -> Result<String> {
    let text = serialize(state)?;
    let mut hex = String::with_capacity(64);
    for byte in Sha256::digest(text.as_bytes()) {
        write!(hex, "{byte:02x}").unwrap();
    }
    Ok(hex)
}

/// Parses snapshot text. The pin goes at the grid centre with the standard
/// +x orientation point; callers wanting a different placement can reassemble
/// via [`SimState::from_parts`] from the pieces of the returned state.
pub fn parse_snapshot(text: &str, diff: [[f64; 2]; 2], src: &Path) -> Result<SimState> {
    let fail = |msg: String| SimError::Parse { path: src.to_path_buf(), msg };
    let mut lines = text.lines().enumerate();

    let version: u64 = header_value(&mut lines, HEADER_KEYS[0], src)?
        .parse()
        .map_err(|e| fail(format!("bad format_version: {e}")))?;
    if version != FORMAT_VERSION {
        return Err(fail(format!(
            "format version {version} not supported (this build reads {FORMAT_VERSION})"
        )));
    }

    let mut floats = [0.0f64; 15];
    let mut n = 0usize;
    let mut step_index = 0u64;
    let mut engaged = false;
    for (slot, key) in HEADER_KEYS[1..].iter().enumerate() {
        let value = header_value(&mut lines, key, src)?;
        match *key {
            "N" => n = value.parse().map_err(|e| fail(format!("bad N: {e}")))?,
            "step_index" => {
                step_index = value.parse().map_err(|e| fail(format!("bad step_index: {e}")))?
            }
            "advection_engaged" => {
                engaged = match value {
                    "0" => false,
                    "1" => true,
                    other => return Err(fail(format!("bad advection_engaged: `{other}`"))),
                }
            }
            _ => {
                let v: f64 =
                    value.parse().map_err(|e| fail(format!("bad value for {key}: {e}")))?;
                if !v.is_finite() {
                    return Err(fail(format!("non-finite value for {key}")));
                }
                floats[slot] = v;
            }
        }
    }
    let [box_size, _, ts, dt, beta, gamma, epsilon, u_star, v_star, theta, rx, ry, cx, cy, omega] =
        floats;

    let numerics =
        make_numerics(box_size, n, ts).map_err(|e| fail(format!("bad grid parameters: {e}")))?;
    if numerics.dt != dt {
        return Err(fail(format!(
            "stored dt = {dt:e} disagrees with ts*dx^2/4 = {:e}",
            numerics.dt
        )));
    }
    let model = ModelParams::new(beta, gamma, epsilon, diff)
        .map_err(|e| fail(format!("bad model parameters: {e}")))?;
    let pin = PinningSpec { u_star, v_star, ..PinningSpec::centered(n) };

    let mut fields = FieldPair::zeros(n);
    let expected = (n + 1) * (n + 1);
    for k in 0..expected {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| fail(format!("field data ends after {k} of {expected} points")))?;
        let mut parts = line.split_ascii_whitespace();
        let mut field = |name: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| fail(format!("line {}: missing {name}", lineno + 1)))?
                .parse()
                .map_err(|e| fail(format!("line {}: bad {name}: {e}", lineno + 1)))
        };
        let (i, j) = (field("i")? as usize, field("j")? as usize);
        if (i, j) != (k / (n + 1), k % (n + 1)) {
            return Err(fail(format!("line {}: point ({i}, {j}) out of sequence", lineno + 1)));
        }
        let (u1, u2) = (field("u1")?, field("u2")?);
        if !(u1.is_finite() && u2.is_finite()) {
            return Err(fail(format!("line {}: non-finite field value", lineno + 1)));
        }
        fields.u1.set(i, j, u1);
        fields.u2.set(i, j, u2);
    }
    if let Some((lineno, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(fail(format!("line {}: trailing data `{line}`", lineno + 1)));
    }

    let frame = FrameState { cx, cy, omega, theta, rx, ry };
    SimState::from_parts(model, numerics, pin, fields, frame, step_index, engaged)
}

fn header_value<'t>(
    lines: &mut impl Iterator<Item = (usize, &'t str)>,
    expect: &str,
    src: &Path,
) -> Result<&'t str> {
    let fail = |msg: String| SimError::Parse { path: src.to_path_buf(), msg };
    let (k, line) =
        lines.next().ok_or_else(|| fail(format!("file ends before the `{expect}` header line")))?;
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| fail(format!("line {}: expected `{expect}=...`", k + 1)))?;
    if key != expect {
        return Err(fail(format!("line {}: expected key `{expect}`, found `{key}`", k + 1)));
    }
    Ok(value)
}

pub fn read_snapshot(path: impl AsRef<Path>, diff: [[f64; 2]; 2]) -> Result<SimState> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            SimError::MissingSnapshot(path.to_path_buf())
        } else {
            SimError::Io(e)
        }
    })?;
    parse_snapshot(&text, diff, path)
}
