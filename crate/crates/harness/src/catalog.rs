//! Text specs for coefficients, potentials and diffeomorphisms.
//!
//! Scalars: `one`, `const:v`, `exp:a`, `radial_square:b`,
//! `squared_quadratic:a,b`, `bump:cx,cy,rho,amp`.
//! Tensors: `identity`, `iso:<scalar>`, `const:a11,a12,a22`,
//! `radial:base,eps`, `twisted:l1,l2,twist`.
//! Diffeos: `identity`, `random:n`, `bump:cx,cy,rho,ax,ay`.
//! Lists of scalars or diffeos are separated by `;`.

use std::f64::consts::PI;
use std::sync::Arc;

use electrothermal::coefficients::{ScalarCoefficient, TensorCoefficient};
use electrothermal::geometry::{make_bump_diffeo, DiffeoRef, Identity, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::parse_numbers;
use crate::HarnessError;

fn spec_error(spec: &str, msg: &str) -> HarnessError {
    HarnessError::Config(format!("'{spec}': {msg}"))
}

fn args<const N: usize>(spec: &str, rest: &str) -> Result<[f64; N], HarnessError> {
    let v = parse_numbers(rest).map_err(|e| spec_error(spec, &e))?;
    v.try_into()
        .map_err(|v: Vec<f64>| spec_error(spec, &format!("expected {N} numbers, got {}", v.len())))
}

fn split(spec: &str) -> (&str, &str) {
    spec.split_once(':').unwrap_or((spec, ""))
}

pub fn parse_scalar(spec: &str) -> Result<ScalarCoefficient, HarnessError> {
    let spec = spec.trim();
    let (kind, rest) = split(spec);
    let c = match kind {
        "one" if rest.is_empty() => ScalarCoefficient::one(),
        "const" => {
            let [value] = args(spec, rest)?;
            ScalarCoefficient::Constant { value }
        }
        "exp" => {
            let [alpha] = args(spec, rest)?;
            ScalarCoefficient::Exponential { alpha }
        }
        "radial_square" => {
            let [beta] = args(spec, rest)?;
            ScalarCoefficient::RadialSquare { beta }
        }
        "squared_quadratic" => {
            let [a, b] = args(spec, rest)?;
            ScalarCoefficient::SquaredQuadratic { a, b }
        }
        "bump" => {
            let [cx, cy, radius, amplitude] = args(spec, rest)?;
            if !(radius > 0.0) || amplitude <= -1.0 {
                return Err(spec_error(spec, "bump needs rho > 0 and amp > -1"));
            }
            ScalarCoefficient::Bump {
                center: [cx, cy],
                radius,
                amplitude,
            }
        }
        _ => return Err(spec_error(spec, "unknown scalar coefficient")),
    };
    check_positive_scalar(spec, &c)?;
    Ok(c)
}

/// Rejects scalars that are not positive on the closed unit disk.
fn check_positive_scalar(spec: &str, c: &ScalarCoefficient) -> Result<(), HarnessError> {
    for i in 0..=20 {
        for j in 0..64 {
            let r = i as f64 / 20.0;
            let th = 2.0 * PI * j as f64 / 64.0;
            let v = c.value(Point2::new(r * th.cos(), r * th.sin()));
            if !(v > 0.0) {
                return Err(spec_error(spec, "coefficient is not positive on the disk"));
            }
        }
    }
    Ok(())
}

pub fn parse_tensor(spec: &str) -> Result<TensorCoefficient, HarnessError> {
    let spec = spec.trim();
    let (kind, rest) = split(spec);
    Ok(match kind {
        "identity" if rest.is_empty() => TensorCoefficient::identity(),
        "iso" => TensorCoefficient::Isotropic {
            scalar: parse_scalar(rest)?,
        },
        "const" => {
            let [a11, a12, a22] = args(spec, rest)?;
            if !(a11 > 0.0 && a11 * a22 - a12 * a12 > 0.0) {
                return Err(spec_error(spec, "matrix is not positive definite"));
            }
            TensorCoefficient::Constant { a11, a12, a22 }
        }
        "radial" => {
            let [base, eps] = args(spec, rest)?;
            if !(base > 0.0 && base + eps.min(0.0) > 0.0) {
                return Err(spec_error(spec, "needs base > 0 and base + eps > 0"));
            }
            TensorCoefficient::Radial { base, eps }
        }
        "twisted" => {
            let [l1, l2, twist] = args(spec, rest)?;
            if !(l1 > 0.0 && l2 > 0.0) {
                return Err(spec_error(spec, "principal values must be positive"));
            }
            TensorCoefficient::Twisted { l1, l2, twist }
        }
        _ => return Err(spec_error(spec, "unknown tensor coefficient")),
    })
}

pub fn parse_scalar_list(spec: &str) -> Result<Vec<ScalarCoefficient>, HarnessError> {
    spec.split(';').map(parse_scalar).collect()
}

/// A named diffeomorphism.
#[derive(Clone)]
pub struct NamedDiffeo {
    pub label: String,
    pub map: DiffeoRef,
}

const RANDOM_ATTEMPTS: usize = 64;

/// Random bump map: center within 0.25 of the origin, radius in
/// `[0.4, 0.7)`, amplitude `0.3ρ·[0.4, 0.9)` in a random direction.
fn random_bump(rng: &mut ChaCha8Rng) -> Result<(String, DiffeoRef), HarnessError> {
    for _ in 0..RANDOM_ATTEMPTS {
        let (cr, ct) = (0.25 * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>());
        let rho = rng.gen_range(0.4..0.7);
        let (am, at) = (0.3 * rho * rng.gen_range(0.4..0.9), 2.0 * PI * rng.gen::<f64>());
        let c = Point2::new(cr * ct.cos(), cr * ct.sin());
        let a = Point2::new(am * at.cos(), am * at.sin());
        if let Ok(f) = make_bump_diffeo(c, rho, a) {
            let label = format!("bump(c=({:.4},{:.4}),rho={:.4},a=({:.4},{:.4}))", c.x, c.y, rho, a.x, a.y);
            return Ok((label, Arc::new(f)));
        }
    }
    Err(HarnessError::Config("could not draw a valid random bump diffeo".into()))
}

pub fn parse_diffeos(spec: &str, seed: u64) -> Result<Vec<NamedDiffeo>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for part in spec.split(';') {
        let part = part.trim();
        let (kind, rest) = split(part);
        match kind {
            "identity" if rest.is_empty() => out.push(NamedDiffeo {
                label: "identity".into(),
                map: Arc::new(Identity),
            }),
            "random" => {
                let n: usize = rest
                    .parse()
                    .ok()
                    .filter(|&n| (1..=32).contains(&n))
                    .ok_or_else(|| spec_error(part, "random:n needs 1 <= n <= 32"))?;
                for _ in 0..n {
                    let (label, map) = random_bump(&mut rng)?;
                    out.push(NamedDiffeo { label, map });
                }
            }
            "bump" => {
                let [cx, cy, rho, ax, ay] = args(part, rest)?;
                let f = make_bump_diffeo(Point2::new(cx, cy), rho, Point2::new(ax, ay))
                    .map_err(|e| spec_error(part, &e.to_string()))?;
                out.push(NamedDiffeo {
                    label: part.to_string(),
                    map: Arc::new(f),
                });
            }
            _ => return Err(spec_error(part, "unknown diffeomorphism")),
        }
    }
    Ok(out)
}
