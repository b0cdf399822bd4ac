//! Parsing of `--phi` and `--lambda0` values, and snapping of a typed-in
//! phase onto the nearby exactly tuned one.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use starwalk::spectral::{label_graph, tune_phase, SideLabel, ACTIVITY_TOL};
use starwalk::{Branch, StarGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiArg {
    Auto,
    Value(f64),
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("cannot read {what} from {s:?}"))
}

/// Accepts `auto`, plain numbers, and multiples of pi such as `2pi`,
/// `-pi/2`, `3*pi/4` or `2π`.
impl FromStr for PhiArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t: String = s.trim().to_lowercase().replace('π', "pi").split_whitespace().collect();
        if t == "auto" {
            return Ok(PhiArg::Auto);
        }
        let Some((head, tail)) = t.split_once("pi") else {
            return number(&t, "phi").map(PhiArg::Value);
        };
        let factor = match head.trim_end_matches('*') {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => number(h, "phi")?,
        };
        let divisor = match tail {
            "" => 1.0,
            d => match d.strip_prefix('/') {
                Some(d) => number(d, "phi")?,
                None => return Err(format!("cannot read phi from {s:?}")),
            },
        };
        if divisor == 0.0 {
            return Err(format!("phi {s:?} divides by zero"));
        }
        Ok(PhiArg::Value(factor * PI / divisor))
    }
}

/// `re,im` or a bare real part.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re] => Ok(Complex64::new(number(re, "lambda0")?, 0.0)),
        [re, im] => Ok(Complex64::new(number(re, "lambda0")?, number(im, "lambda0")?)),
        _ => Err(format!("lambda0 must be \"re,im\", got {s:?}")),
    }
}

/// If a left eigenvalue at `phi` lies within `tol` of a right active
/// eigenvalue without equalling it, the phase that makes them equal.
pub fn snap_phase(graph: &StarGraph, phi: f64, tol: f64) -> starwalk::Result<Option<f64>> {
    if tol <= 0.0 {
        return Ok(None);
    }
    let spectrum = label_graph(graph, phi, ACTIVITY_TOL)?;
    let mut best: Option<(f64, f64)> = None;
    for lambda in spectrum.active_eigenvalues(SideLabel::Right) {
        for branch in [Branch::Plus, Branch::Minus] {
            let d = (branch.left_eigenvalue(phi) - lambda).norm();
            if d >= tol || d < 1e-12 || best.is_some_and(|(bd, _)| bd <= d) {
                continue;
            }
            let cand = tune_phase(lambda).into_iter().find(|c| c.branch == branch).unwrap();
            // the left eigenvalue has period 4π in φ
            let k = ((phi - cand.phi) / (4.0 * PI)).round();
            best = Some((d, cand.phi + 4.0 * PI * k));
        }
    }
    Ok(best.map(|(_, p)| p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(s: &str) -> f64 {
        match s.parse::<PhiArg>().unwrap() {
            PhiArg::Value(v) => v,
            PhiArg::Auto => panic!("auto"),
        }
    }

    #[test]
    fn phi_forms() {
        assert_eq!("auto".parse::<PhiArg>().unwrap(), PhiArg::Auto);
        assert_eq!(value("1.25"), 1.25);
        assert_eq!(value("2pi"), 2.0 * PI);
        assert_eq!(value("2*pi"), 2.0 * PI);
        assert_eq!(value("2π"), 2.0 * PI);
        assert_eq!(value("-pi/2"), -PI / 2.0);
        assert_eq!(value("3pi/4"), 3.0 * PI / 4.0);
        assert_eq!(value("pi"), PI);
        for bad in ["", "two", "pi/0", "2pix", "nan"] {
            assert!(bad.parse::<PhiArg>().is_err(), "{bad}");
        }
    }

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("-1,0").unwrap(), Complex64::new(-1.0, 0.0));
        assert_eq!(parse_complex("0.5, -0.25").unwrap(), Complex64::new(0.5, -0.25));
        assert_eq!(parse_complex("1").unwrap(), Complex64::new(1.0, 0.0));
        assert!(parse_complex("1,2,3").is_err());
    }
}
