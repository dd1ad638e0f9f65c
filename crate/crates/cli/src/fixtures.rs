use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecs_core::d1family::{self, D1Data};
use ecs_core::d2family::{self, D2Data};

use crate::commands::CliError;

/// Built-in name, optionally with `:N` for the dimension.
fn split(spec: &str) -> Result<(&str, Option<usize>), CliError> {
    match spec.split_once(':') {
        None => Ok((spec, None)),
        Some((name, n)) => n
            .parse()
            .map(|n| (name, Some(n)))
            .map_err(|_| CliError::Input(format!("bad dimension in fixture {spec:?}"))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))
}

pub fn d1(spec: &str, seed: u64) -> Result<D1Data, CliError> {
    let (name, n) = split(spec)?;
    match name {
        "sine" => Ok(d1family::sine_example()),
        "random" => {
            let n = n.unwrap_or(4);
            if !(4..=12).contains(&n) {
                return Err(CliError::Input(format!(
                    "random data needs 4 ≤ n ≤ 12, got {n}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(d1family::random_d1data(&mut rng, n))
        }
        _ => read_json(Path::new(spec)),
    }
}

pub fn d2(spec: &str) -> Result<D2Data, CliError> {
    let (name, n) = split(spec)?;
    match name {
        "flat" => Ok(d2family::flat_fixture()),
        "nonflat" => Ok(d2family::nonflat_fixture(n.unwrap_or(4), 1)?),
        _ => read_json(Path::new(spec)),
    }
}

pub enum Family {
    D1(D1Data),
    D2(Box<D2Data>),
}

/// D1 names, D2 names, or a file holding either kind of data.
pub fn any(spec: &str, seed: u64) -> Result<Family, CliError> {
    let (name, _) = split(spec)?;
    match name {
        "sine" | "random" => d1(spec, seed).map(Family::D1),
        "flat" | "nonflat" => d2(spec).map(|d| Family::D2(Box::new(d))),
        _ => {
            let value: serde_json::Value = read_json(Path::new(spec))?;
            if value.get("conn").is_some() {
                serde_json::from_value(value).map(|d| Family::D2(Box::new(d)))
            } else {
                serde_json::from_value(value).map(Family::D1)
            }
            .map_err(|e| CliError::Input(format!("cannot parse {spec}: {e}")))
        }
    }
}

pub fn septuple(path: &str) -> Result<ecs_core::riccati::Septuple, CliError> {
    read_json(Path::new(path))
}
