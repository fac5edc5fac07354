//! Checkpoints: text header lines, an `end` line, then the parameters and
//! both Adam moment vectors as little-endian f64.
//!
//! ```text
//! swarmnav-ckpt v1
//! config_hash <hex>
//! obs_width 90
//! hidden_layers 2
//! hidden_width 64
//! actions 6
//! env_steps 4096
//! updates 2
//! adam_t 20
//! adam_betas 0.9 0.999 1e-8
//! params 10246
//! end
//! ```

use std::path::{Path, PathBuf};

use swarmnav_core::nn::{AdamState, NetworkShape, PolicyParams};
use swarmnav_core::ppo::TrainState;

use super::{fmt_f64, strip_header};
use crate::error::{CliError, Result};

pub const HEADER: &str = "swarmnav-ckpt v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn shape(&self) -> NetworkShape {
        self.state.params.shape()
    }
}

pub fn file_name(env_steps: u64) -> String {
    format!("ckpt-{env_steps:012}.bin")
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let s = &ckpt.state;
    let shape = s.params.shape();
    let a = &s.adam;
    let mut out = format!(
        "{HEADER}\nconfig_hash {}\nobs_width {}\nhidden_layers {}\nhidden_width {}\nactions {}\n\
         env_steps {}\nupdates {}\nadam_t {}\nadam_betas {} {} {}\nparams {}\nend\n",
        ckpt.config_hash,
        shape.input,
        shape.hidden_layers,
        shape.hidden_width,
        shape.actions,
        s.env_steps,
        s.updates,
        a.t,
        fmt_f64(a.beta1),
        fmt_f64(a.beta2),
        fmt_f64(a.eps),
        s.params.len()
    )
    .into_bytes();
    for v in [s.params.data(), &a.m, &a.v] {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let marker = b"\nend\n";
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| CliError::parse(path, 1, "checkpoint header has no end line"))?;
    let head = std::str::from_utf8(&bytes[..split + 1])
        .map_err(|_| CliError::parse(path, 1, "checkpoint header is not text"))?;
    let body = strip_header(head, HEADER, path)?;
    let data = &bytes[split + marker.len()..];

    let mut fields = std::collections::BTreeMap::new();
    for (i, line) in body.lines().enumerate() {
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| CliError::parse(path, i + 2, format!("malformed line {line:?}")))?;
        fields.insert(k, (i + 2, v));
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| CliError::parse(path, 1, format!("missing {k}")))
    };
    let int = |k: &str| -> Result<u64> {
        let (line, v) = get(k)?;
        v.parse().map_err(|_| CliError::parse(path, line, format!("{k}: {v:?} is not an integer")))
    };
    let shape = NetworkShape::new(
        int("obs_width")? as usize,
        int("hidden_layers")? as usize,
        int("hidden_width")? as usize,
        int("actions")? as usize,
    );
    let count = int("params")? as usize;
    if count != shape.param_count() {
        return Err(CliError::parse(
            path,
            get("params")?.0,
            format!("{count} parameters do not fit the declared shape ({})", shape.param_count()),
        ));
    }
    if data.len() != 3 * 8 * count {
        return Err(CliError::Other(format!(
            "{}: expected {} data bytes, found {}",
            path.display(),
            3 * 8 * count,
            data.len()
        )));
    }
    let floats: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let (line, betas) = get("adam_betas")?;
    let betas = betas
        .split_whitespace()
        .map(|b| super::parse_f64(b, path, line, "adam_betas"))
        .collect::<Result<Vec<_>>>()?;
    if betas.len() != 3 {
        return Err(CliError::parse(path, line, "adam_betas needs beta1 beta2 eps"));
    }
    let params = PolicyParams::from_data(shape, floats[..count].to_vec())?;
    let adam = AdamState {
        m: floats[count..2 * count].to_vec(),
        v: floats[2 * count..].to_vec(),
        t: int("adam_t")?,
        beta1: betas[0],
        beta2: betas[1],
        eps: betas[2],
    };
    Ok(Checkpoint {
        config_hash: get("config_hash")?.1.to_string(),
        state: TrainState {
            params,
            adam,
            env_steps: int("env_steps")?,
            updates: int("updates")?,
        },
    })
}

pub fn save(dir: &Path, ckpt: &Checkpoint) -> Result<PathBuf> {
    let path = dir.join(file_name(ckpt.state.env_steps));
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(ckpt)).map_err(CliError::io(&tmp))?;
    std::fs::rename(&tmp, &path).map_err(CliError::io(&path))?;
    Ok(path)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    decode(&bytes, path)
}

/// The checkpoint with the most environment steps in `dir`.
pub fn latest(dir: &Path) -> Result<Option<PathBuf>> {
    let mut best: Option<PathBuf> = None;
    for entry in std::fs::read_dir(dir).map_err(CliError::io(dir))? {
        let p = entry.map_err(CliError::io(dir))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("ckpt-") && name.ends_with(".bin") && best.as_ref().map_or(true, |b| p > *b) {
            best = Some(p);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use swarmnav_core::nn::init_params;

    fn sample() -> Checkpoint {
        let params = init_params(NetworkShape::new(5, 2, 4, 6), 9).unwrap();
        let mut adam = AdamState::new(params.len());
        adam.t = 7;
        adam.m[3] = -1.5e-300;
        adam.v[0] = f64::MIN_POSITIVE;
        Checkpoint {
            config_hash: "ab12".into(),
            state: TrainState {
                params,
                adam,
                env_steps: 4096,
                updates: 2,
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = decode(&encode(&c), Path::new("c")).unwrap();
        assert_eq!(back.state.params.data(), c.state.params.data());
        assert_eq!(back.state.adam, c.state.adam);
        assert_eq!((back.state.env_steps, back.state.updates), (4096, 2));
        assert_eq!(back.config_hash, "ab12");
    }

    #[test]
    fn refuses_other_versions_and_truncation() {
        let mut bytes = encode(&sample());
        let mut other = bytes.clone();
        other[15] = b'2';
        assert_eq!(decode(&other, Path::new("c")).unwrap_err().exit_code(), 3);
        bytes.pop();
        assert!(decode(&bytes, Path::new("c")).is_err());
    }

    #[test]
    fn names_sort_by_step() {
        assert!(file_name(999) < file_name(1000));
    }
}
