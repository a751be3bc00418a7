//! Model file format.
//!
//! ```text
//! "SOMDOOR1"                 8 bytes
//! format version             u32 LE
//! rows, cols, dim            u32 LE each
//! weights                    rows*cols*dim f64 LE, row-major by node
//! labels                     rows*cols bytes, 0 = non-door, 1 = door
//! normalization min, max     dim f64 LE each
//! config length              u32 LE
//! config                     UTF-8 `key=value` lines
//! ```
//!
//! Reals in the config block use Rust's shortest round-trip formatting, so a
//! load/save cycle reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use doorsom_core::doorfeat::NormalizationStats;
use doorsom_core::pipeline::{DoorModel, PipelineConfig, MODEL_FORMAT_VERSION};
use doorsom_core::som::{Class, NeuronLabelMap, SomLattice};
use thiserror::Error;

use crate::error::{io_err, Error, Result};

pub const MAGIC: &[u8; 8] = b"SOMDOOR1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("bad magic")]
    BadMagic,
    #[error("version mismatch: file has {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("truncated {field}: expected {expected} bytes, found {found}")]
    Truncated {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid {field}: {msg}")]
    Invalid { field: String, msg: String },
    #[error("{0} trailing bytes after config")]
    Trailing(usize),
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field: field.into(),
        msg: msg.into(),
    }
}

fn config_pairs(c: &PipelineConfig) -> Vec<(&'static str, String)> {
    let f = &c.features;
    let s = &c.schedule;
    vec![
        ("canny.sigma", c.canny.sigma.to_string()),
        ("canny.low", c.canny.low.to_string()),
        ("canny.high", c.canny.high.to_string()),
        ("lines.dev_tol", c.lines.dev_tol.to_string()),
        ("lines.angle_tol", c.lines.angle_tol.to_string()),
        ("lines.gap_tol", c.lines.gap_tol.to_string()),
        ("lines.merge_offset", c.lines.merge_offset.to_string()),
        ("lines.min_len", c.lines.min_len.to_string()),
        ("features.vertical_tol_deg", f.vertical_tol_deg.to_string()),
        ("features.min_post_frac", f.min_post_frac.to_string()),
        ("features.horizon_frac", f.horizon_frac.to_string()),
        ("features.min_width_frac", f.min_width_frac.to_string()),
        ("features.max_width_frac", f.max_width_frac.to_string()),
        ("features.columns", f.columns.to_string()),
        ("features.window", f.window.to_string()),
        ("features.bins", f.bins.to_string()),
        ("som.rows", c.rows.to_string()),
        ("som.cols", c.cols.to_string()),
        ("schedule.eta_order", s.eta_order.to_string()),
        ("schedule.eta_conv", s.eta_conv.to_string()),
        ("schedule.sigma0", s.sigma0.to_string()),
        ("schedule.tau_sigma", s.tau_sigma.to_string()),
        ("schedule.tau_eta", s.tau_eta.to_string()),
        ("schedule.h0", s.h0.to_string()),
        ("schedule.sigma_min", s.sigma_min.to_string()),
        ("schedule.iterations", s.iterations.to_string()),
        ("schedule.order_frac", s.order_frac.to_string()),
        ("schedule.sample_every", s.sample_every.to_string()),
        ("iou", c.iou.to_string()),
    ]
}

fn parse_config(text: &str) -> std::result::Result<PipelineConfig, ModelError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid("config", format!("line {} is not key=value", i + 1)))?;
        if map.insert(k, v).is_some() {
            return Err(invalid(k, "duplicate key"));
        }
    }
    let mut take = |key: &str| -> std::result::Result<&str, ModelError> {
        map.remove(key).ok_or_else(|| invalid(key, "missing"))
    };
    fn real(key: &str, v: &str) -> std::result::Result<f64, ModelError> {
        v.parse()
            .map_err(|_| invalid(key, format!("not a number: {v:?}")))
    }
    fn int(key: &str, v: &str) -> std::result::Result<usize, ModelError> {
        v.parse()
            .map_err(|_| invalid(key, format!("not an integer: {v:?}")))
    }
    let mut c = PipelineConfig::default();
    macro_rules! set {
        ($($key:literal => $place:expr, $conv:ident;)*) => {
            $( $place = $conv($key, take($key)?)?; )*
        };
    }
    set! {
        "canny.sigma" => c.canny.sigma, real;
        "canny.low" => c.canny.low, real;
        "canny.high" => c.canny.high, real;
        "lines.dev_tol" => c.lines.dev_tol, real;
        "lines.angle_tol" => c.lines.angle_tol, real;
        "lines.gap_tol" => c.lines.gap_tol, real;
        "lines.merge_offset" => c.lines.merge_offset, real;
        "lines.min_len" => c.lines.min_len, real;
        "features.vertical_tol_deg" => c.features.vertical_tol_deg, real;
        "features.min_post_frac" => c.features.min_post_frac, real;
        "features.horizon_frac" => c.features.horizon_frac, real;
        "features.min_width_frac" => c.features.min_width_frac, real;
        "features.max_width_frac" => c.features.max_width_frac, real;
        "features.columns" => c.features.columns, int;
        "features.window" => c.features.window, int;
        "features.bins" => c.features.bins, int;
        "som.rows" => c.rows, int;
        "som.cols" => c.cols, int;
        "schedule.eta_order" => c.schedule.eta_order, real;
        "schedule.eta_conv" => c.schedule.eta_conv, real;
        "schedule.sigma0" => c.schedule.sigma0, real;
        "schedule.tau_sigma" => c.schedule.tau_sigma, real;
        "schedule.tau_eta" => c.schedule.tau_eta, real;
        "schedule.h0" => c.schedule.h0, real;
        "schedule.sigma_min" => c.schedule.sigma_min, real;
        "schedule.iterations" => c.schedule.iterations, int;
        "schedule.order_frac" => c.schedule.order_frac, real;
        "schedule.sample_every" => c.schedule.sample_every, int;
        "iou" => c.iou, real;
    }
    if let Some(k) = map.keys().next() {
        return Err(invalid(*k, "unknown key"));
    }
    Ok(c)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

fn put_reals(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(model: &DoorModel) -> Vec<u8> {
    let l = &model.lattice;
    let mut out = Vec::with_capacity(64 + l.weights().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&model.format_version.to_le_bytes());
    put_u32(&mut out, l.rows());
    put_u32(&mut out, l.cols());
    put_u32(&mut out, l.dim());
    put_reals(&mut out, l.weights());
    out.extend(model.labels.labels().iter().map(|c| c.as_u8()));
    put_reals(&mut out, model.norm.min());
    put_reals(&mut out, model.norm.max());
    let text: String = config_pairs(&model.config)
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    put_u32(&mut out, text.len());
    out.extend_from_slice(text.as_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, field: &'static str, n: usize) -> std::result::Result<&'a [u8], ModelError> {
        let found = self.bytes.len() - self.pos;
        if found < n {
            return Err(ModelError::Truncated {
                field,
                expected: n,
                found,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &'static str) -> std::result::Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(field, 4)?.try_into().unwrap()))
    }

    fn reals(
        &mut self,
        field: &'static str,
        n: usize,
    ) -> std::result::Result<Vec<f64>, ModelError> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| invalid(field, "length overflows"))?;
        Ok(self
            .take(field, len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> std::result::Result<DoorModel, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take("magic", 8).map_err(|_| ModelError::BadMagic)? != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = r.u32("format_version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let dim = r.u32("dim")? as usize;
    let nodes = rows
        .checked_mul(cols)
        .filter(|n| n.checked_mul(dim).is_some())
        .ok_or_else(|| invalid("rows", "lattice size overflows"))?;
    let weights = r.reals("weights", nodes * dim)?;
    let labels = r
        .take("labels", nodes)?
        .iter()
        .map(|&b| {
            Class::from_u8(b).ok_or_else(|| invalid("labels", format!("byte {b} is not 0 or 1")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let min = r.reals("norm.min", dim)?;
    let max = r.reals("norm.max", dim)?;
    let text_len = r.u32("config_length")? as usize;
    let text = std::str::from_utf8(r.take("config", text_len)?)
        .map_err(|_| invalid("config", "not UTF-8"))?;
    let config = parse_config(text)?;
    if r.pos != bytes.len() {
        return Err(ModelError::Trailing(bytes.len() - r.pos));
    }

    let core = |field: &str| {
        let field = field.to_string();
        move |e: doorsom_core::Error| invalid(field, e.to_string())
    };
    let lattice = SomLattice::from_weights(rows, cols, dim, weights).map_err(core("weights"))?;
    let labels = NeuronLabelMap::from_labels(rows, cols, labels).map_err(core("labels"))?;
    let norm = NormalizationStats::new(min, max).map_err(core("norm"))?;
    let model = DoorModel {
        lattice,
        labels,
        norm,
        config,
        format_version: version,
    };
    model.validate().map_err(core("config"))?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &DoorModel) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<DoorModel> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    from_bytes(&bytes).map_err(|source| Error::Model {
        path: path.into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use doorsom_core::som::{SomLattice, TrainSchedule};
    use proptest::prelude::*;

    fn model(rows: usize, cols: usize, seed: u64) -> DoorModel {
        let config = PipelineConfig {
            rows,
            cols,
            schedule: TrainSchedule {
                eta_conv: 0.0015,
                ..TrainSchedule::default()
            },
            ..PipelineConfig::default()
        };
        let dim = config.features.dim();
        let lattice = SomLattice::init(rows, cols, dim, seed).unwrap();
        let labels = (0..rows * cols)
            .map(|i| {
                if (i as u64 ^ seed).is_multiple_of(3) {
                    Class::Door
                } else {
                    Class::NonDoor
                }
            })
            .collect();
        DoorModel {
            lattice,
            labels: NeuronLabelMap::from_labels(rows, cols, labels).unwrap(),
            norm: NormalizationStats::new(
                vec![0.0; dim],
                (0..dim).map(|i| 0.1 * i as f64 + 1.0 / 3.0).collect(),
            )
            .unwrap(),
            config,
            format_version: MODEL_FORMAT_VERSION,
        }
    }

    #[test]
    fn header_layout() {
        let b = to_bytes(&model(8, 8, 1));
        assert_eq!(&b[..8], b"SOMDOOR1");
        assert_eq!(
            u32::from_le_bytes(b[8..12].try_into().unwrap()),
            MODEL_FORMAT_VERSION
        );
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(b[20..24].try_into().unwrap()), 11);
        let w0 = f64::from_le_bytes(b[24..32].try_into().unwrap());
        assert_eq!(w0, model(8, 8, 1).lattice.weights()[0]);
    }

    #[test]
    fn corrupted_files_name_the_field() {
        let good = to_bytes(&model(4, 5, 2));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(from_bytes(&bad).unwrap_err(), ModelError::BadMagic);
        assert_eq!(from_bytes(b"SOM").unwrap_err(), ModelError::BadMagic);

        let mut bad = good.clone();
        bad[8] = 9;
        assert!(matches!(
            from_bytes(&bad).unwrap_err(),
            ModelError::Version { found: 9, .. }
        ));

        let cut = 24 + 100;
        let err = from_bytes(&good[..cut]).unwrap_err();
        assert_eq!(
            err,
            ModelError::Truncated {
                field: "weights",
                expected: 4 * 5 * 11 * 8,
                found: 100
            }
        );
        assert!(err.to_string().contains("expected 1760 bytes, found 100"));

        let labels_at = 24 + 4 * 5 * 11 * 8;
        let mut bad = good.clone();
        bad[labels_at] = 7;
        assert!(from_bytes(&bad).unwrap_err().to_string().contains("labels"));

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(from_bytes(&bad).unwrap_err(), ModelError::Trailing(1));

        let key = b"canny.sigma=1.4";
        let at = good.windows(key.len()).position(|w| w == key).unwrap();
        let mut bad = good.clone();
        bad[at + key.len() - 3] = b'x';
        let err = from_bytes(&bad).unwrap_err();
        assert!(err.to_string().contains("canny.sigma"), "{err}");
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        let c = PipelineConfig::default();
        let text: String = config_pairs(&c)
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        assert_eq!(parse_config(&text).unwrap(), c);
        let extra = format!("{text}bogus=1\n");
        assert!(parse_config(&extra)
            .unwrap_err()
            .to_string()
            .contains("bogus"));
        let missing = text.replace("iou=0.5\n", "");
        assert!(parse_config(&missing)
            .unwrap_err()
            .to_string()
            .contains("iou"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_identity(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
            let m = model(rows, cols, seed);
            let bytes = to_bytes(&m);
            let back = from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(to_bytes(&back), bytes);
        }
    }
}
