//! Synthetic corpus on disk: `<dir>/<category>/<index>.pgm` plus
//! `<dir>/truth.txt` with one record per image.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use doorsom_core::doorfeat::Region;
use doorsom_core::synth::{render_scene, sample_scene, Category};
use doorsom_core::GrayImage;
use rayon::prelude::*;

use crate::error::{io_err, Error, Result};
use crate::pnm::{read_gray, write_pgm};

pub const TRUTH_FILE: &str = "truth.txt";

/// `category index x_left y_top x_right y_bottom concavity gap_delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthRecord {
    pub category: Category,
    pub index: usize,
    pub x_left: usize,
    pub y_top: usize,
    pub x_right: usize,
    pub y_bottom: usize,
    pub concavity: usize,
    pub gap_delta: u8,
}

impl TruthRecord {
    pub fn door(&self) -> Region {
        Region {
            x_left: self.x_left as f64,
            y_top: self.y_top as f64,
            x_right: self.x_right as f64,
            y_bottom: self.y_bottom as f64,
        }
    }

    pub fn image_path(&self, dir: &Path) -> PathBuf {
        dir.join(self.category.name())
            .join(format!("{}.pgm", self.index))
    }
}

impl fmt::Display for TruthRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {} {}",
            self.category.name(),
            self.index,
            self.x_left,
            self.y_top,
            self.x_right,
            self.y_bottom,
            self.concavity,
            self.gap_delta
        )
    }
}

impl FromStr for TruthRecord {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(format!("expected 8 fields, found {}", fields.len()));
        }
        let category = Category::parse(fields[0])
            .ok_or_else(|| format!("unknown category {:?}", fields[0]))?;
        let num = |i: usize, name: &str| -> std::result::Result<usize, String> {
            fields[i]
                .parse()
                .map_err(|_| format!("bad {name} {:?}", fields[i]))
        };
        Ok(TruthRecord {
            category,
            index: num(1, "index")?,
            x_left: num(2, "x_left")?,
            y_top: num(3, "y_top")?,
            x_right: num(4, "x_right")?,
            y_bottom: num(5, "y_bottom")?,
            concavity: num(6, "concavity")?,
            gap_delta: fields[7]
                .parse()
                .map_err(|_| format!("bad gap_delta {:?}", fields[7]))?,
        })
    }
}

/// Renders `n` scenes per category into `dir`. Each scene's seed derives
/// from `seed`, its category and its index, so the output does not depend
/// on scheduling.
pub fn generate_corpus(
    dir: &Path,
    n: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> Result<Vec<TruthRecord>> {
    if n == 0 {
        return Err(doorsom_core::Error::InvalidArgument("corpus needs n >= 1".into()).into());
    }
    for cat in Category::ALL {
        let sub = dir.join(cat.name());
        fs::create_dir_all(&sub).map_err(io_err(sub))?;
    }
    let jobs: Vec<(Category, usize)> = Category::ALL
        .iter()
        .flat_map(|&c| (0..n).map(move |i| (c, i)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(category, index)| {
            let spec = sample_scene(category, index, seed, width, height);
            let (img, _) = render_scene(&spec)?;
            let record = TruthRecord {
                category,
                index,
                x_left: spec.door_left,
                y_top: spec.door_top,
                x_right: spec.door_right,
                y_bottom: spec.door_bottom,
                concavity: spec.concavity,
                gap_delta: spec.gap_delta,
            };
            write_pgm(&record.image_path(dir), &img)?;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    let text: String = records.iter().map(|r| format!("{r}\n")).collect();
    let truth = dir.join(TRUTH_FILE);
    fs::write(&truth, text).map_err(io_err(truth))?;
    Ok(records)
}

pub fn read_truth(dir: &Path) -> Result<Vec<TruthRecord>> {
    let path = dir.join(TRUTH_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse().map_err(|msg| Error::Truth {
                path: path.clone(),
                line: i + 1,
                msg,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusImage {
    pub record: TruthRecord,
    pub image: GrayImage,
}

/// Reads the truth file and every image it lists.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusImage>> {
    read_truth(dir)?
        .into_par_iter()
        .map(|record| {
            let image = read_gray(&record.image_path(dir))?;
            Ok(CorpusImage { record, image })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let r = TruthRecord {
            category: Category::Night,
            index: 12,
            x_left: 100,
            y_top: 40,
            x_right: 170,
            y_bottom: 194,
            concavity: 6,
            gap_delta: 40,
        };
        let s = r.to_string();
        assert_eq!(s, "night 12 100 40 170 194 6 40");
        assert_eq!(s.parse::<TruthRecord>().unwrap(), r);
        assert!("dusk 1 2 3 4 5 6 7".parse::<TruthRecord>().is_err());
        assert!("day 1 2 3".parse::<TruthRecord>().is_err());
    }

    #[test]
    fn generation_is_deterministic_and_complete() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = generate_corpus(a.path(), 3, 5, 160, 120).unwrap();
        let rb = generate_corpus(b.path(), 3, 5, 160, 120).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(ra.len(), 9);
        for r in &ra {
            let fa = fs::read(r.image_path(a.path())).unwrap();
            let fb = fs::read(r.image_path(b.path())).unwrap();
            assert_eq!(fa, fb);
        }
        assert_eq!(
            fs::read(a.path().join(TRUTH_FILE)).unwrap(),
            fs::read(b.path().join(TRUTH_FILE)).unwrap()
        );
        let loaded = load_corpus(a.path()).unwrap();
        assert_eq!(loaded.len(), 9);
        assert_eq!(loaded[4].record, ra[4]);
        assert!(generate_corpus(a.path(), 0, 5, 160, 120).is_err());
    }

    #[test]
    fn bad_truth_line_is_located() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join(TRUTH_FILE), "day 0 1 2 3 4 5 6\nday x\n").unwrap();
        let err = read_truth(d.path()).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }
}
