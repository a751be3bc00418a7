//! Wall-clock timing of classification, online updates, full training and
//! the per-image pipeline stages.

use std::time::{Duration, Instant};

use doorsom_core::canny::canny;
use doorsom_core::doorfeat::{build_feature_vector, find_post_candidates};
use doorsom_core::linefit::detect_lines;
use doorsom_core::pipeline::{detect_doors, DoorModel};
use doorsom_core::som::{train, train_step, SomLattice};
use doorsom_core::GrayImage;

use crate::error::Result;

pub const DEFAULT_REPS: usize = 100;

/// Medians in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub reps: usize,
    pub candidates: usize,
    pub classification: f64,
    pub train_step: f64,
    pub full_train: f64,
    pub canny: f64,
    pub lines: f64,
    pub features: f64,
    pub detect: f64,
}

impl BenchReport {
    /// Attribute/value table, seconds with microsecond resolution.
    pub fn to_table(&self) -> String {
        let rows = [
            ("Pattern Classification Time", self.classification),
            ("Learning Update Time", self.train_step),
            ("Initial Update Time", self.full_train),
            ("Edge Detection Time", self.canny),
            ("Line Fitting Time", self.lines),
            ("Feature Extraction Time", self.features),
            ("Full Detection Time", self.detect),
        ];
        let mut out = format!("{:<32}{:>14}\n", "Attribute", "Value (sec)");
        for (label, v) in rows {
            out.push_str(&format!("{label:<32}{v:>14.6}\n"));
        }
        out.push_str(&format!(
            "# median of {} repetitions, {} candidates\n",
            self.reps, self.candidates
        ));
        out
    }
}

fn median_secs<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    let mut t: Vec<Duration> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed()
        })
        .collect();
    t.sort_unstable();
    let mid = t.len() / 2;
    let m = if t.len().is_multiple_of(2) {
        (t[mid - 1] + t[mid]) / 2
    } else {
        t[mid]
    };
    m.as_secs_f64()
}

/// Times every stage on `img`. Training runs use the image's normalized
/// candidate vectors, or the model's own weight vectors when the image has
/// no candidates.
pub fn bench(model: &DoorModel, img: &GrayImage, reps: usize) -> Result<BenchReport> {
    model.validate()?;
    let reps = reps.max(1);
    let cfg = &model.config;

    let edges = canny(img, &cfg.canny)?;
    let segs = detect_lines(&edges, &cfg.lines);
    let cands = find_post_candidates(&segs, img, &cfg.features);
    let mut data = Vec::with_capacity(cands.len());
    for c in &cands {
        data.push(build_feature_vector(c, img, &cfg.features, Some(&model.norm))?.values);
    }
    if data.is_empty() {
        data = model
            .lattice
            .weights()
            .chunks(model.lattice.dim())
            .map(<[f64]>::to_vec)
            .collect();
    }

    let mut t_canny = Ok(());
    let canny_s = median_secs(reps, || t_canny = canny(img, &cfg.canny).map(drop));
    t_canny?;
    let lines_s = median_secs(reps, || {
        std::hint::black_box(detect_lines(&edges, &cfg.lines));
    });
    let mut t_feat = Ok(());
    let features_s = median_secs(reps, || {
        let cs = find_post_candidates(&segs, img, &cfg.features);
        for c in &cs {
            if let Err(e) = build_feature_vector(c, img, &cfg.features, Some(&model.norm)) {
                t_feat = Err(e);
            }
        }
    });
    t_feat?;
    let mut t_detect = Ok(());
    let detect_s = median_secs(reps, || t_detect = detect_doors(img, model).map(drop));
    t_detect?;

    let x = &data[0];
    let mut t_cls = Ok(());
    let classification = median_secs(reps, || {
        t_cls = model.classify(std::hint::black_box(x)).map(drop);
    });
    t_cls?;

    let mut lattice = model.lattice.clone();
    let schedule = &cfg.schedule;
    let mut n = 0usize;
    let mut t_step = Ok(());
    let step_s = median_secs(reps, || {
        t_step = train_step(
            &mut lattice,
            &data[n % data.len()],
            schedule,
            n % schedule.iterations,
        )
        .map(drop);
        n += 1;
    });
    t_step?;

    let mut seed = 0u64;
    let mut t_train = Ok(());
    let full_s = median_secs(reps, || {
        t_train = SomLattice::init(cfg.rows, cfg.cols, cfg.features.dim(), seed)
            .and_then(|mut l| train(&mut l, &data, schedule, seed))
            .map(drop);
        seed += 1;
    });
    t_train?;

    Ok(BenchReport {
        reps,
        candidates: cands.len(),
        classification,
        train_step: step_s,
        full_train: full_s,
        canny: canny_s,
        lines: lines_s,
        features: features_s,
        detect: detect_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        let mut i = 0u64;
        let m = median_secs(3, || {
            i += 1;
            std::thread::sleep(Duration::from_millis(i));
        });
        assert!(m >= 0.002, "{m}");
    }

    #[test]
    fn table_has_microsecond_resolution() {
        let r = BenchReport {
            reps: 100,
            candidates: 2,
            classification: 0.0000042,
            train_step: 0.00001,
            full_train: 0.05,
            canny: 0.001,
            lines: 0.001,
            features: 0.001,
            detect: 0.003,
        };
        let t = r.to_table();
        assert!(t.contains("Pattern Classification Time"));
        assert!(
            t.lines()
                .any(|l| l.starts_with("Pattern") && l.ends_with("0.000004")),
            "{t}"
        );
        assert!(t.contains("Initial Update Time"));
        assert!(t.contains("Learning Update Time"));
    }
}
