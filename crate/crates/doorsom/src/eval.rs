//! Corpus-level training and evaluation. Feature extraction and detection
//! fan out over images; results are gathered in corpus order so the outcome
//! does not depend on thread scheduling.

use doorsom_core::pipeline::{
    detect_doors, fit_model, labeled_features, score_image, DoorModel, EvalReport, ImageOutcome,
    PipelineConfig,
};
use doorsom_core::som::{Class, TrainReport};
use rayon::prelude::*;

use crate::corpus::CorpusImage;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateCounts {
    pub images: usize,
    pub candidates: usize,
    pub doors: usize,
}

pub fn train_corpus(
    corpus: &[CorpusImage],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(DoorModel, TrainReport, CandidateCounts)> {
    cfg.validate()?;
    let per_image = corpus
        .par_iter()
        .map(|ci| labeled_features(&ci.image, Some(&ci.record.door()), cfg))
        .collect::<doorsom_core::Result<Vec<_>>>()?;
    let samples: Vec<_> = per_image.into_iter().flatten().collect();
    let counts = CandidateCounts {
        images: corpus.len(),
        candidates: samples.len(),
        doors: samples.iter().filter(|(_, c)| *c == Class::Door).count(),
    };
    let (model, report) = fit_model(&samples, corpus.len(), cfg, seed)?;
    Ok((model, report, counts))
}

/// Per-image outcomes in corpus order.
pub fn score_corpus(model: &DoorModel, corpus: &[CorpusImage]) -> Result<Vec<ImageOutcome>> {
    model.validate()?;
    let iou = model.config.iou;
    Ok(corpus
        .par_iter()
        .map(|ci| {
            let res = detect_doors(&ci.image, model)?;
            Ok(score_image(
                ci.record.category,
                &res,
                Some(&ci.record.door()),
                iou,
            ))
        })
        .collect::<doorsom_core::Result<Vec<_>>>()?)
}

pub fn evaluate_corpus(model: &DoorModel, corpus: &[CorpusImage]) -> Result<EvalReport> {
    Ok(EvalReport::from_outcomes(&score_corpus(model, corpus)?))
}

/// Error curve as `iteration quantization misclassification` lines; the last
/// column is `-` where no labeled sample was taken.
pub fn curve_text(report: &TrainReport) -> String {
    let mut out = String::from("iteration quantization misclassification\n");
    for (i, &(n, q)) in report.quantization.iter().enumerate() {
        let m = report
            .misclassification
            .get(i)
            .filter(|p| p.0 == n)
            .map_or_else(|| "-".to_string(), |p| format!("{:.6}", p.1));
        out.push_str(&format!("{n} {q:.6} {m}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use doorsom_core::synth::Category;

    #[test]
    fn curve_lists_every_sample() {
        let r = TrainReport {
            quantization: vec![(0, 1.0), (64, 0.5)],
            misclassification: vec![(0, 0.25), (64, 0.125)],
        };
        assert_eq!(
            curve_text(&r),
            "iteration quantization misclassification\n0 1.000000 0.250000\n64 0.500000 0.125000\n"
        );
        let r = TrainReport {
            quantization: vec![(0, 1.0)],
            misclassification: vec![],
        };
        assert!(curve_text(&r).ends_with("0 1.000000 -\n"));
    }

    #[test]
    fn evaluation_matches_recount() {
        let dir = tempfile::tempdir().unwrap();
        crate::corpus::generate_corpus(dir.path(), 8, 3, 320, 240).unwrap();
        let corpus = crate::corpus::load_corpus(dir.path()).unwrap();
        let cfg = PipelineConfig::default();
        let (model, _, counts) = train_corpus(&corpus, &cfg, 1).unwrap();
        assert_eq!(counts.images, 24);
        assert!(counts.doors > 0 && counts.candidates >= counts.doors);

        let outcomes = score_corpus(&model, &corpus).unwrap();
        let report = evaluate_corpus(&model, &corpus).unwrap();
        for cat in Category::ALL {
            let mine: Vec<_> = outcomes.iter().filter(|o| o.category == cat).collect();
            let c = report.get(cat);
            assert_eq!(c.images, mine.len());
            assert_eq!(c.detected, mine.iter().filter(|o| o.detected()).count());
        }
    }
}
