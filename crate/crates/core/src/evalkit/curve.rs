use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{evaluate_run, MetricsReport, Qrels, Run};
use crate::encoder::{EncoderModel, TrainObserver};
use crate::error::{Error, Result};
use crate::ranking::{build_index, rank_many};

pub const CURVE_HEADER: &str = "step,map,p5,p20";

/// Queries, corpus and judgments used to score snapshots.
#[derive(Debug, Clone)]
pub struct EvalBundle {
    pub corpus: Vec<(String, String)>,
    pub queries: Vec<(String, String)>,
    pub qrels: Qrels,
}

impl EvalBundle {
    /// Encodes corpus and queries with `model`, ranks the full corpus for
    /// every query, and evaluates. Queries that normalize to nothing get an
    /// empty ranking.
    pub fn evaluate(&self, model: &EncoderModel, tag: &str, workers: usize) -> Result<(Run, MetricsReport)> {
        let (index, _) = build_index(&self.corpus, model, workers)?;
        let mut encoded = Vec::with_capacity(self.queries.len());
        let mut empty = Vec::new();
        for (qid, title) in &self.queries {
            match model.encode(title) {
                Ok(v) => encoded.push((qid.clone(), v)),
                Err(Error::EmptyTitle) => empty.push(qid.clone()),
                Err(e) => return Err(e),
            }
        }
        let mut lists = rank_many(&index, &encoded, None)?;
        lists.extend(empty.into_iter().map(|query_id| crate::ranking::RankedList {
            query_id,
            items: Vec::new(),
        }));
        let run = Run {
            tag: tag.to_string(),
            lists,
        };
        let report = evaluate_run(&run, &self.qrels)?;
        Ok((run, report))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub map: f64,
    pub p5: f64,
    pub p20: f64,
}

impl CurvePoint {
    pub fn csv_row(&self) -> String {
        format!("{},{:.6},{:.6},{:.6}", self.step, self.map, self.p5, self.p20)
    }
}

type ProgressFn<'a> = Box<dyn FnMut(&CurvePoint) + 'a>;

/// Training observer that evaluates every snapshot and appends a CSV row.
/// Rows are flushed as they are produced, so a failed run leaves the rows
/// recorded so far.
pub struct CurveRecorder<'a> {
    bundle: &'a EvalBundle,
    interval: usize,
    points: Vec<CurvePoint>,
    out: Option<BufWriter<File>>,
    path: Option<std::path::PathBuf>,
    progress: Option<ProgressFn<'a>>,
}

impl<'a> CurveRecorder<'a> {
    pub fn new(bundle: &'a EvalBundle, interval: usize) -> Self {
        CurveRecorder {
            bundle,
            interval,
            points: Vec::new(),
            out: None,
            path: None,
            progress: None,
        }
    }

    pub fn with_csv(mut self, path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{CURVE_HEADER}")
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
        self.out = Some(w);
        self.path = Some(path.to_path_buf());
        Ok(self)
    }

    pub fn with_progress(mut self, f: impl FnMut(&CurvePoint) + 'a) -> Self {
        self.progress = Some(Box::new(f));
        self
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<CurvePoint> {
        self.points
    }
}

impl TrainObserver for CurveRecorder<'_> {
    fn snapshot_interval(&self) -> Option<usize> {
        Some(self.interval)
    }

    fn on_snapshot(&mut self, step: usize, model: &EncoderModel) -> Result<()> {
        let (_, report) = self.bundle.evaluate(model, "snapshot", 1)?;
        let point = CurvePoint {
            step,
            map: report.map,
            p5: report.p5,
            p20: report.p20,
        };
        if let (Some(w), Some(path)) = (self.out.as_mut(), self.path.as_ref()) {
            writeln!(w, "{}", point.csv_row())
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        if let Some(f) = self.progress.as_mut() {
            f(&point);
        }
        self.points.push(point);
        Ok(())
    }
}

/// First step whose MAP reaches `level`, if any.
pub fn first_step_reaching(points: &[CurvePoint], level: f64) -> Option<usize> {
    points.iter().find(|p| p.map >= level).map(|p| p.step)
}
