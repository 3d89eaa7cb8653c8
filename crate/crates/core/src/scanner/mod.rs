//! Whole-exam sliding-window evaluation.
//!
//! The breast is segmented, a regular grid of overlapping windows is laid
//! over it, every window is scored by the network, and windows are labelled
//! AD when they contain an expert mark. Per-exam ROC/AUC, accuracy and a
//! max-score heatmap summarise the scan.

mod segment;

pub use segment::{largest_component, otsu_bin, segment_breast, HISTOGRAM_BINS};

use std::io::Write;

use crate::augment::{zscore_standardize, ZSCORE_EPSILON};
use crate::dataset::{IntegralImage, Label, Window};
use crate::error::{Error, Result};
use crate::eval::{accuracy_at_threshold, auc_trapezoid, roc_curve, RocCurve, ScoredSample};
use crate::image::{BinaryMask, GrayImage};
use crate::model::{predict_score, Network};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdMark {
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExamImage {
    pub id: String,
    pub image: GrayImage,
    pub marks: Vec<AdMark>,
}

impl ExamImage {
    pub fn new(id: impl Into<String>, image: GrayImage, marks: Vec<AdMark>) -> Result<Self> {
        if let Some(m) = marks.iter().find(|m| m.row >= image.height() || m.col >= image.width()) {
            return Err(Error::Data(format!(
                "mark ({}, {}) lies outside the {}x{} exam",
                m.row,
                m.col,
                image.height(),
                image.width()
            )));
        }
        Ok(Self { id: id.into(), image, marks })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanGrid {
    pub roi_size: usize,
    pub stride: usize,
    /// Minimum fraction of a window that must fall inside the breast mask.
    pub coverage_min: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self { roi_size: 256, stride: 64, coverage_min: 0.75 }
    }
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        if self.roi_size == 0 || self.stride == 0 || self.stride > self.roi_size {
            return Err(Error::Config(format!(
                "stride must lie in 1..={} (roi_size), got {}",
                self.roi_size, self.stride
            )));
        }
        if !(self.coverage_min > 0.0 && self.coverage_min <= 1.0) {
            return Err(Error::Config(format!("coverage_min must lie in (0,1], got {}", self.coverage_min)));
        }
        Ok(())
    }
}

/// Windows at multiples of `stride` that fit the image and overlap the
/// mask by at least `coverage_min`, in row-major order.
pub fn extract_grid(mask: &BinaryMask, grid: &ScanGrid) -> Result<Vec<Window>> {
    grid.validate()?;
    let (h, w, size) = (mask.height(), mask.width(), grid.roi_size);
    if size > h || size > w {
        return Err(Error::Size(format!("{h}x{w} image is smaller than the {size}px scan window")));
    }
    let sums = IntegralImage::from_values(w, h, |r, c| if mask.get(r, c) { 1.0 } else { 0.0 });
    let need = grid.coverage_min * (size * size) as f64;
    let mut out = Vec::new();
    for top in (0..=h - size).step_by(grid.stride) {
        for left in (0..=w - size).step_by(grid.stride) {
            if sums.block_sum(top, left, size, size) >= need {
                out.push(Window { top, left, size });
            }
        }
    }
    Ok(out)
}

/// AD iff some mark lies inside the window, all four edges inclusive.
pub fn label_roi(window: &Window, marks: &[AdMark]) -> Label {
    let inside = |m: &AdMark| {
        (window.top..=window.bottom()).contains(&m.row) && (window.left..=window.right()).contains(&m.col)
    };
    if marks.iter().any(inside) {
        Label::Ad
    } else {
        Label::Normal
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoiScore<T> {
    pub window: Window,
    pub score: T,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult<T> {
    pub exam_id: String,
    pub rois: Vec<RoiScore<T>>,
    /// `None` when the exam lacks positive or negative windows.
    pub roc: Option<RocCurve<T>>,
    pub auc: Option<T>,
    /// `None` only when no window survived masking.
    pub accuracy: Option<T>,
    pub heatmap: GrayImage,
}

impl<T: Scalar> ScanResult<T> {
    pub fn n_positive(&self) -> usize {
        self.rois.iter().filter(|r| r.label == Label::Ad).count()
    }

    pub fn best_roi(&self) -> Option<&RoiScore<T>> {
        self.rois.iter().fold(None, |best: Option<&RoiScore<T>>, r| match best {
            Some(b) if b.score >= r.score => Some(b),
            _ => Some(r),
        })
    }

    pub fn write_rois_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,score,label")?;
        for r in &self.rois {
            let (row, col) = r.window.center();
            writeln!(w, "{row},{col},{},{}", r.score, r.label)?;
        }
        Ok(())
    }

    /// `exam_id,n_rois,n_positive,auc,accuracy` row (no header).
    pub fn summary_line(&self) -> String {
        let fmt = |v: Option<T>| v.map_or_else(|| "NA".to_string(), |v| format!("{:.6}", v.as_f64()));
        format!("{},{},{},{},{}", self.exam_id, self.rois.len(), self.n_positive(), fmt(self.auc), fmt(self.accuracy))
    }
}

pub const SUMMARY_HEADER: &str = "exam_id,n_rois,n_positive,auc,accuracy";

/// Integer factor by which scan windows are area-averaged to reach the
/// network input size.
pub fn downscale_factor(roi_size: usize, input_size: usize) -> Result<usize> {
    if input_size == 0 || roi_size % input_size != 0 {
        return Err(Error::Config(format!(
            "scan window {roi_size} is not an integer multiple of network input {input_size}"
        )));
    }
    Ok(roi_size / input_size)
}

/// Per-pixel maximum score over the windows covering it, zero elsewhere.
pub fn max_heatmap<T: Scalar>(height: usize, width: usize, rois: &[RoiScore<T>]) -> Result<GrayImage> {
    let mut heat = vec![0.0f64; height * width];
    for r in rois {
        let s = r.score.as_f64().clamp(0.0, 1.0);
        for row in r.window.top..=r.window.bottom() {
            for v in &mut heat[row * width + r.window.left..=row * width + r.window.right()] {
                *v = v.max(s);
            }
        }
    }
    GrayImage::new(width, height, heat)
}

pub fn scan_exam<T: Scalar>(network: &Network<T>, exam: &ExamImage, grid: &ScanGrid) -> Result<ScanResult<T>> {
    let factor = downscale_factor(grid.roi_size, network.config().input_size)?;
    let mask = segment_breast(&exam.image)?;
    let windows = extract_grid(&mask, grid)?;
    let mut rois = Vec::with_capacity(windows.len());
    for window in windows {
        let mut roi = exam.image.sub_image(window.top, window.left, window.size, window.size)?;
        if factor > 1 {
            roi = roi.downscale_mean(factor)?;
        }
        let score = predict_score(network, &zscore_standardize(&roi, ZSCORE_EPSILON))?;
        rois.push(RoiScore { window, score, label: label_roi(&window, &exam.marks) });
    }
    let samples: Vec<ScoredSample<T>> = rois.iter().map(|r| ScoredSample::new(r.score, r.label.is_positive())).collect();
    let roc = roc_curve(&samples).ok();
    let auc = roc.as_ref().map(auc_trapezoid);
    let accuracy = accuracy_at_threshold(&samples, T::lit(0.5)).ok();
    let heatmap = max_heatmap(exam.image.height(), exam.image.width(), &rois)?;
    Ok(ScanResult { exam_id: exam.id.clone(), rois, roc, auc, accuracy, heatmap })
}
