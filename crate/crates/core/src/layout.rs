//! Segment geometry of the joint `[SR | ST | DT | TEXT]` sequence, token
//! identity bookkeeping, and the bounding-box foreground bonus.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Which part of the joint sequence a token belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    /// Search region.
    Sr,
    /// Static template.
    St,
    /// Dynamic template.
    Dt,
    Text,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::Sr, Segment::St, Segment::Dt, Segment::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Sr => "sr",
            Segment::St => "st",
            Segment::Dt => "dt",
            Segment::Text => "text",
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Segment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sr" => Ok(Segment::Sr),
            "st" => Ok(Segment::St),
            "dt" => Ok(Segment::Dt),
            "text" => Ok(Segment::Text),
            other => Err(Error::InvalidArgument(format!("unknown segment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The four tracker geometries the tool knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelPreset {
    Ostrack256,
    Ostrack384,
    Sutrack224,
    Sutrack384,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 4] =
        [ModelPreset::Ostrack256, ModelPreset::Ostrack384, ModelPreset::Sutrack224, ModelPreset::Sutrack384];

    pub fn name(self) -> &'static str {
        match self {
            ModelPreset::Ostrack256 => "ostrack256",
            ModelPreset::Ostrack384 => "ostrack384",
            ModelPreset::Sutrack224 => "sutrack224",
            ModelPreset::Sutrack384 => "sutrack384",
        }
    }

    /// Unified (multimodal + language) trackers carry a text token.
    pub fn is_unified(self) -> bool {
        matches!(self, ModelPreset::Sutrack224 | ModelPreset::Sutrack384)
    }

    pub fn layout(self) -> SegmentLayout {
        let (sr_side, tmpl_side, embed_dim) = match self {
            ModelPreset::Ostrack256 => (16, 8, 768),
            ModelPreset::Ostrack384 => (24, 12, 768),
            ModelPreset::Sutrack224 => (14, 7, 512),
            ModelPreset::Sutrack384 => (24, 12, 512),
        };
        let n_text = usize::from(self.is_unified());
        SegmentLayout {
            n_sr: sr_side * sr_side,
            n_st: tmpl_side * tmpl_side,
            n_dt: tmpl_side * tmpl_side,
            n_text,
            sr_grid: Grid::new(sr_side, sr_side),
            tmpl_grid: Grid::new(tmpl_side, tmpl_side),
            patch_size: 16,
            embed_dim,
            input_channels: if self.is_unified() { 6 } else { 3 },
        }
    }
}

impl FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model preset {s:?}")))
    }
}

/// Token counts and grid geometry of each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLayout {
    pub n_sr: usize,
    pub n_st: usize,
    pub n_dt: usize,
    pub n_text: usize,
    pub sr_grid: Grid,
    pub tmpl_grid: Grid,
    pub patch_size: usize,
    pub embed_dim: usize,
    /// 3 for RGB, 6 when an auxiliary modality is stacked onto RGB.
    pub input_channels: usize,
}

impl SegmentLayout {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_sr != self.sr_grid.len() {
            return bad(format!("n_sr {} != sr grid {:?}", self.n_sr, self.sr_grid));
        }
        if self.n_st != self.tmpl_grid.len() || self.n_dt != self.tmpl_grid.len() {
            return bad(format!(
                "n_st {} / n_dt {} must both equal template grid {:?}",
                self.n_st, self.n_dt, self.tmpl_grid
            ));
        }
        if self.n_sr == 0 || self.n_st == 0 {
            return bad("search region and templates need at least one token".into());
        }
        if self.n_text > 1 {
            return bad(format!("at most one text token is supported, got {}", self.n_text));
        }
        if self.patch_size == 0 || self.embed_dim == 0 {
            return bad("patch_size and embed_dim must be positive".into());
        }
        if self.input_channels != 3 && self.input_channels != 6 {
            return bad(format!("input_channels must be 3 or 6, got {}", self.input_channels));
        }
        Ok(())
    }

    pub fn count(&self, segment: Segment) -> usize {
        match segment {
            Segment::Sr => self.n_sr,
            Segment::St => self.n_st,
            Segment::Dt => self.n_dt,
            Segment::Text => self.n_text,
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.vision_tokens() + self.n_text
    }

    pub fn vision_tokens(&self) -> usize {
        self.n_sr + self.n_st + self.n_dt
    }

    /// Side length in pixels of the (square) template crop.
    pub fn template_side(&self) -> usize {
        self.tmpl_grid.cols * self.patch_size
    }

    pub fn center_index(&self) -> usize {
        center_index(self.tmpl_grid)
    }
}

/// Flat row-major index of the center cell, `(rows / 2) * cols + cols / 2`.
///
/// For even sides this picks the lower-right of the four central cells.
pub fn center_index(grid: Grid) -> usize {
    (grid.rows / 2) * grid.cols + grid.cols / 2
}

/// Token features plus the identity of every surviving token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBatch {
    pub features: Matrix,
    pub segment_tag: Vec<Segment>,
    pub original_index: Vec<usize>,
}

impl TokenBatch {
    pub fn len(&self) -> usize {
        self.segment_tag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segment_tag.is_empty()
    }

    /// Contiguous row range occupied by `segment` (empty if absent).
    pub fn segment_range(&self, segment: Segment) -> Range<usize> {
        let start = self.segment_tag.partition_point(|&s| s < segment);
        let end = self.segment_tag.partition_point(|&s| s <= segment);
        start..end
    }

    pub fn count(&self, segment: Segment) -> usize {
        self.segment_range(segment).len()
    }

    pub fn original_indices(&self, segment: Segment) -> &[usize] {
        &self.original_index[self.segment_range(segment)]
    }

    /// Batch row holding the token with `original` index inside `segment`.
    pub fn position_of(&self, segment: Segment, original: usize) -> Option<usize> {
        let range = self.segment_range(segment);
        self.original_index[range.clone()].iter().position(|&i| i == original).map(|p| range.start + p)
    }

    pub fn segment_features(&self, segment: Segment) -> Matrix {
        let range = self.segment_range(segment);
        let rows: Vec<usize> = range.collect();
        self.features.select_rows(&rows)
    }

    /// Keeps only `rows` (ascending batch positions).
    pub fn retain_rows(&self, rows: &[usize]) -> TokenBatch {
        TokenBatch {
            features: self.features.select_rows(rows),
            segment_tag: rows.iter().map(|&r| self.segment_tag[r]).collect(),
            original_index: rows.iter().map(|&r| self.original_index[r]).collect(),
        }
    }

    pub fn with_features(&self, features: Matrix) -> Result<TokenBatch> {
        if features.rows() != self.len() {
            return Err(Error::ShapeMismatch {
                op: "with_features",
                left: self.features.shape(),
                right: features.shape(),
            });
        }
        Ok(TokenBatch { features, ..self.clone() })
    }

    /// Checks tag ordering, lengths, and per-segment index uniqueness.
    pub fn validate(&self) -> Result<()> {
        if self.features.rows() != self.segment_tag.len() || self.original_index.len() != self.segment_tag.len() {
            return Err(Error::InvalidArgument(format!(
                "batch has {} feature rows, {} tags, {} indices",
                self.features.rows(),
                self.segment_tag.len(),
                self.original_index.len()
            )));
        }
        if self.segment_tag.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("segment tags are not in [SR|ST|DT|TEXT] order".into()));
        }
        for seg in Segment::ALL {
            let mut seen: Vec<usize> = self.original_indices(seg).to_vec();
            seen.sort_unstable();
            if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateIndex { segment: seg, index: w[0] });
            }
        }
        Ok(())
    }
}

/// Concatenates the segment embeddings in `[SR | ST | DT | TEXT]` order.
pub fn assemble_batch(
    layout: &SegmentLayout,
    sr: &Matrix,
    st: &Matrix,
    dt: &Matrix,
    text: Option<&[f64]>,
) -> Result<TokenBatch> {
    let d = layout.embed_dim;
    for (seg, m) in [(Segment::Sr, sr), (Segment::St, st), (Segment::Dt, dt)] {
        let want = (layout.count(seg), d);
        if m.shape() != want {
            return Err(Error::ShapeMismatch { op: "assemble_batch", left: want, right: m.shape() });
        }
    }
    let text_row = match (text, layout.n_text) {
        (Some(row), 1) if row.len() == d => Some(Matrix::new(1, d, row.to_vec())?),
        (Some(row), 1) => {
            return Err(Error::ShapeMismatch { op: "assemble_batch", left: (1, d), right: (1, row.len()) })
        }
        (None, 0) => None,
        // An RGB layout silently ignores a supplied text row only if it is empty.
        (Some([]), 0) => None,
        (t, n) => {
            return Err(Error::InvalidArgument(format!(
                "layout expects {n} text token(s) but {} supplied",
                usize::from(t.is_some())
            )))
        }
    };

    let mut parts = vec![sr, st, dt];
    if let Some(t) = text_row.as_ref() {
        parts.push(t);
    }
    let features = Matrix::vstack(&parts)?;
    let mut segment_tag = Vec::with_capacity(features.rows());
    let mut original_index = Vec::with_capacity(features.rows());
    for seg in Segment::ALL {
        let n = if seg == Segment::Text { usize::from(text_row.is_some()) } else { layout.count(seg) };
        segment_tag.extend(std::iter::repeat_n(seg, n));
        original_index.extend(0..n);
    }
    Ok(TokenBatch { features, segment_tag, original_index })
}

/// Target box in template-crop pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    /// Centered box of half the template side; a template crop is a 2x
    /// enlargement of the target box.
    pub fn centered(template_side: usize) -> Self {
        let w = (template_side / 2).max(1);
        let x = (template_side - w) / 2;
        Self { x, y: x, w, h: w }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn validate(&self, template_side: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.x + self.w > template_side || self.y + self.h > template_side {
            return Err(Error::BBoxOutOfBounds(*self, template_side));
        }
        Ok(())
    }
}

/// Square binary pixel grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub side: usize,
    pub data: Vec<u8>,
}

impl PixelMask {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.side + col]
    }

    pub fn ones(&self) -> usize {
        self.data.iter().map(|&v| usize::from(v)).sum()
    }
}

/// Pixel (i, j) is foreground iff `y <= i < y + h` and `x <= j < x + w`.
pub fn build_mask(bbox: &BBox, template_side: usize) -> Result<PixelMask> {
    bbox.validate(template_side)?;
    let mut data = vec![0u8; template_side * template_side];
    for i in bbox.y..bbox.y + bbox.h {
        data[i * template_side + bbox.x..i * template_side + bbox.x + bbox.w].fill(1);
    }
    Ok(PixelMask { side: template_side, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BonusMode {
    Off,
    /// 1 only when the whole patch is foreground.
    Full,
    /// Fraction of foreground pixels in the patch.
    #[default]
    Soft,
    /// 1 when any pixel of the patch is foreground.
    All,
}

impl FromStr for BonusMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(BonusMode::Off),
            "full" => Ok(BonusMode::Full),
            "soft" => Ok(BonusMode::Soft),
            "all" => Ok(BonusMode::All),
            other => Err(Error::InvalidArgument(format!("unknown bonus mode {other:?}"))),
        }
    }
}

/// Per-patch foreground score for every patch of `mask`, row-major.
/// `Off` yields all zeros.
pub fn patch_bonus(mask: &PixelMask, patch_size: usize, mode: BonusMode) -> Result<Vec<f64>> {
    if patch_size == 0 || !mask.side.is_multiple_of(patch_size) {
        return Err(Error::InvalidArgument(format!(
            "mask side {} is not divisible by patch size {patch_size}",
            mask.side
        )));
    }
    let per_side = mask.side / patch_size;
    let area = patch_size * patch_size;
    let mut values = Vec::with_capacity(per_side * per_side);
    for pr in 0..per_side {
        for pc in 0..per_side {
            let mut inside = 0usize;
            for i in pr * patch_size..(pr + 1) * patch_size {
                for j in pc * patch_size..(pc + 1) * patch_size {
                    inside += usize::from(mask.get(i, j));
                }
            }
            values.push(match mode {
                BonusMode::Off => 0.0,
                BonusMode::Full => f64::from(u8::from(inside == area)),
                BonusMode::Soft => inside as f64 / area as f64,
                BonusMode::All => f64::from(u8::from(inside > 0)),
            });
        }
    }
    Ok(values)
}

/// Bonus values for every static-template patch, indexed by original index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForegroundBonus {
    pub mode: BonusMode,
    pub values: Vec<f64>,
    pub weight: f64,
}

impl ForegroundBonus {
    pub fn off(n_st: usize) -> Self {
        Self { mode: BonusMode::Off, values: vec![0.0; n_st], weight: 0.0 }
    }

    pub fn from_bbox(layout: &SegmentLayout, bbox: &BBox, mode: BonusMode, weight: f64) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidArgument(format!("bonus weight must be finite and >= 0, got {weight}")));
        }
        let mask = build_mask(bbox, layout.template_side())?;
        let values = patch_bonus(&mask, layout.patch_size, mode)?;
        Ok(Self { mode, values, weight })
    }

    pub fn is_active(&self) -> bool {
        self.mode != BonusMode::Off
    }
}

/// Channel-major image tensor (`channels x height x width`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::InvalidArgument(format!(
                "image data length {} != {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Stand-in for a missing auxiliary modality: channels 4-6 copy RGB.
pub fn fill_missing_modality(rgb: &ImageTensor) -> Result<ImageTensor> {
    if rgb.channels != 3 {
        return Err(Error::InvalidArgument(format!("expected a 3-channel image, got {} channels", rgb.channels)));
    }
    let mut data = Vec::with_capacity(rgb.data.len() * 2);
    data.extend_from_slice(&rgb.data);
    data.extend_from_slice(&rgb.data);
    ImageTensor::new(6, rgb.height, rgb.width, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn filled(rows: usize, cols: usize, v: f64) -> Matrix {
        Matrix::new(rows, cols, vec![v; rows * cols]).unwrap()
    }

    #[test]
    fn preset_geometry() {
        let totals: Vec<_> = ModelPreset::ALL
            .iter()
            .map(|p| {
                let l = p.layout();
                l.validate().unwrap();
                (l.n_sr, l.n_st, l.n_dt, l.n_text)
            })
            .collect();
        assert_eq!(totals, vec![(256, 64, 64, 0), (576, 144, 144, 0), (196, 49, 49, 1), (576, 144, 144, 1)]);
        assert_eq!(ModelPreset::Ostrack256.layout().vision_tokens(), 384);
        assert_eq!(ModelPreset::Sutrack224.layout().vision_tokens(), 294);
        assert_eq!(ModelPreset::Ostrack256.layout().template_side(), 128);
    }

    #[test]
    fn layout_rejects_multi_token_text() {
        let mut l = ModelPreset::Sutrack224.layout();
        l.n_text = 2;
        assert!(matches!(l.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn center_index_examples() {
        assert_eq!(center_index(Grid::new(8, 8)), 36);
        assert_eq!(center_index(Grid::new(7, 7)), 24);
        assert_eq!(center_index(Grid::new(1, 1)), 0);
    }

    #[test]
    fn mask_examples() {
        let whole = build_mask(&BBox::new(0, 0, 128, 128), 128).unwrap();
        assert!(whole.data.iter().all(|&v| v == 1));

        let corner = build_mask(&BBox::new(0, 0, 16, 16), 128).unwrap();
        assert_eq!(corner.ones(), 256);

        let shifted = build_mask(&BBox::new(8, 0, 16, 16), 128).unwrap();
        for i in 0..128 {
            for j in 0..128 {
                let expect = u8::from(i < 16 && (8..24).contains(&j));
                assert_eq!(shifted.get(i, j), expect, "pixel ({i},{j})");
            }
        }
        assert!(build_mask(&BBox::new(120, 0, 16, 16), 128).is_err());
        assert!(build_mask(&BBox::new(0, 0, 0, 16), 128).is_err());
    }

    #[test]
    fn patch_bonus_examples() {
        // patch 0 fully inside, patch 1 half inside, others empty
        let mask = build_mask(&BBox::new(0, 0, 24, 16), 64).unwrap();
        let full = patch_bonus(&mask, 16, BonusMode::Full).unwrap();
        let soft = patch_bonus(&mask, 16, BonusMode::Soft).unwrap();
        let all = patch_bonus(&mask, 16, BonusMode::All).unwrap();
        assert_eq!((full[0], soft[0], all[0]), (1.0, 1.0, 1.0));
        assert_eq!((full[1], soft[1], all[1]), (0.0, 0.5, 1.0));
        assert_eq!((full[2], soft[2], all[2]), (0.0, 0.0, 0.0));
        assert_eq!((full[4], soft[4], all[4]), (0.0, 0.0, 0.0));
        assert!(patch_bonus(&mask, 16, BonusMode::Off).unwrap().iter().all(|&v| v == 0.0));
        assert!(patch_bonus(&mask, 12, BonusMode::Soft).is_err());
    }

    #[test]
    fn assemble_examples() {
        let l = ModelPreset::Ostrack256.layout();
        let d = l.embed_dim;
        let b = assemble_batch(&l, &filled(256, d, 1.0), &filled(64, d, 2.0), &filled(64, d, 3.0), None).unwrap();
        assert_eq!(b.len(), 384);
        assert_eq!(b.segment_range(Segment::Sr), 0..256);
        assert_eq!(b.segment_range(Segment::St), 256..320);
        assert_eq!(b.segment_range(Segment::Dt), 320..384);
        assert_eq!(b.count(Segment::Text), 0);
        b.validate().unwrap();

        let empty: &[f64] = &[];
        let b2 =
            assemble_batch(&l, &filled(256, d, 1.0), &filled(64, d, 2.0), &filled(64, d, 3.0), Some(empty)).unwrap();
        assert_eq!(b2.len(), 384);

        let u = ModelPreset::Sutrack224.layout();
        let d = u.embed_dim;
        let text = vec![9.0; d];
        let b =
            assemble_batch(&u, &filled(196, d, 1.0), &filled(49, d, 2.0), &filled(49, d, 3.0), Some(&text)).unwrap();
        assert_eq!(b.len(), 295);
        assert_eq!(*b.segment_tag.last().unwrap(), Segment::Text);

        assert!(assemble_batch(&u, &filled(196, d, 1.0), &filled(49, d, 2.0), &filled(49, d, 3.0), None).is_err());
        assert!(matches!(
            assemble_batch(&l, &filled(255, 768, 1.0), &filled(64, 768, 2.0), &filled(64, 768, 3.0), None),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn fill_missing_modality_examples() {
        let px = ImageTensor::new(3, 1, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(fill_missing_modality(&px).unwrap().data, vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3]);

        let zero = ImageTensor::new(3, 4, 5, vec![0.0; 60]).unwrap();
        let six = fill_missing_modality(&zero).unwrap();
        assert_eq!(six.channels, 6);
        assert!(six.data.iter().all(|&v| v == 0.0));

        let ramp = ImageTensor::new(3, 2, 3, (0..18).map(|v| v as f32 * 0.37).collect()).unwrap();
        let six = fill_missing_modality(&ramp).unwrap();
        for c in 0..3 {
            let a: Vec<u32> = six.channel(c).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = six.channel(c + 3).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert!(fill_missing_modality(&six).is_err());
    }

    fn bbox_strategy(side: usize) -> impl Strategy<Value = BBox> {
        (0..side, 0..side)
            .prop_flat_map(move |(x, y)| (Just(x), Just(y), 1..=side - x, 1..=side - y))
            .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn bonus_ordering_and_mass_conservation(bbox in bbox_strategy(64)) {
            let mask = build_mask(&bbox, 64).unwrap();
            let full = patch_bonus(&mask, 8, BonusMode::Full).unwrap();
            let soft = patch_bonus(&mask, 8, BonusMode::Soft).unwrap();
            let all = patch_bonus(&mask, 8, BonusMode::All).unwrap();
            for i in 0..soft.len() {
                prop_assert!(full[i] <= soft[i] && soft[i] <= all[i]);
                prop_assert!((0.0..=1.0).contains(&soft[i]));
            }
            let mass: f64 = soft.iter().map(|v| v * 64.0).sum();
            prop_assert_eq!(mass.round() as usize, bbox.area());
            prop_assert!((mass - bbox.area() as f64).abs() < 1e-9);
        }

        #[test]
        fn center_index_inside_grid(rows in 1usize..40, cols in 1usize..40) {
            prop_assert!(center_index(Grid::new(rows, cols)) < rows * cols);
        }
    }
}
