//! Inference-time policy: dynamic-template refresh gate and the Hanning
//! position prior on the response map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hann_window, Matrix};

pub const DEFAULT_UPDATE_INTERVAL: u64 = 25;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.7;

/// Decides when the dynamic template is refreshed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtUpdateState {
    pub frame_counter: u64,
    pub update_interval: u64,
    pub confidence_threshold: f64,
}

impl Default for DtUpdateState {
    fn default() -> Self {
        Self {
            frame_counter: 0,
            update_interval: DEFAULT_UPDATE_INTERVAL,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
        }
    }
}

impl DtUpdateState {
    pub fn new(update_interval: u64, confidence_threshold: f64) -> Result<Self> {
        if update_interval == 0 {
            return Err(Error::InvalidArgument("update interval must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&confidence_threshold) {
            return Err(Error::InvalidArgument(format!(
                "confidence threshold must lie in [0, 1], got {confidence_threshold}"
            )));
        }
        Ok(Self { frame_counter: 0, update_interval, confidence_threshold })
    }

    /// True iff `frame_index` is a multiple of the interval and the tracker is
    /// strictly more confident than the threshold. The counter advances either way.
    pub fn decide(&mut self, frame_index: u64, confidence: f64) -> bool {
        self.frame_counter += 1;
        frame_index.is_multiple_of(self.update_interval) && confidence > self.confidence_threshold
    }
}

/// Free-function form of [`DtUpdateState::decide`].
pub fn dt_update_decision(state: &mut DtUpdateState, frame_index: u64, confidence: f64) -> bool {
    state.decide(frame_index, confidence)
}

/// Multiplies the response map by the outer product of row and column Hann windows.
pub fn hanning_penalty(score_map: &Matrix) -> Result<Matrix> {
    let (rows, cols) = score_map.shape();
    let wr = hann_window(rows)?;
    let wc = hann_window(cols)?;
    let mut out = score_map.clone();
    for (r, wr) in wr.iter().enumerate() {
        for (v, wc) in out.row_mut(r).iter_mut().zip(&wc) {
            *v *= wr * wc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_examples() {
        let mut s = DtUpdateState::default();
        assert!(s.decide(25, 0.8));
        assert!(!s.decide(25, 0.6));
        assert!(!s.decide(24, 0.99));
        assert!(!s.decide(25, 0.7));
        assert_eq!(s.frame_counter, 4);
    }

    #[test]
    fn update_fires_on_qualifying_multiples() {
        let mut s = DtUpdateState::default();
        let fired: Vec<u64> = (1..=1000u64)
            .filter(|&f| {
                let conf = if (f / 25) % 2 == 0 { 0.9 } else { 0.5 };
                s.decide(f, conf)
            })
            .collect();
        let expected: Vec<u64> = (1..=1000u64).filter(|f| f % 25 == 0 && (f / 25) % 2 == 0).collect();
        assert_eq!(fired, expected);
        assert_eq!(s.frame_counter, 1000);
    }

    #[test]
    fn state_validation() {
        assert!(DtUpdateState::new(0, 0.5).is_err());
        assert!(DtUpdateState::new(5, 1.5).is_err());
        assert!(DtUpdateState::new(5, 0.0).is_ok());
    }

    #[test]
    fn penalty_examples() {
        let ones = Matrix::new(3, 3, vec![1.0; 9]).unwrap();
        let p = hanning_penalty(&ones).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == 1 && c == 1 { 1.0 } else { 0.0 };
                assert!((p.get(r, c) - expect).abs() < 1e-15);
            }
        }
        let single = Matrix::new(1, 1, vec![0.37]).unwrap();
        assert_eq!(hanning_penalty(&single).unwrap(), single);

        let uniform = Matrix::new(5, 5, vec![0.2; 25]).unwrap();
        let p = hanning_penalty(&uniform).unwrap();
        let best = (0..25).max_by(|&a, &b| p.data()[a].total_cmp(&p.data()[b])).unwrap();
        assert_eq!(best, 12);
    }
}
