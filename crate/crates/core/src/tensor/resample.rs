//! Integer-ratio spatial resampling used to align pyramid levels on a
//! common grid: nearest-neighbour replication upward, non-overlapping block
//! means downward.

use crate::error::{Error, Result};
use crate::tensor::TensorMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    /// Target must be an integer multiple of the source; replicates pixels.
    NearestUp,
    /// Source must be an integer multiple of the target; averages blocks.
    AvgDown,
}

/// Resamples to `target_h x target_w`, preserving batch and channels.
pub fn resample(
    x: &TensorMap,
    target_h: usize,
    target_w: usize,
    mode: ResampleMode,
) -> Result<TensorMap> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::InvalidParameter(
            "resample target must be >= 1".into(),
        ));
    }
    let (b, c, h, w) = x.shape();
    match mode {
        ResampleMode::NearestUp => {
            if !target_h.is_multiple_of(h) || !target_w.is_multiple_of(w) {
                return Err(Error::InvalidParameter(format!(
                    "nearest_up target {target_h}x{target_w} is not an integer multiple of source {h}x{w}"
                )));
            }
            let (rh, rw) = (target_h / h, target_w / w);
            let mut out = TensorMap::zeros(b, c, target_h, target_w)?;
            let plane_out = target_h * target_w;
            for bi in 0..b {
                for ci in 0..c {
                    let src = x.plane(bi, ci);
                    let base = (bi * c + ci) * plane_out;
                    let dst = &mut out.data_mut()[base..base + plane_out];
                    for oy in 0..target_h {
                        let src_row = &src[(oy / rh) * w..(oy / rh) * w + w];
                        let dst_row = &mut dst[oy * target_w..oy * target_w + target_w];
                        for (ox, d) in dst_row.iter_mut().enumerate() {
                            *d = src_row[ox / rw];
                        }
                    }
                }
            }
            Ok(out)
        }
        ResampleMode::AvgDown => {
            if h % target_h != 0 || w % target_w != 0 {
                return Err(Error::InvalidParameter(format!(
                    "avg_down source {h}x{w} is not an integer multiple of target {target_h}x{target_w}"
                )));
            }
            let (rh, rw) = (h / target_h, w / target_w);
            let inv = 1.0 / (rh * rw) as f64;
            let mut out = TensorMap::zeros(b, c, target_h, target_w)?;
            let plane_out = target_h * target_w;
            for bi in 0..b {
                for ci in 0..c {
                    let src = x.plane(bi, ci);
                    let base = (bi * c + ci) * plane_out;
                    let dst = &mut out.data_mut()[base..base + plane_out];
                    for oy in 0..target_h {
                        for ox in 0..target_w {
                            // f64 accumulation keeps equal-value blocks exact,
                            // so up-then-down round trips are bitwise.
                            let mut acc = 0.0f64;
                            for dy in 0..rh {
                                let row = (oy * rh + dy) * w + ox * rw;
                                for s in &src[row..row + rw] {
                                    acc += *s as f64;
                                }
                            }
                            dst[oy * target_w + ox] = (acc * inv) as f32;
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn up_then_down_round_trips_bitwise() {
        let x = TensorMap::new(1, 2, 2, 2, vec![1.5, -2.25, 0.1, 7.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let up = resample(&x, 4, 4, ResampleMode::NearestUp).unwrap();
        assert_eq!(up.at(0, 0, 0, 0), 1.5);
        assert_eq!(up.at(0, 0, 1, 1), 1.5);
        assert_eq!(up.at(0, 0, 3, 2), 7.0);
        let back = resample(&up, 2, 2, ResampleMode::AvgDown).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn constant_maps_stay_constant() {
        let x = TensorMap::new(1, 1, 2, 2, vec![0.3; 4]).unwrap();
        let up = resample(&x, 6, 6, ResampleMode::NearestUp).unwrap();
        assert!(up.data().iter().all(|&v| v == 0.3));
        let down = resample(&up, 3, 3, ResampleMode::AvgDown).unwrap();
        assert!(down.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn block_means_match_direct_summation() {
        let x = TensorMap::new(1, 1, 4, 4, (0..16).map(|i| i as f32).collect()).unwrap();
        let down = resample(&x, 2, 2, ResampleMode::AvgDown).unwrap();
        // Direct block sums: (0+1+4+5)/4 etc.
        assert_eq!(down.data(), &[2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn rejects_non_integer_ratio() {
        let x = TensorMap::zeros(1, 1, 4, 4).unwrap();
        assert!(resample(&x, 6, 6, ResampleMode::NearestUp).is_err());
        assert!(resample(&x, 3, 3, ResampleMode::AvgDown).is_err());
    }

    #[test]
    fn ratio_one_is_identity() {
        let x = TensorMap::new(1, 1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(resample(&x, 2, 3, ResampleMode::NearestUp).unwrap(), x);
        assert_eq!(resample(&x, 2, 3, ResampleMode::AvgDown).unwrap(), x);
    }
}
