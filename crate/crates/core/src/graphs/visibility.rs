//! Natural visibility graphs and section sampling.

use nalgebra::DMatrix;
use rand::Rng;

use super::{GraphError, WeightedDigraph};

/// A strided window into a training series. `length` points starting at
/// `start`, taking every `stride`-th sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Section {
    pub start: usize,
    pub stride: usize,
    pub length: usize,
}

impl Section {
    /// Number of raw samples covered, `(length − 1)·stride + 1`.
    pub fn span(&self) -> usize {
        (self.length - 1) * self.stride + 1
    }

    /// Raw sample indices selected by the section.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.length).map(move |k| self.start + k * self.stride)
    }
}

/// Builds the natural visibility graph of a series.
///
/// Data points become nodes in time order; two points see each other when
/// the straight line between them passes above every intermediate point
/// (strict inequality, so collinear points block). The result is an
/// undirected graph with binary weights in which consecutive points are
/// always connected.
///
/// Visibility of `(i, j)` is equivalent to the chord slope from `i` to `j`
/// strictly exceeding the slope from `i` to every intermediate point, which
/// allows an O(n²) sweep with a running slope maximum instead of the naive
/// triple loop.
pub fn visibility_graph(values: &[f64], times: &[f64]) -> Result<WeightedDigraph, GraphError> {
    if values.len() != times.len() {
        return Err(GraphError::LengthMismatch {
            values: values.len(),
            times: times.len(),
        });
    }
    let n = values.len();
    if n < 2 {
        return Err(GraphError::InvalidArgument(format!(
            "need at least 2 points, got {n}"
        )));
    }
    for i in 0..n - 1 {
        if !(times[i + 1] > times[i]) {
            return Err(GraphError::NonMonotonicTimes { index: i + 1 });
        }
    }

    let mut m = DMatrix::zeros(n, n);
    let mut connect = |i: usize, j: usize| {
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
    };
    for i in 0..n - 1 {
        connect(i, i + 1);
        let mut max_slope = (values[i + 1] - values[i]) / (times[i + 1] - times[i]);
        for j in i + 2..n {
            let slope = (values[j] - values[i]) / (times[j] - times[i]);
            if slope > max_slope {
                connect(i, j);
                max_slope = slope;
            }
        }
    }
    WeightedDigraph::new(m, false)
}

/// Deterministic, evenly spaced section starts.
///
/// The `n_sections` starts are `round(i·(train_len − span)/(n_sections − 1))`
/// for `i = 0..n_sections`, covering the whole feasible range; a single
/// section starts at 0. Sections may overlap.
pub fn sample_sections(
    train_len: usize,
    n_points: usize,
    stride: usize,
    n_sections: usize,
) -> Result<Vec<Section>, GraphError> {
    validate_section_args(n_points, stride, n_sections)?;
    let span = (n_points - 1) * stride + 1;
    if span > train_len {
        return Err(GraphError::SectionTooLong {
            span,
            available: train_len,
        });
    }
    let free = (train_len - span) as f64;
    let starts: Vec<usize> = if n_sections == 1 {
        vec![0]
    } else {
        (0..n_sections)
            .map(|i| (i as f64 * free / (n_sections - 1) as f64).round() as usize)
            .collect()
    };
    Ok(starts
        .into_iter()
        .map(|start| Section {
            start,
            stride,
            length: n_points,
        })
        .collect())
}

/// Seeded uniform-random section starts over the feasible range; the
/// alternative to [`sample_sections`] when spread matters more than
/// even coverage.
pub fn sample_sections_random<R: Rng>(
    train_len: usize,
    n_points: usize,
    stride: usize,
    n_sections: usize,
    rng: &mut R,
) -> Result<Vec<Section>, GraphError> {
    validate_section_args(n_points, stride, n_sections)?;
    let span = (n_points - 1) * stride + 1;
    if span > train_len {
        return Err(GraphError::SectionTooLong {
            span,
            available: train_len,
        });
    }
    let free = train_len - span;
    Ok((0..n_sections)
        .map(|_| Section {
            start: rng.random_range(0..=free),
            stride,
            length: n_points,
        })
        .collect())
}

fn validate_section_args(n_points: usize, stride: usize, n_sections: usize) -> Result<(), GraphError> {
    if n_points < 2 {
        return Err(GraphError::InvalidArgument(format!(
            "sections need at least 2 points, got {n_points}"
        )));
    }
    if stride == 0 {
        return Err(GraphError::InvalidArgument("stride must be >= 1".into()));
    }
    if n_sections == 0 {
        return Err(GraphError::InvalidArgument(
            "need at least 1 section".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(g: &WeightedDigraph) -> Vec<(usize, usize)> {
        let n = g.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if g.weight(i, j) != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn collinear_points_block() {
        let g = visibility_graph(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(edges(&g), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn dip_is_visible_across() {
        let g = visibility_graph(&[3.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(edges(&g), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn zigzag_peaks_see_each_other() {
        let g = visibility_graph(&[1.0, 5.0, 1.0, 5.0, 1.0], &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(edges(&g), vec![(0, 1), (1, 2), (1, 3), (2, 3), (3, 4)]);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            visibility_graph(&[1.0, 2.0], &[0.0, 1.0, 2.0]),
            Err(GraphError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn non_monotonic_times_rejected() {
        assert!(matches!(
            visibility_graph(&[1.0, 2.0, 3.0], &[0.0, 2.0, 1.0]),
            Err(GraphError::NonMonotonicTimes { index: 2 })
        ));
    }

    #[test]
    fn sections_cover_feasible_range() {
        let secs = sample_sections(1000, 100, 1, 2).unwrap();
        assert_eq!(
            secs.iter().map(|s| s.start).collect::<Vec<_>>(),
            vec![0, 900]
        );
    }

    #[test]
    fn sections_strided_spacing() {
        let secs = sample_sections(8000, 100, 16, 3).unwrap();
        assert_eq!(secs[0].span(), 1585);
        assert_eq!(
            secs.iter().map(|s| s.start).collect::<Vec<_>>(),
            vec![0, 3208, 6415]
        );
    }

    #[test]
    fn sections_too_long_rejected() {
        assert!(matches!(
            sample_sections(100, 100, 16, 1),
            Err(GraphError::SectionTooLong { .. })
        ));
    }

    #[test]
    fn section_starts_stay_in_bounds() {
        for &(train_len, n_points, stride, n_sections) in
            &[(1000usize, 100usize, 1usize, 7usize), (8000, 100, 16, 100), (200, 50, 3, 13)]
        {
            let secs = sample_sections(train_len, n_points, stride, n_sections).unwrap();
            assert_eq!(secs.len(), n_sections);
            for s in secs {
                assert!(s.start + (s.length - 1) * s.stride < train_len);
            }
        }
    }
}
