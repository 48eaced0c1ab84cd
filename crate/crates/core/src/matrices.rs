//! Structured matrices of the shadowing filter for a given time grid.
//!
//! With `n` intervals and `n + 1` observations:
//!
//! | matrix | shape | role |
//! |---|---|---|
//! | `D` | n x n | `-1` on the diagonal, `1` on the first subdiagonal |
//! | `E` | (n+1) x n | same pattern as `D` |
//! | `L` | n x n | `-1` on and below the diagonal |
//! | `M` | n x (n+1) | same pattern as `L` |
//! | `J` | (n+1) x (n+1) | `E M`; identity with a last row of `-1`s and a zero corner |
//! | `G` | (n-1) x n | acceleration side of the three-point recurrence |
//! | `B` | (n-1) x (n+1) | position side of the three-point recurrence |
//! | `Q` | n x (n+1) | `tau M / 2 + L tau M`, maps weighted residuals to `2 eta a` |
//! | `A` | (n-1) x (n+1) | `G Q / 4` |
//!
//! `Abar`/`Bbar` append a row of ones/zeros to `A`/`B`. When built reversed,
//! `G`, `B`, `Q` and `A` are the forward matrices of the reversed gap sequence
//! with their rows and columns reversed, so the approximation error of the
//! master system sits at the oldest times.

use nalgebra::DMatrix;

use crate::grid::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterMatrices {
    intervals: usize,
    block_dim: usize,
    reversed: bool,
    gaps: Vec<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub abar: DMatrix<f64>,
    pub bbar: DMatrix<f64>,
    /// Diagonal gap matrix `tau` (block-expanded along with everything else).
    pub tau: DMatrix<f64>,
}

/// Max-abs deviations of the two structural identities `D L = I` and `E M = J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub dl_minus_identity: f64,
    pub em_minus_j: f64,
}

impl IdentityReport {
    pub fn is_exact(&self) -> bool {
        self.dl_minus_identity == 0.0 && self.em_minus_j == 0.0
    }
}

/// Fills a `rows x cols` matrix from `entry(i, j)`; when `reversed` the entry
/// computed for `(i, j)` lands at `(rows-1-i, cols-1-j)`.
fn fill(rows: usize, cols: usize, reversed: bool, entry: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = entry(i, j);
            if v != 0.0 {
                if reversed {
                    out[(rows - 1 - i, cols - 1 - j)] = v;
                } else {
                    out[(i, j)] = v;
                }
            }
        }
    }
    out
}

fn difference_pattern(rows: usize, cols: usize) -> DMatrix<f64> {
    fill(rows, cols, false, |i, j| {
        if i == j {
            -1.0
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    })
}

fn lower_pattern(rows: usize, cols: usize) -> DMatrix<f64> {
    fill(rows, cols, false, |i, j| if i >= j { -1.0 } else { 0.0 })
}

/// `J = E M` written out from its definition.
pub fn j_matrix(intervals: usize) -> DMatrix<f64> {
    let n = intervals;
    fill(n + 1, n + 1, false, |i, j| {
        if i < n && i == j {
            1.0
        } else if i == n && j != n {
            -1.0
        } else {
            0.0
        }
    })
}

/// `G`, `B` and `Q` for a gap sequence, in the given index orientation.
fn recurrence_parts(gaps: &[f64], reversed: bool) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = gaps.len();
    // entries are always computed in the forward frame of the sequence that
    // is actually filtered, i.e. the reversed one when `reversed`
    let tau: Vec<f64> = if reversed { gaps.iter().rev().copied().collect() } else { gaps.to_vec() };
    let g = fill(n - 1, n, reversed, |i, j| {
        if j == i {
            tau[i] * tau[i] * tau[i + 1]
        } else if j == i + 1 {
            tau[i] * tau[i + 1] * tau[i + 1]
        } else {
            0.0
        }
    });
    let b = fill(n - 1, n + 1, reversed, |i, j| {
        if j == i {
            tau[i + 1]
        } else if j == i + 1 {
            -(tau[i] + tau[i + 1])
        } else if j == i + 2 {
            tau[i]
        } else {
            0.0
        }
    });
    // (tau M / 2 + L tau M)_{ij}: M_{ij} = -[i >= j], (L tau M)_{ij} = sum_{k<=i, k>=j} tau_k
    let q = fill(n, n + 1, reversed, |i, j| {
        if j > i {
            return 0.0;
        }
        let tail: f64 = tau[j..=i].iter().sum();
        -0.5 * tau[i] + tail
    });
    (g, b, q)
}

impl FilterMatrices {
    pub fn build(grid: &TimeGrid, reversed: bool) -> Self {
        let n = grid.intervals();
        let gaps = grid.gaps().to_vec();
        let d = difference_pattern(n, n);
        let e = difference_pattern(n + 1, n);
        let l = lower_pattern(n, n);
        let m = lower_pattern(n, n + 1);
        let j = j_matrix(n);
        let (g, b, q) = recurrence_parts(&gaps, reversed);
        let a = &g * &q * 0.25;
        let tau = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gaps.clone()));
        let abar = augment(&a, 1.0);
        let bbar = augment(&b, 0.0);
        Self { intervals: n, block_dim: 1, reversed, gaps, d, e, l, m, j, g, b, q, a, abar, bbar, tau }
    }

    /// Every matrix with each scalar entry replaced by `entry * I_dim`.
    pub fn expand(&self, dim: usize) -> Self {
        assert_eq!(self.block_dim, 1, "matrices are already block-expanded");
        let x = |m: &DMatrix<f64>| expand_block(m, dim);
        Self {
            intervals: self.intervals,
            block_dim: dim,
            reversed: self.reversed,
            gaps: self.gaps.clone(),
            d: x(&self.d),
            e: x(&self.e),
            l: x(&self.l),
            m: x(&self.m),
            j: x(&self.j),
            g: x(&self.g),
            b: x(&self.b),
            q: x(&self.q),
            a: x(&self.a),
            abar: x(&self.abar),
            bbar: x(&self.bbar),
            tau: x(&self.tau),
        }
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn verify_identities(&self) -> IdentityReport {
        let eye = DMatrix::<f64>::identity(self.d.nrows(), self.d.ncols());
        IdentityReport {
            dl_minus_identity: (&self.d * &self.l - eye).abs().max(),
            em_minus_j: (&self.e * &self.m - &self.j).abs().max(),
        }
    }
}

fn augment(m: &DMatrix<f64>, fill_value: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    m.clone().insert_row(rows, fill_value)
}

pub fn build_filter_matrices(grid: &TimeGrid, reversed: bool) -> FilterMatrices {
    FilterMatrices::build(grid, reversed)
}

/// Kronecker product with the identity: entry `m_ij` becomes the block `m_ij I_dim`.
pub fn expand_block(matrix: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    assert!(dim >= 1, "block dimension must be at least 1");
    if dim == 1 {
        return matrix.clone();
    }
    let mut out = DMatrix::zeros(matrix.nrows() * dim, matrix.ncols() * dim);
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            let v = matrix[(i, j)];
            if v != 0.0 {
                for k in 0..dim {
                    out[(i * dim + k, j * dim + k)] = v;
                }
            }
        }
    }
    out
}

pub fn verify_identities(fm: &FilterMatrices) -> IdentityReport {
    fm.verify_identities()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_time_grid;
    use proptest::prelude::*;

    fn grid(times: &[f64]) -> TimeGrid {
        build_time_grid(times).unwrap()
    }

    fn reversal(k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(k, k, |i, j| if i + j == k - 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn d_pattern_for_three_intervals() {
        let fm = FilterMatrices::build(&grid(&[0.0, 1.0, 2.0, 3.0]), false);
        let expected = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        assert_eq!(fm.d, expected);
    }

    #[test]
    fn b_first_row_on_unit_gaps() {
        let fm = FilterMatrices::build(&grid(&[0.0, 1.0, 2.0, 3.0]), false);
        assert_eq!(fm.b.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -2.0, 1.0, 0.0]);
    }

    #[test]
    fn g_with_uneven_gaps() {
        let fm = FilterMatrices::build(&grid(&[0.0, 1.0, 3.0, 4.0]), false);
        let expected = DMatrix::from_row_slice(2, 3, &[2.0, 4.0, 0.0, 0.0, 4.0, 2.0]);
        assert_eq!(fm.g, expected);
    }

    #[test]
    fn j_last_row() {
        let j = j_matrix(3);
        assert_eq!(j.row(3).iter().copied().collect::<Vec<_>>(), vec![-1.0, -1.0, -1.0, 0.0]);
        assert_eq!(j[(2, 2)], 1.0);
    }

    #[test]
    fn q_is_the_literal_product() {
        let g = grid(&[0.0, 0.5, 2.0, 2.25, 4.0, 7.0]);
        let fm = FilterMatrices::build(&g, false);
        let literal = &fm.tau * &fm.m * 0.5 + &fm.l * &fm.tau * &fm.m;
        assert!((literal - &fm.q).abs().max() < 1e-14);
    }

    #[test]
    fn augmented_rows() {
        let fm = FilterMatrices::build(&grid(&[0.0, 1.0, 2.0, 4.0, 5.0]), true);
        let last = fm.abar.nrows() - 1;
        assert!(fm.abar.row(last).iter().all(|&v| v == 1.0));
        assert!(fm.bbar.row(last).iter().all(|&v| v == 0.0));
        assert_eq!(fm.abar.shape(), (4, 5));
    }

    #[test]
    fn identities_exact_uniform_random_and_reversed() {
        let uniform = FilterMatrices::build(&TimeGrid::uniform(0.0, 1.0, 6).unwrap(), false);
        assert!(uniform.verify_identities().is_exact());
        let ragged = grid(&[0.0, 0.3, 1.9, 2.0, 3.7, 3.8, 5.5, 9.0]);
        assert!(FilterMatrices::build(&ragged, false).verify_identities().is_exact());
        let rev = FilterMatrices::build(&TimeGrid::uniform(0.0, 1.0, 6).unwrap(), true);
        assert!(rev.verify_identities().is_exact());
    }

    #[test]
    fn bookkeeping_matches_explicit_rar() {
        let g = grid(&[0.0, 0.4, 1.5, 1.9, 3.0, 4.2, 4.3]);
        let n = g.intervals();
        let fwd_rev = FilterMatrices::build(&g.reversed(), false);
        let booked = FilterMatrices::build(&g, true);
        let (r_a, r_p, r_i) = (reversal(n - 1), reversal(n + 1), reversal(n));
        assert!((&r_a * &fwd_rev.a * &r_p - &booked.a).abs().max() < 1e-13);
        assert!((&r_a * &fwd_rev.b * &r_p - &booked.b).abs().max() < 1e-13);
        assert!((&r_a * &fwd_rev.g * &r_i - &booked.g).abs().max() < 1e-13);
        assert!((&r_i * &fwd_rev.q * &r_p - &booked.q).abs().max() < 1e-13);
        // reversal applied before augmentation
        let abar_ref = (&r_a * &fwd_rev.a * &r_p).insert_row(n - 1, 1.0);
        assert!((abar_ref - &booked.abar).abs().max() < 1e-13);
    }

    #[test]
    fn expand_block_examples() {
        assert_eq!(expand_block(&DMatrix::identity(2, 2), 3), DMatrix::<f64>::identity(6, 6));
        assert_eq!(
            expand_block(&DMatrix::from_element(1, 1, 2.0), 2),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0])
        );
        let fm = FilterMatrices::build(&grid(&[0.0, 1.0, 2.0]), false);
        assert_eq!(expand_block(&fm.d, 2).shape(), (4, 4));
    }

    #[test]
    fn expand_block_matches_kronecker() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 4.0]);
        let k = m.kronecker(&DMatrix::<f64>::identity(3, 3));
        assert_eq!(expand_block(&m, 3), k);
    }

    fn gaps_strategy() -> impl Strategy<Value = Vec<f64>> {
        (3usize..=20).prop_flat_map(|n| prop::collection::vec(0.05f64..5.0, n))
    }

    fn times_from(gaps: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0];
        for g in gaps {
            let last = *t.last().unwrap();
            t.push(last + g);
        }
        t
    }

    proptest! {
        #[test]
        fn identities_hold_for_random_gaps(gaps in gaps_strategy(), reversed in any::<bool>()) {
            let fm = FilterMatrices::build(&grid(&times_from(&gaps)), reversed);
            prop_assert!(fm.verify_identities().is_exact());
        }

        #[test]
        fn b_annihilates_affine_sequences(gaps in gaps_strategy(), c in -50.0f64..50.0, slope in -5.0f64..5.0, reversed in any::<bool>()) {
            let t = times_from(&gaps);
            let fm = FilterMatrices::build(&grid(&t), reversed);
            let p = nalgebra::DVector::from_iterator(t.len(), t.iter().map(|ti| c + slope * ti));
            let scale = fm.b.abs().max() * p.abs().max();
            prop_assert!((&fm.b * p).abs().max() <= 1e-12 * scale);
        }

        #[test]
        fn expand_block_is_multiplicative(
            a in prop::collection::vec(-3.0f64..3.0, 6),
            b in prop::collection::vec(-3.0f64..3.0, 12),
            dim in 1usize..4,
        ) {
            let ma = DMatrix::from_row_slice(2, 3, &a);
            let mb = DMatrix::from_row_slice(3, 4, &b);
            let lhs = expand_block(&ma, dim) * expand_block(&mb, dim);
            let rhs = expand_block(&(&ma * &mb), dim);
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }
}
