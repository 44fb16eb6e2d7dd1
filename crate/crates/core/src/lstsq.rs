//! Regularised pseudoinverse of a matricised tensor train and the TT
//! least-squares operator solve.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, to_row_major, truncation_rank};
use crate::tt::{orthogonalize_left, orthogonalize_right, Core, TruncationTol, TtTensor};

/// Singular values at or below this fraction of the largest are discarded.
pub const SINGULAR_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct TtPinvResult {
    /// Modes `[split..d]` of the input followed by modes `[0..split]`.
    pub pinv: TtTensor,
    /// Retained singular values, descending.
    pub singular_values: Vec<f64>,
    pub regularization: f64,
}

/// Tikhonov filter factor `σ / (σ² + γ)`; plain `1/σ` at `γ = 0`.
pub fn filter(sigma: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0 / sigma
    } else {
        sigma / (sigma * sigma + gamma)
    }
}

/// Regularised pseudoinverse of `x` matricised with modes `[0, split)` as rows.
pub fn tt_pinv(x: &TtTensor, split_index: usize, tol: TruncationTol, gamma: f64) -> Result<TtPinvResult> {
    let d = x.ndim();
    if split_index == 0 || split_index >= d {
        return Err(Error::InvalidInput(format!("split index {split_index} outside 1..{d}")));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidInput(format!("regularisation must be >= 0, got {gamma}")));
    }
    let (lq, rl) = orthogonalize_left(&x.cores()[..split_index]);
    let (rq, rr) = orthogonalize_right(&x.cores()[split_index..]);
    let svd = linalg::svd(&(&rl * &rr))?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let keep = svd.s.iter().take_while(|&&s| s > SINGULAR_FLOOR * smax && s > 0.0).count();

    let out_modes: Vec<usize> = x.mode_sizes()[..split_index].to_vec();
    let in_modes: Vec<usize> = x.mode_sizes()[split_index..].to_vec();
    if keep == 0 {
        let mut modes = in_modes;
        modes.extend(out_modes);
        return Ok(TtPinvResult { pinv: TtTensor::zeros(&modes)?, singular_values: Vec::new(), regularization: gamma });
    }
    let svd = svd.truncate(keep);
    // Moving the open index costs a sweep of SVDs on each side.
    let inner = TruncationTol { epsilon: 0.1 * tol.epsilon };

    // Output side: Lq * U with the open index moved to the front.
    let u_chain = move_open_index_left(&lq, &svd.u, inner)?;
    // Input side: V^T * Rq with the open index moved to the back.
    let rev: Vec<Core> = rq.iter().rev().map(Core::transposed).collect();
    let v_rev = move_open_index_left(&rev, &svd.vt.transpose(), inner)?;
    let mut v_chain: Vec<Core> = v_rev.iter().rev().map(Core::transposed).collect();

    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        keep,
        svd.s.iter().map(|&s| filter(s, gamma)),
    ));
    let last = v_chain.len() - 1;
    v_chain[last] = v_chain[last].mul_right(&scale);
    v_chain.extend(u_chain);
    let pinv = TtTensor::from_cores(v_chain)?.round(tol)?;
    Ok(TtPinvResult { pinv, singular_values: svd.s, regularization: gamma })
}

/// Given a left-orthogonal chain `P` (left boundary rank 1) and a matrix `w`
/// attached to its right end, return cores representing
/// `Z(σ, i_1, ..., i_m) = (P(i_1..i_m) w)[σ]` with `σ` as the left boundary rank
/// and right boundary rank 1. Truncation is relative to `‖w‖_F`.
fn move_open_index_left(chain: &[Core], w: &DMatrix<f64>, tol: TruncationTol) -> Result<Vec<Core>> {
    let m = chain.len();
    let k = w.ncols();
    let delta = tol.epsilon * w.norm() / (m.max(1) as f64).sqrt();
    let mut out: Vec<Core> = Vec::with_capacity(m);
    // carry(b, σ, j): left rank of the current core, open index, rank to the right.
    let mut carry = w.clone(); // rows b, cols (σ, j) with j of size 1
    let mut rj = 1usize;
    for core in chain.iter().rev() {
        let (a, n, _) = core.shape();
        // y(a, i, σ, j) = Σ_b G(a,i,b) carry(b, σ, j)
        let y = core.left_unfold() * &carry; // (a*n) x (k*rj)
        // Rearrange to rows (a, σ), cols (i, j).
        let mut ym = DMatrix::zeros(a * k, n * rj);
        for aa in 0..a {
            for i in 0..n {
                for s in 0..k {
                    for j in 0..rj {
                        ym[(aa * k + s, i * rj + j)] = y[(aa * n + i, s * rj + j)];
                    }
                }
            }
        }
        let svd = linalg::svd(&ym)?;
        let rank = truncation_rank(&svd.s, delta);
        let svd = svd.truncate(rank);
        out.push(Core::new(rank, n, rj, to_row_major(&svd.vt))?);
        let mut us = svd.u;
        for (c, s) in svd.s.iter().enumerate() {
            us.column_mut(c).scale_mut(*s);
        }
        // us rows (a, σ), cols r'  ->  carry rows a, cols (σ, r')
        let mut next = DMatrix::zeros(a, k * rank);
        for aa in 0..a {
            for s in 0..k {
                for c in 0..rank {
                    next[(aa, s * rank + c)] = us[(aa * k + s, c)];
                }
            }
        }
        carry = next;
        rj = rank;
    }
    // carry has a single row (boundary rank 1): fold σ into the first core.
    debug_assert_eq!(carry.nrows(), 1);
    let first = out.pop().ok_or_else(|| Error::Internal("empty chain".into()))?;
    let (r0, n0, r1) = first.shape();
    debug_assert_eq!(r0, rj);
    let lead = DMatrix::from_fn(k, rj, |s, c| carry[(0, s * rj + c)]);
    let merged = lead * first.right_unfold();
    out.push(Core::from_right_unfold(&merged, n0, r1));
    out.reverse();
    Ok(out)
}

/// Solve `min_O ‖O D − R‖² + γ‖O‖²` with `D` matricised at `split_index`
/// (features × time) and `R` (state × time). The result has the state modes of
/// `r` followed by the feature modes of `d`.
pub fn tt_ls_solve(d: &TtTensor, r: &TtTensor, gamma: f64, tol: TruncationTol, split_index: usize) -> Result<TtTensor> {
    let (dm, rm) = (d.mode_sizes(), r.mode_sizes());
    if split_index + 1 != dm.len() {
        return Err(Error::InvalidInput(format!(
            "split index {split_index} must separate the time mode of a {}-mode design tensor",
            dm.len()
        )));
    }
    if dm.last() != rm.last() {
        return Err(Error::Shape(format!("time modes differ: {:?} vs {:?}", dm.last(), rm.last())));
    }
    let p = tt_pinv(d, split_index, tol, gamma)?;
    let pc = p.pinv.cores();
    let rc = r.cores();
    let time = &rc[rc.len() - 1];
    let lead = &pc[0];
    if lead.size() != time.size() || lead.left() != 1 {
        return Err(Error::Internal("pseudoinverse does not lead with the time mode".into()));
    }
    // T = R_time (ρ x K) · pinv lead (K x r').
    let t = DMatrix::from_row_slice(time.left(), time.size(), time.data())
        * DMatrix::from_row_slice(lead.size(), lead.right(), lead.data());
    let mut cores: Vec<Core> = rc[..rc.len() - 1].to_vec();
    if pc.len() == 1 {
        // Degenerate: nothing follows the time mode.
        let last = cores.len() - 1;
        cores[last] = cores[last].mul_right(&t);
    } else {
        cores.push(pc[1].mul_left(&t));
        cores.extend(pc[2..].iter().cloned());
    }
    TtTensor::from_cores(cores)?.round(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tt(rng: &mut ChaCha8Rng, modes: &[usize], rank: usize) -> TtTensor {
        let d = modes.len();
        let cores = modes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let l = if k == 0 { 1 } else { rank };
                let r = if k == d - 1 { 1 } else { rank };
                Core::new(l, n, r, (0..l * n * r).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
            })
            .collect();
        TtTensor::from_cores(cores).unwrap()
    }

    /// Dense oracle: V diag(σ/(σ²+γ)) Uᵀ from one SVD of the full matrix.
    fn dense_filtered_pinv(m: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
        let s = linalg::svd(m).unwrap();
        let (u, vt) = (&s.u, &s.vt);
        let smax = s.s[0];
        let mut out = DMatrix::zeros(m.ncols(), m.nrows());
        for (i, &sv) in s.s.iter().enumerate() {
            if sv > 1e-14 * smax {
                let f = if gamma == 0.0 { 1.0 / sv } else { sv / (sv * sv + gamma) };
                out += vt.row(i).transpose() * u.column(i).transpose() * f;
            }
        }
        out
    }

    fn pinv_matrix(p: &TtPinvResult, in_count: usize) -> DMatrix<f64> {
        p.pinv.full().unwrap().matricize(in_count)
    }

    #[test]
    fn identity_pinv() {
        // 4x4 identity as modes (2,2,2,2) with rows (i1,i2), cols (j1,j2).
        let id = DenseTensor::from_fn(vec![2, 2, 2, 2], |i| if i[0] == i[2] && i[1] == i[3] { 1.0 } else { 0.0 }).unwrap();
        let t = TtTensor::tt_svd(&id, TruncationTol::exact()).unwrap();
        let p = tt_pinv(&t, 2, TruncationTol { epsilon: 1e-14 }, 0.0).unwrap();
        let m = pinv_matrix(&p, 2);
        assert!((m - DMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn moore_penrose_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = random_tt(&mut rng, &[3, 4, 5, 2], 2);
        let m = t.full().unwrap().matricize(2);
        let p = tt_pinv(&t, 2, TruncationTol { epsilon: 1e-14 }, 0.0).unwrap();
        let mp = pinv_matrix(&p, 2);
        let scale = m.norm() * mp.norm();
        assert!((&m * &mp * &m - &m).norm() <= 1e-10 * m.norm() * scale);
        assert!((&mp * &m * &mp - &mp).norm() <= 1e-10 * mp.norm() * scale);
        let a = &m * &mp;
        assert!((&a - a.transpose()).norm() <= 1e-10 * scale);
        let b = &mp * &m;
        assert!((&b - b.transpose()).norm() <= 1e-10 * scale);
        assert!((mp - dense_filtered_pinv(&m, 0.0)).norm() <= 1e-10 * scale);
    }

    #[test]
    fn tikhonov_filter_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let t = random_tt(&mut rng, &[3, 4, 5, 2], 3);
        let m = t.full().unwrap().matricize(2);
        let p = tt_pinv(&t, 2, TruncationTol { epsilon: 1e-14 }, 1e-2).unwrap();
        let want = dense_filtered_pinv(&m, 1e-2);
        assert!((pinv_matrix(&p, 2) - &want).norm() <= 1e-10 * want.norm());
        assert!(p.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_tensor_gives_zero_operator() {
        let z = TtTensor::zeros(&[2, 3, 2]).unwrap();
        let p = tt_pinv(&z, 1, TruncationTol::exact(), 0.0).unwrap();
        assert!(p.singular_values.is_empty());
        assert_eq!(p.pinv.mode_sizes(), vec![3, 2, 2]);
        assert_eq!(p.pinv.norm(), 0.0);
        assert!(tt_pinv(&z, 0, TruncationTol::exact(), 0.0).is_err());
        assert!(tt_pinv(&z, 3, TruncationTol::exact(), 0.0).is_err());
    }

    fn dense_ls(d: &DMatrix<f64>, r: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
        // O = R D⁺_γ with D features × time.
        r * dense_filtered_pinv(d, gamma)
    }

    #[test]
    fn ls_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let k = 20;
        // design with modes (2,2,3) x time, targets (2,2) x time
        let d = random_tt(&mut rng, &[2, 2, 3, k], 3);
        let r = random_tt(&mut rng, &[2, 2, k], 2);
        for gamma in [0.0, 1e-6, 1e-2] {
            let o = tt_ls_solve(&d, &r, gamma, TruncationTol { epsilon: 1e-14 }, 3).unwrap();
            assert_eq!(o.mode_sizes(), vec![2, 2, 2, 2, 3]);
            let dm = d.full().unwrap().matricize(3);
            let rm = r.full().unwrap().matricize(2);
            let want = dense_ls(&dm, &rm, gamma);
            let got = o.full().unwrap().matricize(2);
            assert!((got - &want).norm() <= 1e-8 * want.norm(), "gamma {gamma}");
        }
        assert!(tt_ls_solve(&d, &random_tt(&mut rng, &[2, 2, k + 1], 1), 0.0, TruncationTol::exact(), 3).is_err());
    }

    #[test]
    fn orthonormal_design() {
        // D with orthonormal rows (features x time): D Dᵀ = I, so O = R Dᵀ.
        let q = nalgebra::DMatrix::<f64>::from_fn(6, 4, |i, j| ((i * 7 + j * 3) as f64).sin()).qr().q();
        let dm = q.transpose(); // 4 x 6
        let d = TtTensor::tt_svd(&DenseTensor::new(vec![2, 2, 6], to_row_major(&dm)).unwrap(), TruncationTol::exact()).unwrap();
        let rm = DMatrix::from_fn(3, 6, |i, j| (i + 2 * j) as f64);
        let r = TtTensor::tt_svd(&DenseTensor::new(vec![3, 6], to_row_major(&rm)).unwrap(), TruncationTol::exact()).unwrap();
        let o = tt_ls_solve(&d, &r, 0.0, TruncationTol::exact(), 2).unwrap();
        let want = &rm * dm.transpose();
        assert!((o.full().unwrap().matricize(1) - &want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn gamma_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let d = random_tt(&mut rng, &[3, 2, 8], 2);
        let r = random_tt(&mut rng, &[2, 8], 2);
        let norms: Vec<f64> = [0.0, 1e-4, 1e-2, 1.0]
            .iter()
            .map(|&g| tt_ls_solve(&d, &r, g, TruncationTol::exact(), 2).unwrap().norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[0] >= w[1]), "{norms:?}");
    }
}
