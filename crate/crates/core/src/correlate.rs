//! Autocorrelation estimation and the linear maps from PSD to compressive
//! autocorrelation.
//!
//! Layout convention: an autocorrelation vector with half-length `L` stores
//! `[0, r(-L+1), …, r(-1), r(0), r(1), …, r(L-1)]`, i.e. lag `j` lives at
//! index `L + j` and index 0 is a fixed zero. Matrix builders below follow
//! the same 0-based storage; the 1-based index rules they implement are
//! converted at the point of use.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};
use crate::linalg::{hankel, lift_matrix, toeplitz, zeros, CMatrix, RMatrix};
use crate::sampling::{CompressiveFrame, MeasurementMatrix, SensingOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrVector {
    half_len: usize,
    values: Vec<Complex64>,
}

impl AutocorrVector {
    pub fn zeros(half_len: usize) -> Self {
        Self {
            half_len,
            values: vec![ZERO; 2 * half_len],
        }
    }

    /// Builds the vector from nonnegative lags `r(0..L)`, filling negative
    /// lags by conjugate symmetry.
    pub fn from_nonneg_lags(lags: &[Complex64]) -> Self {
        let half_len = lags.len();
        let mut values = vec![ZERO; 2 * half_len];
        for (j, &r) in lags.iter().enumerate() {
            values[half_len + j] = r;
            if j > 0 {
                values[half_len - j] = r.conj();
            }
        }
        Self { half_len, values }
    }

    /// Wraps a raw layout vector; the first entry must be exactly zero.
    pub fn from_values(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(invalid(format!(
                "layout length {} is not a positive even number",
                values.len()
            )));
        }
        if values[0] != ZERO {
            return Err(invalid("layout entry 0 must be exactly zero"));
        }
        Ok(Self {
            half_len: values.len() / 2,
            values,
        })
    }

    pub fn half_len(&self) -> usize {
        self.half_len
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `r(j)` for `-L < j < L`.
    pub fn lag(&self, j: isize) -> Complex64 {
        let k = self.half_len as isize + j;
        assert!(
            k >= 1 && (k as usize) < self.values.len(),
            "lag {j} out of range"
        );
        self.values[k as usize]
    }

    /// Largest `|r(-j) - conj(r(j))|` over the stored lags.
    pub fn symmetry_defect(&self) -> f64 {
        (1..self.half_len as isize)
            .map(|j| (self.lag(-j) - self.lag(j).conj()).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide lag `j` sums by `L`.
    Biased,
    /// Divide lag `j` sums by `L - j`.
    Unbiased,
}

/// Averages per-frame lag products: `r̂(j) = mean_t (1/L) Σ_n x[n] x*[n-j]`
/// (or `1/(L-j)`), conjugate-symmetric by construction.
pub fn estimate_autocorr<F: AsRef<[Complex64]>>(
    frames: &[F],
    half_len: usize,
    normalization: Normalization,
) -> Result<AutocorrVector> {
    if frames.is_empty() {
        return Err(invalid("need at least one frame"));
    }
    if half_len == 0 {
        return Err(invalid("half_len must be positive"));
    }
    let mut sums = vec![ZERO; half_len];
    for f in frames {
        let x = f.as_ref();
        if x.len() != half_len {
            return Err(shape(
                format!("frames of length {half_len}"),
                format!("length {}", x.len()),
            ));
        }
        for (j, acc) in sums.iter_mut().enumerate() {
            for n in j..half_len {
                *acc += x[n] * x[n - j].conj();
            }
        }
    }
    let frames_n = frames.len() as f64;
    let lags: Vec<Complex64> = sums
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let denom = match normalization {
                Normalization::Biased => half_len as f64,
                Normalization::Unbiased => (half_len - j) as f64,
            };
            s / (denom * frames_n)
        })
        .collect();
    let mut r = AutocorrVector::from_nonneg_lags(&lags);
    // r(0) is real; drop rounding residue so the layout is exactly Hermitian.
    r.values[half_len].im = 0.0;
    Ok(r)
}

/// How the length-`2M` compressive autocorrelation is formed from sub-sampled frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "normalization")]
pub enum CompressiveEstimator {
    /// Treat each compressive frame as a stream and average lag-`j` products.
    /// Its expectation does not follow `r_y = A r_x` for non-uniform selections.
    Stream(Normalization),
    /// First column of the sample covariance: `r̂_y(k) = mean_t y_t[k] y_t[0]*`.
    AnchorColumn,
    /// Pools every pair of kept samples whose Nyquist-index gap equals
    /// `s_k - s_0`; same expectation as `AnchorColumn`, lower variance.
    LagPooled,
}

/// Estimates `r_y` from compressive frames.
///
/// `AnchorColumn` and `LagPooled` are unbiased for `A r_x`, where `A` is
/// [`LinkMatrix`] built from the same `phi`.
pub fn estimate_compressive_autocorr(
    frames: &[CompressiveFrame],
    phi: &MeasurementMatrix,
    estimator: CompressiveEstimator,
) -> Result<AutocorrVector> {
    let m = phi.m();
    match estimator {
        CompressiveEstimator::Stream(norm) => estimate_autocorr(frames, m, norm),
        CompressiveEstimator::AnchorColumn | CompressiveEstimator::LagPooled => {
            if frames.is_empty() {
                return Err(invalid("need at least one frame"));
            }
            if let Some(f) = frames.iter().find(|f| f.samples.len() != m) {
                return Err(shape(
                    format!("frames of length {m}"),
                    format!("length {}", f.samples.len()),
                ));
            }
            let rows = phi.selected_rows();
            let lags: Vec<Complex64> = if estimator == CompressiveEstimator::AnchorColumn {
                (0..m)
                    .map(|k| {
                        frames
                            .iter()
                            .map(|f| f.samples[k] * f.samples[0].conj())
                            .sum::<Complex64>()
                            / frames.len() as f64
                    })
                    .collect()
            } else {
                let n = phi.n();
                let mut sums = vec![ZERO; n];
                let mut counts = vec![0usize; n];
                for a in 0..m {
                    for b in 0..=a {
                        counts[rows[a] - rows[b]] += 1;
                    }
                }
                for f in frames {
                    let y = &f.samples;
                    for a in 0..m {
                        for b in 0..=a {
                            sums[rows[a] - rows[b]] += y[a] * y[b].conj();
                        }
                    }
                }
                let scale = frames.len() as f64;
                (0..m)
                    .map(|k| {
                        let d = rows[k] - rows[0];
                        sums[d] / (counts[d] as f64 * scale)
                    })
                    .collect()
            };
            let mut r = AutocorrVector::from_nonneg_lags(&lags);
            r.values[m].im = 0.0;
            Ok(r)
        }
    }
}

/// Expected Nyquist autocorrelation of a scene: `r_x = Ψ̃ p + σ² e_{lag 0}`
/// with `Ψ̃` the lag-aligned inverse DFT.
pub fn ideal_autocorr(psd: &[f64], noise_variance: f64) -> Result<AutocorrVector> {
    let two_n = psd.len();
    let psi = build_lag_idft(two_n)?;
    let p = nalgebra::DVector::from_iterator(two_n, psd.iter().map(|&v| Complex64::new(v, 0.0)));
    let mut values: Vec<Complex64> = (&psi * p).iter().copied().collect();
    values[0] = ZERO;
    values[two_n / 2] += noise_variance;
    Ok(AutocorrVector {
        half_len: two_n / 2,
        values,
    })
}

/// `Φ̄` (M × N): zero first row; 1-based row `i ≥ 2` copies row `M + 2 - i` of `Φ`.
pub fn build_phi_bar(phi: &CMatrix) -> CMatrix {
    let (m, n) = phi.shape();
    let mut bar = zeros(m, n);
    for i in 1..m {
        // 0-based: row i <- row m - i
        bar.row_mut(i).copy_from(&phi.row(m - i));
    }
    bar
}

/// The four `N × N` Hankel/Toeplitz factors built from the first row of `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrices {
    pub phi1: CMatrix,
    pub phi2: CMatrix,
    pub phi3: CMatrix,
    pub phi4: CMatrix,
}

pub fn build_block_matrices(phi: &CMatrix) -> BlockMatrices {
    let n = phi.ncols();
    let first: Vec<Complex64> = phi.row(0).iter().copied().collect();
    let conj: Vec<Complex64> = first.iter().map(|z| z.conj()).collect();
    let zero_col = vec![ZERO; n];

    // Φ₁ = hankel(0, [0, φ*₁ … φ*_{N-1}])
    let mut b1 = vec![ZERO; n];
    b1[1..].copy_from_slice(&conj[..n - 1]);
    // Φ₂ = hankel([φ*₁ … φ*_N], [φ*_N, 0 …])
    let mut b2 = vec![ZERO; n];
    b2[0] = conj[n - 1];
    // Φ₃ = toeplitz(0, [0, φ_N … φ₂])
    let mut b3 = vec![ZERO; n];
    for k in 1..n {
        b3[k] = first[n - k];
    }
    // Φ₄ = toeplitz([φ₁ … φ_N], [φ₁, 0 …])
    let mut b4 = vec![ZERO; n];
    b4[0] = first[0];

    BlockMatrices {
        phi1: hankel(&zero_col, &b1),
        phi2: hankel(&conj, &b2),
        phi3: toeplitz(&zero_col, &b3),
        phi4: toeplitz(&first, &b4),
    }
}

/// `A` with `r_y = A r_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMatrix {
    a: CMatrix,
    /// `[Φ̄Φ₁, Φ̄Φ₂, ΦΦ₃, ΦΦ₄]`
    blocks: [CMatrix; 4],
}

impl LinkMatrix {
    /// Assembles `A = [[Φ̄Φ₁, Φ̄Φ₂], [ΦΦ₃, ΦΦ₄]]` (2M × 2N).
    pub fn build(phi: &CMatrix) -> Self {
        let (m, n) = phi.shape();
        let bar = build_phi_bar(phi);
        let f = build_block_matrices(phi);
        let blocks = [&bar * &f.phi1, &bar * &f.phi2, phi * &f.phi3, phi * &f.phi4];
        let mut a = zeros(2 * m, 2 * n);
        a.view_mut((0, 0), (m, n)).copy_from(&blocks[0]);
        a.view_mut((0, n), (m, n)).copy_from(&blocks[1]);
        a.view_mut((m, 0), (m, n)).copy_from(&blocks[2]);
        a.view_mut((m, n), (m, n)).copy_from(&blocks[3]);
        Self { a, blocks }
    }

    pub fn from_measurement(phi: &impl SensingOperator) -> Self {
        Self::build(&phi.to_dense())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn blocks(&self) -> &[CMatrix; 4] {
        &self.blocks
    }

    pub fn m(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn n(&self) -> usize {
        self.a.ncols() / 2
    }

    pub fn apply(&self, r_x: &AutocorrVector) -> Result<AutocorrVector> {
        if r_x.half_len != self.n() {
            return Err(shape(
                format!("half_len {}", self.n()),
                format!("half_len {}", r_x.half_len),
            ));
        }
        let v = nalgebra::DVector::from_column_slice(&r_x.values);
        Ok(AutocorrVector {
            half_len: self.m(),
            values: (&self.a * v).iter().copied().collect(),
        })
    }
}

fn check_two_n(two_n: usize) -> Result<()> {
    if two_n < 2 || !two_n.is_multiple_of(2) {
        return Err(invalid(format!(
            "transform size {two_n} must be even and >= 2"
        )));
    }
    Ok(())
}

/// Inverse DFT matrix `Ψ[k, l] = e^{+2πi kl / 2N} / 2N`.
pub fn build_idft(two_n: usize) -> Result<CMatrix> {
    check_two_n(two_n)?;
    let scale = 1.0 / two_n as f64;
    Ok(DMatrix::from_fn(two_n, two_n, |k, l| {
        Complex64::from_polar(scale, 2.0 * PI * ((k * l) % two_n) as f64 / two_n as f64)
    }))
}

/// Inverse DFT with rows in the autocorrelation layout: row `k` evaluates
/// lag `k - N`, i.e. `Ψ̃[k, l] = Ψ[(k + N) mod 2N, l]`.
///
/// With this ordering `Ψ̃ p` is the autocorrelation vector of a process
/// whose power in bin `l` is `p_l / 2N`, which is what lets a nonnegative
/// PSD produce the `[0, r(-N+1) … r(N-1)]` layout.
pub fn build_lag_idft(two_n: usize) -> Result<CMatrix> {
    let psi = build_idft(two_n)?;
    let half = two_n / 2;
    Ok(DMatrix::from_fn(two_n, two_n, |k, l| {
        psi[((k + half) % two_n, l)]
    }))
}

/// Direct forward DFT `X[l] = Σ_k v[k] e^{-2πi kl / n}`.
pub fn forward_dft(v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|l| {
            v.iter()
                .enumerate()
                .map(|(k, &x)| {
                    x * Complex64::from_polar(1.0, -2.0 * PI * ((k * l) % n) as f64 / n as f64)
                })
                .sum()
        })
        .collect()
}

/// `A`, `Ψ` and the dictionary `D = A Ψ`.
#[derive(Debug, Clone)]
pub struct DictionaryBundle {
    pub link: LinkMatrix,
    pub psi: CMatrix,
    pub d: CMatrix,
}

pub fn build_dictionary(link: LinkMatrix, psi: CMatrix) -> Result<DictionaryBundle> {
    if link.matrix().ncols() != psi.nrows() || !psi.is_square() {
        return Err(shape(
            format!("square Ψ with {} rows", link.matrix().ncols()),
            format!("{}x{}", psi.nrows(), psi.ncols()),
        ));
    }
    let d = link.matrix() * &psi;
    Ok(DictionaryBundle { link, psi, d })
}

impl DictionaryBundle {
    /// Pipeline dictionary for a row-subsampler: `A` from `phi`, lag-aligned `Ψ̃`.
    pub fn for_measurement(phi: &MeasurementMatrix) -> Result<Self> {
        let psi = build_lag_idft(2 * phi.n())?;
        build_dictionary(LinkMatrix::from_measurement(phi), psi)
    }

    /// Same as [`for_measurement`](Self::for_measurement) with a precomputed `Ψ̃`.
    pub fn with_psi(phi: &MeasurementMatrix, psi: &CMatrix) -> Result<Self> {
        build_dictionary(LinkMatrix::from_measurement(phi), psi.clone())
    }

    pub fn apply(&self, p: &[f64]) -> Result<AutocorrVector> {
        if p.len() != self.d.ncols() {
            return Err(shape(format!("PSD of length {}", self.d.ncols()), p.len()));
        }
        let v =
            nalgebra::DVector::from_iterator(p.len(), p.iter().map(|&x| Complex64::new(x, 0.0)));
        Ok(AutocorrVector {
            half_len: self.d.nrows() / 2,
            values: (&self.d * v).iter().copied().collect(),
        })
    }
}

/// `B`: applies `D` to each of `T` columns of a column-major stacked vector,
/// so that `B · vec(P) = vec(D P)`.
#[derive(Debug, Clone)]
pub struct StackedOperator {
    d: CMatrix,
    lifted: RMatrix,
    t_periods: usize,
}

pub fn build_stacked_operator(d: &CMatrix, t_periods: usize) -> Result<StackedOperator> {
    if t_periods == 0 {
        return Err(invalid("t_periods must be at least 1"));
    }
    Ok(StackedOperator {
        d: d.clone(),
        lifted: lift_matrix(d),
        t_periods,
    })
}

impl StackedOperator {
    pub fn periods(&self) -> usize {
        self.t_periods
    }

    pub fn dictionary(&self) -> &CMatrix {
        &self.d
    }

    /// Real `[Re D; Im D]`, the per-period block seen by the real solver.
    pub fn lifted_block(&self) -> &RMatrix {
        &self.lifted
    }

    pub fn rows(&self) -> usize {
        self.d.nrows() * self.t_periods
    }

    pub fn cols(&self) -> usize {
        self.d.ncols() * self.t_periods
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols() {
            return Err(shape(self.cols(), x.len()));
        }
        let (r, c) = self.d.shape();
        let mut out = Vec::with_capacity(self.rows());
        for t in 0..self.t_periods {
            let col = nalgebra::DVector::from_column_slice(&x[t * c..(t + 1) * c]);
            out.extend((&self.d * col).iter().copied());
        }
        debug_assert_eq!(out.len(), r * self.t_periods);
        Ok(out)
    }

    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.rows() {
            return Err(shape(self.rows(), y.len()));
        }
        let r = self.d.nrows();
        let dh = self.d.adjoint();
        let mut out = Vec::with_capacity(self.cols());
        for t in 0..self.t_periods {
            let col = nalgebra::DVector::from_column_slice(&y[t * r..(t + 1) * r]);
            out.extend((&dh * col).iter().copied());
        }
        Ok(out)
    }

    /// Dense `I_T ⊗ D`; only for tests and small debugging instances.
    pub fn materialize(&self) -> CMatrix {
        let (r, c) = self.d.shape();
        let mut b = zeros(self.rows(), self.cols());
        for t in 0..self.t_periods {
            b.view_mut((t * r, t * c), (r, c)).copy_from(&self.d);
        }
        b
    }
}

/// Column-major `vec` of per-period autocorrelation vectors.
pub fn stack_autocorr(columns: &[AutocorrVector]) -> Result<Vec<Complex64>> {
    let Some(first) = columns.first() else {
        return Err(invalid("need at least one period"));
    };
    if columns.iter().any(|c| c.half_len != first.half_len) {
        return Err(invalid("periods have different half lengths"));
    }
    Ok(columns
        .iter()
        .flat_map(|c| c.values.iter().copied())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_scene, reference_plan, synthesize_frames};
    use crate::sampling::{compress_frame, make_subsampling_matrix};
    use crate::seed;
    use nalgebra::DVector;
    use rand::Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_cvec(len: usize, s: u64) -> Vec<Complex64> {
        let mut rng = seed::rng(s);
        (0..len)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn biased_two_sample_frame() {
        let r = estimate_autocorr(&[vec![c(1.0), c(1.0)]], 2, Normalization::Biased).unwrap();
        assert_eq!(r.values(), &[c(0.0), c(0.5), c(1.0), c(0.5)]);
        let u = estimate_autocorr(&[vec![c(1.0), c(1.0)]], 2, Normalization::Unbiased).unwrap();
        assert_eq!(u.lag(1), c(1.0));
    }

    #[test]
    fn zero_frames_give_zero_vector() {
        let r = estimate_autocorr(&vec![vec![c(0.0); 4]; 3], 4, Normalization::Biased).unwrap();
        assert!(r.values().iter().all(|z| *z == ZERO));
        let empty: [Vec<Complex64>; 0] = [];
        assert!(estimate_autocorr(&empty, 4, Normalization::Biased).is_err());
        assert!(estimate_autocorr(&[vec![c(0.0); 3]], 4, Normalization::Biased).is_err());
    }

    #[test]
    fn biased_estimate_is_hermitian() {
        let frames: Vec<Vec<Complex64>> = (0..5).map(|s| random_cvec(8, s)).collect();
        let r = estimate_autocorr(&frames, 8, Normalization::Biased).unwrap();
        assert_eq!(r.values()[0], ZERO);
        assert_eq!(r.symmetry_defect(), 0.0);
    }

    #[test]
    fn white_noise_autocorr_converges() {
        let plan = reference_plan(16).unwrap();
        let scene = generate_scene(&plan, 0, 0.0, 1).unwrap();
        let frames = synthesize_frames(&scene, 4000, 2).unwrap();
        let r = estimate_autocorr(&frames, 16, Normalization::Biased).unwrap();
        let var = scene.noise_variance();
        assert!((r.lag(0).re / var - 1.0).abs() < 0.03);
        for j in 1..16 {
            assert!(r.lag(j).norm() < 0.05 * var, "lag {j}: {}", r.lag(j));
        }
    }

    #[test]
    fn phi_bar_small_cases() {
        assert_eq!(build_phi_bar(&zeros(3, 4)), zeros(3, 4));
        let eye = CMatrix::identity(2, 2);
        let bar = build_phi_bar(&eye);
        // row 2 (1-based) copies row M + 2 - 2 = 2
        assert_eq!(
            bar,
            DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)])
        );
        let phi = DMatrix::from_fn(3, 4, |i, j| c((4 * i + j + 1) as f64));
        let bar = build_phi_bar(&phi);
        for z in bar.iter().filter(|z| z.norm() > 0.0) {
            assert!(phi.iter().any(|w| w == z));
        }
        assert_eq!(bar.row(1), phi.row(2));
        assert_eq!(bar.row(2), phi.row(1));
    }

    #[test]
    fn block_matrices_small_cases() {
        let z = build_block_matrices(&zeros(2, 3));
        for b in [&z.phi1, &z.phi2, &z.phi3, &z.phi4] {
            assert!(b.iter().all(|v| *v == ZERO));
        }
        let phi = DMatrix::from_row_slice(1, 2, &[c(1.0), c(0.0)]);
        let f = build_block_matrices(&phi);
        assert_eq!(f.phi4, CMatrix::identity(2, 2));
        // hankel(0, [0, φ₁]) = [[0, 0], [0, 1]]
        assert_eq!(
            f.phi1,
            DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)])
        );
        assert_eq!(
            f.phi2,
            DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)])
        );
        assert_eq!(f.phi3, zeros(2, 2));
    }

    #[test]
    fn blocks_have_hankel_and_toeplitz_structure() {
        let mut rng = seed::rng(5);
        let phi = DMatrix::from_fn(3, 6, |_, _| Complex64::new(rng.random(), rng.random()));
        let f = build_block_matrices(&phi);
        let n = 6;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                assert_eq!(f.phi1[(i + 1, j)], f.phi1[(i, j + 1)]);
                assert_eq!(f.phi2[(i + 1, j)], f.phi2[(i, j + 1)]);
                assert_eq!(f.phi3[(i + 1, j + 1)], f.phi3[(i, j)]);
                assert_eq!(f.phi4[(i + 1, j + 1)], f.phi4[(i, j)]);
            }
        }
    }

    #[test]
    fn identity_sampling_gives_identity_link() {
        let phi = make_subsampling_matrix(6, 6, 0).unwrap();
        let a = LinkMatrix::from_measurement(&phi);
        let mut expect = CMatrix::identity(12, 12);
        expect[(0, 0)] = ZERO;
        assert_eq!(a.matrix(), &expect);
    }

    #[test]
    fn zero_phi_gives_zero_link() {
        let a = LinkMatrix::build(&zeros(3, 5));
        assert_eq!(a.matrix().shape(), (6, 10));
        assert!(a.matrix().iter().all(|z| *z == ZERO));
    }

    #[test]
    fn link_matches_entrywise_oracle() {
        for s in 0..20u64 {
            let mut rng = seed::rng(s);
            let n = rng.random_range(1..12);
            let m = rng.random_range(1..=n);
            let phi = DMatrix::from_fn(m, n, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            assert_eq!(
                LinkMatrix::build(&phi).matrix(),
                &crate::oracle::link_matrix_entrywise(&phi)
            );
        }
    }

    #[test]
    fn link_selects_anchor_lags_for_row_subsampling() {
        // For ascending rows s_k, A maps r_x to r_y(k) = r_x(s_k - s_0).
        for s in 0..10 {
            let phi = make_subsampling_matrix(5, 12, s).unwrap();
            let rows = phi.selected_rows().to_vec();
            let lags = random_cvec(12, 100 + s);
            let mut lags = lags;
            lags[0].im = 0.0;
            let r_x = AutocorrVector::from_nonneg_lags(&lags);
            let r_y = LinkMatrix::from_measurement(&phi).apply(&r_x).unwrap();
            assert_eq!(r_y.values()[0], ZERO);
            for k in 0..5 {
                let d = (rows[k] - rows[0]) as isize;
                assert_eq!(r_y.lag(k as isize), r_x.lag(d));
                if k > 0 {
                    assert_eq!(r_y.lag(-(k as isize)), r_x.lag(-d));
                }
            }
        }
    }

    #[test]
    fn matrix_identity_on_sample_covariances() {
        let plan = reference_plan(16).unwrap();
        let scene = generate_scene(&plan, 4, 10.0, 4).unwrap();
        let frames = synthesize_frames(&scene, 10, 5).unwrap();
        let phi = make_subsampling_matrix(6, 16, 6).unwrap();
        let dense = phi.to_dense();
        let mut rx = zeros(16, 16);
        let mut ry = zeros(6, 6);
        for f in &frames {
            let x = DVector::from_column_slice(&f.samples);
            let y = DVector::from_column_slice(&compress_frame(&phi, f).unwrap().samples);
            rx += &x * x.adjoint();
            ry += &y * y.adjoint();
        }
        let lhs = &dense * &rx * dense.adjoint();
        assert!((lhs - ry).norm() < 1e-12);
    }

    #[test]
    fn idft_small_and_inverse() {
        let psi = build_idft(2).unwrap();
        assert!(
            (psi - DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.5), c(0.5), c(-0.5)])).norm()
                < 1e-15
        );
        assert!(build_idft(3).is_err());
        assert!(build_idft(0).is_err());
        let psi = build_idft(16).unwrap();
        let v = random_cvec(16, 9);
        let back = forward_dft((&psi * DVector::from_column_slice(&v)).as_slice());
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).norm() < 1e-10);
        }
        let mut delta = vec![ZERO; 16];
        delta[0] = c(1.0);
        let col = &psi * DVector::from_column_slice(&delta);
        assert!(col.iter().all(|z| (z - c(1.0 / 16.0)).norm() < 1e-15));
    }

    #[test]
    fn lag_idft_matches_synthesized_autocorrelation() {
        // Law of large numbers against the analytic autocorrelation, noise off.
        let plan = reference_plan(64).unwrap();
        let scene = generate_scene(&plan, 5, f64::INFINITY, 21).unwrap();
        let frames = synthesize_frames(&scene, 10_000, 22).unwrap();
        let est = estimate_autocorr(&frames, 64, Normalization::Unbiased).unwrap();
        let ideal = ideal_autocorr(&scene.true_psd, 0.0).unwrap();
        let err: f64 = est
            .values()
            .iter()
            .zip(ideal.values())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let base: f64 = ideal
            .values()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err / base < 0.05, "relative error {}", err / base);
    }

    #[test]
    fn compressive_estimators_target_link_image() {
        let plan = reference_plan(32).unwrap();
        let scene = generate_scene(&plan, 5, 10.0, 31).unwrap();
        let phi = make_subsampling_matrix(10, 32, 32).unwrap();
        let frames: Vec<_> = synthesize_frames(&scene, 4000, 33)
            .unwrap()
            .iter()
            .map(|f| compress_frame(&phi, f).unwrap())
            .collect();
        let target = LinkMatrix::from_measurement(&phi)
            .apply(&ideal_autocorr(&scene.true_psd, scene.noise_variance()).unwrap())
            .unwrap();
        let base: f64 = target
            .values()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        for est in [
            CompressiveEstimator::AnchorColumn,
            CompressiveEstimator::LagPooled,
        ] {
            let r = estimate_compressive_autocorr(&frames, &phi, est).unwrap();
            assert_eq!(r.symmetry_defect(), 0.0);
            let err: f64 = r
                .values()
                .iter()
                .zip(target.values())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err / base < 0.1, "{est:?}: {}", err / base);
        }
    }

    #[test]
    fn dictionary_shape_and_associativity() {
        let phi = make_subsampling_matrix(5, 8, 1).unwrap();
        let bundle = DictionaryBundle::for_measurement(&phi).unwrap();
        assert_eq!(bundle.d.shape(), (10, 16));
        let p = random_cvec(16, 4);
        let pv = DVector::from_column_slice(&p);
        let lhs = &bundle.d * &pv;
        let rhs = bundle.link.matrix() * (&bundle.psi * &pv);
        assert!((lhs - rhs).norm() < 1e-12);

        let zero_link = LinkMatrix::build(&zeros(5, 8));
        let b = build_dictionary(zero_link, build_idft(16).unwrap()).unwrap();
        assert!(b.d.iter().all(|z| *z == ZERO));
        assert!(build_dictionary(LinkMatrix::build(&zeros(5, 8)), build_idft(8).unwrap()).is_err());
    }

    #[test]
    fn stacked_operator_matches_columnwise_product() {
        let mut rng = seed::rng(12);
        let d = DMatrix::from_fn(4, 8, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let p = DMatrix::from_fn(8, 2, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let b = build_stacked_operator(&d, 2).unwrap();
        let got = b.apply(p.as_slice()).unwrap();
        let want = &d * &p;
        assert_eq!(got.as_slice(), want.as_slice());
        let dense = b.materialize();
        assert_eq!(dense.shape(), (8, 16));
        let via_dense = &dense * DVector::from_column_slice(p.as_slice());
        for (a, b) in via_dense.iter().zip(&got) {
            assert!((a - b).norm() < 1e-14);
        }

        let single = build_stacked_operator(&d, 1).unwrap();
        let v = random_cvec(8, 3);
        assert_eq!(
            single.apply(&v).unwrap().as_slice(),
            (&d * DVector::from_column_slice(&v)).as_slice()
        );
        assert!(build_stacked_operator(&d, 0).is_err());
    }

    #[test]
    fn stacked_adjoint_identity() {
        let mut rng = seed::rng(13);
        let d = DMatrix::from_fn(6, 10, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let b = build_stacked_operator(&d, 3).unwrap();
        let x = random_cvec(30, 1);
        let y = random_cvec(18, 2);
        let bx = b.apply(&x).unwrap();
        let bhy = b.apply_adjoint(&y).unwrap();
        let lhs: Complex64 = bx.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = x.iter().zip(&bhy).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-10);
    }
}
