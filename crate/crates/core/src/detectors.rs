//! The phase-space detector lattice.
//!
//! Detector `(j, k)` sits at `(x_j, p_k) = (j·d_x, k·d_p)` and projects onto the
//! coherent state `(2πσ²)^{-1/4} exp(−(x−x_j)²/(4σ²)) exp(i p_k x)`. Jump
//! operators are `√γ |α⟩⟨α|`, so the damping sum is `γ Σ_α |α⟩⟨α|`.
//!
//! Detectors are addressed by a flat index in row-major order (`j` outer,
//! `k` inner); that order is also the scan order used when sampling jumps.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::wavefunction::{PhasePoint, Wavefunction};

/// Half-width of stored detector windows, in units of σ.
pub const WINDOW_SIGMAS: f64 = 8.0;

/// Momentum margin (in detector momentum widths `1/(2σ)`) required below Nyquist.
pub const MOMENTUM_MARGIN_WIDTHS: f64 = 6.0;

/// Lattice index ranges and detector parameters, independent of any grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGeometry {
    pub d_x: f64,
    pub d_p: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub j_min: i64,
    pub j_max: i64,
    pub k_min: i64,
    pub k_max: i64,
}

impl LatticeGeometry {
    pub fn new(
        d_x: f64,
        d_p: f64,
        sigma: f64,
        gamma: f64,
        (j_min, j_max): (i64, i64),
        (k_min, k_max): (i64, i64),
    ) -> Result<Self> {
        for (name, v) in [("d_x", d_x), ("d_p", d_p), ("sigma", sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive (got {v})")));
            }
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be non-negative (got {gamma})"
            )));
        }
        if j_min > j_max || k_min > k_max {
            return Err(Error::Config("empty detector lattice".into()));
        }
        Ok(Self {
            d_x,
            d_p,
            sigma,
            gamma,
            j_min,
            j_max,
            k_min,
            k_max,
        })
    }

    /// Symmetric lattice containing every center with `|x| ≤ radius` and `|p| ≤ radius`.
    pub fn with_extent(d_x: f64, d_p: f64, sigma: f64, gamma: f64, radius: f64) -> Result<Self> {
        let nj = (radius / d_x + 1e-9).floor() as i64;
        let nk = (radius / d_p + 1e-9).floor() as i64;
        Self::new(d_x, d_p, sigma, gamma, (-nj, nj), (-nk, nk))
    }

    pub fn n_j(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn n_k(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.n_j() * self.n_k()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, j: i64, k: i64) -> bool {
        (self.j_min..=self.j_max).contains(&j) && (self.k_min..=self.k_max).contains(&k)
    }

    #[inline]
    pub fn flat(&self, j: i64, k: i64) -> usize {
        debug_assert!(self.contains(j, k));
        (j - self.j_min) as usize * self.n_k() + (k - self.k_min) as usize
    }

    #[inline]
    pub fn indices(&self, flat: usize) -> (i64, i64) {
        let nk = self.n_k();
        (
            self.j_min + (flat / nk) as i64,
            self.k_min + (flat % nk) as i64,
        )
    }

    #[inline]
    pub fn center(&self, flat: usize) -> PhasePoint {
        let (j, k) = self.indices(flat);
        PhasePoint::new(j as f64 * self.d_x, k as f64 * self.d_p)
    }

    /// Largest `|x_j|` and `|p_k|` on the lattice.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.j_min.abs().max(self.j_max.abs()) as f64 * self.d_x,
            self.k_min.abs().max(self.k_max.abs()) as f64 * self.d_p,
        )
    }

    /// True when `z` lies at least `margin` inside the lattice's bounding box.
    pub fn covers(&self, z: PhasePoint, margin: f64) -> bool {
        z.x >= self.j_min as f64 * self.d_x + margin
            && z.x <= self.j_max as f64 * self.d_x - margin
            && z.p >= self.k_min as f64 * self.d_p + margin
            && z.p <= self.k_max as f64 * self.d_p - margin
    }

    /// `|⟨α|β⟩|² = exp(−Δx²/(4σ²) − σ²Δp²)` for two detector states.
    pub fn overlap_sqr_analytic(&self, a: PhasePoint, b: PhasePoint) -> f64 {
        let s2 = self.sigma * self.sigma;
        let dx = a.x - b.x;
        let dp = a.p - b.p;
        (-dx * dx / (4.0 * s2) - s2 * dp * dp).exp()
    }

    /// Flat indices (ascending) of detectors within `radius` of `z` in the
    /// metric where the coherent-state overlap is isotropic.
    pub fn candidates_within(&self, z: PhasePoint, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if !radius.is_finite() {
            out.extend(0..self.len());
            return;
        }
        // Distances measured in units where σ_x = σ_p (x scaled by 1/(2σ), p by σ).
        let sx = 1.0 / (2.0 * self.sigma * std::f64::consts::FRAC_1_SQRT_2);
        let sp = self.sigma * std::f64::consts::SQRT_2;
        let rx = radius / sx;
        let j_lo = (((z.x - rx) / self.d_x).ceil() as i64).max(self.j_min);
        let j_hi = (((z.x + rx) / self.d_x).floor() as i64).min(self.j_max);
        let r2 = radius * radius;
        for j in j_lo..=j_hi {
            let ex = (j as f64 * self.d_x - z.x) * sx;
            let rem = r2 - ex * ex;
            if rem < 0.0 {
                continue;
            }
            let rp = rem.sqrt() / sp;
            let k_lo = (((z.p - rp) / self.d_p).ceil() as i64).max(self.k_min);
            let k_hi = (((z.p + rp) / self.d_p).floor() as i64).min(self.k_max);
            if k_lo > k_hi {
                continue;
            }
            let base = self.flat(j, k_lo);
            out.extend(base..base + (k_hi - k_lo + 1) as usize);
        }
    }
}

/// One detector state sampled on a contiguous run of grid points.
#[derive(Clone, Debug)]
struct Window {
    start: usize,
    values: Vec<Complex64>,
}

/// A [`LatticeGeometry`] with every detector state sampled on a [`Grid`],
/// truncated to `±8σ` around its center.
#[derive(Clone, Debug)]
pub struct DetectorLattice {
    geometry: LatticeGeometry,
    grid: Grid,
    windows: Vec<Window>,
}

impl DetectorLattice {
    /// Samples all detector states on `grid`.
    ///
    /// Fails with [`Error::Coverage`] if a window would leave the grid and
    /// with [`Error::GridTooCoarse`] if a detector momentum is too close to
    /// the grid's Nyquist wavenumber.
    pub fn sample(geometry: LatticeGeometry, grid: &Grid) -> Result<Self> {
        let half = WINDOW_SIGMAS * geometry.sigma;
        let (x_ext, p_ext) = geometry.extent();
        if geometry.j_min as f64 * geometry.d_x - half < grid.x_min()
            || geometry.j_max as f64 * geometry.d_x + half > grid.x_max()
        {
            return Err(Error::Coverage(format!(
                "detectors up to |x| = {x_ext:.3} (window ±{half:.3}) do not fit on grid {grid}"
            )));
        }
        let margin = MOMENTUM_MARGIN_WIDTHS / (2.0 * geometry.sigma);
        if p_ext + margin > grid.k_nyquist() {
            return Err(Error::GridTooCoarse(format!(
                "detector momenta up to {p_ext:.3} (+{margin:.3}) exceed Nyquist {:.3} of grid {grid}",
                grid.k_nyquist()
            )));
        }

        let dx = grid.dx();
        let amp = (2.0 * PI * geometry.sigma * geometry.sigma).powf(-0.25);
        let inv_4s2 = 1.0 / (4.0 * geometry.sigma * geometry.sigma);
        let mut windows = Vec::with_capacity(geometry.len());
        for flat in 0..geometry.len() {
            let c = geometry.center(flat);
            let start = ((c.x - half - grid.x_min()) / dx).ceil().max(0.0) as usize;
            let end = (((c.x + half - grid.x_min()) / dx).floor() as usize).min(grid.len() - 1);
            let values = (start..=end)
                .map(|i| {
                    let x = grid.x(i);
                    let u = x - c.x;
                    Complex64::from_polar(amp * (-u * u * inv_4s2).exp(), c.p * x)
                })
                .collect();
            windows.push(Window { start, values });
        }
        Ok(Self {
            geometry,
            grid: *grid,
            windows,
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// The stored (window-truncated) detector state embedded in the full grid.
    pub fn state(&self, flat: usize) -> Wavefunction {
        let mut psi = Wavefunction::zeros(self.grid);
        let w = &self.windows[flat];
        psi.amplitudes_mut()[w.start..w.start + w.values.len()].copy_from_slice(&w.values);
        psi
    }

    /// `⟨α|ψ⟩` over the detector's window.
    #[inline]
    pub fn overlap_with(&self, flat: usize, amplitudes: &[Complex64]) -> Complex64 {
        let w = &self.windows[flat];
        let psi = &amplitudes[w.start..w.start + w.values.len()];
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in w.values.iter().zip(psi) {
            acc += a.conj() * b;
        }
        acc * self.grid.dx()
    }

    /// `out += coeff·α` over the detector's window.
    #[inline]
    pub fn add_scaled(&self, flat: usize, coeff: Complex64, out: &mut [Complex64]) {
        let w = &self.windows[flat];
        for (o, a) in out[w.start..w.start + w.values.len()]
            .iter_mut()
            .zip(&w.values)
        {
            *o += coeff * a;
        }
    }
}

/// `c_α = ⟨α|ψ⟩` for every detector on a lattice, in flat order.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapVector {
    values: Vec<Complex64>,
}

impl OverlapVector {
    pub fn from_values(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ_α |c_α|²`.
    pub fn total_weight(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub fn overlaps(psi: &Wavefunction, lat: &DetectorLattice) -> OverlapVector {
    debug_assert_eq!(psi.grid(), lat.grid());
    let amps = psi.amplitudes();
    OverlapVector {
        values: (0..lat.len()).map(|a| lat.overlap_with(a, amps)).collect(),
    }
}

/// `u = Σ_α c_α |α⟩`, so that `(Σ_α C†_α C_α) ψ = γ u` when `c` are the
/// overlaps of `ψ`.
pub fn apply_damping(psi: &Wavefunction, lat: &DetectorLattice, c: &OverlapVector) -> Wavefunction {
    let mut u = Wavefunction::zeros(*psi.grid());
    let out = u.amplitudes_mut();
    for (a, &coeff) in c.values().iter().enumerate() {
        if coeff != Complex64::new(0.0, 0.0) {
            lat.add_scaled(a, coeff, out);
        }
    }
    u
}

/// Discretized Husimi distribution of the first click after localization at
/// detector `(j0, k0)`: `Q(j,k) ∝ |⟨α_{j,k}|α_{j0,k0}⟩|²`, normalized over the
/// lattice. Values are in flat order.
pub fn husimi_click_distribution(j0: i64, k0: i64, geom: &LatticeGeometry) -> Result<Vec<f64>> {
    if !geom.contains(j0, k0) {
        return Err(Error::Config(format!(
            "reference detector ({j0}, {k0}) is outside the lattice"
        )));
    }
    let origin = geom.center(geom.flat(j0, k0));
    let mut q: Vec<f64> = (0..geom.len())
        .map(|a| geom.overlap_sqr_analytic(geom.center(a), origin))
        .collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    Ok(q)
}

/// `Σ Q(j,k)·((j − j0)·d_x)²`, the position dispersion right after
/// localization at `(j0, k0)`.
pub fn initial_dispersion(geom: &LatticeGeometry, j0: i64, k0: i64) -> Result<f64> {
    let q = husimi_click_distribution(j0, k0, geom)?;
    Ok(q
        .iter()
        .enumerate()
        .map(|(a, w)| {
            let (j, _) = geom.indices(a);
            let dx = (j - j0) as f64 * geom.d_x;
            w * dx * dx
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefunction::coherent_state;

    const SIGMA: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn small_lattice(d: f64, radius: f64, grid: &Grid) -> DetectorLattice {
        let geom = LatticeGeometry::with_extent(d, d, SIGMA, 1.0, radius).unwrap();
        DetectorLattice::sample(geom, grid).unwrap()
    }

    #[test]
    fn lattice_count_for_radius_40() {
        let geom = LatticeGeometry::with_extent(2.16, 2.16, SIGMA, 1.0, 40.0).unwrap();
        assert_eq!((geom.n_j(), geom.n_k()), (37, 37));
        assert_eq!(geom.len(), 1369);
        // Brute-force count of centers in the square.
        let count = (-100i64..=100)
            .flat_map(|j| (-100i64..=100).map(move |k| (j, k)))
            .filter(|&(j, k)| (j as f64 * 2.16).abs() <= 40.0 && (k as f64 * 2.16).abs() <= 40.0)
            .count();
        assert_eq!(count, 1369);
    }

    #[test]
    fn flat_index_round_trip() {
        let geom = LatticeGeometry::new(1.0, 2.0, SIGMA, 1.0, (-3, 4), (-2, 5)).unwrap();
        for a in 0..geom.len() {
            let (j, k) = geom.indices(a);
            assert_eq!(geom.flat(j, k), a);
        }
        assert_eq!(geom.indices(0), (-3, -2));
        assert_eq!(geom.indices(1), (-3, -1));
    }

    #[test]
    fn stored_states_are_normalized() {
        let grid = Grid::new(-64.0, 64.0, 4096).unwrap();
        let lat = small_lattice(2.16, 40.0, &grid);
        assert_eq!(lat.len(), 1369);
        for a in (0..lat.len()).step_by(7) {
            assert!((lat.state(a).norm_sqr() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn single_detector_self_overlap() {
        let grid = Grid::new(-20.0, 20.0, 1024).unwrap();
        let geom = LatticeGeometry::new(1.0, 1.0, SIGMA, 1.0, (0, 0), (0, 0)).unwrap();
        let lat = DetectorLattice::sample(geom, &grid).unwrap();
        let alpha = lat.state(0);
        let c = overlaps(&alpha, &lat);
        assert!((c.values()[0] - 1.0).norm() < 1e-8);
        let u = apply_damping(&alpha, &lat, &c);
        for (a, b) in u.amplitudes().iter().zip(alpha.amplitudes()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn neighbour_overlap_follows_gaussian_law() {
        let grid = Grid::new(-40.0, 40.0, 2048).unwrap();
        let d = 2.16;
        let lat = small_lattice(d, 12.0, &grid);
        let geom = lat.geometry();
        let alpha0 = lat.state(geom.flat(1, -1));
        let c = overlaps(&alpha0, &lat);
        for (a, v) in c.values().iter().enumerate() {
            let (j, k) = geom.indices(a);
            let dj = (j - 1) as f64;
            let dk = (k + 1) as f64;
            let want = (-d * d * (dj * dj + dk * dk) / 2.0).exp();
            assert!((v.norm_sqr() - want).abs() < 1e-6, "({j},{k})");
        }
    }

    #[test]
    fn odd_state_is_orthogonal_to_centered_detector() {
        let grid = Grid::new(-20.0, 20.0, 1024).unwrap();
        let geom = LatticeGeometry::new(1.0, 1.0, SIGMA, 1.0, (0, 0), (0, 0)).unwrap();
        let lat = DetectorLattice::sample(geom, &grid).unwrap();
        // x·e^{−x²/2} on a grid symmetric about zero (grid point at x=0).
        let amps = (0..grid.len())
            .map(|i| {
                let x = grid.x(i);
                Complex64::new(x * (-x * x / 2.0).exp(), 0.0)
            })
            .collect();
        let mut psi = Wavefunction::new(grid, amps).unwrap();
        psi.normalize();
        let c = overlaps(&psi, &lat);
        assert!(c.values()[0].norm() < 1e-10);
    }

    #[test]
    fn damping_consistency_identity_and_hermiticity() {
        let grid = Grid::new(-30.0, 30.0, 1024).unwrap();
        let lat = small_lattice(2.16, 10.0, &grid);
        let mk = |z: PhasePoint, w: Complex64| {
            let mut a = coherent_state(z, 1.1, &grid).unwrap();
            a.amplitudes_mut().iter_mut().for_each(|v| *v *= w);
            a
        };
        let mut psi1 = mk(PhasePoint::new(1.3, -0.4), Complex64::new(1.0, 0.0));
        let extra = mk(PhasePoint::new(-2.0, 2.5), Complex64::new(0.3, 0.7));
        psi1.amplitudes_mut()
            .iter_mut()
            .zip(extra.amplitudes())
            .for_each(|(a, b)| *a += b);
        psi1.normalize();
        let psi2 = mk(PhasePoint::new(3.1, 1.2), Complex64::new(0.0, 1.0));

        let c1 = overlaps(&psi1, &lat);
        let u1 = apply_damping(&psi1, &lat, &c1);
        assert!((psi1.inner(&u1) - c1.total_weight()).norm() < 1e-10);

        let c2 = overlaps(&psi2, &lat);
        let u2 = apply_damping(&psi2, &lat, &c2);
        assert!((psi1.inner(&u2) - psi2.inner(&u1).conj()).norm() < 1e-10);
    }

    #[test]
    fn window_truncation_matches_full_quadrature() {
        let grid = Grid::new(-30.0, 30.0, 2048).unwrap();
        let lat = small_lattice(2.16, 8.0, &grid);
        let psi = coherent_state(PhasePoint::new(0.7, -1.9), SIGMA, &grid).unwrap();
        let c = overlaps(&psi, &lat);
        for a in 0..lat.len() {
            let full = coherent_state(lat.geometry().center(a), SIGMA, &grid).unwrap();
            let exact = full.inner(&psi);
            // Cutting the detector at 8σ drops terms of order e^{-16}.
            assert!((exact - c.values()[a]).norm() < 5e-7);
        }
    }

    #[test]
    fn husimi_table_properties() {
        let geom = LatticeGeometry::with_extent(2.16, 2.16, SIGMA, 1.0, 30.0).unwrap();
        let q = husimi_click_distribution(9, 0, &geom).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q0 = q[geom.flat(9, 0)];
        let ratio = q[geom.flat(10, 0)] / q0;
        assert!((ratio - (-2.16f64 * 2.16 / 2.0).exp()).abs() < 1e-12);
        assert!((ratio - 0.0970).abs() < 5e-4);
        assert!((q[geom.flat(8, 0)] / q0 - ratio).abs() < 1e-12);
    }

    #[test]
    fn initial_dispersion_limits() {
        let single = LatticeGeometry::new(2.16, 2.16, SIGMA, 1.0, (0, 0), (0, 0)).unwrap();
        assert_eq!(initial_dispersion(&single, 0, 0).unwrap(), 0.0);

        let fine = LatticeGeometry::with_extent(0.2, 0.2, SIGMA, 1.0, 12.0).unwrap();
        let d0 = initial_dispersion(&fine, 0, 0).unwrap();
        assert!((d0 - 1.0).abs() < 0.02, "{d0}");

        // Direct double sum as the oracle for the coarse lattice.
        let geom = LatticeGeometry::with_extent(2.16, 2.16, SIGMA, 1.0, 40.0).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for j in -18i64..=18 {
            for k in -18i64..=18 {
                let w = (-2.16f64.powi(2) * (((j - 9) * (j - 9) + k * k) as f64) / 2.0).exp();
                num += w * ((j - 9) as f64 * 2.16).powi(2);
                den += w;
            }
        }
        let got = initial_dispersion(&geom, 9, 0).unwrap();
        assert!((got - num / den).abs() < 1e-12);
        assert!((got - 0.760_874_593_257_738).abs() < 1e-9, "{got}");
    }

    #[test]
    fn candidate_search_matches_brute_force() {
        let geom = LatticeGeometry::with_extent(1.08, 1.08, SIGMA, 1.0, 20.0).unwrap();
        let z = PhasePoint::new(3.3, -7.1);
        let mut got = Vec::new();
        geom.candidates_within(z, 6.0, &mut got);
        let want: Vec<usize> = (0..geom.len())
            .filter(|&a| geom.center(a).distance(&z) <= 6.0)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn sampling_rejects_small_grid() {
        let geom = LatticeGeometry::with_extent(2.16, 2.16, SIGMA, 1.0, 40.0).unwrap();
        let grid = Grid::new(-40.0, 40.0, 2048).unwrap();
        assert!(matches!(
            DetectorLattice::sample(geom.clone(), &grid),
            Err(Error::Coverage(_))
        ));
        let coarse = Grid::new(-64.0, 64.0, 1024).unwrap();
        assert!(matches!(
            DetectorLattice::sample(geom, &coarse),
            Err(Error::GridTooCoarse(_))
        ));
    }
}
