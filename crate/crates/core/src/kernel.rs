//! Transformation-operator kernels 𝒦, 𝒩, 𝒞 for one edge, built term by term on the
//! triangle `0 ≤ t ≤ x ≤ T`, with
//! `φ(x,λ) = cos ρx + ∫₀ˣ 𝒦(x,t) cos ρt dt` and
//! `φ^{[1]}(x,λ) = −ρ sin ρx + ρ ∫₀ˣ 𝒩(x,t) sin ρt dt + 𝒞(x)`.
//!
//! Grid points are `x = ih`, `t = jh`. Arguments `(x ± t)/2` fall on the half grid,
//! where σ is sampled directly. Each nested integral of the recursion is a partial
//! integral along a row, a diagonal `i − j = d` or an antidiagonal `i + j = e`, so
//! every term costs `O(N²)` after cumulative trapezoid sums.

use crate::potential::EdgePotential;
use crate::propagator::endpoint;
use crate::quadrature::gauss_legendre;
use crate::scalar::{czero, from_usize, lit, sqrt_upper, to_f64, Real, C};
use rayon::prelude::*;

/// Values on the triangular grid, row-major.
#[derive(Clone, Debug)]
pub struct Tri<T> {
    n: usize,
    data: Vec<C<T>>,
}

impl<T: Real> Tri<T> {
    fn new(n: usize) -> Self {
        Self { n, data: vec![czero(); (n + 1) * (n + 2) / 2] }
    }

    fn from_rows(n: usize, rows: Vec<Vec<C<T>>>) -> Self {
        Self { n, data: rows.into_iter().flatten().collect() }
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C<T> {
        self.data[Self::idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: C<T>) {
        self.data[Self::idx(i, j)] = v;
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[Self::idx(i, 0)..=Self::idx(i, i)]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, v| a.max(v.norm()))
    }

    fn row_max(&self, i: usize) -> T {
        self.row(i).iter().fold(T::zero(), |a, v| a.max(v.norm()))
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }
}

/// σ on the half grid `kh/2`, `k = 0..2N`, with cumulative integrals of σ² and |σ|².
#[derive(Clone, Debug)]
pub struct KernelGrid<T> {
    pub length: T,
    pub cells: usize,
    sigma: Vec<C<T>>,
    /// ∫₀^{kh/2} σ².
    p: Vec<C<T>>,
    /// ∫₀^{kh/2} |σ|².
    q2: Vec<T>,
}

impl<T: Real> KernelGrid<T> {
    /// Samples a smooth σ; integrals of σ² by 6-point Gauss on each half cell.
    pub fn from_fn(length: T, cells: usize, f: impl Fn(T) -> C<T>) -> Self {
        let h2 = length / from_usize(2 * cells);
        let sigma: Vec<C<T>> = (0..=2 * cells).map(|k| f(h2 * from_usize(k))).collect();
        let (gx, gw) = gauss_legendre::<T>(6);
        let mut p = vec![czero(); 2 * cells + 1];
        let mut q2 = vec![T::zero(); 2 * cells + 1];
        for k in 0..2 * cells {
            let a = h2 * from_usize(k);
            let (mut sp, mut sq) = (czero::<T>(), T::zero());
            for (x, w) in gx.iter().zip(&gw) {
                let v = f(a + h2 * (*x + T::one()) / lit(2.0));
                sp += v * v * *w;
                sq += v.norm_sqr() * *w;
            }
            p[k + 1] = p[k] + sp * h2 / lit::<T>(2.0);
            q2[k + 1] = q2[k] + sq * h2 / lit(2.0);
        }
        Self { length, cells, sigma, p, q2 }
    }

    /// Uses the cell model of a grid potential: half points are nodes or cell midpoints,
    /// and the integrals of σ² are exact for piecewise constant σ.
    pub fn from_potential(pot: &EdgePotential<T>) -> Self {
        let cells = pot.cells();
        let h2 = pot.h() / lit(2.0);
        let sigma: Vec<C<T>> = (0..=2 * cells).map(|k| pot.value_at(h2 * from_usize(k))).collect();
        let mut p = vec![czero(); 2 * cells + 1];
        let mut q2 = vec![T::zero(); 2 * cells + 1];
        for k in 0..2 * cells {
            let c = pot.cell_value(k / 2);
            p[k + 1] = p[k] + c * c * h2;
            q2[k + 1] = q2[k] + c.norm_sqr() * h2;
        }
        Self { length: pot.length(), cells, sigma, p, q2 }
    }

    pub fn h(&self) -> T {
        self.length / from_usize(self.cells)
    }

    /// ‖σ‖_{L2(0, ih)}.
    pub fn q(&self, i: usize) -> T {
        self.q2[2 * i].sqrt()
    }

    fn sig(&self, l: usize) -> C<T> {
        self.sigma[2 * l]
    }
}

/// One term (𝒦ₙ, 𝒩ₙ, 𝒞ₙ).
#[derive(Clone, Debug)]
pub struct Term<T> {
    pub k: Tri<T>,
    pub n: Tri<T>,
    pub c: Vec<C<T>>,
}

impl<T: Real> Term<T> {
    pub fn max_abs(&self) -> T {
        let c = self.c.iter().fold(T::zero(), |a, v| a.max(v.norm()));
        self.k.max_abs().max(self.n.max_abs()).max(c)
    }

    /// max over t of |𝒦ₙ|, |𝒩ₙ| and |𝒞ₙ| on row i.
    fn row_max(&self, i: usize) -> T {
        self.k.row_max(i).max(self.n.row_max(i)).max(self.c[i].norm())
    }
}

/// Closed-form zeroth term.
pub fn kernel_term_zero<T: Real>(g: &KernelGrid<T>) -> Term<T> {
    let n = g.cells;
    let half = lit::<T>(0.5);
    let mut k = Tri::new(n);
    let mut nn = Tri::new(n);
    let mut c = vec![czero(); n + 1];
    for i in 0..=n {
        for j in 0..=i {
            let (d, e) = (i - j, i + j);
            let (sp, sm) = (g.sigma[e], g.sigma[d]);
            k.set(i, j, (sp + sm) * half - (g.p[d] + g.p[e]) * half);
            nn.set(i, j, (sp - sm) * half + g.p[2 * i] + (g.p[d] - g.p[e]) * half);
        }
        c[i] = -g.p[2 * i];
    }
    Term { k, n: nn, c }
}

/// Trapezoid cumulative sum along a line of samples.
fn cumulate<T: Real>(start: C<T>, values: &[C<T>], h: T) -> Vec<C<T>> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = start;
    out.push(acc);
    for w in values.windows(2) {
        acc += (w[0] + w[1]) * (h * lit(0.5));
        out.push(acc);
    }
    out
}

/// Next term from the previous one.
pub fn kernel_recursion_step<T: Real>(g: &KernelGrid<T>, prev: &Term<T>) -> Term<T> {
    let n = g.cells;
    let h = g.h();
    let half = lit::<T>(0.5);
    let (k, nn, c) = (&prev.k, &prev.n, &prev.c);

    // Row integrals R(l, a) = ∫₀^{ah} 𝒦ₙ(lh, u) du.
    let mut r = Tri::new(n);
    for l in 0..=n {
        for (a, v) in cumulate(czero(), k.row(l), h).into_iter().enumerate() {
            r.set(l, a, v);
        }
    }
    let rdiag = |l: usize| r.at(l, l);
    let kmn = |i: usize, j: usize| k.at(i, j) - nn.at(i, j);

    // Z(l) = ∫₀^{lh} σ² R(s,s) ds and its value at half points.
    let zvals: Vec<C<T>> = (0..=n).map(|l| g.sig(l) * g.sig(l) * rdiag(l)).collect();
    let z = cumulate(czero(), &zvals, h);
    let zhalf = |kk: usize| -> C<T> {
        if kk % 2 == 0 {
            z[kk / 2]
        } else {
            let a = kk / 2;
            let s = g.sigma[kk];
            let mid = s * s * (rdiag(a) + rdiag(a + 1)) * half;
            z[a] + (zvals[a] + mid) * (h * lit(0.25))
        }
    };

    // Diagonals i − j = d: U for (𝒦+𝒩)σ, Y for σ²R.
    let mut u = Tri::new(n);
    let mut y = Tri::new(n);
    for d in 0..=n {
        let gu: Vec<C<T>> = (d..=n).map(|l| (k.at(l, l - d) + nn.at(l, l - d)) * g.sig(l)).collect();
        let gy: Vec<C<T>> = (d..=n).map(|l| g.sig(l) * g.sig(l) * r.at(l, l - d)).collect();
        for (o, (a, b)) in cumulate(czero(), &gu, h).into_iter().zip(cumulate(czero(), &gy, h)).enumerate() {
            u.set(d + o, o, a);
            y.set(d + o, o, b);
        }
    }

    // Antidiagonals i + j = e from the diagonal point e/2: W for (𝒦−𝒩)σ, X for σ²R.
    let mut w = Tri::new(n);
    let mut x = Tri::new(n);
    for e in 0..=2 * n {
        let l0 = (e + 1) / 2;
        if l0 > n {
            continue;
        }
        let l1 = e.min(n);
        let gw: Vec<C<T>> = (l0..=l1).map(|l| kmn(l, e - l) * g.sig(l)).collect();
        let gx: Vec<C<T>> = (l0..=l1).map(|l| g.sig(l) * g.sig(l) * r.at(l, e - l)).collect();
        let (sw, sx) = if e % 2 == 0 {
            (czero(), czero())
        } else {
            let s = g.sigma[e];
            let mw = (kmn(l0 - 1, l0 - 1) + kmn(l0, l0)) * half * s;
            let mx = (rdiag(l0 - 1) + rdiag(l0)) * half * s * s;
            ((mw + gw[0]) * (h * lit(0.25)), (mx + gx[0]) * (h * lit(0.25)))
        };
        for (o, (a, b)) in cumulate(sw, &gw, h).into_iter().zip(cumulate(sx, &gx, h)).enumerate() {
            let l = l0 + o;
            w.set(l, e - l, a);
            x.set(l, e - l, b);
        }
    }

    let cvals: Vec<C<T>> = (0..=n).map(|l| c[l] * g.sig(l)).collect();
    let cs = cumulate(czero(), &cvals, h);

    let rows: Vec<(Vec<C<T>>, Vec<C<T>>)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let mut rk = Vec::with_capacity(i + 1);
            let mut rn = Vec::with_capacity(i + 1);
            for j in 0..=i {
                let (d, e) = (i - j, i + j);
                let uu = u.at(i, j);
                let w2 = w.at(d, 0);
                let w3 = w.at(i, j);
                let a4 = z[i] - y.at(i, j);
                let a5 = zhalf(d) + x.at(d, 0);
                let a6 = z[i] - zhalf(e) - x.at(i, j);
                let cd = cs[d];
                rk.push((uu + w2 + w3) * half - (a4 + a5 - a6) * half - cd);
                rn.push((-uu - w2 + w3) * half + (a4 + a5 + a6) * half + cd);
            }
            (rk, rn)
        })
        .collect();
    let (rk, rn): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let cnext: Vec<C<T>> = (0..=n).map(|i| -z[i] - cs[i]).collect();
    Term { k: Tri::from_rows(n, rk), n: Tri::from_rows(n, rn), c: cnext }
}

/// Summed kernels with the per-term log.
#[derive(Clone, Debug)]
pub struct KernelTriple<T> {
    pub grid: KernelGrid<T>,
    pub k: Tri<T>,
    pub n: Tri<T>,
    pub c: Vec<C<T>>,
    /// Terms used, including the zeroth.
    pub depth: usize,
    /// max |term_n| over the triangle, n = 0..depth.
    pub term_max: Vec<f64>,
    /// Smallest a with |term_n| ≤ aⁿ Qⁿ(x) √(x^{n−1}/(n−1)!) on every row, n ≥ 1.
    pub fitted_a: f64,
    /// Bound for the first omitted term with the fitted a.
    pub tail_bound: f64,
}

#[derive(Clone, Debug)]
pub struct KernelSettings {
    pub max_depth: usize,
    pub rel_tol: f64,
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self { max_depth: 16, rel_tol: 1e-10 }
    }
}

fn factorial_bound(a: f64, q: f64, x: f64, n: usize) -> f64 {
    let mut f = 1.0;
    for k in 1..n {
        f *= x / k as f64;
    }
    a.powi(n as i32) * q.powi(n as i32) * f.sqrt()
}

impl<T: Real> KernelTriple<T> {
    /// Sums terms until the factorial bound of the next term drops below `rel_tol` of the sum.
    pub fn build(grid: KernelGrid<T>, settings: &KernelSettings) -> Self {
        let n = grid.cells;
        let h = to_f64(grid.h());
        let mut term = kernel_term_zero(&grid);
        let mut k = term.k.clone();
        let mut nn = term.n.clone();
        let mut c = term.c.clone();
        let mut term_max = vec![to_f64(term.max_abs())];
        let mut fitted_a: f64 = 0.0;
        let mut depth = 1;
        let qt = to_f64(grid.q(n));
        let xt = to_f64(grid.length);
        let mut tail_bound = f64::INFINITY;
        while depth <= settings.max_depth {
            term = kernel_recursion_step(&grid, &term);
            let idx = depth;
            for i in 1..=n {
                let q = to_f64(grid.q(i));
                let m = to_f64(term.row_max(i));
                if m > 0.0 && q > 0.0 {
                    let unit = factorial_bound(1.0, q, h * i as f64, idx);
                    fitted_a = fitted_a.max((m / unit).powf(1.0 / idx as f64));
                }
            }
            k.add_assign(&term.k);
            nn.add_assign(&term.n);
            for (a, b) in c.iter_mut().zip(&term.c) {
                *a += *b;
            }
            term_max.push(to_f64(term.max_abs()));
            depth += 1;
            let scale = to_f64(k.max_abs().max(nn.max_abs())).max(1e-300);
            tail_bound = factorial_bound(fitted_a, qt, xt, depth);
            if tail_bound < settings.rel_tol * scale || term_max[depth - 1] == 0.0 {
                break;
            }
        }
        Self { grid, k, n: nn, c, depth, term_max, fitted_a, tail_bound }
    }

    /// Right-hand sides of the two representations at x = ih.
    pub fn represent(&self, i: usize, lambda: C<T>) -> (C<T>, C<T>) {
        let h = self.grid.h();
        let rho = sqrt_upper(lambda);
        let x = h * from_usize(i);
        let mut ik = czero::<T>();
        let mut inn = czero::<T>();
        for j in 0..=i {
            let t = h * from_usize(j);
            let w = if j == 0 || j == i { h * lit(0.5) } else { h };
            ik += self.k.at(i, j) * (rho * t).cos() * w;
            inn += self.n.at(i, j) * (rho * t).sin() * w;
        }
        if i == 0 {
            ik = czero();
            inn = czero();
        }
        let phi = (rho * x).cos() + ik;
        let phi1 = -rho * (rho * x).sin() + rho * inn + self.c[i];
        (phi, phi1)
    }
}

/// Propagator values of φ, φ^{[1]} at x = T, Richardson-extrapolated from two fine grids.
pub fn propagator_reference<T: Real>(length: T, cells: usize, f: &(dyn Fn(T) -> C<T> + Sync), lambda: C<T>) -> (C<T>, C<T>) {
    let a = endpoint(&EdgePotential::from_fn(0, length, cells, f), lambda);
    let b = endpoint(&EdgePotential::from_fn(0, length, 2 * cells, f), lambda);
    let r = |x: C<T>, y: C<T>| (y * lit::<T>(4.0) - x) / lit::<T>(3.0);
    (r(a.phi, b.phi), r(a.phi1, b.phi1))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RepresentationCheck {
    pub lambda: (f64, f64),
    pub phi_error: f64,
    /// |Δφ^{[1]}| / max(1, |ρ|).
    pub phi1_error: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RepresentationReport {
    pub cells: usize,
    pub depth: usize,
    pub fitted_a: f64,
    pub term_max: Vec<f64>,
    pub checks: Vec<RepresentationCheck>,
    pub max_deviation: f64,
}

/// Builds kernels on `cells` and `2·cells`, extrapolates the representations at x = T
/// and compares them with the propagator.
pub fn verify_representation<T: Real>(
    length: T,
    cells: usize,
    f: &(dyn Fn(T) -> C<T> + Sync),
    lambdas: &[C<T>],
    settings: &KernelSettings,
) -> RepresentationReport {
    let coarse = KernelTriple::build(KernelGrid::from_fn(length, cells, f), settings);
    let fine = KernelTriple::build(KernelGrid::from_fn(length, 2 * cells, f), settings);
    let mut checks = Vec::new();
    for &lambda in lambdas {
        let (pc, p1c) = coarse.represent(cells, lambda);
        let (pf, p1f) = fine.represent(2 * cells, lambda);
        let phi = (pf * lit::<T>(4.0) - pc) / lit::<T>(3.0);
        let phi1 = (p1f * lit::<T>(4.0) - p1c) / lit::<T>(3.0);
        let (rp, rp1) = propagator_reference(length, 8192, f, lambda);
        let scale = to_f64(sqrt_upper(lambda).norm()).max(1.0);
        checks.push(RepresentationCheck {
            lambda: (to_f64(lambda.re), to_f64(lambda.im)),
            phi_error: to_f64((phi - rp).norm()),
            phi1_error: to_f64((phi1 - rp1).norm()) / scale,
        });
    }
    let max_deviation = checks.iter().map(|c| c.phi_error.max(c.phi1_error)).fold(0.0, f64::max);
    RepresentationReport {
        cells: 2 * cells,
        depth: fine.depth,
        fitted_a: fine.fitted_a,
        term_max: fine.term_max.clone(),
        checks,
        max_deviation,
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LipschitzRow {
    pub x: f64,
    pub k_ratio: Option<f64>,
    pub n_ratio: Option<f64>,
    pub c_ratio: Option<f64>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LipschitzReport {
    pub rows: Vec<LipschitzRow>,
    /// None when σ̂ ≡ 0.
    pub max_ratio: Option<f64>,
}

/// Ratios ‖𝒦̂(x,·)‖, ‖𝒩̂(x,·)‖, |𝒞̂(x)| over ‖σ̂‖_{L2(0,x)} on every `stride`-th row.
pub fn lipschitz_experiment<T: Real>(a: &KernelTriple<T>, b: &KernelTriple<T>, sigma_hat: &KernelGrid<T>, stride: usize) -> LipschitzReport {
    let n = a.grid.cells;
    assert_eq!(n, b.grid.cells, "kernels on different grids");
    let h = a.grid.h();
    let l2_row = |ta: &Tri<T>, tb: &Tri<T>, i: usize| -> f64 {
        let mut acc = T::zero();
        for j in 0..=i {
            let w = if j == 0 || j == i { h * lit(0.5) } else { h };
            acc += (ta.at(i, j) - tb.at(i, j)).norm_sqr() * w;
        }
        to_f64(acc.sqrt())
    };
    let mut rows = Vec::new();
    let mut max_ratio: Option<f64> = None;
    for i in (stride.max(1)..=n).step_by(stride.max(1)) {
        let s = to_f64(sigma_hat.q(i));
        let x = to_f64(h * from_usize(i));
        let ok = s > 1e-14;
        let row = LipschitzRow {
            x,
            k_ratio: ok.then(|| l2_row(&a.k, &b.k, i) / s),
            n_ratio: ok.then(|| l2_row(&a.n, &b.n, i) / s),
            c_ratio: ok.then(|| to_f64((a.c[i] - b.c[i]).norm()) / s),
        };
        for r in [row.k_ratio, row.n_ratio, row.c_ratio].into_iter().flatten() {
            max_ratio = Some(max_ratio.map_or(r, |m: f64| m.max(r)));
        }
        rows.push(row);
    }
    LipschitzReport { rows, max_ratio }
}

/// Difference potential σ − σ̃ on the half grid, for the denominators of the ratios.
pub fn difference_grid<T: Real>(length: T, cells: usize, f: impl Fn(T) -> C<T>, g: impl Fn(T) -> C<T>) -> KernelGrid<T> {
    KernelGrid::from_fn(length, cells, |x| f(x) - g(x))
}
