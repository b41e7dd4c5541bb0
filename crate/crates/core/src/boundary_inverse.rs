//! Recovery of σ_k on a boundary edge from the Weyl function M_k.
//!
//! On γ = {θ = s + iτ} put 𝓜(θ) = (M_k − M_k⁰)(θ²)/θ. For each x the main equation
//! `(I + H(x))ψ = F(x)` with
//! `H(x)ψ(ρ) = (1/πi) ∫ 𝓜(θ) I(x,ρ,θ) ψ(θ) ds`,
//! `F(x,ρ) = −(1/πi) ∫ 𝓜(θ) I(x,ρ,θ) sin(θx) ds`,
//! `I(x,ρ,θ) = ∫_0^x sin(ρt) sin(θt) dt`, s running from −∞ to +∞, gives
//! `S_k(x,ρ²) = (sin ρx + ψ(x,ρ))/ρ` and then
//! `σ_k(x) = (1/πi) ∫ 𝓜(θ) (cos 2θx − 2ψ(x,θ) sin θx) ds`.

use crate::argument::count_zeros_rect;
use crate::charfn::{SpectralFn, WeylFn};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::potential::EdgePotential;
use crate::quadrature::gauss_legendre_on;
use crate::scalar::{czero, from_usize, i_unit, lit, to_f64, Real, C};
use rayon::prelude::*;
use rustfft::FftPlanner;

/// Trapezoid discretization of γ, symmetric in s.
#[derive(Clone, Debug)]
pub struct ContourGrid<T> {
    pub tau: T,
    pub s_max: T,
    pub h_s: T,
    pub s: Vec<T>,
    pub nodes: Vec<C<T>>,
    /// Positive weights: ∫_γ f dρ ≈ −Σ w_j f(θ_j) for the s: +∞ → −∞ orientation.
    pub weights: Vec<T>,
}

impl<T: Real> ContourGrid<T> {
    pub fn new(tau: T, s_max: T, h_s: T) -> Self {
        let half = (s_max / h_s).ceil().to_usize().unwrap_or(1).max(1);
        let n = 2 * half + 1;
        let s: Vec<T> = (0..n).map(|j| h_s * (from_usize::<T>(j) - from_usize::<T>(half))).collect();
        let nodes = s.iter().map(|&s| C::new(s, tau)).collect();
        let mut weights = vec![h_s; n];
        weights[0] = h_s * lit(0.5);
        weights[n - 1] = h_s * lit(0.5);
        Self { tau, s_max: h_s * from_usize(half), h_s, s, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node spacing resolving exp(2iρT_k): h_s ≤ π/(4 T_k · oversampling), and h_s ≤ τ/2.
    pub fn spacing(tau: T, edge_length: T, oversampling: T) -> T {
        (T::PI() / (lit::<T>(4.0) * edge_length * oversampling)).min(tau * lit(0.5))
    }
}

#[derive(Clone, Debug)]
pub struct ContourSettings<T> {
    pub tau0: T,
    pub tau_cap: T,
    pub s_max: T,
    pub oversampling: T,
}

/// Zeros of Δ(ρ²) in the strip above γ (rectangle [−X, X] × [τ, τ + Y]).
pub fn zeros_above<T: Real>(f: &dyn SpectralFn<T>, tau: T) -> Result<i64> {
    let len = f.meta().total_length.max(lit(0.1));
    let height = lit::<T>(30.0).min(lit::<T>(150.0) / len);
    let x = lit::<T>(30.0);
    let per_unit = len * lit(2.0) + lit(4.0);
    let g = |rho: C<T>| f.at_rho(rho);
    Ok(count_zeros_rect(&g, -x, x, tau, tau + height, per_unit)?.count)
}

/// Chooses τ by doubling from `tau0` until no function in the set (nor its zero
/// reference) has zeros above γ, then fixes S_max and h_s.
pub fn build_contour<T: Real>(
    set: &[&dyn SpectralFn<T>],
    edge_length: T,
    settings: &ContourSettings<T>,
) -> Result<ContourGrid<T>> {
    let mut tau = settings.tau0;
    loop {
        let mut clear = true;
        for f in set {
            let z: &dyn SpectralFn<T> = f.zero_form().as_ref();
            if zeros_above(*f, tau)? != 0 || zeros_above(z, tau)? != 0 {
                clear = false;
                break;
            }
        }
        if clear {
            break;
        }
        tau = tau * lit(2.0);
        if tau > settings.tau_cap {
            return Err(Error::numerical(format!(
                "contour offset exceeds cap {} (zeros above every admissible contour)",
                settings.tau_cap
            )));
        }
        log::info!("raising contour offset to tau = {tau}");
    }
    let h = ContourGrid::spacing(tau, edge_length, settings.oversampling);
    Ok(ContourGrid::new(tau, settings.s_max, h))
}

/// I(x,ρ,θ) = ∫_0^x sin ρt sin θt dt, with Taylor branches at ρ = ±θ.
pub fn sin_sin_integral<T: Real>(x: T, rho: C<T>, theta: C<T>) -> C<T> {
    let half = lit::<T>(0.5);
    let part = |a: C<T>| -> C<T> {
        // ∫_0^x cos(a t) dt = sin(ax)/a
        if (a * x).norm() < lit(1e-4) {
            let z2 = a * a * x * x;
            (C::new(T::one(), T::zero()) - z2 / lit::<T>(6.0) + z2 * z2 / lit::<T>(120.0)
                - z2 * z2 * z2 / lit::<T>(5040.0)
                + z2 * z2 * z2 * z2 / lit::<T>(362880.0))
                * x
        } else {
            (a * x).sin() / a
        }
    };
    (part(rho - theta) - part(rho + theta)) * half
}

/// 𝓜(θ_j) on the contour nodes, with a summability gate.
pub fn weyl_samples<T: Real>(weyl: &WeylFn<T>, contour: &ContourGrid<T>, gate_tail: T) -> Result<Vec<C<T>>> {
    let m: Vec<C<T>> = contour
        .nodes
        .par_iter()
        .map(|&th| weyl.hat_at_rho(th).map(|v| v / th))
        .collect::<Result<_>>()?;
    // Values at the rounding level of M⁰ carry no information about the tail.
    let eps = T::epsilon() * lit(1e4);
    let above: Vec<C<T>> = m
        .iter()
        .zip(&contour.nodes)
        .map(|(&v, &th)| if v.norm() > eps * (weyl.zero_at_rho(th) / th).norm() { v } else { czero() })
        .collect();
    let tail = contour_tail_fraction(&above, contour);
    if !(tail <= gate_tail) {
        return Err(Error::gate(format!(
            "Weyl data not square-summable on the contour: outer tail carries {:.3e} of the mass",
            to_f64(tail)
        )));
    }
    Ok(m)
}

/// Share of Σ w|𝓜|² carried by |s| > 0.9 S_max.
pub fn contour_tail_fraction<T: Real>(m: &[C<T>], contour: &ContourGrid<T>) -> T {
    let cut = contour.s_max * lit(0.9);
    let mut tot = T::zero();
    let mut tail = T::zero();
    for ((v, &w), &s) in m.iter().zip(&contour.weights).zip(&contour.s) {
        let e = v.norm_sqr() * w;
        tot += e;
        if s.abs() > cut {
            tail += e;
        }
    }
    if tot > T::zero() {
        tail / tot
    } else {
        T::zero()
    }
}

fn inv_pi_i<T: Real>() -> C<T> {
    // 1/(πi) = −i/π
    C::new(T::zero(), -T::one() / T::PI())
}

/// Dense discretization of the main equation at one x.
#[derive(Clone, Debug)]
pub struct MainEquationSystem<T> {
    pub x: T,
    /// I + H.
    pub matrix: Matrix<T>,
    pub rhs: Vec<C<T>>,
}

impl<T: Real> MainEquationSystem<T> {
    /// Σ_ij w_i w_j |𝓜_j I_ij|²: discrete Hilbert-Schmidt norm² of the kernel.
    pub fn kernel_norm_sq(&self, contour: &ContourGrid<T>) -> T {
        let n = self.matrix.n;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut v = self.matrix[(i, j)];
                if i == j {
                    v = v - C::new(T::one(), T::zero());
                }
                // Undo the prefactor and weight to get r⁰ itself.
                acc += v.norm_sqr() * T::PI() * T::PI() * contour.weights[i] / contour.weights[j];
            }
        }
        acc
    }
}

pub fn build_kernel_and_rhs<T: Real>(contour: &ContourGrid<T>, mcal: &[C<T>], x: T) -> MainEquationSystem<T> {
    let n = contour.len();
    let c = inv_pi_i::<T>();
    let mut matrix = Matrix::identity(n);
    let sinx: Vec<C<T>> = contour.nodes.iter().map(|&th| (th * x).sin()).collect();
    let mut rhs = vec![czero(); n];
    for i in 0..n {
        let rho = contour.nodes[i];
        let mut f = czero();
        for j in 0..n {
            let h = c * mcal[j] * sin_sin_integral(x, rho, contour.nodes[j]) * contour.weights[j];
            matrix[(i, j)] += h;
            f -= h * sinx[j];
        }
        rhs[i] = f;
    }
    MainEquationSystem { x, matrix, rhs }
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub psi: Vec<C<T>>,
    pub condition: T,
    pub residual: T,
}

/// Dense LU solve with condition number and relative residual.
pub fn solve_main_equation<T: Real>(sys: &MainEquationSystem<T>) -> Result<Solution<T>> {
    let lu = Lu::factor(sys.matrix.clone())?;
    let psi = lu.solve(&sys.rhs);
    let condition = lu.condition();
    let r = sys.matrix.mul_vec(&psi);
    let res = r.iter().zip(&sys.rhs).fold(T::zero(), |a, (u, v)| a + (u - v).norm_sqr()).sqrt();
    let fnorm = sys.rhs.iter().fold(T::zero(), |a, v| a + v.norm_sqr()).sqrt();
    let residual = if fnorm > T::zero() { res / fnorm } else { res };
    if condition > lit(1e8) {
        log::warn!("main equation at x = {} has condition number {:.3e}", sys.x, to_f64(condition));
    }
    Ok(Solution { psi, condition, residual })
}

/// Low-rank solve. With a Gauss rule {t_l, ω_l} on [0, x], I ≈ A Ω Aᵀ where
/// A_il = sin(θ_i t_l), so H = c·A Ω Aᵀ D (D = diag 𝓜_j w_j) and Woodbury reduces
/// the N×N system to an L×L one.
pub fn solve_main_equation_lowrank<T: Real>(
    contour: &ContourGrid<T>,
    mcal: &[C<T>],
    x: T,
    t_nodes: usize,
    with_condition: bool,
) -> Result<Solution<T>> {
    let n = contour.len();
    if x == T::zero() {
        return Ok(Solution { psi: vec![czero(); n], condition: T::one(), residual: T::zero() });
    }
    let c = inv_pi_i::<T>();
    let (t, tw) = gauss_legendre_on(t_nodes, T::zero(), x);
    let l = t.len();
    // A stored row-major N×L.
    let mut a = vec![czero::<T>(); n * l];
    for i in 0..n {
        for k in 0..l {
            a[i * l + k] = (contour.nodes[i] * t[k]).sin();
        }
    }
    let d: Vec<C<T>> = (0..n).map(|j| mcal[j] * contour.weights[j]).collect();
    // G = Aᵀ D A (L×L, symmetric).
    let mut g = vec![czero::<T>(); l * l];
    for j in 0..n {
        let row = &a[j * l..(j + 1) * l];
        let dj = d[j];
        for p in 0..l {
            let v = row[p] * dj;
            let gp = &mut g[p * l..(p + 1) * l];
            for q in p..l {
                gp[q] += v * row[q];
            }
        }
    }
    for p in 0..l {
        for q in 0..p {
            g[p * l + q] = g[q * l + p];
        }
    }
    // V s with s_j = sin(θ_j x): b = Aᵀ D s.
    let apply_v = |v: &[C<T>]| -> Vec<C<T>> {
        let mut out = vec![czero::<T>(); l];
        for j in 0..n {
            let s = d[j] * v[j];
            let row = &a[j * l..(j + 1) * l];
            for p in 0..l {
                out[p] += row[p] * s;
            }
        }
        out
    };
    // U y = c A Ω y.
    let apply_u = |y: &[C<T>]| -> Vec<C<T>> {
        (0..n)
            .map(|i| {
                let row = &a[i * l..(i + 1) * l];
                row.iter().zip(y).zip(&tw).fold(czero::<T>(), |acc, ((&r, &yv), &w)| acc + r * yv * w) * c
            })
            .collect()
    };
    let sinx: Vec<C<T>> = contour.nodes.iter().map(|&th| (th * x).sin()).collect();
    let f: Vec<C<T>> = apply_u(&apply_v(&sinx)).into_iter().map(|v| -v).collect();
    // Capacitance K = I + V U = I + c G Ω.
    let mut cap = Matrix::identity(l);
    for p in 0..l {
        for q in 0..l {
            cap[(p, q)] += c * g[p * l + q] * tw[q];
        }
    }
    let lu = Lu::factor(cap)?;
    let vf = apply_v(&f);
    let y = lu.solve(&vf);
    let uy = apply_u(&y);
    let psi: Vec<C<T>> = f.iter().zip(&uy).map(|(&fi, &ui)| fi - ui).collect();
    let condition = if with_condition { lu.condition() } else { T::nan() };
    let hpsi = apply_u(&apply_v(&psi));
    let res = (0..n).fold(T::zero(), |acc, i| acc + (psi[i] + hpsi[i] - f[i]).norm_sqr()).sqrt();
    let fnorm = f.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr()).sqrt();
    let residual = if fnorm > T::zero() { res / fnorm } else { res };
    Ok(Solution { psi, condition, residual })
}

/// Gauss nodes for the t-integral on [0, x]: enough to resolve frequencies up to 2 S_max.
pub fn t_nodes_for<T: Real>(x: T, s_max: T, per_unit: T) -> usize {
    (per_unit * s_max * x).ceil().to_usize().unwrap_or(0) + 24
}

/// σ_k(x) from ψ(x,·) by the reconstruction formula (𝓘₁ + 𝓘₂ by direct quadrature).
pub fn reconstruct_point<T: Real>(contour: &ContourGrid<T>, mcal: &[C<T>], x: T, psi: &[C<T>]) -> C<T> {
    let mut acc = czero::<T>();
    for j in 0..contour.len() {
        let th = contour.nodes[j];
        acc += mcal[j] * contour.weights[j] * ((th * x * lit::<T>(2.0)).cos() - psi[j] * (th * x).sin() * lit::<T>(2.0));
    }
    acc * inv_pi_i::<T>()
}

/// 𝓘₁(x_l) = (1/πi) Σ_j w_j 𝓜_j cos(2θ_j x_l) on x_l = l·Δx by direct sums.
pub fn fourier_part_direct<T: Real>(contour: &ContourGrid<T>, mcal: &[C<T>], dx: T, count: usize) -> Vec<C<T>> {
    (0..count)
        .map(|l| {
            let x = dx * from_usize(l);
            let mut acc = czero::<T>();
            for j in 0..contour.len() {
                acc += mcal[j] * contour.weights[j] * (contour.nodes[j] * x * lit::<T>(2.0)).cos();
            }
            acc * inv_pi_i::<T>()
        })
        .collect()
}

/// Same sums by a chirp-z transform over the uniform s-grid.
pub fn fourier_part_fast<T: Real>(contour: &ContourGrid<T>, mcal: &[C<T>], dx: T, count: usize) -> Vec<C<T>> {
    let a: Vec<C<T>> = mcal.iter().zip(&contour.weights).map(|(&m, &w)| m * w).collect();
    let s0 = contour.s[0];
    let h = contour.h_s;
    let tau = contour.tau;
    let two = lit::<T>(2.0);
    // Σ_j a_j e^{±2i s_j x_l} = e^{±2i s0 x_l} Σ_j a_j z_±^{jl}, z_± = e^{±2ihΔx}.
    let plus = chirp_z(&a, two * h * dx, count);
    let minus = chirp_z(&a, -two * h * dx, count);
    (0..count)
        .map(|l| {
            let x = dx * from_usize(l);
            let ep = C::from_polar(T::one(), two * s0 * x) * (-two * tau * x).exp();
            let em = C::from_polar(T::one(), -two * s0 * x) * (two * tau * x).exp();
            (plus[l] * ep + minus[l] * em) * lit::<T>(0.5) * inv_pi_i::<T>()
        })
        .collect()
}

/// X_l = Σ_j a_j e^{iα j l}, l < count, via Bluestein's identity jl = (j² + l² − (l−j)²)/2.
pub fn chirp_z<T: Real>(a: &[C<T>], alpha: T, count: usize) -> Vec<C<T>> {
    let n = a.len();
    let len = (n + count - 1).next_power_of_two();
    let half = lit::<T>(0.5);
    let chirp = |k: i64| -> C<T> {
        let kk = crate::scalar::from_i64::<T>(k * k);
        C::from_polar(T::one(), alpha * kk * half)
    };
    let mut u = vec![czero::<T>(); len];
    for j in 0..n {
        u[j] = a[j] * chirp(j as i64);
    }
    let mut v = vec![czero::<T>(); len];
    for k in 0..count {
        v[k] = chirp(k as i64).conj();
    }
    for k in 1..n {
        v[len - k] = chirp(k as i64).conj();
    }
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut u);
    fwd.process(&mut v);
    for (x, y) in u.iter_mut().zip(&v) {
        *x = *x * *y;
    }
    inv.process(&mut u);
    let scale = T::one() / from_usize(len);
    (0..count).map(|l| u[l] * scale * chirp(l as i64)).collect()
}

#[derive(Clone, Debug)]
pub struct InverseSettings<T> {
    pub contour: ContourSettings<T>,
    /// Reconstruction x-grid cells on the edge.
    pub x_cells: usize,
    /// Cells of the returned edge potential.
    pub edge_cells: usize,
    /// Gauss nodes per unit of S_max·x in the low-rank solve.
    pub t_nodes_per_unit: T,
    pub gate_tail: T,
    pub residual_tol: T,
    /// Use the dense N×N solve instead of the low-rank one.
    pub dense: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RecoveryDiagnostics {
    pub tau: f64,
    pub s_max: f64,
    pub h_s: f64,
    pub contour_nodes: usize,
    pub max_condition: f64,
    pub max_residual: f64,
    pub weyl_tail_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryRecovery<T> {
    pub sigma: EdgePotential<T>,
    pub diagnostics: RecoveryDiagnostics,
}

/// Full boundary-edge recovery for `e_k` of length `edge_length` from M_k,
/// on a contour already certified for the data.
pub fn recover_on_contour<T: Real>(
    weyl: &WeylFn<T>,
    contour: &ContourGrid<T>,
    edge: usize,
    edge_length: T,
    settings: &InverseSettings<T>,
) -> Result<BoundaryRecovery<T>> {
    let mcal = weyl_samples(weyl, contour, settings.gate_tail)?;
    let tail = contour_tail_fraction(&mcal, contour);
    let nx = settings.x_cells.max(8);
    let dx = edge_length / from_usize(nx);
    let cond_every = (nx / 4).max(1);
    let results: Vec<(C<T>, T, T)> = (0..=nx)
        .into_par_iter()
        .map(|l| {
            let x = dx * from_usize(l);
            let sol = if settings.dense {
                solve_main_equation(&build_kernel_and_rhs(contour, &mcal, x))?
            } else {
                let nt = t_nodes_for(x, contour.s_max, settings.t_nodes_per_unit);
                solve_main_equation_lowrank(contour, &mcal, x, nt, l % cond_every == 0 || l == nx)?
            };
            Ok((reconstruct_point(contour, &mcal, x, &sol.psi), sol.condition, sol.residual))
        })
        .collect::<Result<_>>()?;
    let mut max_cond = T::zero();
    let mut max_res = T::zero();
    for &(_, c, r) in &results {
        if c.is_finite() {
            max_cond = max_cond.max(c);
        }
        max_res = max_res.max(r);
    }
    if !(max_res <= settings.residual_tol) {
        return Err(Error::numerical(format!(
            "main equation residual {:.3e} above tolerance",
            to_f64(max_res)
        )));
    }
    let samples: Vec<C<T>> = results.iter().map(|r| r.0).collect();
    let coarse = EdgePotential::new(edge, edge_length, samples)?;
    let sigma = coarse.resample(settings.edge_cells);
    Ok(BoundaryRecovery {
        sigma,
        diagnostics: RecoveryDiagnostics {
            tau: to_f64(contour.tau),
            s_max: to_f64(contour.s_max),
            h_s: to_f64(contour.h_s),
            contour_nodes: contour.len(),
            max_condition: to_f64(max_cond),
            max_residual: to_f64(max_res),
            weyl_tail_fraction: to_f64(tail),
        },
    })
}

/// ∮ M̂(λ)/λ dλ over Γ_N ∪ c_N with |λ| = r²; `mhat` takes ρ = √λ.
pub fn closed_contour_integral<T: Real>(mhat: &dyn Fn(C<T>) -> Result<C<T>>, tau: T, r: T) -> Result<C<T>> {
    let se = (r * r - tau * tau).sqrt();
    // Segment of Γ: λ = ρ², dλ/λ = 2dρ/ρ, ρ = s + iτ with s from +se to −se.
    let panels = (se * lit(2.0)).ceil().to_usize().unwrap_or(1).max(4);
    let (xs, ws) = crate::quadrature::composite_gauss::<T>(16, panels, -se, se);
    let mut seg = czero::<T>();
    for (&s, &w) in xs.iter().zip(&ws) {
        let rho = C::new(s, tau);
        seg += mhat(rho)? / rho * w;
    }
    seg = -(seg * lit::<T>(2.0));
    // Closing arc λ = r² e^{iφ}, φ from −2α to 2α, dλ/λ = i dφ.
    let alpha = (tau / se).atan();
    let (ps, pw) = crate::quadrature::composite_gauss::<T>(16, 8, -alpha * lit(2.0), alpha * lit(2.0));
    let mut arc = czero::<T>();
    for (&phi, &w) in ps.iter().zip(&pw) {
        let rho = C::from_polar(r, phi * lit(0.5));
        arc += mhat(rho)? * w;
    }
    Ok(seg + arc * i_unit::<T>())
}
