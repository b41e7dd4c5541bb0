//! Leaf-to-root reconstruction, forward data and stability sweeps.

use crate::boundary_inverse::{build_contour, recover_on_contour, InverseSettings, RecoveryDiagnostics};
use crate::charfn::{
    char_fn, kappa_noise_floor, spectral_distance, weyl_fn, BoundaryConditions, DistanceReport, SampledCharFn, SpectralFn,
};
use crate::error::{Error, Result};
use crate::potential::{EdgePotential, TreePotential};
use crate::sampling::{synthesize_band_limited, truncate_by_tail, CardinalSeries};
use crate::scalar::{creal, lit, to_f64, Real, C};
use crate::transition::{SamplingSettings, TransitionDiagnostics, TransitionWorkspace};
use crate::tree::{MetricTree, SubtreeView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactForward,
    Perturbed,
    ExternalFile,
}

/// Δ with Dirichlet conditions everywhere and Δ_k (Neumann at v_k) for every leaf v_k.
#[derive(Clone)]
pub struct SpectralData<T: Real> {
    pub tree: Arc<MetricTree<T>>,
    pub delta: Arc<dyn SpectralFn<T>>,
    pub delta_k: BTreeMap<usize, Arc<dyn SpectralFn<T>>>,
    pub provenance: Provenance,
}

impl<T: Real> SpectralData<T> {
    /// One Δ_k per non-root boundary vertex, with matching degree metadata.
    pub fn validate(&self) -> Result<()> {
        let leaves: BTreeSet<usize> = self.tree.leaves().into_iter().collect();
        let have: BTreeSet<usize> = self.delta_k.keys().copied().collect();
        if leaves != have {
            return Err(Error::input(format!("data must hold one block per leaf {leaves:?}, found {have:?}")));
        }
        let b = self.tree.b();
        let m = self.delta.meta();
        if m.b != b || m.d != b {
            return Err(Error::input("Δ block does not carry all-Dirichlet conditions on the tree"));
        }
        for (k, f) in &self.delta_k {
            if f.meta().b != b || f.meta().d + 1 != b {
                return Err(Error::input(format!("Δ_{k} block does not carry a single Neumann vertex")));
            }
        }
        Ok(())
    }

    /// Blocks in file order: Δ first, then Δ_k by k.
    pub fn blocks(&self) -> Vec<(Option<usize>, Arc<dyn SpectralFn<T>>)> {
        let mut out = vec![(None, self.delta.clone())];
        out.extend(self.delta_k.iter().map(|(k, f)| (Some(*k), f.clone())));
        out
    }

    pub fn map_blocks(&self, provenance: Provenance, mut f: impl FnMut(Option<usize>, &Arc<dyn SpectralFn<T>>) -> Result<Arc<dyn SpectralFn<T>>>) -> Result<Self> {
        let delta = f(None, &self.delta)?;
        let mut delta_k = BTreeMap::new();
        for (k, g) in &self.delta_k {
            delta_k.insert(*k, f(Some(*k), g)?);
        }
        Ok(Self { tree: self.tree.clone(), delta, delta_k, provenance })
    }
}

pub fn forward_data<T: Real>(tree: &Arc<MetricTree<T>>, potential: &Arc<TreePotential<T>>) -> Result<SpectralData<T>> {
    let delta: Arc<dyn SpectralFn<T>> = Arc::new(char_fn(tree, potential, BoundaryConditions::dirichlet())?);
    let mut delta_k = BTreeMap::new();
    for k in tree.leaves() {
        let f: Arc<dyn SpectralFn<T>> = Arc::new(char_fn(tree, potential, BoundaryConditions::neumann_at(k))?);
        delta_k.insert(k, f);
    }
    Ok(SpectralData { tree: tree.clone(), delta, delta_k, provenance: Provenance::ExactForward })
}

#[derive(Clone, Debug)]
pub struct DataSampling<T> {
    pub tau: T,
    pub start: usize,
    pub cap: usize,
    pub tail_tol: T,
}

/// κ of a block sampled on ν_n = πn/𝐓 + iτ, truncated by the tail rule.
pub fn sample_block<T: Real>(f: &dyn SpectralFn<T>, s: &DataSampling<T>) -> (SampledCharFn<T>, bool) {
    let len = f.meta().total_length;
    let floor = kappa_noise_floor(f.zero_form(), s.tau);
    let tr = truncate_by_tail(len, s.tau, s.start, s.cap, s.tail_tol, floor, |nu| f.kappa(nu));
    let constant = (f.meta().d == 0).then(|| f.at_rho(creal(T::zero())));
    (SampledCharFn::new(f.zero_form().clone(), tr.series, constant), tr.converged)
}

/// Every block replaced by its sampled form.
pub fn sample_data<T: Real>(data: &SpectralData<T>, s: &DataSampling<T>) -> Result<SpectralData<T>> {
    data.map_blocks(data.provenance, |k, f| {
        let (g, converged) = sample_block(f.as_ref(), s);
        if !converged {
            log::warn!("block {k:?}: sample tail rule not met at cap {}", s.cap);
        }
        Ok(Arc::new(g))
    })
}

/// Seeded band-limited η ∈ PW(𝒯) with ‖η‖_{L2(ℝ)} = 1.
#[derive(Clone, Debug)]
pub struct PwPerturbation<T> {
    pub length: T,
    coeffs: Vec<(T, T)>,
    scale: T,
}

impl<T: Real> PwPerturbation<T> {
    pub fn new(length: T, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(T, T)> = (0..6)
            .map(|j| (lit::<T>(rng.gen_range(-1.0..1.0) / (1.0 + j as f64)), lit::<T>(rng.gen_range(0.0..6.283))))
            .collect();
        let mut p = Self { length, coeffs, scale: T::one() };
        // ‖η‖² by trapezoid on the real axis; η decays like ρ^{−5}.
        let h = T::PI() / (lit::<T>(4.0) * length);
        let n = (lit::<T>(400.0) / h).to_usize().unwrap_or(1000);
        let mut acc = T::zero();
        for i in 0..=n {
            let r = h * crate::scalar::from_usize(i);
            let w = if i == 0 { lit(0.5) } else { T::one() };
            acc += (p.eval(creal(r)).norm_sqr() + p.eval(creal(-r)).norm_sqr()) * w * lit(0.5);
        }
        p.scale = T::one() / (acc * h).sqrt();
        p
    }

    pub fn eval(&self, rho: C<T>) -> C<T> {
        synthesize_band_limited(self.length, &self.coeffs, rho) * self.scale
    }
}

/// Adds `amplitude·η` to the κ samples of every block, with a different seed per block.
pub fn perturb_pw<T: Real>(data: &SpectralData<T>, amplitude: T, seed: u64) -> Result<SpectralData<T>> {
    perturb_samples(data, seed, |series, block_seed| {
        let eta = PwPerturbation::new(series.length, block_seed);
        series.map_samples(|_, nu, v| v + eta.eval(nu) * amplitude)
    })
}

/// Adds complex white noise of standard deviation `amplitude` to every κ sample.
pub fn perturb_white<T: Real>(data: &SpectralData<T>, amplitude: T, seed: u64) -> Result<SpectralData<T>> {
    perturb_samples(data, seed, |series, block_seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(block_seed);
        let noise: Vec<C<T>> = series
            .samples
            .iter()
            .map(|_| {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                C::new(lit::<T>(a), lit::<T>(b)) * amplitude
            })
            .collect();
        let n_min = series.n_min;
        series.map_samples(|n, _, v| v + noise[(n - n_min) as usize])
    })
}

fn perturb_samples<T: Real>(
    data: &SpectralData<T>,
    seed: u64,
    f: impl Fn(&CardinalSeries<T>, u64) -> CardinalSeries<T>,
) -> Result<SpectralData<T>> {
    data.map_blocks(Provenance::Perturbed, |k, g| {
        let sampled = g
            .as_any_sampled()
            .ok_or_else(|| Error::input("perturbations act on sampled data; sample the blocks first"))?;
        let block_seed = seed.wrapping_mul(1_000_003).wrapping_add(k.map_or(0, |k| k as u64 + 1));
        Ok(Arc::new(sampled.with_series(f(sampled.series(), block_seed))))
    })
}

#[derive(Clone, Debug)]
pub struct PipelineSettings<T> {
    pub inverse: InverseSettings<T>,
    pub transition: SamplingSettings<T>,
    pub distance_r0: T,
    pub distance_cap: T,
    pub distance_tail: T,
    /// Largest outer-tail energy share accepted in sampled input blocks.
    pub data_gate: T,
}

#[derive(Clone, Debug, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepLog {
    Recovery { vertex: usize, edge: usize, seconds: f64, diagnostics: RecoveryDiagnostics },
    Transition { vertex: usize, seconds: f64, rejected: Vec<(usize, String)>, diagnostics: TransitionDiagnostics },
}

struct FrontierEntry<T: Real> {
    view: SubtreeView,
    d: Arc<dyn SpectralFn<T>>,
    n: Arc<dyn SpectralFn<T>>,
    tau: Option<T>,
}

/// Frontier V, the current pair per vertex, and the recovered edges.
pub struct ReconstructionState<T: Real> {
    pub frontier: BTreeSet<usize>,
    entries: BTreeMap<usize, FrontierEntry<T>>,
    pub recovered: BTreeMap<usize, EdgePotential<T>>,
    pub log: Vec<StepLog>,
}

pub struct Reconstruction<T> {
    pub potential: TreePotential<T>,
    pub log: Vec<StepLog>,
    pub iterations: usize,
    /// Sampled κ_N and κ_D produced by each transition, keyed by the new vertex.
    pub transitions: BTreeMap<usize, (CardinalSeries<T>, CardinalSeries<T>)>,
}

impl<T: Real> ReconstructionState<T> {
    pub fn new(data: &SpectralData<T>) -> Self {
        let full = data.tree.full();
        let mut entries = BTreeMap::new();
        for (&k, f) in &data.delta_k {
            entries.insert(k, FrontierEntry { view: full.clone(), d: data.delta.clone(), n: f.clone(), tau: None });
        }
        Self { frontier: data.delta_k.keys().copied().collect(), entries, recovered: BTreeMap::new(), log: Vec::new() }
    }

    fn current_potential(&self, tree: &MetricTree<T>, cells: usize) -> TreePotential<T> {
        TreePotential::from_edges_unchecked(
            (1..=tree.m())
                .map(|j| self.recovered.get(&j).cloned().unwrap_or_else(|| EdgePotential::zero(j, tree.length(j), cells)))
                .collect(),
        )
    }

    /// Vertices whose lower edges are all recovered while their own edge is not.
    fn ready(&self, tree: &MetricTree<T>) -> BTreeSet<usize> {
        (1..=tree.m())
            .filter(|&p| !self.recovered.contains_key(&p) && !tree.children(p).is_empty())
            .filter(|&p| tree.descendant_edges(p).iter().all(|e| self.recovered.contains_key(e)))
            .collect()
    }
}

/// Recovers every edge of the tree from complete spectral data.
pub fn reconstruct<T: Real>(data: &SpectralData<T>, settings: &PipelineSettings<T>) -> Result<Reconstruction<T>> {
    data.validate()?;
    check_sample_decay(data, settings.data_gate)?;
    let tree = data.tree.clone();
    let mut state = ReconstructionState::new(data);
    let mut iterations = 0;
    let mut transitions = BTreeMap::new();
    loop {
        iterations += 1;
        // Boundary-edge recovery, independent across the frontier.
        let jobs: Vec<usize> = state.frontier.iter().copied().collect();
        let results: Vec<Result<(usize, EdgePotential<T>, T, StepLog)>> = jobs
            .par_iter()
            .map(|&v| {
                let start = Instant::now();
                let e = &state.entries[&v];
                let len = tree.length(v);
                let contour = build_contour(&[e.d.as_ref(), e.n.as_ref()], len, &settings.inverse.contour)
                    .map_err(|err| err.at("contour", v))?;
                let weyl = weyl_fn(v, e.d.clone(), e.n.clone());
                let rec = recover_on_contour(&weyl, &contour, v, len, &settings.inverse)
                    .map_err(|err| err.at("boundary-recovery", v))?;
                log::info!("recovered e{v} (tau = {})", rec.diagnostics.tau);
                let log = StepLog::Recovery {
                    vertex: v,
                    edge: v,
                    seconds: start.elapsed().as_secs_f64(),
                    diagnostics: rec.diagnostics.clone(),
                };
                Ok((v, rec.sigma, contour.tau, log))
            })
            .collect();
        for r in results {
            let (v, sigma, tau, log) = r?;
            state.recovered.insert(v, sigma);
            if let Some(e) = state.entries.get_mut(&v) {
                e.tau = Some(tau);
            }
            state.log.push(log);
        }
        if state.recovered.len() == tree.m() {
            break;
        }
        // Frontier update and vertex transitions.
        let next = state.ready(&tree);
        if next.is_empty() {
            return Err(Error::numerical("frontier stalled before the root").at("frontier", tree.root()));
        }
        let potential = Arc::new(state.current_potential(&tree, settings.inverse.edge_cells));
        for &p in &next {
            let start = Instant::now();
            let candidates: Vec<usize> =
                tree.children(p).iter().copied().filter(|k| state.entries.contains_key(k)).collect();
            let mut rejected = Vec::new();
            let mut outcome = None;
            for &k in candidates.iter().take(2) {
                let e = &state.entries[&k];
                let tau = e.tau.unwrap_or(settings.inverse.contour.tau0);
                let ws = TransitionWorkspace::new(tree.clone(), &e.view, k, potential.clone(), e.d.clone(), e.n.clone(), tau)
                    .map_err(|err| err.at("transition", p))?;
                match ws.sample_and_interpolate(&settings.transition) {
                    Ok(r) => {
                        outcome = Some((ws.dec.upper.clone(), r, tau));
                        break;
                    }
                    Err(err) if err.is_gate() => {
                        log::warn!("transition at v{p} via v{k} rejected: {err}");
                        rejected.push((k, err.to_string()));
                    }
                    Err(err) => return Err(err.at("transition", p)),
                }
            }
            let Some((view, r, tau)) = outcome else {
                let msg = rejected.iter().map(|(k, m)| format!("via v{k}: {m}")).collect::<Vec<_>>().join("; ");
                return Err(Error::gate(msg).at("transition", p));
            };
            state.log.push(StepLog::Transition {
                vertex: p,
                seconds: start.elapsed().as_secs_f64(),
                rejected,
                diagnostics: r.diagnostics.clone(),
            });
            transitions.insert(p, (r.delta_n.series().clone(), r.delta_d.series().clone()));
            state.entries.insert(p, FrontierEntry { view, d: Arc::new(r.delta_d), n: Arc::new(r.delta_n), tau: Some(tau) });
        }
        state.frontier = next;
    }
    let potential = state.current_potential(&tree, settings.inverse.edge_cells);
    Ok(Reconstruction { potential, log: state.log, iterations, transitions })
}

/// Sampled blocks must decay: a flat tail means the data are not of Paley-Wiener form.
pub fn check_sample_decay<T: Real>(data: &SpectralData<T>, gate: T) -> Result<()> {
    for (k, f) in data.blocks() {
        if let Some(s) = f.as_any_sampled() {
            let tail = s.series().tail_fraction_above(s.noise_floor());
            if !(tail <= gate) {
                let at = k.unwrap_or(data.tree.root());
                return Err(Error::gate(format!(
                    "samples of block {} do not decay: outer tail carries {:.3e} of the energy",
                    k.map_or("Δ".to_string(), |k| format!("Δ_{k}")),
                    to_f64(tail)
                ))
                .at("data", at));
            }
        }
    }
    Ok(())
}

/// δ between two data sets on the same tree.
pub fn data_distance<T: Real>(a: &SpectralData<T>, b: &SpectralData<T>, settings: &PipelineSettings<T>) -> Result<DistanceReport> {
    let per: Vec<(usize, &dyn SpectralFn<T>, &dyn SpectralFn<T>)> = a
        .delta_k
        .iter()
        .map(|(k, f)| {
            let g = b.delta_k.get(k).ok_or_else(|| Error::input(format!("Δ_{k} missing")))?;
            Ok((*k, f.as_ref(), g.as_ref()))
        })
        .collect::<Result<_>>()?;
    spectral_distance(
        (a.delta.as_ref(), b.delta.as_ref()),
        &per,
        settings.distance_r0,
        settings.distance_cap,
        settings.distance_tail,
    )
}

/// Per-edge relative L2 errors ‖σ_j − σ̃_j‖ / ‖σ_j‖ (absolute when σ_j ≡ 0).
pub fn edge_errors<T: Real>(truth: &TreePotential<T>, got: &TreePotential<T>) -> Vec<f64> {
    truth
        .edges()
        .iter()
        .zip(got.edges())
        .map(|(a, b)| {
            let b = if b.cells() == a.cells() { b.clone() } else { b.resample(a.cells()) };
            let d = to_f64(a.sub(&b).l2_norm());
            let n = to_f64(a.l2_norm());
            if n > 0.0 {
                d / n
            } else {
                d
            }
        })
        .collect()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SweepRun {
    pub amplitude: f64,
    pub seed: u64,
    pub delta: Option<f64>,
    /// ‖σ̂_j‖ per edge, against the unperturbed reconstruction.
    pub edge_change: Vec<f64>,
    /// ‖σ̂_j‖ / δ; None when δ = 0 or the run failed.
    pub ratios: Vec<Option<f64>>,
    pub error: Option<String>,
    pub exit_code: i32,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    /// max ratio per edge over the successful runs.
    pub max_ratio: Vec<Option<f64>>,
    /// max/min ratio per edge; the stability band.
    pub band: Vec<Option<f64>>,
}

/// Perturbs the sampled data by PW-class noise of each amplitude, reconstructs, and
/// records ‖σ̂_j‖/δ.
pub fn stability_sweep<T: Real>(
    base: &SpectralData<T>,
    amplitudes: &[T],
    seeds: &[u64],
    settings: &PipelineSettings<T>,
) -> Result<SweepReport> {
    let m = base.tree.m();
    if amplitudes.is_empty() {
        return Ok(SweepReport { runs: vec![], max_ratio: vec![None; m], band: vec![None; m] });
    }
    let reference = reconstruct(base, settings)?.potential;
    let mut runs = Vec::new();
    for &a in amplitudes {
        for &seed in seeds {
            let run = (|| -> Result<(f64, Vec<f64>)> {
                let pert = perturb_pw(base, a, seed)?;
                let delta = data_distance(base, &pert, settings)?.delta;
                if a == T::zero() {
                    return Ok((delta, vec![0.0; m]));
                }
                let rec = reconstruct(&pert, settings)?.potential;
                let change = reference
                    .edges()
                    .iter()
                    .zip(rec.edges())
                    .map(|(x, y)| to_f64(x.sub(y).l2_norm()))
                    .collect();
                Ok((delta, change))
            })();
            runs.push(match run {
                Ok((delta, change)) => SweepRun {
                    amplitude: to_f64(a),
                    seed,
                    delta: Some(delta),
                    ratios: change.iter().map(|c| (delta > 0.0).then(|| c / delta)).collect(),
                    edge_change: change,
                    error: None,
                    exit_code: 0,
                },
                Err(e) => SweepRun {
                    amplitude: to_f64(a),
                    seed,
                    delta: None,
                    edge_change: vec![],
                    ratios: vec![None; m],
                    exit_code: e.exit_code(),
                    error: Some(e.to_string()),
                },
            });
        }
    }
    let mut max_ratio = vec![None; m];
    let mut band = vec![None; m];
    for (j, (mx, bd)) in max_ratio.iter_mut().zip(band.iter_mut()).enumerate() {
        let vals: Vec<f64> = runs.iter().filter_map(|r| r.ratios[j]).collect();
        if !vals.is_empty() {
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            *mx = Some(hi);
            *bd = (lo > 0.0).then(|| hi / lo);
        }
    }
    Ok(SweepReport { runs, max_ratio, band })
}
