//! File formats and run configuration.
//!
//! Every written file carries a `format` tag and the hash of the configuration that
//! produced it. Files are read and written in f64.

use crate::boundary_inverse::{ContourSettings, InverseSettings};
use crate::charfn::{Bc, BoundaryConditions, SampledCharFn, SpectralFn, ZeroCharFn};
use crate::error::{Error, Result};
use crate::pipeline::{DataSampling, PipelineSettings, Provenance, SpectralData};
use crate::potential::{EdgePotential, TreePotential};
use crate::sampling::CardinalSeries;
use crate::scalar::C;
use crate::transition::SamplingSettings;
use crate::tree::{hex_digest, MetricTree, TreeSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

pub const SPECTRAL_FORMAT: &str = "qtree-spectral/1";
pub const REPORT_FORMAT: &str = "qtree-report/1";
pub const CONFIG_FORMAT: &str = "qtree-config/1";

/// Resolutions, tolerances and caps for every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cells per edge of recovered potentials.
    pub edge_cells: usize,
    /// Reconstruction x-grid cells per edge.
    pub x_cells: usize,
    /// Contour half-width S_max.
    pub s_max: f64,
    pub tau0: f64,
    pub tau_cap: f64,
    pub oversampling: f64,
    pub t_nodes_per_unit: f64,
    pub residual_tol: f64,
    /// Largest share of contour mass allowed in |s| > 0.9 S_max.
    pub gate_tail: f64,
    /// Largest outer-tail share allowed in sampled input blocks.
    pub data_gate: f64,
    pub transition_start: usize,
    pub transition_cap: usize,
    pub transition_tail: f64,
    /// Sampling line and truncation of spectral-data files.
    pub data_tau: f64,
    pub data_start: usize,
    pub data_cap: usize,
    pub data_tail: f64,
    pub distance_r0: f64,
    pub distance_cap: f64,
    pub distance_tail: f64,
    pub identity_tol: f64,
    pub kernel_cells: usize,
    pub kernel_depth: usize,
    pub kernel_tol: f64,
    /// Real-axis plotting grid: ρ in [0, real_max] with step real_step.
    pub real_max: f64,
    pub real_step: f64,
    pub seed: u64,
    pub dense: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            edge_cells: 256,
            x_cells: 64,
            s_max: 100.0,
            tau0: 0.5,
            tau_cap: 16.0,
            oversampling: 1.0,
            t_nodes_per_unit: 0.7,
            residual_tol: 1e-8,
            gate_tail: 0.02,
            data_gate: 1e-3,
            transition_start: 64,
            transition_cap: 2048,
            transition_tail: 1e-8,
            data_tau: 0.5,
            data_start: 256,
            data_cap: 4096,
            data_tail: 1e-12,
            distance_r0: 50.0,
            distance_cap: 800.0,
            distance_tail: 1e-6,
            identity_tol: 1e-8,
            kernel_cells: 256,
            kernel_depth: 16,
            kernel_tol: 1e-10,
            real_max: 50.0,
            real_step: 0.25,
            seed: 0,
            dense: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)
            .map_err(|e| Error::input(format!("config line {}: {e}", e.line())))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s_max", self.s_max),
            ("tau0", self.tau0),
            ("tau_cap", self.tau_cap),
            ("oversampling", self.oversampling),
            ("t_nodes_per_unit", self.t_nodes_per_unit),
            ("residual_tol", self.residual_tol),
            ("gate_tail", self.gate_tail),
            ("data_gate", self.data_gate),
            ("transition_tail", self.transition_tail),
            ("data_tau", self.data_tau),
            ("data_tail", self.data_tail),
            ("distance_r0", self.distance_r0),
            ("distance_cap", self.distance_cap),
            ("distance_tail", self.distance_tail),
            ("identity_tol", self.identity_tol),
            ("kernel_tol", self.kernel_tol),
            ("real_max", self.real_max),
            ("real_step", self.real_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::input(format!("config: {name} must be positive and finite, got {v}")));
            }
        }
        let minima = [
            ("edge_cells", self.edge_cells, 8),
            ("x_cells", self.x_cells, 8),
            ("transition_start", self.transition_start, 4),
            ("transition_cap", self.transition_cap, self.transition_start),
            ("data_start", self.data_start, 4),
            ("data_cap", self.data_cap, self.data_start),
            ("kernel_cells", self.kernel_cells, 8),
            ("kernel_depth", self.kernel_depth, 1),
        ];
        for (name, v, lo) in minima {
            if v < lo {
                return Err(Error::input(format!("config: {name} = {v} is below the minimum {lo}")));
            }
        }
        if self.tau_cap < self.tau0 {
            return Err(Error::input("config: tau_cap must be at least tau0"));
        }
        Ok(())
    }

    /// Twice the resolution in every grid and in the contour extent.
    pub fn refined(&self) -> Self {
        Self { edge_cells: 2 * self.edge_cells, x_cells: 2 * self.x_cells, s_max: 2.0 * self.s_max, ..self.clone() }
    }

    pub fn hash(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn pipeline(&self) -> PipelineSettings<f64> {
        PipelineSettings {
            inverse: InverseSettings {
                contour: ContourSettings {
                    tau0: self.tau0,
                    tau_cap: self.tau_cap,
                    s_max: self.s_max,
                    oversampling: self.oversampling,
                },
                x_cells: self.x_cells,
                edge_cells: self.edge_cells,
                t_nodes_per_unit: self.t_nodes_per_unit,
                gate_tail: self.gate_tail,
                residual_tol: self.residual_tol,
                dense: self.dense,
            },
            transition: SamplingSettings {
                start: self.transition_start,
                cap: self.transition_cap,
                tail_tol: self.transition_tail,
                gate_tail: self.gate_tail,
            },
            distance_r0: self.distance_r0,
            distance_cap: self.distance_cap,
            distance_tail: self.distance_tail,
            data_gate: self.data_gate,
        }
    }

    pub fn data_sampling(&self) -> DataSampling<f64> {
        DataSampling { tau: self.data_tau, start: self.data_start, cap: self.data_cap, tail_tol: self.data_tail }
    }
}

/// Line (1-based) of the `index`-th element of the top-level array under `key`.
fn locate_element(text: &str, key: &str, index: usize) -> Option<usize> {
    let pat = format!("\"{key}\"");
    let start = text.find(&pat)? + pat.len();
    let bytes = text.as_bytes();
    let mut i = start + text[start..].find('[')? + 1;
    let mut depth = 0usize;
    let mut count = 0usize;
    let mut in_str = false;
    let mut elem_start = None;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if in_str {
            if c == '\\' {
                i += 1;
            } else if c == '"' {
                in_str = false;
            }
        } else {
            match c {
                '"' => in_str = true,
                '[' | '{' => depth += 1,
                ']' | '}' if depth == 0 => break,
                ']' | '}' => depth -= 1,
                ',' if depth == 0 => {
                    count += 1;
                    elem_start = None;
                    i += 1;
                    continue;
                }
                _ => {}
            }
            if !c.is_whitespace() && elem_start.is_none() && count == index {
                elem_start = Some(i);
                break;
            }
        }
        i += 1;
    }
    elem_start.map(|p| text[..p].matches('\n').count() + 1)
}

fn key_line(text: &str, key: &str) -> usize {
    text.find(&format!("\"{key}\"")).map_or(1, |p| text[..p].matches('\n').count() + 1)
}

/// Parses and validates a tree file; every failure names a line.
pub fn parse_tree(text: &str) -> Result<MetricTree<f64>> {
    let spec: TreeSpec = serde_json::from_str(text)
        .map_err(|e| Error::input(format!("tree file line {}, column {}: {e}", e.line(), e.column())))?;
    let at = |key: &str, j: usize| locate_element(text, key, j).unwrap_or_else(|| key_line(text, key));
    if spec.parents.len() != spec.m {
        return Err(Error::input(format!(
            "tree file line {}: m = {} but {} parents listed",
            key_line(text, "parents"),
            spec.m,
            spec.parents.len()
        )));
    }
    if spec.lengths.len() != spec.m {
        return Err(Error::input(format!(
            "tree file line {}: m = {} but {} lengths listed",
            key_line(text, "lengths"),
            spec.m,
            spec.lengths.len()
        )));
    }
    for (j, &l) in spec.lengths.iter().enumerate() {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::input(format!(
                "tree file line {}: edge e{} has non-positive length {l}",
                at("lengths", j),
                j + 1
            )));
        }
    }
    for (j, &p) in spec.parents.iter().enumerate() {
        if p == 0 || p > spec.m + 1 {
            return Err(Error::input(format!(
                "tree file line {}: orphan vertex, edge e{} points to nonexistent parent v{p}",
                at("parents", j),
                j + 1
            )));
        }
    }
    MetricTree::from_spec(&spec).map_err(|e| {
        let msg = e.to_string();
        // Anchor structural errors on the first edge they name.
        let line = msg
            .split(|c: char| !c.is_alphanumeric())
            .find_map(|w| w.strip_prefix('e').or_else(|| w.strip_prefix('v')).and_then(|d| d.parse::<usize>().ok()))
            .filter(|&j| j >= 1 && j <= spec.m)
            .map_or_else(|| key_line(text, "parents"), |j| at("parents", j - 1));
        Error::input(format!("tree file line {line}: {msg}"))
    })
}

pub fn tree_to_json(tree: &MetricTree<f64>) -> String {
    serde_json::to_string_pretty(&tree.to_spec()).expect("tree serializes")
}

/// Reads `edge_index,x,re_sigma,im_sigma` rows; each edge block must sit on a uniform grid
/// from 0 to T_j and be sorted by x.
pub fn read_potential(text: &str, tree: &MetricTree<f64>) -> Result<TreePotential<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::input(format!("potential file: {e}")))?.clone();
    let want = ["edge_index", "x", "re_sigma", "im_sigma"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::input(format!("potential file line 1: header must be {}", want.join(","))));
    }
    let mut blocks: BTreeMap<usize, Vec<(f64, C<f64>)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::input(format!("potential file: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::input(format!("potential file line {line}: cannot read {} = {:?}", want[i], field(i))))
        };
        let j: usize = field(0)
            .parse()
            .map_err(|_| Error::input(format!("potential file line {line}: bad edge index {:?}", field(0))))?;
        if j == 0 || j > tree.m() {
            return Err(Error::input(format!("potential file line {line}: edge e{j} is not in the tree")));
        }
        let (x, re, im) = (num(1)?, num(2)?, num(3)?);
        let block = blocks.entry(j).or_default();
        if let Some(&(prev, _)) = block.last() {
            if !(x > prev) {
                return Err(Error::input(format!("potential file line {line}: x must increase within edge e{j}")));
            }
        }
        block.push((x, C::new(re, im)));
    }
    let mut edges = Vec::with_capacity(tree.m());
    for j in 1..=tree.m() {
        let block = blocks.remove(&j).ok_or_else(|| Error::input(format!("potential file: edge e{j} missing")))?;
        let len = tree.length(j);
        let n = block.len().saturating_sub(1).max(1);
        let h = len / n as f64;
        for (i, &(x, _)) in block.iter().enumerate() {
            if (x - h * i as f64).abs() > 1e-9 * len.max(1.0) {
                return Err(Error::input(format!(
                    "potential file: edge e{j} sample {i} at x = {x} is off the uniform grid of step {h}"
                )));
            }
        }
        edges.push(EdgePotential::new(j, len, block.into_iter().map(|(_, v)| v).collect())?);
    }
    TreePotential::new(tree, edges)
}

pub fn write_potential(pot: &TreePotential<f64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["edge_index", "x", "re_sigma", "im_sigma"]).expect("in-memory write");
    for e in pot.edges() {
        for (i, v) in e.values().iter().enumerate() {
            w.write_record(&[e.edge().to_string(), format!("{:.12e}", e.node(i)), format!("{:.17e}", v.re), format!("{:.17e}", v.im)])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcTag {
    pub vertex: usize,
    pub condition: Bc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealGrid {
    pub rho: Vec<f64>,
    /// ρ^{d−1} Δ(ρ²) on the grid.
    pub weighted: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaBlock {
    /// None for Δ, Some(k) for Δ_k.
    pub vertex: Option<usize>,
    pub bc: Vec<BcTag>,
    pub b: usize,
    pub d: usize,
    pub length: f64,
    pub tau: f64,
    pub n_min: i64,
    pub kappa: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<[f64; 2]>,
    pub real_grid: RealGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFile {
    pub format: String,
    pub config_hash: String,
    pub tree_hash: String,
    pub provenance: Provenance,
    pub tree: TreeSpec,
    pub blocks: Vec<KappaBlock>,
}

fn pair(z: C<f64>) -> [f64; 2] {
    [z.re, z.im]
}

/// Serializable form of sampled data; blocks that are not yet sampled are sampled here.
pub fn spectral_file(data: &SpectralData<f64>, config: &RunConfig) -> Result<SpectralFile> {
    let steps = (config.real_max / config.real_step).floor() as usize;
    let rho: Vec<f64> = (0..=steps).map(|i| i as f64 * config.real_step).collect();
    let mut blocks = Vec::new();
    for (k, f) in data.blocks() {
        let owned;
        let s = match f.as_any_sampled() {
            Some(s) => s,
            None => {
                owned = crate::pipeline::sample_block(f.as_ref(), &config.data_sampling()).0;
                &owned
            }
        };
        let zero = s.zero_form();
        let bc = zero
            .view()
            .boundary_vertices()
            .into_iter()
            .map(|v| BcTag { vertex: v, condition: zero.bc().at(v) })
            .collect();
        let meta = s.meta();
        let weighted = rho
            .iter()
            .map(|&r| pair(s.at_rho(C::new(r, 0.0)) * crate::charfn::weight_for(s, C::new(r, 0.0))))
            .collect();
        let series = s.series();
        blocks.push(KappaBlock {
            vertex: k,
            bc,
            b: meta.b,
            d: meta.d,
            length: meta.total_length,
            tau: series.tau,
            n_min: series.n_min,
            kappa: series.samples.iter().map(|&z| pair(z)).collect(),
            constant: s.constant().map(pair),
            real_grid: RealGrid { rho: rho.clone(), weighted },
        });
    }
    Ok(SpectralFile {
        format: SPECTRAL_FORMAT.into(),
        config_hash: config.hash(),
        tree_hash: data.tree.hash(),
        provenance: data.provenance,
        tree: data.tree.to_spec(),
        blocks,
    })
}

/// Rebuilds sampled data on `tree`; the tree must match the file's hash.
pub fn load_spectral(text: &str, tree: &Arc<MetricTree<f64>>) -> Result<SpectralData<f64>> {
    let file: SpectralFile = serde_json::from_str(text)
        .map_err(|e| Error::input(format!("spectral file line {}, column {}: {e}", e.line(), e.column())))?;
    if file.format != SPECTRAL_FORMAT {
        return Err(Error::input(format!("spectral file: unsupported format {:?}, expected {SPECTRAL_FORMAT}", file.format)));
    }
    if file.tree_hash != tree.hash() {
        return Err(Error::input("spectral file was produced for a different tree (hash mismatch)"));
    }
    let full = tree.full();
    let mut delta = None;
    let mut delta_k = BTreeMap::new();
    for (i, b) in file.blocks.iter().enumerate() {
        let neumann: Vec<usize> =
            b.bc.iter().filter(|t| t.condition == Bc::Neumann).map(|t| t.vertex).collect();
        let expected = match b.vertex {
            None => vec![],
            Some(k) => vec![k],
        };
        if neumann != expected {
            return Err(Error::input(format!("spectral file block {i}: boundary tags do not match its vertex")));
        }
        if b.kappa.is_empty() || !(b.tau > 0.0) || (b.length - full.total_length(tree)).abs() > 1e-9 * b.length.max(1.0) {
            return Err(Error::input(format!("spectral file block {i}: empty samples or inconsistent τ/length")));
        }
        let zero = ZeroCharFn::new(tree.clone(), full.clone(), BoundaryConditions::with_neumann(neumann));
        if zero.meta().b != b.b || zero.meta().d != b.d {
            return Err(Error::input(format!("spectral file block {i}: degree metadata disagree with the tree")));
        }
        let series = CardinalSeries {
            length: b.length,
            tau: b.tau,
            n_min: b.n_min,
            samples: b.kappa.iter().map(|p| C::new(p[0], p[1])).collect(),
        };
        let f: Arc<dyn SpectralFn<f64>> =
            Arc::new(SampledCharFn::new(zero, series, b.constant.map(|p| C::new(p[0], p[1]))));
        match b.vertex {
            None if delta.is_none() => delta = Some(f),
            None => return Err(Error::input("spectral file: more than one Δ block")),
            Some(k) => {
                if delta_k.insert(k, f).is_some() {
                    return Err(Error::input(format!("spectral file: duplicate Δ_{k} block")));
                }
            }
        }
    }
    let data = SpectralData {
        tree: tree.clone(),
        delta: delta.ok_or_else(|| Error::input("spectral file: Δ block missing"))?,
        delta_k,
        provenance: Provenance::ExternalFile,
    };
    data.validate()?;
    Ok(data)
}

/// Wraps a payload with the format tag and hashes.
#[derive(Clone, Debug, Serialize)]
pub struct Report<P: Serialize> {
    pub format: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub tree_hash: String,
    pub config: RunConfig,
    #[serde(flatten)]
    pub payload: P,
}

impl<P: Serialize> Report<P> {
    pub fn new(command: &'static str, config: &RunConfig, tree: &MetricTree<f64>, payload: P) -> Self {
        Self { format: REPORT_FORMAT, command, config_hash: config.hash(), tree_hash: tree.hash(), config: config.clone(), payload }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `# format=…, config=…` header line for CSV outputs.
pub fn csv_banner(kind: &str, config: &RunConfig) -> String {
    format!("# format=qtree-{kind}/1 config_hash={}\n", config.hash())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = "{\n  \"m\": 6,\n  \"parents\": [6, 5, 5, 5, 6, 7],\n  \"lengths\": [\n    1.0,\n    1.0,\n    -0.5,\n    1.0,\n    1.0,\n    1.0\n  ]\n}\n";

    #[test]
    fn bad_length_names_edge_and_line() {
        let e = parse_tree(FIG1).unwrap_err().to_string();
        assert!(e.contains("line 7") && e.contains("e3"), "{e}");
        assert_eq!(parse_tree(FIG1).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn cycle_is_reported_with_a_line() {
        let t = "{\"m\": 6,\n\"parents\": [6, 5, 5, 5, 3, 7],\n\"lengths\": [1,1,1,1,1,1]}";
        let e = parse_tree(t).unwrap_err().to_string();
        assert!(e.contains("cycle detected") && e.contains("line 2"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_tree("{\"m\": 1,\n\"parents\": [2,\n}").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
    }

    #[test]
    fn potential_csv_round_trip() {
        let tree = parse_tree("{\"m\":1,\"parents\":[2],\"lengths\":[1.5]}").unwrap();
        let p = TreePotential::from_fn(&tree, 16, |_, x| C::new(x.sin(), 0.25 * x));
        let back = read_potential(&write_potential(&p), &tree).unwrap();
        assert_eq!(back.edges()[0].values(), p.edges()[0].values());
    }

    #[test]
    fn potential_csv_rejects_missing_header() {
        let tree = parse_tree("{\"m\":1,\"parents\":[2],\"lengths\":[1]}").unwrap();
        let e = read_potential("1,0,0,0\n", &tree).unwrap_err().to_string();
        assert!(e.contains("header"), "{e}");
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(RunConfig::from_json("{\"gate_tail\": -1}").is_err());
        assert!(RunConfig::from_json("{\"x_cells\": 2}").is_err());
        assert!(RunConfig::from_json("{\"unknown\": 2}").is_err());
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }
}
