//! JSON scenario files and their translation into library objects.

use fractalflux::geometry::{
    build_two_sided_domain, flat_interface, koch_prefractal_capped, minkowski_prefractal_capped,
    AdmissibilityConstraints, AdmissibilityMode, Family, Point, PolylineInterface, Rect,
    TwoSidedDomain, DEFAULT_MAX_GENERATION,
};
use fractalflux::measure::{hausdorff_like_measure, BoundaryMeasure};
use fractalflux::mesh::{default_mode, triangulate, MeshMode, Side, TwoSidedMesh};
use fractalflux::solver::{InitialCondition, Lambda, LambdaSpec, Source, TransmissionProblem};
use fractalflux::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub measure: MeasureBlock,
    pub problem: ProblemBlock,
    pub mesh: MeshBlock,
    #[serde(default)]
    pub outputs: OutputsBlock,
    #[serde(default)]
    pub admissibility: Option<AdmissibilityBlock>,
    #[serde(default)]
    pub mosco: Option<MoscoBlock>,
    #[serde(default)]
    pub optimize: Option<OptimizeBlock>,
    #[serde(default)]
    pub trace: Option<TraceBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Flat,
    Minkowski,
    Koch,
    Custom,
}

impl FamilyName {
    pub fn family(self) -> Family {
        match self {
            FamilyName::Flat => Family::Flat,
            FamilyName::Minkowski => Family::Minkowski,
            FamilyName::Koch => Family::Koch,
            FamilyName::Custom => Family::Custom,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub family: FamilyName,
    #[serde(default)]
    pub generation: u32,
    /// Checked against the anchor distance when given.
    #[serde(default)]
    pub base_length: Option<f64>,
    /// `[x0, y0, x1, y1]`.
    #[serde(rename = "box", default = "unit_box")]
    pub bounds: [f64; 4],
    /// Defaults to the mid-heights of the two vertical walls.
    #[serde(default)]
    pub anchors: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub confinement: Option<[f64; 4]>,
    #[serde(default)]
    pub max_generation: Option<u32>,
    /// Vertex list of a custom chain.
    #[serde(default)]
    pub vertices: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub closed: bool,
}

fn unit_box() -> [f64; 4] {
    [0.0, 0.0, 1.0, 1.0]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureBlock {
    /// Defaults to the family's similarity dimension.
    #[serde(default)]
    pub d: Option<f64>,
    /// Explicit per-segment weights.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaValue {
    Number(f64),
    Word(String),
}

impl LambdaValue {
    fn lambda(&self) -> Result<Lambda> {
        match self {
            LambdaValue::Number(x) => Ok(Lambda::Finite(*x)),
            LambdaValue::Word(w) if w == "inf" => Ok(Lambda::Infinite),
            LambdaValue::Word(w) => Err(schema(format!("problem.lambda: expected a number or \"inf\", got \"{w}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaField {
    One(LambdaValue),
    PerSegment(Vec<LambdaValue>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    IndicatorPlus,
    /// Constant values `[plus, minus]`.
    Sides([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Zero,
    /// Constant values `[plus, minus]`.
    Sides([f64; 2]),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(rename = "D_plus", default = "one")]
    pub d_plus: f64,
    #[serde(rename = "D_minus", default = "one")]
    pub d_minus: f64,
    pub lambda: LambdaField,
    #[serde(default = "indicator")]
    pub u0: InitialSpec,
    #[serde(default = "zero_source")]
    pub f: SourceSpec,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub theta: f64,
}

fn one() -> f64 {
    1.0
}

fn indicator() -> InitialSpec {
    InitialSpec::IndicatorPlus
}

fn zero_source() -> SourceSpec {
    SourceSpec::Zero
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshModeName {
    Auto,
    Structured,
    Unstructured,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    #[serde(default)]
    pub h: Option<f64>,
    /// `h = shortest segment / h_ratio`.
    #[serde(default)]
    pub h_ratio: Option<f64>,
    #[serde(default = "auto")]
    pub mode: MeshModeName,
}

fn auto() -> MeshModeName {
    MeshModeName::Auto
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Vtk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default = "one_usize")]
    pub snapshot_stride: usize,
    #[serde(default = "csv_only")]
    pub formats: Vec<Format>,
}

impl Default for OutputsBlock {
    fn default() -> Self {
        OutputsBlock {
            directory: None,
            snapshot_stride: 1,
            formats: csv_only(),
        }
    }
}

fn one_usize() -> usize {
    1
}

fn csv_only() -> Vec<Format> {
    vec![Format::Csv]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassName {
    Lipschitz,
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityBlock {
    pub class: ClassName,
    /// Defaults to the plus volume of the built domain.
    #[serde(default)]
    pub volume: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub c_hat: Option<f64>,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub c_d: Option<f64>,
    #[serde(default)]
    pub c_s: Option<f64>,
}

fn default_eps() -> f64 {
    0.01
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoscoBlock {
    pub generations: Vec<u32>,
    /// Defaults to `T / 2`.
    #[serde(default)]
    pub tstar: Option<f64>,
    /// De Gennes fit window `[t_min, t_max]`, applied to the last generation.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeBlock {
    /// Prefractal generations of the geometry family.
    #[serde(default)]
    pub generations: Option<Vec<u32>>,
    /// Interior vertex indices of a custom open chain to perturb.
    #[serde(default)]
    pub moved: Option<Vec<usize>>,
    #[serde(default)]
    pub offsets: Option<Vec<f64>>,
    #[serde(default = "exhaustive")]
    pub method: MethodName,
}

fn exhaustive() -> MethodName {
    MethodName::Exhaustive
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceBlock {
    #[serde(default = "twenty")]
    pub n_random: usize,
    #[serde(default)]
    pub seed: u64,
}

fn twenty() -> usize {
    20
}

pub fn schema(msg: impl Into<String>) -> Error {
    Error::InvalidInput(format!("scenario: {}", msg.into()))
}

impl Scenario {
    /// Parses and validates; serde reports line, column and offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !(p.t_final > 0.0 && p.t_final.is_finite()) {
            return Err(schema("problem.T must be positive"));
        }
        if !(p.dt > 0.0) {
            return Err(schema("problem.dt must be positive"));
        }
        if p.dt > p.t_final {
            return Err(schema(format!("problem.dt = {} exceeds problem.T = {}", p.dt, p.t_final)));
        }
        if !(0.0..=1.0).contains(&p.theta) {
            return Err(schema("problem.theta must lie in [0, 1]"));
        }
        if !(p.d_plus > 0.0 && p.d_minus > 0.0) {
            return Err(schema("problem.D_plus and problem.D_minus must be positive"));
        }
        match (&self.mesh.h, &self.mesh.h_ratio) {
            (Some(h), None) if *h > 0.0 => {}
            (None, Some(r)) if *r > 0.0 => {}
            (Some(_), Some(_)) => return Err(schema("mesh: give either h or h_ratio, not both")),
            _ => return Err(schema("mesh: one positive h or h_ratio is required")),
        }
        let b = self.geometry.bounds;
        if !(b[2] > b[0] && b[3] > b[1]) {
            return Err(schema("geometry.box must be [x0, y0, x1, y1] with x1 > x0 and y1 > y0"));
        }
        if self.geometry.family == FamilyName::Custom && self.geometry.vertices.is_none() {
            return Err(schema("geometry.vertices is required for the custom family"));
        }
        if self.geometry.family != FamilyName::Custom && self.geometry.vertices.is_some() {
            return Err(schema("geometry.vertices only applies to the custom family"));
        }
        if self.outputs.formats.is_empty() {
            return Err(schema("outputs.formats must not be empty"));
        }
        if let Some(m) = &self.mosco {
            if m.generations.is_empty() {
                return Err(schema("mosco.generations must not be empty"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Rect {
        let b = self.geometry.bounds;
        Rect::new(b[0], b[1], b[2], b[3])
    }

    pub fn anchors(&self) -> [Point; 2] {
        let r = self.bounds();
        match self.geometry.anchors {
            Some([a, b]) => [Point::new(a[0], a[1]), Point::new(b[0], b[1])],
            None => {
                let y = 0.5 * (r.min.y + r.max.y);
                [Point::new(r.min.x, y), Point::new(r.max.x, y)]
            }
        }
    }

    pub fn max_generation(&self) -> u32 {
        self.geometry.max_generation.unwrap_or(DEFAULT_MAX_GENERATION)
    }

    /// Chain at the given generation (ignored by flat and custom chains).
    pub fn chain(&self, generation: u32) -> Result<PolylineInterface> {
        let g = &self.geometry;
        let base = self.anchors();
        if let Some(len) = g.base_length {
            let have = base[0].dist(base[1]);
            if (len - have).abs() > 1e-12 * have.max(1.0) {
                return Err(schema(format!(
                    "geometry.base_length = {len} differs from the anchor distance {have}"
                )));
            }
        }
        let cap = self.max_generation();
        match g.family {
            FamilyName::Flat => flat_interface(base),
            FamilyName::Minkowski => minkowski_prefractal_capped(generation, base, cap),
            FamilyName::Koch => koch_prefractal_capped(generation, base, cap),
            FamilyName::Custom => {
                let v = g.vertices.as_ref().expect("validated");
                PolylineInterface::custom(v.iter().map(|p| Point::new(p[0], p[1])).collect(), g.closed)
            }
        }
    }

    pub fn domain(&self, generation: u32) -> Result<TwoSidedDomain> {
        build_two_sided_domain(self.chain(generation)?, self.bounds())
    }

    pub fn exponent(&self) -> f64 {
        self.measure
            .d
            .unwrap_or_else(|| self.geometry.family.family().similarity_dimension())
    }

    pub fn measure_for(&self, chain: Arc<PolylineInterface>) -> Result<BoundaryMeasure> {
        let d = self.exponent();
        match &self.measure.weights {
            Some(w) => BoundaryMeasure::from_weights(chain, w.clone(), d),
            None => hausdorff_like_measure(chain, d),
        }
    }

    pub fn lambda(&self) -> Result<LambdaSpec> {
        Ok(match &self.problem.lambda {
            LambdaField::One(v) => LambdaSpec::Uniform(v.lambda()?),
            LambdaField::PerSegment(v) => LambdaSpec::PerSegment(v.iter().map(LambdaValue::lambda).collect::<Result<_>>()?),
        })
    }

    pub fn problem(&self, measure: BoundaryMeasure) -> Result<TransmissionProblem> {
        let b = &self.problem;
        let mut p = TransmissionProblem::new(measure, self.lambda()?, b.t_final, b.dt);
        p.d_plus = b.d_plus;
        p.d_minus = b.d_minus;
        p.theta = b.theta;
        p.snapshot_stride = self.outputs.snapshot_stride;
        p.u0 = match b.u0 {
            InitialSpec::IndicatorPlus => InitialCondition::IndicatorPlus,
            InitialSpec::Sides([a, c]) => InitialCondition::Custom(Arc::new(move |_, s| if s == Side::Plus { a } else { c })),
        };
        p.f = match b.f {
            SourceSpec::Zero => Source::Zero,
            SourceSpec::Sides([a, c]) => Source::Custom(Arc::new(move |_, _, s| if s == Side::Plus { a } else { c })),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn mesh_size(&self, domain: &TwoSidedDomain) -> f64 {
        match (self.mesh.h, self.mesh.h_ratio) {
            (Some(h), _) => h,
            (None, Some(r)) => domain.interface.min_segment_length() / r,
            _ => unreachable!("validated"),
        }
    }

    pub fn mesh_mode(&self) -> Option<MeshMode> {
        match self.mesh.mode {
            MeshModeName::Auto => None,
            MeshModeName::Structured => Some(MeshMode::StructuredGridAligned),
            MeshModeName::Unstructured => Some(MeshMode::Unstructured),
        }
    }

    pub fn triangulate(&self, domain: &TwoSidedDomain, max_dof: Option<usize>) -> Result<TwoSidedMesh> {
        let h = self.mesh_size(domain);
        if let Some(cap) = max_dof {
            // A structured grid has about (width/h + 1)(height/h + 1) nodes.
            let r = self.bounds();
            let estimate = ((r.width() / h + 1.0) * (r.height() / h + 1.0)) as usize;
            if estimate > cap {
                return Err(Error::ResourceBound {
                    what: "mesh vertices (FRACTALFLUX_MAX_DOF)",
                    requested: estimate,
                    cap,
                });
            }
        }
        let mode = self.mesh_mode().unwrap_or_else(|| default_mode(domain, h));
        let mesh = triangulate(domain, h, mode)?;
        if let Some(cap) = max_dof {
            if mesh.n_vertices() > cap {
                return Err(Error::ResourceBound {
                    what: "mesh vertices (FRACTALFLUX_MAX_DOF)",
                    requested: mesh.n_vertices(),
                    cap,
                });
            }
        }
        Ok(mesh)
    }

    pub fn constraints(&self, domain: &TwoSidedDomain, measure: &BoundaryMeasure) -> Result<AdmissibilityConstraints> {
        let confinement = self.geometry.confinement.map(|b| Rect::new(b[0], b[1], b[2], b[3]));
        let Some(a) = &self.admissibility else {
            // Report the scanned constants without imposing bounds.
            let d = measure.exponent_d;
            return Ok(AdmissibilityConstraints {
                volume: domain.volume_plus,
                confinement,
                eps: default_eps(),
                mode: AdmissibilityMode::Uniform {
                    d,
                    s: d,
                    c_d: f64::INFINITY,
                    c_s: 0.0,
                },
            });
        };
        let mode = match a.class {
            ClassName::Lipschitz => AdmissibilityMode::Lipschitz {
                c_hat: a.c_hat.ok_or_else(|| schema("admissibility.c_hat is required for the Lipschitz class"))?,
            },
            ClassName::Uniform => {
                let need = |v: Option<f64>, k: &str| v.ok_or_else(|| schema(format!("admissibility.{k} is required for the uniform class")));
                AdmissibilityMode::Uniform {
                    d: need(a.d, "d")?,
                    s: need(a.s, "s")?,
                    c_d: need(a.c_d, "c_d")?,
                    c_s: need(a.c_s, "c_s")?,
                }
            }
        };
        Ok(AdmissibilityConstraints {
            volume: a.volume.unwrap_or(domain.volume_plus),
            confinement,
            eps: a.eps,
            mode,
        })
    }
}
