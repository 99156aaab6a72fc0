//! JSON instance formats.
//!
//! Rationals are `"p/q"` strings (integers may drop the denominator) and
//! coordinates are JSON numbers. A path alphabet is either a list of labels,
//! which places the atoms evenly on `[0, 1]`, or a full space object
//! `{"dim", "atoms": [{"label", "coord"}]}`. Serialization writes the label
//! form whenever it reproduces the space, so every document round-trips.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::control::{ControlModel, CostTable, Objective};
use crate::error::{Error, Result};
use crate::lp::Sense;
use crate::measure::{Atom, Coupling, DiscreteMeasure, FiniteSpace, SpaceRef};
use crate::path::{JointPathLaw, Path, PathMeasure, PathSpace};
use crate::scalar::{format_rational, parse_rational, Rational};
use crate::stopping::RandomizedStoppingTime;

pub fn ser_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

pub fn ser_opt_rational<S: Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&format_rational(r)),
        None => s.serialize_none(),
    }
}

/// A rational on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Q(pub Rational);

impl TryFrom<String> for Q {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        parse_rational(&s).map(Q)
    }
}

impl From<Q> for String {
    fn from(q: Q) -> String {
        format_rational(&q.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub label: String,
    pub coord: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub dim: usize,
    pub atoms: Vec<AtomDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphabetDoc {
    Labels(Vec<String>),
    Space(SpaceDoc),
}

pub fn space_from_doc(doc: &SpaceDoc) -> Result<FiniteSpace> {
    let atoms = doc.atoms.iter().map(|a| Atom::new(a.label.clone(), a.coord.clone())).collect();
    FiniteSpace::new(doc.dim, atoms)
}

pub fn space_to_doc(space: &FiniteSpace) -> SpaceDoc {
    SpaceDoc {
        dim: space.dim(),
        atoms: space
            .atoms()
            .iter()
            .map(|a| AtomDoc { label: a.label.clone(), coord: a.coord.clone() })
            .collect(),
    }
}

pub fn alphabet_from_doc(doc: &AlphabetDoc) -> Result<SpaceRef> {
    Ok(Arc::new(match doc {
        AlphabetDoc::Labels(labels) => FiniteSpace::labelled(labels)?,
        AlphabetDoc::Space(s) => space_from_doc(s)?,
    }))
}

pub fn alphabet_to_doc(space: &FiniteSpace) -> AlphabetDoc {
    let labels: Vec<String> = space.atoms().iter().map(|a| a.label.clone()).collect();
    match FiniteSpace::labelled(&labels) {
        Ok(s) if s == *space => AlphabetDoc::Labels(labels),
        _ => AlphabetDoc::Space(space_to_doc(space)),
    }
}

fn path_space(n: usize, docs: &[AlphabetDoc]) -> Result<PathSpace> {
    let alphabets = match docs.len() {
        1 => vec![alphabet_from_doc(&docs[0])?; n],
        k if k == n => docs.iter().map(alphabet_from_doc).collect::<Result<_>>()?,
        k => return Err(Error::Parse(format!("{k} alphabets for horizon {n}"))),
    };
    PathSpace::new(alphabets)
}

fn path_space_doc(space: &PathSpace) -> Vec<AlphabetDoc> {
    space.alphabets().iter().map(|a| alphabet_to_doc(a)).collect()
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn to_json<T: Serialize>(doc: &T) -> String {
    serde_json::to_string_pretty(doc).expect("documents serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureWeights {
    pub weights: Vec<Q>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub space: SpaceDoc,
    pub measure: MeasureWeights,
}

pub fn parse_measure(text: &str) -> Result<DiscreteMeasure> {
    let doc: MeasureDoc = parse_json(text)?;
    let space = Arc::new(space_from_doc(&doc.space)?);
    DiscreteMeasure::new(space, doc.measure.weights.into_iter().map(|q| q.0).collect())
}

pub fn measure_to_json(mu: &DiscreteMeasure) -> String {
    to_json(&MeasureDoc {
        space: space_to_doc(mu.space()),
        measure: MeasureWeights { weights: mu.weights().iter().cloned().map(Q).collect() },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplets {
    pub triplets: Vec<(usize, usize, Q)>,
}

/// A coupling: `space` indexes rows, `target` indexes columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDoc {
    pub space: SpaceDoc,
    pub target: SpaceDoc,
    pub coupling: Triplets,
}

pub fn parse_coupling(text: &str) -> Result<Coupling> {
    let doc: CouplingDoc = parse_json(text)?;
    Coupling::from_triplets(
        Arc::new(space_from_doc(&doc.space)?),
        Arc::new(space_from_doc(&doc.target)?),
        doc.coupling.triplets.into_iter().map(|(i, j, w)| (i, j, w.0)),
    )
}

pub fn coupling_to_json(p: &Coupling) -> String {
    to_json(&CouplingDoc {
        space: space_to_doc(p.row_space()),
        target: space_to_doc(p.col_space()),
        coupling: Triplets { triplets: p.triplets().into_iter().map(|(i, j, w)| (i, j, Q(w))).collect() },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEntry {
    pub y: Vec<String>,
    pub x: Vec<String>,
    pub w: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLawDoc {
    #[serde(rename = "N")]
    pub n: usize,
    pub y_alphabets: Vec<AlphabetDoc>,
    pub x_alphabets: Vec<AlphabetDoc>,
    pub support: Vec<JointEntry>,
}

pub fn path_law_from_doc(doc: &PathLawDoc) -> Result<JointPathLaw> {
    let ys = path_space(doc.n, &doc.y_alphabets)?;
    let xs = path_space(doc.n, &doc.x_alphabets)?;
    let entries = doc
        .support
        .iter()
        .map(|e| Ok((ys.parse_labels(&e.y)?, xs.parse_labels(&e.x)?, e.w.0.clone())))
        .collect::<Result<Vec<_>>>()?;
    JointPathLaw::new(ys, xs, entries)
}

pub fn path_law_to_doc(j: &JointPathLaw) -> PathLawDoc {
    PathLawDoc {
        n: j.horizon(),
        y_alphabets: path_space_doc(j.y_space()),
        x_alphabets: path_space_doc(j.x_space()),
        support: j
            .support()
            .iter()
            .map(|((y, x), w)| JointEntry {
                y: j.y_space().labels(y),
                x: j.x_space().labels(x),
                w: Q(w.clone()),
            })
            .collect(),
    }
}

pub fn parse_path_law(text: &str) -> Result<JointPathLaw> {
    path_law_from_doc(&parse_json(text)?)
}

pub fn path_law_to_json(j: &JointPathLaw) -> String {
    to_json(&path_law_to_doc(j))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub y: Vec<String>,
    pub w: Q,
}

fn path_measure_from_entries(space: &PathSpace, entries: &[PathEntry]) -> Result<PathMeasure> {
    let parsed = entries
        .iter()
        .map(|e| Ok((space.parse_labels(&e.y)?, e.w.0.clone())))
        .collect::<Result<Vec<_>>>()?;
    PathMeasure::new(space.clone(), parsed)
}

fn path_measure_entries(mu: &PathMeasure) -> Vec<PathEntry> {
    mu.support()
        .iter()
        .map(|(y, w)| PathEntry { y: mu.space().labels(y), w: Q(w.clone()) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub y: Vec<String>,
    /// Probabilities of stopping at `1, ..., N` and never.
    pub p: Vec<Q>,
}

/// A randomized stopping time together with the `Y` law it is checked under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauDoc {
    #[serde(rename = "N")]
    pub n: usize,
    pub y_alphabets: Vec<AlphabetDoc>,
    pub mu: Vec<PathEntry>,
    pub kernel: Vec<KernelRow>,
}

pub fn parse_tau(text: &str) -> Result<(RandomizedStoppingTime, PathMeasure)> {
    let doc: TauDoc = parse_json(text)?;
    let ys = path_space(doc.n, &doc.y_alphabets)?;
    let mu = path_measure_from_entries(&ys, &doc.mu)?;
    let kernel = doc
        .kernel
        .iter()
        .map(|r| Ok((ys.parse_labels(&r.y)?, r.p.iter().map(|q| q.0.clone()).collect())))
        .collect::<Result<BTreeMap<Path, Vec<Rational>>>>()?;
    Ok((RandomizedStoppingTime::new(ys, kernel)?, mu))
}

pub fn tau_to_json(tau: &RandomizedStoppingTime, mu: &PathMeasure) -> String {
    let ys = tau.y_space();
    to_json(&TauDoc {
        n: tau.horizon(),
        y_alphabets: path_space_doc(ys),
        mu: path_measure_entries(mu),
        kernel: tau
            .kernel()
            .iter()
            .map(|(y, row)| KernelRow { y: ys.labels(y), p: row.iter().cloned().map(Q).collect() })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub y: Vec<String>,
    pub x: Vec<String>,
    pub c: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Linear,
    SquareMean,
    MeanVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SenseDoc {
    Min,
    Max,
}

impl From<SenseDoc> for Sense {
    fn from(s: SenseDoc) -> Sense {
        match s {
            SenseDoc::Min => Sense::Min,
            SenseDoc::Max => Sense::Max,
        }
    }
}

impl From<Sense> for SenseDoc {
    fn from(s: Sense) -> SenseDoc {
        match s {
            Sense::Min => SenseDoc::Min,
            Sense::Max => SenseDoc::Max,
        }
    }
}

/// A transport or control model. `nu` optionally fixes the `X` marginal of
/// the causal problem; `objective` defaults to linear and `sense` to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    #[serde(rename = "N")]
    pub n: usize,
    pub y_alphabets: Vec<AlphabetDoc>,
    pub x_alphabets: Vec<AlphabetDoc>,
    pub mu: Vec<PathEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<PathEntry>>,
    pub cost: Vec<CostEntry>,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Q>,
    #[serde(default = "default_sense")]
    pub sense: SenseDoc,
}

fn default_objective() -> ObjectiveKind {
    ObjectiveKind::Linear
}

fn default_sense() -> SenseDoc {
    SenseDoc::Max
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance {
    pub model: ControlModel,
    pub nu: Option<PathMeasure>,
}

pub fn parse_model(text: &str) -> Result<ModelInstance> {
    let doc: ModelDoc = parse_json(text)?;
    let ys = path_space(doc.n, &doc.y_alphabets)?;
    let xs = path_space(doc.n, &doc.x_alphabets)?;
    let mu = path_measure_from_entries(&ys, &doc.mu)?;
    let nu = doc.nu.as_ref().map(|e| path_measure_from_entries(&xs, e)).transpose()?;
    let mut cost = CostTable::default();
    for e in &doc.cost {
        let key = (ys.parse_labels(&e.y)?, xs.parse_labels(&e.x)?);
        if cost.entries.insert(key, e.c.0.clone()).is_some() {
            return Err(Error::Parse(format!("duplicate cost entry for {:?} {:?}", e.y, e.x)));
        }
    }
    cost.entries.retain(|_, c| !num_traits::Zero::is_zero(c));
    let objective = match (doc.objective, doc.lambda) {
        (ObjectiveKind::Linear, None) => Objective::Linear(cost),
        (ObjectiveKind::SquareMean, None) => Objective::SquareMean(cost),
        (ObjectiveKind::MeanVariance, Some(l)) => Objective::MeanVariance { cost, lambda: l.0 },
        (ObjectiveKind::MeanVariance, None) => {
            return Err(Error::Parse("mean_variance needs lambda".into()));
        }
        (_, Some(_)) => return Err(Error::Parse("lambda only applies to mean_variance".into())),
    };
    Ok(ModelInstance {
        model: ControlModel { mu, actions: xs, objective, sense: doc.sense.into() },
        nu,
    })
}

pub fn model_to_json(inst: &ModelInstance) -> String {
    let m = &inst.model;
    let (kind, cost, lambda) = match &m.objective {
        Objective::Linear(c) => (ObjectiveKind::Linear, c, None),
        Objective::SquareMean(c) => (ObjectiveKind::SquareMean, c, None),
        Objective::MeanVariance { cost, lambda } => (ObjectiveKind::MeanVariance, cost, Some(Q(lambda.clone()))),
    };
    let ys = m.mu.space();
    to_json(&ModelDoc {
        n: ys.horizon(),
        y_alphabets: path_space_doc(ys),
        x_alphabets: path_space_doc(&m.actions),
        mu: path_measure_entries(&m.mu),
        nu: inst.nu.as_ref().map(path_measure_entries),
        cost: cost
            .entries
            .iter()
            .map(|((y, x), c)| CostEntry { y: ys.labels(y), x: m.actions.labels(x), c: Q(c.clone()) })
            .collect(),
        objective: kind,
        lambda,
        sense: m.sense.into(),
    })
}

pub fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
