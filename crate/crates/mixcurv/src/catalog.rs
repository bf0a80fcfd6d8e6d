//! Scenario catalog: JSON descriptions of charts, metrics, splittings,
//! maps, and the facts each geometry is expected to reproduce. The
//! shipped scenarios are embedded at build time; more can be loaded
//! from a directory at run time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::almost_product::AlmostProductStructure;
use crate::error::{GeomError, Result};
use crate::expr::{parse_expr, ScalarExpr};
use crate::geometry::{Chart, MetricField, VectorField};
use crate::maps::{kernel_structure, projector_gap, SmoothMap};

/// Agreement required between a declared span and the kernel of a
/// declared map when a scenario provides both.
pub const CROSS_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartSpec {
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub periodic: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionSpec {
    /// "vertical" or "horizontal": which distribution the span fields
    /// generate.
    pub role: String,
    pub span: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpec {
    pub target_dim: usize,
    pub components: Vec<String>,
    /// Metric on the target in target coordinates; identity when
    /// omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_metric: Option<Vec<Vec<String>>>,
}

/// One fact the scenario is expected to reproduce. Exactly one of
/// `value`, `outcome`, or a standalone `field` comparison must be
/// present; integral quantities may pair a `value` with the `field`
/// they integrate, and annulus quotients carry a `radius`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedFact {
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub provenance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub description: String,
    pub chart: ChartSpec,
    pub metric: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_bar: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(default)]
    pub expected: Vec<ExpectedFact>,
}

/// A fully built scenario: parsed expression trees, validated metric,
/// splitting and map objects ready for evaluation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub metric: MetricField,
    pub metric_bar: Option<MetricField>,
    pub structure: Option<AlmostProductStructure>,
    pub map: Option<SmoothMap>,
    /// Target metric entries in target coordinates (identity unless
    /// the map declares one).
    pub target_metric: Option<Vec<Vec<ScalarExpr>>>,
    pub sigma: Option<ScalarExpr>,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.spec.name
    }
}

const BUILTIN: [(&str, &str); 8] = [
    ("contact_T3", include_str!("../scenarios/contact_T3.json")),
    (
        "double_twisted_T2",
        include_str!("../scenarios/double_twisted_T2.json"),
    ),
    (
        "euclidean_foliation",
        include_str!("../scenarios/euclidean_foliation.json"),
    ),
    (
        "gnomonic_projective_pair",
        include_str!("../scenarios/gnomonic_projective_pair.json"),
    ),
    (
        "hyperbolic_conformal_pair",
        include_str!("../scenarios/hyperbolic_conformal_pair.json"),
    ),
    ("product_T2", include_str!("../scenarios/product_T2.json")),
    (
        "sphere_latitude_submersion",
        include_str!("../scenarios/sphere_latitude_submersion.json"),
    ),
    (
        "warped_torus",
        include_str!("../scenarios/warped_torus.json"),
    ),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

pub fn load_builtin(name: &str) -> Result<Scenario> {
    let json = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, j)| *j)
        .ok_or_else(|| GeomError::UnknownScenario {
            name: name.to_string(),
        })?;
    parse_scenario(json)
}

pub fn all_builtin() -> Result<Vec<Scenario>> {
    BUILTIN.iter().map(|(_, j)| parse_scenario(j)).collect()
}

/// Parse and fully build a scenario from its JSON text.
pub fn parse_scenario(json: &str) -> Result<Scenario> {
    let spec: ScenarioSpec = serde_json::from_str(json).map_err(|e| GeomError::ParseError {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    build(spec)
}

pub fn load_file(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GeomError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Load every *.json scenario in a directory, in file-name order.
pub fn load_dir(path: &Path) -> Result<Vec<Scenario>> {
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| GeomError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files.iter().map(|f| load_file(f)).collect()
}

fn parse_matrix(entries: &[Vec<String>], dim: usize, label: &str) -> Result<Vec<Vec<ScalarExpr>>> {
    if entries.len() != dim || entries.iter().any(|row| row.len() != dim) {
        return Err(GeomError::InvalidConfig(format!(
            "{label} must be a {dim}x{dim} matrix of expressions"
        )));
    }
    entries
        .iter()
        .map(|row| row.iter().map(|e| parse_expr(e)).collect())
        .collect()
}

/// Points used for the build-time sanity sweep: chart center plus a
/// coarse grid.
fn validation_points(chart: &Chart) -> Vec<Vec<f64>> {
    let mut pts = vec![chart.center()];
    pts.extend(chart.grid(3));
    pts
}

fn build(spec: ScenarioSpec) -> Result<Scenario> {
    let chart_spec = &spec.chart;
    if chart_spec.bounds.len() != chart_spec.dim || chart_spec.periodic.len() != chart_spec.dim {
        return Err(GeomError::InvalidConfig(format!(
            "scenario {}: chart bounds/periodic length must equal dim",
            spec.name
        )));
    }
    let chart = Chart::new(chart_spec.bounds.clone(), chart_spec.periodic.clone())?;
    let dim = chart.dim;
    let metric = MetricField::new(chart.clone(), parse_matrix(&spec.metric, dim, "metric")?)?;
    let points = validation_points(&chart);
    for p in &points {
        metric.eval(p)?;
    }
    metric.check_periodicity(4)?;

    let metric_bar = match &spec.metric_bar {
        Some(entries) => {
            let m = MetricField::new(chart.clone(), parse_matrix(entries, dim, "metric_bar")?)?;
            for p in &points {
                m.eval(p)?;
            }
            m.check_periodicity(4)?;
            Some(m)
        }
        None => None,
    };

    let span_structure = match &spec.distribution {
        Some(d) => {
            let fields: Vec<VectorField> = d
                .span
                .iter()
                .map(|comps| {
                    let parsed: Result<Vec<ScalarExpr>> =
                        comps.iter().map(|c| parse_expr(c)).collect();
                    Ok(VectorField::new(parsed?))
                })
                .collect::<Result<_>>()?;
            let s = match d.role.as_str() {
                "vertical" => AlmostProductStructure::from_span(metric.clone(), fields)?,
                "horizontal" => {
                    AlmostProductStructure::from_horizontal_span(metric.clone(), fields)?
                }
                other => {
                    return Err(GeomError::InvalidConfig(format!(
                        "scenario {}: unknown distribution role {other:?}",
                        spec.name
                    )))
                }
            };
            for p in &points {
                s.validate_at(p)?;
            }
            Some(s)
        }
        None => None,
    };

    let (map, target_metric) = match &spec.map {
        Some(m) => {
            let comps: Vec<ScalarExpr> = m
                .components
                .iter()
                .map(|c| parse_expr(c))
                .collect::<Result<_>>()?;
            let f = SmoothMap::new(dim, comps)?;
            if f.target_dim != m.target_dim {
                return Err(GeomError::InvalidConfig(format!(
                    "scenario {}: map declares target_dim {} but has {} components",
                    spec.name, m.target_dim, f.target_dim
                )));
            }
            let tm = match &m.target_metric {
                Some(entries) => parse_matrix(entries, m.target_dim, "target_metric")?,
                None => (0..m.target_dim)
                    .map(|i| {
                        (0..m.target_dim)
                            .map(|j| {
                                if i == j {
                                    ScalarExpr::one()
                                } else {
                                    ScalarExpr::zero()
                                }
                            })
                            .collect()
                    })
                    .collect(),
            };
            (Some(f), Some(tm))
        }
        None => (None, None),
    };

    // The splitting a map induces: its kernel is vertical. Used as the
    // scenario structure when no span is declared, and as a
    // consistency check against the span when one is.
    let structure = match (&span_structure, &map) {
        (Some(s), Some(f)) => {
            let from_kernel = kernel_structure(metric.clone(), f)?;
            for p in &points {
                let gap = projector_gap(s, &from_kernel, p)?;
                if gap > CROSS_CHECK_TOL {
                    return Err(GeomError::InvalidConfig(format!(
                        "scenario {}: declared span disagrees with the map kernel \
                         (projector gap {gap:.3e} at {p:?})",
                        spec.name
                    )));
                }
            }
            span_structure
        }
        (None, Some(f)) => Some(kernel_structure(metric.clone(), f)?),
        (s, None) => s.clone(),
    };

    let sigma = match &spec.sigma {
        Some(text) => {
            let s = parse_expr(text)?;
            if let Some(axis) = s.max_coord() {
                if axis >= dim {
                    return Err(GeomError::CoordinateOutOfRange { axis, dim });
                }
            }
            Some(s)
        }
        None => None,
    };

    for fact in &spec.expected {
        validate_fact(&spec.name, dim, fact)?;
    }

    Ok(Scenario {
        spec,
        metric,
        metric_bar,
        structure,
        map,
        target_metric,
        sigma,
    })
}

fn validate_fact(scenario: &str, dim: usize, fact: &ExpectedFact) -> Result<()> {
    let bad = |msg: String| {
        Err(GeomError::InvalidConfig(format!(
            "scenario {scenario}: {msg}"
        )))
    };
    let q = &fact.quantity;
    if fact.outcome.is_some() {
        if fact.value.is_some() || fact.field.is_some() || fact.tol.is_some() {
            return bad(format!(
                "fact {q}: outcome facts carry no value, field or tol"
            ));
        }
    } else if fact.value.is_some() || fact.field.is_some() {
        if fact.tol.is_none() {
            return bad(format!("fact {q}: numeric facts need a tol"));
        }
    } else {
        return bad(format!("fact {q}: needs one of value, field, outcome"));
    }
    if let Some(at) = &fact.at {
        if at.len() != dim {
            return bad(format!(
                "fact {q}: 'at' has length {}, chart dim is {dim}",
                at.len()
            ));
        }
    }
    if let Some(field) = &fact.field {
        if field.len() != dim {
            return bad(format!(
                "fact {q}: field has {} components, chart dim is {dim}",
                field.len()
            ));
        }
        for c in field {
            parse_expr(c)?;
        }
    }
    if let Some(r) = fact.radius {
        if r <= 0.0 {
            return bad(format!("fact {q}: radius must be positive"));
        }
        if q != "karp_quotient" {
            return bad(format!("fact {q}: only annulus quotients take a radius"));
        }
    }
    Ok(())
}
