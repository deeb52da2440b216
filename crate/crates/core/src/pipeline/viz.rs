use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchors::{convex_hull, AnchorSet};
use crate::embed::{EmbedMethod, Embedding};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VizFormat {
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VizPoint {
    pub id: usize,
    pub token: String,
    pub coords: Vec<f64>,
    /// Position in the anchor list, for anchors.
    pub anchor_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VizScene {
    pub dim: usize,
    pub method: EmbedMethod,
    pub points: Vec<VizPoint>,
    /// Word ids of the hull vertices, ascending.
    pub hull_vertices: Vec<usize>,
    /// Word-id edges (2-D, counter-clockwise) or outward triangles (3-D).
    pub facets: Vec<Vec<usize>>,
}

impl VizScene {
    /// Hull of the anchor points of `embedding`.
    pub fn new(embedding: &Embedding, anchors: &AnchorSet, tokens: &[String]) -> Result<Self> {
        let dim = embedding.dim();
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDim { dim });
        }
        if tokens.len() != embedding.len() {
            return Err(Error::invalid("token list and embedding differ in length"));
        }
        if anchors.word_ids.iter().any(|&w| w >= embedding.len()) {
            return Err(Error::invalid("anchor outside embedding"));
        }
        let sub = embedding.coords.select(ndarray::Axis(0), &anchors.word_ids);
        let hull = convex_hull(sub.view())?;
        let to_word = |i: &usize| anchors.word_ids[*i];
        let mut hull_vertices: Vec<usize> = hull.vertices.iter().map(to_word).collect();
        hull_vertices.sort_unstable();
        let facets = hull.facets.iter().map(|f| f.iter().map(to_word).collect()).collect();
        let mut rank = vec![None; embedding.len()];
        for (r, &w) in anchors.word_ids.iter().enumerate() {
            rank[w] = Some(r);
        }
        let points = embedding
            .coords
            .rows()
            .into_iter()
            .enumerate()
            .map(|(id, row)| VizPoint {
                id,
                token: tokens[id].clone(),
                coords: row.to_vec(),
                anchor_rank: rank[id],
            })
            .collect();
        Ok(VizScene {
            dim,
            method: embedding.method,
            points,
            hull_vertices,
            facets,
        })
    }
}

pub fn viz_json(scene: &VizScene) -> Result<String> {
    Ok(serde_json::to_string_pretty(scene)?)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

/// Scatter plot with the hull outline and anchor labels. 2-D only.
pub fn viz_svg(scene: &VizScene) -> Result<String> {
    if scene.dim != 2 {
        return Err(Error::UnsupportedDim { dim: scene.dim });
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &scene.points {
        for a in 0..2 {
            lo[a] = lo[a].min(p.coords[a]);
            hi[a] = hi[a].max(p.coords[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let xy = |c: &[f64]| (MARGIN + (c[0] - lo[0]) * scale, SIZE - MARGIN - (c[1] - lo[1]) * scale);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let ring: Vec<String> = scene
        .facets
        .iter()
        .map(|e| {
            let (x, y) = xy(&scene.points[e[0]].coords);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    writeln!(
        s,
        r##"<polygon points="{}" fill="#f3f0e6" stroke="#8a6d3b" stroke-width="1.5"/>"##,
        ring.join(" ")
    )
    .unwrap();
    for p in &scene.points {
        let (x, y) = xy(&p.coords);
        let fill = if p.anchor_rank.is_some() { "#b22222" } else { "#555555" };
        writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{fill}"><title>{}</title></circle>"#,
            escape(&p.token)
        )
        .unwrap();
    }
    for p in scene.points.iter().filter(|p| p.anchor_rank.is_some()) {
        let (x, y) = xy(&p.coords);
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            x + 4.0,
            y - 4.0,
            escape(&p.token)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn viz_export(
    embedding: &Embedding,
    anchors: &AnchorSet,
    tokens: &[String],
    format: VizFormat,
    path: &Path,
) -> Result<VizScene> {
    let scene = VizScene::new(embedding, anchors, tokens)?;
    let text = match format {
        VizFormat::Json => viz_json(&scene)?,
        VizFormat::Svg => viz_svg(&scene)?,
    };
    std::fs::write(path, text)?;
    Ok(scene)
}
