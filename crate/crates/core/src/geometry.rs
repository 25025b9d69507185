//! Interaction graphs of the two stacked gauge models.
//!
//! Both families share one indexing scheme. A lattice cell is addressed by
//! `(x, y, t)` with `cell = (t * L + y) * L + x`, and every cell carries three
//! spins and three terms, so `index = 3 * cell + orientation`.
//!
//! | family | spin 0            | spin 1               | spin 2                 |
//! |--------|-------------------|----------------------|------------------------|
//! | toric  | xy face (σ_h)     | xt face (σ_v)        | yt face (σ_v)          |
//! | color  | plaquette, slice t| up vertex, gap t+½   | down vertex, gap t+½   |
//!
//! | family | term 0            | term 1               | term 2                 |
//! |--------|-------------------|----------------------|------------------------|
//! | toric  | x edge (qubit)    | y edge (qubit)       | t edge (measurement)   |
//! | color  | up vertex (qubit) | down vertex (qubit)  | plaquette, gap t+½ (measurement) |
//!
//! All three directions are periodic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Toric,
    Color,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Toric => "toric",
            Family::Color => "color",
        }
    }

    pub fn build(self, l: usize, m: usize) -> Result<GaugeModel> {
        match self {
            Family::Toric => build_toric(l, m),
            Family::Color => build_color(l, m),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "toric" => Ok(Family::Toric),
            "color" | "colour" => Ok(Family::Color),
            other => Err(format!("unknown code family '{other}' (expected toric or color)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Qubit,
    Measurement,
}

/// Lattice position of a spin or term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub orientation: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingTerm {
    pub kind: TermKind,
    pub spins: Vec<u32>,
    pub coord: Coord,
}

/// Square patch of cells inside one layer, used for Wilson-loop products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub layer: usize,
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaugeModel {
    family: Family,
    l: usize,
    m: usize,
    num_spins: usize,
    terms: Vec<CouplingTerm>,
    generators: Vec<Vec<u32>>,
}

impl GaugeModel {
    pub fn family(&self) -> Family {
        self.family
    }

    /// Cells per spatial dimension.
    pub fn layer_size(&self) -> usize {
        self.l
    }

    /// Number of time slices.
    pub fn layers(&self) -> usize {
        self.m
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[CouplingTerm] {
        &self.terms
    }

    pub fn generators(&self) -> &[Vec<u32>] {
        &self.generators
    }

    pub fn num_qubit_terms(&self) -> usize {
        2 * self.l * self.l * self.m
    }

    pub fn num_measurement_terms(&self) -> usize {
        self.l * self.l * self.m
    }

    #[inline]
    pub fn cell(&self, x: usize, y: usize, t: usize) -> usize {
        (t * self.l + y) * self.l + x
    }

    pub fn spin_coord(&self, index: usize) -> Coord {
        let cell = index / 3;
        let x = cell % self.l;
        let y = (cell / self.l) % self.l;
        let t = cell / (self.l * self.l);
        Coord {
            x,
            y,
            t,
            orientation: (index % 3) as u8,
        }
    }

    /// Term orientations of one cell that make up a Wilson patch tile.
    ///
    /// Toric: the x-edge term. Color: the up- and down-vertex terms, so every
    /// plaquette strictly inside a patch is covered by all six of its vertices.
    pub fn wilson_orientations(&self) -> &'static [usize] {
        match self.family {
            Family::Toric => &[0],
            Family::Color => &[0, 1],
        }
    }

    /// Term indices covered by `patch`.
    pub fn patch_terms(&self, patch: &Patch) -> Result<Vec<usize>> {
        if patch.size == 0 || patch.size > self.l {
            return Err(Error::InvalidPatch(format!(
                "size {} must lie in 1..={}",
                patch.size, self.l
            )));
        }
        if patch.layer >= self.m {
            return Err(Error::InvalidPatch(format!(
                "layer {} outside 0..{}",
                patch.layer, self.m
            )));
        }
        if patch.x0 >= self.l || patch.y0 >= self.l {
            return Err(Error::InvalidPatch(format!(
                "origin ({}, {}) outside the {}x{} layer",
                patch.x0, patch.y0, self.l, self.l
            )));
        }
        let offsets = self.wilson_orientations();
        let mut out = Vec::with_capacity(patch.size * patch.size * offsets.len());
        for dy in 0..patch.size {
            for dx in 0..patch.size {
                let cell = self.cell((patch.x0 + dx) % self.l, (patch.y0 + dy) % self.l, patch.layer);
                out.extend(offsets.iter().map(|o| 3 * cell + o));
            }
        }
        Ok(out)
    }

    /// Default Wilson patch edge length, `floor(L / 2)`.
    pub fn default_patch_size(&self) -> usize {
        (self.l / 2).max(1)
    }

    /// Checks that every generator flips an even number of spins in every term.
    pub fn generators_preserve_terms(&self) -> bool {
        let mut mark = vec![false; self.num_spins];
        for generator in &self.generators {
            for &s in generator {
                mark[s as usize] = true;
            }
            let ok = self
                .terms
                .iter()
                .all(|term| term.spins.iter().filter(|&&s| mark[s as usize]).count() % 2 == 0);
            for &s in generator {
                mark[s as usize] = false;
            }
            if !ok {
                return false;
            }
        }
        true
    }

    fn validate(self) -> Result<Self> {
        let mut seen = vec![usize::MAX; self.num_spins];
        let mut used = vec![false; self.num_spins];
        for (i, term) in self.terms.iter().enumerate() {
            for &s in &term.spins {
                let s = s as usize;
                if s >= self.num_spins || seen[s] == i {
                    return Err(Error::DegenerateLattice { l: self.l, m: self.m });
                }
                seen[s] = i;
                used[s] = true;
            }
        }
        if used.iter().any(|u| !u) {
            return Err(Error::DegenerateLattice { l: self.l, m: self.m });
        }
        Ok(self)
    }
}

fn check_size(l: usize, m: usize) -> Result<()> {
    if l < 2 || m < 2 {
        return Err(Error::DegenerateLattice { l, m });
    }
    Ok(())
}

struct Indexer {
    l: usize,
    m: usize,
}

impl Indexer {
    fn at(&self, x: isize, y: isize, t: isize, orientation: usize) -> u32 {
        let l = self.l as isize;
        let m = self.m as isize;
        let x = x.rem_euclid(l) as usize;
        let y = y.rem_euclid(l) as usize;
        let t = t.rem_euclid(m) as usize;
        (3 * ((t * self.l + y) * self.l + x) + orientation) as u32
    }
}

/// Stacked toric code: spins on the faces of a periodic `L x L x M` cubic
/// lattice, one term per edge.
pub fn build_toric(l: usize, m: usize) -> Result<GaugeModel> {
    check_size(l, m)?;
    const XY: usize = 0;
    const XT: usize = 1;
    const YT: usize = 2;
    let ix = Indexer { l, m };
    let cells = l * l * m;
    let mut terms = Vec::with_capacity(3 * cells);
    let mut generators = Vec::with_capacity(cells);
    for t in 0..m {
        for y in 0..l {
            for x in 0..l {
                let (xi, yi, ti) = (x as isize, y as isize, t as isize);
                let coord = |orientation| Coord { x, y, t, orientation };
                // x edge: xy faces above/below in y, xt faces before/after in t
                terms.push(CouplingTerm {
                    kind: TermKind::Qubit,
                    spins: vec![
                        ix.at(xi, yi, ti, XY),
                        ix.at(xi, yi - 1, ti, XY),
                        ix.at(xi, yi, ti, XT),
                        ix.at(xi, yi, ti - 1, XT),
                    ],
                    coord: coord(0),
                });
                terms.push(CouplingTerm {
                    kind: TermKind::Qubit,
                    spins: vec![
                        ix.at(xi, yi, ti, XY),
                        ix.at(xi - 1, yi, ti, XY),
                        ix.at(xi, yi, ti, YT),
                        ix.at(xi, yi, ti - 1, YT),
                    ],
                    coord: coord(1),
                });
                terms.push(CouplingTerm {
                    kind: TermKind::Measurement,
                    spins: vec![
                        ix.at(xi, yi, ti, XT),
                        ix.at(xi - 1, yi, ti, XT),
                        ix.at(xi, yi, ti, YT),
                        ix.at(xi, yi - 1, ti, YT),
                    ],
                    coord: coord(2),
                });
                generators.push(vec![
                    ix.at(xi, yi, ti, XY),
                    ix.at(xi, yi, ti + 1, XY),
                    ix.at(xi, yi, ti, XT),
                    ix.at(xi, yi + 1, ti, XT),
                    ix.at(xi, yi, ti, YT),
                    ix.at(xi + 1, yi, ti, YT),
                ]);
            }
        }
    }
    GaugeModel {
        family: Family::Toric,
        l,
        m,
        num_spins: 3 * cells,
        terms,
        generators,
    }
    .validate()
}

/// Stacked color code on a periodic honeycomb with `L x L` hexagonal
/// plaquettes.
///
/// Plaquette centres form a triangular lattice. Up vertex `(i, j)` touches
/// plaquettes `(i, j), (i+1, j), (i, j+1)`; down vertex `(i, j)` touches
/// `(i+1, j), (i, j+1), (i+1, j+1)`.
pub fn build_color(l: usize, m: usize) -> Result<GaugeModel> {
    check_size(l, m)?;
    const PLAQ: usize = 0;
    const UP: usize = 1;
    const DOWN: usize = 2;
    let ix = Indexer { l, m };
    let cells = l * l * m;
    let up_plaquettes = |i: isize, j: isize| [(i, j), (i + 1, j), (i, j + 1)];
    let down_plaquettes = |i: isize, j: isize| [(i + 1, j), (i, j + 1), (i + 1, j + 1)];
    // (dx, dy, orientation) of the six vertices around plaquette (i, j)
    let plaquette_vertices = [
        (0, 0, UP),
        (-1, 0, UP),
        (0, -1, UP),
        (-1, 0, DOWN),
        (0, -1, DOWN),
        (-1, -1, DOWN),
    ];
    let mut terms = Vec::with_capacity(3 * cells);
    let mut generators = Vec::with_capacity(cells);
    for t in 0..m {
        for y in 0..l {
            for x in 0..l {
                let (xi, yi, ti) = (x as isize, y as isize, t as isize);
                let coord = |orientation| Coord { x, y, t, orientation };
                for (orientation, vertex, plaquettes) in [
                    (0u8, UP, up_plaquettes(xi, yi)),
                    (1u8, DOWN, down_plaquettes(xi, yi)),
                ] {
                    let mut spins: Vec<u32> = plaquettes
                        .iter()
                        .map(|&(px, py)| ix.at(px, py, ti, PLAQ))
                        .collect();
                    spins.push(ix.at(xi, yi, ti - 1, vertex));
                    spins.push(ix.at(xi, yi, ti, vertex));
                    terms.push(CouplingTerm {
                        kind: TermKind::Qubit,
                        spins,
                        coord: coord(orientation),
                    });
                }
                let around: Vec<u32> = plaquette_vertices
                    .iter()
                    .map(|&(dx, dy, o)| ix.at(xi + dx, yi + dy, ti, o))
                    .collect();
                terms.push(CouplingTerm {
                    kind: TermKind::Measurement,
                    spins: around.clone(),
                    coord: coord(2),
                });
                let mut generator = vec![ix.at(xi, yi, ti, PLAQ), ix.at(xi, yi, ti + 1, PLAQ)];
                generator.extend(around);
                generators.push(generator);
            }
        }
    }
    GaugeModel {
        family: Family::Color,
        l,
        m,
        num_spins: 3 * cells,
        terms,
        generators,
    }
    .validate()
}

#[derive(Serialize)]
struct GraphExport<'a> {
    format: &'static str,
    version: u32,
    family: Family,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "M")]
    m: usize,
    num_spins: usize,
    spins: Vec<Coord>,
    terms: Vec<TermExport<'a>>,
    generators: &'a [Vec<u32>],
}

#[derive(Serialize)]
struct TermExport<'a> {
    index: usize,
    kind: TermKind,
    spins: &'a [u32],
    coord: Coord,
}

/// Interaction graph as a JSON document for cross-implementation diffing.
pub fn export_json(model: &GaugeModel) -> Result<String> {
    let export = GraphExport {
        format: "ftgauge-graph",
        version: 1,
        family: model.family,
        l: model.l,
        m: model.m,
        num_spins: model.num_spins,
        spins: (0..model.num_spins).map(|i| model.spin_coord(i)).collect(),
        terms: model
            .terms
            .iter()
            .enumerate()
            .map(|(index, term)| TermExport {
                index,
                kind: term.kind,
                spins: &term.spins,
                coord: term.coord,
            })
            .collect(),
        generators: &model.generators,
    };
    Ok(serde_json::to_string_pretty(&export)?)
}
