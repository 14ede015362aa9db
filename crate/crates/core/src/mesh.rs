//! Tensor-grid discretization of the anode | separator | cathode sandwich.
//!
//! Cells are ordered row-major (`iy * nx + ix`), so in 1D the ordering along
//! the axis is the anode block, then the separator block, then the cathode
//! block. The solid-phase potential lives on the electrode cells only; it
//! shares the global face list and sees the electrode/separator faces as
//! zero-flux boundaries.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Anode,
    Separator,
    Cathode,
}

impl Region {
    pub fn is_electrode(self) -> bool {
        !matches!(self, Region::Separator)
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Anode => "anode",
            Region::Separator => "separator",
            Region::Cathode => "cathode",
        }
    }
}

/// A measurable union of regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Region(Region),
    /// Anode and cathode together.
    Electrodes,
    Whole,
}

impl Domain {
    pub fn contains(self, region: Region) -> bool {
        match self {
            Domain::Region(r) => r == region,
            Domain::Electrodes => region.is_electrode(),
            Domain::Whole => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// External contact of the anode.
    AnodeContact,
    /// External contact of the cathode.
    CathodeContact,
    Insulated,
    /// Internal face between an electrode and the separator.
    SeparatorInterface,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub centroid: [f64; 2],
    pub measure: f64,
    pub region: Region,
    pub ix: usize,
    pub iy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceCells {
    /// Normal points from `owner` to `neighbour`.
    Interior { owner: usize, neighbour: usize },
    /// Normal points out of the domain.
    Boundary { cell: usize },
}

#[derive(Debug, Clone)]
pub struct Face {
    pub cells: FaceCells,
    pub measure: f64,
    pub normal: [f64; 2],
    pub centroid: [f64; 2],
    /// Set on every boundary face and on electrode/separator interfaces.
    pub tag: Option<BoundaryTag>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        matches!(self.cells, FaceCells::Boundary { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dimension: usize,
    lengths: [f64; 3],
    width: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Cell>,
    faces: Vec<Face>,
    cell_faces: Vec<Vec<usize>>,
    electrode_cells: Vec<usize>,
    solid_index: Vec<Option<usize>>,
}

/// Optional second dimension: extent and cell count along y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Width {
    pub extent: f64,
    pub cells: usize,
}

fn check_length(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive")))
    }
}

fn check_count(name: &str, value: usize) -> Result<()> {
    if value > 0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive")))
    }
}

/// Builds the layered anode/separator/cathode mesh with uniform cells per region.
pub fn build_sandwich_mesh(
    lengths: [f64; 3],
    cells: [usize; 3],
    width: Option<Width>,
) -> Result<Mesh> {
    for (name, value) in ["L_a", "L_s", "L_c"].iter().zip(lengths) {
        check_length(name, value)?;
    }
    for (name, value) in ["n_a", "n_s", "n_c"].iter().zip(cells) {
        check_count(name, value)?;
    }
    if let Some(w) = width {
        check_length("width", w.extent)?;
        check_count("cells_y", w.cells)?;
    }

    let (dimension, extent_y, ny) = match width {
        Some(w) => (2, w.extent, w.cells),
        None => (1, 1.0, 1),
    };
    let nx: usize = cells.iter().sum();
    let dy = extent_y / ny as f64;

    // x coordinates of the vertical faces and the region of each column
    let mut xs = Vec::with_capacity(nx + 1);
    let mut column_region = Vec::with_capacity(nx);
    let regions = [Region::Anode, Region::Separator, Region::Cathode];
    let mut offset = 0.0;
    xs.push(0.0);
    for ((&len, &n), &region) in lengths.iter().zip(&cells).zip(&regions) {
        let h = len / n as f64;
        for k in 0..n {
            column_region.push(region);
            // exact block ends, avoids drift at region boundaries
            let x = if k + 1 == n { offset + len } else { offset + (k + 1) as f64 * h };
            xs.push(x);
        }
        offset += len;
    }

    let y_at = |iy: usize| -> f64 {
        if dimension == 1 {
            0.0
        } else {
            (iy as f64 + 0.5) * dy
        }
    };
    let cell_height = if dimension == 1 { 1.0 } else { dy };

    let mut mesh_cells = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let dx = xs[ix + 1] - xs[ix];
            mesh_cells.push(Cell {
                centroid: [0.5 * (xs[ix] + xs[ix + 1]), y_at(iy)],
                measure: dx * cell_height,
                region: column_region[ix],
                ix,
                iy,
            });
        }
    }

    let idx = |ix: usize, iy: usize| iy * nx + ix;
    let mut faces = Vec::new();
    for iy in 0..ny {
        for ix in 0..=nx {
            let centroid = [xs[ix], y_at(iy)];
            let face = if ix == 0 {
                Face {
                    cells: FaceCells::Boundary { cell: idx(0, iy) },
                    measure: cell_height,
                    normal: [-1.0, 0.0],
                    centroid,
                    tag: Some(BoundaryTag::AnodeContact),
                }
            } else if ix == nx {
                Face {
                    cells: FaceCells::Boundary { cell: idx(nx - 1, iy) },
                    measure: cell_height,
                    normal: [1.0, 0.0],
                    centroid,
                    tag: Some(BoundaryTag::CathodeContact),
                }
            } else {
                let tag = (column_region[ix - 1] != column_region[ix])
                    .then_some(BoundaryTag::SeparatorInterface);
                Face {
                    cells: FaceCells::Interior {
                        owner: idx(ix - 1, iy),
                        neighbour: idx(ix, iy),
                    },
                    measure: cell_height,
                    normal: [1.0, 0.0],
                    centroid,
                    tag,
                }
            };
            faces.push(face);
        }
    }
    if dimension == 2 {
        for ix in 0..nx {
            let dx = xs[ix + 1] - xs[ix];
            let xc = 0.5 * (xs[ix] + xs[ix + 1]);
            for iy in 0..=ny {
                let centroid = [xc, iy as f64 * dy];
                let face = if iy == 0 {
                    Face {
                        cells: FaceCells::Boundary { cell: idx(ix, 0) },
                        measure: dx,
                        normal: [0.0, -1.0],
                        centroid,
                        tag: Some(BoundaryTag::Insulated),
                    }
                } else if iy == ny {
                    Face {
                        cells: FaceCells::Boundary { cell: idx(ix, ny - 1) },
                        measure: dx,
                        normal: [0.0, 1.0],
                        centroid: [xc, extent_y],
                        tag: Some(BoundaryTag::Insulated),
                    }
                } else {
                    Face {
                        cells: FaceCells::Interior {
                            owner: idx(ix, iy - 1),
                            neighbour: idx(ix, iy),
                        },
                        measure: dx,
                        normal: [0.0, 1.0],
                        centroid,
                        tag: None,
                    }
                };
                faces.push(face);
            }
        }
    }

    let mut cell_faces = vec![Vec::new(); mesh_cells.len()];
    for (f, face) in faces.iter().enumerate() {
        match face.cells {
            FaceCells::Interior { owner, neighbour } => {
                cell_faces[owner].push(f);
                cell_faces[neighbour].push(f);
            }
            FaceCells::Boundary { cell } => cell_faces[cell].push(f),
        }
    }

    let mut electrode_cells = Vec::new();
    let mut solid_index = vec![None; mesh_cells.len()];
    for (i, cell) in mesh_cells.iter().enumerate() {
        if cell.region.is_electrode() {
            solid_index[i] = Some(electrode_cells.len());
            electrode_cells.push(i);
        }
    }

    Ok(Mesh {
        dimension,
        lengths,
        width: extent_y,
        nx,
        ny,
        cells: mesh_cells,
        faces,
        cell_faces,
        electrode_cells,
        solid_index,
    })
}

impl Mesh {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    /// Total extent along the layering axis.
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Extent along y (1 in 1D, the unit cross-section).
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_faces(&self, cell: usize) -> &[usize] {
        &self.cell_faces[cell]
    }

    /// Global indices of anode and cathode cells, in mesh order.
    pub fn electrode_cells(&self) -> &[usize] {
        &self.electrode_cells
    }

    /// Position of `cell` in the electrode-only numbering.
    pub fn solid_index(&self, cell: usize) -> Option<usize> {
        self.solid_index[cell]
    }

    pub fn region_measure(&self, domain: Domain) -> f64 {
        self.cells
            .iter()
            .filter(|c| domain.contains(c.region))
            .map(|c| c.measure)
            .sum()
    }

    pub fn region_count(&self, domain: Domain) -> usize {
        self.cells.iter().filter(|c| domain.contains(c.region)).count()
    }

    /// Normal distance from a cell centroid to one of its faces.
    pub fn face_distance(&self, face: usize, cell: usize) -> f64 {
        let f = &self.faces[face];
        let c = &self.cells[cell].centroid;
        ((f.centroid[0] - c[0]) * f.normal[0] + (f.centroid[1] - c[1]) * f.normal[1]).abs()
    }

    /// Outward normal sign of `face` as seen from `cell` (+1 or -1).
    pub fn orientation(&self, face: usize, cell: usize) -> f64 {
        match self.faces[face].cells {
            FaceCells::Interior { owner, .. } if owner == cell => 1.0,
            FaceCells::Interior { .. } => -1.0,
            FaceCells::Boundary { .. } => 1.0,
        }
    }

    /// Two-point transmissibility of an interior face for a cellwise coefficient
    /// (harmonic combination of the half-cell conductances).
    pub fn transmissibility(&self, face: usize, coeff: &[f64]) -> f64 {
        match self.faces[face].cells {
            FaceCells::Interior { owner, neighbour } => {
                let di = self.face_distance(face, owner);
                let dj = self.face_distance(face, neighbour);
                self.faces[face].measure / (di / coeff[owner] + dj / coeff[neighbour])
            }
            FaceCells::Boundary { cell } => {
                self.faces[face].measure * coeff[cell] / self.face_distance(face, cell)
            }
        }
    }

    /// True when the face couples two cells that both carry the solid potential.
    pub fn is_solid_interior(&self, face: usize) -> bool {
        match self.faces[face].cells {
            FaceCells::Interior { owner, neighbour } => {
                self.cells[owner].region.is_electrode() && self.cells[neighbour].region.is_electrode()
            }
            FaceCells::Boundary { .. } => false,
        }
    }

    /// Plain-text region table.
    pub fn summary(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mesh: {}D, {} cells, {} faces", self.dimension, self.cells.len(), self.faces.len())?;
        writeln!(f, "{:<10} {:>6} {:>14}", "region", "cells", "measure")?;
        for region in [Region::Anode, Region::Separator, Region::Cathode] {
            let d = Domain::Region(region);
            writeln!(
                f,
                "{:<10} {:>6} {:>14.6e}",
                region.name(),
                self.region_count(d),
                self.region_measure(d)
            )?;
        }
        write!(
            f,
            "{:<10} {:>6} {:>14.6e}",
            "total",
            self.cells.len(),
            self.region_measure(Domain::Whole)
        )
    }
}
