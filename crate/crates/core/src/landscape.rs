//! Field maps, flower patches and region tiling.
//!
//! Map files are ASCII, one character per cell:
//!
//! | symbol | cell             |
//! |--------|------------------|
//! | `.`    | empty ground     |
//! | `Y`    | flowering crop   |
//! | `#`    | obstacle         |
//! | `H`    | hive             |
//! | `A`    | artificial food  |
//!
//! Lines that start with `#` and contain a character outside this alphabet
//! are header lines. The only recognised header key is `cell_size_m=<float>`;
//! other header lines are comments. Headers must precede the first grid row.

use std::fmt::Write as _;

use thiserror::Error;

/// The bundled desk-scale landscape (72 x 64 cells of 125 m).
pub const DESK_MAP: &str = include_str!("../assets/field_desk.map");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandscapeError {
    #[error("map contains no grid rows")]
    EmptyMap,
    #[error("map has no hive cell")]
    NoHive,
    #[error("second hive at line {line}, column {column}")]
    MultipleHives { line: usize, column: usize },
    #[error("line {line} has {found} cells, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("unknown symbol {symbol:?} at line {line}, column {column}")]
    UnknownSymbol { line: usize, column: usize, symbol: char },
    #[error("invalid cell size on line {line}: {value}")]
    InvalidCellSize { line: usize, value: String },
    #[error("region tiling needs at least one row and one column")]
    ZeroRegions,
    #[error("{rows}x{cols} regions do not fit a {width}x{height} grid")]
    TooManyRegions {
        rows: usize,
        cols: usize,
        width: usize,
        height: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Empty,
    Crop,
    Obstacle,
    Hive,
    ArtificialFood,
}

impl CellKind {
    pub fn symbol(self) -> char {
        match self {
            CellKind::Empty => '.',
            CellKind::Crop => 'Y',
            CellKind::Obstacle => '#',
            CellKind::Hive => 'H',
            CellKind::ArtificialFood => 'A',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Some(match c {
            '.' => CellKind::Empty,
            'Y' => CellKind::Crop,
            '#' => CellKind::Obstacle,
            'H' => CellKind::Hive,
            'A' => CellKind::ArtificialFood,
            _ => return None,
        })
    }

    /// Scouts may enter every cell except obstacles.
    pub fn is_traversable(self) -> bool {
        self != CellKind::Obstacle
    }
}

/// A validated rectangular field map with exactly one hive.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<CellKind>,
    hive: usize,
}

impl CellGrid {
    /// Builds a grid from row-major cells, checking the hive invariant.
    pub fn new(width: usize, height: usize, cell_size: f64, cells: Vec<CellKind>) -> Result<Self, LandscapeError> {
        if width == 0 || height == 0 {
            return Err(LandscapeError::EmptyMap);
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(LandscapeError::InvalidCellSize {
                line: 0,
                value: cell_size.to_string(),
            });
        }
        if cells.len() != width * height {
            return Err(LandscapeError::RaggedRows {
                line: 0,
                expected: width * height,
                found: cells.len(),
            });
        }
        let mut hive = None;
        for (i, &c) in cells.iter().enumerate() {
            if c == CellKind::Hive {
                if hive.is_some() {
                    return Err(LandscapeError::MultipleHives {
                        line: i / width + 1,
                        column: i % width + 1,
                    });
                }
                hive = Some(i);
            }
        }
        let hive = hive.ok_or(LandscapeError::NoHive)?;
        Ok(Self {
            width,
            height,
            cell_size,
            cells,
            hive,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Side length of one cell in meters.
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cells(&self) -> &[CellKind] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn kind(&self, index: usize) -> CellKind {
        self.cells[index]
    }

    pub fn hive_index(&self) -> usize {
        self.hive
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// `(col, row)` of a cell index.
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Cell center in meters, x to the east and y down the rows.
    pub fn cell_center_m(&self, index: usize) -> (f64, f64) {
        let (c, r) = self.coords(index);
        ((c as f64 + 0.5) * self.cell_size, (r as f64 + 0.5) * self.cell_size)
    }

    pub fn hive_center_m(&self) -> (f64, f64) {
        self.cell_center_m(self.hive)
    }

    /// Kind at `(col, row)` if the coordinates are on the grid.
    pub fn kind_at(&self, col: i64, row: i64) -> Option<CellKind> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            None
        } else {
            Some(self.cells[row as usize * self.width + col as usize])
        }
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    pub fn traversable_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_traversable()).count()
    }

    /// Sets a cell kind. Placing or removing the hive is rejected so the
    /// single-hive invariant cannot be broken.
    pub fn set_kind(&mut self, index: usize, kind: CellKind) -> bool {
        if index == self.hive || kind == CellKind::Hive {
            return false;
        }
        self.cells[index] = kind;
        true
    }

    /// Serializes to the map format; `parse_map` reproduces the grid.
    pub fn to_map_string(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() + self.height + 32);
        let _ = writeln!(out, "# cell_size_m={}", self.cell_size);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.symbol()));
            out.push('\n');
        }
        out
    }
}

fn is_grid_line(line: &str) -> bool {
    line.chars().all(|c| CellKind::from_symbol(c).is_some())
}

/// Parses the ASCII map format. Cell size defaults to 1 m when no header
/// sets it.
pub fn parse_map(text: &str) -> Result<CellGrid, LandscapeError> {
    let mut cell_size = 1.0;
    let mut width = None;
    let mut cells = Vec::new();
    let mut height = 0;
    let mut hive: Option<(usize, usize)> = None;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if width.is_none() && line.starts_with('#') && !is_grid_line(line) {
            let body = line.trim_start_matches('#').trim();
            if let Some((key, value)) = body.split_once('=') {
                if key.trim() == "cell_size_m" {
                    let v: f64 = value.trim().parse().map_err(|_| LandscapeError::InvalidCellSize {
                        line: line_no,
                        value: value.trim().to_string(),
                    })?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(LandscapeError::InvalidCellSize {
                            line: line_no,
                            value: value.trim().to_string(),
                        });
                    }
                    cell_size = v;
                }
            }
            continue;
        }
        let row: Vec<char> = line.chars().collect();
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(LandscapeError::RaggedRows {
                    line: line_no,
                    expected: w,
                    found: row.len(),
                })
            }
            _ => {}
        }
        for (col, &ch) in row.iter().enumerate() {
            let kind = CellKind::from_symbol(ch).ok_or(LandscapeError::UnknownSymbol {
                line: line_no,
                column: col + 1,
                symbol: ch,
            })?;
            if kind == CellKind::Hive {
                if hive.is_some() {
                    return Err(LandscapeError::MultipleHives {
                        line: line_no,
                        column: col + 1,
                    });
                }
                hive = Some((line_no, col));
            }
            cells.push(kind);
        }
        height += 1;
    }

    let width = width.ok_or(LandscapeError::EmptyMap)?;
    if hive.is_none() {
        return Err(LandscapeError::NoHive);
    }
    CellGrid::new(width, height, cell_size, cells)
}

/// Scale constants for patch attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchParams {
    /// Saturation rate of `1 - exp(-kappa * cells)` for crop patches.
    pub kappa: f64,
    /// Liters of nectar per m² of crop.
    pub nectar_per_m2: f64,
    /// Grams of pollen per m² of crop.
    pub pollen_per_m2: f64,
    /// Detection probability of an artificial food cluster.
    pub artificial_detection_probability: f64,
    /// Artificial cluster nectar as a fraction of the mean crop patch nectar.
    pub artificial_nectar_fraction: f64,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self {
            kappa: 0.05,
            nectar_per_m2: 0.002,
            pollen_per_m2: 0.1,
            artificial_detection_probability: 0.95,
            artificial_nectar_fraction: 0.1,
        }
    }
}

/// Detection probability of a crop patch of `cells` cells.
pub fn detection_probability(kappa: f64, cells: usize) -> f64 {
    (1.0 - (-kappa * cells as f64).exp()).clamp(0.0, 1.0)
}

/// A food source: one 4-connected component of crop cells, or of
/// artificial food cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub id: usize,
    /// Centroid in meters.
    pub centroid: (f64, f64),
    /// Area in m².
    pub area: f64,
    pub cell_members: Vec<usize>,
    /// Euclidean centroid-to-hive distance in meters.
    pub distance_from_hive: f64,
    /// Liters.
    pub nectar_quantity: f64,
    /// Grams.
    pub pollen_quantity: f64,
    pub detection_probability: f64,
    pub artificial: bool,
}

fn components_of(grid: &CellGrid, kind: CellKind) -> Vec<Vec<usize>> {
    let (w, h) = (grid.width(), grid.height());
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if seen[start] || grid.kind(start) != kind {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let (c, r) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && grid.kind(j) == kind {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

fn centroid_of(grid: &CellGrid, members: &[usize]) -> (f64, f64) {
    let n = members.len() as f64;
    let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &i| {
        let (x, y) = grid.cell_center_m(i);
        (sx + x, sy + y)
    });
    (sx / n, sy / n)
}

/// Derives one patch per 4-connected crop component, then one per
/// 4-connected artificial food component.
///
/// Crop patches are numbered first, in row-major order of their first cell,
/// so adding artificial food never renumbers crop patches.
pub fn derive_patches(grid: &CellGrid, params: &PatchParams) -> Vec<Patch> {
    let cell_area = grid.cell_size() * grid.cell_size();
    let hive = grid.hive_center_m();
    let dist = |c: (f64, f64)| ((c.0 - hive.0).powi(2) + (c.1 - hive.1).powi(2)).sqrt();

    let mut patches: Vec<Patch> = components_of(grid, CellKind::Crop)
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let centroid = centroid_of(grid, &members);
            let area = members.len() as f64 * cell_area;
            Patch {
                id,
                centroid,
                area,
                distance_from_hive: dist(centroid),
                nectar_quantity: area * params.nectar_per_m2,
                pollen_quantity: area * params.pollen_per_m2,
                detection_probability: detection_probability(params.kappa, members.len()),
                artificial: false,
                cell_members: members,
            }
        })
        .collect();

    let mean_crop_nectar = if patches.is_empty() {
        0.0
    } else {
        patches.iter().map(|p| p.nectar_quantity).sum::<f64>() / patches.len() as f64
    };
    let first_artificial = patches.len();
    for (k, members) in components_of(grid, CellKind::ArtificialFood).into_iter().enumerate() {
        let centroid = centroid_of(grid, &members);
        patches.push(Patch {
            id: first_artificial + k,
            centroid,
            area: members.len() as f64 * cell_area,
            distance_from_hive: dist(centroid),
            nectar_quantity: params.artificial_nectar_fraction * mean_crop_nectar,
            pollen_quantity: 0.0,
            detection_probability: params.artificial_detection_probability.clamp(0.0, 1.0),
            artificial: true,
            cell_members: members,
        });
    }
    patches
}

/// Foodflow table header.
pub const FOODFLOW_HEADER: &str = "id,x_m,y_m,size_m2,dist_m,nectar_l,pollen_g,detect_prob,artificial";

/// Renders patches as a foodflow CSV table.
pub fn foodflow_csv(patches: &[Patch]) -> String {
    let mut out = String::from(FOODFLOW_HEADER);
    out.push('\n');
    for p in patches {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.id,
            p.centroid.0,
            p.centroid.1,
            p.area,
            p.distance_from_hive,
            p.nectar_quantity,
            p.pollen_quantity,
            p.detection_probability,
            p.artificial
        );
    }
    out
}

/// Partition of the grid into `rows x cols` rectangles.
///
/// Region boundaries follow the floor-split rule: each region row spans
/// `height / rows` cell rows and the last region row absorbs the remainder
/// (same for columns).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionTiling {
    rows: usize,
    cols: usize,
    width: usize,
    height: usize,
    region_of_cell: Vec<usize>,
}

impl RegionTiling {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn region_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn region_of(&self, cell: usize) -> usize {
        self.region_of_cell[cell]
    }

    pub fn region_of_cell(&self) -> &[usize] {
        &self.region_of_cell
    }

    /// Cell indices of every region, indexed by region id.
    pub fn cells_by_region(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.region_count()];
        for (cell, &r) in self.region_of_cell.iter().enumerate() {
            out[r].push(cell);
        }
        out
    }
}

pub fn tile_regions(grid: &CellGrid, rows: usize, cols: usize) -> Result<RegionTiling, LandscapeError> {
    if rows == 0 || cols == 0 {
        return Err(LandscapeError::ZeroRegions);
    }
    let (w, h) = (grid.width(), grid.height());
    if rows > h || cols > w {
        return Err(LandscapeError::TooManyRegions {
            rows,
            cols,
            width: w,
            height: h,
        });
    }
    let row_span = h / rows;
    let col_span = w / cols;
    let region_of_cell = (0..grid.len())
        .map(|i| {
            let (c, r) = (i % w, i / w);
            let rr = (r / row_span).min(rows - 1);
            let rc = (c / col_span).min(cols - 1);
            rr * cols + rc
        })
        .collect();
    Ok(RegionTiling {
        rows,
        cols,
        width: w,
        height: h,
        region_of_cell,
    })
}
