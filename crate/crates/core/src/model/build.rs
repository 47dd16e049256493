//! Emits the full bookshelf MINLP: constraint groups A–L over poses,
//! rotation entries, vertices, separating planes, and mode binaries.
//!
//! Rotation matrices enter through their entries (c, s) = (cos θ, sin θ) so
//! the vertex kinematics A stay linear and the orthogonality constraint C
//! becomes the bilinear c² + s² = 1. The derived angle is atan2(s, c).

use serde::{Deserialize, Serialize};

use crate::envelope::{Grid, GriddedSlot};
use crate::geom::corner_offsets;
use crate::ir::{
    guard_big_m, Constraint, MibpProgram, QuadObjective, Sense, Variable,
};
use crate::model::{
    BookshelfSolution, BookSpec, Mode, PlaneVars, Pose, ProblemInstance, ShelfSpec, SupportRef,
    LAY_LEFT, LAY_RIGHT, LEAN_LEFT, LEAN_MARGIN, LEAN_RIGHT, UPRIGHT,
};

pub const MODE_COUNT: usize = 5;
const BOOK_STRIDE: usize = 12; // px py c s + 4 vertices × 2
const PLANE_STRIDE: usize = 3; // ax ay b

/// Vertex indices in v1..v4 order.
pub const V_TR: usize = 0;
pub const V_BR: usize = 1;
pub const V_BL: usize = 2;
pub const V_TL: usize = 3;

/// Deterministic variable layout of the bookshelf program. Continuous
/// block first (per book: px, py, c, s, v1..v4 × {x,y}; then per pair:
/// ax, ay, b), mode binaries last. The inserted book is the final book.
#[derive(Clone, Debug)]
pub struct VarLayout {
    pub n_books: usize,
    pub pairs: Vec<(usize, usize)>,
    /// Per book: fixed lean supports (left side, right side).
    pub supports: Vec<(SupportRef, SupportRef)>,
}

impl VarLayout {
    pub fn for_instance(instance: &ProblemInstance) -> Self {
        let n_books = instance.n_books();
        let mut pairs = Vec::new();
        for i in 0..n_books {
            for j in (i + 1)..n_books {
                pairs.push((i, j));
            }
        }
        // lean supports are fixed per book and side: the declared support
        // when the book already leans that way, otherwise the adjacent
        // stored book in original x-order (walls at the ends); the insert
        // book can lean on the walls
        let mut order: Vec<usize> = (0..instance.stored.len()).collect();
        order.sort_by(|&a, &b| {
            instance.stored[a].pose.x[0].partial_cmp(&instance.stored[b].pose.x[0]).unwrap()
        });
        let rank_of = |i: usize| order.iter().position(|&j| j == i).unwrap();
        let mut supports = Vec::new();
        for (i, b) in instance.stored.iter().enumerate() {
            let rank = rank_of(i);
            let left = match b.mode {
                Mode::LeanLeft(s) => s,
                _ if rank > 0 => SupportRef::Book(order[rank - 1]),
                _ => SupportRef::LeftWall,
            };
            let right = match b.mode {
                Mode::LeanRight(s) => s,
                _ if rank + 1 < order.len() => SupportRef::Book(order[rank + 1]),
                _ => SupportRef::RightWall,
            };
            supports.push((left, right));
        }
        supports.push((SupportRef::LeftWall, SupportRef::RightWall));
        VarLayout { n_books, pairs, supports }
    }

    /// Layout for a book count alone (wall supports everywhere); variable
    /// indexing does not depend on supports, so this is sufficient for
    /// coordinate extraction from stored solutions.
    pub fn for_books(n_books: usize) -> Self {
        let mut pairs = Vec::new();
        for i in 0..n_books {
            for j in (i + 1)..n_books {
                pairs.push((i, j));
            }
        }
        let supports = vec![(SupportRef::LeftWall, SupportRef::RightWall); n_books];
        VarLayout { n_books, pairs, supports }
    }

    pub fn px(&self, i: usize) -> usize {
        i * BOOK_STRIDE
    }

    pub fn py(&self, i: usize) -> usize {
        i * BOOK_STRIDE + 1
    }

    pub fn cos(&self, i: usize) -> usize {
        i * BOOK_STRIDE + 2
    }

    pub fn sin(&self, i: usize) -> usize {
        i * BOOK_STRIDE + 3
    }

    /// Vertex coordinate id; `k` in v1..v4 order, `axis` 0 = x, 1 = y.
    pub fn vertex(&self, i: usize, k: usize, axis: usize) -> usize {
        i * BOOK_STRIDE + 4 + 2 * k + axis
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().position(|&p| p == (a, b)).expect("pair exists")
    }

    fn plane_base(&self, p: usize) -> usize {
        self.n_books * BOOK_STRIDE + p * PLANE_STRIDE
    }

    pub fn plane_ax(&self, p: usize) -> usize {
        self.plane_base(p)
    }

    pub fn plane_ay(&self, p: usize) -> usize {
        self.plane_base(p) + 1
    }

    pub fn plane_b(&self, p: usize) -> usize {
        self.plane_base(p) + 2
    }

    pub fn n_continuous(&self) -> usize {
        self.n_books * BOOK_STRIDE + self.n_pairs() * PLANE_STRIDE
    }

    pub fn mode(&self, i: usize, m: usize) -> usize {
        self.n_continuous() + i * MODE_COUNT + m
    }

    pub fn n_vars(&self) -> usize {
        self.n_continuous() + self.n_books * MODE_COUNT
    }

    /// Dimension of the nonconvex continuous space: one rotation slot per
    /// book, two normal components per plane, two coordinates per vertex
    /// (48 for N = 4).
    pub fn nonconvex_dimension(&self) -> usize {
        self.n_books + 2 * self.n_pairs() + 8 * self.n_books
    }

    /// The nonconvex solution coordinates of a point, in slot order:
    /// per book atan2(s, c), then plane normals, then vertex coordinates.
    /// This is the clustering space.
    pub fn nonconvex_coords(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nonconvex_dimension());
        for i in 0..self.n_books {
            out.push(x[self.sin(i)].atan2(x[self.cos(i)]));
        }
        for p in 0..self.n_pairs() {
            out.push(x[self.plane_ax(p)]);
            out.push(x[self.plane_ay(p)]);
        }
        for i in 0..self.n_books {
            for k in 0..4 {
                out.push(x[self.vertex(i, k, 0)]);
                out.push(x[self.vertex(i, k, 1)]);
            }
        }
        out
    }

    /// Decodes a program point into poses, modes (argmax over the one-hot
    /// block, supports from the layout), and planes.
    pub fn decode(&self, x: &[f64]) -> BookshelfSolution {
        let mut poses = Vec::new();
        let mut modes = Vec::new();
        for i in 0..self.n_books {
            poses.push(Pose {
                x: [x[self.px(i)], x[self.py(i)]],
                theta: x[self.sin(i)].atan2(x[self.cos(i)]),
            });
            let mut best = (0, f64::NEG_INFINITY);
            for m in 0..MODE_COUNT {
                let v = x[self.mode(i, m)];
                if v > best.1 {
                    best = (m, v);
                }
            }
            modes.push(match best.0 {
                LAY_LEFT => Mode::LayLeft,
                UPRIGHT => Mode::Upright,
                LAY_RIGHT => Mode::LayRight,
                LEAN_LEFT => Mode::LeanLeft(self.supports[i].0),
                _ => Mode::LeanRight(self.supports[i].1),
            });
        }
        let planes = (0..self.n_pairs())
            .map(|p| PlaneVars {
                a: [x[self.plane_ax(p)], x[self.plane_ay(p)]],
                b: x[self.plane_b(p)],
            })
            .collect();
        BookshelfSolution { poses, modes, planes, objective: 0.0 }
    }
}

/// Encodes a full scene (poses + modes, planes optional) into a program
/// point: vertices from the kinematics, one-hot modes, planes either given
/// or fit geometrically per pair.
pub fn encode_scene(
    layout: &VarLayout,
    specs: &[BookSpec],
    poses: &[Pose],
    modes: &[Mode],
    planes: Option<&[PlaneVars]>,
) -> Vec<f64> {
    let mut x = vec![0.0; layout.n_vars()];
    for i in 0..layout.n_books {
        x[layout.px(i)] = poses[i].x[0];
        x[layout.py(i)] = poses[i].x[1];
        x[layout.cos(i)] = poses[i].theta.cos();
        x[layout.sin(i)] = poses[i].theta.sin();
        let verts = poses[i].vertices(&specs[i]);
        for k in 0..4 {
            x[layout.vertex(i, k, 0)] = verts[k][0];
            x[layout.vertex(i, k, 1)] = verts[k][1];
        }
        x[layout.mode(i, modes[i].index())] = 1.0;
    }
    match planes {
        Some(pl) => {
            for (p, plane) in pl.iter().enumerate() {
                x[layout.plane_ax(p)] = plane.a[0];
                x[layout.plane_ay(p)] = plane.a[1];
                x[layout.plane_b(p)] = plane.b;
            }
        }
        None => {
            let fitted = crate::model::scene_planes(specs, poses);
            for (p, plane) in fitted.iter().enumerate() {
                if let Some(plane) = plane {
                    x[layout.plane_ax(p)] = plane.a[0];
                    x[layout.plane_ay(p)] = plane.a[1];
                    x[layout.plane_b(p)] = plane.b;
                } else {
                    // overlapping pair: leave a degenerate vertical plane
                    x[layout.plane_ax(p)] = 1.0;
                }
            }
        }
    }
    x
}

/// Segmentation of one nonconvex variable class.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub range: (f64, f64),
    pub segments: usize,
}

/// Grid configuration over the four nonconvex variable classes. Defaults
/// are the 18×11 shelf segmentation: θ in 8 cells over [−π/2, π/2], plane
/// normal components in 8 cells over [−1, 1], vertex coordinates in 4
/// cells over the shelf extents.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub theta: GridAxis,
    pub plane_normal: GridAxis,
    pub vertex_x: GridAxis,
    pub vertex_y: GridAxis,
}

impl Default for GridConfig {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        GridConfig {
            theta: GridAxis { range: (-FRAC_PI_2, FRAC_PI_2), segments: 8 },
            plane_normal: GridAxis { range: (-1.0, 1.0), segments: 8 },
            vertex_x: GridAxis { range: (-9.0, 9.0), segments: 4 },
            vertex_y: GridAxis { range: (0.0, 11.0), segments: 4 },
        }
    }
}

impl GridConfig {
    /// Default segment counts with vertex ranges fit to a shelf.
    pub fn for_shelf(shelf: &ShelfSpec) -> Self {
        let mut config = GridConfig::default();
        config.vertex_x.range = (shelf.x_min(), shelf.x_max());
        config.vertex_y.range = (0.0, shelf.height);
        config
    }
}

/// Builds the grid over every nonconvex variable of the bookshelf program:
/// one rotation slot per book, one scalar slot per plane-normal component
/// and per vertex coordinate.
pub fn bookshelf_grid(layout: &VarLayout, config: &GridConfig) -> Grid {
    let mut slots = Vec::new();
    for i in 0..layout.n_books {
        slots.push(GriddedSlot::rotation(
            format!("rot[{i}]"),
            layout.cos(i),
            layout.sin(i),
            config.theta.range,
            config.theta.segments,
        ));
    }
    for p in 0..layout.n_pairs() {
        slots.push(GriddedSlot::scalar(
            format!("ax[{p}]"),
            layout.plane_ax(p),
            config.plane_normal.range,
            config.plane_normal.segments,
        ));
        slots.push(GriddedSlot::scalar(
            format!("ay[{p}]"),
            layout.plane_ay(p),
            config.plane_normal.range,
            config.plane_normal.segments,
        ));
    }
    for i in 0..layout.n_books {
        for k in 0..4 {
            slots.push(GriddedSlot::scalar(
                format!("vx[{i},{k}]"),
                layout.vertex(i, k, 0),
                config.vertex_x.range,
                config.vertex_x.segments,
            ));
            slots.push(GriddedSlot::scalar(
                format!("vy[{i},{k}]"),
                layout.vertex(i, k, 1),
                config.vertex_y.range,
                config.vertex_y.segments,
            ));
        }
    }
    Grid { slots }
}

/// Builds the bookshelf MINLP (Eq-(1) form) for an instance.
pub fn build_minlp(instance: &ProblemInstance) -> MibpProgram {
    let layout = VarLayout::for_instance(instance);
    let shelf = &instance.shelf;
    let specs = BookshelfSolution::book_specs(instance);
    let (xmin, xmax, h) = (shelf.x_min(), shelf.x_max(), shelf.height);
    let b_max = 0.5 * shelf.width + h;

    let mut variables = Vec::with_capacity(layout.n_vars());
    for i in 0..layout.n_books {
        variables.push(Variable::continuous(format!("px[{i}]"), xmin, xmax));
        variables.push(Variable::continuous(format!("py[{i}]"), 0.0, h));
        variables.push(Variable::continuous(format!("c[{i}]"), 0.0, 1.0));
        variables.push(Variable::continuous(format!("s[{i}]"), -1.0, 1.0));
        for k in 0..4 {
            variables.push(Variable::continuous(format!("v[{i},{k}].x"), xmin, xmax));
            variables.push(Variable::continuous(format!("v[{i},{k}].y"), 0.0, h));
        }
    }
    for (p, &(i, j)) in layout.pairs.iter().enumerate() {
        variables.push(Variable::continuous(format!("a[{p}:{i},{j}].x"), -1.0, 1.0));
        variables.push(Variable::continuous(format!("a[{p}:{i},{j}].y"), -1.0, 1.0));
        variables.push(Variable::continuous(format!("b[{p}:{i},{j}]"), -b_max, b_max));
    }
    for i in 0..layout.n_books {
        for m in 0..MODE_COUNT {
            variables.push(Variable::binary(format!("z[{i},{m}]")));
        }
    }

    let mut cons: Vec<Constraint> = Vec::new();

    // A: vertex kinematics v = x + R(θ)h, linear in (x, c, s)
    for i in 0..layout.n_books {
        let offs = corner_offsets(0.5 * specs[i].width, 0.5 * specs[i].height);
        for (k, off) in offs.iter().enumerate() {
            cons.push(Constraint::linear(
                format!("A.kin[{i},{k}].x"),
                vec![
                    (1.0, layout.vertex(i, k, 0)),
                    (-1.0, layout.px(i)),
                    (-off[0], layout.cos(i)),
                    (-off[1], layout.sin(i)),
                ],
                Sense::Eq,
                0.0,
            ));
            cons.push(Constraint::linear(
                format!("A.kin[{i},{k}].y"),
                vec![
                    (1.0, layout.vertex(i, k, 1)),
                    (-1.0, layout.py(i)),
                    (off[0], layout.sin(i)), // R(θ)h = (c·hx + s·hy, −s·hx + c·hy)
                    (-off[1], layout.cos(i)),
                ],
                Sense::Eq,
                0.0,
            ));
        }
    }

    // B: containment of every vertex in the shelf box
    for i in 0..layout.n_books {
        for k in 0..4 {
            let vx = layout.vertex(i, k, 0);
            let vy = layout.vertex(i, k, 1);
            cons.push(Constraint::linear(format!("B.cont[{i},{k}].xmax"), vec![(1.0, vx)], Sense::Le, xmax));
            cons.push(Constraint::linear(format!("B.cont[{i},{k}].xmin"), vec![(-1.0, vx)], Sense::Le, -xmin));
            cons.push(Constraint::linear(format!("B.cont[{i},{k}].ymax"), vec![(1.0, vy)], Sense::Le, h));
            cons.push(Constraint::linear(format!("B.cont[{i},{k}].ymin"), vec![(-1.0, vy)], Sense::Le, 0.0));
        }
    }

    // C: rotation orthogonality c² + s² = 1
    for i in 0..layout.n_books {
        cons.push(Constraint::bilinear(
            format!("C.rot[{i}]"),
            vec![],
            vec![(1.0, layout.cos(i), layout.cos(i)), (1.0, layout.sin(i), layout.sin(i))],
            Sense::Eq,
            1.0,
        ));
    }

    // D: angle bounds θ ∈ [−π/2, π/2] ⇔ c ≥ 0
    for i in 0..layout.n_books {
        cons.push(Constraint::linear(format!("D.angle[{i}]"), vec![(-1.0, layout.cos(i))], Sense::Le, 0.0));
    }

    // E: separation — book i on the ≤ side of pair (i, j), book j on ≥
    for (p, &(i, j)) in layout.pairs.iter().enumerate() {
        let (ax, ay, b) = (layout.plane_ax(p), layout.plane_ay(p), layout.plane_b(p));
        for k in 0..4 {
            cons.push(Constraint::bilinear(
                format!("E.sep[{p}].lo[{i},{k}]"),
                vec![(-1.0, b)],
                vec![(1.0, ax, layout.vertex(i, k, 0)), (1.0, ay, layout.vertex(i, k, 1))],
                Sense::Le,
                0.0,
            ));
            cons.push(Constraint::bilinear(
                format!("E.sep[{p}].hi[{j},{k}]"),
                vec![(1.0, b)],
                vec![(-1.0, ax, layout.vertex(j, k, 0)), (-1.0, ay, layout.vertex(j, k, 1))],
                Sense::Le,
                0.0,
            ));
        }
    }

    // F: unit plane normal
    for (p, _) in layout.pairs.iter().enumerate() {
        cons.push(Constraint::bilinear(
            format!("F.normal[{p}]"),
            vec![],
            vec![(1.0, layout.plane_ax(p), layout.plane_ax(p)), (1.0, layout.plane_ay(p), layout.plane_ay(p))],
            Sense::Eq,
            1.0,
        ));
    }

    // G: one mode per book
    for i in 0..layout.n_books {
        cons.push(Constraint::linear(
            format!("G.onehot[{i}]"),
            (0..MODE_COUNT).map(|m| (1.0, layout.mode(i, m))).collect(),
            Sense::Eq,
            1.0,
        ));
    }

    let guarded = |c: Constraint, z: usize, cons: &mut Vec<Constraint>| {
        let gs = guard_big_m(&c, z, &variables).expect("bookshelf variables are boxed");
        cons.extend(gs);
    };

    // H1 / I1 / J1: lay-right, upright, lay-left pose fixing
    for i in 0..layout.n_books {
        let w = specs[i].width;
        let hh = specs[i].height;
        let (c, s, py) = (layout.cos(i), layout.sin(i), layout.py(i));
        let pose_groups: [(&str, usize, f64, f64, f64); 3] = [
            ("H1.layright", layout.mode(i, LAY_RIGHT), 0.0, 1.0, 0.5 * w),
            ("I1.upright", layout.mode(i, UPRIGHT), 1.0, 0.0, 0.5 * hh),
            ("J1.layleft", layout.mode(i, LAY_LEFT), 0.0, -1.0, 0.5 * w),
        ];
        for (tag, z, c_val, s_val, y_val) in pose_groups {
            guarded(Constraint::linear(format!("{tag}[{i}].c"), vec![(1.0, c)], Sense::Eq, c_val), z, &mut cons);
            guarded(Constraint::linear(format!("{tag}[{i}].s"), vec![(1.0, s)], Sense::Eq, s_val), z, &mut cons);
            guarded(Constraint::linear(format!("{tag}[{i}].y"), vec![(1.0, py)], Sense::Eq, y_val), z, &mut cons);
        }
    }

    // K / L: lean-left and lean-right groups
    let sin_margin = LEAN_MARGIN.sin();
    for i in 0..layout.n_books {
        let (c, s, px) = (layout.cos(i), layout.sin(i), layout.px(i));
        // --- lean left: θ ∈ (−π/2, 0), pivot v3, contact corner v4 ---
        {
            let z = layout.mode(i, LEAN_LEFT);
            let support = layout.supports[i].0;
            guarded(
                Constraint::linear(format!("K0.range[{i}].s"), vec![(1.0, s)], Sense::Le, -sin_margin),
                z,
                &mut cons,
            );
            guarded(
                Constraint::linear(format!("K0.range[{i}].c"), vec![(-1.0, c)], Sense::Le, -sin_margin),
                z,
                &mut cons,
            );
            match support {
                SupportRef::Book(j) => {
                    let p = layout.pair_index(i, j);
                    let (ax, ay, b) = (layout.plane_ax(p), layout.plane_ay(p), layout.plane_b(p));
                    // plane crosses v4 of the leaning (right) book …
                    guarded(
                        Constraint::bilinear(
                            format!("K1.contact[{i}].self"),
                            vec![(-1.0, b)],
                            vec![(1.0, ax, layout.vertex(i, V_TL, 0)), (1.0, ay, layout.vertex(i, V_TL, 1))],
                            Sense::Eq,
                            0.0,
                        ),
                        z,
                        &mut cons,
                    );
                    // … and v1 of the supporting (left) book
                    guarded(
                        Constraint::bilinear(
                            format!("K1.contact[{i}].support"),
                            vec![(-1.0, b)],
                            vec![(1.0, ax, layout.vertex(j, V_TR, 0)), (1.0, ay, layout.vertex(j, V_TR, 1))],
                            Sense::Eq,
                            0.0,
                        ),
                        z,
                        &mut cons,
                    );
                    guarded(
                        Constraint::linear(
                            format!("K2.stable[{i}].support"),
                            vec![(1.0, layout.px(j)), (-1.0, px)],
                            Sense::Le,
                            0.0,
                        ),
                        z,
                        &mut cons,
                    );
                }
                _ => {
                    guarded(
                        Constraint::linear(format!("K1.contact[{i}].wall"), vec![(1.0, layout.vertex(i, V_TL, 0))], Sense::Eq, xmin),
                        z,
                        &mut cons,
                    );
                    guarded(
                        Constraint::linear(format!("K2.stable[{i}].support"), vec![(-1.0, px)], Sense::Le, -xmin),
                        z,
                        &mut cons,
                    );
                }
            }
            guarded(
                Constraint::linear(
                    format!("K2.stable[{i}].pivot"),
                    vec![(1.0, px), (-1.0, layout.vertex(i, V_BL, 0))],
                    Sense::Le,
                    0.0,
                ),
                z,
                &mut cons,
            );
            guarded(
                Constraint::linear(format!("K3.ground[{i}]"), vec![(1.0, layout.vertex(i, V_BL, 1))], Sense::Eq, 0.0),
                z,
                &mut cons,
            );
        }
        // --- lean right: θ ∈ (0, π/2), pivot v2, contact corner v1 ---
        {
            let z = layout.mode(i, LEAN_RIGHT);
            let support = layout.supports[i].1;
            guarded(
                Constraint::linear(format!("L0.range[{i}].s"), vec![(-1.0, s)], Sense::Le, -sin_margin),
                z,
                &mut cons,
            );
            guarded(
                Constraint::linear(format!("L0.range[{i}].c"), vec![(-1.0, c)], Sense::Le, -sin_margin),
                z,
                &mut cons,
            );
            match support {
                SupportRef::Book(j) => {
                    let p = layout.pair_index(i, j);
                    let (ax, ay, b) = (layout.plane_ax(p), layout.plane_ay(p), layout.plane_b(p));
                    guarded(
                        Constraint::bilinear(
                            format!("L1.contact[{i}].self"),
                            vec![(-1.0, b)],
                            vec![(1.0, ax, layout.vertex(i, V_TR, 0)), (1.0, ay, layout.vertex(i, V_TR, 1))],
                            Sense::Eq,
                            0.0,
                        ),
                        z,
                        &mut cons,
                    );
                    guarded(
                        Constraint::bilinear(
                            format!("L1.contact[{i}].support"),
                            vec![(-1.0, b)],
                            vec![(1.0, ax, layout.vertex(j, V_TL, 0)), (1.0, ay, layout.vertex(j, V_TL, 1))],
                            Sense::Eq,
                            0.0,
                        ),
                        z,
                        &mut cons,
                    );
                    guarded(
                        Constraint::linear(
                            format!("L2.stable[{i}].support"),
                            vec![(1.0, px), (-1.0, layout.px(j))],
                            Sense::Le,
                            0.0,
                        ),
                        z,
                        &mut cons,
                    );
                }
                _ => {
                    guarded(
                        Constraint::linear(format!("L1.contact[{i}].wall"), vec![(1.0, layout.vertex(i, V_TR, 0))], Sense::Eq, xmax),
                        z,
                        &mut cons,
                    );
                    guarded(
                        Constraint::linear(format!("L2.stable[{i}].support"), vec![(1.0, px)], Sense::Le, xmax),
                        z,
                        &mut cons,
                    );
                }
            }
            guarded(
                Constraint::linear(
                    format!("L2.stable[{i}].pivot"),
                    vec![(1.0, layout.vertex(i, V_BR, 0)), (-1.0, px)],
                    Sense::Le,
                    0.0,
                ),
                z,
                &mut cons,
            );
            guarded(
                Constraint::linear(format!("L3.ground[{i}]"), vec![(1.0, layout.vertex(i, V_BR, 1))], Sense::Eq, 0.0),
                z,
                &mut cons,
            );
        }
    }

    // Objective: quadratic displacement of the stored books; rotation
    // displacement through the chord (c−c⁰)² + (s−s⁰)².
    let mut objective = QuadObjective::default();
    let w_theta = 10.0;
    for (i, book) in instance.stored.iter().enumerate() {
        objective.add_square(1.0, layout.px(i), book.pose.x[0]);
        objective.add_square(1.0, layout.py(i), book.pose.x[1]);
        objective.add_square(w_theta, layout.cos(i), book.pose.theta.cos());
        objective.add_square(w_theta, layout.sin(i), book.pose.theta.sin());
    }

    MibpProgram { variables, constraints: cons, objective, theta: instance.theta() }
}
