//! Icosahedron tensegrity module geometry and multi-module assembly.
//!
//! A module is the classic 6-strut / 24-cable "expanded octahedron". Its
//! twelve nodes sit on the vertices of a regular icosahedron, the struts form
//! three parallel pairs along the coordinate axes, and the eight cable-bounded
//! triangles with normals along `(±1, ±1, ±1)` are the connective faces used
//! both for latching modules together and as actuation axes.

use std::collections::HashSet;

use nalgebra::{IsometryMatrix3, Matrix3, Rotation3, Translation3, Vector3};

use crate::control::{ActuationGroup, ACTUATION_STIFFNESS_FACTOR, MAX_CONTRACTION};
use crate::error::{Error, Result};
use crate::physics::{CableSpec, MaterialParams};

pub type Vec3 = Vector3<f64>;

/// Proper rotation followed by a translation.
pub type RigidTransform = IsometryMatrix3<f64>;

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

pub const NODES_PER_MODULE: usize = 12;
pub const STRUTS_PER_MODULE: usize = 6;
pub const CABLES_PER_MODULE: usize = 24;
pub const FACE_COUNT: usize = 8;

pub const DEFAULT_STRUT_LENGTH: f64 = 0.20;
/// 12 nodes at 0.01 kg give a 0.12 kg module.
pub const NODE_MASS: f64 = 0.01;
/// Height of the lowest node above the ground right after assembly.
pub const GROUND_CLEARANCE: f64 = 0.005;

/// Face through which every child module latches onto its parent: the one
/// with outward normal `(-1, -1, -1) / sqrt(3)`.
pub const ATTACH_FACE: usize = 7;

/// Index of the face whose outward normal has the given sign pattern.
///
/// Bit 2 is set when x is negative, bit 1 for y, bit 0 for z, so face 0 is
/// `(+,+,+)`, face 7 is `(-,-,-)` and `opposite(f) == 7 - f`.
pub fn face_id_from_signs(normal: &Vec3) -> usize {
    (usize::from(normal.x < 0.0) << 2) | (usize::from(normal.y < 0.0) << 1) | usize::from(normal.z < 0.0)
}

pub fn opposite_face(face: usize) -> usize {
    FACE_COUNT - 1 - face
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub id: usize,
    /// Counterclockwise seen from outside the module.
    pub vertex_ids: [usize; 3],
    pub corners: [Vec3; 3],
    pub outward_normal: Vec3,
}

impl Face {
    pub fn centroid(&self) -> Vec3 {
        (self.corners[0] + self.corners[1] + self.corners[2]) / 3.0
    }

    pub fn edge_length(&self) -> f64 {
        (self.corners[1] - self.corners[0]).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleTemplate {
    pub nodes: Vec<Vec3>,
    pub struts: Vec<[usize; 2]>,
    pub cables: Vec<[usize; 2]>,
    /// Indexed by face id.
    pub faces: Vec<Face>,
    pub strut_length: f64,
}

impl ModuleTemplate {
    pub fn face(&self, id: usize) -> &Face {
        &self.faces[id]
    }

    /// Length shared by all 24 cables in the canonical pose.
    pub fn cable_length(&self) -> f64 {
        let [a, b] = self.cables[0];
        (self.nodes[b] - self.nodes[a]).norm()
    }

    /// Distance between the planes of two opposite faces.
    pub fn face_pair_spacing(&self) -> f64 {
        2.0 * self.faces[0].centroid().dot(&self.faces[0].outward_normal)
    }

    /// Node sitting diametrically opposite `node` (the point reflection).
    pub fn antipode(&self, node: usize) -> usize {
        let target = -self.nodes[node];
        let tol = 1e-9 * self.strut_length;
        self.nodes
            .iter()
            .position(|p| (p - target).norm() < tol)
            .expect("icosahedron node set is centrally symmetric")
    }
}

/// Builds the canonical module with struts of the given length.
///
/// Nodes are the cyclic permutations of `(0, ±1, ±φ)`, scaled so that each
/// strut (joining two nodes that differ only in the sign of their `φ`
/// coordinate) is `strut_length` long. Cables are the 30 icosahedron edges
/// minus the 6 edges between the two struts of a parallel pair.
pub fn build_canonical_module(strut_length: f64) -> Result<ModuleTemplate> {
    if !(strut_length > 0.0 && strut_length.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "strut length must be positive and finite, got {strut_length}"
        )));
    }
    let phi = GOLDEN_RATIO;
    let scale = strut_length / (2.0 * phi);

    // Four nodes per strut family; the family index is `node / 4`.
    let unscaled = [
        // struts along z
        [0.0, 1.0, phi],
        [0.0, 1.0, -phi],
        [0.0, -1.0, phi],
        [0.0, -1.0, -phi],
        // struts along y
        [1.0, phi, 0.0],
        [1.0, -phi, 0.0],
        [-1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        // struts along x
        [phi, 0.0, 1.0],
        [-phi, 0.0, 1.0],
        [phi, 0.0, -1.0],
        [-phi, 0.0, -1.0],
    ];
    let nodes: Vec<Vec3> = unscaled
        .iter()
        .map(|c| Vec3::new(c[0], c[1], c[2]) * scale)
        .collect();
    let struts = (0..STRUTS_PER_MODULE).map(|s| [2 * s, 2 * s + 1]).collect();

    let edge = 2.0 * scale;
    let mut cables = Vec::with_capacity(CABLES_PER_MODULE);
    for i in 0..NODES_PER_MODULE {
        for j in (i + 1)..NODES_PER_MODULE {
            if i / 4 == j / 4 {
                continue;
            }
            if ((nodes[j] - nodes[i]).norm() - edge).abs() < 1e-9 * edge {
                cables.push([i, j]);
            }
        }
    }

    let mut template = ModuleTemplate {
        nodes,
        struts,
        cables,
        faces: Vec::new(),
        strut_length,
    };
    template.faces = enumerate_faces(&template);
    Ok(template)
}

/// Finds the cable-bounded triangles of a module and orients them.
///
/// Returns the faces sorted by id (see [`face_id_from_signs`]); each face's
/// vertices start at its lowest node index and run counterclockwise seen from
/// outside.
pub fn enumerate_faces(template: &ModuleTemplate) -> Vec<Face> {
    let edges: HashSet<(usize, usize)> = template
        .cables
        .iter()
        .map(|&[a, b]| (a.min(b), a.max(b)))
        .collect();
    let linked = |a: usize, b: usize| edges.contains(&(a.min(b), a.max(b)));
    let n = template.nodes.len();
    let mut faces = Vec::with_capacity(FACE_COUNT);
    for i in 0..n {
        for j in (i + 1)..n {
            if !linked(i, j) {
                continue;
            }
            for k in (j + 1)..n {
                if !(linked(i, k) && linked(j, k)) {
                    continue;
                }
                let (pi, pj, pk) = (template.nodes[i], template.nodes[j], template.nodes[k]);
                let mut normal = (pj - pi).cross(&(pk - pi)).normalize();
                let mut vertex_ids = [i, j, k];
                let centroid = (pi + pj + pk) / 3.0;
                if normal.dot(&centroid) < 0.0 {
                    normal = -normal;
                    vertex_ids = [i, k, j];
                }
                faces.push(Face {
                    id: face_id_from_signs(&normal),
                    vertex_ids,
                    corners: vertex_ids.map(|v| template.nodes[v]),
                    outward_normal: normal,
                });
            }
        }
    }
    faces.sort_by_key(|f| f.id);
    faces
}

/// Slot pairing used when mating: child vertex slot `i` lands on parent
/// vertex slot `(orientation - i) mod 3`.
///
/// Both faces are counterclockwise from their own outside, so after the child
/// is flipped onto the parent its traversal direction is reversed.
pub fn mated_vertex_slot(child_slot: usize, orientation: usize) -> usize {
    (orientation + 3 - child_slot) % 3
}

fn face_frame(face: &Face, start: &Vec3, normal: &Vec3) -> Matrix3<f64> {
    let u = (start - face.centroid()).normalize();
    let w = normal.cross(&u);
    Matrix3::from_columns(&[u, w, *normal])
}

/// Transform that places a child module so that `child_face` sits flush
/// against `parent_face`.
///
/// Both faces are given in their own module frames; the result maps child
/// module coordinates into parent module coordinates.
pub fn mate_transform(parent_face: &Face, child_face: &Face, orientation: usize) -> Result<RigidTransform> {
    if orientation > 2 {
        return Err(Error::InvalidArgument(format!("orientation must be 0, 1 or 2, got {orientation}")));
    }
    let (lp, lc) = (parent_face.edge_length(), child_face.edge_length());
    if (lp - lc).abs() > 1e-9 * lp.max(lc) {
        return Err(Error::InvalidArgument(format!(
            "cannot mate faces of different module scales (edge {lp} vs {lc})"
        )));
    }
    let child_frame = face_frame(child_face, &child_face.corners[0], &child_face.outward_normal);
    let target_frame = face_frame(
        parent_face,
        &parent_face.corners[mated_vertex_slot(0, orientation)],
        &(-parent_face.outward_normal),
    );
    let rotation = Rotation3::from_matrix_unchecked(target_frame * child_frame.transpose());
    let translation = parent_face.centroid() - rotation * child_face.centroid();
    Ok(IsometryMatrix3::from_parts(Translation3::from(translation), rotation))
}

/// Morphology of one module as read from a genome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModuleSpec {
    /// `None` only for the root.
    pub parent: Option<usize>,
    pub parent_face: usize,
    pub orientation: usize,
    pub actuation_face: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulePlacement {
    pub module_index: usize,
    pub parent_index: Option<usize>,
    pub parent_face: usize,
    pub orientation: usize,
    pub actuation_face: usize,
    /// Maps canonical module coordinates to robot coordinates.
    pub transform: RigidTransform,
}

fn check_tree(entries: impl Iterator<Item = (usize, Option<usize>, usize, usize, usize)>) -> Result<usize> {
    let mut occupied: Vec<[bool; FACE_COUNT]> = Vec::new();
    for (index, parent, parent_face, orientation, actuation_face) in entries {
        if parent_face >= FACE_COUNT || actuation_face >= FACE_COUNT || orientation > 2 {
            return Err(Error::InvalidSpec(format!("module {index}: gene out of range")));
        }
        occupied.push([false; FACE_COUNT]);
        match (index, parent) {
            (0, None) => {}
            (0, Some(_)) => return Err(Error::InvalidSpec("root module cannot have a parent".into())),
            (_, None) => return Err(Error::InvalidSpec(format!("module {index} has no parent"))),
            (_, Some(p)) if p >= index => {
                return Err(Error::InvalidSpec(format!("module {index} has parent {p}, parents must come first")))
            }
            (_, Some(p)) => {
                if occupied[p][parent_face] {
                    return Err(Error::InvalidSpec(format!(
                        "face {parent_face} of module {p} is already occupied (requested by module {index})"
                    )));
                }
                occupied[p][parent_face] = true;
                occupied[index][ATTACH_FACE] = true;
            }
        }
    }
    if occupied.is_empty() {
        return Err(Error::InvalidSpec("robot has no modules".into()));
    }
    Ok(occupied.len())
}

/// Resolves module poses for a tree of module specs rooted at module 0.
pub fn place_modules(specs: &[ModuleSpec], template: &ModuleTemplate) -> Result<Vec<ModulePlacement>> {
    check_tree(
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.parent, s.parent_face, s.orientation, s.actuation_face)),
    )?;
    let attach = template.face(ATTACH_FACE);
    let mut placements: Vec<ModulePlacement> = Vec::with_capacity(specs.len());
    for (index, spec) in specs.iter().enumerate() {
        let transform = match spec.parent {
            None => RigidTransform::identity(),
            Some(p) => {
                let local = mate_transform(template.face(spec.parent_face), attach, spec.orientation)?;
                placements[p].transform * local
            }
        };
        placements.push(ModulePlacement {
            module_index: index,
            parent_index: spec.parent,
            parent_face: spec.parent_face,
            orientation: spec.orientation,
            actuation_face: spec.actuation_face,
            transform,
        });
    }
    Ok(placements)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceConstraint {
    pub nodes: [usize; 2],
    pub target_length: f64,
}

/// Flattened multi-module robot ready for simulation.
///
/// Module `m` owns nodes `12 m .. 12 m + 12` in template order. Cables are
/// stored per module: 24 passive cables followed by the 3 actuation cables.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledRobot {
    pub node_positions: Vec<Vec3>,
    pub node_mass: f64,
    pub struts: Vec<DistanceConstraint>,
    pub welds: Vec<DistanceConstraint>,
    pub cables: Vec<CableSpec>,
    pub actuation_groups: Vec<ActuationGroup>,
}

impl AssembledRobot {
    pub fn module_count(&self) -> usize {
        self.node_positions.len() / NODES_PER_MODULE
    }

    pub fn node_count(&self) -> usize {
        self.node_positions.len()
    }

    pub fn module_nodes(&self, module: usize) -> std::ops::Range<usize> {
        module * NODES_PER_MODULE..(module + 1) * NODES_PER_MODULE
    }
}

fn cable_damping(stiffness: f64, damping_ratio: f64, node_mass: f64) -> f64 {
    // Critical damping of the two-mass oscillator uses the reduced mass m / 2.
    2.0 * damping_ratio * (stiffness * node_mass * 0.5).sqrt()
}

/// Flattens placed modules into one robot.
///
/// Welds latch the three vertex pairs of every mated face pair. Each module
/// gets one actuation group of three cables running from the vertices of its
/// actuation face through the module center to the antipodal vertices. The
/// whole robot is then lifted so its lowest node sits [`GROUND_CLEARANCE`]
/// above the ground.
pub fn assemble(
    placements: &[ModulePlacement],
    template: &ModuleTemplate,
    material: &MaterialParams,
) -> Result<AssembledRobot> {
    if placements.iter().enumerate().any(|(i, p)| p.module_index != i) {
        return Err(Error::InvalidSpec("placements must be listed in module order".into()));
    }
    check_tree(
        placements
            .iter()
            .map(|p| (p.module_index, p.parent_index, p.parent_face, p.orientation, p.actuation_face)),
    )?;
    material.validate()?;

    let modules = placements.len();
    let mut node_positions = Vec::with_capacity(modules * NODES_PER_MODULE);
    let mut struts = Vec::with_capacity(modules * STRUTS_PER_MODULE);
    let mut welds = Vec::with_capacity(3 * modules.saturating_sub(1));
    let mut cables = Vec::with_capacity(modules * (CABLES_PER_MODULE + 3));
    let mut actuation_groups = Vec::with_capacity(modules);

    let rest_length = template.cable_length() * (1.0 - material.cable_prestrain);
    let axial_rigidity = material.youngs_modulus * material.cable_cross_section;
    let passive_stiffness = axial_rigidity / rest_length;
    let passive_damping = cable_damping(passive_stiffness, material.cable_damping_ratio, NODE_MASS);
    let actuated_stiffness =
        ACTUATION_STIFFNESS_FACTOR * material.actuator_youngs_modulus * material.cable_cross_section / rest_length;
    let actuated_damping = cable_damping(actuated_stiffness, material.cable_damping_ratio, NODE_MASS);
    let strut_length = template.strut_length;

    for (m, placement) in placements.iter().enumerate() {
        let base = m * NODES_PER_MODULE;
        node_positions.extend(template.nodes.iter().map(|p| placement.transform * nalgebra::Point3::from(*p)).map(|p| p.coords));
        struts.extend(template.struts.iter().map(|&[a, b]| DistanceConstraint {
            nodes: [base + a, base + b],
            target_length: strut_length,
        }));
        cables.extend(template.cables.iter().map(|&[a, b]| CableSpec {
            endpoints: [base + a, base + b],
            rest_length,
            stiffness: passive_stiffness,
            damping: passive_damping,
            actuation_group: None,
        }));

        let face = template.face(placement.actuation_face);
        let first_cable = cables.len();
        let natural_length = 2.0 * template.nodes[face.vertex_ids[0]].norm();
        for &v in &face.vertex_ids {
            cables.push(CableSpec {
                endpoints: [base + v, base + template.antipode(v)],
                rest_length: natural_length,
                stiffness: actuated_stiffness,
                damping: actuated_damping,
                actuation_group: Some(m),
            });
        }
        actuation_groups.push(ActuationGroup {
            cable_ids: [first_cable, first_cable + 1, first_cable + 2],
            natural_length,
            max_contraction: MAX_CONTRACTION,
        });

        if let Some(p) = placement.parent_index {
            let parent_face = template.face(placement.parent_face);
            let child_face = template.face(ATTACH_FACE);
            for slot in 0..3 {
                welds.push(DistanceConstraint {
                    nodes: [
                        base + child_face.vertex_ids[slot],
                        p * NODES_PER_MODULE + parent_face.vertex_ids[mated_vertex_slot(slot, placement.orientation)],
                    ],
                    target_length: 0.0,
                });
            }
        }
    }

    let lowest = node_positions.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let lift = GROUND_CLEARANCE - lowest;
    for p in &mut node_positions {
        p.z += lift;
    }

    Ok(AssembledRobot {
        node_positions,
        node_mass: NODE_MASS,
        struts,
        welds,
        cables,
        actuation_groups,
    })
}

/// Places and assembles in one go.
pub fn build_robot(specs: &[ModuleSpec], template: &ModuleTemplate, material: &MaterialParams) -> Result<AssembledRobot> {
    let placements = place_modules(specs, template)?;
    assemble(&placements, template, material)
}
