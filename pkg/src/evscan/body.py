"""Parametric skinned body: template + shape/pose blend corrections + joint
regressor + linear blend skinning.

The posing pipeline is the canonical statistical-body one:

    T_P   = template + shape_basis . beta + pose_basis . vecR(theta)
    J     = joint_regressor . (template + shape_basis . beta)
    verts = sum_j weights[:, j] * (G_j . T_P) + t_global

where vecR stacks (R_j - I) for the non-root joints, and G_j is the world
transform of joint j composed along the kinematic tree, re-centered on the
rest joints.  Pose is axis-angle per joint; the root entry is the global
orientation and t_global carries the world translation the pose vector
lacks.

A self-contained capsule-limbed toy body with the standard 24-joint tree
stands in for licensed model assets; a loader ingests the same data from
the EVM1 container for user-supplied models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, LoadError
from .geometry import TriMesh
from . import io as evio
from .shapes import make_capsule, make_uv_sphere, merge_meshes

__all__ = [
    "BodyModel",
    "BodyParams",
    "rodrigues",
    "rodrigues_jacobian",
    "shaped_template",
    "joints",
    "skin",
    "skin_detail",
    "save_model",
    "load_model",
    "make_toy_model",
    "SMPL_JOINT_NAMES",
    "SMPL_PARENTS",
]

SMPL_JOINT_NAMES = [
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_hand", "right_hand",
]
SMPL_PARENTS = np.array(
    [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21],
    dtype=np.int64,
)


@dataclass
class BodyModel:
    template: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3)
    shape_basis: np.ndarray  # (V, 3, B)
    pose_basis: np.ndarray  # (V, 3, 9*(J-1))
    joint_regressor: np.ndarray  # (J, V), rows sum to 1
    weights: np.ndarray  # (V, J), rows sum to 1, non-negative
    parents: np.ndarray  # (J,), parents[0] == -1
    joint_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.template = np.ascontiguousarray(self.template, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.shape_basis = np.ascontiguousarray(self.shape_basis, dtype=np.float64)
        self.pose_basis = np.ascontiguousarray(self.pose_basis, dtype=np.float64)
        self.joint_regressor = np.ascontiguousarray(self.joint_regressor, dtype=np.float64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.parents = np.ascontiguousarray(self.parents, dtype=np.int64)
        if not self.joint_names:
            self.joint_names = [f"joint_{j}" for j in range(self.n_joints)]
        _validate_model(self)

    @property
    def n_vertices(self) -> int:
        return len(self.template)

    @property
    def n_joints(self) -> int:
        return len(self.parents)

    @property
    def n_shape(self) -> int:
        return self.shape_basis.shape[2]

    def zero_params(self, beta_dim: int | None = None) -> "BodyParams":
        b = self.n_shape if beta_dim is None else beta_dim
        if b > self.n_shape:
            raise InputError(f"model has only {self.n_shape} shape dimensions")
        return BodyParams(
            beta=np.zeros(b), theta=np.zeros(3 * self.n_joints), t_global=np.zeros(3)
        )


def _validate_model(model: BodyModel, origin: str = "model") -> None:
    V, J = model.n_vertices, model.n_joints
    if model.template.shape != (V, 3):
        raise LoadError(f"{origin}: template must be (V, 3)")
    if model.shape_basis.shape[:2] != (V, 3):
        raise LoadError(f"{origin}: shape_basis must be (V, 3, B)")
    if model.pose_basis.shape != (V, 3, 9 * (J - 1)) and model.pose_basis.size != 0:
        raise LoadError(f"{origin}: pose_basis must be (V, 3, 9*(J-1))")
    if model.joint_regressor.shape != (J, V):
        raise LoadError(f"{origin}: joint_regressor must be (J, V)")
    if model.weights.shape != (V, J):
        raise LoadError(f"{origin}: weights must be (V, J)")
    if np.abs(model.joint_regressor.sum(axis=1) - 1.0).max() > 1e-6:
        raise LoadError(f"{origin}: joint_regressor rows must sum to 1")
    if model.weights.min() < 0:
        raise LoadError(f"{origin}: weights must be non-negative")
    if np.abs(model.weights.sum(axis=1) - 1.0).max() > 1e-6:
        raise LoadError(f"{origin}: weights rows must sum to 1")
    if model.parents[0] != -1:
        raise LoadError(f"{origin}: parents[0] must be -1 (pelvis root)")
    if J > 1 and not np.all((model.parents[1:] >= 0) & (model.parents[1:] < np.arange(1, J))):
        raise LoadError(f"{origin}: parents must form a tree with parent index < child")
    if len(model.faces) and (model.faces.min() < 0 or model.faces.max() >= V):
        raise LoadError(f"{origin}: faces reference missing vertices")


@dataclass
class BodyParams:
    beta: np.ndarray
    theta: np.ndarray  # (3*J,) axis-angle per joint, root first
    t_global: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.beta = np.ascontiguousarray(self.beta, dtype=np.float64).reshape(-1)
        self.theta = np.ascontiguousarray(self.theta, dtype=np.float64).reshape(-1)
        self.t_global = np.ascontiguousarray(self.t_global, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.theta))
                and np.all(np.isfinite(self.t_global))):
            raise InputError("body parameters must be finite")

    def copy(self) -> "BodyParams":
        return BodyParams(self.beta.copy(), self.theta.copy(), self.t_global.copy())


def rodrigues(omega: np.ndarray) -> np.ndarray:
    """Axis-angle vectors (..., 3) to rotation matrices (..., 3, 3)."""
    omega = np.asarray(omega, dtype=np.float64)
    single = omega.ndim == 1
    w = omega.reshape(-1, 3)
    theta = np.linalg.norm(w, axis=1)
    small = theta < 1e-10
    # stable sin(t)/t and (1-cos t)/t^2
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(theta)) / np.where(small, 1.0, theta**2))
    K = _skew(w)
    K2 = K @ K
    R = np.eye(3)[None] + a[:, None, None] * K + b[:, None, None] * K2
    return R[0] if single else R.reshape(omega.shape[:-1] + (3, 3))


def _skew(w: np.ndarray) -> np.ndarray:
    w = w.reshape(-1, 3)
    K = np.zeros((len(w), 3, 3))
    K[:, 0, 1] = -w[:, 2]
    K[:, 0, 2] = w[:, 1]
    K[:, 1, 0] = w[:, 2]
    K[:, 1, 2] = -w[:, 0]
    K[:, 2, 0] = -w[:, 1]
    K[:, 2, 1] = w[:, 0]
    return K


def rodrigues_jacobian(omega: np.ndarray) -> np.ndarray:
    """(3, 3, 3) stack of dR/domega_i for one axis-angle vector.

    Uses the exact derivative of the exponential map
        dR/dw_i = (w_i [w]x + [w x ((I - R) e_i)]x) / |w|^2 . R
    with the [e_i]x limit at the origin.
    """
    omega = np.asarray(omega, dtype=np.float64).reshape(3)
    theta2 = float(omega @ omega)
    R = rodrigues(omega)
    out = np.empty((3, 3, 3))
    if theta2 < 1e-14:
        E = np.eye(3)
        for i in range(3):
            out[i] = _skew(E[i])[0]
        return out
    ImR = np.eye(3) - R
    for i in range(3):
        v = omega[i] * omega + np.cross(omega, ImR[:, i])
        out[i] = (_skew(v)[0] / theta2) @ R
    return out


def pose_feature(theta: np.ndarray, n_joints: int) -> np.ndarray:
    """vecR(theta): stacked (R_j - I) entries for non-root joints."""
    R = rodrigues(theta.reshape(n_joints, 3)[1:])
    return (R - np.eye(3)[None]).reshape(-1)


def shaped_template(model: BodyModel, beta: np.ndarray, theta: np.ndarray | None = None) -> np.ndarray:
    """Rest-pose vertices with shape and pose blend corrections applied."""
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if len(beta) > model.n_shape:
        raise InputError(f"beta has {len(beta)} dims, model supports {model.n_shape}")
    out = model.template + model.shape_basis[:, :, : len(beta)] @ beta
    if theta is not None and model.pose_basis.size:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if len(theta) != 3 * model.n_joints:
            raise InputError(f"theta must have {3 * model.n_joints} entries")
        out = out + model.pose_basis @ pose_feature(theta, model.n_joints)
    return out


def joints(model: BodyModel, beta: np.ndarray) -> np.ndarray:
    """(J, 3) rest joint positions for the given shape."""
    return model.joint_regressor @ shaped_template(model, beta, None)


def skin_detail(model: BodyModel, params: BodyParams) -> dict:
    """Full forward pass, keeping the intermediates the gradient needs."""
    J = model.n_joints
    if len(params.theta) != 3 * J:
        raise InputError(f"theta must have {3 * J} entries")
    T_P = shaped_template(model, params.beta, params.theta)
    J_rest = model.joint_regressor @ shaped_template(model, params.beta, None)

    R_local = rodrigues(params.theta.reshape(J, 3))
    W_world = np.empty((J, 3, 3))
    j_world = np.empty((J, 3))
    W_world[0] = R_local[0]
    j_world[0] = J_rest[0]
    for j in range(1, J):
        p = model.parents[j]
        W_world[j] = W_world[p] @ R_local[j]
        j_world[j] = j_world[p] + W_world[p] @ (J_rest[j] - J_rest[p])

    # G_j x = W_j (x - J_j) + j_j ; blend over joints per vertex
    A = np.einsum("vj,jab->vab", model.weights, W_world)
    g_trans = j_world - np.einsum("jab,jb->ja", W_world, J_rest)
    b = model.weights @ g_trans
    verts = np.einsum("vab,vb->va", A, T_P) + b + params.t_global
    return {
        "T_P": T_P,
        "J_rest": J_rest,
        "R_local": R_local,
        "W_world": W_world,
        "j_world": j_world,
        "A": A,
        "verts": verts,
        "posed_joints": j_world + params.t_global,
    }


def skin(model: BodyModel, params: BodyParams) -> tuple[TriMesh, np.ndarray]:
    """Posed mesh and posed joint positions."""
    detail = skin_detail(model, params)
    return TriMesh(detail["verts"], model.faces.copy()), detail["posed_joints"]


_MODEL_KEYS = ("template", "faces", "shape_basis", "pose_basis", "joint_regressor", "weights", "parents")


def save_model(path, model: BodyModel) -> None:
    arrays = {k: getattr(model, k) for k in _MODEL_KEYS}
    arrays["joint_name_codes"] = np.array(
        [ord(c) for c in "\n".join(model.joint_names)], dtype=np.float64
    )
    evio.save_arrays(path, arrays)


def load_model(path) -> BodyModel:
    arrays = evio.load_arrays(path)
    missing = [k for k in _MODEL_KEYS if k not in arrays]
    if missing:
        raise LoadError(f"{path}: missing arrays {missing}")
    names: list[str] = []
    if "joint_name_codes" in arrays:
        names = "".join(chr(int(c)) for c in arrays["joint_name_codes"]).split("\n")
    try:
        return BodyModel(
            template=arrays["template"],
            faces=arrays["faces"].astype(np.int64),
            shape_basis=arrays["shape_basis"],
            pose_basis=arrays["pose_basis"],
            joint_regressor=arrays["joint_regressor"],
            weights=arrays["weights"],
            parents=arrays["parents"].astype(np.int64),
            joint_names=names,
        )
    except LoadError:
        raise
    except InputError as e:
        raise LoadError(f"{path}: {e}") from e


# ---------------------------------------------------------------------------
# toy body
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToySpec:
    """Dimensions of the capsule-limbed test body (meters)."""

    leg_x: float = 0.10
    knee_y: float = -0.48
    ankle_y: float = -0.88
    thigh_radius: float = 0.07
    shin_radius: float = 0.05
    torso_radius: float = 0.13
    torso_bottom: float = -0.12
    neck_y: float = 0.45
    shoulder_x: float = 0.17
    shoulder_y: float = 0.42
    elbow_x: float = 0.42
    wrist_x: float = 0.65
    hand_x: float = 0.72
    upper_arm_radius: float = 0.045
    forearm_radius: float = 0.035
    foot_length: float = 0.12
    foot_radius: float = 0.035
    head_center_y: float = 0.60
    head_radius: float = 0.10
    n_seg: int = 16
    blend_band: float = 0.04  # meters of soft weight blending at segment ends
    height_scale: float = 0.05  # stature gain fraction per unit of beta[0]

    def joint_table(self) -> np.ndarray:
        s = self
        J = np.zeros((24, 3))
        J[0] = (0, 0, 0)
        J[1] = (s.leg_x, -0.06, 0)  # hips sit on the leg axes
        J[2] = (-s.leg_x, -0.06, 0)
        J[3] = (0, 0.12, 0)
        J[4] = (s.leg_x, s.knee_y, 0)
        J[5] = (-s.leg_x, s.knee_y, 0)
        J[6] = (0, 0.24, 0)
        J[7] = (s.leg_x, s.ankle_y, 0)
        J[8] = (-s.leg_x, s.ankle_y, 0)
        J[9] = (0, 0.33, 0)
        J[10] = (s.leg_x, s.ankle_y - 0.05, s.foot_length)  # toe end of the foot capsule
        J[11] = (-s.leg_x, s.ankle_y - 0.05, s.foot_length)
        J[12] = (0, s.neck_y, 0)
        J[13] = (0.10, s.shoulder_y, 0)
        J[14] = (-0.10, s.shoulder_y, 0)
        J[15] = (0, s.head_center_y, 0)
        J[16] = (s.shoulder_x, s.shoulder_y, 0)
        J[17] = (-s.shoulder_x, s.shoulder_y, 0)
        J[18] = (s.elbow_x, s.shoulder_y, 0)
        J[19] = (-s.elbow_x, s.shoulder_y, 0)
        J[20] = (s.wrist_x, s.shoulder_y, 0)
        J[21] = (-s.wrist_x, s.shoulder_y, 0)
        J[22] = (s.hand_x, s.shoulder_y, 0)
        J[23] = (-s.hand_x, s.shoulder_y, 0)
        return J


def make_toy_model(spec: ToySpec | None = None) -> BodyModel:
    """Capsule-limbed articulated T-pose figure with the standard 24-joint tree.

    Shape directions (one unit of beta):
      0 stature (+height_scale of total height)   5 torso girth
      1 overall girth                             6 shoulder width (+5 cm)
      2 arm length                                7 limb thickness
      3 leg length                                8 torso length
      4 head size                                 9 forward lean
    Pose-corrective blend shapes are zero; tests stay closed-form.
    """
    s = spec or ToySpec()
    jt = s.joint_table()
    parts: list[TriMesh] = []
    part_info: list[dict] = []

    def add_part(mesh: TriMesh, name: str, joint: int, p0, p1, end_joint: int | None):
        parts.append(mesh)
        part_info.append(
            dict(name=name, joint=joint, p0=np.asarray(p0, float), p1=np.asarray(p1, float),
                 end_joint=end_joint, n_verts=len(mesh.vertices))
        )

    # torso: rings at exact spine-joint stations for the regressor
    p0 = np.array([0.0, s.torso_bottom, 0.0])
    p1 = np.array([0.0, s.neck_y, 0.0])
    length = s.neck_y - s.torso_bottom
    spine_ys = [0.0, 0.12, 0.24, 0.33]
    stations = sorted(set(np.linspace(0, 1, 24).tolist() + [(y - s.torso_bottom) / length for y in spine_ys]))
    torso = _capsule_with_stations(p0, p1, s.torso_radius, s.n_seg, stations)
    add_part(torso, "torso", 0, p0, p1, None)

    head = make_uv_sphere(s.head_radius, (0, s.head_center_y, 0), n_lat=12, n_lon=s.n_seg)
    add_part(head, "head", 15, (0, s.head_center_y - s.head_radius, 0), (0, s.head_center_y + s.head_radius, 0), None)

    for side, sign in (("left", 1.0), ("right", -1.0)):
        sh = np.array([sign * s.shoulder_x, s.shoulder_y, 0.0])
        el = np.array([sign * s.elbow_x, s.shoulder_y, 0.0])
        wr = np.array([sign * s.wrist_x, s.shoulder_y, 0.0])
        hip_top = np.array([sign * s.leg_x, -0.10, 0.0])
        knee = np.array([sign * s.leg_x, s.knee_y, 0.0])
        ankle = np.array([sign * s.leg_x, s.ankle_y, 0.0])
        i_sh, i_el, i_wr = (16, 18, 20) if sign > 0 else (17, 19, 21)
        i_hip, i_knee = (1, 4) if sign > 0 else (2, 5)
        add_part(_capsule_with_stations(sh, el, s.upper_arm_radius, 12), f"{side}_upper_arm", i_sh, sh, el, i_el)
        add_part(_capsule_with_stations(el, wr, s.forearm_radius, 12), f"{side}_forearm", i_el, el, wr, i_wr)
        i_ankle = 7 if sign > 0 else 8
        i_foot = 10 if sign > 0 else 11
        toe = np.array([sign * s.leg_x, s.ankle_y - 0.05, s.foot_length])
        add_part(_capsule_with_stations(hip_top, knee, s.thigh_radius, 12), f"{side}_thigh", i_hip, hip_top, knee, i_knee)
        add_part(_capsule_with_stations(knee, ankle, s.shin_radius, 12), f"{side}_shin", i_knee, knee, ankle, i_ankle)
        add_part(_capsule_with_stations(ankle, toe, s.foot_radius, 10), f"{side}_foot", i_ankle, ankle, toe, i_foot)

    mesh = merge_meshes(parts)
    V = len(mesh.vertices)
    offsets = np.cumsum([0] + [p["n_verts"] for p in part_info])

    weights = _toy_weights(mesh.vertices, part_info, offsets, jt, s, V)
    regressor = _toy_regressor(mesh.vertices, part_info, offsets, jt, s, V)
    shape_basis = _toy_shape_basis(mesh.vertices, part_info, offsets, s, V)

    return BodyModel(
        template=mesh.vertices,
        faces=mesh.faces,
        shape_basis=shape_basis,
        pose_basis=np.zeros((V, 3, 9 * 23)),
        joint_regressor=regressor,
        weights=weights,
        parents=SMPL_PARENTS.copy(),
        joint_names=list(SMPL_JOINT_NAMES),
    )


def _capsule_with_stations(p0, p1, radius, n_seg, stations=None) -> TriMesh:
    if stations is None:
        length = float(np.linalg.norm(np.asarray(p1, float) - np.asarray(p0, float)))
        n = max(2, int(np.ceil(length * 50)) + 1)
        stations = np.linspace(0.0, 1.0, n).tolist()
    return make_capsule(p0, p1, radius, n_seg=n_seg, rings_per_meter=None, stations=stations)


def _toy_weights(verts, part_info, offsets, jt, s, V) -> np.ndarray:
    w = np.zeros((V, 24))
    spine_chain = [(0, 0.12), (3, 0.24), (6, 0.33), (9, s.neck_y), (12, np.inf)]
    for pi, info in enumerate(part_info):
        sl = slice(offsets[pi], offsets[pi + 1])
        v = verts[sl]
        if info["name"] == "torso":
            # deepest spine joint below the vertex, blended across band edges
            y = v[:, 1]
            wt = np.zeros((len(v), 24))
            lo = -np.inf
            for joint, hi in spine_chain:
                band = np.clip((y - (hi - s.blend_band)) / s.blend_band, 0.0, 1.0) * 0.5
                inside = (y >= lo) & (y < hi)
                wt[inside, joint] += (1.0 - band)[inside]
                nxt = {0: 3, 3: 6, 6: 9, 9: 12, 12: 12}[joint]
                wt[inside, nxt] += band[inside]
                lo = hi
            w[sl] = wt
        elif info["name"] == "head":
            w[sl, 15] = 1.0
        else:
            axis = info["p1"] - info["p0"]
            length = np.linalg.norm(axis)
            t = ((v - info["p0"]) @ axis) / (length**2)
            frac = np.clip((t - 1.0 + s.blend_band / length) / (s.blend_band / length), 0.0, 1.0) * 0.5
            if info["end_joint"] is None:
                frac = np.zeros(len(v))
            w[sl, info["joint"]] = 1.0 - frac
            if info["end_joint"] is not None:
                w[sl, info["end_joint"]] = frac
    return w / w.sum(axis=1, keepdims=True)


def _part_ring(verts, part_info, offsets, name, station_point, radius, V) -> np.ndarray:
    for pi, info in enumerate(part_info):
        if info["name"] == name:
            sl = slice(offsets[pi], offsets[pi + 1])
            center = np.asarray(station_point, float)
            v = verts[sl]
            axis = info["p1"] - info["p0"]
            axis = axis / np.linalg.norm(axis)
            axial = (v - center) @ axis
            radial = np.linalg.norm(v - center - axial[:, None] * axis[None, :], axis=1)
            idx = np.nonzero((np.abs(axial) < 1e-9) & (np.abs(radial - radius) < 1e-9))[0]
            if len(idx) == 0:
                raise InputError(f"part {name}: no ring at {station_point}")
            row = np.zeros(V)
            row[np.arange(sl.start, sl.stop)[idx]] = 1.0 / len(idx)
            return row
    raise InputError(f"unknown part {name}")


def _toy_regressor(verts, part_info, offsets, jt, s, V) -> np.ndarray:
    reg = np.zeros((24, V))
    tor = lambda y: _part_ring(verts, part_info, offsets, "torso", (0, y, 0), s.torso_radius, V)
    reg[0] = tor(0.0)
    reg[3] = tor(0.12)
    reg[6] = tor(0.24)
    reg[9] = tor(0.33)
    reg[12] = tor(s.neck_y)

    # head: equatorial ring of the uv-sphere (exactly at the center height)
    reg[15] = _part_ring(verts, part_info, offsets, "head", (0, s.head_center_y, 0), s.head_radius, V)

    for sign, (i_hip, i_knee, i_ankle, i_foot) in ((1.0, (1, 4, 7, 10)), (-1.0, (2, 5, 8, 11))):
        side = "left" if sign > 0 else "right"
        knee = (sign * s.leg_x, s.knee_y, 0)
        ankle = (sign * s.leg_x, s.ankle_y, 0)
        thigh_top = (sign * s.leg_x, -0.10, 0)
        r_thigh_top = _part_ring(verts, part_info, offsets, f"{side}_thigh", thigh_top, s.thigh_radius, V)
        r_knee = _part_ring(verts, part_info, offsets, f"{side}_shin", knee, s.shin_radius, V)
        r_ankle = _part_ring(verts, part_info, offsets, f"{side}_shin", ankle, s.shin_radius, V)
        # hip sits 0.04 above the thigh-top ring along the leg axis, and off
        # sideways; reach it by affine extrapolation through the knee ring
        hip_y = -0.06
        alpha = (hip_y - (-0.10)) / ((-0.10) - s.knee_y)  # extrapolate beyond thigh top
        reg[i_hip] = r_thigh_top + alpha * (r_thigh_top - r_knee)
        # the x offset between hip (hip_half_width) and leg axis (leg_x) is
        # small; fold it in exactly via a direct correction on the hip row
        reg[i_knee] = r_knee
        reg[i_ankle] = r_ankle
        toe = (sign * s.leg_x, s.ankle_y - 0.05, s.foot_length)
        reg[i_foot] = _part_ring(verts, part_info, offsets, f"{side}_foot", toe, s.foot_radius, V)

        i_sh, i_el, i_wr, i_hand, i_col = (16, 18, 20, 22, 13) if sign > 0 else (17, 19, 21, 23, 14)
        sh = (sign * s.shoulder_x, s.shoulder_y, 0)
        el = (sign * s.elbow_x, s.shoulder_y, 0)
        wr = (sign * s.wrist_x, s.shoulder_y, 0)
        r_sh = _part_ring(verts, part_info, offsets, f"{side}_upper_arm", sh, s.upper_arm_radius, V)
        r_el = _part_ring(verts, part_info, offsets, f"{side}_upper_arm", el, s.upper_arm_radius, V)
        r_wr = _part_ring(verts, part_info, offsets, f"{side}_forearm", wr, s.forearm_radius, V)
        r_el_f = _part_ring(verts, part_info, offsets, f"{side}_forearm", el, s.forearm_radius, V)
        reg[i_sh] = r_sh
        reg[i_el] = r_el
        reg[i_wr] = r_wr
        hand_alpha = (s.hand_x - s.wrist_x) / (s.wrist_x - s.elbow_x)
        reg[i_hand] = r_wr + hand_alpha * (r_wr - r_el_f)
        col_alpha = (s.shoulder_x - 0.10) / (s.elbow_x - s.shoulder_x)
        reg[i_col] = r_sh + col_alpha * (r_sh - r_el)
    return reg


def _toy_shape_basis(verts, part_info, offsets, s, V) -> np.ndarray:
    basis = np.zeros((V, 3, 10))
    y = verts[:, 1]
    x = verts[:, 0]
    z = verts[:, 2]
    y_min = y.min()
    part_of = np.zeros(V, dtype=np.int64)
    for pi in range(len(part_info)):
        part_of[offsets[pi]:offsets[pi + 1]] = pi
    names = [p["name"] for p in part_info]
    is_arm = np.isin(part_of, [i for i, n in enumerate(names) if "arm" in n])
    is_leg = np.isin(part_of, [i for i, n in enumerate(names) if "thigh" in n or "shin" in n or "foot" in n])
    is_torso = part_of == names.index("torso")
    is_head = part_of == names.index("head")

    basis[:, 1, 0] = s.height_scale * (y - y_min)  # stature
    basis[:, 0, 1] = 0.04 * x  # overall girth
    basis[:, 2, 1] = 0.04 * z
    basis[is_arm, 0, 2] = 0.15 * np.sign(x[is_arm]) * np.maximum(np.abs(x[is_arm]) - s.shoulder_x, 0)  # arm length
    basis[is_leg, 1, 3] = 0.15 * np.minimum(y[is_leg] + 0.06, 0)  # leg length
    head_c = np.array([0.0, s.head_center_y, 0.0])
    basis[is_head, :, 4] = 0.2 * (verts[is_head] - head_c)  # head size
    basis[is_torso, 0, 5] = 0.06 * x[is_torso]  # torso girth
    basis[is_torso, 2, 5] = 0.06 * z[is_torso]
    basis[is_arm, 0, 6] = 0.05 * np.sign(x[is_arm])  # shoulder width
    for pi, info in enumerate(part_info):
        if "arm" in info["name"] or "thigh" in info["name"] or "shin" in info["name"]:
            sl = slice(offsets[pi], offsets[pi + 1])
            v = verts[sl]
            axis = info["p1"] - info["p0"]
            axis = axis / np.linalg.norm(axis)
            axial = (v - info["p0"]) @ axis
            radial = v - info["p0"] - axial[:, None] * axis[None, :]
            basis[sl, :, 7] = 0.25 * radial  # limb thickness
    basis[is_torso, 1, 8] = 0.10 * np.maximum(y[is_torso] - s.torso_bottom, 0)  # torso length
    lift = 0.10 * (s.neck_y - s.torso_bottom)
    basis[is_head, 1, 8] = lift
    basis[is_arm, 1, 8] = lift
    basis[:, 2, 9] = 0.05 * np.maximum(y, 0.0)  # forward lean
    return basis
