"""Chamfer-loss body fitting.

The objective is the two-sided sum of squared nearest-neighbor distances
between points sampled from the posed model surface and points sampled from
the target (carved) mesh.  Optimization runs Adam over (theta, beta,
t_global).

Gradients are analytic: nearest-neighbor correspondences and the
barycentric surface samples are frozen at the current iterate, making the
loss a smooth quadratic in the sample positions, and the chain rule runs
through linear blend skinning and the kinematic tree.  Correspondences are
piecewise-constant in the parameters, so away from switching boundaries
this equals the true gradient.  A central-finite-difference mode over the
same frozen objective provides the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .body import BodyModel, BodyParams, rodrigues_jacobian, skin_detail
from .errors import FitDivergenceError, InputError
from .geometry import TriMesh
from .surface import barycentric_points, sample_surface_detail

__all__ = ["FitConfig", "FitResult", "chamfer_loss", "loss_and_gradient", "fit"]


@dataclass
class FitConfig:
    lr: float = 0.01
    iters: int = 1000
    n_samples: int = 50_000
    seed: int = 0
    beta_dim: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    resample_every: int = 10
    gradient: str = "analytic"  # analytic | finite-difference
    fd_step: float = 1e-5
    beta_l2: float = 0.0  # optional shape regularizer, off by default
    yaw_search: bool = False  # try 8 initial yaw angles, keep the best

    def __post_init__(self):
        if self.lr <= 0 or self.iters <= 0 or self.n_samples <= 0:
            raise InputError("lr, iters and n_samples must be positive")
        if self.gradient not in ("analytic", "finite-difference"):
            raise InputError(f"unknown gradient mode {self.gradient!r}")


@dataclass
class FitResult:
    params: BodyParams
    loss_trace: np.ndarray
    converged: bool

    def to_dict(self) -> dict:
        return {
            "theta": self.params.theta.tolist(),
            "beta": self.params.beta.tolist(),
            "t": self.params.t_global.tolist(),
            "loss_trace": np.asarray(self.loss_trace).tolist(),
            "converged": bool(self.converged),
        }

    @staticmethod
    def from_dict(d: dict) -> "FitResult":
        return FitResult(
            params=BodyParams(np.array(d["beta"]), np.array(d["theta"]), np.array(d["t"])),
            loss_trace=np.array(d["loss_trace"]),
            converged=bool(d["converged"]),
        )


def chamfer_loss(P: np.ndarray, Q: np.ndarray) -> float:
    """Two-sided sum (not mean) of squared nearest-neighbor distances (m^2)."""
    P = np.asarray(P, dtype=np.float64).reshape(-1, 3)
    Q = np.asarray(Q, dtype=np.float64).reshape(-1, 3)
    if len(P) == 0 or len(Q) == 0:
        raise InputError("chamfer loss needs two non-empty point clouds")
    d_pq, _ = cKDTree(Q).query(P, k=1)
    d_qp, _ = cKDTree(P).query(Q, k=1)
    return float(np.sum(d_pq**2) + np.sum(d_qp**2))


@dataclass
class _Frozen:
    """Everything held fixed between correspondence refreshes."""

    face_idx: np.ndarray
    uv: np.ndarray
    coeffs: np.ndarray  # (n, 3) barycentric weights of the three face corners
    target: np.ndarray  # (m, 3) target samples
    a_idx: np.ndarray  # target index nearest to each model sample
    b_idx: np.ndarray  # model-sample index nearest to each target point


def _freeze(model: BodyModel, verts: np.ndarray, faces: np.ndarray, target: np.ndarray,
            face_idx: np.ndarray, uv: np.ndarray) -> _Frozen:
    mesh = TriMesh(verts, faces)
    samples = barycentric_points(mesh, face_idx, uv)
    _, a_idx = cKDTree(target).query(samples, k=1)
    _, b_idx = cKDTree(samples).query(target, k=1)
    coeffs = np.stack([1.0 - uv[:, 0] - uv[:, 1], uv[:, 0], uv[:, 1]], axis=1)
    return _Frozen(face_idx, uv, coeffs, target, a_idx, b_idx)


def _frozen_loss_and_sample_grad(samples: np.ndarray, frozen: _Frozen) -> tuple[float, np.ndarray]:
    diff_a = samples - frozen.target[frozen.a_idx]
    diff_b = samples[frozen.b_idx] - frozen.target
    loss = float(np.sum(diff_a**2) + np.sum(diff_b**2))
    g = 2.0 * diff_a
    np.add.at(g, frozen.b_idx, 2.0 * diff_b)
    return loss, g


def _sample_positions(model: BodyModel, detail: dict, frozen: _Frozen) -> np.ndarray:
    tri = detail["verts"][model.faces[frozen.face_idx]]
    return np.einsum("nk,nkc->nc", frozen.coeffs, tri)


def _frozen_loss(model: BodyModel, params: BodyParams, frozen: _Frozen) -> float:
    detail = skin_detail(model, params)
    samples = _sample_positions(model, detail, frozen)
    loss, _ = _frozen_loss_and_sample_grad(samples, frozen)
    return loss


def _analytic_gradient(model: BodyModel, params: BodyParams, frozen: _Frozen) -> tuple[float, np.ndarray, dict]:
    """Loss and flat gradient [theta, beta, t] for the frozen objective."""
    J = model.n_joints
    B = len(params.beta)
    detail = skin_detail(model, params)
    samples = _sample_positions(model, detail, frozen)
    loss, g_s = _frozen_loss_and_sample_grad(samples, frozen)

    # pull sample gradients back onto vertices through the barycentric mix
    gbar = np.zeros((model.n_vertices, 3))
    fv = model.faces[frozen.face_idx]  # (n, 3) vertex ids
    for corner in range(3):
        np.add.at(gbar, fv[:, corner], frozen.coeffs[:, corner, None] * g_s)

    W_world = detail["W_world"]
    j_world = detail["j_world"]
    J_rest = detail["J_rest"]
    T_P = detail["T_P"]
    R_local = detail["R_local"]

    grad_t = gbar.sum(axis=0)

    # per-joint aggregates: S_j = sum_v w_vj (y_vj x gbar_v), G_j = sum_v w_vj gbar_v
    S = np.empty((J, 3))
    G = np.empty((J, 3))
    for j in range(J):
        w = model.weights[:, j]
        y = (T_P - J_rest[j]) @ W_world[j].T + j_world[j]
        S[j] = (w[:, None] * np.cross(y, gbar)).sum(axis=0)
        G[j] = w @ gbar
    # subtree sums via reverse order (parents precede children in index)
    SS = S.copy()
    GG = G.copy()
    for j in range(J - 1, 0, -1):
        p = model.parents[j]
        SS[p] += SS[j]
        GG[p] += GG[j]

    u = np.einsum("vab,va->vb", detail["A"], gbar)  # A_v^T gbar_v
    use_pose_basis = model.pose_basis.size > 0 and np.any(model.pose_basis)
    if use_pose_basis:
        E = np.einsum("vc,vcm->m", u, model.pose_basis)

    grad_theta = np.zeros((J, 3))
    theta = params.theta.reshape(J, 3)
    for k in range(J):
        dR = rodrigues_jacobian(theta[k])  # (3, 3, 3)
        Wp = W_world[model.parents[k]] if k > 0 else np.eye(3)
        lever = SS[k] - np.cross(j_world[k], GG[k])
        for alpha in range(3):
            skew = dR[alpha] @ R_local[k].T
            u_k = np.array([skew[2, 1], skew[0, 2], skew[1, 0]])
            grad_theta[k, alpha] = (Wp @ u_k) @ lever
            if use_pose_basis and k > 0:
                grad_theta[k, alpha] += E[9 * (k - 1): 9 * k] @ dR[alpha].reshape(-1)

    grad_beta = np.zeros(B)
    if B:
        sb = model.shape_basis[:, :, :B]
        grad_beta += np.einsum("vc,vcb->b", u, sb)
        dJ = np.einsum("jv,vcb->jcb", model.joint_regressor, sb)  # (J, 3, B)
        dj = np.empty_like(dJ)
        dj[0] = dJ[0]
        for j in range(1, J):
            p = model.parents[j]
            dj[j] = dj[p] + np.einsum("ab,bB->aB", W_world[p], dJ[j] - dJ[p])
        grad_beta += np.einsum("jc,jcb->b", G, dj)
        grad_beta -= np.einsum("jc,jcb->b", G, np.einsum("jab,jbB->jaB", W_world, dJ))

    flat = np.concatenate([grad_theta.reshape(-1), grad_beta, grad_t])
    return loss, flat, detail


def _fd_gradient(model: BodyModel, params: BodyParams, frozen: _Frozen, h: float) -> tuple[float, np.ndarray]:
    """Central differences of the frozen objective (the analytic oracle)."""
    loss0 = _frozen_loss(model, params, frozen)
    packed = _pack(params)
    grad = np.empty_like(packed)
    for i in range(len(packed)):
        up = packed.copy()
        dn = packed.copy()
        up[i] += h
        dn[i] -= h
        lu = _frozen_loss(model, _unpack(up, model, len(params.beta)), frozen)
        ld = _frozen_loss(model, _unpack(dn, model, len(params.beta)), frozen)
        grad[i] = (lu - ld) / (2.0 * h)
    return loss0, grad


def _pack(params: BodyParams) -> np.ndarray:
    return np.concatenate([params.theta, params.beta, params.t_global])


def _unpack(flat: np.ndarray, model: BodyModel, beta_dim: int) -> BodyParams:
    nt = 3 * model.n_joints
    return BodyParams(
        beta=flat[nt: nt + beta_dim], theta=flat[:nt], t_global=flat[nt + beta_dim:]
    )


def loss_and_gradient(
    model: BodyModel, params: BodyParams, target: np.ndarray, cfg: FitConfig
) -> tuple[float, np.ndarray]:
    """Chamfer loss against a target point cloud and its parameter gradient.

    Surface samples and correspondences are frozen at the given params; the
    gradient mode comes from cfg.  The flat layout is [theta, beta, t].
    """
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(target) == 0:
        raise InputError("target cloud is empty")
    detail = skin_detail(model, params)
    mesh = TriMesh(detail["verts"], model.faces)
    rng = np.random.default_rng(cfg.seed)
    _, face_idx, uv = sample_surface_detail(mesh, cfg.n_samples, rng)
    frozen = _freeze(model, detail["verts"], model.faces, target, face_idx, uv)
    if cfg.gradient == "analytic":
        loss, grad, _ = _analytic_gradient(model, params, frozen)
        return loss, grad
    return _fd_gradient(model, params, frozen, cfg.fd_step)


class _Adam:
    """Published update rule with bias correction; nothing exotic."""

    def __init__(self, n: int, lr: float, beta1: float, beta2: float, eps: float):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def default_init(model: BodyModel, target_mesh: TriMesh, beta_dim: int) -> BodyParams:
    """Zero pose/shape, translation aligning rest centroid to target centroid."""
    params = model.zero_params(beta_dim)
    params.t_global = target_mesh.vertices.mean(axis=0) - model.template.mean(axis=0)
    return params


def fit(
    model: BodyModel,
    target_mesh: TriMesh,
    init: BodyParams | None = None,
    cfg: FitConfig | None = None,
) -> FitResult:
    """Adam minimization of the two-sided Chamfer loss.

    Deterministic for a fixed seed; correspondences and surface samples
    refresh every cfg.resample_every iterations.
    """
    cfg = cfg or FitConfig()
    if target_mesh.is_empty:
        raise InputError("target mesh is empty")
    if init is None:
        init = default_init(model, target_mesh, cfg.beta_dim)
    if cfg.yaw_search:
        init = _yaw_search(model, target_mesh, init, cfg)

    rng = np.random.default_rng(cfg.seed)
    x = _pack(init)
    beta_dim = len(init.beta)
    adam = _Adam(len(x), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    trace = np.empty(cfg.iters)
    frozen = None

    for i in range(cfg.iters):
        params = _unpack(x, model, beta_dim)
        if i % cfg.resample_every == 0 or frozen is None:
            detail = skin_detail(model, params)
            posed = TriMesh(detail["verts"], model.faces)
            _, face_idx, uv = sample_surface_detail(posed, cfg.n_samples, rng)
            target_pts, _, _ = sample_surface_detail(target_mesh, cfg.n_samples, rng)
            frozen = _freeze(model, detail["verts"], model.faces, target_pts, face_idx, uv)
        loss, grad, _ = _analytic_gradient(model, params, frozen)
        if cfg.beta_l2 > 0:
            nt = 3 * model.n_joints
            loss += cfg.beta_l2 * float(np.sum(x[nt: nt + beta_dim] ** 2))
            grad[nt: nt + beta_dim] += 2.0 * cfg.beta_l2 * x[nt: nt + beta_dim]
        if not np.isfinite(loss):
            raise FitDivergenceError(i)
        trace[i] = loss
        x = adam.step(x, grad)

    final = _unpack(x, model, beta_dim)
    converged = bool(np.isfinite(trace[-1]) and trace[-1] <= trace[0])
    return FitResult(params=final, loss_trace=trace, converged=converged)


def _yaw_search(model: BodyModel, target_mesh: TriMesh, init: BodyParams, cfg: FitConfig) -> BodyParams:
    """Coarse global-orientation search: 8 yaw angles, lowest initial loss wins."""
    target_pts, _, _ = sample_surface_detail(
        target_mesh, min(cfg.n_samples, 5000), np.random.default_rng(cfg.seed)
    )
    best = None
    best_loss = np.inf
    for k in range(8):
        cand = init.copy()
        cand.theta = cand.theta.copy()
        cand.theta[0:3] = [0.0, 2.0 * np.pi * k / 8.0, 0.0]
        detail = skin_detail(model, cand)
        mesh = TriMesh(detail["verts"], model.faces)
        pts, _, _ = sample_surface_detail(mesh, min(cfg.n_samples, 5000), np.random.default_rng(cfg.seed))
        loss = chamfer_loss(pts, target_pts)
        if loss < best_loss:
            best_loss = loss
            best = cand
    return best
