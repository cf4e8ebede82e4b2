"""Predictive controllers over Hankel data and the receding-horizon loop.

Every data-driven variant reduces to a box-constrained QP in a small set
of decision coordinates; the future inputs and predicted outputs are
affine in those coordinates and are eliminated before the solver sees the
problem.  The variants differ only in which coordinates are kept and in
which quadratic penalty is attached:

``spc``
    Future inputs as decisions, outputs through the unconstrained
    least-squares predictor.
``causal_spc``
    Same, with the causal predictor.
``gamma``
    Latent coordinates of the LQ factorization; the past component is
    fixed by the measured window and the residual coordinate carries a
    quadratic penalty ``mu`` (``mu -> inf`` recovers ``spc``; the hard
    variant with the residual coordinate removed is also available).
``causal_gamma``
    Only the future-input coordinate is kept and the non-causal block of
    the output map is discarded.
``reg_gamma``
    ``gamma`` with a finite, tuned ``mu``.
``reg_causal_gamma``
    Causal split with both the non-causal coordinate (penalty ``lam``)
    and the residual coordinate (penalty ``mu``) kept as shrunk decisions.
``projreg_g``
    The equivalent program in the raw combination coordinates with a
    projection penalty; kept as a cross-check oracle.
``kf_mpc``
    Model-based MPC with a Kalman predictor; the oracle ceiling when the
    true system is known.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, Diverged
from .lq import LqBlocks, CausalSplit, causal_split, gamma1_of, factorize
from .predictor import (
    Predictor,
    fit_causal,
    fit_spc,
    fit_spc_from_blocks,
)
from .qp import BoxQpSolver, QpProblem, QpSettings, QpStatus
from .sim import StateSpaceModel, step_model
from .trajectory import HankelPartition, Trajectory, stack_window

__all__ = [
    "VARIANTS",
    "CostSpec",
    "BoxConstraints",
    "ControllerSpec",
    "StepResult",
    "RolloutResult",
    "make_controller",
    "condense",
    "solve_spc",
    "solve_causal_spc",
    "solve_gamma",
    "solve_causal_gamma",
    "solve_reg_causal_gamma",
    "solve_projreg_g",
    "solve_kf_mpc",
    "kf_update",
    "kf_predictor_matrices",
    "run_receding_horizon",
]

VARIANTS = (
    "spc",
    "causal_spc",
    "gamma",
    "causal_gamma",
    "reg_gamma",
    "reg_causal_gamma",
    "projreg_g",
    "kf_mpc",
)

_NEEDS_MU = {"gamma", "reg_gamma", "reg_causal_gamma", "projreg_g"}
_NEEDS_LAM = {"reg_causal_gamma"}

_STATUS_SEVERITY = {
    QpStatus.SOLVED: 0,
    QpStatus.MAX_ITER: 1,
    QpStatus.PRIMAL_INFEASIBLE: 2,
    QpStatus.DUAL_INFEASIBLE: 3,
}

_EIG_TOL = 1e-12


def _check_weight(name: str, mat: np.ndarray, positive: bool) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {mat.shape}")
    scale = max(1.0, float(np.abs(mat).max()))
    if float(np.abs(mat - mat.T).max()) > _EIG_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    eig_min = float(np.linalg.eigvalsh(mat).min())
    if positive and eig_min <= _EIG_TOL * scale:
        raise ValueError(f"{name} must be positive definite "
                         f"(min eigenvalue {eig_min:.3e})")
    if not positive and eig_min < -_EIG_TOL * scale:
        raise ValueError(f"{name} must be positive semidefinite "
                         f"(min eigenvalue {eig_min:.3e})")
    return mat


@dataclass(frozen=True)
class CostSpec:
    """Tracking cost ``sum |y - r|^2_q + |u|^2_r`` over a horizon.

    ``q_step`` (PSD) and ``r_step`` (PD) are per-step weights; the
    horizon-wide block-diagonal matrices are exposed as ``Q`` and ``R``.
    ``r`` is the default stacked reference used when a step is solved
    outside a receding-horizon loop; it defaults to zero.
    """

    q_step: np.ndarray
    r_step: np.ndarray
    L_f: int
    r: np.ndarray | None = None

    def __post_init__(self):
        q = _check_weight("q_step", self.q_step, positive=False)
        rw = _check_weight("r_step", self.r_step, positive=True)
        if self.L_f < 1:
            raise ValueError(f"L_f must be >= 1, got {self.L_f}")
        object.__setattr__(self, "q_step", q)
        object.__setattr__(self, "r_step", rw)
        if self.r is not None:
            ref = np.asarray(self.r, dtype=float).reshape(-1)
            if ref.shape[0] != q.shape[0] * self.L_f:
                raise DimensionMismatch(
                    f"reference has length {ref.shape[0]}, expected "
                    f"{q.shape[0] * self.L_f}")
            object.__setattr__(self, "r", ref)

    @property
    def p(self) -> int:
        return self.q_step.shape[0]

    @property
    def m(self) -> int:
        return self.r_step.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return np.kron(np.eye(self.L_f), self.q_step)

    @property
    def R(self) -> np.ndarray:
        return np.kron(np.eye(self.L_f), self.r_step)

    def default_reference(self) -> np.ndarray:
        if self.r is not None:
            return self.r
        return np.zeros(self.p * self.L_f)


@dataclass(frozen=True)
class BoxConstraints:
    """Per-step box bounds on inputs and predicted outputs; ``+-inf`` opens
    a side."""

    u_lower: np.ndarray
    u_upper: np.ndarray
    y_lower: np.ndarray
    y_upper: np.ndarray

    def __post_init__(self):
        for name in ("u_lower", "u_upper", "y_lower", "y_upper"):
            val = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if np.isnan(val).any():
                raise ValueError(f"{name} contains NaN")
            object.__setattr__(self, name, val)
        if self.u_lower.shape != self.u_upper.shape:
            raise DimensionMismatch("input bound lengths differ")
        if self.y_lower.shape != self.y_upper.shape:
            raise DimensionMismatch("output bound lengths differ")
        if np.any(self.u_lower > self.u_upper):
            raise ValueError("some input lower bound exceeds its upper bound")
        if np.any(self.y_lower > self.y_upper):
            raise ValueError("some output lower bound exceeds its upper bound")

    @classmethod
    def unbounded(cls, m: int, p: int) -> "BoxConstraints":
        inf = float("inf")
        return cls(np.full(m, -inf), np.full(m, inf),
                   np.full(p, -inf), np.full(p, inf))

    def u_bounded(self) -> bool:
        return bool(np.isfinite(self.u_lower).any()
                    or np.isfinite(self.u_upper).any())

    def y_bounded(self) -> bool:
        return bool(np.isfinite(self.y_lower).any()
                    or np.isfinite(self.y_upper).any())

    def u_tiled(self, L_f: int) -> tuple[np.ndarray, np.ndarray]:
        return np.tile(self.u_lower, L_f), np.tile(self.u_upper, L_f)

    def y_tiled(self, L_f: int) -> tuple[np.ndarray, np.ndarray]:
        return np.tile(self.y_lower, L_f), np.tile(self.y_upper, L_f)


@dataclass(frozen=True)
class ControllerSpec:
    """Variant identifier plus cost, constraints and penalty weights."""

    variant: str
    cost: CostSpec
    boxes: BoxConstraints
    mu: float | None = None
    lam: float | None = None
    gamma3_zero: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant in _NEEDS_MU and not self.gamma3_zero:
            if self.mu is None or self.mu < 0:
                raise ValueError(f"variant {self.variant!r} needs mu >= 0")
        if self.variant in _NEEDS_LAM:
            if self.lam is None or self.lam < 0:
                raise ValueError(f"variant {self.variant!r} needs lam >= 0")
        if self.cost.m != self.boxes.u_lower.shape[0]:
            raise DimensionMismatch("cost and boxes disagree on input count")
        if self.cost.p != self.boxes.y_lower.shape[0]:
            raise DimensionMismatch("cost and boxes disagree on output count")


@dataclass
class StepResult:
    """Outcome of one receding-horizon step."""

    u_f: np.ndarray
    y_f: np.ndarray
    u_applied: np.ndarray
    objective: float
    qp_iterations: int
    qp_status: QpStatus
    primal_res: float
    dual_res: float


@dataclass
class RolloutResult:
    """A closed-loop run: applied data, per-step solves and realized cost."""

    trajectory: Trajectory
    reference: np.ndarray
    steps: list
    J: float
    J_y: float
    J_u: float

    @property
    def qp_iterations(self) -> int:
        return int(sum(s.qp_iterations for s in self.steps))

    @property
    def status(self) -> QpStatus:
        return max((s.qp_status for s in self.steps),
                   key=lambda s: _STATUS_SEVERITY[s])


# ---------------------------------------------------------------------------
# condensed controllers
# ---------------------------------------------------------------------------


class _CondensedController:
    """Common machinery: decisions v with u_f = Fu v + bu, y_f = Fy v + by.

    Subclasses provide the offsets (bu, by) per step.  P and the constraint
    rows are fixed, so the QP factorization and warm starts are reused
    across receding-horizon steps.
    """

    def __init__(self, spec: ControllerSpec, Fu: np.ndarray, Fy: np.ndarray,
                 reg: np.ndarray, m: int, p: int, L_p: int, L_f: int,
                 qp_settings: QpSettings | None):
        self.spec = spec
        self.cost = spec.cost
        self.m, self.p, self.L_p, self.L_f = m, p, L_p, L_f
        self.Fu, self.Fy, self.reg = Fu, Fy, reg
        Q, R = spec.cost.Q, spec.cost.R
        self._FyQ = Fy.T @ Q
        self._FuR = Fu.T @ R
        P = 2.0 * (self._FyQ @ Fy + self._FuR @ Fu + np.diag(reg))
        P = 0.5 * (P + P.T)
        rows = []
        self._with_u_rows = spec.boxes.u_bounded()
        self._with_y_rows = spec.boxes.y_bounded()
        if self._with_u_rows:
            rows.append(Fu)
        if self._with_y_rows:
            rows.append(Fy)
        A = np.vstack(rows) if rows else np.zeros((0, P.shape[0]))
        self.P, self.A = P, A
        self.solver = BoxQpSolver(P, A, qp_settings)
        self._warm_x = None
        self._warm_y = None

    # subclass hook
    def _offsets(self, z_p) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _qp_data(self, z_p, r_f):
        bu, by = self._offsets(z_p)
        r_f = self.cost.default_reference() if r_f is None \
            else np.asarray(r_f, dtype=float).reshape(-1)
        if r_f.shape[0] != self.p * self.L_f:
            raise DimensionMismatch(
                f"reference has length {r_f.shape[0]}, expected "
                f"{self.p * self.L_f}")
        q = 2.0 * (self._FyQ @ (by - r_f) + self._FuR @ bu)
        lo_parts, hi_parts = [], []
        if self._with_u_rows:
            lo_u, hi_u = self.spec.boxes.u_tiled(self.L_f)
            lo_parts.append(lo_u - bu)
            hi_parts.append(hi_u - bu)
        if self._with_y_rows:
            lo_y, hi_y = self.spec.boxes.y_tiled(self.L_f)
            lo_parts.append(lo_y - by)
            hi_parts.append(hi_y - by)
        lo = np.concatenate(lo_parts) if lo_parts else np.zeros(0)
        hi = np.concatenate(hi_parts) if hi_parts else np.zeros(0)
        return q, lo, hi, bu, by, r_f

    def condense(self, z_p, r_f=None) -> QpProblem:
        """Materialize the per-step QP for inspection or external solving."""
        q, lo, hi, *_ = self._qp_data(z_p, r_f)
        return QpProblem(P=self.P, q=q, A=self.A, lower=lo, upper=hi)

    def step(self, z_p, r_f=None) -> StepResult:
        q, lo, hi, bu, by, r_f = self._qp_data(z_p, r_f)
        sol = self.solver.solve(q, lo, hi, x0=self._warm_x, y0=self._warm_y)
        self._warm_x, self._warm_y = sol.x, sol.y
        v = sol.x
        u_f = self.Fu @ v + bu
        y_f = self.Fy @ v + by
        err = y_f - r_f
        obj = float(err @ self.cost.Q @ err + u_f @ self.cost.R @ u_f
                    + v @ (self.reg * v))
        return StepResult(u_f=u_f, y_f=y_f, u_applied=u_f[: self.m],
                          objective=obj, qp_iterations=sol.iterations,
                          qp_status=sol.status, primal_res=sol.primal_res,
                          dual_res=sol.dual_res)

    def observe(self, u, y) -> None:
        """Closed-loop measurement hook; data-driven variants are static."""

    def reset(self) -> None:
        self._warm_x = None
        self._warm_y = None


class _PredictorController(_CondensedController):
    """spc / causal_spc: decisions are the future inputs themselves."""

    def __init__(self, spec, pred: Predictor, qp_settings=None):
        d2 = pred.m * pred.L_f
        super().__init__(spec, Fu=np.eye(d2), Fy=pred.K_f.copy(),
                         reg=np.zeros(d2), m=pred.m, p=pred.p,
                         L_p=pred.L_p, L_f=pred.L_f, qp_settings=qp_settings)
        self.predictor = pred

    def _offsets(self, z_p):
        z = np.asarray(z_p, dtype=float).reshape(-1)
        if z.shape[0] != self.predictor.K_p.shape[1]:
            raise DimensionMismatch(
                f"z_p has length {z.shape[0]}, expected "
                f"{self.predictor.K_p.shape[1]}")
        return np.zeros(self.m * self.L_f), self.predictor.K_p @ z


class _GammaController(_CondensedController):
    """Latent-coordinate variants; offsets come from the past coordinate."""

    def __init__(self, spec, blocks: LqBlocks,
                 split: CausalSplit | None = None, qp_settings=None):
        self.blocks = blocks
        d2, d3 = blocks.dim_u, blocks.dim_y
        variant = spec.variant
        if variant in ("gamma", "reg_gamma"):
            if spec.gamma3_zero:
                Fu = np.hstack([blocks.L22])
                Fy = np.hstack([blocks.L32])
                reg = np.zeros(d2)
            else:
                Fu = np.hstack([blocks.L22, np.zeros((d2, d3))])
                Fy = np.hstack([blocks.L32, blocks.L33])
                reg = np.concatenate([np.zeros(d2), np.full(d3, spec.mu)])
        elif variant == "causal_gamma":
            split = split or causal_split(blocks)
            Fu = blocks.L22.copy()
            Fy = split.causal.copy()
            reg = np.zeros(d2)
        elif variant == "reg_causal_gamma":
            split = split or causal_split(blocks)
            Fu = np.hstack([blocks.L22, np.zeros((d2, d2)),
                            np.zeros((d2, d3))])
            Fy = np.hstack([split.causal, split.noncausal, blocks.L33])
            reg = np.concatenate([np.zeros(d2), np.full(d2, spec.lam),
                                  np.full(d3, spec.mu)])
        else:
            raise ValueError(f"not a latent-coordinate variant: {variant!r}")
        super().__init__(spec, Fu=Fu, Fy=Fy, reg=reg, m=blocks.m, p=blocks.p,
                         L_p=blocks.L_p, L_f=blocks.L_f,
                         qp_settings=qp_settings)

    def _offsets(self, z_p):
        gamma1 = gamma1_of(self.blocks, z_p)
        return self.blocks.L21 @ gamma1, self.blocks.L31 @ gamma1


class KfMpcController:
    """Model-based MPC over a Kalman one-step-ahead predictor state.

    The internal state estimate is advanced by :func:`kf_update` from the
    closed-loop measurements fed through :meth:`observe`; the predictor
    over the horizon is exact for the declared model.
    """

    def __init__(self, spec: ControllerSpec, model: StateSpaceModel,
                 L_p: int = 0, qp_settings: QpSettings | None = None,
                 x0: np.ndarray | None = None):
        self.spec = spec
        self.cost = spec.cost
        self.model = model
        self.m, self.p = model.m, model.p
        self.L_p, self.L_f = L_p, spec.cost.L_f
        self.Gamma, self.H = kf_predictor_matrices(model, self.L_f)
        d2 = self.m * self.L_f
        Q, R = spec.cost.Q, spec.cost.R
        self._HQ = self.H.T @ Q
        P = 2.0 * (self._HQ @ self.H + R)
        P = 0.5 * (P + P.T)
        rows = []
        self._with_u_rows = spec.boxes.u_bounded()
        self._with_y_rows = spec.boxes.y_bounded()
        if self._with_u_rows:
            rows.append(np.eye(d2))
        if self._with_y_rows:
            rows.append(self.H)
        A = np.vstack(rows) if rows else np.zeros((0, d2))
        self.P, self.A = P, A
        self.solver = BoxQpSolver(P, A, qp_settings)
        self._x0 = np.zeros(model.n) if x0 is None else \
            np.asarray(x0, dtype=float).reshape(model.n)
        self.x_hat = self._x0.copy()
        self._warm_x = None
        self._warm_y = None

    def _qp_data(self, r_f):
        by = self.Gamma @ self.x_hat
        r_f = self.cost.default_reference() if r_f is None \
            else np.asarray(r_f, dtype=float).reshape(-1)
        if r_f.shape[0] != self.p * self.L_f:
            raise DimensionMismatch(
                f"reference has length {r_f.shape[0]}, expected "
                f"{self.p * self.L_f}")
        q = 2.0 * (self._HQ @ (by - r_f))
        lo_parts, hi_parts = [], []
        if self._with_u_rows:
            lo_u, hi_u = self.spec.boxes.u_tiled(self.L_f)
            lo_parts.append(lo_u)
            hi_parts.append(hi_u)
        if self._with_y_rows:
            lo_y, hi_y = self.spec.boxes.y_tiled(self.L_f)
            lo_parts.append(lo_y - by)
            hi_parts.append(hi_y - by)
        lo = np.concatenate(lo_parts) if lo_parts else np.zeros(0)
        hi = np.concatenate(hi_parts) if hi_parts else np.zeros(0)
        return q, lo, hi, by, r_f

    def condense(self, z_p=None, r_f=None) -> QpProblem:
        q, lo, hi, *_ = self._qp_data(r_f)
        return QpProblem(P=self.P, q=q, A=self.A, lower=lo, upper=hi)

    def step(self, z_p=None, r_f=None) -> StepResult:
        q, lo, hi, by, r_f = self._qp_data(r_f)
        sol = self.solver.solve(q, lo, hi, x0=self._warm_x, y0=self._warm_y)
        self._warm_x, self._warm_y = sol.x, sol.y
        u_f = sol.x
        y_f = self.H @ u_f + by
        err = y_f - r_f
        obj = float(err @ self.cost.Q @ err + u_f @ self.cost.R @ u_f)
        return StepResult(u_f=u_f, y_f=y_f, u_applied=u_f[: self.m],
                          objective=obj, qp_iterations=sol.iterations,
                          qp_status=sol.status, primal_res=sol.primal_res,
                          dual_res=sol.dual_res)

    def observe(self, u, y) -> None:
        self.x_hat = kf_update(self.model, self.x_hat, u, y)

    def reset(self) -> None:
        self.x_hat = self._x0.copy()
        self._warm_x = None
        self._warm_y = None


class GSpaceController:
    """Projection-regularized program in raw combination coordinates.

    The decision vector multiplies the data columns directly; consistency
    with the past window is an equality row block and the component
    orthogonal to the past/future-input row space carries the penalty
    ``mu``.  Solutions match the latent-coordinate program with the same
    ``mu``; the class exists as a cross-check and is O(M^2) per solve.
    """

    def __init__(self, spec: ControllerSpec, part: HankelPartition,
                 qp_settings: QpSettings | None = None):
        self.spec = spec
        self.cost = spec.cost
        self.part = part
        self.m, self.p = part.m, part.p
        self.L_p, self.L_f = part.spec.L_p, part.spec.L_f
        M = part.M
        ZU = np.vstack([part.Z_p, part.U_f])
        proj = np.linalg.pinv(ZU, rcond=1e-10) @ ZU
        resid_proj = np.eye(M) - proj
        # symmetrize: pinv-based projector is symmetric up to round-off
        self._resid_proj = 0.5 * (resid_proj + resid_proj.T)
        Q, R = spec.cost.Q, spec.cost.R
        self._YQ = part.Y_f.T @ Q
        P = 2.0 * (self._YQ @ part.Y_f + part.U_f.T @ R @ part.U_f
                   + spec.mu * self._resid_proj)
        self.P = 0.5 * (P + P.T)
        rows = [part.Z_p]
        self._with_u_rows = spec.boxes.u_bounded()
        self._with_y_rows = spec.boxes.y_bounded()
        if self._with_u_rows:
            rows.append(part.U_f)
        if self._with_y_rows:
            rows.append(part.Y_f)
        self.A = np.vstack(rows)
        self.solver = BoxQpSolver(self.P, self.A, qp_settings)
        self._warm_x = None
        self._warm_y = None

    def _qp_data(self, z_p, r_f):
        z = np.asarray(z_p, dtype=float).reshape(-1)
        if z.shape[0] != self.part.Z_p.shape[0]:
            raise DimensionMismatch(
                f"z_p has length {z.shape[0]}, expected "
                f"{self.part.Z_p.shape[0]}")
        r_f = self.cost.default_reference() if r_f is None \
            else np.asarray(r_f, dtype=float).reshape(-1)
        q = -2.0 * (self._YQ @ r_f)
        lo_parts, hi_parts = [z], [z]
        if self._with_u_rows:
            lo_u, hi_u = self.spec.boxes.u_tiled(self.L_f)
            lo_parts.append(lo_u)
            hi_parts.append(hi_u)
        if self._with_y_rows:
            lo_y, hi_y = self.spec.boxes.y_tiled(self.L_f)
            lo_parts.append(lo_y)
            hi_parts.append(hi_y)
        return q, np.concatenate(lo_parts), np.concatenate(hi_parts), r_f

    def condense(self, z_p, r_f=None) -> QpProblem:
        q, lo, hi, _ = self._qp_data(z_p, r_f)
        return QpProblem(P=self.P, q=q, A=self.A, lower=lo, upper=hi)

    def step(self, z_p, r_f=None) -> StepResult:
        q, lo, hi, r_f = self._qp_data(z_p, r_f)
        sol = self.solver.solve(q, lo, hi, x0=self._warm_x, y0=self._warm_y)
        self._warm_x, self._warm_y = sol.x, sol.y
        g = sol.x
        u_f = self.part.U_f @ g
        y_f = self.part.Y_f @ g
        err = y_f - r_f
        resid = self._resid_proj @ g
        obj = float(err @ self.cost.Q @ err + u_f @ self.cost.R @ u_f
                    + self.spec.mu * (resid @ resid))
        return StepResult(u_f=u_f, y_f=y_f, u_applied=u_f[: self.m],
                          objective=obj, qp_iterations=sol.iterations,
                          qp_status=sol.status, primal_res=sol.primal_res,
                          dual_res=sol.dual_res)

    def observe(self, u, y) -> None:
        pass

    def reset(self) -> None:
        self._warm_x = None
        self._warm_y = None


# ---------------------------------------------------------------------------
# construction and functional wrappers
# ---------------------------------------------------------------------------


def make_controller(spec: ControllerSpec, *,
                    blocks: LqBlocks | None = None,
                    part: HankelPartition | None = None,
                    split: CausalSplit | None = None,
                    model: StateSpaceModel | None = None,
                    L_p: int | None = None,
                    qp_settings: QpSettings | None = None):
    """Build the controller object for a variant from the relevant handle.

    ``spc`` accepts either the raw partition or the LQ blocks; the latent
    variants need blocks (a partition is factorized on the fly);
    ``projreg_g`` needs the partition; ``kf_mpc`` needs the model.
    """
    variant = spec.variant
    if variant == "kf_mpc":
        if model is None:
            raise ValueError("kf_mpc needs a StateSpaceModel")
        return KfMpcController(spec, model, L_p=L_p or 0,
                               qp_settings=qp_settings)
    if variant == "projreg_g":
        if part is None:
            raise ValueError("projreg_g needs the Hankel partition")
        return GSpaceController(spec, part, qp_settings=qp_settings)
    if variant == "spc":
        if part is not None:
            pred = fit_spc(part)
        elif blocks is not None:
            pred = fit_spc_from_blocks(blocks)
        else:
            raise ValueError("spc needs a partition or LQ blocks")
        return _PredictorController(spec, pred, qp_settings=qp_settings)
    if blocks is None:
        if part is None:
            raise ValueError(f"{variant} needs LQ blocks or a partition")
        blocks = factorize(part)
    if variant == "causal_spc":
        return _PredictorController(spec, fit_causal(blocks),
                                    qp_settings=qp_settings)
    return _GammaController(spec, blocks, split=split,
                            qp_settings=qp_settings)


def condense(spec: ControllerSpec, z_p: np.ndarray | None, *,
             blocks: LqBlocks | None = None,
             part: HankelPartition | None = None,
             model: StateSpaceModel | None = None,
             r_f: np.ndarray | None = None,
             qp_settings: QpSettings | None = None) -> QpProblem:
    """Materialize the per-step QP of a variant without solving it."""
    ctrl = make_controller(spec, blocks=blocks, part=part, model=model,
                           qp_settings=qp_settings)
    return ctrl.condense(z_p, r_f)


def _one_step(ctrl, z_p, r_f=None) -> StepResult:
    return ctrl.step(z_p, r_f)


def solve_spc(blocks, z_p, spec: ControllerSpec,
              qp_settings: QpSettings | None = None) -> StepResult:
    """One step of the unconstrained-predictor controller."""
    spec = replace(spec, variant="spc")
    handle = {"part": blocks} if isinstance(blocks, HankelPartition) \
        else {"blocks": blocks}
    return _one_step(make_controller(spec, qp_settings=qp_settings, **handle),
                     z_p)


def solve_causal_spc(blocks: LqBlocks, z_p, spec: ControllerSpec,
                     qp_settings: QpSettings | None = None) -> StepResult:
    spec = replace(spec, variant="causal_spc")
    return _one_step(make_controller(spec, blocks=blocks,
                                     qp_settings=qp_settings), z_p)


def solve_gamma(blocks: LqBlocks, z_p, spec: ControllerSpec,
                qp_settings: QpSettings | None = None) -> StepResult:
    """One step of the latent-coordinate controller with penalty mu."""
    spec = replace(spec, variant="gamma")
    return _one_step(make_controller(spec, blocks=blocks,
                                     qp_settings=qp_settings), z_p)


def solve_causal_gamma(blocks: LqBlocks, z_p, spec: ControllerSpec,
                       qp_settings: QpSettings | None = None) -> StepResult:
    spec = replace(spec, variant="causal_gamma")
    return _one_step(make_controller(spec, blocks=blocks,
                                     qp_settings=qp_settings), z_p)


def solve_reg_causal_gamma(blocks: LqBlocks, z_p, spec: ControllerSpec,
                           split: CausalSplit | None = None,
                           qp_settings: QpSettings | None = None
                           ) -> StepResult:
    """One step of the doubly regularized causal-split controller.

    A custom ``split`` may be supplied; by default the causal split of
    ``blocks`` is used.
    """
    spec = replace(spec, variant="reg_causal_gamma")
    return _one_step(make_controller(spec, blocks=blocks, split=split,
                                     qp_settings=qp_settings), z_p)


def solve_projreg_g(part: HankelPartition, z_p, spec: ControllerSpec,
                    qp_settings: QpSettings | None = None) -> StepResult:
    spec = replace(spec, variant="projreg_g")
    return _one_step(make_controller(spec, part=part,
                                     qp_settings=qp_settings), z_p)


def solve_kf_mpc(model: StateSpaceModel, x_hat: np.ndarray,
                 spec: ControllerSpec,
                 qp_settings: QpSettings | None = None) -> StepResult:
    """One step of the model-based oracle from a given filter state."""
    spec = replace(spec, variant="kf_mpc")
    ctrl = KfMpcController(spec, model, qp_settings=qp_settings, x0=x_hat)
    return ctrl.step()


def kf_update(model: StateSpaceModel, x_hat: np.ndarray, u: np.ndarray,
              y: np.ndarray) -> np.ndarray:
    """One innovation-form predictor update of the state estimate."""
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    innovation = y - model.C @ x_hat - model.D @ u
    return model.A @ x_hat + model.B @ u + model.K @ innovation


def kf_predictor_matrices(model: StateSpaceModel,
                          L_f: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked observability map and input-response Toeplitz blocks.

    Returns ``(Gamma, H)`` with ``y_f = Gamma x + H u_f`` for the
    noise-free response over ``L_f`` steps.
    """
    n, m, p = model.n, model.m, model.p
    Gamma = np.empty((p * L_f, n))
    powers = [np.eye(n)]
    for _ in range(L_f - 1):
        powers.append(model.A @ powers[-1])
    for i in range(L_f):
        Gamma[i * p:(i + 1) * p] = model.C @ powers[i]
    H = np.zeros((p * L_f, m * L_f))
    for i in range(L_f):
        H[i * p:(i + 1) * p, i * m:(i + 1) * m] = model.D
        for j in range(i):
            H[i * p:(i + 1) * p, j * m:(j + 1) * m] = \
                model.C @ powers[i - j - 1] @ model.B
    return Gamma, H


# ---------------------------------------------------------------------------
# closed loop
# ---------------------------------------------------------------------------


def run_receding_horizon(plant, controller, reference: np.ndarray,
                         n_steps: int,
                         rng: np.random.Generator | None = None,
                         warmup_inputs: np.ndarray | None = None
                         ) -> RolloutResult:
    """Drive the plant with a controller for ``n_steps`` moves.

    A warm-up phase of ``controller.L_p`` steps first runs the plant under
    ``warmup_inputs`` (zeros by default) so the measured past window is
    fully populated; the controller observes the warm-up data.  All
    innovations are drawn up-front from ``rng`` so that runs with the same
    generator state are paired across controllers.

    Args:
        plant: :class:`StateSpaceModel` or wrapper; starts at rest.
        controller: Any object from :func:`make_controller`.
        reference: Setpoint schedule, shape ``(p, >= n_steps)``; the last
            column is held for the look-ahead beyond its end.
        n_steps: Number of closed-loop moves.
        rng: Innovation stream; omit for a noise-free run.
        warmup_inputs: Optional ``(m, L_p)`` record applied before the
            first move.

    Raises:
        Diverged: If any output magnitude exceeds ``1e6``.
    """
    m, p = controller.m, controller.p
    L_p, L_f = controller.L_p, controller.L_f
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    if ref.shape[0] != p or ref.shape[1] < n_steps:
        raise DimensionMismatch(
            f"reference must be (p, >= n_steps), got {ref.shape}")
    total = n_steps + L_f
    if ref.shape[1] < total:
        ref = np.hstack([ref, np.repeat(ref[:, -1:],
                                        total - ref.shape[1], axis=1)])
    if warmup_inputs is None:
        warmup = np.zeros((m, L_p))
    else:
        warmup = np.atleast_2d(np.asarray(warmup_inputs, dtype=float))
        if warmup.shape != (m, L_p):
            raise DimensionMismatch(
                f"warmup_inputs must be (m, L_p) = {(m, L_p)}, "
                f"got {warmup.shape}")
    sigma = plant.sigma_e
    if sigma > 0.0 and rng is not None:
        innov = sigma * rng.standard_normal((p, L_p + n_steps))
    else:
        innov = np.zeros((p, L_p + n_steps))

    controller.reset()
    x = np.zeros(plant.n)
    u_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    for t in range(L_p):
        u_t = warmup[:, t]
        x, y_t = step_model(plant, x, u_t, innov[:, t])
        _check_rollout_sane(y_t, t - L_p)
        u_hist.append(u_t.copy())
        y_hist.append(y_t)
        controller.observe(u_t, y_t)

    q_step, r_step = controller.cost.q_step, controller.cost.r_step
    steps: list[StepResult] = []
    u_log = np.empty((m, n_steps))
    y_log = np.empty((p, n_steps))
    J_y = 0.0
    J_u = 0.0
    for t in range(n_steps):
        if L_p > 0:
            z_p = np.concatenate([
                np.concatenate(u_hist[-L_p:]),
                np.concatenate(y_hist[-L_p:]),
            ])
        else:
            z_p = np.zeros(0)
        r_f = stack_window(ref[:, t:t + L_f])
        res = controller.step(z_p, r_f)
        u_t = res.u_applied
        x, y_t = step_model(plant, x, u_t, innov[:, L_p + t])
        _check_rollout_sane(y_t, t)
        controller.observe(u_t, y_t)
        u_hist.append(np.asarray(u_t, dtype=float))
        y_hist.append(y_t)
        if L_p > 0:
            u_hist = u_hist[-L_p:]
            y_hist = y_hist[-L_p:]
        err = y_t - ref[:, t]
        J_y += float(err @ q_step @ err)
        J_u += float(u_t @ r_step @ u_t)
        u_log[:, t] = u_t
        y_log[:, t] = y_t
        steps.append(res)
    traj = Trajectory(u_log, y_log)
    return RolloutResult(trajectory=traj, reference=ref[:, :n_steps],
                         steps=steps, J=J_y + J_u, J_y=J_y, J_u=J_u)


def _check_rollout_sane(y: np.ndarray, t: int) -> None:
    if not np.all(np.abs(y) < 1e6):
        raise Diverged(f"closed-loop output exceeded 1e6 at step {t}")
