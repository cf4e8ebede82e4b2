"""Input/output trajectories and their Hankel-matrix views.

A trajectory is a finite record of an m-input, p-output system.  The
data-driven machinery in the rest of the package never sees state-space
matrices; everything is derived from Hankel matrices built here and from
their past/future partition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    DepthExceedsLength,
    DimensionMismatch,
    ZeroVariance,
)

__all__ = [
    "Trajectory",
    "HorizonSpec",
    "HankelPartition",
    "ChannelScaling",
    "build_hankel",
    "partition",
    "persistency_order",
    "standardize",
    "stack_window",
    "read_trajectory_csv",
    "write_trajectory_csv",
]

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class Trajectory:
    """An input/output record with channels along rows and time along columns.

    Attributes:
        inputs: Input samples, shape ``(m, N)``.
        outputs: Output samples, shape ``(p, N)``.
    """

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if u.ndim != 2 or y.ndim != 2:
            raise DimensionMismatch("inputs and outputs must be 2-d arrays")
        if u.shape[1] != y.shape[1]:
            raise DimensionMismatch(
                f"inputs have {u.shape[1]} samples but outputs have {y.shape[1]}"
            )
        if u.shape[1] == 0:
            raise DimensionMismatch("empty trajectory")
        if not (np.isfinite(u).all() and np.isfinite(y).all()):
            raise ValueError("trajectory contains non-finite samples")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.outputs.shape[0]

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class HorizonSpec:
    """Past and future horizon lengths for the Hankel partition.

    The past horizon ``L_p`` plays the role of an estimation window: it must
    be at least the system lag for the past trajectory to pin down the
    initial state, and in practice it is chosen long enough that the
    observer dynamics have decayed over the window.  The future horizon
    ``L_f`` is the prediction/control horizon.
    """

    L_p: int
    L_f: int

    def __post_init__(self):
        if self.L_p < 1 or self.L_f < 1:
            raise ValueError(f"horizons must be >= 1, got ({self.L_p}, {self.L_f})")

    @property
    def L(self) -> int:
        return self.L_p + self.L_f

    def min_samples(self, m: int, order: int | None = None) -> int:
        """Smallest data length usable with these horizons.

        Without a known system order this is just ``L``; with ``order = n``
        it is the persistency-of-excitation bound ``(m + 1) * L + n + 1``.
        """
        if order is None:
            return self.L
        return (m + 1) * self.L + order + 1


@dataclass(frozen=True)
class HankelPartition:
    """Past/future Hankel blocks of one trajectory.

    ``Z_p`` stacks the past input block on top of the past output block, so
    each of its ``M`` columns is the joint past window preceding the
    corresponding future window in ``U_f`` and ``Y_f``.
    """

    Z_p: np.ndarray
    U_p: np.ndarray
    Y_p: np.ndarray
    U_f: np.ndarray
    Y_f: np.ndarray
    m: int
    p: int
    spec: HorizonSpec

    @property
    def M(self) -> int:
        return self.Z_p.shape[1]


@dataclass(frozen=True)
class ChannelScaling:
    """Per-channel affine map recorded by :func:`standardize`.

    ``apply`` maps raw data to standardized data; ``invert`` undoes it.
    """

    u_offset: np.ndarray
    u_scale: np.ndarray
    y_offset: np.ndarray
    y_scale: np.ndarray

    def apply(self, traj: Trajectory) -> Trajectory:
        u = (traj.inputs - self.u_offset[:, None]) / self.u_scale[:, None]
        y = (traj.outputs - self.y_offset[:, None]) / self.y_scale[:, None]
        return Trajectory(u, y)

    def invert(self, traj: Trajectory) -> Trajectory:
        u = traj.inputs * self.u_scale[:, None] + self.u_offset[:, None]
        y = traj.outputs * self.y_scale[:, None] + self.y_offset[:, None]
        return Trajectory(u, y)


def build_hankel(signal: np.ndarray, depth: int) -> np.ndarray:
    """Build the block Hankel matrix of a multichannel signal.

    Column ``j`` stacks the window ``signal[:, j], ..., signal[:, j+depth-1]``
    so the result has shape ``(q * depth, N - depth + 1)`` for a ``(q, N)``
    signal.

    Args:
        signal: Samples, shape ``(q, N)`` (a 1-d array is treated as one
            channel).
        depth: Window length ``>= 1``.

    Raises:
        DepthExceedsLength: If ``depth > N``.
    """
    sig = np.atleast_2d(np.asarray(signal, dtype=float))
    q, n = sig.shape
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if depth > n:
        raise DepthExceedsLength(
            f"depth {depth} exceeds signal length {n}"
        )
    cols = n - depth + 1
    out = np.empty((q * depth, cols))
    for i in range(depth):
        out[i * q:(i + 1) * q, :] = sig[:, i:i + cols]
    return out


def stack_window(window: np.ndarray) -> np.ndarray:
    """Flatten a ``(q, s)`` window into the column convention of build_hankel.

    The result is ``col(w(1), ..., w(s))``, i.e. channel-major within each
    time step and time-major across steps.
    """
    return np.asarray(window, dtype=float).T.ravel()


def partition(traj: Trajectory, spec: HorizonSpec) -> HankelPartition:
    """Split the trajectory's Hankel matrix into past and future blocks.

    Args:
        traj: The data record.
        spec: Past/future horizon lengths; ``spec.L`` must not exceed the
            record length.

    Returns:
        A :class:`HankelPartition` with ``M = N - L + 1`` columns per block.
    """
    L = spec.L
    H_u = build_hankel(traj.inputs, L)
    H_y = build_hankel(traj.outputs, L)
    m, p = traj.m, traj.p
    U_p = H_u[: m * spec.L_p]
    U_f = H_u[m * spec.L_p:]
    Y_p = H_y[: p * spec.L_p]
    Y_f = H_y[p * spec.L_p:]
    Z_p = np.vstack([U_p, Y_p])
    return HankelPartition(Z_p=Z_p, U_p=U_p, Y_p=Y_p, U_f=U_f, Y_f=Y_f,
                           m=m, p=p, spec=spec)


def persistency_order(signal: np.ndarray, order: int) -> bool:
    """Check persistency of excitation of the given order.

    A signal is persistently exciting of order ``s`` when its depth-``s``
    Hankel matrix has full row rank.  Rank is decided from singular values
    with a relative cutoff of ``1e-10``.

    Returns False when the signal is too short to build the Hankel matrix.
    """
    sig = np.atleast_2d(np.asarray(signal, dtype=float))
    if order > sig.shape[1]:
        return False
    H = build_hankel(sig, order)
    if H.shape[0] > H.shape[1]:
        return False
    sv = np.linalg.svd(H, compute_uv=False)
    return bool(sv[-1] > _RANK_RTOL * sv[0])


def standardize(traj: Trajectory) -> tuple[Trajectory, ChannelScaling]:
    """Shift and scale every channel to zero mean and unit sample deviation.

    The scale is the (n - 1)-normalized standard deviation.

    Raises:
        ZeroVariance: If any channel is constant.
    """
    if traj.n_samples < 2:
        raise ZeroVariance("need at least two samples to estimate a scale")
    u_off = traj.inputs.mean(axis=1)
    y_off = traj.outputs.mean(axis=1)
    u_scale = traj.inputs.std(axis=1, ddof=1)
    y_scale = traj.outputs.std(axis=1, ddof=1)
    for label, scale in (("input", u_scale), ("output", y_scale)):
        if np.any(scale <= 0.0):
            ch = int(np.argmax(scale <= 0.0))
            raise ZeroVariance(f"{label} channel {ch} is constant")
    scaling = ChannelScaling(u_offset=u_off, u_scale=u_scale,
                             y_offset=y_off, y_scale=y_scale)
    return scaling.apply(traj), scaling


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the record as ``t,u1..um,y1..yp`` with one row per sample."""
    header = (["t"]
              + [f"u{i + 1}" for i in range(traj.m)]
              + [f"y{i + 1}" for i in range(traj.p)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(traj.n_samples):
            row = ([str(t + 1)]
                   + [repr(float(v)) for v in traj.inputs[:, t]]
                   + [repr(float(v)) for v in traj.outputs[:, t]])
            writer.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    """Read a ``t,u1..um,y1..yp`` file written by :func:`write_trajectory_csv`.

    Channel counts are inferred from the header; the ``t`` column is ignored
    apart from requiring the header to start with it.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0].strip() != "t":
            raise ValueError(f"{path}: header must start with 't'")
        u_cols = [i for i, name in enumerate(header) if name.strip().startswith("u")]
        y_cols = [i for i, name in enumerate(header) if name.strip().startswith("y")]
        if not u_cols or not y_cols:
            raise ValueError(f"{path}: header names no u*/y* channels")
        u_rows, y_rows = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                u_rows.append([float(row[i]) for i in u_cols])
                y_rows.append([float(row[i]) for i in y_cols])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{line}: bad row: {exc}") from None
    return Trajectory(np.array(u_rows).T, np.array(y_rows).T)
