"""Three-way tensor trains and their basic algebra.

A :class:`TensorTrain3` stores three cores

    core1: (..., N1, r1)
    core2: (..., r1, N2, r2)
    core3: (..., r2, N3)

and represents ``T[k1, k2, k3] = sum_{a, b} core1[k1, a] core2[a, k2, b] core3[b, k3]``.

Any leading axes (``...``) are batch axes: a batched train is a stack of
independent trains that share mode sizes and rank.  The solver stores one
train per spatial grid point this way, so every operation below is written
to act on all batch members at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "TensorTrain3",
    "CanonicalForm",
    "FORMS",
    "tt_scale",
    "tt_add",
    "tt_add_same_frame",
    "tt_reciprocal_rank1",
    "tt_hadamard_rank1",
    "tt_divide_rank1",
    "tt_sum_all",
    "tt_weighted_sum",
    "tt_frobenius_norm",
    "tt_inner",
    "orthonormalize_right",
    "orthonormalize_left",
    "tt_rank_pad",
    "tt_to_full",
    "qr_nonneg",
    "FULL_TENSOR_CAP",
]

FORMS = ("I", "II", "III", "IV", "V")

#: default cap (entries) for :func:`tt_to_full`
FULL_TENSOR_CAP = 10**6


@dataclass(frozen=True, eq=False)
class TensorTrain3:
    """Three-way tensor train, optionally batched over leading axes."""

    core1: np.ndarray
    core2: np.ndarray
    core3: np.ndarray

    def __post_init__(self):
        c1, c2, c3 = (np.ascontiguousarray(c, dtype=float) for c in (self.core1, self.core2, self.core3))
        if c1.ndim < 2 or c2.ndim < 3 or c3.ndim < 2:
            raise ValueError(
                f"core dimensions too small: {c1.shape}, {c2.shape}, {c3.shape}"
            )
        batch = c1.shape[:-2]
        if c2.shape[:-3] != batch or c3.shape[:-2] != batch:
            raise ValueError(
                f"inconsistent batch shapes: {c1.shape}, {c2.shape}, {c3.shape}"
            )
        if c1.shape[-1] != c2.shape[-3]:
            raise ValueError(f"r1 mismatch: core1 {c1.shape} vs core2 {c2.shape}")
        if c2.shape[-1] != c3.shape[-2]:
            raise ValueError(f"r2 mismatch: core2 {c2.shape} vs core3 {c3.shape}")
        if min(c1.shape[-2:] + c2.shape[-3:] + c3.shape[-2:]) < 1:
            raise ValueError("mode sizes and ranks must be positive")
        object.__setattr__(self, "core1", c1)
        object.__setattr__(self, "core2", c2)
        object.__setattr__(self, "core3", c3)

    @property
    def batch_shape(self) -> tuple:
        return self.core1.shape[:-2]

    @property
    def mode_sizes(self) -> tuple:
        return (self.core1.shape[-2], self.core2.shape[-2], self.core3.shape[-1])

    @property
    def rank(self) -> tuple:
        return (self.core1.shape[-1], self.core3.shape[-2])

    @property
    def cores(self) -> tuple:
        return (self.core1, self.core2, self.core3)

    def __getitem__(self, idx) -> "TensorTrain3":
        """Index the batch axes."""
        if not self.batch_shape:
            raise IndexError("unbatched tensor train cannot be indexed")
        return TensorTrain3(self.core1[idx], self.core2[idx], self.core3[idx])

    def replace_core(self, which: int, core: np.ndarray) -> "TensorTrain3":
        cores = list(self.cores)
        cores[which - 1] = core
        return TensorTrain3(*cores)

    @classmethod
    def stack(cls, trains) -> "TensorTrain3":
        trains = list(trains)
        return cls(
            np.stack([t.core1 for t in trains]),
            np.stack([t.core2 for t in trains]),
            np.stack([t.core3 for t in trains]),
        )

    @classmethod
    def zeros(cls, modes, rank=(1, 1), batch=()) -> "TensorTrain3":
        n1, n2, n3 = modes
        r1, r2 = rank
        batch = tuple(batch)
        return cls(
            np.zeros(batch + (n1, r1)),
            np.zeros(batch + (r1, n2, r2)),
            np.zeros(batch + (r2, n3)),
        )

    @classmethod
    def random(cls, modes, rank, rng=None, batch=()) -> "TensorTrain3":
        rng = np.random.default_rng(rng)
        n1, n2, n3 = modes
        r1, r2 = rank
        batch = tuple(batch)
        return cls(
            rng.standard_normal(batch + (n1, r1)),
            rng.standard_normal(batch + (r1, n2, r2)),
            rng.standard_normal(batch + (r2, n3)),
        )

    @classmethod
    def rank1(cls, a, b, c) -> "TensorTrain3":
        """Outer product ``a ⊗ b ⊗ c`` of (possibly batched) vectors."""
        a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
        return cls(a[..., :, None], b[..., None, :, None], c[..., None, :])


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    """A tensor train in one of the five sweep layouts.

    ``tt`` holds the three cores of the layout.  For forms II and IV the
    square ``connector`` sits on the first (II) or second (IV) bond, so the
    represented tensor is ``P1 S1 Q2 Q3`` or ``P1 P2 S2 Q3``.

    ======  =========================  ==============
    form    cores (core1, core2, core3) connector
    ======  =========================  ==============
    I       C1, Q2, Q3                 --
    II      P1, Q2, Q3                 S1 (r1 x r1)
    III     P1, C2, Q3                 --
    IV      P1, P2, Q3                 S2 (r2 x r2)
    V       P1, P2, C3                 --
    ======  =========================  ==============
    """

    tt: TensorTrain3
    form: str
    connector: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}")
        needs = self.form in ("II", "IV")
        if needs != (self.connector is not None):
            raise ValueError(f"form {self.form} connector presence mismatch")
        if needs:
            r = self.tt.rank[0] if self.form == "II" else self.tt.rank[1]
            s = np.asarray(self.connector, dtype=float)
            if s.shape != self.tt.batch_shape + (r, r):
                raise ValueError(f"connector shape {s.shape} does not fit form {self.form}")
            object.__setattr__(self, "connector", s)

    @property
    def batch_shape(self) -> tuple:
        return self.tt.batch_shape

    @property
    def rank(self) -> tuple:
        return self.tt.rank

    def to_tt(self) -> TensorTrain3:
        """Represented tensor as a plain train (connector absorbed)."""
        if self.form == "II":
            return self.tt.replace_core(1, self.tt.core1 @ self.connector)
        if self.form == "IV":
            return self.tt.replace_core(3, self.connector @ self.tt.core3)
        return self.tt

    def __getitem__(self, idx) -> "CanonicalForm":
        s = None if self.connector is None else self.connector[idx]
        return CanonicalForm(self.tt[idx], self.form, s)

    def orthonormality_residual(self) -> float:
        """Max deviation from the orthonormality conditions of this form."""
        res = 0.0
        t = self.tt
        if self.form in ("I", "II"):
            res = max(res, _right_residual(t.core2), _row_residual(t.core3))
        if self.form == "III":
            res = max(res, _row_residual(t.core3))
        if self.form in ("II", "III", "IV", "V"):
            res = max(res, _col_residual(t.core1))
        if self.form in ("IV", "V"):
            res = max(res, _left_residual(t.core2))
        if self.form == "IV":
            res = max(res, _row_residual(t.core3))
        return res


def _eye_residual(g: np.ndarray) -> float:
    r = g.shape[-1]
    return float(np.max(np.abs(g - np.eye(r)))) if g.size else 0.0


def _row_residual(m):
    return _eye_residual(m @ np.swapaxes(m, -1, -2))


def _col_residual(m):
    return _eye_residual(np.swapaxes(m, -1, -2) @ m)


def _right_residual(c2):
    return _eye_residual(np.einsum("...akb,...ckb->...ac", c2, c2))


def _left_residual(c2):
    return _eye_residual(np.einsum("...akb,...akc->...bc", c2, c2))


# ---------------------------------------------------------------- algebra


def tt_scale(c, a: TensorTrain3) -> TensorTrain3:
    """``c * A``; the scalar goes into core1 so Q-cores of form I stay intact.

    ``c`` may be an array broadcasting against the batch shape.
    """
    c = np.asarray(c, dtype=float)
    return a.replace_core(1, a.core1 * c[..., None, None])


def _check_modes(a: TensorTrain3, b: TensorTrain3):
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"mode sizes differ: {a.mode_sizes} vs {b.mode_sizes}")
    if a.batch_shape != b.batch_shape:
        raise ValueError(f"batch shapes differ: {a.batch_shape} vs {b.batch_shape}")


def tt_add(a: TensorTrain3, b: TensorTrain3) -> TensorTrain3:
    """General sum; the result has rank ``(r1 + s1, r2 + s2)``."""
    _check_modes(a, b)
    (r1, r2), (s1, s2) = a.rank, b.rank
    batch = a.batch_shape
    n2 = a.mode_sizes[1]
    core1 = np.concatenate([a.core1, b.core1], axis=-1)
    core2 = np.zeros(batch + (r1 + s1, n2, r2 + s2))
    core2[..., :r1, :, :r2] = a.core2
    core2[..., r1:, :, r2:] = b.core2
    core3 = np.concatenate([a.core3, b.core3], axis=-2)
    return TensorTrain3(core1, core2, core3)


def tt_add_same_frame(a: TensorTrain3, b: TensorTrain3, varying_core: int) -> TensorTrain3:
    """Sum of two trains that differ in one core only; rank is unchanged.

    The shared cores must be equal entry by entry (the same objects, in
    practice).  Anything else is a caller error.
    """
    if varying_core not in (1, 2, 3):
        raise ValueError(f"varying_core must be 1, 2 or 3, got {varying_core}")
    _check_modes(a, b)
    if a.rank != b.rank:
        raise ValueError(f"ranks differ: {a.rank} vs {b.rank}")
    for i, (ca, cb) in enumerate(zip(a.cores, b.cores), start=1):
        if i == varying_core or ca is cb:
            continue
        if not np.array_equal(ca, cb):
            raise ValueError(f"core {i} is not shared between the summands")
    return a.replace_core(varying_core, a.cores[varying_core - 1] + b.cores[varying_core - 1])


def _require_rank1(a: TensorTrain3, what: str):
    if a.rank != (1, 1):
        raise ValueError(f"{what} needs a rank-(1,1) train, got rank {a.rank}")


def tt_reciprocal_rank1(a: TensorTrain3) -> TensorTrain3:
    """Entrywise inverse of a rank-(1,1) train with no zero core entry."""
    _require_rank1(a, "elementwise inverse")
    if any(np.any(c == 0) for c in a.cores):
        raise ValueError("elementwise inverse undefined: zero core entry")
    return TensorTrain3(1.0 / a.core1, 1.0 / a.core2, 1.0 / a.core3)


def tt_hadamard_rank1(a: TensorTrain3, b: TensorTrain3) -> TensorTrain3:
    """Entrywise product ``A ⊙ B`` with ``A`` of rank (1,1); rank of B kept."""
    _require_rank1(a, "Hadamard product")
    _check_modes(a, b)
    return TensorTrain3(a.core1 * b.core1, a.core2 * b.core2, a.core3 * b.core3)


def tt_divide_rank1(b: TensorTrain3, a: TensorTrain3) -> TensorTrain3:
    """``B / A`` for rank-(1,1) ``A``, by core-wise division.

    Same tensor as ``tt_hadamard_rank1(tt_reciprocal_rank1(a), b)``, but
    ``A / A`` comes out as exact ones, which keeps discrete equilibria
    stationary to the last bit.
    """
    _require_rank1(a, "elementwise division")
    _check_modes(a, b)
    if any(np.any(c == 0) for c in a.cores):
        raise ValueError("elementwise inverse undefined: zero core entry")
    return TensorTrain3(b.core1 / a.core1, b.core2 / a.core2, b.core3 / a.core3)


def tt_weighted_sum(a: TensorTrain3, w1=None, w2=None, w3=None):
    """``sum_k A[k1,k2,k3] w1[k1] w2[k2] w3[k3]`` (missing weights are ones).

    Contracts each core with its weight first, then the small bond chain.
    """
    s1 = a.core1.sum(axis=-2) if w1 is None else np.einsum("...ka,k->...a", a.core1, w1)
    s2 = a.core2.sum(axis=-2) if w2 is None else np.einsum("...akb,k->...ab", a.core2, w2)
    s3 = a.core3.sum(axis=-1) if w3 is None else np.einsum("...bk,k->...b", a.core3, w3)
    return np.einsum("...a,...ab,...b->...", s1, s2, s3)


def tt_sum_all(a: TensorTrain3):
    """Sum of all entries, without forming the full tensor."""
    return tt_weighted_sum(a)


def tt_inner(a: TensorTrain3, b: TensorTrain3):
    """Frobenius inner product via transfer matrices (cost O(r^3 N))."""
    _check_modes(a, b)
    m = np.einsum("...ka,...kb->...ab", a.core1, b.core1)
    m = np.einsum("...ab,...akc->...bkc", m, a.core2)
    m = np.einsum("...bkc,...bkd->...cd", m, b.core2)
    return np.einsum("...cd,...ck,...dk->...", m, a.core3, b.core3)


def tt_frobenius_norm(a: TensorTrain3):
    return np.sqrt(np.maximum(tt_inner(a, a), 0.0))


# ---------------------------------------------------------- orthogonality


def qr_nonneg(m: np.ndarray):
    """Thin QR of (stacked) matrices with ``diag(R) >= 0``."""
    q, r = np.linalg.qr(m)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    s = np.where(d < 0, -1.0, 1.0)
    return q * s[..., None, :], r * s[..., :, None]


def lq_nonneg(m: np.ndarray):
    """``m = L @ Q`` with orthonormal rows in ``Q`` (transpose of QR)."""
    q, r = qr_nonneg(np.swapaxes(m, -1, -2))
    return np.swapaxes(r, -1, -2), np.swapaxes(q, -1, -2)


def orthonormalize_right(a: TensorTrain3) -> CanonicalForm:
    """Bring a train to form I: ``C1 Q2 Q3`` with right-orthonormal Q2, Q3."""
    batch = a.batch_shape
    (r1, r2), (n1, n2, n3) = a.rank, a.mode_sizes
    if r2 > n3 or r1 > n2 * r2:
        raise ValueError(f"rank {a.rank} too large for mode sizes {a.mode_sizes}")
    l3, q3 = lq_nonneg(a.core3)
    c2 = (a.core2 @ l3[..., None, :, :]).reshape(batch + (r1, n2 * r2))
    l2, q2 = lq_nonneg(c2)
    c1 = a.core1 @ l2
    return CanonicalForm(TensorTrain3(c1, q2.reshape(batch + (r1, n2, r2)), q3), "I")


def orthonormalize_left(a) -> CanonicalForm:
    """Bring a train (or a form-I object) to form V: ``P1 P2 C3``."""
    if isinstance(a, CanonicalForm):
        a = a.to_tt()
    batch = a.batch_shape
    (r1, r2), (n1, n2, n3) = a.rank, a.mode_sizes
    if r1 > n1 or r2 > r1 * n2:
        raise ValueError(f"rank {a.rank} too large for mode sizes {a.mode_sizes}")
    p1, s1 = qr_nonneg(a.core1)
    c2 = (s1 @ a.core2.reshape(batch + (r1, n2 * r2))).reshape(batch + (r1 * n2, r2))
    p2, s2 = qr_nonneg(c2)
    c3 = s2 @ a.core3
    return CanonicalForm(TensorTrain3(p1, p2.reshape(batch + (r1, n2, r2)), c3), "V")


def _complete_rows(rows: np.ndarray, total: int) -> np.ndarray:
    """Extend orthonormal rows ``(r, n)`` to ``(total, n)`` orthonormal rows."""
    r, n = rows.shape
    if total == r:
        return rows
    # Gram-Schmidt of the unit vectors against the existing rows
    basis = list(rows)
    for e in np.eye(n):
        v = e.copy()
        for _ in range(2):
            for b in basis:
                v -= np.dot(b, v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == total:
            break
    if len(basis) < total:
        raise ValueError(f"cannot complete {r} rows to {total} in dimension {n}")
    return np.asarray(basis)


def tt_rank_pad(a: TensorTrain3, target) -> TensorTrain3:
    """Raise the rank to ``target`` without changing the represented tensor.

    The train is first brought to form I; new rows of the Q-cores are
    completed to an orthonormal set and the matching columns of C1 are zero,
    so the output already satisfies the form-I conditions.
    """
    t1, t2 = target
    r1, r2 = a.rank
    if t1 < r1 or t2 < r2:
        raise ValueError(f"target rank {target} below current rank {a.rank}")
    if (t1, t2) == (r1, r2):
        return a
    n1, n2, n3 = a.mode_sizes
    if t2 > n3 or t1 > n2 * t2 or t1 > n1:
        raise ValueError(f"target rank {target} too large for mode sizes {a.mode_sizes}")
    form = orthonormalize_right(a)
    batch = a.batch_shape
    flat = TensorTrain3(*(c.reshape((-1,) + c.shape[len(batch):]) for c in form.tt.cores))
    c1s, c2s, c3s = [], [], []
    for b in range(flat.core1.shape[0]):
        c1, q2, q3 = flat.core1[b], flat.core2[b], flat.core3[b]
        q3p = _complete_rows(q3, t2)
        q2p = np.zeros((r1, n2, t2))
        q2p[:, :, :r2] = q2
        q2p = _complete_rows(q2p.reshape(r1, n2 * t2), t1).reshape(t1, n2, t2)
        c1p = np.zeros((n1, t1))
        c1p[:, :r1] = c1
        c1s.append(c1p)
        c2s.append(q2p)
        c3s.append(q3p)
    return TensorTrain3(
        np.asarray(c1s).reshape(batch + (n1, t1)),
        np.asarray(c2s).reshape(batch + (t1, n2, t2)),
        np.asarray(c3s).reshape(batch + (t2, n3)),
    )


def tt_to_full(a: TensorTrain3, cap: Optional[int] = FULL_TENSOR_CAP) -> np.ndarray:
    """Dense tensor.  Refuses anything above ``cap`` entries (``None``: no cap)."""
    size = int(np.prod(a.mode_sizes)) * int(np.prod(a.batch_shape, dtype=int))
    if cap is not None and size > cap:
        raise ValueError(f"full tensor would have {size} entries (cap {cap})")
    return np.einsum("...ia,...ajb,...bk->...ijk", a.core1, a.core2, a.core3)
