"""Fixed-rank projector-splitting integrators over a field of tensor trains.

One time step cycles every spatial point through the layouts I -> V (Lie)
or I -> V -> I (Strang), alternating forward core updates and backward
connector updates.  A propagator pair supplies the right-hand sides; it
returns a :class:`RhsTerms` so that projections can be taken term by term
and the propagated tensor is never assembled.

All spatial points are advanced together: the field stores batched cores
with the spatial index as leading axis, and each substep reads the field
left by the previous substep (a global barrier).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from .tt_core import (
    CanonicalForm,
    TensorTrain3,
    lq_nonneg,
    orthonormalize_right,
    qr_nonneg,
    tt_add_same_frame,
)

__all__ = [
    "RhsTerms",
    "PropagatorPair",
    "SpatialTTField",
    "NonFiniteStateError",
    "project_C1",
    "project_S1",
    "project_C2",
    "project_S2",
    "project_C3",
    "replace_core",
    "advance_form",
    "lie_step",
    "strang_step",
    "identity_propagators",
]


class NonFiniteStateError(FloatingPointError):
    """Raised when a substep produces NaN or inf."""

    def __init__(self, t, j, substep, step=None):
        self.t, self.j, self.substep, self.step = t, j, substep, step
        super().__init__(
            f"non-finite state: step={step} t={t:.6g} j={j} substep={substep}"
        )


@dataclass
class RhsTerms:
    """Unassembled sum of tensor trains (all with equal mode and batch shapes)."""

    terms: List[TensorTrain3] = field(default_factory=list)

    def __post_init__(self):
        self.terms = list(self.terms)
        if self.terms:
            m, b = self.terms[0].mode_sizes, self.terms[0].batch_shape
            for t in self.terms[1:]:
                if t.mode_sizes != m or t.batch_shape != b:
                    raise ValueError("RhsTerms members must share mode sizes and batch shape")

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "RhsTerms") -> "RhsTerms":
        return RhsTerms(self.terms + list(other.terms))

    @property
    def max_term_rank(self) -> int:
        return max((max(t.rank) for t in self.terms), default=0)

    def compact(self) -> "RhsTerms":
        """Merge terms that share core2 and core3 (same objects) into one.

        Rank never grows: this is repeated same-frame addition on core1.
        """
        out: List[TensorTrain3] = []
        for t in self.terms:
            for i, o in enumerate(out):
                if o.core2 is t.core2 and o.core3 is t.core3:
                    out[i] = tt_add_same_frame(o, t, 1)
                    break
            else:
                out.append(t)
        return RhsTerms(out)


@dataclass(frozen=True)
class PropagatorPair:
    """Forward and backward substep maps.

    Both are called as ``fn(snapshot, dt)`` where ``snapshot`` is the batched
    train of all spatial points, and return the propagated tensors of all
    points as :class:`RhsTerms`.
    """

    forward: Callable[[TensorTrain3, float], RhsTerms]
    backward: Callable[[TensorTrain3, float], RhsTerms]
    order: int = 1


def identity_propagators(order: int = 2) -> PropagatorPair:
    same = lambda f, dt: RhsTerms([f])  # noqa: E731
    return PropagatorPair(same, same, order)


@dataclass
class SpatialTTField:
    """Solver state: one train per spatial point, stored batched."""

    state: CanonicalForm
    t: float = 0.0
    dx: Optional[float] = None

    def __post_init__(self):
        if len(self.state.batch_shape) != 1:
            raise ValueError("field state must have exactly one batch axis (space)")

    @classmethod
    def from_trains(cls, trains: TensorTrain3, t=0.0, dx=None) -> "SpatialTTField":
        """Orthonormalize a batched train into a form-I field."""
        return cls(orthonormalize_right(trains), t, dx)

    @property
    def n_x(self) -> int:
        return self.state.batch_shape[0]

    @property
    def rank(self):
        return self.state.rank

    @property
    def form(self):
        return self.state.form

    def __len__(self):
        return self.n_x

    def __getitem__(self, j) -> CanonicalForm:
        return self.state[j]

    def tensor(self) -> TensorTrain3:
        return self.state.to_tt()


# ------------------------------------------------------------ projections


def _check(terms: RhsTerms, frame: CanonicalForm, form: str):
    if frame.form != form:
        raise ValueError(f"frame must be in form {form}, got {frame.form}")
    modes = frame.tt.mode_sizes
    for t in terms:
        if t.mode_sizes != modes:
            raise ValueError(f"term mode sizes {t.mode_sizes} != frame {modes}")
        if t.batch_shape != frame.batch_shape:
            raise ValueError("term batch shape does not match frame")


def _t(m):
    return np.swapaxes(m, -1, -2)


def _right_env(h: TensorTrain3, q3: np.ndarray) -> np.ndarray:
    # (R2, r2): sum_k3 H3 Q3
    return h.core3 @ _t(q3)


def _middle_right(h: TensorTrain3, q2: np.ndarray, x: np.ndarray) -> np.ndarray:
    # (R1, r1): sum_{k2, a2} H2[g1,k2,g2] X[g2,a2] Q2[a1,k2,a2]
    y = h.core2 @ x[..., None, :, :]
    b = y.shape[:-3]
    return y.reshape(b + (y.shape[-3], -1)) @ _t(q2.reshape(b + (q2.shape[-3], -1)))


def _left_env(h: TensorTrain3, p1: np.ndarray) -> np.ndarray:
    # (r1, R1): sum_k1 P1 H1
    return _t(p1) @ h.core1


def _middle_left(h: TensorTrain3, p2: np.ndarray, l: np.ndarray) -> np.ndarray:
    # (r2, R2): sum_{k2, a1} P2[a1,k2,a2] L[a1,g1] H2[g1,k2,g2]
    b = l.shape[:-2]
    r1, big_r1 = l.shape[-2:]
    n2, big_r2 = h.core2.shape[-2:]
    w = l @ h.core2.reshape(b + (big_r1, n2 * big_r2))
    w = w.reshape(b + (r1 * n2, big_r2))
    return _t(p2.reshape(b + (r1 * n2, -1))) @ w


def project_C1(terms: RhsTerms, frame: CanonicalForm) -> np.ndarray:
    """Core-1 update ``<G, Q2, Q3>``: shape ``(..., N1, r1)``."""
    _check(terms, frame, "I")
    _, q2, q3 = frame.tt.cores
    out = np.zeros(frame.tt.core1.shape)
    for h in terms:
        out += h.core1 @ _middle_right(h, q2, _right_env(h, q3))
    return out


def project_S1(terms: RhsTerms, frame: CanonicalForm) -> np.ndarray:
    """Connector update ``<P1, H, Q2, Q3>``: shape ``(..., r1, r1)``."""
    _check(terms, frame, "II")
    p1, q2, q3 = frame.tt.cores
    out = np.zeros(frame.connector.shape)
    for h in terms:
        out += _left_env(h, p1) @ _middle_right(h, q2, _right_env(h, q3))
    return out


def project_C2(terms: RhsTerms, frame: CanonicalForm) -> np.ndarray:
    """Core-2 update ``<P1, G, Q3>``: shape ``(..., r1, N2, r2)``."""
    _check(terms, frame, "III")
    p1, _, q3 = frame.tt.cores
    out = np.zeros(frame.tt.core2.shape)
    for h in terms:
        l = _left_env(h, p1)
        x = _right_env(h, q3)
        b = l.shape[:-2]
        big_r1 = l.shape[-1]
        n2, big_r2 = h.core2.shape[-2:]
        w = (l @ h.core2.reshape(b + (big_r1, n2 * big_r2))).reshape(b + (l.shape[-2], n2, big_r2))
        out += w @ x[..., None, :, :]
    return out


def project_S2(terms: RhsTerms, frame: CanonicalForm) -> np.ndarray:
    """Connector update ``<P1, P2, H, Q3>``: shape ``(..., r2, r2)``."""
    _check(terms, frame, "IV")
    p1, p2, q3 = frame.tt.cores
    out = np.zeros(frame.connector.shape)
    for h in terms:
        out += _middle_left(h, p2, _left_env(h, p1)) @ _right_env(h, q3)
    return out


def project_C3(terms: RhsTerms, frame: CanonicalForm) -> np.ndarray:
    """Core-3 update ``<P1, P2, G>``: shape ``(..., r2, N3)``."""
    _check(terms, frame, "V")
    p1, p2, _ = frame.tt.cores
    out = np.zeros(frame.tt.core3.shape)
    for h in terms:
        out += _middle_left(h, p2, _left_env(h, p1)) @ h.core3
    return out


_PROJECTORS = {"I": project_C1, "II": project_S1, "III": project_C2, "IV": project_S2, "V": project_C3}


# ------------------------------------------------------- form transitions


def replace_core(state: CanonicalForm, new: np.ndarray) -> CanonicalForm:
    """Swap in the non-orthonormal part (C1, S1, C2, S2 or C3)."""
    form = state.form
    if form in ("II", "IV"):
        return CanonicalForm(state.tt, form, new)
    which = {"I": 1, "III": 2, "V": 3}[form]
    return CanonicalForm(state.tt.replace_core(which, new), form)


def advance_form(state: CanonicalForm, direction: str) -> CanonicalForm:
    """Move one layout forward (I->II->...->V) or backward (V->...->I)."""
    f = state.form
    tt = state.tt
    c1, c2, c3 = tt.cores
    batch = tt.batch_shape
    r1, r2 = tt.rank
    n2 = tt.mode_sizes[1]
    if direction == "forward":
        if f == "I":
            p1, s1 = qr_nonneg(c1)
            return CanonicalForm(tt.replace_core(1, p1), "II", s1)
        if f == "II":
            new = (state.connector @ c2.reshape(batch + (r1, -1))).reshape(c2.shape)
            return CanonicalForm(tt.replace_core(2, new), "III")
        if f == "III":
            p2, s2 = qr_nonneg(c2.reshape(batch + (r1 * n2, r2)))
            return CanonicalForm(tt.replace_core(2, p2.reshape(c2.shape)), "IV", s2)
        if f == "IV":
            return CanonicalForm(tt.replace_core(3, state.connector @ c3), "V")
    elif direction == "backward":
        if f == "V":
            s2, q3 = lq_nonneg(c3)
            return CanonicalForm(tt.replace_core(3, q3), "IV", s2)
        if f == "IV":
            new = c2 @ state.connector[..., None, :, :]
            return CanonicalForm(tt.replace_core(2, new), "III")
        if f == "III":
            s1, q2 = lq_nonneg(c2.reshape(batch + (r1, n2 * r2)))
            return CanonicalForm(tt.replace_core(2, q2.reshape(c2.shape)), "II", s1)
        if f == "II":
            return CanonicalForm(tt.replace_core(1, c1 @ state.connector), "I")
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    raise ValueError(f"no {direction} transition from form {f}")


# ------------------------------------------------------------------ sweeps


def _guard(new: np.ndarray, t: float, label: str, step):
    if not np.all(np.isfinite(new)):
        bad = ~np.isfinite(new.reshape(new.shape[0], -1)).all(axis=1)
        j = int(np.argmax(bad))
        raise NonFiniteStateError(t, j, label, step)


def _substep(state: CanonicalForm, snapshot: TensorTrain3, fn, dt, t, label, step):
    """Propagate the snapshot, project onto ``state``'s frame, swap the core in."""
    new = _PROJECTORS[state.form](fn(snapshot, dt), state)
    _guard(new, t, label, step)
    return replace_core(state, new)


def lie_step(field: SpatialTTField, prop: PropagatorPair, dt: float, step=None) -> SpatialTTField:
    """First-order sweep (steps 1-5) advancing the field by ``dt``."""
    s = field.state
    if s.form != "I":
        raise ValueError(f"lie_step needs a form-I field, got form {s.form}")
    t = field.t
    fwd, bwd = prop.forward, prop.backward
    # step 1: C1 <- <G(f_I), Q2, Q3>, then QR to form II
    s = _substep(s, s.tt, fwd, dt, t, "1", step)
    snap = s.tt  # f~_I, input to step 2a
    s = advance_form(s, "forward")
    # step 2: S1 <- <P1, H(f~_I), Q2, Q3>, absorb into Q2 -> form III
    s = _substep(s, snap, bwd, dt, t, "2", step)
    s = advance_form(s, "forward")
    # step 3
    s = _substep(s, s.tt, fwd, dt, t, "3", step)
    snap = s.tt  # f~_III
    s = advance_form(s, "forward")
    # step 4
    s = _substep(s, snap, bwd, dt, t, "4", step)
    s = advance_form(s, "forward")
    # step 5, then back to form I
    s = _substep(s, s.tt, fwd, dt, t, "5", step)
    s = orthonormalize_right(s.tt)
    return replace(field, state=s, t=t + dt)


def strang_step(field: SpatialTTField, prop: PropagatorPair, dt: float, step=None) -> SpatialTTField:
    """Second-order sweep: half steps 1-4, full step 5, half steps 4-1."""
    s = field.state
    if s.form != "I":
        raise ValueError(f"strang_step needs a form-I field, got form {s.form}")
    t = field.t
    h = 0.5 * dt
    fwd, bwd = prop.forward, prop.backward
    s = _substep(s, s.tt, fwd, h, t, "1", step)
    snap = s.tt
    s = advance_form(s, "forward")
    s = _substep(s, snap, bwd, h, t, "2", step)
    s = advance_form(s, "forward")
    s = _substep(s, s.tt, fwd, h, t, "3", step)
    snap = s.tt
    s = advance_form(s, "forward")
    s = _substep(s, snap, bwd, h, t, "4", step)
    s = advance_form(s, "forward")
    # full step 5abc, then QR of C3 back to form IV
    s = _substep(s, s.tt, fwd, dt, t, "5", step)
    snap = s.tt  # f~_V feeds the backward 4abc
    s = advance_form(s, "backward")
    s = _substep(s, snap, bwd, h, t, "4'", step)
    s = advance_form(s, "backward")  # P2 S2 -> form III
    s = _substep(s, s.tt, fwd, h, t, "3'", step)
    snap = s.tt  # f~_III feeds 2abc
    s = advance_form(s, "backward")  # QR of C2 -> form II
    s = _substep(s, snap, bwd, h, t, "2'", step)
    s = advance_form(s, "backward")  # P1 S1 -> form I
    s = _substep(s, s.tt, fwd, h, t, "1'", step)
    return replace(field, state=s, t=t + dt)
