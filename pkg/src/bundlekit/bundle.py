"""Cutting-plane bundle: cut collection, model evaluation, active set, and
serious/null update policies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problem import Tolerances, as_vector


@dataclass(frozen=True)
class Cut:
    """One linearization of f: u -> value + <grad, u - point>.

    Stored with its intercept b = value - <grad, point> so the model is
    max_i (b_i + <g_i, u>).
    """

    point: np.ndarray
    value: float
    grad: np.ndarray
    intercept: float
    id: int

    def __post_init__(self):
        object.__setattr__(self, "point", as_vector(self.point))
        object.__setattr__(self, "grad", as_vector(self.grad))
        expected = self.value - float(self.grad @ self.point)
        if abs(self.intercept - expected) > 1e-12 * (1 + abs(self.value)):
            raise ValueError("intercept inconsistent with value and gradient")


def make_cut(x, fx: float, gx, cut_id: int) -> Cut:
    x = as_vector(x)
    gx = as_vector(gx)
    return Cut(point=x, value=float(fx), grad=gx,
               intercept=float(fx) - float(gx @ x), id=cut_id)


@dataclass(frozen=True)
class Policy:
    """Bundle management policy: keep_all, lean, or cap(K)."""

    name: str
    cap: Optional[int] = None

    def __post_init__(self):
        if self.name not in ("keep_all", "lean", "cap"):
            raise ValueError(f"unknown policy {self.name!r}")
        if self.name == "cap":
            if self.cap is None or self.cap < 1:
                raise ValueError("cap policy needs cap >= 1")
        elif self.cap is not None:
            raise ValueError("cap only valid for the cap policy")

    @staticmethod
    def parse(text: str) -> "Policy":
        if text in ("keep_all", "lean"):
            return Policy(text)
        if text.startswith("cap(") and text.endswith(")"):
            return Policy("cap", cap=int(text[4:-1]))
        raise ValueError(f"cannot parse policy {text!r}")


@dataclass
class Bundle:
    """Ordered cut collection with cached slope/intercept arrays."""

    cuts: list = field(default_factory=list)
    policy: Policy = field(default_factory=lambda: Policy("lean"))

    def __post_init__(self):
        ids = [c.id for c in self.cuts]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            raise ValueError("cut ids must be strictly increasing")

    def __len__(self):
        return len(self.cuts)

    @property
    def ids(self):
        return [c.id for c in self.cuts]

    def arrays(self):
        """(G, b): slopes stacked as rows, intercepts as a vector."""
        G = np.asarray([c.grad for c in self.cuts])
        b = np.asarray([c.intercept for c in self.cuts])
        return G, b


def eval_model(bundle: Bundle, u) -> tuple:
    """Model value max_i (b_i + <g_i, u>) and the smallest attaining cut id."""
    if not bundle.cuts:
        raise ValueError("empty bundle")
    G, b = bundle.arrays()
    vals = G @ as_vector(u) + b
    i = int(np.argmax(vals))
    return float(vals[i]), bundle.cuts[i].id


def active_set(bundle: Bundle, x_j, model_value: float,
               tol: Tolerances = Tolerances()) -> list:
    """Ids of cuts within relative tolerance of the model max at x_j."""
    G, b = bundle.arrays()
    vals = G @ as_vector(x_j) + b
    cutoff = model_value - tol.active_set_rel * (1 + abs(model_value))
    ids = [c.id for c, v in zip(bundle.cuts, vals) if v >= cutoff]
    if not ids:
        raise AssertionError("active set is empty, model_value disagrees with bundle")
    return ids


def update_null(bundle: Bundle, active_ids: list, new_cut: Cut) -> Bundle:
    """Null-step update: keep at least the active cuts, add the new one."""
    if bundle.cuts and new_cut.id <= bundle.cuts[-1].id:
        raise ValueError("new cut id must exceed existing ids")
    act = set(active_ids)
    name = bundle.policy.name
    if name == "keep_all":
        kept = list(bundle.cuts)
    elif name == "lean":
        kept = [c for c in bundle.cuts if c.id in act]
    else:
        kept = [c for c in bundle.cuts if c.id in act]
        others = [c for c in bundle.cuts if c.id not in act]
        room = bundle.policy.cap - len(kept) - 1
        if room > 0:
            extra = others[-room:]
            kept = sorted(kept + extra, key=lambda c: c.id)
    new_cuts = kept + [new_cut]
    new_ids = {c.id for c in new_cuts}
    old_ids = {c.id for c in bundle.cuts}
    assert act | {new_cut.id} <= new_ids <= old_ids | {new_cut.id}, \
        "bundle update violated the active-set sandwich rule"
    return Bundle(cuts=new_cuts, policy=bundle.policy)


def update_serious(bundle: Bundle, new_cut: Cut) -> Bundle:
    """Serious-step update: lean refreshes to the single new cut."""
    if bundle.cuts and new_cut.id <= bundle.cuts[-1].id:
        raise ValueError("new cut id must exceed existing ids")
    name = bundle.policy.name
    if name == "lean":
        kept = []
    elif name == "keep_all":
        kept = list(bundle.cuts)
    else:
        kept = bundle.cuts[-(bundle.policy.cap - 1):] if bundle.policy.cap > 1 else []
    return Bundle(cuts=kept + [new_cut], policy=bundle.policy)
