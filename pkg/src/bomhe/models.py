"""Parameter vectors, structured templates, and concrete linear models.

A candidate dynamics model is a flat parameter vector whose entries are
placed into the (A, B, C) matrices of a discrete linear system by a
``ParamTemplate``. Cells not listed in the template are fixed at zero, so a
template with d free cells turns a length-d vector into a full model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

Bounds = np.ndarray  # shape (d, 2), rows are closed intervals [lo, hi]


def as_bounds(bounds) -> Bounds:
    b = np.asarray(bounds, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2:
        raise InvalidArgumentError(f"bounds must have shape (d, 2), got {b.shape}")
    if np.any(b[:, 0] > b[:, 1]):
        raise InvalidArgumentError("bounds must satisfy lo <= hi in every dimension")
    return b


@dataclass(frozen=True)
class ThetaVector:
    """A parameter vector together with its per-entry box bounds.

    Values are clamped into the bounds on construction, so a ThetaVector is
    always feasible.
    """

    values: np.ndarray
    bounds: Bounds

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        bounds = as_bounds(self.bounds)
        if values.shape[0] != bounds.shape[0]:
            raise InvalidArgumentError(
                f"theta has {values.shape[0]} entries but bounds describe {bounds.shape[0]}"
            )
        object.__setattr__(self, "values", np.clip(values, bounds[:, 0], bounds[:, 1]))
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TemplateEntry:
    """One (matrix, row, col) cell: either free (param index) or fixed at a constant."""

    matrix: str  # "A", "B" or "C"
    row: int
    col: int
    param: int | None = None
    value: float = 0.0


@dataclass(frozen=True)
class ParamTemplate:
    """Structural map from a flat parameter vector to (A, B, C) matrices."""

    n_x: int
    n_u: int
    n_y: int
    entries: tuple[TemplateEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        shapes = {
            "A": (self.n_x, self.n_x),
            "B": (self.n_x, self.n_u),
            "C": (self.n_y, self.n_x),
        }
        seen_cells = set()
        free = set()
        for e in self.entries:
            if e.matrix not in shapes:
                raise InvalidArgumentError(f"unknown matrix id {e.matrix!r}")
            rows, cols = shapes[e.matrix]
            if not (0 <= e.row < rows and 0 <= e.col < cols):
                raise InvalidArgumentError(
                    f"cell {e.matrix}[{e.row},{e.col}] outside {rows}x{cols}"
                )
            cell = (e.matrix, e.row, e.col)
            if cell in seen_cells:
                raise InvalidArgumentError(f"cell {cell} listed twice")
            seen_cells.add(cell)
            if e.param is not None:
                free.add(e.param)
        if free and free != set(range(len(free))):
            raise InvalidArgumentError(
                f"free parameter indices must be contiguous from 0, got {sorted(free)}"
            )
        object.__setattr__(self, "_n_free", len(free))

    @property
    def n_free(self) -> int:
        return self._n_free


@dataclass(frozen=True)
class LinearModel:
    """A concrete (A, B, C) triple. B may have zero columns for input-free systems."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1) if B.size else B.reshape(A.shape[0], 0)
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise InvalidArgumentError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise InvalidArgumentError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
        if C.shape[1] != A.shape[0]:
            raise InvalidArgumentError(f"C has {C.shape[1]} cols, expected {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


def instantiate(template: ParamTemplate, theta: ThetaVector) -> LinearModel:
    """Fill a template's free cells from ``theta`` and return the model.

    Fixed cells keep their constants; unlisted cells are zero.
    """
    if theta.dim != template.n_free:
        raise InvalidArgumentError(
            f"theta has dimension {theta.dim} but template has {template.n_free} free cells"
        )
    mats = {
        "A": np.zeros((template.n_x, template.n_x)),
        "B": np.zeros((template.n_x, template.n_u)),
        "C": np.zeros((template.n_y, template.n_x)),
    }
    for e in template.entries:
        v = theta.values[e.param] if e.param is not None else e.value
        mats[e.matrix][e.row, e.col] = v
    return LinearModel(mats["A"], mats["B"], mats["C"])


def extract(template: ParamTemplate, model: LinearModel, bounds) -> ThetaVector:
    """Read the free cells of ``model`` back into a parameter vector."""
    if (model.n_x, model.n_u, model.n_y) != (template.n_x, template.n_u, template.n_y):
        raise InvalidArgumentError("model dimensions do not match template")
    values = np.zeros(template.n_free)
    mats = {"A": model.A, "B": model.B, "C": model.C}
    for e in template.entries:
        if e.param is not None:
            values[e.param] = mats[e.matrix][e.row, e.col]
    return ThetaVector(values, bounds)


def free_cell_template(n_x: int, n_u: int, n_y: int, free_cells, fixed_cells=()) -> ParamTemplate:
    """Build a template from (matrix, row, col) free cells in parameter order."""
    entries = [
        TemplateEntry(m, r, c, param=k) for k, (m, r, c) in enumerate(free_cells)
    ]
    entries += [TemplateEntry(m, r, c, value=v) for (m, r, c, v) in fixed_cells]
    return ParamTemplate(n_x, n_u, n_y, tuple(entries))
