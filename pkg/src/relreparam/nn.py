"""Toy feed-forward networks: singularity taxonomy and row reparameterization.

Three singular sets are detected on each hidden layer's incoming weight rows
V_i (with outgoing scalar weights w_i): elimination (w_i V_i vanishes),
overlap (V_i = +-V_j, only the summed outgoing weight identifiable), and, on
identity-activation layers only, linear dependence (some V_k in the span of
two other rows).

Row reparameterization orders the rows of a weight matrix by one designated
column and encodes each subsequent entry in that column as
previous + d^2 + lambda, mirroring the mixture construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmm import MixtureError
from .reparam import SingularPointError

ACTIVATIONS = ("tanh", "relu", "identity")


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


@dataclass(frozen=True)
class MLPParams:
    """Per-layer weights/biases with a shared pointwise activation; last layer linear."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise MixtureError(f"activation must be one of {ACTIVATIONS}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise MixtureError("need matching nonempty weight/bias tuples")
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[1]:
                raise MixtureError(f"layer {k}: weight must be 2-D with bias matching its width")
            if k > 0 and ws[k - 1].shape[1] != w.shape[0]:
                raise MixtureError(f"layer {k}: input width does not match previous layer")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self) -> int:
        return len(self.weights)


def forward(mlp: MLPParams, x: np.ndarray) -> np.ndarray:
    """Propagate inputs through every layer; the final layer is affine."""
    h = np.asarray(x, dtype=float)
    if h.ndim == 1:
        h = h[None, :]
    if h.shape[1] != mlp.weights[0].shape[0]:
        raise MixtureError("input width does not match first layer")
    for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = h @ w + b
        h = z if k == mlp.depth - 1 else _apply_activation(mlp.activation, z)
    return h


@dataclass(frozen=True)
class NNSingularityReport:
    """Detected proximity to the three singular sets, per hidden layer."""

    elimination: tuple[tuple[int, int, float], ...]           # (layer, unit, |w_i|*|V_i|)
    overlap: tuple[tuple[int, int, int, int, float], ...]     # (layer, i, j, sign, gap)
    linear_dependence: tuple[tuple[int, tuple[int, int, int], float], ...]

    @property
    def is_identifiable(self) -> bool:
        return not (self.elimination or self.overlap or self.linear_dependence)


def detect_singularities(mlp: MLPParams, tol: float = 1e-6) -> NNSingularityReport:
    """Scan hidden layers for elimination / overlap / linear-dependence hits.

    For hidden layer k the incoming rows are the columns of W_k (one per
    unit) and the outgoing weights are the rows of W_{k+1}. Tolerances are
    relative to the layer's Frobenius norm. Linear dependence is only
    meaningful when the activation is the identity.
    """
    if tol <= 0:
        raise MixtureError("tol must be positive")
    elim, over, lindep = [], [], []
    for k in range(mlp.depth - 1):
        w_in = mlp.weights[k]       # (fan_in, units): column i feeds unit i
        w_out = mlp.weights[k + 1]  # (units, fan_out): row i carries unit i onward
        scale = max(np.linalg.norm(w_in), 1.0)
        units = w_in.shape[1]
        for i in range(units):
            prod = np.linalg.norm(w_out[i]) * np.linalg.norm(w_in[:, i])
            if prod <= tol * scale:
                elim.append((k, i, float(prod)))
        for i in range(units):
            for j in range(i + 1, units):
                gap_plus = np.linalg.norm(w_in[:, i] - w_in[:, j])
                gap_minus = np.linalg.norm(w_in[:, i] + w_in[:, j])
                if min(gap_plus, gap_minus) <= tol * scale:
                    sign = 1 if gap_plus <= gap_minus else -1
                    over.append((k, i, j, sign, float(min(gap_plus, gap_minus))))
        if mlp.activation == "identity":
            for kk in range(units):
                others = [i for i in range(units) if i != kk]
                for a in range(len(others)):
                    for b in range(a + 1, len(others)):
                        i, j = others[a], others[b]
                        basis = w_in[:, [i, j]]
                        target = w_in[:, kk]
                        coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
                        resid = np.linalg.norm(basis @ coef - target)
                        if resid <= tol * scale:
                            lindep.append((k, (i, j, kk), float(resid)))
    return NNSingularityReport(elimination=tuple(elim), overlap=tuple(over),
                               linear_dependence=tuple(lindep))


def report_lines(report: NNSingularityReport) -> list[str]:
    """One human-readable line per hit."""
    lines = []
    for layer, unit, norm in report.elimination:
        lines.append(f"elimination layer={layer} unit={unit} norm={norm:.3e}")
    for layer, i, j, sign, gap in report.overlap:
        lines.append(f"overlap layer={layer} units=({i},{j}) sign={sign:+d} gap={gap:.3e}")
    for layer, triple, resid in report.linear_dependence:
        lines.append(f"linear_dependence layer={layer} units={triple} residual={resid:.3e}")
    if not lines:
        lines.append("identifiable: no singularity hits")
    return lines


@dataclass(frozen=True)
class RowReparam:
    """Encoded form of a weight matrix under row reparameterization."""

    reference_row: np.ndarray
    encoded: np.ndarray        # rows 2..n with the ordering column replaced by d_i
    column: int
    clearance: float
    permutation: tuple[int, ...]


def reparameterize_rows(w: np.ndarray, clearance: float = 0.0, column: int = 0) -> RowReparam:
    """Sort rows by one column and encode that column's gaps as d^2 + lambda."""
    w = np.asarray(w, dtype=float)
    if clearance < 0:
        raise MixtureError("clearance must be >= 0")
    if not 0 <= column < w.shape[1]:
        raise MixtureError("ordering column out of range")
    order = tuple(int(i) for i in np.argsort(w[:, column], kind="stable"))
    sorted_w = w[list(order)]
    gaps = np.diff(sorted_w[:, column])
    if clearance > 0 and np.any(gaps < clearance):
        raise SingularPointError(
            "ordering-column gap below clearance: rows are not strongly identifiable"
        )
    encoded = sorted_w[1:].copy()
    encoded[:, column] = np.sqrt(np.maximum(gaps - clearance, 0.0))
    return RowReparam(reference_row=sorted_w[0].copy(), encoded=encoded,
                      column=column, clearance=clearance, permutation=order)


def decode_rows(rep: RowReparam) -> np.ndarray:
    """Reconstruct the (row-permuted) weight matrix from its encoded form."""
    rows = [rep.reference_row.copy()]
    prev = rep.reference_row[rep.column]
    for enc in rep.encoded:
        row = enc.copy()
        prev = prev + enc[rep.column] ** 2 + rep.clearance
        row[rep.column] = prev
        rows.append(row)
    return np.vstack(rows)


def permute_hidden_units(mlp: MLPParams, layer: int, perm) -> MLPParams:
    """Apply a hidden-unit permutation: reorder W_layer columns/bias and W_{layer+1} rows."""
    perm = list(perm)
    ws = [w.copy() for w in mlp.weights]
    bs = [b.copy() for b in mlp.biases]
    ws[layer] = ws[layer][:, perm]
    bs[layer] = bs[layer][perm]
    ws[layer + 1] = ws[layer + 1][perm, :]
    return MLPParams(weights=tuple(ws), biases=tuple(bs), activation=mlp.activation)
