"""Dense symmetric tensor algebra over R^d.

A kernel of order q is stored as the full dense array of its d^q coefficients
(row-major), which keeps contraction code free of multiset bookkeeping at the
cost of redundancy.  Guard rails reject tensors that would not fit desk-scale
work: orders above ``MAX_ORDER`` and coefficient arrays above ``MAX_ELEMENTS``
entries.  Both limits can be overridden per call.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import ResourceGuardError

MAX_ORDER = 8
MAX_ELEMENTS = 10_000_000

SYMMETRY_RTOL = 1e-12  # load-time symmetry tolerance, relative to the norm


def _check_guard(order, dim, max_order=None, max_elements=None):
    max_order = MAX_ORDER if max_order is None else max_order
    max_elements = MAX_ELEMENTS if max_elements is None else max_elements
    if order > max_order:
        raise ResourceGuardError(
            f"tensor order {order} exceeds the guard max_order={max_order}"
        )
    if dim ** order > max_elements:
        raise ResourceGuardError(
            f"dense tensor with dim={dim}, order={order} has {dim ** order} "
            f"entries, above the guard max_elements={max_elements}"
        )


@dataclass(frozen=True)
class SymmetricKernel:
    """Order-q symmetric tensor over R^d; order 0 is a scalar.

    ``coeffs`` has shape ``(dim,) * order`` and is invariant under every
    permutation of its indices.  Instances built by library operations are
    symmetric by construction; data loaded from files is checked.
    """

    order: int
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        if self.order < 0:
            raise ValueError(f"order must be >= 0, got {self.order}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if arr.shape != (self.dim,) * self.order:
            raise ValueError(
                f"coeffs shape {arr.shape} does not match order={self.order}, "
                f"dim={self.dim}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs ** 2)))


def _multiset_arrangements(labels):
    """Yield the distinct permutations of a multiset of labels."""
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    n = len(labels)
    out = [None] * n

    def rec(pos):
        if pos == n:
            yield tuple(out)
            return
        for lab, c in counts.items():
            if c == 0:
                continue
            counts[lab] = c - 1
            out[pos] = lab
            yield from rec(pos + 1)
            counts[lab] = c

    yield from rec(0)


def _arrangement_count(blocks):
    q = sum(blocks)
    n = math.factorial(q)
    for b in blocks:
        n //= math.factorial(b)
    return n


def symmetrize(tensor, blocks=None, max_order=None, max_elements=None):
    """Average ``tensor`` over all index permutations.

    When ``blocks`` is given, the tensor is assumed symmetric within each
    consecutive group of ``blocks[i]`` axes, and the average runs over the
    distinct interleavings of the groups only.  This is exact (it equals the
    full q!-permutation average) and is what keeps high-order products of
    symmetric kernels tractable.  With ``blocks=None`` all q! permutations
    are enumerated, which the order guard caps at 8! = 40320.
    """
    t = np.asarray(tensor, dtype=float)
    q = t.ndim
    if q <= 1:
        return t.copy()
    dim = t.shape[0]
    if t.shape != (dim,) * q:
        raise ValueError(f"tensor shape {t.shape} is not cubical")
    if blocks is None:
        blocks = (1,) * q
    if sum(blocks) != q:
        raise ValueError(f"blocks {blocks} do not sum to the order {q}")
    _check_guard(q, dim, max_order, max_elements)

    labels = []
    for b, size in enumerate(blocks):
        labels.extend([b] * size)
    block_axes = []
    off = 0
    for size in blocks:
        block_axes.append(list(range(off, off + size)))
        off += size

    count = _arrangement_count(blocks)
    if count > 1_000_000:
        raise ResourceGuardError(
            f"symmetrization over {count} arrangements (blocks {blocks}) "
            "exceeds the enumeration guard"
        )
    acc = np.zeros_like(t)
    if blocks == (1,) * q:
        arrangement_iter = permutations(range(q))
        for axes in arrangement_iter:
            acc += t.transpose(axes)
    else:
        for arr in _multiset_arrangements(labels):
            taken = [0] * len(blocks)
            axes = []
            for lab in arr:
                axes.append(block_axes[lab][taken[lab]])
                taken[lab] += 1
            acc += t.transpose(axes)
    acc /= count
    return acc


def symmetrize_kernel(tensor, dim=None, max_order=None, max_elements=None) -> SymmetricKernel:
    """Symmetrize a dense tensor and wrap it as a :class:`SymmetricKernel`."""
    t = np.asarray(tensor, dtype=float)
    if dim is None:
        dim = t.shape[0] if t.ndim else 1
    return SymmetricKernel(t.ndim, dim, symmetrize(t, max_order=max_order,
                                                   max_elements=max_elements))


def contract(f: SymmetricKernel, g: SymmetricKernel, r: int) -> np.ndarray:
    """Contraction of order r: pair r indices of f with r indices of g.

    Returns the dense (generally non-symmetric) tensor of order
    ``f.order + g.order - 2r``.  ``r=0`` is the tensor product and
    ``r = f.order = g.order`` is the scalar inner product.
    """
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} != {g.dim}")
    if not 0 <= r <= min(f.order, g.order):
        raise ValueError(
            f"contraction order r={r} outside [0, {min(f.order, g.order)}]"
        )
    p, q = f.order, g.order
    axes_f = list(range(p - r, p))
    axes_g = list(range(q - r, q))
    return np.tensordot(f.coeffs, g.coeffs, axes=(axes_f, axes_g))


def sym_contract(f: SymmetricKernel, g: SymmetricKernel, r: int,
                 max_order=None, max_elements=None) -> SymmetricKernel:
    """Symmetrized contraction of f and g of order r."""
    raw = contract(f, g, r)
    blocks_list = [b for b in (f.order - r, g.order - r) if b > 0]
    if not blocks_list:
        return SymmetricKernel(0, f.dim, raw)
    sym = symmetrize(raw, blocks=tuple(blocks_list),
                     max_order=max_order, max_elements=max_elements)
    return SymmetricKernel(raw.ndim, f.dim, sym)


def inner(f: SymmetricKernel, g: SymmetricKernel) -> float:
    """Euclidean inner product of the coefficient arrays."""
    if f.order != g.order or f.dim != g.dim:
        raise ValueError(
            f"shape mismatch: order/dim ({f.order},{f.dim}) vs "
            f"({g.order},{g.dim})"
        )
    return float(np.sum(f.coeffs * g.coeffs))


def norm(f: SymmetricKernel) -> float:
    return f.norm


def basis_kernel(dim: int, index: tuple) -> SymmetricKernel:
    """Symmetrized elementary tensor e_{i1} o ... o e_{iq} (0-based indices)."""
    q = len(index)
    t = np.zeros((dim,) * q)
    t[tuple(index)] = 1.0
    return SymmetricKernel(q, dim, symmetrize(t))


def random_kernel(order: int, dim: int, rng, scale=1.0,
                  max_order=None, max_elements=None) -> SymmetricKernel:
    """Symmetrization of a tensor with U[-scale, scale] entries."""
    _check_guard(order, dim, max_order, max_elements)
    raw = rng.uniform(-scale, scale, size=(dim,) * order)
    return SymmetricKernel(order, dim, symmetrize(raw, max_order=max_order,
                                                  max_elements=max_elements))


def save_kernel(f: SymmetricKernel, path):
    """Write the kernel file format: {"order", "dim", "coeffs" row-major}."""
    doc = {"order": f.order, "dim": f.dim,
           "coeffs": [float(v) for v in f.coeffs.reshape(-1)]}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_kernel(path, max_order=None, max_elements=None) -> SymmetricKernel:
    """Load and validate a kernel file (length and symmetry checks)."""
    with open(path) as fh:
        doc = json.load(fh)
    return kernel_from_dict(doc, max_order=max_order, max_elements=max_elements)


def kernel_from_dict(doc, max_order=None, max_elements=None) -> SymmetricKernel:
    order = int(doc["order"])
    dim = int(doc["dim"])
    _check_guard(order, dim, max_order, max_elements)
    coeffs = np.asarray(doc["coeffs"], dtype=float)
    if coeffs.size != dim ** order:
        raise ValueError(
            f"coeffs has {coeffs.size} entries, expected dim^order = {dim ** order}"
        )
    arr = coeffs.reshape((dim,) * order)
    sym = symmetrize(arr, max_order=max_order, max_elements=max_elements)
    scale = np.sqrt(np.sum(arr ** 2))
    if np.max(np.abs(arr - sym), initial=0.0) > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ValueError(
            f"coefficients are not symmetric to relative tolerance {SYMMETRY_RTOL}"
        )
    # store the exactly symmetric representative
    return SymmetricKernel(order, dim, sym)
