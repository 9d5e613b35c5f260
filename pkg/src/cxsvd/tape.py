"""A small reverse-mode tape over complex arrays.

Primal values are evaluated eagerly when an operation is recorded; the tape
only remembers enough structure to run one backward sweep.  Adjoints follow
the gradient convention ``∇_X L = 2 ∂L/∂X*``, so a step ``X -= η ∇_X L`` is
steepest descent.  Real-valued nodes (``real_part``, singular values, ...)
receive real adjoints: a complex contribution ``g`` into a real node becomes
``Re g``.

    >>> import numpy as np
    >>> t = Tape()
    >>> a = t.variable(np.array([[1 + 2j]]))
    >>> loss = t.real_part(t.entry(a, 0, 0))
    >>> backward(t, loss)[a]
    array([[1.+0.j]])
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import NonRealLoss, NotSquare, ShapeMismatch
from .matrix_core import adjoint
from .svd_engine import SvdFactors, svd as _svd
from .svd_grad import SvdCotangents, VjpOptions, svd_vjp

__all__ = ["Tape", "Node", "backward", "OPS"]

OPS = (
    "variable", "constant",
    "matmul", "add", "scale_by_real", "adjoint_of", "conjugate", "hadamard",
    "trace", "real_part", "imag_part", "abs_squared_entry", "entry",
    "sum", "diag_embed", "scalar_mul", "log", "reciprocal",
    "svd", "svd_u", "svd_s", "svd_v",
)


@dataclass(eq=False)
class Node:
    tape: "Tape" = field(repr=False)
    index: int
    op: str
    inputs: tuple
    primal: Any = field(repr=False)
    params: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self):
        return np.shape(self.primal) if not isinstance(self.primal, SvdFactors) else None

    @property
    def is_real(self) -> bool:
        return isinstance(self.primal, np.ndarray) and not np.iscomplexobj(self.primal)

    def __matmul__(self, other):
        return self.tape.matmul(self, other)

    def __add__(self, other):
        return self.tape.add(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return self.tape.hadamard(self, other)
        return self.tape.scale_by_real(self, other)

    __rmul__ = __mul__

    def __hash__(self):
        return id(self)


def _arr(x):
    a = np.asarray(x)
    if a.dtype.kind in "biu":
        a = a.astype(np.float64)
    return a


def _need_same(a, b, op):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


class Tape:
    """Append-only record of primitive operations.

    Each method records one primitive and returns its :class:`Node`.  Inputs
    must be nodes of the same tape, so references always point backwards.
    """

    def __init__(self, svd_options: VjpOptions | None = None, svd_method="lapack"):
        self.nodes: list[Node] = []
        self.svd_options = svd_options
        self.svd_method = svd_method
        self._sealed = False

    def __len__(self):
        return len(self.nodes)

    def _push(self, op, inputs, primal, **params):
        if self._sealed:
            raise RuntimeError("tape is immutable once backward has run")
        for x in inputs:
            if not isinstance(x, Node) or x.tape is not self:
                raise ValueError(f"{op}: inputs must be nodes recorded on this tape")
        if not isinstance(primal, SvdFactors):
            primal = np.asarray(primal)
        node = Node(self, len(self.nodes), op, tuple(inputs), primal, params)
        self.nodes.append(node)
        return node

    def record(self, op, *inputs, **params) -> Node:
        """Generic entry point: ``record("matmul", a, b)`` etc."""
        if op not in OPS or op in ("variable", "constant"):
            raise ValueError(f"unknown primitive {op!r}")
        return getattr(self, op)(*inputs, **params)

    # leaves
    def variable(self, value) -> Node:
        return self._push("variable", (), _arr(value).copy())

    def constant(self, value) -> Node:
        return self._push("constant", (), _arr(value).copy())

    # primitives
    def matmul(self, a, b):
        x, y = a.primal, b.primal
        if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[0]:
            raise ShapeMismatch(f"matmul: cannot multiply {x.shape} by {y.shape}")
        return self._push("matmul", (a, b), x @ y)

    def add(self, a, b):
        _need_same(a.primal, b.primal, "add")
        return self._push("add", (a, b), a.primal + b.primal)

    def scale_by_real(self, a, c):
        if np.iscomplexobj(c) or not np.isscalar(c):
            raise TypeError("scale_by_real takes a real scalar")
        return self._push("scale_by_real", (a,), a.primal * float(c), c=float(c))

    def adjoint_of(self, a):
        if a.primal.ndim != 2:
            raise ShapeMismatch("adjoint_of needs a matrix")
        return self._push("adjoint_of", (a,), adjoint(a.primal))

    def conjugate(self, a):
        return self._push("conjugate", (a,), np.conj(a.primal))

    def hadamard(self, a, b):
        _need_same(a.primal, b.primal, "hadamard")
        return self._push("hadamard", (a, b), a.primal * b.primal)

    def trace(self, a):
        x = a.primal
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise NotSquare(f"trace of shape {x.shape}")
        return self._push("trace", (a,), np.asarray(np.trace(x)))

    def real_part(self, a):
        return self._push("real_part", (a,), np.real(a.primal).astype(np.float64))

    def imag_part(self, a):
        return self._push("imag_part", (a,), np.imag(a.primal).astype(np.float64))

    def abs_squared_entry(self, a):
        x = a.primal
        return self._push("abs_squared_entry", (a,), (x.real ** 2 + x.imag ** 2).astype(np.float64))

    def entry(self, a, *index):
        x = a.primal
        if len(index) != x.ndim:
            raise ShapeMismatch(f"entry: index {index} for array of shape {x.shape}")
        try:
            val = np.asarray(x[index])
        except IndexError as exc:
            raise ShapeMismatch(str(exc)) from None
        return self._push("entry", (a,), val, index=tuple(int(i) for i in index))

    def sum(self, a):
        return self._push("sum", (a,), np.asarray(np.sum(a.primal)))

    def diag_embed(self, a):
        if a.primal.ndim != 1:
            raise ShapeMismatch("diag_embed needs a vector")
        return self._push("diag_embed", (a,), np.diag(a.primal))

    def scalar_mul(self, c, a):
        """Multiply every entry of ``a`` by the 0-d node ``c``."""
        if c.primal.ndim != 0:
            raise ShapeMismatch("scalar_mul: first argument must be a scalar node")
        return self._push("scalar_mul", (c, a), c.primal * a.primal)

    def log(self, a):
        return self._push("log", (a,), np.log(a.primal))

    def reciprocal(self, a):
        return self._push("reciprocal", (a,), 1.0 / a.primal)

    def svd(self, a):
        x = a.primal
        if x.ndim != 2:
            raise ShapeMismatch("svd needs a matrix")
        return self._push("svd", (a,), _svd(x, method=self.svd_method))

    def svd_u(self, f):
        return self._select(f, "svd_u", f.primal.U)

    def svd_s(self, f):
        return self._select(f, "svd_s", f.primal.S)

    def svd_v(self, f):
        return self._select(f, "svd_v", f.primal.V)

    def _select(self, f, op, value):
        if f.op != "svd":
            raise ValueError(f"{op} must be applied to an svd node")
        return self._push(op, (f,), value)

    def svd_outputs(self, a):
        """Record ``svd(a)`` and return ``(svd_node, U, S, V)`` nodes."""
        f = self.svd(a)
        return f, self.svd_u(f), self.svd_s(f), self.svd_v(f)


def _accumulate(adj, node, g):
    if node.is_real:
        g = np.real(g)
    g = np.asarray(g)
    if g.shape != np.shape(node.primal):
        raise ShapeMismatch(f"adjoint shape {g.shape} for node {node.op} of shape {np.shape(node.primal)}")
    i = node.index
    adj[i] = g.copy() if adj[i] is None else adj[i] + g


def _accumulate_svd(adj, node, field_name, g):
    i = node.index
    if adj[i] is None:
        adj[i] = {"U": None, "S": None, "V": None}
    cur = adj[i][field_name]
    adj[i][field_name] = g.copy() if cur is None else cur + g


def _svd_backward(tape, node, acc):
    f = node.primal
    acc = acc or {}
    Ubar = acc.get("U")
    Sbar = acc.get("S")
    Vbar = acc.get("V")
    cot = SvdCotangents(
        np.zeros_like(f.U) if Ubar is None else Ubar,
        np.zeros(f.k) if Sbar is None else np.asarray(Sbar, dtype=np.float64),
        np.zeros_like(f.V) if Vbar is None else Vbar,
    )
    return svd_vjp(f, cot, tape.svd_options)


def backward(tape: Tape, output: Node) -> dict:
    """Single reverse sweep from ``output``; returns ``{variable_node: gradient}``.

    ``output`` must hold a real scalar.  Variables the output does not depend
    on map to zero gradients.
    """
    if output.tape is not tape:
        raise ValueError("output node belongs to another tape")
    val = np.asarray(output.primal)
    if isinstance(output.primal, SvdFactors) or val.size != 1:
        raise NonRealLoss("backward needs a scalar output node")
    if abs(np.imag(val).item()) > 1e-12:
        raise NonRealLoss(f"loss has imaginary part {np.imag(val).item():.3e}")
    tape._sealed = True

    adj: list = [None] * len(tape.nodes)
    adj[output.index] = np.ones(val.shape, dtype=val.dtype)

    for node in reversed(tape.nodes[: output.index + 1]):
        g = adj[node.index]
        if g is None or node.op in ("variable", "constant"):
            continue
        ins = node.inputs
        op = node.op
        if op == "matmul":
            a, b = ins
            _accumulate(adj, a, g @ adjoint(b.primal))
            _accumulate(adj, b, adjoint(a.primal) @ g)
        elif op == "add":
            _accumulate(adj, ins[0], g)
            _accumulate(adj, ins[1], g)
        elif op == "scale_by_real":
            _accumulate(adj, ins[0], node.params["c"] * g)
        elif op == "adjoint_of":
            _accumulate(adj, ins[0], adjoint(g))
        elif op == "conjugate":
            _accumulate(adj, ins[0], np.conj(g))
        elif op == "hadamard":
            a, b = ins
            _accumulate(adj, a, g * np.conj(b.primal))
            _accumulate(adj, b, g * np.conj(a.primal))
        elif op == "trace":
            n = ins[0].primal.shape[0]
            _accumulate(adj, ins[0], g * np.eye(n))
        elif op == "real_part":
            _accumulate(adj, ins[0], np.asarray(g, dtype=np.complex128))
        elif op == "imag_part":
            _accumulate(adj, ins[0], 1j * g)
        elif op == "abs_squared_entry":
            _accumulate(adj, ins[0], 2.0 * g * ins[0].primal)
        elif op == "entry":
            src = ins[0]
            full = np.zeros(np.shape(src.primal), dtype=np.result_type(g, src.primal))
            full[node.params["index"]] = g
            _accumulate(adj, src, full)
        elif op == "sum":
            _accumulate(adj, ins[0], g * np.ones(np.shape(ins[0].primal)))
        elif op == "diag_embed":
            _accumulate(adj, ins[0], np.diag(g))
        elif op == "scalar_mul":
            c, a = ins
            _accumulate(adj, a, np.conj(c.primal) * g)
            _accumulate(adj, c, np.asarray(np.sum(g * np.conj(a.primal))))
        elif op == "log":
            _accumulate(adj, ins[0], g / np.conj(ins[0].primal))
        elif op == "reciprocal":
            x = ins[0].primal
            _accumulate(adj, ins[0], -g * np.conj(1.0 / (x * x)))
        elif op in ("svd_u", "svd_s", "svd_v"):
            if op == "svd_s":
                g = np.real(g)
            _accumulate_svd(adj, ins[0], op[-1].upper(), g)
        elif op == "svd":
            _accumulate(adj, ins[0], _svd_backward(tape, node, g))
        else:  # pragma: no cover
            raise ValueError(f"no backward rule for {op!r}")

    grads = {}
    for node in tape.nodes:
        if node.op == "variable":
            g = adj[node.index]
            grads[node] = np.zeros_like(node.primal) if g is None else g
    return grads
