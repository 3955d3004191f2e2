"""Numeric reference of vertical encoding (VE) for dense 3D feature maps.

Each BEV column ``(y, x)`` of a ``[C, Z, Y, X]`` feature volume is treated as
a sequence of ``Z`` height tokens.  A learned vertical query attends over
them with multi-head scaled dot-product attention, giving one ``C``-vector per
column; a channel-to-space reshape then lifts ``[C, Y, X]`` to
``[C / s^2, Y*s, X*s]`` for fusion with the other BEV maps.

Projections act on row vectors (``token @ W``); head ``h`` uses columns
``h*d_h:(h+1)*d_h`` of ``W_q``, ``W_k`` and ``W_v``.  Everything runs in
float64.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisibilityError, DomainError, NonFiniteGradient, NonFiniteInput, ShapeMismatch

# (C_n, S_n) per backbone stage at desk scale
STAGE_DIMS = ((64, 1), (128, 2), (256, 4))
DEFAULT_HEADS = 2


def _f64(a, name) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DenseFeatureMap:
    values: np.ndarray  # [C, Z, Y, X]

    def __post_init__(self):
        v = _f64(self.values, "feature map")
        if v.ndim != 4 or min(v.shape) < 1:
            raise ShapeMismatch(f"feature map must be [C, Z, Y, X] with all dims >= 1, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def random(cls, c, z, y, x, seed=0) -> "DenseFeatureMap":
        return cls(np.random.default_rng(seed).standard_normal((c, z, y, x)))


@dataclass(frozen=True, eq=False)
class VerticalEncoderParams:
    query: np.ndarray  # [C]
    w_q: np.ndarray    # [C, C]
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    n_heads: int = DEFAULT_HEADS
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        q = _f64(self.query, "query").reshape(-1)
        c = q.size
        if self.n_heads < 1 or c % self.n_heads:
            raise DivisibilityError(f"channels {c} not divisible by n_heads {self.n_heads}")
        object.__setattr__(self, "query", q)
        for name in ("w_q", "w_k", "w_v", "w_o"):
            w = _f64(getattr(self, name), name)
            if w.shape != (c, c):
                raise ShapeMismatch(f"{name} must be {(c, c)}, got {w.shape}")
            object.__setattr__(self, name, w)

    @classmethod
    def init(cls, channels: int, n_heads: int = DEFAULT_HEADS, seed: int = 0) -> "VerticalEncoderParams":
        """Gaussian init with ``1/sqrt(C)`` scaling, reproducible from ``seed``."""
        if n_heads < 1 or channels % n_heads:
            raise DivisibilityError(f"channels {channels} not divisible by n_heads {n_heads}")
        rng = np.random.default_rng(seed)
        s = 1.0 / np.sqrt(channels)
        mats = [rng.standard_normal((channels, channels)) * s for _ in range(4)]
        return cls(rng.standard_normal(channels), *mats, n_heads=n_heads, seed=seed)

    @property
    def channels(self) -> int:
        return self.query.size

    @property
    def head_dim(self) -> int:
        return self.channels // self.n_heads

    def arrays(self) -> dict[str, np.ndarray]:
        return {"query": self.query, "w_q": self.w_q, "w_k": self.w_k,
                "w_v": self.w_v, "w_o": self.w_o}

    def replace(self, **arrays) -> "VerticalEncoderParams":
        kw = self.arrays()
        kw.update(arrays)
        return VerticalEncoderParams(**kw, n_heads=self.n_heads, seed=self.seed)


@dataclass(frozen=True, eq=False)
class BevFeatureMap:
    values: np.ndarray  # [C_bev, Y_f, X_f]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class _Cache:
    tokens: np.ndarray   # [Y, X, Z, C]
    q: np.ndarray        # [H, d]
    k: np.ndarray        # [Y, X, Z, H, d]
    v: np.ndarray
    attn: np.ndarray     # [Y, X, H, Z]
    mixed: np.ndarray    # [Y, X, C], before output projection


def _softmax(s: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(s - s.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _forward(fm: DenseFeatureMap, p: VerticalEncoderParams):
    c, z, y, x = fm.shape
    if c != p.channels:
        raise ShapeMismatch(f"feature map has {c} channels, encoder expects {p.channels}")
    h, d = p.n_heads, p.head_dim
    tokens = np.transpose(fm.values, (2, 3, 1, 0))           # [Y, X, Z, C]
    q = (p.query @ p.w_q).reshape(h, d)
    k = (tokens @ p.w_k).reshape(y, x, z, h, d)
    v = (tokens @ p.w_v).reshape(y, x, z, h, d)
    scores = np.einsum("hd,yxzhd->yxhz", q, k) / np.sqrt(d)
    attn = _softmax(scores, axis=-1)
    mixed = np.einsum("yxhz,yxzhd->yxhd", attn, v).reshape(y, x, c)
    out = mixed @ p.w_o
    return np.transpose(out, (2, 0, 1)), _Cache(tokens, q, k, v, attn, mixed)


def ve_step1_attend(fm: DenseFeatureMap, p: VerticalEncoderParams):
    """Attend the vertical query over each column's height tokens.

    Returns ``(compressed [C, Y, X], scores [H, Z, Y, X])`` where ``scores``
    are the per-head softmax weights.
    """
    out, cache = _forward(fm, p)
    return out, np.transpose(cache.attn, (2, 3, 0, 1))


def ve_backward(fm: DenseFeatureMap, p: VerticalEncoderParams, grad_out=None):
    """Analytic gradients of ``sum(grad_out * compressed)``.

    ``grad_out`` defaults to ones (loss = sum of outputs).  Returns a dict
    keyed like :meth:`VerticalEncoderParams.arrays` plus ``"features"``.
    """
    out, cch = _forward(fm, p)
    c, z, y, x = fm.shape
    h, d = p.n_heads, p.head_dim
    g = np.ones_like(out) if grad_out is None else np.asarray(grad_out, dtype=np.float64)
    if g.shape != out.shape:
        raise ShapeMismatch(f"grad_out must be {out.shape}, got {g.shape}")
    g = np.transpose(g, (1, 2, 0))                            # [Y, X, C]

    d_wo = np.einsum("yxi,yxj->ij", cch.mixed, g)
    d_mixed = (g @ p.w_o.T).reshape(y, x, h, d)
    d_attn = np.einsum("yxhd,yxzhd->yxhz", d_mixed, cch.v)
    d_v = np.einsum("yxhz,yxhd->yxzhd", cch.attn, d_mixed).reshape(y, x, z, c)
    d_scores = cch.attn * (d_attn - (cch.attn * d_attn).sum(axis=-1, keepdims=True))
    d_scores /= np.sqrt(d)
    d_k = np.einsum("yxhz,hd->yxzhd", d_scores, cch.q).reshape(y, x, z, c)
    d_qp = np.einsum("yxhz,yxzhd->hd", d_scores, cch.k).reshape(c)

    d_tokens = d_k @ p.w_k.T + d_v @ p.w_v.T
    return {
        "query": p.w_q @ d_qp,
        "w_q": np.outer(p.query, d_qp),
        "w_k": np.einsum("yxzi,yxzj->ij", cch.tokens, d_k),
        "w_v": np.einsum("yxzi,yxzj->ij", cch.tokens, d_v),
        "w_o": d_wo,
        "features": np.transpose(d_tokens, (3, 2, 0, 1)),
    }


def ve_step2_reshape(compressed, s_n: int) -> BevFeatureMap:
    """Channel-to-space: ``out[c, y*s+by, x*s+bx] = in[c*s*s + by*s + bx, y, x]``."""
    a = np.asarray(compressed)
    if a.ndim != 3:
        raise ShapeMismatch(f"expected [C, Y, X], got {a.shape}")
    if s_n < 1:
        raise DomainError("stride must be >= 1")
    c, y, x = a.shape
    if c % (s_n * s_n):
        raise DivisibilityError(f"channels {c} not divisible by stride^2 = {s_n * s_n}")
    cb = c // (s_n * s_n)
    out = a.reshape(cb, s_n, s_n, y, x).transpose(0, 3, 1, 4, 2).reshape(cb, y * s_n, x * s_n)
    return BevFeatureMap(out)


def space_to_channel(bev, s_n: int) -> np.ndarray:
    """Inverse of :func:`ve_step2_reshape`."""
    a = np.asarray(bev.values if isinstance(bev, BevFeatureMap) else bev)
    cb, ys, xs = a.shape
    if ys % s_n or xs % s_n:
        raise DivisibilityError(f"spatial dims {(ys, xs)} not divisible by stride {s_n}")
    y, x = ys // s_n, xs // s_n
    return a.reshape(cb, y, s_n, x, s_n).transpose(0, 2, 4, 1, 3).reshape(cb * s_n * s_n, y, x)


def sve_baseline(fm: DenseFeatureMap) -> np.ndarray:
    """Single-value height encoding: max over the ``Z`` axis."""
    return fm.values.max(axis=1)


def vertical_encode(fm: DenseFeatureMap, p: VerticalEncoderParams, s_n: int) -> BevFeatureMap:
    compressed, _ = ve_step1_attend(fm, p)
    return ve_step2_reshape(compressed, s_n)


def scores_csv(scores: np.ndarray) -> str:
    """``head,z,y,x,score`` rows in C order of the ``[H, Z, Y, X]`` array."""
    buf = io.StringIO()
    buf.write("head,z,y,x,score\n")
    for (h, z, y, x), s in np.ndenumerate(scores):
        buf.write(f"{h},{z},{y},{x},{s:.17g}\n")
    return buf.getvalue()


# -- gradient verification ---------------------------------------------------

def _loss_raw(tokens, query, w_q, w_k, w_v, w_o, n_heads) -> float:
    # lean forward on raw arrays; central differences call this ~10^4 times
    y, x, z, c = tokens.shape
    d = c // n_heads
    q = (query @ w_q).reshape(n_heads, d)
    k = (tokens @ w_k).reshape(y, x, z, n_heads, d)
    v = (tokens @ w_v).reshape(y, x, z, n_heads, d)
    s = np.einsum("hd,yxzhd->yxhz", q, k) / np.sqrt(d)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    attn = e / e.sum(axis=-1, keepdims=True)
    mixed = np.einsum("yxhz,yxzhd->yxhd", attn, v).reshape(y, x, c)
    return float((mixed @ w_o).sum())


def central_difference(f, x0: np.ndarray, eps: float) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x0`` (any shape).

    ``f`` receives a working array that is perturbed in place and restored
    after each entry.
    """
    if not eps > 0:
        raise DomainError("eps must be > 0")
    x = np.array(x0, dtype=np.float64, copy=True)
    grad = np.empty_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        fp = f(x)
        flat[i] = keep - eps
        fm_ = f(x)
        flat[i] = keep
        gflat[i] = (fp - fm_) / (2 * eps)
    return grad


_ORDER = ("query", "w_q", "w_k", "w_v", "w_o")


def numeric_gradients(p: VerticalEncoderParams, fm: DenseFeatureMap, eps: float) -> dict:
    tokens = np.ascontiguousarray(np.transpose(fm.values, (2, 3, 1, 0)))
    base = [tokens] + [np.array(p.arrays()[n]) for n in _ORDER]
    grads = {}
    for slot, name in enumerate(("features",) + _ORDER):
        def f(a, slot=slot):
            args = list(base)
            args[slot] = a
            return _loss_raw(*args, p.n_heads)
        g = central_difference(f, base[slot], eps)
        grads[name] = np.transpose(g, (3, 2, 0, 1)) if name == "features" else g
    return grads


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-wise ``|a - b| / max(|a|, |b|)``; 0 when both vanish."""
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / den) if den > 0 else 0.0


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    per_array: dict


def grad_check(p: VerticalEncoderParams, fm: DenseFeatureMap, eps: float = 1e-5) -> GradCheckResult:
    """Compare :func:`ve_backward` with central differences of ``sum(compressed)``.

    Errors are measured per array (query, each projection, the features),
    norm-wise, and the worst one is reported.
    """
    analytic = ve_backward(fm, p)
    numeric = numeric_gradients(p, fm, eps)
    per = {}
    for name in analytic:
        a, n = analytic[name], numeric[name]
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(n))):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
        per[name] = relative_error(a, n)
    return GradCheckResult(max(per.values()), per)
