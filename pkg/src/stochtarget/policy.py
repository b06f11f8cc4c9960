"""Two-layer allocation network: features -> sigmoid hidden layer -> softmax weights.

The hidden activation is ``1 / (1 + exp(u))`` (the logistic of ``-u``); the
output softmax makes every allocation long-only and fully invested.
No bias terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

N_FEATURES = 3


@dataclass(frozen=True)
class PolicyParams:
    z: np.ndarray  # (d, l) input -> hidden
    x: np.ndarray  # (l, M) hidden -> output

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        x = np.array(self.x, dtype=float)
        if z.ndim != 2 or x.ndim != 2 or z.shape[1] != x.shape[0]:
            raise ValueError(f"inconsistent shapes z{z.shape} x{x.shape}")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(x))):
            raise ValueError("non-finite policy weights")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)

    @property
    def d(self) -> int:
        return self.z.shape[0]

    @property
    def hidden(self) -> int:
        return self.z.shape[1]

    @property
    def n_assets(self) -> int:
        return self.x.shape[1]

    @property
    def size(self) -> int:
        return self.z.size + self.x.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.z.ravel(), self.x.ravel()])

    @classmethod
    def from_flat(cls, theta, d: int, hidden: int, n_assets: int) -> "PolicyParams":
        theta = np.asarray(theta, dtype=float)
        nz = d * hidden
        if theta.size != nz + hidden * n_assets:
            raise ValueError("flat vector has the wrong length")
        return cls(theta[:nz].reshape(d, hidden), theta[nz:].reshape(hidden, n_assets))


def hidden_layer(F, z) -> np.ndarray:
    """h_j = 1 / (1 + exp(sum_i F_i z_ij)); F may be (d,) or (L, d)."""
    return expit(-(np.asarray(F, dtype=float) @ z))


def softmax(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    e = np.exp(u - u.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def allocate(F, params: PolicyParams) -> np.ndarray:
    """Portfolio weights for feature vector(s) F."""
    return softmax(hidden_layer(F, params.z) @ params.x)


def init_params(rng: np.random.Generator, scale: float = 0.5, hidden: int = 3, n_assets: int = 2,
                d: int = N_FEATURES) -> PolicyParams:
    if scale <= 0:
        raise ValueError("scale must be positive")
    z = rng.uniform(-scale, scale, size=(d, hidden))
    x = rng.uniform(-scale, scale, size=(hidden, n_assets))
    return PolicyParams(z, x)


def constant_policy(weights, hidden: int = 3, d: int = N_FEATURES) -> PolicyParams:
    """Parameters whose allocation is ``weights`` regardless of the features.

    With z = 0 every hidden unit is 1/2, so logits are log(w) when x rows
    carry 2 log(w) / hidden. Equal weights come out exact (x = 0).
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0) or not np.isclose(w.sum(), 1.0):
        raise ValueError("constant policy weights must be positive and sum to 1")
    if np.all(w == w[0]):
        x = np.zeros((hidden, w.size))
    else:
        x = np.tile(2.0 * np.log(w) / hidden, (hidden, 1))
    return PolicyParams(np.zeros((d, hidden)), x)


def features(t, W, W_b, T: float, w_norm: float) -> np.ndarray:
    """(time remaining / T, W / w_norm, W_b / w_norm); broadcasts over arrays."""
    W = np.asarray(W, dtype=float)
    W_b = np.asarray(W_b, dtype=float)
    tau = np.broadcast_to((T - np.asarray(t, dtype=float)) / T, np.broadcast(W, W_b).shape)
    return np.stack([tau, W / w_norm, W_b / w_norm], axis=-1)


def save_params(params: PolicyParams, path) -> None:
    """Plain-text dump: ``d l M`` header, then z and x row-major at 17 significant digits."""
    d, l, m = params.d, params.hidden, params.n_assets
    lines = [f"# policy weights: d l M, then z (d x l) rows, then x (l x M) rows", f"{d} {l} {m}"]
    for row in params.z:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    for row in params.x:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_params(path) -> PolicyParams:
    rows = [ln.split() for ln in Path(path).read_text(encoding="utf-8").splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise ValueError(f"{path}: missing 'd l M' header")
    d, l, m = (int(v) for v in rows[0])
    body = rows[1:]
    if len(body) != d + l:
        raise ValueError(f"{path}: expected {d + l} weight rows, found {len(body)}")
    z = np.array([[float(v) for v in r] for r in body[:d]])
    x = np.array([[float(v) for v in r] for r in body[d:]])
    if z.shape != (d, l) or x.shape != (l, m):
        raise ValueError(f"{path}: weight rows do not match header {d} {l} {m}")
    return PolicyParams(z, x)
