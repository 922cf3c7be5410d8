"""Non-local self-attention block over a single (C, H, W) feature map.

Embedded-Gaussian instantiation with a C' = max(1, C // 2) bottleneck and a
residual output projection. At this scale the 1x1 convolutions are plain
channel-mixing matrices applied per position:

    theta = W_theta x,  phi = W_phi x,  g = W_g x        (C', N), N = H * W
    A     = softmax_j(theta_i . phi_j)                   (N, N), row-wise
    y     = g A^T                                        (C', N)
    z     = W_z y + x                                    (C, N)
"""
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def bottleneck(channels):
    return max(1, channels // 2)


@dataclass(frozen=True)
class FeatureMap:
    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=np.float64)
        if a.ndim != 3 or min(a.shape) < 1:
            raise ValidationError(f"feature map must have shape (C, H, W) with positive sizes, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("feature map has non-finite values")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def shape(self):
        return self.data.shape

    @property
    def channels(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class NonLocalParams:
    w_theta: np.ndarray
    w_phi: np.ndarray
    w_g: np.ndarray
    w_z: np.ndarray

    NAMES = ("w_theta", "w_phi", "w_g", "w_z")

    def __post_init__(self):
        for name in self.NAMES:
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.ndim != 2:
                raise ValidationError(f"{name} must be a matrix, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} has non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        cb, c = self.w_theta.shape
        for name in ("w_phi", "w_g"):
            if getattr(self, name).shape != (cb, c):
                raise ValidationError(f"{name} shape {getattr(self, name).shape} != w_theta shape {(cb, c)}")
        if self.w_z.shape != (c, cb):
            raise ValidationError(f"w_z shape {self.w_z.shape} != {(c, cb)}")

    @property
    def channels(self):
        return self.w_theta.shape[1]

    @classmethod
    def zeros(cls, channels):
        cb = bottleneck(channels)
        return cls(np.zeros((cb, channels)), np.zeros((cb, channels)), np.zeros((cb, channels)),
                   np.zeros((channels, cb)))

    @classmethod
    def random(cls, channels, rng, scale=0.5):
        """Gaussian weights from a ``numpy.random.Generator``."""
        cb = bottleneck(channels)
        return cls(*(scale * rng.standard_normal(s) for s in
                     ((cb, channels), (cb, channels), (cb, channels), (channels, cb))))

    def as_dict(self):
        return {name: getattr(self, name) for name in self.NAMES}

    def replace(self, **kw):
        d = self.as_dict()
        d.update(kw)
        return NonLocalParams(**d)


def _unpack(x, p):
    if not isinstance(x, FeatureMap):
        x = FeatureMap(x)
    if x.channels != p.channels:
        raise ValidationError(f"feature map has {x.channels} channels, parameters expect {p.channels}")
    return x


def _forward(X, p):
    theta = p.w_theta @ X
    phi = p.w_phi @ X
    g = p.w_g @ X
    S = theta.T @ phi
    E = np.exp(S - S.max(axis=1, keepdims=True))
    norm = E.sum(axis=1, keepdims=True)
    A = E / norm
    # sum-then-normalize with a fixed reduction order per position, so constant
    # logits reproduce mean_j g_j bit for bit at every position
    Y = ((E[:, None, :] * g[None, :, :]).sum(axis=2) / norm).T
    Z = p.w_z @ Y + X
    if not np.all(np.isfinite(Z)):
        raise FloatingPointError("non-finite value in non-local forward pass")
    return Z, (theta, phi, g, A, Y)


def nonlocal_forward(x, p):
    """Vectorized forward pass; returns a FeatureMap of the input's shape."""
    x = _unpack(x, p)
    C, H, W = x.shape
    Z, _ = _forward(x.data.reshape(C, H * W), p)
    return FeatureMap(Z.reshape(C, H, W))


def nonlocal_bruteforce(x, p):
    """Reference forward pass with explicit Python loops over positions and channels.

    Kept deliberately free of matrix products so it can serve as an
    independent oracle for :func:`nonlocal_forward`.
    """
    x = _unpack(x, p)
    C, H, W = x.shape
    N = H * W
    cb = p.w_theta.shape[0]
    xs = [[float(x.data[c, n // W, n % W]) for c in range(C)] for n in range(N)]

    def embed(Wm, v):
        return [sum(Wm[r, c] * v[c] for c in range(C)) for r in range(cb)]

    theta = [embed(p.w_theta, v) for v in xs]
    phi = [embed(p.w_phi, v) for v in xs]
    g = [embed(p.w_g, v) for v in xs]

    out = np.empty((C, H, W))
    for i in range(N):
        logits = [sum(theta[i][r] * phi[j][r] for r in range(cb)) for j in range(N)]
        top = max(logits)
        f = [np.exp(s - top) for s in logits]
        norm = sum(f)
        y = [sum(f[j] * g[j][r] for j in range(N)) / norm for r in range(cb)]
        for c in range(C):
            out[c, i // W, i % W] = sum(p.w_z[c, r] * y[r] for r in range(cb)) + xs[i][c]
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite value in brute-force non-local pass")
    return FeatureMap(out)


def nonlocal_backward(x, p, dz):
    """Gradients of a scalar loss given dL/dz.

    Returns ``(dx, grads)`` where ``dx`` has the feature-map shape and
    ``grads`` maps parameter names to arrays of their shapes.
    """
    x = _unpack(x, p)
    C, H, W = x.shape
    X = x.data.reshape(C, H * W)
    dZ = np.asarray(dz, dtype=np.float64).reshape(C, H * W)
    _, (theta, phi, g, A, Y) = _forward(X, p)

    dWz = dZ @ Y.T
    dY = p.w_z.T @ dZ
    dG = dY @ A
    dA = dY.T @ g
    dS = A * (dA - (dA * A).sum(axis=1, keepdims=True))
    dTheta = phi @ dS.T
    dPhi = theta @ dS
    grads = {
        "w_theta": dTheta @ X.T,
        "w_phi": dPhi @ X.T,
        "w_g": dG @ X.T,
        "w_z": dWz,
    }
    dX = dZ + p.w_theta.T @ dTheta + p.w_phi.T @ dPhi + p.w_g.T @ dG
    return dX.reshape(C, H, W), grads


def sum_squares_loss(x, p):
    """L = sum(z^2) and its gradients ``(L, dx, grads)``."""
    z = nonlocal_forward(x, p).data
    dx, grads = nonlocal_backward(x, p, 2.0 * z)
    return float(np.sum(z * z)), dx, grads


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor), maximized.

    The floor keeps entries whose true gradient is ~0 from dividing
    finite-difference roundoff by zero.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def nonlocal_grad_check(x, p, step=1e-5):
    """Max relative error of the analytic gradient of sum(z^2) vs central differences.

    Every parameter entry and every input entry is perturbed.
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValidationError(f"step must lie in [1e-7, 1e-3], got {step}")
    x = _unpack(x, p)
    _, dx, grads = sum_squares_loss(x, p)

    def loss_at(xd, pp):
        z = nonlocal_forward(xd, pp).data
        return float(np.sum(z * z))

    worst = 0.0
    base = x.data
    num = np.empty(base.size)
    for k in range(base.size):
        xp = base.copy().ravel()
        xm = xp.copy()
        xp[k] += step
        xm[k] -= step
        num[k] = (loss_at(xp.reshape(base.shape), p) - loss_at(xm.reshape(base.shape), p)) / (2 * step)
    worst = max(worst, relative_error(dx, num))

    for name in NonLocalParams.NAMES:
        w = getattr(p, name)
        num = np.empty(w.size)
        for k in range(w.size):
            wp = w.copy().ravel()
            wm = wp.copy()
            wp[k] += step
            wm[k] -= step
            lp = loss_at(base, p.replace(**{name: wp.reshape(w.shape)}))
            lm = loss_at(base, p.replace(**{name: wm.reshape(w.shape)}))
            num[k] = (lp - lm) / (2 * step)
        worst = max(worst, relative_error(grads[name], num))
    return worst
