"""Soft-margin SVMs: kernels, a pairwise dual solver, one-vs-rest, and the joint tuple model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadConfig, DimensionMismatch, NonFinite, SingleClass

N_SPONT = 2
N_EMOTION = 4
N_TUPLES = N_SPONT * N_EMOTION


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = None  # rbf only; None -> 1/dim at training time

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise BadConfig(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None and not self.gamma > 0:
            raise BadConfig(f"rbf gamma must be positive (got {self.gamma})")

    def resolved(self, dim):
        if self.kind == "rbf" and self.gamma is None:
            return replace(self, gamma=1.0 / dim)
        return self


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tolerance: float = 1e-3
    max_passes: int | None = None  # pair updates (binary) or epochs (joint); None -> solver default
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise BadConfig(f"C must be positive (got {self.C})")
        if not self.tolerance > 0:
            raise BadConfig(f"tolerance must be positive (got {self.tolerance})")


def kernel_eval(x, z, spec):
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise DimensionMismatch(f"kernel inputs differ in shape: {x.shape} vs {z.shape}")
    if spec.kind == "linear":
        return float(np.dot(x, z))
    spec = spec.resolved(x.size)
    diff = x - z
    return float(np.exp(-spec.gamma * np.dot(diff, diff)))


def kernel_matrix(A, B, spec):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"feature dimension {B.shape[1]} does not match {A.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    spec = spec.resolved(A.shape[1])
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


def _check_finite(X):
    if not np.all(np.isfinite(X)):
        raise NonFinite("training features contain NaN or infinite values")


@dataclass(frozen=True)
class BinarySVM:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: KernelSpec
    support_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    C: float = 1.0
    n_iter: int = 0
    converged: bool = True

    @property
    def dim(self):
        return self.support_vectors.shape[1]

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"input dimension {X.shape[1]} != model dimension {self.dim}")
        if self.dual_coef.size == 0:
            return np.full(X.shape[0], self.bias)
        return kernel_matrix(X, self.support_vectors, self.kernel) @ self.dual_coef + self.bias

    def predict(self, x):
        return predict_binary(self, x)


def predict_binary(model, x):
    """Return ``(label, margin)``; a margin of exactly 0 maps to +1."""
    margin = float(model.decision(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
    return (1 if margin >= 0 else -1), margin


def _solve_dual(K, y, C, eps, max_iter):
    """Minimize 1/2 a'Qa - sum(a), 0 <= a <= C, y'a = 0, with Q_ij = y_i y_j K_ij.

    Each step moves the maximal violating pair (second-order choice of the
    partner). Stops once the KKT gap max_up(-yG) - min_low(-yG) drops below
    ``eps``. Returns ``(alpha, bias, n_iter, converged)``.
    """
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K).copy()
    pos = y > 0
    it = 0
    converged = False
    while True:
        score = -y * grad
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        i = int(np.argmax(np.where(up, score, -np.inf)))
        g_max = score[i]
        g_min = np.min(np.where(low, score, np.inf))
        if g_max - g_min < eps:
            converged = True
            break
        if it >= max_iter:
            break
        b = g_max - score
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, 1e-12)
        cand = low & (b > 0)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))
        step = b[j] / a[j]
        cap_i = C - alpha[i] if pos[i] else alpha[i]
        cap_j = alpha[j] if pos[j] else C - alpha[j]
        t = min(step, cap_i, cap_j)
        alpha[i] = (C if pos[i] else 0.0) if t == cap_i else alpha[i] + y[i] * t
        alpha[j] = (0.0 if pos[j] else C) if t == cap_j else alpha[j] - y[j] * t
        grad += t * y * (K[:, i] - K[:, j])
        it += 1
    bias = 0.5 * (g_max + g_min)
    return alpha, bias, it, converged


def train_binary(X, y, cfg=TrainConfig()):
    """Train a soft-margin SVM on labels in {-1, +1}.

    The seed fixes a permutation of the training order, which decides ties
    during working-pair selection.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionMismatch(f"X has shape {X.shape} but {y.size} labels were given")
    _check_finite(X)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise BadConfig("binary labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise SingleClass(f"only class {int(y[0]):+d} present")
    kernel = cfg.kernel.resolved(X.shape[1])
    n = y.size
    order = np.random.default_rng(cfg.seed).permutation(n)
    Xp, yp = X[order], y[order]
    K = kernel_matrix(Xp, Xp, kernel)
    max_iter = cfg.max_passes if cfg.max_passes is not None else max(100_000, 200 * n)
    alpha_p, bias, n_iter, converged = _solve_dual(K, yp, cfg.C, cfg.tolerance, max_iter)
    alpha = np.empty(n)
    alpha[order] = alpha_p
    sv = np.flatnonzero(alpha > 0)
    return BinarySVM(
        support_vectors=X[sv].copy(),
        dual_coef=alpha[sv] * y[sv],
        bias=float(bias),
        kernel=kernel,
        support_indices=sv,
        C=cfg.C,
        n_iter=n_iter,
        converged=converged,
    )


def dual_alpha(model, n):
    """Full length-n alpha vector of a model trained on n points."""
    alpha = np.zeros(n)
    alpha[model.support_indices] = np.abs(model.dual_coef)
    return alpha


def dual_objective(alpha, K, y):
    """sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij (to be maximized)."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


# -- one-vs-rest -------------------------------------------------------------


@dataclass(frozen=True)
class OneVsRestSVM:
    """Per-class scorers; ``None`` marks a class absent from training."""

    machines: tuple

    @property
    def n_classes(self):
        return len(self.machines)

    @property
    def dim(self):
        return next(m.dim for m in self.machines if m is not None)

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"input dimension {X.shape[1]} != model dimension {self.dim}")
        cols = [np.full(X.shape[0], -np.inf) if m is None else m.decision(X) for m in self.machines]
        return np.column_stack(cols)

    def predict_many(self, X):
        return np.argmax(self.decision(X), axis=1)

    def predict(self, x):
        return int(self.predict_many(np.asarray(x).reshape(1, -1))[0])


def train_multiclass_ovr(X, y, cfg=TrainConfig(), n_classes=N_EMOTION):
    y = np.asarray(y).astype(np.int64).reshape(-1)
    present = np.unique(y)
    if present.size < 2:
        raise SingleClass(f"need at least 2 classes, got {present.tolist()}")
    if present.min() < 0 or present.max() >= n_classes:
        raise BadConfig(f"class labels must lie in 0..{n_classes - 1}")
    machines = []
    for c in range(n_classes):
        if c not in present:
            machines.append(None)
            continue
        machines.append(train_binary(X, np.where(y == c, 1.0, -1.0), replace(cfg, seed=cfg.seed + c)))
    return OneVsRestSVM(tuple(machines))


# -- joint tuple classifier --------------------------------------------------


def tuple_row(spont, emotion):
    return N_EMOTION * int(spont) + int(emotion)


def row_tuple(row):
    return int(row) // N_EMOTION, int(row) % N_EMOTION


@dataclass(frozen=True)
class JointModel:
    W: np.ndarray  # (8, d); row 4*spont + emotion
    C: float = 1.0
    final_loss: float = float("nan")
    epochs: int = 0
    loss_history: tuple = ()

    @property
    def dim(self):
        return self.W.shape[1]

    def scores(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"input dimension {X.shape[1]} != model dimension {self.dim}")
        return X @ self.W.T

    def predict_rows(self, X):
        return np.argmax(self.scores(X), axis=1)


def _joint_slacks(W, X, rows):
    scores = X @ W.T
    idx = np.arange(X.shape[0])
    viol = 1.0 + scores - scores[idx, rows][:, None]
    viol[idx, rows] = -np.inf
    return np.maximum(0.0, viol.max(axis=1))


def joint_loss(W, X, rows, C):
    """1/2 sum_r ||w_r||^2 + C * sum_j slack_j with the multiclass hinge slack."""
    W = np.asarray(W, dtype=np.float64)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    rows = np.asarray(rows, dtype=np.int64).reshape(-1)
    if X.shape[1] != W.shape[1]:
        raise DimensionMismatch(f"features have dimension {X.shape[1]}, weights {W.shape[1]}")
    if rows.size != X.shape[0]:
        raise DimensionMismatch(f"{rows.size} labels for {X.shape[0]} samples")
    return float(0.5 * np.sum(W * W) + C * _joint_slacks(W, X, rows).sum())


def train_joint(X, tuples, cfg=TrainConfig(), patience=5, max_epochs=300):
    """Minimize the joint hinge objective by stochastic subgradient steps.

    Step size 1/(lam*t) with lam = 1/(C*N); samples are visited in a seeded
    shuffled order each epoch, and the best iterate seen at epoch ends is
    kept. Training stops when the best loss improved by less than
    ``tolerance`` (relative) over the last ``patience`` epochs, or after
    ``max_passes`` epochs.
    """
    X = np.asarray(X, dtype=np.float64)
    tuples = np.asarray(tuples, dtype=np.int64).reshape(-1, 2)
    if X.ndim != 2 or X.shape[0] != tuples.shape[0]:
        raise DimensionMismatch(f"X has shape {X.shape} but {tuples.shape[0]} labels were given")
    _check_finite(X)
    rows = np.array([tuple_row(s, e) for s, e in tuples], dtype=np.int64)
    if np.unique(rows).size < 2:
        raise SingleClass("only one (spontaneity, emotion) tuple present")
    n, d = X.shape
    C = cfg.C
    lam = 1.0 / (C * n)
    radius = np.sqrt(2.0 / lam)
    epochs_cap = cfg.max_passes if cfg.max_passes is not None else max_epochs
    rng = np.random.default_rng(cfg.seed)
    W = np.zeros((N_TUPLES, d))
    best_W = W.copy()
    best = joint_loss(W, X, rows, C)
    history = []
    # stopping looks at epoch iterates only; the zero start still competes for the best
    iter_best = [np.inf]
    t = 0
    epoch = 0
    while epoch < epochs_cap:
        epoch += 1
        for j in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            x, r = X[j], rows[j]
            s = W @ x
            viol = 1.0 + s - s[r]
            viol[r] = -np.inf
            worst = int(np.argmax(viol))
            W *= 1.0 - eta * lam
            if viol[worst] > 0:
                W[r] += eta * x
                W[worst] -= eta * x
            norm = np.sqrt(np.sum(W * W))
            if norm > radius:
                W *= radius / norm
        loss = joint_loss(W, X, rows, C)
        history.append(loss)
        if loss < best:
            best, best_W = loss, W.copy()
        iter_best.append(min(iter_best[-1], loss))
        if epoch > patience and iter_best[-1 - patience] - iter_best[-1] < cfg.tolerance * max(1.0, iter_best[-1]):
            break
    return JointModel(best_W, C, best, epoch, tuple(history))


def predict_joint(model, x):
    """Return the ``(spontaneity, emotion)`` tuple with the highest score; ties go to the lowest row."""
    return row_tuple(model.predict_rows(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
