"""Constrained nonnegative factorization over the publisher-news-user network.

The detector factorizes the content matrix (news x term) while tying news
representations to the social context: user representations factorize the
follower adjacency through a correlation core, spreading pulls a news vector
toward (or away from) its spreaders depending on label and spreader
credibility, news vectors of a publisher must predict its partisan bias, and
a linear head fits the gold labels. All appearances are squared terms:

    || X - D V' ||^2
  + alpha * || A - U T U' ||^2
  + beta  * sum over engaged (user i, labeled news j) of
            w(y_j, c_i) * || U_i - D_j ||^2
  + gamma * || Pbar D q - o ||^2
  + eta   * sum over gold j of (D_j . p - y_j)^2
  + lam   * (sum of squared Frobenius norms of D, V, U, T, q, p)

with w(y, c) = y (1 - c) + (1 - y) c and Pbar the row-normalized publishing
matrix. D, V, U, T stay nonnegative via projected-gradient steps with a
backtracking line search; q and p are exact ridge solves. Weakly labeled news
(rounded p_fake) enters only the spreading term, never the gold head.
"""

import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

MAGIC = b"TRIFN1"

COLD_START_ITERS = 200
_MAX_BACKTRACKS = 60
_STEP_GROW = 2.0


@dataclass(frozen=True)
class TriFNHyper:
    d: int = 16
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    eta: float = 10.0
    lam: float = 0.01
    max_iters: int = 300
    tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if min(self.alpha, self.beta, self.gamma, self.eta, self.lam) < 0:
            raise ValueError("term weights must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass
class TriFNModel:
    D: np.ndarray  # news x d, nonnegative
    V: np.ndarray  # term x d, nonnegative
    U: np.ndarray  # user x d, nonnegative
    T: np.ndarray  # d x d, nonnegative
    q: np.ndarray  # d, bias-prediction head
    p: np.ndarray  # d, classification head
    hyper: TriFNHyper


def spreading_weight(y, c):
    """Pull strength between a news item and a spreader: strong when the item
    is fake and the user lacks credibility, or real and the user is credible."""
    if y not in (0, 1):
        raise ValueError("label must be 0 or 1")
    if not 0.0 <= c <= 1.0:
        raise ValueError("credibility must lie in [0, 1]")
    return y * (1.0 - c) + (1.0 - y) * c


def initial_factors(n_news, n_terms, n_users, d, seed):
    """Seeded uniform [0, 0.01] init for D, V, U, T (q and p start at zero)."""
    rng = np.random.default_rng(seed)
    D = rng.uniform(0.0, 0.01, (n_news, d))
    V = rng.uniform(0.0, 0.01, (n_terms, d))
    U = rng.uniform(0.0, 0.01, (n_users, d))
    T = rng.uniform(0.0, 0.01, (d, d))
    return D, V, U, T


def _row_normalized(P):
    sums = P.sum(axis=1, keepdims=True)
    sums[sums == 0] = 1.0
    return P / sums


def _round_weak(p_fake):
    return 1.0 if p_fake > 0.5 else 0.0


class _Problem:
    """Precomputed pieces of the objective for one (networks, labels) setup."""

    def __init__(self, networks, labels, weak_labels, hyper):
        self.hyper = hyper
        self.X = networks.content
        self.A = networks.adjacency
        self.Pbar = _row_normalized(networks.publishing)
        self.o = networks.bias
        pos = networks.news_pos

        labels = dict(labels or {})
        weak_labels = dict(weak_labels or {})
        self.gold_idx = np.array([pos[n] for n in labels], dtype=np.intp)
        self.gold_y = np.array([float(labels[n]) for n in labels])

        spread_y = {pos[n]: float(y) for n, y in labels.items()}
        for n, p_fake in weak_labels.items():
            j = pos[n]
            if j not in spread_y:
                spread_y[j] = _round_weak(p_fake)
        self.J = np.array(sorted(spread_y), dtype=np.intp)
        ys = np.array([spread_y[j] for j in self.J])
        cred = networks.credibility
        # w(y, c) = y + c - 2 y c, masked by the spreading matrix
        if self.J.size:
            weights = ys[None, :] + cred[:, None] - 2.0 * ys[None, :] * cred[:, None]
            self.K = networks.spreading[:, self.J] * weights
        else:
            self.K = np.zeros((self.A.shape[0], 0))
        self.row_w = self.K.sum(axis=1)
        self.col_w = self.K.sum(axis=0)

        # sparse view of the adjacency for the homophily term
        self.A_rows, self.A_cols = np.nonzero(self.A)
        self.A_vals = self.A[self.A_rows, self.A_cols]
        self.A_norm2 = float(np.sum(self.A * self.A))

    # -- individual terms ---------------------------------------------------

    def term_content(self, D, V):
        E = self.X - D @ V.T
        return float(np.sum(E * E))

    def term_homophily(self, U, T):
        # || A - U T U' ||^2 expanded through the d x d Gram matrix; only the
        # adjacency's nonzeros touch the user dimension twice
        UT = U @ T
        G = U.T @ U
        cross = float(np.sum(self.A_vals * np.einsum(
            "ij,ij->i", UT[self.A_rows], U[self.A_cols])))
        return self.A_norm2 - 2.0 * cross + float(np.trace(T.T @ G @ T @ G))

    def adjacency_times(self, M):
        """A @ M through the adjacency's nonzeros."""
        out = np.zeros_like(M)
        np.add.at(out, self.A_rows, self.A_vals[:, None] * M[self.A_cols])
        return out

    def term_spreading(self, U, D):
        if self.J.size == 0:
            return 0.0
        DJ = D[self.J]
        cross = float(np.sum((U.T @ self.K) * DJ.T))
        return float(self.row_w @ np.sum(U * U, axis=1)
                     + self.col_w @ np.sum(DJ * DJ, axis=1) - 2.0 * cross)

    def term_bias(self, D, q):
        r = self.Pbar @ D @ q - self.o
        return float(r @ r)

    def term_gold(self, D, p):
        if self.gold_idx.size == 0:
            return 0.0
        e = D[self.gold_idx] @ p - self.gold_y
        return float(e @ e)

    def regularizer(self, D, V, U, T, q, p):
        return float(sum(np.sum(Z * Z) for Z in (D, V, U, T, q, p)))

    def value(self, D, V, U, T, q, p):
        h = self.hyper
        return (self.term_content(D, V)
                + h.alpha * self.term_homophily(U, T)
                + h.beta * self.term_spreading(U, D)
                + h.gamma * self.term_bias(D, q)
                + h.eta * self.term_gold(D, p)
                + h.lam * self.regularizer(D, V, U, T, q, p))


def objective(model, networks, labels, weak_labels, hyper):
    """Objective value for a model on one setup (deterministic, >= 0)."""
    n_news, n_terms = networks.content.shape
    n_users = networks.adjacency.shape[0]
    d = hyper.d
    expect = {"D": (n_news, d), "V": (n_terms, d), "U": (n_users, d),
              "T": (d, d), "q": (d,), "p": (d,)}
    for name, shape in expect.items():
        if getattr(model, name).shape != shape:
            raise ValueError(f"{name} has shape {getattr(model, name).shape}, "
                             f"expected {shape}")
    problem = _Problem(networks, labels, weak_labels, hyper)
    return problem.value(model.D, model.V, model.U, model.T, model.q, model.p)


def _line_search(value, grad, local, step):
    """One projected-gradient step that never increases the local objective.

    Tries ``step`` and halves until the projected candidate does not increase
    ``local``; returns (new value, next trial step). Keeps the old value when
    no acceptable step is found.
    """
    base = local(value)
    s = step
    for _ in range(_MAX_BACKTRACKS):
        candidate = np.maximum(value - s * grad, 0.0)
        if local(candidate) <= base:
            return candidate, s * _STEP_GROW
        s *= 0.5
    return value, max(s, 1e-300)


def _ridge_solve(M, target, weight, lam, d):
    """argmin weight * ||M w - target||^2 + lam * ||w||^2 (exact)."""
    if weight == 0.0:
        return np.zeros(d)
    H = weight * (M.T @ M) + lam * np.eye(d)
    rhs = weight * (M.T @ target)
    try:
        return np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M, target, rcond=None)[0]


def fit(networks, labels, weak_labels, hyper):
    """Block-coordinate descent over D, V, U, T, q, p.

    Factors start uniform in [0, 0.01] from ``hyper.seed`` (heads at zero);
    nonnegative blocks take projected-gradient steps with backtracking line
    search, heads are exact ridge solves, so the objective never increases.
    Stops when the relative objective change drops below ``hyper.tol`` or
    after ``hyper.max_iters`` outer iterations. Returns (model, trace) with
    the objective recorded before iteration one and after each iteration.
    """
    h = hyper
    if h.eta > 0 and not labels:
        raise ValueError("eta > 0 requires at least one gold label")
    problem = _Problem(networks, labels, weak_labels, h)
    n_news, n_terms = networks.content.shape
    n_users = networks.adjacency.shape[0]
    D, V, U, T = initial_factors(n_news, n_terms, n_users, h.d, h.seed)
    q = np.zeros(h.d)
    p = np.zeros(h.d)

    X, A, Pbar, o = problem.X, problem.A, problem.Pbar, problem.o
    J, K, row_w, col_w = problem.J, problem.K, problem.row_w, problem.col_w
    gold_idx, gold_y = problem.gold_idx, problem.gold_y

    trace = [problem.value(D, V, U, T, q, p)]
    steps = {"D": 1.0, "V": 1.0, "U": 1.0, "T": 1.0}

    for _ in range(h.max_iters):
        # --- D ---
        UK = (U.T @ K).T if J.size else None  # |J| x d

        def local_D(Dc):
            val = problem.term_content(Dc, V) + h.lam * float(np.sum(Dc * Dc))
            if J.size:
                DJ = Dc[J]
                val += h.beta * float(col_w @ np.sum(DJ * DJ, axis=1)
                                      - 2.0 * np.sum(UK * DJ))
            if h.gamma:
                val += h.gamma * problem.term_bias(Dc, q)
            if h.eta:
                val += h.eta * problem.term_gold(Dc, p)
            return val

        G = -2.0 * (X - D @ V.T) @ V + 2.0 * h.lam * D
        if J.size:
            G[J] += 2.0 * h.beta * (col_w[:, None] * D[J] - UK)
        if h.gamma:
            r = Pbar @ D @ q - o
            G += 2.0 * h.gamma * np.outer(Pbar.T @ r, q)
        if h.eta and gold_idx.size:
            e = D[gold_idx] @ p - gold_y
            G[gold_idx] += 2.0 * h.eta * np.outer(e, p)
        D, steps["D"] = _line_search(D, G, local_D, steps["D"])

        # --- V ---
        def local_V(Vc):
            return problem.term_content(D, Vc) + h.lam * float(np.sum(Vc * Vc))

        G = -2.0 * (X - D @ V.T).T @ D + 2.0 * h.lam * V
        V, steps["V"] = _line_search(V, G, local_V, steps["V"])

        # --- U ---
        DK = K @ D[J] if J.size else None  # users x d

        def local_U(Uc):
            val = h.alpha * problem.term_homophily(Uc, T) \
                + h.lam * float(np.sum(Uc * Uc))
            if J.size:
                val += h.beta * float(row_w @ np.sum(Uc * Uc, axis=1)
                                      - 2.0 * np.sum(Uc * DK))
            return val

        AU = problem.adjacency_times(U)
        gram = U.T @ U
        G = -2.0 * h.alpha * (AU @ (T + T.T)
                              - U @ (T @ gram @ T.T + T.T @ gram @ T)) \
            + 2.0 * h.lam * U
        if J.size:
            G += 2.0 * h.beta * (row_w[:, None] * U - DK)
        U, steps["U"] = _line_search(U, G, local_U, steps["U"])

        # --- T ---
        def local_T(Tc):
            return h.alpha * problem.term_homophily(U, Tc) \
                + h.lam * float(np.sum(Tc * Tc))

        AU = problem.adjacency_times(U)
        gram = U.T @ U
        G = -2.0 * h.alpha * (U.T @ AU - gram @ T @ gram) + 2.0 * h.lam * T
        T, steps["T"] = _line_search(T, G, local_T, steps["T"])

        # --- q, p (exact solves) ---
        q = _ridge_solve(Pbar @ D, o, h.gamma, h.lam, h.d)
        if gold_idx.size:
            p = _ridge_solve(D[gold_idx], gold_y, h.eta, h.lam, h.d)
        elif h.lam > 0:
            p = np.zeros(h.d)

        current = problem.value(D, V, U, T, q, p)
        if not math.isfinite(current):
            raise RuntimeError(f"objective diverged to {current!r}")
        previous = trace[-1]
        trace.append(current)
        if abs(previous - current) <= h.tol * max(abs(previous), 1e-300):
            break

    model = TriFNModel(D=D, V=V, U=U, T=T, q=q, p=p, hyper=h)
    return model, np.array(trace)


def predict(model, news_index):
    """p_fake for one training-corpus news row, clamped to [0, 1]."""
    if not 0 <= news_index < model.D.shape[0]:
        raise IndexError(f"news index {news_index} out of range")
    return float(np.clip(model.D[news_index] @ model.p, 0.0, 1.0))


def classify(p_fake):
    """Decision at threshold 0.5; ties go to real (0)."""
    return 1 if p_fake > 0.5 else 0


def predict_cold_start(model, content_row):
    """Content-only prediction for an unseen article.

    Projects the TF-IDF row onto the learned term basis by nonnegative
    projected gradient (fixed iteration count, step set by the spectral norm
    of V'V) and applies the classification head. A zero content row carries
    no information and returns 0.5 with a warning.
    """
    x = np.asarray(content_row, dtype=float)
    if x.shape != (model.V.shape[0],):
        raise ValueError("content row does not match the training vocabulary")
    if not x.any():
        warnings.warn("zero content row; returning the 0.5 prior")
        return 0.5
    VtV = model.V.T @ model.V
    top = float(np.linalg.eigvalsh(VtV)[-1])
    d = np.zeros(model.V.shape[1])
    if top > 0:
        Vtx = model.V.T @ x
        step = 1.0 / top
        for _ in range(COLD_START_ITERS):
            d = np.maximum(d - step * (VtV @ d - Vtx), 0.0)
    return float(np.clip(d @ model.p, 0.0, 1.0))


# ---------------------------------------------------------------------------
# persistence: "TRIFN1" magic, dims, hyperparameters, then row-major
# little-endian float64 factors in the order D, V, U, T, q, p.
# ---------------------------------------------------------------------------

def save_model(model, path):
    h = model.hyper
    n_news, d = model.D.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4Q", n_news, model.V.shape[0], model.U.shape[0], d))
        fh.write(struct.pack("<6d", h.alpha, h.beta, h.gamma, h.eta, h.lam, h.tol))
        fh.write(struct.pack("<2q", h.max_iters, h.seed))
        for Z in (model.D, model.V, model.U, model.T, model.q, model.p):
            fh.write(np.ascontiguousarray(Z, dtype="<f8").tobytes())
    return path


def load_model(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a TriFN model file")
        n_news, n_terms, n_users, d = struct.unpack("<4Q", fh.read(32))
        alpha, beta, gamma, eta, lam, tol = struct.unpack("<6d", fh.read(48))
        max_iters, seed = struct.unpack("<2q", fh.read(16))
        hyper = TriFNHyper(d=d, alpha=alpha, beta=beta, gamma=gamma, eta=eta,
                           lam=lam, max_iters=max_iters, tol=tol, seed=seed)

        def read(shape):
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
            return data.reshape(shape).copy()

        return TriFNModel(
            D=read((n_news, d)), V=read((n_terms, d)), U=read((n_users, d)),
            T=read((d, d)), q=read((d,)), p=read((d,)), hyper=hyper,
        )
