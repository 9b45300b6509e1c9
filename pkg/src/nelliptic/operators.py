"""Fully nonlinear elliptic operator families and their ellipticity probes.

Families: Pucci extremal operators M+/M- with constants 0 < lambda <= Lambda,
constant-coefficient linear operators, the graph mean-curvature operator
    F(M, p) = (1/w) * tr[(I - p p^T / w^2) M],   w = sqrt(1 + |p|^2),
the determinant (Monge-Ampere), elementary symmetric functions sigma_k of the
Hessian eigenvalues, Hessian quotients sigma_k/sigma_l, and the Lagrangian
phase sum(arctan(eigenvalues)).

An operator may carry a quadratic shift P: the shifted operator evaluates the
base on the translated jet (M + D^2P(x), p + DP(x), s + P(x), x) minus a fixed
offset, which turns a degenerate family into one that is uniformly elliptic on
a bounded jet set.

The probe estimates, on a seeded low-discrepancy sample of jets with
|M|, |p|, |s| <= rho, the extreme eigenvalues of D_M F (central differences),
the gradient/value Lipschitz constants, the modulus of continuity of D_M F,
and certifies the Pucci sandwich
    M-(N, lam, Lam) <= F(M+N, p, s, x) - F(M, p, s, x) <= M+(N, lam, Lam)
on sampled matrix pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidInputError,
    ParameterError,
    ProbeDomainError,
    SingularEvaluationError,
)

# ---------------------------------------------------------------------------
# symmetric matrices


@dataclass(frozen=True)
class SymMatrix:
    """Dense n x n symmetric matrix stored as the upper triangle, row-major."""

    dim: int
    entries: tuple  # n(n+1)/2 scalars

    def __post_init__(self):
        n = self.dim
        if n < 1:
            raise ParameterError("SymMatrix dim must be >= 1")
        if len(self.entries) != n * (n + 1) // 2:
            raise InvalidInputError(
                "expected %d upper-triangle entries, got %d"
                % (n * (n + 1) // 2, len(self.entries))
            )
        if not all(math.isfinite(v) for v in self.entries):
            raise InvalidInputError("non-finite entry in SymMatrix")

    @staticmethod
    def from_full(a) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        iu = np.triu_indices(n)
        return SymMatrix(n, tuple(((a + a.T) / 2.0)[iu]))

    @staticmethod
    def diag(values) -> "SymMatrix":
        return SymMatrix.from_full(np.diag(np.asarray(values, dtype=float)))

    @staticmethod
    def zero(n: int) -> "SymMatrix":
        return SymMatrix(n, (0.0,) * (n * (n + 1) // 2))

    @staticmethod
    def identity(n: int) -> "SymMatrix":
        return SymMatrix.from_full(np.eye(n))

    def full(self) -> np.ndarray:
        n = self.dim
        a = np.zeros((n, n))
        iu = np.triu_indices(n)
        a[iu] = self.entries
        return a + np.triu(a, 1).T

    def norm(self) -> float:
        """Spectral radius |M| = max |eigenvalue|."""
        ev = eigenvalues_sym(self)
        return max(abs(ev[0]), abs(ev[-1]))

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        if other.dim != self.dim:
            raise InvalidInputError("dimension mismatch in SymMatrix addition")
        return SymMatrix(self.dim, tuple(a + b for a, b in zip(self.entries, other.entries)))

    def scaled(self, c: float) -> "SymMatrix":
        return SymMatrix(self.dim, tuple(c * a for a in self.entries))


@dataclass(frozen=True)
class Jet:
    """Second-order jet (M, p, s, x): Hessian, gradient, value, location."""

    M: SymMatrix
    p: tuple
    s: float
    x: tuple

    def __post_init__(self):
        n = self.M.dim
        if len(self.p) != n or len(self.x) != n:
            raise InvalidInputError("jet components must share dimension n")

    @staticmethod
    def make(M, p=None, s=0.0, x=None) -> "Jet":
        if not isinstance(M, SymMatrix):
            M = SymMatrix.from_full(M)
        n = M.dim
        p = (0.0,) * n if p is None else tuple(float(v) for v in p)
        x = (0.0,) * n if x is None else tuple(float(v) for v in x)
        return Jet(M, p, float(s), x)


# ---------------------------------------------------------------------------
# eigenvalues: cyclic Jacobi (n <= 8 in practice, robust to machine tolerance)


def eigenvalues_sym(M, vectors=False, max_sweeps=100):
    """Ascending eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    With vectors=True also returns the orthogonal Q (columns = eigenvectors)
    with reconstruction residual ||Q diag Q^T - M|| <= 1e-12 * max(1, |M|).
    """
    a = M.full() if isinstance(M, SymMatrix) else np.array(M, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("non-finite entry in eigenvalues_sym input")
    a = (a + a.T) / 2.0
    n = a.shape[0]
    q = np.eye(n)
    if n == 1:
        return (np.array([a[0, 0]]), q) if vectors else np.array([a[0, 0]])

    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        scale = max(1.0, float(np.max(np.abs(np.diag(a)))))
        if math.sqrt(2.0 * off) <= 1e-15 * scale:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                apq = a[i, j]
                if abs(apq) <= 1e-18 * scale:
                    continue
                app, aqq = a[i, i], a[j, j]
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_i = c * a[:, i] - s * a[:, j]
                rot_j = s * a[:, i] + c * a[:, j]
                a[:, i], a[:, j] = rot_i, rot_j
                a[i, :], a[j, :] = a[:, i].copy(), a[:, j].copy()
                a[i, i] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                a[j, j] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                a[i, j] = a[j, i] = 0.0
                qi = c * q[:, i] - s * q[:, j]
                qj = s * q[:, i] + c * q[:, j]
                q[:, i], q[:, j] = qi, qj

    ev = np.diag(a).copy()
    order = np.argsort(ev, kind="stable")
    ev = ev[order]
    if vectors:
        return ev, q[:, order]
    return ev


def elementary_symmetric(values, k_max=None):
    """e_0..e_k of the given scalars via the stable product recurrence."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    k_max = n if k_max is None else k_max
    e = np.zeros(k_max + 1)
    e[0] = 1.0
    for lam in values:
        top = min(k_max, n)
        for j in range(top, 0, -1):
            e[j] += lam * e[j - 1]
    return e


def sigma_k(M, k: int) -> float:
    """k-th elementary symmetric function of the eigenvalues."""
    ev = eigenvalues_sym(M)
    if not 1 <= k <= len(ev):
        raise ParameterError("sigma_k requires 1 <= k <= n")
    return float(elementary_symmetric(ev, k)[k])


def is_k_admissible(M, k: int) -> bool:
    """True iff the eigenvalues lie in the Garding cone: sigma_i > 0, i=1..k."""
    ev = eigenvalues_sym(M)
    n = len(ev)
    if not 1 <= k <= n:
        raise ParameterError("is_k_admissible requires 1 <= k <= n")
    e = elementary_symmetric(ev, k)
    return bool(np.all(e[1 : k + 1] > 0.0))


# ---------------------------------------------------------------------------
# Pucci extremal operators


def pucci(M, lam: float, Lam: float, sign: str) -> float:
    """Pucci extremal operator of M with ellipticity constants (lam, Lam).

    plus:  M+ = Lam * sum(ev > 0) + lam * sum(ev < 0)
    minus: M- = lam * sum(ev > 0) + Lam * sum(ev < 0)
    """
    if not (0.0 < lam <= Lam):
        raise ParameterError("pucci requires 0 < lambda <= Lambda")
    if sign not in ("plus", "minus"):
        raise ParameterError("pucci sign must be 'plus' or 'minus'")
    ev = eigenvalues_sym(M)
    pos = float(ev[ev > 0].sum())
    neg = float(ev[ev < 0].sum())
    if sign == "plus":
        return Lam * pos + lam * neg
    return lam * pos + Lam * neg


# ---------------------------------------------------------------------------
# operator specs

_FAMILIES = (
    "pucci+",
    "pucci-",
    "linear",
    "mc",
    "ma",
    "sigma",
    "quotient",
    "slag",
)

# probe radii used when the caller does not fix rho; cone families stay well
# inside the admissible set once shifted by |x|^2/2
DEFAULT_PROBE_RHO = {
    "pucci+": 1.0,
    "pucci-": 1.0,
    "linear": 1.0,
    "mc": 1.0,
    "ma": 0.5,
    "sigma": 0.5,
    "quotient": 0.5,
    "slag": 1.0,
}


@dataclass(frozen=True)
class OperatorSpec:
    """Tagged description of an operator F(M, p, s, x), optionally shifted."""

    family: str
    params: tuple = ()
    linear_A: SymMatrix = None
    linear_b: tuple = None
    linear_c: float = 0.0
    shift_poly: object = None  # Polynomial of degree <= 2
    offset: float = 0.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ParameterError("unknown operator family %r" % (self.family,))
        if self.family in ("pucci+", "pucci-"):
            lam, Lam = self.params
            if not (0.0 < lam <= Lam):
                raise ParameterError("Pucci requires 0 < lambda <= Lambda")
        elif self.family == "sigma":
            (k,) = self.params
            if k < 1:
                raise ParameterError("sigma requires k >= 1")
        elif self.family == "quotient":
            k, l = self.params
            if not 1 <= l < k:
                raise ParameterError("quotient requires 1 <= l < k")
        elif self.family == "linear" and self.linear_A is None:
            raise ParameterError("linear operator needs a coefficient matrix")

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def pucci_plus(lam, Lam):
        return OperatorSpec("pucci+", (float(lam), float(Lam)))

    @staticmethod
    def pucci_minus(lam, Lam):
        return OperatorSpec("pucci-", (float(lam), float(Lam)))

    @staticmethod
    def linear(A, b=None, c=0.0):
        if not isinstance(A, SymMatrix):
            A = SymMatrix.from_full(A)
        b = (0.0,) * A.dim if b is None else tuple(float(v) for v in b)
        return OperatorSpec("linear", (), linear_A=A, linear_b=b, linear_c=float(c))

    @staticmethod
    def mean_curvature():
        return OperatorSpec("mc")

    @staticmethod
    def monge_ampere():
        return OperatorSpec("ma")

    @staticmethod
    def sigma(k):
        return OperatorSpec("sigma", (int(k),))

    @staticmethod
    def quotient(k, l):
        return OperatorSpec("quotient", (int(k), int(l)))

    @staticmethod
    def lagrangian():
        return OperatorSpec("slag")

    # -- text form (CLI flag syntax) ------------------------------------------

    def text(self) -> str:
        if self.family in ("pucci+", "pucci-"):
            return "%s:%g:%g" % (self.family, self.params[0], self.params[1])
        if self.family == "sigma":
            return "sigma:%d" % self.params
        if self.family == "quotient":
            return "quotient:%d:%d" % self.params
        if self.family == "linear":
            parts = [",".join("%r" % v for v in self.linear_A.entries)]
            if any(v != 0.0 for v in self.linear_b) or self.linear_c != 0.0:
                parts.append(",".join("%r" % v for v in self.linear_b))
                parts.append("%r" % self.linear_c)
            return "linear:" + ":".join(parts)
        return self.family

    @staticmethod
    def parse(text: str) -> "OperatorSpec":
        """Parse the flag syntax: pucci+:1:2, sigma:2, quotient:3:1, mc, ma,
        slag, linear:<upper triangle>[:<b>:<c>]."""
        parts = text.strip().split(":")
        name = parts[0]
        if name in ("mc", "ma", "slag"):
            if len(parts) != 1:
                raise ParameterError("%s takes no parameters" % name)
            return OperatorSpec(name)
        if name in ("pucci+", "pucci-"):
            if len(parts) != 3:
                raise ParameterError("pucci spec is pucci+:<lambda>:<Lambda>")
            return OperatorSpec(name, (float(parts[1]), float(parts[2])))
        if name == "sigma":
            return OperatorSpec("sigma", (int(parts[1]),))
        if name == "quotient":
            return OperatorSpec("quotient", (int(parts[1]), int(parts[2])))
        if name == "linear":
            if len(parts) not in (2, 4):
                raise ParameterError("linear spec is linear:<A>[:<b>:<c>]")
            tri = [float(v) for v in parts[1].split(",")]
            m = len(tri)
            n = int(round((math.sqrt(8 * m + 1) - 1) / 2))
            if n * (n + 1) // 2 != m:
                raise ParameterError("linear matrix needs n(n+1)/2 entries")
            A = SymMatrix(n, tuple(tri))
            b = None
            c = 0.0
            if len(parts) == 4:
                b = [float(v) for v in parts[2].split(",")]
                c = float(parts[3])
            return OperatorSpec.linear(A, b, c)
        raise ParameterError("unknown operator spec %r" % text)


def _base_value(op: OperatorSpec, M: SymMatrix, p, s, x) -> float:
    fam = op.family
    if fam == "pucci+":
        return pucci(M, op.params[0], op.params[1], "plus")
    if fam == "pucci-":
        return pucci(M, op.params[0], op.params[1], "minus")
    if fam == "linear":
        a = op.linear_A.full()
        m = M.full()
        return float(np.sum(a * m) + np.dot(op.linear_b, p) + op.linear_c * s)
    if fam == "mc":
        pv = np.asarray(p, dtype=float)
        w2 = 1.0 + float(pv @ pv)
        w = math.sqrt(w2)
        m = M.full()
        coeff = (np.eye(M.dim) - np.outer(pv, pv) / w2) / w
        return float(np.sum(coeff * m))
    ev = eigenvalues_sym(M)
    if fam == "ma":
        return float(np.prod(ev))
    if fam == "sigma":
        (k,) = op.params
        if k > M.dim:
            raise ParameterError("sigma_k requires k <= n")
        return float(elementary_symmetric(ev, k)[k])
    if fam == "quotient":
        k, l = op.params
        if k > M.dim:
            raise ParameterError("quotient requires k <= n")
        e = elementary_symmetric(ev, k)
        if abs(e[l]) < 1e-300:
            raise SingularEvaluationError("sigma_l vanishes at the evaluation jet")
        return float(e[k] / e[l])
    if fam == "slag":
        return float(np.sum(np.arctan(ev)))
    raise ParameterError("unknown family %r" % fam)


def evaluate(op: OperatorSpec, jet: Jet) -> float:
    """Evaluate F at the jet; shifted specs translate the jet first and
    subtract the stored offset."""
    M, p, s, x = jet.M, jet.p, jet.s, jet.x
    if op.shift_poly is not None:
        P = op.shift_poly
        if P.dim != M.dim:
            raise InvalidInputError("shift polynomial dimension mismatch")
        xv = np.asarray(x, dtype=float)
        M = M + SymMatrix.from_full(P.hessian(xv))
        p = tuple(np.asarray(p, dtype=float) + P.gradient(xv))
        s = s + P(xv)
    return _base_value(op, M, p, s, x) - op.offset


def shift(op: OperatorSpec, P, normalize_origin: bool = False) -> OperatorSpec:
    """Shifted spec G(M,p,s,x) = F(M + D^2P(x), p + DP(x), s + P(x), x) - offset.

    With normalize_origin the offset is F evaluated at the jet of P at the
    origin, so G(0,0,0,x) vanishes identically for x-independent,
    Hessian-only base operators.
    """
    if op.shift_poly is not None:
        raise ParameterError("cannot shift an already shifted spec")
    if P.degree > 2:
        raise ParameterError("shift polynomial must have degree <= 2")
    offset = 0.0
    if normalize_origin:
        z = np.zeros(P.dim)
        jet0 = Jet.make(SymMatrix.from_full(P.hessian(z)), P.gradient(z), P(z), z)
        offset = _base_value(op, jet0.M, jet0.p, jet0.s, jet0.x)
    return OperatorSpec(
        op.family,
        op.params,
        linear_A=op.linear_A,
        linear_b=op.linear_b,
        linear_c=op.linear_c,
        shift_poly=P,
        offset=offset,
    )


# ---------------------------------------------------------------------------
# ellipticity probe


@dataclass
class StructureConstants:
    """Probed ellipticity data for one operator on the jet set |.| <= rho."""

    rho: float
    lambda_hat: float
    Lambda_hat: float
    b0_hat: float
    c0_hat: float
    modulus_samples: list  # (r, omega_hat(r)) pairs, monotone in r
    violations: int
    samples: int
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "rho": self.rho,
            "lambda_hat": self.lambda_hat,
            "Lambda_hat": self.Lambda_hat,
            "b0_hat": self.b0_hat,
            "c0_hat": self.c0_hat,
            "modulus_samples": [[r, w] for r, w in self.modulus_samples],
            "violations": self.violations,
            "samples": self.samples,
            "notes": list(self.notes),
        }


_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61,
    67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137,
    139, 149, 151, 157, 163, 167, 173,
)


def _halton(index: int, dim: int) -> np.ndarray:
    """Halton point #index (index >= 1) in [0,1)^dim."""
    out = np.empty(dim)
    for d in range(dim):
        b = _PRIMES[d]
        f, x, i = 1.0, 0.0, index
        while i > 0:
            f /= b
            x += f * (i % b)
            i //= b
        out[d] = x
    return out


def _shifted_matrix(op: OperatorSpec, M: SymMatrix, x) -> SymMatrix:
    if op.shift_poly is None:
        return M
    return M + SymMatrix.from_full(op.shift_poly.hessian(np.asarray(x, dtype=float)))


def _admissible(op: OperatorSpec, M: SymMatrix, x, margin: float) -> bool:
    """Sample filter: the (shifted) matrix must sit strictly inside the cone
    where the family is elliptic (Gamma_k for sigma/quotient, positive
    matrices for det)."""
    fam = op.family
    if fam not in ("ma", "sigma", "quotient"):
        return True
    Ms = _shifted_matrix(op, M, x)
    ev = eigenvalues_sym(Ms)
    if fam == "ma":
        return bool(ev[0] > margin)
    k = op.params[0]
    e = elementary_symmetric(ev, k)
    return bool(np.all(e[1 : k + 1] > margin))


def _sample_sym(tri_unit: np.ndarray, n: int, radius: float) -> SymMatrix:
    """Map a low-discrepancy cube point to a symmetric matrix with spectral
    radius equal to the requested radius."""
    tri = 2.0 * tri_unit - 1.0
    A = SymMatrix(n, tuple(tri))
    nrm = A.norm()
    if nrm < 1e-14:
        return SymMatrix.zero(n)
    return A.scaled(radius / nrm)


def _dmf(op: OperatorSpec, M: SymMatrix, p, s, x) -> np.ndarray:
    """Central-difference D_M F as a symmetric matrix (shift-aware).

    Entry (i,j) is the derivative along the symmetrized basis matrix
    (e_i e_j^T + e_j e_i^T)/2, which matches the gradient convention in
    dF(M)[N] = tr(D_M F N)."""
    n = M.dim
    h = 1e-5 * max(1.0, M.norm())
    base = M.full()
    out = np.zeros((n, n))
    jet = lambda A: Jet(SymMatrix.from_full(A), tuple(p), float(s), tuple(x))
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 0.5
            fp = evaluate(op, jet(base + h * E))
            fm = evaluate(op, jet(base - h * E))
            out[i, j] = out[j, i] = (fp - fm) / (2.0 * h)
    return out


def ellipticity_probe(
    op: OperatorSpec,
    rho: float,
    n: int,
    samples: int = 160,
    seed: int = 0,
    pairs: int = 80,
) -> StructureConstants:
    """Estimate structure constants of F on the jet set |M|,|p|,|s| <= rho.

    lambda_hat/Lambda_hat are the extreme eigenvalues of central-difference
    D_M F over the sampled jets; the zero jet and jets on the boundary shell
    are forced into the sample so suprema attained there are not missed.
    The Pucci sandwich is then certified on sampled matrix pairs
    (|M|, |M+N| <= rho, shared p, s, x) using the probed constants widened by
    the tolerance 1e-6*(1+|N|); D_M F along each tested segment is folded into
    lambda_hat/Lambda_hat first, so the certificate is self-consistent.

    Cone families (det, sigma_k, quotients) reject samples whose shifted
    matrix leaves the admissible cone; probing the raw family near the cone
    tip legitimately reports a degenerate lambda_hat.
    """
    if rho <= 0:
        raise ParameterError("probe requires rho > 0")
    margin = 1e-3 * min(1.0, rho)
    m_tri = n * (n + 1) // 2
    # cube layout: matrix triangle | p direction | p radius | s | matrix radius
    dim_cube = m_tri + n + 3

    def value(M, p, s, x):
        try:
            return evaluate(op, Jet(M, tuple(p), float(s), tuple(x)))
        except (SingularEvaluationError, ParameterError) as exc:
            raise ProbeDomainError(
                "operator evaluation failed inside the probe set: %s" % exc,
                jet=(M.entries, tuple(p), float(s), tuple(x)),
            )

    def dmf(M, p, s, x):
        try:
            return _dmf(op, M, p, s, x)
        except (SingularEvaluationError, ParameterError) as exc:
            raise ProbeDomainError(
                "operator evaluation failed inside the probe set: %s" % exc,
                jet=(M.entries, tuple(p), float(s), tuple(x)),
            )

    def draw(u, k):
        mat_rad = rho if k % 4 == 1 else rho * u[m_tri + n + 2]
        M = _sample_sym(u[:m_tri], n, mat_rad)
        pdir = 2.0 * u[m_tri : m_tri + n] - 1.0
        pn = np.linalg.norm(pdir)
        pdir = pdir / pn if pn > 1e-12 else np.zeros(n)
        p_rad = rho if k % 4 == 2 else rho * u[m_tri + n]
        p = tuple(p_rad * pdir)
        s = (2.0 * u[m_tri + n + 1] - 1.0) * rho
        return M, p, s

    x0 = (0.0,) * n
    jets = []
    idx = seed * 7919 + 1
    attempts = 0
    while len(jets) < samples and attempts < 400 * samples:
        attempts += 1
        u = _halton(idx, dim_cube)
        idx += 1
        M, p, s = draw(u, len(jets))
        if len(jets) == 0:
            M, p, s = SymMatrix.zero(n), (0.0,) * n, 0.0
        if not _admissible(op, M, x0, margin):
            continue
        jets.append((M, p, s, x0))

    if len(jets) < max(8, samples // 4):
        raise ProbeDomainError("could not draw enough admissible probe jets")

    derivs = []
    lam_hat, Lam_hat = math.inf, -math.inf
    for (M, p, s, x) in jets:
        G = dmf(M, p, s, x)
        ev = eigenvalues_sym(G)
        lam_hat = min(lam_hat, float(ev[0]))
        Lam_hat = max(Lam_hat, float(ev[-1]))
        derivs.append((M, p, s, G))

    # gradient / value Lipschitz constants from sampled difference quotients
    b0_hat = 0.0
    c0_hat = 0.0
    for k in range(min(len(jets) - 1, 64)):
        M, p, s, x = jets[k]
        _, p2, s2, _ = jets[k + 1]
        base = value(M, p, s, x)
        dp = float(np.linalg.norm(np.subtract(p2, p)))
        if dp > 1e-9:
            b0_hat = max(b0_hat, abs(value(M, p2, s, x) - base) / dp)
        ds = abs(s2 - s)
        if ds > 1e-9:
            c0_hat = max(c0_hat, abs(value(M, p, s2, x) - base) / ds)

    # modulus of continuity of D_M F on a dyadic distance grid
    levels = 8
    radii = [2.0 * rho * 0.5**j for j in range(levels)][::-1]
    omega = [0.0] * levels
    for a in range(len(derivs)):
        Ma, pa, sa, Ga = derivs[a]
        for b in range(a + 1, min(a + 12, len(derivs))):
            Mb, pb, sb, Gb = derivs[b]
            dist = max(
                (Ma + Mb.scaled(-1.0)).norm(),
                float(np.linalg.norm(np.subtract(pa, pb))),
                abs(sa - sb),
            )
            gap = SymMatrix.from_full(Ga - Gb).norm()
            for li, r in enumerate(radii):
                if dist <= r:
                    omega[li] = max(omega[li], gap)
    for li in range(1, levels):
        omega[li] = max(omega[li], omega[li - 1])
    modulus = list(zip(radii, omega))

    # Pucci-sandwich certification on matrix pairs
    seg_fracs = (0.0, 0.25, 0.5, 0.75, 1.0)
    pending = []
    pair_idx = (seed + 1) * 104729 + 1
    attempts = 0
    while len(pending) < pairs and attempts < 400 * pairs:
        attempts += 1
        u1 = _halton(pair_idx, dim_cube)
        u2 = _halton(pair_idx + 1, dim_cube)
        pair_idx += 2
        M1 = _sample_sym(u1[:m_tri], n, rho * u1[m_tri + n + 2])
        M2 = _sample_sym(u2[:m_tri], n, rho * u2[m_tri + n + 2])
        segs = [
            SymMatrix.from_full((1 - t) * M1.full() + t * M2.full())
            for t in seg_fracs
        ]
        if not all(_admissible(op, Ms, x0, margin) for Ms in segs):
            continue
        pdir = 2.0 * u1[m_tri : m_tri + n] - 1.0
        pn = np.linalg.norm(pdir)
        pdir = pdir / pn if pn > 1e-12 else np.zeros(n)
        p = tuple(rho * u1[m_tri + n] * pdir)
        s = (2.0 * u2[m_tri + n + 1] - 1.0) * rho
        pending.append((M1, M2, segs, p, s))

    # segment derivatives first, so the certified constants cover them
    for M1, M2, segs, p, s in pending:
        for Ms in segs:
            ev = eigenvalues_sym(dmf(Ms, p, s, x0))
            lam_hat = min(lam_hat, float(ev[0]))
            Lam_hat = max(Lam_hat, float(ev[-1]))

    violations = 0
    lam_eff = max(lam_hat - 1e-6, 0.5 * lam_hat) if lam_hat > 0 else 1e-12
    Lam_eff = Lam_hat + 1e-6
    for M1, M2, segs, p, s in pending:
        N = M2 + M1.scaled(-1.0)
        diff = value(M2, p, s, x0) - value(M1, p, s, x0)
        tol = 1e-6 * (1.0 + N.norm())
        lo = pucci(N, lam_eff, Lam_eff, "minus")
        hi = pucci(N, lam_eff, Lam_eff, "plus")
        if diff < lo - tol or diff > hi + tol:
            violations += 1

    notes = []
    if op.family == "mc" and abs(rho - 1.0) < 1e-12:
        ref = math.sqrt(2.0) / 2.0
        if abs(Lam_hat - ref) > 1e-3:
            notes.append(
                "flagged: measured Lambda_hat=%.6f at rho=1 (attained at p=0) "
                "differs from the sqrt(2)/2=%.6f reference upper constant for "
                "this operator; discrepancy reported, not resolved" % (Lam_hat, ref)
            )

    return StructureConstants(
        rho=rho,
        lambda_hat=lam_hat,
        Lambda_hat=Lam_hat,
        b0_hat=b0_hat,
        c0_hat=c0_hat,
        modulus_samples=modulus,
        violations=violations,
        samples=len(jets),
        notes=notes,
    )
