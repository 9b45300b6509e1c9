"""Discrete convex envelopes, the ABP inequality check, and section geometry.

The lower convex envelope of a grid function is computed by iterated lower
hull sweeps along the axis and diagonal grid directions until a fixed point.
Each sweep is monotone (it never drops below the largest directionally convex
minorant), so the iteration converges to that minorant: an outer
approximation of the true convex envelope with O(h) bias.

The ABP check measures sup u^- against the discrete L^n norm of f^+ over the
contact set where u meets its convex envelope, on the ball inscribed in the
grid box (the natural domain of the estimate; the supporting planes of a
convex u on the ball are cut off by a larger extension box, which would
shrink the contact set below its continuum value).

Sections S_h(x0) = {u - supporting affine function < h} of a convex function
are traced by bisection along rays; the minimum-volume enclosing ellipsoid of
the section boundary (Khachiyan ascent with away steps) yields the affine
normalization T with B_{1/n} subset T(S_h) subset B_1 and the scale-invariant
product (det T)^2 h^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidInputError,
    NonConvexityError,
    ParameterError,
    RankError,
    SectionEscapeError,
)
from .grid import GridFunction
from .operators import eigenvalues_sym

# ---------------------------------------------------------------------------
# lower convex envelope


def _lower_hull_1d(v: np.ndarray) -> np.ndarray:
    """Lower convex hull of (i, v_i) on uniform abscissae, re-evaluated at
    every node (Andrew monotone chain)."""
    m = len(v)
    if m <= 2:
        return v.copy()
    hull = [0]
    for k in range(1, m):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (v[b] - v[a]) * (k - b) >= (v[k] - v[b]) * (b - a):
                hull.pop()
            else:
                break
        hull.append(k)
    out = np.empty(m)
    for a, b in zip(hull[:-1], hull[1:]):
        t = np.arange(a, b + 1) - a
        out[a : b + 1] = v[a] + (v[b] - v[a]) * t / (b - a)
    return out


def _hull_masked_line(v: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Hull every contiguous masked run of a line independently."""
    out = v.copy()
    k = 0
    m = len(v)
    while k < m:
        if not mask[k]:
            k += 1
            continue
        j = k
        while j < m and mask[j]:
            j += 1
        out[k:j] = _lower_hull_1d(v[k:j])
        k = j
    return out


def _convexify(values: np.ndarray, mask=None, max_sweeps=500, tol_scale=1.0):
    """Largest minorant convex along rows, columns and both diagonals (2D) or
    along the axis (1D), restricted to masked nodes when a mask is given."""
    v = values.astype(float).copy()
    if mask is None:
        mask = np.ones(v.shape, dtype=bool)
    tol = 1e-13 * (1.0 + tol_scale)
    if v.ndim == 1:
        v[mask] = _hull_masked_line(v, mask)[mask]
        return v
    nr, nc = v.shape
    for _ in range(max_sweeps):
        change = 0.0
        for i in range(nr):
            new = _hull_masked_line(v[i, :], mask[i, :])
            change = max(change, float(np.max(np.abs(new - v[i, :]))))
            v[i, :] = new
        for j in range(nc):
            new = _hull_masked_line(v[:, j], mask[:, j])
            change = max(change, float(np.max(np.abs(new - v[:, j]))))
            v[:, j] = new
        for off in range(-(nr - 2), nc - 1):
            idx = _diag_indices(nr, nc, off, anti=False)
            new = _hull_masked_line(v[idx], mask[idx])
            change = max(change, float(np.max(np.abs(new - v[idx]))))
            v[idx] = new
        for off in range(-(nr - 2), nc - 1):
            idx = _diag_indices(nr, nc, off, anti=True)
            new = _hull_masked_line(v[idx], mask[idx])
            change = max(change, float(np.max(np.abs(new - v[idx]))))
            v[idx] = new
        if change <= tol:
            break
    return v


def _diag_indices(nr, nc, off, anti=False):
    """Index arrays of the grid diagonal with the given offset."""
    if not anti:
        rows = np.arange(max(0, -off), min(nr, nc - off))
        cols = rows + off
    else:
        rows = np.arange(max(0, -off), min(nr, nc - off))
        cols = (nc - 1) - (rows + off)
    return rows, cols


def directional_convexification(values, mask=None):
    """Largest minorant of the node values that is convex along rows, columns
    and both diagonals (the envelope core, no extension applied). Idempotent;
    leaves directionally convex inputs unchanged."""
    values = np.asarray(values, dtype=float)
    scale = float(np.max(np.abs(values))) if values.size else 1.0
    return _convexify(values, mask=mask, tol_scale=scale)


@dataclass
class EnvelopeResult:
    """Envelope of -u^- on the padded (doubled) box, and its contact set."""

    gamma: GridFunction
    contact_mask: np.ndarray
    extension: dict

    def contact_points(self) -> np.ndarray:
        return self.gamma.points()[self.contact_mask.ravel()]

    def contact_grid(self) -> GridFunction:
        """Contact indicator as a grid function (writable in the grid file
        format alongside gamma)."""
        return GridFunction(
            self.gamma.dim,
            self.gamma.shape,
            self.gamma.origin,
            self.gamma.spacing,
            self.contact_mask.astype(float),
        )


def lower_convex_envelope(u: GridFunction) -> EnvelopeResult:
    """Largest discretely convex minorant of the zero-extension of -u^- on
    the doubled box; contact marks |gamma - (-u^-)| <= 1e-9 (1 + max|u|)."""
    if u.dim not in (1, 2):
        raise InvalidInputError("envelope supports dim 1 or 2")
    pad = tuple((s - 1 + 1) // 2 for s in u.shape)
    new_shape = tuple(s + 2 * p for s, p in zip(u.shape, pad))
    new_origin = tuple(
        o - p * u.spacing for o, p in zip(u.origin, pad)
    )
    w = np.zeros(new_shape)
    sl = tuple(slice(p, p + s) for p, s in zip(pad, u.shape))
    w[sl] = np.minimum(u.values, 0.0)  # -u^- inside, 0 outside

    scale = float(np.max(np.abs(u.values))) if u.values.size else 1.0
    gamma_vals = _convexify(w, tol_scale=scale)
    gamma = GridFunction(u.dim, new_shape, new_origin, u.spacing, gamma_vals)
    contact = np.abs(gamma_vals - w) <= 1e-9 * (1.0 + scale)
    extension = {
        "pad_nodes": list(pad),
        "original_origin": list(u.origin),
        "original_shape": list(u.shape),
        "fill_value": 0.0,
    }
    return EnvelopeResult(gamma, contact, extension)


# ---------------------------------------------------------------------------
# ABP inequality check


def abp_check(u: GridFunction, f: GridFunction, lam, Lam, b0, boundary_tol=None):
    """sup u^- versus the discrete L^n norm of f^+ on the contact set.

    Works on the ball inscribed in the grid box: the envelope of -u^- is the
    directional convexification over chords of the ball, contact is marked to
    1e-9 relative tolerance, and the L^n norm is cell-volume weighted. The
    ratio is 0 when sup u^- = 0 (and inf when the contact norm vanishes while
    sup u^- > 0).
    """
    if u.shape != f.shape or abs(u.spacing - f.spacing) > 1e-12:
        raise InvalidInputError("u and f must share a grid")
    if not (0 < lam <= Lam) or b0 < 0:
        raise ParameterError("abp_check requires 0 < lambda <= Lambda, b0 >= 0")
    pts = u.points()
    lo, hi = u.box()
    center = (lo + hi) / 2.0
    radius = float(np.min((hi - lo) / 2.0))
    dist = np.linalg.norm(pts - center, axis=1).reshape(u.shape)
    ball = dist <= radius + 1e-12

    scale = float(np.max(np.abs(u.values))) if u.values.size else 1.0
    tol_b = boundary_tol if boundary_tol is not None else 4.0 * u.spacing * (1.0 + scale)
    ring = ball & (dist >= radius - 1.5 * u.spacing)
    if np.any(u.values[ring] < -tol_b):
        raise InvalidInputError(
            "u is negative on the domain boundary beyond tolerance %g" % tol_b
        )

    w = np.where(ball, np.minimum(u.values, 0.0), 0.0)
    gamma = _convexify(w, mask=ball, tol_scale=scale)
    contact = ball & (np.abs(gamma - w) <= 1e-9 * (1.0 + scale))

    sup_uminus = float(max(0.0, -np.min(u.values[ball])))
    n = u.dim
    fplus = np.maximum(f.values, 0.0)
    cellvol = u.spacing**n
    ln = float(np.sum(fplus[contact] ** n * cellvol) ** (1.0 / n))
    if sup_uminus <= 1e-9 * (1.0 + scale):
        ratio = 0.0
    elif ln == 0.0:
        ratio = math.inf
    else:
        ratio = sup_uminus / ln
    return {
        "sup_uminus": sup_uminus,
        "contact_Ln_norm_fplus": ln,
        "ratio": ratio,
        "contact_nodes": int(np.count_nonzero(contact)),
        "ball_nodes": int(np.count_nonzero(ball)),
        "lambda": float(lam),
        "Lambda": float(Lam),
        "b0": float(b0),
    }


# ---------------------------------------------------------------------------
# sections of convex functions


def _domain_box(u, domain):
    if domain is not None:
        return np.asarray(domain[0], dtype=float), np.asarray(domain[1], dtype=float)
    if isinstance(u, GridFunction):
        return u.box()
    box = getattr(u, "box", None)
    if box is not None:
        return np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    raise InvalidInputError("section needs a domain box for a bare callable")


def _gradient_at(u, x0):
    g = getattr(u, "grad", None)
    if g is not None:
        return np.asarray(g(x0), dtype=float)
    h = u.spacing / 2.0 if isinstance(u, GridFunction) else 1e-6
    x0 = np.asarray(x0, dtype=float)
    out = np.zeros(len(x0))
    for i in range(len(x0)):
        e = np.zeros(len(x0))
        e[i] = h
        out[i] = (u(x0 + e) - u(x0 - e)) / (2 * h)
    return out


def section(u, x0, h, rays: int = 256, domain=None) -> np.ndarray:
    """Boundary of the section {u - l_x0 < h} of a convex function.

    l_x0 is the supporting affine function at x0 (value + gradient). Each
    boundary point is located by bisection along a ray from x0 to relative
    tolerance 1e-10 of the domain diameter. Raises SectionEscapeError when a
    ray leaves the domain below the level h, and NonConvexityError when the
    profile decreases along a ray.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = len(x0)
    if h <= 0:
        raise ParameterError("section height h must be positive")
    lo, hi = _domain_box(u, domain)
    diam = float(np.linalg.norm(hi - lo))
    u0 = float(u(x0))
    g = _gradient_at(u, x0)

    def profile(x):
        return float(u(x)) - u0 - float(g @ (x - x0))

    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = 2 * math.pi * np.arange(rays) / rays
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def t_max(d):
        # distance from x0 to the box boundary along d
        tm = math.inf
        for i in range(n):
            if d[i] > 1e-15:
                tm = min(tm, (hi[i] - x0[i]) / d[i])
            elif d[i] < -1e-15:
                tm = min(tm, (lo[i] - x0[i]) / d[i])
        return tm

    verts = []
    dent_tol = 1e-12 * (1.0 + abs(u0)) + 1e-9 * h
    if isinstance(u, GridFunction):
        # bilinear interpolants of convex data are only convex up to O(h^2)
        dent_tol += 0.5 * u.spacing**2 * (1.0 + abs(u0))
    for d in dirs:
        tm = t_max(d)
        t = min(1e-6 * diam, 0.25 * tm)
        prev = 0.0
        t_lo = 0.0
        while True:
            if t >= tm:
                val_edge = profile(x0 + min(tm, t) * d)
                if val_edge < h:
                    raise SectionEscapeError(
                        "section at height %g reaches the domain boundary" % h
                    )
                t = tm
                break
            val = profile(x0 + t * d)
            if val < prev - dent_tol:
                raise NonConvexityError(
                    "profile decreases along ray %s: convexity precondition fails"
                    % (d.tolist(),)
                )
            if val >= h:
                break
            prev = val
            t_lo = t
            t *= 1.3
        t_hi = t
        for _ in range(200):
            if t_hi - t_lo <= 1e-10 * diam:
                break
            mid = 0.5 * (t_lo + t_hi)
            if profile(x0 + mid * d) >= h:
                t_hi = mid
            else:
                t_lo = mid
        verts.append(x0 + 0.5 * (t_lo + t_hi) * d)
    return np.asarray(verts)


# ---------------------------------------------------------------------------
# minimum-volume enclosing ellipsoid and the section normalization


def mvee(points, tol=1e-9, max_iters=200000):
    """Minimum-volume enclosing ellipsoid {x: (x-c)^T A (x-c) <= 1}.

    Khachiyan barycentric coordinate ascent with away steps (the away steps
    restore linear convergence, so the 1e-9 duality-gap target is cheap).
    The point set is whitened by its covariance first; the ellipsoid is
    affine-covariant, so the optimum maps back exactly while the iteration
    runs on a well-conditioned configuration.
    """
    P0 = np.asarray(points, dtype=float)
    if P0.ndim == 1:
        P0 = P0[:, None]
    N, d = P0.shape
    mean = P0.mean(axis=0)
    centered = P0 - mean
    if N < d + 1 or np.linalg.matrix_rank(centered, tol=1e-12) < d:
        raise RankError("degenerate (flat) vertex set for the enclosing ellipsoid")
    cov = centered.T @ centered / N
    evc, Qc = np.linalg.eigh(cov)
    if evc[0] <= 1e-14 * max(evc[-1], 1e-300):
        raise RankError("degenerate (flat) vertex set for the enclosing ellipsoid")
    W = np.diag(1.0 / np.sqrt(evc)) @ Qc.T
    P = centered @ W.T
    Q = np.hstack([P, np.ones((N, 1))]).T  # (d+1) x N
    u = np.full(N, 1.0 / N)
    dd = d + 1
    best_gap = math.inf
    stagnant = 0
    for _ in range(max_iters):
        V = (Q * u) @ Q.T
        try:
            sol = np.linalg.solve(V, Q)
        except np.linalg.LinAlgError:
            raise RankError("singular moment matrix in ellipsoid iteration")
        M = np.einsum("ij,ij->j", Q, sol)
        j_add = int(np.argmax(M))
        gap_add = M[j_add] - dd
        support = u > 1e-15
        Ms = np.where(support, M, np.inf)
        j_away = int(np.argmin(Ms))
        gap_away = dd - M[j_away]
        gap = max(gap_add, gap_away)
        if gap <= tol * dd:
            break
        # the duality gap bottoms out at the round-off floor of M; stop once
        # it stops improving rather than spinning on noise
        if gap < best_gap * (1.0 - 1e-3):
            best_gap = gap
            stagnant = 0
        else:
            stagnant += 1
            if stagnant > 1000:
                break
        if gap_add >= gap_away:
            step = gap_add / (dd * (M[j_add] - 1.0))
            u *= 1.0 - step
            u[j_add] += step
        else:
            denom = dd * (M[j_away] - 1.0)
            if denom <= 1e-15:
                u[j_away] = 0.0
                u /= u.sum()
                continue
            beta = min(gap_away / denom, u[j_away] / (1.0 - u[j_away]))
            u *= 1.0 + beta
            u[j_away] -= beta
            u = np.maximum(u, 0.0)
            u /= u.sum()
    c = P.T @ u
    S = (P.T * u) @ P - np.outer(c, c)
    try:
        A = np.linalg.inv(S) / d
    except np.linalg.LinAlgError:
        raise RankError("degenerate (flat) vertex set for the enclosing ellipsoid")
    # inflate so the returned ellipsoid covers every input point exactly
    members = np.einsum("ni,ij,nj->n", P - c, A, P - c)
    peak = float(np.max(members))
    if peak > 1.0:
        A /= peak
    # undo the whitening y = W (x - mean)
    A_orig = W.T @ A @ W
    c_orig = mean + np.linalg.solve(W, c)
    return A_orig, c_orig


@dataclass
class SectionNormalization:
    """Affine normalization of a section: T maps its enclosing ellipsoid to
    the unit ball; (det T)^2 h^n is the scale-invariant product."""

    h: float
    vertices: np.ndarray
    T: np.ndarray
    center: np.ndarray  # y-tilde, the image of the ellipsoid center
    detT: float
    product: float
    covering_margin: float  # max |T v - center| over vertices (<= 1 + tol)
    inscribed_margin: float  # distance from center to the mapped polygon boundary

    def to_dict(self):
        return {
            "h": self.h,
            "T": self.T.tolist(),
            "center": self.center.tolist(),
            "detT": self.detT,
            "product": self.product,
            "covering_margin": self.covering_margin,
            "inscribed_margin": self.inscribed_margin,
            "vertices": self.vertices.tolist(),
        }


def john_normalize(vertices, h, n: int) -> SectionNormalization:
    """Normalize a section by its minimum-volume enclosing ellipsoid.

    T is the symmetric positive square root of the ellipsoid matrix, so
    T(section) lies in the unit ball around y-tilde = T c; by John's lemma
    the 1/n-shrunk ball is contained in the section's convex hull. Returns
    det T and the product (det T)^2 h^n.
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[1] != n:
        raise InvalidInputError("vertex dimension does not match n")
    A, c = mvee(V)
    ev, Qv = eigenvalues_sym(A, vectors=True)
    if ev[0] <= 0:
        raise RankError("enclosing ellipsoid is degenerate")
    T = Qv @ np.diag(np.sqrt(ev)) @ Qv.T
    center = T @ c
    detT = float(np.prod(np.sqrt(ev)))
    product = detT**2 * h**n

    mapped = V @ T.T
    covering = float(np.max(np.linalg.norm(mapped - center, axis=1)))
    if n == 1:
        inscribed = float(np.max(mapped[:, 0] - center[0]))
        inscribed = min(inscribed, float(np.max(center[0] - mapped[:, 0])))
    else:
        # order mapped vertices by angle and take min distance to the edges
        rel = mapped - center
        order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))
        poly = rel[order]
        dmin = math.inf
        for k in range(len(poly)):
            a = poly[k]
            b = poly[(k + 1) % len(poly)]
            e = b - a
            ln = np.linalg.norm(e)
            if ln < 1e-14:
                continue
            dist = abs(a[0] * e[1] - a[1] * e[0]) / ln
            dmin = min(dmin, dist)
        inscribed = float(dmin)
    return SectionNormalization(
        h=float(h),
        vertices=V,
        T=T,
        center=center,
        detT=detT,
        product=float(product),
        covering_margin=covering,
        inscribed_margin=inscribed,
    )
