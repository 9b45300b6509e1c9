import math

import numpy as np
import pytest

from nelliptic.errors import (
    InvalidInputError,
    NonConvexityError,
    RankError,
    SectionEscapeError,
)
from nelliptic.fixtures import fixture
from nelliptic.geometry import (
    abp_check,
    directional_convexification,
    john_normalize,
    lower_convex_envelope,
    mvee,
    section,
)
from nelliptic.grid import GridFunction


class TestEnvelope:
    def test_nonnegative_input_zero_envelope(self):
        g = GridFunction.from_box([-1, -1], [1, 1], 0.1, fn=lambda x: 1.0 + x[0] ** 2)
        env = lower_convex_envelope(g)
        assert np.all(env.gamma.values == 0.0)
        assert np.all(env.contact_mask)

    def test_1d_parabola_contact_points(self):
        h = 1 / 256
        g = GridFunction.from_box([-1.0], [1.0], h, fn=lambda x: x[0] ** 2 - 1)
        env = lower_convex_envelope(g)
        xs = env.gamma.points()[:, 0]
        inner = xs[env.contact_mask & (np.abs(xs) < 1.5)]
        target = 2 - math.sqrt(3)
        assert abs(np.max(np.abs(inner)) - target) <= 2 * h
        # the analytic outer tangent construction agrees: line from (2,0)
        # touching the parabola solves x0^2 - 4 x0 + 1 = 0
        assert target**2 - 4 * target + 1 == pytest.approx(0.0, abs=1e-12)

    def test_envelope_below_input_and_min(self):
        g = GridFunction.from_box([-1, -1], [1, 1], 1 / 16, fn=lambda x: x[0] ** 2 + x[1] - 0.7)
        env = lower_convex_envelope(g)
        pad = env.extension["pad_nodes"]
        w = np.zeros(env.gamma.shape)
        sl = tuple(slice(p, p + s) for p, s in zip(pad, g.shape))
        w[sl] = np.minimum(g.values, 0.0)
        scale = np.max(np.abs(g.values))
        assert np.all(env.gamma.values <= w + 1e-9 * (1 + scale))
        assert env.gamma.values.min() == pytest.approx(-np.max(np.maximum(-g.values, 0)), abs=1e-9)

    def test_discrete_midpoint_convexity(self):
        rng = np.random.default_rng(2)
        g = GridFunction(2, (17, 17), (-1, -1), 0.125, rng.normal(size=(17, 17)) - 2)
        env = lower_convex_envelope(g)
        v = env.gamma.values
        tol = 1e-9 * (1 + np.max(np.abs(v)))
        assert np.all(v[:-2, :] + v[2:, :] - 2 * v[1:-1, :] >= -tol)
        assert np.all(v[:, :-2] + v[:, 2:] - 2 * v[:, 1:-1] >= -tol)
        assert np.all(v[:-2, :-2] + v[2:, 2:] - 2 * v[1:-1, 1:-1] >= -tol)
        assert np.all(v[2:, :-2] + v[:-2, 2:] - 2 * v[1:-1, 1:-1] >= -tol)

    def test_idempotence_and_convex_fixed_point(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=(21, 21))
        once = directional_convexification(w)
        twice = directional_convexification(once)
        assert np.max(np.abs(twice - once)) <= 1e-12 * (1 + np.max(np.abs(w)))
        # a convex function is left untouched
        xs = np.linspace(-1, 1, 33)
        conv = 0.5 * (xs[:, None] ** 2 + xs[None, :] ** 2) - 1.0
        assert np.array_equal(directional_convexification(conv), conv)


class TestABP:
    def test_nonnegative_u(self):
        g = GridFunction.from_box([-1, -1], [1, 1], 1 / 16, fn=lambda x: 0.5 + x[0] ** 2)
        f = GridFunction(2, g.shape, g.origin, g.spacing, np.ones(g.shape))
        rep = abp_check(g, f, 1.0, 1.0, 0.0)
        assert rep["sup_uminus"] == 0.0 and rep["ratio"] == 0.0

    def test_paraboloid_closed_form(self):
        n, h = 2, 1 / 64
        u = GridFunction.from_box([-1, -1], [1, 1], h, fn=lambda x: (x @ x - 1) / (2 * n))
        f = GridFunction(2, u.shape, u.origin, u.spacing, np.ones(u.shape))
        rep = abp_check(u, f, 1.0, 1.0, 0.0)
        expected = (1 / (2 * n)) / math.sqrt(math.pi)
        assert rep["ratio"] == pytest.approx(expected, rel=0.05)
        # the whole discrete ball is in contact for this convex input
        assert rep["contact_nodes"] == rep["ball_nodes"]

    def test_negative_boundary_rejected(self):
        g = GridFunction.from_box([-1, -1], [1, 1], 1 / 8, fn=lambda x: -1.0)
        f = GridFunction(2, g.shape, g.origin, g.spacing, np.ones(g.shape))
        with pytest.raises(InvalidInputError):
            abp_check(g, f, 1.0, 1.0, 0.0, boundary_tol=1e-6)


class TestSection:
    def test_disk(self):
        verts = section(fixture("quadratic"), [0, 0], 0.02)
        r = np.linalg.norm(verts, axis=1)
        assert np.max(np.abs(r - 0.2)) < 1e-8

    def test_ellipse_semiaxes(self):
        q = fixture("quadratic", A=np.diag([1.0, 4.0]))
        h = 0.02
        verts = section(q, [0, 0], h)
        # semiaxes sqrt(2h), sqrt(h/2): implicit form x1^2/(2h) + x2^2/(h/2) = 1
        lhs = verts[:, 0] ** 2 / (2 * h) + verts[:, 1] ** 2 / (h / 2)
        assert np.max(np.abs(lhs - 1.0)) < 1e-7
        assert abs(np.max(verts[:, 0]) - math.sqrt(2 * h)) < 1e-8
        assert abs(np.max(verts[:, 1]) - math.sqrt(h / 2)) < 1e-8

    def test_nonconvex_detected(self):
        bowl = fixture("quadratic", A=-np.eye(2))
        with pytest.raises((NonConvexityError, SectionEscapeError)):
            section(bowl, [0, 0], 0.02, domain=([-2, -2], [2, 2]))
        # concave profile must trip the monotonicity check specifically
        with pytest.raises(NonConvexityError):
            section(
                lambda x: -float(x @ x), [0.0, 0.0], 0.02, domain=([-2, -2], [2, 2])
            )

    def test_escape(self):
        with pytest.raises(SectionEscapeError):
            section(fixture("quadratic"), [0, 0], 10.0, domain=([-1, -1], [1, 1]))


class TestJohn:
    def test_ellipse_normalization(self):
        for h in (0.005, 0.02):
            q = fixture("quadratic", A=np.diag([1.0, 4.0]))
            verts = section(q, [0, 0], h)
            norm = john_normalize(verts, h, 2)
            assert norm.detT == pytest.approx(1.0 / h, rel=1e-6)
            assert norm.product == pytest.approx(1.0, rel=1e-6)

    def test_disk_product_quarter(self):
        for h in (0.001, 0.01, 0.1):
            verts = section(fixture("quadratic"), [0, 0], h)
            norm = john_normalize(verts, h, 2)
            assert norm.product == pytest.approx(0.25, rel=1e-6)

    def test_unimodular_invariance(self):
        q = fixture("quadratic", A=np.diag([1.0, 4.0]))
        verts = section(q, [0, 0], 0.02)
        base = john_normalize(verts, 0.02, 2)
        A = np.array([[1.0, 0.7], [0.0, 1.0]])  # det 1
        mapped = john_normalize(verts @ A.T, 0.02, 2)
        assert mapped.product == pytest.approx(base.product, abs=1e-8)

    def test_sandwich_margins(self):
        verts = section(fixture("quadratic", A=np.diag([2.0, 0.5])), [0, 0], 0.01)
        norm = john_normalize(verts, 0.01, 2)
        assert norm.covering_margin <= 1 + 1e-7
        # the 1/n-shrunk ellipsoid contains the polygon centroid
        centroid = verts.mean(axis=0)
        assert np.linalg.norm(norm.T @ centroid - norm.center) <= 0.5 + 1e-7

    def test_product_bands_across_heights(self):
        heights = np.logspace(-3, -1, 5)
        # quadratic fixture: constant to 1%
        prods = []
        q = fixture("quadratic", A=np.diag([1.5, 0.8]))
        for h in heights:
            norm = john_normalize(section(q, [0, 0], h), h, 2)
            prods.append(norm.product)
        assert max(prods) / min(prods) <= 1.01
        # strictly convex non-quadratic analytic input: factor-4 band
        f = lambda x: 0.5 * x[0] ** 2 + 0.25 * x[1] ** 4 + 0.5 * x[1] ** 2
        prods = []
        for h in heights:
            verts = section(f, [0, 0], h, domain=([-2, -2], [2, 2]))
            prods.append(john_normalize(verts, h, 2).product)
        assert max(prods) / min(prods) <= 4.0

    def test_flat_vertices_rejected(self):
        pts = np.stack([np.linspace(0, 1, 8), np.zeros(8)], axis=-1)
        with pytest.raises(RankError):
            john_normalize(pts, 0.01, 2)

    def test_mvee_covers_points(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(40, 2))
        A, c = mvee(pts)
        vals = np.einsum("ni,ij,nj->n", pts - c, A, pts - c)
        assert np.max(vals) <= 1 + 1e-7
