import math

import numpy as np
import pytest

from nelliptic.errors import ParameterError, SingularityError
from nelliptic.fixtures import (
    fixture,
    fixture_claims,
    fixture_names,
    parse_fixture,
)
from nelliptic.operators import Jet, SymMatrix, evaluate

ALL_PARAMETRIC = [
    ("pmc", 0.3),
    ("hq", 0.5),
    ("slag", 0.4),
]


def sample_nonsingular(fix, rng, count, margin=2e-4):
    lo, hi = fix.box
    pts = []
    while len(pts) < count:
        x = rng.uniform(lo, hi)
        if not fix.is_singular(x, order=2):
            # keep a band away from the singular set for derivative checks
            if fix.name == "pmc":
                r = np.linalg.norm(x)
                if abs(r - 1) < margin or r < margin:
                    continue
            if fix.name == "slag" and abs(x[0]) < margin:
                continue
            if fix.name == "hq" and abs(x[-1]) < margin:
                continue
            pts.append(x)
    return pts


class TestDerivativeConsistency:
    @pytest.mark.parametrize("name,theta", ALL_PARAMETRIC)
    def test_grad_hess_match_finite_differences(self, name, theta):
        # central differences of the second derivative lose (h/d)^2 accuracy
        # at distance d from the blow-up set, so the exclusion band must be
        # comfortably wider than h
        fix = fixture(name, theta)
        rng = np.random.default_rng(hash(name) % 2**31)
        h = 1e-4
        for x in sample_nonsingular(fix, rng, 25, margin=0.02):
            scale = 1.0 + abs(fix(x))
            g = fix.grad(x)
            H = fix.hess(x)
            for d in range(fix.dim):
                e = np.zeros(fix.dim)
                e[d] = h
                fd = (fix(x + e) - fix(x - e)) / (2 * h)
                assert abs(g[d] - fd) <= 1e-6 * scale + 1e-4 * abs(g[d])
                fd2 = (fix(x + e) - 2 * fix(x) + fix(x - e)) / h**2
                assert abs(H[d, d] - fd2) <= 1e-4 * (1 + abs(H[d, d]))

    def test_quadratic_and_harmonic(self):
        for fix in (fixture("quadratic", A=np.array([[2.0, 0.4], [0.4, 1.0]])), fixture("harmonic", 3)):
            rng = np.random.default_rng(5)
            h = 1e-4
            for _ in range(10):
                x = rng.uniform(-1, 1, size=2)
                g = fix.grad(x)
                for d in range(2):
                    e = np.zeros(2)
                    e[d] = h
                    fd = (fix(x + e) - fix(x - e)) / (2 * h)
                    assert abs(g[d] - fd) <= 1e-6 * (1 + abs(fd))


class TestResidualConsistency:
    @pytest.mark.parametrize("name,theta", ALL_PARAMETRIC)
    def test_operator_on_hessian_matches_rhs(self, name, theta):
        fix = fixture(name, theta)
        rng = np.random.default_rng(1000 + int(100 * theta))
        pts = sample_nonsingular(fix, rng, 1000)
        worst = 0.0
        for x in pts:
            jet = Jet(
                SymMatrix.from_full(fix.hess(x)),
                tuple(fix.grad(x)),
                fix(x),
                tuple(x),
            )
            worst = max(worst, abs(evaluate(fix.operator, jet) - fix.rhs(x)))
        assert worst <= 1e-8

    def test_quadratic_determinant(self):
        q = fixture("quadratic")
        assert q.rhs([0.3, 0.1]) == pytest.approx(1.0)  # det I


class TestSlagIdentity:
    def test_phase_formula(self):
        # the Lagrangian phase of the Hessian equals
        # 3 pi/4 - arctan(theta^{-1} |x1|^{1-theta}) via arctan t + arctan 1/t = pi/2
        rng = np.random.default_rng(77)
        for theta in (0.2, 0.5, 0.8):
            fix = fixture("slag", theta)
            worst = 0.0
            count = 0
            while count < 1000:
                x = rng.uniform(-1, 1, size=2)
                if abs(x[0]) < 1e-8:
                    continue
                count += 1
                phase = evaluate(
                    fix.operator, Jet(SymMatrix.from_full(fix.hess(x)), (0.0, 0.0), 0.0, tuple(x))
                )
                formula = 0.75 * math.pi - math.atan(abs(x[0]) ** (1 - theta) / theta)
                worst = max(worst, abs(phase - formula))
            assert worst <= 1e-10

    def test_supercritical_margin_positive(self):
        for theta in (0.1, 0.4, 0.9):
            fix = fixture("slag", theta)
            eps = fix.eps_f(samples=2000)
            assert eps > 0
            # phase peaks at 3pi/4 on {x1 = 0}: margin approaches pi/4
            assert eps == pytest.approx(math.pi / 4, abs=0.05)

    def test_sharpness_direction(self):
        # [f]_{C^{1-theta}(0)} grows as theta decreases
        from nelliptic.regularity import holder_seminorm

        radii = [0.5 * 0.5**m for m in range(5)]
        lo = holder_seminorm(fixture("slag", 0.2).rhs, [0, 0], 0, 0.8, radii)
        hi = holder_seminorm(fixture("slag", 0.8).rhs, [0, 0], 0, 0.2, radii)
        assert lo > hi


class TestParameterRanges:
    def test_pmc_range(self):
        with pytest.raises(ParameterError):
            fixture("pmc", 0.6)
        with pytest.raises(ParameterError):
            fixture("pmc", 0.0)

    def test_hq_slag_range(self):
        with pytest.raises(ParameterError):
            fixture("hq", 1.0)
        with pytest.raises(ParameterError):
            fixture("slag", -0.1)

    def test_unknown_fixture(self):
        with pytest.raises(ParameterError):
            fixture("pogorelov", 0.5)

    def test_singular_access(self):
        with pytest.raises(SingularityError):
            fixture("pmc", 0.3).grad([1.0, 0.0])
        with pytest.raises(SingularityError):
            fixture("slag", 0.4).hess([0.0, 0.5])

    def test_parse_strings(self):
        assert parse_fixture("slag:0.4").params["theta"] == 0.4
        assert parse_fixture("quadratic").name == "quadratic"
        with pytest.raises(ParameterError):
            parse_fixture("slag")


class TestClaims:
    def test_table_shape(self):
        rows = fixture_claims()
        names = {r["fixture"] for r in rows}
        assert {"pmc", "hq", "slag", "quadratic"} <= names
        for r in rows:
            assert set(r) >= {"fixture", "point", "k", "alpha", "classification", "citation"}
        pmc_row = next(r for r in rows if r["fixture"] == "pmc")
        assert pmc_row["k"] == 0 and pmc_row["alpha"] == 0.3
        slag_row = next(r for r in rows if r["fixture"] == "slag")
        assert slag_row["k"] == 1 and slag_row["alpha"] == 0.4
        quad_row = next(r for r in rows if r["fixture"] == "quadratic")
        assert quad_row["classification"] == "polynomial_exact"

    def test_names_listing(self):
        assert "pmc" in fixture_names() and "slag" in fixture_names()
