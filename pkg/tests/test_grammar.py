import math

import numpy as np
import pytest

from capwidth.bodies import ball, polydisk
from capwidth.grammar import GrammarError, parse_body

RNG = np.random.default_rng(77)


def dirs(dim, m=100):
    g = RNG.standard_normal((m, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def test_parse_ball_and_cube():
    parsed = parse_body("ball(2)")
    assert parsed.body.dim == 4
    assert parsed.spec is not None
    U = dirs(4)
    np.testing.assert_allclose(parsed.body.support(U), 1.0, atol=1e-12)
    sq = parse_body("cube(1)")
    assert sq.body.dim == 2
    assert sq.spec is not None
    np.testing.assert_allclose(sq.body.support(dirs(2)), np.abs(dirs(2)).sum(axis=1), atol=1.5)


def test_parse_ellipsoid_and_polydisk():
    ell = parse_body("ellipsoid(2, 1)")
    assert ell.spec is None
    assert ell.body.volume == pytest.approx(2 * math.pi, rel=1e-12)
    pd = parse_body("polydisk(1, 2)")
    assert pd.spec is not None
    U = dirs(4)
    np.testing.assert_allclose(pd.body.support(U), polydisk(1, 2).support(U), rtol=1e-12)


def test_parse_ballproduct_one_based_indices():
    parsed = parse_body("ballproduct(rho=[1,1], I=[[1,2],[]], J=[[],[1,2]])")
    spec = parsed.spec
    assert spec is not None
    assert [tuple(c) for c in spec.factor_columns()] == [(0, 1), (2, 3)]


def test_parse_sum_and_linimg():
    s = parse_body("sum(ball(1), cube(1))")
    U = dirs(2)
    np.testing.assert_allclose(
        s.body.support(U), ball(1).support(U) + parse_body("cube(1)").body.support(U), rtol=1e-12
    )
    assert s.spec is None
    img = parse_body("linimg([[2,0],[0,1]], ball(1))")
    np.testing.assert_allclose(
        img.body.support(U), np.sqrt((2 * U[:, 0]) ** 2 + U[:, 1] ** 2), rtol=1e-12
    )


def test_whitespace_and_floats_accepted():
    parsed = parse_body("  polydisk( 1.0 ,2.5 ) ")
    assert parsed.body.dim == 4


@pytest.mark.parametrize(
    "text,needle",
    [
        ("blob(2)", "blob"),
        ("ball(2", "position"),
        ("ball(-1)", "-1"),
        ("ballproduct(rho=[1], Q=[[1]], J=[[1]])", "Q"),
        ("ballproduct(rho=[1], I=[[0]], J=[[1]])", "0"),
        ("polydisk()", "position"),
        ("ball(1) trailing", "trailing"),
    ],
)
def test_errors_name_the_token(text, needle):
    # syntax errors come out as GrammarError, semantic ones as BodyError;
    # both subclass ValueError and both must name the offending piece
    with pytest.raises(ValueError) as exc:
        parse_body(text)
    assert needle in str(exc.value)


def test_error_reports_position():
    with pytest.raises(GrammarError) as exc:
        parse_body("ballproduct(rho=[1], I=[1], J=[[1]])")
    assert "position" in str(exc.value)
