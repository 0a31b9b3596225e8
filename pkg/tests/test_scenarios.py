import pytest

from remova.regimes import bochner_guarantee, max_delta_order
from remova.scenarios import PRange, catalogue, lookup, membership_check, names


def test_catalogue_has_required_entries():
    required = {
        "heaviside-1d", "heaviside-2d", "log-laplace-2d", "harmonic-poly", "newton-3d",
        "dipole-3d", "cauchy-riemann", "riemann-removable", "line-log-3d", "john-type",
    }
    assert required <= set(names())
    assert len(set(names())) == len(names())


def test_lookup_examples():
    assert lookup("heaviside-1d").expected.coefficient((0,)) == 1
    assert lookup("harmonic-poly").removable
    assert str(lookup("newton-3d").p_range) == "[1, 3)"
    with pytest.raises(KeyError):
        lookup("nope")


def test_prange_contains():
    r = lookup("dipole-3d").p_range
    assert r.contains("1.4") and not r.contains("1.5") and not r.contains("inf")
    assert lookup("heaviside-1d").p_range.contains("inf")
    assert not lookup("log-laplace-2d").p_range.contains("inf")
    assert all(r.contains(p) for p in r.samples())


@pytest.mark.parametrize(
    "name,p,finite",
    [
        ("newton-3d", 2, True),
        ("newton-3d", 3, False),
        ("heaviside-1d", "inf", True),
        ("dipole-3d", "1.4", True),
        ("dipole-3d", "1.6", False),
        ("log-laplace-2d", "inf", False),
        ("cauchy-riemann", 2, False),
        ("john-type", "inf", True),
    ],
)
def test_membership(name, p, finite):
    assert membership_check(lookup(name), p).finite is finite


@pytest.mark.parametrize("s", catalogue(), ids=lambda s: s.name)
def test_declared_range_matches_membership(s):
    for p in s.p_range.samples():
        assert membership_check(s, p).finite, p
    hi = s.p_range.hi
    if not hi.is_inf and not s.p_range.closed:
        assert not membership_check(s, hi).finite


@pytest.mark.parametrize("s", catalogue(), ids=lambda s: s.name)
def test_bochner_sanity(s):
    # a guaranteed extension never coexists with a catalogued obstruction
    for p in s.p_range.samples():
        if bochner_guarantee(s.m, s.codim, p):
            assert s.removable, (s.name, p)


@pytest.mark.parametrize("s", [s for s in catalogue() if not s.removable], ids=lambda s: s.name)
def test_expected_order_admissible(s):
    for p in s.p_range.samples():
        k = max_delta_order(s.m, s.codim, p)
        assert k is not None and s.expected_kappa <= k, (s.name, str(p))


def test_dipole_saturation_boundary():
    s = lookup("dipole-3d")
    assert max_delta_order(2, 3, "1.4") == 1 == s.expected_kappa
    assert max_delta_order(2, 3, "1.6") == 0 < s.expected_kappa
