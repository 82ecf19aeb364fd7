"""One test per acceptance criterion, each at its stated tolerance.

Every test prints a single ``[PASS]``/``[FAIL]`` line for the criterion
(also collected into the terminal summary), followed by its component checks.
"""

import pytest

from rbmcouple import validation as V


def _judge(record_property, label, results):
    ok = all(r.passed for r in results)
    secs = sum(r.seconds for r in results)
    line = f"[{'PASS' if ok else 'FAIL'}] {label} ({len(results)} checks, {secs:.1f}s)"
    record_property("criterion", line)
    print(line)
    for r in results:
        print("    " + r.line())
    failed = [r.line() for r in results if not r.passed]
    assert ok, "\n".join(failed)


def test_gauss_bonnet(record_property):
    _judge(record_property, "01 gauss_bonnet", V.check_gauss_bonnet())


def test_disc_exterior_cross_term(record_property):
    _judge(record_property, "02 disc_exterior", V.check_disc_exterior())


def test_ellipse_exterior_cross_term(record_property):
    _judge(record_property, "03 ellipse_exterior", V.check_ellipse_exterior())


def test_scaling_invariance(record_property):
    _judge(record_property, "04 scaling_invariance", V.check_scaling())


def test_backend_cross_validation(record_property):
    _judge(record_property, "05 backend_crossval", V.check_backend_crossval())


def test_annulus_hitting_probability(record_property):
    _judge(record_property, "06 annulus_hitting", V.check_annulus_hitting())


def test_skorokhod_half_plane_oracle(record_property):
    _judge(record_property, "07 skorokhod_half_plane", V.check_skorokhod_half_plane())


@pytest.mark.slow
def test_decay_law(record_property):
    _judge(record_property, "08 decay_law", V.check_decay_law())


@pytest.mark.slow
def test_ergodic_functionals(record_property):
    _judge(record_property, "09 ergodic_functionals", V.check_ergodic_functionals())


@pytest.mark.slow
def test_excursion_statistic(record_property):
    _judge(record_property, "10 excursion_statistic", V.check_excursion_statistic())


def test_determinism(record_property):
    _judge(record_property, "11 determinism", V.check_determinism())
