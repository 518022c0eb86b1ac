"""Test: problem
The test file used for checking the following properties:
   - the named presets are consistent
   - the time-step policies
   - building problems from config sections
"""
import pytest

from spde_richardson.exceptions import ConfigError
from spde_richardson.integrator import EXPLICIT, IMPLICIT
from spde_richardson.problem import PRESETS, DtPolicy, build_preset, problem_from_dict
from spde_richardson.stencil import validate_stencil

# NOTE: Here are some notes for testing
# Naming convention: test_{tcid}_{test title}
# Running just one tcid: python -m pytest -k {tcid}


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset01_stencils_validate(name):
    problem = build_preset(name)
    assert problem.name == name
    assert problem.stencil.d == problem.d
    assert validate_stencil(problem.stencil).ok
    assert name in str(problem)


def test_preset02_fresh_instances():
    first = build_preset("heat")
    first.T = 1.0
    assert build_preset("heat").T == 0.05
    with pytest.raises(ConfigError):
        build_preset("burgers")


def test_policy01_parabolic_steps():
    policy = DtPolicy("parabolic", ratio=0.2)
    T, period = 0.05, 1.0
    # m = ceil(T / (ratio L^2)) = 1 gives dt = T / n^2 <= 0.2 h^2.
    assert policy.steps_for(16, T, period) == 256
    assert policy.steps_for(32, T, period) == 1024
    assert DtPolicy("parabolic", ratio=0.01).steps_for(4, T, period) == 5 * 16
    for n in (8, 16, 32):
        dt, h = T / policy.steps_for(n, T, period), period / n
        assert dt <= 0.2 * h**2


def test_policy02_fixed_and_invalid():
    assert DtPolicy("fixed", steps=100).steps_for(64, 1.0, 1.0) == 100
    assert DtPolicy("fixed", steps=100).to_dict() == {"policy": "fixed", "steps": 100}
    with pytest.raises(ConfigError):
        DtPolicy("adaptive")
    with pytest.raises(ConfigError):
        DtPolicy("fixed")
    with pytest.raises(ConfigError):
        DtPolicy("parabolic", ratio=0.0)


def test_config01_preset_with_overrides():
    problem = problem_from_dict(
        {
            "problem": {"preset": "upwind"},
            "grid": {"n": 64},
            "time": {"T": 0.2, "method": IMPLICIT, "policy": "fixed", "steps": 50},
        }
    )
    assert problem.n0 == 64
    assert problem.T == 0.2
    assert problem.method == IMPLICIT
    assert problem.steps_for(64) == 50
    assert problem.oracle.kind == "advection_diffusion"


def test_config02_preset_conflicts():
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"preset": "heat", "a": 2.0}})
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"preset": "heat"}, "grid": {"d": 2}})
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"preset": "heat"}, "grid": {"L": 2.0}})
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"preset": "heat"}, "noise": {"R": 1}})
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"preset": "heat"}, "time": {"method": "rk4"}})


def test_config03_preset_with_a_stencil_section():
    problem = problem_from_dict(
        {"problem": {"preset": "upwind"}, "stencil": {"constructor": "diagonal", "theta": 0.5}}
    )
    assert problem.stencil.recipe["theta"] == 0.5
    assert validate_stencil(problem.stencil).ok


def test_config04_explicit_problem():
    sections = {
        "problem": {
            "name": "drifted",
            "a": 0.1,
            "b": 0.2,
            "psi": {
                "kind": "trigpoly",
                "period": 2.0,
                "modes": [{"amplitude": 1.0, "wavevector": [1], "function": "sin"}],
            },
            "oracle": {"kind": "advection_diffusion", "a": 0.1, "b": 0.2, "c": 0.0,
                       "psi": {"kind": "trigpoly", "period": 2.0,
                               "modes": [{"amplitude": 1.0, "wavevector": [1]}]}},
        },
        "stencil": {"theta": 0.1},
        "grid": {"d": 1, "n": 20, "L": 2.0},
        "time": {"T": 0.1, "policy": "parabolic", "ratio": 0.5},
    }
    problem = problem_from_dict(sections)
    assert problem.name == "drifted"
    assert problem.period == 2.0
    assert problem.n0 == 20
    assert problem.method == EXPLICIT
    assert problem.oracle.kind == "advection_diffusion"
    assert problem.stencil.recipe["constructor"] == "diagonal"
    assert validate_stencil(problem.stencil).ok


def test_config05_explicit_problem_checks():
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"b": 1.0}})
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"a": 1.0, "drift": 1.0}})
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"a": 1.0}, "time": {"T": 0.0}})
    with pytest.raises(ConfigError):
        problem_from_dict({"problem": {"a": 1.0}, "stencil": {"constructor": "hexagonal"}})
