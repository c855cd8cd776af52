import pytest

from busched.baselines import greedy_schedule
from busched.generate import GenerationError, GeneratorConfig, derive_instance, generate_instance
from busched.model import compute_objectives


def test_regular_headways_without_deletion():
    inst = generate_instance(GeneratorConfig(departures_per_cp=12, seed=2))
    for tt in inst.timetables:
        assert len(tt.departures) == 12
        assert len({b - a for a, b in zip(tt.departures, tt.departures[1:])}) == 1


def test_deletion_fraction_counts():
    inst = generate_instance(GeneratorConfig(departures_per_cp=25, headway_bounds=(10, 20),
                                             deletion_fraction=0.3, seed=1))
    assert inst.n_departures() == 70


def test_generated_instances_are_solvable_by_greedy():
    for seed in range(25):
        cfg = GeneratorConfig(n_lines=1 + seed % 3, departures_per_cp=6 + seed % 5, seed=seed)
        inst = generate_instance(cfg)
        assert compute_objectives(inst, greedy_schedule(inst)).n_uncovered == 0
        assert len(inst.lines) == 2 * cfg.n_lines


def test_generation_is_seeded():
    cfg = GeneratorConfig(seed=7, spare_buses=3)
    assert generate_instance(cfg) == generate_instance(cfg)
    assert generate_instance(cfg) != generate_instance(GeneratorConfig(seed=8, spare_buses=3))


def test_spare_buses_added():
    a = generate_instance(GeneratorConfig(seed=5))
    b = generate_instance(GeneratorConfig(seed=5, spare_buses=4))
    assert b.fleet_size == a.fleet_size + 4


def test_fixed_fleet_too_small():
    with pytest.raises(GenerationError):
        generate_instance(GeneratorConfig(seed=5, fleet_size=1))


def test_derive_instance():
    base = generate_instance(GeneratorConfig(departures_per_cp=25, headway_bounds=(10, 20), seed=3))
    assert derive_instance(base, 0.0, 1) == base
    assert derive_instance(base, 0.25, 4) == derive_instance(base, 0.25, 4)
    for f in (0.1, 0.25, 0.33, 0.5):
        assert derive_instance(base, f, 0).n_departures() == round((1 - f) * 100)
    with pytest.raises(ValueError):
        derive_instance(base, 1.0, 0)


def test_config_checks():
    with pytest.raises(ValueError):
        GeneratorConfig(headway_bounds=(0, 5))
    with pytest.raises(ValueError):
        GeneratorConfig(deletion_fraction=1.0)
    with pytest.raises(ValueError):
        GeneratorConfig(span_start=900, span_end=800)
