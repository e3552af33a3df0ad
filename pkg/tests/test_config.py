"""Config grammar tests: parsing, rendering, validation, round trips.

The round-trip property is the load-bearing one: the canonical rendering of
any accepted document must parse back to the identical configuration, since
snapshots embed the rendered text and resumption re-parses it.
"""

import dataclasses
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsvsim.config import (
    ConfigError,
    RunConfig,
    normalize_config,
    parse_config,
    render_config,
    validate_config,
)

MINIMAL = "time.t_end = 1.0\n"


def positive_floats(lo=1e-8, hi=1e8):
    return st.floats(min_value=lo, max_value=hi, allow_nan=False, allow_infinity=False)


finite_floats = st.floats(allow_nan=False, allow_infinity=False)

GENERATOR_NAMES = st.sampled_from(
    [
        "composite",
        "taylor_green_fluid",
        "zero_fluid",
        "maxwellian_bump",
        "zero_kinetic",
        "taylor_green_fluid+maxwellian_bump",
        "taylor_green_fluid+zero_kinetic",
        "zero_fluid+maxwellian_bump",
        "maxwellian_bump+taylor_green_fluid",
        "zero_kinetic+zero_fluid",
    ]
)

DIRECTORY_NAMES = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_./",
    min_size=1,
    max_size=24,
)

run_configs = st.builds(
    RunConfig,
    n_x=st.integers(4, 64).map(lambda k: 2 * k),
    length=positive_floats(),
    n_v=st.integers(8, 200),
    v_max=positive_floats(),
    t_end=positive_floats(),
    window=positive_floats(),
    tol=positive_floats(1e-14, 1.0),
    max_iter=st.integers(1, 200),
    quadrature_nodes=st.integers(2, 12),
    sweep=st.sampled_from(["jacobi", "gauss_seidel"]),
    char_substep=st.floats(0.0, 10.0, allow_nan=False),
    generator=GENERATOR_NAMES,
    fluid=st.sampled_from(["taylor_green", "zero"]),
    kinetic=st.sampled_from(["maxwellian_bump", "zero"]),
    amplitude=finite_floats,
    bump_amplitude=st.floats(0.0, 1e6, allow_nan=False),
    bump_width=positive_floats(),
    sigma=positive_floats(),
    mean_velocity_x=finite_floats,
    mean_velocity_y=finite_floats,
    directory=DIRECTORY_NAMES,
    cadence=st.integers(1, 1000),
    snapshot_final=st.booleans(),
    snapshot_every=st.integers(0, 1000),
    seed=st.integers(0, 2**31),
)


class TestRoundTrip:
    @given(run_configs)
    @settings(max_examples=200)
    def test_render_then_parse_is_identity(self, cfg):
        assert parse_config(render_config(cfg)) == cfg

    @given(run_configs)
    @settings(max_examples=50)
    def test_normalize_is_idempotent(self, cfg):
        text = render_config(cfg)
        assert normalize_config(text) == text

    @given(run_configs)
    @settings(max_examples=50)
    def test_rendered_configs_validate(self, cfg):
        validate_config(cfg)

    def test_float_precision_survives(self):
        cfg = parse_config(MINIMAL + "picard.tol = 1.0000000000000002e-10\n")
        assert cfg.tol == 1.0000000000000002e-10
        again = parse_config(render_config(cfg))
        assert again.tol == cfg.tol


class TestParsing:
    def test_minimal_document_uses_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.t_end == 1.0
        assert cfg.n_x == 32 and cfg.window == 0.01 and cfg.sweep == "jacobi"

    def test_comments_and_blank_lines_are_skipped(self):
        text = "# full line comment\n\ntime.t_end = 2.0  # trailing comment\n"
        assert parse_config(text).t_end == 2.0

    def test_spaces_around_equals_are_optional(self):
        assert parse_config("time.t_end=0.5\n").t_end == 0.5

    def test_booleans(self):
        cfg = parse_config(MINIMAL + "output.snapshot_final = false\n")
        assert cfg.snapshot_final is False
        with pytest.raises(ConfigError, match="true or false"):
            parse_config(MINIMAL + "output.snapshot_final = 1\n")

    def test_unknown_key_names_line_and_path(self):
        with pytest.raises(ConfigError, match=r"line 2: unknown key 'grid.n'"):
            parse_config(MINIMAL + "grid.n = 16\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate key 'time.t_end'"):
            parse_config("time.t_end = 1.0\ntime.t_end = 2.0\n")

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="missing required key 'time.t_end'"):
            parse_config("grid.n_x = 16\n")

    def test_missing_equals_sign(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config("time.t_end 1.0\n")

    def test_empty_value(self):
        with pytest.raises(ConfigError, match="empty value"):
            parse_config("time.t_end =\n")

    def test_type_errors_name_the_path(self):
        with pytest.raises(ConfigError, match="grid.n_x must be an integer"):
            parse_config(MINIMAL + "grid.n_x = 16.5\n")
        with pytest.raises(ConfigError, match="time.window must be a number"):
            parse_config(MINIMAL + "time.window = soon\n")


class TestRangeChecks:
    def test_odd_grid_rejected(self):
        with pytest.raises(ConfigError, match="grid.n_x must be even"):
            parse_config(MINIMAL + "grid.n_x = 17\n")

    def test_nonpositive_values_rejected(self):
        for line, path in [
            ("time.window = 0.0", "time.window"),
            ("kinetic.v_max = -1.0", "kinetic.v_max"),
            ("picard.tol = 0.0", "picard.tol"),
            ("initial_data.sigma = 0.0", "initial_data.sigma"),
        ]:
            with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
                parse_config(MINIMAL + line + "\n")

    def test_iteration_budget_bounds(self):
        with pytest.raises(ConfigError, match="picard.max_iter"):
            parse_config(MINIMAL + "picard.max_iter = 0\n")
        with pytest.raises(ConfigError, match="picard.quadrature_nodes"):
            parse_config(MINIMAL + "picard.quadrature_nodes = 13\n")

    def test_sweep_enum(self):
        with pytest.raises(ConfigError, match="picard.sweep must be one of"):
            parse_config(MINIMAL + "picard.sweep = sor\n")


class TestGeneratorGrammar:
    def test_accepts_composed_halves(self):
        cfg = parse_config(MINIMAL + "initial_data.generator = zero_fluid+maxwellian_bump\n")
        assert cfg.generator == "zero_fluid+maxwellian_bump"

    def test_rejects_unknown_name(self):
        with pytest.raises(ConfigError, match="unknown generator 'vortex'"):
            parse_config(MINIMAL + "initial_data.generator = vortex\n")

    def test_rejects_repeated_name(self):
        with pytest.raises(ConfigError, match="once each"):
            parse_config(MINIMAL + "initial_data.generator = zero_fluid+zero_fluid\n")

    def test_rejects_two_generators_for_one_half(self):
        with pytest.raises(ConfigError, match="at most one fluid"):
            parse_config(MINIMAL + "initial_data.generator = zero_fluid+taylor_green_fluid\n")


class TestValidateConfig:
    def test_catches_bad_directly_built_config(self):
        cfg = dataclasses.replace(RunConfig(t_end=1.0), n_x=17)
        with pytest.raises(ConfigError, match="grid.n_x"):
            validate_config(cfg)

    def test_catches_non_finite_float(self):
        cfg = dataclasses.replace(RunConfig(t_end=1.0), amplitude=math.inf)
        with pytest.raises(ConfigError, match="initial_data.amplitude"):
            validate_config(cfg)


class TestPicardMapping:
    def test_zero_substep_selects_default(self):
        cfg = parse_config(MINIMAL)
        assert cfg.picard().char_substep is None

    def test_explicit_substep_passes_through(self):
        cfg = parse_config(MINIMAL + "picard.char_substep = 0.005\n")
        assert cfg.picard().char_substep == 0.005

    def test_solver_fields_map_across(self):
        cfg = parse_config(MINIMAL + "time.window = 0.02\npicard.tol = 1e-08\n")
        pc = cfg.picard()
        assert pc.window == 0.02 and pc.tol == 1e-08 and pc.max_iter == cfg.max_iter
