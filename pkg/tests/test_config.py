import pytest

from remote_track.config import ConfigError, ExperimentSpec, parse_config, parse_config_text
from remote_track.policies import Policy

MINIMAL = """\
n_states = 2
p = 0.1
p_s = 0.5
policy = randomized_stationary
p_sample = 0.5
"""


def test_minimal_config_round_trips(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(MINIMAL)
    spec = parse_config(path)
    assert spec.n_states == [2] and spec.p == [0.1] and spec.p_s == [0.5]
    assert spec.policy == [Policy.RANDOMIZED_STATIONARY] and spec.p_sample == [0.5]
    assert parse_config_text(spec.to_text()) == spec


def test_comments_and_lists():
    spec = parse_config_text("# header\np = 0.1, 0.3  # two values\np_s = 0.9\npolicy = sa, ca\n")
    assert spec.p == [0.1, 0.3]
    assert spec.policy == [Policy.SEMANTICS_AWARE, Policy.CHANGE_AWARE]
    assert len(list(spec.points())) == 4


def test_cost_matrix_diagonal_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config_text("n_states = 2\ncost_matrix = 1, 2, 3, 0\n")
    assert err.value.line == 2


def test_cost_matrix_parsed_row_major():
    spec = parse_config_text("n_states = 2\ncost_matrix = 0, 5, 1, 0\n")
    assert spec.costs_for(2).costs.tolist() == [[0, 5], [1, 0]]


def test_gamma_and_direct_p_s_are_exclusive():
    with pytest.raises(ConfigError) as err:
        parse_config_text("p_s = 0.5\ngamma_db = 0\n")
    assert err.value.line == 2


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as err:
        parse_config_text("p = 0.1\n\nfoo = 3\n")
    assert err.value.line == 3
    assert "foo" in str(err.value)


@pytest.mark.parametrize(
    "text, line",
    [
        ("n_states = two\n", 1),
        ("p = 0.1\nn_states = 2.5\n", 2),
        ("p = 1.5\n", 1),
        ("seed = 1\nhorizon = 0\n", 2),
        ("policy = greedy\n", 1),
        ("just a line\n", 1),
        ("p = 0.1\np = 0.2\n", 2),
        ("gamma_db = 0\npathloss_exp = 2\n", 2),
        ("tx_power_dbm = 0\n", 1),
    ],
)
def test_type_and_constraint_errors(text, line):
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert err.value.line == line


def test_gamma_db_converted_to_linear():
    spec = parse_config_text("gamma_db = 0, 10\n")
    channels = [spec.channel(g) for g in spec.gamma_db]
    assert [round(c.p_s, 3) for c in channels] == [0.922, 0.445]
    assert channels[1].snr_threshold == pytest.approx(10.0)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.cfg")


def test_spec_defaults():
    spec = ExperimentSpec()
    assert spec.p_s == [1.0] and spec.gamma_db is None
    with pytest.raises(ConfigError):
        ExperimentSpec(p_s=[0.5], gamma_db=[0.0])
