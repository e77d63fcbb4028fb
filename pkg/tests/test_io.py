import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import CONFIGS, small_params
from pphpc import io as pio
from pphpc.io import FormatError
from pphpc.sim import ParamError, SimOutput, SimParams, run_simulation

HEADER = "total_prey,total_predators,total_food,mean_energy_prey,mean_energy_predators,mean_c"


def csv_bytes(output):
    buf = io.BytesIO()
    pio.write_output_csv(output, buf)
    return buf.getvalue()


def test_header_is_exact():
    assert pio.HEADER == HEADER


def test_single_row_output():
    out = run_simulation(small_params(iterations=0), 1)
    lines = csv_bytes(out).decode().split("\n")
    assert lines[0] == HEADER
    assert len(lines) == 3 and lines[2] == ""


def test_fixed_precision():
    out = SimOutput(np.array([[2, 0, 5, 4.0, 0.0, 1 / 3]]))
    assert csv_bytes(out).decode().splitlines()[1] == "2,0,5,4.000000,0.000000,0.333333"


def test_round_trip_simulation():
    out = run_simulation(small_params(), 4)
    data = csv_bytes(out)
    back = pio.read_output_csv(io.BytesIO(data), expected_rows=101)
    assert np.array_equal(back.data[:, :3], out.data[:, :3])
    assert np.allclose(back.data, out.data, atol=5e-7)
    assert csv_bytes(back) == data


means = st.integers(0, 10**9).map(lambda k: k / 10**6)


@given(st.lists(st.tuples(st.integers(0, 10**7), st.integers(0, 10**7), st.integers(0, 10**7),
                          means, means, means), min_size=1, max_size=30))
def test_round_trip_property(rows):
    out = SimOutput(np.array(rows, dtype=np.float64))
    back = pio.read_output_csv(csv_bytes(out))
    assert back == out


def test_accepts_text_and_bytes_sources():
    text = HEADER + "\n1,2,3,1.5,2.5,0.5\n"
    assert pio.read_output_csv(text) == pio.read_output_csv(text.encode())


@pytest.mark.parametrize("body,kind", [
    ("total_prey,total_predators,food,mean_energy_prey,mean_energy_predators,mean_c\n1,1,1,1,1,1\n", "header"),
    ("", "header"),
    (HEADER + "\n1,1,1,1.0,1.0\n", "cell"),
    (HEADER + "\n1,1,x,1.0,1.0,1.0\n", "cell"),
    (HEADER + "\n1.5,1,1,1.0,1.0,1.0\n", "cell"),
    (HEADER + "\n1,1,1,nan,1.0,1.0\n", "cell"),
    (HEADER + "\n1,-1,1,1.0,1.0,1.0\n", "domain"),
    (HEADER + "\n", "length"),
])
def test_malformed_csv_is_classified(body, kind):
    with pytest.raises(FormatError) as exc:
        pio.read_output_csv(body)
    assert exc.value.kind == kind


def test_row_count_enforced():
    data = csv_bytes(run_simulation(small_params(iterations=4), 0))
    pio.read_output_csv(data, expected_rows=5)
    with pytest.raises(FormatError) as exc:
        pio.read_output_csv(data, expected_rows=6)
    assert exc.value.kind == "length"


def test_full_length_file():
    rows = "\n".join(["3,2,1,1.000000,2.000000,3.000000"] * 4001)
    out = pio.read_output_csv(HEADER + "\n" + rows + "\n", expected_rows=4001)
    assert len(out) == 4001


def test_writer_is_deterministic():
    out = run_simulation(small_params(), 9)
    assert csv_bytes(out) == csv_bytes(out)


# --- parameter files ---------------------------------------------------------

def test_param_file_round_trip():
    p = small_params()
    text = pio.format_param_file(p)
    assert pio.read_param_file(text) == p
    assert pio.format_param_file(pio.read_param_file(text)) == text


def test_param_file_comments_and_blank_lines():
    text = "# comment\n\n" + pio.format_param_file(small_params())
    assert pio.read_param_file(text) == small_params()


def test_param_file_missing_key():
    text = "".join(ln + "\n" for ln in pio.format_param_file(small_params()).splitlines()
                   if not ln.startswith("cell_food_restart"))
    with pytest.raises(ParamError) as exc:
        pio.read_param_file(text)
    assert exc.value.field == "cell_food_restart"


def test_param_file_duplicate_and_bad_values():
    base = pio.format_param_file(small_params())
    with pytest.raises(ParamError, match="duplicate"):
        pio.read_param_file(base + "grid_x=3\n")
    with pytest.raises(ParamError, match="not an integer"):
        pio.read_param_file(base.replace("grid_x=20", "grid_x=2.5"))
    with pytest.raises(ParamError, match="unknown"):
        pio.read_param_file(base + "speed=3\n")


def test_param_file_percent_bound():
    text = pio.format_param_file(small_params()).replace("prey_repro_prob=10", "prey_repro_prob=101")
    with pytest.raises(ParamError) as exc:
        pio.read_param_file(text)
    assert exc.value.field == "prey_repro_prob"


@pytest.mark.parametrize("name", ["set1", "set2"])
def test_shipped_parameter_sets_parse(name):
    with open(CONFIGS / f"{name}.params", "rb") as fh:
        p = pio.read_param_file(fh)
    assert p.iterations == 4000 and (p.grid_x, p.grid_y) == (100, 100)


# --- results and PC scores ---------------------------------------------------

def test_results_round_trip():
    rows = [pio.ResultRow("gpt", 1, 88, 6, "ok"), pio.ResultRow("x", 2, 288, 3, "timeout, after 30s")]
    buf = io.StringIO()
    pio.write_results_csv(rows, buf)
    assert buf.getvalue().splitlines()[0] == "candidate_id,trial_id,seed,score,reason"
    assert pio.read_results_csv(buf.getvalue()) == rows


def test_results_score_domain():
    with pytest.raises(ValueError):
        pio.write_results_csv([pio.ResultRow("a", 1, 1, 7, "")], io.StringIO())
    with pytest.raises(FormatError):
        pio.read_results_csv("candidate_id,trial_id,seed,score,reason\na,1,1,0,x\n")


def test_pc_score_export():
    rng = np.random.default_rng(0)
    scores = rng.normal(size=(60, 2))
    labels = ["candidate"] * 30 + ["baseline"] * 30
    buf = io.StringIO()
    pio.export_pc_scores(scores, labels, [0.61234, 0.2], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# explained_variance_ratio=0.6123,0.2000"
    assert lines[1] == "group,pc1,pc2"
    assert len(lines) == 62
    assert {ln.split(",")[0] for ln in lines[2:]} == {"candidate", "baseline"}
    back, back_labels, explained = pio.read_pc_scores(buf.getvalue())
    assert np.array_equal(back, scores) and back_labels == labels
