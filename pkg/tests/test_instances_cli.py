import csv
import json

import numpy as np
import pytest

from jointcongestion import (
    InfeasibleInstance,
    ParseError,
    ValidationError,
    load_instance,
    paper_shaped_instance,
    random_instance,
    solve_central,
    write_instance,
)
from jointcongestion.cli import main
from jointcongestion.experiments import read_routing, write_routing
from jointcongestion.instances import instance_from_dict


def base():
    return {"schema_version": 1, "m": 1, "n": 2, "lambda": [1.0],
            "mu_access": [[3.0, 3.0]], "mu_node": [2.0, 4.0]}


def dump(tmp_path, data, name="inst.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


# instance files

def test_bundled_instance_rates_from_classes():
    inst = paper_shaped_instance()
    assert (inst.m, inst.n) == (5, 3)
    np.testing.assert_allclose(inst.lam, [0.16, 0.11, 0.07, 0.17, 0.1], rtol=1e-12)
    assert inst.labels["nodes"] == ["SN1", "SN2", "SN3"]


def test_custom_class_table():
    data = base()
    del data["lambda"]
    data["assignment"] = [[1, 2]]
    data["traffic_classes"] = {"1": {"msg_rate": 10, "msg_bytes": 1000},
                               "2": {"msg_rate": 5, "msg_bytes": 2000}}
    assert instance_from_dict(data).lam[0] == pytest.approx(0.02)


def test_infeasible_file(tmp_path):
    data = base()
    data["mu_node"] = [0.4, 0.5]
    with pytest.raises(InfeasibleInstance):
        load_instance(dump(tmp_path, data))


def test_negative_capacity_names_entry(tmp_path):
    data = base()
    data["mu_access"] = [[3.0, -1.0]]
    with pytest.raises(ValidationError, match=r"mu_access\[0\]\[1\]"):
        load_instance(dump(tmp_path, data))


@pytest.mark.parametrize("patch, msg", [
    ({"colour": "red"}, "unknown field"),
    ({"schema_version": 2}, "schema_version"),
    ({"mu_node": [1.0]}, "shape"),
    ({"assignment": [[1]]}, "exactly one"),
])
def test_validation_messages(tmp_path, patch, msg):
    data = base()
    data.update(patch)
    with pytest.raises(ValidationError, match=msg):
        load_instance(dump(tmp_path, data))


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "m": 1,\n  "n": 2,,\n}\n')
    with pytest.raises(ParseError, match=r"bad.json:3:"):
        load_instance(p)


def test_instance_roundtrip(tmp_path, rng):
    inst = random_instance(rng)
    write_instance(inst, tmp_path / "a.json")
    back = load_instance(tmp_path / "a.json")
    np.testing.assert_array_equal(back.lam, inst.lam)
    np.testing.assert_array_equal(back.mu_access, inst.mu_access)
    np.testing.assert_array_equal(back.mu_node, inst.mu_node)
    assert back.eps == inst.eps
    write_instance(paper_shaped_instance(), tmp_path / "b.json")
    assert load_instance(tmp_path / "b.json").origin == paper_shaped_instance().origin


def test_routing_csv_roundtrip(tmp_path, inst53):
    x, _ = solve_central(inst53)
    write_routing(tmp_path / "r.csv", x)
    assert np.array_equal(read_routing(tmp_path / "r.csv"), x)
    assert header(tmp_path / "r.csv") == ["source", "node_1", "node_2", "node_3"]


# CLI

def test_solve_central_outputs(tmp_path, capsys):
    assert main(["solve-central", "--out-dir", str(tmp_path)]) == 0
    assert "F_central" in capsys.readouterr().out
    assert header(tmp_path / "trace_central.csv") == (
        ["iter", "objective", "step_norm", "util_1", "util_2", "util_3",
         "price_1", "price_2", "price_3"] + [f"delay_src_{i}" for i in range(1, 6)]
    )
    assert header(tmp_path / "wardrop_central.csv") == [
        "source", "node", "rate", "marginal_total", "alpha", "used"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "solve-central"
    assert (tmp_path / "summary.txt").exists()


def test_solve_dist_outputs(tmp_path):
    assert main(["solve-dist", "--out-dir", str(tmp_path)]) == 0
    for name in ("routing_dist.csv", "trace_dist.csv", "wardrop_dist.csv"):
        assert (tmp_path / name).exists()


def test_solve_dist_not_converged_exit(tmp_path):
    assert main(["solve-dist", "--max-iters", "3", "--out-dir", str(tmp_path)]) == 2
    assert (tmp_path / "routing_dist.csv").exists()


def test_compare_outputs(tmp_path):
    assert main(["compare", "--out-dir", str(tmp_path)]) == 0
    assert header(tmp_path / "utilization_table.csv") == ["solver", "util_1", "util_2", "util_3"]
    text = (tmp_path / "summary.txt").read_text()
    assert "relative gap" in text and "central_flow" in text and "dist_flow" in text
    with open(tmp_path / "utilization_table.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert [r[0] for r in rows] == ["central_flow", "dist_flow"]
    np.testing.assert_allclose(np.array(rows[0][1:], float), np.array(rows[1][1:], float),
                               atol=1e-3)


def test_check_kkt_exit_codes(tmp_path):
    main(["solve-central", "--out-dir", str(tmp_path)])
    assert main(["check-kkt", "--routing", str(tmp_path / "routing_central.csv"),
                 "--out-dir", str(tmp_path / "k")]) == 0
    bad = tmp_path / "bad.csv"
    x = read_routing(tmp_path / "routing_central.csv")
    x[0] = x[0][::-1]
    write_routing(bad, x)
    assert main(["check-kkt", "--routing", str(bad), "--out-dir", str(tmp_path / "k2")]) == 2


def test_simulate_outputs(tmp_path):
    assert main(["simulate", "--horizon", "2000", "--out-dir", str(tmp_path)]) == 0
    assert header(tmp_path / "sim_timeseries.csv") == ["time", "node", "ewma_util", "queue_len"]
    assert header(tmp_path / "sim_util_summary.csv") == ["node", "util_timeavg", "util_det"]
    assert header(tmp_path / "sim_split_summary.csv") == ["source", "node", "split_emp",
                                                          "split_det"]


def test_oracle_command(tmp_path):
    inst = dump(tmp_path, base())
    assert main(["oracle", "--instance", str(inst), "--out-dir", str(tmp_path / "o")]) == 0
    assert "F_oracle 0.7961447" in (tmp_path / "o" / "summary.txt").read_text()
    assert main(["oracle", "--out-dir", str(tmp_path / "o2")]) == 4


def test_exit_codes_for_bad_input(tmp_path):
    data = base()
    data["mu_node"] = [0.4, 0.5]
    assert main(["solve-central", "--instance", str(dump(tmp_path, data)),
                 "--out-dir", str(tmp_path)]) == 3
    (tmp_path / "broken.json").write_text("{")
    assert main(["solve-central", "--instance", str(tmp_path / "broken.json"),
                 "--out-dir", str(tmp_path)]) == 4
    assert main(["solve-central", "--instance", str(tmp_path / "missing.json"),
                 "--out-dir", str(tmp_path)]) == 4
