import csv
import json

import pytest

from exclusim.cli import main
from exclusim.errors import SchemaError
from exclusim.runconfig import parse_config

BASE = {
    "schema_version": 1,
    "topology": {"L": 20, "rho": 1},
    "velocity": {"cap": 1, "source": {"type": "constant", "value": 1}},
    "T": 100,
}


def doc(**over):
    d = json.loads(json.dumps(BASE))
    for k, v in over.items():
        d[k] = v
    return d


def errors_of(document, command=None):
    with pytest.raises(SchemaError) as exc:
        parse_config(document, command)
    return dict(exc.value.errors)


class TestParse:
    def test_defaults(self):
        cfg = parse_config(doc(fd={"rho_grid": [0.5, 1, 2]}), "fd-sweep")
        assert cfg.effective_burn_in == 50
        assert cfg.check == "sampled"
        assert cfg.kind.value == "WeakNonneg"
        assert cfg.n_particles == 20

    def test_fractional_count(self):
        errs = errors_of(doc(topology={"L": 10, "rho": 0.35}))
        assert "topology" in errs

    def test_integral_count_within_rounding(self):
        # 0.3 * 10 is 3.0000000000000004 in binary floating point
        assert parse_config(doc(topology={"L": 10, "rho": 0.3})).n_particles == 3

    def test_lattice_radius(self):
        errs = errors_of(doc(topology={"L": 20, "rho": 0.5, "r": 0, "lattice_mode": True}))
        assert "topology.r" in errs

    def test_collects_every_error(self):
        errs = errors_of(doc(topology={"L": 10.5, "rho": 0.3, "r": 0, "lattice_mode": True},
                             burn_in=200, normalization="WeakBothContinuous"))
        assert {"topology", "topology.r", "topology.L", "burn_in", "normalization"} <= set(errs)

    def test_unknown_field(self):
        assert "bogus" in errors_of(doc(bogus=1))

    def test_signed_needs_signed_kind(self):
        v = {"cap": 1, "signed": True, "source": {"type": "periodic", "values": [1, -1]}}
        assert "normalization" in errors_of(doc(velocity=v))

    def test_command_mismatch(self):
        assert "command" in errors_of(doc(command="simulate"), "couple")

    def test_version(self):
        assert "schema_version" in errors_of(doc(schema_version=2))

    def test_json_text(self):
        cfg = parse_config(json.dumps(doc()), "simulate")
        assert cfg.command == "simulate"

    def test_ns_section_required(self):
        assert "ns" in errors_of(doc(), "ns")


def write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def report(out):
    return json.loads((out / "report.json").read_text())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRun:
    def test_fd_sweep_matches_theory(self, tmp_path):
        cfg = write(tmp_path, doc(init={"kind": "uniform"},
                                  fd={"rho_grid": [0.25, 0.5, 1, 2, 4], "init_family": "uniform"}))
        out = tmp_path / "fd"
        assert main(["fd-sweep", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out / "fd.csv")
        assert [float(r["V_measured"]) for r in rows] == [1, 1, 1, 0.5, 0.25]
        assert all(r["V_measured"] == r["V_theory"] for r in rows)
        assert report(out)["passed"]

    def test_no_coupling_fixture(self, tmp_path):
        positions = [10.0 * i for i in range(10)]
        d = doc(topology={"L": 100, "rho": 0.1}, init={"kind": "explicit", "positions": positions},
                couple={"y_init": {"kind": "explicit", "positions": [p + 2 for p in positions]}})
        out = tmp_path / "c"
        assert main(["couple", "--config", write(tmp_path, d), "--out", str(out)]) == 0
        assert {r["pair_count"] for r in read_csv(out / "couple_seed0.csv")} == {"0"}

    def test_tracer_backward(self, tmp_path):
        d = doc(velocity={"cap": 0.5, "source": {"type": "constant", "value": 0.5}},
                init={"kind": "uniform"}, tracer={"direction": "backward"})
        out = tmp_path / "t"
        assert main(["tracer", "--config", write(tmp_path, d), "--out", str(out)]) == 0
        rows = read_csv(out / "tracer_seed0.csv")
        assert rows[0]["V_tr"] == ""
        assert {float(r["V_tr"]) for r in rows[1:]} == {-0.5}

    def test_byte_identical(self, tmp_path):
        cfg = write(tmp_path, doc(init={"kind": "random_admissible"}, seeds=[1, 2]))
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
        for name in ("simulate.csv", "simulate_seed1.csv", "report.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EXCLUSIM_SEED", "9")
        out = tmp_path / "s"
        assert main(["simulate", "--config", write(tmp_path, doc()), "--out", str(out)]) == 0
        assert (out / "simulate_seed9.csv").exists()
        assert not (out / "simulate_seed0.csv").exists()

    def test_check_flag(self, tmp_path):
        out = tmp_path / "e"
        assert main(["simulate", "--config", write(tmp_path, doc()), "--out", str(out),
                     "--check", "every-step"]) == 0
        steps = {c["name"]: c["checked_steps"] for c in report(out)["checks"]}
        assert steps["admissibility"] == 101

    def test_invariant_violation_exit(self, tmp_path):
        from exclusim import cli
        from exclusim.monitors import CheckResult

        orig = cli.HANDLERS["simulate"]
        cli.HANDLERS["simulate"] = lambda *a: [CheckResult("forced", False, -1.0, 1, 1)]
        try:
            out = tmp_path / "v"
            assert main(["simulate", "--config", write(tmp_path, doc()), "--out", str(out)]) == 2
            assert not report(out)["passed"]
        finally:
            cli.HANDLERS["simulate"] = orig

    def test_schema_error_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, doc(topology={"L": 10, "rho": 0.35}))
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == 1
        assert "topology" in capsys.readouterr().err

    def test_usage_errors(self, tmp_path):
        assert main(["simulate"]) == 1
        assert main(["bogus"]) == 1
        assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 1

    def test_verify(self, tmp_path):
        out = tmp_path / "v"
        assert main(["verify", "--out", str(out)]) == 0
        assert len(report(out)["checks"]) >= 7

    @pytest.mark.parametrize("command,extra", [
        ("hysteresis", {"normalization": "StrongNonneg", "hysteresis": {"rho_grid": [1.5], "count": 3}}),
        ("ns", {"topology": {"L": 40, "rho": 0.5}, "ns": {"a": 0.25, "coupled": True}}),
        ("couple", {"velocity": {"cap": 1, "kind": "iid", "source": {"type": "uniform", "low": 0, "high": 1}}}),
        ("simulate", {"topology": {"L": 40, "rho": 0.5, "r": 0.5, "lattice_mode": True},
                      "velocity": {"cap": 2, "source": {"type": "constant", "value": 2}}}),
        ("simulate", {"normalization": "StrongBoth",
                      "velocity": {"cap": 1, "signed": True,
                                   "source": {"type": "periodic", "values": [1, -1]}}}),
    ])
    def test_commands_pass(self, tmp_path, command, extra):
        out = tmp_path / "o"
        assert main([command, "--config", write(tmp_path, doc(**extra)), "--out", str(out)]) == 0
        assert report(out)["passed"]
