import json

import pytest
import yaml
from bs4 import BeautifulSoup

import main
from mcrt.errors import ResourceError
from mcrt.graph import generate_map
from mcrt.io import read_graph_csv, read_json, read_path_csv


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "config.yaml"
    data = {
        "epsilon": 2.0**-6,
        "horizon": 1.0,
        "seed": 3,
        "trials": 50,
        "out": str(tmp_path / "output"),
        "log_path": str(tmp_path / "logs" / "mcrt.log"),
        "formats": ["csv", "json"],
    }
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def _error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


def test_build_writes_graph_and_summary(tmp_path, config):
    target = tmp_path / "m.csv"
    assert main.run(["build", "--config", config, "--out", str(target)]) == 0
    assert target.read_text(encoding="utf-8").splitlines()[0] == "i,j,side,is_boundary_i,is_boundary_j"
    graph = read_graph_csv(str(target))
    expected = generate_map(2.0**0.5, 2.0**-6, 1.0, seed=3).graph
    assert graph.same_edges(expected)
    meta = read_json(str(tmp_path / "m.json"))
    assert meta["summary"]["N"] == 64
    assert meta["seed"] == 3
    assert len(meta["input_hash"]) == 64


def test_build_is_byte_identical(tmp_path, config):
    outputs = []
    for name in ("a", "b"):
        target = tmp_path / name / "m.csv"
        assert main.run(["build", "--config", config, "--seed", "11", "--out", str(target)]) == 0
        outputs.append([(tmp_path / name / f).read_bytes() for f in ("m.csv", "m.json")])
    assert outputs[0] == outputs[1]


def test_flags_override_config(tmp_path, config):
    target = tmp_path / "m.csv"
    assert main.run(["build", "--config", config, "--seed", "7", "--epsilon", "0.03125", "--out", str(target)]) == 0
    meta = read_json(str(tmp_path / "m.json"))
    assert meta["seed"] == 7
    assert meta["summary"]["N"] == 32
    assert meta["parameters"]["mesh"] == 0.03125 / 64


def test_sample_then_build_from_path(tmp_path, config):
    path_file = tmp_path / "p.csv"
    assert main.run(["sample", "--config", config, "--mesh", str(2.0**-12), "--out", str(path_file)]) == 0
    assert read_path_csv(str(path_file)).count == 4097
    assert read_json(str(tmp_path / "p.json"))["samples"] == 4097
    target = tmp_path / "g.csv"
    assert main.run(["build", "--config", config, "--path", str(path_file), "--out", str(target)]) == 0
    assert read_json(str(tmp_path / "g.json"))["summary"]["N"] == 64


def test_sample_lattice_npz(tmp_path, config):
    target = tmp_path / "w.npz"
    assert main.run(["sample", "--config", config, "--kind", "lattice", "--steps", "100", "--out", str(target)]) == 0
    assert target.exists()


def test_solve(tmp_path, config):
    target = tmp_path / "s.csv"
    assert main.run(["solve", "--config", config, "--function", "radial-log", "--out", str(target)]) == 0
    meta = read_json(str(tmp_path / "s.json"))
    assert meta["function"] == "radial-log"
    assert meta["energy"] > 0
    assert meta["ratio"] == pytest.approx(meta["energy"] / meta["continuum_energy"])
    assert meta["maximum_principle"] is True
    assert target.read_text(encoding="utf-8").splitlines()[0] == "vertex,value,boundary"


def test_embed_with_svg(tmp_path, config):
    target, svg = tmp_path / "e.csv", tmp_path / "e.svg"
    assert main.run(["embed", "--config", config, "--out", str(target), "--svg", str(svg)]) == 0
    meta = read_json(str(tmp_path / "e.json"))
    assert meta["crossings"] == 0
    assert meta["max_edge_length"] <= 2.0
    graph = generate_map(2.0**0.5, 2.0**-6, 1.0, seed=3).graph
    soup = BeautifulSoup(svg.read_text(encoding="utf-8"), "html.parser")
    assert len(soup.find_all("line", class_="edge")) == graph.edge_count


def test_walk(tmp_path, config):
    target = tmp_path / "w.csv"
    assert main.run(["walk", "--config", config, "--trials", "30", "--out", str(target)]) == 0
    assert len(target.read_text(encoding="utf-8").splitlines()) == 31
    meta = read_json(str(tmp_path / "w.json"))
    assert meta["estimate"]["trials"] == 30
    assert meta["exact_exit_time"] >= 1.0


def test_experiment_report_and_plot(tmp_path, config):
    out = tmp_path / "reports"
    argv = ["experiment", "spectral-dimension", "--config", config, "--cells", "512", "--n-max", "40"]
    argv += ["--out", str(out), "--format", "json", "--format", "csv", "--format", "svg"]
    assert main.run(argv) == 0
    report = read_json(str(out / "spectral-dimension.json"))
    assert report["name"] == "spectral-dimension"
    assert "runtime" not in report
    assert (out / "spectral-dimension.csv").exists()
    assert (out / "spectral-dimension.svg").exists()


def test_experiment_gamma_grid(tmp_path, config):
    out = tmp_path / "grid"
    argv = ["experiment", "mesh-refinement", "--config", config, "--gamma-grid", "--kind", "lattice"]
    argv += ["--epsilon", "2", "--horizon", "64", "--factors", "1,2", "--trials", "1", "--out", str(out)]
    assert main.run(argv) == 0
    reports = sorted(p.name for p in out.glob("*.json"))
    assert len(reports) == 3
    assert all(name.startswith("mesh-refinement_gamma") for name in reports)


def test_usage_error(capsys):
    assert main.run(["frobnicate"]) == main.EXIT_USAGE
    assert _error(capsys)["error"] == "usage_error"


def test_domain_error(capsys, config):
    assert main.run(["build", "--config", config, "--gamma", "3"]) == main.EXIT_DOMAIN
    record = _error(capsys)
    assert record["error"] == "domain_error"
    assert record["command"] == "build"


def test_unknown_experiment(capsys, config):
    assert main.run(["experiment", "nope", "--config", config]) == main.EXIT_DOMAIN
    assert _error(capsys)["command"] == "experiment"


def test_missing_config(capsys, tmp_path):
    assert main.run(["build", "--config", str(tmp_path / "missing.yaml")]) == main.EXIT_DOMAIN


def test_resource_error(capsys, config, monkeypatch):
    def too_big(cfg, args):
        raise ResourceError("太大")

    monkeypatch.setitem(main.COMMANDS, "build", too_big)
    assert main.run(["build", "--config", config]) == main.EXIT_RESOURCE
    assert _error(capsys)["error"] == "resource_error"


def test_run_config_validation():
    cfg = main.RunConfig.from_sources({"seed": 4, "unknown": 1}, {"seed": None, "trials": 9})
    assert cfg.seed == 4 and cfg.trials == 9
    assert cfg.effective_mesh == cfg.epsilon / 64
    cfg.formats = ["pdf"]
    with pytest.raises(Exception):
        cfg.validate()


def test_common_flags_before_subcommand(tmp_path, config):
    target = tmp_path / "before" / "m.csv"
    assert main.run(["--seed", "7", "--out", str(target), "build", "--config", config]) == 0
    meta = read_json(str(tmp_path / "before" / "m.json"))
    assert meta["seed"] == 7
    target = tmp_path / "after" / "m.csv"
    assert main.run(["--seed", "7", "build", "--config", config, "--seed", "9", "--out", str(target)]) == 0
    assert read_json(str(tmp_path / "after" / "m.json"))["seed"] == 9


def test_config_before_subcommand(tmp_path, config):
    target = tmp_path / "m.csv"
    assert main.run(["--config", config, "build", "--out", str(target)]) == 0
    assert read_json(str(tmp_path / "m.json"))["summary"]["N"] == 64


@pytest.mark.parametrize(
    "argv",
    [
        ["build", "--mesh", "0.003"],
        ["walk", "--min-cell-samples", "128"],
        ["sample", "--mesh", "0.3"],
    ],
)
def test_grid_rejected_before_sampling(tmp_path, capsys, config, monkeypatch, argv):
    def must_not_run(cfg, args):
        raise AssertionError("不应开始计算")

    monkeypatch.setitem(main.COMMANDS, argv[0], must_not_run)
    out = tmp_path / "never.csv"
    assert main.run(argv + ["--config", config, "--out", str(out)]) == main.EXIT_DOMAIN
    assert _error(capsys)["error"] == "domain_error"
    assert not out.exists()


def test_early_error_writes_only_the_record(capsys, config):
    assert main.run(["build", "--config", config, "--gamma", "3"]) == main.EXIT_DOMAIN
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    assert len(lines) == 1
    assert json.loads(lines[0])["error"] == "domain_error"
