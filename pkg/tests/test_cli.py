"""End-to-end CLI runs in subprocesses: files written, tables printed,
deliberate failures mapped to their exit codes."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from schemaground.dsl import render_schema
from schemaground.extraction import load_canonical_schema
from schemaground.toydata import TOY_BINDINGS, TOY_SEQUENTIAL_DRIFT

LADDER = {
    "baseline": 1 / 12,
    "schema_only": 2 / 12,
    "grounding_sequential": 9 / 12,
    "grounding_hierarchical": 1.0,
    "full_dsg": 1.0,
}


def run_cli(*argv, cwd):
    return subprocess.run(
        [sys.executable, "-m", "schemaground.cli", *map(str, argv)],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def _backend_args(toy, tmp_path):
    return (
        "--backend-config", toy.backend_config_path,
        "--cache-dir", tmp_path / "cache",
    )


# ------------------------------------------------------------------ extract


def test_extract_canonical_matches_packaged_fixture(tmp_path):
    out = tmp_path / "tic-tac-toe.schema"
    result = run_cli("extract", "tic-tac-toe", "--canonical", "--out", out, cwd=tmp_path)
    assert result.returncode == 0, result.stderr
    assert f"wrote {out}" in result.stdout
    assert out.read_text() == render_schema(load_canonical_schema("tic-tac-toe"))


def test_extract_unknown_concept_exit_code(tmp_path):
    result = run_cli("extract", "warp-drive", "--canonical", cwd=tmp_path)
    assert result.returncode == 31
    assert "UnknownConceptError" in result.stderr


def test_extract_via_scripted_backend(toy, tmp_path):
    out = tmp_path / "maze.schema"
    result = run_cli(
        "extract", "maze", "--out", out, *_backend_args(toy, tmp_path), cwd=tmp_path
    )
    assert result.returncode == 0, result.stderr
    assert out.read_text() == render_schema(load_canonical_schema("maze"))


def test_extract_without_backend_or_canonical(tmp_path):
    result = run_cli("extract", "maze", cwd=tmp_path)
    assert result.returncode == 23
    assert "BackendConfigError" in result.stderr


# ------------------------------------------------------------------- ground


@pytest.fixture()
def maze_schema_file(tmp_path):
    path = tmp_path / "maze.schema"
    path.write_text(render_schema(load_canonical_schema("maze")))
    return path


def test_ground_hierarchical_writes_bindings(toy, tmp_path, maze_schema_file):
    out = tmp_path / "resolved.json"
    result = run_cli(
        "ground",
        "--schema", maze_schema_file,
        "--image", toy.image_paths["maze"],
        "--out", out,
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    assert f"wrote {out} (3 bindings)" in result.stdout
    payload = json.loads(out.read_text())
    descriptions = {entry["component"]: entry["description"] for entry in payload["bindings"]}
    assert descriptions == TOY_BINDINGS["maze"]
    assert len(payload["transcript"]) == 6


def test_ground_sequential_diverges_on_dependent_component(toy, tmp_path, maze_schema_file):
    out = tmp_path / "resolved-seq.json"
    result = run_cli(
        "ground",
        "--schema", maze_schema_file,
        "--image", toy.image_paths["maze"],
        "--sequential",
        "--out", out,
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    payload = json.loads(out.read_text())
    descriptions = {entry["component"]: entry["description"] for entry in payload["bindings"]}
    assert descriptions["entry-exit"] == TOY_SEQUENTIAL_DRIFT[("maze", "entry-exit")]
    queries = [turn["text"] for turn in payload["transcript"] if turn["role"] == "user"]
    assert all(", and the" not in query for query in queries)


def test_ground_missing_image(toy, tmp_path, maze_schema_file):
    result = run_cli(
        "ground",
        "--schema", maze_schema_file,
        "--image", tmp_path / "absent.png",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 51
    assert "MissingImageError" in result.stderr


# ------------------------------------------------------------------- answer


def test_answer_writes_predictions(toy, tmp_path):
    result = run_cli(
        "answer",
        "--manifest", toy.manifest_path,
        "--mode", "baseline",
        "--out", tmp_path / "out",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    path = tmp_path / "out" / "baseline.predictions.jsonl"
    lines = path.read_text().splitlines()
    assert len(lines) == 12
    ids = [json.loads(line)["instance_id"] for line in lines]
    assert ids == sorted(ids)


# ----------------------------------------------------------------- evaluate


def test_evaluate_two_modes_prints_two_row_tables(toy, tmp_path):
    result = run_cli(
        "evaluate",
        "--manifest", toy.manifest_path,
        "--mode", "baseline",
        "--mode", "full_dsg",
        "--out", tmp_path / "out",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    tables = result.stdout.split("\n\n")
    assert len(tables) >= 2
    for table in tables[:2]:
        lines = table.splitlines()
        assert lines[0].startswith("mode")
        assert lines[2].startswith("baseline")
        assert lines[3].startswith("full_dsg")
    assert "0.083 ± 0.000" in result.stdout
    assert "1.000 ± 0.000" in result.stdout
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert sorted(summary["modes"]) == ["baseline", "full_dsg"]
    assert summary["metric"] == "exact_match"
    for mode in ("baseline", "full_dsg"):
        assert (tmp_path / "out" / f"{mode}.predictions.jsonl").is_file()
        assert (tmp_path / "out" / f"{mode}.report.json").is_file()


def test_evaluate_multi_run_is_deterministic(toy, tmp_path):
    result = run_cli(
        "evaluate",
        "--manifest", toy.manifest_path,
        "--mode", "grounding_hierarchical",
        "--runs", "2",
        "--out", tmp_path / "out",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    report = json.loads(
        (tmp_path / "out" / "grounding_hierarchical.report.json").read_text()
    )
    assert report["runs"] == 2
    assert report["overall"]["per_run"] == [1.0, 1.0]
    assert report["overall"]["std"] == 0.0


def test_evaluate_graded_metric(toy, tmp_path):
    result = run_cli(
        "evaluate",
        "--manifest", toy.manifest_path,
        "--mode", "grounding_hierarchical",
        "--metric", "graded",
        "--out", tmp_path / "out",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    report = json.loads(
        (tmp_path / "out" / "grounding_hierarchical.report.json").read_text()
    )
    assert report["metric"] == "graded"
    assert report["overall"]["mean"] == pytest.approx(0.85, abs=1e-9)


def test_evaluate_human_row(toy, tmp_path):
    result = run_cli(
        "evaluate",
        "--manifest", toy.manifest_path,
        "--mode", "baseline",
        "--human-row",
        "--out", tmp_path / "out",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    report = json.loads((tmp_path / "out" / "baseline.report.json").read_text())
    assert report["human"] is not None
    assert len(report["human"]["per_run"]) == 5


def test_answer_free_response_flag(toy, tmp_path):
    result = run_cli(
        "answer",
        "--manifest", toy.manifest_path,
        "--mode", "baseline",
        "--free-response",
        "--out", tmp_path / "out",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    lines = (tmp_path / "out" / "baseline.predictions.jsonl").read_text().splitlines()
    normalized = [json.loads(line)["normalized"] for line in lines]
    assert "<no-match>" not in normalized


# ------------------------------------------------------------------- ablate


def test_ablate_covers_all_five_modes(toy, tmp_path):
    result = run_cli(
        "ablate",
        "--manifest", toy.manifest_path,
        "--out", tmp_path / "out",
        *_backend_args(toy, tmp_path),
        cwd=tmp_path,
    )
    assert result.returncode == 0, result.stderr
    means = {}
    for mode, expected in LADDER.items():
        report = json.loads((tmp_path / "out" / f"{mode}.report.json").read_text())
        means[mode] = report["overall"]["mean"]
        assert means[mode] == pytest.approx(expected, abs=1e-9), mode
    ordered = [means[mode] for mode in LADDER]
    assert ordered == sorted(ordered)
    first_table = result.stdout.split("\n\n")[0].splitlines()
    assert [line.split()[0] for line in first_table[2:]] == list(LADDER)


# --------------------------------------------------------------- exit codes


def test_bad_backend_config_exit_code(toy, tmp_path):
    config = tmp_path / "backend.json"
    config.write_text(json.dumps({"backend_id": "b", "kind": "smoke-signals", "model_id": "m"}))
    result = run_cli(
        "evaluate",
        "--manifest", toy.manifest_path,
        "--backend-config", config,
        "--out", tmp_path / "out",
        cwd=tmp_path,
    )
    assert result.returncode == 23
    assert "BackendConfigError" in result.stderr


def test_invalid_manifest_exit_code(toy, tmp_path):
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"subset": True, "instances": [{"id": "x"}]}))
    result = run_cli(
        "evaluate",
        "--manifest", manifest,
        *_backend_args(toy, tmp_path),
        "--out", tmp_path / "out",
        cwd=tmp_path,
    )
    assert result.returncode == 50
    assert "ManifestInvalidError" in result.stderr


def test_fixture_miss_exit_code(toy, tmp_path):
    rules = tmp_path / "rules.json"
    rules.write_text("[]")
    config = tmp_path / "backend.json"
    config.write_text(
        json.dumps(
            {"backend_id": "b", "kind": "scripted", "model_id": "m", "fixture_path": "rules.json"}
        )
    )
    result = run_cli(
        "evaluate",
        "--manifest", toy.manifest_path,
        "--mode", "baseline",
        "--backend-config", config,
        "--out", tmp_path / "out",
        cwd=tmp_path,
    )
    assert result.returncode == 21
    assert "FixtureMissError" in result.stderr


def test_usage_errors_exit_two(tmp_path):
    assert run_cli(cwd=tmp_path).returncode == 2
    assert run_cli("evaporate", cwd=tmp_path).returncode == 2
    assert run_cli("evaluate", "--manifest", "m.json", "--mode", "psychic",
                   "--backend-config", "b.json", cwd=tmp_path).returncode == 2
