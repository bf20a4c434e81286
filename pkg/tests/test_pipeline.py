import hashlib
import json

import pytest

from foodwatch import report as report_mod
from foodwatch.cli import main as cli_main
from foodwatch.config import RunConfig, apply_overrides
from foodwatch.pipeline import (
    ALL_INSPECTIONS_CSV,
    MANIFEST,
    load_world_recipe,
    private_dir,
    run_pipeline,
)

SMALL = [
    "days=8",
    "sim.n_users=700",
    "sim.cities=A:60,B:60",
    "wsm.eval_size=60",
    "wsm.epochs=30",
    "cli.warmup_days=4",
]


def small_config(seed=5, extra=()):
    return apply_overrides(RunConfig(seed=seed), SMALL + list(extra))


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small_run")
    manifest = run_pipeline(small_config(), out)
    return out, manifest


def test_all_artifacts_present_and_listed(small_run):
    out, manifest = small_run
    expected = {
        "dataset/queries.jsonl",
        "dataset/visits.csv",
        "dataset/restaurants.csv",
        "dataset/inspections.csv",
        "private/world.json",
        "private/ground_truth.json",
        "validation.json",
        "model.json",
        "wsm_metrics.csv",
        "scored_queries.csv",
        "links.csv",
        "released_aggregates.csv",
        "daily_lists.csv",
        "finder_inspections.csv",
        "inspections_all.csv",
        "precision.csv",
        "risk_distribution.csv",
        "violations.csv",
        "attribution.csv",
        "report.txt",
    }
    assert set(manifest["files"]) == expected
    on_disk = {
        str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != MANIFEST
    }
    assert on_disk == expected  # no orphan outputs


def test_manifest_checksums_match_recomputed_hashes(small_run):
    out, manifest = small_run
    for rel, digest in manifest["files"].items():
        recomputed = hashlib.sha256((out / rel).read_bytes()).hexdigest()
        assert recomputed == digest, rel


def test_daily_list_header_is_the_documented_interface(small_run):
    out, _ = small_run
    header, rows = report_mod.read_csv(out / report_mod.DAILY_LISTS_CSV)
    assert header == [
        "date", "restaurant_id", "city", "risk_level",
        "visitors", "affected", "proportion", "signal",
    ]
    released_header, released_rows = report_mod.read_csv(out / report_mod.RELEASED_CSV)
    assert released_header == header + ["suppressed"]
    assert all(r[-1] in ("True", "False") for r in released_rows)


def test_report_csvs_round_trip_exactly(small_run):
    out, _ = small_run
    _, rows = report_mod.read_csv(out / report_mod.METRICS_CSV)
    metrics = {r[0]: r[1] for r in rows}
    assert float(metrics["roc_auc"]) == float(repr(float(metrics["roc_auc"])))
    # the text report is a pure function of the CSVs
    first = report_mod.render_report(out)
    second = report_mod.render_report(out)
    assert first == second
    assert (out / "report.txt").read_text() == first


def test_precision_rows_conserve_inspection_counts(small_run):
    out, _ = small_run
    _, rows = report_mod.read_csv(out / report_mod.PRECISION_CSV)
    from foodwatch.logdata import load_inspections

    total = len(load_inspections(out / ALL_INSPECTIONS_CSV))
    overall = next(
        r for r in rows if r[0] == "FINDER_vs_BASELINE" and r[1] == "overall"
    )
    assert int(overall[2]) + int(overall[5]) == total


def test_world_recipe_regenerates_world(small_run):
    out, _ = small_run
    world = load_world_recipe(private_dir(out) / "world.json")
    assert len(world.restaurants) == 120
    payload = json.loads((private_dir(out) / "world.json").read_text())
    assert set(payload) == {"seed", "cfg"}  # no users, no latent dump


def test_stage_commands_reproduce_run_artifacts(tmp_path, small_run):
    run_out, _ = small_run
    out = tmp_path / "staged"
    args = ["--out", str(out), "--seed", "5"] + [f"--set={kv}" for kv in SMALL]
    for command in ("simulate", "train-wsm", "eval-wsm", "rank", "inspect", "evaluate", "report"):
        assert cli_main([command] + args) == 0, command
    for rel in (
        "dataset/queries.jsonl",
        "model.json",
        "wsm_metrics.csv",
        "links.csv",
        "daily_lists.csv",
        "inspections_all.csv",
        "precision.csv",
        "report.txt",
    ):
        assert (out / rel).read_bytes() == (run_out / rel).read_bytes(), rel


def test_zero_infection_run_degrades_gracefully(tmp_path):
    config = small_config(
        seed=9,
        extra=[
            "sim.p_infect_unsafe=0",
            "sim.p_infect_safe=0",
            "sim.p_frivolous_complaint=0",
            # ambiguous-research noise alone must not clear the cutoff
            "locmodel.cutoff=0.35",
        ],
    )
    out = tmp_path / "zero"
    run_pipeline(config, out)
    _, rows = report_mod.read_csv(out / report_mod.PRECISION_CSV)
    overall = next(r for r in rows if r[0] == "FINDER_vs_BASELINE" and r[1] == "overall")
    assert int(overall[2]) == 0  # no FINDER inspections
    text = (out / "report.txt").read_text()
    assert "Unsafe-detection precision" in text
