"""End-to-end orchestration: simulate, label, train, score, link, aggregate,
release, rank, inspect, evaluate, report.

Each stage has a pure compute function plus a file-backed wrapper, so the
all-in-one ``run`` and the stage-by-stage CLI produce identical artifacts.
A run directory is self-describing: every emitted file is listed in
``manifest.json`` with its checksum, alongside the seed and config hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import date as Date, datetime, timezone
from pathlib import Path

from . import report as report_mod
from .citysim import (
    DAY_S,
    GroundTruth,
    World,
    anonymize_ground_truth,
    cfg_from_json,
    day_to_date,
    generate_world,
    load_ground_truth,
    save_ground_truth,
    simulate,
    simulate_inspection,
    simulate_raters,
    _cfg_to_json,
)
from .config import RunConfig, config_hash
from .errors import DataError, FoodwatchError
from .locmodel import (
    ExposureLink,
    Period,
    ScoredQuery,
    aggregate_restaurants,
    attribute_sources,
    link_exposures,
    rank_restaurants,
)
from .logdata import (
    Dataset,
    DatasetPaths,
    InspectionRecord,
    RiskLevel,
    Trigger,
    load_dataset,
    load_inspections,
    validate_dataset,
    write_dataset,
    write_inspections,
)
from .privacy import PrivacyPolicy, anonymize_ids, cap_contributions, release
from .raters import krippendorff_alpha, majority_labels
from .seeding import derive_seed
from .stats import (
    adjusted_means_linear,
    build_design_matrix,
    chi_square_independence,
    precision_table,
)
from .wsm import (
    LabeledSet,
    Provenance,
    TrainConfig,
    build_eval_sample,
    evaluate_wsm,
    load_model,
    save_model,
    score_query,
    train_wsm,
    weak_label,
)

MANIFEST = "manifest.json"
MODEL_FILE = "model.json"
WORLD_FILE = "world.json"
GROUND_TRUTH_FILE = "ground_truth.json"
VALIDATION_FILE = "validation.json"
SCORED_CSV = "scored_queries.csv"
LINKS_CSV = "links.csv"
FINDER_INSPECTIONS_CSV = "finder_inspections.csv"
ALL_INSPECTIONS_CSV = "inspections_all.csv"
REPORT_TXT = "report.txt"


def dataset_dir(out: Path) -> Path:
    return Path(out) / "dataset"


def private_dir(out: Path) -> Path:
    return Path(out) / "private"


def _stage(name: str):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except FoodwatchError as exc:
                raise type(exc)(f"stage {name}: {exc}") from exc

        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner

    return wrap


# --- world persistence (recipe only: no user ids, no latent dump) -----------


def save_world_recipe(world: World, path: Path) -> None:
    """The (cfg, seed) recipe regenerates the world deterministically, so the
    artifact carries no user identifiers or latent-state dump."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"seed": world.seed, "cfg": _cfg_to_json(world.cfg)}, fh)


def load_world_recipe(path: Path) -> World:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return generate_world(cfg_from_json(payload["cfg"]), int(payload["seed"]))


# --- pure compute steps ------------------------------------------------------


def compute_simulation(config: RunConfig) -> tuple[World, Dataset, GroundTruth]:
    sim_seed = derive_seed(config.seed, "citysim")
    world = generate_world(config.sim, sim_seed)
    dataset, truth = simulate(world, config.days, sim_seed)
    key = config.privacy.hash_key_int()
    return world, anonymize_ids(dataset, key), anonymize_ground_truth(truth, key)


def compute_model(config: RunConfig, dataset: Dataset) -> tuple[LabeledSet, object]:
    labeled = compute_weak_labels(config, dataset)
    hyper = TrainConfig(
        l2=config.wsm.l2,
        batch_size=config.wsm.batch_size,
        epochs=config.wsm.epochs,
        learning_rate=config.wsm.learning_rate,
    )
    model = train_wsm(labeled, hyper, seed=derive_seed(config.seed, "wsm-train"))
    return labeled, model


def truth_label_by_text(dataset: Dataset, truth: GroundTruth) -> dict[str, int]:
    """Ground-truth topical label per query text (consistent by construction)."""
    labels: dict[str, int] = {}
    for event, label in zip(dataset.queries, truth.query_labels):
        labels.setdefault(event.text, int(label))
    return labels


def compute_wsm_evaluation(
    config: RunConfig,
    dataset: Dataset,
    truth: GroundTruth,
    model,
    train_texts: set[str],
) -> dict[str, float]:
    eval_events = build_eval_sample(
        dataset.queries,
        config.wsm.eval_size,
        seed=derive_seed(config.seed, "wsm-eval"),
        exclude_texts=train_texts,
    )
    by_text = truth_label_by_text(dataset, truth)
    truth_labels = [by_text[e.text] for e in eval_events]
    judgments = simulate_raters(
        eval_events, truth_labels, config.sim, seed=derive_seed(config.seed, "raters")
    )
    labels = majority_labels(judgments)
    eval_set = LabeledSet(
        examples=tuple((e, int(l)) for e, l in zip(eval_events, labels)),
        provenance=Provenance.RATER,
    )
    metrics = evaluate_wsm(model, eval_set, threshold=config.wsm.threshold)
    return {
        "roc_auc": metrics.roc_auc,
        "f1": metrics.f1,
        "precision": metrics.precision,
        "recall": metrics.recall,
        "threshold": metrics.threshold,
        "krippendorff_alpha": krippendorff_alpha(judgments),
        "n_eval": len(eval_events),
        "final_train_loss": model.final_loss,
    }


def compute_exposures(
    config: RunConfig, dataset: Dataset, model
) -> tuple[list[ScoredQuery], tuple[ExposureLink, ...]]:
    scored = [
        ScoredQuery(q.user_id, q.ts, score_query(model, q)) for q in dataset.queries
    ]
    links = link_exposures(
        dataset.visits,
        scored,
        window_s=config.locmodel.window_s,
        p_star=config.locmodel.p_star,
    )
    return scored, cap_contributions(links)


@dataclass(frozen=True)
class DailyOutputs:
    released_rows: tuple[tuple, ...]  # released_aggregates.csv rows
    daily_rows: tuple[tuple, ...]  # daily_lists.csv rows (the shortlists)


def compute_daily_lists(
    config: RunConfig,
    dataset: Dataset,
    links: tuple[ExposureLink, ...],
) -> DailyOutputs:
    """Per-day aggregation over a trailing window, privacy release, ranking,
    and per-city shortlist selection with a listing cooldown."""
    registry = dataset.registry()
    policy = PrivacyPolicy(
        epsilon=config.privacy.epsilon,
        suppress_below=config.privacy.suppress_below,
        hash_key=config.privacy.hash_key_int(),
    )
    released_rows: list[tuple] = []
    daily_rows: list[tuple] = []
    last_listed: dict[str, int] = {}
    for day in range(config.days):
        window = Period(
            max(0, (day + 1 - config.locmodel.agg_window_days) * DAY_S),
            (day + 1) * DAY_S,
        )
        aggregates = aggregate_restaurants(dataset.visits, links, window)
        list_date = day_to_date(day + 1).isoformat()  # delivered next morning
        if config.privacy.enabled:
            released = release(aggregates, policy, derive_seed(config.seed, "privacy", day))
            candidates = [r for r in released.values() if not r.suppressed]
            for rid in sorted(released):
                rel = released[rid]
                rec = registry[rid]
                if rel.suppressed:
                    released_rows.append(
                        (list_date, rid, rec.city, rec.risk_level.value, None, None, None, None, True)
                    )
                else:
                    released_rows.append(
                        (
                            list_date,
                            rid,
                            rec.city,
                            rec.risk_level.value,
                            rel.noised_visitors,
                            rel.noised_affected,
                            rel.released_proportion,
                            rel.signal,
                            False,
                        )
                    )
        else:
            candidates = list(aggregates.values())
            for rid in sorted(aggregates):
                agg = aggregates[rid]
                rec = registry[rid]
                released_rows.append(
                    (
                        list_date,
                        rid,
                        rec.city,
                        rec.risk_level.value,
                        agg.visitors,
                        agg.affected,
                        agg.proportion,
                        agg.signal,
                        False,
                    )
                )

        if day < config.cli.warmup_days:  # too little data for confident lists
            continue
        ranked = rank_restaurants(
            candidates,
            min_visitors=config.locmodel.min_visitors,
            cutoff=config.locmodel.cutoff,
        )
        per_city: dict[str, int] = {}
        for agg in ranked:
            rid = agg.restaurant_id
            rec = registry[rid]
            if rid in last_listed and day - last_listed[rid] < config.cli.cooldown_days:
                continue
            if per_city.get(rec.city, 0) >= config.cli.max_daily_inspections:
                continue
            per_city[rec.city] = per_city.get(rec.city, 0) + 1
            last_listed[rid] = day
            proportion = (
                agg.released_proportion if config.privacy.enabled else agg.proportion
            )
            daily_rows.append(
                (
                    list_date,
                    rid,
                    rec.city,
                    rec.risk_level.value,
                    agg.visitors,
                    agg.noised_affected if config.privacy.enabled else agg.affected,
                    proportion,
                    agg.signal,
                )
            )
    return DailyOutputs(released_rows=tuple(released_rows), daily_rows=tuple(daily_rows))


def compute_finder_inspections(
    config: RunConfig, world: World, daily_rows
) -> tuple[InspectionRecord, ...]:
    seed = derive_seed(config.seed, "inspect")
    records = []
    for row in daily_rows:
        when = Date.fromisoformat(row[0])
        records.append(
            simulate_inspection(world, row[1], when, seed, trigger=Trigger.FINDER)
        )
    return tuple(sorted(records, key=lambda r: r.date))


def compute_evaluation_tables(
    config: RunConfig,
    dataset: Dataset,
    all_inspections,
    links: tuple[ExposureLink, ...],
) -> dict[str, list]:
    registry = dataset.registry()
    table = precision_table(all_inspections, registry)
    precision_rows = []
    for row in table.rows:
        fit = row.fit
        precision_rows.append(
            [
                row.comparison,
                row.stratum,
                row.n_finder,
                row.unsafe_finder,
                row.pct_finder * 100,
                row.n_other,
                row.unsafe_other,
                row.pct_other * 100,
                fit.odds_ratio if fit else None,
                fit.ci95[0] if fit else None,
                fit.ci95[1] if fit else None,
                fit.p_value if fit else None,
                fit.converged if fit else None,
                row.fit_note,
            ]
        )

    finder = [i for i in all_inspections if i.trigger == Trigger.FINDER]
    baseline = [i for i in all_inspections if i.trigger != Trigger.FINDER]
    risk_rows = []
    counts = {"finder": [], "baseline": []}
    for level in (RiskLevel.HIGH, RiskLevel.MEDIUM, RiskLevel.LOW):
        nf = sum(1 for i in finder if registry[i.restaurant_id].risk_level == level)
        nb = sum(1 for i in baseline if registry[i.restaurant_id].risk_level == level)
        counts["finder"].append(nf)
        counts["baseline"].append(nb)
    chi_p = None
    try:
        chi_p = chi_square_independence([counts["finder"], counts["baseline"]]).p_value
    except DataError:
        pass
    for i, level in enumerate((RiskLevel.HIGH, RiskLevel.MEDIUM, RiskLevel.LOW)):
        nf, nb = counts["finder"][i], counts["baseline"][i]
        risk_rows.append(
            [
                level.value,
                nf,
                100 * nf / len(finder) if finder else 0.0,
                nb,
                100 * nb / len(baseline) if baseline else 0.0,
                chi_p if i == 0 else None,
            ]
        )

    violation_rows = []
    if finder and baseline:
        pooled = finder + baseline
        X = build_design_matrix(
            group_flags=[1] * len(finder) + [0] * len(baseline),
            cities=[registry[i.restaurant_id].city for i in pooled],
            risks=[registry[i.restaurant_id].risk_level for i in pooled],
        )
        for severity, values in (
            ("critical", [i.critical_count for i in pooled]),
            ("major", [i.major_count for i in pooled]),
        ):
            fit = adjusted_means_linear(X, values)
            violation_rows.append(
                [severity, fit.adjusted_means[1], fit.adjusted_means[0], fit.group_p_value]
            )
    else:
        violation_rows = [["critical", None, None, None], ["major", None, None, None]]

    full_window = Period(0, (config.days + 4) * DAY_S)
    aggregates = aggregate_restaurants(dataset.visits, links, full_window)
    _, histogram = attribute_sources(links, aggregates)
    attribution_rows = [
        [label, frac]
        for label, frac in zip(histogram.BIN_LABELS, histogram.fractions)
    ]
    return {
        "precision": precision_rows,
        "risk_distribution": risk_rows,
        "violations": violation_rows,
        "attribution": attribution_rows,
    }


# --- file-backed stages -------------------------------------------------------


@_stage("simulate")
def stage_simulate(config: RunConfig, out: Path) -> None:
    out = Path(out)
    dataset_dir(out).mkdir(parents=True, exist_ok=True)
    private_dir(out).mkdir(parents=True, exist_ok=True)
    world, dataset, truth = compute_simulation(config)
    write_dataset(dataset, DatasetPaths.in_dir(dataset_dir(out)))
    save_world_recipe(world, private_dir(out) / WORLD_FILE)
    save_ground_truth(truth, private_dir(out) / GROUND_TRUTH_FILE)

    report = validate_dataset(dataset)
    with open(out / VALIDATION_FILE, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "query_count": report.query_count,
                "visit_count": report.visit_count,
                "restaurant_count": report.restaurant_count,
                "inspection_count": report.inspection_count,
                "ts_min": report.ts_min,
                "ts_max": report.ts_max,
                "violations": list(report.violations),
            },
            fh,
        )
    if not report.ok:
        raise DataError(f"dataset has {len(report.violations)} invariant violations")


def _load_dataset(out: Path) -> Dataset:
    return load_dataset(DatasetPaths.in_dir(dataset_dir(Path(out))))


@_stage("train-wsm")
def stage_train(config: RunConfig, out: Path, dataset: Dataset | None = None) -> None:
    out = Path(out)
    dataset = dataset or _load_dataset(out)
    _, model = compute_model(config, dataset)
    save_model(model, out / MODEL_FILE)


@_stage("eval-wsm")
def stage_eval_wsm(
    config: RunConfig,
    out: Path,
    dataset: Dataset | None = None,
    model=None,
) -> None:
    out = Path(out)
    dataset = dataset or _load_dataset(out)
    model = model or load_model(out / MODEL_FILE)
    truth = load_ground_truth(private_dir(out) / GROUND_TRUTH_FILE)
    labeled = compute_weak_labels(config, dataset)
    metrics = compute_wsm_evaluation(config, dataset, truth, model, labeled.texts())
    report_mod.write_csv(
        out / report_mod.METRICS_CSV,
        ["metric", "value"],
        [[k, v] for k, v in metrics.items()],
    )


def compute_weak_labels(config: RunConfig, dataset: Dataset) -> LabeledSet:
    return weak_label(
        dataset.queries,
        dwell_threshold_s=config.wsm.dwell_threshold_s,
        neg_ratio=config.wsm.neg_ratio,
        seed=derive_seed(config.seed, "wsm-weak"),
    )


@_stage("rank")
def stage_rank(
    config: RunConfig,
    out: Path,
    dataset: Dataset | None = None,
    model=None,
) -> tuple:
    out = Path(out)
    dataset = dataset or _load_dataset(out)
    model = model or load_model(out / MODEL_FILE)
    scored, links = compute_exposures(config, dataset, model)
    report_mod.write_csv(
        out / SCORED_CSV,
        ["user_id", "ts", "score"],
        [[s.user_id, s.ts, s.score] for s in scored],
    )
    report_mod.write_csv(
        out / LINKS_CSV,
        ["user_id", "restaurant_id", "visit_exit_ts", "first_positive_query_ts", "recency_rank"],
        [
            [l.user_id, l.restaurant_id, l.visit_exit_ts, l.first_positive_query_ts, l.recency_rank]
            for l in links
        ],
    )
    daily = compute_daily_lists(config, dataset, links)
    report_mod.write_csv(out / report_mod.RELEASED_CSV, report_mod.RELEASED_HEADER, daily.released_rows)
    report_mod.write_csv(out / report_mod.DAILY_LISTS_CSV, report_mod.DAILY_LIST_HEADER, daily.daily_rows)
    return links, daily


def _read_links(out: Path) -> tuple[ExposureLink, ...]:
    _, rows = report_mod.read_csv(Path(out) / LINKS_CSV)
    return tuple(
        ExposureLink(r[0], r[1], int(r[2]), int(r[3]), int(r[4])) for r in rows
    )


@_stage("inspect")
def stage_inspect(config: RunConfig, out: Path, world: World | None = None, daily_rows=None) -> tuple:
    out = Path(out)
    world = world or load_world_recipe(private_dir(out) / WORLD_FILE)
    if daily_rows is None:
        _, rows = report_mod.read_csv(out / report_mod.DAILY_LISTS_CSV)
        daily_rows = rows
    finder = compute_finder_inspections(config, world, daily_rows)
    write_inspections(finder, out / FINDER_INSPECTIONS_CSV)
    background = load_inspections(dataset_dir(out) / "inspections.csv")
    combined = tuple(sorted(background + finder, key=lambda r: r.date))
    write_inspections(combined, out / ALL_INSPECTIONS_CSV)
    return finder, combined


@_stage("evaluate")
def stage_evaluate(
    config: RunConfig,
    out: Path,
    dataset: Dataset | None = None,
    all_inspections=None,
    links=None,
) -> None:
    out = Path(out)
    dataset = dataset or _load_dataset(out)
    if all_inspections is None:
        all_inspections = load_inspections(out / ALL_INSPECTIONS_CSV)
    if links is None:
        links = _read_links(out)
    tables = compute_evaluation_tables(config, dataset, all_inspections, links)
    report_mod.write_csv(
        out / report_mod.PRECISION_CSV,
        [
            "comparison",
            "stratum",
            "n_finder",
            "unsafe_finder",
            "pct_finder",
            "n_other",
            "unsafe_other",
            "pct_other",
            "odds_ratio",
            "ci_low",
            "ci_high",
            "p_value",
            "converged",
            "note",
        ],
        tables["precision"],
    )
    report_mod.write_csv(
        out / report_mod.RISK_DISTRIBUTION_CSV,
        ["risk_level", "finder_n", "finder_pct", "baseline_n", "baseline_pct", "chi2_p"],
        tables["risk_distribution"],
    )
    report_mod.write_csv(
        out / report_mod.VIOLATIONS_CSV,
        ["severity", "finder_adjusted_mean", "baseline_adjusted_mean", "p_value"],
        tables["violations"],
    )
    report_mod.write_csv(
        out / report_mod.ATTRIBUTION_CSV, ["rank", "fraction"], tables["attribution"]
    )


@_stage("report")
def stage_report(config: RunConfig, out: Path) -> str:
    out = Path(out)
    text = report_mod.render_report(out)
    with open(out / REPORT_TXT, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def _hash_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(config: RunConfig, out: Path) -> dict:
    out = Path(out)
    files = {}
    for path in sorted(out.rglob("*")):
        if path.is_file() and path.name != MANIFEST:
            files[str(path.relative_to(out))] = _hash_file(path)
    manifest = {
        "seed": config.seed,
        "config_hash": config_hash(config),
        "created_at": datetime.now(timezone.utc).isoformat(),
        "files": files,
    }
    with open(out / MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def run_pipeline(config: RunConfig, out: Path) -> dict:
    """All stages in order against one artifact directory; returns the manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stage_simulate(config, out)
    dataset = _load_dataset(out)  # loaded once, shared by the remaining stages
    _, model = compute_model(config, dataset)
    save_model(model, out / MODEL_FILE)
    stage_eval_wsm(config, out, dataset=dataset, model=model)
    links, daily = stage_rank(config, out, dataset=dataset, model=model)
    world = load_world_recipe(private_dir(out) / WORLD_FILE)
    _, combined = stage_inspect(config, out, world=world, daily_rows=daily.daily_rows)
    stage_evaluate(config, out, dataset=dataset, all_inspections=combined, links=links)
    stage_report(config, out)
    return write_manifest(config, out)
