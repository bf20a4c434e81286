import pytest

from foodwatch.logdata import QueryEvent, ResultPage, VisitEvent

FOOD_TAG = "foodborne_illness"


def page(
    url="https://en.wikipedia.org/wiki/Foodborne_illness",
    title="Foodborne illness",
    snippet="symptoms and causes",
    tags=(FOOD_TAG,),
    clicked=True,
    dwell=45.0,
):
    return ResultPage(
        url=url,
        title=title,
        snippet=snippet,
        concept_tags=frozenset(tags),
        clicked=clicked,
        dwell_s=dwell if clicked else 0.0,
    )


def query(user="u1", ts=0, text="food poisoning", results=()):
    return QueryEvent(user_id=user, ts=ts, text=text, results=tuple(results))


def visit(user="u1", restaurant="r1", entry=0, exit_ts=1800):
    return VisitEvent(user_id=user, restaurant_id=restaurant, entry_ts=entry, exit_ts=exit_ts)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """One full default-configuration pipeline run, shared across tests."""
    from foodwatch.config import RunConfig
    from foodwatch.pipeline import run_pipeline

    out = tmp_path_factory.mktemp("default_run")
    manifest = run_pipeline(RunConfig(), out)
    return out, manifest
