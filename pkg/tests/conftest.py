from collections import defaultdict

import pytest

import spde_richardson.settings as settings


@pytest.fixture(autouse=True)
def restore_settings():
    """configure_numerics mutates module globals; reset them per test."""
    saved = {k: v for k, v in vars(settings).items() if k.isupper()}
    yield
    for k, v in saved.items():
        setattr(settings, k, v)


def pytest_collection_modifyitems(items):
    """
    Modifies test items to ensure test modules run in a given order.
    """
    N_items = len(items)
    # The building blocks are tested first; a failure there explains
    # the failures of the studies built on top of them.
    FIRST_MODULES = [
        "tests.test_stencil",
        "tests.test_grid",
        "tests.test_noise",
        "tests.test_integrator",
    ]
    # The slow studies run last.
    LAST_MODULES = ["tests.test_harness", "tests.test_cli"]

    items_mapping = defaultdict(list)
    for item in items:
        items_mapping[item.module.__name__].append(item)

    sorted_items = []
    for modulename in FIRST_MODULES:
        sorted_items += items_mapping.pop(modulename, [])
    last_items = []
    for modulename in LAST_MODULES:
        last_items += items_mapping.pop(modulename, [])
    # all other modules
    for modulename, moduleitems in items_mapping.items():
        sorted_items += moduleitems
    sorted_items += last_items

    items[:] = sorted_items
    assert (
        len(items) == N_items
    ), "Tests dropped out in reordering! This should never happen."
    return items
