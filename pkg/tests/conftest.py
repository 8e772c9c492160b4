import pytest

from properscore.index import load_rule

TABLE_RULES = ("log", "quad", "sph", "hs", "opt:1", "opt:2", "opt:4", "opt:inf")
BUILTINS = ("log", "quad", "sph", "hs")


@pytest.fixture(scope="session")
def normalized():
    cache = {}

    def get(spec):
        if spec not in cache:
            cache[spec] = load_rule(spec)
        return cache[spec]

    return get
