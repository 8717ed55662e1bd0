import pytest

from emexplain import (
    BaselineMatcher,
    Record,
    RecordPair,
    generate_benchmark,
    train_baseline_matcher,
)


@pytest.fixture(scope="session")
def beer_dataset():
    return generate_benchmark("beer")


@pytest.fixture(scope="session")
def fz_dataset():
    return generate_benchmark("fodors-zagats")


@pytest.fixture(scope="session")
def beer_matcher(beer_dataset):
    return BaselineMatcher(train_baseline_matcher(beer_dataset, seed=7))


@pytest.fixture(scope="session")
def fz_matcher(fz_dataset):
    return BaselineMatcher(train_baseline_matcher(fz_dataset, seed=7))


@pytest.fixture
def product_pair():
    a = Record(
        (
            ("title", "belkin shield micra for ipod touch tint"),
            ("brand", "belkin"),
            ("modelno", "f8z646ttc01"),
            ("price", 47.88),
        )
    )
    b = Record(
        (
            ("title", "belkin ipod touch shield micra tint royal purple"),
            ("brand", "belkin"),
            ("modelno", "f8z646ttc02"),
            ("price", 12.49),
        )
    )
    return RecordPair(a, b, "toy-0")


class TokenOverlapMatcher:
    """Deterministic toy matcher: whole-record token Jaccard, sharpened."""

    def __init__(self, threshold: float = 0.5, power: float = 1.0):
        self.threshold = threshold
        self.power = power
        self.batch_size = 512

    def predict_batch(self, pairs):
        out = []
        for p in pairs:
            ta = {t for _, v in p.a.attributes for t in self._toks(v)}
            tb = {t for _, v in p.b.attributes for t in self._toks(v)}
            union = ta | tb
            j = len(ta & tb) / len(union) if union else 1.0
            out.append(j**self.power)
        return out

    @staticmethod
    def _toks(v):
        from emexplain.data import tokens_of

        return tokens_of(v)


@pytest.fixture
def overlap_matcher():
    return TokenOverlapMatcher()
