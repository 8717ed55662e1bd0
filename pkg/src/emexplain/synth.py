"""Deterministic synthetic benchmark datasets in the standard directory layout.

Used for demos, tests, and the acceptance suite when the original public
benchmark directories are not on disk. Candidate/match counts mirror the
well-known Beer and Fodors-Zagats benchmarks.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .data import Dataset, Record, save_benchmark_dataset

BEER_WORDS = {
    "adjective": [
        "amber", "golden", "dark", "hazy", "imperial", "rustic", "smoked", "wild",
        "crisp", "velvet", "noble", "frosted", "copper", "midnight", "summer",
    ],
    "noun": [
        "porter", "saison", "lager", "stout", "pilsner", "dubbel", "kolsch",
        "tripel", "bock", "gose", "altbier", "dunkel", "helles", "witbier",
    ],
    "factory": [
        "ridgeline", "harbor", "stonegate", "bluepine", "foxtail", "ironwood",
        "cascadia", "millrace", "anchorline", "thornfield", "lanternhill",
        "coppervale", "northfork", "saltmarsh",
    ],
    "suffix": ["brewing", "brewery", "brewhouse", "beerworks", "ales"],
    "style": [
        "american ipa", "english porter", "belgian tripel", "czech pilsner",
        "german hefeweizen", "irish stout", "scottish ale", "baltic porter",
        "farmhouse saison", "vienna lager", "rye amber", "oatmeal stout",
    ],
}

FZ_WORDS = {
    "first": [
        "cafe", "trattoria", "bistro", "osteria", "brasserie", "cantina",
        "taverna", "grill", "kitchen", "diner", "palace", "garden", "house",
    ],
    "name": [
        "meridian", "juniper", "larkspur", "bellwether", "sassafras", "mariposa",
        "cobalt", "wisteria", "tamarind", "halcyon", "verbena", "solstice",
        "pomegranate", "marigold", "cypress", "ondine",
    ],
    "street": [
        "willow", "magnolia", "harrison", "lexington", "prospect", "sycamore",
        "fremont", "delancey", "hawthorne", "mercer", "columbus", "addison",
    ],
    "street_kind": ["st.", "ave.", "blvd.", "rd.", "lane"],
    "city": [
        "los angeles", "new york", "san francisco", "atlanta", "chicago",
        "new orleans", "boston", "seattle",
    ],
    "type": [
        "italian", "french", "american", "seafood", "steakhouse", "thai",
        "mexican", "cajun", "fusion", "mediterranean",
    ],
}


def _beer_entity(rng: np.random.Generator) -> list:
    adj = rng.choice(BEER_WORDS["adjective"], size=2, replace=False)
    noun = rng.choice(BEER_WORDS["noun"])
    name = f"{adj[0]} {adj[1]} {noun}"
    factory = f"{rng.choice(BEER_WORDS['factory'])} {rng.choice(BEER_WORDS['suffix'])} co."
    style = str(rng.choice(BEER_WORDS["style"]))
    abv = round(float(rng.uniform(3.5, 12.0)), 1)
    return [("Beer_Name", name), ("Brew_Factory_Name", factory), ("Style", style), ("ABV", abv)]


def _fz_entity(rng: np.random.Generator) -> list:
    name = f"{rng.choice(FZ_WORDS['name'])} {rng.choice(FZ_WORDS['first'])}"
    number = int(rng.integers(10, 999))
    addr = f"{number} {rng.choice(FZ_WORDS['street'])} {rng.choice(FZ_WORDS['street_kind'])}"
    city = str(rng.choice(FZ_WORDS["city"]))
    phone = f"{rng.integers(200, 999)}-{rng.integers(200, 999)}-{rng.integers(1000, 9999)}"
    rtype = str(rng.choice(FZ_WORDS["type"]))
    return [("name", name), ("addr", addr), ("city", city), ("phone", phone), ("type", rtype)]


def _variant(attrs: list, rng: np.random.Generator) -> list:
    """A dirty near-duplicate: token drops, swaps, typos, numeric jitter."""
    out = []
    for name, value in attrs:
        if isinstance(value, float):
            if rng.random() < 0.3:
                value = round(value + float(rng.uniform(-0.2, 0.2)), 1)
            out.append((name, value))
            continue
        toks = value.split()
        r = rng.random()
        if r < 0.25 and len(toks) > 1:
            toks.pop(int(rng.integers(len(toks))))
        elif r < 0.45 and len(toks) > 1:
            i = int(rng.integers(len(toks) - 1))
            toks[i], toks[i + 1] = toks[i + 1], toks[i]
        elif r < 0.6:
            i = int(rng.integers(len(toks)))
            t = toks[i]
            if len(t) > 3:
                j = int(rng.integers(1, len(t) - 1))
                toks[i] = t[:j] + t[j + 1 :]
        out.append((name, " ".join(toks)))
    return out


_SPECS = {
    "beer": dict(entity=_beer_entity, candidates=450, matches=68),
    "fodors-zagats": dict(entity=_fz_entity, candidates=946, matches=110),
}


def generate_benchmark(name: str, seed: int = 7) -> Dataset:
    """Generate a synthetic benchmark dataset with the named profile."""
    if name not in _SPECS:
        raise ValueError(f"unknown benchmark profile {name!r}; choose from {sorted(_SPECS)}")
    spec = _SPECS[name]
    rng = np.random.default_rng([seed, sum(name.encode())])
    n_matches = spec["matches"]
    n_non = spec["candidates"] - n_matches
    n_entities = n_matches + n_non // 2 + 8

    entities = [spec["entity"](rng) for _ in range(n_entities)]
    table_a = [Record(tuple(e)) for e in entities]
    table_b = [Record(tuple(_variant(e, rng))) for e in entities]

    candidates: list[tuple[int, int, int]] = []
    for k in range(n_matches):
        candidates.append((k, k, 1))
    seen = {(k, k) for k in range(n_matches)}
    while len(candidates) < spec["candidates"]:
        i = int(rng.integers(n_entities))
        j = int(rng.integers(n_entities))
        if i == j or (i, j) in seen:
            continue
        seen.add((i, j))
        candidates.append((i, j, 0))

    order = rng.permutation(len(candidates))
    shuffled = [candidates[i] for i in order]
    n = len(shuffled)
    n_train = int(n * 0.6)
    n_valid = int(n * 0.2)
    splits = {
        "train": tuple(shuffled[:n_train]),
        "valid": tuple(shuffled[n_train : n_train + n_valid]),
        "test": tuple(shuffled[n_train + n_valid :]),
    }
    return Dataset(tuple(table_a), tuple(table_b), splits)


def write_benchmark(name: str, directory: Union[str, Path], seed: int = 7) -> Dataset:
    dataset = generate_benchmark(name, seed=seed)
    save_benchmark_dataset(dataset, directory)
    return dataset


def available_profiles() -> list[str]:
    return sorted(_SPECS)
