"""Pinned copies of the six public benchmark networks (bnlearn repository BIF files)."""
from __future__ import annotations

import hashlib
from importlib import resources

from ..bn import BayesianNetwork, parse_bif

PINNED_SHA256 = {
    "alarm": "701e6c561f71b55669070c29614f0724b761289aa2c4a35bcc97b638ee881fa2",
    "asia": "9f770c96940dc4d860b581602120790ac538983b30b28d38631b8184dc7b5f89",
    "child": "432c22e661cd0e8235c8d95599ac22ccc261002459f5c4e6e7235b057908fe6e",
    "insurance": "39f9e706e9208e720a55a98b6811188b33a7292335a53373a9343a0c7065dab4",
    "survey": "3698ccc0f1f74b9f935617d91989e4cdb39edb5360b558216af64047fc88b3b0",
    "win95pts": "14d2195e0c4613e0beb1f06e9199c8cd39a1154171a215c38b47c0fd773d0b36",
}

# Published figures for each dataset: nodes, edges, parameters, avg Markov blanket,
# avg degree, max in-degree.
REFERENCE_STATS = {
    "alarm": (37, 46, 509, 3.51, 2.49, 4),
    "asia": (8, 8, 18, 2.5, 2.0, 2),
    "child": (20, 25, 230, 3.0, 1.25, 2),
    "insurance": (27, 52, 984, 5.19, 3.85, 3),
    "survey": (6, 6, 21, 2.67, 2.0, 2),
    "win95pts": (76, 112, 574, 5.92, 2.95, 7),
}

NAMES = tuple(PINNED_SHA256)


def bif_text(name: str) -> str:
    data = resources.files(__name__).joinpath(f"{name}.bif").read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    if digest != PINNED_SHA256[name]:
        raise RuntimeError(f"{name}.bif hash mismatch: {digest}")
    return data.decode()


def load(name: str) -> BayesianNetwork:
    """Load a pinned network by lowercase name (``asia``, ``alarm``, ...)."""
    name = name.lower()
    if name not in PINNED_SHA256:
        raise KeyError(f"unknown network {name!r}; choose from {', '.join(NAMES)}")
    return parse_bif(bif_text(name), name=name)


def stats_comparison(name: str) -> dict:
    """Computed statistics next to the published ones, with per-field agreement.

    ``parameter_convention`` says whether the published parameter count equals
    the free-parameter count, the full CPT entry count, or neither.
    """
    from ..bn import network_stats

    s = network_stats(load(name))
    nodes, edges, params, mb, deg, max_in = REFERENCE_STATS[name]
    if s.parameter_count == params:
        convention = "free"
    elif s.full_entry_count == params:
        convention = "full"
    else:
        convention = "none"
    return {
        "dataset": name,
        "computed": {"nodes": s.node_count, "edges": s.edge_count, "free_parameters": s.parameter_count,
                     "full_entries": s.full_entry_count, "avg_markov_blanket": s.avg_markov_blanket,
                     "avg_degree": s.avg_degree, "max_in_degree": s.max_in_degree},
        "reference": {"nodes": nodes, "edges": edges, "parameters": params, "avg_markov_blanket": mb,
                      "avg_degree": deg, "max_in_degree": max_in},
        "match": {"nodes": s.node_count == nodes, "edges": s.edge_count == edges,
                  "parameters": convention != "none",
                  "avg_markov_blanket": abs(s.avg_markov_blanket - mb) <= 0.01,
                  "avg_degree": abs(s.avg_degree - deg) <= 0.01,
                  "max_in_degree": s.max_in_degree == max_in},
        "parameter_convention": convention,
    }
