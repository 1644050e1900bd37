"""Built-in experiment recipes, runnable by name from the CLI."""

from __future__ import annotations

import copy

from .config import ExperimentConfig, from_dict

_CORRELATIONS = [round(0.1 * i, 1) for i in range(11)]
_SUBTLE = [round(0.1 * i, 1) for i in range(11)]

RECIPES: dict[str, dict] = {
    "table6": {
        "description": "Wine, 30% flipped labels, moderate signals: uniform, Krum and factor products",
        "methods": ["uniform", "krum", "q×v", "q×v×r"],
        "trials": 30,
    },
    "table8": {
        "description": "Share of clean samples in the top-70% selection across signal scenarios",
        "methods": ["krum", "q×v×r"],
        "trials": 30,
        "sweep": {"axis": "scenario", "values": ["high", "moderate", "low", "adversarial"]},
    },
    "table9": {
        "description": "Ablation of single factors and pairs on Wine and Breast Cancer",
        "methods": ["krum", "v_only", "r_only", "q×v", "q×r", "v×r", "q×v×r"],
        "trials": 30,
        "sweep": {"axis": "dataset", "values": ["wine", "breast_cancer"]},
    },
    "table10": {
        "description": "Error versus correlation of v*r with cleanliness for the three combiners",
        "methods": ["krum", "multiplicative", "softmax", "adaptive"],
        "trials": 20,
        "sweep": {"axis": "correlation", "values": _CORRELATIONS},
    },
    "table12": {
        "description": "Data efficiency: random pool fraction and top-by-weight budget, Krum vs softmax",
        "methods": ["krum", "softmax"],
        "trials": 30,
        # data_fraction subsamples the pool before the usual 70% selection (a learning curve);
        # top_fraction trains on the top share of the full pool by weight
        "sweep": [
            {"axis": "data_fraction", "values": [0.2, 0.5, 1.0]},
            {"axis": "keep_fraction", "label": "top_fraction", "values": [0.2, 0.5]},
        ],
    },
    "table13": {
        "description": "Error versus corruption rate",
        "methods": ["uniform", "krum", "q×v×r"],
        "trials": 30,
        "sweep": {"axis": "beta", "values": [0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]},
    },
    "table14": {
        "description": "Larger datasets (covertype and adult read from ANML_DATA_DIR, capped at 5000 rows)",
        "methods": ["uniform", "krum", "softmax"],
        "trials": 10,
        "sweep": {"axis": "dataset", "values": ["digits", "covertype", "adult"]},
    },
    "table15": {
        "description": "Contributor- versus sample-level filtering across corruption detectability (Digits, 10 workers)",
        "experiment": "detectability",
        "baseline": "uniform",
        "methods": ["uniform"],
        "trials": 5,
        "dataset": {"source": "digits"},
        "signals": {"kind": "none"},
        "sweep": {"axis": "subtle_fraction", "values": _SUBTLE},
    },
    "table16": {
        "description": "Strategic attacks: label flips, credential faking, gradient alignment and both",
        "methods": ["uniform", "krum", "softmax", "adaptive"],
        "trials": 30,
        "sweep": {"axis": "attack_strategy", "values": ["naive_flip", "credential_faking", "gradient_aligned", "joint"]},
    },
    "table17": {
        "description": "Temporal decay under label drift and feature drift",
        "methods": ["softmax", "softmax+T", "adaptive", "adaptive+T"],
        "baseline": "adaptive",
        "trials": 30,
        "sweep": [
            {"axis": "drift_rate", "label": "label_drift", "values": [0.0, 0.1, 0.2, 0.3, 0.4],
             "set": {"drift.type": "label"}},
            {"axis": "drift_rate", "label": "feature_drift", "values": [0.0, 0.1, 0.2, 0.3, 0.4],
             "set": {"drift.type": "feature"}},
        ],
    },
    "appendixA": {
        "description": "Sensitivity to keep fraction and correlation threshold",
        "methods": ["krum", "softmax", "adaptive"],
        "trials": 30,
        "sweep": [
            {"axis": "keep_fraction", "values": [0.5, 0.7, 0.9]},
            {"axis": "tau_c", "values": [0.1, 0.3, 0.5]},
        ],
    },
    "crossdataset": {
        "description": "Softmax and adaptive across scenarios on Wine and Breast Cancer",
        "methods": ["krum", "softmax", "adaptive"],
        "trials": 30,
        "sweep": [
            {"axis": "scenario", "label": "wine", "values": ["high", "moderate", "low", "adversarial"],
             "set": {"dataset.source": "wine"}},
            {"axis": "scenario", "label": "breast_cancer", "values": ["high", "moderate", "low", "adversarial"],
             "set": {"dataset.source": "breast_cancer"}},
        ],
    },
    "quality": {
        "description": "25% attackers plus novice, intermediate and expert tiers: selection rates per group",
        "methods": ["krum", "q×v×r"],
        "trials": 30,
        "corruption": {"beta": 0.25},
        "signals": {"kind": "tiers"},
    },
}

PRIMARY = ("table6", "table8", "table9", "table10", "table12", "table13", "table14", "table15", "table16",
           "table17", "appendixA")


def names() -> list[str]:
    return list(RECIPES)


def recipe_dict(name: str) -> dict:
    if name not in RECIPES:
        raise KeyError(name)
    return {"name": name, **copy.deepcopy(RECIPES[name])}


def get(name: str, **overrides) -> ExperimentConfig:
    data = recipe_dict(name)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return from_dict(data)
