# -*- coding: utf-8 -*-
""" Registries of DGP presets, experiment modifications, and command line constants.

Full-scale presets follow the Monte Carlo design of the sparse SVAR literature
(Class 1: VAR(2), Class 2: VAR(3), both with p = 100 and n = 100). The ``-desk``
variants shrink p to 40 so a study finishes on a workstation.
"""

import re

from .dgp import DgpSpec
from .errors import UsageError
from .interface import FrozenObjectDict, FrozenSet

# Command line exit codes
EXIT_CODES = FrozenObjectDict({"ok": 0, "usage": 2, "data": 3, "numerical": 4})


# Variable bands of an experiment report, relative to the variable hit by the shock
BANDS = ("before", "shock", "after")


# Base classes
CLASS1 = DgpSpec(
    p=100,
    n=100,
    lags=2,
    k_a=5,
    radius=0.9,
    n_shocks=4,
    shock=3,
    k_b=5,
    k_d=5,
    name="class1",
)
CLASS2 = CLASS1.replace(lags=3, radius=0.95, name="class2")

BASES = FrozenObjectDict(
    {
        "class1": CLASS1,
        "class2": CLASS2,
        "class1-desk": CLASS1.replace(p=40, name="class1-desk"),
        "class2-desk": CLASS2.replace(p=40, name="class2-desk"),
    }
)


# Modifications, applied as field overrides
MODIFICATIONS = FrozenObjectDict(
    {
        "class1": {
            "A": {"n_shocks": 8, "k_b": 10, "k_d": 10, "shock": 5},
            "B": {"n": 200},
            "C": {"k_a": 10},
            "D": {"law": "student_t"},
        },
        "class2": {
            "A": {"p": 200},
            "B": {"n": 200},
        },
    }
)

PRESET_NAMES = FrozenSet(BASES.keys())

_PATTERN = re.compile(r"^(class[12])(-desk)?\s*([A-Za-z](?:\s*\+\s*[A-Za-z])*)?$")


def preset(name: str) -> DgpSpec:
    """Resolves names like ``class1``, ``class1-desk``, ``class1 B+C`` or ``class2A+B``.

    Modifications touch disjoint fields, so their order does not matter and repeats are
    applied once.

    Raises:
        UsageError: Unknown base or modification.
    """

    match = _PATTERN.match(name.strip().lower().replace("_", "-"))
    if match is None:
        err = "Unknown preset {!r}; bases are {}.".format(name, PRESET_NAMES)
        raise UsageError(err)

    family, desk, letters = match.groups()
    spec = BASES[family + (desk or "")]
    if not letters:
        return spec

    available = MODIFICATIONS[family]
    overrides = {}
    applied = []
    for letter in sorted({part.strip().upper() for part in letters.split("+")}):
        if letter not in available:
            err = "{} has no modification {!r}; choose from {}."
            raise UsageError(err.format(family, letter, FrozenSet(available.keys())))
        overrides.update(dict(available[letter]))
        applied.append(letter)

    label = "{} {}".format(spec.name, "+".join(applied))
    return spec.replace(name=label, **overrides)
