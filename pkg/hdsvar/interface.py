# -*- coding: utf-8 -*-
""" Lower-level interfaces that ``hdsvar`` depends on. """

from toolbox.collections.mapping import FrozenDict, ObjectDict


class FrozenObjectDict(FrozenDict, ObjectDict):
    """A frozen dictionary whose keys are also reachable as attributes. Locks the
    mapping in place after initialization.

    Note:
        Used for the registries in :mod:`hdsvar.presets` (presets, modifications, exit
        codes), so that ``EXIT_CODES.usage`` and ``EXIT_CODES["usage"]`` agree.
    """


class FrozenSet(frozenset):
    """A frozen set with pretty-print."""

    def __str__(self):
        """String representation of the FrozenSet, sorted.

        Returns:
            String representation of the FrozenSet.
        """
        return "{" + ", ".join(sorted(str(k) for k in self)) + "}"
