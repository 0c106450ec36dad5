# -*- coding: utf-8 -*-
""" Numerical tolerances and defaults, overridable from the environment. """

import dataclasses
import logging
import os
from dataclasses import dataclass
from typing import Mapping, Optional

from .errors import UsageError

logger = logging.getLogger(__name__)

ENV_PREFIX = "HDSVAR_"


@dataclass(frozen=True)
class Settings:
    """Every tunable constant used across the package.

    Each field can be overridden with an environment variable named after the field in
    upper case and prefixed with ``HDSVAR_`` (e.g. ``HDSVAR_LASSO_TOL=1e-8``).
    """

    # Lasso
    lasso_tol: float = 1e-7
    lasso_max_iter: int = 10_000
    n_lambda: int = 50
    lambda_ratio: float = 1e-3

    # Thresholding
    cv_folds: int = 5
    cv_grid: int = 30

    # Companion, autocovariances
    doubling_tol: float = 1e-12
    max_doublings: int = 64
    stability_margin: float = 1e-6

    # De-sparsified estimators
    dn_tol: float = 1e-8
    min_sample: int = 10
    dense_inverse_max: int = 512

    # Bootstrap
    burn_in: int = 200
    failure_budget: float = 0.05
    mallows_grid: int = 1000

    # Data generation and experiments
    radius_tol: float = 1e-8
    max_redraws: int = 100
    max_tracked: int = 20

    @classmethod
    def from_env(
        cls, environ: Optional[Mapping[str, str]] = None, prefix: str = ENV_PREFIX
    ) -> "Settings":
        """Builds Settings from defaults overridden by environment variables.

        Args:
            environ: Mapping to read from. Defaults to ``os.environ``.
            prefix: Variable name prefix.

        Returns:
            The resulting Settings.

        Raises:
            UsageError: A variable could not be converted to the field's type.
        """

        if environ is None:
            environ = os.environ

        overrides = {}
        for field in dataclasses.fields(cls):
            key = prefix + field.name.upper()
            if key not in environ:
                continue

            kind = type(field.default)
            try:
                overrides[field.name] = kind(float(environ[key]))
            except ValueError as error:
                err = "Environment variable {} must be a number, got {!r}.".format(
                    key, environ[key]
                )
                raise UsageError(err) from error

            logger.debug("Setting %s set to %s", field.name, overrides[field.name])

        return cls(**overrides)

    def replace(self, **changes) -> "Settings":
        """Returns a copy with the given fields changed."""
        return dataclasses.replace(self, **changes)


DEFAULTS = Settings()
