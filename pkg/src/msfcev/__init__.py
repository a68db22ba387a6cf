"""Option pricing under CEV dynamics driven by mixed (sub-)fractional noise.

Library layout:

* :mod:`msfcev.specfun`   -- special-function kernel (Bessel I, Kummer M,
  Whittaker M, non-central chi-squared tails);
* :mod:`msfcev.process`   -- driver covariances and exact path sampling;
* :mod:`msfcev.pricing`   -- effective variance, transition density and
  closed-form call prices for the six-model catalog;
* :mod:`msfcev.verify`    -- independent oracles (forward-equation solver,
  Monte Carlo, payoff quadrature);
* :mod:`msfcev.calibrate` -- MSE fitting of option chains;
* :mod:`msfcev.cli`       -- command-line front end.
"""

from .errors import (CalibrationError, ChainFormatError, ConvergenceError,
                     DomainError, NumericalError)
from .pricing import (Driver, Family, MarketEnv, ModelSpec, call_price,
                      call_prices, diffusion_kernel, effective_variance,
                      price_curve, transition_density)
from .process import MixedDriverParams, PathBatch, TimeGrid, sample_msfbm

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CalibrationError",
    "ChainFormatError",
    "ConvergenceError",
    "DomainError",
    "NumericalError",
    "Driver",
    "Family",
    "MarketEnv",
    "ModelSpec",
    "MixedDriverParams",
    "PathBatch",
    "TimeGrid",
    "call_price",
    "call_prices",
    "diffusion_kernel",
    "effective_variance",
    "price_curve",
    "sample_msfbm",
    "transition_density",
]
