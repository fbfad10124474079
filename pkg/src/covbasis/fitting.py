"""Log-log convergence fits."""
import numpy as np
from scipy.stats import linregress

__all__ = ["fit_order"]


def fit_order(steps, errors):
    """Least-squares slope of ``log(error)`` against ``log(step)``.

    Returns
    -------
    order : float
    r_squared : float
        Coefficient of determination of the log-log fit; ``nan`` when the
        errors are constant (e.g. all at roundoff).
    """
    x = np.log(np.asarray(steps, dtype=float))
    err = np.asarray(errors, dtype=float)
    if np.any(err <= 0.0):
        # exact zeros carry no order information
        err = np.maximum(err, np.finfo(float).tiny)
    y = np.log(err)
    if np.ptp(y) == 0.0:
        return 0.0, float("nan")
    fit = linregress(x, y)
    return float(fit.slope), float(fit.rvalue ** 2)
