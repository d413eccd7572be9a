"""Small panel builders shared across test modules."""

import numpy as np


def records_from_cells(cells: dict) -> list:
    """Flatten a {(unit, period): draws} dict into (u, t, y) records."""
    rows = []
    for (u, t), xs in cells.items():
        rows.extend((u, t, float(x)) for x in np.asarray(xs, dtype=float).ravel())
    return rows


def normal_records(rng, unit_means, periods, n: int, sd: float = 1.0,
                   t0=None, post_shift: float = 0.0, target: int = 0) -> list:
    """I.i.d. normal cells; the target unit gets post_shift from t0 on."""
    recs = []
    for u, mu in enumerate(unit_means):
        for t in periods:
            loc = float(mu)
            if t0 is not None and u == target and t >= t0:
                loc += post_shift
            recs.extend((u, t, float(x)) for x in rng.normal(loc, sd, n))
    return recs
