"""Rebuild the frozen grid-oracle reference used by the chain-correctness tests.

Run from the repository root::

    python3 tests/fixtures/build_oracle.py

The output ``oracle_n6_t4.json`` is committed; tests never recompute it.
"""

import json
from pathlib import Path

import numpy as np
from scipy import stats

from mixreg.diagnostics import default_grid, grid_posterior_oracle
from mixreg.mixing import Gamma
from mixreg.model import RegressionData

X = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5]
Y = [1.3, 2.9, 2.2, 5.6, 3.1, 4.4]
NU = 4.0
A = 1.0
GRID = dict(n_beta=800, n_log_sigma=800, beta_ses=60.0, log_sigma_halfwidth=15.0)


def main():
    data = RegressionData(np.array(Y), np.array(X), A)
    h = Gamma(NU / 2, NU / 2)
    grid = default_grid(data, **GRID)
    post = grid_posterior_oracle(data, h, grid)
    # independent cross-check: the same grid with the closed-form Student-t error law
    t_post = grid_posterior_oracle(data, h, grid, log_error=lambda r: stats.t.logpdf(np.sqrt(r), NU))
    summary = post.summary()
    cross = t_post.summary()
    out = {
        "data": {"x": X, "y": Y, "a": A, "mixing": h.to_dict()},
        "grid": {k: list(v) for k, v in grid.items()},
        "reference": {k: summary[k] for k in ("beta_mean", "beta_sd", "sigma2_mean", "sigma2_sd")},
        "edge_mass": summary["edge_mass"],
        "closed_form_max_rel_diff": max(abs(summary[k] - cross[k]) / abs(cross[k])
                                        for k in ("beta_mean", "beta_sd", "sigma2_mean", "sigma2_sd")),
    }
    path = Path(__file__).with_name("oracle_n6_t4.json")
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
