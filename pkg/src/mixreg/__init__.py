"""Gibbs samplers and convergence checks for regression with scale-mixture-of-normal errors.

The model is ``Y = X beta + E Sigma^{1/2}`` where the rows of ``E`` are
normal scale mixtures with mixing density ``h`` and the prior is
``|Sigma|^-a``.  Subpackages:

* :mod:`mixreg.mixing` -- mixing densities, moments, origin behaviour;
* :mod:`mixreg.model` -- data, chain state, propriety conditions;
* :mod:`mixreg.samplers` -- exact conditional samplers;
* :mod:`mixreg.chains` -- DA and Haar PX-DA chains, Monte Carlo errors;
* :mod:`mixreg.checker` -- trace-class / geometric-ergodicity certificates;
* :mod:`mixreg.diagnostics` -- grid oracle, joint-distribution test, autocorrelations;
* :mod:`mixreg.cli` -- the ``mixreg`` command.
"""

from mixreg.chains import ChainConfig, ChainOutput, run_chain, summarize
from mixreg.checker import Certificate, Verdict, certify
from mixreg.mixing import (GIG, Custom, Frechet, Gamma, InvertedGamma, LogNormal, TruncatedShift,
                           from_dict, loglog_density, uniform_density)
from mixreg.model import ChainState, RegressionData, validate_data

__version__ = "0.1.0"

__all__ = [
    "Certificate", "ChainConfig", "ChainOutput", "ChainState", "Custom", "Frechet", "GIG", "Gamma",
    "InvertedGamma", "LogNormal", "RegressionData", "TruncatedShift", "Verdict", "certify",
    "from_dict", "loglog_density", "run_chain", "summarize", "uniform_density", "validate_data",
]
