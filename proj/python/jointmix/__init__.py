"""Joint finite mixture of a stereotype ordinal model and a Cox model."""

import json

import numpy as np

from ._jointmix import (
    Dataset,
    InputError,
    NumericError,
    default_design as _default_design,
    simulate as _simulate,
    fit as _fit,
    mc as _mc,
    category_probs as _category_probs,
    loglik as _loglik,
)

__all__ = [
    "Dataset",
    "InputError",
    "NumericError",
    "default_design",
    "simulate",
    "fit",
    "mc",
    "category_probs",
    "loglik",
]


def _dump(obj):
    return "" if obj is None else json.dumps(obj)


def default_design():
    """Default simulation design as a dict."""
    return json.loads(_default_design())


def simulate(design=None):
    """Returns (Dataset, zero-based labels, censored fraction)."""
    data, labels, censored = _simulate(_dump(design))
    return data, np.asarray(labels), censored


def fit(data, groups, config=None, init=None):
    """Fits the model; returns the result dict with a 'posterior' array."""
    text, posterior = _fit(data, groups, _dump(config), _dump(init))
    result = json.loads(text)
    result["posterior"] = np.asarray(posterior)
    return result


def mc(design=None, replications=100, config=None, init_at_truth=True):
    """Monte Carlo coverage study; returns the report dict."""
    return json.loads(_mc(_dump(design), replications, _dump(config), init_at_truth))


def category_probs(group_effect, ordinal_params):
    """J x L response probabilities for one group effect."""
    return np.asarray(_category_probs(group_effect, json.dumps(ordinal_params)))


def loglik(data, params, hazard):
    """Observed-data log-likelihood at params and hazard {'times', 'jumps'}."""
    return _loglik(data, json.dumps(params), json.dumps(hazard))
