"""Synthetic data families with known conditional structure.

Families:
  postnonlinear-I/II/III/IV : x and y are (optionally warped) linear blends
      of z plus noise under H0; under H1 x is fresh standard normal noise
      that feeds into y, so x and y are dependent even given z.  I, II and
      III differ only in the law of z (normal, Laplace, uniform) and use
      identity links; IV draws its links at random per seed.
  gof-1  : x uniform on [0, 1] and independent of a high-dimensional z;
      the conditional law of x given z is the marginal itself.
  gof-2  : x is a linear blend of z plus noise, y independent noise.
  chain-example-1    : x -> z -> y, so x and y are marginally dependent but
      conditionally independent given z (an H0 instance by construction).
  collider-example-2 : x -> z <- y, so x and y are marginally independent
      but conditionally dependent given z (an H1 instance by construction).
  gaussian-oracle    : jointly Gaussian triple whose residual correlation
      (and hence conditional mutual information) is dialled in exactly.

Coefficient vectors are drawn once per seed from a dedicated stream, so the
same seed always describes the same population; the observation noise comes
from a second stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, make_rng

__all__ = ["FAMILIES", "LINKS", "ScenarioSpec", "UnsupportedFamilyError",
           "model_params", "generate", "oracle_conditional_sampler"]

_PARAM_STREAM = 50
_DATA_STREAM = 51

FAMILIES = (
    "postnonlinear-I",
    "postnonlinear-II",
    "postnonlinear-III",
    "postnonlinear-IV",
    "gof-1",
    "gof-2",
    "chain-example-1",
    "collider-example-2",
    "gaussian-oracle",
)

LINKS = {
    "identity": lambda t: t,
    "square": np.square,
    "cube": lambda t: t ** 3,
    "tanh": np.tanh,
    "cos": np.cos,
}
_RANDOM_LINK_NAMES = ("square", "cube", "tanh", "cos")

# families whose causal structure fixes the hypothesis
_FIXED_HYPOTHESIS = {
    "gof-1": "H0",
    "gof-2": "H0",
    "chain-example-1": "H0",
    "collider-example-2": "H1",
}


class UnsupportedFamilyError(ValueError):
    """Raised when a family offers no exact conditional sampler."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete description of one synthetic population and sample size."""

    family: str
    n: int
    d_z: int
    hypothesis: str = "H0"
    b: float = 2.0
    noise_sd: float = 0.7
    partial_corr: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown family {self.family!r}, expected one of {FAMILIES}"
            )
        if self.hypothesis not in ("H0", "H1"):
            raise ValueError("hypothesis must be 'H0' or 'H1'")
        fixed = _FIXED_HYPOTHESIS.get(self.family)
        if fixed is not None and self.hypothesis != fixed:
            raise ValueError(
                f"family {self.family} is {fixed} by construction"
            )
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.d_z < 1:
            raise ValueError("d_z must be >= 1")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")
        if not -1.0 < self.partial_corr < 1.0:
            raise ValueError("partial_corr must lie strictly inside (-1, 1)")


def _l1_normalized(rng: np.random.Generator, d: int) -> np.ndarray:
    w = rng.uniform(0.0, 1.0, size=d)
    total = w.sum()
    if total == 0.0:
        w[:] = 1.0
        total = float(d)
    return w / total


def model_params(spec: ScenarioSpec) -> dict:
    """Population coefficients implied by (family, d_z, seed)."""
    rng = make_rng(spec.seed, (_PARAM_STREAM,))
    d = spec.d_z
    if spec.family.startswith("postnonlinear-"):
        params = {
            "a_f": _l1_normalized(rng, d),
            "a_g": _l1_normalized(rng, d),
            "a_h": rng.standard_normal(d),
            "f": "identity",
            "g": "identity",
            "h": "identity",
        }
        if spec.family == "postnonlinear-IV":
            params["f"] = str(rng.choice(_RANDOM_LINK_NAMES))
            params["g"] = str(rng.choice(_RANDOM_LINK_NAMES))
            params["h"] = str(rng.choice(_RANDOM_LINK_NAMES))
        return params
    if spec.family == "gof-1":
        return {}
    if spec.family == "gof-2":
        return {"a_f": _l1_normalized(rng, d)}
    if spec.family == "chain-example-1":
        return {"a": _l1_normalized(rng, d), "w": _l1_normalized(rng, d)}
    if spec.family == "collider-example-2":
        return {
            "a": rng.uniform(0.5, 1.5, size=d),
            "c": rng.uniform(0.5, 1.5, size=d),
        }
    # gaussian-oracle
    rho = spec.partial_corr if spec.hypothesis == "H1" else 0.0
    return {
        "a": _l1_normalized(rng, d),
        "c": _l1_normalized(rng, d),
        "rho": rho,
        "cmi": -0.5 * float(np.log1p(-rho * rho)),
    }


def _draw_z(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    shape = (spec.n, spec.d_z)
    if spec.family in ("postnonlinear-I", "gof-1", "gof-2"):
        return rng.normal(loc=0.7, scale=1.0, size=shape)
    if spec.family == "postnonlinear-II":
        # scale 1/sqrt(2) gives unit variance
        return rng.laplace(loc=0.7, scale=1.0 / np.sqrt(2.0), size=shape)
    if spec.family == "postnonlinear-III":
        return rng.uniform(-2.5, 2.5, size=shape)
    return rng.standard_normal(shape)


def generate(spec: ScenarioSpec) -> Dataset:
    """Draw a Dataset from the scenario; same spec, same data."""
    params = model_params(spec)
    rng = make_rng(spec.seed, (_DATA_STREAM,))
    n, sd = spec.n, spec.noise_sd

    if spec.family.startswith("postnonlinear-"):
        z = _draw_z(spec, rng)
        f, g, h = LINKS[params["f"]], LINKS[params["g"]], LINKS[params["h"]]
        if spec.hypothesis == "H0":
            x = f(z @ params["a_f"] + sd * rng.standard_normal(n))
            y = g(z @ params["a_g"] + sd * rng.standard_normal(n))
        else:
            x = rng.standard_normal(n)
            y = h(z @ params["a_h"] + spec.b * x) + sd * rng.standard_normal(n)
        return Dataset(x=x, y=y, z=z)

    if spec.family == "gof-1":
        z = _draw_z(spec, rng)
        x = rng.uniform(0.0, 1.0, size=n)
        y = rng.standard_normal(n)
        return Dataset(x=x, y=y, z=z)

    if spec.family == "gof-2":
        z = _draw_z(spec, rng)
        x = z @ params["a_f"] + sd * rng.standard_normal(n)
        y = rng.standard_normal(n)
        return Dataset(x=x, y=y, z=z)

    if spec.family == "chain-example-1":
        x = rng.standard_normal(n)
        z = x[:, None] * params["a"][None, :] + sd * rng.standard_normal(
            (n, spec.d_z)
        )
        y = z @ params["w"] + sd * rng.standard_normal(n)
        return Dataset(x=x, y=y, z=z)

    if spec.family == "collider-example-2":
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        z = (
            x[:, None] * params["a"][None, :]
            + y[:, None] * params["c"][None, :]
            + sd * rng.standard_normal((n, spec.d_z))
        )
        return Dataset(x=x, y=y, z=z)

    # gaussian-oracle
    z = rng.standard_normal((n, spec.d_z))
    e_x = rng.standard_normal(n)
    rho = params["rho"]
    e_y = rho * e_x + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    x = z @ params["a"] + e_x
    y = z @ params["c"] + e_y
    return Dataset(x=x, y=y, z=z)


def oracle_conditional_sampler(spec: ScenarioSpec):
    """Exact sampler for the conditional law of x given z, where known.

    Returns a closure sampler(z_rows, rng) -> x of length len(z_rows).
    Families whose conditional law of x given z is not in closed form
    (postnonlinear-IV, chain-example-1, collider-example-2) raise
    UnsupportedFamilyError.
    """
    if spec.family in (
        "postnonlinear-IV",
        "chain-example-1",
        "collider-example-2",
    ):
        raise UnsupportedFamilyError(
            f"no exact conditional sampler for family {spec.family}"
        )
    params = model_params(spec)
    sd = spec.noise_sd

    if spec.family == "gof-1":
        def sampler(z_rows, rng):
            return rng.uniform(0.0, 1.0, size=np.asarray(z_rows).shape[0])
        return sampler

    if spec.family == "gof-2":
        a = params["a_f"]

        def sampler(z_rows, rng):
            z_rows = np.asarray(z_rows, dtype=np.float64)
            return z_rows @ a + sd * rng.standard_normal(z_rows.shape[0])
        return sampler

    if spec.family == "gaussian-oracle":
        a = params["a"]

        def sampler(z_rows, rng):
            z_rows = np.asarray(z_rows, dtype=np.float64)
            return z_rows @ a + rng.standard_normal(z_rows.shape[0])
        return sampler

    # postnonlinear-I/II/III
    if spec.hypothesis == "H1":
        def sampler(z_rows, rng):
            return rng.standard_normal(np.asarray(z_rows).shape[0])
        return sampler

    a_f = params["a_f"]

    def sampler(z_rows, rng):
        z_rows = np.asarray(z_rows, dtype=np.float64)
        return z_rows @ a_f + sd * rng.standard_normal(z_rows.shape[0])
    return sampler
