"""Closed-form constants and error bounds for particle filters with intermittent compression.

Every function is plain arithmetic on its inputs.  Symbols follow the usual
notation: ``eps_M`` and ``eps_G`` are the mixing and potential regularity
constants, ``m`` the mixing horizon, ``q_u`` an upper bound on the probability
that a compression happens at a given step, ``chi = N / N_b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgumentError, OutOfHypothesisError

Q_MAX_SUBSAMPLE = 2.0 / 3.0


@dataclass(frozen=True)
class RegularityParams:
    eps_M: float
    eps_G: float
    m: int = 1

    def __post_init__(self):
        if not 0.0 < self.eps_M <= 1.0:
            raise InvalidArgumentError("eps_M must lie in (0, 1]")
        if not 0.0 < self.eps_G <= 1.0:
            raise InvalidArgumentError("eps_G must lie in (0, 1]")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgumentError("m must be an integer >= 1")


@dataclass(frozen=True)
class BoundQuery:
    N: int
    N_b: int
    q_u: float
    p: float = 2.0
    chi: int | None = None

    def __post_init__(self):
        if self.N < 1 or self.N_b < 1:
            raise InvalidArgumentError("N and N_b must be >= 1")
        if self.N_b > self.N:
            raise InvalidArgumentError("N_b must not exceed N")
        if self.chi is not None and self.chi * self.N_b != self.N:
            raise InvalidArgumentError("chi * N_b must equal N")
        if not 0.0 <= self.q_u <= 1.0:
            raise InvalidArgumentError("q_u must lie in [0, 1]")
        if not self.p >= 1.0:
            raise InvalidArgumentError("p must be >= 1")


@dataclass(frozen=True)
class ParametricBoundInputs:
    """Inputs to the parametric-compression bound.

    ``a_u`` and ``b_u`` bound every mixture component density from below and
    above.  ``entropy_integral`` and ``universal_C`` stand in for quantities
    that depend on the geometry of the mixture class and cannot be computed
    here; they default to 1.0 and outputs flag them as user-supplied.
    """

    a_u: float
    b_u: float
    N_p: int
    entropy_integral: float = 1.0
    universal_C: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.a_u < self.b_u < math.inf:
            raise InvalidArgumentError("need 0 < a_u < b_u < inf")
        if self.N_p < 1:
            raise InvalidArgumentError("N_p must be >= 1")
        if self.entropy_integral < 0:
            raise InvalidArgumentError("entropy_integral must be >= 0")
        if not self.universal_C > 0:
            raise InvalidArgumentError("universal_C must be positive")


def c_of_p(p: float) -> float:
    """Moment constant: 1 at p = 1, otherwise ``2^(-p/2) p Gamma(p/2)``.

    The two branches do not meet as p -> 1+ (the Gamma branch tends to
    sqrt(pi/2)); the piecewise value is intentional.
    """
    if not p >= 1.0:
        raise InvalidArgumentError("p must be >= 1")
    if p == 1.0:
        return 1.0
    return 2.0 ** (-p / 2.0) * p * math.gamma(p / 2.0)


def dobrushin_bound(params: RegularityParams, horizon: int) -> float:
    if horizon < 0:
        raise InvalidArgumentError("horizon must be >= 0")
    base = 1.0 - params.eps_M**2 * params.eps_G ** (params.m - 1)
    return base ** (int(horizon) // params.m)


def epsilon_um(params: RegularityParams) -> float:
    eM, eG, m = params.eps_M, params.eps_G, params.m
    return m * (2.0 - eM * eG**m) / (eM**3 * eG ** (2 * m - 1))


def standard_lp_bound(N: int, p: float, eps_um: float) -> float:
    """Time-uniform L_p error of the uncompressed filter."""
    return eps_um * c_of_p(p) ** (1.0 / p) / math.sqrt(N)


def _require_chi(query: BoundQuery) -> int:
    if query.chi is None:
        raise InvalidArgumentError("this bound needs chi with chi * N_b = N")
    return query.chi


def lp_bound_subsample(query: BoundQuery, eps_um: float) -> float:
    """L_p bound when N is a multiple of N_b; only valid for ``q_u <= 2/3``."""
    chi = _require_chi(query)
    if query.q_u > Q_MAX_SUBSAMPLE:
        raise OutOfHypothesisError(f"q_u={query.q_u} exceeds 2/3")
    p = query.p
    factor = query.q_u ** (1.0 / p) * math.sqrt(chi) + (1.0 - query.q_u) ** (1.0 / p)
    return standard_lp_bound(query.N, p, eps_um) * factor


def lp_bound_general(query: BoundQuery, eps_um: float) -> float:
    """L_p bound for any N_b; pays an extra ``1/sqrt(N)`` on compression steps."""
    p, q = query.p, query.q_u
    c = c_of_p(p) ** (1.0 / p)
    rN, rNb = 1.0 / math.sqrt(query.N), 1.0 / math.sqrt(query.N_b)
    return eps_um * c * (q ** (1.0 / p) * (rN + rNb) + (1.0 - q) ** (1.0 / p) * rN)


def _require_integer_p(p: float) -> int:
    if int(p) != p or p < 1:
        raise InvalidArgumentError("p must be a positive integer")
    return int(p)


def deterioration_factor(q_u: float, chi: int, p: int = 2) -> float:
    """Ratio of the intermittent-compression bound to the uncompressed one."""
    p = _require_integer_p(p)
    if chi < 1:
        raise InvalidArgumentError("chi must be >= 1")
    if not 0.0 <= q_u <= 1.0:
        raise InvalidArgumentError("q_u must lie in [0, 1]")
    return (q_u * chi ** (p / 2.0) + (1.0 - q_u)) ** (1.0 / p)


def lp_bound_tight(query: BoundQuery, eps_um: float) -> float:
    p = _require_integer_p(query.p)
    chi = _require_chi(query)
    return standard_lp_bound(query.N, p, eps_um) * deterioration_factor(query.q_u, chi, p)


def _tail_term(epsilon: float, n: int, eps_um: float) -> float:
    return (1.0 + 4.0 * math.sqrt(2.0 * math.pi) * epsilon * math.sqrt(n) / eps_um) * math.exp(
        -n * epsilon**2 / (2.0 * eps_um**2)
    )


@dataclass(frozen=True)
class ProbabilityBound:
    raw: float

    @property
    def value(self) -> float:
        """The bound clipped to [0, 1] for reporting."""
        return min(max(self.raw, 0.0), 1.0)

    def __float__(self) -> float:
        return self.value


def exp_inequality(epsilon: float, query: BoundQuery, eps_um: float) -> ProbabilityBound:
    """Upper bound on P(|error| > epsilon); ``.raw`` keeps the unclipped value."""
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")
    raw = _tail_term(epsilon, query.N, eps_um) + query.q_u * _tail_term(epsilon, query.N_b, eps_um)
    return ProbabilityBound(raw)


def mgf_bound(epsilon: float, sigma_h: float, N: int | None = None, form: str = "exact") -> float:
    """Bound on ``E exp(eps sqrt(N) |[P - S^N(P)](h)|)``; independent of N.

    ``sigma_h`` is the oscillation of h.  ``form="simple"`` is the looser
    closed form.
    """
    if not sigma_h > 0:
        raise InvalidArgumentError("sigma_h must be positive")
    s = epsilon * sigma_h
    if form == "exact":
        k = math.sqrt(math.pi / 2.0)
        return 1.0 + s * (1.0 - k + k * math.exp(s * s / 8.0) * (1.0 + math.erf(s / math.sqrt(8.0))))
    if form == "simple":
        return (1.0 + math.sqrt(2.0 * math.pi) * s) * math.exp(s * s / 8.0)
    raise InvalidArgumentError(f"unknown form {form!r}")


def parametric_epsilon_u(a_u: float, b_u: float, eps_G: float) -> float:
    r = a_u / b_u
    return (2.0 - r * eps_G) / (r**3 * eps_G)


def lp_bound_parametric(query: BoundQuery, inputs: ParametricBoundInputs, eps_G: float) -> float:
    """L_p bound when hand-offs transmit an N_p-component mixture.

    For ``1 <= p < 2`` the compression term is evaluated at p = 2, which is an
    upper bound by Jensen's inequality and keeps ``c(p/2)`` well defined.
    """
    if not 0.0 < eps_G <= 1.0:
        raise InvalidArgumentError("eps_G must lie in (0, 1]")
    p, q = query.p, query.q_u
    a, b = inputs.a_u, inputs.b_u
    eps_u = parametric_epsilon_u(a, b, eps_G)
    pp = max(p, 2.0)
    sampling = (16.0 / (a * math.sqrt(query.N))) * (
        2.0 * c_of_p(pp / 2.0) ** (2.0 / pp)
        + inputs.universal_C * math.gamma(pp / 4.0 + 1.0) * inputs.entropy_integral
    )
    ratio = b / a
    fit = 8.0 * math.log(3.0 * math.sqrt(math.e) * ratio) * ratio**2 / inputs.N_p
    return eps_u * (c_of_p(p) ** (1.0 / p) / math.sqrt(query.N) + q ** (1.0 / p) * math.sqrt(sampling + fit))


def binary_sensor_eps_G(p_d: float, p_f: float, n_sensors: int) -> float:
    """Potential regularity constant for ``n_sensors`` binary sensors."""
    if not 0.0 < p_f < p_d < 1.0:
        raise InvalidArgumentError("need 0 < p_f < p_d < 1")
    if n_sensors < 0:
        raise InvalidArgumentError("n_sensors must be >= 0")
    return (min(p_f, 1.0 - p_d) / max(p_d, 1.0 - p_f)) ** n_sensors


def naive_ratio(N: int, N_b: int) -> float:
    return math.sqrt(N / N_b)




def evaluate_all(params: dict) -> list[dict]:
    """Evaluate every bound that ``params`` has enough inputs for.

    Returns rows ``{"bound", "inputs", "value", "raw_value", "hypothesis_ok", "user_supplied"}``.
    ``value`` equals ``raw_value`` except for the probability bound, which is
    clipped to [0, 1].  A bound whose hypotheses fail gets ``nan`` values and
    ``hypothesis_ok = False``.
    """
    if "eps_um" in params:
        eps_um = float(params["eps_um"])
    else:
        reg = RegularityParams(float(params["eps_M"]), float(params["eps_G"]), int(params.get("m", 1)))
        eps_um = epsilon_um(reg)
    N, N_b = int(params["N"]), int(params["N_b"])
    q_u, p = float(params["q_u"]), float(params.get("p", 2.0))
    chi = N // N_b if N % N_b == 0 else None
    query = BoundQuery(N, N_b, q_u, p, chi)
    base = {"N": N, "N_b": N_b, "q_u": q_u, "p": p, "eps_um": eps_um}
    rows: list[dict] = []

    def add(name, fn, extra=None, user_supplied=False):
        inputs = dict(base, **(extra or {}))
        try:
            out, ok = fn(), True
        except (OutOfHypothesisError, InvalidArgumentError):
            out, ok = math.nan, False
        raw = out.raw if isinstance(out, ProbabilityBound) else float(out)
        rows.append({"bound": name, "inputs": inputs, "value": float(out), "raw_value": raw,
                     "hypothesis_ok": ok, "user_supplied": user_supplied})

    add("standard", lambda: standard_lp_bound(N, p, eps_um))
    add("subsample", lambda: lp_bound_subsample(query, eps_um))
    add("general", lambda: lp_bound_general(query, eps_um))
    add("tight", lambda: lp_bound_tight(query, eps_um))
    add("deterioration", lambda: deterioration_factor(q_u, chi if chi else 0, p))
    if "epsilon" in params:
        e = float(params["epsilon"])
        add("exp_inequality", lambda: exp_inequality(e, query, eps_um), {"epsilon": e})
    if "sigma_h" in params and "epsilon" in params:
        e, s = float(params["epsilon"]), float(params["sigma_h"])
        add("mgf_exact", lambda: mgf_bound(e, s, N, "exact"), {"epsilon": e, "sigma_h": s})
        add("mgf_simple", lambda: mgf_bound(e, s, N, "simple"), {"epsilon": e, "sigma_h": s})
    if {"a_u", "b_u", "N_p"} <= params.keys():
        inp = ParametricBoundInputs(
            float(params["a_u"]), float(params["b_u"]), int(params["N_p"]),
            float(params.get("entropy_integral", 1.0)), float(params.get("universal_C", 1.0)),
        )
        eps_G = float(params.get("eps_G_parametric", params.get("eps_G", 1.0)))
        add("parametric", lambda: lp_bound_parametric(query, inp, eps_G),
            {"a_u": inp.a_u, "b_u": inp.b_u, "N_p": inp.N_p, "eps_G": eps_G,
             "entropy_integral": inp.entropy_integral, "universal_C": inp.universal_C},
            user_supplied=True)
    return rows
