"""Finite decision problems, calibrated forecast schemes and value of information.

A farmer picks an action from a finite set to maximize expected payoff under
their belief over a finite set of weather states.  A forecast scheme is a
distribution over signals, each carrying a posterior; it is consistent when
the signal-weighted posteriors average back to the prior.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentScheme, MissingIncome, NonUniqueOptimum, ValidationError

TOL = 1e-12


@dataclass
class DecisionProblem:
    """Payoff matrix ``payoff[action, state]`` plus prior.

    When ``income`` and ``utility`` are given, ``payoff`` defaults to
    ``utility(income)``.
    """

    prior: np.ndarray
    payoff: np.ndarray | None = None
    income: np.ndarray | None = None
    utility: object = None
    actions: tuple | None = None
    states: tuple | None = None

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=float)
        if self.income is not None:
            self.income = np.asarray(self.income, dtype=float)
        if self.payoff is None:
            if self.income is None or self.utility is None:
                raise ValidationError("need a payoff matrix or income plus utility")
            self.payoff = np.vectorize(self.utility, otypes=[float])(self.income)
        self.payoff = np.asarray(self.payoff, dtype=float)
        if self.payoff.ndim != 2 or not np.all(np.isfinite(self.payoff)):
            raise ValidationError("payoff must be a finite actions x states matrix")
        if self.prior.shape != (self.payoff.shape[1],):
            raise ValidationError("prior length must equal the number of states")
        _check_simplex(self.prior, "prior")
        if self.income is not None and self.utility is not None:
            implied = np.vectorize(self.utility, otypes=[float])(self.income)
            if not np.allclose(implied, self.payoff, rtol=0, atol=TOL):
                raise ValidationError("payoff disagrees with utility(income)")
        if self.actions is None:
            self.actions = tuple(range(self.payoff.shape[0]))
        if self.states is None:
            self.states = tuple(range(self.payoff.shape[1]))

    @property
    def n_actions(self):
        return self.payoff.shape[0]

    @property
    def n_states(self):
        return self.payoff.shape[1]

    def with_payoff(self, payoff):
        return DecisionProblem(self.prior, payoff, actions=self.actions, states=self.states)


def _check_simplex(p, what, tol=1e-9):
    if np.any(p < -tol) or abs(p.sum() - 1.0) > tol:
        raise ValidationError(f"{what} is not a probability distribution")


@dataclass
class ForecastScheme:
    """Signals with marginal probabilities and one posterior (row) per signal."""

    signal_prob: np.ndarray
    posterior: np.ndarray
    signals: tuple | None = None

    def __post_init__(self):
        self.signal_prob = np.asarray(self.signal_prob, dtype=float)
        self.posterior = np.atleast_2d(np.asarray(self.posterior, dtype=float))
        if self.posterior.shape[0] != len(self.signal_prob):
            raise ValidationError("one posterior per signal required")
        _check_simplex(self.signal_prob, "signal distribution")
        for row in self.posterior:
            _check_simplex(row, "posterior")
        if self.signals is None:
            self.signals = tuple(range(len(self.signal_prob)))

    @property
    def implied_prior(self):
        return self.signal_prob @ self.posterior

    def check_consistent(self, prior, tol=1e-9):
        if self.posterior.shape[1] != len(prior) or np.max(
            np.abs(self.implied_prior - prior)
        ) > tol:
            raise InconsistentScheme("signal-weighted posteriors do not average to the prior")

    @classmethod
    def uninformative(cls, prior):
        return cls(np.array([1.0]), np.asarray(prior, dtype=float)[None, :])

    @classmethod
    def full_information(cls, prior):
        prior = np.asarray(prior, dtype=float)
        keep = prior > 0
        return cls(prior[keep], np.eye(len(prior))[keep])


def expected_payoffs(problem, belief):
    return problem.payoff @ np.asarray(belief, dtype=float)


def optimal_action(problem, belief):
    """Index of the expected-payoff maximizing action (lowest index on ties)."""
    return int(np.argmax(expected_payoffs(problem, belief)))


def _is_unique(problem, belief, tol=TOL):
    eu = np.sort(expected_payoffs(problem, belief))
    return len(eu) == 1 or eu[-1] - eu[-2] > tol


def scheme_value(problem, scheme):
    """Expected payoff gain of acting on each posterior rather than the prior."""
    scheme.check_consistent(problem.prior)
    base = optimal_action(problem, problem.prior)
    gain = 0.0
    for q, post in zip(scheme.signal_prob, scheme.posterior):
        a = optimal_action(problem, post)
        gain += q * float(post @ (problem.payoff[a] - problem.payoff[base]))
    return gain


def informed_expected_payoff(problem, scheme):
    """Expected payoff of a farmer acting on every forecast signal."""
    scheme.check_consistent(problem.prior)
    return float(
        sum(
            q * post @ problem.payoff[optimal_action(problem, post)]
            for q, post in zip(scheme.signal_prob, scheme.posterior)
        )
    )


def expected_income(problem, scheme=None):
    """Expected income under prior-optimal (``scheme=None``) or informed actions."""
    if problem.income is None:
        raise MissingIncome("problem has no income matrix")
    if scheme is None:
        return float(problem.prior @ problem.income[optimal_action(problem, problem.prior)])
    scheme.check_consistent(problem.prior)
    return float(
        sum(
            q * post @ problem.income[optimal_action(problem, post)]
            for q, post in zip(scheme.signal_prob, scheme.posterior)
        )
    )


def expected_income_effect(problem, scheme):
    """``(utility gain, income change)`` from using the forecast scheme."""
    return scheme_value(problem, scheme), expected_income(problem, scheme) - expected_income(problem)


def coarsen(scheme, message_of):
    """Scheme seen by a receiver who only gets ``message_of[signal index]``.

    Each message's posterior is the probability-weighted average of the
    posteriors of the signals mapped to it (a garbling of the scheme).
    """
    messages = sorted(set(message_of))
    probs, posts = [], []
    for msg in messages:
        idx = [i for i, m in enumerate(message_of) if m == msg]
        q = scheme.signal_prob[idx]
        total = q.sum()
        probs.append(total)
        posts.append(q @ scheme.posterior[idx] / total if total > 0 else scheme.posterior[idx[0]])
    return ForecastScheme(np.array(probs), np.array(posts), tuple(messages))


def compare_probabilistic_vs_deterministic(problem, scheme, message_of):
    """Value of the full probabilistic scheme vs its coarsened messages.

    The deterministic receiver best-responds to the posterior induced by
    each message, evaluated against the true posteriors of the underlying
    signals.  Returns ``(value_prob, value_det)``.
    """
    scheme.check_consistent(problem.prior)
    message_of = list(message_of)
    if len(message_of) != len(scheme.signal_prob):
        raise ValidationError("coarsening must map every signal")
    coarse = coarsen(scheme, message_of)
    msg_action = {
        m: optimal_action(problem, post) for m, post in zip(coarse.signals, coarse.posterior)
    }
    base = optimal_action(problem, problem.prior)
    value_det = 0.0
    for q, post, m in zip(scheme.signal_prob, scheme.posterior, message_of):
        a = msg_action[m]
        value_det += q * float(post @ (problem.payoff[a] - problem.payoff[base]))
    return scheme_value(problem, scheme), value_det


def decision_change_bound(problems, schemes, tol=TOL):
    """Expected number of farmers changing action vs number strictly benefiting.

    Rejects problems whose optimal action is not unique under the prior or
    any posterior.  Returns ``(expected_changes, count_strictly_benefiting)``;
    the theory guarantees ``count >= expected_changes``.
    """
    expected_changes = 0.0
    count = 0
    for i, (problem, scheme) in enumerate(zip(problems, schemes)):
        scheme.check_consistent(problem.prior)
        beliefs = [problem.prior] + [p for q, p in zip(scheme.signal_prob, scheme.posterior) if q > 0]
        if not all(_is_unique(problem, b, tol) for b in beliefs):
            raise NonUniqueOptimum(f"problem {i}: optimal action not unique")
        base = optimal_action(problem, problem.prior)
        expected_changes += sum(
            q for q, post in zip(scheme.signal_prob, scheme.posterior) if optimal_action(problem, post) != base
        )
        if scheme_value(problem, scheme) > tol:
            count += 1
    return expected_changes, count


# -- worked insurance example and random instances ---------------------------------


def insurance_problem():
    """Crop-insurance example with square-root utility and a 10% drought prior.

    Actions: 0 = no insurance, 1 = insurance.  States: 0 = no drought,
    1 = drought.
    """
    income = np.array([[100.0, 0.0], [81.0, 16.0]])
    return DecisionProblem(
        prior=np.array([0.9, 0.1]),
        income=income,
        utility=math.sqrt,
        actions=("no insurance", "insurance"),
        states=("no drought", "drought"),
    )


def insurance_scheme():
    """80%: "no drought" (certain); 20%: "elevated risk" (drought 50%)."""
    return ForecastScheme(
        np.array([0.8, 0.2]),
        np.array([[1.0, 0.0], [0.5, 0.5]]),
        ("no drought", "elevated"),
    )


def random_problem(rng, n_actions=None, n_states=None, max_size=4):
    n_actions = n_actions or int(rng.integers(2, max_size + 1))
    n_states = n_states or int(rng.integers(2, max_size + 1))
    return DecisionProblem(rng.dirichlet(np.ones(n_states)), rng.normal(size=(n_actions, n_states)))


def random_scheme(rng, prior, n_signals=None, max_signals=4):
    """A consistent scheme: draw a joint over (signal, state) with the given state marginal."""
    prior = np.asarray(prior, dtype=float)
    n_signals = n_signals or int(rng.integers(2, max_signals + 1))
    # columns: P(signal | state)
    likelihood = rng.dirichlet(np.ones(n_signals), size=len(prior)).T
    joint = likelihood * prior[None, :]
    signal_prob = joint.sum(axis=1)
    keep = signal_prob > 0
    posterior = joint[keep] / signal_prob[keep, None]
    signal_prob = signal_prob[keep] / signal_prob[keep].sum()
    return ForecastScheme(signal_prob, posterior)


# -- property sweeps ------------------------------------------------------------------


@dataclass
class SweepResult:
    cases: int
    violations: int
    worst_margin: float  # smallest value of (guaranteed side - other side)


def sweep_coarsening(rng, n_cases=100, max_size=4, tol=TOL):
    """Probabilistic value never below the value of a random two-message coarsening."""
    violations, worst = 0, math.inf
    for _ in range(n_cases):
        problem = random_problem(rng, max_size=max_size)
        scheme = random_scheme(rng, problem.prior, max_signals=max_size)
        message_of = rng.integers(0, 2, size=len(scheme.signal_prob)).tolist()
        v_prob, v_det = compare_probabilistic_vs_deterministic(problem, scheme, message_of)
        worst = min(worst, v_prob - v_det)
        violations += int(v_prob < v_det - tol)
    return SweepResult(n_cases, violations, worst)


def sweep_nonnegative_value(rng, n_cases=200, max_size=4, tol=TOL):
    """Every consistent scheme has nonnegative value."""
    violations, worst = 0, math.inf
    for _ in range(n_cases):
        problem = random_problem(rng, max_size=max_size)
        value = scheme_value(problem, random_scheme(rng, problem.prior, max_signals=max_size))
        worst = min(worst, value)
        violations += int(value < -tol)
    return SweepResult(n_cases, violations, worst)


def sweep_change_bound(rng, n_populations=200, max_farmers=20, max_size=4, tol=TOL):
    """Farmers strictly benefiting outnumber expected decision changes.

    Populations with a non-unique optimum are redrawn.
    """
    violations, worst = 0, math.inf
    for _ in range(n_populations):
        while True:
            n = int(rng.integers(1, max_farmers + 1))
            problems = [random_problem(rng, max_size=max_size) for _ in range(n)]
            schemes = [random_scheme(rng, p.prior, max_signals=max_size) for p in problems]
            try:
                changes, count = decision_change_bound(problems, schemes, tol)
                break
            except NonUniqueOptimum:
                continue
        worst = min(worst, count - changes)
        violations += int(count < changes - tol)
    return SweepResult(n_populations, violations, worst)
