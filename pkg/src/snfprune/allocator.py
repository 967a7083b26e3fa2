"""Search for per-layer reserved filter counts under a FLOPs budget.

The main entry point bisects a global energy threshold beta: higher beta
keeps more filters, so the achieved MAC reduction is non-increasing in
beta, and binary search finds the largest grid beta whose reduction still
meets the target. Uniform and random keep-ratio searches provide baseline
allocations of the same shape for comparison runs.
"""

import math
from dataclasses import dataclass

from snfprune._rng import SplitMix64
from snfprune.netgraph import achieved_reduction, flops
from snfprune.spectrum import reserved_count, tail_error

DEFAULT_INTERVAL_TOL = 1e-6
DEFAULT_MAX_ITER = 64
STRATEGIES = ("snf", "uniform", "random", "external")


@dataclass(frozen=True)
class Allocation:
    per_layer: dict
    beta: float = None
    strategy: str = "snf"


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a budget search.

    ``beta`` is the searched control value: the energy threshold for the
    snf strategy, the keep-ratio for uniform, the ratio scale for random.
    ``nearest_achievable`` flags targets beyond the d=1 floor; ``achieved``
    is then the maximum reachable reduction.
    """

    allocation: Allocation
    beta: float
    achieved: float
    target: float
    iterations: int
    nearest_achievable: bool = False


def _prunable_layers(net):
    return [spec for spec in net.layers if spec.prunable]


def _apply_group_min(net, per_layer):
    groups = {}
    for spec in _prunable_layers(net):
        if spec.coupling_group is not None:
            groups.setdefault(spec.coupling_group, []).append(spec.name)
    for names in groups.values():
        d = min(per_layer[name] for name in names)
        for name in names:
            per_layer[name] = d
    return per_layer


def allocation_for_beta(spectra, net, beta):
    """Reserved counts at one global threshold, with coupling groups at the group min."""
    per_layer = {}
    for spec in _prunable_layers(net):
        if spec.name not in spectra:
            raise ValueError("no spectrum for prunable layer %r" % spec.name)
        per_layer[spec.name] = reserved_count(spectra[spec.name], beta)
    _apply_group_min(net, per_layer)
    return Allocation(per_layer=per_layer, beta=float(beta), strategy="snf")


def _check_theta(theta):
    if not 0.0 < theta < 1.0:
        raise ValueError("target FLOPs reduction must be in (0, 1), got %r" % theta)


def _bisect(make_allocation, net, theta, lo, hi, interval_tol, max_iter,
            strategy_beta=None):
    """Shared search skeleton over a monotone control in [lo, hi].

    ``make_allocation(control)`` must give less pruning as control grows;
    ``lo`` is assumed maximal-pruning. Returns a SearchResult holding the
    largest feasible grid control.
    """
    original = flops(net)

    def measure(control):
        alloc = make_allocation(control)
        return alloc, achieved_reduction(original, flops(net, alloc.per_layer))

    alloc_lo, red_lo = measure(lo)
    if red_lo < theta:
        return SearchResult(allocation=alloc_lo, beta=lo, achieved=red_lo,
                            target=theta, iterations=0, nearest_achievable=True)
    alloc_hi, red_hi = measure(hi)
    if red_hi >= theta:
        return SearchResult(allocation=alloc_hi, beta=hi, achieved=red_hi,
                            target=theta, iterations=0)

    best_alloc, best_red = alloc_lo, red_lo
    iterations = 0
    while hi - lo >= interval_tol and iterations < max_iter:
        mid = (lo + hi) / 2.0
        iterations += 1
        alloc, red = measure(mid)
        if red >= theta:
            lo, best_alloc, best_red = mid, alloc, red
        else:
            hi = mid
    return SearchResult(allocation=best_alloc, beta=lo, achieved=best_red,
                        target=theta, iterations=iterations)


def search_beta(spectra, net, theta, interval_tol=DEFAULT_INTERVAL_TOL,
                max_iter=DEFAULT_MAX_ITER):
    """Largest grid beta in [0, 1] whose allocation meets the reduction target."""
    _check_theta(theta)
    return _bisect(lambda beta: allocation_for_beta(spectra, net, beta),
                   net, theta, 0.0, 1.0, interval_tol, max_iter)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def uniform_allocation(net, theta, interval_tol=DEFAULT_INTERVAL_TOL,
                       max_iter=DEFAULT_MAX_ITER):
    """One keep-ratio for every prunable layer, bisected to meet the target."""
    _check_theta(theta)
    prunable = _prunable_layers(net)

    def make_allocation(r):
        per_layer = {spec.name: min(spec.out_channels,
                                    max(1, _round_half_up(r * spec.out_channels)))
                     for spec in prunable}
        _apply_group_min(net, per_layer)
        return Allocation(per_layer=per_layer, beta=None, strategy="uniform")

    return _bisect(make_allocation, net, theta, 0.0, 1.0, interval_tol, max_iter)


def random_allocation(net, theta, seed, interval_tol=DEFAULT_INTERVAL_TOL,
                      max_iter=DEFAULT_MAX_ITER):
    """Seeded per-layer keep-ratios, globally rescaled to meet the target."""
    _check_theta(theta)
    prunable = _prunable_layers(net)
    ratios = SplitMix64(seed).unit_array(len(prunable))

    def make_allocation(scale):
        per_layer = {}
        for spec, ratio in zip(prunable, ratios):
            d = _round_half_up(scale * float(ratio) * spec.out_channels)
            per_layer[spec.name] = min(spec.out_channels, max(1, d))
        _apply_group_min(net, per_layer)
        return Allocation(per_layer=per_layer, beta=None, strategy="random")

    hi = 1.0 / float(ratios.min())
    return _bisect(make_allocation, net, theta, 0.0, hi, interval_tol, max_iter)


def curve_beta_vs_d(spectrum):
    """The exact threshold-to-reserved-count step function, one row per filter."""
    if spectrum.total <= 0.0:
        raise ValueError("curve requires a spectrum with positive energy")
    return [(float(ratio), d + 1)
            for d, ratio in enumerate(spectrum.cumulative_ratio)]


def total_error(spectra, allocation):
    """Summed tail reconstruction error across the allocation's layers."""
    return sum(tail_error(spectra[name], d)
               for name, d in allocation.per_layer.items())


def curve_error_vs_ratio(spectra, net, theta_grid):
    """(theta, beta, achieved, total error) per target on an ascending grid."""
    thetas = list(theta_grid)
    if thetas != sorted(thetas):
        raise ValueError("theta grid must be ascending")
    rows = []
    for theta in thetas:
        _check_theta(theta)
        result = search_beta(spectra, net, theta)
        rows.append((float(theta), result.beta, result.achieved,
                     total_error(spectra, result.allocation)))
    return rows
