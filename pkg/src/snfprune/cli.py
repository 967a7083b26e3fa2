"""Command-line pipeline: analyze, plan, prune, ablate, curve, scaffold, eval.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 unreachable reduction target (outputs are still written, with a warning
on stderr). All outputs are written atomically and are byte-deterministic
for identical inputs and flags.
"""

import argparse
import sys

from snfprune import allocator, criteria, netgraph, pruner, spectrum, tensorio
from snfprune.scaffold import TEMPLATES, scaffold

_CRITERION_FLAGS = {"l1": "l1", "l2": "l2", "gm": "geometric_median",
                    "random": "random"}
_ERROR_RATIO_GRID = [i / 20 for i in range(1, 20)]


class _Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2; this pipeline uses 1 for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


def _theta_flag(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number, got %r" % text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("FLOPs reduction must be a fraction in (0, 1)")
    return value


def _seed_flag(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer seed, got %r" % text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def _load_model(ns):
    net = netgraph.load_network(ns.net)
    archive = tensorio.read_archive(ns.weights)
    netgraph.validate_network(net, archive)
    return net, archive


def _fmt(value):
    return repr(float(value))


def _run_analyze(ns):
    net, archive = _load_model(ns)
    spectra = spectrum.layer_spectra(net, archive)
    lines = ["layer,index,eigenvalue,cumulative_ratio"]
    for spec in net.layers:
        if spec.name not in spectra:
            continue
        s = spectra[spec.name]
        for i, (value, ratio) in enumerate(zip(s.eigenvalues, s.cumulative_ratio)):
            lines.append("%s,%d,%s,%s" % (spec.name, i + 1, _fmt(value), _fmt(ratio)))
    netgraph.write_text_atomic("\n".join(lines) + "\n", ns.out)
    return 0


def _criterion_from_flags(ns):
    kind = _CRITERION_FLAGS[ns.criterion]
    seed = ns.seed if kind == "random" else None
    return criteria.CriterionKind(kind=kind, seed=seed)


def _run_plan(ns):
    net, archive = _load_model(ns)
    spectra = spectrum.layer_spectra(net, archive)
    theta = ns.flops_reduction
    if ns.strategy == "snf":
        result = allocator.search_beta(spectra, net, theta)
    elif ns.strategy == "uniform":
        result = allocator.uniform_allocation(net, theta)
    else:
        result = allocator.random_allocation(net, theta, ns.seed)
    plan = pruner.build_plan(net, archive, result.allocation,
                             _criterion_from_flags(ns), theta_target=theta,
                             spectra=spectra)
    pruner.save_plan(plan, ns.out)
    if result.nearest_achievable:
        sys.stderr.write("warning: target reduction %s is unreachable; wrote the"
                         " nearest achievable plan (achieved %s)\n"
                         % (_fmt(theta), _fmt(result.achieved)))
        return 3
    return 0


def _run_prune(ns):
    net, archive = _load_model(ns)
    plan = pruner.load_plan(ns.plan)
    pruned_net, pruned_archive = pruner.apply_plan(net, archive, plan)
    tensorio.write_archive(pruned_archive, ns.out_weights)
    netgraph.save_network(pruned_net, ns.out_net)
    return 0


def _run_ablate(ns):
    net, archive = _load_model(ns)
    spectra = spectrum.layer_spectra(net, archive)
    theta = ns.flops_reduction
    results = [
        ("snf", allocator.search_beta(spectra, net, theta)),
        ("uniform", allocator.uniform_allocation(net, theta)),
        ("random", allocator.random_allocation(net, theta, ns.seed)),
    ]
    lines = ["strategy,achieved,total_reconstruction_error"]
    for label, result in results:
        lines.append("%s,%s,%s" % (label, _fmt(result.achieved),
                                   _fmt(allocator.total_error(spectra,
                                                              result.allocation))))
    netgraph.write_text_atomic("\n".join(lines) + "\n", ns.out)
    if any(result.nearest_achievable for _, result in results):
        sys.stderr.write("warning: target reduction %s is unreachable; table shows"
                         " the nearest achievable reductions\n" % _fmt(theta))
        return 3
    return 0


def _run_curve(ns):
    net, archive = _load_model(ns)
    spectra = spectrum.layer_spectra(net, archive)
    if ns.mode == "beta-d":
        lines = ["layer,beta_breakpoint,d"]
        for spec in net.layers:
            if spec.name not in spectra:
                continue
            for breakpoint_, d in allocator.curve_beta_vs_d(spectra[spec.name]):
                lines.append("%s,%s,%d" % (spec.name, _fmt(breakpoint_), d))
    else:
        lines = ["theta,beta,achieved,total_reconstruction_error"]
        rows = allocator.curve_error_vs_ratio(spectra, net, _ERROR_RATIO_GRID)
        for theta, beta, achieved, err in rows:
            lines.append("%s,%s,%s,%s" % (_fmt(theta), _fmt(beta), _fmt(achieved),
                                          _fmt(err)))
    netgraph.write_text_atomic("\n".join(lines) + "\n", ns.out)
    return 0


def _run_scaffold(ns):
    net, archive = scaffold(ns.template, ns.seed)
    tensorio.write_archive(archive, ns.out_weights)
    netgraph.save_network(net, ns.out_net)
    return 0


def _run_eval(ns):
    net, archive = _load_model(ns)
    inputs = tensorio.read_archive(ns.input)
    if "input" not in inputs:
        raise ValueError("input archive must contain a tensor named 'input'")
    output = netgraph.forward_eval(net, archive, inputs["input"].astype("float64"))
    result = tensorio.WeightArchive({"output": output})
    tensorio.write_archive(result, ns.out)
    return 0


def _add_model_flags(sub):
    sub.add_argument("--net", required=True, help="network description (JSON)")
    sub.add_argument("--weights", required=True, help="weight archive (SNF1)")


def build_parser():
    parser = _Parser(prog="snfprune",
                     description="Structured filter-pruning planner: search"
                                 " per-layer filter counts under a FLOPs budget,"
                                 " then slice the weights.")
    subs = parser.add_subparsers(dest="verb", required=True, metavar="verb")

    p = subs.add_parser("analyze", help="per-layer eigenvalue spectra as CSV")
    _add_model_flags(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(run=_run_analyze)

    p = subs.add_parser("plan", help="search an allocation and write a pruning plan")
    _add_model_flags(p)
    p.add_argument("--flops-reduction", required=True, type=_theta_flag,
                   help="target fractional MAC reduction in (0, 1)")
    p.add_argument("--criterion", choices=sorted(_CRITERION_FLAGS), default="l1",
                   help="filter importance criterion (default l1)")
    p.add_argument("--strategy", choices=["snf", "uniform", "random"],
                   default="snf", help="allocation strategy (default snf)")
    p.add_argument("--seed", type=_seed_flag,
                   help="seed for the random criterion or random strategy")
    p.add_argument("--out", required=True, help="output plan path (JSON)")
    p.set_defaults(run=_run_plan)

    p = subs.add_parser("prune", help="apply a plan: slice weights, shrink the net")
    _add_model_flags(p)
    p.add_argument("--plan", required=True, help="plan file from the plan verb")
    p.add_argument("--out-weights", required=True, help="pruned archive path")
    p.add_argument("--out-net", required=True, help="pruned network path")
    p.set_defaults(run=_run_prune)

    p = subs.add_parser("ablate",
                        help="compare snf, uniform and random allocations")
    _add_model_flags(p)
    p.add_argument("--flops-reduction", required=True, type=_theta_flag,
                   help="target fractional MAC reduction in (0, 1)")
    p.add_argument("--seed", type=_seed_flag, default=0,
                   help="seed for the random allocation row (default 0)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(run=_run_ablate)

    p = subs.add_parser("curve", help="threshold/error curves as CSV")
    _add_model_flags(p)
    p.add_argument("--mode", choices=["beta-d", "error-ratio"], required=True,
                   help="beta-d: threshold step functions; error-ratio:"
                        " reconstruction error over a target grid")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(run=_run_curve)

    p = subs.add_parser("scaffold", help="generate an example network and weights")
    p.add_argument("--template", choices=list(TEMPLATES), required=True)
    p.add_argument("--seed", type=_seed_flag, required=True)
    p.add_argument("--out-net", required=True, help="network output path")
    p.add_argument("--out-weights", required=True, help="archive output path")
    p.set_defaults(run=_run_scaffold)

    p = subs.add_parser("eval",
                        help="reference forward pass: reads tensor 'input',"
                             " writes tensor 'output'")
    _add_model_flags(p)
    p.add_argument("--input", required=True, help="archive holding tensor 'input'")
    p.add_argument("--out", required=True, help="archive to hold tensor 'output'")
    p.set_defaults(run=_run_eval)
    return parser


def console_main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.verb == "plan":
        needs_seed = ns.criterion == "random" or ns.strategy == "random"
        if needs_seed and ns.seed is None:
            parser.error("--seed is required with --criterion random or"
                         " --strategy random")
        if not needs_seed and ns.seed is not None:
            parser.error("--seed only applies to --criterion random or"
                         " --strategy random")
    try:
        return ns.run(ns)
    except (OSError, ValueError, RuntimeError) as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 2


if __name__ == "__main__":
    sys.exit(console_main())
