"""Turn an allocation plus a criterion into a concrete, applicable plan.

A plan records, per prunable layer, exactly which filter indices survive.
Applying it slices conv weight rows, their biases, downstream batchnorm
parameter vectors, and the input-channel dimension of every consumer, then
revalidates the smaller network. Plans serialize to JSON so other tools
can produce or consume them.
"""

import json
from dataclasses import dataclass

import numpy as np

from snfprune.allocator import STRATEGIES
from snfprune.criteria import select_kept, select_kept_grouped
from snfprune.netgraph import (INPUT_NAME, GraphError, LayerSpec, NetworkSpec,
                               flops, validate_network, write_text_atomic)
from snfprune.spectrum import build_filter_matrix, center, gram_spectrum
from snfprune.tensorio import WeightArchive

ACHIEVED_TOL = 1e-12


@dataclass(frozen=True)
class PlanLayer:
    kept: tuple
    removed: tuple
    achieved_layer_threshold: float


@dataclass(frozen=True)
class PruningPlan:
    theta_target: float
    beta: float
    strategy: str
    flops_before: int
    flops_after: int
    achieved: float
    layers: dict


def _check_allocation(net, alloc):
    if alloc.strategy not in STRATEGIES:
        raise ValueError("unknown allocation strategy %r" % alloc.strategy)
    by_name = {spec.name: spec for spec in net.layers}
    groups = {}
    for name, d in alloc.per_layer.items():
        if name not in by_name:
            raise ValueError("allocation references unknown layer %r" % name)
        spec = by_name[name]
        if not spec.prunable:
            raise ValueError("allocation references non-prunable layer %r" % name)
        if not isinstance(d, int) or isinstance(d, bool) or not 1 <= d <= spec.out_channels:
            raise ValueError("allocation for %r must be in [1, %d], got %r"
                             % (name, spec.out_channels, d))
        if spec.coupling_group is not None:
            groups.setdefault(spec.coupling_group, set()).add(d)
    for group, counts in groups.items():
        if len(counts) != 1:
            raise ValueError("coupling group %r has unequal reserved counts %s"
                             % (group, sorted(counts)))
    for spec in net.layers:
        if (spec.prunable and spec.coupling_group is not None
                and any(m.name in alloc.per_layer
                        for m in net.layers if m.coupling_group == spec.coupling_group)
                and spec.name not in alloc.per_layer):
            raise ValueError("allocation covers only part of coupling group %r"
                             % spec.coupling_group)


def build_plan(net, archive, alloc, criterion, theta_target=None, spectra=None):
    """Select kept filter indices for every allocated layer and fix the totals.

    ``spectra`` may carry precomputed layer spectra to avoid recomputation;
    thresholds are the cumulative energy ratio each layer actually retains.
    """
    validate_network(net, archive)
    _check_allocation(net, alloc)

    matrices = {name: build_filter_matrix(name, archive[net.layer(name).bindings["weight"]])
                for name in alloc.per_layer}
    kept_sets = {}
    done_groups = set()
    for spec in net.layers:
        if spec.name not in alloc.per_layer:
            continue
        d = alloc.per_layer[spec.name]
        if spec.coupling_group is None:
            kept_sets[spec.name] = select_kept_grouped([matrices[spec.name]],
                                                       criterion, d)
        elif spec.coupling_group not in done_groups:
            members = [m.name for m in net.layers
                       if m.coupling_group == spec.coupling_group]
            kept = select_kept_grouped([matrices[name] for name in members],
                                       criterion, d)
            for name in members:
                kept_sets[name] = kept
            done_groups.add(spec.coupling_group)

    layers = {}
    for name, kept in kept_sets.items():
        n = net.layer(name).out_channels
        removed = sorted(set(range(n)) - set(kept))
        if spectra is not None and name in spectra:
            spectrum = spectra[name]
        else:
            spectrum = gram_spectrum(center(matrices[name]))
        threshold = float(spectrum.cumulative_ratio[len(kept) - 1])
        layers[name] = PlanLayer(kept=tuple(kept), removed=tuple(removed),
                                 achieved_layer_threshold=threshold)

    before = flops(net)
    after = flops(net, {name: len(entry.kept) for name, entry in layers.items()})
    return PruningPlan(
        theta_target=theta_target,
        beta=alloc.beta if alloc.strategy == "snf" else None,
        strategy=alloc.strategy,
        flops_before=before.total,
        flops_after=after.total,
        achieved=1.0 - after.total / before.total,
        layers=layers,
    )


def _kept_or_full(plan, spec):
    if spec.name in plan.layers:
        return list(plan.layers[spec.name].kept)
    return list(range(spec.out_channels))


def apply_plan(net, archive, plan):
    """Physically slice the archive and shrink the network per the plan."""
    validate_network(net, archive)
    prunable = {spec.name for spec in net.layers if spec.prunable}
    for name, entry in plan.layers.items():
        if name not in prunable:
            raise ValueError("plan references non-prunable or unknown layer %r" % name)
        n = net.layer(name).out_channels
        kept, removed = list(entry.kept), list(entry.removed)
        if sorted(kept + removed) != list(range(n)) or not kept:
            raise ValueError("plan for %r does not partition filters 0..%d"
                             % (name, n - 1))

    pruned = WeightArchive()
    for name, tensor in archive.items():
        pruned[name] = tensor

    kept_at = {INPUT_NAME: list(range(net.input_shape[0]))}
    new_layers = []
    for spec in net.layers:
        kept_in = kept_at[spec.inputs[0]]
        fields = {"in_channels": len(kept_in), "out_channels": spec.out_channels}
        if spec.kind == "conv2d":
            kept_out = _kept_or_full(plan, spec)
            w = archive[spec.bindings["weight"]]
            pruned[spec.bindings["weight"]] = w[np.ix_(kept_out, kept_in)]
            if "bias" in spec.bindings:
                pruned[spec.bindings["bias"]] = archive[spec.bindings["bias"]][kept_out]
            fields["out_channels"] = len(kept_out)
        elif spec.kind == "batchnorm":
            kept_out = kept_in
            for role in ("scale", "shift", "mean", "var"):
                pruned[spec.bindings[role]] = archive[spec.bindings[role]][kept_in]
            fields["out_channels"] = len(kept_in)
        elif spec.kind == "add":
            kept_out = kept_in
            for ref in spec.inputs[1:]:
                if kept_at[ref] != kept_in:
                    raise GraphError("layer %r: pruned inputs disagree on surviving"
                                     " channels" % spec.name)
            fields["out_channels"] = len(kept_in)
        elif spec.kind == "linear":
            kept_out = list(range(spec.out_channels))
            w = archive[spec.bindings["weight"]]
            pruned[spec.bindings["weight"]] = w[:, kept_in]
        else:
            kept_out = kept_in
            fields["out_channels"] = len(kept_in)
        kept_at[spec.name] = kept_out
        new_layers.append(LayerSpec(
            name=spec.name, kind=spec.kind,
            kernel_hw=spec.kernel_hw, stride_hw=spec.stride_hw,
            padding_hw=spec.padding_hw, prunable=spec.prunable,
            coupling_group=spec.coupling_group, bindings=dict(spec.bindings),
            inputs=spec.inputs, **fields))

    pruned_net = NetworkSpec(input_shape=net.input_shape, layers=tuple(new_layers),
                             output=net.output)
    validate_network(pruned_net, pruned)
    return pruned_net, pruned


def report(plan, net):
    """Human-readable table plus machine CSV for a plan on its network."""
    before = flops(net).per_layer
    after = flops(net, {name: len(entry.kept)
                        for name, entry in plan.layers.items()}).per_layer
    rows = []
    for spec in net.layers:
        if spec.name not in plan.layers:
            continue
        entry = plan.layers[spec.name]
        rows.append((spec.name, spec.out_channels, len(entry.kept),
                     entry.achieved_layer_threshold,
                     before[spec.name], after[spec.name]))

    header = ("layer", "N", "d", "threshold", "macs_before", "macs_after")
    csv_lines = [",".join(header)]
    for row in rows:
        csv_lines.append("%s,%d,%d,%s,%d,%d"
                         % (row[0], row[1], row[2], repr(row[3]), row[4], row[5]))
    csv_text = "\n".join(csv_lines) + "\n"

    widths = [max(len(str(v)) for v in [header[i]] + [
        ("%.6f" % r[i]) if i == 3 else str(r[i]) for r in rows])
        for i in range(6)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    for row in rows:
        cells = [str(row[0]), str(row[1]), str(row[2]), "%.6f" % row[3],
                 str(row[4]), str(row[5])]
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)))
    lines.append("total MACs %d -> %d, reduction %s (strategy %s)"
                 % (plan.flops_before, plan.flops_after, repr(plan.achieved),
                    plan.strategy))
    return "\n".join(lines) + "\n", csv_text


def plan_to_dict(plan):
    return {
        "theta_target": plan.theta_target,
        "beta": plan.beta,
        "strategy": plan.strategy,
        "flops_before": plan.flops_before,
        "flops_after": plan.flops_after,
        "achieved": plan.achieved,
        "layers": {
            name: {
                "kept": list(entry.kept),
                "removed": list(entry.removed),
                "achieved_layer_threshold": entry.achieved_layer_threshold,
            }
            for name, entry in plan.layers.items()
        },
    }


def plan_from_dict(obj):
    if not isinstance(obj, dict):
        raise ValueError("plan document must be an object")
    required = {"theta_target", "beta", "strategy", "flops_before", "flops_after",
                "achieved", "layers"}
    missing = required - set(obj)
    if missing:
        raise ValueError("plan document missing %s" % sorted(missing))
    if obj["strategy"] not in STRATEGIES:
        raise ValueError("unknown plan strategy %r" % obj["strategy"])
    for frac_field in ("theta_target", "beta"):
        v = obj[frac_field]
        if v is not None and (not isinstance(v, (int, float)) or isinstance(v, bool)
                              or not 0.0 <= v <= 1.0):
            raise ValueError("%s must be null or a fraction in [0, 1], got %r"
                             % (frac_field, v))
    for count_field in ("flops_before", "flops_after"):
        v = obj[count_field]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ValueError("%s must be a non-negative integer" % count_field)
    if obj["flops_before"] <= 0:
        raise ValueError("flops_before must be positive")
    expected = 1.0 - obj["flops_after"] / obj["flops_before"]
    if abs(obj["achieved"] - expected) > ACHIEVED_TOL:
        raise ValueError("achieved %r inconsistent with FLOPs fields (expected %r)"
                         % (obj["achieved"], expected))
    if not isinstance(obj["layers"], dict):
        raise ValueError("plan layers must be an object")

    layers = {}
    for name, entry in obj["layers"].items():
        if not isinstance(entry, dict) or {"kept", "removed",
                                           "achieved_layer_threshold"} - set(entry):
            raise ValueError("plan layer %r must carry kept, removed and"
                             " achieved_layer_threshold" % name)
        kept, removed = entry["kept"], entry["removed"]
        for label, idx_list in (("kept", kept), ("removed", removed)):
            if (not isinstance(idx_list, list)
                    or any(not isinstance(i, int) or isinstance(i, bool) or i < 0
                           for i in idx_list)):
                raise ValueError("plan layer %r: %s must be a list of indices"
                                 % (name, label))
        if not kept:
            raise ValueError("plan layer %r keeps no filters" % name)
        union = sorted(kept + removed)
        if (sorted(kept) != kept or sorted(removed) != removed
                or union != list(range(len(union)))):
            raise ValueError("plan layer %r: kept and removed must be sorted and"
                             " partition 0..N-1" % name)
        layers[name] = PlanLayer(kept=tuple(kept), removed=tuple(removed),
                                 achieved_layer_threshold=float(
                                     entry["achieved_layer_threshold"]))
    return PruningPlan(
        theta_target=obj["theta_target"],
        beta=obj["beta"],
        strategy=obj["strategy"],
        flops_before=obj["flops_before"],
        flops_after=obj["flops_after"],
        achieved=float(obj["achieved"]),
        layers=layers,
    )


def save_plan(plan, path):
    """Write the plan document to ``path`` atomically."""
    text = json.dumps(plan_to_dict(plan), indent=2, sort_keys=True) + "\n"
    write_text_atomic(text, path)


def load_plan(path):
    """Read and validate a plan document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError("plan document is not valid JSON: %s" % exc) from None
    return plan_from_dict(obj)
