import json

import numpy as np
import pytest

from snfprune.allocator import Allocation, search_beta, uniform_allocation
from snfprune.criteria import CriterionKind
from snfprune.netgraph import LayerSpec, NetworkSpec, flops, forward_eval
from snfprune.pruner import (apply_plan, build_plan, load_plan, plan_from_dict,
                             plan_to_dict, report, save_plan)
from snfprune.scaffold import scaffold
from snfprune.spectrum import layer_spectra
from snfprune.tensorio import WeightArchive, to_bytes

L1 = CriterionKind("l1")


def _conv(name, src, in_c, out_c, k=(3, 3), p=(1, 1), prunable=True, group=None):
    return LayerSpec(name=name, kind="conv2d", in_channels=in_c, out_channels=out_c,
                     kernel_hw=k, stride_hw=(1, 1), padding_hw=p, prunable=prunable,
                     coupling_group=group,
                     bindings={"weight": name + ".weight"}, inputs=(src,))


def _hand_net():
    # Four 1x1 filters with L1 masses 3, 0.5, 6, 1.
    net = NetworkSpec(input_shape=(1, 4, 4),
                      layers=(_conv("c", "input", 1, 4, k=(1, 1), p=(0, 0)),),
                      output="c")
    w = np.array([3.0, -0.5, 6.0, 1.0], dtype=np.float32).reshape(4, 1, 1, 1)
    return net, WeightArchive({"c.weight": w})


def test_build_plan_l1_hand_selection():
    net, archive = _hand_net()
    plan = build_plan(net, archive, Allocation(per_layer={"c": 2}), L1)
    assert plan.layers["c"].kept == (0, 2)
    assert plan.layers["c"].removed == (1, 3)
    assert plan.strategy == "snf" and plan.beta is None
    assert plan.flops_before == 4 * 4 * 4 * 1
    assert plan.flops_after == 4 * 4 * 2 * 1
    assert plan.achieved == pytest.approx(0.5, abs=1e-12)
    assert 0.0 <= plan.layers["c"].achieved_layer_threshold <= 1.0


def test_build_plan_threshold_matches_spectrum():
    net, archive = scaffold("toy-plain", seed=3)
    spectra = layer_spectra(net, archive)
    alloc = Allocation(per_layer={"conv1": 5, "conv2": 7})
    plan = build_plan(net, archive, alloc, L1)
    for name, d in alloc.per_layer.items():
        want = float(spectra[name].cumulative_ratio[d - 1])
        assert plan.layers[name].achieved_layer_threshold == pytest.approx(
            want, abs=1e-12)
    reused = build_plan(net, archive, alloc, L1, spectra=spectra)
    assert reused.layers == plan.layers


def test_build_plan_records_beta_and_theta():
    net, archive = scaffold("toy-plain", seed=3)
    spectra = layer_spectra(net, archive)
    result = search_beta(spectra, net, 0.4)
    plan = build_plan(net, archive, result.allocation, L1, theta_target=0.4,
                      spectra=spectra)
    assert plan.theta_target == 0.4
    assert plan.beta == result.allocation.beta
    uni = uniform_allocation(net, 0.4)
    uni_plan = build_plan(net, archive, uni.allocation, L1, theta_target=0.4)
    assert uni_plan.beta is None and uni_plan.strategy == "uniform"


def test_build_plan_allocation_validation():
    net, archive = _hand_net()
    with pytest.raises(ValueError, match="unknown allocation strategy"):
        build_plan(net, archive, Allocation(per_layer={"c": 2}, strategy="foo"), L1)
    with pytest.raises(ValueError, match="unknown layer"):
        build_plan(net, archive, Allocation(per_layer={"x": 1}), L1)
    with pytest.raises(ValueError, match="must be in"):
        build_plan(net, archive, Allocation(per_layer={"c": 5}), L1)
    with pytest.raises(ValueError, match="must be in"):
        build_plan(net, archive, Allocation(per_layer={"c": 0}), L1)


def test_build_plan_group_validation_and_shared_selection():
    net = NetworkSpec(
        input_shape=(3, 8, 8),
        layers=(_conv("a", "input", 3, 4, group="g"),
                _conv("b", "a", 4, 4, group="g")),
        output="b")
    rng = np.random.default_rng(41)
    archive = WeightArchive({"a.weight": rng.normal(size=(4, 3, 3, 3)),
                             "b.weight": rng.normal(size=(4, 4, 3, 3))})
    with pytest.raises(ValueError, match="unequal reserved counts"):
        build_plan(net, archive, Allocation(per_layer={"a": 2, "b": 3}), L1)
    with pytest.raises(ValueError, match="only part of coupling group"):
        build_plan(net, archive, Allocation(per_layer={"a": 2}), L1)
    plan = build_plan(net, archive, Allocation(per_layer={"a": 2, "b": 2}), L1)
    assert plan.layers["a"].kept == plan.layers["b"].kept


def test_noop_plan_and_apply_identity():
    net, archive = scaffold("toy-plain", seed=3)
    alloc = Allocation(per_layer={"conv1": 8, "conv2": 12})
    plan = build_plan(net, archive, alloc, L1)
    assert plan.achieved == 0.0
    assert plan.flops_before == plan.flops_after
    for entry in plan.layers.values():
        assert entry.removed == ()
    pruned_net, pruned_archive = apply_plan(net, archive, plan)
    assert pruned_net == net
    assert to_bytes(pruned_archive) == to_bytes(archive)
    again_net, again_archive = apply_plan(pruned_net, pruned_archive, plan)
    assert again_net == net
    assert to_bytes(again_archive) == to_bytes(archive)


def test_apply_plan_slices_weights_and_consumers():
    net = NetworkSpec(
        input_shape=(3, 8, 8),
        layers=(_conv("a", "input", 3, 4),
                _conv("b", "a", 4, 8, prunable=False)),
        output="b")
    rng = np.random.default_rng(42)
    wa = np.zeros((4, 3, 3, 3), dtype=np.float32)
    wa[0], wa[1], wa[2], wa[3] = 3.0, 0.1, 2.0, 0.5
    wb = rng.normal(size=(8, 4, 3, 3)).astype(np.float32)
    archive = WeightArchive({"a.weight": wa, "b.weight": wb})
    plan = build_plan(net, archive, Allocation(per_layer={"a": 2}), L1)
    assert plan.layers["a"].kept == (0, 2)
    pruned_net, pruned_archive = apply_plan(net, archive, plan)
    assert pruned_net.layer("a").out_channels == 2
    assert pruned_net.layer("b").in_channels == 2
    assert np.array_equal(pruned_archive["a.weight"], wa[[0, 2]])
    assert np.array_equal(pruned_archive["b.weight"], wb[:, [0, 2]])
    assert flops(pruned_net).total == plan.flops_after


def test_apply_plan_slices_bn_bias_and_linear():
    net, archive = scaffold("toy-plain", seed=3)
    plan = build_plan(net, archive,
                      Allocation(per_layer={"conv1": 5, "conv2": 7}), L1)
    pruned_net, pruned_archive = apply_plan(net, archive, plan)
    kept1 = list(plan.layers["conv1"].kept)
    kept2 = list(plan.layers["conv2"].kept)
    for role in ("scale", "shift", "mean", "var"):
        assert np.array_equal(pruned_archive["bn1." + role],
                              archive["bn1." + role][kept1])
    assert np.array_equal(pruned_archive["conv2.bias"],
                          archive["conv2.bias"][kept2])
    assert np.array_equal(pruned_archive["conv2.weight"],
                          archive["conv2.weight"][np.ix_(kept2, kept1)])
    assert np.array_equal(pruned_archive["fc.weight"],
                          archive["fc.weight"][:, kept2])
    assert pruned_net.layer("fc").in_channels == 7
    assert flops(pruned_net).total == plan.flops_after


def test_apply_plan_grouped_residual_consistency():
    net, archive = scaffold("toy-residual", seed=9)
    alloc = Allocation(per_layer={"conv_in": 5, "conv_a": 6, "conv_b": 5})
    plan = build_plan(net, archive, alloc, L1)
    assert plan.layers["conv_in"].kept == plan.layers["conv_b"].kept
    pruned_net, pruned_archive = apply_plan(net, archive, plan)
    assert flops(pruned_net).total == plan.flops_after
    x = np.random.default_rng(10).normal(size=(3, 8, 8))
    out = forward_eval(pruned_net, pruned_archive, x)
    assert out.shape == (4,)


def test_apply_plan_partition_validation():
    net, archive = _hand_net()
    plan = build_plan(net, archive, Allocation(per_layer={"c": 2}), L1)
    # Internally consistent (covers 0..2) but one filter short for the layer.
    broken = plan_from_dict(json.loads(json.dumps({
        **plan_to_dict(plan),
        "layers": {"c": {"kept": [0], "removed": [1, 2],
                         "achieved_layer_threshold": 0.5}},
    })))
    with pytest.raises(ValueError, match="does not partition"):
        apply_plan(net, archive, broken)
    stray = plan_from_dict({**plan_to_dict(plan),
                            "layers": {"nope": {"kept": [0], "removed": [],
                                                "achieved_layer_threshold": 1.0}}})
    with pytest.raises(ValueError, match="non-prunable or unknown"):
        apply_plan(net, archive, stray)


def test_zeroed_filters_match_pruned_forward():
    # Zeroing a removed filter's outgoing weights (and its bias/batchnorm
    # scale and shift) silences the channel, so the full network computes
    # the same function as the physically pruned one.
    for seed in range(4):
        net, archive = scaffold("toy-plain", seed=seed)
        plan = build_plan(net, archive,
                          Allocation(per_layer={"conv1": 5, "conv2": 7}), L1)
        pruned_net, pruned_archive = apply_plan(net, archive, plan)

        zeroed = WeightArchive({name: archive[name] for name in archive.names()})
        removed1 = list(plan.layers["conv1"].removed)
        removed2 = list(plan.layers["conv2"].removed)
        w1 = zeroed["conv1.weight"].copy()
        w1[removed1] = 0.0
        zeroed["conv1.weight"] = w1
        for role in ("scale", "shift"):
            v = zeroed["bn1." + role].copy()
            v[removed1] = 0.0
            zeroed["bn1." + role] = v
        w2 = zeroed["conv2.weight"].copy()
        w2[removed2] = 0.0
        zeroed["conv2.weight"] = w2
        b2 = zeroed["conv2.bias"].copy()
        b2[removed2] = 0.0
        zeroed["conv2.bias"] = b2

        rng = np.random.default_rng(seed + 100)
        for _ in range(3):
            x = rng.normal(size=(3, 8, 8))
            full = forward_eval(net, zeroed, x)
            small = forward_eval(pruned_net, pruned_archive, x)
            assert np.max(np.abs(full - small)) <= 1e-5


def test_report_table_and_csv():
    net, archive = scaffold("toy-plain", seed=3)
    plan = build_plan(net, archive,
                      Allocation(per_layer={"conv1": 5, "conv2": 7}), L1)
    text, csv_text = report(plan, net)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "layer,N,d,threshold,macs_before,macs_after"
    assert len(lines) == 3
    parsed = {}
    for line in lines[1:]:
        name, n, d, threshold, before, after = line.split(",")
        parsed[name] = (int(n), int(d), float(threshold), int(before), int(after))
    assert parsed["conv1"][0] == 8 and parsed["conv1"][1] == 5
    assert parsed["conv2"][0] == 12 and parsed["conv2"][1] == 7
    for name, entry in plan.layers.items():
        assert parsed[name][2] == entry.achieved_layer_threshold  # repr round trip
    assert sum(p[3] for p in parsed.values()) <= plan.flops_before
    assert "total MACs %d -> %d" % (plan.flops_before, plan.flops_after) in text
    assert text.splitlines()[0].split() == ["layer", "N", "d", "threshold",
                                            "macs_before", "macs_after"]


def test_plan_json_round_trip(tmp_path):
    net, archive = scaffold("toy-plain", seed=3)
    spectra = layer_spectra(net, archive)
    result = search_beta(spectra, net, 0.4)
    plan = build_plan(net, archive, result.allocation, L1, theta_target=0.4,
                      spectra=spectra)
    path = tmp_path / "plan.json"
    save_plan(plan, str(path))
    assert load_plan(str(path)) == plan
    assert plan_from_dict(plan_to_dict(plan)) == plan
    twice = tmp_path / "plan2.json"
    save_plan(plan, str(twice))
    assert path.read_bytes() == twice.read_bytes()


def test_plan_from_dict_validation():
    net, archive = _hand_net()
    base = plan_to_dict(build_plan(net, archive,
                                   Allocation(per_layer={"c": 2}), L1,
                                   theta_target=0.5))

    with pytest.raises(ValueError, match="missing"):
        plan_from_dict({k: v for k, v in base.items() if k != "strategy"})
    with pytest.raises(ValueError, match="unknown plan strategy"):
        plan_from_dict({**base, "strategy": "bogus"})
    with pytest.raises(ValueError, match="fraction"):
        plan_from_dict({**base, "beta": 1.5})
    with pytest.raises(ValueError, match="non-negative integer"):
        plan_from_dict({**base, "flops_after": -1})
    with pytest.raises(ValueError, match="must be positive"):
        plan_from_dict({**base, "flops_before": 0, "achieved": 0.0})
    with pytest.raises(ValueError, match="inconsistent with FLOPs"):
        plan_from_dict({**base, "achieved": base["achieved"] + 0.25})
    bad_layer = {**base, "layers": {"c": {"kept": [2, 0], "removed": [1, 3],
                                          "achieved_layer_threshold": 0.5}}}
    with pytest.raises(ValueError, match="sorted and partition"):
        plan_from_dict(bad_layer)
    overlap = {**base, "layers": {"c": {"kept": [0, 1], "removed": [1, 2, 3],
                                        "achieved_layer_threshold": 0.5}}}
    with pytest.raises(ValueError, match="sorted and partition"):
        plan_from_dict(overlap)
    empty = {**base, "layers": {"c": {"kept": [], "removed": [0, 1, 2, 3],
                                      "achieved_layer_threshold": 0.0}}}
    with pytest.raises(ValueError, match="keeps no filters"):
        plan_from_dict(empty)
    with pytest.raises(ValueError, match="must carry"):
        plan_from_dict({**base, "layers": {"c": {"kept": [0, 2]}}})
    with pytest.raises(ValueError, match="list of indices"):
        plan_from_dict({**base, "layers": {"c": {"kept": [0, -2],
                                                 "removed": [1, 3],
                                                 "achieved_layer_threshold": 0.5}}})
