"""Deterministic random-weight example networks.

Three templates: a plain conv chain, a small residual net with an active
coupling group, and a full ResNet-56 silhouette (16/32/64-channel stages,
nine blocks each, projection shortcuts at stage entries). Weights come
from the portable seeded generator, so one (template, seed) pair always
produces the same archive bytes.
"""

import math

from snfprune._rng import SplitMix64
from snfprune.netgraph import LayerSpec, NetworkSpec
from snfprune.tensorio import WeightArchive

TEMPLATES = ("toy-plain", "toy-residual", "resnet56-shape")


class _Builder:
    def __init__(self, input_shape, seed):
        self.input_shape = input_shape
        self.rng = SplitMix64(seed)
        self.layers = []
        self.archive = WeightArchive()

    def _draw(self, shape, low, high):
        count = 1
        for s in shape:
            count *= s
        values = low + (high - low) * self.rng.unit_array(count)
        return values.reshape(shape)

    def conv(self, name, src, in_c, out_c, kernel=(3, 3), stride=(1, 1),
             padding=(1, 1), prunable=False, group=None, bias=False):
        bound = math.sqrt(1.0 / (in_c * kernel[0] * kernel[1]))
        bindings = {"weight": name + ".weight"}
        self.archive[name + ".weight"] = self._draw(
            (out_c, in_c) + tuple(kernel), -bound, bound)
        if bias:
            bindings["bias"] = name + ".bias"
            self.archive[name + ".bias"] = self._draw((out_c,), -bound, bound)
        self.layers.append(LayerSpec(
            name=name, kind="conv2d", in_channels=in_c, out_channels=out_c,
            kernel_hw=tuple(kernel), stride_hw=tuple(stride),
            padding_hw=tuple(padding), prunable=prunable, coupling_group=group,
            bindings=bindings, inputs=(src,)))
        return name

    def batchnorm(self, name, src, channels):
        bindings = {}
        for role, low, high in (("scale", 0.5, 1.5), ("shift", -0.2, 0.2),
                                ("mean", -0.1, 0.1), ("var", 0.5, 1.5)):
            tensor = name + "." + role
            bindings[role] = tensor
            self.archive[tensor] = self._draw((channels,), low, high)
        self.layers.append(LayerSpec(
            name=name, kind="batchnorm", in_channels=channels,
            out_channels=channels, bindings=bindings, inputs=(src,)))
        return name

    def relu(self, name, src, channels):
        self.layers.append(LayerSpec(
            name=name, kind="relu", in_channels=channels, out_channels=channels,
            inputs=(src,)))
        return name

    def add(self, name, srcs, channels):
        self.layers.append(LayerSpec(
            name=name, kind="add", in_channels=channels, out_channels=channels,
            inputs=tuple(srcs)))
        return name

    def linear(self, name, src, in_c, out_c, bias=True):
        bound = math.sqrt(1.0 / in_c)
        bindings = {"weight": name + ".weight"}
        self.archive[name + ".weight"] = self._draw((out_c, in_c), -bound, bound)
        if bias:
            bindings["bias"] = name + ".bias"
            self.archive[name + ".bias"] = self._draw((out_c,), -bound, bound)
        self.layers.append(LayerSpec(
            name=name, kind="linear", in_channels=in_c, out_channels=out_c,
            bindings=bindings, inputs=(src,)))
        return name

    def network(self, output):
        return NetworkSpec(input_shape=self.input_shape,
                           layers=tuple(self.layers), output=output)


def _toy_plain(seed):
    b = _Builder((3, 8, 8), seed)
    x = b.conv("conv1", "input", 3, 8, prunable=True)
    x = b.batchnorm("bn1", x, 8)
    x = b.relu("relu1", x, 8)
    x = b.conv("conv2", x, 8, 12, prunable=True, bias=True)
    x = b.relu("relu2", x, 12)
    out = b.linear("fc", x, 12, 4)
    return b.network(out), b.archive


def _toy_residual(seed):
    b = _Builder((3, 8, 8), seed)
    x = b.conv("conv_in", "input", 3, 8, prunable=True, group="res0")
    x = b.batchnorm("bn_in", x, 8)
    skip = b.relu("relu_in", x, 8)
    x = b.conv("conv_a", skip, 8, 8, prunable=True)
    x = b.batchnorm("bn_a", x, 8)
    x = b.relu("relu_a", x, 8)
    x = b.conv("conv_b", x, 8, 8, prunable=True, group="res0")
    x = b.batchnorm("bn_b", x, 8)
    x = b.add("add_out", (skip, x), 8)
    x = b.relu("relu_out", x, 8)
    out = b.linear("fc", x, 8, 4)
    return b.network(out), b.archive


def _resnet56_shape(seed):
    # CIFAR ResNet-56 silhouette: stem conv, three stages of nine two-conv
    # blocks at 16/32/64 channels, 1x1 stride-2 projection shortcuts at the
    # entries of stages 2 and 3, global-average-pool linear head.
    #
    # Every conv feeding a residual add keeps its full width (the stem, the
    # projections, and each block's second conv, tied by per-stage coupling
    # groups); each block's first conv is prunable independently.
    b = _Builder((3, 32, 32), seed)
    x = b.conv("conv1", "input", 3, 16, group="shortcut1")
    x = b.batchnorm("bn1", x, 16)
    x = b.relu("relu1", x, 16)

    prev, prev_c = x, 16
    for stage, channels in ((1, 16), (2, 32), (3, 64)):
        group = "shortcut%d" % stage
        for block in range(9):
            base = "layer%d.%d" % (stage, block)
            entry = stage > 1 and block == 0
            stride = (2, 2) if entry else (1, 1)
            x = b.conv(base + ".conv1", prev, prev_c, channels, stride=stride,
                       prunable=True)
            x = b.batchnorm(base + ".bn1", x, channels)
            x = b.relu(base + ".relu1", x, channels)
            x = b.conv(base + ".conv2", x, channels, channels, group=group)
            x = b.batchnorm(base + ".bn2", x, channels)
            if entry:
                skip = b.conv(base + ".downsample.conv", prev, prev_c, channels,
                              kernel=(1, 1), stride=(2, 2), padding=(0, 0),
                              group=group)
                skip = b.batchnorm(base + ".downsample.bn", skip, channels)
            else:
                skip = prev
            x = b.add(base + ".add", (x, skip), channels)
            x = b.relu(base + ".relu2", x, channels)
            prev, prev_c = x, channels
    out = b.linear("fc", prev, 64, 10)
    return b.network(out), b.archive


def scaffold(template, seed):
    """Build (NetworkSpec, WeightArchive) for one of the known templates."""
    if template == "toy-plain":
        return _toy_plain(seed)
    if template == "toy-residual":
        return _toy_residual(seed)
    if template == "resnet56-shape":
        return _resnet56_shape(seed)
    raise ValueError("unknown template %r (choose from %s)"
                     % (template, ", ".join(TEMPLATES)))
