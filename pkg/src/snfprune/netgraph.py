"""Layer-graph model: validation, conv arithmetic, FLOPs, reference forward pass.

A network is a topologically ordered list of layers over a single input
tensor named ``input``. FLOPs are multiply-accumulate counts: conv and
linear layers pay, batchnorm/relu/add are free, biases excluded. The
reference evaluator is a direct-loop implementation used as a correctness
oracle at toy scale, not a fast inference path.
"""

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from snfprune._kernels import conv2d_fill

KINDS = ("conv2d", "batchnorm", "linear", "relu", "add")
INPUT_NAME = "input"
BN_EPS = 1e-5
_BINDING_ROLES = {
    "conv2d": ({"weight"}, {"bias"}),
    "batchnorm": ({"scale", "shift", "mean", "var"}, set()),
    "linear": ({"weight"}, {"bias"}),
    "relu": (set(), set()),
    "add": (set(), set()),
}


class GraphError(ValueError):
    """Raised when a network description or its bindings are inconsistent."""


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    in_channels: int
    out_channels: int
    kernel_hw: tuple = None
    stride_hw: tuple = None
    padding_hw: tuple = None
    prunable: bool = False
    coupling_group: str = None
    bindings: dict = field(default_factory=dict)
    inputs: tuple = ()


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple
    layers: tuple
    output: str

    def layer(self, name):
        for spec in self.layers:
            if spec.name == name:
                return spec
        raise GraphError("no layer named %r" % name)


@dataclass(frozen=True)
class FlopsReport:
    per_layer: dict
    total: int


def conv_out_size(size, kernel, stride, pad):
    """Standard conv arithmetic: floor((in + 2*pad - kernel)/stride) + 1."""
    out = (size + 2 * pad - kernel) // stride + 1
    if out < 1:
        raise GraphError("kernel %d with stride %d, pad %d does not fit input size %d"
                         % (kernel, stride, pad, size))
    return out


def _require_pair(layer, fname, value, minimum):
    if (not isinstance(value, (tuple, list)) or len(value) != 2
            or any(not isinstance(v, int) or isinstance(v, bool) or v < minimum
                   for v in value)):
        raise GraphError("layer %r: %s must be a pair of integers >= %d, got %r"
                         % (layer, fname, minimum, value))
    return tuple(value)


def _check_structure(net):
    """Graph-level checks independent of the weight archive.

    Returns a map layer name -> output shape descriptor (channels, h, w),
    with h = w = None once the tensor has collapsed to a vector.
    """
    if (not isinstance(net.input_shape, (tuple, list)) or len(net.input_shape) != 3
            or any(not isinstance(v, int) or isinstance(v, bool) or v < 1
                   for v in net.input_shape)):
        raise GraphError("input_shape must be (channels, height, width), got %r"
                         % (net.input_shape,))
    if not net.layers:
        raise GraphError("network has no layers")

    c0, h0, w0 = net.input_shape
    shapes = {INPUT_NAME: (c0, h0, w0)}
    groups = {}
    for spec in net.layers:
        if not isinstance(spec.name, str) or not spec.name:
            raise GraphError("layer names must be non-empty strings")
        if spec.name == INPUT_NAME:
            raise GraphError("layer name %r is reserved for the network input" % INPUT_NAME)
        if spec.name in shapes:
            raise GraphError("duplicate layer name %r" % spec.name)
        if spec.kind not in KINDS:
            raise GraphError("layer %r: unknown kind %r" % (spec.name, spec.kind))
        if spec.prunable and spec.kind != "conv2d":
            raise GraphError("layer %r: only conv2d layers may be prunable" % spec.name)
        for ch_name, ch in (("in_channels", spec.in_channels),
                            ("out_channels", spec.out_channels)):
            if not isinstance(ch, int) or isinstance(ch, bool) or ch < 1:
                raise GraphError("layer %r: %s must be a positive integer, got %r"
                                 % (spec.name, ch_name, ch))
        if not spec.inputs:
            raise GraphError("layer %r has no inputs" % spec.name)
        for ref in spec.inputs:
            if ref not in shapes:
                raise GraphError("layer %r: input %r is not the network input or an"
                                 " earlier layer (cycle or dangling reference)"
                                 % (spec.name, ref))
        in_shapes = [shapes[ref] for ref in spec.inputs]

        if spec.kind == "conv2d":
            if len(spec.inputs) != 1:
                raise GraphError("layer %r: conv2d takes exactly one input" % spec.name)
            kh, kw = _require_pair(spec.name, "kernel_hw", spec.kernel_hw, 1)
            sy, sx = _require_pair(spec.name, "stride_hw", spec.stride_hw, 1)
            py, px = _require_pair(spec.name, "padding_hw", spec.padding_hw, 0)
            c, h, w = in_shapes[0]
            if h is None:
                raise GraphError("layer %r: conv2d needs a spatial input" % spec.name)
            if spec.in_channels != c:
                raise GraphError("layer %r: in_channels %d != producer channels %d"
                                 % (spec.name, spec.in_channels, c))
            out_shape = (spec.out_channels,
                         conv_out_size(h, kh, sy, py),
                         conv_out_size(w, kw, sx, px))
        else:
            if spec.kernel_hw is not None or spec.stride_hw is not None \
                    or spec.padding_hw is not None:
                raise GraphError("layer %r: kernel/stride/padding only apply to conv2d"
                                 % spec.name)
            if spec.kind == "add":
                if len(spec.inputs) < 2:
                    raise GraphError("layer %r: add takes at least two inputs" % spec.name)
                first = in_shapes[0]
                for ref, shp in zip(spec.inputs, in_shapes):
                    if shp != first:
                        raise GraphError("layer %r: add inputs disagree (%r is %r,"
                                         " %r is %r)" % (spec.name, spec.inputs[0],
                                                         first, ref, shp))
                if spec.in_channels != first[0] or spec.out_channels != first[0]:
                    raise GraphError("layer %r: add channels must equal input channels %d"
                                     % (spec.name, first[0]))
                out_shape = first
            elif spec.kind == "linear":
                if len(spec.inputs) != 1:
                    raise GraphError("layer %r: linear takes exactly one input" % spec.name)
                c = in_shapes[0][0]
                if spec.in_channels != c:
                    raise GraphError("layer %r: in_channels %d != producer channels %d"
                                     % (spec.name, spec.in_channels, c))
                out_shape = (spec.out_channels, None, None)
            else:
                if len(spec.inputs) != 1:
                    raise GraphError("layer %r: %s takes exactly one input"
                                     % (spec.name, spec.kind))
                c = in_shapes[0][0]
                if spec.in_channels != c or spec.out_channels != c:
                    raise GraphError("layer %r: %s must preserve channels (%d)"
                                     % (spec.name, spec.kind, c))
                out_shape = in_shapes[0]

        if spec.coupling_group is not None:
            if not isinstance(spec.coupling_group, str) or not spec.coupling_group:
                raise GraphError("layer %r: coupling_group must be a non-empty string"
                                 % spec.name)
            groups.setdefault(spec.coupling_group, []).append(spec)
        shapes[spec.name] = out_shape

    for group, members in groups.items():
        prunables = [m for m in members if m.prunable]
        if not prunables:
            continue
        if len(prunables) != len(members):
            raise GraphError("coupling group %r mixes prunable and non-prunable layers"
                             % group)
        widths = {m.out_channels for m in members}
        if len(widths) != 1:
            raise GraphError("coupling group %r members disagree on out_channels: %s"
                             % (group, sorted(widths)))

    if net.output not in shapes or net.output == INPUT_NAME:
        raise GraphError("output %r is not a layer of the network" % net.output)
    return shapes


def _check_binding(archive, layer, role, expected_shape):
    name = layer.bindings[role]
    if not isinstance(name, str) or not name:
        raise GraphError("layer %r: binding %r must be a tensor name" % (layer.name, role))
    if name not in archive:
        raise GraphError("layer %r: bound tensor %r missing from archive"
                         % (layer.name, name))
    actual = archive[name].shape
    if actual != expected_shape:
        raise GraphError("layer %r: tensor %r has shape %s, expected %s"
                         % (layer.name, name, list(actual), list(expected_shape)))


def validate_network(net, archive):
    """Check graph structure and that every binding resolves with the right shape.

    Returns ``net`` unchanged on success; raises :class:`GraphError` otherwise.
    """
    _check_structure(net)
    for spec in net.layers:
        required, optional = _BINDING_ROLES[spec.kind]
        present = set(spec.bindings)
        missing = required - present
        if missing:
            raise GraphError("layer %r: missing bindings %s" % (spec.name, sorted(missing)))
        unknown = present - required - optional
        if unknown:
            raise GraphError("layer %r: unknown bindings %s" % (spec.name, sorted(unknown)))
        if spec.kind == "conv2d":
            kh, kw = spec.kernel_hw
            _check_binding(archive, spec, "weight",
                           (spec.out_channels, spec.in_channels, kh, kw))
            if "bias" in present:
                _check_binding(archive, spec, "bias", (spec.out_channels,))
        elif spec.kind == "batchnorm":
            for role in ("scale", "shift", "mean", "var"):
                _check_binding(archive, spec, role, (spec.out_channels,))
        elif spec.kind == "linear":
            _check_binding(archive, spec, "weight",
                           (spec.out_channels, spec.in_channels))
            if "bias" in present:
                _check_binding(archive, spec, "bias", (spec.out_channels,))
    return net


def flops(net, channel_override=None):
    """Multiply-accumulate counts per layer and in total.

    ``channel_override`` maps conv layer names to effective output channel
    counts d in [1, out_channels]; a pruned producer shrinks every consumer's
    effective input channels.
    """
    shapes = _check_structure(net)
    override = dict(channel_override) if channel_override else {}
    by_name = {spec.name: spec for spec in net.layers}
    for name, d in override.items():
        if name not in by_name:
            raise GraphError("channel override references unknown layer %r" % name)
        spec = by_name[name]
        if spec.kind != "conv2d":
            raise GraphError("channel override on %r: only conv2d layers have"
                             " an output-filter count" % name)
        if not isinstance(d, int) or isinstance(d, bool) or not 1 <= d <= spec.out_channels:
            raise GraphError("channel override for %r must be in [1, %d], got %r"
                             % (name, spec.out_channels, d))

    eff_out = {INPUT_NAME: net.input_shape[0]}
    per_layer = {}
    for spec in net.layers:
        eff_in = eff_out[spec.inputs[0]]
        if spec.kind == "conv2d":
            eff = override.get(spec.name, spec.out_channels)
            _, oh, ow = shapes[spec.name]
            kh, kw = spec.kernel_hw
            macs = oh * ow * eff * eff_in * kh * kw
        elif spec.kind == "linear":
            eff = spec.out_channels
            macs = eff_in * eff
        elif spec.kind == "add":
            widths = {eff_out[ref] for ref in spec.inputs}
            if len(widths) != 1:
                raise GraphError("layer %r: add inputs carry unequal effective channels %s"
                                 % (spec.name, sorted(widths)))
            eff = widths.pop()
            macs = 0
        else:
            eff = eff_in
            macs = 0
        eff_out[spec.name] = eff
        per_layer[spec.name] = macs
    return FlopsReport(per_layer=per_layer, total=sum(per_layer.values()))


def achieved_reduction(original, pruned):
    """Fractional MAC reduction 1 - pruned/original."""
    if original.total <= 0:
        raise GraphError("original FLOPs total must be positive")
    return 1.0 - pruned.total / original.total


def _gap(x):
    # Collapse a spatial tensor to per-channel means; vectors pass through.
    return x.mean(axis=(1, 2)) if x.ndim == 3 else x


def forward_eval(net, archive, input_tensor):
    """Reference evaluation of the network on one input, in float64.

    conv2d is plain cross-correlation (no kernel flip) with optional bias;
    batchnorm applies the inference form (x - mean)/sqrt(var + eps) * scale
    + shift; linear layers average spatial inputs per channel first.
    """
    validate_network(net, archive)
    x = np.asarray(input_tensor, dtype=np.float64)
    if x.shape != tuple(net.input_shape):
        raise GraphError("input shape %s does not match network input %s"
                         % (list(x.shape), list(net.input_shape)))

    values = {INPUT_NAME: x}
    for spec in net.layers:
        if spec.kind == "conv2d":
            src = values[spec.inputs[0]]
            w = archive[spec.bindings["weight"]].astype(np.float64)
            sy, sx = spec.stride_hw
            py, px = spec.padding_hw
            kh, kw = spec.kernel_hw
            oh = conv_out_size(src.shape[1], kh, sy, py)
            ow = conv_out_size(src.shape[2], kw, sx, px)
            out = np.empty((spec.out_channels, oh, ow), dtype=np.float64)
            conv2d_fill(np.ascontiguousarray(src), np.ascontiguousarray(w),
                        out, sy, sx, py, px)
            if "bias" in spec.bindings:
                out += archive[spec.bindings["bias"]].astype(np.float64)[:, None, None]
        elif spec.kind == "batchnorm":
            src = values[spec.inputs[0]]
            scale = archive[spec.bindings["scale"]].astype(np.float64)
            shift = archive[spec.bindings["shift"]].astype(np.float64)
            mean = archive[spec.bindings["mean"]].astype(np.float64)
            var = archive[spec.bindings["var"]].astype(np.float64)
            norm = 1.0 / np.sqrt(var + BN_EPS)
            if src.ndim == 3:
                out = (src - mean[:, None, None]) * (scale * norm)[:, None, None] \
                    + shift[:, None, None]
            else:
                out = (src - mean) * (scale * norm) + shift
        elif spec.kind == "relu":
            out = np.maximum(values[spec.inputs[0]], 0.0)
        elif spec.kind == "add":
            parts = [values[ref] for ref in spec.inputs]
            for part in parts[1:]:
                if part.shape != parts[0].shape:
                    raise GraphError("layer %r: add operands have shapes %s and %s"
                                     % (spec.name, parts[0].shape, part.shape))
            out = parts[0].copy()
            for part in parts[1:]:
                out += part
        else:
            src = _gap(values[spec.inputs[0]])
            w = archive[spec.bindings["weight"]].astype(np.float64)
            out = w @ src
            if "bias" in spec.bindings:
                out += archive[spec.bindings["bias"]].astype(np.float64)
        values[spec.name] = out
    return values[net.output]


def layer_to_dict(spec):
    return {
        "name": spec.name,
        "kind": spec.kind,
        "in_channels": spec.in_channels,
        "out_channels": spec.out_channels,
        "kernel_hw": list(spec.kernel_hw) if spec.kernel_hw is not None else None,
        "stride_hw": list(spec.stride_hw) if spec.stride_hw is not None else None,
        "padding_hw": list(spec.padding_hw) if spec.padding_hw is not None else None,
        "prunable": spec.prunable,
        "coupling_group": spec.coupling_group,
        "bindings": dict(spec.bindings),
        "inputs": list(spec.inputs),
    }


def network_to_dict(net):
    return {
        "input_shape": list(net.input_shape),
        "layers": [layer_to_dict(spec) for spec in net.layers],
        "output": net.output,
    }


def _layer_from_dict(obj):
    if not isinstance(obj, dict):
        raise GraphError("each layer must be an object, got %r" % type(obj).__name__)
    unknown = set(obj) - {"name", "kind", "in_channels", "out_channels", "kernel_hw",
                          "stride_hw", "padding_hw", "prunable", "coupling_group",
                          "bindings", "inputs"}
    if unknown:
        raise GraphError("unknown layer fields %s" % sorted(unknown))
    for req in ("name", "kind", "in_channels", "out_channels", "inputs"):
        if req not in obj:
            raise GraphError("layer missing required field %r" % req)

    def pair(key):
        value = obj.get(key)
        return tuple(value) if isinstance(value, list) else value

    bindings = obj.get("bindings") or {}
    if not isinstance(bindings, dict):
        raise GraphError("bindings must be an object")
    inputs = obj["inputs"]
    if not isinstance(inputs, list) or any(not isinstance(v, str) for v in inputs):
        raise GraphError("inputs must be a list of layer names")
    return LayerSpec(
        name=obj["name"],
        kind=obj["kind"],
        in_channels=obj["in_channels"],
        out_channels=obj["out_channels"],
        kernel_hw=pair("kernel_hw"),
        stride_hw=pair("stride_hw"),
        padding_hw=pair("padding_hw"),
        prunable=bool(obj.get("prunable", False)),
        coupling_group=obj.get("coupling_group"),
        bindings=dict(bindings),
        inputs=tuple(inputs),
    )


def network_from_dict(obj):
    if not isinstance(obj, dict):
        raise GraphError("network document must be an object")
    for req in ("input_shape", "layers", "output"):
        if req not in obj:
            raise GraphError("network document missing %r" % req)
    if not isinstance(obj["layers"], list):
        raise GraphError("layers must be a list")
    shape = obj["input_shape"]
    if not isinstance(shape, list) or len(shape) != 3:
        raise GraphError("input_shape must be a three-element list")
    net = NetworkSpec(
        input_shape=tuple(shape),
        layers=tuple(_layer_from_dict(entry) for entry in obj["layers"]),
        output=obj["output"],
    )
    _check_structure(net)
    return net


def save_network(net, path):
    """Write the network document to ``path`` atomically."""
    text = json.dumps(network_to_dict(net), indent=2, sort_keys=True) + "\n"
    write_text_atomic(text, path)


def load_network(path):
    """Read and structurally validate a network document."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError("network document is not valid JSON: %s" % exc) from None
    return network_from_dict(obj)


def write_text_atomic(text, path):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snf-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
