"""Fixtures: real torchvision exports plus a tiny hand-rolled ONNX encoder.

The encoder writes protobuf wire bytes directly so tests can craft models
with exactly the constructs under test (If nodes, symbolic dims, Dropout)
without needing the onnx package, which this environment does not have.
"""

from __future__ import annotations

import struct

import pytest


# ---------------------------------------------------------------------------
# minimal protobuf writer
# ---------------------------------------------------------------------------

def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _field(num: int, wire_type: int) -> bytes:
    return _varint((num << 3) | wire_type)


def enc_int(num: int, value: int) -> bytes:
    return _field(num, 0) + _varint(value)


def enc_bytes(num: int, payload: bytes) -> bytes:
    return _field(num, 2) + _varint(len(payload)) + payload


def enc_str(num: int, text: str) -> bytes:
    return enc_bytes(num, text.encode("utf-8"))


def tensor_proto(name: str, dims, data_type=1, floats=None, int64s=None) -> bytes:
    out = b"".join(enc_int(1, d) for d in dims)
    out += enc_int(2, data_type)
    out += enc_str(8, name)
    if floats is not None:
        out += enc_bytes(9, struct.pack(f"<{len(floats)}f", *floats))
    if int64s is not None:
        out += enc_bytes(9, struct.pack(f"<{len(int64s)}q", *int64s))
    return out


def value_info(name: str, shape, elem_type=1) -> bytes:
    dims = b""
    for d in shape:
        if isinstance(d, str):
            dims += enc_bytes(1, enc_str(2, d))
        else:
            dims += enc_bytes(1, enc_int(1, d))
    tensor_type = enc_int(1, elem_type) + enc_bytes(2, dims)
    return enc_str(1, name) + enc_bytes(2, enc_bytes(1, tensor_type))


def attr_ints(name: str, values) -> bytes:
    body = enc_str(1, name) + b"".join(enc_int(8, v) for v in values) + enc_int(20, 7)
    return body


def attr_int(name: str, value: int) -> bytes:
    return enc_str(1, name) + enc_int(3, value) + enc_int(20, 2)


def attr_graph(name: str) -> bytes:
    return enc_str(1, name) + enc_bytes(6, b"") + enc_int(20, 5)


def node_proto(op: str, inputs, outputs, name="", attrs=()) -> bytes:
    out = b"".join(enc_str(1, i) for i in inputs)
    out += b"".join(enc_str(2, o) for o in outputs)
    out += enc_str(3, name)
    out += enc_str(4, op)
    out += b"".join(enc_bytes(5, a) for a in attrs)
    return out


def model_proto(nodes, inputs, outputs, initializers=(), graph_name="g", opset=13) -> bytes:
    graph = b"".join(enc_bytes(1, n) for n in nodes)
    graph += enc_str(2, graph_name)
    graph += b"".join(enc_bytes(5, t) for t in initializers)
    graph += b"".join(enc_bytes(11, vi) for vi in inputs)
    graph += b"".join(enc_bytes(12, vi) for vi in outputs)
    model = enc_int(1, 8)  # ir_version
    model += enc_bytes(7, graph)
    model += enc_bytes(8, enc_str(1, "") + enc_int(2, opset))
    return model


def single_conv_model() -> bytes:
    """One 3x3 conv, 8->16 channels with bias, on a 1x8x10x10 input."""
    weight = tensor_proto("w", [16, 8, 3, 3], floats=[0.0] * (16 * 8 * 3 * 3))
    bias = tensor_proto("b", [16], floats=[0.0] * 16)
    conv = node_proto(
        "Conv",
        ["x", "w", "b"],
        ["y"],
        name="conv0",
        attrs=[attr_ints("kernel_shape", [3, 3]), attr_ints("strides", [1, 1]),
               attr_ints("pads", [0, 0, 0, 0])],
    )
    return model_proto(
        [conv],
        [value_info("x", [1, 8, 10, 10])],
        [value_info("y", [1, 16, 8, 8])],
        [weight, bias],
    )


@pytest.fixture(scope="session")
def zoo_models(tmp_path_factory):
    """SqueezeNet V1.1 and ResNet-18 exported to ONNX (architectures only)."""
    import warnings

    import torch
    import torchvision
    from torch.onnx._internal.torchscript_exporter import onnx_proto_utils

    # the exporter's final pass only scans for custom onnxscript functions
    # (none in these models) but imports the unavailable onnx package to do so
    onnx_proto_utils._add_onnxscript_fn = lambda model_bytes, custom_opsets: model_bytes

    out = tmp_path_factory.mktemp("zoo")
    paths = {}
    for name, ctor in (
        ("squeezenet1_1", torchvision.models.squeezenet1_1),
        ("resnet18", torchvision.models.resnet18),
    ):
        model = ctor(weights=None).eval()
        x = torch.randn(1, 3, 224, 224)
        path = out / f"{name}.onnx"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            torch.onnx.export(model, x, str(path), opset_version=13, dynamo=False)
        paths[name] = path
    return paths
