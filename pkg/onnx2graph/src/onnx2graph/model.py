"""ONNX model extraction on top of the wire reader.

Pulls out the graph structure needed for conversion: nodes with attributes,
initializer names and dimensions (plus integer payloads for shape-carrying
constants), and the declared input/output tensor shapes. Field numbers follow
the ONNX protobuf schema.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .wire import (
    WireError,
    group_fields,
    repeated_int64,
    scalar_float,
    scalar_int,
    scalar_string,
)


class ModelError(ValueError):
    """The file is not an ONNX model this tool can read."""


# AttributeProto.type values
ATTR_FLOAT, ATTR_INT, ATTR_STRING, ATTR_TENSOR, ATTR_GRAPH = 1, 2, 3, 4, 5
ATTR_FLOATS, ATTR_INTS, ATTR_STRINGS = 6, 7, 8


@dataclass
class Attribute:
    name: str
    type: int
    i: int = 0
    f: float = 0.0
    s: str = ""
    ints: list[int] = field(default_factory=list)
    floats: list[float] = field(default_factory=list)
    tensor: "Tensor | None" = None
    has_graph: bool = False


@dataclass
class Node:
    op_type: str
    name: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict[str, Attribute]

    def attr_ints(self, name: str, default=None):
        a = self.attrs.get(name)
        return list(a.ints) if a is not None else default

    def attr_int(self, name: str, default=0) -> int:
        a = self.attrs.get(name)
        return a.i if a is not None else default

    def attr_str(self, name: str, default="") -> str:
        a = self.attrs.get(name)
        return a.s if a is not None else default


@dataclass
class Tensor:
    name: str
    dims: list[int]
    data_type: int
    int_values: list[int] | None  # populated for int32/int64 payloads only

    @property
    def elems(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n


@dataclass
class ValueInfo:
    name: str
    shape: list[object]  # int for fixed dims, str for symbolic ones
    elem_type: int


@dataclass
class OnnxGraph:
    name: str
    nodes: list[Node]
    initializers: dict[str, Tensor]
    inputs: list[ValueInfo]
    outputs: list[ValueInfo]
    value_infos: dict[str, ValueInfo]
    opset: int


_INT64, _INT32 = 7, 6


def _parse_tensor(buf: bytes) -> Tensor:
    f = group_fields(buf)
    dims = repeated_int64(f.get(1, []))
    data_type = scalar_int(f.get(2, []))
    name = scalar_string(f.get(8, []))
    int_values: list[int] | None = None
    if data_type == _INT64:
        if 7 in f:
            int_values = repeated_int64(f[7])
        elif 9 in f:
            raw = f[9][-1]
            int_values = [v[0] for v in struct.iter_unpack("<q", raw)]
    elif data_type == _INT32:
        if 5 in f:
            int_values = repeated_int64(f[5])
        elif 9 in f:
            raw = f[9][-1]
            int_values = [v[0] for v in struct.iter_unpack("<i", raw)]
    return Tensor(name=name, dims=dims, data_type=data_type, int_values=int_values)


def _parse_attribute(buf: bytes) -> Attribute:
    f = group_fields(buf)
    attr = Attribute(name=scalar_string(f.get(1, [])), type=scalar_int(f.get(20, [])))
    if 3 in f:
        attr.i = scalar_int(f[3])
        if attr.type == 0:
            attr.type = ATTR_INT
    if 2 in f:
        attr.f = scalar_float(f[2])
        if attr.type == 0:
            attr.type = ATTR_FLOAT
    if 4 in f:
        attr.s = scalar_string(f[4])
        if attr.type == 0:
            attr.type = ATTR_STRING
    if 8 in f:
        attr.ints = repeated_int64(f[8])
        if attr.type == 0:
            attr.type = ATTR_INTS
    if 7 in f:
        floats: list[float] = []
        for v in f[7]:
            if isinstance(v, (bytes, bytearray)):
                if len(v) == 4:  # unpacked single float
                    floats.append(struct.unpack("<f", v)[0])
                else:  # packed run of floats
                    floats.extend(x[0] for x in struct.iter_unpack("<f", v))
        attr.floats = floats
        if attr.type == 0:
            attr.type = ATTR_FLOATS
    if 5 in f:
        attr.tensor = _parse_tensor(f[5][-1])
        if attr.type == 0:
            attr.type = ATTR_TENSOR
    if 6 in f or 11 in f:
        attr.has_graph = True
        if attr.type == 0:
            attr.type = ATTR_GRAPH
    return attr


def _parse_node(buf: bytes) -> Node:
    f = group_fields(buf)
    attrs = {}
    for raw in f.get(5, []):
        a = _parse_attribute(raw)
        attrs[a.name] = a
    return Node(
        op_type=scalar_string(f.get(4, [])),
        name=scalar_string(f.get(3, [])),
        inputs=[v.decode("utf-8") for v in f.get(1, [])],
        outputs=[v.decode("utf-8") for v in f.get(2, [])],
        attrs=attrs,
    )


def _parse_value_info(buf: bytes) -> ValueInfo:
    f = group_fields(buf)
    name = scalar_string(f.get(1, []))
    shape: list[object] = []
    elem_type = 0
    type_bufs = f.get(2, [])
    if type_bufs:
        tf = group_fields(type_bufs[-1])
        tensor_bufs = tf.get(1, [])
        if tensor_bufs:
            ttf = group_fields(tensor_bufs[-1])
            elem_type = scalar_int(ttf.get(1, []))
            shape_bufs = ttf.get(2, [])
            if shape_bufs:
                sf = group_fields(shape_bufs[-1])
                for dim_buf in sf.get(1, []):
                    df = group_fields(dim_buf)
                    if 1 in df:
                        shape.append(scalar_int(df[1]))
                    elif 2 in df:
                        shape.append(scalar_string(df[2]))
                    else:
                        shape.append("?")
    return ValueInfo(name=name, shape=shape, elem_type=elem_type)


def load_model(path) -> OnnxGraph:
    """Read an ONNX file into the reduced structure used by the converter."""
    try:
        data = open(path, "rb").read()
    except OSError as e:
        raise ModelError(f"cannot read {path}: {e}") from None
    try:
        top = group_fields(data)
    except WireError as e:
        raise ModelError(f"{path} is not a protobuf message: {e}") from None
    graphs = top.get(7)
    if not graphs:
        raise ModelError(f"{path} has no graph (not an ONNX ModelProto?)")

    opset = 0
    for raw in top.get(8, []):
        f = group_fields(raw)
        domain = scalar_string(f.get(1, []))
        if domain in ("", "ai.onnx"):
            opset = scalar_int(f.get(2, []), 0)

    gf = group_fields(graphs[-1])
    if 15 in gf:
        raise ModelError("sparse initializers are not supported")
    nodes = [_parse_node(raw) for raw in gf.get(1, [])]
    initializers = {}
    for raw in gf.get(5, []):
        t = _parse_tensor(raw)
        initializers[t.name] = t
    inputs = [_parse_value_info(raw) for raw in gf.get(11, [])]
    outputs = [_parse_value_info(raw) for raw in gf.get(12, [])]
    value_infos = {}
    for raw in gf.get(13, []):
        vi = _parse_value_info(raw)
        value_infos[vi.name] = vi
    return OnnxGraph(
        name=scalar_string(gf.get(2, [])),
        nodes=nodes,
        initializers=initializers,
        inputs=inputs,
        outputs=outputs,
        value_infos=value_infos,
        opset=opset,
    )
