"""Convert an ONNX CNN into the portable partitioning graph JSON.

Every surviving ONNX node becomes one layer: param_count is the element total
of the constant tensors the node consumes (each constant attributed to its
first consumer, so the graph-wide total equals the file's initializer total
even when the exporter deduplicated identical constants behind Identity
nodes), in_elems/out_elems come from static shape inference at batch 1, and
edges mirror the tensor dataflow. Identity, Dropout, and Constant nodes carry
no work of their own and are folded away.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .model import ModelError, OnnxGraph, Tensor, load_model
from .shapes import CONTROL_FLOW, ShapeError, infer_output_shape


class ConvertError(ValueError):
    """The model cannot be represented as a partitioning graph."""


FOLDED_OPS = ("Identity", "Dropout", "Constant")


@dataclass
class ConversionReport:
    layers_converted: int
    ops_skipped: list[tuple[str, int]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _check_inputs(graph: OnnxGraph) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for vi in graph.inputs:
        if vi.name in graph.initializers:
            continue  # legacy exports list weights as graph inputs
        symbolic = [d for d in vi.shape if not isinstance(d, int)]
        if symbolic or not vi.shape:
            raise ConvertError(
                f"input {vi.name!r} has dynamic shape {vi.shape}; re-export with static shapes"
            )
        if vi.shape[0] != 1:
            raise ConvertError(f"input {vi.name!r} has batch {vi.shape[0]}; expected batch 1")
        shapes[vi.name] = tuple(vi.shape)
    if not shapes:
        raise ConvertError("model has no runtime inputs")
    return shapes


def convert_graph(graph: OnnxGraph, doc_name: str) -> tuple[dict, ConversionReport]:
    control = [
        n.name or n.op_type
        for n in graph.nodes
        if n.op_type in CONTROL_FLOW or any(a.has_graph for a in n.attrs.values())
    ]
    if control:
        raise ConvertError(f"control-flow nodes are not supported: {control}")

    input_shapes = _check_inputs(graph)
    constants: dict[str, Tensor] = dict(graph.initializers)
    alias: dict[str, str] = {}
    skipped: dict[str, int] = {}
    warnings: list[str] = []

    consumed_by: dict[str, list[str]] = {}
    for n in graph.nodes:
        for name in n.inputs:
            if name:
                consumed_by.setdefault(name, []).append(n.op_type)
    for vi in graph.outputs:
        consumed_by.setdefault(vi.name, []).append("<graph output>")

    def resolve(name: str) -> str:
        while name in alias:
            name = alias[name]
        return name

    def const_ints(name: str):
        t = constants.get(resolve(name))
        return None if t is None else t.int_values

    layers: list[dict] = []
    edges: list[list[str]] = []
    producer: dict[str, str] = {}  # resolved tensor name -> layer id
    tensor_shape: dict[str, tuple[int, ...]] = dict(input_shapes)
    claimed: set[str] = set()
    used_ids: set[str] = set()

    for index, node in enumerate(graph.nodes):
        if node.op_type == "Constant":
            value = node.attrs.get("value")
            if value is None or value.tensor is None:
                raise ConvertError(f"Constant node {node.name!r} without a tensor value")
            t = value.tensor
            constants[node.outputs[0]] = Tensor(
                name=node.outputs[0], dims=t.dims, data_type=t.data_type, int_values=t.int_values
            )
            skipped[node.op_type] = skipped.get(node.op_type, 0) + 1
            continue
        if node.op_type in ("Identity", "Dropout"):
            for extra in node.outputs[1:]:
                if extra and consumed_by.get(extra):
                    raise ConvertError(
                        f"{node.op_type} node {node.name!r}: secondary output {extra!r} is consumed"
                    )
            alias[node.outputs[0]] = node.inputs[0]
            skipped[node.op_type] = skipped.get(node.op_type, 0) + 1
            continue

        layer_id = node.name or f"{node.op_type}_{index}"
        while layer_id in used_ids:
            layer_id += "_dup"
        used_ids.add(layer_id)

        param_count = 0
        in_elems = 0
        node_inputs: list[tuple[int, ...]] = []
        seen_runtime: set[str] = set()
        for name in node.inputs:
            if not name:
                node_inputs.append(())
                continue
            rname = resolve(name)
            if rname in constants:
                t = constants[rname]
                node_inputs.append(tuple(t.dims))
                if rname not in claimed:
                    claimed.add(rname)
                    param_count += t.elems
                else:
                    warnings.append(
                        f"constant {rname!r} shared with an earlier layer; counted once"
                    )
                continue
            if rname not in tensor_shape:
                raise ConvertError(f"node {layer_id!r} uses unknown tensor {rname!r}")
            if rname in seen_runtime:
                raise ConvertError(
                    f"node {layer_id!r} consumes tensor {rname!r} twice; not representable"
                )
            seen_runtime.add(rname)
            shape = tensor_shape[rname]
            node_inputs.append(shape)
            in_elems += math.prod(shape)
            if rname in producer:
                edges.append([producer[rname], layer_id])
            elif rname in input_shapes and len(node.inputs) > 1 and any(
                resolve(x) in producer for x in node.inputs if x
            ):
                raise ConvertError(
                    f"node {layer_id!r} mixes the network input with layer outputs"
                )

        for extra in node.outputs[1:]:
            if extra and consumed_by.get(extra):
                raise ConvertError(
                    f"node {layer_id!r}: multi-output op with consumed output {extra!r}"
                )

        try:
            out_shape = infer_output_shape(node, node_inputs, const_ints)
        except ShapeError as e:
            raise ConvertError(str(e)) from None
        out_elems = math.prod(out_shape)
        tensor_shape[node.outputs[0]] = out_shape
        producer[node.outputs[0]] = layer_id

        layers.append(
            {
                "id": layer_id,
                "op": node.op_type,
                "param_count": param_count,
                "in_elems": in_elems,
                "out_elems": out_elems,
            }
        )

    if not layers:
        raise ConvertError("no layers left after conversion")

    unclaimed = sorted(set(constants) - claimed - set(alias))
    if unclaimed:
        warnings.append(f"{len(unclaimed)} constant tensors are never consumed")

    doc = {"name": graph.name or doc_name, "layers": layers, "edges": edges}
    report = ConversionReport(
        layers_converted=len(layers),
        ops_skipped=sorted(skipped.items()),
        warnings=warnings,
    )
    return doc, report


def render_document(doc: dict) -> str:
    """Deterministic serialization: sorted keys, two-space indent."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def convert(model_path, output_path) -> ConversionReport:
    """Convert model_path and write the graph JSON to output_path."""
    from .verify import verify_document

    try:
        graph = load_model(model_path)
    except ModelError as e:
        raise ConvertError(str(e)) from None
    doc, report = convert_graph(graph, doc_name=Path(model_path).stem)
    violations = verify_document(doc)
    if violations:
        raise ConvertError(
            "conversion produced an inconsistent graph: " + "; ".join(violations)
        )
    Path(output_path).write_text(render_document(doc), encoding="utf-8")
    return report
