"""Static shape inference for the CNN operator subset the converter accepts.

Shapes are plain integer tuples with the batch dimension fixed at 1. Each rule
takes the node, the already-known input shapes, and a resolver for constant
integer tensors (Reshape/Pad/Squeeze parameters), and returns the output
shape. Anything outside the table is a hard error naming the node, as is any
symbolic dimension.
"""

from __future__ import annotations

import math

from .model import Node


class ShapeError(ValueError):
    """Shape inference failed or hit an unsupported construct."""


def _pool_spatial(node: Node, in_spatial, kernel, where: str) -> list[int]:
    rank = len(kernel)
    strides = node.attr_ints("strides", [1] * rank)
    dilations = node.attr_ints("dilations", [1] * rank)
    pads = node.attr_ints("pads", [0] * (2 * rank))
    ceil_mode = node.attr_int("ceil_mode", 0)
    auto_pad = node.attr_str("auto_pad", "NOTSET")
    out = []
    for ax in range(rank):
        size = in_spatial[ax]
        eff_kernel = dilations[ax] * (kernel[ax] - 1) + 1
        if auto_pad in ("SAME_UPPER", "SAME_LOWER"):
            out.append(math.ceil(size / strides[ax]))
            continue
        if auto_pad == "VALID":
            begin = end = 0
        else:
            begin, end = pads[ax], pads[ax + rank]
        padded = size + begin + end - eff_kernel
        if padded < 0:
            raise ShapeError(f"{where}: kernel larger than padded input on axis {ax}")
        if ceil_mode:
            o = -(-padded // strides[ax]) + 1
            # the last window must start inside the input or its begin padding
            if (o - 1) * strides[ax] >= size + begin:
                o -= 1
        else:
            o = padded // strides[ax] + 1
        out.append(o)
    return out


def _broadcast(a, b, where: str):
    out = []
    for x, y in zip(_pad_left(a, len(b)), _pad_left(b, len(a))):
        if x == y or y == 1:
            out.append(x)
        elif x == 1:
            out.append(y)
        else:
            raise ShapeError(f"{where}: cannot broadcast {a} with {b}")
    return tuple(out)


def _pad_left(shape, rank):
    return (1,) * (rank - len(shape)) + tuple(shape)


def _axis(ax: int, rank: int) -> int:
    return ax + rank if ax < 0 else ax


ELEMENTWISE = {
    "Relu", "LeakyRelu", "Sigmoid", "HardSigmoid", "HardSwish", "Tanh", "Elu",
    "Selu", "Softplus", "Softsign", "Clip", "Erf", "Exp", "Log", "Neg", "Abs",
    "Ceil", "Floor", "Round", "Sqrt", "Reciprocal", "Softmax", "LogSoftmax",
    "BatchNormalization", "InstanceNormalization", "LRN", "Cast", "CastLike",
}
BROADCAST_BINARY = {"Add", "Sub", "Mul", "Div", "Pow", "Max", "Min", "PRelu"}
CONTROL_FLOW = {"Loop", "If", "Scan"}


def infer_output_shape(node: Node, input_shapes: list[tuple[int, ...]], const_ints) -> tuple[int, ...]:
    """Shape of the node's first output.

    `const_ints(name)` returns the integer payload of a constant tensor or
    None when the tensor is not a compile-time constant.
    """
    op = node.op_type
    where = f"{op} node {node.name or node.outputs[0]!r}"

    if op in CONTROL_FLOW:
        raise ShapeError(f"{where}: control-flow ops are not supported")

    if op in ELEMENTWISE:
        return input_shapes[0]

    if op in BROADCAST_BINARY:
        if len(input_shapes) == 1:
            return input_shapes[0]
        shape = input_shapes[0]
        for other in input_shapes[1:]:
            shape = _broadcast(shape, other, where)
        return shape

    if op == "Conv":
        x, w = input_shapes[0], input_shapes[1]
        kernel = node.attr_ints("kernel_shape", list(w[2:]))
        spatial = _pool_spatial(node, x[2:], kernel, where)
        return (x[0], w[0], *spatial)

    if op == "ConvTranspose":
        raise ShapeError(f"{where}: ConvTranspose is not supported")

    if op in ("MaxPool", "AveragePool", "LpPool"):
        x = input_shapes[0]
        kernel = node.attr_ints("kernel_shape")
        if kernel is None:
            raise ShapeError(f"{where}: missing kernel_shape")
        spatial = _pool_spatial(node, x[2:], kernel, where)
        return (x[0], x[1], *spatial)

    if op in ("GlobalAveragePool", "GlobalMaxPool"):
        x = input_shapes[0]
        return (x[0], x[1], *([1] * len(x[2:])))

    if op == "Concat":
        ax = _axis(node.attr_int("axis", 1), len(input_shapes[0]))
        out = list(input_shapes[0])
        out[ax] = sum(s[ax] for s in input_shapes)
        return tuple(out)

    if op == "Flatten":
        x = input_shapes[0]
        ax = _axis(node.attr_int("axis", 1), len(x))
        return (math.prod(x[:ax] or (1,)), math.prod(x[ax:] or (1,)))

    if op == "Gemm":
        a, b = input_shapes[0], input_shapes[1]
        m = a[1] if node.attr_int("transA", 0) else a[0]
        n = b[0] if node.attr_int("transB", 0) else b[1]
        return (m, n)

    if op == "MatMul":
        a, b = input_shapes[0], input_shapes[1]
        if len(a) < 2 or len(b) < 2:
            raise ShapeError(f"{where}: 1-D matmul operands are not supported")
        batch = _broadcast(a[:-2], b[:-2], where) if (len(a) > 2 or len(b) > 2) else ()
        if a[-1] != b[-2]:
            raise ShapeError(f"{where}: inner dimensions disagree ({a} x {b})")
        return (*batch, a[-2], b[-1])

    if op == "Reshape":
        x = input_shapes[0]
        target = const_ints(node.inputs[1]) if len(node.inputs) > 1 else None
        if target is None:
            raise ShapeError(f"{where}: Reshape with a non-constant shape input")
        total = math.prod(x)
        out = []
        infer_at = None
        for i, d in enumerate(target):
            if d == 0:
                out.append(x[i])
            elif d == -1:
                infer_at = i
                out.append(1)
            else:
                out.append(d)
        if infer_at is not None:
            known = math.prod(out)
            if known == 0 or total % known:
                raise ShapeError(f"{where}: cannot infer -1 dimension for {target} from {x}")
            out[infer_at] = total // known
        if math.prod(out) != total:
            raise ShapeError(f"{where}: reshape {target} does not preserve {total} elements")
        return tuple(out)

    if op == "Transpose":
        x = input_shapes[0]
        perm = node.attr_ints("perm", list(range(len(x) - 1, -1, -1)))
        return tuple(x[p] for p in perm)

    if op == "Pad":
        x = input_shapes[0]
        pads = node.attr_ints("pads")
        if pads is None and len(node.inputs) > 1:
            pads = const_ints(node.inputs[1])
        if pads is None:
            raise ShapeError(f"{where}: Pad with a non-constant pads input")
        rank = len(x)
        return tuple(x[i] + pads[i] + pads[i + rank] for i in range(rank))

    if op == "Squeeze":
        x = input_shapes[0]
        axes = node.attr_ints("axes")
        if axes is None and len(node.inputs) > 1:
            axes = const_ints(node.inputs[1])
        if axes is None:
            return tuple(d for d in x if d != 1)
        drop = {_axis(a, len(x)) for a in axes}
        return tuple(d for i, d in enumerate(x) if i not in drop)

    if op == "Unsqueeze":
        x = input_shapes[0]
        axes = node.attr_ints("axes")
        if axes is None and len(node.inputs) > 1:
            axes = const_ints(node.inputs[1])
        if axes is None:
            raise ShapeError(f"{where}: Unsqueeze with a non-constant axes input")
        rank = len(x) + len(axes)
        marks = {_axis(a, rank) for a in axes}
        out = []
        src = iter(x)
        for i in range(rank):
            out.append(1 if i in marks else next(src))
        return tuple(out)

    if op in ("ReduceMean", "ReduceSum", "ReduceMax", "ReduceMin", "ReduceProd", "ReduceL2"):
        x = input_shapes[0]
        axes = node.attr_ints("axes")
        if axes is None and len(node.inputs) > 1:
            axes = const_ints(node.inputs[1])
        keep = node.attr_int("keepdims", 1)
        if axes is None:
            reduced = set(range(len(x)))
        else:
            reduced = {_axis(a, len(x)) for a in axes}
        if keep:
            return tuple(1 if i in reduced else d for i, d in enumerate(x))
        return tuple(d for i, d in enumerate(x) if i not in reduced)

    if op == "Resize":
        raise ShapeError(f"{where}: Resize is not supported")

    raise ShapeError(f"{where}: unsupported op type {op!r}")
