"""Minimal ONNX model IO and execution.

The descriptor/classifier backends accept models in the ONNX interchange
format. When the ``onnxruntime`` package is installed it is preferred;
otherwise this module's built-in evaluator runs the documented op subset:

    Gemm, MatMul, Add, Sub, Mul, Div, Relu, Sigmoid, Tanh, Flatten,
    Reshape, Transpose, AveragePool, MaxPool, GlobalAveragePool,
    Softmax, Constant, Identity

Models using other ops load only under onnxruntime. Pooling supports
zero padding only. The protobuf wire subset handled here covers models
with a single graph, static shapes, and float32 tensors stored in
raw_data/float_data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InferenceError, ModelLoadError

SUPPORTED_OPS = frozenset({
    "Gemm", "MatMul", "Add", "Sub", "Mul", "Div", "Relu", "Sigmoid",
    "Tanh", "Flatten", "Reshape", "Transpose", "AveragePool", "MaxPool",
    "GlobalAveragePool", "Softmax", "Constant", "Identity",
})

_FLOAT = 1
_INT64 = 7


# --------------------------------------------------------------------------
# protobuf wire helpers
# --------------------------------------------------------------------------

def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ModelLoadError("truncated varint in model file")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise ModelLoadError("varint overflow in model file")


def _iter_fields(buf: bytes):
    """Yield (field_number, wire_type, value) over a message buffer."""
    pos = 0
    while pos < len(buf):
        tag, pos = _read_varint(buf, pos)
        fnum, wtype = tag >> 3, tag & 7
        if wtype == 0:
            val, pos = _read_varint(buf, pos)
        elif wtype == 1:
            val = buf[pos:pos + 8]
            pos += 8
        elif wtype == 5:
            val = buf[pos:pos + 4]
            pos += 4
        elif wtype == 2:
            ln, pos = _read_varint(buf, pos)
            if pos + ln > len(buf):
                raise ModelLoadError("truncated field in model file")
            val = buf[pos:pos + ln]
            pos += ln
        else:
            raise ModelLoadError(f"unsupported wire type {wtype}")
        yield fnum, wtype, val


def _signed(v: int) -> int:
    # varints store int64 two's complement in 64 bits
    return v - (1 << 64) if v >= (1 << 63) else v


def _packed_varints(buf: bytes) -> list[int]:
    out = []
    pos = 0
    while pos < len(buf):
        v, pos = _read_varint(buf, pos)
        out.append(_signed(v))
    return out


# --------------------------------------------------------------------------
# decoded graph structures
# --------------------------------------------------------------------------

@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict

    def attr(self, name, default=None):
        return self.attrs.get(name, default)


@dataclass
class OnnxModel:
    nodes: list[Node]
    initializers: dict[str, np.ndarray]
    input_name: str
    input_shape: tuple[int | None, ...]
    output_name: str
    output_shape: tuple[int | None, ...]
    graph_name: str = ""
    constants: dict[str, np.ndarray] = field(default_factory=dict)

    def run(self, x: np.ndarray) -> np.ndarray:
        return _execute(self, x)


def _parse_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    dtype = _FLOAT
    name = ""
    raw = None
    floats: list[float] = []
    ints: list[int] = []
    for fnum, wtype, val in _iter_fields(buf):
        if fnum == 1:
            dims.append(_signed(val))
        elif fnum == 2:
            dtype = val
        elif fnum == 4:
            if wtype == 2:
                floats.extend(struct.unpack(f"<{len(val) // 4}f", val))
            else:
                floats.append(struct.unpack("<f", val)[0])
        elif fnum == 7:
            if wtype == 2:
                ints.extend(_packed_varints(val))
            else:
                ints.append(_signed(val))
        elif fnum == 8:
            name = val.decode()
        elif fnum == 9:
            raw = val
    if dtype == _FLOAT:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        else:
            arr = np.array(floats, dtype=np.float64)
    elif dtype == _INT64:
        if raw is not None:
            arr = np.frombuffer(raw, dtype="<i8").astype(np.int64)
        else:
            arr = np.array(ints, dtype=np.int64)
    else:
        raise ModelLoadError(f"tensor {name!r}: unsupported data_type {dtype}")
    return name, arr.reshape(dims) if dims else arr


def _parse_attr(buf: bytes) -> tuple[str, object]:
    name = ""
    value: object = None
    for fnum, wtype, val in _iter_fields(buf):
        if fnum == 1:
            name = val.decode()
        elif fnum == 2:
            value = struct.unpack("<f", val)[0]
        elif fnum == 3:
            value = _signed(val)
        elif fnum == 4:
            value = val
        elif fnum == 5:
            value = _parse_tensor(val)[1]
        elif fnum == 7:
            if wtype == 2:
                value = list(struct.unpack(f"<{len(val) // 4}f", val))
            else:
                value = (value or []) + [struct.unpack("<f", val)[0]]
        elif fnum == 8:
            if wtype == 2:
                value = _packed_varints(val)
            else:
                value = (value if isinstance(value, list) else []) + [_signed(val)]
    return name, value


def _parse_value_info(buf: bytes) -> tuple[str, tuple[int | None, ...]]:
    name = ""
    shape: tuple[int | None, ...] = ()
    for fnum, _, val in _iter_fields(buf):
        if fnum == 1:
            name = val.decode()
        elif fnum == 2:  # TypeProto
            for f2, _, v2 in _iter_fields(val):
                if f2 == 1:  # tensor_type
                    for f3, _, v3 in _iter_fields(v2):
                        if f3 == 2:  # shape
                            dims: list[int | None] = []
                            for f4, _, v4 in _iter_fields(v3):
                                if f4 == 1:  # Dimension
                                    dim: int | None = None
                                    for f5, _, v5 in _iter_fields(v4):
                                        if f5 == 1:
                                            dim = _signed(v5)
                                    dims.append(dim)
                            shape = tuple(dims)
    return name, shape


def _parse_node(buf: bytes) -> Node:
    inputs: list[str] = []
    outputs: list[str] = []
    op_type = ""
    attrs: dict = {}
    for fnum, _, val in _iter_fields(buf):
        if fnum == 1:
            inputs.append(val.decode())
        elif fnum == 2:
            outputs.append(val.decode())
        elif fnum == 4:
            op_type = val.decode()
        elif fnum == 5:
            k, v = _parse_attr(val)
            attrs[k] = v
    return Node(op_type=op_type, inputs=inputs, outputs=outputs, attrs=attrs)


def load_model(source: str | Path | bytes) -> OnnxModel:
    """Parse an ONNX file into the built-in representation.

    Raises ModelLoadError for unreadable files, parse failures, or ops
    outside the supported subset.
    """
    if isinstance(source, (str, Path)):
        try:
            data = Path(source).read_bytes()
        except OSError as exc:
            raise ModelLoadError(f"cannot read model {source}: {exc}") from exc
    else:
        data = source

    graph_buf = None
    for fnum, _, val in _iter_fields(data):
        if fnum == 7:
            graph_buf = val
    if graph_buf is None:
        raise ModelLoadError("model file has no graph")

    nodes: list[Node] = []
    initializers: dict[str, np.ndarray] = {}
    inputs: list[tuple[str, tuple[int | None, ...]]] = []
    outputs: list[tuple[str, tuple[int | None, ...]]] = []
    graph_name = ""
    for fnum, _, val in _iter_fields(graph_buf):
        if fnum == 1:
            nodes.append(_parse_node(val))
        elif fnum == 2:
            graph_name = val.decode()
        elif fnum == 5:
            name, arr = _parse_tensor(val)
            initializers[name] = arr
        elif fnum == 11:
            inputs.append(_parse_value_info(val))
        elif fnum == 12:
            outputs.append(_parse_value_info(val))

    unsupported = sorted({n.op_type for n in nodes} - SUPPORTED_OPS)
    if unsupported:
        raise ModelLoadError(
            f"ops outside the built-in subset: {', '.join(unsupported)} "
            "(install onnxruntime to run this model)")

    runtime_inputs = [(n, s) for n, s in inputs if n not in initializers]
    if len(runtime_inputs) != 1:
        raise ModelLoadError(f"expected exactly one runtime input, found "
                             f"{len(runtime_inputs)}")
    if not outputs:
        raise ModelLoadError("model declares no outputs")

    constants = {}
    for n in nodes:
        if n.op_type == "Constant":
            constants[n.outputs[0]] = np.asarray(n.attr("value"))

    return OnnxModel(
        nodes=nodes,
        initializers=initializers,
        input_name=runtime_inputs[0][0],
        input_shape=runtime_inputs[0][1],
        output_name=outputs[0][0],
        output_shape=outputs[0][1],
        graph_name=graph_name,
        constants=constants,
    )


# --------------------------------------------------------------------------
# evaluator
# --------------------------------------------------------------------------

def _pool2d(x: np.ndarray, kshape, strides, op: str) -> np.ndarray:
    n, c, h, w = x.shape
    kh, kw = kshape
    sh, sw = strides
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    out = np.empty((n, c, oh, ow), dtype=x.dtype)
    for i in range(oh):
        for j in range(ow):
            win = x[:, :, i * sh:i * sh + kh, j * sw:j * sw + kw]
            if op == "avg":
                out[:, :, i, j] = win.mean(axis=(2, 3))
            else:
                out[:, :, i, j] = win.max(axis=(2, 3))
    return out


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _execute(model: OnnxModel, x: np.ndarray) -> np.ndarray:
    values: dict[str, np.ndarray] = dict(model.initializers)
    values.update(model.constants)
    values[model.input_name] = np.asarray(x, dtype=np.float64)

    for node in model.nodes:
        try:
            _run_node(node, values)
        except (KeyError, ValueError, IndexError) as exc:
            raise InferenceError(
                f"node {node.op_type} failed: {exc}") from exc
    if model.output_name not in values:
        raise InferenceError(f"output {model.output_name!r} was never "
                             "produced")
    return values[model.output_name]


def _run_node(node: Node, values: dict[str, np.ndarray]) -> None:
    op = node.op_type
    if op in ("Constant", "Identity"):
        out = (np.asarray(node.attr("value")) if op == "Constant"
               else values[node.inputs[0]])
    elif op == "Gemm":
        a = values[node.inputs[0]]
        b = values[node.inputs[1]]
        alpha = node.attr("alpha", 1.0)
        beta = node.attr("beta", 1.0)
        if node.attr("transA", 0):
            a = a.T
        if node.attr("transB", 0):
            b = b.T
        out = alpha * (a @ b)
        if len(node.inputs) > 2:
            out = out + beta * values[node.inputs[2]]
    elif op == "MatMul":
        out = values[node.inputs[0]] @ values[node.inputs[1]]
    elif op in ("Add", "Sub", "Mul", "Div"):
        a, b = values[node.inputs[0]], values[node.inputs[1]]
        out = {"Add": np.add, "Sub": np.subtract, "Mul": np.multiply,
               "Div": np.divide}[op](a, b)
    elif op == "Relu":
        out = np.maximum(values[node.inputs[0]], 0.0)
    elif op == "Sigmoid":
        out = 1.0 / (1.0 + np.exp(-values[node.inputs[0]]))
    elif op == "Tanh":
        out = np.tanh(values[node.inputs[0]])
    elif op == "Flatten":
        a = values[node.inputs[0]]
        axis = node.attr("axis", 1)
        lead = int(np.prod(a.shape[:axis])) if axis else 1
        out = a.reshape(lead, -1)
    elif op == "Reshape":
        a = values[node.inputs[0]]
        shape = [int(s) for s in values[node.inputs[1]]]
        shape = [a.shape[i] if s == 0 else s for i, s in enumerate(shape)]
        out = a.reshape(shape)
    elif op == "Transpose":
        a = values[node.inputs[0]]
        perm = node.attr("perm", list(range(a.ndim))[::-1])
        out = a.transpose(perm)
    elif op in ("AveragePool", "MaxPool"):
        a = values[node.inputs[0]]
        kshape = node.attr("kernel_shape")
        strides = node.attr("strides", kshape)
        pads = node.attr("pads", [0, 0, 0, 0])
        if any(pads):
            raise InferenceError(f"{op}: only zero padding is supported")
        out = _pool2d(a, kshape, strides,
                      "avg" if op == "AveragePool" else "max")
    elif op == "GlobalAveragePool":
        a = values[node.inputs[0]]
        out = a.mean(axis=tuple(range(2, a.ndim)), keepdims=True)
    elif op == "Softmax":
        a = values[node.inputs[0]]
        out = _softmax(a, node.attr("axis", -1))
    else:  # unreachable: load_model filtered op types
        raise InferenceError(f"unsupported op {op}")
    values[node.outputs[0]] = out


# --------------------------------------------------------------------------
# encoder (used by tests and fixtures to build small models)
# --------------------------------------------------------------------------

def _varint(v: int) -> bytes:
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _field(fnum: int, wtype: int, payload: bytes) -> bytes:
    return _varint((fnum << 3) | wtype) + payload


def _ld(fnum: int, payload: bytes) -> bytes:
    return _field(fnum, 2, _varint(len(payload)) + payload)


def _vi(fnum: int, v: int) -> bytes:
    return _field(fnum, 0, _varint(v & ((1 << 64) - 1)))


def encode_tensor(name: str, arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    parts = b"".join(_vi(1, int(d)) for d in arr.shape)
    if arr.dtype == np.int64:
        parts += _vi(2, _INT64)
        parts += _ld(9, arr.astype("<i8").tobytes())
    else:
        parts += _vi(2, _FLOAT)
        parts += _ld(9, arr.astype("<f4").tobytes())
    parts += _ld(8, name.encode())
    return parts


def _encode_attr(name: str, value) -> bytes:
    parts = _ld(1, name.encode())
    if isinstance(value, float):
        parts += _field(2, 5, struct.pack("<f", value)) + _vi(20, 1)
    elif isinstance(value, int):
        parts += _vi(3, value) + _vi(20, 2)
    elif isinstance(value, (list, tuple)):
        for v in value:
            parts += _vi(8, int(v))
        parts += _vi(20, 7)
    elif isinstance(value, np.ndarray):
        parts += _ld(5, encode_tensor("", value)) + _vi(20, 4)
    else:
        raise TypeError(f"unsupported attribute type {type(value)}")
    return parts


def _encode_value_info(name: str, shape) -> bytes:
    dims = b"".join(_ld(1, _vi(1, int(d))) for d in shape)
    tensor_type = _vi(1, _FLOAT) + _ld(2, dims)
    return _ld(1, name.encode()) + _ld(2, _ld(1, tensor_type))


def encode_model(nodes: list[tuple], initializers: dict[str, np.ndarray],
                 input_spec: tuple[str, tuple[int, ...]],
                 output_spec: tuple[str, tuple[int, ...]],
                 graph_name: str = "g") -> bytes:
    """Serialize a small model. ``nodes`` are (op_type, inputs, outputs,
    attrs) tuples in topological order."""
    g = b""
    for op_type, inputs, outputs, attrs in nodes:
        n = b"".join(_ld(1, i.encode()) for i in inputs)
        n += b"".join(_ld(2, o.encode()) for o in outputs)
        n += _ld(4, op_type.encode())
        n += b"".join(_ld(5, _encode_attr(k, v)) for k, v in attrs.items())
        g += _ld(1, n)
    g += _ld(2, graph_name.encode())
    g += b"".join(_ld(5, encode_tensor(k, v)) for k, v in initializers.items())
    g += _ld(11, _encode_value_info(*input_spec))
    g += _ld(12, _encode_value_info(*output_spec))

    model = _vi(1, 8)  # ir_version
    model += _ld(2, b"claimcheck-onnxlite")
    model += _ld(7, g)
    model += _ld(8, _ld(1, b"") + _vi(2, 13))  # opset 13, default domain
    return model
