"""Two-layer GRU attitude estimator with a normalized linear quaternion head.

The network maps standardized ``[gyr, acc]`` samples (plus the raw time step
``dt`` in seconds for time-aware networks) through two stacked GRU layers to
a hidden vector ``h``; the estimate is ``W·h / |W·h|``.

With ``grouped_input`` the first layer is split into a gyroscope layer and an
accelerometer layer of half width each (both also see ``dt`` when
time-aware); their states are concatenated as input of the second layer.
"""
import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _gru_kernels
from .augment import StandardizationStats

FORMAT_NAME = "attitude6d-gru"
FORMAT_VERSION = 1
CELL_VARIANT = "gru-v3: n = tanh(W_n x + b_in + r * (U_n h + b_hn)); gate order r,z,n"


class WeightFileError(ValueError):
    pass


class DegenerateOutputError(ValueError):
    pass


@dataclass
class GruLayerWeights:
    w_ih: np.ndarray  # (3H, I)
    w_hh: np.ndarray  # (3H, H)
    b_ih: np.ndarray  # (3H,)
    b_hh: np.ndarray  # (3H,)

    def __post_init__(self):
        for name in ("w_ih", "w_hh", "b_ih", "b_hh"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        self.check()

    @property
    def hidden_size(self):
        return self.w_hh.shape[1]

    @property
    def input_size(self):
        return self.w_ih.shape[1]

    @property
    def n_params(self):
        H, I = self.hidden_size, self.input_size
        return 3 * H * (I + H) + 6 * H

    def check(self, prefix="layer"):
        H = self.w_hh.shape[-1] if self.w_hh.ndim == 2 else -1
        expected = {
            "w_ih": (3 * H, self.w_ih.shape[-1] if self.w_ih.ndim == 2 else -1),
            "w_hh": (3 * H, H),
            "b_ih": (3 * H,),
            "b_hh": (3 * H,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape or H <= 0:
                raise ValueError(f"{prefix}.{name}: shape {arr.shape} inconsistent with hidden size {H}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{prefix}.{name}: non-finite values")

    @classmethod
    def random(cls, input_size, hidden_size, rng):
        k = 1.0 / np.sqrt(hidden_size)
        H3 = 3 * hidden_size
        return cls(
            w_ih=rng.uniform(-k, k, (H3, input_size)),
            w_hh=rng.uniform(-k, k, (H3, hidden_size)),
            b_ih=rng.uniform(-k, k, H3),
            b_hh=rng.uniform(-k, k, H3),
        )


def gru_cell_forward(w, x, h):
    """One GRU step for a single input vector ``x`` and state ``h``."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.shape != (w.input_size,) or h.shape != (w.hidden_size,):
        raise ValueError(
            f"shape mismatch: x {x.shape} vs input {w.input_size}, h {h.shape} vs hidden {w.hidden_size}"
        )
    hs = _gru_kernels.forward(w.w_ih, w.w_hh, w.b_ih, w.b_hh, x[None, None, :], h[None, :])[0]
    return hs[0, 0]


@dataclass
class GruNetwork:
    input_layers: List[GruLayerWeights]
    hidden_layer: GruLayerWeights
    head: np.ndarray  # (4, H)
    time_aware: bool = True
    grouped_input: bool = False
    native_rate_hz: Optional[float] = None
    standardization: StandardizationStats = field(default_factory=StandardizationStats.identity)

    def __post_init__(self):
        self.head = np.ascontiguousarray(self.head, dtype=float)
        self.check()

    # --- structure -----------------------------------------------------

    @property
    def hidden_size(self):
        return self.hidden_layer.hidden_size

    @property
    def n_inputs(self):
        return 7 if self.time_aware else 6

    def input_groups(self):
        """Column indices of the feature matrix feeding each first-layer GRU."""
        dt = [6] if self.time_aware else []
        if self.grouped_input:
            return [[0, 1, 2] + dt, [3, 4, 5] + dt]
        return [list(range(6)) + dt]

    def layer_names(self):
        first = ["layer0_gyr", "layer0_acc"] if self.grouped_input else ["layer0"]
        return first + ["layer1"]

    def layers(self):
        return list(self.input_layers) + [self.hidden_layer]

    def check(self):
        if not self.time_aware and not self.native_rate_hz:
            raise ValueError("a network without time input needs native_rate_hz")
        groups = self.input_groups()
        if len(self.input_layers) != len(groups):
            raise ValueError(f"expected {len(groups)} first-layer GRUs, got {len(self.input_layers)}")
        names = self.layer_names()
        for name, layer, cols in zip(names, self.input_layers, groups):
            layer.check(name)
            if layer.input_size != len(cols):
                raise ValueError(f"{name}.w_ih: expects {len(cols)} inputs, has {layer.input_size}")
        self.hidden_layer.check("layer1")
        first_width = sum(l.hidden_size for l in self.input_layers)
        if self.hidden_layer.input_size != first_width:
            raise ValueError(f"layer1.w_ih: expects {first_width} inputs, has {self.hidden_layer.input_size}")
        if self.head.shape != (4, self.hidden_size):
            raise ValueError(f"head.w: shape {self.head.shape}, expected (4, {self.hidden_size})")
        if not np.all(np.isfinite(self.head)):
            raise ValueError("head.w: non-finite values")

    @property
    def n_params(self):
        return sum(l.n_params for l in self.layers()) + self.head.size

    def parameters(self):
        """Name → array mapping of every trainable tensor (arrays are live references)."""
        params = {}
        for name, layer in zip(self.layer_names(), self.layers()):
            for t in ("w_ih", "w_hh", "b_ih", "b_hh"):
                params[f"{name}.{t}"] = getattr(layer, t)
        params["head.w"] = self.head
        return params

    def initial_states(self, batch=1):
        return [np.zeros((batch, l.hidden_size)) for l in self.layers()]

    # --- computation ---------------------------------------------------

    def features(self, gyr, acc, dt=None):
        """Network input matrix ``(..., 6|7)`` from raw measurements."""
        x = np.concatenate([np.asarray(gyr, dtype=float), np.asarray(acc, dtype=float)], axis=-1)
        x = (x - self.standardization.mean) / self.standardization.std
        if self.time_aware:
            if dt is None:
                raise ValueError("time-aware network needs dt for every step")
            dt = np.broadcast_to(np.asarray(dt, dtype=float), x.shape[:-1])
            x = np.concatenate([x, dt[..., None]], axis=-1)
        return np.ascontiguousarray(x)

    def forward_batch(self, x, states=None):
        """Run features ``x`` of shape (B, T, C); returns raw head outputs (B, T, 4) and a cache."""
        B = x.shape[0]
        states = self.initial_states(B) if states is None else states
        cache = {"x": x, "layers": []}
        firsts = []
        for layer, cols, h0 in zip(self.input_layers, self.input_groups(), states):
            xi = np.ascontiguousarray(x[:, :, cols])
            out = _gru_kernels.forward(layer.w_ih, layer.w_hh, layer.b_ih, layer.b_hh, xi, h0)
            cache["layers"].append((xi, h0, out))
            firsts.append(out[0])
        x1 = firsts[0] if len(firsts) == 1 else np.ascontiguousarray(np.concatenate(firsts, axis=-1))
        hl = self.hidden_layer
        out = _gru_kernels.forward(hl.w_ih, hl.w_hh, hl.b_ih, hl.b_hh, x1, states[-1])
        cache["layers"].append((x1, states[-1], out))
        h = out[0]
        y = np.einsum("btj,kj->btk", h, self.head)
        cache["h"] = h
        final = [c[2][0][:, -1, :].copy() for c in cache["layers"]]
        return y, final, cache

    def backward_batch(self, dy, cache):
        """Gradients (name → array) of a scalar loss given ``dy = ∂loss/∂y``."""
        grads = {"head.w": np.einsum("btk,btj->kj", dy, cache["h"])}
        dh = np.ascontiguousarray(np.einsum("btk,kj->btj", dy, self.head))
        names = self.layer_names()
        layers = self.layers()
        x1, h0, out = cache["layers"][-1]
        hl = layers[-1]
        dx1, _, *g = _gru_kernels.backward(
            hl.w_ih, hl.w_hh, x1, h0, *out, dh, np.zeros_like(h0), True
        )
        for t, arr in zip(("w_ih", "w_hh", "b_ih", "b_hh"), g):
            grads[f"{names[-1]}.{t}"] = arr
        offset = 0
        for name, layer, (xi, h0i, outi) in zip(names[:-1], layers[:-1], cache["layers"][:-1]):
            H = layer.hidden_size
            dhi = np.ascontiguousarray(dx1[:, :, offset:offset + H])
            offset += H
            _, _, *g = _gru_kernels.backward(
                layer.w_ih, layer.w_hh, xi, h0i, *outi, dhi, np.zeros_like(h0i), False
            )
            for t, arr in zip(("w_ih", "w_hh", "b_ih", "b_hh"), g):
                grads[f"{name}.{t}"] = arr
        return grads

    def copy(self):
        return GruNetwork(
            input_layers=[GruLayerWeights(l.w_ih.copy(), l.w_hh.copy(), l.b_ih.copy(), l.b_hh.copy())
                          for l in self.input_layers],
            hidden_layer=GruLayerWeights(*(getattr(self.hidden_layer, t).copy()
                                           for t in ("w_ih", "w_hh", "b_ih", "b_hh"))),
            head=self.head.copy(),
            time_aware=self.time_aware,
            grouped_input=self.grouped_input,
            native_rate_hz=self.native_rate_hz,
            standardization=StandardizationStats(self.standardization.mean.copy(),
                                                 self.standardization.std.copy()),
        )


def init_network(hidden_size, time_aware=True, grouped_input=False, native_rate_hz=None,
                 standardization=None, seed=0):
    rng = np.random.default_rng(seed)
    n_in = 7 if time_aware else 6
    if grouped_input:
        if hidden_size % 2:
            raise ValueError("grouped input needs an even hidden size")
        half = hidden_size // 2
        per_group = 4 if time_aware else 3
        firsts = [GruLayerWeights.random(per_group, half, rng) for _ in range(2)]
    else:
        firsts = [GruLayerWeights.random(n_in, hidden_size, rng)]
    hidden = GruLayerWeights.random(hidden_size, hidden_size, rng)
    k = 1.0 / np.sqrt(hidden_size)
    return GruNetwork(
        input_layers=firsts,
        hidden_layer=hidden,
        head=rng.uniform(-k, k, (4, hidden_size)),
        time_aware=time_aware,
        grouped_input=grouped_input,
        native_rate_hz=native_rate_hz,
        standardization=standardization or StandardizationStats.identity(),
    )


def normalize_output(y):
    n = np.linalg.norm(y, axis=-1, keepdims=True)
    if np.any(n < 1e-12):
        k = int(np.argmin(n.reshape(-1)))
        raise DegenerateOutputError(f"head output norm below 1e-12 at step {k}")
    return y / n


def network_forward(net, gyr, acc, dt=None, h0=None):
    """Estimate one quaternion per sample; returns ``(quats, final_states)``.

    Passing the returned states as ``h0`` of the next call continues the
    recurrence exactly as if both parts had been processed in one pass.
    """
    x = net.features(gyr, acc, dt)[None]
    states = None if h0 is None else [np.asarray(h, dtype=float).reshape(1, -1) for h in h0]
    y, final, _ = net.forward_batch(x, states)
    return normalize_output(y[0]), [f[0] for f in final]


def run_network(net, seq):
    """Whole-sequence estimate; non-time-aware networks are resampled around their native rate."""
    from .resample import jitr_wrap

    if net.time_aware:
        return network_forward(net, seq.gyr, seq.acc, seq.dt)[0]
    return jitr_wrap(lambda s: network_forward(net, s.gyr, s.acc)[0], seq, net.native_rate_hz)


# --- weight files -----------------------------------------------------------


def network_to_dict(net):
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "cell_variant": CELL_VARIANT,
        "time_aware": bool(net.time_aware),
        "grouped_input": bool(net.grouped_input),
        "native_rate_hz": None if net.native_rate_hz is None else float(net.native_rate_hz),
        "hidden_size": int(net.hidden_size),
        "n_params": int(net.n_params),
        "standardization": {
            "mean": net.standardization.mean.tolist(),
            "std": net.standardization.std.tolist(),
        },
        "tensors": [
            {"name": name, "shape": list(arr.shape), "data": arr.tolist()}
            for name, arr in net.parameters().items()
        ],
    }


def dumps(doc):
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save_weights(net, path, extra=None):
    """Write ``net`` as a JSON weight document; ``extra`` sections are appended verbatim."""
    doc = network_to_dict(net)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))


def _tensor(entry):
    name = entry.get("name", "?")
    try:
        shape = tuple(int(s) for s in entry["shape"])
        arr = np.asarray(entry["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFileError(f"tensor {name}: malformed entry ({exc})") from None
    if arr.shape != shape:
        raise WeightFileError(f"tensor {name}: declared shape {list(shape)} but data has shape {list(arr.shape)}")
    if not np.all(np.isfinite(arr)):
        raise WeightFileError(f"tensor {name}: non-finite value")
    return arr


def network_from_dict(doc):
    if doc.get("format") != FORMAT_NAME:
        raise WeightFileError(f"not a {FORMAT_NAME} document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise WeightFileError(f"unsupported format_version {doc.get('format_version')!r}, expected {FORMAT_VERSION}")
    if doc.get("cell_variant") != CELL_VARIANT:
        raise WeightFileError(f"unsupported cell_variant {doc.get('cell_variant')!r}")
    tensors = {e.get("name"): _tensor(e) for e in doc.get("tensors", [])}
    grouped = bool(doc.get("grouped_input", False))
    names = (["layer0_gyr", "layer0_acc"] if grouped else ["layer0"]) + ["layer1"]
    layers = []
    for name in names:
        try:
            parts = [tensors[f"{name}.{t}"] for t in ("w_ih", "w_hh", "b_ih", "b_hh")]
        except KeyError as exc:
            raise WeightFileError(f"missing tensor {exc.args[0]}") from None
        try:
            layers.append(GruLayerWeights(*parts))
        except ValueError as exc:
            raise WeightFileError(str(exc).replace("layer.", f"{name}.", 1)) from None
    if "head.w" not in tensors:
        raise WeightFileError("missing tensor head.w")
    std = doc.get("standardization", {})
    try:
        net = GruNetwork(
            input_layers=layers[:-1],
            hidden_layer=layers[-1],
            head=tensors["head.w"],
            time_aware=bool(doc.get("time_aware", True)),
            grouped_input=grouped,
            native_rate_hz=doc.get("native_rate_hz"),
            standardization=StandardizationStats(std.get("mean", np.zeros(6)), std.get("std", np.ones(6))),
        )
    except ValueError as exc:
        raise WeightFileError(str(exc)) from None
    counted = sum(a.size for a in tensors.values())
    if counted != net.n_params:
        raise WeightFileError(f"parameter count {counted} disagrees with layer shapes ({net.n_params})")
    if "n_params" in doc and doc["n_params"] != counted:
        raise WeightFileError(f"n_params field {doc['n_params']} disagrees with tensors ({counted})")
    return net


def load_weights(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"{path}: not valid JSON ({exc})") from None
    return network_from_dict(doc)
