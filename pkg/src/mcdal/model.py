"""Shared-backbone classifier with a main head and auxiliary heads.

The backbone G is a small ReLU MLP; the main head F and every auxiliary
head are linear layers of identical shape (feature_dim x C plus bias).
Auxiliary heads see the backbone features as constants: no auxiliary loss
(cross-entropy or discrepancy) ever produces a gradient for G, so unlabeled
data cannot influence the task model.

Gradients are hand-derived per layer; there is no autodiff graph.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import backend as K
from .losses import L1, DistanceKind, discrepancy_grads_wrt_aux
from .numeric import ShapeError, as_matrix

MAIN = 0  # head index of the task head; auxiliary heads are 1..k

CHECKPOINT_FORMAT = "mcdal-model"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple = (32, 32)
    num_classes: int = 2
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.input_dim < 1 or any(d < 1 for d in self.hidden_dims):
            raise ValueError("all dimensions must be >= 1")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def feature_dim(self):
        return self.hidden_dims[-1] if self.hidden_dims else self.input_dim


@dataclass
class Linear:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)


@dataclass
class LayerGrads:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class ThreeHeadClassifier:
    """Backbone layers plus one main and >= 2 auxiliary linear heads."""

    spec: MlpSpec
    g_layers: list
    main_head: Linear
    aux_heads: list

    @property
    def f1(self):
        return self.aux_heads[0]

    @property
    def f2(self):
        return self.aux_heads[1]

    @property
    def num_aux(self):
        return len(self.aux_heads)


@dataclass
class ForwardRecord:
    """One forward pass: features, logits, and probabilities per head.

    layer_inputs / preacts cache the backbone intermediates for backward.
    """

    features: np.ndarray
    logits_main: np.ndarray
    p: np.ndarray
    aux_logits: list
    aux_p: list
    layer_inputs: list = field(repr=False, default_factory=list)
    preacts: list = field(repr=False, default_factory=list)

    @property
    def logits_f1(self):
        return self.aux_logits[0]

    @property
    def logits_f2(self):
        return self.aux_logits[1]

    @property
    def p1(self):
        return self.aux_p[0]

    @property
    def p2(self):
        return self.aux_p[1]


@dataclass
class CeGradients:
    """Gradients of the cross-entropy of one head.

    g_layers is None for auxiliary heads: their loss is cut off at the
    feature boundary and contributes nothing to the backbone.
    """

    head_index: int
    head: LayerGrads
    g_layers: list = None


def _init_linear(fan_in, fan_out, rng):
    limit = 1.0 / np.sqrt(fan_in)
    weight = rng.uniform(-limit, limit, (fan_in, fan_out))
    return Linear(weight=np.ascontiguousarray(weight), bias=np.zeros(fan_out))


def init_model(spec, rng, num_aux_heads=2):
    """Fan-in-scaled uniform weights, zero biases, independent head draws."""
    if num_aux_heads < 2:
        raise ValueError(f"num_aux_heads must be >= 2, got {num_aux_heads}")
    g_layers = []
    fan_in = spec.input_dim
    for width in spec.hidden_dims:
        g_layers.append(_init_linear(fan_in, width, rng))
        fan_in = width
    main = _init_linear(spec.feature_dim, spec.num_classes, rng)
    aux = [_init_linear(spec.feature_dim, spec.num_classes, rng) for _ in range(num_aux_heads)]
    return ThreeHeadClassifier(spec=spec, g_layers=g_layers, main_head=main, aux_heads=aux)


def forward(model, x):
    """Run the backbone and every head; returns a ForwardRecord."""
    x = as_matrix(x, "x")
    if x.shape[1] != model.spec.input_dim:
        raise ShapeError(f"forward: x has {x.shape[1]} columns, expected {model.spec.input_dim}")
    layer_inputs, preacts = [], []
    hidden = x
    for layer in model.g_layers:
        layer_inputs.append(hidden)
        pre = K.add_rowvec(K.matmul(hidden, layer.weight), layer.bias)
        preacts.append(pre)
        hidden = K.relu(pre)
    features = hidden
    logits_main = K.add_rowvec(K.matmul(features, model.main_head.weight), model.main_head.bias)
    aux_logits = [
        K.add_rowvec(K.matmul(features, h.weight), h.bias) for h in model.aux_heads
    ]
    return ForwardRecord(
        features=features,
        logits_main=logits_main,
        p=K.softmax_rows(logits_main),
        aux_logits=aux_logits,
        aux_p=[K.softmax_rows(z) for z in aux_logits],
        layer_inputs=layer_inputs,
        preacts=preacts,
    )


def predict(model, x):
    """Main-head argmax class indices."""
    return np.argmax(forward(model, x).logits_main, axis=1).astype(np.int64)


def _head_grads(features, dlogits):
    return LayerGrads(weight=K.matmul_at_b(features, dlogits), bias=dlogits.sum(axis=0))


def _backbone_grads(model, record, dfeatures):
    grads = []
    d_post = dfeatures
    for layer, pre, inp in zip(
        reversed(model.g_layers), reversed(record.preacts), reversed(record.layer_inputs)
    ):
        d_pre = K.relu_backward(pre, d_post)
        grads.append(LayerGrads(weight=K.matmul_at_b(inp, d_pre), bias=d_pre.sum(axis=0)))
        d_post = K.matmul_a_bt(d_pre, layer.weight)
    grads.reverse()
    return grads


def _check_labels(labels, num_classes, n):
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape}, expected ({n},)")
    if n and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"label out of range [0, {num_classes})")
    return labels


def backward_ce(model, record, x, labels, head=MAIN):
    """Cross-entropy gradients for one head.

    head=MAIN returns backbone + main-head gradients; head=i (1-based aux
    index) returns only that auxiliary head's gradients, with the features
    treated as constants.
    """
    n = record.p.shape[0]
    if n == 0:
        raise ValueError("backward_ce: empty batch")
    labels = _check_labels(labels, model.spec.num_classes, n)
    if head == MAIN:
        dlogits = K.ce_grad(record.p, labels)
        f_grads = _head_grads(record.features, dlogits)
        dfeatures = K.matmul_a_bt(dlogits, model.main_head.weight)
        return CeGradients(MAIN, f_grads, _backbone_grads(model, record, dfeatures))
    if not 1 <= head <= model.num_aux:
        raise ValueError(f"unknown head index {head}")
    dlogits = K.ce_grad(record.aux_p[head - 1], labels)
    return CeGradients(head, _head_grads(record.features, dlogits))


def backward_dis(model, record, kind: DistanceKind = L1):
    """Discrepancy-loss gradients, auxiliary heads only.

    Returns one LayerGrads per aux head; the backbone and main head receive
    none (detach contract).
    """
    if record.p.shape[0] == 0:
        raise ValueError("backward_dis: empty batch")
    probs = [record.p] + list(record.aux_p)
    dprob = discrepancy_grads_wrt_aux(probs, kind)
    grads = []
    for p_i, g_i in zip(record.aux_p, dprob):
        dlogits = K.softmax_backward(p_i, np.ascontiguousarray(g_i))
        grads.append(_head_grads(record.features, dlogits))
    return grads


# --- checkpoint serialization (textual, exact float64 round trip) ---------


def _linear_to_obj(layer):
    return {"weight": layer.weight.tolist(), "bias": layer.bias.tolist()}


def _linear_from_obj(obj):
    return Linear(
        weight=np.ascontiguousarray(obj["weight"], dtype=np.float64),
        bias=np.ascontiguousarray(obj["bias"], dtype=np.float64),
    )


def checkpoint_text(model):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": {
            "input_dim": model.spec.input_dim,
            "hidden_dims": list(model.spec.hidden_dims),
            "num_classes": model.spec.num_classes,
            "activation": model.spec.activation,
        },
        "g_layers": [_linear_to_obj(l) for l in model.g_layers],
        "main_head": _linear_to_obj(model.main_head),
        "aux_heads": [_linear_to_obj(h) for h in model.aux_heads],
    }
    return json.dumps(doc)


def save_checkpoint(model, path):
    with open(path, "w") as fh:
        fh.write(checkpoint_text(model))


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a model checkpoint: format={doc.get('format')!r}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    spec = MlpSpec(
        input_dim=doc["spec"]["input_dim"],
        hidden_dims=tuple(doc["spec"]["hidden_dims"]),
        num_classes=doc["spec"]["num_classes"],
        activation=doc["spec"]["activation"],
    )
    return ThreeHeadClassifier(
        spec=spec,
        g_layers=[_linear_from_obj(o) for o in doc["g_layers"]],
        main_head=_linear_from_obj(doc["main_head"]),
        aux_heads=[_linear_from_obj(o) for o in doc["aux_heads"]],
    )
