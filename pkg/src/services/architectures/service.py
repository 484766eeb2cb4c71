"""
AE, SCAE and STAE model graphs over the tensor engine.

Encoder E1 (stride 1) -> E2..E4 (stride 2); decoder D1..D3 upsample x2 then
convolve; D4 maps to the output channels with a bias and a sigmoid. SCAE adds
the E3 -> D2 and E1 -> D3 skips. STAE encodes the previous frame with P1, P2
and fuses it with E2 at E3's input.
"""

import logging
from collections import OrderedDict
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from src.core import ops
from src.core.errors import ContractViolation
from src.core.tensor import Tensor
from src.services.architectures.schemas.architectures import (
    INPUTS,
    SKIP_EDGES,
    ArchitectureConfig,
    LayerSpec,
    check_spatial,
)
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

Image = Union[np.ndarray, Tensor]
Edge = Tuple[str, str]


def _layer_table(config: ArchitectureConfig) -> List[LayerSpec]:
    w1, w2, w3, w4 = config.channel_widths
    skips = config.kind in ("SCAE", "STAE")
    temporal = config.kind == "STAE"
    layers = []
    if temporal:
        layers += [
            LayerSpec("P1", ("previous",), w1),
            LayerSpec("P2", ("P1",), w2, stride=2),
        ]
    layers += [
        LayerSpec("E1", ("current",), w1),
        LayerSpec("E2", ("E1",), w2, stride=2),
        LayerSpec("E3", ("E2", "P2") if temporal else ("E2",), w3, stride=2),
        LayerSpec("E4", ("E3",), w4, stride=2),
        LayerSpec("D1", ("E4",), w3, upsample=True),
        LayerSpec("D2", ("D1", "E3") if skips else ("D1",), w2, upsample=True),
        LayerSpec("D3", ("D2",), w1, upsample=True, skip_after_upsample="E1" if skips else None),
        LayerSpec("D4", ("D3",), config.in_channels, batchnorm=False, activation="sigmoid", bias=True),
    ]
    return layers


class ModelGraph:
    """Layer wiring plus the parameter store and batchnorm states, keyed by layer name."""

    def __init__(self, config: ArchitectureConfig, dtype=np.float32):
        self.config = config
        self.layers = _layer_table(config)
        self.loss_mode: Optional[str] = None
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.batchnorm: Dict[str, ops.BatchNormState] = {}

        channels = {"current": config.in_channels, "previous": config.in_channels}
        k = config.kernel
        for layer in self.layers:
            missing = [s for s in layer.inputs if s not in channels]
            if missing:
                raise ContractViolation(f"layer {layer.name} reads {missing} before they are produced")
            c_in = sum(channels[s] for s in layer.inputs)
            self._add(f"{layer.name}.depthwise", (c_in, k, k), dtype)
            self._add(f"{layer.name}.pointwise", (layer.out_channels, c_in), dtype)
            if layer.bias:
                self._add(f"{layer.name}.bias", (layer.out_channels,), dtype)
            if layer.batchnorm:
                state = ops.BatchNormState.create(layer.out_channels, name=layer.name)
                state.gamma = Tensor(state.gamma.data, requires_grad=True, name=state.gamma.name, dtype=dtype)
                state.beta = Tensor(state.beta.data, requires_grad=True, name=state.beta.name, dtype=dtype)
                self.batchnorm[layer.name] = state
                self.params[state.gamma.name] = state.gamma
                self.params[state.beta.name] = state.beta
            channels[layer.name] = layer.out_channels

    def _add(self, name: str, shape: Tuple[int, ...], dtype) -> None:
        self.params[name] = Tensor(np.zeros(shape), requires_grad=True, name=name, dtype=dtype)

    @property
    def kind(self) -> str:
        return self.config.kind

    @property
    def uses_previous(self) -> bool:
        return any("previous" in layer.inputs for layer in self.layers)

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def parameter_count(self) -> int:
        return sum(t.size for t in self.params.values())

    def state_arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Every tensor persisted in a weight file, in a stable order."""
        arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for name, tensor in self.params.items():
            arrays[name] = tensor.data
        for layer_name, state in self.batchnorm.items():
            arrays[f"{layer_name}.running_mean"] = state.running_mean
            arrays[f"{layer_name}.running_var"] = state.running_var
        return arrays

    def load_state(self, arrays: Dict[str, np.ndarray]) -> None:
        expected = self.state_arrays()
        if set(arrays) != set(expected):
            missing = sorted(set(expected) - set(arrays))
            extra = sorted(set(arrays) - set(expected))
            raise ContractViolation(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, target in expected.items():
            source = np.asarray(arrays[name])
            if source.shape != target.shape:
                raise ContractViolation(f"{name}: shape {source.shape} does not match {target.shape}")
            target[...] = source
        for tensor in self.params.values():
            tensor.version += 1

    def astype(self, dtype) -> "ModelGraph":
        copy = ModelGraph(self.config, dtype=dtype)
        copy.load_state({k: v.astype(dtype) for k, v in self.state_arrays().items()})
        for name, state in copy.batchnorm.items():
            state.running_mean = state.running_mean.astype(dtype)
            state.running_var = state.running_var.astype(dtype)
        copy.loss_mode = self.loss_mode
        return copy

    def forward(
        self,
        current: Image,
        previous: Optional[Image] = None,
        mode: str = "infer",
        disabled_edges: Iterable[Edge] = (),
    ) -> Tensor:
        """
        Run the graph on a B x C x H x W batch. `previous` is read by STAE
        only. `disabled_edges` feeds zeros instead of the named (source,
        consumer) tensors, e.g. ("E3", "D2").
        """
        x = self._input(current, "current")
        values: Dict[str, Tensor] = {"current": x}
        if self.uses_previous:
            if previous is None:
                raise ContractViolation("STAE needs the previous frame")
            p = self._input(previous, "previous")
            if p.shape != x.shape:
                raise ContractViolation(f"previous frame shape {p.shape} does not match current {x.shape}")
            values["previous"] = p
        disabled = set(tuple(e) for e in disabled_edges)

        def read(source: str, consumer: str) -> Tensor:
            t = values[source]
            if (source, consumer) in disabled:
                return ops.constant(np.zeros_like(t.data))
            return t

        for layer in self.layers:
            h = read(layer.sources[0], layer.name)
            for source in layer.sources[1:]:
                h = ops.concat_channels(h, read(source, layer.name))
            if layer.upsample:
                h = ops.upsample_nearest(h, 2)
            if layer.skip_after_upsample:
                h = ops.concat_channels(h, read(layer.skip_after_upsample, layer.name))
            h = ops.conv_separable(
                h,
                self.params[f"{layer.name}.depthwise"],
                self.params[f"{layer.name}.pointwise"],
                stride=layer.stride,
                padding="same",
                bias=self.params.get(f"{layer.name}.bias"),
            )
            if layer.batchnorm:
                h = ops.batch_norm(h, self.batchnorm[layer.name], mode)
            h = ops.sigmoid(h) if layer.activation == "sigmoid" else ops.relu(h)
            values[layer.name] = h
        return values[self.layers[-1].name]

    def _input(self, value: Image, role: str) -> Tensor:
        t = value if isinstance(value, Tensor) else ops.constant(np.asarray(value), dtype=self.dtype)
        if t.data.ndim == 3:
            t = ops.constant(t.data[None])
        if t.data.ndim != 4 or t.shape[1] != self.config.in_channels:
            raise ContractViolation(f"{role} frame must be B x {self.config.in_channels} x H x W, got {t.shape}")
        check_spatial(*t.shape[2:])
        if t.dtype != self.dtype and not t.requires_grad:
            t = ops.constant(t.data, dtype=self.dtype)
        return t

    def __repr__(self) -> str:
        return f"ModelGraph(kind={self.kind}, layers={len(self.layers)}, params={self.parameter_count()})"


def build_ae(config: ArchitectureConfig) -> ModelGraph:
    return _build(config, "AE")


def build_scae(config: ArchitectureConfig) -> ModelGraph:
    return _build(config, "SCAE")


def build_stae(config: ArchitectureConfig) -> ModelGraph:
    return _build(config, "STAE")


def _build(config: ArchitectureConfig, kind: str) -> ModelGraph:
    if config.kind != kind:
        config = ArchitectureConfig(
            kind=kind,
            base_channels=config.base_channels,
            widths=config.widths,
            input_size=config.input_size,
            kernel=config.kernel,
            in_channels=config.in_channels,
        )
    graph = ModelGraph(config)
    logger.debug(f"built {graph!r}")
    return graph


BUILDERS = {"AE": build_ae, "SCAE": build_scae, "STAE": build_stae}


def init_params(graph: ModelGraph, seed: int) -> ModelGraph:
    """He-normal kernels (std sqrt(2 / fan_in)), zero bias, gamma 1, beta 0, running stats (0, 1)."""
    for name, tensor in graph.params.items():
        suffix = name.rsplit(".", 1)[1]
        if suffix == "depthwise":
            fan_in = tensor.shape[1] * tensor.shape[2]
        elif suffix == "pointwise":
            fan_in = tensor.shape[1]
        else:
            fill = 1.0 if suffix == "gamma" else 0.0
            tensor.assign_(np.full(tensor.shape, fill, dtype=tensor.dtype))
            continue
        rng = np.random.default_rng(derive_seed(seed, name))
        tensor.assign_(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=tensor.shape).astype(tensor.dtype))
    for state in graph.batchnorm.values():
        state.running_mean[...] = 0.0
        state.running_var[...] = 1.0
    return graph


def build_model(config: ArchitectureConfig, seed: int) -> ModelGraph:
    return init_params(BUILDERS[config.kind](config), seed)


def restore_frame(graph: ModelGraph, current: np.ndarray, previous: Optional[np.ndarray] = None) -> np.ndarray:
    """Inference on a single C x H x W frame; returns a float32 C x H x W array."""
    out = graph.forward(current[None], None if previous is None else previous[None], mode="infer")
    return out.data[0].astype(np.float32)
