"""
Central finite-difference verification of the hand-written backward passes.

Checks run in float64 so that the comparison measures the backward pass rather
than float32 rounding in the forward evaluations.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.core import ops
from src.core.errors import ContractViolation
from src.core.tensor import Graph, Tensor, backprop

logger = logging.getLogger(__name__)

OP_TOLERANCE = 1e-3
LOSS_TOLERANCE = 5e-3


def _scalar(value: Tensor) -> float:
    if value.size != 1:
        raise ContractViolation(f"finite-difference forward must return a scalar, got shape {value.shape}")
    result = value.item()
    if not np.isfinite(result):
        raise ContractViolation(f"finite-difference forward returned a non-finite value: {result}")
    return result


def finite_difference_check(
    forward: Callable[[Tensor], Tensor],
    params: Tensor,
    epsilon: float = 1e-3,
    samples: int = 200,
    seed: int = 0,
) -> float:
    """
    Compare backprop gradients of `forward(params)` with central differences.

    Returns the max over sampled coordinates of
    |analytic - central| / max(|analytic|, |central|, 1e-8).
    """
    if epsilon <= 0:
        raise ContractViolation(f"epsilon must be positive, got {epsilon}")
    params.requires_grad = True
    with Graph() as graph:
        out = forward(params)
    _scalar(out)
    grads = backprop(graph, output=out)
    analytic = grads.get(params, np.zeros_like(params.data)).reshape(-1)

    flat = params.data.reshape(-1)
    rng = np.random.default_rng(seed)
    coords = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
    worst = 0.0
    for index in coords:
        original = flat[index]
        flat[index] = original + epsilon
        plus = _scalar(forward(params))
        flat[index] = original - epsilon
        minus = _scalar(forward(params))
        flat[index] = original
        central = (plus - minus) / (2.0 * epsilon)
        a = float(analytic[index])
        error = abs(a - central) / max(abs(a), abs(central), 1e-8)
        worst = max(worst, error)
    return worst


# ==================== OP REGISTRY ====================

@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def _random(rng: np.random.Generator, *shape: int, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), dtype=np.float64)


def _projected(fn: Callable[[Tensor], Tensor], shape_probe: Tensor, rng: np.random.Generator):
    """Random linear read-out so no coordinate has a structurally zero gradient."""
    out_shape = fn(shape_probe).shape
    weights = rng.standard_normal(out_shape)
    return lambda t: ops.weighted_sum(fn(t), weights)


def _check_all(fn_by_input: Dict[str, tuple], epsilon: float, seed: int) -> float:
    worst = 0.0
    for label, (fn, tensor) in fn_by_input.items():
        err = finite_difference_check(fn, tensor, epsilon=epsilon, seed=seed)
        logger.debug(f"  {label}: max relative error {err:.3e}")
        worst = max(worst, err)
    return worst


def _check_conv(epsilon: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for stride in (1, 2):
        x = _random(rng, 2, 8, 16, 16)
        dw = _random(rng, 8, 3, 3)
        pw = _random(rng, 6, 8)
        bias = _random(rng, 6)
        conv = lambda x_, dw_, pw_, b_: ops.conv_separable(x_, dw_, pw_, stride=stride, bias=b_)
        cases = {
            "input": (_projected(lambda t: conv(t, dw, pw, bias), x, rng), x),
            "depthwise": (_projected(lambda t: conv(x, t, pw, bias), dw, rng), dw),
            "pointwise": (_projected(lambda t: conv(x, dw, t, bias), pw, rng), pw),
            "bias": (_projected(lambda t: conv(x, dw, pw, t), bias, rng), bias),
        }
        worst = max(worst, _check_all(cases, epsilon, seed))
    return worst


def _check_upsample(epsilon: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = _random(rng, 2, 8, 8, 8)
    return _check_all({"input": (_projected(lambda t: ops.upsample_nearest(t, 2), x, rng), x)}, epsilon, seed)


def _check_batch_norm(epsilon: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for mode in ("train", "infer"):
        x = _random(rng, 2, 8, 16, 16)
        state = ops.BatchNormState.create(8)
        state.gamma = _random(rng, 8, low=0.5, high=1.5)
        state.beta = _random(rng, 8)
        state.running_mean[...] = rng.uniform(-0.2, 0.2, 8)
        state.running_var[...] = rng.uniform(0.5, 1.5, 8)

        bn = lambda t: ops.batch_norm(x, state, mode)
        cases = {
            "input": (_projected(lambda t: ops.batch_norm(t, state, mode), x, rng), x),
            "gamma": (_projected(bn, state.gamma, rng), state.gamma),
            "beta": (_projected(bn, state.beta, rng), state.beta),
        }
        worst = max(worst, _check_all(cases, epsilon, seed))
    return worst


def _away_from_kink(rng: np.random.Generator, shape, margin: float) -> Tensor:
    values = rng.uniform(-1.0, 1.0, size=shape)
    values = np.where(np.abs(values) < margin, np.sign(values + 1e-12) * margin * 2, values)
    return Tensor(values, dtype=np.float64)


def _check_relu(epsilon: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = _away_from_kink(rng, (2, 8, 16, 16), margin=10 * epsilon)
    return _check_all({"input": (_projected(ops.relu, x, rng), x)}, epsilon, seed)


def _check_sigmoid(epsilon: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = _random(rng, 2, 8, 16, 16, low=-4.0, high=4.0)
    return _check_all({"input": (_projected(ops.sigmoid, x, rng), x)}, epsilon, seed)


def _check_concat(epsilon: float, seed: int) -> float:
    rng = np.random.default_rng(seed)
    a = _random(rng, 2, 3, 16, 16)
    b = _random(rng, 2, 5, 16, 16)
    cases = {
        "a": (_projected(lambda t: ops.concat_channels(t, b), a, rng), a),
        "b": (_projected(lambda t: ops.concat_channels(a, t), b, rng), b),
    }
    return _check_all(cases, epsilon, seed)


def _loss_check(weights_factory: Callable[[], object]) -> Callable[[float, int], float]:
    def check(epsilon: float, seed: int) -> float:
        from src.services.losses.service import combined_loss
        from src.services.losses.schemas.losses import SsimConfig

        rng = np.random.default_rng(seed)
        pred = _random(rng, 2, 3, 16, 16, low=0.05, high=0.95)
        target = _random(rng, 2, 3, 16, 16, low=0.0, high=1.0)
        weights = weights_factory()
        cfg = SsimConfig()
        fn = lambda t: combined_loss(t, target, weights, cfg)
        return _check_all({"pred": (fn, pred)}, epsilon, seed)

    return check


def _mse_weights():
    from src.services.losses.schemas.losses import LossWeights

    return LossWeights(mse=1.0, ssim=0.0)


def _ssim_weights():
    from src.services.losses.schemas.losses import LossWeights

    return LossWeights(mse=0.0, ssim=1.0)


def _combined_weights():
    from src.services.losses.schemas.losses import LossWeights

    return LossWeights()


# ==================== WHOLE MODELS ====================

# relu kinks inside a full model sit closer together than in the single-op checks
ARCH_EPSILON = 1e-6
ARCH_SAMPLES_PER_LAYER = 20
ARCH_INPUT_SIZE = 32


def _layer_sample_counts(sizes: Sequence[int], total: int) -> List[int]:
    """Spread `total` samples over tensors, smallest first, so a layer gets min(total, its size)."""
    counts = [0] * len(sizes)
    remaining = total
    order = sorted(range(len(sizes)), key=lambda i: sizes[i])
    for position, index in enumerate(order):
        share = -(-remaining // (len(order) - position))
        counts[index] = min(sizes[index], share)
        remaining -= counts[index]
    return counts


def _architecture_check(kind: str) -> Callable[[float, int], float]:
    def check(epsilon: float, seed: int) -> float:
        from src.services.architectures.schemas.architectures import ArchitectureConfig
        from src.services.architectures.service import build_model
        from src.services.losses.service import combined_loss

        eps = min(epsilon, ARCH_EPSILON)
        size = ARCH_INPUT_SIZE
        config = ArchitectureConfig(kind=kind, base_channels=4, input_size=(size, size))
        model = build_model(config, seed).astype(np.float64)
        rng = np.random.default_rng(seed)
        current = rng.uniform(0.0, 1.0, (2, config.in_channels, size, size))
        previous = rng.uniform(0.0, 1.0, current.shape) if model.uses_previous else None
        target = rng.uniform(0.0, 1.0, current.shape)
        loss = lambda _: combined_loss(model.forward(current, previous, mode="train"), target)

        worst = 0.0
        for layer in model.layers:
            tensors = [t for name, t in model.params.items() if name.split(".", 1)[0] == layer.name]
            counts = _layer_sample_counts([t.size for t in tensors], ARCH_SAMPLES_PER_LAYER)
            for tensor, samples in zip(tensors, counts):
                err = finite_difference_check(loss, tensor, epsilon=eps, samples=samples, seed=seed)
                logger.debug(f"  {kind} {tensor.name}: max relative error {err:.3e} over {samples} samples")
                worst = max(worst, err)
        return worst

    return check


OP_CHECKS: Dict[str, tuple] = {
    "conv_separable": (_check_conv, OP_TOLERANCE),
    "upsample_nearest": (_check_upsample, OP_TOLERANCE),
    "batch_norm": (_check_batch_norm, OP_TOLERANCE),
    "relu": (_check_relu, OP_TOLERANCE),
    "sigmoid": (_check_sigmoid, OP_TOLERANCE),
    "concat_channels": (_check_concat, OP_TOLERANCE),
    "mse": (_loss_check(_mse_weights), LOSS_TOLERANCE),
    "ssim": (_loss_check(_ssim_weights), LOSS_TOLERANCE),
    "combined_loss": (_loss_check(_combined_weights), LOSS_TOLERANCE),
    "ae": (_architecture_check("AE"), LOSS_TOLERANCE),
    "scae": (_architecture_check("SCAE"), LOSS_TOLERANCE),
    "stae": (_architecture_check("STAE"), LOSS_TOLERANCE),
}


def run_checks(
    names: Optional[Sequence[str]] = None,
    tolerance: Optional[float] = None,
    epsilon: float = 1e-3,
    seed: int = 0,
) -> List[CheckResult]:
    """Run the named checks (all by default). `tolerance` overrides the op tolerance;
    loss checks never use less than the loss tolerance."""
    selected = list(OP_CHECKS) if not names or "all" in names else list(names)
    unknown = [n for n in selected if n not in OP_CHECKS]
    if unknown:
        raise ContractViolation(f"Unknown gradcheck op(s): {', '.join(unknown)}; choose from {', '.join(OP_CHECKS)}")
    results = []
    for name in selected:
        check, default_tol = OP_CHECKS[name]
        tol = default_tol
        if tolerance is not None:
            tol = max(tolerance, LOSS_TOLERANCE) if default_tol == LOSS_TOLERANCE else tolerance
        error = check(epsilon, seed)
        result = CheckResult(name=name, max_error=error, tolerance=tol)
        logger.info(f"gradcheck {name}: max relative error {error:.3e} (tolerance {tol:g}) "
                    f"{'PASS' if result.passed else 'FAIL'}")
        results.append(result)
    return results
