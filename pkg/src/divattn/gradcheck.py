"""Central finite-difference check of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Hyperparams
from .core import make_rng
from .errors import InvalidInputError, NumericError
from .model import ModelParams, backward, forward, init_params
from .oim import OimState

MIN_COORDS = 200


@dataclass
class Instance:
    params: ModelParams
    grids: np.ndarray
    label: int
    state: OimState
    loss_weight: float = 1.0


def random_instance(rng: np.random.Generator, N=None, K=None, L=None, D=None, d=None, E=None,
                    C=None, penalty="Q", lambda_div=0.1, feature_scale=0.5, **overrides) -> Instance:
    """A tiny random problem with every parameter block perturbed off zero.

    ``feature_scale`` sets the cell-feature standard deviation; around 0.5
    keeps the cross-frame contribution softmax out of saturation, where
    gradients fall to the finite-difference noise floor.
    """
    N = N or int(rng.integers(3, 7))
    K = K or int(rng.integers(1, 5))
    L = L or int(rng.integers(4, 9))
    D = D or int(rng.integers(4, 9))
    d = d or int(rng.integers(2, 5))
    E = E or int(rng.integers(3, 7))
    C = C or int(rng.integers(2, 6))
    grid_h = 2 if L % 2 == 0 else 1
    hyper = Hyperparams(
        N=N, K=K, grid_h=grid_h, grid_w=L // grid_h, D=D, d=d, E=E,
        penalty=penalty, lambda_div=lambda_div, **overrides,
    ).validate()
    params = init_params(hyper, classes=C, seed=int(rng.integers(2**32)))
    a = params.arrays
    for name in a:
        if name.endswith((".b", ".b2", "b_pos", "fcn_b")) or name.startswith("enhance."):
            a[name] = 0.3 * rng.standard_normal(a[name].shape)
    a["spatial.W"] *= 2.0
    table = rng.standard_normal((C, E))
    table /= np.linalg.norm(table, axis=1, keepdims=True)
    state = OimState(table, temperature=hyper.tau, momentum=hyper.gamma)
    grids = feature_scale * rng.standard_normal((N, L, D))
    return Instance(params, grids, int(rng.integers(C)), state)


def objective(inst: Instance, params: ModelParams | None = None) -> float:
    p = params or inst.params
    return forward(inst.grids, p, inst.state, inst.label, loss_weight=inst.loss_weight)[0].total


def _terms(inst: Instance, params: ModelParams) -> tuple[float, float]:
    report = forward(inst.grids, params, inst.state, inst.label, loss_weight=inst.loss_weight)[0]
    h = params.hyper
    return inst.loss_weight * report.oim_loss, h.lambda_div * report.diversity_penalty


def analytic_gradient(inst: Instance) -> dict:
    return backward(forward(inst.grids, inst.params, inst.state, inst.label, loss_weight=inst.loss_weight)[1])


def check_arrays(terms, arrays: dict, analytic: dict, eps: float = 1e-5, *,
                 coords: int = MIN_COORDS, seed: int = 0, names=None) -> dict:
    """Central-difference check of ``analytic`` against any objective.

    ``terms()`` evaluates the objective at the current contents of ``arrays``
    (which are perturbed in place and restored) and returns a tuple of
    addends; each addend is differenced on its own before summing. Each array
    is checked on ``coords`` randomly chosen entries, or all of them if it is
    smaller. Relative error uses ``max(|analytic|, |numeric|, 1e-8)`` as the
    denominator. Returns ``{array name: worst error}``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise InvalidInputError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    rng = make_rng(seed)
    report = {}
    for name in names or list(arrays):
        flat = arrays[name].reshape(-1)
        if not np.shares_memory(flat, arrays[name]):
            raise InvalidInputError(f"array {name!r} must be contiguous to be perturbed in place")
        idx = np.arange(flat.size) if flat.size <= coords else rng.choice(flat.size, coords, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            plus = tuple(terms())
            flat[i] = orig - eps
            minus = tuple(terms())
            flat[i] = orig
            if not np.all(np.isfinite(plus + minus)):
                raise NumericError(f"non-finite objective while perturbing {name}", group=name)
            numeric = sum(p - m for p, m in zip(plus, minus)) / (2 * eps)
            exact = analytic[name].reshape(-1)[i]
            err = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            worst = max(worst, err)
        report[name] = worst
    return report


def grad_check(params: ModelParams, instance: Instance, eps: float = 1e-5, *,
               analytic: dict | None = None, coords: int = MIN_COORDS, seed: int = 0,
               names=None) -> dict:
    """Worst relative error per parameter array for the full model objective.

    The identity-loss and penalty terms are differenced separately and then
    added, so a large penalty does not swamp a small loss gradient through
    cancellation.
    """
    inst = Instance(params, instance.grids, instance.label, instance.state, instance.loss_weight)
    if analytic is None:
        analytic = analytic_gradient(inst)
    work = params.copy()
    return check_arrays(lambda: _terms(inst, work), work.arrays, analytic, eps,
                        coords=coords, seed=seed, names=names)
